//! Direct minimization of discretized fractional functionals.
//!
//! [`minimize`] runs gradient descent with Armijo backtracking on the node
//! values of the unknowns. Pinned endpoint nodes are held fixed. The first
//! trial step is `step_init`; later trial steps use the Barzilai–Borwein
//! length `sᵀs / sᵀΔg`, which is then backtracked until the Armijo condition
//! holds, so the objective never increases.
//!
//! [`solve_isoperimetric`] handles one integral constraint in the normal case
//! (`λ₀ = 1`): it runs a secant iteration on the multiplier `λ` so that the
//! minimizer of `J + λ 𝓘` meets the constraint. The abnormal case `λ₀ = 0`
//! is only detected and reported.

use thiserror::Error;

use crate::fracops::{Grid, SampledFn};
use crate::varproblem::{augmented_lagrangian, Discretization, ProblemError, VarProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("minimize expects an unconstrained problem; use solve_isoperimetric")]
    Constrained,
    #[error("initial guess for unknown {unknown} violates the {side} pin: expected {expected}, found {found}")]
    PinViolation {
        unknown: usize,
        side: &'static str,
        expected: f64,
        found: f64,
    },
    #[error("non-finite {what} at iteration {iter}")]
    NonFinite { iter: usize, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Stop once the weighted residual norm over free nodes drops below this.
    pub grad_tol: f64,
    pub step_init: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Acceptable `|𝓘(y) - ℓ|` for constrained solves.
    pub multiplier_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-8,
            step_init: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            multiplier_tol: 1e-6,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SolveError::Config(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("grad_tol", self.grad_tol)?;
        positive("step_init", self.step_init)?;
        positive("multiplier_tol", self.multiplier_tol)?;
        for (name, v) in [
            ("armijo_c", self.armijo_c),
            ("armijo_shrink", self.armijo_shrink),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SolveError::Config(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    /// Backtracking shrank the step to nothing without meeting Armijo.
    LineSearchStalled,
    /// Constrained solve gave up: the minimizer may be an extremal of the
    /// constraint functional (`λ₀ = 0`).
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub j: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub y: Vec<SampledFn>,
    /// Functional value of the original problem at `y`.
    pub j: f64,
    /// Weighted Euler-Lagrange residual norm over free nodes (of the
    /// augmented Lagrangian, for constrained solves).
    pub residual_norm: f64,
    pub lambda: Option<f64>,
    /// `𝓘(y) - ℓ`.
    pub constraint_gap: Option<f64>,
    pub iters: usize,
    pub outer_iters: usize,
    pub converged: bool,
    pub status: SolveStatus,
    pub history: Vec<IterRecord>,
    pub warnings: Vec<String>,
}

/// Zero, moved onto the pins by linear interpolation.
pub fn initial_guess(p: &VarProblem, grid: &Grid) -> Vec<SampledFn> {
    p.pins()
        .iter()
        .map(|pins| {
            let left = pins.left.unwrap_or(0.0);
            let right = pins.right.unwrap_or(0.0);
            let span = grid.b() - grid.a();
            grid.sample(|x| left + (right - left) * (x - grid.a()) / span)
        })
        .collect()
}

/// Gradient of `J_h` with respect to every node value, one row per unknown.
pub fn gradient(
    p: &VarProblem,
    ys: &[SampledFn],
    grid: &Grid,
) -> Result<Vec<Vec<f64>>, SolveError> {
    let disc = Discretization::new(p, *grid)?;
    Ok(disc.gradient(&to_rows(ys, grid)?)?)
}

fn to_rows(ys: &[SampledFn], grid: &Grid) -> Result<Vec<Vec<f64>>, ProblemError> {
    ys.iter()
        .map(|y| {
            if y.grid() != grid {
                Err(crate::fracops::FracError::GridMismatch.into())
            } else {
                Ok(y.values().to_vec())
            }
        })
        .collect()
}

fn free_mask(p: &VarProblem, grid: &Grid) -> Vec<Vec<bool>> {
    p.pins()
        .iter()
        .map(|pins| {
            let mut m = vec![true; grid.len()];
            if pins.left.is_some() {
                m[0] = false;
            }
            if pins.right.is_some() {
                m[grid.n_cells()] = false;
            }
            m
        })
        .collect()
}

fn check_pins(p: &VarProblem, ys: &[Vec<f64>]) -> Result<(), SolveError> {
    for (k, (pins, y)) in p.pins().iter().zip(ys).enumerate() {
        for (side, pin, found) in [
            ("left", pins.left, y.first()),
            ("right", pins.right, y.last()),
        ] {
            if let (Some(expected), Some(&found)) = (pin, found) {
                if expected != found {
                    return Err(SolveError::PinViolation {
                        unknown: k,
                        side,
                        expected,
                        found,
                    });
                }
            }
        }
    }
    Ok(())
}

fn mask(g: &mut [Vec<f64>], free: &[Vec<bool>]) {
    for (row, m) in g.iter_mut().zip(free) {
        for (v, &f) in row.iter_mut().zip(m) {
            if !f {
                *v = 0.0;
            }
        }
    }
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

/// `sqrt(Σ g_i² / ω_i)`: the weighted norm of the residual `g / ω`.
fn residual_norm(g: &[Vec<f64>], grid: &Grid) -> f64 {
    g.iter()
        .flat_map(|row| row.iter().enumerate().map(|(i, v)| v * v / grid.weight(i)))
        .sum::<f64>()
        .sqrt()
}

fn all_finite(g: &[Vec<f64>]) -> bool {
    g.iter().flatten().all(|v| v.is_finite())
}

struct Descent {
    ys: Vec<Vec<f64>>,
    j: f64,
    residual_norm: f64,
    iters: usize,
    status: SolveStatus,
    history: Vec<IterRecord>,
}

fn descend(
    disc: &Discretization<'_>,
    cfg: &SolveConfig,
    mut ys: Vec<Vec<f64>>,
) -> Result<Descent, SolveError> {
    let grid = *disc.grid();
    let free = free_mask(disc.problem(), &grid);

    let mut ch = disc.channels(&ys)?;
    let mut j = disc.functional_from(&ch)?;
    if !j.is_finite() {
        return Err(SolveError::NonFinite {
            iter: 0,
            what: "functional",
        });
    }
    let mut g = disc.gradient_from(&ch)?;
    mask(&mut g, &free);
    if !all_finite(&g) {
        return Err(SolveError::NonFinite {
            iter: 0,
            what: "gradient",
        });
    }

    let mut history = Vec::new();
    let mut step = cfg.step_init;
    let mut iters = 0;
    let status = loop {
        let gnorm = residual_norm(&g, &grid);
        history.push(IterRecord {
            j,
            grad_norm: gnorm,
        });
        if gnorm <= cfg.grad_tol {
            break SolveStatus::Converged;
        }
        if iters >= cfg.max_iters {
            break SolveStatus::MaxIters;
        }

        let gg = dot(&g, &g);
        // Trial channels are ch - step·dch, so each trial costs O(N).
        let dch = disc.channels(&g)?;
        let mut accepted = None;
        for _ in 0..200 {
            let tch = ch.axpy(-step, &dch);
            // Domain errors at a trial point just mean the step is too long.
            if let Ok(jt) = disc.functional_from(&tch) {
                if jt.is_finite() && jt <= j - cfg.armijo_c * step * gg {
                    accepted = Some((tch, jt, step));
                    break;
                }
            }
            step *= cfg.armijo_shrink;
            if step == 0.0 {
                break;
            }
        }
        let Some((nch, jn, taken)) = accepted else {
            break SolveStatus::LineSearchStalled;
        };
        iters += 1;
        let next: Vec<Vec<f64>> = ys
            .iter()
            .zip(&g)
            .map(|(y, d)| y.iter().zip(d).map(|(a, b)| a - taken * b).collect())
            .collect();

        let mut gn = disc.gradient_from(&nch)?;
        mask(&mut gn, &free);
        if !all_finite(&gn) {
            return Err(SolveError::NonFinite {
                iter: iters,
                what: "gradient",
            });
        }

        // Barzilai–Borwein trial length for the next iteration.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for (k, row) in next.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let s = v - ys[k][i];
                ss += s * s;
                sy += s * (gn[k][i] - g[k][i]);
            }
        }
        step = if sy > 0.0 && ss > 0.0 {
            ss / sy
        } else {
            cfg.step_init
        };

        ys = next;
        ch = nch;
        j = jn;
        g = gn;
    };

    // Recompute from the iterate itself rather than the accumulated channels.
    let j = disc.functional(&ys)?;
    let mut g = disc.gradient(&ys)?;
    mask(&mut g, &free);

    Ok(Descent {
        residual_norm: residual_norm(&g, &grid),
        ys,
        j,
        iters,
        status,
        history,
    })
}

fn samples(rows: Vec<Vec<f64>>, grid: &Grid) -> Vec<SampledFn> {
    rows.into_iter()
        .map(|r| SampledFn::new(*grid, r).expect("length preserved"))
        .collect()
}

/// Minimizes `J_h` over free node values starting from `y0`.
pub fn minimize(
    p: &VarProblem,
    grid: &Grid,
    cfg: &SolveConfig,
    y0: &[SampledFn],
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    if p.constraint().is_some() {
        return Err(SolveError::Constrained);
    }
    let rows = to_rows(y0, grid)?;
    check_pins(p, &rows)?;
    let disc = Discretization::new(p, *grid)?;
    let out = descend(&disc, cfg, rows)?;
    Ok(SolveReport {
        y: samples(out.ys, grid),
        j: out.j,
        residual_norm: out.residual_norm,
        lambda: None,
        constraint_gap: None,
        iters: out.iters,
        outer_iters: 0,
        converged: out.status == SolveStatus::Converged,
        status: out.status,
        history: out.history,
        warnings: Vec::new(),
    })
}

const MAX_OUTER: usize = 50;
const STAGNATION_STEPS: usize = 5;
const DEGENERATE_GRADIENT: f64 = 1e-10;

/// Minimizes `J_h` subject to `𝓘_h(y) = ℓ` by a secant iteration on `λ`.
pub fn solve_isoperimetric(
    p: &VarProblem,
    grid: &Grid,
    cfg: &SolveConfig,
    y0: &[SampledFn],
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let constraint = p.constraint().ok_or(ProblemError::MissingConstraint)?;
    let ell = constraint.ell;
    let mut rows = to_rows(y0, grid)?;
    check_pins(p, &rows)?;
    let original = Discretization::new(p, *grid)?;
    let free = free_mask(p, grid);

    let mut history = Vec::new();
    let mut iters = 0;
    let mut warnings = Vec::new();

    let inner = |lambda: f64,
                 start: Vec<Vec<f64>>,
                 history: &mut Vec<IterRecord>,
                 iters: &mut usize|
     -> Result<(Descent, f64), SolveError> {
        let k = augmented_lagrangian(p, lambda)?;
        let disc = Discretization::new(&k, *grid)?;
        let out = descend(&disc, cfg, start)?;
        *iters += out.iters;
        history.extend_from_slice(&out.history);
        let phi = original.constraint_value(&out.ys)? - ell;
        Ok((out, phi))
    };

    let mut lambda_prev = 0.0;
    let (mut out, mut phi_prev) = inner(lambda_prev, rows, &mut history, &mut iters)?;
    let mut lambda = lambda_prev;
    let mut phi = phi_prev;
    let mut outer = 1;
    let mut best = phi.abs();
    let mut since_best = 0;
    let mut abnormal = false;

    if phi.abs() > cfg.multiplier_tol {
        let mut cg = original.constraint_gradient(&out.ys)?;
        mask(&mut cg, &free);
        if residual_norm(&cg, grid) <= DEGENERATE_GRADIENT {
            abnormal = true;
            warnings.push(
                "constraint gradient vanishes: y may be an extremal of the constraint \
                 functional (abnormal case, lambda_0 = 0); not solved"
                    .to_string(),
            );
        } else {
            lambda = lambda_prev + if phi > 0.0 { 1.0 } else { -1.0 };
            rows = out.ys.clone();
            let (o, ph) = inner(lambda, rows, &mut history, &mut iters)?;
            out = o;
            phi = ph;
            outer += 1;
        }
    }

    while !abnormal && phi.abs() > cfg.multiplier_tol && outer < MAX_OUTER {
        if phi.abs() < best {
            best = phi.abs();
            since_best = 0;
        } else {
            since_best += 1;
        }
        let slope = (phi - phi_prev) / (lambda - lambda_prev);
        if since_best >= STAGNATION_STEPS || !slope.is_finite() || slope == 0.0 {
            abnormal = true;
            warnings.push(format!(
                "multiplier iteration stagnated at |phi| = {:.3e}: y may be an extremal of \
                 the constraint functional (abnormal case, lambda_0 = 0); not solved",
                phi.abs()
            ));
            break;
        }
        let next = lambda - phi / slope;
        lambda_prev = lambda;
        phi_prev = phi;
        lambda = next;
        rows = out.ys.clone();
        let (o, ph) = inner(lambda, rows, &mut history, &mut iters)?;
        out = o;
        phi = ph;
        outer += 1;
    }

    let status = if abnormal {
        SolveStatus::Abnormal
    } else if phi.abs() > cfg.multiplier_tol && out.status == SolveStatus::Converged {
        SolveStatus::MaxIters
    } else {
        out.status
    };
    let j = original.functional(&out.ys)?;
    Ok(SolveReport {
        j,
        residual_norm: out.residual_norm,
        lambda: Some(lambda),
        constraint_gap: Some(phi),
        iters,
        outer_iters: outer,
        converged: status == SolveStatus::Converged && phi.abs() <= cfg.multiplier_tol,
        status,
        history,
        warnings,
        y: samples(out.ys, grid),
    })
}
