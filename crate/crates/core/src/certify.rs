//! Sufficiency checks for minimizers.
//!
//! * [`check_convexity`] samples the gradient inequality
//!   `L(x, u+u₁, v+v₁) - L(x, u, v) >= ∂_u L u₁ + ∂_v L v₁` over a box and
//!   cross-checks with the sign of the `(u, v)` Hessian. This is a
//!   sampling-based certificate, not a proof.
//! * [`excess`] is the Weierstrass excess function in the `v` slot.
//! * [`check_field`] and [`verify_field_minimizer`] test a given slope field
//!   `Φ(x, y)` and potential `S(x, y)` and compare `J(y₀)` against
//!   `S(b, I y₀(b)) - S(a, I y₀(a))` along a trajectory of `D^α y = Φ(x, I^{1-α} y)`.
//!
//! In `L` the variables are `x`, `u`, `v`; in `Φ` and `S` they are `x`, `y`,
//! where `y` occupies the `u` slot of `L`.

use thiserror::Error;

use crate::expr::{EvalError, Expr, VarBinding};
use crate::fracops::{build_left_rlfd, build_left_rlfi, FracError, FracOrder, Grid, SampledFn};

const GRADIENT_TOL: f64 = 1e-9;
const HESSIAN_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-8;
const EXCESS_TOL: f64 = 1e-9;
/// Samples per axis used by [`verify_field_minimizer`] for the identity check.
pub const FIELD_SAMPLES: usize = 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("{which} uses variable {var:?}; allowed: {allowed}")]
    UnknownVariable {
        which: &'static str,
        var: String,
        allowed: &'static str,
    },
    #[error("box bounds must be finite with lo <= hi")]
    BadBox,
    #[error("need at least {min} samples per axis, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error("evaluation failed at node {node}: {source}")]
    Eval {
        node: usize,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Expr(#[from] EvalError),
}

fn check_vars(
    which: &'static str,
    e: &Expr,
    allowed: &'static [&'static str],
) -> Result<(), CertifyError> {
    match e
        .free_vars()
        .into_iter()
        .find(|v| !allowed.contains(&v.as_str()))
    {
        Some(var) => Err(CertifyError::UnknownVariable {
            which,
            var,
            allowed: if allowed.len() == 3 {
                "x, u, v"
            } else {
                "x, y"
            },
        }),
        None => Ok(()),
    }
}

const LAGRANGIAN_VARS: &[&str] = &["x", "u", "v"];
const FIELD_VARS: &[&str] = &["x", "y"];

fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Sampling region for `(x, u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexBox {
    pub x: (f64, f64),
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl ConvexBox {
    fn validate(&self) -> Result<(), CertifyError> {
        for (lo, hi) in [self.x, self.u, self.v] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(CertifyError::BadBox);
            }
        }
        Ok(())
    }
}

/// A sampled violation of the gradient inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterexample {
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    /// `L(x,u+du,v+dv) - L(x,u,v) - ∂_u L du - ∂_v L dv`; negative.
    pub violation: f64,
}

impl Counterexample {
    /// Recomputes the gradient-inequality gap at this point.
    pub fn reevaluate(&self, l: &Expr) -> Result<f64, EvalError> {
        gradient_gap(
            l,
            &l.differentiate("u"),
            &l.differentiate("v"),
            self.x,
            self.u,
            self.v,
            self.du,
            self.dv,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub convex: bool,
    pub counterexample: Option<Counterexample>,
    /// Whether the sampled Hessian test alone passed.
    pub hessian_psd: bool,
    /// Base points where `L` or a partial could not be evaluated.
    pub inconclusive: Vec<[f64; 3]>,
    pub region: ConvexBox,
    pub samples_per_axis: usize,
}

#[allow(clippy::too_many_arguments)]
fn gradient_gap(
    l: &Expr,
    lu: &Expr,
    lv: &Expr,
    x: f64,
    u: f64,
    v: f64,
    du: f64,
    dv: f64,
) -> Result<f64, EvalError> {
    let at = |u: f64, v: f64| VarBinding::new().with("x", x).with("u", u).with("v", v);
    let base = at(u, v);
    Ok(l.eval(&at(u + du, v + dv))? - l.eval(&base)? - lu.eval(&base)? * du - lv.eval(&base)? * dv)
}

/// Sampled joint convexity of `L(x, ·, ·)` on `region`.
pub fn check_convexity(
    l: &Expr,
    region: ConvexBox,
    samples_per_axis: usize,
) -> Result<ConvexityReport, CertifyError> {
    check_vars("lagrangian", l, LAGRANGIAN_VARS)?;
    region.validate()?;
    if samples_per_axis < 3 {
        return Err(CertifyError::TooFewSamples {
            min: 3,
            got: samples_per_axis,
        });
    }
    let n = samples_per_axis;
    let xs = axis(region.x, n);
    let us = axis(region.u, n);
    let vs = axis(region.v, n);
    let lu = l.differentiate("u");
    let lv = l.differentiate("v");
    let luu = lu.differentiate("u");
    let luv = lu.differentiate("v");
    let lvv = lv.differentiate("v");

    let mut inconclusive = Vec::new();
    let mut worst: Option<Counterexample> = None;
    let mut hessian_psd = true;
    let mut hessian_witness: Option<([f64; 3], [f64; 2])> = None;

    for &x in &xs {
        // Values of L, L_u, L_v on the (u, v) sample plane at this x.
        let mut table = vec![None; n * n];
        for (a, &u) in us.iter().enumerate() {
            for (b, &v) in vs.iter().enumerate() {
                let env = VarBinding::new().with("x", x).with("u", u).with("v", v);
                let vals =
                    (|| Ok::<_, EvalError>((l.eval(&env)?, lu.eval(&env)?, lv.eval(&env)?)))();
                match vals {
                    Ok(t) => table[a * n + b] = Some(t),
                    Err(_) => inconclusive.push([x, u, v]),
                }
                if let Ok((huu, huv, hvv)) =
                    (|| Ok::<_, EvalError>((luu.eval(&env)?, luv.eval(&env)?, lvv.eval(&env)?)))()
                {
                    let det = huu * hvv - huv * huv;
                    if huu < -HESSIAN_TOL || hvv < -HESSIAN_TOL || det < -HESSIAN_TOL {
                        if hessian_psd {
                            hessian_witness = Some(([x, u, v], descent_direction(huu, huv, hvv)));
                        }
                        hessian_psd = false;
                    }
                }
            }
        }
        for (p, base) in table.iter().enumerate() {
            let Some((l0, gu, gv)) = *base else { continue };
            let (u, v) = (us[p / n], vs[p % n]);
            for (q, target) in table.iter().enumerate() {
                let Some((l1, _, _)) = *target else { continue };
                let (du, dv) = (us[q / n] - u, vs[q % n] - v);
                let gap = l1 - l0 - gu * du - gv * dv;
                if gap < -GRADIENT_TOL && worst.is_none_or(|w| gap < w.violation) {
                    worst = Some(Counterexample {
                        x,
                        u,
                        v,
                        du,
                        dv,
                        violation: gap,
                    });
                }
            }
        }
    }

    if worst.is_none() {
        if let Some((p, d)) = hessian_witness {
            worst = curvature_counterexample(l, &lu, &lv, &region, p, d);
        }
    }

    Ok(ConvexityReport {
        convex: worst.is_none() && hessian_psd,
        counterexample: worst,
        hessian_psd,
        inconclusive,
        region,
        samples_per_axis,
    })
}

/// Unit direction of the most negative curvature of `[[a, b], [b, c]]`.
fn descent_direction(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lambda = mean - rad;
    let (du, dv) = if b.abs() > 1e-300 {
        (b, lambda - a)
    } else if a <= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (du * du + dv * dv).sqrt();
    [du / norm, dv / norm]
}

/// Walks along a negative-curvature direction looking for the most negative
/// gradient-inequality gap that stays inside the box.
fn curvature_counterexample(
    l: &Expr,
    lu: &Expr,
    lv: &Expr,
    region: &ConvexBox,
    [x, u, v]: [f64; 3],
    [du, dv]: [f64; 2],
) -> Option<Counterexample> {
    let span = (region.u.1 - region.u.0)
        .max(region.v.1 - region.v.0)
        .max(1e-6);
    let inside =
        |a: f64, b: f64| a >= region.u.0 && a <= region.u.1 && b >= region.v.0 && b <= region.v.1;
    let mut best: Option<Counterexample> = None;
    for k in 0..40 {
        let t = span * 0.5f64.powi(k);
        for s in [t, -t] {
            let (a, b) = (s * du, s * dv);
            if !inside(u + a, v + b) {
                continue;
            }
            if let Ok(gap) = gradient_gap(l, lu, lv, x, u, v, a, b) {
                if gap < 0.0 && best.is_none_or(|c| gap < c.violation) {
                    best = Some(Counterexample {
                        x,
                        u,
                        v,
                        du: a,
                        dv: b,
                        violation: gap,
                    });
                }
            }
        }
    }
    best
}

/// `E = L(x,u,w) - L(x,u,z) - ∂_v L(x,u,z) (w - z)`.
pub fn excess(l: &Expr, x: f64, u: f64, z: f64, w: f64) -> Result<f64, EvalError> {
    excess_with(l, &l.differentiate("v"), x, u, z, w)
}

fn excess_with(l: &Expr, lv: &Expr, x: f64, u: f64, z: f64, w: f64) -> Result<f64, EvalError> {
    let at = |v: f64| VarBinding::new().with("x", x).with("u", u).with("v", v);
    let base = at(z);
    Ok(l.eval(&at(w))? - l.eval(&base)? - lv.eval(&base)? * (w - z))
}

/// Slope field `Φ(x, y)` with potential `S(x, y)` on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactField {
    pub phi: Expr,
    pub s: Expr,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl ExactField {
    pub fn new(
        phi: Expr,
        s: Expr,
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Result<Self, CertifyError> {
        check_vars("phi", &phi, FIELD_VARS)?;
        check_vars("s", &s, FIELD_VARS)?;
        for (lo, hi) in [x_range, y_range] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(CertifyError::BadBox);
            }
        }
        Ok(Self {
            phi,
            s,
            x_range,
            y_range,
        })
    }

    fn eval(&self, e: &Expr, x: f64, y: f64) -> Result<f64, EvalError> {
        e.eval(&VarBinding::new().with("x", x).with("y", y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldCheckReport {
    pub pass: bool,
    /// Max of `|∂_x S - (L - ∂_v L Φ)|` over conclusive samples.
    pub max_residual_x: f64,
    /// Max of `|∂_y S - ∂_v L|` over conclusive samples.
    pub max_residual_y: f64,
    pub inconclusive: Vec<[f64; 2]>,
    pub samples: usize,
}

/// Checks `∂_x S = L(x,y,Φ) - ∂_v L(x,y,Φ) Φ` and `∂_y S = ∂_v L(x,y,Φ)` on an
/// `nx × ny` sample grid of the field's domain.
pub fn check_field(
    l: &Expr,
    field: &ExactField,
    nx: usize,
    ny: usize,
) -> Result<FieldCheckReport, CertifyError> {
    check_vars("lagrangian", l, LAGRANGIAN_VARS)?;
    if nx < 2 || ny < 2 {
        return Err(CertifyError::TooFewSamples {
            min: 2,
            got: nx.min(ny),
        });
    }
    let lv = l.differentiate("v");
    let sx = field.s.differentiate("x");
    let sy = field.s.differentiate("y");
    let mut max_x: f64 = 0.0;
    let mut max_y: f64 = 0.0;
    let mut inconclusive = Vec::new();
    for x in axis(field.x_range, nx) {
        for y in axis(field.y_range, ny) {
            let res = (|| {
                let phi = field.eval(&field.phi, x, y)?;
                let env = VarBinding::new().with("x", x).with("u", y).with("v", phi);
                let lval = l.eval(&env)?;
                let p = lv.eval(&env)?;
                let rx = field.eval(&sx, x, y)? - (lval - p * phi);
                let ry = field.eval(&sy, x, y)? - p;
                Ok::<_, EvalError>((rx, ry))
            })();
            match res {
                Ok((rx, ry)) => {
                    max_x = max_x.max(rx.abs());
                    max_y = max_y.max(ry.abs());
                }
                Err(_) => inconclusive.push([x, y]),
            }
        }
    }
    let conclusive = nx * ny - inconclusive.len();
    Ok(FieldCheckReport {
        pass: conclusive > 0 && max_x <= IDENTITY_TOL && max_y <= IDENTITY_TOL,
        max_residual_x: max_x,
        max_residual_y: max_y,
        inconclusive,
        samples: nx * ny,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldVerdict {
    /// All checks passed: `y₀` minimizes among curves sharing its integral
    /// channel endpoint values.
    Minimizer,
    FieldCheckFailed,
    NotFieldTrajectory,
    NegativeExcess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMinimizerReport {
    pub verdict: FieldVerdict,
    pub field_check: FieldCheckReport,
    /// Interior weighted norm of `D^α y₀ - Φ(x, I^{1-α} y₀)`.
    pub field_residual_norm: f64,
    /// `10 h^{min(α, 1-α)}`.
    pub field_tol: f64,
    pub j: f64,
    /// `S(b, I y₀(b)) - S(a, I y₀(a))`.
    pub field_value: f64,
    pub gap: f64,
    pub min_excess: f64,
    pub v_convex_along_path: bool,
    pub integral_channel: Vec<f64>,
    pub derivative_channel: Vec<f64>,
    /// `D^α y₀ - Φ(x, I^{1-α} y₀)` at every node.
    pub field_residual: Vec<f64>,
    pub excess_samples: Vec<f64>,
}

/// Checks that `y₀` follows the field and compares `J(y₀)` with the field
/// value for `J(y) = ∫ L(x, I^{1-α} y, D^α y) dx`.
pub fn verify_field_minimizer(
    l: &Expr,
    field: &ExactField,
    y0: &SampledFn,
    alpha: FracOrder,
) -> Result<FieldMinimizerReport, CertifyError> {
    let field_check = check_field(l, field, FIELD_SAMPLES, FIELD_SAMPLES)?;
    let grid: Grid = *y0.grid();
    let iy = build_left_rlfi(grid, alpha.complement())?.apply(y0.values())?;
    let dy = build_left_rlfd(grid, alpha)?.apply(y0.values())?;
    let lv = l.differentiate("v");
    let lvv = lv.differentiate("v");
    let node_err = |node: usize| move |source: EvalError| CertifyError::Eval { node, source };

    let mut field_res = Vec::with_capacity(grid.len());
    let mut integrand = Vec::with_capacity(grid.len());
    let mut excess_samples = Vec::with_capacity(grid.len());
    let mut v_convex = true;
    for (n, x) in grid.nodes().enumerate() {
        let phi = field.eval(&field.phi, x, iy[n]).map_err(node_err(n))?;
        field_res.push(dy[n] - phi);
        let env = |v: f64| VarBinding::new().with("x", x).with("u", iy[n]).with("v", v);
        integrand.push(l.eval(&env(dy[n])).map_err(node_err(n))?);
        excess_samples.push(excess_with(l, &lv, x, iy[n], phi, dy[n]).map_err(node_err(n))?);
        for v in [phi, dy[n]] {
            if lvv.eval(&env(v)).map_err(node_err(n))? < -EXCESS_TOL {
                v_convex = false;
            }
        }
    }

    let field_residual_norm = grid.interior_norm(&field_res);
    let a = alpha.value();
    let field_tol = 10.0 * grid.h().powf(a.min(1.0 - a));
    let j = grid.integrate(&integrand);
    let last = grid.n_cells();
    let field_value =
        field.eval(&field.s, grid.b(), iy[last])? - field.eval(&field.s, grid.a(), iy[0])?;
    let min_excess = excess_samples.iter().copied().fold(f64::INFINITY, f64::min);

    let verdict = if !field_check.pass {
        FieldVerdict::FieldCheckFailed
    } else if field_residual_norm > field_tol {
        FieldVerdict::NotFieldTrajectory
    } else if v_convex && min_excess < -EXCESS_TOL {
        FieldVerdict::NegativeExcess
    } else {
        FieldVerdict::Minimizer
    };

    Ok(FieldMinimizerReport {
        verdict,
        field_check,
        field_residual_norm,
        field_tol,
        j,
        field_value,
        gap: (j - field_value).abs(),
        min_excess,
        v_convex_along_path: v_convex,
        integral_channel: iy,
        derivative_channel: dy,
        field_residual: field_res,
        excess_samples,
    })
}
