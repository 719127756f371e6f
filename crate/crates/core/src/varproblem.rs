//! Fractional variational problems and their discrete Euler-Lagrange
//! residuals.
//!
//! A problem minimizes `J(y) = ∫_a^b L(x, u, v) dx` where each `u` channel is
//! a left fractional integral `I^{1-α} y` and each `v` channel a left
//! fractional derivative `D^β y`. Problem data give `α` itself; the integral
//! channel order `1 - α` is derived here.
//!
//! Channel variable names in `L`:
//!
//! | orders | unknowns | names |
//! |--------|----------|-------|
//! | 1 | 1 | `u`, `v` |
//! | n | 1 | `u1..un`, `v1..vm` |
//! | 1 | n | `u1..un`, `v1..vn` (one per unknown) |
//! | n | m | `u{order}_{unknown}`, e.g. `u2_1` |
//!
//! Endpoints are free unless pinned. Residual values near the endpoints are
//! always reported but are not accurate; use [`Residual::interior_norm`] for
//! pass/fail decisions.
//!
//! The admissible class is taken to be sampled functions with finite values.

use thiserror::Error;

use crate::expr::{diff, EvalError, Expr, VarBinding};
use crate::fracops::{
    build_left_rlfd, build_left_rlfi, build_right_adjoint, FracError, FracOperator, FracOrder,
    Grid, SampledFn,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error("a problem needs at least one {0} order")]
    NoOrders(&'static str),
    #[error("a problem needs at least one unknown function")]
    NoUnknowns,
    #[error("{which} uses variable {var:?}, allowed: {allowed}")]
    UnknownVariable {
        which: &'static str,
        var: String,
        allowed: String,
    },
    #[error("expected {expected} unknown function(s), got {found}")]
    UnknownCount { expected: usize, found: usize },
    #[error("operation needs a single-order, single-unknown problem")]
    NotBasic,
    #[error("problem has no isoperimetric constraint")]
    MissingConstraint,
    #[error("pin values must be finite")]
    BadPin,
    #[error("evaluation failed at node {node} (x = {x}): {source}")]
    Eval {
        node: usize,
        x: f64,
        #[source]
        source: EvalError,
    },
}

/// Isoperimetric constraint `∫_a^b g(x, u, v) dx = ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub g: Expr,
    pub ell: f64,
}

/// Optional fixed endpoint values of one unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Pins {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Pins {
    pub fn left(value: f64) -> Self {
        Self {
            left: Some(value),
            right: None,
        }
    }

    pub fn both(left: f64, right: f64) -> Self {
        Self {
            left: Some(left),
            right: Some(right),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarProblem {
    a: f64,
    b: f64,
    alphas: Vec<FracOrder>,
    betas: Vec<FracOrder>,
    unknowns: usize,
    lagrangian: Expr,
    constraint: Option<Constraint>,
    pins: Vec<Pins>,
}

fn channel_name(prefix: char, orders: usize, unknowns: usize, i: usize, k: usize) -> String {
    match (orders, unknowns) {
        (1, 1) => prefix.to_string(),
        (_, 1) => format!("{prefix}{}", i + 1),
        (1, _) => format!("{prefix}{}", k + 1),
        _ => format!("{prefix}{}_{}", i + 1, k + 1),
    }
}

impl VarProblem {
    pub fn new(
        a: f64,
        b: f64,
        alphas: Vec<FracOrder>,
        betas: Vec<FracOrder>,
        unknowns: usize,
        lagrangian: Expr,
    ) -> Result<Self, ProblemError> {
        if !a.is_finite() || !b.is_finite() || b <= a {
            return Err(FracError::InvalidInterval { a, b }.into());
        }
        if alphas.is_empty() {
            return Err(ProblemError::NoOrders("alpha"));
        }
        if betas.is_empty() {
            return Err(ProblemError::NoOrders("beta"));
        }
        if unknowns == 0 {
            return Err(ProblemError::NoUnknowns);
        }
        let p = Self {
            a,
            b,
            alphas,
            betas,
            unknowns,
            lagrangian,
            constraint: None,
            pins: vec![Pins::default(); unknowns],
        };
        p.check_vars("lagrangian", &p.lagrangian)?;
        Ok(p)
    }

    /// One unknown, one integral channel of order `1 - alpha`, one derivative
    /// channel of order `beta`.
    pub fn basic(
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        lagrangian: Expr,
    ) -> Result<Self, ProblemError> {
        Self::new(
            a,
            b,
            vec![FracOrder::new(alpha)?],
            vec![FracOrder::new(beta)?],
            1,
            lagrangian,
        )
    }

    pub fn with_constraint(mut self, g: Expr, ell: f64) -> Result<Self, ProblemError> {
        self.check_vars("constraint", &g)?;
        self.constraint = Some(Constraint { g, ell });
        Ok(self)
    }

    /// Pins every unknown the same way.
    pub fn with_pins(mut self, pins: Pins) -> Result<Self, ProblemError> {
        self.pins = vec![Self::checked_pins(pins)?; self.unknowns];
        Ok(self)
    }

    pub fn with_pins_for(mut self, unknown: usize, pins: Pins) -> Result<Self, ProblemError> {
        if unknown >= self.unknowns {
            return Err(ProblemError::UnknownCount {
                expected: self.unknowns,
                found: unknown + 1,
            });
        }
        self.pins[unknown] = Self::checked_pins(pins)?;
        Ok(self)
    }

    /// Same problem with different orders; lists must keep their lengths.
    pub fn with_orders(
        &self,
        alphas: Vec<FracOrder>,
        betas: Vec<FracOrder>,
    ) -> Result<Self, ProblemError> {
        if alphas.len() != self.alphas.len() || betas.len() != self.betas.len() {
            return Err(ProblemError::NotBasic);
        }
        Ok(Self {
            alphas,
            betas,
            ..self.clone()
        })
    }

    fn checked_pins(pins: Pins) -> Result<Pins, ProblemError> {
        let ok = |v: Option<f64>| v.is_none_or(f64::is_finite);
        if ok(pins.left) && ok(pins.right) {
            Ok(pins)
        } else {
            Err(ProblemError::BadPin)
        }
    }

    fn check_vars(&self, which: &'static str, e: &Expr) -> Result<(), ProblemError> {
        let allowed = self.variable_names();
        for var in e.free_vars() {
            if var != "x" && !allowed.contains(&var) {
                return Err(ProblemError::UnknownVariable {
                    which,
                    var,
                    allowed: format!("x, {}", allowed.join(", ")),
                });
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn alphas(&self) -> &[FracOrder] {
        &self.alphas
    }

    pub fn betas(&self) -> &[FracOrder] {
        &self.betas
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    pub fn pins(&self) -> &[Pins] {
        &self.pins
    }

    pub fn is_basic(&self) -> bool {
        self.alphas.len() == 1 && self.betas.len() == 1 && self.unknowns == 1
    }

    /// Name of the integral channel `I^{1-α_i} y_k`.
    pub fn int_var(&self, i: usize, k: usize) -> String {
        channel_name('u', self.alphas.len(), self.unknowns, i, k)
    }

    /// Name of the derivative channel `D^{β_j} y_k`.
    pub fn der_var(&self, j: usize, k: usize) -> String {
        channel_name('v', self.betas.len(), self.unknowns, j, k)
    }

    /// All channel variable names, integral channels first.
    pub fn variable_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 0..self.unknowns {
            for i in 0..self.alphas.len() {
                out.push(self.int_var(i, k));
            }
        }
        for k in 0..self.unknowns {
            for j in 0..self.betas.len() {
                out.push(self.der_var(j, k));
            }
        }
        out
    }

    pub fn grid(&self, n_cells: usize) -> Result<Grid, ProblemError> {
        Ok(Grid::new(self.a, self.b, n_cells)?)
    }
}

/// Per-node Euler-Lagrange residual, one row per unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    grid: Grid,
    values: Vec<Vec<f64>>,
    norm: f64,
}

impl Residual {
    fn new(grid: Grid, values: Vec<Vec<f64>>) -> Self {
        let norm = values.iter().map(|r| grid.inner(r, r)).sum::<f64>().sqrt();
        Self { grid, values, norm }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `sqrt(Σ_k Σ_i ω_i r_{k,i}²)`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Weighted norm over [`Grid::interior`] nodes only.
    pub fn interior_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|r| self.grid.interior_norm(r).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|r|` over interior nodes.
    pub fn interior_max(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|r| self.grid.interior().map(move |i| r[i].abs()))
            .fold(0.0, f64::max)
    }
}

/// Channel samples: `int[k][i]` is `I^{1-α_i} y_k`, `der[k][j]` is `D^{β_j} y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    pub int: Vec<Vec<Vec<f64>>>,
    pub der: Vec<Vec<Vec<f64>>>,
}

impl Channels {
    /// `self + s·dir`, valid because every channel is linear in `y`.
    pub fn axpy(&self, s: f64, dir: &Channels) -> Channels {
        let comb = |a: &Vec<Vec<Vec<f64>>>, b: &Vec<Vec<Vec<f64>>>| {
            a.iter()
                .zip(b)
                .map(|(ak, bk)| {
                    ak.iter()
                        .zip(bk)
                        .map(|(x, d)| x.iter().zip(d).map(|(p, q)| p + s * q).collect())
                        .collect()
                })
                .collect()
        };
        Channels {
            int: comb(&self.int, &dir.int),
            der: comb(&self.der, &dir.der),
        }
    }
}

#[derive(Debug, Clone)]
struct Integrand {
    expr: Expr,
    d_int: Vec<Vec<Expr>>,
    d_der: Vec<Vec<Expr>>,
}

/// A problem bound to a grid: channel operators, their adjoints and the
/// symbolic partials of the integrands, built once.
#[derive(Debug, Clone)]
pub struct Discretization<'p> {
    problem: &'p VarProblem,
    grid: Grid,
    int_ops: Vec<FracOperator>,
    der_ops: Vec<FracOperator>,
    int_adj: Vec<FracOperator>,
    der_adj: Vec<FracOperator>,
    lagrangian: Integrand,
    constraint: Option<Integrand>,
    binding: VarBinding,
    x_slot: usize,
    int_slots: Vec<Vec<usize>>,
    der_slots: Vec<Vec<usize>>,
}

impl<'p> Discretization<'p> {
    pub fn new(problem: &'p VarProblem, grid: Grid) -> Result<Self, ProblemError> {
        let int_ops = problem
            .alphas
            .iter()
            .map(|a| build_left_rlfi(grid, a.complement()))
            .collect::<Result<Vec<_>, _>>()?;
        let der_ops = problem
            .betas
            .iter()
            .map(|b| build_left_rlfd(grid, *b))
            .collect::<Result<Vec<_>, _>>()?;
        let int_adj = int_ops
            .iter()
            .map(build_right_adjoint)
            .collect::<Result<Vec<_>, _>>()?;
        let der_adj = der_ops
            .iter()
            .map(build_right_adjoint)
            .collect::<Result<Vec<_>, _>>()?;

        let integrand = |expr: &Expr| Integrand {
            expr: expr.clone(),
            d_int: (0..problem.unknowns)
                .map(|k| {
                    (0..problem.alphas.len())
                        .map(|i| expr.differentiate(&problem.int_var(i, k)))
                        .collect()
                })
                .collect(),
            d_der: (0..problem.unknowns)
                .map(|k| {
                    (0..problem.betas.len())
                        .map(|j| expr.differentiate(&problem.der_var(j, k)))
                        .collect()
                })
                .collect(),
        };

        let mut binding = VarBinding::new().with("x", 0.0);
        for name in problem.variable_names() {
            binding.set(&name, 0.0);
        }
        let slot = |name: &str| binding.slot(name).expect("bound above");
        let int_slots = (0..problem.unknowns)
            .map(|k| {
                (0..problem.alphas.len())
                    .map(|i| slot(&problem.int_var(i, k)))
                    .collect()
            })
            .collect();
        let der_slots = (0..problem.unknowns)
            .map(|k| {
                (0..problem.betas.len())
                    .map(|j| slot(&problem.der_var(j, k)))
                    .collect()
            })
            .collect();

        Ok(Self {
            problem,
            grid,
            int_ops,
            der_ops,
            int_adj,
            der_adj,
            lagrangian: integrand(&problem.lagrangian),
            constraint: problem.constraint.as_ref().map(|c| integrand(&c.g)),
            x_slot: slot("x"),
            binding,
            int_slots,
            der_slots,
        })
    }

    pub fn problem(&self) -> &VarProblem {
        self.problem
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Left operators of the integral channels, orders `1 - α_i`.
    pub fn int_operators(&self) -> &[FracOperator] {
        &self.int_ops
    }

    pub fn der_operators(&self) -> &[FracOperator] {
        &self.der_ops
    }

    fn check_shape(&self, ys: &[Vec<f64>]) -> Result<(), ProblemError> {
        if ys.len() != self.problem.unknowns {
            return Err(ProblemError::UnknownCount {
                expected: self.problem.unknowns,
                found: ys.len(),
            });
        }
        for y in ys {
            if y.len() != self.grid.len() {
                return Err(FracError::LengthMismatch {
                    expected: self.grid.len(),
                    found: y.len(),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn channels(&self, ys: &[Vec<f64>]) -> Result<Channels, ProblemError> {
        self.check_shape(ys)?;
        let mut int = Vec::with_capacity(ys.len());
        let mut der = Vec::with_capacity(ys.len());
        for y in ys {
            int.push(
                self.int_ops
                    .iter()
                    .map(|op| op.apply(y))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            der.push(
                self.der_ops
                    .iter()
                    .map(|op| op.apply(y))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Ok(Channels { int, der })
    }

    /// Evaluates `e` at every node with the channel values bound.
    pub fn sample(&self, e: &Expr, ch: &Channels) -> Result<Vec<f64>, ProblemError> {
        let mut env = self.binding.clone();
        (0..self.grid.len())
            .map(|n| {
                let x = self.grid.node(n);
                env.set_slot(self.x_slot, x);
                for (k, slots) in self.int_slots.iter().enumerate() {
                    for (i, &s) in slots.iter().enumerate() {
                        env.set_slot(s, ch.int[k][i][n]);
                    }
                }
                for (k, slots) in self.der_slots.iter().enumerate() {
                    for (j, &s) in slots.iter().enumerate() {
                        env.set_slot(s, ch.der[k][j][n]);
                    }
                }
                e.eval(&env)
                    .map_err(|source| ProblemError::Eval { node: n, x, source })
            })
            .collect()
    }

    pub fn functional_from(&self, ch: &Channels) -> Result<f64, ProblemError> {
        Ok(self
            .grid
            .integrate(&self.sample(&self.lagrangian.expr, ch)?))
    }

    /// `J_h = Σ_i ω_i L(x_i, channels_i)`.
    pub fn functional(&self, ys: &[Vec<f64>]) -> Result<f64, ProblemError> {
        self.functional_from(&self.channels(ys)?)
    }

    fn constraint_integrand(&self) -> Result<&Integrand, ProblemError> {
        self.constraint
            .as_ref()
            .ok_or(ProblemError::MissingConstraint)
    }

    pub fn constraint_value(&self, ys: &[Vec<f64>]) -> Result<f64, ProblemError> {
        let g = self.constraint_integrand()?;
        let ch = self.channels(ys)?;
        Ok(self.grid.integrate(&self.sample(&g.expr, &ch)?))
    }

    fn residual_rows(&self, f: &Integrand, ch: &Channels) -> Result<Vec<Vec<f64>>, ProblemError> {
        let mut rows = Vec::with_capacity(self.problem.unknowns);
        for k in 0..self.problem.unknowns {
            let mut r = vec![0.0; self.grid.len()];
            for (partial, adj) in f.d_int[k].iter().zip(&self.int_adj) {
                accumulate(&mut r, &adj.apply(&self.sample(partial, ch)?)?);
            }
            for (partial, adj) in f.d_der[k].iter().zip(&self.der_adj) {
                accumulate(&mut r, &adj.apply(&self.sample(partial, ch)?)?);
            }
            rows.push(r);
        }
        Ok(rows)
    }

    fn transpose_gradient(
        &self,
        f: &Integrand,
        ch: &Channels,
    ) -> Result<Vec<Vec<f64>>, ProblemError> {
        let weights = self.grid.weights();
        let weighted =
            |p: Vec<f64>| -> Vec<f64> { p.into_iter().zip(&weights).map(|(v, w)| v * w).collect() };
        let mut rows = Vec::with_capacity(self.problem.unknowns);
        for k in 0..self.problem.unknowns {
            let mut g = vec![0.0; self.grid.len()];
            for (partial, op) in f.d_int[k].iter().zip(&self.int_ops) {
                accumulate(
                    &mut g,
                    &op.apply_transpose(&weighted(self.sample(partial, ch)?))?,
                );
            }
            for (partial, op) in f.d_der[k].iter().zip(&self.der_ops) {
                accumulate(
                    &mut g,
                    &op.apply_transpose(&weighted(self.sample(partial, ch)?))?,
                );
            }
            rows.push(g);
        }
        Ok(rows)
    }

    /// Euler-Lagrange residual: for each unknown `k`,
    /// `Σ_i R_I^{1-α_i} ∂L/∂u_{i,k} + Σ_j R_D^{β_j} ∂L/∂v_{j,k}` with the
    /// adjoint right operators.
    pub fn residual(&self, ys: &[Vec<f64>]) -> Result<Residual, ProblemError> {
        let ch = self.channels(ys)?;
        Ok(Residual::new(
            self.grid,
            self.residual_rows(&self.lagrangian, &ch)?,
        ))
    }

    /// Residual of the constraint functional, same construction as
    /// [`Discretization::residual`] with `g` in place of `L`.
    pub fn constraint_residual(&self, ys: &[Vec<f64>]) -> Result<Residual, ProblemError> {
        let g = self.constraint_integrand()?;
        let ch = self.channels(ys)?;
        Ok(Residual::new(self.grid, self.residual_rows(g, &ch)?))
    }

    /// Gradient of `J_h` with respect to the node values, computed as
    /// `Σ Iᵀ (ω ∘ ∂_u L) + Σ Dᵀ (ω ∘ ∂_v L)`.
    pub fn gradient(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ProblemError> {
        self.gradient_from(&self.channels(ys)?)
    }

    pub fn gradient_from(&self, ch: &Channels) -> Result<Vec<Vec<f64>>, ProblemError> {
        self.transpose_gradient(&self.lagrangian, ch)
    }

    pub fn constraint_gradient(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ProblemError> {
        let g = self.constraint_integrand()?;
        let ch = self.channels(ys)?;
        self.transpose_gradient(g, &ch)
    }
}

fn accumulate(acc: &mut [f64], add: &[f64]) {
    for (a, b) in acc.iter_mut().zip(add) {
        *a += b;
    }
}

fn rows(ys: &[SampledFn], grid: &Grid) -> Result<Vec<Vec<f64>>, ProblemError> {
    ys.iter()
        .map(|y| {
            if y.grid() != grid {
                Err(FracError::GridMismatch.into())
            } else {
                Ok(y.values().to_vec())
            }
        })
        .collect()
}

/// Discrete functional value `J_h`.
pub fn evaluate_functional(
    p: &VarProblem,
    ys: &[SampledFn],
    grid: &Grid,
) -> Result<f64, ProblemError> {
    Discretization::new(p, *grid)?.functional(&rows(ys, grid)?)
}

/// Euler-Lagrange residual of a single-order, single-unknown problem.
pub fn el_residual(p: &VarProblem, y: &SampledFn, grid: &Grid) -> Result<Residual, ProblemError> {
    if !p.is_basic() {
        return Err(ProblemError::NotBasic);
    }
    el_residual_general(p, std::slice::from_ref(y), grid)
}

/// Euler-Lagrange residual for several orders and/or unknowns.
pub fn el_residual_general(
    p: &VarProblem,
    ys: &[SampledFn],
    grid: &Grid,
) -> Result<Residual, ProblemError> {
    Discretization::new(p, *grid)?.residual(&rows(ys, grid)?)
}

/// The problem with Lagrangian `L + λ g` and no constraint.
pub fn augmented_lagrangian(p: &VarProblem, lambda: f64) -> Result<VarProblem, ProblemError> {
    let c = p
        .constraint
        .as_ref()
        .ok_or(ProblemError::MissingConstraint)?;
    let k = diff::add(
        p.lagrangian.clone(),
        diff::mul(Expr::Num(lambda), c.g.clone()),
    );
    Ok(VarProblem {
        lagrangian: k,
        constraint: None,
        ..p.clone()
    })
}

/// `∫ g dx` by the same quadrature as [`evaluate_functional`].
pub fn constraint_value(
    p: &VarProblem,
    ys: &[SampledFn],
    grid: &Grid,
) -> Result<f64, ProblemError> {
    Discretization::new(p, *grid)?.constraint_value(&rows(ys, grid)?)
}
