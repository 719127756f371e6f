//! Benchmark fixtures shared by the criterion targets.

use fracvar_core::expr::parse;
use fracvar_core::{FracOrder, Grid, Pins, VarProblem};

pub fn unit_grid(n_cells: usize) -> Grid {
    Grid::new(0.0, 1.0, n_cells).expect("valid grid")
}

pub fn order(v: f64) -> FracOrder {
    FracOrder::new(v).expect("valid order")
}

/// The pinned quadratic problem used by the classical-limit sweep.
pub fn quadratic_problem(o: f64) -> VarProblem {
    let l = parse("v^2/2 + u^2/2").expect("valid lagrangian");
    VarProblem::basic(0.0, 1.0, o, o, l)
        .and_then(|p| p.with_pins(Pins::both(0.0, 1.0)))
        .expect("valid problem")
}
