//! Problem-file schema.
//!
//! Every object rejects unknown keys. After loading, [`ProblemFile::resolve`]
//! fills in all defaults; the resolved form is echoed into `summary.json` and
//! is itself a valid problem file.

use serde::{Deserialize, Serialize};

use fracvar_core::SolveConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    EvalOp,
    Functional,
    ElResidual,
    Solve,
    SolveIso,
    CertifyConvex,
    CheckField,
    LimitSweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::EvalOp => "eval-op",
            Self::Functional => "functional",
            Self::ElResidual => "el-residual",
            Self::Solve => "solve",
            Self::SolveIso => "solve-iso",
            Self::CertifyConvex => "certify-convex",
            Self::CheckField => "check-field",
            Self::LimitSweep => "limit-sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Orders {
    pub alpha: OneOrMany<f64>,
    pub beta: OneOrMany<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub g: String,
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub phi: String,
    pub s: String,
    /// Range of the state argument sampled by the identity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier_tol: Option<f64>,
}

impl SolverSpec {
    pub fn config(&self) -> SolveConfig {
        let d = SolveConfig::default();
        SolveConfig {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            step_init: self.step_init.unwrap_or(d.step_init),
            armijo_c: self.armijo_c.unwrap_or(d.armijo_c),
            armijo_shrink: self.armijo_shrink.unwrap_or(d.armijo_shrink),
            multiplier_tol: self.multiplier_tol.unwrap_or(d.multiplier_tol),
        }
    }

    fn resolved(&self) -> Self {
        let c = self.config();
        Self {
            max_iters: Some(c.max_iters),
            grad_tol: Some(c.grad_tol),
            step_init: Some(c.step_init),
            armijo_c: Some(c.armijo_c),
            armijo_shrink: Some(c.armijo_shrink),
            multiplier_tol: Some(c.multiplier_tol),
        }
    }
}

/// Endpoint values applied to every unknown; `null` leaves the end free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    #[serde(default)]
    pub left: Option<f64>,
    #[serde(default)]
    pub right: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKindSpec {
    LeftRlfi,
    RightRlfi,
    LeftRlfd,
    RightRlfd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationSpec {
    /// Left kinds as built; right kinds by reflection.
    #[default]
    Direct,
    /// Right kinds as `W⁻¹ Lᵀ W` of the matching left operator.
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKindSpec,
    pub order: f64,
    #[serde(default)]
    pub realization: RealizationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub orders: Vec<f64>,
    /// Classical solution as an expression in `x`.
    pub classical: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub x: [f64; 2],
    pub u: [f64; 2],
    pub v: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub region: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_axis: Option<usize>,
}

pub const DEFAULT_SAMPLES_PER_AXIS: usize = 9;
pub const DEFAULT_Y_RANGE: [f64; 2] = [-5.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub task: Task,
    pub interval: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Orders>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknowns: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pins: Option<PinSpec>,
    /// Sample curve(s) as expressions in `x`, one per unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<OneOrMany<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The same problem with every default written out.
    pub fn resolve(&self, n_cells_override: Option<usize>) -> Self {
        let mut r = self.clone();
        r.unknowns = Some(self.unknowns.unwrap_or(1));
        r.solver = Some(self.solver.unwrap_or_default().resolved());
        r.pins = Some(self.pins.unwrap_or_default());
        if let Some(n) = n_cells_override {
            r.grid.n_cells = n;
        }
        if let Some(f) = &mut r.field {
            f.y_range.get_or_insert(DEFAULT_Y_RANGE);
        }
        if self.task == Task::CertifyConvex {
            let c = r.certify.get_or_insert_with(CertifySpec::default);
            c.region.get_or_insert(BoxSpec {
                x: [self.interval.a, self.interval.b],
                u: [-1.0, 1.0],
                v: [-1.0, 1.0],
            });
            c.samples_per_axis.get_or_insert(DEFAULT_SAMPLES_PER_AXIS);
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "task": "functional",
        "interval": {"a": 0, "b": 1},
        "orders": {"alpha": 0.5, "beta": [0.5]},
        "lagrangian": "v^2",
        "grid": {"n_cells": 16}
    }"#;

    #[test]
    fn parses_scalar_and_list_orders() {
        let p = ProblemFile::from_json(MINIMAL).unwrap();
        let o = p.orders.unwrap();
        assert_eq!(o.alpha.to_vec(), vec![0.5]);
        assert_eq!(o.beta.to_vec(), vec![0.5]);
        assert_eq!(p.task, Task::Functional);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"lagrangian\"", "\"lagrangain\"");
        let err = ProblemFile::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("lagrangain"), "{err}");
        let bad = MINIMAL.replace("\"n_cells\": 16", "\"n_cells\": 16, \"h\": 0.1");
        assert!(ProblemFile::from_json(&bad).is_err());
    }

    #[test]
    fn resolve_fills_defaults_and_round_trips() {
        let p = ProblemFile::from_json(MINIMAL).unwrap();
        let r = p.resolve(Some(32));
        assert_eq!(r.grid.n_cells, 32);
        assert_eq!(r.unknowns, Some(1));
        assert_eq!(
            r.solver.unwrap().max_iters,
            Some(SolveConfig::default().max_iters)
        );
        let text = serde_json::to_string(&r).unwrap();
        let back = ProblemFile::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.resolve(None), r);
    }

    #[test]
    fn task_names_match_serde() {
        for t in [
            Task::EvalOp,
            Task::SolveIso,
            Task::LimitSweep,
            Task::CertifyConvex,
        ] {
            assert_eq!(
                serde_json::to_string(&t).unwrap(),
                format!("\"{}\"", t.name())
            );
        }
    }
}
