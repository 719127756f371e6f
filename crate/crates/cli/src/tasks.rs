use std::time::Instant;

use serde_json::{json, Value};

use fracvar_core::certify::{
    check_convexity, check_field, verify_field_minimizer, ConvexBox, ExactField, FieldVerdict,
    FIELD_SAMPLES,
};
use fracvar_core::expr::{parse, Expr, VarBinding};
use fracvar_core::fracops::{
    build_left_rlfd, build_left_rlfi, build_right_adjoint, build_right_rlfd, build_right_rlfi,
    FracOperator, FracOrder, Grid, SampledFn,
};
use fracvar_core::solver::{initial_guess, minimize, solve_isoperimetric, SolveReport};
use fracvar_core::varproblem::{augmented_lagrangian, Channels, Discretization, Pins, VarProblem};
use fracvar_core::SolveStatus;

use crate::schema::{OperatorKindSpec, ProblemFile, RealizationSpec, Task};
use crate::{CliError, Table, TaskOutput};

type Result<T> = std::result::Result<T, CliError>;
type Columns = Vec<(String, Vec<f64>)>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub(crate) fn execute(p: &ProblemFile) -> Result<TaskOutput> {
    let grid = Grid::new(p.interval.a, p.interval.b, p.grid.n_cells)
        .map_err(|e| invalid(format!("interval/grid: {e}")))?;
    match p.task {
        Task::EvalOp => eval_op(p, grid),
        Task::Functional => functional(p, grid),
        Task::ElResidual => el_residual(p, grid),
        Task::Solve => solve(p, grid),
        Task::SolveIso => solve_iso(p, grid),
        Task::CertifyConvex => certify_convex(p),
        Task::CheckField => check_field_task(p, grid),
        Task::LimitSweep => limit_sweep(p, grid),
    }
}

fn required<'a, T>(value: &'a Option<T>, key: &str, task: Task) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| invalid(format!("task {} requires key `{key}`", task.name())))
}

fn expr(key: &str, src: &str) -> Result<Expr> {
    parse(src).map_err(|e| invalid(format!("{key}: {e}")))
}

fn order(key: &str, v: f64) -> Result<FracOrder> {
    FracOrder::new(v).map_err(|e| invalid(format!("{key}: {e}")))
}

fn order_list(key: &str, values: &[f64]) -> Result<Vec<FracOrder>> {
    if values.is_empty() {
        return Err(invalid(format!("{key}: at least one order is required")));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let k = if values.len() == 1 {
                key.to_string()
            } else {
                format!("{key}[{i}]")
            };
            order(&k, v)
        })
        .collect()
}

fn build_problem(p: &ProblemFile) -> Result<VarProblem> {
    let orders = required(&p.orders, "orders", p.task)?;
    let alphas = order_list("orders.alpha", &orders.alpha.to_vec())?;
    let betas = order_list("orders.beta", &orders.beta.to_vec())?;
    let l = expr("lagrangian", required(&p.lagrangian, "lagrangian", p.task)?)?;
    let unknowns = p.unknowns.unwrap_or(1);
    let mut vp = VarProblem::new(p.interval.a, p.interval.b, alphas, betas, unknowns, l)
        .map_err(|e| CliError::problem("problem", e))?;
    if let Some(c) = &p.constraint {
        vp = vp
            .with_constraint(expr("constraint.g", &c.g)?, c.ell)
            .map_err(|e| CliError::problem("constraint", e))?;
    }
    let pins = p.pins.unwrap_or_default();
    vp.with_pins(Pins {
        left: pins.left,
        right: pins.right,
    })
    .map_err(|e| CliError::problem("pins", e))
}

/// Samples an expression in `x` on the grid.
fn sample_x(key: &str, src: &str, grid: &Grid) -> Result<Vec<f64>> {
    let e = expr(key, src)?;
    if let Some(v) = e.free_vars().into_iter().find(|v| v != "x") {
        return Err(invalid(format!(
            "{key}: expected an expression in x, found variable {v:?}"
        )));
    }
    let mut env = VarBinding::new().with("x", 0.0);
    grid.nodes()
        .enumerate()
        .map(|(i, x)| {
            env.set("x", x);
            e.eval(&env)
                .map_err(|err| invalid(format!("{key} at node {i} (x = {x}): {err}")))
        })
        .collect()
}

fn curves(p: &ProblemFile, grid: &Grid, count: usize) -> Result<Option<Vec<SampledFn>>> {
    let Some(y) = &p.y else { return Ok(None) };
    let srcs = y.to_vec();
    if srcs.len() != count {
        return Err(invalid(format!(
            "y: expected {count} curve(s), got {}",
            srcs.len()
        )));
    }
    srcs.iter()
        .enumerate()
        .map(|(k, src)| {
            let key = if count == 1 {
                "y".to_string()
            } else {
                format!("y[{k}]")
            };
            let values = sample_x(&key, src, grid)?;
            Ok(SampledFn::new(*grid, values).expect("one value per node"))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn start(p: &ProblemFile, vp: &VarProblem, grid: &Grid) -> Result<Vec<SampledFn>> {
    Ok(curves(p, grid, vp.unknowns())?.unwrap_or_else(|| initial_guess(vp, grid)))
}

fn rows(ys: &[SampledFn]) -> Vec<Vec<f64>> {
    ys.iter().map(|y| y.values().to_vec()).collect()
}

fn discretize<'p>(vp: &'p VarProblem, grid: Grid) -> Result<Discretization<'p>> {
    Discretization::new(vp, grid).map_err(|e| CliError::problem("problem", e))
}

fn indexed(base: &str, k: usize, n: usize) -> String {
    if n == 1 {
        base.to_string()
    } else {
        format!("{base}{}", k + 1)
    }
}

/// `x`, then each unknown, then each channel named by its Lagrangian variable.
fn state_columns(disc: &Discretization<'_>, ys: &[Vec<f64>]) -> Result<(Columns, Channels)> {
    let vp = disc.problem();
    let ch = disc
        .channels(ys)
        .map_err(|e| CliError::problem("channels", e))?;
    let mut cols = vec![("x".to_string(), disc.grid().nodes().collect())];
    for (k, y) in ys.iter().enumerate() {
        cols.push((indexed("y", k, ys.len()), y.clone()));
    }
    for k in 0..vp.unknowns() {
        for i in 0..vp.alphas().len() {
            cols.push((vp.int_var(i, k), ch.int[k][i].clone()));
        }
    }
    for k in 0..vp.unknowns() {
        for j in 0..vp.betas().len() {
            cols.push((vp.der_var(j, k), ch.der[k][j].clone()));
        }
    }
    Ok((cols, ch))
}

fn residual_columns(disc: &Discretization<'_>, ys: &[Vec<f64>]) -> Result<(Columns, Value)> {
    let r = disc
        .residual(ys)
        .map_err(|e| CliError::problem("residual", e))?;
    let n = r.values().len();
    let cols = r
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (indexed("residual", k, n), v.clone()))
        .collect();
    let stats = json!({
        "residual_norm": r.norm(),
        "interior_norm": r.interior_norm(),
        "interior_max": r.interior_max(),
    });
    Ok((cols, stats))
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Numerical(format!("{what} is non-finite ({v})")))
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

fn functional(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let vp = build_problem(p)?;
    let ys = rows(&start(p, &vp, &grid)?);
    let disc = discretize(&vp, grid)?;
    let (mut cols, ch) = state_columns(&disc, &ys)?;
    let integrand = disc
        .sample(vp.lagrangian(), &ch)
        .map_err(|e| CliError::problem("lagrangian", e))?;
    let j = finite("J", grid.integrate(&integrand))?;
    cols.push(("L".into(), integrand));
    let mut results = json!({ "J": j });
    if vp.constraint().is_some() {
        let c = disc
            .constraint_value(&ys)
            .map_err(|e| CliError::problem("constraint", e))?;
        results = merge(
            results,
            json!({ "constraint_value": finite("constraint value", c)? }),
        );
    }
    Ok(TaskOutput {
        results,
        tables: vec![Table::from_columns("functional.csv", cols)],
        ..TaskOutput::default()
    })
}

fn el_residual(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let vp = build_problem(p)?;
    let ys = rows(&start(p, &vp, &grid)?);
    let disc = discretize(&vp, grid)?;
    let (mut cols, _) = state_columns(&disc, &ys)?;
    let (res, stats) = residual_columns(&disc, &ys)?;
    finite(
        "residual norm",
        stats["residual_norm"].as_f64().unwrap_or(f64::NAN),
    )?;
    cols.extend(res);
    Ok(TaskOutput {
        results: stats,
        tables: vec![Table::from_columns("residual.csv", cols)],
        ..TaskOutput::default()
    })
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max-iters",
        SolveStatus::LineSearchStalled => "line-search-stalled",
        SolveStatus::Abnormal => "abnormal",
    }
}

fn report_json(r: &SolveReport) -> Value {
    json!({
        "J": r.j,
        "residual_norm": r.residual_norm,
        "converged": r.converged,
        "status": status_name(r.status),
        "iters": r.iters,
        "warnings": r.warnings,
    })
}

fn solution_table(
    disc: &Discretization<'_>,
    residual_disc: &Discretization<'_>,
    ys: &[Vec<f64>],
) -> Result<Table> {
    let (mut cols, _) = state_columns(disc, ys)?;
    cols.extend(residual_columns(residual_disc, ys)?.0);
    Ok(Table::from_columns("solution.csv", cols))
}

fn solve(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let vp = build_problem(p)?;
    if vp.constraint().is_some() {
        return Err(invalid(
            "task solve takes no `constraint`; use task solve-iso",
        ));
    }
    let cfg = p.solver.unwrap_or_default().config();
    let y0 = start(p, &vp, &grid)?;
    let t = Instant::now();
    let report = minimize(&vp, &grid, &cfg, &y0).map_err(|e| CliError::solve("solve", e))?;
    let seconds = t.elapsed().as_secs_f64();
    let disc = discretize(&vp, grid)?;
    let table = solution_table(&disc, &disc, &rows(&report.y))?;
    Ok(TaskOutput {
        results: report_json(&report),
        tables: vec![table],
        converged: Some(report.converged),
        timings: vec![("solve_seconds".into(), seconds)],
    })
}

fn solve_iso(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let vp = build_problem(p)?;
    required(&p.constraint, "constraint", p.task)?;
    let cfg = p.solver.unwrap_or_default().config();
    let y0 = start(p, &vp, &grid)?;
    let t = Instant::now();
    let report =
        solve_isoperimetric(&vp, &grid, &cfg, &y0).map_err(|e| CliError::solve("solve-iso", e))?;
    let seconds = t.elapsed().as_secs_f64();
    let lambda = report.lambda.unwrap_or(0.0);
    let k = augmented_lagrangian(&vp, lambda).map_err(|e| CliError::problem("constraint", e))?;
    let disc = discretize(&vp, grid)?;
    let kdisc = discretize(&k, grid)?;
    let table = solution_table(&disc, &kdisc, &rows(&report.y))?;
    let results = merge(
        report_json(&report),
        json!({
            "lambda": report.lambda,
            "constraint_gap": report.constraint_gap,
            "outer_iters": report.outer_iters,
        }),
    );
    Ok(TaskOutput {
        results,
        tables: vec![table],
        converged: Some(report.converged),
        timings: vec![("solve_seconds".into(), seconds)],
    })
}

fn certify_convex(p: &ProblemFile) -> Result<TaskOutput> {
    let l = expr("lagrangian", required(&p.lagrangian, "lagrangian", p.task)?)?;
    let section = p.certify.unwrap_or_default();
    let b = section.region.expect("resolved");
    let region = ConvexBox {
        x: (b.x[0], b.x[1]),
        u: (b.u[0], b.u[1]),
        v: (b.v[0], b.v[1]),
    };
    let n = section.samples_per_axis.expect("resolved");
    let r = check_convexity(&l, region, n).map_err(|e| CliError::certify("certify", e))?;
    let counterexample = r.counterexample.map(|c| {
        json!({ "x": c.x, "u": c.u, "v": c.v, "du": c.du, "dv": c.dv, "violation": c.violation })
    });
    Ok(TaskOutput {
        results: json!({
            "convex": r.convex,
            "hessian_psd": r.hessian_psd,
            "counterexample": counterexample,
            "inconclusive_points": r.inconclusive,
            "samples_per_axis": r.samples_per_axis,
        }),
        ..TaskOutput::default()
    })
}

fn verdict_name(v: FieldVerdict) -> &'static str {
    match v {
        FieldVerdict::Minimizer => "minimizer",
        FieldVerdict::FieldCheckFailed => "field-check-failed",
        FieldVerdict::NotFieldTrajectory => "not-a-field-trajectory",
        FieldVerdict::NegativeExcess => "negative-excess",
    }
}

fn check_field_task(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let l = expr("lagrangian", required(&p.lagrangian, "lagrangian", p.task)?)?;
    let section = required(&p.field, "field", p.task)?;
    let yr = section.y_range.expect("resolved");
    let field = ExactField::new(
        expr("field.phi", &section.phi)?,
        expr("field.s", &section.s)?,
        (p.interval.a, p.interval.b),
        (yr[0], yr[1]),
    )
    .map_err(|e| CliError::certify("field", e))?;

    let Some(ys) = curves(p, &grid, 1)? else {
        let c = check_field(&l, &field, FIELD_SAMPLES, FIELD_SAMPLES)
            .map_err(|e| CliError::certify("field", e))?;
        return Ok(TaskOutput {
            results: json!({
                "pass": c.pass,
                "max_residual_x": c.max_residual_x,
                "max_residual_y": c.max_residual_y,
                "inconclusive_points": c.inconclusive,
            }),
            ..TaskOutput::default()
        });
    };

    let orders = required(&p.orders, "orders", p.task)?;
    let alphas = order_list("orders.alpha", &orders.alpha.to_vec())?;
    if alphas.len() != 1 {
        return Err(invalid(
            "orders.alpha: field verification takes a single order",
        ));
    }
    let r = verify_field_minimizer(&l, &field, &ys[0], alphas[0])
        .map_err(|e| CliError::certify("field", e))?;
    let cols = vec![
        ("x".to_string(), grid.nodes().collect()),
        ("y".to_string(), ys[0].values().to_vec()),
        ("u".to_string(), r.integral_channel.clone()),
        ("v".to_string(), r.derivative_channel.clone()),
        ("field_residual".to_string(), r.field_residual.clone()),
        ("excess".to_string(), r.excess_samples.clone()),
    ];
    Ok(TaskOutput {
        results: json!({
            "pass": r.field_check.pass,
            "max_residual_x": r.field_check.max_residual_x,
            "max_residual_y": r.field_check.max_residual_y,
            "inconclusive_points": r.field_check.inconclusive,
            "verdict": verdict_name(r.verdict),
            "field_residual_norm": r.field_residual_norm,
            "field_tol": r.field_tol,
            "J": r.j,
            "field_value": r.field_value,
            "gap": r.gap,
            "min_excess": r.min_excess,
            "v_convex_along_path": r.v_convex_along_path,
        }),
        tables: vec![Table::from_columns("field.csv", cols)],
        ..TaskOutput::default()
    })
}

struct SweepRow {
    order: f64,
    j: f64,
    distance: f64,
    iters: usize,
    converged: bool,
    status: String,
    y: Vec<f64>,
    seconds: f64,
}

fn limit_sweep(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let vp = build_problem(p)?;
    let section = required(&p.sweep, "sweep", p.task)?;
    let orders = order_list("sweep.orders", &section.orders)?;
    if vp.unknowns() != 1 {
        return Err(invalid(
            "limit-sweep compares one unknown with `sweep.classical`",
        ));
    }
    let classical = sample_x("sweep.classical", &section.classical, &grid)?;
    let cfg = p.solver.unwrap_or_default().config();
    let y0 = curves(p, &grid, 1)?;

    let run_one = |o: FracOrder| -> SweepRow {
        let t = Instant::now();
        let outcome = vp
            .with_orders(vec![o; vp.alphas().len()], vec![o; vp.betas().len()])
            .map_err(|e| e.to_string())
            .and_then(|q| {
                let start = y0.clone().unwrap_or_else(|| initial_guess(&q, &grid));
                if q.constraint().is_some() {
                    solve_isoperimetric(&q, &grid, &cfg, &start)
                } else {
                    minimize(&q, &grid, &cfg, &start)
                }
                .map_err(|e| e.to_string())
            });
        let seconds = t.elapsed().as_secs_f64();
        match outcome {
            Ok(r) => {
                let y = r.y[0].values().to_vec();
                let diff: Vec<f64> = y.iter().zip(&classical).map(|(a, b)| a - b).collect();
                SweepRow {
                    order: o.value(),
                    j: r.j,
                    distance: grid.norm(&diff),
                    iters: r.iters,
                    converged: r.converged,
                    status: status_name(r.status).to_string(),
                    y,
                    seconds,
                }
            }
            Err(msg) => SweepRow {
                order: o.value(),
                j: f64::NAN,
                distance: f64::NAN,
                iters: 0,
                converged: false,
                status: format!("error: {msg}"),
                y: vec![f64::NAN; grid.len()],
                seconds,
            },
        }
    };

    // Solves run concurrently; rows keep the input order.
    let sweep: Vec<SweepRow> = std::thread::scope(|s| {
        let run_one = &run_one;
        let handles: Vec<_> = orders
            .iter()
            .map(|&o| s.spawn(move || run_one(o)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let decreasing = sweep.windows(2).all(|w| w[1].distance < w[0].distance);
    let table = Table {
        name: "sweep.csv".into(),
        header: ["order", "J", "distance", "iters", "converged", "status"]
            .map(String::from)
            .to_vec(),
        rows: sweep
            .iter()
            .map(|r| {
                vec![
                    crate::num(r.order),
                    crate::num(r.j),
                    crate::num(r.distance),
                    r.iters.to_string(),
                    r.converged.to_string(),
                    r.status.clone(),
                ]
            })
            .collect(),
    };
    let mut cols = vec![
        ("x".to_string(), grid.nodes().collect()),
        ("classical".to_string(), classical.clone()),
    ];
    for r in &sweep {
        cols.push((format!("y_{}", r.order), r.y.clone()));
    }
    let results = json!({
        "rows": sweep
            .iter()
            .map(|r| json!({
                "order": r.order,
                "J": r.j,
                "distance": r.distance,
                "iters": r.iters,
                "converged": r.converged,
                "status": r.status,
            }))
            .collect::<Vec<_>>(),
        "distance_strictly_decreasing": decreasing,
        "all_converged": sweep.iter().all(|r| r.converged),
    });
    Ok(TaskOutput {
        results,
        tables: vec![table, Table::from_columns("solutions.csv", cols)],
        converged: None,
        timings: sweep
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("run_{i}_seconds"), r.seconds))
            .collect(),
    })
}

fn build_operator(
    kind: OperatorKindSpec,
    realization: RealizationSpec,
    grid: Grid,
    o: FracOrder,
) -> Result<FracOperator> {
    use OperatorKindSpec::*;
    let built = match (kind, realization) {
        (LeftRlfi | LeftRlfd, RealizationSpec::Adjoint) => {
            return Err(invalid(
                "operator.realization: `adjoint` applies to right kinds only",
            ))
        }
        (LeftRlfi, _) => build_left_rlfi(grid, o),
        (LeftRlfd, _) => build_left_rlfd(grid, o),
        (RightRlfi, RealizationSpec::Direct) => build_right_rlfi(grid, o),
        (RightRlfd, RealizationSpec::Direct) => build_right_rlfd(grid, o),
        (RightRlfi, RealizationSpec::Adjoint) => {
            build_left_rlfi(grid, o).and_then(|l| build_right_adjoint(&l))
        }
        (RightRlfd, RealizationSpec::Adjoint) => {
            build_left_rlfd(grid, o).and_then(|l| build_right_adjoint(&l))
        }
    };
    built.map_err(|e| invalid(format!("operator: {e}")))
}

fn eval_op(p: &ProblemFile, grid: Grid) -> Result<TaskOutput> {
    let section = required(&p.operator, "operator", p.task)?;
    let o = order("operator.order", section.order)?;
    required(&p.y, "y", p.task)?;
    let f = curves(p, &grid, 1)?.expect("checked above").remove(0);
    let op = build_operator(section.kind, section.realization, grid, o)?;
    let out = op
        .apply(f.values())
        .map_err(|e| invalid(format!("operator: {e}")))?;
    let max_abs = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    finite("operator output", max_abs)?;
    let n = grid.n_cells();
    let results = json!({
        "kind": op.kind().to_string(),
        "order": o.value(),
        "value_at_a": out[0],
        "value_at_b": out[n],
        "max_abs": max_abs,
    });
    let coefficients = Table::from_columns(
        "coefficients.csv",
        vec![
            ("k".into(), (0..=n).map(|k| k as f64).collect()),
            ("generator".into(), op.generator().to_vec()),
            ("anchor".into(), op.anchor_column().to_vec()),
        ],
    );
    let values = Table::from_columns(
        "operator.csv",
        vec![
            ("x".into(), grid.nodes().collect()),
            ("f".into(), f.into_values()),
            ("result".into(), out),
        ],
    );
    Ok(TaskOutput {
        results,
        tables: vec![values, coefficients],
        ..TaskOutput::default()
    })
}
