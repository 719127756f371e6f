//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

/// Source text of a random expression over `vars`, smooth and bounded on
/// `[-1, 1]^k`: division only by `2 + cos(·)`, `exp` and `log` only of
/// bounded or positive arguments, integer powers only.
pub fn smooth_source(rng: &mut impl Rng, vars: &[&str], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            vars[rng.gen_range(0..vars.len())].to_string()
        } else {
            format!("{}", (rng.gen_range(0.1..1.5f64) * 100.0).round() / 100.0)
        };
    }
    let a = smooth_source(rng, vars, depth - 1);
    match rng.gen_range(0..11) {
        0 | 1 => format!("({a}) + ({})", smooth_source(rng, vars, depth - 1)),
        2 => format!("({a}) - ({})", smooth_source(rng, vars, depth - 1)),
        3 | 4 => format!("({a})*({})", smooth_source(rng, vars, depth - 1)),
        5 => format!("({a})/(2 + cos({}))", smooth_source(rng, vars, depth - 1)),
        6 => format!("({a})^{}", rng.gen_range(2..=3)),
        7 => format!("sin({a})"),
        8 => format!("cos({a})"),
        9 => format!("exp(sin({a}))"),
        _ => {
            if rng.gen_bool(0.5) {
                format!("log(1 + ({a})^2)")
            } else {
                format!("sqrt(1 + ({a})^2)")
            }
        }
    }
}

/// Random Lagrangian in `x, u, v` that is genuinely coupled to both channels.
pub fn smooth_lagrangian(rng: &mut impl Rng) -> String {
    format!(
        "({}) + 0.5*v^2 + 0.25*u^2*v",
        smooth_source(rng, &["x", "u", "v"], 3)
    )
}
