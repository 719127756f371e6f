use std::fmt;
use std::sync::Arc;

use super::gamma::gamma;
use super::grid::{Grid, SampledFn};
use super::FracError;

/// Fractional order restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(value: f64) -> Result<Self, FracError> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(FracError::OrderOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The order `1 - value`, also in (0, 1).
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl fmt::Display for FracOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    LeftRlfi,
    RightRlfi,
    LeftRlfd,
    RightRlfd,
}

impl OperatorKind {
    pub fn is_left(self) -> bool {
        matches!(self, Self::LeftRlfi | Self::LeftRlfd)
    }

    pub fn is_integral(self) -> bool {
        matches!(self, Self::LeftRlfi | Self::RightRlfi)
    }

    fn mirror(self) -> Self {
        match self {
            Self::LeftRlfi => Self::RightRlfi,
            Self::RightRlfi => Self::LeftRlfi,
            Self::LeftRlfd => Self::RightRlfd,
            Self::RightRlfd => Self::LeftRlfd,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LeftRlfi => "left-rlfi",
            Self::RightRlfi => "right-rlfi",
            Self::LeftRlfd => "left-rlfd",
            Self::RightRlfd => "right-rlfd",
        })
    }
}

/// How a [`FracOperator`] maps its lower-triangular coefficient table `T`
/// onto a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    /// `M = T`.
    Direct,
    /// `M[i][j] = T[N-i][N-j]`: reverse, apply, reverse back.
    Mirrored,
    /// `M = W⁻¹ Tᵀ W` with `W = diag(ω)`.
    Adjoint,
}

/// Lower-triangular table with a Toeplitz body and a separate first column.
///
/// `T[i][j] = toeplitz[i - j]` for `1 <= j <= i`, `T[i][0] = anchor[i]`.
#[derive(Debug, PartialEq)]
struct Coefficients {
    toeplitz: Vec<f64>,
    anchor: Vec<f64>,
    /// `toeplitz` reversed, so row sums run over contiguous slices.
    reversed: Vec<f64>,
}

impl Coefficients {
    fn new(toeplitz: Vec<f64>, anchor: Vec<f64>) -> Self {
        let reversed = toeplitz.iter().rev().copied().collect();
        Self {
            toeplitz,
            anchor,
            reversed,
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else if j == 0 {
            self.anchor[i]
        } else {
            self.toeplitz[i - j]
        }
    }
}

/// Discrete Riemann-Liouville operator of fixed order on a fixed grid.
#[derive(Debug, Clone)]
pub struct FracOperator {
    kind: OperatorKind,
    order: FracOrder,
    grid: Grid,
    realization: Realization,
    coeffs: Arc<Coefficients>,
}

/// Product-trapezoid left integral: `f` is interpolated piecewise-linearly
/// and the kernel `(x_n - t)^{α-1} / Γ(α)` is integrated exactly on each cell.
pub fn build_left_rlfi(grid: Grid, order: FracOrder) -> Result<FracOperator, FracError> {
    let alpha = order.value();
    let n = grid.n_cells();
    let scale = grid.h().powf(alpha) / gamma(alpha + 2.0)?;
    let p = alpha + 1.0;

    let mut toeplitz = vec![0.0; n + 1];
    toeplitz[0] = scale;
    for (k, c) in toeplitz.iter_mut().enumerate().skip(1) {
        let k = k as f64;
        *c = scale * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).powf(p));
    }

    let mut anchor = vec![0.0; n + 1];
    for (m, c) in anchor.iter_mut().enumerate().skip(1) {
        let m = m as f64;
        *c = scale * ((m - 1.0).powf(p) - (m - alpha - 1.0) * m.powf(alpha));
    }

    Ok(FracOperator {
        kind: OperatorKind::LeftRlfi,
        order,
        grid,
        realization: Realization::Direct,
        coeffs: Arc::new(Coefficients::new(toeplitz, anchor)),
    })
}

/// Grünwald–Letnikov left derivative, `h^{-β} Σ_k w_k f_{i-k}` with
/// `w_0 = 1`, `w_k = w_{k-1} (1 - (β + 1) / k)`.
///
/// Approximates the Riemann-Liouville derivative, including the
/// `(x - a)^{-β}` growth near `a` when `f(a) != 0`.
pub fn build_left_rlfd(grid: Grid, order: FracOrder) -> Result<FracOperator, FracError> {
    let beta = order.value();
    let scale = grid.h().powf(-beta);
    let mut toeplitz = Vec::with_capacity(grid.len());
    let mut w = 1.0;
    toeplitz.push(scale);
    for k in 1..grid.len() {
        w *= 1.0 - (beta + 1.0) / k as f64;
        toeplitz.push(scale * w);
    }
    let anchor = toeplitz.clone();
    Ok(FracOperator {
        kind: OperatorKind::LeftRlfd,
        order,
        grid,
        realization: Realization::Direct,
        coeffs: Arc::new(Coefficients::new(toeplitz, anchor)),
    })
}

/// Right integral by reflection of [`build_left_rlfi`].
pub fn build_right_rlfi(grid: Grid, order: FracOrder) -> Result<FracOperator, FracError> {
    Ok(build_left_rlfi(grid, order)?.mirrored())
}

/// Right derivative by reflection of [`build_left_rlfd`].
pub fn build_right_rlfd(grid: Grid, order: FracOrder) -> Result<FracOperator, FracError> {
    Ok(build_left_rlfd(grid, order)?.mirrored())
}

/// The right operator `R = W⁻¹ Lᵀ W` of a left operator `L`.
///
/// Satisfies `Σ ω_i g_i (L f)_i = Σ ω_i f_i (R g)_i` up to rounding for all
/// `f`, `g`.
pub fn build_right_adjoint(op: &FracOperator) -> Result<FracOperator, FracError> {
    if !op.kind.is_left() || op.realization != Realization::Direct {
        return Err(FracError::NotLeftOperator(op.kind));
    }
    Ok(FracOperator {
        kind: op.kind.mirror(),
        order: op.order,
        grid: op.grid,
        realization: Realization::Adjoint,
        coeffs: Arc::clone(&op.coeffs),
    })
}

impl FracOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn realization(&self) -> Realization {
        self.realization
    }

    /// Toeplitz generator row (index `k = i - j`) of the underlying table.
    pub fn generator(&self) -> &[f64] {
        &self.coeffs.toeplitz
    }

    /// First column of the underlying table.
    pub fn anchor_column(&self) -> &[f64] {
        &self.coeffs.anchor
    }

    fn mirrored(self) -> Self {
        Self {
            kind: self.kind.mirror(),
            realization: Realization::Mirrored,
            ..self
        }
    }

    /// Matrix entry `M[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n_cells();
        match self.realization {
            Realization::Direct => self.coeffs.entry(i, j),
            Realization::Mirrored => self.coeffs.entry(n - i, n - j),
            Realization::Adjoint => {
                self.coeffs.entry(j, i) * self.grid.weight(j) / self.grid.weight(i)
            }
        }
    }

    /// Dense row-major matrix. Intended for tests and small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let len = self.grid.len();
        (0..len)
            .map(|i| (0..len).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, FracError> {
        if f.len() != self.grid.len() {
            return Err(FracError::LengthMismatch {
                expected: self.grid.len(),
                found: f.len(),
            });
        }
        let out = match self.realization {
            Realization::Direct => self.apply_lower(f),
            Realization::Mirrored => {
                let reversed: Vec<f64> = f.iter().rev().copied().collect();
                let mut out = self.apply_lower(&reversed);
                out.reverse();
                out
            }
            Realization::Adjoint => self.apply_adjoint(f),
        };
        Ok(out)
    }

    pub fn apply_sampled(&self, f: &SampledFn) -> Result<SampledFn, FracError> {
        if f.grid() != &self.grid {
            return Err(FracError::GridMismatch);
        }
        SampledFn::new(self.grid, self.apply(f.values())?)
    }

    /// `Mᵀ f` (plain transpose, no quadrature weights).
    pub fn apply_transpose(&self, f: &[f64]) -> Result<Vec<f64>, FracError> {
        let len = self.grid.len();
        if f.len() != len {
            return Err(FracError::LengthMismatch {
                expected: len,
                found: f.len(),
            });
        }
        if self.realization != Realization::Direct {
            return Ok((0..len)
                .map(|j| (0..len).map(|i| self.entry(i, j) * f[i]).sum())
                .collect());
        }
        let Coefficients {
            toeplitz, anchor, ..
        } = &*self.coeffs;
        Ok((0..len)
            .map(|j| {
                if j == 0 {
                    dot(anchor, f)
                } else {
                    dot(&toeplitz[..len - j], &f[j..])
                }
            })
            .collect())
    }

    fn apply_lower(&self, f: &[f64]) -> Vec<f64> {
        let Coefficients {
            anchor, reversed, ..
        } = &*self.coeffs;
        let n = f.len() - 1;
        (0..f.len())
            .map(|i| anchor[i] * f[0] + dot(&reversed[n + 1 - i..], &f[1..=i]))
            .collect()
    }

    fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let Coefficients {
            toeplitz, anchor, ..
        } = &*self.coeffs;
        let grid = &self.grid;
        let weighted: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(j, v)| grid.weight(j) * v)
            .collect();
        let len = g.len();
        (0..len)
            .map(|i| {
                let sum = if i == 0 {
                    dot(anchor, &weighted)
                } else {
                    dot(&toeplitz[..len - i], &weighted[i..])
                };
                sum / grid.weight(i)
            })
            .collect()
    }
}

/// Dot product of equal-length slices with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(v: f64) -> FracOrder {
        FracOrder::new(v).unwrap()
    }

    #[test]
    fn order_range_is_open() {
        for v in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(FracOrder::new(v).is_err(), "{v}");
        }
        assert_eq!(order(0.3).complement().value(), 0.7);
    }

    #[test]
    fn rlfi_row_zero_is_empty_and_zero_maps_to_zero() {
        let grid = Grid::new(0.0, 1.0, 16).unwrap();
        let op = build_left_rlfi(grid, order(0.4)).unwrap();
        assert!((0..grid.len()).all(|j| op.entry(0, j) == 0.0));
        let out = op.apply(&vec![0.0; grid.len()]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rlfi_is_exact_on_linear_functions() {
        // Piecewise-linear interpolation is exact, so only the kernel moments matter.
        let grid = Grid::new(0.0, 2.0, 40).unwrap();
        let alpha = 0.35;
        let op = build_left_rlfi(grid, order(alpha)).unwrap();
        let f: Vec<f64> = grid.nodes().map(|x| 3.0 - 0.5 * x).collect();
        let out = op.apply(&f).unwrap();
        let g1 = gamma(alpha + 1.0).unwrap();
        let g2 = gamma(alpha + 2.0).unwrap();
        for (x, v) in grid.nodes().zip(out) {
            let exact = 3.0 * x.powf(alpha) / g1 - 0.5 * x.powf(alpha + 1.0) / g2;
            assert!((v - exact).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn gl_weights_follow_the_recurrence() {
        let grid = Grid::new(0.0, 1.0, 8).unwrap();
        let op = build_left_rlfd(grid, order(0.5)).unwrap();
        let scale = grid.h().powf(-0.5);
        let w: Vec<f64> = op.generator().iter().map(|c| c / scale).collect();
        assert_eq!(w[0], 1.0);
        assert!((w[1] + 0.5).abs() < 1e-15);
        assert!((w[2] + 0.125).abs() < 1e-15);
        assert!((w[3] + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn adjoint_rejects_right_operators() {
        let grid = Grid::new(0.0, 1.0, 8).unwrap();
        let right = build_right_rlfi(grid, order(0.5)).unwrap();
        assert!(matches!(
            build_right_adjoint(&right),
            Err(FracError::NotLeftOperator(OperatorKind::RightRlfi))
        ));
        let left = build_left_rlfd(grid, order(0.5)).unwrap();
        let adj = build_right_adjoint(&left).unwrap();
        assert_eq!(adj.kind(), OperatorKind::RightRlfd);
        assert!(build_right_adjoint(&adj).is_err());
    }

    #[test]
    fn dense_matrices_match_apply() {
        let grid = Grid::new(-1.0, 0.5, 9).unwrap();
        let f: Vec<f64> = grid.nodes().map(|x| (3.0 * x).sin() + x * x).collect();
        let left = build_left_rlfd(grid, order(0.7)).unwrap();
        for op in [
            left.clone(),
            build_right_adjoint(&left).unwrap(),
            build_right_rlfd(grid, order(0.7)).unwrap(),
            build_left_rlfi(grid, order(0.2)).unwrap(),
        ] {
            let dense = op.to_dense();
            let out = op.apply(&f).unwrap();
            for (row, v) in dense.iter().zip(&out) {
                let expect: f64 = row.iter().zip(&f).map(|(m, x)| m * x).sum();
                assert!((expect - v).abs() < 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn right_kinds_are_upper_triangular() {
        let grid = Grid::new(0.0, 1.0, 12).unwrap();
        let left = build_left_rlfi(grid, order(0.6)).unwrap();
        for op in [
            build_right_rlfi(grid, order(0.6)).unwrap(),
            build_right_adjoint(&left).unwrap(),
        ] {
            for i in 0..grid.len() {
                for j in 0..i {
                    assert_eq!(op.entry(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn apply_checks_length_and_grid() {
        let grid = Grid::new(0.0, 1.0, 4).unwrap();
        let op = build_left_rlfi(grid, order(0.5)).unwrap();
        assert!(op.apply(&[1.0; 3]).is_err());
        let other = Grid::new(0.0, 2.0, 4).unwrap();
        assert!(matches!(
            op.apply_sampled(&SampledFn::zeros(other)),
            Err(FracError::GridMismatch)
        ));
    }
}
