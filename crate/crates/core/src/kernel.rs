//! Nonnegative kernels `K(x_i, y_j)` over a [`MeasureSpace`] and the integral
//! operator `(Tf)(x) = ∫ K(x,y) f(y) dμ(y)` they induce.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_len, Error, Result};
use crate::linalg::Matrix;
use crate::math::{abs, exp, powf, sup_norm};
use crate::measure::{GridFunction, MeasureSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    space: MeasureSpace,
    entries: Matrix,
}

impl Kernel {
    /// Validates squareness, dimension and entrywise nonnegativity.
    pub fn new(space: MeasureSpace, entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.rows(),
                found: entries.cols(),
            });
        }
        ensure_len(space.len(), entries.rows())?;
        for i in 0..entries.rows() {
            for (j, &v) in entries.row(i).iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Kernel { space, entries })
    }

    pub fn from_fn(space: MeasureSpace, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let x = space.nodes();
        let entries = Matrix::from_fn(space.len(), space.len(), |i, j| f(x[i], x[j]));
        Self::new(space, entries)
    }

    pub fn constant(space: MeasureSpace, c: f64) -> Result<Self> {
        Self::from_fn(space, |_, _| c)
    }

    /// `K(x,y) = v(x) u(y)`.
    pub fn separable(space: MeasureSpace, v: &[f64], u: &[f64]) -> Result<Self> {
        ensure_len(space.len(), v.len())?;
        ensure_len(space.len(), u.len())?;
        Self::new(space, Matrix::outer(v, u))
    }

    /// `K(x,y) = exp(-(x-y)² / (2σ²))`.
    pub fn gaussian(space: MeasureSpace, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gaussian width must be positive (got {sigma})"
            )));
        }
        let s2 = 2.0 * sigma * sigma;
        Self::from_fn(space, |x, y| exp(-(x - y) * (x - y) / s2))
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.space.weights()
    }

    /// `(Tf)_i = Σ_j K_ij f_j w_j`.
    pub fn apply(&self, f: &[f64]) -> Result<GridFunction> {
        ensure_len(self.len(), f.len())?;
        let w = self.space.weights();
        Ok(GridFunction::new(
            (0..self.len())
                .map(|i| {
                    self.entries
                        .row(i)
                        .iter()
                        .zip(f)
                        .zip(w)
                        .map(|((k, f), w)| k * f * w)
                        .sum()
                })
                .collect(),
        ))
    }

    /// Matrix of `T` acting on node values: `K diag(w)`.
    pub fn operator_matrix(&self) -> Matrix {
        self.entries
            .scale_columns(self.space.weights())
            .expect("weights match kernel size")
    }

    /// `(A∘B)(x,y) = ∫ A(x,ξ) B(ξ,y) dμ(ξ)`.
    pub fn compose(&self, other: &Kernel) -> Result<Kernel> {
        if self.space != other.space {
            return Err(Error::InvalidArgument(
                "kernels live on different measure spaces".into(),
            ));
        }
        let entries = self
            .entries
            .compose_weighted(self.space.weights(), &other.entries)?;
        Ok(Kernel {
            space: self.space.clone(),
            entries,
        })
    }

    /// Iterated kernel `K^{(n)}`, `n ≥ 1`.
    pub fn iterate(&self, n: usize) -> Result<Kernel> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "K^(0) is the identity, which has no kernel density on a general space".into(),
            ));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Weighted sup-norm operator bound `max_i Σ_j K_ij w_j`.
    pub fn norm(&self) -> f64 {
        self.entries.weighted_inf_norm(self.space.weights())
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.min_entry() > 0.0
    }

    pub fn verify_schur(&self, bound: &SchurBound) -> Result<SchurReport> {
        bound.check(self)
    }

    /// Power iteration on `T`, independent of the minorization machinery.
    /// Periodic kernels, whose plain iterates oscillate, are retried with a
    /// half-norm shift.
    pub fn spectral_radius_oracle(&self, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
        let m = self.operator_matrix();
        match power_iteration(&m, tol, max_iter.min(20_000)) {
            Ok(est) => Ok(est),
            Err(_) => shifted_power_iteration(&m, 0.5 * m.inf_norm(), tol, max_iter),
        }
    }
}

/// Weighted Schur test certifying `‖T‖_{L^p(μ)} ≤ C`:
///
/// ```text
/// ∫ K(x,y) ψ(y)^{q/2} dμ(y) ≤ C φ(x)^{q/2},   ∫ K(x,y) φ(x)^{p/2} dμ(x) ≤ C ψ(y)^{p/2}
/// ```
///
/// For the default exponent `p = 2` this is the classical unpowered pair
/// `∫Kψ ≤ Cφ`, `∫Kφ ≤ Cψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurBound {
    pub phi: GridFunction,
    pub psi: GridFunction,
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurReport {
    pub max_row_ratio: f64,
    pub max_col_ratio: f64,
    pub holds: bool,
}

impl SchurBound {
    pub fn new(phi: GridFunction, psi: GridFunction, constant: f64) -> Self {
        SchurBound {
            phi,
            psi,
            constant,
            exponent: 2.0,
        }
    }

    pub fn with_exponent(mut self, p: f64) -> Self {
        self.exponent = p;
        self
    }

    fn check(&self, k: &Kernel) -> Result<SchurReport> {
        let n = k.len();
        ensure_len(n, self.phi.len())?;
        ensure_len(n, self.psi.len())?;
        for (what, f) in [("phi", &self.phi), ("psi", &self.psi)] {
            if let Some((index, &value)) = f.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::NonPositive { what, index, value });
            }
        }
        let p = self.exponent;
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Schur exponent must lie in (1, inf) (got {p})"
            )));
        }
        let q = p / (p - 1.0);
        let w = k.weights();
        let a = k.entries();
        let psi_q: Vec<f64> = self.psi.iter().map(|v| powf(*v, 0.5 * q)).collect();
        let phi_p: Vec<f64> = self.phi.iter().map(|v| powf(*v, 0.5 * p)).collect();

        let mut max_row_ratio: f64 = 0.0;
        for i in 0..n {
            let s: f64 = (0..n).map(|j| a.get(i, j) * psi_q[j] * w[j]).sum();
            max_row_ratio = max_row_ratio.max(s / (self.constant * powf(self.phi[i], 0.5 * q)));
        }
        let mut col = vec![0.0; n];
        for i in 0..n {
            let c = phi_p[i] * w[i];
            for (acc, kij) in col.iter_mut().zip(a.row(i)) {
                *acc += kij * c;
            }
        }
        let max_col_ratio = col
            .iter()
            .zip(self.psi.iter())
            .map(|(s, psi)| s / (self.constant * powf(*psi, 0.5 * p)))
            .fold(0.0, f64::max);
        let holds = max_row_ratio <= 1.0 + 1e-12 && max_col_ratio <= 1.0 + 1e-12;
        Ok(SchurReport {
            max_row_ratio,
            max_col_ratio,
            holds,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimate {
    pub rho: f64,
    /// Nonnegative, sup-norm 1 (zero when the operator annihilates the start vector).
    pub vec: GridFunction,
    pub iterations: usize,
}

/// Power iteration for a nonnegative matrix acting on node values, started
/// from the all-ones vector and normalized in the sup norm. Converged when the
/// eigenvalue estimate changes by less than `tol` between iterates.
pub fn power_iteration(m: &Matrix, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
    shifted_power_iteration(m, 0.0, tol, max_iter)
}

/// Power iteration on `M + sI`, reporting `ρ(M + sI) − s`. For nonnegative `M`
/// and `s > 0` the shift removes every other eigenvalue from the peripheral
/// circle, so periodic remainders converge.
pub(crate) fn shifted_power_iteration(
    m: &Matrix,
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerEstimate> {
    let n = m.rows();
    let mut v = vec![1.0; n];
    let mut prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let mut y = m.matvec(&v)?;
        if shift != 0.0 {
            for (y, v) in y.iter_mut().zip(&v) {
                *y += shift * v;
            }
        }
        let r = sup_norm(&y);
        if r == 0.0 {
            return Ok(PowerEstimate {
                rho: 0.0,
                vec: GridFunction::new(vec![0.0; n]),
                iterations: it,
            });
        }
        for (v, y) in v.iter_mut().zip(&y) {
            *v = y / r;
        }
        if prev.is_finite() {
            last_change = abs(r - prev);
            if last_change < tol {
                return Ok(PowerEstimate {
                    rho: r - shift,
                    vec: GridFunction::new(v),
                    iterations: it,
                });
            }
        }
        prev = r;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Spectral radius estimate for a nonnegative matrix that may be periodic:
/// plain power iteration first, then a half-norm shift.
pub(crate) fn robust_spectral_radius(m: &Matrix, tol: f64) -> Result<PowerEstimate> {
    match power_iteration(m, tol, 20_000) {
        Ok(est) => Ok(est),
        Err(_) => shifted_power_iteration(m, 0.5 * m.inf_norm(), tol, 200_000),
    }
}
