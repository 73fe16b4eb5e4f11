//! Change of measure `dμ = h dν` and the isometric conjugation
//! `K_e(x,y) = h(x)^{1/p} K(x,y) h(y)^{1/q}` acting on `L^p(ν)`.
//!
//! On the grid the ν-space keeps the nodes and divides the weights by `h`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{ensure_len, Error, Result};
use crate::kernel::{Kernel, SchurBound};
use crate::linalg::Matrix;
use crate::math::powf;
use crate::measure::GridFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureChange {
    h: GridFunction,
    p: f64,
}

impl MeasureChange {
    pub fn new(h: GridFunction, p: f64) -> Result<Self> {
        if let Some((index, &value)) = h.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositive { what: "h", index, value });
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must lie in [1, inf) (got {p})")));
        }
        Ok(MeasureChange { h, p })
    }

    pub fn h(&self) -> &GridFunction {
        &self.h
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent; infinite when `p = 1`.
    pub fn q(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }

    fn inv_q(&self) -> f64 {
        1.0 - 1.0 / self.p
    }

    /// The change `1/h` undoing this one.
    pub fn inverse(&self) -> MeasureChange {
        MeasureChange {
            h: GridFunction::new(self.h.iter().map(|v| 1.0 / v).collect()),
            p: self.p,
        }
    }
}

/// `K_e` over the ν-space with weights `w_i / h_i`.
pub fn conjugate_kernel(k: &Kernel, mc: &MeasureChange) -> Result<Kernel> {
    let n = k.len();
    ensure_len(n, mc.h.len())?;
    let left: Vec<f64> = mc.h.iter().map(|h| powf(*h, 1.0 / mc.p)).collect();
    let right: Vec<f64> = mc.h.iter().map(|h| powf(*h, mc.inv_q())).collect();
    let a = k.entries();
    let entries = Matrix::from_fn(n, n, |i, j| left[i] * a.get(i, j) * right[j]);
    let weights = k.weights().iter().zip(mc.h.iter()).map(|(w, h)| w / h).collect();
    Kernel::new(k.space().reweighted(weights)?, entries)
}

/// Image of an eigenfunction under `M f = h^{1/p} f`.
pub fn transport_eigenfunction(w: &[f64], mc: &MeasureChange) -> Result<GridFunction> {
    ensure_len(mc.h.len(), w.len())?;
    Ok(GridFunction::new(
        w.iter()
            .zip(mc.h.iter())
            .map(|(w, h)| powf(*h, 1.0 / mc.p) * w)
            .collect(),
    ))
}

/// Weights `φ̃ = h^{2/(pq)} φ`, `ψ̃ = h^{2/(pq)} ψ` for which the exponent-`p`
/// Schur test of `K_e` under ν holds with the same constant, entry by entry.
pub fn transform_schur(b: &SchurBound, mc: &MeasureChange) -> Result<SchurBound> {
    ensure_len(mc.h.len(), b.phi.len())?;
    ensure_len(mc.h.len(), b.psi.len())?;
    if mc.p == 1.0 {
        return Err(Error::InvalidArgument(
            "Schur weights cannot be transported at p = 1".into(),
        ));
    }
    if b.exponent != mc.p {
        return Err(Error::InvalidArgument(format!(
            "Schur exponent {} does not match the measure-change exponent {}",
            b.exponent, mc.p
        )));
    }
    let e = 2.0 / (mc.p * mc.q());
    let scale = |f: &GridFunction| -> GridFunction {
        GridFunction::new(f.iter().zip(mc.h.iter()).map(|(f, h)| powf(*h, e) * f).collect())
    };
    Ok(SchurBound {
        phi: scale(&b.phi),
        psi: scale(&b.psi),
        constant: b.constant,
        exponent: b.exponent,
    })
}
