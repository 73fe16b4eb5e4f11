//! Finite quadrature realizations of a measure space `(X, μ)`.
//!
//! Functions are node values, functionals `Φ_g[f] = ∫ f g dμ` are weighted dot
//! products. Quadrature weights are kept separate from kernels so that a change
//! of measure is a reweighting and never a re-discretization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Deref;

use crate::error::{ensure_len, Error, Result};
use crate::math::{abs, cos};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Midpoint,
    Trapezoid,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceKind {
    Interval { a: f64, b: f64, rule: QuadratureRule },
    /// Counting measure on `{0, …, n-1}`.
    Counting { n: usize },
    /// Arbitrary positive weights on fixed nodes, e.g. after a change of measure.
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: SpaceKind,
}

impl MeasureSpace {
    pub fn interval(a: f64, b: f64, n: usize, rule: QuadratureRule) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidArgument(format!(
                "interval endpoints must satisfy a < b (got a = {a}, b = {b})"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature needs n >= 1".into()));
        }
        let (nodes, weights) = match rule {
            QuadratureRule::Midpoint => {
                let h = (b - a) / n as f64;
                let nodes = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
                (nodes, vec![h; n])
            }
            QuadratureRule::Trapezoid => {
                if n < 2 {
                    return Err(Error::InvalidArgument(
                        "trapezoid rule needs n >= 2".into(),
                    ));
                }
                let h = (b - a) / (n - 1) as f64;
                let nodes = (0..n)
                    .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
                    .collect();
                let mut w = vec![h; n];
                w[0] = 0.5 * h;
                w[n - 1] = 0.5 * h;
                (nodes, w)
            }
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre(n);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                (
                    x.iter().map(|t| mid + half * t).collect(),
                    w.iter().map(|w| half * w).collect(),
                )
            }
        };
        Ok(MeasureSpace {
            nodes,
            weights,
            kind: SpaceKind::Interval { a, b, rule },
        })
    }

    pub fn counting(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("counting space needs n >= 1".into()));
        }
        Ok(MeasureSpace {
            nodes: (0..n).map(|i| i as f64).collect(),
            weights: vec![1.0; n],
            kind: SpaceKind::Counting { n },
        })
    }

    /// Same nodes, new strictly positive weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        ensure_len(self.len(), weights.len())?;
        check_positive("weight", &weights)?;
        Ok(MeasureSpace {
            nodes: self.nodes.clone(),
            weights,
            kind: SpaceKind::Weighted,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn is_counting(&self) -> bool {
        matches!(self.kind, SpaceKind::Counting { .. })
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Φ_g[f] = Σ_i f_i g_i w_i`.
    pub fn pair(&self, phi: &WeightFunctional, f: &[f64]) -> Result<f64> {
        ensure_len(self.len(), phi.len())?;
        ensure_len(self.len(), f.len())?;
        Ok(f.iter()
            .zip(phi.density())
            .zip(&self.weights)
            .map(|((f, g), w)| f * g * w)
            .sum())
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        ensure_len(self.len(), f.len())?;
        Ok(f.iter().zip(&self.weights).map(|(f, w)| f * w).sum())
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &t)| {
                let d = abs(t - x);
                if d < best.1 {
                    (i, d)
                } else {
                    best
                }
            })
            .0
    }
}

fn check_positive(what: &'static str, values: &[f64]) -> Result<()> {
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        Some((index, &value)) => Err(Error::NonPositive { what, index, value }),
        None => Ok(()),
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`, by Newton
/// iteration on the three-term Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if abs(dz) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Node values of a function `f ∈ E`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction(values)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction(vec![c; n])
    }

    pub fn from_fn(space: &MeasureSpace, f: impl Fn(f64) -> f64) -> Self {
        GridFunction(space.nodes().iter().map(|&x| f(x)).collect())
    }

    /// Indicator of node `j`.
    pub fn indicator(n: usize, j: usize) -> Self {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        GridFunction(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        crate::math::sup_norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridFunction(self.0.iter().map(|v| v * s).collect())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|v| *v >= 0.0)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|v| *v > 0.0)
    }
}

impl Deref for GridFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        GridFunction(v)
    }
}

/// Density `g ≥ 0` of a positive functional `Φ_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunctional {
    density: Vec<f64>,
    strictly_positive: bool,
}

impl WeightFunctional {
    pub fn new(density: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = density
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "functional density must be nonnegative (entry {index} = {value})"
            )));
        }
        let strictly_positive = density.iter().all(|v| *v > 0.0);
        Ok(WeightFunctional {
            density,
            strictly_positive,
        })
    }

    /// `g ≡ 1/μ(X)`, so that `Φ[1] = 1`.
    pub fn normalized_uniform(space: &MeasureSpace) -> Self {
        let c = 1.0 / space.total_mass();
        WeightFunctional {
            density: vec![c; space.len()],
            strictly_positive: true,
        }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn is_zero(&self) -> bool {
        self.density.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.density.iter().map(|g| g * s).collect())
    }
}
