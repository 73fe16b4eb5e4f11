// Thin wrappers so the rest of the crate reads like std float code.

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(abs(x)))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (&x, &y)| m.max(abs(x - y)))
}

/// Deterministic, reproducible probe vector with entries in `[0.5, 1.5]`.
/// Used where a start vector must not be orthogonal to anything structural.
pub(crate) fn probe_vector(n: usize) -> alloc::vec::Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * sin(1.0 + 2.399_963_229_728_653 * i as f64))
        .collect()
}
