//! Dominant eigenvalue as the unique zero of `D` above `ρ(R)`, and the
//! rank-one spectral projection read off from the residue
//!
//! ```text
//! Res_{λ=λ₀} (λI − T)⁻¹ = α (R_{λ₀} u₀) ⊗ (Φ R_{λ₀}) / D′(λ₀).
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{abs, exp, ln, max_abs_diff, probe_vector, sup_norm};
use crate::measure::{GridFunction, WeightFunctional};
use crate::resolvent::{BirmanSchwingerEvaluator, RankOneOperator, ResolventAt};

/// Relative offset of the first bracket point above `ρ̂`.
pub const BRACKET_DELTA: f64 = 1e-6;
pub const MIN_TOL: f64 = 1e-13;
const MAX_ROOT_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// `‖Tw − λ₀w‖∞ / ‖w‖∞`.
    pub eig_residual: f64,
    /// `‖P² − P‖∞` as an operator on node values.
    pub proj_idempotency: f64,
    /// `‖TP − λ₀P‖∞`.
    pub tp_residual: f64,
    /// `‖PT − λ₀P‖∞`.
    pub pt_residual: f64,
    /// Largest deviation of a normalized column of `P` from the normalized `w`.
    pub rank_one_defect: f64,
    /// `‖ℓT − λ₀ℓ‖∞ / ‖ℓ‖∞` for the left row `ℓ` in node coordinates.
    pub left_residual: f64,
    pub d_at_lambda0: f64,
    pub d_prime_at_lambda0: f64,
    /// `λ₀ − ρ(R)` with the uninflated power-iteration value of `ρ(R)`.
    pub gap_to_rho_r: f64,
    /// `‖w ⊗ Φ − P‖∞`; zero only when `Φ` is itself a left eigenfunctional.
    pub residue_notation_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambda0: f64,
    /// Right eigenfunction with `Φ[w] = 1`.
    pub w: GridFunction,
    /// Density of the left functional, scaled so that `left_row[w] = 1`.
    pub left_row: WeightFunctional,
    /// `w ⊗ left_row`.
    pub projection: RankOneOperator,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootInfo {
    pub lambda0: f64,
    pub d: f64,
    pub d_prime: f64,
    pub iterations: usize,
}

/// `true` when `λI − R` is provably a nonsingular M-matrix, i.e. `λ > ρ(R)`.
fn above_rho(at: &ResolventAt<'_>, u0_positive: bool) -> bool {
    !u0_positive || at.u0_image().iter().all(|v| *v > 0.0)
}

fn try_at(ev: &BirmanSchwingerEvaluator, lambda: f64) -> Result<Option<ResolventAt<'_>>> {
    match ev.at(lambda) {
        Ok(at) => Ok(Some(at)),
        Err(Error::IllConditioned { .. }) | Err(Error::Singular) | Err(Error::BelowSpectralRadius { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn find_dominant(ev: &BirmanSchwingerEvaluator, tol: f64) -> Result<f64> {
    find_dominant_detailed(ev, tol).map(|r| r.lambda0)
}

/// Geometric bracket above `ρ̂`, then Newton safeguarded by bisection.
pub fn find_dominant_detailed(ev: &BirmanSchwingerEvaluator, tol: f64) -> Result<RootInfo> {
    if !(tol >= MIN_TOL) {
        return Err(Error::InvalidArgument(alloc::format!(
            "root tolerance must be at least {MIN_TOL:e} (got {tol:e})"
        )));
    }
    if !ev.split().g().strictly_positive() {
        return Err(Error::InvalidArgument(
            "dominant-root search needs a strictly positive functional".into(),
        ));
    }
    let u0_positive = ev.split().u0().is_strictly_positive();
    let rho = ev.rho_r_estimate();
    let t_norm = ev.t_norm();
    let scale = if rho > 0.0 { rho } else { t_norm };
    let upper = 10.0 * t_norm;

    // Points known to lie at or below ρ(R), and the bracket.
    let mut bad = rho;
    let mut lo: Option<f64> = None;
    let mut hi: Option<(f64, f64)> = None;
    let mut step = BRACKET_DELTA * scale;
    loop {
        let lambda = rho + step;
        if lambda > upper {
            break;
        }
        match try_at(ev, lambda)? {
            Some(at) if above_rho(&at, u0_positive) => {
                let d = at.d();
                if d < 0.0 {
                    lo = Some(lambda);
                } else {
                    hi = Some((lambda, d));
                    break;
                }
            }
            _ => bad = lambda,
        }
        step *= 2.0;
    }
    if hi.is_none() && upper > rho {
        if let Some(at) = try_at(ev, upper)? {
            if above_rho(&at, u0_positive) && at.d() >= 0.0 {
                hi = Some((upper, at.d()));
            }
        }
    }
    let Some((mut b, d_hi)) = hi else {
        return Err(Error::NoSignChange {
            lower: lo.unwrap_or(rho),
            upper,
        });
    };
    if d_hi == 0.0 {
        return finish(ev, b, 0);
    }
    let mut a = match lo {
        Some(a) => a,
        None => {
            // D ≥ 0 already at the first admissible point: search downward
            // for a point above ρ(R) with D < 0.
            let mut left = bad;
            let mut right = b;
            let mut found = None;
            for _ in 0..200 {
                let mid = 0.5 * (left + right);
                if mid <= left || mid >= right {
                    break;
                }
                match try_at(ev, mid)? {
                    Some(at) if above_rho(&at, u0_positive) => {
                        if at.d() < 0.0 {
                            found = Some(mid);
                            break;
                        }
                        right = mid;
                        b = mid;
                    }
                    _ => left = mid,
                }
            }
            match found {
                Some(a) => a,
                None => {
                    return Err(Error::NoSignChange {
                        lower: left,
                        upper: b,
                    })
                }
            }
        }
    };

    // Concave increasing D: Newton from the left end stays inside the bracket.
    let mut x = a;
    for it in 1..=MAX_ROOT_ITER {
        let at = ev.at(x)?;
        let d = at.d();
        let dp = at.d_prime()?;
        if abs(d) <= tol * (dp * x).max(1.0) {
            return Ok(RootInfo {
                lambda0: x,
                d,
                d_prime: dp,
                iterations: it,
            });
        }
        if d < 0.0 {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 4.0 * f64::EPSILON * b {
            return finish(ev, x, it);
        }
        let newton = x - d / dp;
        x = if dp > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::NonConvergence {
        iterations: MAX_ROOT_ITER,
        last_change: b - a,
    })
}

fn finish(ev: &BirmanSchwingerEvaluator, lambda: f64, iterations: usize) -> Result<RootInfo> {
    let at = ev.at(lambda)?;
    Ok(RootInfo {
        lambda0: lambda,
        d: at.d(),
        d_prime: at.d_prime()?,
        iterations,
    })
}

fn normalize_phi(ev: &BirmanSchwingerEvaluator, v: &[f64]) -> GridFunction {
    let s = ev.phi(v);
    GridFunction::new(v.iter().map(|x| x / s).collect())
}

/// `w = (α/D′(λ₀)) R_{λ₀} u₀`, renormalized to `Φ[w] = 1`.
pub fn eigenfunction_from_residue(ev: &BirmanSchwingerEvaluator, lambda0: f64) -> Result<GridFunction> {
    let at = ev.at(lambda0)?;
    let c = ev.split().alpha() / at.d_prime()?;
    let raw: Vec<f64> = at.u0_image().iter().map(|x| c * x).collect();
    Ok(normalize_phi(ev, &raw))
}

/// Residue factors in node coordinates: `P f = right · (left · f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueFactors {
    /// `α R_{λ₀} u₀ / D′(λ₀)`.
    pub right: Vec<f64>,
    /// `(λ₀I − R)⁻ᵀ (g ∘ w)`, the row realizing `f ↦ Φ[R_{λ₀} f]`.
    pub left: Vec<f64>,
}

impl ResidueFactors {
    pub fn matrix(&self) -> Matrix {
        Matrix::outer(&self.right, &self.left)
    }
}

pub fn residue_factors(ev: &BirmanSchwingerEvaluator, lambda0: f64) -> Result<ResidueFactors> {
    let at = ev.at(lambda0)?;
    let c = ev.split().alpha() / at.d_prime()?;
    Ok(ResidueFactors {
        right: at.u0_image().iter().map(|x| c * x).collect(),
        left: at.resolve_r_transpose(ev.phi_row())?,
    })
}

/// The residue as `w ⊗ ℓ` with `Φ[w] = 1`.
pub fn spectral_projection(ev: &BirmanSchwingerEvaluator, lambda0: f64) -> Result<RankOneOperator> {
    let f = residue_factors(ev, lambda0)?;
    let s = ev.phi(&f.right);
    let w = GridFunction::new(f.right.iter().map(|x| x / s).collect());
    let weights = ev.split().kernel.weights();
    // Nonnegative by resolvent positivity; clamping removes rounding residue only.
    let density: Vec<f64> = f
        .left
        .iter()
        .zip(weights)
        .map(|(l, wt)| (s * l / wt).max(0.0))
        .collect();
    RankOneOperator::new(ev.split().kernel.space().clone(), w, WeightFunctional::new(density)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    /// Normalized so that `Φ[w] = 1`.
    pub w: GridFunction,
    pub terms: usize,
    /// Measured contraction factor of successive terms.
    pub ratio: f64,
    /// `α Σ (n+1) λ₀^{−(n+2)} Φ[Rⁿu₀]`, the derivative assembled from the same terms.
    pub d_prime: f64,
}

pub const SERIES_MAX_TERMS: usize = 200_000;

/// `w ∝ Σ_{n≥0} λ₀^{−(n+1)} Rⁿ u₀`, without any linear solve.
pub fn eigenfunction_series(ev: &BirmanSchwingerEvaluator, lambda0: f64, tol: f64) -> Result<SeriesResult> {
    if !(lambda0 > ev.rho_r_estimate()) {
        return Err(Error::BelowSpectralRadius {
            lambda: lambda0,
            rho: ev.rho_r_estimate(),
        });
    }
    let r = ev.r_operator();
    let alpha = ev.split().alpha();
    // term_n = λ₀^{−(n+1)} Rⁿ u₀, rescaled every step so nothing overflows.
    let mut term: Vec<f64> = ev.split().u0().iter().map(|u| u / lambda0).collect();
    let mut sum = term.clone();
    let mut d_prime = alpha * ev.phi(&term) / lambda0;
    let mut norms = alloc::vec![sup_norm(&term)];
    let mut ratio = 0.0;
    for n in 1..SERIES_MAX_TERMS {
        term = r.matvec(&term)?;
        term.iter_mut().for_each(|t| *t /= lambda0);
        let term_norm = sup_norm(&term);
        if term_norm == 0.0 {
            return Ok(SeriesResult {
                w: normalize_phi(ev, &sum),
                terms: n,
                ratio: 0.0,
                d_prime,
            });
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        d_prime += alpha * (n + 1) as f64 * ev.phi(&term) / lambda0;
        norms.push(term_norm);
        if n < 2 {
            continue;
        }
        let half = norms.len() / 2;
        ratio = exp((ln(term_norm) - ln(norms[half])) / (n - half) as f64);
        if n >= 4 && ratio < 1.0 {
            let tail = term_norm * ratio / (1.0 - ratio);
            if tail <= tol * sup_norm(&sum) {
                return Ok(SeriesResult {
                    w: normalize_phi(ev, &sum),
                    terms: n + 1,
                    ratio,
                    d_prime,
                });
            }
        }
        if n >= 64 && ratio >= 1.0 - 1e-6 {
            return Err(Error::SlowConvergence { ratio });
        }
    }
    Err(Error::SlowConvergence { ratio })
}

fn rank_one_defect(p: &Matrix, w: &[f64]) -> f64 {
    let wn = sup_norm(w);
    let mut worst: f64 = 0.0;
    for j in 0..p.cols() {
        let col = p.column(j);
        let cn = sup_norm(&col);
        if cn == 0.0 {
            continue;
        }
        // Orient by the largest entry of w.
        let idx = w
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if abs(*v) > abs(w[best]) { i } else { best });
        let sign = if col[idx] * w[idx] < 0.0 { -1.0 } else { 1.0 };
        let a: Vec<f64> = col.iter().map(|c| sign * c / cn).collect();
        let b: Vec<f64> = w.iter().map(|v| v / wn).collect();
        worst = worst.max(max_abs_diff(&a, &b));
    }
    worst
}

/// Runs the full pipeline: root, residue, eigenfunction and diagnostics.
pub fn solve(ev: &BirmanSchwingerEvaluator, tol: f64) -> Result<SpectralResult> {
    let root = find_dominant_detailed(ev, tol)?;
    let lambda0 = root.lambda0;
    let projection = spectral_projection(ev, lambda0)?;
    let w = eigenfunction_from_residue(ev, lambda0)?;

    let t = ev.t_operator();
    let p = projection.matrix();
    let tw = t.matvec(&w)?;
    let eig_residual = tw
        .iter()
        .zip(w.iter())
        .fold(0.0f64, |m, (a, b)| m.max(abs(a - lambda0 * b)))
        / w.sup_norm();
    let pp = p.matmul(&p)?;
    let tp = t.matmul(&p)?;
    let pt = p.matmul(t)?;
    let lp = p.scaled(lambda0);

    let weights = ev.split().kernel.weights();
    let left_node: Vec<f64> = projection
        .b()
        .density()
        .iter()
        .zip(weights)
        .map(|(l, w)| l * w)
        .collect();
    let lt = t.vecmat(&left_node)?;
    let left_residual = lt
        .iter()
        .zip(&left_node)
        .fold(0.0f64, |m, (a, b)| m.max(abs(a - lambda0 * b)))
        / sup_norm(&left_node);
    let w_phi = Matrix::outer(&w, ev.phi_row());

    let diagnostics = Diagnostics {
        eig_residual,
        proj_idempotency: pp.sub(&p)?.inf_norm(),
        tp_residual: tp.sub(&lp)?.inf_norm(),
        pt_residual: pt.sub(&lp)?.inf_norm(),
        rank_one_defect: rank_one_defect(&p, &w),
        left_residual,
        d_at_lambda0: root.d,
        d_prime_at_lambda0: root.d_prime,
        gap_to_rho_r: lambda0 - ev.rho_r_raw(),
        residue_notation_gap: w_phi.sub(&p)?.inf_norm(),
    };
    Ok(SpectralResult {
        lambda0,
        w,
        left_row: projection.b().clone(),
        projection,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceReport {
    /// Growth rate of `(I − P) T (I − P)`.
    pub rho2: f64,
    /// `ρ₂ / λ₀`.
    pub gap_ratio: f64,
    pub dominant: bool,
    pub diagnostics: Diagnostics,
}

const DEFLATION_BURN_IN: usize = 1500;
const DEFLATION_WINDOW: usize = 500;

/// Second spectral radius by deflated power iteration, averaged over a window
/// of log growth factors so that complex or negative second eigenvalues are
/// measured by modulus.
pub fn deflated_radius(t: &Matrix, p: &Matrix) -> Result<f64> {
    let n = t.rows();
    let mut ip = Matrix::identity(n).sub(p)?;
    let b = ip.matmul(t)?.matmul(&ip)?;
    ip = b;
    let mut v = probe_vector(n);
    let s = sup_norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut log_sum = 0.0;
    for it in 0..DEFLATION_BURN_IN + DEFLATION_WINDOW {
        let y = ip.matvec(&v)?;
        let norm = sup_norm(&y);
        if norm == 0.0 || norm < 1e-290 {
            return Ok(0.0);
        }
        if it >= DEFLATION_BURN_IN {
            log_sum += ln(norm);
        }
        v = y.iter().map(|x| x / norm).collect();
    }
    Ok(exp(log_sum / DEFLATION_WINDOW as f64))
}

pub fn verify_dominance(ev: &BirmanSchwingerEvaluator, result: &SpectralResult) -> Result<DominanceReport> {
    let rho2 = deflated_radius(ev.t_operator(), &result.projection.matrix())?;
    Ok(DominanceReport {
        rho2,
        gap_ratio: rho2 / result.lambda0,
        dominant: rho2 < result.lambda0,
        diagnostics: result.diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DPoint {
    pub lambda: f64,
    pub d: f64,
    pub d_prime: f64,
}

/// `D` and `D′` at `points` values spaced geometrically in `λ − ρ̂` over
/// `[lambda_min, lambda_max]`.
pub fn d_curve(ev: &BirmanSchwingerEvaluator, lambda_min: f64, lambda_max: f64, points: usize) -> Result<Vec<DPoint>> {
    let rho = ev.rho_r_estimate();
    if !(lambda_min > rho && lambda_max > lambda_min) || points < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need rho_hat = {rho} < lambda_min < lambda_max and at least two points"
        )));
    }
    let a = ln(lambda_min - rho);
    let b = ln(lambda_max - rho);
    (0..points)
        .map(|i| {
            let lambda = if i + 1 == points {
                lambda_max
            } else {
                rho + exp(a + (b - a) * i as f64 / (points - 1) as f64)
            };
            let at = ev.at(lambda)?;
            Ok(DPoint {
                lambda,
                d: at.d(),
                d_prime: at.d_prime()?,
            })
        })
        .collect()
}

/// Default sampling window `(ρ̂ + 10⁻⁶ scale, 10 ‖T‖]`.
pub fn default_window(ev: &BirmanSchwingerEvaluator) -> (f64, f64) {
    let rho = ev.rho_r_estimate();
    let scale = if rho > 0.0 { rho } else { ev.t_norm() };
    (rho + BRACKET_DELTA * scale, 10.0 * ev.t_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::{extract_minorization, split, Strategy};
    use crate::kernel::Kernel;
    use crate::measure::{MeasureSpace, QuadratureRule};
    use crate::resolvent::SolverMode;
    use alloc::vec;

    fn ev_for(k: &Kernel, s: Strategy) -> BirmanSchwingerEvaluator {
        let c = extract_minorization(k, &s).unwrap().certificate().unwrap();
        BirmanSchwingerEvaluator::new(split(k, &c).unwrap(), SolverMode::DirectLu).unwrap()
    }

    fn two_by_two() -> Kernel {
        Kernel::new(
            MeasureSpace::counting(2).unwrap(),
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_kernel() {
        let s = MeasureSpace::interval(0.0, 1.0, 16, QuadratureRule::Midpoint).unwrap();
        let ev = ev_for(&Kernel::constant(s, 1.0).unwrap(), Strategy::RowMin);
        let r = solve(&ev, 1e-13).unwrap();
        assert!((r.lambda0 - 1.0).abs() < 1e-12);
        assert!(r.w.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let d = verify_dominance(&ev, &r).unwrap();
        assert!(d.rho2 < 1e-10 && d.dominant);
        let series = eigenfunction_series(&ev, r.lambda0, 1e-12).unwrap();
        assert_eq!(series.terms, 1);
        assert!((r.diagnostics.residue_notation_gap).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_exact() {
        let ev = ev_for(&two_by_two(), Strategy::RowMin);
        let r = solve(&ev, 1e-13).unwrap();
        assert!((r.lambda0 - 3.0).abs() < 1e-10);
        // Φ = uniform average, so Φ[(1,1)] = 1.
        for v in r.w.iter() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let p = r.projection.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.get(i, j) - 0.5).abs() < 1e-10);
            }
        }
        let d = verify_dominance(&ev, &r).unwrap();
        assert!((d.rho2 - 1.0).abs() < 1e-6);
        assert!((d.gap_ratio - 1.0 / 3.0).abs() < 1e-6);
        let s = eigenfunction_series(&ev, r.lambda0, 1e-13).unwrap();
        assert!(max_abs_diff(&s.w, &r.w) < 1e-10);
        assert!((s.ratio - 1.0 / 3.0).abs() < 1e-6);
        assert!((s.d_prime - r.diagnostics.d_prime_at_lambda0).abs() < 1e-10);
    }

    #[test]
    fn separable_eigenfunction_is_v() {
        let s = MeasureSpace::interval(0.0, 1.0, 24, QuadratureRule::GaussLegendre).unwrap();
        let v: Vec<f64> = s.nodes().iter().map(|x| 1.0 + x).collect();
        let u: Vec<f64> = s.nodes().iter().map(|x| 2.0 - x).collect();
        let k = Kernel::separable(s.clone(), &v, &u).unwrap();
        let ev = ev_for(&k, Strategy::ColumnProfile);
        let r = solve(&ev, 1e-13).unwrap();
        let ratio: Vec<f64> = r.w.iter().zip(&v).map(|(w, v)| w / v).collect();
        for q in &ratio {
            assert!((q - ratio[0]).abs() < 1e-10);
        }
        let uv: f64 = (0..24).map(|i| u[i] * v[i] * s.weights()[i]).sum();
        assert!((r.lambda0 - uv).abs() < 1e-10 * uv);
    }

    #[test]
    fn gaussian_matches_power_iteration() {
        let s = MeasureSpace::interval(0.0, 1.0, 200, QuadratureRule::Midpoint).unwrap();
        let k = Kernel::gaussian(s, 0.25).unwrap();
        let ev = ev_for(&k, Strategy::RowMin);
        let lambda0 = find_dominant(&ev, 1e-13).unwrap();
        let oracle = k.spectral_radius_oracle(1e-14, 10_000).unwrap().rho;
        assert!((lambda0 - oracle).abs() <= 1e-8 * oracle);
    }

    #[test]
    fn projection_matches_numerical_residue() {
        let n = 30;
        let s = MeasureSpace::counting(n).unwrap();
        let k = Kernel::from_fn(s, |x, y| 0.2 + libm::sin(1.0 + x * 0.7 + y * 1.3).abs()).unwrap();
        let ev = ev_for(&k, Strategy::ColumnProfile);
        let r = solve(&ev, 1e-13).unwrap();
        let p = r.projection.matrix();
        let h = 1e-6;
        let lam = r.lambda0 + h;
        let at = ev.at(lam).unwrap();
        for j in [0, 7, 29] {
            let e = GridFunction::indicator(n, j);
            let col = at.resolve_t(&e).unwrap();
            for i in 0..n {
                assert!((h * col[i] - p.get(i, j)).abs() < 1e-4);
            }
        }
        let d = &r.diagnostics;
        assert!(d.proj_idempotency < 1e-8);
        assert!(d.tp_residual < 1e-8 * r.lambda0 && d.pt_residual < 1e-8 * r.lambda0);
        assert!(d.left_residual < 1e-8 * r.lambda0);
        assert!(d.rank_one_defect < 1e-8);
        assert!(d.residue_notation_gap > 1e-6, "Φ is not a left eigenfunctional here");
    }

    #[test]
    fn d_curve_is_increasing() {
        let ev = ev_for(&two_by_two(), Strategy::RowMin);
        let (a, b) = default_window(&ev);
        let c = d_curve(&ev, a, b, 200).unwrap();
        for pair in c.windows(2) {
            assert!(pair[1].d > pair[0].d);
        }
        assert!(c[0].d < 0.0 && c.last().unwrap().d > 0.0);
    }

    #[test]
    fn weak_certificate_reports_no_sign_change() {
        // A vanishingly small α leaves D ≈ 1 everywhere above ρ(R).
        let k = two_by_two();
        let mut c = extract_minorization(&k, &Strategy::RowMin).unwrap().certificate().unwrap();
        c.alpha *= 1e-30;
        let ev = BirmanSchwingerEvaluator::new(split(&k, &c).unwrap(), SolverMode::DirectLu).unwrap();
        assert!(matches!(find_dominant(&ev, 1e-12), Err(Error::NoSignChange { .. })));
    }
}
