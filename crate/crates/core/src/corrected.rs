//! Corrected kernels `Γ₀ = K`, `Γ_n = (T − P) Γ_{n−1} = R ∘ Γ_{n−1}`, the
//! kernel-level Neumann series `(λI − R)⁻¹ K = Σ_{n≥0} λ^{−(n+1)} Γ_n`, and the
//! combinatorial expansion of `Γ_n` in iterated kernels.

use alloc::vec;
use alloc::vec::Vec;

use crate::doeblin::RankOneSplit;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::math::powf;

#[derive(Debug, Clone)]
pub struct CorrectedKernelSequence {
    pub split: RankOneSplit,
    /// `[Γ₀, …, Γ_m]`, computed as `R ∘ Γ_{n−1}`.
    pub gammas: Vec<Kernel>,
    /// `[b₁, …, b_m]` with `b_j = Φ[K^{(j)} u₀]`.
    pub scalars_b: Vec<f64>,
    /// Largest relative gap between the subtract-then-integrate form and the
    /// `R ∘ Γ` form over `n ≤ m`.
    pub cross_check: f64,
}

/// `Φ_ξ[F(ξ, ·)]` as a row over `y`.
fn phi_rows(split: &RankOneSplit, f: &Matrix) -> Vec<f64> {
    let gw: Vec<f64> = split
        .g()
        .density()
        .iter()
        .zip(split.kernel.weights())
        .map(|(g, w)| g * w)
        .collect();
    f.vecmat(&gw).expect("square")
}

/// Kernel of `P ∘ F`: `α u₀(x) Φ_ξ[F(ξ, y)]`.
fn p_compose(split: &RankOneSplit, f: &Matrix) -> Matrix {
    Matrix::outer(split.u0(), &phi_rows(split, f)).scaled(split.alpha())
}

fn rel_gap(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(1.0)
}

pub fn build_gammas(split: &RankOneSplit, m: usize) -> Result<CorrectedKernelSequence> {
    let k = &split.kernel;
    let w = k.weights();
    let mut gammas = vec![k.clone()];
    let mut subtract = k.entries().clone();
    let mut cross_check: f64 = 0.0;
    for _ in 0..m {
        let prev = gammas.last().expect("nonempty");
        let next = split.remainder.compose(prev)?;
        subtract = k
            .entries()
            .compose_weighted(w, &subtract)?
            .sub(&p_compose(split, &subtract))?;
        cross_check = cross_check.max(rel_gap(next.entries(), &subtract));
        gammas.push(next);
    }
    let mut scalars_b = Vec::with_capacity(m);
    let mut tu = split.u0().clone();
    for _ in 0..m {
        tu = k.apply(&tu)?;
        scalars_b.push(split.phi(&tu)?);
    }
    Ok(CorrectedKernelSequence {
        split: split.clone(),
        gammas,
        scalars_b,
        cross_check,
    })
}

impl CorrectedKernelSequence {
    pub fn m(&self) -> usize {
        self.gammas.len() - 1
    }

    /// `C = ‖T‖ + ‖P‖` in the weighted sup norm.
    pub fn growth_constant(&self) -> f64 {
        let t = self.split.kernel.norm();
        let p = self.split.rank_one_part().weighted_inf_norm(self.split.kernel.weights());
        t + p
    }
}

#[derive(Debug, Clone)]
pub struct KernelNeumann {
    /// `H ≈ (λI − R)⁻¹ K` as a kernel density.
    pub h: Matrix,
    /// Index of the last term included.
    pub last_index: usize,
    /// `(C/λ)^{m+2} / (1 − C/λ)`, infinite when `C ≥ λ`.
    pub geometric_tail_bound: f64,
    /// `‖K‖/λ · (‖R‖/λ)^{m+1} / (1 − ‖R‖/λ)`.
    pub sharp_tail_bound: f64,
}

/// Geometric tail after the term with index `m` for a sequence bounded by `c^{n+1}`.
pub fn geometric_tail_bound(c: f64, lambda: f64, m: usize) -> f64 {
    let q = c / lambda;
    if q >= 1.0 {
        f64::INFINITY
    } else {
        powf(q, (m + 2) as f64) / (1.0 - q)
    }
}

/// Tail after index `m` using `‖Γ_n‖ ≤ ‖R‖ⁿ ‖K‖`.
pub fn sharp_tail_bound(k_norm: f64, r_norm: f64, lambda: f64, m: usize) -> f64 {
    let q = r_norm / lambda;
    if q >= 1.0 {
        f64::INFINITY
    } else {
        k_norm / lambda * powf(q, (m + 1) as f64) / (1.0 - q)
    }
}

/// Partial sums `Σ_{n=0}^{m} λ^{−(n+1)} Γ_n`, extended past the stored
/// sequence as needed, until the smaller tail bound drops below `tol`.
pub fn neumann_kernel_resolvent(seq: &CorrectedKernelSequence, lambda: f64, tol: f64) -> Result<KernelNeumann> {
    let split = &seq.split;
    let r_norm = split.remainder.norm();
    if !(lambda > r_norm) {
        return Err(Error::NotConvergent {
            lambda,
            norm: r_norm,
        });
    }
    let k_norm = split.kernel.norm();
    let c = seq.growth_constant();
    let n = split.kernel.len();
    let mut h = Matrix::zeros(n, n);
    let mut current = seq.gammas[0].clone();
    let mut scale = 1.0 / lambda;
    let max_terms = 100_000;
    for idx in 0..max_terms {
        if idx > 0 {
            current = match seq.gammas.get(idx) {
                Some(g) => g.clone(),
                None => split.remainder.compose(&current)?,
            };
        }
        h = h.add_scaled(scale, current.entries())?;
        scale /= lambda;
        let geometric = geometric_tail_bound(c, lambda, idx);
        let sharp = sharp_tail_bound(k_norm, r_norm, lambda, idx);
        if geometric.min(sharp) < tol {
            return Ok(KernelNeumann {
                h,
                last_index: idx,
                geometric_tail_bound: geometric,
                sharp_tail_bound: sharp,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_terms,
        last_change: sharp_tail_bound(k_norm, r_norm, lambda, max_terms),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm42Report {
    /// `‖(λI − T)∘H − (K − P∘H)‖` in the weighted sup norm, divided by `‖K‖`.
    pub residual: f64,
    /// Same residual measured entrywise.
    pub residual_max_entry: f64,
    pub terms: usize,
}

/// Checks `(λI − T) H = K − P H` with `H` from [`neumann_kernel_resolvent`].
pub fn verify_thm42_identity(seq: &CorrectedKernelSequence, lambda: f64, tol: f64) -> Result<Thm42Report> {
    let neu = neumann_kernel_resolvent(seq, lambda, tol)?;
    let split = &seq.split;
    let k = split.kernel.entries();
    let w = split.kernel.weights();
    let th = k.compose_weighted(w, &neu.h)?;
    let lhs = neu.h.scaled(lambda).sub(&th)?;
    let rhs = k.sub(&p_compose(split, &neu.h))?;
    let diff = lhs.sub(&rhs)?;
    Ok(Thm42Report {
        residual: diff.weighted_inf_norm(w) / split.kernel.norm(),
        residual_max_entry: diff.max_abs(),
        terms: neu.last_index + 1,
    })
}

/// One row of the corrected-kernel table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub n: usize,
    pub gamma_norm: f64,
    /// `C^{n+1}`.
    pub bound: f64,
    /// `‖(λI − R)⁻¹K − Σ_{j≤n} λ^{−(j+1)} Γ_j‖` against a dense solve.
    pub partial_sum_error: f64,
}

pub fn gamma_table(seq: &CorrectedKernelSequence, lambda: f64) -> Result<Vec<GammaRow>> {
    let split = &seq.split;
    let w = split.kernel.weights();
    let n = split.kernel.len();
    let mut m = split.remainder.operator_matrix().scaled(-1.0);
    for i in 0..n {
        m.set(i, i, m.get(i, i) + lambda);
    }
    let exact = crate::linalg::Lu::factor(&m)?.solve_matrix(split.kernel.entries())?;
    let c = seq.growth_constant();
    let mut partial = Matrix::zeros(n, n);
    let mut scale = 1.0 / lambda;
    let mut rows = Vec::with_capacity(seq.gammas.len());
    for (idx, g) in seq.gammas.iter().enumerate() {
        partial = partial.add_scaled(scale, g.entries())?;
        scale /= lambda;
        rows.push(GammaRow {
            n: idx,
            gamma_norm: g.norm(),
            bound: powf(c, (idx + 1) as f64),
            partial_sum_error: exact.sub(&partial)?.weighted_inf_norm(w),
        });
    }
    Ok(rows)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `B_{p,q}(b₁, b₂, …) = Σ p!/(k₁! k₂! ⋯) Π b_j^{k_j}` over multiplicity vectors
/// with `Σ k_j = p` and `Σ j k_j = q`. `b[0]` holds `b₁`.
///
/// With the multinomial weight `p!/Πk_j!` this counts ordered placements, so it
/// equals `Σ_{i₁+⋯+i_p = q, i_r ≥ 1} Π b_{i_r}`.
pub fn bell_polynomial(p: usize, q: usize, b: &[f64]) -> Result<f64> {
    if p == 0 || p > q {
        return Err(Error::InvalidArgument(alloc::format!(
            "Bell polynomial needs 1 <= p <= q (got p = {p}, q = {q})"
        )));
    }
    let top = q - p + 1;
    if b.len() < top {
        return Err(Error::DimensionMismatch {
            expected: top,
            found: b.len(),
        });
    }
    let mut k = vec![0usize; top];
    let mut total = 0.0;
    bell_rec(1, p, q, b, &mut k, &mut total, factorial(p));
    Ok(total)
}

fn bell_rec(j: usize, parts_left: usize, sum_left: usize, b: &[f64], k: &mut [usize], total: &mut f64, pf: f64) {
    if j > k.len() {
        if parts_left == 0 && sum_left == 0 {
            let mut term = pf;
            for (idx, &kj) in k.iter().enumerate() {
                term /= factorial(kj);
                for _ in 0..kj {
                    term *= b[idx];
                }
            }
            *total += term;
        }
        return;
    }
    let mut kj = 0;
    while kj <= parts_left && kj * j <= sum_left {
        k[j - 1] = kj;
        bell_rec(j + 1, parts_left - kj, sum_left - kj * j, b, k, total, pf);
        kj += 1;
    }
    k[j - 1] = 0;
}

/// Location of the first disagreement between the Bell-form expansion and `Γ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailingTerm {
    /// The leading iterated kernel differs (`K^{(n)}` in the Bell form, `K^{(n+1)}` required).
    Leading { n: usize },
    /// The `(ℓ, k)` block of the double sum differs from the corresponding
    /// block of `(T − P)ⁿ K` with `ℓ + 1` rank-one factors and inner exponent `k`.
    Block { n: usize, ell: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaExpansionReport {
    pub n: usize,
    /// `Γ_n` against the Bell-form expansion, with `K^{(0)}` read as the identity.
    pub literal_max_abs_error: f64,
    /// `Γ_n` against the full word expansion of `(T − P)ⁿ K`.
    pub corrected_max_abs_error: f64,
    /// `max |K^{(n)} − K^{(n+1)}|`.
    pub leading_term_gap: f64,
    pub first_failing: Option<FailingTerm>,
}

impl GammaExpansionReport {
    pub fn max_abs_error(&self) -> f64 {
        self.literal_max_abs_error
    }
}

pub const MAX_EXPANSION_ORDER: usize = 6;

/// Compares `Γ_n` with both the Bell-form expansion
///
/// ```text
/// K^{(n)} − Σ_{ℓ=0}^{n−1} (−1)^ℓ Σ_{k=0}^{n−ℓ−1} K^{(n−k−ℓ−1)} B_{ℓ+1,k+ℓ+1}(b₁, b₂, …)
/// ```
///
/// and the word expansion
///
/// ```text
/// K^{(n+1)} + Σ_{p=1}^{n} (−α)^p Σ_k C_{p−1,k} Σ_{i₀+i_p = n−p−k} (T^{i₀}u₀) ⊗ Φ_ξ K^{(i_p+1)},
/// C_{ℓ,k} = Σ_{i₁+⋯+i_ℓ = k, i_r ≥ 0} Π Φ[T^{i_r} u₀].
/// ```
pub fn verify_gamma_expansion(seq: &CorrectedKernelSequence, n: usize) -> Result<GammaExpansionReport> {
    if n > MAX_EXPANSION_ORDER {
        return Err(Error::InvalidArgument(alloc::format!(
            "expansion check is capped at n = {MAX_EXPANSION_ORDER}"
        )));
    }
    if n > seq.m() {
        return Err(Error::InvalidArgument(alloc::format!(
            "sequence holds Γ up to n = {}, asked for {n}",
            seq.m()
        )));
    }
    let split = &seq.split;
    let k = &split.kernel;
    let w = k.weights();
    let size = k.len();
    let alpha = split.alpha();
    let gamma = seq.gammas[n].entries();

    // K^{(0)} is the identity operator; its node-coordinate kernel is diag(1/w).
    let inv_w: Vec<f64> = w.iter().map(|w| 1.0 / w).collect();
    let mut iter_k = vec![Matrix::diagonal(&inv_w), k.entries().clone()];
    for j in 2..=n + 1 {
        let next = k.entries().compose_weighted(w, &iter_k[j - 1])?;
        iter_k.push(next);
    }
    let mut t_u0 = vec![split.u0().clone()];
    for i in 1..=n {
        let next = k.apply(&t_u0[i - 1])?;
        t_u0.push(next);
    }
    // c[i] = Φ[T^i u₀]; the Bell-form b_j is c[j] for j ≥ 1.
    let c: Vec<f64> = t_u0.iter().map(|f| split.phi(f).expect("sized")).collect();
    let b = &c[1..];
    let phi_k: Vec<Vec<f64>> = iter_k.iter().map(|m| phi_rows(split, m)).collect();

    let tol = 1e-10 * gamma.max_abs().max(1.0);
    let leading_term_gap = iter_k[n].max_abs_diff(&iter_k[n + 1]);
    let mut first_failing = None;
    if n >= 1 && leading_term_gap > tol {
        first_failing = Some(FailingTerm::Leading { n });
    }

    let mut literal = iter_k[n].clone();
    let mut corrected = iter_k[n + 1].clone();
    if n == 0 {
        // Γ₀ = K; the Bell form degenerates to K^{(0)}.
        corrected = k.entries().clone();
    }
    for ell in 0..n {
        let p = ell + 1;
        for kk in 0..=(n - p) {
            let bell = bell_polynomial(p, kk + p, b)?;
            let sign = if ell % 2 == 0 { -1.0 } else { 1.0 };
            let lit_block = iter_k[n - kk - p].scaled(sign * bell);
            literal = literal.add(&lit_block)?;

            let weight = composition_weight(ell, kk, &c)?;
            let mut block = Matrix::zeros(size, size);
            let rest = n - p - kk;
            for (i0, tu) in t_u0.iter().enumerate().take(rest + 1) {
                let ip = rest - i0;
                block = block.add(&Matrix::outer(tu, &phi_k[ip + 1]))?;
            }
            let block = block.scaled(powf(-alpha, p as f64) * weight);
            if first_failing.is_none() && lit_block.max_abs_diff(&block) > tol {
                first_failing = Some(FailingTerm::Block { n, ell, k: kk });
            }
            corrected = corrected.add(&block)?;
        }
    }
    Ok(GammaExpansionReport {
        n,
        literal_max_abs_error: gamma.max_abs_diff(&literal),
        corrected_max_abs_error: gamma.max_abs_diff(&corrected),
        leading_term_gap,
        first_failing,
    })
}

/// `C_{ℓ,k}`: ordered compositions of `k` into `ℓ` nonnegative parts, weighted by
/// `Π c[i_r]`. Shifting every part by one turns this into `B_{ℓ,k+ℓ}(c₀, c₁, …)`.
fn composition_weight(ell: usize, k: usize, c: &[f64]) -> Result<f64> {
    if ell == 0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    bell_polynomial(ell, k + ell, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::{extract_minorization, split, Strategy};
    use crate::measure::{MeasureSpace, QuadratureRule};
    use crate::linalg::Lu;

    fn row_min_split(k: &Kernel) -> RankOneSplit {
        let c = extract_minorization(k, &Strategy::RowMin)
            .unwrap()
            .certificate()
            .unwrap();
        split(k, &c).unwrap()
    }

    fn two_by_two() -> Kernel {
        Kernel::new(
            MeasureSpace::counting(2).unwrap(),
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap()
    }

    fn compositions(p: usize, q: usize, b: &[f64]) -> f64 {
        if p == 0 {
            return if q == 0 { 1.0 } else { 0.0 };
        }
        (1..=q).map(|i| if i <= b.len() { b[i - 1] * compositions(p - 1, q - i, b) } else { 0.0 }).sum()
    }

    #[test]
    fn bell_small_values() {
        let b = [2.0, 3.0, 5.0, 7.0];
        assert_eq!(bell_polynomial(1, 3, &b).unwrap(), 5.0);
        assert_eq!(bell_polynomial(2, 2, &b).unwrap(), 4.0);
        assert_eq!(bell_polynomial(2, 3, &b).unwrap(), 12.0);
        assert!(bell_polynomial(3, 2, &b).is_err());
        assert!(bell_polynomial(0, 2, &b).is_err());
        assert!(bell_polynomial(1, 6, &b).is_err());
    }

    #[test]
    fn bell_matches_compositions() {
        let b = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0];
        for q in 1..=8 {
            for p in 1..=q {
                assert_eq!(bell_polynomial(p, q, &b).unwrap(), compositions(p, q, &b));
            }
        }
    }

    #[test]
    fn constant_kernel_gammas_vanish() {
        let s = MeasureSpace::interval(0.0, 1.0, 10, QuadratureRule::Midpoint).unwrap();
        let seq = build_gammas(&row_min_split(&Kernel::constant(s, 1.0).unwrap()), 4).unwrap();
        assert_eq!(seq.gammas[0], seq.split.kernel);
        for g in &seq.gammas[1..] {
            assert_eq!(g.entries().max_abs(), 0.0);
        }
        let h = neumann_kernel_resolvent(&seq, 2.0, 1e-14).unwrap();
        assert_eq!(h.last_index, 0);
        assert!(h.h.max_abs_diff(&seq.split.kernel.entries().scaled(0.5)) == 0.0);
    }

    #[test]
    fn two_by_two_gammas_and_resolvent() {
        let seq = build_gammas(&row_min_split(&two_by_two()), 6).unwrap();
        // R = I on counting(2), so Γ_n = K for every n.
        for g in &seq.gammas {
            assert_eq!(g.entries(), two_by_two().entries());
        }
        assert!(seq.cross_check < 1e-15);
        let h = neumann_kernel_resolvent(&seq, 4.0, 1e-13).unwrap();
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let exact = Lu::factor(&m).unwrap().solve_matrix(two_by_two().entries()).unwrap();
        assert!(h.h.max_abs_diff(&exact) < 1e-10);
        assert!(h.geometric_tail_bound.is_infinite(), "C = 5 exceeds λ = 4");
        let r = verify_thm42_identity(&seq, 5.0, 1e-13).unwrap();
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn refuses_lambda_below_remainder_norm() {
        let seq = build_gammas(&row_min_split(&two_by_two()), 1).unwrap();
        assert!(matches!(
            neumann_kernel_resolvent(&seq, 1.0, 1e-10),
            Err(Error::NotConvergent { .. })
        ));
    }

    #[test]
    fn expansion_on_two_by_two() {
        let seq = build_gammas(&row_min_split(&two_by_two()), 4).unwrap();
        for n in 0..=4 {
            let r = verify_gamma_expansion(&seq, n).unwrap();
            assert!(r.corrected_max_abs_error < 1e-10, "n = {n}: {r:?}");
        }
        let r = verify_gamma_expansion(&seq, 3).unwrap();
        assert!(r.literal_max_abs_error > 1e-3);
        assert_eq!(r.first_failing, Some(FailingTerm::Leading { n: 3 }));
    }

    #[test]
    fn first_order_expansion_by_hand() {
        let s = MeasureSpace::interval(0.0, 1.0, 7, QuadratureRule::GaussLegendre).unwrap();
        let k = Kernel::from_fn(s, |x, y| 1.0 + x + 2.0 * y * y).unwrap();
        let sp = row_min_split(&k);
        let seq = build_gammas(&sp, 1).unwrap();
        // Γ₁ = K∘K − α u₀ ⊗ Φ_ξ K.
        let kk = k.compose(&k).unwrap();
        let direct = kk.entries().sub(&p_compose(&sp, k.entries())).unwrap();
        assert!(seq.gammas[1].entries().max_abs_diff(&direct) < 1e-12);
        let r = verify_gamma_expansion(&seq, 1).unwrap();
        assert!(r.corrected_max_abs_error < 1e-12);
        assert!(matches!(r.first_failing, Some(FailingTerm::Leading { n: 1 })));
        assert!(verify_gamma_expansion(&seq, 2).is_err());
    }

    #[test]
    fn gamma_table_tracks_dense_solve() {
        let s = MeasureSpace::interval(0.0, 1.0, 20, QuadratureRule::Midpoint).unwrap();
        let k = Kernel::gaussian(s, 0.4).unwrap();
        let seq = build_gammas(&row_min_split(&k), 12).unwrap();
        let lambda = 2.0 * k.norm();
        let rows = gamma_table(&seq, lambda).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].partial_sum_error <= pair[0].partial_sum_error);
        }
        for r in &rows {
            assert!(r.gamma_norm <= r.bound);
        }
    }
}
