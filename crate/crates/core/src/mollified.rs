//! Kernel-space recursion with a mollified evaluation functional,
//!
//! ```text
//! Γ₀ = K,   Γ_{n+1}(x,y) = ∫ K(x,ξ) Γ_n(ξ,y) dμ(ξ) − K(x,y) Φ_{ε,δ}[Γ_n],
//! ```
//!
//! and its point-evaluation limit where `Φ_{ε,δ}[Γ_n]` becomes `Γ_n(x₀,y₀)`.
//!
//! Kernels in this module are plain matrices: the iterates change sign.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_len, Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::math::{abs, powf};
use crate::measure::{GridFunction, MeasureSpace};

/// Normalized indicator of `[center − ε, center + ε]` intersected with the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub center: f64,
    pub epsilon: f64,
}

impl Mollifier {
    pub fn new(center: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "mollifier needs a finite center and positive width (got {center}, {epsilon})"
            )));
        }
        Ok(Mollifier { center, epsilon })
    }

    /// Node indices inside the ball. Nodes within rounding of the boundary
    /// count as inside, so a box centered on a node is symmetric.
    pub fn support(&self, space: &MeasureSpace) -> Vec<usize> {
        let reach = self.epsilon + 1e-12 * self.epsilon.max(abs(self.center));
        space
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, x)| abs(**x - self.center) <= reach)
            .map(|(i, _)| i)
            .collect()
    }

    /// Density with `Σ ψ_i w_i = 1`.
    pub fn density(&self, space: &MeasureSpace) -> Result<GridFunction> {
        let support = self.support(space);
        if support.is_empty() {
            return Err(Error::EmptySupport {
                center: self.center,
                epsilon: self.epsilon,
            });
        }
        let mass: f64 = support.iter().map(|&i| space.weights()[i]).sum();
        let mut psi = vec![0.0; space.len()];
        for i in support {
            psi[i] = 1.0 / mass;
        }
        Ok(GridFunction::new(psi))
    }
}

/// `‖F‖_𝓔 = max_y ‖F(·, y)‖_{L^p(μ)}`; `p = ∞` gives the entrywise maximum.
pub fn kernel_space_norm(space: &MeasureSpace, f: &Matrix, p: f64) -> Result<f64> {
    ensure_len(space.len(), f.rows())?;
    ensure_len(space.len(), f.cols())?;
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("p must be at least 1 (got {p})")));
    }
    let w = space.weights();
    let mut best: f64 = 0.0;
    for y in 0..f.cols() {
        let s: f64 = (0..f.rows()).map(|x| powf(abs(f.get(x, y)), p) * w[x]).sum();
        best = best.max(powf(s, 1.0 / p));
    }
    Ok(best)
}

/// `‖ψ‖_{L^{p'}(μ)}` with `1/p + 1/p' = 1`: the Hölder bound on `|Φ_{ε,δ}[F]| / ‖F‖_𝓔`.
pub fn functional_bound(space: &MeasureSpace, psi: &[f64], p: f64) -> Result<f64> {
    ensure_len(space.len(), psi.len())?;
    let w = space.weights();
    if p == 1.0 {
        return Ok(psi.iter().fold(0.0, |m, v| m.max(abs(*v))));
    }
    if p.is_infinite() {
        return Ok(psi.iter().zip(w).map(|(v, w)| abs(*v) * w).sum());
    }
    let q = p / (p - 1.0);
    let s: f64 = psi.iter().zip(w).map(|(v, w)| powf(abs(*v), q) * w).sum();
    Ok(powf(s, 1.0 / q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedKernelState {
    pub gamma: Matrix,
    /// `‖Γ‖_𝓔` for the exponent the run was made with.
    pub norm: f64,
}

/// `Φ_{ε,δ}[F] = Σ_x Σ_y F(x,y) ψ(x) η(y) w_x w_y`.
pub fn mollified_functional(space: &MeasureSpace, f: &Matrix, psi: &Mollifier, eta: &Mollifier) -> Result<f64> {
    let a = psi.density(space)?;
    let b = eta.density(space)?;
    Ok(functional_from_densities(space, f, &a, &b))
}

fn functional_from_densities(space: &MeasureSpace, f: &Matrix, psi: &[f64], eta: &[f64]) -> f64 {
    let w = space.weights();
    let mut total = 0.0;
    for x in 0..f.rows() {
        let px = psi[x] * w[x];
        if px == 0.0 {
            continue;
        }
        let row: f64 = f
            .row(x)
            .iter()
            .zip(eta)
            .zip(w)
            .map(|((v, e), w)| v * e * w)
            .sum();
        total += px * row;
    }
    total
}

/// Direction of the subtracted rank-one term.
#[derive(Debug, Clone, PartialEq)]
pub enum SubtractionDirection {
    /// `K(x,y) Φ_{ε,δ}[Γ_n]`.
    Kernel,
    /// `α u₀(x) Φ_{ε,δ}[Γ_n]`, constant in `y`.
    Minorant { alpha: f64, u0: GridFunction },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedRun {
    pub states: Vec<LiftedKernelState>,
    /// `Φ_{ε,δ}[Γ_n]` for `n < m`.
    pub coefficients: Vec<f64>,
    /// Largest gap between the kernel display and the operator form `(𝒯 − 𝒫)Γ`.
    pub form_discrepancy: f64,
}

pub fn mollified_recursion(
    k: &Kernel,
    psi: &Mollifier,
    eta: &Mollifier,
    m: usize,
    p: f64,
    direction: &SubtractionDirection,
) -> Result<MollifiedRun> {
    let space = k.space();
    let n = k.len();
    let dens_x = psi.density(space)?;
    let dens_y = eta.density(space)?;
    let dir = match direction {
        SubtractionDirection::Kernel => k.entries().clone(),
        SubtractionDirection::Minorant { alpha, u0 } => {
            ensure_len(n, u0.len())?;
            Matrix::from_fn(n, n, |i, _| alpha * u0[i])
        }
    };
    let w = k.weights();
    let mut gamma = k.entries().clone();
    let mut states = vec![LiftedKernelState {
        norm: kernel_space_norm(space, &gamma, p)?,
        gamma: gamma.clone(),
    }];
    let mut coefficients = Vec::with_capacity(m);
    let mut form_discrepancy: f64 = 0.0;
    for _ in 0..m {
        let c = functional_from_densities(space, &gamma, &dens_x, &dens_y);
        let display = k.entries().compose_weighted(w, &gamma)?.add_scaled(-c, &dir)?;

        // Operator form: 𝒯 acts column by column; Φ pairs ψ first, then η.
        let mut lifted = Matrix::zeros(n, n);
        let mut phi = 0.0;
        for y in 0..n {
            let col = gamma.column(y);
            let tcol = k.apply(&col)?;
            for x in 0..n {
                lifted.set(x, y, tcol[x]);
            }
            let inner: f64 = col.iter().zip(dens_x.iter()).zip(w).map(|((f, s), w)| f * s * w).sum();
            phi += inner * dens_y[y] * w[y];
        }
        let operator = lifted.add_scaled(-phi, &dir)?;
        let scale = display.max_abs().max(1.0);
        form_discrepancy = form_discrepancy.max(display.max_abs_diff(&operator) / scale);

        coefficients.push(c);
        gamma = display;
        states.push(LiftedKernelState {
            norm: kernel_space_norm(space, &gamma, p)?,
            gamma: gamma.clone(),
        });
    }
    Ok(MollifiedRun {
        states,
        coefficients,
        form_discrepancy,
    })
}

/// `Γ_{n+1} = K∘Γ_n − K Γ_n(x₀, y₀)` at grid indices, returning `[Γ₀, …, Γ_m]`.
pub fn point_recursion(k: &Kernel, x0_index: usize, y0_index: usize, m: usize) -> Result<Vec<Matrix>> {
    let n = k.len();
    for idx in [x0_index, y0_index] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    let w = k.weights();
    let mut out = vec![k.entries().clone()];
    for i in 0..m {
        let prev = &out[i];
        let c = prev.get(x0_index, y0_index);
        let next = k.entries().compose_weighted(w, prev)?.add_scaled(-c, k.entries())?;
        out.push(next);
    }
    Ok(out)
}

/// Rounding allowance per step, in units of machine epsilon times the size of
/// the cancelled terms.
const NOISE_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub eps: f64,
    pub n: usize,
    /// `‖Γ_n^{ε,ε} − Γ_n‖_𝓔` with the sup norm.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySummary {
    pub eps: f64,
    /// `max_n` of the per-step errors.
    pub max_error: f64,
    /// `G(ε)` such that the error is at most `ε G(ε)` to first order.
    pub gradient_bound: f64,
    /// `ε G(ε)`.
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub x0_index: usize,
    pub y0_index: usize,
    pub rows: Vec<StudyRow>,
    pub summary: Vec<StudySummary>,
    /// Rounding level of the compared kernels; smaller errors are
    /// indistinguishable from zero.
    pub noise_floor: f64,
}

impl ConvergenceStudy {
    pub fn errors(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.max_error).collect()
    }

    /// Non-increasing once errors below the noise floor are read as zero.
    pub fn is_non_increasing(&self) -> bool {
        self.summary
            .windows(2)
            .all(|p| p[1].max_error <= p[0].max_error.max(self.noise_floor))
    }
}

/// Compares the mollified recursion (`ε = δ`, boxes centered on the grid nodes
/// nearest to `x₀`, `y₀`) with the point recursion for each `ε`, in the sup
/// norm on 𝓔.
///
/// Both recursions stay in the span of the iterated kernels,
/// `Γ_n = Σ_j a_{n,j} K^{(j)}`, so the iterated kernels are formed once and
/// each `ε` only updates coefficient vectors.
///
/// The bound comes from `Δ_{n+1} = 𝒯Δ_n − K Φ[Δ_n] − K (Φ[Γ_n] − Γ_n(x₀,y₀))`
/// together with `|Φ[Γ_n] − Γ_n(x₀,y₀)| ≤ ε L_n(ε)`, where `L_n(ε)` is the
/// largest difference quotient of `Γ_n` against the center over the box.
pub fn convergence_study(k: &Kernel, x0: f64, y0: f64, eps_sequence: &[f64], m: usize) -> Result<ConvergenceStudy> {
    let space = k.space();
    let n = k.len();
    let xi = space.nearest_node(x0);
    let yi = space.nearest_node(y0);
    let (cx, cy) = (space.nodes()[xi], space.nodes()[yi]);
    for &eps in eps_sequence {
        let caught = [cx, cy].map(|c| Mollifier::new(c, eps).map(|m| m.support(space).len()));
        for c in caught {
            if c? < 2 {
                return Err(Error::GridTooCoarse { epsilon: eps, nodes: n });
            }
        }
    }

    let w = k.weights();
    // iter[j] = K^{(j+1)}.
    let mut iter = vec![k.entries().clone()];
    for j in 1..=m {
        let next = k.entries().compose_weighted(w, &iter[j - 1])?;
        iter.push(next);
    }

    // Point recursion coefficients: a_{n+1} = shift(a_n) − c_n e₁.
    let point_values: Vec<f64> = iter.iter().map(|kj| kj.get(xi, yi)).collect();
    let point = coefficient_recursion(m, &point_values);
    let gammas: Vec<Matrix> = point.iter().map(|a| combine(&iter, a, n)).collect();
    // Rounding scale of each combination is the size of the terms it cancels.
    let basis_size: Vec<f64> = iter.iter().map(Matrix::max_abs).collect();
    let cancelled = point
        .iter()
        .map(|a| a.iter().zip(&basis_size).map(|(a, b)| abs(*a) * b).sum::<f64>())
        .fold(0.0, f64::max);
    let noise_floor = NOISE_ULPS * f64::EPSILON * (m + 1) as f64 * cancelled;

    let k_norm = k.entries().max_abs();
    let s = k.norm() + k_norm;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &eps in eps_sequence {
        let psi = Mollifier::new(cx, eps)?.density(space)?;
        let eta = Mollifier::new(cy, eps)?.density(space)?;
        let phis: Vec<f64> = iter
            .iter()
            .map(|kj| functional_from_densities(space, kj, &psi, &eta))
            .collect();
        let moll = coefficient_recursion(m, &phis);
        let mut max_error: f64 = 0.0;
        for (idx, (a, b)) in moll.iter().zip(&point).enumerate() {
            let diff: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
            let error = combine(&iter, &diff, n).max_abs();
            max_error = max_error.max(error);
            rows.push(StudyRow { eps, n: idx, error });
        }

        let bx = Mollifier::new(cx, eps)?.support(space);
        let by = Mollifier::new(cy, eps)?.support(space);
        let lip: Vec<f64> = gammas
            .iter()
            .map(|g| local_difference_quotient(space, g, xi, yi, &bx, &by))
            .collect();
        let mut gradient_bound: f64 = 0.0;
        for step in 1..=m {
            let acc: f64 = (0..step)
                .map(|j| powf(s, (step - 1 - j) as f64) * k_norm * lip[j])
                .sum();
            gradient_bound = gradient_bound.max(acc);
        }
        summary.push(StudySummary {
            eps,
            max_error,
            gradient_bound,
            prediction: eps * gradient_bound,
        });
    }
    Ok(ConvergenceStudy {
        x0_index: xi,
        y0_index: yi,
        rows,
        summary,
        noise_floor,
    })
}

/// Coefficients of `Γ_0..=Γ_m` in the basis `K^{(1)}, …, K^{(m+1)}`, given the
/// evaluation `values[j]` of `K^{(j+1)}`.
fn coefficient_recursion(m: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut a = vec![0.0; m + 1];
    a[0] = 1.0;
    let mut out = vec![a.clone()];
    for _ in 0..m {
        let c: f64 = a.iter().zip(values).map(|(a, v)| a * v).sum();
        let mut next = vec![0.0; m + 1];
        next[1..].copy_from_slice(&a[..m]);
        next[0] -= c;
        a = next;
        out.push(a.clone());
    }
    out
}

fn combine(basis: &[Matrix], coeffs: &[f64], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, n);
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            out = out.add_scaled(c, b).expect("same shape");
        }
    }
    out
}

fn local_difference_quotient(space: &MeasureSpace, g: &Matrix, xi: usize, yi: usize, bx: &[usize], by: &[usize]) -> f64 {
    let x = space.nodes();
    let center = g.get(xi, yi);
    let mut best: f64 = 0.0;
    for &i in bx {
        for &j in by {
            let dist = abs(x[i] - x[xi]).max(abs(x[j] - x[yi]));
            if dist > 0.0 {
                best = best.max(abs(g.get(i, j) - center) / dist);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::QuadratureRule;

    fn unit(n: usize) -> MeasureSpace {
        MeasureSpace::interval(0.0, 1.0, n, QuadratureRule::Midpoint).unwrap()
    }

    fn counting(rows: &[Vec<f64>]) -> Kernel {
        Kernel::new(
            MeasureSpace::counting(rows.len()).unwrap(),
            Matrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mollifier_normalization() {
        let s = unit(100);
        let m = Mollifier::new(0.02, 0.05).unwrap();
        let d = m.density(&s).unwrap();
        let mass: f64 = d.iter().zip(s.weights()).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for (i, x) in s.nodes().iter().enumerate() {
            if d[i] > 0.0 {
                assert!((x - 0.02).abs() <= 0.05);
            }
        }
        assert!(matches!(
            Mollifier::new(5.0, 0.1).unwrap().density(&s),
            Err(Error::EmptySupport { .. })
        ));
    }

    #[test]
    fn node_centered_boxes_are_symmetric() {
        let s = unit(200);
        for (c, eps) in [(59usize, 0.025), (59, 0.05), (120, 0.1), (7, 0.035)] {
            let support = Mollifier::new(s.nodes()[c], eps).unwrap().support(&s);
            let below = support.iter().filter(|&&i| i < c).count();
            let above = support.iter().filter(|&&i| i > c).count();
            assert_eq!(below, above, "center {c}, eps {eps}");
        }
    }

    #[test]
    fn functional_examples() {
        let s = unit(400);
        let c = Matrix::from_fn(400, 400, |_, _| 3.0);
        let a = Mollifier::new(0.5, 0.1).unwrap();
        assert!((mollified_functional(&s, &c, &a, &a).unwrap() - 3.0).abs() < 1e-12);

        let x = s.nodes().to_vec();
        let lin = Matrix::from_fn(400, 400, |i, _| x[i]);
        for eps in [0.2, 0.05, 0.01] {
            let m = Mollifier::new(0.5, eps).unwrap();
            let v = mollified_functional(&s, &lin, &m, &m).unwrap();
            assert!((v - 0.5).abs() <= eps);
        }

        let g = Kernel::gaussian(s.clone(), 0.2).unwrap();
        let (x0, y0) = (0.3, 0.6);
        let exact = libm::exp(-0.09 / 0.08);
        let e1 = (mollified_functional(&s, g.entries(), &Mollifier::new(x0, 0.1).unwrap(), &Mollifier::new(y0, 0.1).unwrap()).unwrap() - exact).abs();
        let e2 = (mollified_functional(&s, g.entries(), &Mollifier::new(x0, 0.05).unwrap(), &Mollifier::new(y0, 0.05).unwrap()).unwrap() - exact).abs();
        assert!(e2 < e1);
    }

    #[test]
    fn functional_bounds() {
        let s = unit(60);
        let f = Matrix::from_fn(60, 60, |i, j| libm::sin(i as f64 * 0.3 + j as f64 * 0.11));
        let psi = Mollifier::new(0.4, 0.1).unwrap();
        let eta = Mollifier::new(0.7, 0.2).unwrap();
        let v = mollified_functional(&s, &f, &psi, &eta).unwrap().abs();
        assert!(v <= kernel_space_norm(&s, &f, f64::INFINITY).unwrap());
        let dens = psi.density(&s).unwrap();
        for p in [1.0, 2.0, 3.5] {
            let bound = functional_bound(&s, &dens, p).unwrap() * kernel_space_norm(&s, &f, p).unwrap();
            assert!(v <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constant_kernel_step_vanishes() {
        let k = Kernel::constant(unit(50), 1.0).unwrap();
        let m = Mollifier::new(0.3, 0.1).unwrap();
        let run = mollified_recursion(&k, &m, &m, 3, 2.0, &SubtractionDirection::Kernel).unwrap();
        assert!(run.states[1].gamma.max_abs() < 1e-14);
        assert!(run.form_discrepancy < 1e-12);
        let pts = point_recursion(&k, 10, 20, 2).unwrap();
        assert!(pts[1].max_abs() < 1e-14);
    }

    #[test]
    fn point_recursion_examples() {
        let p = counting(&[vec![0.0, 1.0], vec![0.5, 0.5]]);
        let g = point_recursion(&p, 0, 0, 1).unwrap();
        assert_eq!(g[1].to_rows(), vec![vec![0.5, 0.5], vec![0.25, 0.75]]);

        let k = counting(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let g = point_recursion(&k, 0, 0, 1).unwrap();
        assert_eq!(g[1].to_rows(), vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            point_recursion(&k, 2, 0, 1),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn range_of_subtraction_is_span_of_k() {
        let s = unit(30);
        let k = Kernel::from_fn(s, |x, y| 1.0 + x + y * y).unwrap();
        let m = Mollifier::new(0.5, 0.2).unwrap();
        let run = mollified_recursion(&k, &m, &m, 2, f64::INFINITY, &SubtractionDirection::Kernel).unwrap();
        let w = k.weights();
        for n in 0..2 {
            let tg = k.entries().compose_weighted(w, &run.states[n].gamma).unwrap();
            let sub = tg.sub(&run.states[n + 1].gamma).unwrap();
            let c = run.coefficients[n];
            assert!(sub.max_abs_diff(&k.entries().scaled(c)) < 1e-12);
        }
    }

    #[test]
    fn minorant_direction_is_constant_in_y() {
        let s = unit(20);
        let k = Kernel::from_fn(s, |x, y| 2.0 + x * y).unwrap();
        let m = Mollifier::new(0.5, 0.3).unwrap();
        let dir = SubtractionDirection::Minorant {
            alpha: 1.0,
            u0: GridFunction::constant(20, 2.0),
        };
        let run = mollified_recursion(&k, &m, &m, 1, 2.0, &dir).unwrap();
        let tg = k.entries().compose_weighted(k.weights(), k.entries()).unwrap();
        let diff = tg.sub(&run.states[1].gamma).unwrap();
        let c = diff.get(0, 0);
        assert!(diff.as_slice().iter().all(|v| (v - c).abs() < 1e-13));
        assert!((c - 2.0 * run.coefficients[0]).abs() < 1e-13);
    }

    #[test]
    fn study_matches_direct_recursions() {
        let s = unit(120);
        let k = Kernel::gaussian(s.clone(), 0.2).unwrap();
        let eps = [0.2, 0.1];
        let study = convergence_study(&k, 0.3, 0.6, &eps, 3).unwrap();
        let pts = point_recursion(&k, study.x0_index, study.y0_index, 3).unwrap();
        let cx = s.nodes()[study.x0_index];
        let cy = s.nodes()[study.y0_index];
        for (e_idx, &e) in eps.iter().enumerate() {
            let run = mollified_recursion(
                &k,
                &Mollifier::new(cx, e).unwrap(),
                &Mollifier::new(cy, e).unwrap(),
                3,
                f64::INFINITY,
                &SubtractionDirection::Kernel,
            )
            .unwrap();
            for (n, point) in pts.iter().enumerate().take(4) {
                let direct = run.states[n].gamma.max_abs_diff(point);
                let row = study.rows[e_idx * 4 + n];
                assert_eq!(row.n, n);
                assert!((row.error - direct).abs() < 1e-12, "{row:?} vs {direct}");
            }
        }
    }

    #[test]
    fn study_rejects_coarse_grid() {
        let k = Kernel::gaussian(unit(10), 0.2).unwrap();
        assert!(matches!(
            convergence_study(&k, 0.3, 0.6, &[0.2, 0.01], 2),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
