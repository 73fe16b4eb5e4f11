//! Rank-one inversion, the remainder resolvent `R_λ = (λI − R)⁻¹`, the
//! Birman–Schwinger function
//!
//! ```text
//! D(λ) = 1 − α Φ[R_λ u₀],        D′(λ) = α Φ[R_λ² u₀],
//! ```
//!
//! and the factorized resolvent
//! `(λI − T)⁻¹ f = R_λ f + α (R_λ u₀) Φ[R_λ f] / D(λ)`.

use alloc::vec::Vec;

use crate::doeblin::RankOneSplit;
use crate::error::{ensure_len, Error, Result};
use crate::kernel::robust_spectral_radius;
use crate::linalg::{Lu, Matrix};
use crate::math::{abs, sup_norm};
use crate::measure::{GridFunction, MeasureSpace, WeightFunctional};

/// Threshold on `|1 − b[a]|`, `|λ − b[a]|` and `|D(λ)|` below which the
/// rank-one formulas are treated as singular.
pub const NEAR_POLE: f64 = 1e-12;
/// Condition-number ceiling for the direct backend.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative inflation applied to the power-iteration estimate of `ρ(R)`.
pub const RHO_MARGIN: f64 = 1e-8;
/// Tolerance of the power iteration behind the `ρ(R)` estimate.
pub const RHO_TOL: f64 = 1e-10;

/// `f ↦ a · b[f]` on a fixed measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneOperator {
    space: MeasureSpace,
    a: GridFunction,
    b: WeightFunctional,
}

impl RankOneOperator {
    pub fn new(space: MeasureSpace, a: GridFunction, b: WeightFunctional) -> Result<Self> {
        ensure_len(space.len(), a.len())?;
        ensure_len(space.len(), b.len())?;
        Ok(RankOneOperator { space, a, b })
    }

    pub fn a(&self) -> &GridFunction {
        &self.a
    }

    pub fn b(&self) -> &WeightFunctional {
        &self.b
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    /// `b[f] = Σ b_i f_i w_i`.
    pub fn functional(&self, f: &[f64]) -> Result<f64> {
        self.space.pair(&self.b, f)
    }

    /// `b[a]`.
    pub fn coupling(&self) -> f64 {
        self.space.pair(&self.b, &self.a).expect("validated lengths")
    }

    pub fn apply(&self, f: &[f64]) -> Result<GridFunction> {
        let bf = self.functional(f)?;
        Ok(self.a.scaled(bf))
    }

    /// Node-coordinate matrix `a (b∘w)ᵀ`.
    pub fn matrix(&self) -> Matrix {
        let bw: Vec<f64> = self
            .b
            .density()
            .iter()
            .zip(self.space.weights())
            .map(|(b, w)| b * w)
            .collect();
        Matrix::outer(&self.a, &bw)
    }
}

/// `(I − a⊗b)⁻¹ f = f + a b[f] / (1 − b[a])`.
pub fn sherman_morrison_inverse_apply(s: &RankOneOperator, f: &[f64]) -> Result<GridFunction> {
    let denom = 1.0 - s.coupling();
    if abs(denom) <= NEAR_POLE {
        return Err(Error::NearSingular { denominator: denom });
    }
    let c = s.functional(f)? / denom;
    Ok(GridFunction::new(
        f.iter().zip(s.a.iter()).map(|(f, a)| f + a * c).collect(),
    ))
}

/// `(λI − a⊗b)⁻¹ f = f/λ + a b[f] / (λ(λ − b[a]))`.
pub fn rank_one_resolvent_apply(s: &RankOneOperator, lambda: f64, f: &[f64]) -> Result<GridFunction> {
    let c = s.coupling();
    if abs(lambda) <= NEAR_POLE {
        return Err(Error::PoleAt(0.0));
    }
    if abs(lambda - c) <= NEAR_POLE {
        return Err(Error::PoleAt(c));
    }
    let k = s.functional(f)? / (lambda * (lambda - c));
    Ok(GridFunction::new(
        f.iter()
            .zip(s.a.iter())
            .map(|(f, a)| f / lambda + a * k)
            .collect(),
    ))
}

/// Residue of `λ ↦ (λI − a⊗b)⁻¹ f` at `λ = b[a]`, namely `a b[f] / b[a]`.
pub fn rank_one_residue(s: &RankOneOperator, f: &[f64]) -> Result<GridFunction> {
    let c = s.coupling();
    if abs(c) <= NEAR_POLE {
        return Err(Error::PoleAt(0.0));
    }
    Ok(s.apply(f)?.scaled(1.0 / c))
}

/// `det(I − a⊗b) = 1 − b[a]`.
pub fn fredholm_det_rank_one(s: &RankOneOperator) -> f64 {
    1.0 - s.coupling()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SolverMode {
    #[default]
    DirectLu,
    Neumann { series_tol: f64, max_terms: usize },
}

#[derive(Debug, Clone)]
pub struct BirmanSchwingerEvaluator {
    split: RankOneSplit,
    solver: SolverMode,
    r_op: Matrix,
    t_op: Matrix,
    rho_r_raw: f64,
    rho_r_estimate: f64,
    r_norm: f64,
    t_norm: f64,
    /// `g ∘ w`, so that `Φ[f] = phi_row · f`.
    phi_row: Vec<f64>,
}

impl BirmanSchwingerEvaluator {
    pub fn new(split: RankOneSplit, solver: SolverMode) -> Result<Self> {
        if let SolverMode::Neumann { series_tol, max_terms } = solver {
            if !(series_tol > 0.0) || max_terms == 0 {
                return Err(Error::InvalidArgument(
                    "Neumann mode needs a positive tolerance and at least one term".into(),
                ));
            }
        }
        let r_op = split.remainder.operator_matrix();
        let t_op = split.kernel.operator_matrix();
        let rho_r_raw = robust_spectral_radius(&r_op, RHO_TOL)?.rho;
        let phi_row = split
            .g()
            .density()
            .iter()
            .zip(split.kernel.weights())
            .map(|(g, w)| g * w)
            .collect();
        Ok(BirmanSchwingerEvaluator {
            rho_r_estimate: rho_r_raw * (1.0 + RHO_MARGIN),
            rho_r_raw,
            r_norm: split.remainder.norm(),
            t_norm: split.kernel.norm(),
            r_op,
            t_op,
            phi_row,
            solver,
            split,
        })
    }

    pub fn split(&self) -> &RankOneSplit {
        &self.split
    }

    pub fn solver(&self) -> SolverMode {
        self.solver
    }

    /// Inflated estimate `ρ̂ ≥ ρ(R)` used as the lower end of the admissible range.
    pub fn rho_r_estimate(&self) -> f64 {
        self.rho_r_estimate
    }

    /// Power-iteration value before inflation.
    pub fn rho_r_raw(&self) -> f64 {
        self.rho_r_raw
    }

    pub fn r_norm(&self) -> f64 {
        self.r_norm
    }

    pub fn t_norm(&self) -> f64 {
        self.t_norm
    }

    /// `R diag(w)`, the remainder acting on node values.
    pub fn r_operator(&self) -> &Matrix {
        &self.r_op
    }

    /// `K diag(w)`, the full operator acting on node values.
    pub fn t_operator(&self) -> &Matrix {
        &self.t_op
    }

    pub fn phi_row(&self) -> &[f64] {
        &self.phi_row
    }

    pub fn phi(&self, f: &[f64]) -> f64 {
        self.phi_row.iter().zip(f).map(|(a, b)| a * b).sum()
    }

    pub fn len(&self) -> usize {
        self.phi_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_row.is_empty()
    }

    /// Prepares every quantity at a fixed `λ` (factorization, `R_λ u₀`, `D`).
    pub fn at(&self, lambda: f64) -> Result<ResolventAt<'_>> {
        if !(lambda > self.rho_r_estimate) {
            return Err(Error::BelowSpectralRadius {
                lambda,
                rho: self.rho_r_estimate,
            });
        }
        let lu = match self.solver {
            SolverMode::DirectLu => {
                let n = self.len();
                let mut m = self.r_op.scaled(-1.0);
                for i in 0..n {
                    m.set(i, i, m.get(i, i) + lambda);
                }
                let lu = Lu::factor(&m)?;
                let estimate = lu.condition_estimate();
                if !(estimate < MAX_CONDITION) {
                    return Err(Error::IllConditioned { estimate });
                }
                Some(lu)
            }
            SolverMode::Neumann { .. } => {
                if !(lambda > self.r_norm) {
                    return Err(Error::NotConvergent {
                        lambda,
                        norm: self.r_norm,
                    });
                }
                None
            }
        };
        let mut at = ResolventAt {
            ev: self,
            lambda,
            lu,
            u0_image: Vec::new(),
            d: 0.0,
        };
        at.u0_image = at.resolve_r_raw(self.split.u0())?;
        at.d = 1.0 - self.split.alpha() * self.phi(&at.u0_image);
        Ok(at)
    }

    pub fn resolve_r(&self, lambda: f64, v: &[f64]) -> Result<GridFunction> {
        self.at(lambda)?.resolve_r(v)
    }

    #[allow(non_snake_case)]
    pub fn D(&self, lambda: f64) -> Result<f64> {
        Ok(self.at(lambda)?.d())
    }

    #[allow(non_snake_case)]
    pub fn D_prime(&self, lambda: f64) -> Result<f64> {
        self.at(lambda)?.d_prime()
    }

    pub fn resolve_t(&self, lambda: f64, f: &[f64]) -> Result<GridFunction> {
        self.at(lambda)?.resolve_t(f)
    }
}

/// Evaluator frozen at one `λ > ρ̂`.
#[derive(Debug, Clone)]
pub struct ResolventAt<'a> {
    ev: &'a BirmanSchwingerEvaluator,
    lambda: f64,
    lu: Option<Lu>,
    u0_image: Vec<f64>,
    d: f64,
}

impl ResolventAt<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn neumann(&self, op: impl Fn(&[f64]) -> Vec<f64>, v: &[f64], tol: f64, max_terms: usize) -> Result<Vec<f64>> {
        let inv = 1.0 / self.lambda;
        let mut term: Vec<f64> = v.iter().map(|x| x * inv).collect();
        let mut sum = term.clone();
        let mut prev_norm = sup_norm(&term);
        for _ in 1..max_terms {
            if prev_norm == 0.0 {
                return Ok(sum);
            }
            term = op(&term).into_iter().map(|x| x * inv).collect();
            let norm = sup_norm(&term);
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            // Once the terms contract, the tail is bounded by a geometric series.
            let q = norm / prev_norm;
            if q < 1.0 && norm * q / (1.0 - q) <= tol * sup_norm(&sum) {
                return Ok(sum);
            }
            prev_norm = norm;
        }
        Err(Error::NonConvergence {
            iterations: max_terms,
            last_change: prev_norm,
        })
    }

    fn resolve_r_raw(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.ev.len(), v.len())?;
        match (&self.lu, self.ev.solver) {
            (Some(lu), _) => lu.solve(v),
            (None, SolverMode::Neumann { series_tol, max_terms }) => self.neumann(
                |x| self.ev.r_op.matvec(x).expect("square"),
                v,
                series_tol,
                max_terms,
            ),
            (None, SolverMode::DirectLu) => unreachable!("direct mode always factors"),
        }
    }

    /// `x = (λI − R)⁻¹ v`.
    pub fn resolve_r(&self, v: &[f64]) -> Result<GridFunction> {
        self.resolve_r_raw(v).map(GridFunction::new)
    }

    /// `y = (λI − R)⁻ᵀ v` in node coordinates.
    pub fn resolve_r_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.ev.len(), v.len())?;
        match (&self.lu, self.ev.solver) {
            (Some(lu), _) => lu.solve_transpose(v),
            (None, SolverMode::Neumann { series_tol, max_terms }) => self.neumann(
                |x| self.ev.r_op.vecmat(x).expect("square"),
                v,
                series_tol,
                max_terms,
            ),
            (None, SolverMode::DirectLu) => unreachable!("direct mode always factors"),
        }
    }

    /// `R_λ u₀`.
    pub fn u0_image(&self) -> &[f64] {
        &self.u0_image
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn d_prime(&self) -> Result<f64> {
        let x = self.resolve_r_raw(&self.u0_image)?;
        Ok(self.ev.split.alpha() * self.ev.phi(&x))
    }

    pub fn resolve_t(&self, f: &[f64]) -> Result<GridFunction> {
        if abs(self.d) <= NEAR_POLE {
            return Err(Error::AtEigenvalue {
                lambda: self.lambda,
                d: self.d,
            });
        }
        let x = self.resolve_r_raw(f)?;
        let c = self.ev.split.alpha() * self.ev.phi(&x) / self.d;
        Ok(GridFunction::new(
            x.iter().zip(&self.u0_image).map(|(x, y)| x + c * y).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doeblin::{extract_minorization, split, Strategy};
    use crate::kernel::Kernel;
    use crate::measure::QuadratureRule;
    use alloc::vec;

    fn evaluator(k: &Kernel, mode: SolverMode) -> BirmanSchwingerEvaluator {
        let c = extract_minorization(k, &Strategy::RowMin)
            .unwrap()
            .certificate()
            .unwrap();
        BirmanSchwingerEvaluator::new(split(k, &c).unwrap(), mode).unwrap()
    }

    fn unit(n: usize) -> MeasureSpace {
        MeasureSpace::interval(0.0, 1.0, n, QuadratureRule::Midpoint).unwrap()
    }

    fn two_by_two() -> Kernel {
        Kernel::new(
            MeasureSpace::counting(2).unwrap(),
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sherman_morrison_examples() {
        let s = MeasureSpace::counting(2).unwrap();
        let op = RankOneOperator::new(
            s.clone(),
            GridFunction::new(vec![1.0, -1.0]),
            WeightFunctional::new(vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(op.coupling(), 0.0);
        let out = sherman_morrison_inverse_apply(&op, &[3.0, 1.0]).unwrap();
        assert_eq!(out.values(), &[7.0, -3.0]);

        let zero = RankOneOperator::new(
            s.clone(),
            GridFunction::new(vec![0.0, 0.0]),
            WeightFunctional::new(vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(sherman_morrison_inverse_apply(&zero, &[3.0, 1.0]).unwrap().values(), &[3.0, 1.0]);
        assert_eq!(fredholm_det_rank_one(&zero), 1.0);

        let proj = RankOneOperator::new(
            s,
            GridFunction::new(vec![1.0, 1.0]),
            WeightFunctional::new(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(fredholm_det_rank_one(&proj), 0.0);
        assert!(matches!(
            sherman_morrison_inverse_apply(&proj, &[1.0, 0.0]),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn rank_one_resolvent_pole_and_residue() {
        let s = unit(10);
        let a = GridFunction::from_fn(&s, |x| 1.0 + x);
        let raw: Vec<f64> = s.nodes().iter().map(|x| 2.0 - x).collect();
        let c0 = s.pair(&WeightFunctional::new(raw.clone()).unwrap(), &a).unwrap();
        let b = WeightFunctional::new(raw.iter().map(|v| v / c0).collect()).unwrap();
        let op = RankOneOperator::new(s.clone(), a, b).unwrap();
        assert!((op.coupling() - 1.0).abs() < 1e-14);
        let f = GridFunction::from_fn(&s, |x| libm::cos(4.0 * x));
        let res = rank_one_residue(&op, &f).unwrap();
        let pf = op.apply(&f).unwrap();
        for (r, p) in res.iter().zip(pf.iter()) {
            assert!((r - p).abs() < 1e-13);
        }
        let c = op.coupling();
        let h = 1e-7;
        let near = rank_one_resolvent_apply(&op, c + h, &f).unwrap();
        for (n, r) in near.iter().zip(res.iter()) {
            assert!((n * h - r).abs() < 1e-6);
        }
        assert!(matches!(rank_one_resolvent_apply(&op, 0.0, &f), Err(Error::PoleAt(p)) if p == 0.0));
        assert!(matches!(rank_one_resolvent_apply(&op, c, &f), Err(Error::PoleAt(_))));
        let big = rank_one_resolvent_apply(&op, 1e8, &f).unwrap();
        for (b, f) in big.iter().zip(f.iter()) {
            assert!((b - f / 1e8).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_kernel_d_function() {
        let k = Kernel::constant(unit(20), 1.0).unwrap();
        let ev = evaluator(&k, SolverMode::DirectLu);
        assert_eq!(ev.rho_r_estimate(), 0.0);
        for lambda in [0.5, 1.0, 2.0, 7.0] {
            assert!((ev.D(lambda).unwrap() - (1.0 - 1.0 / lambda)).abs() < 1e-14);
            assert!((ev.D_prime(lambda).unwrap() - 1.0 / (lambda * lambda)).abs() < 1e-14);
        }
        let x = ev.resolve_r(4.0, &[2.0; 20]).unwrap();
        assert!(x.iter().all(|v| (v - 0.5).abs() < 1e-15));
        let y = ev.resolve_t(2.0, &[1.0; 20]).unwrap();
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(matches!(ev.resolve_t(1.0, &[1.0; 20]), Err(Error::AtEigenvalue { .. })));
        assert!(matches!(ev.D(0.0), Err(Error::BelowSpectralRadius { .. })));
    }

    #[test]
    fn two_by_two_zero_at_three() {
        let ev = evaluator(&two_by_two(), SolverMode::DirectLu);
        assert!((ev.rho_r_raw() - 1.0).abs() < 1e-9);
        // R = I, so D(λ) = 1 − 2/(λ − 1).
        for lambda in [1.5, 2.0, 3.0, 4.0, 10.0] {
            let d = 1.0 - 2.0 / (lambda - 1.0);
            assert!((ev.D(lambda).unwrap() - d).abs() < 1e-14);
        }
        let l = 4.0;
        let h = 1e-5 * l;
        let fd = (ev.D(l + h).unwrap() - ev.D(l - h).unwrap()) / (2.0 * h);
        let dp = ev.D_prime(l).unwrap();
        assert!((fd - dp).abs() <= 1e-6 * dp.abs());
    }

    #[test]
    fn neumann_and_direct_agree() {
        let s = unit(30);
        let k = Kernel::from_fn(s.clone(), |x, y| 1.0 + libm::sin(5.0 * x * y).abs() + x).unwrap();
        let direct = evaluator(&k, SolverMode::DirectLu);
        let neumann = evaluator(
            &k,
            SolverMode::Neumann {
                series_tol: 1e-14,
                max_terms: 10_000,
            },
        );
        let lambda = 2.0 * direct.r_norm();
        let v = GridFunction::from_fn(&s, |x| 1.0 + x * x);
        let a = direct.resolve_r(lambda, &v).unwrap();
        let b = neumann.resolve_r(lambda, &v).unwrap();
        for (a, b) in a.iter().zip(b.iter()) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
        let at = direct.at(lambda).unwrap();
        let bt = neumann.at(lambda).unwrap();
        let ta = at.resolve_r_transpose(&v).unwrap();
        let tb = bt.resolve_r_transpose(&v).unwrap();
        for (a, b) in ta.iter().zip(&tb) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
        assert!(matches!(
            neumann.D(0.9 * direct.r_norm()),
            Err(Error::NotConvergent { .. }) | Err(Error::BelowSpectralRadius { .. })
        ));
    }
}
