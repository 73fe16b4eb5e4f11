//! The four subcommands. Each writes its files, prints a short summary and
//! returns an error whose exit code follows the documented contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use doeblin_core::change_of_measure::{conjugate_kernel, transform_schur, transport_eigenfunction, MeasureChange};
use doeblin_core::corrected::{
    bell_polynomial, build_gammas, gamma_table, geometric_tail_bound, verify_gamma_expansion, verify_thm42_identity,
};
use doeblin_core::doeblin::{
    extract_minorization, positivity_improving_check, split, verify_certificate, Minorization,
    MinorizationCertificate, RankOneSplit,
};
use doeblin_core::matrix_pf::{power_doeblin_analyze, PeripheralReport, PowerDoeblinOutcome};
use doeblin_core::mollified::{
    convergence_study, kernel_space_norm, mollified_functional, mollified_recursion, Mollifier,
    SubtractionDirection,
};
use doeblin_core::resolvent::BirmanSchwingerEvaluator;
use doeblin_core::spectral::{self, d_curve, default_window, DPoint, DominanceReport, SpectralResult};
use doeblin_core::{GridFunction, Kernel, Lu, SchurBound, SpaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, StrategyName, Thresholds};
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64, CertificateFile};
use crate::report::{
    render_peripheral, CertificateSummary, Check, DiagnosticsSummary, GapSummary, OracleSummary, RunReport,
    VerifyReport,
};

/// Sample count for the D-curve written by `solve`.
pub const SOLVE_DCURVE_POINTS: usize = 200;
/// Sample count for the monotonicity and single-crossing checks.
pub const CHECK_DCURVE_POINTS: usize = 1000;
/// `|D(10³‖T‖) − 1|` is at most `1e-3` to leading order, with equality for
/// constant kernels; the factor absorbs rounding at that boundary.
const D_LIMIT_TOL: f64 = 1e-3 * (1.0 + 1e-9);
pub const DEFAULT_N_MAX: usize = 8;
const ORACLE_MAX_ITER: usize = 200_000;
const GAMMA_TERMS: usize = 8;
const EXPANSION_ORDER: usize = 4;
const STUDY_STEPS: usize = 3;

pub struct Session {
    pub cfg: RunConfig,
    pub kernel: Kernel,
    pub out_dir: PathBuf,
    timings: BTreeMap<String, f64>,
    clock: Instant,
}

impl Session {
    pub fn open(config: &Path, out: Option<&Path>) -> CliResult<Session> {
        let clock = Instant::now();
        let cfg = RunConfig::load(config)?;
        let kernel = cfg.build_kernel()?;
        let out_dir = cfg.output_dir(out);
        let mut s = Session {
            cfg,
            kernel,
            out_dir,
            timings: BTreeMap::new(),
            clock,
        };
        s.lap("load");
        Ok(s)
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let ms = now.duration_since(self.clock).as_secs_f64() * 1e3;
        self.timings.insert(stage.to_string(), ms);
        self.clock = now;
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    /// Canonical extraction, or a certificate file checked against the kernel.
    pub fn certificate(&self) -> CliResult<(MinorizationCertificate, String)> {
        let k = &self.kernel;
        if let Some(strategy) = self.cfg.strategy() {
            let name = match self.cfg.certificate.strategy.unwrap_or_default() {
                StrategyName::RowMin => "row_min",
                StrategyName::ColumnProfile => "column_profile",
            }
            .to_string();
            return match extract_minorization(k, &strategy)? {
                Minorization::Certified(c) => Ok((c, name)),
                Minorization::NotMinorizable(reason) => Err(CliError::NotMinorizable(format!(
                    "{reason}; run `doeblin power-doeblin` to search the powers K^N"
                ))),
            };
        }
        let path = self.cfg.resolve(self.cfg.certificate.file.as_deref().expect("file certificate"));
        let cert = io::read_certificate(&path)?.into_certificate(k.len())?;
        if cert.power != 1 {
            return Err(CliError::Certificate(format!(
                "certificate has power {}; only N = 1 certificates drive the solver",
                cert.power
            )));
        }
        let report = verify_certificate(k, &cert)?;
        if !report.holds {
            return Err(CliError::Certificate(format!(
                "K >= alpha u0 (x) g fails by {:.3e} at the worst entry",
                report.worst_slack
            )));
        }
        Ok((cert, "file".into()))
    }

    fn evaluator(&self, cert: &MinorizationCertificate) -> CliResult<(RankOneSplit, BirmanSchwingerEvaluator)> {
        let sp = split(&self.kernel, cert).map_err(|e| CliError::Certificate(e.to_string()))?;
        let ev = BirmanSchwingerEvaluator::new(sp.clone(), self.cfg.solver_mode())?;
        Ok((sp, ev))
    }
}

fn oracle_tol(k: &Kernel) -> f64 {
    1e-13 * k.norm()
}

/// Checks shared by `solve` and `verify`; residuals scaled by `λ₀` are divided by it.
fn spectral_checks(
    r: &SpectralResult,
    dom: &DominanceReport,
    oracle_rho: f64,
    t: &Thresholds,
) -> Vec<Check> {
    let d = &r.diagnostics;
    let l = r.lambda0;
    vec![
        Check::at_most("spectral.eigen_residual", d.eig_residual / l, t.eigen),
        Check::at_most("spectral.projection_idempotency", d.proj_idempotency, t.projection),
        Check::at_most("spectral.tp_residual", d.tp_residual / l, t.projection),
        Check::at_most("spectral.pt_residual", d.pt_residual / l, t.projection),
        Check::at_most("spectral.rank_one_defect", d.rank_one_defect, t.projection),
        Check::at_most("spectral.left_eigen_residual", d.left_residual / l, t.eigen),
        Check::at_most("spectral.oracle_delta", (l - oracle_rho).abs() / l, t.oracle),
        Check::at_least("spectral.rho_r_gap", d.gap_to_rho_r / l, 1e-6),
        Check::is_true("spectral.strictly_dominant", dom.dominant),
    ]
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{}", c.line());
    }
}

fn failures(checks: &[Check]) -> usize {
    checks.iter().filter(|c| !c.pass).count()
}

fn d_curve_rows(points: &[DPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let crossed = i > 0 && (points[i - 1].d < 0.0) != (p.d < 0.0);
            vec![
                fmt_f64(p.lambda),
                fmt_f64(p.d),
                fmt_f64(p.d_prime),
                if crossed { "1" } else { "0" }.to_string(),
            ]
        })
        .collect()
}

const DCURVE_HEADER: [&str; 4] = ["lambda", "d", "d_prime", "sign_change"];

fn sign_changes(points: &[DPoint]) -> Vec<(f64, f64)> {
    points
        .windows(2)
        .filter(|p| (p[0].d < 0.0) != (p[1].d < 0.0))
        .map(|p| (p[0].lambda, p[1].lambda))
        .collect()
}

pub fn solve(config: &Path, out: Option<&Path>) -> CliResult<RunReport> {
    let mut s = Session::open(config, out)?;
    let (cert, source) = s.certificate()?;
    let (_, ev) = s.evaluator(&cert)?;
    s.lap("certificate");
    let result = spectral::solve(&ev, s.cfg.solver.tol)?;
    s.lap("solve");
    let dom = spectral::verify_dominance(&ev, &result)?;
    s.lap("dominance");
    let oracle = s.kernel.spectral_radius_oracle(oracle_tol(&s.kernel), ORACLE_MAX_ITER)?;
    s.lap("oracle");

    let checks = spectral_checks(&result, &dom, oracle.rho, &s.cfg.solver.thresholds);

    let nodes = s.kernel.space().nodes().to_vec();
    let rows = nodes.iter().enumerate().map(|(i, x)| {
        vec![fmt_f64(*x), fmt_f64(result.w[i]), fmt_f64(result.left_row.density()[i])]
    });
    io::write_csv(&s.path(&s.cfg.outputs.eigenfunction), &["x", "w", "left"], rows)?;
    let (lo, hi) = default_window(&ev);
    let curve = d_curve(&ev, lo, hi, SOLVE_DCURVE_POINTS)?;
    io::write_csv(&s.path(&s.cfg.outputs.dcurve), &DCURVE_HEADER, d_curve_rows(&curve))?;
    io::write_json(
        &s.path(&s.cfg.outputs.certificate),
        &CertificateFile::from_certificate(&cert, "phi_one"),
    )?;
    s.lap("write");

    let report = RunReport {
        command: "solve".into(),
        nodes: s.kernel.len(),
        kernel_norm: s.kernel.norm(),
        certificate: CertificateSummary::new(&source, &cert),
        lambda0: result.lambda0,
        rho_r: ev.rho_r_raw(),
        spectral_gap: GapSummary {
            rho2: dom.rho2,
            gap_ratio: dom.gap_ratio,
            dominant: dom.dominant,
        },
        diagnostics: DiagnosticsSummary::from(result.diagnostics),
        oracle: OracleSummary {
            rho: oracle.rho,
            delta: result.lambda0 - oracle.rho,
            relative_delta: (result.lambda0 - oracle.rho).abs() / result.lambda0,
            iterations: oracle.iterations,
        },
        passed: failures(&checks) == 0,
        checks,
        timings_ms: s.timings.clone(),
    };
    io::write_json(&s.path(&s.cfg.outputs.report), &report)?;

    println!("certificate: {source}, alpha = {:.6e}, strict = {}", cert.alpha, report.certificate.strict);
    println!("lambda0 = {:.16e}", result.lambda0);
    println!("oracle  = {:.16e} (relative delta {:.2e})", oracle.rho, report.oracle.relative_delta);
    println!("rho(R)  = {:.6e}, rho2/lambda0 = {:.6e}", ev.rho_r_raw(), dom.gap_ratio);
    print_checks(&report.checks);
    match failures(&report.checks) {
        0 => Ok(report),
        failed => Err(CliError::Thresholds { failed }),
    }
}

pub fn dcurve(
    config: &Path,
    out: Option<&Path>,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    points: usize,
) -> CliResult<Vec<DPoint>> {
    let s = Session::open(config, out)?;
    let (cert, _) = s.certificate()?;
    let (_, ev) = s.evaluator(&cert)?;
    let (lo_default, hi_default) = default_window(&ev);
    let lo = lambda_min.unwrap_or(lo_default);
    let hi = lambda_max.unwrap_or(hi_default);
    let rho = ev.rho_r_estimate();
    if !(lo > rho) {
        return Err(CliError::Config(format!(
            "--lambda-min = {lo} is not above the spectral radius estimate of R ({rho:.16e})"
        )));
    }
    if !(hi > lo) || points < 2 {
        return Err(CliError::Config("need lambda-max > lambda-min and at least two points".into()));
    }
    let curve = d_curve(&ev, lo, hi, points)?;
    io::write_csv(&s.path(&s.cfg.outputs.dcurve), &DCURVE_HEADER, d_curve_rows(&curve))?;
    let monotone = curve.windows(2).all(|p| p[1].d > p[0].d);
    println!("rho_hat = {rho:.16e}");
    println!("monotone increasing: {monotone}");
    let changes = sign_changes(&curve);
    if changes.is_empty() {
        println!("no sign change in [{lo:.6e}, {hi:.6e}]");
    }
    for (a, b) in &changes {
        println!("sign change in ({a:.16e}, {b:.16e}]");
    }
    if !monotone {
        return Err(CliError::Numerical("sampled D is not strictly increasing".into()));
    }
    Ok(curve)
}

pub fn power_doeblin(config: &Path, out: Option<&Path>, n_max: usize) -> CliResult<PeripheralReport> {
    let s = Session::open(config, out)?;
    if !s.kernel.space().is_counting() {
        return Err(CliError::Config("power-doeblin needs a counting space (a csv matrix or type counting)".into()));
    }
    let strategy = s.cfg.fallback_strategy();
    match power_doeblin_analyze(&s.kernel, n_max, &strategy, s.cfg.solver.tol)? {
        PowerDoeblinOutcome::Report(r) => {
            let text = render_peripheral(&r);
            io::write_text(&s.path(&s.cfg.outputs.peripheral), &text)?;
            print!("{text}");
            Ok(r)
        }
        PowerDoeblinOutcome::NotFoundWithin(n) => {
            let text = format!("outcome: not-found-within\nn_max: {n}\n");
            io::write_text(&s.path(&s.cfg.outputs.peripheral), &text)?;
            print!("{text}");
            Err(CliError::NotMinorizable(format!("no power K^N with N <= {n} admits a strict certificate")))
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Gap between two vectors after scaling each to unit sup norm.
fn direction_gap(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sign = if a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x / na - sign * y / nb).abs())
        .fold(0.0, f64::max)
}

/// Σ over ordered `(j₁..j_p)`, `j_i ≥ 1`, `Σ j_i = q` of `Π b_{j_i}`.
fn compositions(p: usize, q: usize, b: &[u64]) -> u64 {
    if p == 0 {
        return u64::from(q == 0);
    }
    (1..=q.saturating_sub(p - 1))
        .map(|j| b[j - 1] * compositions(p - 1, q - j, b))
        .sum()
}

fn doeblin_checks(s: &Session, sp: &RankOneSplit, cert: &MinorizationCertificate) -> CliResult<Vec<Check>> {
    let k = &s.kernel;
    let rebuilt = sp.remainder.entries().add(&sp.rank_one_part())?;
    let scale = k.entries().max_abs().max(1.0);
    let lhs = k.iterate(3)?;
    let rhs = k.compose(&k.iterate(2)?)?;
    let rho_t = k.spectral_radius_oracle(oracle_tol(k), ORACLE_MAX_ITER)?.rho;
    let rho_r = sp.remainder.spectral_radius_oracle(oracle_tol(k), ORACLE_MAX_ITER)?.rho;
    Ok(vec![
        Check::is_true("doeblin.certificate_n1", true),
        Check::is_true("doeblin.certificate_strict", cert.g.strictly_positive()),
        Check::at_most("doeblin.split_reconstruction", rebuilt.max_abs_diff(k.entries()) / scale, 1e-12),
        Check::is_true("doeblin.remainder_nonnegative", sp.remainder.entries().min_entry() >= 0.0),
        Check::is_true("doeblin.positivity_improving", positivity_improving_check(k, cert)?),
        Check::at_most(
            "kernel.semigroup",
            lhs.entries().max_abs_diff(rhs.entries()) / lhs.entries().max_abs(),
            1e-10,
        ),
        Check::at_least("doeblin.rho_r_below_rho_t", (rho_t - rho_r) / rho_t, 1e-9),
    ])
}

fn resolvent_checks(ev: &BirmanSchwingerEvaluator, lambda0: f64, t: &Thresholds) -> CliResult<Vec<Check>> {
    let n = ev.len();
    let f: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let (l, nu) = (1.5 * lambda0, 3.0 * lambda0);
    let rl = ev.resolve_r(l, &f)?;
    let rn = ev.resolve_r(nu, &f)?;
    let rln = ev.resolve_r(l, &rn)?;
    let identity = (0..n)
        .map(|i| (rl[i] - rn[i] - (nu - l) * rln[i]).abs())
        .fold(0.0, f64::max)
        / rl.sup_norm().max(rn.sup_norm());

    let lambda = 2.0 * lambda0;
    let mut m = ev.t_operator().scaled(-1.0);
    for i in 0..n {
        m.set(i, i, m.get(i, i) + lambda);
    }
    let dense = Lu::factor(&m)?.solve(&f)?;
    let ours = ev.resolve_t(lambda, &f)?;
    let dense_norm = dense.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let factorization = dense.iter().zip(ours.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / dense_norm;

    let (lo, hi) = (ev.rho_r_estimate() + 1e-9 * ev.t_norm(), 10.0 * ev.t_norm());
    let curve = d_curve(ev, lo, hi, CHECK_DCURVE_POINTS)?;
    let monotone = curve.windows(2).all(|p| p[1].d > p[0].d);
    let crossings = sign_changes(&curve).len();

    let lp = 1.5 * lambda0;
    let h = 1e-5 * lp;
    let fd = (ev.D(lp + h)? - ev.D(lp - h)?) / (2.0 * h);
    let exact = ev.D_prime(lp)?;
    let limit = (ev.D(1e3 * ev.t_norm())? - 1.0).abs();

    Ok(vec![
        Check::at_most("resolvent.identity", identity, 1e-9),
        Check::at_most("resolvent.factorization_vs_dense", factorization, 1e-9),
        Check::is_true("resolvent.d_monotone", monotone),
        Check::is_true("resolvent.d_single_sign_change", crossings == 1),
        Check::at_most("resolvent.d_prime_vs_finite_difference", rel(fd, exact), t.derivative),
        Check::at_most("resolvent.d_limit_at_infinity", limit, D_LIMIT_TOL),
    ])
}

fn series_checks(ev: &BirmanSchwingerEvaluator, r: &SpectralResult, t: &Thresholds) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    match spectral::eigenfunction_series(ev, r.lambda0, 1e-15) {
        Ok(series) => {
            checks.push(Check::at_most("spectral.series_vs_residue", direction_gap(&series.w, &r.w), t.series));
            let predicted = ev.rho_r_raw() / r.lambda0;
            // A ratio is only measurable when the terms decay slowly enough to sample.
            if predicted >= 1e-3 && series.terms >= 8 {
                checks.push(Check::at_most("spectral.series_ratio", rel(series.ratio, predicted), 0.1));
            }
        }
        Err(e) => {
            println!("note: eigenfunction series failed: {e}");
            checks.push(Check::is_true("spectral.series_vs_residue", false));
        }
    }
    Ok(checks)
}

fn corrected_checks(s: &Session, sp: &RankOneSplit, t: &Thresholds) -> CliResult<Vec<Check>> {
    let k = &s.kernel;
    let seq = build_gammas(sp, GAMMA_TERMS)?;
    let lambda = 2.0 * k.norm();
    let c = seq.growth_constant();
    let growth = seq
        .gammas
        .iter()
        .enumerate()
        .all(|(n, g)| g.norm() < c.powi(n as i32 + 1));
    let thm = verify_thm42_identity(&seq, lambda, 1e-14)?;
    let table = gamma_table(&seq, lambda)?;
    let h_norm = table.first().map_or(0.0, |r| r.gamma_norm / lambda);
    let tail_ok = table
        .iter()
        .all(|r| r.partial_sum_error <= geometric_tail_bound(c, lambda, r.n) + 1e-12 * h_norm);
    io::write_csv(
        &s.path(&s.cfg.outputs.gammas),
        &["n", "gamma_norm", "bound", "partial_sum_error", "tail_bound"],
        table.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.gamma_norm),
                fmt_f64(r.bound),
                fmt_f64(r.partial_sum_error),
                fmt_f64(geometric_tail_bound(c, lambda, r.n)),
            ]
        }),
    )?;

    let b: [u64; 8] = [1, 2, 3, 1, 2, 3, 1, 2];
    let bf: Vec<f64> = b.iter().map(|v| *v as f64).collect();
    let mut bell_ok = true;
    for q in 1..=8 {
        for p in 1..=q {
            bell_ok &= bell_polynomial(p, q, &bf)? == compositions(p, q, &b) as f64;
        }
    }

    let mut expansion: f64 = 0.0;
    let mut literal = None;
    for n in 1..=EXPANSION_ORDER {
        let rep = verify_gamma_expansion(&seq, n)?;
        let scale = seq.gammas[n].entries().max_abs().max(1.0);
        expansion = expansion.max(rep.corrected_max_abs_error / scale);
        if literal.is_none() {
            if let Some(term) = rep.first_failing {
                literal = Some((n, term, rep.literal_max_abs_error));
            }
        }
    }
    if let Some((n, term, err)) = literal {
        println!("note: Bell-form Gamma_n expansion departs from (T-P)^n K at n = {n}: {term:?} (max error {err:.3e})");
    }

    Ok(vec![
        Check::at_most("corrected.recursion_forms", seq.cross_check, 1e-10),
        Check::is_true("corrected.norm_growth_strict", growth),
        Check::at_most("corrected.thm42_identity", thm.residual, t.thm42),
        Check::is_true("corrected.neumann_tail_bound", tail_ok),
        Check::is_true("corrected.bell_vs_enumeration", bell_ok),
        Check::at_most("corrected.word_expansion", expansion, 1e-10),
    ])
}

fn measure_change_checks(s: &Session, r: &SpectralResult, t: &Thresholds) -> CliResult<Vec<Check>> {
    let k = &s.kernel;
    let n = k.len();
    let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed);
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5f64..0.5).exp()).collect();
    let p = rng.random_range(1.5..4.0);
    let mc = MeasureChange::new(GridFunction::new(h), p)?;
    let ke = conjugate_kernel(k, &mc)?;
    let strategy = s.cfg.fallback_strategy();
    let cert_e = extract_minorization(&ke, &strategy)?
        .certificate()
        .ok_or_else(|| CliError::Numerical("conjugated kernel lost its certificate".into()))?;
    let ev_e = BirmanSchwingerEvaluator::new(split(&ke, &cert_e)?, s.cfg.solver_mode())?;
    let re = spectral::solve(&ev_e, s.cfg.solver.tol)?;
    let moved = transport_eigenfunction(&r.w, &mc)?;
    let back = conjugate_kernel(&ke, &mc.inverse())?;

    let ones = GridFunction::constant(n, 1.0);
    let row = k.apply(&ones)?.iter().fold(0.0f64, |m, v| m.max(*v));
    let w = k.weights();
    let col = (0..n)
        .map(|j| (0..n).map(|i| k.entries().get(i, j) * w[i]).sum::<f64>())
        .fold(0.0f64, f64::max);
    let bound = SchurBound::new(ones.clone(), ones, row.max(col)).with_exponent(p);
    let base_ok = k.verify_schur(&bound)?.holds;
    let moved_bound = transform_schur(&bound, &mc)?;
    let schur_ok = base_ok && ke.verify_schur(&moved_bound)?.holds && moved_bound.constant == bound.constant;

    Ok(vec![
        Check::at_most("measure.lambda_invariance", rel(re.lambda0, r.lambda0), t.measure_change),
        Check::at_most("measure.eigenfunction_transport", direction_gap(&moved, &re.w), t.measure_change),
        Check::at_most(
            "measure.involution",
            back.entries().max_abs_diff(k.entries()) / k.entries().max_abs(),
            1e-12,
        ),
        Check::is_true("measure.schur_transport", schur_ok),
    ])
}

fn mollified_checks(s: &Session) -> CliResult<Vec<Check>> {
    let k = &s.kernel;
    let (a, b) = match k.space().kind() {
        SpaceKind::Interval { a, b, .. } => (a, b),
        _ => return Ok(Vec::new()),
    };
    let len = b - a;
    let n = k.len();
    let (x0, y0) = (a + 0.3 * len, a + 0.6 * len);
    // Halve ε from len/5 while every box still catches two nodes.
    let eps: Vec<f64> = (0..4)
        .map(|j| 0.2 * len / f64::from(1u32 << j))
        .filter(|e| *e >= 2.0 * len / n as f64)
        .collect();
    if eps.len() < 2 {
        println!("note: grid too coarse for the mollified study");
        return Ok(Vec::new());
    }
    let psi = Mollifier::new(x0, eps[0])?;
    let eta = Mollifier::new(y0, eps[0])?;
    let sup = kernel_space_norm(k.space(), k.entries(), f64::INFINITY)?;
    let phi = mollified_functional(k.space(), k.entries(), &psi, &eta)?;
    let lifted = k.entries().compose_weighted(k.weights(), k.entries())?;
    let lifted_norm = kernel_space_norm(k.space(), &lifted, f64::INFINITY)?;
    let run = mollified_recursion(k, &psi, &eta, STUDY_STEPS, f64::INFINITY, &SubtractionDirection::Kernel)?;

    let study = convergence_study(k, x0, y0, &eps, STUDY_STEPS)?;
    io::write_csv(
        &s.path(&s.cfg.outputs.convergence),
        &["eps", "n", "error"],
        study
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.eps), r.n.to_string(), fmt_f64(r.error)]),
    )?;
    let last = study.summary.last().expect("nonempty study");
    let mut checks = vec![
        Check::at_most("mollified.functional_bound", phi.abs() / sup, 1.0 + 1e-12),
        Check::at_most("mollified.lift_norm", lifted_norm / (k.norm() * sup), 1.0 + 1e-12),
        Check::at_most("mollified.recursion_forms", run.form_discrepancy, 1e-10),
        Check::is_true("mollified.errors_non_increasing", study.is_non_increasing()),
    ];
    if last.prediction > 0.0 {
        checks.push(Check::at_most(
            "mollified.final_error_over_prediction",
            last.max_error / last.prediction,
            10.0,
        ));
    } else {
        // Flat kernels: both recursions coincide and the error is pure rounding.
        checks.push(Check::at_most("mollified.zero_error", last.max_error / sup, 1e-12));
    }
    Ok(checks)
}

fn power_doeblin_checks(s: &Session, n_max: usize) -> CliResult<Vec<Check>> {
    let k = &s.kernel;
    if !k.space().is_counting() {
        return Ok(Vec::new());
    }
    let strategy = s.cfg.fallback_strategy();
    Ok(match power_doeblin_analyze(k, n_max, &strategy, s.cfg.solver.tol)? {
        PowerDoeblinOutcome::NotFoundWithin(_) => vec![Check::is_true("power_doeblin.found", false)],
        PowerDoeblinOutcome::Report(r) => {
            print!("{}", render_peripheral(&r));
            let w = &r.power_result.w;
            let aw = k.entries().matvec(w)?;
            let wn = w.sup_norm();
            let residual = aw
                .iter()
                .zip(w.iter())
                .map(|(a, v)| (a - r.rho * v).abs())
                .fold(0.0, f64::max)
                / (r.rho * wn);
            let peripheral_is_rho = r.peripheral.len() == 1
                && (r.peripheral[0].re - r.rho).abs() <= 1e-10 * r.rho
                && r.peripheral[0].im.abs() <= 1e-10 * r.rho;
            let mut checks = vec![
                Check::is_true("power_doeblin.found", true),
                Check::is_true("power_doeblin.simple", r.simple),
                Check::at_most("power_doeblin.eigen_residual", residual, 1e-8),
                Check::is_true("power_doeblin.peripheral_is_rho", peripheral_is_rho),
            ];
            if let Some(ok) = r.oracle_agrees {
                checks.push(Check::is_true("power_doeblin.oracle_agrees", ok));
            }
            checks
        }
    })
}

pub fn verify(config: &Path, out: Option<&Path>) -> CliResult<VerifyReport> {
    let mut s = Session::open(config, out)?;
    let t = s.cfg.solver.thresholds.clone();
    let mut checks = Vec::new();
    let mut cert_summary = None;
    let mut lambda0 = None;
    let mut not_minorizable = None;

    match s.certificate() {
        Ok((cert, source)) => {
            cert_summary = Some(CertificateSummary::new(&source, &cert));
            let (sp, ev) = s.evaluator(&cert)?;
            checks.extend(doeblin_checks(&s, &sp, &cert)?);
            s.lap("doeblin");
            let r = spectral::solve(&ev, s.cfg.solver.tol)?;
            let dom = spectral::verify_dominance(&ev, &r)?;
            let oracle = s.kernel.spectral_radius_oracle(oracle_tol(&s.kernel), ORACLE_MAX_ITER)?;
            lambda0 = Some(r.lambda0);
            checks.extend(spectral_checks(&r, &dom, oracle.rho, &t));
            checks.extend(series_checks(&ev, &r, &t)?);
            s.lap("spectral");
            checks.extend(resolvent_checks(&ev, r.lambda0, &t)?);
            s.lap("resolvent");
            checks.extend(corrected_checks(&s, &sp, &t)?);
            s.lap("corrected");
            checks.extend(measure_change_checks(&s, &r, &t)?);
            s.lap("measure_change");
            checks.extend(mollified_checks(&s)?);
            s.lap("mollified");
        }
        Err(CliError::NotMinorizable(msg)) => {
            checks.push(Check::is_true("doeblin.certificate_n1", false));
            checks.extend(power_doeblin_checks(&s, DEFAULT_N_MAX)?);
            s.lap("power_doeblin");
            not_minorizable = Some(msg);
        }
        Err(e) => return Err(e),
    }

    let failed = failures(&checks);
    let report = VerifyReport {
        command: "verify".into(),
        nodes: s.kernel.len(),
        seed: s.cfg.seed,
        certificate: cert_summary,
        lambda0,
        passed: failed == 0,
        checks,
        timings_ms: s.timings.clone(),
    };
    io::write_json(&s.path(&s.cfg.outputs.report), &report)?;
    print_checks(&report.checks);
    println!("{} checks, {} failed", report.checks.len(), failed);
    if let Some(msg) = not_minorizable {
        return Err(CliError::NotMinorizable(msg));
    }
    match failed {
        0 => Ok(report),
        failed => Err(CliError::Thresholds { failed }),
    }
}
