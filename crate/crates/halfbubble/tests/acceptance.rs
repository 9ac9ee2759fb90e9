//! Acceptance suite: every release-gating property, one test per criterion,
//! each printing a PASS line with the measured values and elapsed time.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use halfbubble::asymptotics::{
    gap_ratio_sequence, geometric_eps_grid, nittka_identity_deviations, scaling_study,
    StudyOptions,
};
use halfbubble::bubble::{residual_scales, residuals, Dimension, HalfSpacePoint};
use halfbubble::config::StudyConfig;
use halfbubble::corrector::{
    check_properties, richardson_order, solve_corrector, RadialGrid,
};
use halfbubble::curvature::random_admissible;
use halfbubble::energy::{b_log_coefficient_check, const_c, maximize, moment_integrals, phi};
use halfbubble::fit::fit_line;

/// Criteria run one at a time (the harness may spawn threads, but the
/// runtime budgets are wall-clock measurements).
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Timer(std::time::Instant, f64, &'static str);

impl Timer {
    fn start(budget_s: f64, name: &'static str) -> Timer {
        Timer(std::time::Instant::now(), budget_s, name)
    }

    fn finish(self, detail: &str) {
        let elapsed = self.0.elapsed().as_secs_f64();
        println!("PASS {}: {detail} [{elapsed:.2} s]", self.2);
        assert!(
            elapsed < self.1,
            "{} exceeded its runtime budget: {elapsed:.1} s > {} s",
            self.2,
            self.1
        );
    }
}

fn d(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

/// The grid used by the corrector criteria: 400×400 stretched, reaching the
/// asymptotic decay range.
fn acceptance_grid() -> RadialGrid {
    RadialGrid::new(400, 400, 160.0, 160.0, 1.02).unwrap()
}

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_1_exact_solution_residuals() {
    let _guard = serial();
    let timer = Timer::start(1.0, "criterion 1 (exact-solution residuals)");
    let mut worst = 0.0_f64;
    for nn in [8u32, 10] {
        let n = d(nn);
        let mut rng = Lcg(nn as u64 * 17 + 1);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..n.tangential()).map(|_| 6.0 * rng.next_f64() - 3.0).collect();
            let t = 4.0 * rng.next_f64();
            let y = HalfSpacePoint::new(z, t).unwrap();
            let res = residuals(&y, n).unwrap();
            let (si, sb, sl) = residual_scales(&y, n).unwrap();
            worst = worst.max(res.interior.abs() / si).max(res.boundary.abs() / sb);
            for (r, s) in res.linearized.iter().zip(&sl) {
                worst = worst.max(r.abs() / s);
            }
        }
    }
    assert!(worst < 1e-12, "worst relative residual {worst:.3e}");
    timer.finish(&format!(
        "interior/boundary/linearized residuals ≤ {worst:.2e} relative at 1000 points, n ∈ {{8, 10}}"
    ));
}

#[test]
fn criterion_2_moment_integral_dual_oracle() {
    let _guard = serial();
    let timer = Timer::start(10.0, "criterion 2 (moment-integral dual oracle)");
    let mut worst = 0.0_f64;
    for nn in [8u32, 9, 10] {
        let ints = moment_integrals(d(nn)).unwrap();
        for v in [ints.i1, ints.i2, ints.i3, ints.i4] {
            worst = worst.max(v.relative_gap());
        }
    }
    assert!(worst < 1e-8, "worst dual-oracle gap {worst:.3e}");
    timer.finish(&format!(
        "I1..I4 closed form vs adaptive quadrature within {worst:.2e} for n ∈ {{8, 9, 10}}"
    ));
}

#[test]
fn criterion_3_corrector_properties() {
    let _guard = serial();
    let timer = Timer::start(300.0, "criterion 3 (corrector properties)");
    let n = d(8);
    let grid = acceptance_grid();
    let tol = 1e-12;
    let mut worst_uvq_rel = 0.0_f64;
    let mut worst_tau0 = 0.0_f64;
    let mut worst_tau1 = 0.0_f64;
    for seed in 0..10u64 {
        let curv = random_admissible(seed, 1.0, n).unwrap();
        let sol = solve_corrector(&curv, &grid, tol).unwrap();
        let props = check_properties(&sol);
        let uvq_rel = props.uvq_integral.abs() / props.v_norm;
        assert!(uvq_rel < 1e-4, "seed {seed}: |uvq| = {uvq_rel:.3e} · ‖v‖");
        assert!(props.v_lap_v < 0.0, "seed {seed}: ∫vΔv = {}", props.v_lap_v);
        let fits = &props.decay_exponents;
        assert!(
            (fits[0] + 4.0).abs() < 0.3,
            "seed {seed}: tau=0 fit {} vs -4",
            fits[0]
        );
        assert!(
            (fits[1] + 5.0).abs() < 0.3,
            "seed {seed}: tau=1 fit {} vs -5",
            fits[1]
        );
        worst_uvq_rel = worst_uvq_rel.max(uvq_rel);
        worst_tau0 = worst_tau0.max((fits[0] + 4.0).abs());
        worst_tau1 = worst_tau1.max((fits[1] + 5.0).abs());
    }
    // grid-refinement convergence of the solve functional, 100 → 200 → 400.
    // The study runs on a milder-stretch R = 40 family: the functional is
    // domain-insensitive, and the strongly stretched 160-domain systems sit
    // too close to the BiCGStab conditioning floor for clean differences.
    let base = RadialGrid::new(100, 100, 40.0, 40.0, 1.04).unwrap();
    let order = richardson_order(&base, n, 1e-10).unwrap();
    assert!((order - 2.0).abs() < 0.3, "refinement order {order}");
    timer.finish(&format!(
        "10 seeds on 400×400: |uvq| ≤ {worst_uvq_rel:.1e}·‖v‖, ∫vΔv < 0, decay fits within {:.2}/{:.2} of -4/-5, refinement order {order:.2}",
        worst_tau0, worst_tau1
    ));
}

#[test]
fn criterion_4_sector_reduction_oracle() {
    let _guard = serial();
    let timer = Timer::start(60.0, "criterion 4 (sector-reduction oracle)");
    let n = d(8);
    let m = n.tangential();
    let nf = n.nf();
    let mut tensor = vec![0.0; m * m];
    tensor[0] = 1.0;
    tensor[m + 1] = -1.0;
    tensor[3] = 0.7;
    tensor[3 * m] = 0.7;
    let w = |r: f64, t: f64| (-(r * r + t * t) / 4.0).exp();
    let v = |z: &[f64], t: f64| {
        let r2: f64 = z.iter().map(|c| c * c).sum();
        let mut tzz = 0.0;
        for i in 0..m {
            for j in 0..m {
                tzz += tensor[i * m + j] * z[i] * z[j];
            }
        }
        tzz * w(r2.sqrt(), t)
    };
    let mut rng = Lcg(99);
    let mut worst_fine = 0.0_f64;
    for _ in 0..10 {
        let z: Vec<f64> = (0..m).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let t = 0.2 + 1.5 * rng.next_f64();
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r < 0.3 {
            continue;
        }
        let mut tzz = 0.0;
        for i in 0..m {
            for j in 0..m {
                tzz += tensor[i * m + j] * z[i] * z[j];
            }
        }
        let wv = w(r, t);
        let w_r = -0.5 * r * wv;
        let w_rr = (-0.5 + 0.25 * r * r) * wv;
        let w_tt = (-0.5 + 0.25 * t * t) * wv;
        let reduced = tzz * (w_rr + (nf + 2.0) / r * w_r + w_tt);
        let coarse = halfbubble::bubble::fd::laplacian(&v, &z, t, 2e-2);
        let fine = halfbubble::bubble::fd::laplacian(&v, &z, t, 1e-2);
        // ratio approaches 1 under refinement
        assert!(
            (fine / reduced - 1.0).abs() < 0.02,
            "fine ratio {}",
            fine / reduced
        );
        assert!((fine - reduced).abs() <= (coarse - reduced).abs() + 1e-12);
        worst_fine = worst_fine.max((fine / reduced - 1.0).abs());
    }
    timer.finish(&format!(
        "brute-force n-dim Laplacian matches the reduced operator, worst |ratio-1| = {worst_fine:.2e}"
    ));
}

#[test]
fn criterion_5_phi_sign_and_homogeneity() {
    let _guard = serial();
    let timer = Timer::start(1800.0, "criterion 5 (phi sign and homogeneity)");
    let n = d(8);
    let grid = acceptance_grid();
    let tol = 1e-12;
    let mut max_phi = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        let curv = random_admissible(seed, 1.0, n).unwrap();
        let sol = solve_corrector(&curv, &grid, tol).unwrap();
        let b = phi(&curv, &sol).unwrap();
        assert!(b.total < 0.0, "seed {seed}: phi = {}", b.total);
        max_phi = max_phi.max(b.total);
    }
    let curv = random_admissible(0, 1.0, n).unwrap();
    let sol = solve_corrector(&curv, &grid, tol).unwrap();
    let base = phi(&curv, &sol).unwrap().total;
    let mut worst_hom = 0.0_f64;
    for s in [0.5, 2.0] {
        let scaled = curv.scaled(s);
        let sol_s = solve_corrector(&scaled, &grid, tol).unwrap();
        let ratio = phi(&scaled, &sol_s).unwrap().total / base;
        let dev = (ratio / (s * s) - 1.0).abs();
        assert!(dev < 0.01, "s = {s}: ratio {ratio} vs {}", s * s);
        worst_hom = worst_hom.max(dev);
    }
    timer.finish(&format!(
        "phi < 0 for 100 admissible draws (max {max_phi:.3e}); phi(s·curv)/phi = s² within {worst_hom:.1e}"
    ));
}

#[test]
fn criterion_6_reduced_landscape_structure() {
    let _guard = serial();
    let timer = Timer::start(1.0, "criterion 6 (reduced-landscape structure)");
    let n = d(8);
    let c = const_c(n).unwrap().closed;
    let mut worst = 0.0_f64;
    for phi_val in [-0.05_f64, -0.37, -2.4] {
        let closed = (c / (4.0 * phi_val.abs())).powf(0.25);
        let m = maximize(phi_val, n, 0.05, 6.0).unwrap();
        assert!(m.interior, "closed-form {closed} should be interior");
        let rel = (m.golden_section - closed).abs() / closed;
        assert!(rel < 1e-6, "numerical vs closed-form maximizer gap {rel:.3e}");
        worst = worst.max(rel);
        // interval excluding the maximizer flags the endpoint
        let m2 = maximize(phi_val, n, closed + 1.0, closed + 2.0).unwrap();
        assert!(!m2.interior);
        assert_eq!(m2.lambda_star, closed + 1.0);
    }
    timer.finish(&format!(
        "numerical maximizer matches (C/4|phi|)^(1/4) within {worst:.2e}; interior flag consistent"
    ));
}

#[test]
fn criterion_7_remainder_scaling() {
    let _guard = serial();
    let timer = Timer::start(600.0, "criterion 7 (remainder scaling)");
    let eps_grid = geometric_eps_grid(1e-2, 1e-6, 9);
    let opts = StudyOptions::default();
    let tol = 1e-11;

    let curv10 = random_admissible(1, 1.0, d(10)).unwrap();
    let study10 = scaling_study(&curv10, 0.5, &eps_grid, tol, &opts).unwrap();
    let slope10 = study10.composite_fit.slope;
    assert!(
        (slope10 - 0.75).abs() < 0.10,
        "n=10 composite slope {slope10}"
    );

    let curv8 = random_admissible(1, 1.0, d(8)).unwrap();
    let study8 = scaling_study(&curv8, 0.5, &eps_grid, tol, &opts).unwrap();
    assert!(
        study8.log_correction_detected(),
        "n=8 log correction not detected: p = {:.3e}",
        study8.log_test.p_value
    );
    let slope8 = study8.log_test.corrected_slope;
    assert!(
        (slope8 - 0.75).abs() < 0.15,
        "n=8 log-corrected base slope {slope8}"
    );
    // supporting check: the perturbation term scales like ε with a visible
    // log-δ modulation
    assert!(
        study8.pert_log_test.log_correction_detected(),
        "n=8 Q_pert log modulation not detected"
    );
    let pert_base = study8.pert_log_test.corrected_slope;
    assert!(
        (0.8..1.05).contains(&pert_base),
        "Q_pert base slope {pert_base}"
    );
    timer.finish(&format!(
        "n=10 slope {slope10:.3} (±0.10 band); n=8 log-corrected base {slope8:.3} with F = {:.1e}",
        study8.log_test.f_statistic
    ));
}

#[test]
fn criterion_8_exponent_identities() {
    let _guard = serial();
    let timer = Timer::start(1.0, "criterion 8 (exponent identities)");
    let mut rng = Lcg(8);
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let n = d(8 + (k % 5) as u32);
        let eps = 10f64.powf(-4.0 * rng.next_f64());
        let (id1, id2) = nittka_identity_deviations(n, eps).unwrap();
        worst = worst.max(id1.abs()).max(id2.abs());
    }
    assert!(worst < 1e-14, "worst identity deviation {worst:.3e}");

    let mut worst_b = 0.0_f64;
    for nn in [8u32, 9, 10, 11, 12] {
        let n = d(nn);
        let chk = b_log_coefficient_check(n);
        let i1 = moment_integrals(n).unwrap().i1.closed;
        let dev = ((chk.assembled * i1 - chk.closed_form * i1) / (chk.closed_form * i1)).abs();
        worst_b = worst_b.max(dev);
    }
    assert!(worst_b < 1e-10, "B coefficient recomputation off by {worst_b:.3e}");
    timer.finish(&format!(
        "identities exact to {worst:.2e} at 20 draws; B log coefficient matches to {worst_b:.2e}"
    ));
}

#[test]
fn criterion_9_energy_gap_arithmetic() {
    let _guard = serial();
    let timer = Timer::start(1.0, "criterion 9 (energy-gap arithmetic)");
    for nn in [8u32, 10] {
        let grid: Vec<f64> = (1..=7).map(|k| 10f64.powi(-(k as i32) - 1)).collect();
        let (checks, monotone) = gap_ratio_sequence(d(nn), &grid).unwrap();
        assert!(monotone, "n={nn}: gap ratio sequence not monotone");
        assert!(checks.last().unwrap().ratio < checks[0].ratio / 10.0);
    }
    timer.finish("bound/ε decreases monotonically toward 0 over ε ∈ {1e-2 … 1e-8}");
}

#[test]
fn criterion_10_reproducibility() {
    let _guard = serial();
    let timer = Timer::start(900.0, "criterion 10 (reproducibility)");
    let mut cfg = StudyConfig::default();
    // reduced grid: the criterion tests byte-identity of the payloads, which
    // must hold at any resolution
    cfg.grid_nr = 64;
    cfg.grid_nt = 64;
    cfg.grid_rmax = 40.0;
    cfg.grid_tmax = 40.0;
    cfg.grid_stretch = 1.08;
    cfg.tol = 1e-10;
    cfg.eps_points = 5;
    cfg.lambda_points = 41;
    cfg.qmc_directions = 64;
    cfg.radial_nodes = 48;
    let (first, pass1) = halfbubble::cli::verify_suite(&cfg).unwrap();
    let (second, pass2) = halfbubble::cli::verify_suite(&cfg).unwrap();
    assert!(pass1 && pass2, "verification suite must pass");
    assert_eq!(first, second, "verify payloads differ between runs");
    timer.finish(&format!(
        "two verify runs byte-identical ({} bytes, all checks passing)",
        first.len()
    ));
}

#[test]
fn acceptance_slope_sanity_cross_check() {
    // supporting evidence for criterion 7: the plain fit on clean power-law
    // data recovers the exponent to machine precision
    let eps: Vec<f64> = geometric_eps_grid(1e-2, 1e-6, 9);
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = eps.iter().map(|e| (3.0 * e.powf(0.75)).ln()).collect();
    let fit = fit_line(&lx, &ly);
    assert!((fit.slope - 0.75).abs() < 1e-12);
}
