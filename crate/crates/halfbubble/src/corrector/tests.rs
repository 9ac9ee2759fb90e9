use super::*;
use crate::bubble::fd;
use crate::curvature::random_admissible;

fn d(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

fn small_grid() -> RadialGrid {
    // stretch 1.1 keeps the first t spacing below the Robin rate 1/n
    RadialGrid::new(48, 48, 20.0, 20.0, 1.1).unwrap()
}

fn rnn_only(seed: u64, n: Dimension) -> CurvatureData {
    let c = random_admissible(seed, 1.0, n).unwrap();
    let m = n.tangential();
    CurvatureData::new(n, vec![0.0; m * m * m * m], c.rnn_entries().to_vec()).unwrap()
}

#[test]
fn zero_curvature_gives_zero_solution() {
    let n = d(8);
    let sol = solve_corrector(&CurvatureData::zero(n), &small_grid(), 1e-10).unwrap();
    assert!(sol.quad_sectors.is_empty());
    assert!(sol.iso.is_none());
    assert!(sol.defects.iter().all(|&v| v == 0.0));
    let report = check_properties(&sol);
    assert!(report.zero_solution);
    assert_eq!(report.v_lap_v, 0.0);
    let y = HalfSpacePoint::on_axis(n, 1.0).unwrap();
    assert_eq!(sol.eval(&y).unwrap(), 0.0);
}

#[test]
fn sector_reduction_matches_bruteforce_laplacian() {
    // v = T_ij z_i z_j w(r,t) with smooth w: the n-dimensional central
    // difference Laplacian must approach Tzz·[w_rr + ((n+2)/r) w_r + w_tt].
    let n = d(8);
    let m = n.tangential();
    let mut tensor = vec![0.0; m * m];
    // traceless symmetric example
    tensor[0] = 1.0;
    tensor[m + 1] = -1.0;
    tensor[2] = 0.5;
    tensor[2 * m] = 0.5;
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
    // reduced operator from the closed-form derivatives of w
    let reduced = |z: &[f64], t: f64| {
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
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
        tzz * (w_rr + (n.nf() + 2.0) / r * w_r + w_tt)
    };
    let pts: Vec<(Vec<f64>, f64)> = vec![
        (vec![0.8, -0.3, 0.5, 0.2, -0.6, 0.1, 0.4], 0.7),
        (vec![1.2, 0.4, -0.2, 0.9, 0.3, -0.5, 0.6], 1.5),
        (vec![0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5], 0.2),
    ];
    for (z, t) in &pts {
        let exact = reduced(z, *t);
        let coarse = fd::laplacian(&v, z, *t, 2e-2);
        let fine = fd::laplacian(&v, z, *t, 1e-2);
        assert!(
            (fine / exact - 1.0).abs() < 0.02,
            "ratio {} at refinement",
            fine / exact
        );
        // error shrinks under refinement (second-order stencil)
        assert!((fine - exact).abs() < (coarse - exact).abs());
    }
}

#[test]
fn manufactured_solution_second_order() {
    let n = d(8);
    let base = RadialGrid::new(32, 32, 20.0, 20.0, 1.1).unwrap();
    let order = manufactured_order(&base, n, 2, 1e-11).unwrap();
    assert!((order - 2.0).abs() < 0.3, "observed order {order}");
    // The isotropic operator carries the dilation mode as near-kernel; even
    // measured modulo that mode, the kernel approximation error slows the
    // observed rate at coarse resolution.
    let order0 = manufactured_order(&base, n, 0, 1e-11).unwrap();
    assert!((1.2..2.6).contains(&order0), "iso order {order0}");
}

#[test]
fn rnn_only_solution_properties() {
    let n = d(8);
    let curv = rnn_only(17, n);
    let grid = small_grid();
    let sol = solve_corrector(&curv, &grid, 1e-10).unwrap();
    assert_eq!(sol.quad_sectors.len(), 1);
    assert!(sol.iso.is_none());
    assert!(sol.residual_interior < 1e-8, "{}", sol.residual_interior);
    assert!(sol.residual_boundary < 1e-8, "{}", sol.residual_boundary);

    let report = check_properties(&sol);
    // boundary orthogonality against the bubble power
    assert!(report.uvq_integral.abs() < 1e-4 * report.v_norm);
    // sign of the volume integral
    assert!(report.v_lap_v < 0.0, "v_lap_v = {}", report.v_lap_v);
    // dual-route agreement within discretization error
    let rel = (report.v_lap_v - report.v_lap_v_green).abs() / report.v_lap_v.abs();
    assert!(rel < 0.15, "green route differs by {rel}");
    // kernel defects
    for &dft in &sol.defects {
        assert!(dft.abs() < 1e-10 * report.v_norm.max(1.0));
    }
}

#[test]
fn family_scaling_and_linearity() {
    let n = d(8);
    let curv = rnn_only(23, n);
    let grid = small_grid();
    let sol = solve_corrector(&curv, &grid, 1e-10).unwrap();

    // exact scaling identity
    let y = HalfSpacePoint::new(vec![0.5, -0.7, 0.2, 0.9, 0.1, -0.3, 0.4], 0.8).unwrap();
    for &delta in &[0.5, 2.0, 3.7] {
        let scaled = HalfSpacePoint::new(
            y.z().iter().map(|c| c * delta).collect(),
            y.t() * delta,
        )
        .unwrap();
        let lhs = sol.eval_family(delta, &scaled).unwrap();
        let rhs = delta.powf(-3.0) * sol.eval(&y).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300), "{lhs} vs {rhs}");
    }

    // solution for 2·curv is pointwise twice the solution for curv
    let sol2 = solve_corrector(&curv.scaled(2.0), &grid, 1e-10).unwrap();
    let v1 = sol.eval(&y).unwrap();
    let v2 = sol2.eval(&y).unwrap();
    assert!((v2 - 2.0 * v1).abs() < 1e-12 * v1.abs().max(1e-300));

    // beyond the grid: flagged
    let far = HalfSpacePoint::new(vec![25.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    assert!(matches!(sol.eval(&far), Err(Error::OutOfGrid(_))));
}

#[test]
fn v_lap_v_invariant_under_rotation() {
    let n = d(8);
    let m = n.tangential();
    let curv = rnn_only(29, n);
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        q[i * m + i] = 1.0;
    }
    let (c, s) = (0.28_f64, (1.0 - 0.28_f64 * 0.28).sqrt());
    q[0] = c;
    q[2] = -s;
    q[2 * m] = s;
    q[2 * m + 2] = c;
    let rotated = curv.rotate_tangential(&q).unwrap();
    let grid = small_grid();
    let a = solve_corrector(&curv, &grid, 1e-10).unwrap().v_laplacian_v();
    let b = solve_corrector(&rotated, &grid, 1e-10)
        .unwrap()
        .v_laplacian_v();
    assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
}

#[test]
fn decay_exponents_track_the_bound() {
    // Needs a slightly larger domain than the other tests so the shells
    // reach the asymptotic regime.
    let n = d(8);
    let curv = rnn_only(31, n);
    let grid = RadialGrid::new(160, 160, 160.0, 160.0, 1.04).unwrap();
    let sol = solve_corrector(&curv, &grid, 1e-12).unwrap();
    let fits = sol.decay_exponents();
    let expect0 = 4.0 - n.nf(); // -4
    let expect1 = 3.0 - n.nf(); // -5
    assert!(
        (fits[0] - expect0).abs() < 0.3,
        "tau=0 fit {} vs {expect0}",
        fits[0]
    );
    assert!(
        (fits[1] - expect1).abs() < 0.3,
        "tau=1 fit {} vs {expect1}",
        fits[1]
    );
}

#[test]
fn richardson_order_is_near_two() {
    let n = d(8);
    let base = RadialGrid::new(40, 40, 20.0, 20.0, 1.1).unwrap();
    let order = richardson_order(&base, n, 1e-11).unwrap();
    assert!((order - 2.0).abs() < 0.4, "order {order}");
}

#[test]
fn trace_bearing_data_exercises_iso_sector_and_projection() {
    let n = d(8);
    let m = n.tangential();
    // symmetric rnn with a deliberate trace: not admissible, but the solver
    // must still produce an orthogonal solution via the projection step.
    let mut c = CurvatureData::zero(n);
    let mut rnn = vec![0.0; m * m];
    for i in 0..m {
        rnn[i * m + i] = 0.3 + 0.1 * i as f64;
    }
    rnn[1] = 0.2;
    rnn[m] = 0.2;
    c = CurvatureData::new(n, c.rbar_entries().to_vec(), rnn).unwrap();
    let sol = solve_corrector(&c, &small_grid(), 1e-10).unwrap();
    assert!(sol.iso.is_some());
    let report = check_properties(&sol);
    // projection must have killed the dilation-mode defect
    let dn = sol.defects[n.n() - 1];
    assert!(dn.abs() < 1e-10 * report.v_norm.max(1.0), "defect {dn}");
}

#[test]
fn solver_rejects_bad_tolerance() {
    let n = d(8);
    assert!(solve_corrector(&CurvatureData::zero(n), &small_grid(), 0.0).is_err());
    assert!(solve_corrector(&CurvatureData::zero(n), &small_grid(), -1.0).is_err());
}
