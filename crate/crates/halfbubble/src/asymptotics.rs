//! Remainder-norm scaling: the exponent bookkeeping of the regularity
//! estimates, the four explicit remainder quantities evaluated on ε/δ grids,
//! slope fits with log-correction detection, and the energy-gap arithmetic.
//!
//! All model computations use Λ ≡ 1 (its value and gradient at the base
//! point are 1 and 0; nothing at the orders checked here sees more), a sharp
//! truncation of the chart at radius ρ₀ in place of a cutoff function, and
//! the scalar-curvature model R(y) = -|W̄|²/12·|z|² + c·t² whose tangential
//! Hessian matches the curvature identity at the base point.

use crate::bubble::{bubble_gradient, bubble_hessian, bubble_raw, Dimension};
use crate::corrector::{solve_corrector, CorrectorSolution, RadialGrid};
use crate::curvature::{metric_divergence, metric_tail, weyl_norm_sq, CurvatureData};
use crate::error::{Error, Result};
use crate::fit::{detect_log_correction, fit_line, LineFit, LogCorrectionTest};
use crate::quad::{gauss_legendre_on, sphere_directions};
use crate::special::sphere_area;

// ─────────────────────────────────────────────────────────────────────────
// Exponent bookkeeping
// ─────────────────────────────────────────────────────────────────────────

/// s_ε = 2(n-1)/(n-2) + nε.
pub fn s_eps(n: Dimension, eps: f64) -> Result<f64> {
    if eps < 0.0 {
        return Err(Error::ParameterRange(format!("eps must be >= 0, got {eps}")));
    }
    let nf = n.nf();
    Ok(2.0 * (nf - 1.0) / (nf - 2.0) + nf * eps)
}

/// Closed forms of the elliptic-regularity integrability exponents used by
/// the remainder estimates (q here always means this exponent, never a
/// boundary point):
///
/// ```text
/// q = [2n + n²((n-2)/(n-1))ε] / [n + 2 + 2n((n-2)/(n-1))ε]
/// r = (2(n-1)+n(n-2)ε)/(n+(n-2)ε) - (2(n-1)+n(n-2)ε)/(n+(n-2)(n/(n-1))ε)
/// ```
pub fn nittka_exponents(n: Dimension, eps: f64) -> Result<(f64, f64)> {
    if eps < 0.0 {
        return Err(Error::ParameterRange(format!("eps must be >= 0, got {eps}")));
    }
    let nf = n.nf();
    let c = (nf - 2.0) / (nf - 1.0);
    let q = (2.0 * nf + nf * nf * c * eps) / (nf + 2.0 + 2.0 * nf * c * eps);
    if !(2.0 * nf / (nf + 2.0) <= q && q < nf / 2.0) {
        return Err(Error::ParameterRange(format!(
            "exponent q = {q} escapes [2n/(n+2), n/2)"
        )));
    }
    let top = 2.0 * (nf - 1.0) + nf * (nf - 2.0) * eps;
    let r = top / (nf + (nf - 2.0) * eps) - top / (nf + (nf - 2.0) * nf / (nf - 1.0) * eps);
    Ok((q, r))
}

/// Relative deviations of the two exponent identities, exact in real
/// arithmetic: (n-1)q/(n-2q) = s_ε and
/// (n-1)q/(n-q) + r = (2(n-1)+n(n-2)ε)/(n+(n-2)ε).
pub fn nittka_identity_deviations(n: Dimension, eps: f64) -> Result<(f64, f64)> {
    let nf = n.nf();
    let (q, r) = nittka_exponents(n, eps)?;
    let s = s_eps(n, eps)?;
    let id1 = ((nf - 1.0) * q / (nf - 2.0 * q) - s) / s;
    let target = (2.0 * (nf - 1.0) + nf * (nf - 2.0) * eps) / (nf + (nf - 2.0) * eps);
    let id2 = ((nf - 1.0) * q / (nf - q) + r - target) / target;
    Ok((id1, id2))
}

/// Boundary-norm exponent carried through the estimates:
/// κ_ε = (2(n-1)+n(n-2)ε)/(n+(n-2)ε), with κ₀ = 2(n-1)/n.
pub fn boundary_norm_exponent(n: Dimension, eps: f64) -> f64 {
    let nf = n.nf();
    (2.0 * (nf - 1.0) + nf * (nf - 2.0) * eps) / (nf + (nf - 2.0) * eps)
}

/// Interior-norm exponent q(ε) + ε, with limit 2n/(n+2).
pub fn interior_norm_exponent(n: Dimension, eps: f64) -> Result<f64> {
    Ok(nittka_exponents(n, eps)?.0 + eps)
}

// ─────────────────────────────────────────────────────────────────────────
// Remainder quantities
// ─────────────────────────────────────────────────────────────────────────

/// Knobs of the remainder-norm evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    /// Chart truncation radius in the unscaled variable y.
    pub rho0: f64,
    /// Mean-curvature model coefficient. The default is large enough that
    /// the geometry term — the δ³ part of the remainder — is the binding
    /// term of the composite over the studied ε window rather than being
    /// buried under the ε-perturbation constants.
    pub c_h: f64,
    /// Mean-curvature model exponent. The remainder estimate effectively
    /// bounds h against the quadratic envelope |y|², which this default
    /// follows; set 3 to test the cubic-vanishing reading instead.
    pub h_exponent: f64,
    /// Transverse coefficient of the scalar-curvature model (free at the
    /// order checked; defaults to zero).
    pub r_scalar_ct: f64,
    /// Quasi-random directions per radial node.
    pub directions: usize,
    /// Radial quadrature nodes.
    pub radial_nodes: usize,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            rho0: 1.0,
            c_h: 15.0,
            h_exponent: 2.0,
            r_scalar_ct: 0.0,
            directions: 192,
            radial_nodes: 96,
            seed: 1,
        }
    }
}

/// The four remainder quantities at one (δ, ε).
#[derive(Debug, Clone, Copy)]
pub struct RemainderQuantities {
    /// Mean-curvature term, boundary norm.
    pub q_h: f64,
    /// Interior operator mismatch, volume norm.
    pub q_delta: f64,
    /// Boundary nonlinearity mismatch (Taylor remainder past first order).
    pub q_bdry: f64,
    /// Supercritical-exponent perturbation f_ε - f₀, boundary norm.
    pub q_pert: f64,
    /// One-term tail bounds of the truncated quadratures, per quantity.
    pub tails: [f64; 4],
}

impl RemainderQuantities {
    pub fn composite(&self) -> f64 {
        self.q_h.max(self.q_delta).max(self.q_bdry).max(self.q_pert)
    }
}

/// Interpolated corrector data at a point of the rescaled chart.
struct VEval {
    v: f64,
    grad_z: Vec<f64>,
    hess_z: Vec<f64>,
}

/// Precomputed first/second radial derivative grids per sector.
struct VDeriv<'a> {
    sol: &'a CorrectorSolution,
    w_r: Vec<Vec<f64>>,
    w_rr: Vec<Vec<f64>>,
    iso_r: Option<Vec<f64>>,
    iso_rr: Option<Vec<f64>>,
}

impl<'a> VDeriv<'a> {
    fn new(sol: &'a CorrectorSolution) -> Self {
        let mut w_r = Vec::new();
        let mut w_rr = Vec::new();
        for s in &sol.quad_sectors {
            let (wr, _) = sol.grid_gradients(&s.w);
            let (wrr, _) = sol.grid_gradients(&wr);
            w_r.push(wr);
            w_rr.push(wrr);
        }
        let (iso_r, iso_rr) = match &sol.iso {
            Some(iso) => {
                let (wr, _) = sol.grid_gradients(&iso.w0);
                let (wrr, _) = sol.grid_gradients(&wr);
                (Some(wr), Some(wrr))
            }
            None => (None, None),
        };
        VDeriv {
            sol,
            w_r,
            w_rr,
            iso_r,
            iso_rr,
        }
    }

    /// v with tangential first and second derivatives at x = (z, t); points
    /// outside the solved grid contribute zero (the correction is negligible
    /// there and the quantities are dominated well inside).
    fn eval(&self, z: &[f64], t: f64) -> VEval {
        let m = self.sol.n.tangential();
        let g = &self.sol.grid;
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
        let mut v = 0.0;
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        let mut add_sector = |tensor: Option<&[f64]>, w: f64, wr: f64, wrr: f64| {
            match tensor {
                Some(tm) => {
                    let mut tzz = 0.0;
                    let mut tz = vec![0.0; m];
                    for i in 0..m {
                        for j in 0..m {
                            tz[i] += tm[i * m + j] * z[j];
                        }
                        tzz += tz[i] * z[i];
                    }
                    v += tzz * w;
                    for i in 0..m {
                        grad[i] += 2.0 * tz[i] * w + tzz * wr * z[i] / r;
                    }
                    for i in 0..m {
                        for j in 0..m {
                            let mut acc = 2.0 * tm[i * m + j] * w
                                + 2.0 * (tz[i] * z[j] + tz[j] * z[i]) * wr / r
                                + tzz * wrr * z[i] * z[j] / (r * r)
                                - tzz * wr * z[i] * z[j] / (r * r * r);
                            if i == j {
                                acc += tzz * wr / r;
                            }
                            hess[i * m + j] += acc;
                        }
                    }
                }
                None => {
                    v += w;
                    for i in 0..m {
                        grad[i] += wr * z[i] / r;
                    }
                    for i in 0..m {
                        for j in 0..m {
                            let mut acc =
                                wrr * z[i] * z[j] / (r * r) - wr * z[i] * z[j] / (r * r * r);
                            if i == j {
                                acc += wr / r;
                            }
                            hess[i * m + j] += acc;
                        }
                    }
                }
            }
        };
        for (sidx, s) in self.sol.quad_sectors.iter().enumerate() {
            let w = g.interp(&s.w, r, t).unwrap_or(0.0);
            let wr = g.interp(&self.w_r[sidx], r, t).unwrap_or(0.0);
            let wrr = g.interp(&self.w_rr[sidx], r, t).unwrap_or(0.0);
            add_sector(Some(&s.tensor), w, wr, wrr);
        }
        if let Some(iso) = &self.sol.iso {
            let w = g.interp(&iso.w0, r, t).unwrap_or(0.0);
            let wr = g
                .interp(self.iso_r.as_ref().unwrap(), r, t)
                .unwrap_or(0.0);
            let wrr = g
                .interp(self.iso_rr.as_ref().unwrap(), r, t)
                .unwrap_or(0.0);
            add_sector(None, w, wr, wrr);
        }
        VEval {
            v,
            grad_z: grad,
            hess_z: hess,
        }
    }
}

/// Lᵖ norm over the boundary slice {t = 0, |z| ≤ ρ₀} of a field given in the
/// rescaled variable: value(r, ω) at z = r ω, measure δ^{n-1} r^{n-2} dr dω.
fn boundary_norm<F: Fn(f64, &[f64]) -> f64>(
    f: F,
    n: Dimension,
    delta: f64,
    p: f64,
    opts: &StudyOptions,
) -> (f64, f64) {
    let nf = n.nf();
    let x_top = opts.rho0 / delta;
    let dirs = sphere_directions(n.n() - 1, opts.directions, opts.seed);
    let (thetas, wts) = gauss_legendre_on(opts.radial_nodes, 0.0, x_top.atan());
    let mut acc = 0.0;
    let mut last_shell = 0.0;
    let mut prev_shell = 0.0;
    for (k, (&th, &wt)) in thetas.iter().zip(&wts).enumerate() {
        let r = th.tan();
        let jac = 1.0 / (th.cos() * th.cos());
        let mean: f64 = dirs
            .iter()
            .map(|w| {
                let z: Vec<f64> = w.iter().map(|&c| r * c).collect();
                f(r, &z).abs().powf(p)
            })
            .sum::<f64>()
            / dirs.len() as f64;
        let shell = wt * jac * r.powf(nf - 2.0) * mean;
        acc += shell;
        if k + 1 == thetas.len() {
            last_shell = shell;
        } else if k + 2 == thetas.len() {
            prev_shell = shell;
        }
    }
    let omega = sphere_area(n.n() - 2);
    let total = (omega * delta.powf(nf - 1.0) * acc).powf(1.0 / p);
    // one-term tail bound from the decay rate of the outer shells
    let tail = if last_shell > 0.0 && prev_shell > last_shell {
        let rate = (prev_shell / last_shell).ln();
        (omega * delta.powf(nf - 1.0) * last_shell / rate).powf(1.0 / p)
    } else {
        f64::NAN
    };
    (total, tail)
}

/// Lᵖ norm over the half-ball {|y| ≤ ρ₀, t ≥ 0} of a field in the rescaled
/// variable: value(ρ, ξ) at x = ρ ξ, measure δⁿ ρ^{n-1} dρ dξ.
fn volume_norm<F: Fn(&[f64], f64) -> f64>(
    f: F,
    n: Dimension,
    delta: f64,
    p: f64,
    opts: &StudyOptions,
) -> (f64, f64) {
    let nf = n.nf();
    let x_top = opts.rho0 / delta;
    let dirs = sphere_directions(n.n(), opts.directions, opts.seed + 7);
    let (thetas, wts) = gauss_legendre_on(opts.radial_nodes, 0.0, x_top.atan());
    let mut acc = 0.0;
    let mut last_shell = 0.0;
    let mut prev_shell = 0.0;
    for (k, (&th, &wt)) in thetas.iter().zip(&wts).enumerate() {
        let rho = th.tan();
        let jac = 1.0 / (th.cos() * th.cos());
        let mean: f64 = dirs
            .iter()
            .map(|xi| {
                let t = rho * xi[n.n() - 1].abs();
                let z: Vec<f64> = xi[..n.n() - 1].iter().map(|&c| rho * c).collect();
                f(&z, t).abs().powf(p)
            })
            .sum::<f64>()
            / dirs.len() as f64;
        let shell = wt * jac * rho.powf(nf - 1.0) * mean;
        acc += shell;
        if k + 1 == thetas.len() {
            last_shell = shell;
        } else if k + 2 == thetas.len() {
            prev_shell = shell;
        }
    }
    // hemisphere measure: directions are folded into t >= 0, so the full
    // sphere area applies with the |ξ_n| folding already in the sampling
    let omega = sphere_area(n.n() - 1);
    let total = (omega * delta.powf(nf) * acc).powf(1.0 / p);
    let tail = if last_shell > 0.0 && prev_shell > last_shell {
        let rate = (prev_shell / last_shell).ln();
        (omega * delta.powf(nf) * last_shell / rate).powf(1.0 / p)
    } else {
        f64::NAN
    };
    (total, tail)
}

/// Evaluate the four remainder quantities for solved curvature data at one
/// (δ, ε) pair.
pub fn remainder_quantities(
    curv: &CurvatureData,
    sol: &CorrectorSolution,
    delta: f64,
    eps: f64,
    opts: &StudyOptions,
) -> Result<RemainderQuantities> {
    if !(delta > 0.0) || !(eps > 0.0) {
        return Err(Error::ParameterRange(format!(
            "delta and eps must be positive, got ({delta}, {eps})"
        )));
    }
    if sol.curvature_hash != curv.content_hash() {
        return Err(Error::CurvatureHashMismatch {
            sol: sol.curvature_hash,
            curv: curv.content_hash(),
        });
    }
    let n = curv.dimension();
    let nf = n.nf();
    let kappa = boundary_norm_exponent(n, eps);
    let p_int = interior_norm_exponent(n, eps)?;
    let vd = VDeriv::new(sol);
    let u_scale = delta.powf(-(nf - 2.0) / 2.0);
    let m = n.tangential();

    // Q_h: ‖h(y)·(W_δ + δ²V_δ)‖ on the boundary slice
    let (q_h, tail_h) = boundary_norm(
        |r, z| {
            let h = opts.c_h * (delta * r).powf(opts.h_exponent);
            let u = bubble_raw(z, 0.0, nf);
            let v = vd.eval(z, 0.0).v;
            h * u_scale * (u + delta * delta * v)
        },
        n,
        delta,
        kappa,
        opts,
    );

    // Q_bdry: Taylor remainder of the boundary nonlinearity
    let pow = nf / (nf - 2.0);
    let (q_bdry, tail_b) = boundary_norm(
        |_r, z| {
            let u = bubble_raw(z, 0.0, nf);
            let v = vd.eval(z, 0.0).v;
            let full = (u + delta * delta * v).max(0.0).powf(pow);
            let lead = u.powf(pow) + delta * delta * pow * u.powf(pow - 1.0) * v;
            (nf - 2.0) * u_scale.powf(pow) * (full - lead)
        },
        n,
        delta,
        kappa,
        opts,
    );

    // Q_pert: f_ε - f₀ with Λ ≡ 1
    let (q_pert, tail_p) = boundary_norm(
        |_r, z| {
            let u = bubble_raw(z, 0.0, nf);
            let v = vd.eval(z, 0.0).v;
            let base = u_scale * (u + delta * delta * v).max(0.0);
            (nf - 2.0) * (base.powf(pow + eps) - base.powf(pow))
        },
        n,
        delta,
        kappa,
        opts,
    );

    // Q_Δ: interior operator mismatch. The quadratic metric term against the
    // bubble Hessian cancels the corrector right-hand side exactly, leaving
    // the higher metric orders, the corrector's own metric coupling, the
    // metric divergence and the scalar-curvature model.
    let weyl_sq = weyl_norm_sq(curv);
    let a_coef = (nf - 2.0) / (4.0 * (nf - 1.0));
    let (q_delta, tail_d) = volume_norm(
        |z, t| {
            let y_z: Vec<f64> = z.iter().map(|c| c * delta).collect();
            let y_t = t * delta;
            let tail = metric_tail(curv, &y_z, y_t);
            let hess_u = bubble_hessian(z, t, nf);
            let grad_u = bubble_gradient(z, t, nf);
            let ve = vd.eval(z, t);
            let bdiv = metric_divergence(curv, &y_z, y_t);
            let quad_x = crate::curvature::metric_quadratic(curv, z, t);
            let nn = m + 1;

            let mut g = 0.0;
            // metric tail × bubble Hessian (tangential block)
            for i in 0..m {
                for j in 0..m {
                    g += tail[i * m + j] * hess_u[i * nn + j];
                }
            }
            // (g̃ - I) × δ² corrector Hessian: δ²·(δ² quad(x) + tail(δx))
            let d2 = delta * delta;
            for i in 0..m {
                for j in 0..m {
                    g += d2 * (d2 * quad_x[i * m + j] + tail[i * m + j]) * ve.hess_z[i * m + j];
                }
            }
            // metric divergence × gradient: δ b_j(δx) ∂_j(U + δ²v)
            for j in 0..m {
                g += delta * bdiv[j] * (grad_u[j] + d2 * ve.grad_z[j]);
            }
            // scalar-curvature model: the ã·u term scales as
            // δ^{-(n+2)/2}·δ²·ã(δx)·φ(x)
            let r_mod = -weyl_sq / 12.0 * y_z.iter().map(|c| c * c).sum::<f64>()
                + opts.r_scalar_ct * y_t * y_t;
            let u = bubble_raw(z, t, nf);
            g -= d2 * a_coef * r_mod * (u + d2 * ve.v);
            delta.powf(-(nf + 2.0) / 2.0) * g
        },
        n,
        delta,
        p_int,
        opts,
    );

    Ok(RemainderQuantities {
        q_h,
        q_delta,
        q_bdry,
        q_pert,
        tails: [tail_h, tail_d, tail_b, tail_p],
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Scaling study
// ─────────────────────────────────────────────────────────────────────────

/// Per-ε evaluations of the remainder quantities with fitted slopes.
#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub n: Dimension,
    pub lambda: f64,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub rows: Vec<RemainderQuantities>,
    /// Plain power-law fit of the composite bound against ε.
    pub composite_fit: LineFit,
    /// Nested-model comparison detecting a log(ε) correction.
    pub log_test: LogCorrectionTest,
    /// Per-quantity plain fits (q_h, q_delta, q_bdry, q_pert).
    pub quantity_fits: [LineFit; 4],
    /// Log-correction comparison for the perturbation term.
    pub pert_log_test: LogCorrectionTest,
}

impl ScalingStudy {
    pub fn log_correction_detected(&self) -> bool {
        self.log_test.log_correction_detected()
    }
}

/// Build the solver grid used by a scaling study: it must cover the rescaled
/// chart radius ρ₀/δ_min.
pub fn study_grid(rho0: f64, delta_min: f64) -> Result<RadialGrid> {
    let reach = (1.05 * rho0 / delta_min).max(40.0);
    RadialGrid::new(256, 256, reach, reach, 1.04)
}

/// Run the full study over a strictly decreasing ε grid spanning at least
/// three decades.
pub fn scaling_study(
    curv: &CurvatureData,
    lambda: f64,
    eps_grid: &[f64],
    tol: f64,
    opts: &StudyOptions,
) -> Result<ScalingStudy> {
    if eps_grid.len() < 5 {
        return Err(Error::ParameterRange(
            "eps grid needs at least 5 points".into(),
        ));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::ParameterRange("eps grid must strictly decrease".into()));
    }
    let span = eps_grid[0] / eps_grid[eps_grid.len() - 1];
    if span < 999.0 {
        return Err(Error::ParameterRange(format!(
            "eps grid must span at least 3 decades, got {span:.1}x"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::ParameterRange(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let delta_min = lambda * eps_grid[eps_grid.len() - 1].powf(0.25);
    let grid = study_grid(opts.rho0, delta_min)?;
    let sol = solve_corrector(curv, &grid, tol)?;

    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut deltas = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let delta = lambda * eps.powf(0.25);
        deltas.push(delta);
        rows.push(remainder_quantities(curv, &sol, delta, eps, opts)?);
    }

    let lx: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let l_comp: Vec<f64> = rows.iter().map(|r| r.composite().ln()).collect();
    let composite_fit = fit_line(&lx, &l_comp);
    let log_test = detect_log_correction(&lx, &l_comp);

    let fits = [
        rows.iter().map(|r| r.q_h.ln()).collect::<Vec<_>>(),
        rows.iter().map(|r| r.q_delta.ln()).collect::<Vec<_>>(),
        rows.iter().map(|r| r.q_bdry.ln()).collect::<Vec<_>>(),
        rows.iter().map(|r| r.q_pert.ln()).collect::<Vec<_>>(),
    ];
    let quantity_fits = [
        fit_line(&lx, &fits[0]),
        fit_line(&lx, &fits[1]),
        fit_line(&lx, &fits[2]),
        fit_line(&lx, &fits[3]),
    ];
    let pert_log_test = detect_log_correction(&lx, &fits[3]);

    Ok(ScalingStudy {
        n: curv.dimension(),
        lambda,
        eps: eps_grid.to_vec(),
        delta: deltas,
        rows,
        composite_fit,
        log_test,
        quantity_fits,
        pert_log_test,
    })
}

/// Geometric ε grid from `hi` down to `lo` with `count` points.
pub fn geometric_eps_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| hi * (lo / hi).powf(k as f64 / (count - 1) as f64))
        .collect()
}

// ─────────────────────────────────────────────────────────────────────────
// Energy-gap arithmetic
// ─────────────────────────────────────────────────────────────────────────

/// Evaluation of the gap bound ‖φ‖² + C(ε|log ε| + ε^{1/2})‖φ‖ against ε.
#[derive(Debug, Clone, Copy)]
pub struct GapCheck {
    pub bound: f64,
    /// bound / ε: the quantity that must vanish in the limit.
    pub ratio: f64,
}

/// Evaluate the gap bound for a given remainder norm.
pub fn verify_gap(eps: f64, phi_norm: f64, gap_constant: f64) -> Result<GapCheck> {
    if phi_norm < 0.0 {
        return Err(Error::ParameterRange(format!(
            "phi_norm must be nonnegative, got {phi_norm}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::ParameterRange(format!("eps must be positive, got {eps}")));
    }
    let bound = phi_norm * phi_norm
        + gap_constant * (eps * eps.ln().abs() + eps.sqrt()) * phi_norm;
    Ok(GapCheck {
        bound,
        ratio: bound / eps,
    })
}

/// The predicted remainder norm scale: ε^{3/4}, with the logarithmic factor
/// at n = 8.
pub fn predicted_phi_norm(n: Dimension, eps: f64) -> f64 {
    let base = eps.powf(0.75);
    if n.n() == 8 {
        base * (1.0 + eps.ln().abs())
    } else {
        base
    }
}

/// Ratio sequence over an ε grid; reports whether it decreases monotonically.
pub fn gap_ratio_sequence(n: Dimension, eps_grid: &[f64]) -> Result<(Vec<GapCheck>, bool)> {
    let checks: Vec<GapCheck> = eps_grid
        .iter()
        .map(|&e| verify_gap(e, predicted_phi_norm(n, e), 1.0))
        .collect::<Result<_>>()?;
    let monotone = checks.windows(2).all(|w| w[1].ratio < w[0].ratio);
    Ok((checks, monotone))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::random_admissible;

    fn d(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn exponents_reference_values() {
        let n = d(8);
        assert!((s_eps(n, 0.0).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        let (q, r) = nittka_exponents(n, 0.0).unwrap();
        assert!((q - 1.6).abs() < 1e-15); // 2n/(n+2) = 8/5
        assert!(r.abs() < 1e-15);
        assert!(s_eps(n, -0.1).is_err());
        assert!(nittka_exponents(n, -0.1).is_err());
    }

    #[test]
    fn exponent_identities_machine_exact() {
        // 20 deterministic (n, ε) pairs
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in 0..20 {
            let n = d(8 + (k % 5) as u32);
            let eps = 10f64.powf(-4.0 * rnd());
            let (id1, id2) = nittka_identity_deviations(n, eps).unwrap();
            assert!(id1.abs() < 1e-14, "identity 1 off by {id1}");
            assert!(id2.abs() < 1e-14, "identity 2 off by {id2}");
        }
    }

    #[test]
    fn norm_exponents_limits() {
        let n = d(10);
        assert!((boundary_norm_exponent(n, 0.0) - 1.8).abs() < 1e-15);
        assert!((interior_norm_exponent(n, 0.0).unwrap() - 20.0 / 12.0).abs() < 1e-14);
        // ε-dependence strictly increases the boundary exponent
        assert!(boundary_norm_exponent(n, 1e-3) > 1.8);
    }

    #[test]
    fn gap_arithmetic() {
        let n = d(10);
        // φ_norm = ε^{3/4} at ε = 1e-6: ‖φ‖²/ε = ε^{1/2} = 1e-3
        let eps = 1e-6;
        let chk = verify_gap(eps, eps.powf(0.75), 0.0).unwrap();
        assert!((chk.ratio - 1e-3).abs() < 1e-12);
        assert_eq!(verify_gap(eps, 0.0, 1.0).unwrap().bound, 0.0);

        let grid: Vec<f64> = (1..=7).map(|k| 10f64.powi(-(k as i32) - 1)).collect();
        let (checks, monotone) = gap_ratio_sequence(n, &grid).unwrap();
        assert!(monotone, "ratios: {:?}", checks.iter().map(|c| c.ratio).collect::<Vec<_>>());
        assert!(checks.last().unwrap().ratio < 2e-2); // ε^{1/4} term dominates at 1e-8
        // same conclusion with the log-corrected n = 8 norm
        let (checks8, monotone8) = gap_ratio_sequence(d(8), &grid).unwrap();
        assert!(monotone8);
        assert!(checks8.last().unwrap().ratio < checks8[0].ratio);
    }

    #[test]
    fn remainder_quantities_zero_cases() {
        let n = d(8);
        let curv = CurvatureData::zero(n);
        let grid = RadialGrid::new(48, 48, 20.0, 20.0, 1.1).unwrap();
        let sol = solve_corrector(&curv, &grid, 1e-10).unwrap();
        let opts = StudyOptions {
            c_h: 0.0,
            directions: 32,
            radial_nodes: 32,
            ..Default::default()
        };
        let q = remainder_quantities(&curv, &sol, 0.1, 1e-4, &opts).unwrap();
        assert_eq!(q.q_h, 0.0);
        assert!(q.q_delta.abs() < 1e-14, "{}", q.q_delta);
        // the nonlinearity Taylor remainder and the ε-perturbation survive
        // only through U itself
        assert!(q.q_bdry.abs() < 1e-12);
        assert!(q.q_pert > 0.0);

        assert!(remainder_quantities(&curv, &sol, 0.0, 1e-4, &opts).is_err());
        let other = random_admissible(1, 1.0, n).unwrap();
        assert!(remainder_quantities(&other, &sol, 0.1, 1e-4, &opts).is_err());
    }

    #[test]
    fn study_guards() {
        let n = d(8);
        let curv = random_admissible(1, 1.0, n).unwrap();
        let opts = StudyOptions::default();
        // too few points
        assert!(scaling_study(&curv, 0.5, &[1e-2, 1e-3, 1e-4], 1e-10, &opts).is_err());
        // not decreasing
        let bad = vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
        assert!(scaling_study(&curv, 0.5, &bad, 1e-10, &opts).is_err());
        // span too small
        let narrow = geometric_eps_grid(1e-2, 1e-3, 6);
        assert!(scaling_study(&curv, 0.5, &narrow, 1e-10, &opts).is_err());
    }
}
