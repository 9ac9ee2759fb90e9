//! Numerical solution of the corrector problem on the half-space.
//!
//! The corrector v solves -Δv = rhs with the Robin condition
//! ∂v/∂t = -n U^{2/(n-2)} v on t = 0 and algebraic decay at infinity. The
//! right-hand side decomposes into harmonic sectors T_ij z_i z_j h(r,t) plus
//! an isotropic part (see [`crate::curvature::sector_decompose`]), and
//! substituting v = T_ij z_i z_j w(r,t) with traceless T reduces each sector
//! to the 2D problem
//!
//! ```text
//! -[ w_rr + ((n+2)/r) w_r + w_tt ] = h(r, t),      w_t(r,0) = -n/(1+r²) w(r,0),
//! ```
//!
//! the trace term cancelling against the tracelessness of T (verified against
//! a brute-force n-dimensional Laplacian in the tests). The isotropic sector
//! carries the plain radial coefficient (n-2)/r. Discretization is
//! second-order conservative finite differences on the stretched grid; the
//! Robin condition enters through a ghost-node elimination so the t = 0 row
//! stays a PDE row (a one-sided boundary row resonates with the weighted
//! radial stencil near the corner and admits spurious grid-scale modes).
//! Linear solves are ILU(0)-BiCGStab, all deterministic.
//!
//! Profiles are solved once per canonical right-hand side and reused: the
//! admissible-data right-hand side is always a multiple of the same profile,
//! so repeated curvature draws cost one linear solve in total.

mod grid;
mod sparse;

pub use grid::{FarField, RadialGrid};
pub use sparse::{bicgstab, Csr, Ilu0};

use crate::bubble::{kernel_dilation_radial, Dimension, HalfSpacePoint};
use crate::curvature::{sector_decompose, CurvatureData, ProfileKind};
use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::hash::Fnv64;
use crate::special::sphere_area;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Angular moment over S^{n-2} ⊂ R^{n-1}:
/// ∫ (Aωω)(Bωω) dω = pair_factor(n) · A:B for traceless symmetric A, B.
pub(crate) fn angular_pair_factor(n: Dimension) -> f64 {
    let m = (n.n() - 1) as f64;
    2.0 * sphere_area(n.n() - 2) / (m * (m + 2.0))
}

/// ∫ (Aωω) dω = trace_factor(n) · tr A.
pub(crate) fn angular_trace_factor(n: Dimension) -> f64 {
    sphere_area(n.n() - 2) / (n.n() as f64 - 1.0)
}

fn frob_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

// ─────────────────────────────────────────────────────────────────────────
// Reduced 2D solver
// ─────────────────────────────────────────────────────────────────────────

/// Assemble the reduced operator for harmonic degree `ell` (0 or 2): radial
/// flux form with weight r^{2ℓ+n-2}, ghost-eliminated Robin condition in the
/// t = 0 row, far-field closure per the grid.
pub fn assemble_operator(g: &RadialGrid, n: Dimension, ell: usize) -> Csr {
    let nf = n.nf();
    let c = 2.0 * ell as f64 + nf - 2.0;
    let rho = |r: f64| r.powf(c);
    let nr = g.n_r;
    let nt = g.n_t;
    let decay_power = nf - 4.0 + ell as f64;
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * nr * nt);

    // t = 0 row: the PDE with w_tt through a ghost node at -Δt₀, the ghost
    // value eliminated via the centered Robin condition
    // (w_1 - w_ghost)/(2Δt₀) = -q(r) w_0, q(r) = n/(1+r²):
    //   -w_tt|₀ = [2(1 - Δt₀ q) w_0 - 2 w_1]/Δt₀²  (+ inhomogeneity in b).
    let d0 = g.t_nodes[1] - g.t_nodes[0];
    for j in 0..nr {
        let r = g.r_centers[j];
        let q = nf / (1.0 + r * r);
        let row = g.index(j, 0);
        let volw = g.r_cell_weight(j, c);
        let aw = if j == 0 {
            0.0
        } else {
            rho(g.r_edges[j]) / ((g.r_centers[j] - g.r_centers[j - 1]) * volw)
        };
        let (ae, east_col) = if j + 1 < nr {
            (
                rho(g.r_edges[j + 1]) / ((g.r_centers[j + 1] - g.r_centers[j]) * volw),
                Some(g.index(j + 1, 0)),
            )
        } else {
            (
                rho(g.r_edges[nr]) / ((g.r_edges[nr] - g.r_centers[j]) * volw),
                None,
            )
        };
        let mut diag = aw + ae + 2.0 * (1.0 - d0 * q) / (d0 * d0);
        if let Some(col) = east_col {
            trip.push((row, col, -ae));
        } else if g.far_field == FarField::AlgebraicDecay {
            let fac = (g.r_edges[nr] / g.r_centers[j]).powf(-decay_power);
            diag -= ae * fac;
        }
        if j > 0 {
            trip.push((row, g.index(j - 1, 0), -aw));
        }
        trip.push((row, g.index(j, 1), -2.0 / (d0 * d0)));
        trip.push((row, row, diag));
    }

    for i in 1..nt {
        let d_im = g.t_nodes[i] - g.t_nodes[i - 1];
        let d_ip = g.t_nodes[i + 1] - g.t_nodes[i];
        let am = 2.0 / (d_im * (d_im + d_ip));
        let ap = 2.0 / (d_ip * (d_im + d_ip));
        let a0 = -2.0 / (d_im * d_ip);
        for j in 0..nr {
            let row = g.index(j, i);
            let volw = g.r_cell_weight(j, c);
            let aw = if j == 0 {
                0.0 // weighted flux vanishes at r = 0
            } else {
                rho(g.r_edges[j]) / ((g.r_centers[j] - g.r_centers[j - 1]) * volw)
            };
            let (ae, east_col) = if j + 1 < nr {
                (
                    rho(g.r_edges[j + 1]) / ((g.r_centers[j + 1] - g.r_centers[j]) * volw),
                    Some(g.index(j + 1, i)),
                )
            } else {
                (
                    rho(g.r_edges[nr]) / ((g.r_edges[nr] - g.r_centers[j]) * volw),
                    None,
                )
            };
            let mut diag = aw + ae - a0;
            if let Some(col) = east_col {
                trip.push((row, col, -ae));
            } else if g.far_field == FarField::AlgebraicDecay {
                let fac = (g.r_edges[nr] / g.r_centers[j]).powf(-decay_power);
                diag -= ae * fac;
            }
            if j > 0 {
                trip.push((row, g.index(j - 1, i), -aw));
            }
            trip.push((row, g.index(j, i - 1), -am));
            if i + 1 < nt {
                trip.push((row, g.index(j, i + 1), -ap));
            } else if g.far_field == FarField::AlgebraicDecay {
                let rj = g.r_centers[j];
                let rho_in = (rj * rj + (1.0 + g.t_nodes[i]) * (1.0 + g.t_nodes[i])).sqrt();
                let rho_out = (rj * rj + (1.0 + g.t_max) * (1.0 + g.t_max)).sqrt();
                let fac = (rho_out / rho_in).powf(-decay_power);
                diag -= ap * fac;
            }
            trip.push((row, row, diag));
        }
    }
    Csr::from_triplets(nr * nt, trip)
}

/// Right-hand side vector: every row carries h(r, t); the t = 0 rows pick up
/// the ghost-elimination term -2 g(r)/Δt₀ from the Robin inhomogeneity
/// w_t(r,0) + q(r) w(r,0) = g(r) (g ≡ 0 for the corrector itself).
pub fn assemble_rhs<H, G>(g: &RadialGrid, h: H, robin_g: G) -> Vec<f64>
where
    H: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut b = vec![0.0; g.unknowns()];
    let d0 = g.t_nodes[1] - g.t_nodes[0];
    for j in 0..g.n_r {
        let r = g.r_centers[j];
        b[g.index(j, 0)] = h(r, 0.0) - 2.0 * robin_g(r) / d0;
    }
    for i in 1..g.n_t {
        for j in 0..g.n_r {
            b[g.index(j, i)] = h(g.r_centers[j], g.t_nodes[i]);
        }
    }
    b
}

/// One reduced 2D solve. Returns (profile, iterations, relative residual).
pub fn solve_reduced<H, G>(
    g: &RadialGrid,
    n: Dimension,
    ell: usize,
    h: H,
    robin_g: G,
    tol: f64,
) -> Result<(Vec<f64>, usize, f64)>
where
    H: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::ParameterRange(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let a = assemble_operator(g, n, ell);
    let b = assemble_rhs(g, &h, &robin_g);
    if b.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; g.unknowns()], 0, 0.0));
    }
    let ilu = Ilu0::factor(&a)?;
    bicgstab(&a, &b, &ilu, tol, 20_000)
}

// ─────────────────────────────────────────────────────────────────────────
// Canonical profile cache
// ─────────────────────────────────────────────────────────────────────────

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct CanonicalKey {
    kind_tag: u32,
    ell: usize,
    n: usize,
    grid_hash: u64,
    tol_bits: u64,
}

struct CanonicalProfile {
    w: Vec<f64>,
    iterations: usize,
}

fn canonical_cache() -> &'static Mutex<HashMap<CanonicalKey, Arc<CanonicalProfile>>> {
    static CACHE: OnceLock<Mutex<HashMap<CanonicalKey, Arc<CanonicalProfile>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn canonical_solve(
    kind: ProfileKind,
    ell: usize,
    g: &RadialGrid,
    n: Dimension,
    tol: f64,
) -> Result<Arc<CanonicalProfile>> {
    let key = CanonicalKey {
        kind_tag: kind.tag(),
        ell,
        n: n.n(),
        grid_hash: g.content_hash(),
        tol_bits: tol.to_bits(),
    };
    if let Some(hit) = canonical_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let nf = n.nf();
    let (w, iterations, _residual) =
        solve_reduced(g, n, ell, |r, t| kind.eval(r, t, nf), |_| 0.0, tol)?;
    let prof = Arc::new(CanonicalProfile { w, iterations });
    canonical_cache().lock().unwrap().insert(key, prof.clone());
    Ok(prof)
}

// ─────────────────────────────────────────────────────────────────────────
// Corrector solution
// ─────────────────────────────────────────────────────────────────────────

/// One solved quadratic-harmonic sector: contributes T_ij z_i z_j · w(r,t).
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedQuadSector {
    pub tensor: Vec<f64>,
    pub terms: Vec<(ProfileKind, f64)>,
    pub w: Vec<f64>,
}

/// Solved isotropic sector: contributes w0(r,t).
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedIso {
    pub terms: Vec<(ProfileKind, f64)>,
    pub w0: Vec<f64>,
}

/// Sector-decomposed numerical corrector with residual and orthogonality
/// metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSolution {
    pub n: Dimension,
    pub grid: RadialGrid,
    pub quad_sectors: Vec<SolvedQuadSector>,
    pub iso: Option<SolvedIso>,
    /// Relative Euclidean residual of the PDE rows under the discrete operator.
    pub residual_interior: f64,
    /// Relative residual of the Robin rows.
    pub residual_boundary: f64,
    /// ⟨v, j_b⟩ over the half-space for b = 1..n, after projection. The
    /// tangential entries vanish identically by parity (odd angular moments);
    /// the dilation entry is measured on the grid.
    pub defects: Vec<f64>,
    pub curvature_hash: u64,
    pub tol: f64,
    pub iterations: usize,
}

/// Solve the corrector problem for validated curvature data.
pub fn solve_corrector(
    curv: &CurvatureData,
    grid: &RadialGrid,
    tol: f64,
) -> Result<CorrectorSolution> {
    if !(tol > 0.0) {
        return Err(Error::ParameterRange(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = curv.dimension();
    let nf = n.nf();
    let dec = sector_decompose(curv);

    let mut iterations = 0usize;
    let mut quad_sectors = Vec::new();
    for sector in &dec.quad_sectors {
        let mut w = vec![0.0; grid.unknowns()];
        for &(kind, coef) in &sector.terms {
            let prof = canonical_solve(kind, 2, grid, n, tol)?;
            iterations += prof.iterations;
            for (acc, &v) in w.iter_mut().zip(prof.w.iter()) {
                *acc += coef * v;
            }
        }
        quad_sectors.push(SolvedQuadSector {
            tensor: sector.tensor.clone(),
            terms: sector.terms.clone(),
            w,
        });
    }
    let mut iso = if dec.iso_terms.is_empty() {
        None
    } else {
        let mut w0 = vec![0.0; grid.unknowns()];
        for &(kind, coef) in &dec.iso_terms {
            let prof = canonical_solve(kind, 0, grid, n, tol)?;
            iterations += prof.iterations;
            for (acc, &v) in w0.iter_mut().zip(prof.w.iter()) {
                *acc += coef * v;
            }
        }
        Some(SolvedIso {
            terms: dec.iso_terms.clone(),
            w0,
        })
    };

    // Residuals of the combined profiles under the discrete operator.
    let mut res_int: f64 = 0.0;
    let mut res_bdy: f64 = 0.0;
    {
        let mut check = |ell: usize, w: &[f64], terms: &[(ProfileKind, f64)]| {
            let a = assemble_operator(grid, n, ell);
            let b = assemble_rhs(
                grid,
                |r, t| terms.iter().map(|(k, c)| c * k.eval(r, t, nf)).sum(),
                |_| 0.0,
            );
            let mut ax = vec![0.0; grid.unknowns()];
            a.matvec(w, &mut ax);
            let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let mut ri = 0.0;
            let mut rb = 0.0;
            for i in 0..grid.n_t {
                for j in 0..grid.n_r {
                    let k = grid.index(j, i);
                    let e = ax[k] - b[k];
                    if i == 0 {
                        rb += e * e;
                    } else {
                        ri += e * e;
                    }
                }
            }
            res_int = res_int.max(ri.sqrt() / bnorm);
            res_bdy = res_bdy.max(rb.sqrt() / bnorm);
        };
        for s in &quad_sectors {
            check(2, &s.w, &s.terms);
        }
        if let Some(i) = &iso {
            check(0, &i.w0, &i.terms);
        }
    }

    // Orthogonality: project the dilation mode j_n out of the isotropic
    // sector (the only sector with a nonzero angular overlap), then record
    // the defects. Tangential kernel elements are odd in z while v carries
    // even harmonics only, so those inner products vanish identically.
    let jn: Vec<f64> = {
        let mut v = vec![0.0; grid.unknowns()];
        for i in 0..grid.n_t {
            for j in 0..grid.n_r {
                v[grid.index(j, i)] =
                    kernel_dilation_radial(grid.r_centers[j], grid.t_nodes[i], nf);
            }
        }
        v
    };
    let noise_cut = (grid.r_max.min(grid.t_max) / 5.0).clamp(12.0, 32.0);
    let jn_sq = {
        let prod: Vec<f64> = jn.iter().map(|v| v * v).collect();
        grid.integrate_within(&prod, nf - 2.0, noise_cut)
    };
    let trace_w = angular_trace_factor(n);
    let omega = sphere_area(n.n() - 2);
    let m = n.tangential();
    let defect_n = |quad_sectors: &[SolvedQuadSector], iso: &Option<SolvedIso>| -> f64 {
        let mut acc = 0.0;
        for s in quad_sectors {
            let tr: f64 = (0..m).map(|d| s.tensor[d * m + d]).sum();
            let prod: Vec<f64> = s.w.iter().zip(&jn).map(|(&a, &b)| a * b).collect();
            acc += trace_w * tr * grid.integrate_within(&prod, nf, noise_cut); // r² · r^{n-2}
        }
        if let Some(i) = iso {
            let prod: Vec<f64> = i.w0.iter().zip(&jn).map(|(&a, &b)| a * b).collect();
            acc += omega * grid.integrate_within(&prod, nf - 2.0, noise_cut);
        }
        acc
    };
    let pre = defect_n(&quad_sectors, &iso);
    if let Some(isec) = iso.as_mut() {
        let c = pre / (omega * jn_sq);
        for (w, &j) in isec.w0.iter_mut().zip(jn.iter()) {
            *w -= c * j;
        }
    }
    let post = defect_n(&quad_sectors, &iso);
    let mut defects = vec![0.0; n.n()];
    defects[n.n() - 1] = post;

    Ok(CorrectorSolution {
        n,
        grid: grid.clone(),
        quad_sectors,
        iso,
        residual_interior: res_int,
        residual_boundary: res_bdy,
        defects,
        curvature_hash: curv.content_hash(),
        tol,
        iterations,
    })
}

impl CorrectorSolution {
    /// Reconstruct v at a half-space point.
    pub fn eval(&self, y: &HalfSpacePoint) -> Result<f64> {
        let m = self.n.tangential();
        if y.z().len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y.z().len(),
            });
        }
        let r = y.radius();
        let t = y.t();
        let mut acc = 0.0;
        for s in &self.quad_sectors {
            let mut tzz = 0.0;
            for i in 0..m {
                for j in 0..m {
                    tzz += s.tensor[i * m + j] * y.z()[i] * y.z()[j];
                }
            }
            acc += tzz * self.grid.interp(&s.w, r, t)?;
        }
        if let Some(i) = &self.iso {
            acc += self.grid.interp(&i.w0, r, t)?;
        }
        Ok(acc)
    }

    /// Rescaled family (v)_δ(y) = δ^{-(n-2)/2} v(y/δ).
    pub fn eval_family(&self, delta: f64, y: &HalfSpacePoint) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::ParameterRange(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let inner =
            HalfSpacePoint::new(y.z().iter().map(|c| c / delta).collect(), y.t() / delta)?;
        Ok(delta.powf(-(self.n.nf() - 2.0) / 2.0) * self.eval(&inner)?)
    }

    /// L²-norm of v via the sector reduction, evaluated inside the noise
    /// cut (at n = 8 the full-space L² norm is logarithmically divergent
    /// anyway, so the radius is part of the definition).
    pub fn norm_l2(&self) -> f64 {
        let n = self.n;
        let pairw = angular_pair_factor(n);
        let trw = angular_trace_factor(n);
        let omega = sphere_area(n.n() - 2);
        let m = n.tangential();
        let nf = n.nf();
        let cut = self.noise_cut();
        let mut acc = 0.0;
        for a in 0..self.quad_sectors.len() {
            for b in 0..self.quad_sectors.len() {
                let sa = &self.quad_sectors[a];
                let sb = &self.quad_sectors[b];
                let prod: Vec<f64> = sa.w.iter().zip(&sb.w).map(|(&x, &y)| x * y).collect();
                acc += pairw
                    * frob_dot(&sa.tensor, &sb.tensor)
                    * self.grid.integrate_within(&prod, nf + 2.0, cut);
            }
        }
        if let Some(i) = &self.iso {
            let prod: Vec<f64> = i.w0.iter().map(|&x| x * x).collect();
            acc += omega * self.grid.integrate_within(&prod, nf - 2.0, cut);
            for s in &self.quad_sectors {
                let tr: f64 = (0..m).map(|d| s.tensor[d * m + d]).sum();
                let prod: Vec<f64> = s.w.iter().zip(&i.w0).map(|(&x, &y)| x * y).collect();
                acc += 2.0 * trw * tr * self.grid.integrate_within(&prod, nf, cut);
            }
        }
        acc.max(0.0).sqrt()
    }

    /// ∫ v Δv over the half-space, through the identity Δv = -rhs.
    pub fn v_laplacian_v(&self) -> f64 {
        let n = self.n;
        let nf = n.nf();
        let pairw = angular_pair_factor(n);
        let trw = angular_trace_factor(n);
        let omega = sphere_area(n.n() - 2);
        let m = n.tangential();
        let h_on_grid = |terms: &[(ProfileKind, f64)]| -> Vec<f64> {
            let mut out = vec![0.0; self.grid.unknowns()];
            for i in 0..self.grid.n_t {
                for j in 0..self.grid.n_r {
                    let r = self.grid.r_centers[j];
                    let t = self.grid.t_nodes[i];
                    out[self.grid.index(j, i)] =
                        terms.iter().map(|(k, c)| c * k.eval(r, t, nf)).sum();
                }
            }
            out
        };
        let mut acc = 0.0;
        for a in &self.quad_sectors {
            for b in &self.quad_sectors {
                let hb = h_on_grid(&b.terms);
                let prod: Vec<f64> = a.w.iter().zip(&hb).map(|(&x, &y)| x * y).collect();
                acc -=
                    pairw * frob_dot(&a.tensor, &b.tensor) * self.grid.integrate(&prod, nf + 2.0);
            }
        }
        if let Some(i) = &self.iso {
            let h0 = h_on_grid(&i.terms);
            let prod: Vec<f64> = i.w0.iter().zip(&h0).map(|(&x, &y)| x * y).collect();
            acc -= omega * self.grid.integrate(&prod, nf - 2.0);
            for s in &self.quad_sectors {
                let tr: f64 = (0..m).map(|d| s.tensor[d * m + d]).sum();
                let hs = h_on_grid(&s.terms);
                let p1: Vec<f64> = s.w.iter().zip(&h0).map(|(&x, &y)| x * y).collect();
                let p2: Vec<f64> = i.w0.iter().zip(&hs).map(|(&x, &y)| x * y).collect();
                acc -= trw * tr * (self.grid.integrate(&p1, nf) + self.grid.integrate(&p2, nf));
            }
        }
        acc
    }

    /// ∫ v Δv through the Green identity
    /// -∫|∇v|² + n ∫_{t=0} U^{2/(n-2)} v² dz, with grid gradients.
    /// Independent of [`Self::v_laplacian_v`] up to discretization error.
    pub fn v_laplacian_v_green(&self) -> f64 {
        let n = self.n;
        let nf = n.nf();
        let pairw = angular_pair_factor(n);
        let omega = sphere_area(n.n() - 2);
        let m = n.tangential();
        let mf = m as f64;
        let cut2 = self.noise_cut() * self.noise_cut();
        let mut grad_sq = 0.0;

        // With v = (Tzz) w:  ∇v = 2w·(Tz) + (Tzz)(w_r r̂ + w_t t̂), so
        // |∇v|² = 4 w² |Tz|² + (4/r) w w_r (Tzz)² + (w_r² + w_t²)(Tzz)²
        // (using ẑ·Tz = (Tzz)/r), and the angular moments reduce to
        // ∫|Tω|² = Ω|T|²/m and ∫(Tωω)² = pair_factor·|T|².
        for s in &self.quad_sectors {
            let t_sq = frob_dot(&s.tensor, &s.tensor);
            let (wr, wt) = self.grid_gradients(&s.w);
            let g = &self.grid;
            let mut i_ww = 0.0; //   ∫ w²       r^{n}   (from 4w²|Tz|²: r² · r^{n-2})
            let mut i_wwr = 0.0; //  ∫ w w_r    r^{n+1} (from (4/r)(Tzz)² w w_r: r⁴/r · r^{n-2})
            let mut i_grad = 0.0; // ∫ (∇w)²    r^{n+2}
            for i in 0..g.n_t {
                let tw = g.t_weight(i);
                for j in 0..g.n_r {
                    if g.r_centers[j] * g.r_centers[j] + g.t_nodes[i] * g.t_nodes[i] > cut2 {
                        continue;
                    }
                    let k = g.index(j, i);
                    i_ww += s.w[k] * s.w[k] * g.r_cell_weight(j, nf) * tw;
                    i_wwr += s.w[k] * wr[k] * g.r_cell_weight(j, nf + 1.0) * tw;
                    i_grad += (wr[k] * wr[k] + wt[k] * wt[k]) * g.r_cell_weight(j, nf + 2.0) * tw;
                }
            }
            let e2 = omega * t_sq / mf;
            let e4 = pairw * t_sq;
            grad_sq += 4.0 * e2 * i_ww + 4.0 * e4 * i_wwr + e4 * i_grad;
        }
        if let Some(iso) = &self.iso {
            let (wr, wt) = self.grid_gradients(&iso.w0);
            let g = &self.grid;
            let mut i_grad = 0.0;
            for i in 0..g.n_t {
                let tw = g.t_weight(i);
                for j in 0..g.n_r {
                    if g.r_centers[j] * g.r_centers[j] + g.t_nodes[i] * g.t_nodes[i] > cut2 {
                        continue;
                    }
                    let k = g.index(j, i);
                    i_grad += (wr[k] * wr[k] + wt[k] * wt[k]) * g.r_cell_weight(j, nf - 2.0) * tw;
                }
            }
            grad_sq += omega * i_grad;
        }

        let mut bdy = 0.0;
        for a in &self.quad_sectors {
            for b in &self.quad_sectors {
                let g = &self.grid;
                let val = g.integrate_boundary(
                    |j| {
                        let r = g.r_centers[j];
                        if r * r > cut2 {
                            return 0.0;
                        }
                        a.w[g.index(j, 0)] * b.w[g.index(j, 0)] / (1.0 + r * r)
                    },
                    nf + 2.0,
                );
                bdy += pairw * frob_dot(&a.tensor, &b.tensor) * val;
            }
        }
        if let Some(iso) = &self.iso {
            let g = &self.grid;
            let val = g.integrate_boundary(
                |j| {
                    let r = g.r_centers[j];
                    if r * r > cut2 {
                        return 0.0;
                    }
                    let w = iso.w0[g.index(j, 0)];
                    w * w / (1.0 + r * r)
                },
                nf - 2.0,
            );
            bdy += omega * val;
        }
        -grad_sq + nf * bdy
    }

    /// The boundary-restricted form ∫_{t=0} v Δv dz, reported for
    /// transparency next to the volume integral (the right-hand-side
    /// profiles carry t² factors, so this is typically a structural zero).
    pub fn v_laplacian_v_boundary_form(&self) -> f64 {
        let n = self.n;
        let nf = n.nf();
        let pairw = angular_pair_factor(n);
        let trw = angular_trace_factor(n);
        let omega = sphere_area(n.n() - 2);
        let m = n.tangential();
        let g = &self.grid;
        let h_at = |terms: &[(ProfileKind, f64)], r: f64| -> f64 {
            terms.iter().map(|(k, c)| c * k.eval(r, 0.0, nf)).sum()
        };
        let mut acc = 0.0;
        for a in &self.quad_sectors {
            for b in &self.quad_sectors {
                let val = g.integrate_boundary(
                    |j| a.w[g.index(j, 0)] * h_at(&b.terms, g.r_centers[j]),
                    nf + 2.0,
                );
                acc -= pairw * frob_dot(&a.tensor, &b.tensor) * val;
            }
            if let Some(iso) = &self.iso {
                let tr: f64 = (0..m).map(|d| a.tensor[d * m + d]).sum();
                let val = g.integrate_boundary(
                    |j| a.w[g.index(j, 0)] * h_at(&iso.terms, g.r_centers[j]),
                    nf,
                );
                acc -= trw * tr * val;
            }
        }
        if let Some(iso) = &self.iso {
            let val = g.integrate_boundary(
                |j| iso.w0[g.index(j, 0)] * h_at(&iso.terms, g.r_centers[j]),
                nf - 2.0,
            );
            acc -= omega * val;
        }
        acc
    }

    /// ∫_{t=0} U^{n/(n-2)} v dz.
    pub fn u_v_boundary_integral(&self) -> f64 {
        let n = self.n;
        let nf = n.nf();
        let trw = angular_trace_factor(n);
        let omega = sphere_area(n.n() - 2);
        let m = n.tangential();
        let g = &self.grid;
        let upow = |r: f64| (1.0 + r * r).powf(-nf / 2.0);
        let mut acc = 0.0;
        for s in &self.quad_sectors {
            let tr: f64 = (0..m).map(|d| s.tensor[d * m + d]).sum();
            let val = g.integrate_boundary(|j| s.w[g.index(j, 0)] * upow(g.r_centers[j]), nf);
            acc += trw * tr * val;
        }
        if let Some(iso) = &self.iso {
            let val =
                g.integrate_boundary(|j| iso.w0[g.index(j, 0)] * upow(g.r_centers[j]), nf - 2.0);
            acc += omega * val;
        }
        acc
    }

    /// Nonuniform centered gradients of a grid profile (one-sided at edges).
    pub(crate) fn grid_gradients(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut wr = vec![0.0; w.len()];
        let mut wt = vec![0.0; w.len()];
        for i in 0..g.n_t {
            for j in 0..g.n_r {
                let k = g.index(j, i);
                wr[k] = deriv_nonuniform(|jj| w[g.index(jj, i)], |jj| g.r_centers[jj], j, g.n_r);
                wt[k] = deriv_nonuniform(|ii| w[g.index(j, ii)], |ii| g.t_nodes[ii], i, g.n_t);
            }
        }
        (wr, wt)
    }

    /// Radius beyond which weighted functionals would amplify solver noise:
    /// the tail of the profile falls under the relative solve tolerance well
    /// before the truncation edge, and the r^{n+2} weights blow the noise up.
    fn noise_cut(&self) -> f64 {
        // Lower clamp: the profile tail beyond 12 is negligible in every
        // weighted functional. Upper clamp: past ~32 the ρ^{-6}-type decay
        // meets the relative solve tolerance and values are unreliable no
        // matter how large the domain is.
        (self.grid.r_max.min(self.grid.t_max) / 5.0).clamp(12.0, 32.0)
    }

    /// Decay-exponent fits for |∇^τ v|, τ = 0, 1, 2, on thin shells at
    /// dyadic radii (sup of the reconstruction over each shell against
    /// ln(1 + ρ), matching the (1 + |y|)-power form of the bound). Radii are
    /// capped at the noise cut; below three usable shells the fit is NaN.
    pub fn decay_exponents(&self) -> Vec<f64> {
        let g = &self.grid;
        let m = self.n.tangential();
        let spectral: Vec<f64> = self
            .quad_sectors
            .iter()
            .map(|s| crate::curvature::spectral_radius(&s.tensor, m))
            .collect();
        let mut grads = Vec::new();
        let mut hess = Vec::new();
        for s in &self.quad_sectors {
            let (wr, wt) = self.grid_gradients(&s.w);
            let (wrr, wrt) = self.grid_gradients(&wr);
            let (_, wtt) = self.grid_gradients(&wt);
            grads.push((wr, wt));
            hess.push((wrr, wrt, wtt));
        }
        let iso_parts = self.iso.as_ref().map(|iso| {
            let (wr, wt) = self.grid_gradients(&iso.w0);
            let (wrr, wrt) = self.grid_gradients(&wr);
            let (_, wtt) = self.grid_gradients(&wt);
            (wr, wt, wrr, wrt, wtt)
        });

        let rho_top = self.noise_cut();
        let mut radii = Vec::new();
        let mut rho = 2.0;
        while rho <= rho_top {
            radii.push(rho);
            rho *= 2.0;
        }
        if radii.len() > 3 {
            radii.drain(..radii.len() - 3);
        }

        let mut out = Vec::new();
        for tau in 0..3usize {
            let mut lx = Vec::new();
            let mut ly = Vec::new();
            for &rho in &radii {
                let mut sup = 0.0_f64;
                for i in 0..g.n_t {
                    for j in 0..g.n_r {
                        let r = g.r_centers[j];
                        let t = g.t_nodes[i];
                        let rr = (r * r + t * t).sqrt();
                        if rr < rho || rr >= rho * 1.07 {
                            continue;
                        }
                        let k = g.index(j, i);
                        let mut val = 0.0;
                        for (sidx, s) in self.quad_sectors.iter().enumerate() {
                            let lam = spectral[sidx];
                            let w = s.w[k];
                            let (wr, wt) = (grads[sidx].0[k], grads[sidx].1[k]);
                            let (wrr, wrt, wtt) =
                                (hess[sidx].0[k], hess[sidx].1[k], hess[sidx].2[k]);
                            val += match tau {
                                0 => lam * r * r * w.abs(),
                                1 => lam * (2.0 * r * w.abs() + r * r * (wr.abs() + wt.abs())),
                                _ => {
                                    lam * (2.0 * w.abs()
                                        + 4.0 * r * (wr.abs() + wt.abs())
                                        + r * r * (wrr.abs() + wrt.abs() + wtt.abs()))
                                }
                            };
                        }
                        if let (Some(iso), Some((wr, wt, wrr, wrt, wtt))) =
                            (&self.iso, iso_parts.as_ref())
                        {
                            val += match tau {
                                0 => iso.w0[k].abs(),
                                1 => wr[k].abs() + wt[k].abs(),
                                _ => wrr[k].abs() + wrt[k].abs() + wtt[k].abs(),
                            };
                        }
                        sup = sup.max(val);
                    }
                }
                if sup > 0.0 {
                    lx.push((1.0 + rho).ln());
                    ly.push(sup.ln());
                }
            }
            if lx.len() >= 3 {
                out.push(fit_line(&lx, &ly).slope);
            } else {
                out.push(f64::NAN);
            }
        }
        out
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u32(self.n.n() as u32);
        h.write_u64(self.grid.content_hash());
        h.write_u64(self.curvature_hash);
        h.write_f64(self.tol);
        for s in &self.quad_sectors {
            h.write_f64_slice(&s.tensor);
            for (k, c) in &s.terms {
                h.write_u32(k.tag()).write_f64(*c);
            }
            h.write_f64_slice(&s.w);
        }
        if let Some(i) = &self.iso {
            for (k, c) in &i.terms {
                h.write_u32(k.tag()).write_f64(*c);
            }
            h.write_f64_slice(&i.w0);
        }
        h.finish()
    }
}

fn deriv_nonuniform(f: impl Fn(usize) -> f64, x: impl Fn(usize) -> f64, i: usize, len: usize) -> f64 {
    if len < 2 {
        return 0.0;
    }
    if i == 0 {
        (f(1) - f(0)) / (x(1) - x(0))
    } else if i + 1 == len {
        (f(i) - f(i - 1)) / (x(i) - x(i - 1))
    } else {
        let hm = x(i) - x(i - 1);
        let hp = x(i + 1) - x(i);
        (f(i + 1) * hm * hm + f(i) * (hp * hp - hm * hm) - f(i - 1) * hp * hp)
            / (hm * hp * (hm + hp))
    }
}

/// Report produced by [`check_properties`].
#[derive(Debug, Clone)]
pub struct PropertyReport {
    /// ∫_{t=0} U^{n/(n-2)} v dz.
    pub uvq_integral: f64,
    /// L² norm of v over the half-space.
    pub v_norm: f64,
    /// ∫ v Δv over the half-space (volume form, used by the energy module).
    pub v_lap_v: f64,
    /// The literal boundary-restricted integral, reported alongside.
    pub v_lap_v_boundary_form: f64,
    /// Green-identity route to the same volume integral.
    pub v_lap_v_green: f64,
    /// Fitted decay exponents for τ = 0, 1, 2 (expected 4 - τ - n).
    pub decay_exponents: Vec<f64>,
    /// True when the solution is identically zero and the entries above are
    /// degenerate.
    pub zero_solution: bool,
}

/// Verify the qualitative properties of a solved corrector.
pub fn check_properties(sol: &CorrectorSolution) -> PropertyReport {
    let zero = sol
        .quad_sectors
        .iter()
        .all(|s| s.w.iter().all(|&v| v == 0.0))
        && sol
            .iso
            .as_ref()
            .map(|i| i.w0.iter().all(|&v| v == 0.0))
            .unwrap_or(true);
    if zero {
        return PropertyReport {
            uvq_integral: 0.0,
            v_norm: 0.0,
            v_lap_v: 0.0,
            v_lap_v_boundary_form: 0.0,
            v_lap_v_green: 0.0,
            decay_exponents: vec![f64::NAN; 3],
            zero_solution: true,
        };
    }
    PropertyReport {
        uvq_integral: sol.u_v_boundary_integral(),
        v_norm: sol.norm_l2(),
        v_lap_v: sol.v_laplacian_v(),
        v_lap_v_boundary_form: sol.v_laplacian_v_boundary_form(),
        v_lap_v_green: sol.v_laplacian_v_green(),
        decay_exponents: sol.decay_exponents(),
        zero_solution: false,
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Convergence studies
// ─────────────────────────────────────────────────────────────────────────

/// Max-norm error of the reduced solver against the manufactured solution
/// w(r,t) = exp(-(r² + t²)/4), with matching right-hand side and Robin
/// inhomogeneity. The gaussian is numerically zero at the truncation edges,
/// so the far-field closure does not pollute the measurement.
pub fn manufactured_error(g: &RadialGrid, n: Dimension, ell: usize, tol: f64) -> Result<f64> {
    let nf = n.nf();
    let c = 2.0 * ell as f64 + nf - 2.0;
    let w_ex = |r: f64, t: f64| (-(r * r + t * t) / 4.0).exp();
    let h = move |r: f64, t: f64| -> f64 {
        let w = w_ex(r, t);
        -w * ((r * r + t * t) / 4.0 - 1.0 - c / 2.0)
    };
    let robin_g = move |r: f64| -> f64 {
        // w_t(r,0) + n/(1+r²)·w(r,0); w_t(r,0) = 0 for the gaussian
        nf / (1.0 + r * r) * w_ex(r, 0.0)
    };
    let (w, _, _) = solve_reduced(g, n, ell, h, robin_g, tol)?;
    let mut errfield = vec![0.0; g.unknowns()];
    for i in 0..g.n_t {
        for j in 0..g.n_r {
            errfield[g.index(j, i)] = w[g.index(j, i)] - w_ex(g.r_centers[j], g.t_nodes[i]);
        }
    }
    // The isotropic operator carries the dilation mode as (near-)kernel; the
    // continuous problem fixes that component only through the later
    // orthogonality projection, so measure the error modulo it.
    if ell == 0 {
        let jn: Vec<f64> = (0..g.unknowns())
            .map(|k| {
                let (i, j) = (k / g.n_r, k % g.n_r);
                kernel_dilation_radial(g.r_centers[j], g.t_nodes[i], nf)
            })
            .collect();
        let prod: Vec<f64> = errfield.iter().zip(&jn).map(|(&a, &b)| a * b).collect();
        let jn2: Vec<f64> = jn.iter().map(|&a| a * a).collect();
        let alpha = g.integrate(&prod, nf - 2.0) / g.integrate(&jn2, nf - 2.0);
        for (e, &j) in errfield.iter_mut().zip(&jn) {
            *e -= alpha * j;
        }
    }
    Ok(errfield.iter().fold(0.0_f64, |acc, &e| acc.max(e.abs())))
}

/// Observed convergence order from manufactured-solution errors on a grid,
/// its 2× refinement and its 4× refinement.
pub fn manufactured_order(base: &RadialGrid, n: Dimension, ell: usize, tol: f64) -> Result<f64> {
    let e1 = manufactured_error(base, n, ell, tol)?;
    let e2 = manufactured_error(&base.refined(2)?, n, ell, tol)?;
    let e4 = manufactured_error(&base.refined(4)?, n, ell, tol)?;
    Ok(((e1 / e2).ln() / 2.0_f64.ln() + (e2 / e4).ln() / 2.0_f64.ln()) / 2.0)
}

/// Richardson order of the sector functional ∫∫ w h r^{n+2} under grid
/// refinement N → 2N → 4N, for the canonical admissible-data profile.
pub fn richardson_order(base: &RadialGrid, n: Dimension, tol: f64) -> Result<f64> {
    let nf = n.nf();
    let functional = |g: &RadialGrid| -> Result<f64> {
        let prof = canonical_solve(ProfileKind::T2SPow, 2, g, n, tol)?;
        let mut prod = vec![0.0; g.unknowns()];
        for i in 0..g.n_t {
            for j in 0..g.n_r {
                let k = g.index(j, i);
                prod[k] = prof.w[k] * ProfileKind::T2SPow.eval(g.r_centers[j], g.t_nodes[i], nf);
            }
        }
        Ok(g.integrate(&prod, nf + 2.0))
    };
    let f1 = functional(base)?;
    let f2 = functional(&base.refined(2)?)?;
    let f4 = functional(&base.refined(4)?)?;
    Ok(((f1 - f2) / (f2 - f4)).abs().ln() / 2.0_f64.ln())
}

#[cfg(test)]
mod tests;
