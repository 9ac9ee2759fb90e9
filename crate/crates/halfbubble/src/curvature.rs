//! Boundary-point curvature data with the full Riemann symmetry set, the
//! polynomial expansion of the inverse metric in boundary-adapted
//! coordinates, and the right-hand side of the corrector equation together
//! with its reduction to radial sectors.
//!
//! Tangential indices run over 0..m with m = n-1. The rank-4 tensor is stored
//! dense row-major in the index order (i, k, j, l), so that the quadratic
//! metric correction reads (1/3) rbar[i,k,j,l] y_k y_l + rnn[i,j] t².

use crate::bubble::Dimension;
use crate::error::{Error, Result};
use crate::hash::Fnv64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Curvature input at the blow-up point: the tangential rank-4 tensor, the
/// normal-sectional symmetric matrix, and optional higher-derivative tensors
/// (all zero unless supplied).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    n: Dimension,
    /// R̄_ikjl, length m⁴, row-major (i,k,j,l).
    rbar: Vec<f64>,
    /// R_ninj, length m².
    rnn: Vec<f64>,
    /// R̄_ikjl,m — length m⁵, (i,k,j,l,m).
    pub rbar_d: Option<Vec<f64>>,
    /// R_ninj,k — length m³, (i,j,k).
    pub rnn_d: Option<Vec<f64>>,
    /// R_ninj,n — length m².
    pub rnn_dn: Option<Vec<f64>>,
    /// R̄_ikjl,mp — length m⁶, (i,k,j,l,m,p).
    pub rbar_dd: Option<Vec<f64>>,
    /// R_ninj,kl — length m⁴, (i,j,k,l).
    pub rnn_dd: Option<Vec<f64>>,
    /// R_ninj,nk — length m³, (i,j,k).
    pub rnn_dnk: Option<Vec<f64>>,
    /// R_ninj,nn — length m².
    pub rnn_dnn: Option<Vec<f64>>,
}

#[inline]
fn idx4(m: usize, i: usize, k: usize, j: usize, l: usize) -> usize {
    ((i * m + k) * m + j) * m + l
}

impl CurvatureData {
    pub fn new(n: Dimension, rbar: Vec<f64>, rnn: Vec<f64>) -> Result<Self> {
        let m = n.tangential();
        if rbar.len() != m * m * m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m * m * m,
                got: rbar.len(),
            });
        }
        if rnn.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: rnn.len(),
            });
        }
        Ok(CurvatureData {
            n,
            rbar,
            rnn,
            rbar_d: None,
            rnn_d: None,
            rnn_dn: None,
            rbar_dd: None,
            rnn_dd: None,
            rnn_dnk: None,
            rnn_dnn: None,
        })
    }

    pub fn zero(n: Dimension) -> Self {
        let m = n.tangential();
        CurvatureData::new(n, vec![0.0; m * m * m * m], vec![0.0; m * m]).unwrap()
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn tangential(&self) -> usize {
        self.n.tangential()
    }

    pub fn rbar(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.rbar[idx4(self.tangential(), i, k, j, l)]
    }

    pub fn rnn(&self, i: usize, j: usize) -> f64 {
        self.rnn[i * self.tangential() + j]
    }

    pub fn rbar_entries(&self) -> &[f64] {
        &self.rbar
    }

    pub fn rnn_entries(&self) -> &[f64] {
        &self.rnn
    }

    pub fn has_higher_tensors(&self) -> bool {
        self.rbar_d.is_some()
            || self.rnn_d.is_some()
            || self.rnn_dn.is_some()
            || self.rbar_dd.is_some()
            || self.rnn_dd.is_some()
            || self.rnn_dnk.is_some()
            || self.rnn_dnn.is_some()
    }

    /// Largest absolute tensor entry, used as the natural scale of the data.
    pub fn magnitude(&self) -> f64 {
        self.rbar
            .iter()
            .chain(self.rnn.iter())
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    /// a·self + b·other, entrywise on all supplied tensors.
    pub fn linear_combination(&self, a: f64, other: &CurvatureData, b: f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n.n(),
                got: other.n.n(),
            });
        }
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(&p, &q)| a * p + b * q).collect()
        };
        CurvatureData::new(self.n, comb(&self.rbar, &other.rbar), comb(&self.rnn, &other.rnn))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.rbar.iter_mut().chain(out.rnn.iter_mut()) {
            *v *= s;
        }
        out
    }

    /// Copy with the rank-4 tensor zeroed, keeping rnn.
    pub fn with_rbar_zeroed(&self) -> Self {
        let mut out = self.clone();
        out.rbar.iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// Content hash over dimension and all tensor bit patterns.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u32(self.n.n() as u32);
        h.write_f64_slice(&self.rbar);
        h.write_f64_slice(&self.rnn);
        for opt in [
            &self.rbar_d,
            &self.rnn_d,
            &self.rnn_dn,
            &self.rbar_dd,
            &self.rnn_dd,
            &self.rnn_dnk,
            &self.rnn_dnn,
        ] {
            match opt {
                Some(v) => {
                    h.write_u32(1);
                    h.write_f64_slice(v);
                }
                None => {
                    h.write_u32(0);
                }
            }
        }
        h.finish()
    }

    /// Simultaneous orthogonal rotation of all tangential indices.
    pub fn rotate_tangential(&self, q: &[f64]) -> Result<Self> {
        let m = self.tangential();
        if q.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: q.len(),
            });
        }
        // rotate rnn: Q rnn Qᵀ
        let mut rnn = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let mut acc = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        acc += q[a * m + i] * q[b * m + j] * self.rnn[i * m + j];
                    }
                }
                rnn[a * m + b] = acc;
            }
        }
        // rotate rbar one index at a time
        let mut cur = self.rbar.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; m * m * m * m];
            for i in 0..m {
                for k in 0..m {
                    for j in 0..m {
                        for l in 0..m {
                            let mut acc = 0.0;
                            for s in 0..m {
                                let src = match slot {
                                    0 => idx4(m, s, k, j, l),
                                    1 => idx4(m, i, s, j, l),
                                    2 => idx4(m, i, k, s, l),
                                    _ => idx4(m, i, k, j, s),
                                };
                                let qrow = match slot {
                                    0 => q[i * m + s],
                                    1 => q[k * m + s],
                                    2 => q[j * m + s],
                                    _ => q[l * m + s],
                                };
                                acc += qrow * cur[src];
                            }
                            next[idx4(m, i, k, j, l)] = acc;
                        }
                    }
                }
            }
            cur = next;
        }
        CurvatureData::new(self.n, cur, rnn)
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Validation
// ─────────────────────────────────────────────────────────────────────────

/// Outcome of the symmetry and trace checks, one entry per property.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// (property name, maximum absolute deviation)
    pub checks: Vec<(&'static str, f64)>,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, dev)| *dev < self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0_f64, |a, (_, d)| a.max(*d))
    }

    pub fn violations(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|(_, d)| *d >= self.tolerance)
            .map(|(name, _)| *name)
            .collect()
    }
}

/// Check antisymmetries, pair symmetry, the first Bianchi identity, the
/// vanishing Ricci traces and the symmetry/tracelessness of rnn.
pub fn validate(curv: &CurvatureData) -> ValidationReport {
    let m = curv.tangential();
    let r = |i, k, j, l| curv.rbar(i, k, j, l);
    let mut anti_ik = 0.0_f64;
    let mut anti_jl = 0.0_f64;
    let mut pair = 0.0_f64;
    let mut bianchi = 0.0_f64;
    for i in 0..m {
        for k in 0..m {
            for j in 0..m {
                for l in 0..m {
                    anti_ik = anti_ik.max((r(i, k, j, l) + r(k, i, j, l)).abs());
                    anti_jl = anti_jl.max((r(i, k, j, l) + r(i, k, l, j)).abs());
                    pair = pair.max((r(i, k, j, l) - r(j, l, i, k)).abs());
                    bianchi = bianchi.max((r(i, k, j, l) + r(i, j, l, k) + r(i, l, k, j)).abs());
                }
            }
        }
    }
    let mut ricci = 0.0_f64;
    for k in 0..m {
        for l in 0..m {
            let tr: f64 = (0..m).map(|i| r(i, k, i, l)).sum();
            ricci = ricci.max(tr.abs());
        }
    }
    let mut rnn_sym = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            rnn_sym = rnn_sym.max((curv.rnn(i, j) - curv.rnn(j, i)).abs());
        }
    }
    let rnn_trace: f64 = (0..m).map(|i| curv.rnn(i, i)).sum::<f64>().abs();

    ValidationReport {
        checks: vec![
            ("rbar antisymmetry (i,k)", anti_ik),
            ("rbar antisymmetry (j,l)", anti_jl),
            ("rbar pair symmetry", pair),
            ("rbar first Bianchi", bianchi),
            ("rbar Ricci trace", ricci),
            ("rnn symmetry", rnn_sym),
            ("rnn trace", rnn_trace),
        ],
        tolerance: 1e-12 * curv.magnitude().max(1.0),
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Random admissible data
// ─────────────────────────────────────────────────────────────────────────

/// Deterministic random curvature data satisfying every invariant of
/// [`validate`]: Riemann-symmetrized, Bianchi-projected, Ricci-free rank-4
/// part plus a symmetric traceless rnn.
pub fn random_admissible(seed: u64, scale: f64, n: Dimension) -> Result<CurvatureData> {
    if !(scale > 0.0) {
        return Err(Error::ParameterRange(format!(
            "curvature scale must be positive, got {scale}"
        )));
    }
    let m = n.tangential();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = vec![0.0; m * m * m * m];
    for v in raw.iter_mut() {
        *v = rng.gen_range(-1.0..1.0) * scale;
    }

    // Antisymmetrize both pairs, then symmetrize under pair interchange.
    let mut sym = vec![0.0; m * m * m * m];
    for i in 0..m {
        for k in 0..m {
            for j in 0..m {
                for l in 0..m {
                    let a = 0.25
                        * (raw[idx4(m, i, k, j, l)] - raw[idx4(m, k, i, j, l)]
                            - raw[idx4(m, i, k, l, j)]
                            + raw[idx4(m, k, i, l, j)]);
                    sym[idx4(m, i, k, j, l)] = a;
                }
            }
        }
    }
    let mut pair = vec![0.0; m * m * m * m];
    for i in 0..m {
        for k in 0..m {
            for j in 0..m {
                for l in 0..m {
                    pair[idx4(m, i, k, j, l)] =
                        0.5 * (sym[idx4(m, i, k, j, l)] + sym[idx4(m, j, l, i, k)]);
                }
            }
        }
    }
    // Bianchi projection: subtract one third of the cyclic sum, which is
    // totally antisymmetric for a tensor with the symmetries above.
    let mut proj = vec![0.0; m * m * m * m];
    for i in 0..m {
        for k in 0..m {
            for j in 0..m {
                for l in 0..m {
                    let cyc = pair[idx4(m, i, k, j, l)]
                        + pair[idx4(m, i, j, l, k)]
                        + pair[idx4(m, i, l, k, j)];
                    proj[idx4(m, i, k, j, l)] = pair[idx4(m, i, k, j, l)] - cyc / 3.0;
                }
            }
        }
    }
    // Remove the Ricci part with a Kulkarni-Nomizu correction (needs m ≥ 3).
    if m >= 3 {
        let mut ric = vec![0.0; m * m];
        for k in 0..m {
            for l in 0..m {
                ric[k * m + l] = (0..m).map(|i| proj[idx4(m, i, k, i, l)]).sum();
            }
        }
        let tr: f64 = (0..m).map(|i| ric[i * m + i]).sum();
        let mf = m as f64;
        let mut h = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                let mut v = ric[a * m + b];
                if a == b {
                    v -= tr / (2.0 * (mf - 1.0));
                }
                h[a * m + b] = v / (mf - 2.0);
            }
        }
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..m {
            for k in 0..m {
                for j in 0..m {
                    for l in 0..m {
                        let kn = h[i * m + j] * delta(k, l) + h[k * m + l] * delta(i, j)
                            - h[i * m + l] * delta(k, j)
                            - h[k * m + j] * delta(i, l);
                        proj[idx4(m, i, k, j, l)] -= kn;
                    }
                }
            }
        }
    } else {
        proj.iter_mut().for_each(|v| *v = 0.0);
    }

    // rnn: symmetric and traceless.
    let mut rnn = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = rng.gen_range(-1.0..1.0) * scale;
            rnn[i * m + j] = v;
            rnn[j * m + i] = v;
        }
    }
    let tr: f64 = (0..m).map(|i| rnn[i * m + i]).sum();
    for i in 0..m {
        rnn[i * m + i] -= tr / m as f64;
    }

    CurvatureData::new(n, proj, rnn)
}

// ─────────────────────────────────────────────────────────────────────────
// Norms
// ─────────────────────────────────────────────────────────────────────────

/// Squared norm of the rank-4 tensor, Σ (entries)².
///
/// At an admissible point every Ricci trace vanishes, so the Weyl projection
/// acts as the identity there; this convention is isolated here so it can be
/// swapped wholesale.
pub fn weyl_norm_sq(curv: &CurvatureData) -> f64 {
    curv.rbar.iter().map(|v| v * v).sum()
}

/// Σ_ij rnn_ij².
pub fn rnn_norm_sq(curv: &CurvatureData) -> f64 {
    curv.rnn.iter().map(|v| v * v).sum()
}

// ─────────────────────────────────────────────────────────────────────────
// Metric expansion
// ─────────────────────────────────────────────────────────────────────────

/// N_ij(y) = Σ_kl rbar[i,k,j,l] y_k y_l, the core contraction of both the
/// quadratic metric term and the corrector right-hand side.
fn contraction_n(curv: &CurvatureData, z: &[f64]) -> Vec<f64> {
    let m = curv.tangential();
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                let zk = z[k];
                if zk == 0.0 {
                    continue;
                }
                for l in 0..m {
                    acc += curv.rbar[idx4(m, i, k, j, l)] * zk * z[l];
                }
            }
            out[i * m + j] = acc;
        }
    }
    out
}

/// Quadratic part of the inverse-metric expansion on the tangential block:
/// (1/3) N_ij(z) + rnn_ij t², returned m×m row-major.
pub fn metric_quadratic(curv: &CurvatureData, z: &[f64], t: f64) -> Vec<f64> {
    let m = curv.tangential();
    let n_c = contraction_n(curv, z);
    let t2 = t * t;
    (0..m * m)
        .map(|p| n_c[p] / 3.0 + curv.rnn[p] * t2)
        .collect()
}

/// Cubic and quartic part of the expansion (everything past the quadratic
/// term), including the curvature-product quartic corrections that are
/// present even when no higher-derivative tensors are supplied.
pub fn metric_tail(curv: &CurvatureData, z: &[f64], t: f64) -> Vec<f64> {
    let m = curv.tangential();
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t2 * t2;
    let n_c = contraction_n(curv, z);
    let mut out = vec![0.0; m * m];

    // (1/15) Σ_s N_is N_js  +  (1/3) Sym_ij(Σ_s N_is rnn_sj) t²  +  (2/3) (rnn²)_ij t⁴
    for i in 0..m {
        for j in 0..m {
            let mut nn = 0.0;
            let mut nr_ij = 0.0;
            let mut nr_ji = 0.0;
            let mut rr = 0.0;
            for s in 0..m {
                nn += n_c[i * m + s] * n_c[j * m + s];
                nr_ij += n_c[i * m + s] * curv.rnn[s * m + j];
                nr_ji += n_c[j * m + s] * curv.rnn[s * m + i];
                rr += curv.rnn[i * m + s] * curv.rnn[s * m + j];
            }
            out[i * m + j] = nn / 15.0 + t2 * (nr_ij + nr_ji) / 6.0 + 2.0 * rr * t4 / 3.0;
        }
    }

    // Optional higher-derivative tensors.
    if let Some(rd) = &curv.rbar_d {
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        for mm in 0..m {
                            acc += rd[(((i * m + k) * m + j) * m + l) * m + mm]
                                * z[k]
                                * z[l]
                                * z[mm];
                        }
                    }
                }
                out[i * m + j] += acc / 6.0;
            }
        }
    }
    if let Some(rk) = &curv.rnn_d {
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += rk[(i * m + j) * m + k] * z[k];
                }
                out[i * m + j] += acc * t2;
            }
        }
    }
    if let Some(rn) = &curv.rnn_dn {
        for p in 0..m * m {
            out[p] += rn[p] * t3 / 3.0;
        }
    }
    if let Some(rdd) = &curv.rbar_dd {
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        for mm in 0..m {
                            for p in 0..m {
                                acc += rdd[((((i * m + k) * m + j) * m + l) * m + mm) * m + p]
                                    * z[k]
                                    * z[l]
                                    * z[mm]
                                    * z[p];
                            }
                        }
                    }
                }
                out[i * m + j] += acc / 20.0;
            }
        }
    }
    if let Some(rdd) = &curv.rnn_dd {
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        acc += rdd[((i * m + j) * m + k) * m + l] * z[k] * z[l];
                    }
                }
                out[i * m + j] += 0.5 * acc * t2;
            }
        }
    }
    if let Some(rk) = &curv.rnn_dnk {
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += rk[(i * m + j) * m + k] * z[k];
                }
                out[i * m + j] += acc * t3 / 3.0;
            }
        }
    }
    if let Some(rn) = &curv.rnn_dnn {
        for p in 0..m * m {
            out[p] += rn[p] * t4 / 12.0;
        }
    }
    out
}

/// Full inverse metric g̃^{ab}(y) as an n×n row-major matrix: identity in the
/// normal row and column, identity plus the polynomial expansion through
/// fourth order on the tangential block.
pub fn metric_inverse(curv: &CurvatureData, z: &[f64], t: f64) -> Vec<f64> {
    let m = curv.tangential();
    let nn = m + 1;
    let quad = metric_quadratic(curv, z, t);
    let tail = metric_tail(curv, z, t);
    let mut g = vec![0.0; nn * nn];
    for i in 0..m {
        for j in 0..m {
            g[i * nn + j] = quad[i * m + j] + tail[i * m + j];
        }
        g[i * nn + i] += 1.0;
    }
    g[nn * nn - 1] = 1.0;
    g
}

/// |det g̃| of the model metric: exactly one by construction.
pub fn metric_det(_z: &[f64], _t: f64) -> f64 {
    1.0
}

/// Mean-curvature model h(y) = c·|y|^p. The base model uses p = 3, matching
/// the vanishing of h and of its first two derivatives at the blow-up point;
/// the exponent is exposed because the remainder estimates effectively use
/// the quadratic envelope (see the asymptotics module).
#[derive(Debug, Clone, Copy)]
pub struct HModel {
    pub coefficient: f64,
    pub exponent: f64,
}

impl Default for HModel {
    fn default() -> Self {
        HModel {
            coefficient: 1.0,
            exponent: 3.0,
        }
    }
}

impl HModel {
    pub fn eval(&self, norm_y: f64) -> f64 {
        self.coefficient * norm_y.powf(self.exponent)
    }
}

/// h(y) with the default cubic model and coefficient c_h.
pub fn mean_curvature_model(z: &[f64], t: f64, c_h: f64) -> f64 {
    let norm = (z.iter().map(|c| c * c).sum::<f64>() + t * t).sqrt();
    HModel {
        coefficient: c_h,
        exponent: 3.0,
    }
    .eval(norm)
}

/// Divergence b_j(y) = Σ_i ∂_i g̃^{ij}(y) over tangential indices.
///
/// With only the base tensors supplied this is evaluated in closed form
/// (derivatives of the quadratic term and of the curvature-product
/// quartics); optional higher-derivative tensors fall back to central
/// differences of [`metric_inverse`].
pub fn metric_divergence(curv: &CurvatureData, z: &[f64], t: f64) -> Vec<f64> {
    if curv.has_higher_tensors() {
        return metric_divergence_fd(curv, z, t);
    }
    let m = curv.tangential();
    let t2 = t * t;
    let n_c = contraction_n(curv, z);
    // D[a][s][i] = ∂_i N_as = Σ_l rbar[a,i,s,l] z_l + Σ_k rbar[a,k,s,i] z_k
    let mut d = vec![0.0; m * m * m];
    for a in 0..m {
        for s in 0..m {
            for i in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += curv.rbar[idx4(m, a, i, s, l)] * z[l];
                    acc += curv.rbar[idx4(m, a, l, s, i)] * z[l];
                }
                d[(a * m + s) * m + i] = acc;
            }
        }
    }
    // E_s = Σ_i D[i][s][i]
    let mut e = vec![0.0; m];
    for s in 0..m {
        e[s] = (0..m).map(|i| d[(i * m + s) * m + i]).sum();
    }
    let mut out = vec![0.0; m];
    for j in 0..m {
        // quadratic term: (1/3) Σ_i ∂_i N_ij
        let mut acc = e[j] / 3.0;
        // quartic product (1/15) Σ_s N_is N_js
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        for s in 0..m {
            p1 += e[s] * n_c[j * m + s];
            for i in 0..m {
                p2 += n_c[i * m + s] * d[(j * m + s) * m + i];
            }
        }
        acc += (p1 + p2) / 15.0;
        // (t²/6)(N·rnn + (N·rnn)ᵀ)
        let mut p3 = 0.0;
        let mut p4 = 0.0;
        for s in 0..m {
            p3 += e[s] * curv.rnn[s * m + j];
            for i in 0..m {
                p4 += d[(j * m + s) * m + i] * curv.rnn[s * m + i];
            }
        }
        acc += t2 * (p3 + p4) / 6.0;
        out[j] = acc;
    }
    out
}

fn metric_divergence_fd(curv: &CurvatureData, z: &[f64], t: f64) -> Vec<f64> {
    let m = curv.tangential();
    let nn = m + 1;
    let h = 1e-5 * (1.0 + z.iter().map(|c| c * c).sum::<f64>().sqrt());
    let mut out = vec![0.0; m];
    let mut zp = z.to_vec();
    for i in 0..m {
        zp[i] = z[i] + h;
        let gp = metric_inverse(curv, &zp, t);
        zp[i] = z[i] - h;
        let gm = metric_inverse(curv, &zp, t);
        zp[i] = z[i];
        for (j, o) in out.iter_mut().enumerate() {
            *o += (gp[i * nn + j] - gm[i * nn + j]) / (2.0 * h);
        }
    }
    out
}

// ─────────────────────────────────────────────────────────────────────────
// Corrector right-hand side and sector decomposition
// ─────────────────────────────────────────────────────────────────────────

/// Right-hand side of the corrector equation at y:
/// [ (1/3) R̄_ikjl z_k z_l + R_ninj t² ] ∂²_ij U(y), tangential contraction
/// with the closed-form Hessian of the bubble.
pub fn rhs_corrector(curv: &CurvatureData, z: &[f64], t: f64) -> f64 {
    let m = curv.tangential();
    let nf = curv.n.nf();
    let quad = metric_quadratic(curv, z, t);
    let hess = crate::bubble::bubble_hessian(z, t, nf);
    let nn = m + 1;
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += quad[i * m + j] * hess[i * nn + j];
        }
    }
    acc
}

/// Canonical radial profiles appearing in the sector reduction. All are
/// functions of (r, t) through s = (1+t)² + r².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// s^{-n/2}
    SPow,
    /// t² s^{-(n+2)/2}
    T2SPow,
    /// r² s^{-n/2}
    R2SPow,
    /// t² s^{-n/2}
    T2SPowLow,
    /// r² t² s^{-(n+2)/2}
    R2T2SPow,
}

impl ProfileKind {
    pub fn eval(&self, r: f64, t: f64, nf: f64) -> f64 {
        let s = (1.0 + t) * (1.0 + t) + r * r;
        match self {
            ProfileKind::SPow => s.powf(-nf / 2.0),
            ProfileKind::T2SPow => t * t * s.powf(-(nf + 2.0) / 2.0),
            ProfileKind::R2SPow => r * r * s.powf(-nf / 2.0),
            ProfileKind::T2SPowLow => t * t * s.powf(-nf / 2.0),
            ProfileKind::R2T2SPow => r * r * t * t * s.powf(-(nf + 2.0) / 2.0),
        }
    }

    pub fn tag(&self) -> u32 {
        match self {
            ProfileKind::SPow => 1,
            ProfileKind::T2SPow => 2,
            ProfileKind::R2SPow => 3,
            ProfileKind::T2SPowLow => 4,
            ProfileKind::R2T2SPow => 5,
        }
    }
}

/// One quadratic-harmonic sector: v-contribution T_ij z_i z_j · w(r,t) whose
/// right-hand side is T_ij z_i z_j · Σ coef·profile(r,t).
#[derive(Debug, Clone)]
pub struct QuadSector {
    /// Traceless symmetric m×m matrix.
    pub tensor: Vec<f64>,
    pub terms: Vec<(ProfileKind, f64)>,
}

/// Reduction of [`rhs_corrector`] to harmonic sectors: quadratic sectors
/// T_ij z_i z_j h(r,t) plus an isotropic remainder h₀(r,t).
#[derive(Debug, Clone)]
pub struct SectorDecomposition {
    pub n: Dimension,
    pub quad_sectors: Vec<QuadSector>,
    /// Isotropic right-hand side as profile terms.
    pub iso_terms: Vec<(ProfileKind, f64)>,
}

impl SectorDecomposition {
    /// Pointwise reconstruction of the right-hand side from the sectors.
    pub fn reconstruct(&self, z: &[f64], t: f64) -> f64 {
        let nf = self.n.nf();
        let m = self.n.tangential();
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for sector in &self.quad_sectors {
            let mut tzz = 0.0;
            for i in 0..m {
                for j in 0..m {
                    tzz += sector.tensor[i * m + j] * z[i] * z[j];
                }
            }
            let h: f64 = sector.terms.iter().map(|(k, c)| c * k.eval(r, t, nf)).sum();
            acc += tzz * h;
        }
        let h0: f64 = self.iso_terms.iter().map(|(k, c)| c * k.eval(r, t, nf)).sum();
        acc + h0
    }

    pub fn is_empty(&self) -> bool {
        self.quad_sectors.is_empty() && self.iso_terms.is_empty()
    }
}

/// Decompose the corrector right-hand side into harmonic sectors.
///
/// Requires data whose rank-4 part is antisymmetric in (i,k) — guaranteed by
/// [`validate`]-passing input — so that the quartic contraction
/// R̄_ikjl z_i z_k z_j z_l vanishes identically and degree-2 sectors suffice.
pub fn sector_decompose(curv: &CurvatureData) -> SectorDecomposition {
    let m = curv.tangential();
    let mf = m as f64;
    let nf = curv.n.nf();
    let scale = curv.magnitude().max(1e-300);
    let drop_tol = 1e-13 * scale;

    // ric̄_kl = Σ_i rbar[i,k,i,l]
    let mut ric = vec![0.0; m * m];
    for k in 0..m {
        for l in 0..m {
            ric[k * m + l] = (0..m).map(|i| curv.rbar(i, k, i, l)).sum();
        }
    }
    let ric_tr: f64 = (0..m).map(|i| ric[i * m + i]).sum();
    let mut ric0 = ric.clone();
    for i in 0..m {
        ric0[i * m + i] -= ric_tr / mf;
    }
    let rnn_tr: f64 = (0..m).map(|i| curv.rnn(i, i)).sum();
    let mut rnn0 = curv.rnn.clone();
    for i in 0..m {
        rnn0[i * m + i] -= rnn_tr / mf;
    }

    let mut quad_sectors = Vec::new();
    let maxabs = |v: &[f64]| v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));

    if maxabs(&ric0) > drop_tol {
        quad_sectors.push(QuadSector {
            tensor: ric0,
            terms: vec![(ProfileKind::SPow, -(nf - 2.0) / 3.0)],
        });
    }
    if maxabs(&rnn0) > drop_tol {
        quad_sectors.push(QuadSector {
            tensor: rnn0,
            terms: vec![(ProfileKind::T2SPow, nf * (nf - 2.0))],
        });
    }

    let mut iso_terms = Vec::new();
    if ric_tr.abs() > drop_tol {
        iso_terms.push((ProfileKind::R2SPow, -(nf - 2.0) / 3.0 * ric_tr / mf));
    }
    if rnn_tr.abs() > drop_tol {
        iso_terms.push((ProfileKind::T2SPowLow, -(nf - 2.0) * rnn_tr));
        iso_terms.push((ProfileKind::R2T2SPow, nf * (nf - 2.0) * rnn_tr / mf));
    }

    SectorDecomposition {
        n: curv.n,
        quad_sectors,
        iso_terms,
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Small symmetric eigen-helper
// ─────────────────────────────────────────────────────────────────────────

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[f64], m: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * m);
    let mut w = a.to_vec();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..m {
            for q in p + 1..m {
                off += w[p * m + q] * w[p * m + q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = w[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = w[p * m + p];
                let aqq = w[q * m + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = w[k * m + p];
                    let akq = w[k * m + q];
                    w[k * m + p] = c * akp - s * akq;
                    w[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = w[p * m + k];
                    let aqk = w[q * m + k];
                    w[p * m + k] = c * apk - s * aqk;
                    w[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| w[i * m + i]).collect()
}

/// Largest |eigenvalue| of a small symmetric matrix.
pub fn spectral_radius(a: &[f64], m: usize) -> f64 {
    symmetric_eigenvalues(a, m)
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
}

/// Largest sampled radius ρ up to which the inverse metric stays positive
/// definite, by an increasing scan over direction samples (the curvature
/// quartics are positive semidefinite, so positivity can return at large
/// radius; the scan reports the first loss). Capped at 100.
pub fn spd_radius(curv: &CurvatureData) -> f64 {
    let n = curv.dimension().n();
    let dirs = crate::quad::sphere_directions(n, 48, 11);
    let m = curv.tangential();
    let spd_at = |rho: f64| {
        dirs.iter().all(|d| {
            let t = rho * d[n - 1].abs();
            let z: Vec<f64> = d[..n - 1].iter().map(|&c| rho * c).collect();
            let g = metric_inverse(curv, &z, t);
            // tangential block eigenvalues (normal row is identity)
            let mut block = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    block[i * m + j] = g[i * n + j];
                }
            }
            symmetric_eigenvalues(&block, m).iter().all(|&l| l > 0.0)
        })
    };
    let mut last_good = 0.0;
    let mut rho = 0.05;
    while rho <= 100.0 {
        if !spd_at(rho) {
            return last_good;
        }
        last_good = rho;
        rho *= 1.06;
    }
    100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn zero_data_validates() {
        let c = CurvatureData::zero(d(8));
        assert!(validate(&c).passed());
        assert_eq!(weyl_norm_sq(&c), 0.0);
        assert_eq!(rnn_norm_sq(&c), 0.0);
    }

    #[test]
    fn constructed_violation_is_reported() {
        let n = d(8);
        let m = n.tangential();
        let mut rbar = vec![0.0; m * m * m * m];
        // single entry with no antisymmetric partner: rbar_{1213} = 1
        rbar[idx4(m, 0, 1, 0, 2)] = 1.0;
        let c = CurvatureData::new(n, rbar, vec![0.0; m * m]).unwrap();
        let report = validate(&c);
        assert!(!report.passed());
        assert!(report.violations().contains(&"rbar antisymmetry (i,k)"));
    }

    #[test]
    fn random_admissible_is_deterministic_and_valid() {
        let n = d(8);
        let a = random_admissible(7, 1.0, n).unwrap();
        let b = random_admissible(7, 1.0, n).unwrap();
        assert_eq!(a, b);
        assert!(random_admissible(7, 0.0, n).is_err());
        for seed in 0..100 {
            let c = random_admissible(seed, 1.0, n).unwrap();
            let report = validate(&c);
            assert!(report.passed(), "seed {seed}: {:?}", report.checks);
        }
        // Ricci traces within 1e-13
        let c = random_admissible(3, 1.0, n).unwrap();
        let m = n.tangential();
        for k in 0..m {
            for l in 0..m {
                let tr: f64 = (0..m).map(|i| c.rbar(i, k, i, l)).sum();
                assert!(tr.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn norms_scale_quadratically_and_match_enumeration() {
        let n = d(8);
        let c = random_admissible(5, 1.0, n).unwrap();
        let s = 3.0;
        let cs = c.scaled(s);
        assert!((weyl_norm_sq(&cs) - s * s * weyl_norm_sq(&c)).abs() < 1e-10 * weyl_norm_sq(&cs));
        assert!((rnn_norm_sq(&cs) - s * s * rnn_norm_sq(&c)).abs() < 1e-10 * rnn_norm_sq(&cs));

        // canonical 2-plane block vs an independently written index sum
        let m = n.tangential();
        let mut rbar = vec![0.0; m * m * m * m];
        let kappa = 2.5;
        for (i, k, j, l, sign) in [
            (0usize, 1usize, 0usize, 1usize, 1.0),
            (1, 0, 1, 0, 1.0),
            (0, 1, 1, 0, -1.0),
            (1, 0, 0, 1, -1.0),
        ] {
            rbar[idx4(m, i, k, j, l)] = sign * kappa;
        }
        let block = CurvatureData::new(n, rbar.clone(), vec![0.0; m * m]).unwrap();
        let brute: f64 = rbar.iter().map(|v| v * v).sum();
        assert_eq!(weyl_norm_sq(&block), brute);
        assert_eq!(brute, 4.0 * kappa * kappa);
    }

    #[test]
    fn metric_inverse_identity_cases() {
        let n = d(8);
        let c = random_admissible(1, 1.0, n).unwrap();
        let m = n.tangential();
        let nn = n.n();
        // y = 0 → identity
        let g = metric_inverse(&c, &vec![0.0; m], 0.0);
        for a in 0..nn {
            for b in 0..nn {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_eq!(g[a * nn + b], expect);
            }
        }
        // zero curvature → identity everywhere
        let z0 = CurvatureData::zero(n);
        let g = metric_inverse(&z0, &[0.3, -0.5, 0.7, 0.1, 0.0, 0.2, -0.4], 0.9);
        for a in 0..nn {
            for b in 0..nn {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_eq!(g[a * nn + b], expect);
            }
        }
    }

    #[test]
    fn metric_quadratic_matches_bruteforce_contraction() {
        let n = d(8);
        let c = random_admissible(2, 1.0, n).unwrap();
        let m = n.tangential();
        let z = [0.4, -0.2, 0.9, 0.3, -0.7, 0.5, 0.1];
        let t = 0.6;
        let quad = metric_quadratic(&c, &z, t);
        // independent loop-over-indices oracle
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        acc += c.rbar(i, k, j, l) * z[k] * z[l] / 3.0;
                    }
                }
                acc += c.rnn(i, j) * t * t;
                assert!((quad[i * m + j] - acc).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn metric_det_and_h_model() {
        assert_eq!(metric_det(&[1.0, 2.0], 3.0), 1.0);
        assert_eq!(mean_curvature_model(&[0.0; 7], 0.0, 1.0), 0.0);
        // h(y)/|y|³ constant
        let c_h = 0.7;
        for &(r, t) in &[(0.5_f64, 0.1_f64), (2.0, 1.0), (0.0, 3.0)] {
            let z = [r, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            let norm = (r * r + t * t).sqrt();
            let ratio = mean_curvature_model(&z, t, c_h) / norm.powi(3);
            assert!((ratio - c_h).abs() < 1e-12);
        }
    }

    #[test]
    fn rhs_vanishes_in_the_degenerate_cases() {
        let n = d(8);
        let m = n.tangential();
        // zero curvature → 0 everywhere
        let z0 = CurvatureData::zero(n);
        assert_eq!(rhs_corrector(&z0, &[0.1; 7], 0.4), 0.0);

        // rnn-only on the z = 0 axis: isotropic Hessian against traceless rnn
        let mut c = random_admissible(9, 1.0, n).unwrap();
        for v in c.rbar.iter_mut() {
            *v = 0.0;
        }
        for &t in &[0.0, 0.5, 2.0] {
            let v = rhs_corrector(&c, &vec![0.0; m], t);
            assert!(v.abs() < 1e-13, "axis value {v}");
        }

        // admissible rbar-only data: Ricci-trace and antisymmetry annihilate
        // both Hessian parts at every point
        let mut c = random_admissible(11, 1.0, n).unwrap();
        for v in c.rnn.iter_mut() {
            *v = 0.0;
        }
        let mut state = 99u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..20 {
            let z: Vec<f64> = (0..m).map(|_| rnd()).collect();
            let t = rnd().abs();
            let v = rhs_corrector(&c, &z, t);
            assert!(v.abs() < 1e-12, "rbar-only rhs {v}");
        }
    }

    #[test]
    fn rhs_is_linear_in_curvature() {
        let n = d(8);
        let c1 = random_admissible(21, 1.0, n).unwrap();
        let c2 = random_admissible(22, 1.0, n).unwrap();
        let comb = c1.linear_combination(2.0, &c2, -0.5).unwrap();
        let m = n.tangential();
        let z: Vec<f64> = (0..m).map(|i| 0.3 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = 0.7;
        let lhs = rhs_corrector(&comb, &z, t);
        let rhs = 2.0 * rhs_corrector(&c1, &z, t) - 0.5 * rhs_corrector(&c2, &z, t);
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn sector_decomposition_reconstructs_rhs() {
        let n = d(8);
        // zero → empty
        assert!(sector_decompose(&CurvatureData::zero(n)).is_empty());

        // rnn-only: single sector with T = rnn
        let mut c = random_admissible(31, 1.0, n).unwrap();
        for v in c.rbar.iter_mut() {
            *v = 0.0;
        }
        let dec = sector_decompose(&c);
        assert_eq!(dec.quad_sectors.len(), 1);
        assert!(dec.iso_terms.is_empty());
        let sector = &dec.quad_sectors[0];
        for (a, b) in sector.tensor.iter().zip(c.rnn.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(sector.terms.len(), 1);
        assert_eq!(sector.terms[0].0, ProfileKind::T2SPow);

        // random admissible: pointwise match with rhs_corrector
        let m = n.tangential();
        for seed in [41u64, 42, 43] {
            let c = random_admissible(seed, 1.0, n).unwrap();
            let dec = sector_decompose(&c);
            let mut state = seed.wrapping_mul(77);
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            };
            for _ in 0..30 {
                let z: Vec<f64> = (0..m).map(|_| rnd()).collect();
                let t = rnd().abs();
                let want = rhs_corrector(&c, &z, t);
                let got = dec.reconstruct(&z, t);
                assert!(
                    (want - got).abs() < 1e-12 * want.abs().max(1.0),
                    "seed {seed}: {want} vs {got}"
                );
            }
        }

        // non-admissible but symmetric data exercises the isotropic terms:
        // take rnn with a trace.
        let mut c = CurvatureData::zero(n);
        for i in 0..m {
            c.rnn[i * m + i] = 0.5 + 0.1 * i as f64;
            for j in 0..i {
                c.rnn[i * m + j] = 0.05 * (i + j) as f64;
                c.rnn[j * m + i] = c.rnn[i * m + j];
            }
        }
        let dec = sector_decompose(&c);
        assert!(!dec.iso_terms.is_empty());
        let z = [0.4, -0.6, 0.2, 0.8, -0.1, 0.3, 0.5];
        for &t in &[0.0, 0.4, 1.3] {
            let want = rhs_corrector(&c, &z, t);
            let got = dec.reconstruct(&z, t);
            assert!((want - got).abs() < 1e-12 * want.abs().max(1.0), "{want} vs {got}");
        }
    }

    #[test]
    fn norms_invariant_under_rotation() {
        let n = d(8);
        let m = n.tangential();
        let c = random_admissible(55, 1.0, n).unwrap();
        // Givens rotation in the (0, 3) tangential plane
        let mut q = vec![0.0; m * m];
        for i in 0..m {
            q[i * m + i] = 1.0;
        }
        let (cth, sth) = (0.6_f64, 0.8_f64);
        q[0] = cth;
        q[3] = -sth;
        q[3 * m] = sth;
        q[3 * m + 3] = cth;
        let cr = c.rotate_tangential(&q).unwrap();
        assert!((weyl_norm_sq(&cr) - weyl_norm_sq(&c)).abs() < 1e-10 * weyl_norm_sq(&c));
        assert!((rnn_norm_sq(&cr) - rnn_norm_sq(&c)).abs() < 1e-10 * rnn_norm_sq(&c));
        // rotation preserves admissibility
        assert!(validate(&cr).passed());
    }

    #[test]
    fn spd_radius_is_positive_and_sharp_enough() {
        let n = d(8);
        let c = random_admissible(2, 1.0, n).unwrap();
        let rho = spd_radius(&c);
        assert!(rho > 0.1, "unit-scale data should be SPD near the origin");
        // check SPD strictly inside
        let m = n.tangential();
        let dirs = crate::quad::sphere_directions(n.n(), 16, 3);
        for d in &dirs {
            let t = 0.9 * rho * d[n.n() - 1].abs();
            let z: Vec<f64> = d[..m].iter().map(|&c| 0.9 * rho * c).collect();
            let g = metric_inverse(&c, &z, t);
            let mut block = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    block[i * m + j] = g[i * n.n() + j];
                }
            }
            assert!(symmetric_eigenvalues(&block, m).iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn analytic_divergence_matches_finite_differences() {
        let n = d(8);
        let c = random_admissible(13, 1.0, n).unwrap();
        let z = [0.5, -0.3, 0.8, 0.1, -0.6, 0.2, 0.4];
        let t = 0.7;
        let analytic = metric_divergence(&c, &z, t);
        let fd = metric_divergence_fd(&c, &z, t);
        for (a, b) in analytic.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn content_hash_tracks_changes() {
        let n = d(8);
        let a = random_admissible(1, 1.0, n).unwrap();
        let b = random_admissible(2, 1.0, n).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
