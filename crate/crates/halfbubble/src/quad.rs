//! Quadrature machinery: adaptive Simpson on finite intervals, half-line
//! integrals through the tangent substitution, tensor-product rules for the
//! 2D reduced integrals, and a Halton-based quasi-random sampler for the
//! high-dimensional cross checks.

use crate::special::inv_norm_cdf;

/// Adaptive Simpson quadrature on [a, b] with absolute tolerance `tol`.
///
/// The interval is first split into fixed panels so a sparse initial sample
/// cannot alias a peaked integrand into premature acceptance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 12;
    let width = (b - a) / PANELS as f64;
    let mut acc = 0.0;
    for p in 0..PANELS {
        let pa = a + p as f64 * width;
        let pb = pa + width;
        let fa = f(pa);
        let fb = f(pb);
        let m = 0.5 * (pa + pb);
        let fm = f(m);
        let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        acc += simpson_rec(f, pa, pb, fa, fm, fb, whole, tol / PANELS as f64, 50);
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// ∫_0^∞ f(r) dr via r = scale·tan θ, θ ∈ [0, π/2).
///
/// `scale` should sit near the integrand's peak: a peak at r ≫ scale maps
/// into a sliver at the far end of the θ interval and can be aliased past
/// the initial samples of the adaptive rule.
pub fn integrate_halfline_scaled<F: Fn(f64) -> f64>(f: &F, scale: f64, tol: f64) -> f64 {
    let g = |theta: f64| {
        let c = theta.cos();
        if c < 1e-12 {
            return 0.0;
        }
        let r = scale * theta.tan();
        scale * f(r) / (c * c)
    };
    adaptive_simpson(&g, 0.0, std::f64::consts::FRAC_PI_2, tol)
}

/// ∫_0^∞ f(r) dr via r = tan θ.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    integrate_halfline_scaled(f, 1.0, tol)
}

/// ∫_0^R f(r) dr via the same substitution (finite upper limit).
pub fn integrate_to<F: Fn(f64) -> f64>(f: &F, upper: f64, tol: f64) -> f64 {
    let g = |theta: f64| {
        let c = theta.cos();
        if c < 1e-12 {
            return 0.0;
        }
        let r = theta.tan();
        f(r) / (c * c)
    };
    adaptive_simpson(&g, 0.0, upper.atan(), tol)
}

/// Nested 2D integral ∫_0^∞ dt ∫_0^∞ dr f(r, t), adaptive in both directions.
///
/// The inner absolute tolerance shrinks with the outer substitution's
/// jacobian 1 + t², which would otherwise amplify inner noise near the far
/// end of the mapped interval; the inner substitution is rescaled by 1 + t,
/// where the kernels treated here concentrate.
pub fn integrate_quadrant<F: Fn(f64, f64) -> f64>(f: &F, tol: f64) -> f64 {
    let outer = |t: f64| {
        integrate_halfline_scaled(&|r| f(r, t), 1.0 + t, tol * 1e-2 / (1.0 + t * t))
    };
    integrate_halfline(&outer, tol)
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial (no tables, deterministic).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// Deterministic Halton sequence in `dim` dimensions (bases: first primes).
/// `offset` skips the initial, most correlated points.
pub struct Halton {
    bases: Vec<u64>,
    index: u64,
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

impl Halton {
    pub fn new(dim: usize, offset: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension too large");
        Halton {
            bases: PRIMES[..dim].to_vec(),
            index: offset + 1,
        }
    }

    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        let b = base as f64;
        while i > 0 {
            f /= b;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }

    /// Next point in (0,1)^dim.
    pub fn next_point(&mut self, out: &mut [f64]) {
        for (k, &b) in self.bases.iter().enumerate() {
            let u = Self::radical_inverse(self.index, b);
            // keep strictly inside (0,1) for the inverse-CDF transforms
            out[k] = u.clamp(1e-12, 1.0 - 1e-12);
        }
        self.index += 1;
    }
}

/// `count` quasi-random unit vectors in R^dim: Halton points pushed through
/// the inverse normal CDF and normalized. `offset` decorrelates streams.
pub fn sphere_directions(dim: usize, count: usize, offset: u64) -> Vec<Vec<f64>> {
    let mut hal = Halton::new(dim, 31 + offset);
    let mut u = vec![0.0; dim];
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        hal.next_point(&mut u);
        let g: Vec<f64> = u.iter().map(|&ui| inv_norm_cdf(ui)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            dirs.push(g.iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_is_exact() {
        let f = |x: f64| 3.0 * x * x;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn halfline_matches_known_integral() {
        // ∫_0^∞ dr/(1+r²)² = π/4
        let v = integrate_halfline(&|r| (1.0 + r * r).powi(-2), 1e-12);
        assert!((v - std::f64::consts::PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn quadrant_product_integrand() {
        // ∫∫ e^{-r-t} = 1
        let v = integrate_quadrant(&|r, t| (-r - t).exp(), 1e-10);
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gauss_legendre_degree_exactness() {
        let (x, w) = gauss_legendre_on(8, 0.0, 1.0);
        // 8-point rule integrates degree 15 exactly: ∫_0^1 x^15 = 1/16
        let v: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(15)).sum();
        assert!((v - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn halton_fills_unit_cube() {
        let mut h = Halton::new(2, 0);
        let mut p = [0.0; 2];
        let mut mean = [0.0; 2];
        for _ in 0..1000 {
            h.next_point(&mut p);
            mean[0] += p[0];
            mean[1] += p[1];
        }
        assert!((mean[0] / 1000.0 - 0.5).abs() < 0.01);
        assert!((mean[1] / 1000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        let a = sphere_directions(7, 16, 5);
        let b = sphere_directions(7, 16, 5);
        assert_eq!(a, b);
        for d in &a {
            let n: f64 = d.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
