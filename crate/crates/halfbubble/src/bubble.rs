//! The standard bubble on the half-space, its rescaled family and the kernel
//! of the linearized boundary problem, all in closed form.
//!
//! Throughout, a point of the closed half-space is y = (z, t) with z the
//! n-1 tangential coordinates and t ≥ 0 the normal coordinate. Writing
//! x = (z, 1 + t), the bubble is
//!
//! ```text
//! U(z, t) = [(1+t)² + |z|²]^{-(n-2)/2} = |x|^{-(n-2)},
//! ```
//!
//! i.e. the fundamental solution of the Laplacian centred at (z, t) = (0, -1),
//! which sits outside the closed half-space. Hence U is harmonic on t ≥ 0 and
//! satisfies ∂U/∂t = -(n-2) U^{n/(n-2)} on t = 0. The derivatives below are
//! hand-derived from the |x|-power form; a finite-difference cross check lives
//! in [`fd`].

use crate::error::{Error, Result};

/// Ambient dimension n ≥ 3. The main-theorem studies additionally need n ≥ 8,
/// enforced by the operations that rely on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Dimension(n))
    }

    pub fn n(&self) -> usize {
        self.0 as usize
    }

    pub fn nf(&self) -> f64 {
        self.0 as f64
    }

    /// Number of tangential coordinates, n - 1.
    pub fn tangential(&self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point y = (z, t) of the closed half-space, t ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    z: Vec<f64>,
    t: f64,
}

impl HalfSpacePoint {
    pub fn new(z: Vec<f64>, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::InvalidDomain(format!("t must be >= 0, got {t}")));
        }
        if !t.is_finite() || z.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite coordinate".into()));
        }
        Ok(HalfSpacePoint { z, t })
    }

    /// Point on the axis: z = 0 in n-1 tangential coordinates.
    pub fn on_axis(n: Dimension, t: f64) -> Result<Self> {
        Self::new(vec![0.0; n.tangential()], t)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.z.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// |y|² = |z|² + t².
    pub fn norm_sq(&self) -> f64 {
        self.z.iter().map(|c| c * c).sum::<f64>() + self.t * self.t
    }

    fn check_dim(&self, n: Dimension) -> Result<()> {
        if self.z.len() != n.tangential() {
            return Err(Error::DimensionMismatch {
                expected: n.tangential(),
                got: self.z.len(),
            });
        }
        Ok(())
    }
}

/// s = (1+t)² + |z|² at (z, t).
#[inline]
pub(crate) fn s_of(z: &[f64], t: f64) -> f64 {
    (1.0 + t) * (1.0 + t) + z.iter().map(|c| c * c).sum::<f64>()
}

/// U(z, t) without the domain checks, for hot loops.
#[inline]
pub(crate) fn bubble_raw(z: &[f64], t: f64, nf: f64) -> f64 {
    s_of(z, t).powf(-(nf - 2.0) / 2.0)
}

/// U(r, 0) restricted to the boundary, as a function of r = |z|.
#[inline]
pub fn bubble_boundary(r: f64, nf: f64) -> f64 {
    (1.0 + r * r).powf(-(nf - 2.0) / 2.0)
}

/// The standard bubble U(y) = [(1+t)² + |z|²]^{-(n-2)/2}.
pub fn eval_bubble(y: &HalfSpacePoint, n: Dimension) -> Result<f64> {
    y.check_dim(n)?;
    Ok(bubble_raw(&y.z, y.t, n.nf()))
}

/// The rescaled family U_δ(y) = δ^{-(n-2)/2} U(y/δ).
pub fn eval_bubble_family(y: &HalfSpacePoint, delta: f64, n: Dimension) -> Result<f64> {
    y.check_dim(n)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::ParameterRange(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    let zs: Vec<f64> = y.z.iter().map(|c| c / delta).collect();
    Ok(delta.powf(-(n.nf() - 2.0) / 2.0) * bubble_raw(&zs, y.t / delta, n.nf()))
}

/// Full gradient of U with respect to (z_1, ..., z_{n-1}, t).
///
/// With x = (z, 1+t), ∇U = -(n-2) x |x|^{-n} in both coordinate systems.
pub fn bubble_gradient(z: &[f64], t: f64, nf: f64) -> Vec<f64> {
    let s = s_of(z, t);
    let factor = -(nf - 2.0) * s.powf(-nf / 2.0);
    let mut g: Vec<f64> = z.iter().map(|&c| factor * c).collect();
    g.push(factor * (1.0 + t));
    g
}

/// Hessian of U as a dense n×n row-major matrix.
///
/// ∂²U/∂x_a∂x_b = -(n-2) [δ_ab |x|^{-n} - n x_a x_b |x|^{-n-2}].
pub fn bubble_hessian(z: &[f64], t: f64, nf: f64) -> Vec<f64> {
    let n = z.len() + 1;
    let s = s_of(z, t);
    let sm = s.powf(-nf / 2.0);
    let smm = s.powf(-(nf + 2.0) / 2.0);
    let mut x: Vec<f64> = z.to_vec();
    x.push(1.0 + t);
    let mut h = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut v = nf * (nf - 2.0) * x[a] * x[b] * smm;
            if a == b {
                v -= (nf - 2.0) * sm;
            }
            h[a * n + b] = v;
        }
    }
    h
}

/// Kernel functions of the linearized problem:
/// j_b = ∂U/∂z_b for b = 1..n-1 (translations) and
/// j_n = (n-2)/2·U + Σ y_i ∂U/∂y_i (dilation). Indices are 1-based.
pub fn eval_kernel(b: usize, y: &HalfSpacePoint, n: Dimension) -> Result<f64> {
    y.check_dim(n)?;
    if b == 0 || b > n.n() {
        return Err(Error::KernelIndexOutOfRange(b));
    }
    Ok(kernel_raw(b, &y.z, y.t, n.nf()))
}

#[inline]
pub(crate) fn kernel_raw(b: usize, z: &[f64], t: f64, nf: f64) -> f64 {
    let s = s_of(z, t);
    if b <= z.len() {
        -(nf - 2.0) * z[b - 1] * s.powf(-nf / 2.0)
    } else {
        // Euler's identity collapses the dilation mode to
        // j_n = (n-2) s^{-n/2} [(1+t) - s/2].
        (nf - 2.0) * s.powf(-nf / 2.0) * ((1.0 + t) - 0.5 * s)
    }
}

/// j_n as a function of (r, t) only; the dilation mode is radial in z.
#[inline]
pub fn kernel_dilation_radial(r: f64, t: f64, nf: f64) -> f64 {
    let s = (1.0 + t) * (1.0 + t) + r * r;
    (nf - 2.0) * s.powf(-nf / 2.0) * ((1.0 + t) - 0.5 * s)
}

/// ∂j_b/∂t, needed for the linearized boundary residual.
fn kernel_t_derivative(b: usize, z: &[f64], t: f64, nf: f64) -> f64 {
    let s = s_of(z, t);
    let one_t = 1.0 + t;
    if b <= z.len() {
        // ∂/∂t [-(n-2) z_b s^{-n/2}] = n(n-2) z_b (1+t) s^{-(n+2)/2}
        nf * (nf - 2.0) * z[b - 1] * one_t * s.powf(-(nf + 2.0) / 2.0)
    } else {
        // j_n = (n-2)[(1+t) s^{-n/2} - s^{1-n/2}/2]
        (nf - 2.0)
            * (s.powf(-nf / 2.0) - nf * one_t * one_t * s.powf(-(nf + 2.0) / 2.0)
                + (nf / 2.0 - 1.0) * one_t * s.powf(-nf / 2.0))
    }
}

/// Residuals of the exact equations, computed from the closed forms.
#[derive(Debug, Clone)]
pub struct BubbleResiduals {
    /// -ΔU at y (expected 0).
    pub interior: f64,
    /// ∂U/∂t + (n-2) U^{n/(n-2)} at (z, 0) (expected 0).
    pub boundary: f64,
    /// ∂j_b/∂t + n U^{2/(n-2)} j_b at (z, 0), b = 1..n (expected 0 each).
    pub linearized: Vec<f64>,
}

/// Evaluate all three residual families. The boundary and linearized parts
/// are always taken at (z, 0); the interior part at the given point.
pub fn residuals(y: &HalfSpacePoint, n: Dimension) -> Result<BubbleResiduals> {
    y.check_dim(n)?;
    let nf = n.nf();
    let h = bubble_hessian(&y.z, y.t, nf);
    let dim = n.n();
    let interior: f64 = -(0..dim).map(|a| h[a * dim + a]).sum::<f64>();

    let u0 = bubble_raw(&y.z, 0.0, nf);
    let du0 = bubble_gradient(&y.z, 0.0, nf)[dim - 1];
    let boundary = du0 + (nf - 2.0) * u0.powf(nf / (nf - 2.0));

    let u0_pow = u0.powf(2.0 / (nf - 2.0));
    let linearized = (1..=dim)
        .map(|b| kernel_t_derivative(b, &y.z, 0.0, nf) + nf * u0_pow * kernel_raw(b, &y.z, 0.0, nf))
        .collect();

    Ok(BubbleResiduals {
        interior,
        boundary,
        linearized,
    })
}

/// Scale of the terms entering each residual, for relative comparisons.
pub fn residual_scales(y: &HalfSpacePoint, n: Dimension) -> Result<(f64, f64, Vec<f64>)> {
    y.check_dim(n)?;
    let nf = n.nf();
    let dim = n.n();
    let h = bubble_hessian(&y.z, y.t, nf);
    let interior_scale: f64 = (0..dim).map(|a| h[a * dim + a].abs()).sum();
    let u0 = bubble_raw(&y.z, 0.0, nf);
    let boundary_scale = (nf - 2.0) * u0.powf(nf / (nf - 2.0));
    let u0_pow = u0.powf(2.0 / (nf - 2.0));
    let lin_scales = (1..=dim)
        .map(|b| {
            kernel_t_derivative(b, &y.z, 0.0, nf).abs()
                + (nf * u0_pow * kernel_raw(b, &y.z, 0.0, nf)).abs()
                + u0.powf(nf / (nf - 2.0))
        })
        .collect();
    Ok((interior_scale.max(1e-300), boundary_scale, lin_scales))
}

/// Exponents of the decay bounds |∇^τ U| ≤ C (1+|y|)^{2-τ-n}, fitted on
/// dyadic spheres from the closed forms. Returns the fitted exponent per τ.
pub fn decay_exponents(n: Dimension, taus: &[usize]) -> Vec<f64> {
    let nf = n.nf();
    let dirs = crate::quad::sphere_directions(n.n(), 64, 7);
    // Start at radius 4: the (1 + |y|) offset in the bound biases the local
    // slope on small spheres.
    let radii: Vec<f64> = (2..10).map(|k| 2.0_f64.powi(k)).collect();
    taus.iter()
        .map(|&tau| {
            let sups: Vec<f64> = radii
                .iter()
                .map(|&rho| {
                    dirs.iter()
                        .map(|d| {
                            // fold into the upper half space
                            let t = rho * d[n.n() - 1].abs();
                            let z: Vec<f64> = d[..n.n() - 1].iter().map(|&c| rho * c).collect();
                            match tau {
                                0 => bubble_raw(&z, t, nf).abs(),
                                1 => bubble_gradient(&z, t, nf)
                                    .iter()
                                    .map(|g| g * g)
                                    .sum::<f64>()
                                    .sqrt(),
                                2 => bubble_hessian(&z, t, nf)
                                    .iter()
                                    .map(|h| h * h)
                                    .sum::<f64>()
                                    .sqrt(),
                                _ => panic!("tau must be 0, 1 or 2"),
                            }
                        })
                        .fold(0.0_f64, f64::max)
                })
                .collect();
            let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let ly: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
            crate::fit::fit_line(&lx, &ly).slope
        })
        .collect()
}

/// Brute-force finite differences, used by tests to cross-check the closed
/// forms and by the sector-reduction oracle.
pub mod fd {
    /// Central-difference gradient of f at (z, t) with step h.
    pub fn gradient<F: Fn(&[f64], f64) -> f64>(f: &F, z: &[f64], t: f64, h: f64) -> Vec<f64> {
        let mut g = Vec::with_capacity(z.len() + 1);
        let mut zp = z.to_vec();
        for i in 0..z.len() {
            zp[i] = z[i] + h;
            let fp = f(&zp, t);
            zp[i] = z[i] - h;
            let fm = f(&zp, t);
            zp[i] = z[i];
            g.push((fp - fm) / (2.0 * h));
        }
        g.push((f(z, t + h) - f(z, t - h)) / (2.0 * h));
        g
    }

    /// Central-difference Laplacian of f at (z, t) with step h, summing over
    /// every coordinate of the ambient space. No chain rule, no symmetry use.
    pub fn laplacian<F: Fn(&[f64], f64) -> f64>(f: &F, z: &[f64], t: f64, h: f64) -> f64 {
        let f0 = f(z, t);
        let mut acc = 0.0;
        let mut zp = z.to_vec();
        for i in 0..z.len() {
            zp[i] = z[i] + h;
            let fp = f(&zp, t);
            zp[i] = z[i] - h;
            let fm = f(&zp, t);
            zp[i] = z[i];
            acc += (fp - 2.0 * f0 + fm) / (h * h);
        }
        acc += (f(z, t + h) - 2.0 * f0 + f(z, t - h)) / (h * h);
        acc
    }

    /// Second mixed derivative ∂²f/∂z_a∂z_b by central differences.
    pub fn second_mixed<F: Fn(&[f64], f64) -> f64>(
        f: &F,
        z: &[f64],
        t: f64,
        a: usize,
        b: usize,
        h: f64,
    ) -> f64 {
        if a == b {
            let mut zp = z.to_vec();
            let f0 = f(z, t);
            zp[a] = z[a] + h;
            let fp = f(&zp, t);
            zp[a] = z[a] - h;
            let fm = f(&zp, t);
            return (fp - 2.0 * f0 + fm) / (h * h);
        }
        let mut zp = z.to_vec();
        let mut acc = 0.0;
        for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            zp[a] = z[a] + sa * h;
            zp[b] = z[b] + sb * h;
            acc += sign * f(&zp, t);
            zp[a] = z[a];
            zp[b] = z[b];
        }
        acc / (4.0 * h * h)
    }
}
