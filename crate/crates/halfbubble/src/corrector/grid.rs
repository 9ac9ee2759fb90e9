//! Stretched tensor grid for the reduced (r, t) problems.
//!
//! The r direction is cell-centered: edges 0 = e_0 < ... < e_{N_r} = R_max
//! with geometrically growing widths, unknowns at the cell midpoints. Placing
//! the first unknown at half a cell keeps the coordinate singularity at r = 0
//! off the grid, and the weighted flux through r = 0 vanishes exactly because
//! the radial weight r^c does.
//!
//! The t direction is node-based: t_0 = 0 carries the Robin row, the last
//! node t_{N_t} = T_max carries the far-field condition and is eliminated.

use crate::error::{Error, Result};
use crate::hash::Fnv64;

/// Far-field closure at the truncation edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarField {
    /// Homogeneous Dirichlet at r = R_max and t = T_max.
    #[default]
    Dirichlet,
    /// Algebraic-decay matching: the eliminated boundary value is tied to its
    /// inner neighbour by the expected power law of the sector.
    AlgebraicDecay,
}

impl FarField {
    pub fn tag(&self) -> u32 {
        match self {
            FarField::Dirichlet => 0,
            FarField::AlgebraicDecay => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub n_r: usize,
    pub n_t: usize,
    pub r_max: f64,
    pub t_max: f64,
    /// Per-cell geometric growth factor, in [1, 1.1].
    pub stretch: f64,
    pub far_field: FarField,
    /// Cell edges in r, length n_r + 1, e_0 = 0.
    pub r_edges: Vec<f64>,
    /// Cell centers in r, length n_r.
    pub r_centers: Vec<f64>,
    /// Nodes in t, length n_t + 1; the last node (= T_max) is eliminated.
    pub t_nodes: Vec<f64>,
}

fn geometric_partition(total: f64, count: usize, ratio: f64) -> Vec<f64> {
    // widths h_0 γ^j summing to `total`
    let h0 = if (ratio - 1.0).abs() < 1e-14 {
        total / count as f64
    } else {
        total * (ratio - 1.0) / (ratio.powi(count as i32) - 1.0)
    };
    let mut edges = Vec::with_capacity(count + 1);
    let mut acc = 0.0;
    edges.push(0.0);
    let mut h = h0;
    for _ in 0..count {
        acc += h;
        edges.push(acc);
        h *= ratio;
    }
    // pin the last edge exactly
    *edges.last_mut().unwrap() = total;
    edges
}

impl RadialGrid {
    pub fn new(n_r: usize, n_t: usize, r_max: f64, t_max: f64, stretch: f64) -> Result<Self> {
        if n_r < 8 || n_t < 8 {
            return Err(Error::ParameterRange(format!(
                "grid needs at least 8 cells per direction, got {n_r}×{n_t}"
            )));
        }
        if r_max < 20.0 || t_max < 20.0 {
            return Err(Error::ParameterRange(format!(
                "truncation radii must be at least 20, got R={r_max}, T={t_max}"
            )));
        }
        if !(1.0..=1.1).contains(&stretch) {
            return Err(Error::ParameterRange(format!(
                "stretching factor must lie in [1, 1.1], got {stretch}"
            )));
        }
        let r_edges = geometric_partition(r_max, n_r, stretch);
        let r_centers: Vec<f64> = (0..n_r)
            .map(|j| 0.5 * (r_edges[j] + r_edges[j + 1]))
            .collect();
        let t_nodes = geometric_partition(t_max, n_t, stretch);
        Ok(RadialGrid {
            n_r,
            n_t,
            r_max,
            t_max,
            stretch,
            far_field: FarField::Dirichlet,
            r_edges,
            r_centers,
            t_nodes,
        })
    }

    pub fn with_far_field(mut self, far_field: FarField) -> Self {
        self.far_field = far_field;
        self
    }

    /// Same truncation radii and mapping family, `factor` times the
    /// resolution. The per-cell ratio becomes γ^{1/factor}, so the refined
    /// grids form a smooth family suitable for Richardson extrapolation.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let ratio = self.stretch.powf(1.0 / factor as f64);
        Ok(RadialGrid::new(
            self.n_r * factor,
            self.n_t * factor,
            self.r_max,
            self.t_max,
            ratio,
        )?
        .with_far_field(self.far_field))
    }

    /// Coarsened by the same rule, for convergence studies downward.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        let ratio = self.stretch.powi(factor as i32);
        Ok(RadialGrid::new(
            self.n_r / factor,
            self.n_t / factor,
            self.r_max,
            self.t_max,
            ratio,
        )?
        .with_far_field(self.far_field))
    }

    /// Number of unknowns of one sector solve.
    pub fn unknowns(&self) -> usize {
        self.n_r * self.n_t
    }

    /// Flattened index of (r_j, t_i).
    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        i * self.n_r + j
    }

    /// ∫ r^power dr over cell j, exact.
    pub fn r_cell_weight(&self, j: usize, power: f64) -> f64 {
        let lo = self.r_edges[j];
        let hi = self.r_edges[j + 1];
        (hi.powf(power + 1.0) - lo.powf(power + 1.0)) / (power + 1.0)
    }

    /// Trapezoid weight of t node i (the eliminated T_max node has weight
    /// folded into its neighbour's half-interval).
    pub fn t_weight(&self, i: usize) -> f64 {
        let left = if i == 0 {
            0.0
        } else {
            self.t_nodes[i] - self.t_nodes[i - 1]
        };
        let right = if i + 1 <= self.n_t {
            self.t_nodes[i + 1] - self.t_nodes[i]
        } else {
            0.0
        };
        0.5 * (left + right)
    }

    /// 2D quadrature Σ_{j,i} f(j,i) · (∫_cell r^power dr) · t-trapezoid.
    pub fn integrate(&self, values: &[f64], power: f64) -> f64 {
        debug_assert_eq!(values.len(), self.unknowns());
        let mut acc = 0.0;
        for i in 0..self.n_t {
            let wt = self.t_weight(i);
            for j in 0..self.n_r {
                acc += values[self.index(j, i)] * self.r_cell_weight(j, power) * wt;
            }
        }
        acc
    }

    /// Same quadrature restricted to √(r² + t²) ≤ rho_cut, for functionals
    /// whose r-power weights would otherwise amplify far-field solver noise.
    pub fn integrate_within(&self, values: &[f64], power: f64, rho_cut: f64) -> f64 {
        debug_assert_eq!(values.len(), self.unknowns());
        let cut2 = rho_cut * rho_cut;
        let mut acc = 0.0;
        for i in 0..self.n_t {
            let t = self.t_nodes[i];
            let wt = self.t_weight(i);
            for j in 0..self.n_r {
                let r = self.r_centers[j];
                if r * r + t * t > cut2 {
                    continue;
                }
                acc += values[self.index(j, i)] * self.r_cell_weight(j, power) * wt;
            }
        }
        acc
    }

    /// Boundary (t = 0) quadrature Σ_j f(j) · ∫_cell r^power dr.
    pub fn integrate_boundary(&self, values_at_t0: impl Fn(usize) -> f64, power: f64) -> f64 {
        (0..self.n_r)
            .map(|j| values_at_t0(j) * self.r_cell_weight(j, power))
            .sum()
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u32(self.n_r as u32)
            .write_u32(self.n_t as u32)
            .write_f64(self.r_max)
            .write_f64(self.t_max)
            .write_f64(self.stretch)
            .write_u32(self.far_field.tag());
        h.finish()
    }

    /// Bilinear interpolation of a grid function at (r, t), with even
    /// reflection below the first r center and linear decay to the far-field
    /// value at the truncation edges. Errors outside [0,R_max]×[0,T_max].
    pub fn interp(&self, values: &[f64], r: f64, t: f64) -> Result<f64> {
        if r < 0.0 || r > self.r_max || t < 0.0 || t > self.t_max {
            return Err(Error::OutOfGrid(format!(
                "(r,t)=({r:.3},{t:.3}) outside [0,{}]×[0,{}]",
                self.r_max, self.t_max
            )));
        }
        // r-direction weights over centers; outside [r_0, r_{last}] handle
        // reflection/boundary separately
        let at_level = |i: usize, r: f64| -> f64 {
            let get = |j: usize| values[self.index(j, i)];
            let rc = &self.r_centers;
            if r <= rc[0] {
                // even in r: quadratic through (±r_0, w_0), (r_1, w_1)
                let w0 = get(0);
                let w1 = get(1);
                return w0 + (w1 - w0) * (r * r - rc[0] * rc[0]) / (rc[1] * rc[1] - rc[0] * rc[0]);
            }
            if r >= rc[self.n_r - 1] {
                // linear to 0 at the Dirichlet edge
                let w = get(self.n_r - 1);
                let frac = (r - rc[self.n_r - 1]) / (self.r_max - rc[self.n_r - 1]);
                return w * (1.0 - frac);
            }
            let j = match rc.binary_search_by(|c| c.partial_cmp(&r).unwrap()) {
                Ok(j) => return get(j),
                Err(j) => j - 1,
            };
            let frac = (r - rc[j]) / (rc[j + 1] - rc[j]);
            get(j) * (1.0 - frac) + get(j + 1) * frac
        };

        let tn = &self.t_nodes;
        if t >= tn[self.n_t - 1] {
            // between last unknown level and the eliminated T_max node (value 0)
            let w = at_level(self.n_t - 1, r);
            let frac = (t - tn[self.n_t - 1]) / (self.t_max - tn[self.n_t - 1]);
            return Ok(w * (1.0 - frac));
        }
        let i = match tn[..self.n_t].binary_search_by(|c| c.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(at_level(i, r)),
            Err(i) => i - 1,
        };
        let frac = (t - tn[i]) / (tn[i + 1] - tn[i]);
        Ok(at_level(i, r) * (1.0 - frac) + at_level(i + 1, r) * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_invariants() {
        let g = RadialGrid::new(64, 64, 40.0, 40.0, 1.02).unwrap();
        assert_eq!(g.r_edges.len(), 65);
        assert_eq!(g.t_nodes.len(), 65);
        assert!((g.r_edges[64] - 40.0).abs() < 1e-12);
        assert!((g.t_nodes[64] - 40.0).abs() < 1e-12);
        // strictly increasing
        for w in g.r_edges.windows(2).chain(g.t_nodes.windows(2)) {
            assert!(w[1] > w[0]);
        }
        // geometric ratio
        let h0 = g.r_edges[1] - g.r_edges[0];
        let h1 = g.r_edges[2] - g.r_edges[1];
        assert!((h1 / h0 - 1.02).abs() < 1e-10);

        assert!(RadialGrid::new(64, 64, 10.0, 40.0, 1.02).is_err());
        assert!(RadialGrid::new(64, 64, 40.0, 40.0, 1.2).is_err());
        assert!(RadialGrid::new(4, 64, 40.0, 40.0, 1.02).is_err());
    }

    #[test]
    fn quadrature_is_second_order_exactish() {
        let g = RadialGrid::new(400, 400, 30.0, 30.0, 1.01).unwrap();
        // ∫∫ e^{-r²-t} r² dr dt over the rectangle ≈ (√π/4 ≈ erf part) × (1 - e^{-30})
        let mut vals = vec![0.0; g.unknowns()];
        for i in 0..g.n_t {
            for j in 0..g.n_r {
                vals[g.index(j, i)] = (-g.r_centers[j] * g.r_centers[j] - g.t_nodes[i]).exp();
            }
        }
        let got = g.integrate(&vals, 2.0);
        let expect = 0.25 * std::f64::consts::PI.sqrt(); // ∫_0^∞ r² e^{-r²} = √π/4
        assert!((got - expect).abs() < 1e-4, "{got} vs {expect}");
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let g = RadialGrid::new(32, 32, 20.0, 20.0, 1.0).unwrap();
        let mut vals = vec![0.0; g.unknowns()];
        for i in 0..g.n_t {
            for j in 0..g.n_r {
                vals[g.index(j, i)] = 2.0 * g.t_nodes[i] + 3.0;
            }
        }
        // linear in t only (constant in r avoids the even-reflection bias)
        let v = g.interp(&vals, 5.0, 7.3).unwrap();
        assert!((v - (2.0 * 7.3 + 3.0)).abs() < 1e-10);
        assert!(g.interp(&vals, 25.0, 0.0).is_err());
        assert!(g.interp(&vals, 0.0, 25.0).is_err());
    }

    #[test]
    fn refinement_keeps_radii_and_shrinks_ratio() {
        let g = RadialGrid::new(50, 50, 40.0, 40.0, 1.04).unwrap();
        let f = g.refined(2).unwrap();
        assert_eq!(f.n_r, 100);
        assert!((f.stretch - 1.04_f64.sqrt()).abs() < 1e-12);
        assert_eq!(f.r_max, g.r_max);
        assert_ne!(f.content_hash(), g.content_hash());
    }
}
