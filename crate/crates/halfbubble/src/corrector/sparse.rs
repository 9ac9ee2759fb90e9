//! Minimal CSR sparse machinery: matrix assembly from triplets, ILU(0)
//! factorization and a preconditioned BiCGStab solve. Everything is
//! sequential and bit-deterministic for fixed inputs.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut cur_row = 0usize;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            while cur_row < r {
                cur_row += 1;
                row_ptr[cur_row] = cols.len();
            }
            if cols.len() > row_ptr[r] && *cols.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
        }
        while cur_row < n {
            cur_row += 1;
            row_ptr[cur_row] = cols.len();
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.matvec(x, &mut ax);
        ax.iter()
            .zip(b)
            .map(|(&a, &bb)| (a - bb) * (a - bb))
            .sum::<f64>()
            .sqrt()
    }

    fn find(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        let slice = &self.cols[lo..hi];
        slice.binary_search(&c).ok().map(|p| lo + p)
    }
}

/// ILU(0): incomplete LU keeping the sparsity pattern of A. Unit lower
/// diagonal; L strictly below, U on and above the diagonal, both stored in
/// the same CSR skeleton.
pub struct Ilu0 {
    lu: Csr,
    diag_ptr: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &Csr) -> Result<Ilu0> {
        let mut lu = a.clone();
        let mut diag_ptr = vec![usize::MAX; lu.n];
        for r in 0..lu.n {
            diag_ptr[r] = lu
                .find(r, r)
                .ok_or_else(|| Error::CacheCorrupt(format!("missing diagonal in row {r}")))?;
        }
        for i in 0..lu.n {
            let (row_lo, row_hi) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in row_lo..row_hi {
                let k = lu.cols[kk];
                if k >= i {
                    break;
                }
                let piv = lu.vals[diag_ptr[k]];
                if piv == 0.0 {
                    return Err(Error::CacheCorrupt(format!("zero ILU pivot at {k}")));
                }
                let factor = lu.vals[kk] / piv;
                lu.vals[kk] = factor;
                // subtract factor * U-part of row k where pattern matches
                for jj in diag_ptr[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[jj];
                    if let Some(pos) = lu.find(i, j) {
                        lu.vals[pos] -= factor * lu.vals[jj];
                    }
                }
            }
        }
        Ok(Ilu0 { lu, diag_ptr })
    }

    /// Solve (LU) x = b in place.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let n = self.lu.n;
        // forward: L y = b, unit diagonal
        for i in 0..n {
            let mut acc = b[i];
            for k in self.lu.row_ptr[i]..self.diag_ptr[i] {
                acc -= self.lu.vals[k] * x[self.lu.cols[k]];
            }
            x[i] = acc;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in self.diag_ptr[i] + 1..self.lu.row_ptr[i + 1] {
                acc -= self.lu.vals[k] * x[self.lu.cols[k]];
            }
            x[i] = acc / self.lu.vals[self.diag_ptr[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned BiCGStab. Returns (solution, iterations, relative residual).
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    precond: &Ilu0,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = a.n;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for iter in 1..=max_iter {
        let rho1 = dot(&r_hat, &r);
        if rho1.abs() < 1e-300 {
            // breakdown; residual as achieved
            let rel = norm(&r) / bnorm;
            if rel <= tol {
                return Ok((x, iter, rel));
            }
            return Err(Error::SolverDidNotConverge {
                residual: rel,
                iterations: iter,
                tol,
            });
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        a.matvec(&p_hat, &mut v);
        alpha = rho1 / dot(&r_hat, &v);
        // s = r - alpha v (reuse r)
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm(&r) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            let rel = a.residual_norm(&x, b) / bnorm;
            return Ok((x, iter, rel));
        }
        precond.apply(&r, &mut s_hat);
        a.matvec(&s_hat, &mut t);
        omega = dot(&t, &r) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            let true_rel = a.residual_norm(&x, b) / bnorm;
            return Ok((x, iter, true_rel));
        }
        rho = rho1;
    }
    Err(Error::SolverDidNotConverge {
        residual: norm(&r) / bnorm,
        iterations: max_iter,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> (Csr, Vec<f64>) {
        // -u'' = 1 on (0,1), u(0)=u(1)=0, uniform grid
        let h = 1.0 / (n as f64 + 1.0);
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0 / (h * h)));
            if i > 0 {
                trip.push((i, i - 1, -1.0 / (h * h)));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0 / (h * h)));
            }
        }
        (Csr::from_triplets(n, trip), vec![1.0; n])
    }

    #[test]
    fn csr_accumulates_duplicates() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0), (0, 1, -1.0)]);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![2.0, 5.0]);
    }

    #[test]
    fn bicgstab_solves_poisson_1d() {
        let (a, b) = laplace_1d(200);
        let ilu = Ilu0::factor(&a).unwrap();
        let (x, _iters, rel) = bicgstab(&a, &b, &ilu, 1e-12, 500).unwrap();
        assert!(rel <= 1e-11);
        // exact solution u(x) = x(1-x)/2
        let h = 1.0 / 201.0;
        for (i, &xi) in x.iter().enumerate() {
            let s = (i as f64 + 1.0) * h;
            let exact = 0.5 * s * (1.0 - s);
            assert!((xi - exact).abs() < 1e-8, "{xi} vs {exact}");
        }
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        // ILU(0) on a tridiagonal matrix equals full LU: one application solves.
        let (a, b) = laplace_1d(50);
        let ilu = Ilu0::factor(&a).unwrap();
        let mut x = vec![0.0; 50];
        ilu.apply(&b, &mut x);
        assert!(a.residual_norm(&x, &b) < 1e-9);
    }

    #[test]
    fn nonconvergence_is_reported() {
        // 2D 5-point Laplacian: ILU(0) is no longer an exact factorization,
        // so a single iteration cannot reach 1e-14.
        let m = 40;
        let mut trip = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                trip.push((k, k, 4.0));
                if i > 0 {
                    trip.push((k, k - m, -1.0));
                }
                if i + 1 < m {
                    trip.push((k, k + m, -1.0));
                }
                if j > 0 {
                    trip.push((k, k - 1, -1.0));
                }
                if j + 1 < m {
                    trip.push((k, k + 1, -1.0));
                }
            }
        }
        let a = Csr::from_triplets(m * m, trip);
        let b = vec![1.0; m * m];
        let ilu = Ilu0::factor(&a).unwrap();
        let err = bicgstab(&a, &b, &ilu, 1e-14, 1).unwrap_err();
        match err {
            Error::SolverDidNotConverge { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }
}
