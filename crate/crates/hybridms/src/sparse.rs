//! Minimal CSR storage with an incomplete-Cholesky preconditioned conjugate
//! gradient solver, used for the global fine P1 reference solves. Everything
//! here is deterministic: assembly order is fixed by the caller and the
//! iteration is a plain sequential PCG.

use nalgebra::DVector;

/// Compressed sparse row matrix (square, symmetric storage of both halves).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from unsorted triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }
}

/// Zero-fill incomplete Cholesky factor (lower triangle, CSR by rows).
pub struct Ic0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ic0 {
    /// Factor the lower triangle of `a` with no fill-in. Returns None on a
    /// nonpositive pivot (caller falls back to Jacobi).
    pub fn new(a: &Csr) -> Option<Ic0> {
        let n = a.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                if a.col_idx[k] <= r {
                    col_idx.push(a.col_idx[k]);
                    vals.push(a.vals[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        let mut diag_pos = vec![0usize; n];
        for r in 0..n {
            let start = row_ptr[r];
            let end = row_ptr[r + 1];
            for k in start..end {
                let c = col_idx[k];
                if c < r {
                    // vals[k] = (a_rc - sum_j L_rj L_cj) / L_cc over shared j < c.
                    let mut dot = 0.0;
                    let (mut i, mut j) = (start, row_ptr[c]);
                    let c_end = row_ptr[c + 1] - 1; // exclude c's diagonal
                    while i < k && j < c_end {
                        match col_idx[i].cmp(&col_idx[j]) {
                            std::cmp::Ordering::Less => i += 1,
                            std::cmp::Ordering::Greater => j += 1,
                            std::cmp::Ordering::Equal => {
                                dot += vals[i] * vals[j];
                                i += 1;
                                j += 1;
                            }
                        }
                    }
                    vals[k] = (vals[k] - dot) / vals[diag_pos[c]];
                } else {
                    let mut dot = 0.0;
                    for i in start..k {
                        dot += vals[i] * vals[i];
                    }
                    let pivot = vals[k] - dot;
                    if pivot <= 0.0 {
                        return None;
                    }
                    vals[k] = pivot.sqrt();
                    diag_pos[r] = k;
                }
            }
        }
        Some(Ic0 {
            row_ptr,
            col_idx,
            vals,
            diag_pos,
        })
    }

    /// Apply the preconditioner: solve L L^T z = r.
    pub fn apply(&self, r: &DVector<f64>, z: &mut DVector<f64>) {
        let n = self.diag_pos.len();
        // Forward solve L y = r (y stored in z).
        for i in 0..n {
            let mut acc = r[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                acc -= self.vals[k] * z[self.col_idx[k]];
            }
            z[i] = acc / self.vals[self.diag_pos[i]];
        }
        // Backward solve L^T z = y.
        for i in (0..n).rev() {
            let zi = z[i] / self.vals[self.diag_pos[i]];
            z[i] = zi;
            for k in self.row_ptr[i]..self.diag_pos[i] {
                z[self.col_idx[k]] -= self.vals[k] * zi;
            }
        }
    }
}

/// Outcome of a PCG solve.
#[derive(Debug, Clone, Copy)]
pub struct PcgResult {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients with IC(0) (Jacobi fallback).
pub fn pcg(a: &Csr, b: &DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, PcgResult) {
    let n = a.n;
    let ic = Ic0::new(a);
    let jacobi: Option<DVector<f64>> = if ic.is_none() {
        Some(DVector::from_fn(n, |i, _| {
            let mut d = 1.0;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.col_idx[k] == i {
                    d = a.vals[k];
                }
            }
            1.0 / d
        }))
    } else {
        None
    };
    let precond = |r: &DVector<f64>, z: &mut DVector<f64>| match (&ic, &jacobi) {
        (Some(ic), _) => ic.apply(r, z),
        (None, Some(d)) => {
            for i in 0..n {
                z[i] = d[i] * r[i];
            }
        }
        _ => unreachable!(),
    };

    let bnorm = b.norm().max(f64::MIN_POSITIVE);
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = DVector::zeros(n);
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 0..max_iter {
        let rel = r.norm() / bnorm;
        if rel <= tol {
            return (
                x,
                PcgResult {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
        a.matvec(&p, &mut ap);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        precond(&r, &mut z);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + beta * &p;
    }
    let rel = r.norm() / bnorm;
    (
        x,
        PcgResult {
            iterations: max_iter,
            relative_residual: rel,
            converged: rel <= tol,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn csr_merges_duplicates() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (0, 1, 0.5)]);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let mut y = DVector::zeros(2);
        a.matvec(&x, &mut y);
        assert_eq!(y[0], 3.5);
        assert_eq!(y[1], 1.0);
    }

    #[test]
    fn pcg_solves_laplacian() {
        let n = 200;
        let a = laplace_1d(n);
        let mut rng = StdRng::seed_from_u64(9);
        let xstar = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut b = DVector::zeros(n);
        a.matvec(&xstar, &mut b);
        let (x, res) = pcg(&a, &b, 1e-13, 2000);
        assert!(res.converged, "{res:?}");
        assert!((x - xstar).amax() < 1e-9);
    }

    #[test]
    fn ic0_reproduces_exact_cholesky_on_tridiagonal() {
        // IC(0) on a tridiagonal SPD matrix is the exact factorization, so
        // PCG converges in one iteration.
        let a = laplace_1d(50);
        let b = DVector::from_element(50, 1.0);
        let (_, res) = pcg(&a, &b, 1e-12, 10);
        assert!(res.converged);
        assert!(res.iterations <= 2, "{res:?}");
    }
}
