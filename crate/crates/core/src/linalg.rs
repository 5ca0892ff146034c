//! Small dense kernels shared by the regression layer: Householder QR with
//! column-norm pivoting, a complete orthogonal decomposition for minimum-norm
//! least squares, and a Cholesky solver with a symmetric pseudo-inverse
//! fallback for Gram-matrix systems.

use nalgebra::{DMatrix, SymmetricEigen};

/// Householder QR of `a` with Businger-Golub column pivoting.
///
/// Reflectors are stored below the diagonal of `qr` (LAPACK layout, unit
/// leading element implied) and `perm[j]` is the original index of the
/// column in pivoted position `j`.
pub(crate) struct PivotedQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

fn reflect_column(a: &mut DMatrix<f64>, k: usize, col: usize) -> f64 {
    let n = a.nrows();
    let alpha = a[(k, col)];
    let mut xnorm2 = 0.0;
    for i in k + 1..n {
        xnorm2 += a[(i, col)] * a[(i, col)];
    }
    if xnorm2 == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * (alpha * alpha + xnorm2).sqrt();
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for i in k + 1..n {
        a[(i, col)] *= scale;
    }
    a[(k, col)] = beta;
    tau
}

fn apply_reflector(a: &mut DMatrix<f64>, k: usize, tau: f64, col: usize, target: usize) {
    if tau == 0.0 {
        return;
    }
    let n = a.nrows();
    let mut s = a[(k, target)];
    for i in k + 1..n {
        s += a[(i, col)] * a[(i, target)];
    }
    s *= tau;
    a[(k, target)] -= s;
    for i in k + 1..n {
        let v = a[(i, col)];
        a[(i, target)] -= s * v;
    }
}

fn apply_reflector_vec(qr: &DMatrix<f64>, k: usize, tau: f64, y: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let mut s = y[k];
    for i in k + 1..y.len() {
        s += qr[(i, k)] * y[i];
    }
    s *= tau;
    y[k] -= s;
    for i in k + 1..y.len() {
        y[i] -= s * qr[(i, k)];
    }
}

impl PivotedQr {
    pub(crate) fn new(mut a: DMatrix<f64>) -> Self {
        let (n, p) = a.shape();
        let kmax = n.min(p);
        let mut perm: Vec<usize> = (0..p).collect();
        let mut tau = Vec::with_capacity(kmax);
        for k in 0..kmax {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                let mut s = 0.0;
                for i in k..n {
                    s += a[(i, j)] * a[(i, j)];
                }
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }
            let t = reflect_column(&mut a, k, k);
            for j in k + 1..p {
                apply_reflector(&mut a, k, t, k, j);
            }
            tau.push(t);
        }
        let tol = (n.max(p) as f64) * f64::EPSILON * 16.0;
        let r00 = if kmax > 0 { a[(0, 0)].abs() } else { 0.0 };
        let rank = (0..kmax)
            .take_while(|&k| r00 > 0.0 && a[(k, k)].abs() > tol * r00)
            .count();
        PivotedQr { qr: a, tau, perm, rank }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rank
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for (k, &t) in self.tau.iter().enumerate() {
            apply_reflector_vec(&self.qr, k, t, y);
        }
    }

    /// Least-squares solution; minimum-norm when the design is rank deficient.
    pub(crate) fn solve(&self, y: &[f64]) -> Vec<f64> {
        let p = self.qr.ncols();
        let r = self.rank;
        let mut c = y.to_vec();
        self.apply_qt(&mut c);
        let mut x = vec![0.0; p];
        if r == p {
            for k in (0..p).rev() {
                let mut s = c[k];
                for j in k + 1..p {
                    s -= self.qr[(k, j)] * x[j];
                }
                x[k] = s / self.qr[(k, k)];
            }
        } else if r > 0 {
            // Complete orthogonal decomposition: [R11 R12]' = W S, so the
            // minimum-norm solution of [R11 R12] x = c is W S'^{-1} c.
            let mut t = DMatrix::zeros(p, r);
            for i in 0..r {
                for j in i..p {
                    t[(j, i)] = self.qr[(i, j)];
                }
            }
            let mut wtau = Vec::with_capacity(r);
            for k in 0..r {
                let tk = reflect_column(&mut t, k, k);
                for j in k + 1..r {
                    apply_reflector(&mut t, k, tk, k, j);
                }
                wtau.push(tk);
            }
            let mut w = vec![0.0; p];
            for i in 0..r {
                let mut s = c[i];
                for j in 0..i {
                    s -= t[(j, i)] * w[j];
                }
                w[i] = s / t[(i, i)];
            }
            for k in (0..r).rev() {
                apply_reflector_vec(&t, k, wtau[k], &mut w);
            }
            x = w;
        }
        let mut out = vec![0.0; p];
        for (j, &orig) in self.perm.iter().enumerate() {
            out[orig] = x[j];
        }
        out
    }
}

/// In-place Cholesky of a symmetric positive definite matrix stored densely
/// (lower triangle used). Returns `false` when a pivot falls below
/// `rel_tol` times the largest diagonal entry.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize, rel_tol: f64) -> bool {
    let mut max_diag: f64 = 0.0;
    for i in 0..n {
        max_diag = max_diag.max(a[i * n + i]);
    }
    if n > 0 && max_diag <= 0.0 {
        return false;
    }
    let floor = rel_tol * max_diag;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= floor {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L L' x = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
/// Eigenvalues at or below `1e-12 * max` are treated as zero.
pub(crate) fn sym_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cut = 1e-12 * lmax;
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cut && lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use approx::assert_relative_eq;

    #[test]
    fn full_rank_matches_normal_equations() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = [1.0, 3.0, 2.0, 5.0];
        let x = PivotedQr::new(a.clone()).solve(&y);
        let xtx = a.transpose() * &a;
        let xty = a.transpose() * DVector::from_row_slice(&y);
        let oracle = xtx.try_inverse().unwrap() * xty;
        assert_relative_eq!(x[0], oracle[0], epsilon = 1e-12);
        assert_relative_eq!(x[1], oracle[1], epsilon = 1e-12);
    }

    #[test]
    fn duplicate_columns_split_evenly() {
        // Minimum-norm solution splits the coefficient across identical columns.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let qr = PivotedQr::new(a);
        assert_eq!(qr.rank(), 1);
        let x = qr.solve(&[2.0, 4.0, 6.0]);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let mut l = a;
        assert!(cholesky_in_place(&mut l, 2, 1e-12));
        let mut b = [2.0, 1.0];
        cholesky_solve(&l, 2, &mut b);
        assert_relative_eq!(4.0 * b[0] + 2.0 * b[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(2.0 * b[0] + 3.0 * b[1], 1.0, epsilon = 1e-12);
    }
}
