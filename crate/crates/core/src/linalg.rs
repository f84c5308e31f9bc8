//! Dense symmetric linear algebra for desk-scale problems.
//!
//! Everything here is built on one cyclic Jacobi eigensolver. Linear solves
//! and the positive/negative spectral projections used by New Q-Newton's
//! method all go through the same [`EigenDecomposition`], so "invertible",
//! "kernel" and "solvable" share a single numerical threshold.

use crate::error::{Error, Result};
use crate::vecops;

/// Largest tolerated `|M[i][j] - M[j][i]|` when building a [`SymMatrix`].
pub const ASYMMETRY_TOL: f64 = 1e-12;

/// Relative spectral gate: an eigenvalue `λ` counts as zero when
/// `|λ| <= KERNEL_TOL * (1 + max|λ|)`.
pub const KERNEL_TOL: f64 = 1e-10;

/// Real symmetric matrix, stored row-major and symmetrized at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
        }
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    /// Builds `(M + Mᵀ)/2` from `entry(i, j)`, rejecting entries that are
    /// non-finite or asymmetric beyond [`ASYMMETRY_TOL`].
    pub fn from_fn(dim: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimension must be positive".into(),
            ));
        }
        let mut data = vec![0.0; dim * dim];
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let a = entry(i, j);
                if !a.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                if j < i {
                    worst = worst.max((a - data[j * dim + i]).abs());
                }
                data[i * dim + j] = a;
            }
        }
        if worst > ASYMMETRY_TOL {
            return Err(Error::Asymmetric(worst));
        }
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| vecops::dot(self.row(i), x)).collect()
    }

    /// `<Mx, x>`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        vecops::dot(&self.apply(x), x)
    }

    /// `M + c·I`
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += c;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `Uᵀ M U` for a set of columns `U` (each of length `dim`).
    pub fn congruence(&self, columns: &[Vec<f64>]) -> Self {
        let k = columns.len();
        let images: Vec<Vec<f64>> = columns.iter().map(|c| self.apply(c)).collect();
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                data[i * k + j] = vecops::dot(&columns[i], &images[j]);
            }
        }
        for i in 0..k {
            for j in 0..i {
                let avg = 0.5 * (data[i * k + j] + data[j * k + i]);
                data[i * k + j] = avg;
                data[j * k + i] = avg;
            }
        }
        Self { dim: k, data }
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> Result<f64> {
        let eig = sym_eig(self)?;
        Ok(eig.max_abs_eigenvalue())
    }
}

/// Eigenpairs of a [`SymMatrix`], eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    dim: usize,
    values: Vec<f64>,
    // column-major: vector k occupies vectors[k*dim..(k+1)*dim]
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.values.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    fn kernel_threshold(&self) -> f64 {
        KERNEL_TOL * (1.0 + self.max_abs_eigenvalue())
    }

    pub fn is_invertible(&self) -> bool {
        let min_abs = self
            .values
            .iter()
            .fold(f64::INFINITY, |m, l| m.min(l.abs()));
        min_abs > self.kernel_threshold()
    }

    /// Splits `w` into its components on the positive and negative
    /// eigenspaces. The kernel component belongs to neither part.
    pub fn spectral_split(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(w)?;
        let tol = self.kernel_threshold();
        let mut plus = vec![0.0; self.dim];
        let mut minus = vec![0.0; self.dim];
        for (k, &lambda) in self.values.iter().enumerate() {
            let q = self.eigenvector(k);
            let c = vecops::dot(q, w);
            let target = if lambda > tol {
                &mut plus
            } else if lambda < -tol {
                &mut minus
            } else {
                continue;
            };
            for (t, qi) in target.iter_mut().zip(q) {
                *t += c * qi;
            }
        }
        Ok((plus, minus))
    }

    /// Projection of `w` onto the kernel (eigenvalues inside the zero gate).
    pub fn kernel_part(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(w)?;
        let tol = self.kernel_threshold();
        let mut out = vec![0.0; self.dim];
        for (k, &lambda) in self.values.iter().enumerate() {
            if lambda.abs() <= tol {
                let q = self.eigenvector(k);
                let c = vecops::dot(q, w);
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += c * qi;
                }
            }
        }
        Ok(out)
    }

    /// `Q Λ⁻¹ Qᵀ b`
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        if !self.is_invertible() {
            return Err(Error::SingularMatrix);
        }
        let mut x = vec![0.0; self.dim];
        for (k, &lambda) in self.values.iter().enumerate() {
            let q = self.eigenvector(k);
            let c = vecops::dot(q, b) / lambda;
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += c * qi;
            }
        }
        Ok(x)
    }

    /// `Q Λ Qᵀ`
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for (k, &lambda) in self.values.iter().enumerate() {
            let q = self.eigenvector(k);
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] += lambda * q[i] * q[j];
                }
            }
        }
        SymMatrix { dim: n, data }
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: w.len(),
            });
        }
        Ok(())
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps rotate away every off-diagonal entry in turn until the
/// off-diagonal mass is negligible relative to the diagonal. Quadratically
/// convergent; at the dimensions used here (m ≤ ~100) a handful of sweeps
/// suffice.
pub fn sym_eig(m: &SymMatrix) -> Result<EigenDecomposition> {
    const MAX_SWEEPS: usize = 100;
    let n = m.dim;
    if !vecops::all_finite(&m.data) {
        return Err(Error::NonFinite("matrix entry"));
    }
    let mut a = m.data.clone();
    // row-major accumulator of rotations; columns are eigenvectors
    let mut v = SymMatrix::identity(n).data;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[i * n + i] * a[i * n + i];
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off == 0.0 || off.sqrt() <= f64::EPSILON * 1e-2 * diag.sqrt() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend((0..n).map(|i| v[i * n + k]));
    }
    Ok(EigenDecomposition {
        dim: n,
        values,
        vectors,
    })
}

pub fn spectral_split(e: &EigenDecomposition, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    e.spectral_split(w)
}

pub fn solve_sym(m: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    sym_eig(m)?.solve(b)
}

pub fn is_invertible(m: &SymMatrix) -> bool {
    sym_eig(m).map(|e| e.is_invertible()).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example8() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![-23.0, -61.0, 40.0],
            vec![-61.0, -39.5, 155.0],
            vec![40.0, 155.0, -50.0],
        ])
        .unwrap()
    }

    fn random_sym(dim: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let raw: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        SymMatrix::from_fn(dim, |i, j| raw[i.max(j)][i.min(j)]).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn diagonal_eigenpairs_sorted() {
        let e = sym_eig(&SymMatrix::diagonal(&[2.0, -2.0])).unwrap();
        assert_eq!(e.eigenvalues(), &[-2.0, 2.0]);
        assert_close(
            &e.eigenvector(0).iter().map(|x| x.abs()).collect::<Vec<_>>(),
            &[0.0, 1.0],
            0.0,
        );
        assert_close(
            &e.eigenvector(1).iter().map(|x| x.abs()).collect::<Vec<_>>(),
            &[1.0, 0.0],
            0.0,
        );
    }

    #[test]
    fn example8_spectrum() {
        let e = sym_eig(&example8()).unwrap();
        assert_close(e.eigenvalues(), &[-225.0, 0.0, 112.5], 1e-10);
        assert!(!e.is_invertible());
        assert!(!is_invertible(&example8()));
    }

    #[test]
    fn random_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_sym(5, &mut rng);
        let e = sym_eig(&m).unwrap();
        let r = e.reconstruct();
        for i in 0..5 {
            for j in 0..5 {
                assert!((r.get(i, j) - m.get(i, j)).abs() <= 1e-9 * (1.0 + m.max_abs()));
                let qq = vecops::dot(e.eigenvector(i), e.eigenvector(j));
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((qq - id).abs() <= 1e-9);
            }
        }
        assert!(e.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn split_examples() {
        let e = sym_eig(&SymMatrix::diagonal(&[2.0, -2.0])).unwrap();
        let (p, m) = e.spectral_split(&[1.0, 1.0]).unwrap();
        assert_close(&p, &[1.0, 0.0], 0.0);
        assert_close(&m, &[0.0, 1.0], 0.0);

        let e = sym_eig(&SymMatrix::identity(2)).unwrap();
        let (p, m) = e.spectral_split(&[3.0, 4.0]).unwrap();
        assert_close(&p, &[3.0, 4.0], 0.0);
        assert_close(&m, &[0.0, 0.0], 0.0);

        let e = sym_eig(&SymMatrix::diagonal(&[1.0, 0.0, -1.0])).unwrap();
        let (p, m) = e.spectral_split(&[1.0, 1.0, 1.0]).unwrap();
        assert_close(&p, &[1.0, 0.0, 0.0], 0.0);
        assert_close(&m, &[0.0, 0.0, 1.0], 0.0);
        assert_close(
            &e.kernel_part(&[1.0, 1.0, 1.0]).unwrap(),
            &[0.0, 1.0, 0.0],
            0.0,
        );
        assert!(matches!(
            e.spectral_split(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        assert_close(
            &solve_sym(&SymMatrix::diagonal(&[2.0, -2.0]), &[2.0, 2.0]).unwrap(),
            &[1.0, -1.0],
            1e-15,
        );
        let b = [0.3, -7.0, 2.5];
        assert_close(&solve_sym(&SymMatrix::identity(3), &b).unwrap(), &b, 1e-15);

        let shifted = example8().shifted(1.0);
        let b = [1.0, 0.0, 0.0];
        let x = solve_sym(&shifted, &b).unwrap();
        let res = vecops::norm(&vecops::sub(&shifted.apply(&x), &b));
        assert!(res <= 1e-8 * (1.0 + vecops::norm(&b)));

        assert_eq!(solve_sym(&example8(), &b), Err(Error::SingularMatrix));
    }

    #[test]
    fn invertibility_gate() {
        assert!(is_invertible(&SymMatrix::diagonal(&[1.0, -1.0])));
        assert!(!is_invertible(&SymMatrix::diagonal(&[1.0, 0.0])));
    }

    #[test]
    fn construction_checks() {
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]),
            Err(Error::Asymmetric(_))
        ));
        assert!(matches!(
            SymMatrix::from_rows(&[vec![f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-13, 1.0]]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn congruence_on_basis_subset() {
        let m = SymMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let c = m.congruence(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(c, SymMatrix::diagonal(&[2.0, 3.0]));
    }
}
