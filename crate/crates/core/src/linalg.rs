//! Small dense complex linear algebra.
//!
//! Hermitian eigenproblems are solved with cyclic Jacobi rotations on the
//! real symmetric embedding `[[Re, -Im], [Im, Re]]`. Every matrix in this
//! crate is at most a few dozen rows, so the O(n^3) sweeps are cheap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};

pub type ComplexVec = DVector<Complex64>;
pub type ComplexMat = DMatrix<Complex64>;

/// Max-entry tolerance for `M = M^H`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Residual bound for eigenpairs, scaled by `1 + |lambda|`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
/// Largest matrix accepted by [`dominant_eigpair`].
pub const MAX_EIGEN_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 100;

/// An eigenvalue with its unit-norm eigenvector.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: ComplexVec,
}

/// `|h^H u|^2`.
#[inline]
pub fn gain(h: &ComplexVec, u: &ComplexVec) -> f64 {
    h.dotc(u).norm_sqr()
}

/// `h^H M h`, real part (exact for Hermitian `M`).
pub fn quad_form(m: &ComplexMat, h: &ComplexVec) -> f64 {
    h.dotc(&(m * h)).re
}

/// Largest entry magnitude of `M - M^H`.
pub fn hermitian_defect(m: &ComplexMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]`.
pub fn real_embedding(m: &ComplexMat) -> DMatrix<f64> {
    let n = m.nrows();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            e[(i, j)] = z.re;
            e[(i + n, j + n)] = z.re;
            e[(i, j + n)] = -z.im;
            e[(i + n, j)] = z.im;
        }
    }
    e
}

/// Inverse of [`real_embedding`]. The two copies of each block are averaged,
/// which makes the result exactly Hermitian when `x` is symmetric.
pub fn from_real_embedding(x: &DMatrix<f64>) -> ComplexMat {
    let n = x.nrows() / 2;
    ComplexMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        Complex64::new(re, im)
    })
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues in descending order with the matching eigenvectors as
/// columns. Only the upper triangle is trusted; the input is symmetrized.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);

    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    let negligible = 100.0 * apq.abs();
                    if m[(p, p)].abs() + negligible == m[(p, p)].abs()
                        && m[(q, q)].abs() + negligible == m[(q, q)].abs()
                    {
                        m[(p, q)] = 0.0;
                        m[(q, p)] = 0.0;
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

// Applies the Jacobi rotation J(p, q) as M <- J^T M J and V <- V J.
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn check_hermitian(m: &ComplexMat) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return invalid(format!("matrix is not Hermitian (|M - M^H| = {defect:e})"));
    }
    Ok(())
}

/// Full eigen-decomposition of a Hermitian matrix, eigenvalues descending.
///
/// Each complex eigenpair shows up twice in the real embedding (as `v` and
/// `jv`); Gram-Schmidt over the embedded eigenvectors keeps one
/// representative per complex direction.
pub fn hermitian_eigen(m: &ComplexMat) -> Result<Vec<EigPair>> {
    check_hermitian(m)?;
    let n = m.nrows();
    let (_, vecs) = symmetric_eigen(&real_embedding(m));
    let mut basis: Vec<ComplexVec> = Vec::with_capacity(n);
    for c in 0..2 * n {
        if basis.len() == n {
            break;
        }
        let mut z = ComplexVec::from_fn(n, |r, _| Complex64::new(vecs[(r, c)], vecs[(r + n, c)]));
        for b in &basis {
            let proj = b.dotc(&z);
            z -= b * proj;
        }
        let norm = z.norm();
        if norm > 0.5 {
            basis.push(z / Complex64::from(norm));
        }
    }
    let mut pairs: Vec<EigPair> = basis
        .into_iter()
        .map(|v| EigPair {
            value: quad_form(m, &v),
            vector: v,
        })
        .collect();
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(pairs)
}

/// Largest eigenvalue of a Hermitian matrix and a canonical unit eigenvector.
///
/// When the top eigenvalue is degenerate the vector is the normalized
/// projection of the standard basis vector `e_j` with the largest projection
/// onto the top eigenspace (lowest `j` on ties). The returned vector is
/// phase-normalized so its largest-magnitude component (lowest index on ties)
/// is real and positive.
pub fn dominant_eigpair(m: &ComplexMat) -> Result<EigPair> {
    if m.nrows() > MAX_EIGEN_DIM {
        return invalid(format!(
            "dominant_eigpair supports dimension <= {MAX_EIGEN_DIM}, got {}",
            m.nrows()
        ));
    }
    let pairs = hermitian_eigen(m)?;
    let n = m.nrows();
    let top = pairs[0].value;
    let tie_tol = 1e-9 * (1.0 + top.abs());
    let space: Vec<&ComplexVec> = pairs
        .iter()
        .take_while(|p| p.value >= top - tie_tol)
        .map(|p| &p.vector)
        .collect();

    let vector = if space.len() == 1 {
        space[0].clone()
    } else {
        let projection = |j: usize| -> ComplexVec {
            let mut acc = ComplexVec::zeros(n);
            for b in &space {
                // <b, e_j> = conj(b_j)
                acc += *b * b[j].conj();
            }
            acc
        };
        let mut best = (0, projection(0));
        let mut best_norm = best.1.norm();
        for j in 1..n {
            let p = projection(j);
            let pn = p.norm();
            if pn > best_norm + 1e-12 {
                best = (j, p);
                best_norm = pn;
            }
        }
        best.1 / Complex64::from(best_norm)
    };
    let vector = phase_normalize(vector);
    Ok(EigPair {
        value: quad_form(m, &vector),
        vector,
    })
}

/// Rotate `v` so that its largest-magnitude component (lowest index among
/// ties within 1e-12) is real and positive.
pub fn phase_normalize(v: ComplexVec) -> ComplexVec {
    let mut idx = 0;
    let mut mag = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > mag + 1e-12 {
            idx = i;
            mag = z.norm();
        }
    }
    if mag == 0.0 {
        return v;
    }
    let rot = v[idx].conj() / mag;
    v * rot
}

/// `|M v - lambda v|_2`.
pub fn eigen_residual(m: &ComplexMat, pair: &EigPair) -> f64 {
    (m * &pair.vector - &pair.vector * Complex64::from(pair.value)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_psd(n: usize, seed: u64) -> ComplexMat {
        // Deterministic LCG; any generator works for these fixtures.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let a = ComplexMat::from_fn(n, n, |_, _| c(next(), next()));
        &a * a.adjoint()
    }

    #[test]
    fn rank_one_matrix() {
        let u = ComplexVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let m = (&u * u.adjoint()) * c(5.0, 0.0);
        let p = dominant_eigpair(&m).unwrap();
        assert_relative_eq!(p.value, 5.0, epsilon = 1e-12);
        assert_relative_eq!(p.vector.dotc(&u).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let m = ComplexMat::from_diagonal(&ComplexVec::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let p = dominant_eigpair(&m).unwrap();
        assert_relative_eq!(p.value, 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.vector[0].re, 1.0, epsilon = 1e-12);
        assert!(p.vector[1].norm() < 1e-12);
    }

    #[test]
    fn identity_tie_breaks_to_first_basis_vector() {
        let p = dominant_eigpair(&ComplexMat::identity(3, 3)).unwrap();
        assert_relative_eq!(p.value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.vector[0].re, 1.0, epsilon = 1e-12);
        assert!(p.vector[0].im.abs() < 1e-15);
        assert!(p.vector[1].norm() + p.vector[2].norm() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMat::identity(2, 2);
        m[(0, 1)] = c(0.0, 1e-6);
        assert!(dominant_eigpair(&m).is_err());
    }

    #[test]
    fn random_residuals_and_trace() {
        for seed in 0..20 {
            let m = random_psd(4, seed);
            let pairs = hermitian_eigen(&m).unwrap();
            assert_eq!(pairs.len(), 4);
            let trace: f64 = (0..4).map(|i| m[(i, i)].re).sum();
            let sum: f64 = pairs.iter().map(|p| p.value).sum();
            assert!((trace - sum).abs() <= 1e-9);
            for p in &pairs {
                assert!(eigen_residual(&m, p) <= EIGEN_RESIDUAL_TOL * (1.0 + p.value.abs()));
                assert!((p.vector.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matches_independent_power_iteration() {
        let m = random_psd(4, 99);
        let top = dominant_eigpair(&m).unwrap();
        let mut v = ComplexVec::from_element(4, c(1.0, 0.3));
        for _ in 0..5000 {
            v = &m * &v;
            let n = v.norm();
            v /= c(n, 0.0);
        }
        assert_relative_eq!(quad_form(&m, &v), top.value, epsilon = 1e-9);
        assert_relative_eq!(v.dotc(&top.vector).norm(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn embedding_round_trip() {
        let m = random_psd(3, 5);
        let back = from_real_embedding(&real_embedding(&m));
        assert!((back - &m).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn quad_form_matches_embedding() {
        let m = random_psd(3, 8);
        let h = ComplexVec::from_vec(vec![c(1.0, -0.5), c(0.2, 0.1), c(-0.3, 0.7)]);
        let w = DVector::from_iterator(6, h.iter().map(|z| z.re).chain(h.iter().map(|z| z.im)));
        let e = real_embedding(&m);
        assert_relative_eq!((w.transpose() * e * &w)[(0, 0)], quad_form(&m, &h), epsilon = 1e-12);
    }
}
