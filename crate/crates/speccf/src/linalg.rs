//! Small dense helpers used by the iterative solvers.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Unit vector with independent standard normal components.
pub(crate) fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with matching
/// eigenvector columns.
pub(crate) fn jacobi_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigh requires a square matrix");
    let mut m = a.clone();
    let mut q = Array2::<f64>::eye(n);

    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = (1e-14 * frob.max(f64::MIN_POSITIVE)).powi(2);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= stop {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apq = m[(p, r)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let mir = m[(i, r)];
                    m[(i, p)] = c * mip - s * mir;
                    m[(i, r)] = s * mip + c * mir;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mri = m[(r, i)];
                    m[(p, i)] = c * mpi - s * mri;
                    m[(r, i)] = s * mpi + c * mri;
                }
                for i in 0..n {
                    let qip = q[(i, p)];
                    let qir = q[(i, r)];
                    q[(i, p)] = c * qip - s * qir;
                    q[(i, r)] = s * qip + c * qir;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[(i, i)]));
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, dst)] = q[(i, src)];
        }
    }
    (vals, vecs)
}

/// Two-pass modified Gram-Schmidt on the columns of `v`. Columns that
/// collapse below working precision are replaced with fresh random
/// directions so the block keeps full rank.
pub(crate) fn orthonormalize_columns(v: &mut Array2<f64>, rng: &mut impl Rng) {
    let (n, k) = v.dim();
    let mut reference = f64::MIN_POSITIVE;
    for j in 0..k {
        let mut norm = 0.0;
        for row in 0..n {
            norm += v[(row, j)] * v[(row, j)];
        }
        reference = reference.max(norm.sqrt());
    }
    let floor = 1e-13 * reference;

    for j in 0..k {
        let mut attempts = 0;
        loop {
            for _pass in 0..2 {
                for i in 0..j {
                    let mut c = 0.0;
                    for row in 0..n {
                        c += v[(row, i)] * v[(row, j)];
                    }
                    for row in 0..n {
                        v[(row, j)] -= c * v[(row, i)];
                    }
                }
            }
            let mut norm = 0.0;
            for row in 0..n {
                norm += v[(row, j)] * v[(row, j)];
            }
            let norm = norm.sqrt();
            if norm > floor || attempts >= 8 {
                let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
                for row in 0..n {
                    v[(row, j)] *= inv;
                }
                break;
            }
            let fresh = random_unit(n, rng);
            for row in 0..n {
                v[(row, j)] = fresh[row];
            }
            attempts += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobi_diagonal_matrix() {
        let a = array![[0.5, 0.0], [0.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vals[1] - 0.5).abs() < 1e-14);
        assert!(vecs[(1, 0)].abs() > 0.999);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // Residual check A v = lambda v.
        for j in 0..2 {
            for i in 0..2 {
                let av: f64 = (0..2).map(|l| a[(i, l)] * vecs[(l, j)]).sum();
                assert!((av - vals[j] * vecs[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_schmidt_produces_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v = Array2::from_shape_fn((10, 4), |_| rng.sample::<f64, _>(StandardNormal));
        orthonormalize_columns(&mut v, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                let g: f64 = (0..10).map(|r| v[(r, i)] * v[(r, j)]).sum();
                assert!((g - expect).abs() < 1e-12, "gram ({i},{j}) = {g}");
            }
        }
    }

    #[test]
    fn degenerate_block_is_repaired() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Two identical columns; the second must be re-seeded.
        let mut v = Array2::from_shape_fn((6, 2), |(i, _)| (i as f64 + 1.0).sin());
        orthonormalize_columns(&mut v, &mut rng);
        let g: f64 = (0..6).map(|r| v[(r, 0)] * v[(r, 1)]).sum();
        assert!(g.abs() < 1e-10);
        assert!((norm2(&v.column(1).to_vec()) - 1.0).abs() < 1e-12);
    }
}
