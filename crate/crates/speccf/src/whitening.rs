//! Truncated eigendecomposition of the sparse pairwise moment and the
//! whitening transform built from it.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, orthonormalize_columns};
use crate::moments::PairwiseMoment;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Default matrix-vector product budget for a rank-`k` decomposition.
pub fn default_max_iter(k: usize) -> usize {
    300 * k
}

/// Whitening transform of the pairwise moment: `w' M2 w = I` on the top-`k`
/// eigenspace, with `w = eigvecs * diag(eigvals)^{-1/2}` and the
/// pseudo-inverse `w_pinv = eigvecs * diag(eigvals)^{1/2}`.
#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    eigvals: Array1<f64>,
    eigvecs: Array2<f64>,
    w: Array2<f64>,
    w_pinv: Array2<f64>,
}

impl WhiteningTransform {
    pub fn k(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.eigvecs.nrows()
    }

    pub fn eigvals(&self) -> &Array1<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &Array2<f64> {
        &self.eigvecs
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn w_pinv(&self) -> &Array2<f64> {
        &self.w_pinv
    }

    /// Maximum deviations of the two whitening identities:
    /// `max |(w' M2 w - I)|` and `max |(w_pinv' w - I)|`.
    pub fn identity_residuals(&self, m2: &PairwiseMoment) -> (f64, f64) {
        let d = self.dim();
        let k = self.k();
        let mut m2w = Array2::<f64>::zeros((d, k));
        let mut col_in = vec![0.0; d];
        let mut col_out = vec![0.0; d];
        for c in 0..k {
            for r in 0..d {
                col_in[r] = self.w[(r, c)];
            }
            m2.matvec(&col_in, &mut col_out);
            for r in 0..d {
                m2w[(r, c)] = col_out[r];
            }
        }
        let wtm2w = self.w.t().dot(&m2w);
        let pinv_t_w = self.w_pinv.t().dot(&self.w);
        let mut dev_whiten = 0.0f64;
        let mut dev_pinv = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                dev_whiten = dev_whiten.max((wtm2w[(i, j)] - target).abs());
                dev_pinv = dev_pinv.max((pinv_t_w[(i, j)] - target).abs());
            }
        }
        (dev_whiten, dev_pinv)
    }
}

/// Computes the `k` algebraically largest eigenpairs of the sparse symmetric
/// moment matrix by shifted block power iteration with Rayleigh-Ritz
/// extraction and full reorthogonalization each sweep.
///
/// `max_iter` budgets total matrix-vector products (one sweep costs `k`).
/// Convergence requires every Ritz residual `|M2 w - nu w|` to fall below
/// `tol * |nu_1|`. Eigenvector signs are canonicalized so the largest
/// magnitude entry of each column is positive.
pub fn topk_eig(
    m2: &PairwiseMoment,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = m2.dim();
    if k == 0 || k > d {
        return Err(Error::param(
            "k",
            format!("requested {k} eigenpairs of a {d} x {d} matrix"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive".to_string()));
    }

    // With the self-pair diagonal present the matrix is a scaled Gram
    // matrix, hence positive semidefinite, and no shift is needed. Without
    // it the matrix can be indefinite; the shift keeps the iteration
    // targeting algebraically (not just absolutely) largest eigenvalues.
    let shift = if m2.include_diagonal() {
        0.0
    } else {
        (-m2.gershgorin_lower_bound()).max(0.0)
    };
    let max_sweeps = (max_iter / k).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Array2::from_shape_fn((d, k), |_| {
        rand::Rng::sample(&mut rng, rand_distr::StandardNormal)
    });
    orthonormalize_columns(&mut v, &mut rng);

    let mut y = Array2::<f64>::zeros((d, k));
    let mut col_in = vec![0.0; d];
    let mut col_out = vec![0.0; d];
    let mut last_residual = f64::INFINITY;
    let mut last_required = 0.0;

    for sweep in 0..max_sweeps {
        for c in 0..k {
            for r in 0..d {
                col_in[r] = v[(r, c)];
            }
            m2.matvec(&col_in, &mut col_out);
            for r in 0..d {
                y[(r, c)] = col_out[r];
            }
        }

        // Rayleigh-Ritz on the unshifted operator.
        let mut b = v.t().dot(&y);
        for i in 0..k {
            for j in i + 1..k {
                let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
                b[(i, j)] = avg;
                b[(j, i)] = avg;
            }
        }
        let (theta, q) = jacobi_eigh(&b);
        let ritz_vecs = v.dot(&q);
        let ritz_images = y.dot(&q);

        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let required = tol * scale;
        let mut worst = 0.0f64;
        for c in 0..k {
            let mut res = 0.0;
            for r in 0..d {
                let diff = ritz_images[(r, c)] - theta[c] * ritz_vecs[(r, c)];
                res += diff * diff;
            }
            worst = worst.max(res.sqrt());
        }
        last_residual = worst;
        last_required = required;

        if worst <= required {
            let achieved = theta.iter().filter(|&&t| t > tol * scale).count();
            if achieved < k {
                return Err(Error::RankDeficient {
                    achieved,
                    requested: k,
                });
            }
            let mut vecs = ritz_vecs;
            canonicalize_signs(&mut vecs);
            return Ok((theta, vecs));
        }

        if sweep + 1 < max_sweeps {
            // Advance the block with the shifted operator.
            for c in 0..k {
                for r in 0..d {
                    v[(r, c)] = y[(r, c)] + shift * v[(r, c)];
                }
            }
            orthonormalize_columns(&mut v, &mut rng);
        }
    }

    Err(Error::NoConvergence {
        max_iter,
        residual: last_residual,
        required: last_required,
    })
}

fn canonicalize_signs(vecs: &mut Array2<f64>) {
    let (d, k) = vecs.dim();
    for c in 0..k {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for r in 0..d {
            let a = vecs[(r, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if vecs[(best, c)] < 0.0 {
            for r in 0..d {
                vecs[(r, c)] = -vecs[(r, c)];
            }
        }
    }
}

/// Builds the whitening matrix and its pseudo-inverse from positive
/// eigenpairs.
pub fn build_whitener(eigvals: &Array1<f64>, eigvecs: &Array2<f64>) -> Result<WhiteningTransform> {
    let k = eigvals.len();
    if eigvecs.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues but {} eigenvector columns",
            k,
            eigvecs.ncols()
        )));
    }
    for (i, &v) in eigvals.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveEigenvalue { index: i, value: v });
        }
    }
    let d = eigvecs.nrows();
    let mut w = Array2::<f64>::zeros((d, k));
    let mut w_pinv = Array2::<f64>::zeros((d, k));
    for c in 0..k {
        let root = eigvals[c].sqrt();
        for r in 0..d {
            w[(r, c)] = eigvecs[(r, c)] / root;
            w_pinv[(r, c)] = eigvecs[(r, c)] * root;
        }
    }
    Ok(WhiteningTransform {
        eigvals: eigvals.clone(),
        eigvecs: eigvecs.clone(),
        w,
        w_pinv,
    })
}
