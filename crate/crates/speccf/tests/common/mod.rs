//! Shared helpers and independent oracles for the integration suites.
//!
//! The eigendecomposition oracle here is written against plain nested
//! vectors and kept separate from the library's internals on purpose: it is
//! the reference the iterative solvers are checked against.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use speccf::data::InteractionMatrix;
use speccf::model::MomModel;
use speccf::moments::{estimate_m2, estimate_whitened_m3, PairwiseMoment};
use speccf::synth::{ItemsPerUserLaw, PlantedModel, UserPriorLaw};
use speccf::tensor::robust_decompose;
use speccf::whitening::{build_whitener, topk_eig, WhiteningTransform};

/// Full eigendecomposition of a dense symmetric matrix by classical Jacobi
/// sweeps over nested vectors. Returns eigenvalues in descending order and
/// eigenvectors as rows of the returned basis.
pub fn dense_sym_eig(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut basis: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let phi = 0.5 * (2.0 * m[p][q]).atan2(m[q][q] - m[p][p]);
                let (s, c) = phi.sin_cos();
                for i in 0..n {
                    let mip = m[i][p];
                    let miq = m[i][q];
                    m[i][p] = c * mip - s * miq;
                    m[i][q] = s * mip + c * miq;
                }
                for i in 0..n {
                    let mpi = m[p][i];
                    let mqi = m[q][i];
                    m[p][i] = c * mpi - s * mqi;
                    m[q][i] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let bp = basis[p][i];
                    let bq = basis[q][i];
                    basis[p][i] = c * bp - s * bq;
                    basis[q][i] = s * bp + c * bq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vecs: Vec<Vec<f64>> = order.iter().map(|&i| basis[i].clone()).collect();
    (vals, vecs)
}

/// Spectral norm of a dense matrix from the eigenvalues of its Gram matrix.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    let (rows, cols) = a.dim();
    let mut gram = vec![vec![0.0f64; cols]; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += a[(r, i)] * a[(r, j)];
            }
            gram[i][j] = acc;
        }
    }
    let (vals, _) = dense_sym_eig(&gram);
    vals[0].max(0.0).sqrt()
}

pub fn pairwise_to_dense(m2: &PairwiseMoment) -> Vec<Vec<f64>> {
    let d = m2.dim();
    let mut dense = vec![vec![0.0f64; d]; d];
    for (i, j, v) in m2.iter_entries() {
        dense[i][j] = v;
    }
    dense
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Planted model with equal-size disjoint uniform item blocks. Fully
/// exchangeable across states, so pipeline errors against it are purely
/// statistical.
pub fn blocky_planted(
    block_size: usize,
    k: usize,
    total_items: usize,
    pi: &[f64],
    nu_lo: usize,
    nu_hi: usize,
) -> PlantedModel {
    assert!(block_size * k <= total_items);
    let mut o = Array2::<f64>::zeros((total_items, k));
    for c in 0..k {
        for r in 0..block_size {
            o[(c * block_size + r, c)] = 1.0 / block_size as f64;
        }
    }
    PlantedModel::new(
        o,
        Array1::from_vec(pi.to_vec()),
        UserPriorLaw::Shared,
        ItemsPerUserLaw::Uniform { lo: nu_lo, hi: nu_hi },
    )
    .unwrap()
}

pub struct PipelineOutput {
    pub model: MomModel,
    pub whitener: WhiteningTransform,
    pub m2: PairwiseMoment,
    pub lambdas: Vec<f64>,
}

/// Runs the in-memory training pipeline on a prepared matrix.
pub fn train_pipeline(
    x: &InteractionMatrix,
    k: usize,
    seed: u64,
    include_diagonal: bool,
    restarts: usize,
    iterations: usize,
) -> speccf::Result<PipelineOutput> {
    let m2 = estimate_m2(x, include_diagonal)?;
    let (vals, vecs) = topk_eig(&m2, k, 1e-10, 600 * k, seed)?;
    let wt = build_whitener(&vals, &vecs)?;
    let m3 = estimate_whitened_m3(x, wt.w().view())?;
    let pairs = robust_decompose(&m3, k, restarts, iterations, seed)?;
    let lambdas = pairs.iter().map(|p| p.lambda).collect();
    let model = speccf::model::recover_parameters(&wt, &pairs)?;
    Ok(PipelineOutput {
        model,
        whitener: wt,
        m2,
        lambdas,
    })
}
