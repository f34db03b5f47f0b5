//! Dense symmetric third-order tensors and their orthogonal decomposition by
//! the robust tensor power method with deflation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, random_unit};

/// Components smaller than this are treated as exhausted during deflation.
pub const DEFLATION_FLOOR: f64 = 1e-12;

/// Convergence threshold for successive power iterates.
const ITERATE_STALL: f64 = 1e-13;

/// Dense `k x k x k` tensor that is invariant under any permutation of its
/// three indices. All mutating operations write the six permutations of each
/// canonical cell from a single product, so the symmetry is exact.
#[derive(Debug, Clone)]
pub struct SymmetricTensor3 {
    k: usize,
    values: Vec<f64>,
}

impl SymmetricTensor3 {
    pub fn zeros(k: usize) -> Self {
        SymmetricTensor3 {
            k,
            values: vec![0.0; k * k * k],
        }
    }

    /// Wraps a dense value array, checking permutation symmetry to 1e-12
    /// (relative to the largest magnitude entry).
    pub fn from_values(k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * k * k {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensor entries, got {}",
                k * k * k,
                values.len()
            )));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut worst = 0.0f64;
        let mut canonical = SymmetricTensor3 { k, values };
        for i in 0..k {
            for j in i..k {
                for l in j..k {
                    let base = canonical.values[index(k, i, j, l)];
                    let (perms, count) = permutations(i, j, l);
                    for &(a, b, c) in &perms[..count] {
                        worst = worst.max((canonical.values[index(k, a, b, c)] - base).abs());
                    }
                }
            }
        }
        if worst > 1e-12 * scale {
            return Err(Error::AsymmetricTensor(worst));
        }
        // Re-mirror canonical cells so the stored symmetry is exact.
        for i in 0..k {
            for j in i..k {
                for l in j..k {
                    let base = canonical.values[index(k, i, j, l)];
                    canonical.write_symmetric(i, j, l, base);
                }
            }
        }
        Ok(canonical)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[index(self.k, i, j, l)]
    }

    pub(crate) fn write_symmetric(&mut self, i: usize, j: usize, l: usize, value: f64) {
        let (perms, count) = permutations(i, j, l);
        for &(a, b, c) in &perms[..count] {
            self.values[index(self.k, a, b, c)] = value;
        }
    }

    /// Adds `weight * v (x) v (x) v` in place.
    pub fn rank_one_update(&mut self, weight: f64, v: &[f64]) {
        assert_eq!(v.len(), self.k, "rank-one update dimension mismatch");
        for i in 0..self.k {
            for j in i..self.k {
                let wij = weight * v[i] * v[j];
                for l in j..self.k {
                    let add = wij * v[l];
                    let (perms, count) = permutations(i, j, l);
                    for &(a, b, c) in &perms[..count] {
                        self.values[index(self.k, a, b, c)] += add;
                    }
                }
            }
        }
    }

    /// Multilinear contraction: returns `T(v, v, v)` and the vector
    /// `T(I, v, v)` with entries `sum_jl T[i,j,l] v_j v_l`.
    pub fn apply(&self, v: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(v.len(), self.k, "contraction dimension mismatch");
        let k = self.k;
        let mut out = vec![0.0; k];
        for i in 0..k {
            let slice = &self.values[i * k * k..(i + 1) * k * k];
            let mut acc = 0.0;
            for j in 0..k {
                let row = &slice[j * k..(j + 1) * k];
                acc += v[j] * dot(row, v);
            }
            out[i] = acc;
        }
        (dot(&out, v), out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
fn index(k: usize, i: usize, j: usize, l: usize) -> usize {
    (i * k + j) * k + l
}

/// Distinct permutations of a sorted index triple `i <= j <= l`.
fn permutations(i: usize, j: usize, l: usize) -> ([(usize, usize, usize); 6], usize) {
    let mut out = [(0usize, 0usize, 0usize); 6];
    let count = if i == j && j == l {
        out[0] = (i, j, l);
        1
    } else if i == j {
        out[0] = (i, i, l);
        out[1] = (i, l, i);
        out[2] = (l, i, i);
        3
    } else if j == l {
        out[0] = (i, j, j);
        out[1] = (j, i, j);
        out[2] = (j, j, i);
        3
    } else {
        out[0] = (i, j, l);
        out[1] = (i, l, j);
        out[2] = (j, i, l);
        out[3] = (j, l, i);
        out[4] = (l, i, j);
        out[5] = (l, j, i);
        6
    };
    (out, count)
}

/// One recovered component of an orthogonally decomposable tensor.
#[derive(Debug, Clone)]
pub struct TensorEigenpair {
    pub lambda: f64,
    pub vector: Vec<f64>,
}

fn restart_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Repeated power map `v <- T(I,v,v) / ||T(I,v,v)||`, stopping early once the
/// iterate stalls. Returns the final unit vector.
fn power_iterate(t: &SymmetricTensor3, mut v: Vec<f64>, iterations: usize) -> Vec<f64> {
    for _ in 0..iterations {
        let (_, mapped) = t.apply(&v);
        let norm = norm2(&mapped);
        if norm < 1e-300 {
            break;
        }
        let next: Vec<f64> = mapped.into_iter().map(|x| x / norm).collect();
        let step: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if step < ITERATE_STALL {
            break;
        }
    }
    v
}

/// Extracts `k` tensor eigenpairs by random-restart power iterations with
/// deflation. For each component, `restarts` seeded starts run `iterations`
/// power steps each; the candidate maximizing `T(v,v,v)` is polished with
/// another `iterations` steps before its rank-one term is deflated away.
///
/// Restart `r` of round `c` draws from stream `c * restarts + r + 1` of the
/// seed, so results do not depend on scheduling.
pub fn robust_decompose(
    t: &SymmetricTensor3,
    k: usize,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vec<TensorEigenpair>> {
    if k == 0 || k > t.k() {
        return Err(Error::param(
            "k",
            format!("requested {k} components from a tensor of side {}", t.k()),
        ));
    }
    if restarts == 0 || iterations == 0 {
        return Err(Error::param(
            "restarts/iterations",
            "must be at least 1".to_string(),
        ));
    }

    let mut work = t.clone();
    let mut pairs = Vec::with_capacity(k);
    for round in 0..k {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for r in 0..restarts {
            let mut rng = restart_rng(seed, (round * restarts + r + 1) as u64);
            let start = random_unit(work.k(), &mut rng);
            let v = power_iterate(&work, start, iterations);
            let (score, _) = work.apply(&v);
            if best.as_ref().map_or(true, |(s, _)| score > *s) {
                best = Some((score, v));
            }
        }
        let (_, candidate) = best.expect("at least one restart");
        let v = power_iterate(&work, candidate, iterations);
        let (lambda, _) = work.apply(&v);
        if !(lambda > DEFLATION_FLOOR) {
            return Err(Error::DegenerateComponent {
                index: round,
                lambda,
            });
        }
        work.rank_one_update(-lambda, &v);
        pairs.push(TensorEigenpair { lambda, vector: v });
    }
    Ok(pairs)
}

/// Largest `|T(v,v,v)|` found over `trials` seeded power-iteration runs; a
/// lower bound on the tensor operator norm.
pub fn operator_norm_lower_bound(t: &SymmetricTensor3, trials: usize, seed: u64) -> f64 {
    let mut best = 0.0f64;
    for trial in 0..trials {
        let mut rng = restart_rng(seed, trial as u64 + 1);
        let start = random_unit(t.k(), &mut rng);
        let v = power_iterate(t, start, 100);
        let (value, _) = t.apply(&v);
        best = best.max(value.abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(k: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        v
    }

    fn rank_one(k: usize, weight: f64, v: &[f64]) -> SymmetricTensor3 {
        let mut t = SymmetricTensor3::zeros(k);
        t.rank_one_update(weight, v);
        t
    }

    #[test]
    fn apply_on_own_axis() {
        let t = rank_one(2, 1.0, &basis(2, 0));
        let (scalar, vector) = t.apply(&basis(2, 0));
        assert_eq!(scalar, 1.0);
        assert_eq!(vector, vec![1.0, 0.0]);
    }

    #[test]
    fn apply_on_orthogonal_axis() {
        let t = rank_one(2, 1.0, &basis(2, 0));
        let (scalar, vector) = t.apply(&basis(2, 1));
        assert_eq!(scalar, 0.0);
        assert_eq!(vector, vec![0.0, 0.0]);
    }

    #[test]
    fn apply_matches_triple_loop_oracle() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let k = 3;
            let mut t = SymmetricTensor3::zeros(k);
            for i in 0..k {
                for j in i..k {
                    for l in j..k {
                        t.write_symmetric(i, j, l, rng.random::<f64>() - 0.5);
                    }
                }
            }
            let v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
            let (scalar, vector) = t.apply(&v);

            let mut oracle_vec = vec![0.0; k];
            let mut oracle_scalar = 0.0;
            for i in 0..k {
                for j in 0..k {
                    for l in 0..k {
                        oracle_vec[i] += t.get(i, j, l) * v[j] * v[l];
                    }
                }
            }
            for i in 0..k {
                oracle_scalar += oracle_vec[i] * v[i];
            }
            assert!((scalar - oracle_scalar).abs() < 1e-12);
            for i in 0..k {
                assert!((vector[i] - oracle_vec[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_is_validated() {
        let k = 2;
        let mut values = vec![0.0; 8];
        values[index(k, 0, 0, 1)] = 1.0;
        assert!(matches!(
            SymmetricTensor3::from_values(k, values),
            Err(Error::AsymmetricTensor(_))
        ));
    }

    #[test]
    fn decomposes_diagonal_tensor() {
        let mut t = rank_one(2, 2.0, &basis(2, 0));
        t.rank_one_update(0.5, &basis(2, 1));
        let pairs = robust_decompose(&t, 2, 20, 100, 42).unwrap();
        assert!((pairs[0].lambda - 2.0).abs() < 1e-10);
        assert!((pairs[1].lambda - 0.5).abs() < 1e-10);
        assert!(pairs[0].vector[0].abs() > 1.0 - 1e-10);
        assert!(pairs[1].vector[1].abs() > 1.0 - 1e-10);
    }

    #[test]
    fn recovers_planted_odeco_tensor() {
        // Random orthonormal directions with weights in [0.5, 3].
        use crate::linalg::orthonormalize_columns;
        use ndarray::Array2;
        use rand_distr::StandardNormal;

        let k = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut basis_mat =
            Array2::from_shape_fn((k, k), |_| rand::Rng::sample(&mut rng, StandardNormal));
        orthonormalize_columns(&mut basis_mat, &mut rng);
        let weights = [3.0, 1.7, 0.9, 0.5];
        let mut t = SymmetricTensor3::zeros(k);
        let mut truth: Vec<Vec<f64>> = Vec::new();
        for (c, &w) in weights.iter().enumerate() {
            let v: Vec<f64> = (0..k).map(|r| basis_mat[(r, c)]).collect();
            t.rank_one_update(w, &v);
            truth.push(v);
        }

        let pairs = robust_decompose(&t, k, 60, 120, 9).unwrap();
        for (c, &w) in weights.iter().enumerate() {
            assert!((pairs[c].lambda - w).abs() < 1e-8, "weight {c}");
            let overlap = dot(&pairs[c].vector, &truth[c]).abs();
            assert!(overlap >= 1.0 - 1e-8, "overlap {c} = {overlap}");
        }

        // Residual after removing all recovered terms.
        let mut residual = t.clone();
        for p in &pairs {
            residual.rank_one_update(-p.lambda, &p.vector);
        }
        assert!(residual.frobenius_norm() < 1e-6);
    }

    #[test]
    fn degenerate_component_is_reported() {
        let t = SymmetricTensor3::zeros(3);
        match robust_decompose(&t, 1, 5, 20, 1) {
            Err(Error::DegenerateComponent { index: 0, .. }) => {}
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn negative_weight_flips_to_positive_pair() {
        // For odd tensors -w * v^3 equals w * (-v)^3, so the method reports
        // the positive-weight representative.
        let t = rank_one(2, -1.5, &basis(2, 0));
        let pairs = robust_decompose(&t, 1, 10, 50, 3).unwrap();
        assert!((pairs[0].lambda - 1.5).abs() < 1e-10);
        assert!(pairs[0].vector[0] < -(1.0 - 1e-10));
    }

    #[test]
    fn norms_of_unit_rank_one() {
        let t = rank_one(3, 1.0, &basis(3, 0));
        assert!((t.frobenius_norm() - 1.0).abs() < 1e-15);
        let bound = operator_norm_lower_bound(&t, 8, 2);
        assert!((bound - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norms_of_two_component_tensor() {
        let mut t = rank_one(2, 2.0, &basis(2, 0));
        t.rank_one_update(0.5, &basis(2, 1));
        assert!((t.frobenius_norm() - 4.25f64.sqrt()).abs() < 1e-12);
        let bound = operator_norm_lower_bound(&t, 16, 7);
        assert!((bound - 2.0).abs() < 1e-10);
    }

    #[test]
    fn operator_bound_never_exceeds_frobenius() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..100 {
            let k = 4;
            let mut t = SymmetricTensor3::zeros(k);
            for i in 0..k {
                for j in i..k {
                    for l in j..k {
                        t.write_symmetric(i, j, l, rng.random::<f64>() * 2.0 - 1.0);
                    }
                }
            }
            let fro = t.frobenius_norm();
            let bound = operator_norm_lower_bound(&t, 5, trial as u64);
            assert!(bound <= fro + 1e-12, "trial {trial}: {bound} > {fro}");
        }
    }

    #[test]
    fn decomposition_commutes_with_rotation() {
        // Rotating the tensor rotates the recovered eigenvectors and leaves
        // the eigenvalues unchanged.
        let k = 3;
        let weights = [2.0, 1.0, 0.4];
        let mut t = SymmetricTensor3::zeros(k);
        for (i, &w) in weights.iter().enumerate() {
            t.rank_one_update(w, &basis(k, i));
        }
        // Orthogonal rotation from a seeded random basis.
        use crate::linalg::orthonormalize_columns;
        use ndarray::Array2;
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut q = Array2::from_shape_fn((k, k), |_| rand::Rng::sample(&mut rng, StandardNormal));
        orthonormalize_columns(&mut q, &mut rng);

        let mut rotated = SymmetricTensor3::zeros(k);
        for (i, &w) in weights.iter().enumerate() {
            let col: Vec<f64> = (0..k).map(|r| q[(r, i)]).collect();
            rotated.rank_one_update(w, &col);
        }

        let pairs = robust_decompose(&rotated, k, 40, 120, 31).unwrap();
        for (i, &w) in weights.iter().enumerate() {
            assert!((pairs[i].lambda - w).abs() < 1e-8);
            let expected: Vec<f64> = (0..k).map(|r| q[(r, i)]).collect();
            assert!(dot(&pairs[i].vector, &expected).abs() > 1.0 - 1e-8);
        }
    }
}
