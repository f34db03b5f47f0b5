//! Planted ground-truth models: sampling synthetic interaction data from the
//! generative process and scoring recovered parameters against the truth.

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::model::{floored_simplex, MomModel};
use crate::moments::{PairwiseMoment, WhitenedTriple};
use crate::tensor::SymmetricTensor3;

/// How each user's distribution over latent states is chosen.
#[derive(Debug, Clone, Copy)]
pub enum UserPriorLaw {
    /// Every user shares the population mixing weights.
    Shared,
    /// Per-user weights drawn from a Dirichlet with mean equal to the
    /// population weights and the given concentration.
    Dirichlet { concentration: f64 },
}

/// Distribution of the number of items per user.
#[derive(Debug, Clone, Copy)]
pub enum ItemsPerUserLaw {
    Fixed(usize),
    /// Uniform over `lo..=hi`.
    Uniform { lo: usize, hi: usize },
}

/// Ground-truth parameters used to generate synthetic data.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    o: Array2<f64>,
    pi: Array1<f64>,
    pub user_prior: UserPriorLaw,
    pub items_per_user: ItemsPerUserLaw,
    cumulative: Vec<Vec<f64>>,
}

impl PlantedModel {
    pub fn new(
        mut o: Array2<f64>,
        mut pi: Array1<f64>,
        user_prior: UserPriorLaw,
        items_per_user: ItemsPerUserLaw,
    ) -> Result<Self> {
        let (d, k) = o.dim();
        if pi.len() != k || d == 0 || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "planted model with {d} items, {k} states, {} weights",
                pi.len()
            )));
        }
        for c in 0..k {
            let mut col: Vec<f64> = (0..d).map(|r| o[(r, c)]).collect();
            let total: f64 = col.iter().sum();
            if !(total > 0.0) || col.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::param(
                    "o",
                    format!("column {c} is not a nonnegative distribution"),
                ));
            }
            for v in &mut col {
                *v /= total;
            }
            for r in 0..d {
                o[(r, c)] = col[r];
            }
        }
        let mut weights = pi.to_vec();
        if !floored_simplex(&mut weights) {
            return Err(Error::param("pi", "no probability mass".to_string()));
        }
        pi = Array1::from_vec(weights);

        let cumulative = (0..k)
            .map(|c| {
                let mut acc = 0.0;
                (0..d)
                    .map(|r| {
                        acc += o[(r, c)];
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(PlantedModel {
            o,
            pi,
            user_prior,
            items_per_user,
            cumulative,
        })
    }

    /// Random planted model with Dirichlet item columns and mixing weights.
    pub fn random(d: usize, k: usize, column_concentration: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = Gamma::new(column_concentration, 1.0)
            .map_err(|e| Error::param("column_concentration", e.to_string()))?;
        let o = Array2::from_shape_fn((d, k), |_| gamma.sample(&mut rng).max(1e-300));
        let pi = Array1::from_shape_fn(k, |_| {
            let g: f64 = Gamma::new(1.0, 1.0).unwrap().sample(&mut rng);
            g.max(1e-300)
        });
        PlantedModel::new(
            o,
            pi,
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Uniform { lo: 3, hi: 10 },
        )
    }

    pub fn d(&self) -> usize {
        self.o.nrows()
    }

    pub fn k(&self) -> usize {
        self.o.ncols()
    }

    pub fn o(&self) -> &Array2<f64> {
        &self.o
    }

    pub fn pi(&self) -> &Array1<f64> {
        &self.pi
    }

    /// Marginal item distribution: the mixture of the state distributions.
    pub fn item_marginal(&self) -> Array1<f64> {
        self.o.dot(&self.pi)
    }

    /// Exact pairwise probability matrix of the generative model.
    pub fn exact_m2(&self) -> Result<PairwiseMoment> {
        let d = self.d();
        let mut dense = Array2::<f64>::zeros((d, d));
        for c in 0..self.k() {
            let w = self.pi[c];
            for i in 0..d {
                let wi = w * self.o[(i, c)];
                if wi == 0.0 {
                    continue;
                }
                for j in 0..d {
                    dense[(i, j)] += wi * self.o[(j, c)];
                }
            }
        }
        PairwiseMoment::from_dense(dense.view(), true)
    }

    /// Exact whitened third moment under the given whitening matrix.
    pub fn exact_whitened_m3(&self, w: ArrayView2<'_, f64>) -> Result<WhitenedTriple> {
        let (rows, k) = w.dim();
        if rows != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "whitening matrix has {rows} rows for {} items",
                self.d()
            )));
        }
        let mut tensor = SymmetricTensor3::zeros(k);
        for c in 0..self.k() {
            let mut z = vec![0.0f64; k];
            for r in 0..self.d() {
                let mu = self.o[(r, c)];
                if mu == 0.0 {
                    continue;
                }
                for a in 0..k {
                    z[a] += mu * w[(r, a)];
                }
            }
            tensor.rank_one_update(self.pi[c], &z);
        }
        Ok(tensor)
    }

    fn draw_state(&self, prior: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (k, &p) in prior.iter().enumerate() {
            acc += p;
            if r < acc {
                return k;
            }
        }
        prior.len() - 1
    }

    fn draw_item(&self, state: usize, rng: &mut ChaCha8Rng) -> u32 {
        let cum = &self.cumulative[state];
        let r: f64 = rng.random::<f64>() * cum[cum.len() - 1];
        let idx = cum.partition_point(|&c| c <= r);
        idx.min(self.d() - 1) as u32
    }
}

/// Samples a dataset of `n_users` rows. Each user draws a latent state from
/// their prior, then draws items from that state's distribution until the
/// target count of distinct items is reached (capped at 100 attempts per
/// requested item, after which the shorter row is accepted).
///
/// Users consume independent seed streams, so the output is identical no
/// matter how the work is partitioned.
pub fn sample_dataset(p: &PlantedModel, n_users: usize, seed: u64) -> Result<InteractionMatrix> {
    if n_users == 0 {
        return Err(Error::param("n_users", "must be at least 1".to_string()));
    }
    match p.items_per_user {
        ItemsPerUserLaw::Fixed(n) if n > p.d() => {
            return Err(Error::param(
                "items_per_user",
                format!("{n} items requested per user but only {} exist", p.d()),
            ));
        }
        ItemsPerUserLaw::Uniform { lo, hi } if lo > hi || hi > p.d() => {
            return Err(Error::param(
                "items_per_user",
                format!("uniform range [{lo}, {hi}] invalid for {} items", p.d()),
            ));
        }
        _ => {}
    }

    let k = p.k();
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n_users);
    for user in 0..n_users {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(user as u64 + 1);

        let n_u = match p.items_per_user {
            ItemsPerUserLaw::Fixed(n) => n,
            ItemsPerUserLaw::Uniform { lo, hi } => rng.random_range(lo..=hi),
        };

        let prior: Vec<f64> = match p.user_prior {
            UserPriorLaw::Shared => p.pi.to_vec(),
            UserPriorLaw::Dirichlet { concentration } => {
                let mut theta: Vec<f64> = (0..k)
                    .map(|c| {
                        let shape = (concentration * p.pi[c]).max(1e-9);
                        let g: f64 = Gamma::new(shape, 1.0).unwrap().sample(&mut rng);
                        g.max(1e-300)
                    })
                    .collect();
                let total: f64 = theta.iter().sum();
                for t in &mut theta {
                    *t /= total;
                }
                theta
            }
        };

        let state = p.draw_state(&prior, &mut rng);
        let mut items = BTreeSet::new();
        let mut attempts = 0usize;
        let cap = 100 * n_u;
        while items.len() < n_u && attempts < cap {
            attempts += 1;
            items.insert(p.draw_item(state, &mut rng));
        }
        rows.push(items.into_iter().collect());
    }
    InteractionMatrix::from_rows(p.d(), &rows)
}

/// Writes a sampled matrix in the triplet text format the loader reads.
pub fn write_triplets(x: &InteractionMatrix, out: &mut impl Write) -> Result<()> {
    for u in 0..x.n_users() {
        for &item in x.row(u) {
            writeln!(out, "u{u}\ti{item}").map_err(|e| Error::io("writing triplets", e))?;
        }
    }
    Ok(())
}

/// Component alignment and recovery errors against the planted truth.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// `perm[k]` is the estimated component matched to true component `k`.
    pub perm: Vec<usize>,
    pub mu_errors: Vec<f64>,
    pub pi_errors: Vec<f64>,
    pub max_mu_error: f64,
    pub max_pi_error: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Matches estimated components to true ones by column cosine similarity
/// (exact assignment for K <= 12, greedy beyond) and reports the per
/// component parameter errors after permutation.
pub fn align_and_error(truth: &PlantedModel, est: &MomModel) -> RecoveryReport {
    assert_eq!(truth.d(), est.d(), "item dimension mismatch");
    assert_eq!(truth.k(), est.k(), "state dimension mismatch");
    let k = truth.k();

    let mut sim = vec![vec![0.0f64; k]; k];
    for t in 0..k {
        let tc: Vec<f64> = (0..truth.d()).map(|r| truth.o[(r, t)]).collect();
        for e in 0..k {
            let ec: Vec<f64> = (0..est.d()).map(|r| est.o()[(r, e)]).collect();
            sim[t][e] = cosine(&tc, &ec);
        }
    }

    let perm = if k <= 12 {
        optimal_assignment(&sim)
    } else {
        greedy_assignment(&sim)
    };

    let mut mu_errors = vec![0.0f64; k];
    let mut pi_errors = vec![0.0f64; k];
    for t in 0..k {
        let e = perm[t];
        let mut err = 0.0;
        for r in 0..truth.d() {
            let diff = truth.o[(r, t)] - est.o()[(r, e)];
            err += diff * diff;
        }
        mu_errors[t] = err.sqrt();
        pi_errors[t] = (truth.pi[t] - est.pi()[e]).abs();
    }
    let max_mu_error = mu_errors.iter().cloned().fold(0.0, f64::max);
    let max_pi_error = pi_errors.iter().cloned().fold(0.0, f64::max);
    RecoveryReport {
        perm,
        mu_errors,
        pi_errors,
        max_mu_error,
        max_pi_error,
    }
}

/// Exact maximum-similarity assignment over subsets.
fn optimal_assignment(sim: &[Vec<f64>]) -> Vec<usize> {
    let k = sim.len();
    let full = 1usize << k;
    // best[mask] = best total similarity assigning true components
    // 0..popcount(mask) to the estimated set in mask.
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let t = mask.count_ones() as usize;
        if t == k {
            continue;
        }
        for e in 0..k {
            let bit = 1usize << e;
            if mask & bit != 0 {
                continue;
            }
            let cand = best[mask] + sim[t][e];
            if cand > best[mask | bit] {
                best[mask | bit] = cand;
                choice[mask | bit] = e;
            }
        }
    }
    let mut perm = vec![0usize; k];
    let mut mask = full - 1;
    for t in (0..k).rev() {
        let e = choice[mask];
        perm[t] = e;
        mask &= !(1usize << e);
    }
    perm
}

fn greedy_assignment(sim: &[Vec<f64>]) -> Vec<usize> {
    let k = sim.len();
    let mut pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|t| (0..k).map(move |e| (t, e)))
        .collect();
    pairs.sort_by(|&(t1, e1), &(t2, e2)| sim[t2][e2].partial_cmp(&sim[t1][e1]).unwrap());
    let mut perm = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (t, e) in pairs {
        if perm[t] == usize::MAX && !used[e] {
            perm[t] = e;
            used[e] = true;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::estimate_m1;
    use ndarray::{arr1, arr2};

    fn simple_planted() -> PlantedModel {
        PlantedModel::new(
            arr2(&[[0.5, 0.0], [0.5, 0.2], [0.0, 0.8]]),
            arr1(&[0.6, 0.4]),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(1),
        )
        .unwrap()
    }

    #[test]
    fn exhaustive_support_forces_distinct_items() {
        let p = PlantedModel::new(
            arr2(&[[0.5], [0.5]]),
            arr1(&[1.0]),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(2),
        )
        .unwrap();
        let x = sample_dataset(&p, 20, 3).unwrap();
        for u in 0..20 {
            assert_eq!(x.row(u), &[0, 1]);
        }
    }

    #[test]
    fn degenerate_component_and_marginal() {
        let p = PlantedModel::new(
            arr2(&[[1.0], [0.0], [0.0]]),
            arr1(&[1.0]),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(1),
        )
        .unwrap();
        let x = sample_dataset(&p, 50, 4).unwrap();
        for u in 0..50 {
            assert_eq!(x.row(u), &[0]);
        }
        let m1 = estimate_m1(&x).unwrap();
        assert_eq!(m1.to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn attempt_cap_accepts_short_rows() {
        // Only one item has mass, so two distinct items are unreachable.
        let p = PlantedModel::new(
            arr2(&[[1.0], [0.0]]),
            arr1(&[1.0]),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(2),
        )
        .unwrap();
        let x = sample_dataset(&p, 5, 9).unwrap();
        for u in 0..5 {
            assert_eq!(x.row(u), &[0]);
        }
    }

    #[test]
    fn items_per_user_validation() {
        let p = PlantedModel::new(
            arr2(&[[0.5], [0.5]]),
            arr1(&[1.0]),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(3),
        )
        .unwrap();
        assert!(matches!(
            sample_dataset(&p, 1, 0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = simple_planted();
        let a = sample_dataset(&p, 40, 77).unwrap();
        let b = sample_dataset(&p, 40, 77).unwrap();
        for u in 0..40 {
            assert_eq!(a.row(u), b.row(u));
        }
        let c = sample_dataset(&p, 40, 78).unwrap();
        let same = (0..40).all(|u| a.row(u) == c.row(u));
        assert!(!same, "different seeds should differ somewhere");
    }

    #[test]
    fn empirical_marginal_matches_mixture() {
        // Monte-Carlo check of the item marginal within 3 binomial standard
        // deviations per item (frozen seed).
        let p = PlantedModel::random(10, 2, 1.5, 21).unwrap();
        let p = PlantedModel::new(
            p.o().clone(),
            p.pi().clone(),
            UserPriorLaw::Shared,
            ItemsPerUserLaw::Fixed(1),
        )
        .unwrap();
        let n: usize = 10_000;
        let x = sample_dataset(&p, n, 1234).unwrap();
        let marginal = p.item_marginal();
        let mut counts = vec![0usize; p.d()];
        for row in x.rows() {
            for &i in row {
                counts[i as usize] += 1;
            }
        }
        for d in 0..p.d() {
            let expect = marginal[d] * n as f64;
            let sd = (n as f64 * marginal[d] * (1.0 - marginal[d])).sqrt();
            let diff = (counts[d] as f64 - expect).abs();
            assert!(
                diff <= 3.0 * sd + 1e-9,
                "item {d}: count {} expected {expect:.1} (sd {sd:.1})",
                counts[d]
            );
        }
    }

    #[test]
    fn triplet_round_trip_preserves_structure() {
        let p = simple_planted();
        let x = sample_dataset(&p, 15, 5).unwrap();
        let mut buf = Vec::new();
        write_triplets(&x, &mut buf).unwrap();
        let loaded = crate::data::load_triplets(
            std::io::Cursor::new(buf),
            &crate::data::TripletSchema::default(),
        )
        .unwrap();
        assert_eq!(loaded.matrix.n_users(), x.n_users());
        assert_eq!(loaded.matrix.nnz(), x.nnz());
    }

    #[test]
    fn alignment_identity() {
        let p = simple_planted();
        let est = MomModel::from_parts(p.o().clone(), p.pi().clone()).unwrap();
        let report = align_and_error(&p, &est);
        assert_eq!(report.perm, vec![0, 1]);
        assert!(report.max_mu_error < 1e-10);
        assert!(report.max_pi_error < 1e-10);
    }

    #[test]
    fn alignment_swapped_columns() {
        let p = simple_planted();
        let swapped_o = arr2(&[[0.0, 0.5], [0.2, 0.5], [0.8, 0.0]]);
        let est = MomModel::from_parts(swapped_o, arr1(&[0.4, 0.6])).unwrap();
        let report = align_and_error(&p, &est);
        assert_eq!(report.perm, vec![1, 0]);
        assert!(report.max_mu_error < 1e-10);
        assert!(report.max_pi_error < 1e-10);
    }

    #[test]
    fn alignment_reports_perturbation_distance() {
        let p = simple_planted();
        let mut o = p.o().clone();
        o[(0, 0)] += 0.01;
        // Column renormalizes inside the estimated model.
        let est = MomModel::from_parts(o, p.pi().clone()).unwrap();
        let report = align_and_error(&p, &est);
        let mut expect = 0.0f64;
        for r in 0..p.d() {
            let diff = p.o()[(r, 0)] - est.o()[(r, 0)];
            expect += diff * diff;
        }
        let expect = expect.sqrt();
        assert!((report.mu_errors[0] - expect).abs() < 1e-12);
        assert_eq!(report.max_mu_error, report.mu_errors[0]);
    }

    #[test]
    fn dirichlet_prior_still_samples() {
        let p = PlantedModel::new(
            arr2(&[[0.5, 0.1], [0.3, 0.2], [0.2, 0.7]]),
            arr1(&[0.5, 0.5]),
            UserPriorLaw::Dirichlet { concentration: 0.5 },
            ItemsPerUserLaw::Uniform { lo: 1, hi: 3 },
        )
        .unwrap();
        let x = sample_dataset(&p, 30, 11).unwrap();
        assert_eq!(x.n_users(), 30);
        assert!(x.nnz() >= 30);
    }
}
