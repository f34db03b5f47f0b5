//! The deployable model: item distributions per latent state and the mixing
//! weights, plus posterior and prediction math on top of them.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::tensor::TensorEigenpair;
use crate::whitening::WhiteningTransform;

/// Probability floor applied to recovered distributions so log-space
/// arithmetic stays finite.
pub const PROB_FLOOR: f64 = 1e-12;

pub const MODEL_MAGIC: &str = "SPECCF";
pub const MODEL_VERSION: &str = "1";

/// Clips entries below [`PROB_FLOOR`] up to the floor and rescales the rest
/// so the slice sums to one with every entry at or above the floor.
/// Returns false when no probability mass survives.
pub(crate) fn floored_simplex(values: &mut [f64]) -> bool {
    loop {
        let mut n_floor = 0usize;
        let mut above = 0.0f64;
        for v in values.iter() {
            if *v < PROB_FLOOR {
                n_floor += 1;
            } else {
                above += *v;
            }
        }
        if !(above > 0.0) || !above.is_finite() {
            return false;
        }
        let target = 1.0 - n_floor as f64 * PROB_FLOOR;
        if !(target > 0.0) {
            return false;
        }
        if n_floor == 0 {
            for v in values.iter_mut() {
                *v /= above;
            }
        } else {
            let scale = target / above;
            for v in values.iter_mut() {
                if *v < PROB_FLOOR {
                    *v = PROB_FLOOR;
                } else {
                    *v *= scale;
                }
            }
        }
        if values.iter().all(|&v| v >= PROB_FLOOR) {
            return true;
        }
    }
}

/// Recovered latent-variable model: `o` is a column-stochastic `D x K`
/// matrix of item probabilities per state, `pi` the state mixing weights.
#[derive(Debug, Clone)]
pub struct MomModel {
    o: Array2<f64>,
    pi: Array1<f64>,
}

impl MomModel {
    /// Wraps raw parameters, flooring and renormalizing each column and the
    /// mixing weights.
    pub fn from_parts(mut o: Array2<f64>, mut pi: Array1<f64>) -> Result<Self> {
        let (d, k) = o.dim();
        if pi.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} mixing weights for {} columns",
                pi.len(),
                k
            )));
        }
        if d == 0 || k == 0 {
            return Err(Error::DimensionMismatch(
                "model must have at least one item and one state".to_string(),
            ));
        }
        for c in 0..k {
            let mut col: Vec<f64> = (0..d).map(|r| o[(r, c)]).collect();
            if !floored_simplex(&mut col) {
                return Err(Error::DegenerateTopic { index: c });
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
        Ok(MomModel { o, pi })
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

    /// Free parameters: each column spends D-1 degrees of freedom and the
    /// mixing weights K-1; per-user posteriors are derived, not stored.
    pub fn effective_parameter_count(&self) -> usize {
        (self.d() - 1) * self.k() + (self.k() - 1)
    }

    /// Posterior over latent states given a set of observed items, computed
    /// in log space with a max shift. An empty set returns the prior.
    pub fn posterior_for(&self, items: &[u32]) -> Array1<f64> {
        let mut dedup: Vec<u32> = items.to_vec();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.is_empty() {
            return self.pi.clone();
        }
        for &y in &dedup {
            assert!(
                (y as usize) < self.d(),
                "history item {y} out of range for {} items",
                self.d()
            );
        }
        let k = self.k();
        let mut logits = vec![0.0f64; k];
        for c in 0..k {
            let mut s = self.pi[c].ln();
            for &y in &dedup {
                s += self.o[(y as usize, c)].ln();
            }
            logits[c] = s;
        }
        softmax(&logits)
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("writing model file", e);
        writeln!(
            out,
            "{MODEL_MAGIC} {MODEL_VERSION} {} {}",
            self.d(),
            self.k()
        )
        .map_err(io)?;
        writeln!(out, "{}", join_floats(self.pi.iter())).map_err(io)?;
        for r in 0..self.d() {
            writeln!(out, "{}", join_floats(self.o.row(r).iter())).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::MalformedModel("empty file".to_string()))?;
        let header = header.map_err(|e| Error::io("reading model file", e))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(Error::MalformedModel(format!(
                "header has {} fields, expected 4",
                tokens.len()
            )));
        }
        if tokens[0] != MODEL_MAGIC {
            return Err(Error::MalformedModel(format!(
                "unrecognized magic '{}'",
                tokens[0]
            )));
        }
        if tokens[1] != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(format!(
                "{} {}",
                tokens[0], tokens[1]
            )));
        }
        let d: usize = tokens[2]
            .parse()
            .map_err(|_| Error::MalformedModel("bad item count".to_string()))?;
        let k: usize = tokens[3]
            .parse()
            .map_err(|_| Error::MalformedModel("bad state count".to_string()))?;
        if d == 0 || k == 0 {
            return Err(Error::MalformedModel(
                "model must have at least one item and one state".to_string(),
            ));
        }

        let mut read_row = |expected: usize, what: &str| -> Result<Vec<f64>> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| Error::MalformedModel(format!("file truncated before {what}")))?;
            let line = line.map_err(|e| Error::io("reading model file", e))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        Error::MalformedModel(format!("line {}: bad number '{t}'", idx + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "line {}: expected {expected} values for {what}, found {}",
                    idx + 1,
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} (line {})", idx + 1)));
            }
            Ok(values)
        };

        let pi_values = read_row(k, "mixing weights")?;
        let mut o = Array2::<f64>::zeros((d, k));
        for r in 0..d {
            let row = read_row(k, &format!("item row {r}"))?;
            for c in 0..k {
                o[(r, c)] = row[c];
            }
        }
        for (idx, extra) in lines {
            let extra = extra.map_err(|e| Error::io("reading model file", e))?;
            if !extra.trim().is_empty() {
                return Err(Error::MalformedModel(format!(
                    "unexpected trailing content at line {}",
                    idx + 1
                )));
            }
        }

        let pi = Array1::from_vec(pi_values);
        let pi_sum: f64 = pi.iter().sum();
        if (pi_sum - 1.0).abs() > 1e-9 || pi.iter().any(|&v| v <= 0.0) {
            return Err(Error::MalformedModel(
                "mixing weights are not a probability vector".to_string(),
            ));
        }
        for c in 0..k {
            let col_sum: f64 = (0..d).map(|r| o[(r, c)]).sum();
            if (col_sum - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedModel(format!(
                    "column {c} sums to {col_sum}, expected 1"
                )));
            }
        }
        Ok(MomModel { o, pi })
    }
}

fn join_floats<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn softmax(logits: &[f64]) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Array1::from_vec(out)
}

/// Rebuilds the item distributions and mixing weights from the whitener and
/// the tensor eigenpairs. Each raw column is the pseudo-inverse image of an
/// eigenvector; the eigenvalue scale cancels in the column normalization and
/// the mixing weights come from the inverse squared eigenvalues. Components
/// are ordered by descending weight.
pub fn recover_parameters(
    wt: &WhiteningTransform,
    pairs: &[TensorEigenpair],
) -> Result<MomModel> {
    let k = pairs.len();
    if k == 0 {
        return Err(Error::param("eigenpairs", "none provided".to_string()));
    }
    let d = wt.dim();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut weights = vec![0.0f64; k];
    for (idx, pair) in pairs.iter().enumerate() {
        if !(pair.lambda > 0.0) {
            return Err(Error::param(
                "eigenpairs",
                format!("eigenvalue {idx} is not positive"),
            ));
        }
        if pair.vector.len() != wt.k() {
            return Err(Error::DimensionMismatch(format!(
                "eigenvector {idx} has length {} but the whitener has rank {}",
                pair.vector.len(),
                wt.k()
            )));
        }
        let v = Array1::from_vec(pair.vector.clone());
        let mut raw = wt.w_pinv().dot(&v).to_vec();
        // The eigenvector sign is arbitrary; take the representative with
        // positive mass before clipping.
        let total: f64 = raw.iter().sum();
        if total < 0.0 {
            for entry in &mut raw {
                *entry = -*entry;
            }
        }
        if !floored_simplex(&mut raw) {
            return Err(Error::DegenerateTopic { index: idx });
        }
        columns.push(raw);
        weights[idx] = pair.lambda.powi(-2);
    }
    if !floored_simplex(&mut weights) {
        return Err(Error::param(
            "eigenpairs",
            "mixing weights have no mass".to_string(),
        ));
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut o = Array2::<f64>::zeros((d, k));
    let mut pi = Array1::<f64>::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        pi[dst] = weights[src];
        for r in 0..d {
            o[(r, dst)] = columns[src][r];
        }
    }
    Ok(MomModel { o, pi })
}

/// Per-user posteriors over the latent states.
#[derive(Debug, Clone)]
pub struct UserPosterior {
    rows: Array2<f64>,
}

impl UserPosterior {
    pub fn n_users(&self) -> usize {
        self.rows.nrows()
    }

    pub fn k(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, user: usize) -> ndarray::ArrayView1<'_, f64> {
        self.rows.row(user)
    }
}

/// Computes every user's posterior in one counted pass over the data. Users
/// with no interactions receive the prior.
pub fn compute_posteriors(x: &InteractionMatrix, m: &MomModel) -> Result<UserPosterior> {
    if x.n_items() != m.d() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} items but the model has {}",
            x.n_items(),
            m.d()
        )));
    }
    let k = m.k();
    let ln_pi: Vec<f64> = m.pi().iter().map(|&p| p.ln()).collect();
    let ln_o = m.o().mapv(f64::ln);
    let mut rows = Array2::<f64>::zeros((x.n_users(), k));
    let mut logits = vec![0.0f64; k];
    for (u, row) in x.scan_rows().enumerate() {
        if row.is_empty() {
            for c in 0..k {
                rows[(u, c)] = m.pi()[c];
            }
            continue;
        }
        for c in 0..k {
            let mut s = ln_pi[c];
            for &y in row {
                s += ln_o[(y as usize, c)];
            }
            logits[c] = s;
        }
        let posterior = softmax(&logits);
        for c in 0..k {
            rows[(u, c)] = posterior[c];
        }
    }
    Ok(UserPosterior { rows })
}

/// Probability of each item for a user with the given interaction history:
/// the mixture of state distributions under the history's posterior.
pub fn predict_scores(history: &[u32], m: &MomModel) -> Array1<f64> {
    let posterior = m.posterior_for(history);
    m.o().dot(&posterior)
}

/// Top-`tau` items by predicted score, highest first, ties broken by
/// ascending item id. With `exclude_seen` the history items are removed
/// before truncation.
pub fn recommend_top(history: &[u32], m: &MomModel, tau: usize, exclude_seen: bool) -> Vec<u32> {
    assert!(tau >= 1, "tau must be at least 1");
    let scores = predict_scores(history, m);
    let seen: HashSet<u32> = if exclude_seen {
        history.iter().copied().collect()
    } else {
        HashSet::new()
    };
    let mut order: Vec<u32> = (0..m.d() as u32)
        .filter(|item| !seen.contains(item))
        .collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(tau);
    order
}
