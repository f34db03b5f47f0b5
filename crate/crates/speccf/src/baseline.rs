//! PLSI trained by EM over the same latent structure, as the iterative
//! comparator for the moment pipeline.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::model::{floored_simplex, PROB_FLOOR};

pub const PLSI_MAGIC: &str = "SPECCF-PLSI";
pub const PLSI_VERSION: &str = "1";
pub const DEFAULT_REL_TOL: f64 = 0.001;
pub const DEFAULT_MAX_ITER: usize = 200;

/// PLSI parameters: item distributions per state and per-user state
/// distributions, plus the log-likelihood trace of the training run.
#[derive(Debug, Clone)]
pub struct PlsiModel {
    p_y_given_h: Array2<f64>,
    p_h_given_u: Array2<f64>,
    pub loglik_trace: Vec<f64>,
    pub stopped_by_tolerance: bool,
}

impl PlsiModel {
    pub fn d(&self) -> usize {
        self.p_y_given_h.nrows()
    }

    pub fn k(&self) -> usize {
        self.p_y_given_h.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.p_h_given_u.nrows()
    }

    pub fn p_y_given_h(&self) -> &Array2<f64> {
        &self.p_y_given_h
    }

    pub fn p_h_given_u(&self) -> &Array2<f64> {
        &self.p_h_given_u
    }

    /// PLSI stores a distribution per user on top of the item distributions.
    pub fn parameter_count(&self) -> usize {
        (self.d() - 1) * self.k() + self.n_users() * (self.k() - 1)
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("writing PLSI model file", e);
        writeln!(
            out,
            "{PLSI_MAGIC} {PLSI_VERSION} {} {} {}",
            self.d(),
            self.k(),
            self.n_users()
        )
        .map_err(io)?;
        for r in 0..self.d() {
            let row: Vec<String> = (0..self.k())
                .map(|c| format!("{:.16e}", self.p_y_given_h[(r, c)]))
                .collect();
            writeln!(out, "{}", row.join(" ")).map_err(io)?;
        }
        for u in 0..self.n_users() {
            let row: Vec<String> = (0..self.k())
                .map(|c| format!("{:.16e}", self.p_h_given_u[(u, c)]))
                .collect();
            writeln!(out, "{}", row.join(" ")).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedModel("empty file".to_string()))?
            .map_err(|e| Error::io("reading PLSI model file", e))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 5 || tokens[0] != PLSI_MAGIC {
            return Err(Error::MalformedModel("bad PLSI header".to_string()));
        }
        if tokens[1] != PLSI_VERSION {
            return Err(Error::UnsupportedVersion(format!(
                "{} {}",
                tokens[0], tokens[1]
            )));
        }
        let parse = |t: &str| -> Result<usize> {
            t.parse()
                .map_err(|_| Error::MalformedModel("bad header dimension".to_string()))
        };
        let (d, k, n) = (parse(tokens[2])?, parse(tokens[3])?, parse(tokens[4])?);
        let mut read_matrix = |rows: usize, what: &str| -> Result<Array2<f64>> {
            let mut m = Array2::<f64>::zeros((rows, k));
            for r in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::MalformedModel(format!("file truncated in {what}")))?
                    .map_err(|e| Error::io("reading PLSI model file", e))?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::MalformedModel(format!("bad number in {what}")))
                    })
                    .collect::<Result<_>>()?;
                if values.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "{what} row {r} has {} values, expected {k}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("{what} row {r}")));
                }
                for c in 0..k {
                    m[(r, c)] = values[c];
                }
            }
            Ok(m)
        };
        let p_y_given_h = read_matrix(d, "item distributions")?;
        let p_h_given_u = read_matrix(n, "user distributions")?;
        Ok(PlsiModel {
            p_y_given_h,
            p_h_given_u,
            loglik_trace: Vec::new(),
            stopped_by_tolerance: false,
        })
    }
}

fn data_loglik(x: &InteractionMatrix, p_y: &Array2<f64>, theta: &Array2<f64>) -> f64 {
    let k = p_y.ncols();
    let mut loglik = 0.0;
    for (u, row) in x.rows().enumerate() {
        for &y in row {
            let mut mix = 0.0;
            for c in 0..k {
                mix += p_y[(y as usize, c)] * theta[(u, c)];
            }
            loglik += mix.ln();
        }
    }
    loglik
}

/// Standard PLSI EM with seeded Dirichlet initialization.
///
/// Each iteration re-estimates both conditionals from expected counts and
/// records the log-likelihood of the updated parameters; training stops once
/// the improvement drops below `rel_tol * |previous|` or after `max_iter`
/// iterations. The probability floor is applied to the final parameters
/// only, after the trace is complete, so EM monotonicity is untouched.
pub fn plsi_train(
    x: &InteractionMatrix,
    k: usize,
    seed: u64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<PlsiModel> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1".to_string()));
    }
    if x.nnz() == 0 {
        return Err(Error::AllRowsEmpty);
    }
    let d = x.n_items();
    let n = x.n_users();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_gamma = Gamma::new(1.0f64, 1.0).unwrap();
    let mut p_y = Array2::from_shape_fn((d, k), |_| unit_gamma.sample(&mut rng).max(1e-300));
    for c in 0..k {
        let total: f64 = (0..d).map(|r| p_y[(r, c)]).sum();
        for r in 0..d {
            p_y[(r, c)] /= total;
        }
    }
    let mut theta = Array2::from_shape_fn((n, k), |_| unit_gamma.sample(&mut rng).max(1e-300));
    for u in 0..n {
        let total: f64 = (0..k).map(|c| theta[(u, c)]).sum();
        for c in 0..k {
            theta[(u, c)] /= total;
        }
    }

    let mut trace = Vec::new();
    let mut stopped_by_tolerance = false;
    let mut resp = vec![0.0f64; k];

    for _iter in 0..max_iter {
        let mut item_counts = Array2::<f64>::zeros((d, k));
        let mut user_counts = Array2::<f64>::zeros((n, k));
        for (u, row) in x.rows().enumerate() {
            for &y in row {
                let yi = y as usize;
                let mut total = 0.0;
                for c in 0..k {
                    let w = p_y[(yi, c)] * theta[(u, c)];
                    resp[c] = w;
                    total += w;
                }
                if total <= 0.0 {
                    continue;
                }
                for c in 0..k {
                    let r = resp[c] / total;
                    item_counts[(yi, c)] += r;
                    user_counts[(u, c)] += r;
                }
            }
        }
        for c in 0..k {
            let total: f64 = (0..d).map(|r| item_counts[(r, c)]).sum();
            if total > 0.0 {
                for r in 0..d {
                    p_y[(r, c)] = item_counts[(r, c)] / total;
                }
            }
        }
        for u in 0..n {
            let total: f64 = (0..k).map(|c| user_counts[(u, c)]).sum();
            if total > 0.0 {
                for c in 0..k {
                    theta[(u, c)] = user_counts[(u, c)] / total;
                }
            }
        }

        let loglik = data_loglik(x, &p_y, &theta);
        let improved = trace
            .last()
            .map(|&prev: &f64| loglik - prev < rel_tol * prev.abs());
        trace.push(loglik);
        if improved == Some(true) {
            stopped_by_tolerance = true;
            break;
        }
    }

    // Floor for serving. Columns that already sit above the floor are left
    // untouched so the closed-form single-state estimate stays exact.
    for c in 0..k {
        if (0..d).any(|r| p_y[(r, c)] < PROB_FLOOR) {
            let mut col: Vec<f64> = (0..d).map(|r| p_y[(r, c)]).collect();
            if floored_simplex(&mut col) {
                for r in 0..d {
                    p_y[(r, c)] = col[r];
                }
            }
        }
    }
    for u in 0..n {
        if (0..k).any(|c| theta[(u, c)] < PROB_FLOOR) {
            let mut row: Vec<f64> = (0..k).map(|c| theta[(u, c)]).collect();
            if floored_simplex(&mut row) {
                for c in 0..k {
                    theta[(u, c)] = row[c];
                }
            }
        }
    }

    Ok(PlsiModel {
        p_y_given_h: p_y,
        p_h_given_u: theta,
        loglik_trace: trace,
        stopped_by_tolerance,
    })
}

/// Item probabilities for a training user: the mixture of item distributions
/// under the user's state distribution.
pub fn plsi_predict(user: usize, m: &PlsiModel) -> Result<Array1<f64>> {
    if user >= m.n_users() {
        return Err(Error::UnknownUser {
            key: user.to_string(),
        });
    }
    let mut scores = Array1::<f64>::zeros(m.d());
    for y in 0..m.d() {
        let mut s = 0.0;
        for c in 0..m.k() {
            s += m.p_y_given_h[(y, c)] * m.p_h_given_u[(user, c)];
        }
        scores[y] = s;
    }
    Ok(scores)
}
