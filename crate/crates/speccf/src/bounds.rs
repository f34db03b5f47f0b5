//! Sample-size thresholds and parameter-error bounds evaluated as a
//! diagnostic calculator.

use std::io::Write;

use crate::error::{Error, Result};

/// Inputs to the bound calculator. The spectral quantities refer to the
/// pairwise moment matrix; the count statistics come from the dataset; the
/// mixing-weight extremes are usually estimates and should be labeled as
/// such by the caller.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    pub sigma1: f64,
    pub sigma_k: f64,
    pub d2s: f64,
    pub d3s: f64,
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    pub pi_max: f64,
    pub pi_min: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            sigma1: 1.0,
            sigma_k: 1.0,
            d2s: 1.0,
            d3s: 1.0,
            k: 1,
            n: 1,
            delta: 0.5,
            pi_max: 1.0,
            pi_min: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

/// Evaluated thresholds and error bounds. The sample-size thresholds carry
/// an implied constant of one and are order-of-magnitude quantities.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub epsilon: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n_required: f64,
    pub mu_bound: f64,
    pub pi_bound: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn write_text(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("writing bound report", e);
        writeln!(out, "epsilon      {:.6e}", self.epsilon).map_err(io)?;
        writeln!(out, "n1           {:.6e}  (order-of-magnitude)", self.n1).map_err(io)?;
        writeln!(out, "n2           {:.6e}  (order-of-magnitude)", self.n2).map_err(io)?;
        writeln!(out, "n3           {:.6e}  (order-of-magnitude)", self.n3).map_err(io)?;
        writeln!(out, "n_required   {:.6e}", self.n_required).map_err(io)?;
        writeln!(out, "mu_bound     {:.6e}", self.mu_bound).map_err(io)?;
        writeln!(out, "pi_bound     {:.6e}", self.pi_bound).map_err(io)?;
        writeln!(out, "satisfied    {}", self.satisfied).map_err(io)?;
        Ok(())
    }

    pub fn write_tsv(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("writing bound report", e);
        writeln!(out, "epsilon\t{:.17e}", self.epsilon).map_err(io)?;
        writeln!(out, "n1\t{:.17e}", self.n1).map_err(io)?;
        writeln!(out, "n2\t{:.17e}", self.n2).map_err(io)?;
        writeln!(out, "n3\t{:.17e}", self.n3).map_err(io)?;
        writeln!(out, "n_required\t{:.17e}", self.n_required).map_err(io)?;
        writeln!(out, "mu_bound\t{:.17e}", self.mu_bound).map_err(io)?;
        writeln!(out, "pi_bound\t{:.17e}", self.pi_bound).map_err(io)?;
        writeln!(out, "satisfied\t{}", self.satisfied).map_err(io)?;
        Ok(())
    }
}

fn check(field: &'static str, ok: bool, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::param(field, reason.to_string()))
    }
}

/// Evaluates the sample-size thresholds and the parameter-error bounds.
/// Logarithms are natural throughout.
pub fn compute_bounds(input: &BoundInputs) -> Result<BoundReport> {
    check("sigma_k", input.sigma_k > 0.0, "must be positive")?;
    check(
        "sigma1",
        input.sigma1 >= input.sigma_k,
        "must be at least sigma_k",
    )?;
    check("d2s", input.d2s > 0.0, "must be positive")?;
    check("d3s", input.d3s > 0.0, "must be positive")?;
    check("k", input.k >= 1, "must be at least 1")?;
    check("n", input.n >= 1, "must be at least 1")?;
    check(
        "delta",
        input.delta > 0.0 && input.delta < 1.0,
        "must lie in (0, 1)",
    )?;
    check("pi_min", input.pi_min > 0.0, "must be positive")?;
    check(
        "pi_max",
        input.pi_max >= input.pi_min && input.pi_max <= 1.0,
        "must lie in [pi_min, 1]",
    )?;
    check("c1", input.c1 > 0.0, "must be positive")?;
    check("c2", input.c2 > 0.0, "must be positive")?;

    let epsilon = 1.0 + ((1.0 / input.delta).ln() / 2.0).sqrt();
    let k = input.k as f64;
    let n = input.n as f64;
    let sk = input.sigma_k;

    // Threshold from the restart analysis; floored at zero when the nested
    // logarithm degenerates (single state with equal weights).
    let inner = (k / input.c1) * (input.pi_max / input.pi_min).sqrt();
    let loglog = inner.ln().ln();
    let n1_raw = input.c2 * (k.ln() + loglog);
    let n1 = if n1_raw.is_finite() { n1_raw.max(0.0) } else { 0.0 };

    let n2 = (epsilon / (input.d2s * sk)).powi(2);
    let n3 = {
        let term = 10.0 / (input.d2s * sk.powf(2.5)) + (2.0 * 2.0f64.sqrt()) / (input.d3s * sk.powf(1.5));
        k * k * term * term * epsilon * epsilon
    };
    let n_required = n1.max(n2).max(n3);

    let s1_root = input.sigma1.sqrt();
    let mu_bound = (160.0 * s1_root / (input.d2s * sk.powf(2.5))
        + 32.0 * (2.0 * input.sigma1).sqrt() / (input.d3s * sk.powf(1.5))
        + 4.0 * s1_root / (input.d2s * sk))
        * epsilon
        / n.sqrt();
    let pi_bound =
        (200.0 / sk.powf(2.5) + 40.0 * 2.0f64.sqrt() / sk.powf(1.5)) * epsilon / (input.d3s * n.sqrt());

    Ok(BoundReport {
        epsilon,
        n1,
        n2,
        n3,
        n_required,
        mu_bound,
        pi_bound,
        satisfied: n >= n_required,
    })
}
