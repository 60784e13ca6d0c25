//! Closed-form bounds for choosing and costing the number of tables.
//!
//! All logarithms are natural.

use crate::error::{Error, Result};

/// Chernoff base `γ` for the upper tail of an `(α, β)`-maximal aggregation:
/// `Pr[σ(ŝ) ≥ τ] ≤ m·γ^L` where `s_max` is the largest true similarity.
///
/// Requires `0 < s_max < 1` and `α·s_max < τ < α`; the result lies in
/// `(s_max, 1)`, increasing in `s_max` and decreasing in `τ`.
pub fn gamma_upper(s_max: f64, tau: f64, alpha: f64) -> Result<f64> {
    if !(s_max > 0.0 && s_max < 1.0) {
        return Err(Error::domain(format!("s_max must lie in (0, 1), got {s_max}")));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(tau > alpha * s_max && tau < alpha) {
        return Err(Error::domain(format!(
            "tau must lie in (alpha*s_max, alpha) = ({}, {alpha}), got {tau}",
            alpha * s_max
        )));
    }
    let ratio = s_max * (alpha - tau) / (tau * (1.0 - s_max));
    let scale = alpha * (1.0 - s_max) / (alpha - tau);
    Ok(((tau / alpha) * ratio.ln() + scale.ln()).exp())
}

/// Hoeffding bound on the lower tail: `min(1, 2·exp(-2LΔ²/β²))`.
pub fn lower_tail_bound(num_tables: usize, delta_gap: f64, beta: f64) -> Result<f64> {
    if num_tables == 0 {
        return Err(Error::domain("L must be >= 1"));
    }
    if delta_gap.is_nan() || delta_gap <= 0.0 {
        return Err(Error::domain(format!("Delta must be > 0, got {delta_gap}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    let exponent = -2.0 * num_tables as f64 * delta_gap * delta_gap / (beta * beta);
    Ok((2.0 * exponent.exp()).min(1.0))
}

/// Both terms of the table-count prescription, before taking the ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableTerms {
    /// Union bound over competing sets: `ln(2(N-1)·m_q·m/δ) / ln(1/γ_max)`.
    pub upper_tail: f64,
    /// Lower tail of the best set: `ln(4·m_q/δ)·β² / (2Δ²)`.
    pub lower_tail: f64,
}

impl TableTerms {
    pub fn tables(&self) -> usize {
        (self.upper_tail.max(self.lower_tail).ceil() as usize).max(1)
    }

    pub fn binding(&self) -> &'static str {
        if self.upper_tail >= self.lower_tail {
            "upper-tail"
        } else {
            "lower-tail"
        }
    }
}

/// Inputs for the table-count and cost calculators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub num_sets: usize,
    pub query_size: usize,
    pub set_size: usize,
    /// Failure probability `δ`.
    pub delta: f64,
    /// Score gap `Δ = (B★ - B′)/3`.
    pub gap: f64,
    pub gamma_max: f64,
    pub beta: f64,
}

impl BoundInputs {
    fn check(&self) -> Result<()> {
        if self.num_sets == 0 || self.query_size == 0 || self.set_size == 0 {
            return Err(Error::domain("N, m_q and m must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max < 1.0) {
            return Err(Error::domain(format!(
                "gamma_max must lie in (0, 1), got {}",
                self.gamma_max
            )));
        }
        if self.gap.is_nan() || self.gap <= 0.0 {
            return Err(Error::domain(format!("Delta must be > 0, got {}", self.gap)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    pub fn table_terms(&self) -> Result<TableTerms> {
        self.check()?;
        let (n, mq, m) = (self.num_sets as f64, self.query_size as f64, self.set_size as f64);
        // With a single set there are no competitors to union-bound over.
        let upper_tail = if self.num_sets > 1 {
            (2.0 * (n - 1.0) * mq * m / self.delta).ln() / (1.0 / self.gamma_max).ln()
        } else {
            0.0
        };
        let lower_tail = (4.0 * mq / self.delta).ln() * self.beta * self.beta / (2.0 * self.gap * self.gap);
        Ok(TableTerms { upper_tail, lower_tail })
    }
}

/// Number of tables that makes the top set win with probability `1 - δ`.
pub fn recommended_tables(inputs: &BoundInputs) -> Result<usize> {
    Ok(inputs.table_terms()?.tables())
}

/// Operation-count estimate `m_q·L·d + m_q·N·L·T`: hashing the query plus
/// walking buckets of at most `T` entries for every set.
pub fn query_cost_estimate(
    query_size: usize,
    num_sets: usize,
    dim: usize,
    num_tables: usize,
    bucket_threshold: usize,
) -> Result<u128> {
    if query_size == 0 || num_sets == 0 || dim == 0 || num_tables == 0 {
        return Err(Error::domain("m_q, N, d and L must be >= 1"));
    }
    let (mq, n, d, l, t) = (
        query_size as u128,
        num_sets as u128,
        dim as u128,
        num_tables as u128,
        bucket_threshold as u128,
    );
    Ok(mq * l * d + mq * n * l * t)
}

/// Grid-search approximation of `γ_max = max_{s_max} γ(s_max, α·s_max + Δ)`
/// over `s_max ∈ (0, (α - Δ)/α)`.
pub fn gamma_max_grid(gap: f64, alpha: f64, steps: usize) -> Result<f64> {
    if !(gap > 0.0 && gap < alpha) {
        return Err(Error::domain(format!("Delta must lie in (0, alpha), got {gap}")));
    }
    if steps == 0 {
        return Err(Error::domain("grid needs at least one step"));
    }
    let hi = ((alpha - gap) / alpha).min(1.0);
    let mut best = f64::NEG_INFINITY;
    for i in 1..=steps {
        let s = hi * i as f64 / (steps + 1) as f64;
        if let Ok(g) = gamma_upper(s, alpha * s + gap, alpha) {
            best = best.max(g);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::domain("no valid grid point"))
    }
}
