//! Quantile aggregation of the adjusted p-values across splits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack when turning `γB` into an order-statistic rank, so that grid values
/// such as `0.35 · 50` do not round up past an integer.
const RANK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AggregationConfig {
    Fixed { gamma: f64 },
    Adaptive { gamma_min: f64, step: f64 },
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig::Adaptive { gamma_min: 0.05, step: 0.025 }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregationConfig::Fixed { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")))
            }
            AggregationConfig::Adaptive { gamma_min, step } => {
                if !(gamma_min > 0.0 && gamma_min < 1.0) {
                    return Err(Error::InvalidInput(format!("gamma-min must lie in (0, 1), got {gamma_min}")));
                }
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidInput(format!("gamma step must be positive, got {step}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// γ values the aggregate is minimized over.
    pub fn gammas(&self) -> Vec<f64> {
        match *self {
            AggregationConfig::Fixed { gamma } => vec![gamma],
            AggregationConfig::Adaptive { gamma_min, step } => gamma_grid(gamma_min, step),
        }
    }
}

/// `γ_min, γ_min + step, …` up to and including 1.
pub fn gamma_grid(gamma_min: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let g = gamma_min + i as f64 * step;
        if g >= 1.0 - RANK_SLACK {
            break;
        }
        grid.push(g);
        i += 1;
    }
    grid.push(1.0);
    grid
}

/// `min(1, p·m)`, and 1 whenever `m` is infinite.
pub fn adjusted_pvalue(p: f64, m: f64) -> f64 {
    if m.is_infinite() {
        1.0
    } else {
        (p * m).min(1.0)
    }
}

pub fn adjusted_pvalues(p: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    if p.len() != m.len() {
        return Err(Error::Dimension(format!("{} p-values but {} multipliers", p.len(), m.len())));
    }
    Ok(p.iter().zip(m).map(|(&p, &m)| adjusted_pvalue(p, m)).collect())
}

fn rank(gamma: f64, b: usize) -> usize {
    ((gamma * b as f64 - RANK_SLACK).ceil() as usize).clamp(1, b)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no p-values to aggregate".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// The `⌈γB⌉`-th smallest value.
pub fn q_gamma(p_tilde: &[f64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let v = sorted(p_tilde)?;
    Ok(v[rank(gamma, v.len()) - 1])
}

/// `Q(γ) = min(1, q_γ / γ)`.
pub fn aggregate_fixed(p_tilde: &[f64], gamma: f64) -> Result<f64> {
    Ok((q_gamma(p_tilde, gamma)? / gamma).min(1.0))
}

/// `min(1, (1 − ln γ_min) · min_γ Q(γ))` over the grid from `γ_min` to 1.
pub fn aggregate_adaptive(p_tilde: &[f64], gamma_min: f64, step: f64) -> Result<f64> {
    AggregationConfig::Adaptive { gamma_min, step }.validate()?;
    let v = sorted(p_tilde)?;
    Ok(adaptive_sorted(&v, gamma_min, step))
}

fn adaptive_sorted(v: &[f64], gamma_min: f64, step: f64) -> f64 {
    let best = gamma_grid(gamma_min, step)
        .into_iter()
        .map(|g| (v[rank(g, v.len()) - 1] / g).min(1.0))
        .fold(f64::INFINITY, f64::min);
    ((1.0 - gamma_min.ln()) * best).min(1.0)
}

pub fn aggregate(p_tilde: &[f64], config: &AggregationConfig) -> Result<f64> {
    match *config {
        AggregationConfig::Fixed { gamma } => aggregate_fixed(p_tilde, gamma),
        AggregationConfig::Adaptive { gamma_min, step } => aggregate_adaptive(p_tilde, gamma_min, step),
    }
}
