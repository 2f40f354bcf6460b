//! Counting-function test for strong consistency of weighted averages.
//!
//! With weights w_j = b_j / B_N, the weighted average of i.i.d. terms
//! converges a.s. iff limsup γ(t)/t < ∞, where γ(t) = #{N : B_N / b_N ≤ t}.
//! On a finite horizon we report the supremum of γ(t)/t over t ≤ t_max and
//! flag sequences whose ratios B_N / b_N never pass t_max.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positive weight sequences b_1, b_2, ….
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// b_j = 1.
    Equal,
    /// b_j = j^p.
    Power { p: f64 },
    /// b_j = ratio^j.
    Geometric { ratio: f64 },
    /// A finite explicit sequence.
    Explicit { values: Vec<f64> },
}

impl WeightRule {
    /// ln b_j for j ≥ 1.
    pub fn ln_b(&self, j: usize) -> Result<f64> {
        debug_assert!(j >= 1);
        match self {
            WeightRule::Equal => Ok(0.0),
            WeightRule::Power { p } => Ok(p * (j as f64).ln()),
            WeightRule::Geometric { ratio } => {
                if *ratio > 0.0 && ratio.is_finite() {
                    Ok(j as f64 * ratio.ln())
                } else {
                    Err(Error::NonPositiveWeight { index: j })
                }
            }
            WeightRule::Explicit { values } => match values.get(j - 1) {
                Some(&v) if v > 0.0 && v.is_finite() => Ok(v.ln()),
                Some(_) => Err(Error::NonPositiveWeight { index: j }),
                None => Err(Error::InvalidConfig(format!(
                    "explicit weight sequence has no term {j}"
                ))),
            },
        }
    }

    /// Number of available terms, if finite.
    pub fn finite_len(&self) -> Option<usize> {
        match self {
            WeightRule::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightRule::Power { p } if !p.is_finite() => {
                Err(Error::InvalidConfig(format!("power exponent {p}")))
            }
            WeightRule::Explicit { values } if values.is_empty() => Err(Error::InvalidConfig(
                "explicit weight sequence is empty".into(),
            )),
            _ => {
                let n = self.finite_len().unwrap_or(1);
                for j in 1..=n {
                    self.ln_b(j)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub t: f64,
    pub gamma: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JamisonReport {
    pub t_max: f64,
    /// Terms of the sequence that were examined.
    pub terms: usize,
    /// γ(t)/t on a logarithmic grid of t in [1, t_max].
    pub ratio_estimates: Vec<RatioEstimate>,
    /// sup over t ≤ t_max of γ(t)/t, evaluated at the jump points of γ.
    pub sup_ratio: f64,
    /// True when B_N / b_N stayed at or below t_max for every examined term:
    /// γ(t_max) is then only bounded by the horizon.
    pub saturated: bool,
}

impl JamisonReport {
    pub fn passes(&self) -> bool {
        !self.saturated
    }
}

/// Default number of terms examined per unit of t_max.
const HORIZON_FACTOR: f64 = 64.0;

pub fn jamison_check(rule: &WeightRule, t_max: f64) -> Result<JamisonReport> {
    if !(t_max > 1.0) || !t_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "t_max must exceed 1, got {t_max}"
        )));
    }
    rule.validate()?;
    let cap = rule
        .finite_len()
        .unwrap_or_else(|| (HORIZON_FACTOR * t_max).ceil().max(1024.0) as usize);

    // B_N / b_N = 1 + (B_{N-1} / b_{N-1}) · b_{N-1} / b_N, computed in log space.
    let mut counted: Vec<f64> = Vec::new();
    let mut ratio = 1.0;
    let mut prev_ln = rule.ln_b(1)?;
    let mut terms = 1;
    let mut escaped = false;
    if ratio <= t_max {
        counted.push(ratio);
    }
    for n in 2..=cap {
        let ln = rule.ln_b(n)?;
        ratio = 1.0 + ratio * (prev_ln - ln).exp();
        prev_ln = ln;
        terms = n;
        if ratio <= t_max {
            counted.push(ratio);
        } else if rule.finite_len().is_none() {
            // The built-in rules have non-decreasing ratios.
            escaped = true;
            break;
        } else {
            escaped = true;
        }
    }
    let saturated = !escaped;

    counted.sort_by(f64::total_cmp);
    let mut sup_ratio: f64 = 0.0;
    for (k, &r) in counted.iter().enumerate() {
        let last_tie = k + 1 == counted.len() || counted[k + 1] > r;
        if last_tie {
            sup_ratio = sup_ratio.max((k + 1) as f64 / r);
        }
    }

    let grid_points = 60;
    let ratio_estimates = (0..=grid_points)
        .map(|i| {
            let t = t_max.powf(i as f64 / grid_points as f64);
            let gamma = counted.partition_point(|&r| r <= t);
            RatioEstimate {
                t,
                gamma,
                ratio: gamma as f64 / t,
            }
        })
        .collect();

    Ok(JamisonReport {
        t_max,
        terms,
        ratio_estimates,
        sup_ratio,
        saturated,
    })
}
