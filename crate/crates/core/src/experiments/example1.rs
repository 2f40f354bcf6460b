//! Two experts sharing one intern's signal, each holding one private signal.
//!
//! Realised on a discrete product space so that the linear-pool algebra can be
//! checked by direct summation.

use serde::{Deserialize, Serialize};

use crate::aggregators::{efficient_from_predictions, linear_pool_weights};
use crate::error::{Error, Result};
use crate::forecasters::calibrate;
use crate::prob::{
    disagreement_mass, join, moments, partition_from_rv, variance, ProbabilitySpace,
    RandomVariable, AS_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Config {
    /// Variance of expert 1's private signal.
    pub v1: f64,
    /// Variance of expert 2's private signal.
    pub v2: f64,
    /// Variance of the shared signal.
    pub v12: f64,
    #[serde(default = "default_atoms")]
    pub atoms_per_signal: usize,
    /// Variance of an independent residual added to the outcome.
    #[serde(default)]
    pub residual_var: f64,
    /// Weights of the arithmetic mean compared against the linear pool.
    #[serde(default = "default_weights")]
    pub weights: [f64; 2],
}

fn default_atoms() -> usize {
    3
}

fn default_weights() -> [f64; 2] {
    [0.5, 0.5]
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            v1: 1.0,
            v2: 1.0,
            v12: 1.0,
            atoms_per_signal: default_atoms(),
            residual_var: 0.0,
            weights: default_weights(),
        }
    }
}

impl Example1Config {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v1", self.v1),
            ("v2", self.v2),
            ("v12", self.v12),
            ("residual_var", self.residual_var),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        if self.atoms_per_signal < 2 {
            return Err(Error::InvalidConfig("atoms_per_signal must be >= 2".into()));
        }
        let [w1, w2] = self.weights;
        if !(w1 >= 0.0 && w2 >= 0.0) || (w1 + w2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "weights must be non-negative and sum to 1".into(),
            ));
        }
        if self.v1 <= 0.0 || self.v2 <= 0.0 {
            return Err(Error::NonTriviality(
                "both private signals need positive variance".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Report {
    pub n_outcomes: usize,
    /// Var(X_1), Var(X_2) measured on the space.
    pub delta: [f64; 2],
    /// Cov(X_1, X_2) measured on the space.
    pub rho: f64,
    /// Linear-pool weights from the measured covariance.
    pub beta: [f64; 2],
    /// The same weights from the closed form in δ and ρ.
    pub beta_closed_form: [f64; 2],
    /// Coefficient of the shared signal in the linear pool, β₁ + β₂.
    pub shared_weight: f64,
    /// Largest pointwise gap between β·X and β₁X₍₁₎ + β₂X₍₂₎ + (β₁+β₂)X₍₁,₂₎.
    pub decomposition_gap: f64,
    /// Largest pointwise gap between the experts' predictions and X₍ⱼ₎ + X₍₁,₂₎.
    pub expert_gap: f64,
    pub var_weighted: f64,
    pub var_linear_pool: f64,
    pub var_efficient: f64,
    /// Var(X_w − β·X) measured on the space.
    pub var_difference: f64,
    /// (w₁−β₁)²v₁ + (w₂−β₂)²v₂ + (1−β₁−β₂)²v₁₂.
    pub var_difference_formula: f64,
    /// P(X_w ≠ β·X).
    pub prob_weighted_ne_pool: f64,
    /// P(X_w ≠ X'') with X'' the brute-force efficient aggregate.
    pub prob_weighted_ne_efficient: f64,
    pub checks: Vec<(String, bool)>,
}

impl Example1Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Equally likely, symmetric, mean-zero support points with variance `v`.
fn signal_points(v: f64, atoms: usize) -> Vec<f64> {
    if v == 0.0 {
        return vec![0.0];
    }
    let k = atoms as f64;
    let raw_var = (k * k - 1.0) / 3.0;
    let scale = (v / raw_var).sqrt();
    (0..atoms)
        .map(|i| scale * (2.0 * i as f64 - (k - 1.0)))
        .collect()
}

/// Product space of the three intern signals (and the residual, if any).
pub struct Example1Space {
    pub space: ProbabilitySpace,
    pub private1: RandomVariable,
    pub private2: RandomVariable,
    pub shared: RandomVariable,
    pub y: RandomVariable,
}

pub fn build_space(cfg: &Example1Config) -> Result<Example1Space> {
    let p1 = signal_points(cfg.v1, cfg.atoms_per_signal);
    let p2 = signal_points(cfg.v2, cfg.atoms_per_signal);
    let p12 = signal_points(cfg.v12, cfg.atoms_per_signal);
    let res = if cfg.residual_var > 0.0 {
        let s = cfg.residual_var.sqrt();
        vec![-s, s]
    } else {
        vec![0.0]
    };
    let dims = [p1.len(), p2.len(), p12.len(), res.len()];
    let n: usize = dims.iter().product();
    let space = ProbabilitySpace::uniform(n)?;
    let coord = |i: usize, axis: usize| -> usize {
        let stride: usize = dims[..axis].iter().product();
        (i / stride) % dims[axis]
    };
    let private1 = space.variable_from_fn(|i| p1[coord(i, 0)])?;
    let private2 = space.variable_from_fn(|i| p2[coord(i, 1)])?;
    let shared = space.variable_from_fn(|i| p12[coord(i, 2)])?;
    let y = space.variable_from_fn(|i| {
        p1[coord(i, 0)] + p2[coord(i, 1)] + p12[coord(i, 2)] + res[coord(i, 3)]
    })?;
    Ok(Example1Space {
        space,
        private1,
        private2,
        shared,
        y,
    })
}

pub fn run_example1(cfg: &Example1Config) -> Result<Example1Report> {
    cfg.validate()?;
    let Example1Space {
        space,
        private1,
        private2,
        shared,
        y,
    } = build_space(cfg)?;

    let shared_info = partition_from_rv(&space, &shared, 0.0)?;
    let info1 = join(&partition_from_rv(&space, &private1, 0.0)?, &shared_info)?;
    let info2 = join(&partition_from_rv(&space, &private2, 0.0)?, &shared_info)?;
    let x1 = calibrate(&space, &y, &info1)?.into_prediction();
    let x2 = calibrate(&space, &y, &info2)?.into_prediction();

    let expert_gap = (0..space.n_outcomes())
        .map(|i| {
            let a = (x1.value(i) - private1.value(i) - shared.value(i)).abs();
            let b = (x2.value(i) - private2.value(i) - shared.value(i)).abs();
            a.max(b)
        })
        .fold(0.0, f64::max);

    let m1 = moments(&space, &x1, Some(&x2))?;
    let delta = [m1.variance, variance(&space, &x2)?];
    let rho = m1.covariance.expect("covariance requested");
    let cov_y = [
        moments(&space, &x1, Some(&y))?.covariance.unwrap(),
        moments(&space, &x2, Some(&y))?.covariance.unwrap(),
    ];
    let beta = linear_pool_weights(&[vec![delta[0], rho], vec![rho, delta[1]]], &cov_y)?;
    let beta = [beta[0], beta[1]];
    let denom = delta[0] * delta[1] - rho * rho;
    let beta_closed_form = [
        (delta[0] * delta[1] - rho * delta[1]) / denom,
        (delta[0] * delta[1] - rho * delta[0]) / denom,
    ];
    let shared_weight = beta[0] + beta[1];

    let [w1, w2] = cfg.weights;
    let pool = space.variable_from_fn(|i| beta[0] * x1.value(i) + beta[1] * x2.value(i))?;
    let weighted = space.variable_from_fn(|i| w1 * x1.value(i) + w2 * x2.value(i))?;
    let decomposition_gap = (0..space.n_outcomes())
        .map(|i| {
            let expanded = beta[0] * private1.value(i)
                + beta[1] * private2.value(i)
                + shared_weight * shared.value(i);
            (pool.value(i) - expanded).abs()
        })
        .fold(0.0, f64::max);
    let efficient = efficient_from_predictions(&space, &y, &[x1.clone(), x2.clone()])?;
    let diff = space.variable_from_fn(|i| weighted.value(i) - pool.value(i))?;
    let var_difference = variance(&space, &diff)?;
    let var_difference_formula = (w1 - beta[0]).powi(2) * cfg.v1
        + (w2 - beta[1]).powi(2) * cfg.v2
        + (1.0 - shared_weight).powi(2) * cfg.v12;

    let prob_weighted_ne_pool = disagreement_mass(&space, &weighted, &pool, AS_TOL)?;
    let prob_weighted_ne_efficient = disagreement_mass(&space, &weighted, &efficient, AS_TOL)?;

    let scale = cfg.v1 + cfg.v2 + cfg.v12;
    let tol = 1e-9 * scale.max(1.0);
    let checks = vec![
        (
            "expert_is_private_plus_shared".to_string(),
            expert_gap <= tol,
        ),
        (
            "delta_matches_signal_variances".to_string(),
            (delta[0] - cfg.v1 - cfg.v12).abs() <= tol
                && (delta[1] - cfg.v2 - cfg.v12).abs() <= tol,
        ),
        (
            "rho_matches_shared_variance".to_string(),
            (rho - cfg.v12).abs() <= tol,
        ),
        (
            "beta_matches_closed_form".to_string(),
            (beta[0] - beta_closed_form[0]).abs() <= 1e-9
                && (beta[1] - beta_closed_form[1]).abs() <= 1e-9,
        ),
        ("beta_positive".to_string(), beta[0] > 0.0 && beta[1] > 0.0),
        ("shared_weight_exceeds_one".to_string(), shared_weight > 1.0),
        ("pool_decomposition".to_string(), decomposition_gap <= tol),
        (
            "difference_variance_formula".to_string(),
            (var_difference - var_difference_formula).abs() <= tol,
        ),
        (
            "weighted_mean_differs_from_pool".to_string(),
            prob_weighted_ne_pool > 0.0,
        ),
        (
            "weighted_mean_inefficient".to_string(),
            prob_weighted_ne_efficient > 0.0,
        ),
    ];

    Ok(Example1Report {
        n_outcomes: space.n_outcomes(),
        delta,
        rho,
        beta,
        beta_closed_form,
        shared_weight,
        decomposition_gap,
        expert_gap,
        var_weighted: variance(&space, &weighted)?,
        var_linear_pool: variance(&space, &pool)?,
        var_efficient: variance(&space, &efficient)?,
        var_difference,
        var_difference_formula,
        prob_weighted_ne_pool,
        prob_weighted_ne_efficient,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_variances_give_two_thirds() {
        let r = run_example1(&Example1Config::default()).unwrap();
        assert_eq!(r.n_outcomes, 27);
        assert!((r.delta[0] - 2.0).abs() < 1e-12 && (r.rho - 1.0).abs() < 1e-12);
        assert!((r.beta[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.beta[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.shared_weight - 4.0 / 3.0).abs() < 1e-12);
        assert!(r.all_pass(), "{:?}", r.checks);
    }

    #[test]
    fn independent_experts_sum() {
        let cfg = Example1Config {
            v12: 0.0,
            ..Example1Config::default()
        };
        let r = run_example1(&cfg).unwrap();
        assert!((r.beta[0] - 1.0).abs() < 1e-12 && (r.beta[1] - 1.0).abs() < 1e-12);
        assert!(r.prob_weighted_ne_efficient > 0.0);
        assert!(r.all_pass(), "{:?}", r.checks);
    }

    #[test]
    fn degenerate_configs_refused() {
        let cfg = Example1Config {
            v1: 0.0,
            v2: 0.0,
            ..Example1Config::default()
        };
        assert!(matches!(run_example1(&cfg), Err(Error::NonTriviality(_))));
        let cfg = Example1Config {
            atoms_per_signal: 1,
            ..Example1Config::default()
        };
        assert!(matches!(run_example1(&cfg), Err(Error::InvalidConfig(_))));
        let cfg = Example1Config {
            v12: -1.0,
            ..Example1Config::default()
        };
        assert!(matches!(run_example1(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn residual_noise_keeps_the_algebra() {
        let cfg = Example1Config {
            v1: 0.5,
            v2: 2.0,
            v12: 0.8,
            atoms_per_signal: 4,
            residual_var: 1.5,
            weights: [0.3, 0.7],
        };
        let r = run_example1(&cfg).unwrap();
        assert_eq!(r.n_outcomes, 128);
        assert!(r.all_pass(), "{:?}", r.checks);
    }

    #[test]
    fn signal_points_have_requested_variance() {
        for k in 2..7 {
            let pts = signal_points(2.5, k);
            let mean = pts.iter().sum::<f64>() / k as f64;
            let var = pts.iter().map(|p| p * p).sum::<f64>() / k as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 2.5).abs() < 1e-12);
        }
    }
}
