//! Weighted mean of noisy forecasters whose information sets are drawn i.i.d.
//! from a finite menu, tracked at one realised outcome as N grows.

use serde::{Deserialize, Serialize};

use crate::aggregators::revealed_partition;
use crate::error::{Error, Result};
use crate::experiments::jamison::{jamison_check, JamisonReport, WeightRule};
use crate::forecasters::{substream, InformationMenu, NoiseModel};
use crate::prob::{conditional_expectation, join_all, ProbabilitySpace, AS_TOL};

fn default_t_max() -> f64 {
    1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corollary1Config {
    pub space: ProbabilitySpace,
    /// Outcome value per outcome of the space.
    pub outcome: Vec<f64>,
    pub menu: InformationMenu,
    pub noise: NoiseModel,
    pub n_max: usize,
    pub weight_rule: WeightRule,
    #[serde(default)]
    pub seed: u64,
    /// 0-based index of the realised outcome ω.
    pub realized_outcome: usize,
    /// Horizon of the Jamison check on the weight rule.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub aggregate: f64,
    pub dist_target: f64,
    pub dist_efficient: f64,
    /// Standard error of the weighted mean, from the run's sample spread.
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary1Summary {
    pub realized_outcome: usize,
    pub n_max: usize,
    /// E(Y | H_i)(ω) for every menu entry.
    pub calibrated_values: Vec<f64>,
    /// Σ p_i E(Y | H_i)(ω).
    pub mixture_target: f64,
    /// E(Y | σ(H_i : p_i > 0))(ω).
    pub efficient_value: f64,
    /// σ(predictions) is strictly coarser than σ(H_i : p_i > 0).
    pub revealed_coarser: bool,
    pub final_aggregate: f64,
    pub final_standard_error: f64,
    pub final_dist_target: f64,
    pub final_dist_efficient: f64,
    /// Active calibrated values disagree at ω.
    pub values_disagree: bool,
    /// The final aggregate is strictly inside the active values' range.
    pub hull_interior: bool,
    /// 4·(noise σ + spread of active values)/√N.
    pub concentration_bound: f64,
    pub jamison: JamisonReport,
    pub checks: Vec<(String, bool)>,
}

impl Corollary1Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corollary1Run {
    pub trace: Vec<TraceRow>,
    pub summary: Corollary1Summary,
}

impl Corollary1Config {
    pub fn validate(&self) -> Result<()> {
        let n = self.space.n_outcomes();
        if self.outcome.len() != n {
            return Err(Error::InvalidConfig(format!(
                "outcome has {} values for {n} outcomes",
                self.outcome.len()
            )));
        }
        if self.menu.partitions()[0].n_outcomes() != n {
            return Err(Error::InvalidConfig(
                "menu partitions do not match the space".into(),
            ));
        }
        if self.realized_outcome >= n {
            return Err(Error::InvalidConfig(format!(
                "realized_outcome {} out of range",
                self.realized_outcome
            )));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidConfig("n_max must be >= 1".into()));
        }
        if let Some(len) = self.weight_rule.finite_len() {
            if len < self.n_max {
                return Err(Error::InvalidConfig(format!(
                    "explicit weights cover {len} forecasters, n_max is {}",
                    self.n_max
                )));
            }
        }
        Ok(())
    }
}

pub fn run_corollary1(cfg: &Corollary1Config) -> Result<Corollary1Run> {
    cfg.validate()?;
    let jamison = jamison_check(&cfg.weight_rule, cfg.t_max)?;
    if !jamison.passes() {
        return Err(Error::JamisonViolation(format!(
            "B_N/b_N stays below t = {} for all {} examined terms",
            cfg.t_max, jamison.terms
        )));
    }

    let space = &cfg.space;
    let y = space.variable(cfg.outcome.clone())?;
    let omega = cfg.realized_outcome;
    let predictions = cfg
        .menu
        .partitions()
        .iter()
        .map(|h| conditional_expectation(space, &y, h))
        .collect::<Result<Vec<_>>>()?;
    let calibrated_values: Vec<f64> = predictions.iter().map(|x| x.value(omega)).collect();
    let mixture_target: f64 = cfg
        .menu
        .probs()
        .iter()
        .zip(&calibrated_values)
        .map(|(p, c)| p * c)
        .sum();

    let active: Vec<usize> = cfg.menu.active().map(|(i, _)| i).collect();
    let union = join_all(active.iter().map(|&i| &cfg.menu.partitions()[i]))?;
    let efficient_value = conditional_expectation(space, &y, &union)?.value(omega);
    let active_preds: Vec<_> = active.iter().map(|&i| predictions[i].clone()).collect();
    let revealed = revealed_partition(space, &active_preds)?;
    let revealed_coarser = revealed.n_blocks() < union.n_blocks();

    let active_values: Vec<f64> = active.iter().map(|&i| calibrated_values[i]).collect();
    let lo = active_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = active_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let values_disagree = hi - lo > AS_TOL;

    let mut trace = Vec::with_capacity(cfg.n_max);
    // Weights are b_j / b_1 to keep the running sums well scaled.
    let ln_b1 = cfg.weight_rule.ln_b(1)?;
    let (mut sum_b, mut sum_b2, mut sum_bx) = (0.0, 0.0, 0.0);
    let (mut mean, mut m2) = (0.0, 0.0);
    for j in 0..cfg.n_max {
        let mut rng = substream(cfg.seed, j as u64);
        let entry = cfg.menu.draw_index(&mut rng);
        let eps = cfg.noise.error.sample(&mut rng);
        let x = cfg.noise.apply(calibrated_values[entry], eps)?;

        let b = (cfg.weight_rule.ln_b(j + 1)? - ln_b1).exp();
        sum_b += b;
        sum_b2 += b * b;
        sum_bx += b * x;
        let n = (j + 1) as f64;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);

        let aggregate = sum_bx / sum_b;
        let sd = if j == 0 { 0.0 } else { (m2 / (n - 1.0)).sqrt() };
        trace.push(TraceRow {
            n: j + 1,
            aggregate,
            dist_target: (aggregate - mixture_target).abs(),
            dist_efficient: (aggregate - efficient_value).abs(),
            standard_error: sd * sum_b2.sqrt() / sum_b,
        });
    }

    let last = *trace.last().expect("n_max >= 1");
    let hull_interior = values_disagree && lo < last.aggregate && last.aggregate < hi;
    let concentration_bound =
        4.0 * (cfg.noise.error.std_dev() + (hi - lo)) / (cfg.n_max as f64).sqrt();

    let mut checks = vec![
        (
            "aggregate_within_4se_of_mixture_target".to_string(),
            last.dist_target <= 4.0 * last.standard_error + AS_TOL,
        ),
        (
            "aggregate_within_concentration_bound".to_string(),
            last.dist_target <= concentration_bound + AS_TOL,
        ),
    ];
    if values_disagree {
        checks.push(("aggregate_strictly_inside_hull".to_string(), hull_interior));
    }

    Ok(Corollary1Run {
        summary: Corollary1Summary {
            realized_outcome: omega,
            n_max: cfg.n_max,
            calibrated_values,
            mixture_target,
            efficient_value,
            revealed_coarser,
            final_aggregate: last.aggregate,
            final_standard_error: last.standard_error,
            final_dist_target: last.dist_target,
            final_dist_efficient: last.dist_efficient,
            values_disagree,
            hull_interior,
            concentration_bound,
            jamison,
            checks,
        },
        trace,
    })
}

/// Menu of the fair-die forecasters σ({1}) and σ({6}) with equal probabilities.
pub fn die_config(
    noise: NoiseModel,
    n_max: usize,
    realized_outcome: usize,
    seed: u64,
) -> Result<Corollary1Config> {
    let setup = crate::experiments::example2::setup()?;
    Ok(Corollary1Config {
        space: setup.space,
        outcome: setup.y.values().to_vec(),
        menu: InformationMenu::new(setup.infos.to_vec(), vec![0.5, 0.5])?,
        noise,
        n_max,
        weight_rule: WeightRule::Equal,
        seed,
        realized_outcome,
        t_max: default_t_max(),
    })
}
