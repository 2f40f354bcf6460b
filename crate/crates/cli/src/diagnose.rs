//! Configuration schema and execution of the `diagnose` command.

use serde::{Deserialize, Serialize};

use infoagg_core::aggregators::{aggregate, efficient_from_predictions, AggregatorSpec};
use infoagg_core::diagnostics::{diagnose, DiagnoseOptions, DiagnosticsReport, SubsetBudget};
use infoagg_core::forecasters::calibrate;
use infoagg_core::prob::{make_space, Partition, ProbabilitySpace, RandomVariable};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    /// Outcome weights; normalized on load.
    pub weights: Vec<f64>,
    /// Value of Y on each outcome.
    pub outcome: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecasterEntry {
    pub name: String,
    /// Information partition as lists of 0-based outcome indices.
    pub blocks: Vec<Vec<usize>>,
}

/// An aggregator table: `kind = "efficient"` or any aggregator spec, plus an
/// optional display name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregatorEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: toml::Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default)]
    pub seed: u64,
    /// Tolerance for the calibration, marginal and extremizing checks.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Random subsets tested for extremizing once there are more than 12 forecasters.
    #[serde(default = "default_random_subsets")]
    pub random_subsets: usize,
    pub space: SpaceSection,
    pub forecasters: Vec<ForecasterEntry>,
    pub aggregators: Vec<AggregatorEntry>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_random_subsets() -> usize {
    SubsetBudget::default().random_subsets
}

#[derive(Debug, Clone)]
pub enum Rule {
    Efficient,
    Spec(AggregatorSpec),
}

impl Rule {
    pub fn is_arithmetic(&self) -> bool {
        matches!(self, Rule::Spec(AggregatorSpec::Arithmetic { .. }))
    }
}

pub struct Prepared {
    pub space: ProbabilitySpace,
    pub y: RandomVariable,
    pub names: Vec<String>,
    pub predictions: Vec<RandomVariable>,
    pub rules: Vec<(String, Rule)>,
}

impl DiagnoseConfig {
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        if self.forecasters.is_empty() {
            return Err(CliError::Config(
                "at least one forecaster is required".into(),
            ));
        }
        if self.aggregators.is_empty() {
            return Err(CliError::Config(
                "at least one aggregator is required".into(),
            ));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!(
                "tol must be finite and >= 0, got {}",
                self.tol
            )));
        }
        let space = make_space(&self.space.weights)?;
        let y = space.variable(self.space.outcome.clone())?;
        let mut names = Vec::new();
        let mut predictions = Vec::new();
        for f in &self.forecasters {
            let info = Partition::from_blocks(f.blocks.clone())?;
            if info.n_outcomes() != space.n_outcomes() {
                return Err(CliError::Config(format!(
                    "forecaster {} partitions {} outcomes, space has {}",
                    f.name,
                    info.n_outcomes(),
                    space.n_outcomes()
                )));
            }
            names.push(f.name.clone());
            predictions.push(calibrate(&space, &y, &info)?.into_prediction());
        }
        let mut rules = Vec::new();
        for (i, entry) in self.aggregators.iter().enumerate() {
            let kind = entry
                .spec
                .get("kind")
                .and_then(|k| k.as_str())
                .ok_or_else(|| CliError::Config(format!("aggregator {i} needs a string `kind`")))?;
            let rule = if kind == "efficient" {
                if entry.spec.len() != 1 {
                    return Err(CliError::Config(format!(
                        "aggregator {i}: `efficient` takes no parameters"
                    )));
                }
                Rule::Efficient
            } else {
                let spec: AggregatorSpec = toml::Value::Table(entry.spec.clone())
                    .try_into()
                    .map_err(|e| CliError::Config(format!("aggregator {i}: {e}")))?;
                if let Some(w) = spec_weights(&spec) {
                    if w.len() != predictions.len() {
                        return Err(CliError::Config(format!(
                            "aggregator {i}: {} weights for {} forecasters",
                            w.len(),
                            predictions.len()
                        )));
                    }
                }
                Rule::Spec(spec)
            };
            let name = entry.name.clone().unwrap_or_else(|| kind.to_string());
            rules.push((name, rule));
        }
        Ok(Prepared {
            space,
            y,
            names,
            predictions,
            rules,
        })
    }

    pub fn options(&self) -> DiagnoseOptions {
        DiagnoseOptions {
            tol: self.tol,
            budget: SubsetBudget {
                random_subsets: self.random_subsets,
                seed: self.seed,
            },
            ..DiagnoseOptions::default()
        }
    }
}

fn spec_weights(spec: &AggregatorSpec) -> Option<&Vec<f64>> {
    match spec {
        AggregatorSpec::Arithmetic { weights }
        | AggregatorSpec::QuasiArithmetic { weights, .. } => weights.as_ref(),
        _ => None,
    }
}

pub struct Outcome {
    pub name: String,
    pub rule: Rule,
    pub values: RandomVariable,
    pub report: DiagnosticsReport,
}

pub fn run(cfg: &DiagnoseConfig) -> Result<(Prepared, Vec<Outcome>), CliError> {
    let prepared = cfg.prepare()?;
    let opts = cfg.options();
    let mut outcomes = Vec::new();
    for (name, rule) in &prepared.rules {
        let values = match rule {
            Rule::Efficient => {
                efficient_from_predictions(&prepared.space, &prepared.y, &prepared.predictions)?
            }
            Rule::Spec(spec) => aggregate(&prepared.space, spec, &prepared.predictions)?,
        };
        let report = diagnose(
            &prepared.space,
            &prepared.y,
            &prepared.predictions,
            &values,
            opts,
        )?;
        outcomes.push(Outcome {
            name: name.clone(),
            rule: rule.clone(),
            values,
            report,
        });
    }
    Ok((prepared, outcomes))
}
