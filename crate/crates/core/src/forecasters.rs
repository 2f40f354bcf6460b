//! Calibrated and noisy forecasters.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{conditional_expectation, Partition, ProbabilitySpace, RandomVariable};

/// A forecaster's information partition together with its calibrated prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    info: Partition,
    prediction: RandomVariable,
}

impl Forecaster {
    pub fn info(&self) -> &Partition {
        &self.info
    }

    pub fn prediction(&self) -> &RandomVariable {
        &self.prediction
    }

    pub fn into_prediction(self) -> RandomVariable {
        self.prediction
    }
}

/// The forecaster that reports E(Y | σ(info)).
pub fn calibrate(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    info: &Partition,
) -> Result<Forecaster> {
    let prediction = conditional_expectation(space, y, info)?;
    Ok(Forecaster {
        info: info.clone(),
        prediction,
    })
}

/// Independent RNG stream for one forecaster under a master seed.
///
/// Every forecaster index gets its own ChaCha stream, so draws do not depend
/// on the order in which forecasters are generated.
pub fn substream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A finite menu of information sets with sampling probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MenuDoc", into = "MenuDoc")]
pub struct InformationMenu {
    partitions: Vec<Partition>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MenuDoc {
    partitions: Vec<Partition>,
    probs: Vec<f64>,
}

impl TryFrom<MenuDoc> for InformationMenu {
    type Error = Error;

    fn try_from(doc: MenuDoc) -> Result<Self> {
        InformationMenu::new(doc.partitions, doc.probs)
    }
}

impl From<InformationMenu> for MenuDoc {
    fn from(m: InformationMenu) -> Self {
        MenuDoc {
            partitions: m.partitions,
            probs: m.probs,
        }
    }
}

impl InformationMenu {
    pub fn new(partitions: Vec<Partition>, probs: Vec<f64>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::EmptyMenu);
        }
        if partitions.len() != probs.len() {
            return Err(Error::InvalidMenu(format!(
                "{} partitions but {} probabilities",
                partitions.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidMenu(
                "probabilities must be finite and >= 0".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMenu(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let n = partitions[0].n_outcomes();
        if partitions.iter().any(|p| p.n_outcomes() != n) {
            return Err(Error::InvalidMenu(
                "partitions cover different outcome counts".into(),
            ));
        }
        Ok(Self { partitions, probs })
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Menu entries with positive sampling probability.
    pub fn active(&self) -> impl Iterator<Item = (usize, &Partition)> {
        self.partitions
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.probs[i] > 0.0)
    }

    /// Draws a menu index with the menu's probabilities.
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(&self.probs)
            .expect("validated menu has positive total mass")
            .sample(rng)
    }

    /// True when two active entries give calibrated predictions that differ on
    /// a positive-probability outcome.
    pub fn is_non_trivial(&self, space: &ProbabilitySpace, y: &RandomVariable) -> Result<bool> {
        let preds = self
            .active()
            .map(|(_, p)| conditional_expectation(space, y, p))
            .collect::<Result<Vec<_>>>()?;
        for (i, a) in preds.iter().enumerate() {
            for b in &preds[i + 1..] {
                if crate::prob::disagreement_mass(space, a, b, crate::prob::AS_TOL)? > 0.0 {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// Menu indices for `n` forecasters, forecaster `j` drawing from substream `j`.
pub fn sample_menu_indices(menu: &InformationMenu, n: usize, seed: u64) -> Result<Vec<usize>> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    if n == 0 {
        return Err(Error::InvalidMenu("need at least one draw".into()));
    }
    let dist = WeightedIndex::new(menu.probs()).map_err(|e| Error::InvalidMenu(e.to_string()))?;
    Ok((0..n)
        .map(|j| dist.sample(&mut substream(seed, j as u64)))
        .collect())
}

/// Draws `n` information sets i.i.d. from the menu.
pub fn sample_information_sets(
    menu: &InformationMenu,
    n: usize,
    seed: u64,
) -> Result<Vec<Partition>> {
    Ok(sample_menu_indices(menu, n, seed)?
        .into_iter()
        .map(|i| menu.partitions()[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Additive,
    LogitAdditive,
}

/// Mean-zero error distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ErrorDist {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl ErrorDist {
    pub fn std_dev(&self) -> f64 {
        match *self {
            ErrorDist::Gaussian { sigma } => sigma,
            ErrorDist::Uniform { half_width } => half_width / 3f64.sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma)
                        .expect("validated sigma")
                        .sample(rng)
                }
            }
            ErrorDist::Uniform { half_width } => {
                if half_width == 0.0 {
                    0.0
                } else {
                    Uniform::new_inclusive(-half_width, half_width).sample(rng)
                }
            }
        }
    }
}

/// How noise is added to a calibrated prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    #[serde(flatten)]
    pub error: ErrorDist,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, error: ErrorDist) -> Result<Self> {
        let scale = match error {
            ErrorDist::Gaussian { sigma } => sigma,
            ErrorDist::Uniform { half_width } => half_width,
        };
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise scale must be finite and >= 0, got {scale}"
            )));
        }
        Ok(Self { kind, error })
    }

    pub fn additive(error: ErrorDist) -> Result<Self> {
        Self::new(NoiseKind::Additive, error)
    }

    /// Q(x, ε): the deterministic map from a calibrated value and an error draw
    /// to the reported prediction. Strictly increasing in `x` for fixed `ε`.
    pub fn apply(&self, calibrated_value: f64, eps: f64) -> Result<f64> {
        match self.kind {
            NoiseKind::Additive => Ok(calibrated_value + eps),
            NoiseKind::LogitAdditive => {
                if !(calibrated_value > 0.0 && calibrated_value < 1.0) {
                    return Err(Error::DomainError(format!(
                        "logit noise needs a value in (0, 1), got {calibrated_value}"
                    )));
                }
                let z = (calibrated_value / (1.0 - calibrated_value)).ln() + eps;
                Ok(1.0 / (1.0 + (-z).exp()))
            }
        }
    }
}

/// X̃ = Q(x, ε) with ε drawn from the model's error distribution.
pub fn noisy_prediction<R: Rng + ?Sized>(
    calibrated_value: f64,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    let eps = model.error.sample(rng);
    model.apply(calibrated_value, eps)
}
