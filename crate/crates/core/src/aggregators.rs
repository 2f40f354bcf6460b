//! Mean-type aggregators, convex-hull classification, the efficient
//! aggregator, and linear-pool regression weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    conditional_expectation, join_all, partition_from_rv, Partition, ProbabilitySpace,
    RandomVariable, LEVEL_TOL,
};

/// Default tie tolerance for hull classification.
pub const TIE_TOL: f64 = 1e-9;

/// Probit inputs are clipped into `[PROBIT_CLIP, 1 - PROBIT_CLIP]`.
pub const PROBIT_CLIP: f64 = 1e-12;

/// Largest covariance condition number accepted by [`linear_pool_weights`].
pub const MAX_CONDITION: f64 = 1e12;

/// Strictly monotone transform Φ of a quasi-arithmetic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// Φ(x) = x^a; `a = 0` is the geometric mean.
    Power(f64),
    Logit,
    Probit,
}

impl Transform {
    fn forward(&self, x: f64) -> Result<f64> {
        match *self {
            Transform::Power(a) => {
                power_domain(a, x)?;
                Ok(if a == 0.0 { x.ln() } else { signed_pow(x, a) })
            }
            Transform::Logit => {
                unit_domain("logit", x)?;
                Ok((x / (1.0 - x)).ln())
            }
            Transform::Probit => {
                unit_domain("probit", x)?;
                let clipped = x.clamp(PROBIT_CLIP, 1.0 - PROBIT_CLIP);
                if clipped != x {
                    tracing::warn!(value = x, clipped, "probit input clipped");
                }
                Ok(inverse_normal_cdf(clipped))
            }
        }
    }

    fn inverse(&self, z: f64) -> f64 {
        match *self {
            Transform::Power(a) => {
                if a == 0.0 {
                    z.exp()
                } else {
                    signed_pow(z, 1.0 / a)
                }
            }
            Transform::Logit => 1.0 / (1.0 + (-z).exp()),
            Transform::Probit => normal_cdf(z),
        }
    }
}

fn is_odd_integer(a: f64) -> bool {
    a.fract() == 0.0 && (a.abs() % 2.0) == 1.0
}

fn power_domain(a: f64, x: f64) -> Result<()> {
    let ok = if a <= 0.0 || a.fract() != 0.0 {
        x > 0.0
    } else if is_odd_integer(a) {
        true
    } else {
        x >= 0.0
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "power transform with a = {a} is not monotone at {x}"
        )))
    }
}

fn signed_pow(x: f64, a: f64) -> f64 {
    if x < 0.0 {
        -(-x).powf(a)
    } else {
        x.powf(a)
    }
}

fn unit_domain(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "{name} transform needs values in (0, 1), got {x}"
        )))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against the erfc-based CDF.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const LOW: f64 = 0.02425;

    let x = if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// A pooling rule applied pointwise to a vector of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub enum AggregatorSpec {
    /// Σ w_j x_j; `None` means equal weights.
    Arithmetic {
        weights: Option<Vec<f64>>,
    },
    /// Φ⁻¹(Σ w_j Φ(x_j)).
    QuasiArithmetic {
        transform: Transform,
        weights: Option<Vec<f64>>,
    },
    Median,
    Trimmed {
        trim_fraction: f64,
    },
    Winsorized {
        trim_fraction: f64,
    },
    Midrange,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trim_fraction: Option<f64>,
}

impl TryFrom<SpecDoc> for AggregatorSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let trim = || {
            doc.trim_fraction
                .ok_or_else(|| Error::InvalidSpec(format!("{} needs trim_fraction", doc.kind)))
        };
        let spec = match doc.kind.as_str() {
            "arithmetic" => AggregatorSpec::Arithmetic {
                weights: doc.weights.clone(),
            },
            "quasi_arithmetic" => {
                let transform = match doc.transform.as_deref() {
                    Some("power") => Transform::Power(doc.a.ok_or_else(|| {
                        Error::InvalidSpec("power transform needs exponent a".into())
                    })?),
                    Some("logit") => Transform::Logit,
                    Some("probit") => Transform::Probit,
                    Some(other) => {
                        return Err(Error::InvalidSpec(format!("unknown transform {other}")))
                    }
                    None => {
                        return Err(Error::InvalidSpec(
                            "quasi_arithmetic needs a transform".into(),
                        ))
                    }
                };
                AggregatorSpec::QuasiArithmetic {
                    transform,
                    weights: doc.weights.clone(),
                }
            }
            "median" => AggregatorSpec::Median,
            "trimmed" => AggregatorSpec::Trimmed {
                trim_fraction: trim()?,
            },
            "winsorized" => AggregatorSpec::Winsorized {
                trim_fraction: trim()?,
            },
            "midrange" => AggregatorSpec::Midrange,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown aggregator kind {other}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<AggregatorSpec> for SpecDoc {
    fn from(spec: AggregatorSpec) -> Self {
        let mut doc = SpecDoc {
            kind: spec.kind_name().to_string(),
            weights: None,
            transform: None,
            a: None,
            trim_fraction: None,
        };
        match spec {
            AggregatorSpec::Arithmetic { weights } => doc.weights = weights,
            AggregatorSpec::QuasiArithmetic { transform, weights } => {
                doc.weights = weights;
                doc.transform = Some(
                    match transform {
                        Transform::Power(a) => {
                            doc.a = Some(a);
                            "power"
                        }
                        Transform::Logit => "logit",
                        Transform::Probit => "probit",
                    }
                    .to_string(),
                );
            }
            AggregatorSpec::Trimmed { trim_fraction }
            | AggregatorSpec::Winsorized { trim_fraction } => {
                doc.trim_fraction = Some(trim_fraction)
            }
            AggregatorSpec::Median | AggregatorSpec::Midrange => {}
        }
        doc
    }
}

impl AggregatorSpec {
    pub fn equal_mean() -> Self {
        AggregatorSpec::Arithmetic { weights: None }
    }

    pub fn weighted_mean(weights: Vec<f64>) -> Result<Self> {
        let spec = AggregatorSpec::Arithmetic {
            weights: Some(weights),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AggregatorSpec::Arithmetic { .. } => "arithmetic",
            AggregatorSpec::QuasiArithmetic { .. } => "quasi_arithmetic",
            AggregatorSpec::Median => "median",
            AggregatorSpec::Trimmed { .. } => "trimmed",
            AggregatorSpec::Winsorized { .. } => "winsorized",
            AggregatorSpec::Midrange => "midrange",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AggregatorSpec::Arithmetic { weights }
            | AggregatorSpec::QuasiArithmetic { weights, .. } => {
                if let Some(w) = weights {
                    check_weights(w)?;
                }
                if let AggregatorSpec::QuasiArithmetic {
                    transform: Transform::Power(a),
                    ..
                } = self
                {
                    if !a.is_finite() {
                        return Err(Error::InvalidSpec(format!("power exponent {a}")));
                    }
                }
                Ok(())
            }
            AggregatorSpec::Trimmed { trim_fraction }
            | AggregatorSpec::Winsorized { trim_fraction } => {
                if (0.0..0.5).contains(trim_fraction) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "trim_fraction must lie in [0, 0.5), got {trim_fraction}"
                    )))
                }
            }
            AggregatorSpec::Median | AggregatorSpec::Midrange => Ok(()),
        }
    }

    fn weights_for(&self, n: usize) -> Result<Vec<f64>> {
        let weights = match self {
            AggregatorSpec::Arithmetic { weights }
            | AggregatorSpec::QuasiArithmetic { weights, .. } => weights.as_ref(),
            _ => None,
        };
        match weights {
            Some(w) if w.len() != n => Err(Error::WeightMismatch {
                expected: w.len(),
                got: n,
            }),
            Some(w) => Ok(w.clone()),
            None => Ok(vec![1.0 / n as f64; n]),
        }
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidWeights("no weights".into()));
    }
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidWeights(
            "weights must be finite and >= 0".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Evaluates the aggregator on one prediction vector.
///
/// Results are clamped into `[min(xs), max(xs)]` to absorb rounding in the
/// transform round trip.
pub fn apply(spec: &AggregatorSpec, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = xs.len();
    let value = match spec {
        AggregatorSpec::Arithmetic { .. } => {
            let w = spec.weights_for(n)?;
            w.iter().zip(xs).map(|(w, x)| w * x).sum()
        }
        AggregatorSpec::QuasiArithmetic { transform, .. } => {
            let w = spec.weights_for(n)?;
            let mut acc = 0.0;
            for (w, &x) in w.iter().zip(xs) {
                let z = transform.forward(x)?;
                if *w > 0.0 {
                    acc += w * z;
                }
            }
            transform.inverse(acc)
        }
        AggregatorSpec::Median => {
            let s = sorted(xs);
            if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            }
        }
        AggregatorSpec::Trimmed { trim_fraction } => {
            spec.validate()?;
            let k = (trim_fraction * n as f64).floor() as usize;
            let s = sorted(xs);
            mean_of(&s[k..n - k])
        }
        AggregatorSpec::Winsorized { trim_fraction } => {
            spec.validate()?;
            let k = (trim_fraction * n as f64).floor() as usize;
            let s = sorted(xs);
            let (floor, ceil) = (s[k], s[n - 1 - k]);
            mean_of(&s.iter().map(|x| x.clamp(floor, ceil)).collect::<Vec<_>>())
        }
        AggregatorSpec::Midrange => 0.5 * (lo + hi),
    };
    Ok(value.clamp(lo, hi))
}

/// Applies `spec` outcome by outcome to a list of predictions on one space.
pub fn aggregate(
    space: &ProbabilitySpace,
    spec: &AggregatorSpec,
    predictions: &[RandomVariable],
) -> Result<RandomVariable> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.iter().any(|x| x.space_id() != space.id()) {
        return Err(Error::SpaceMismatch);
    }
    let mut row = vec![0.0; predictions.len()];
    let values = (0..space.n_outcomes())
        .map(|i| {
            for (slot, x) in row.iter_mut().zip(predictions) {
                *slot = x.value(i);
            }
            apply(spec, &row)
        })
        .collect::<Result<Vec<_>>>()?;
    RandomVariable::new(space, values)
}

/// Where a value sits relative to the convex hull of a prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullPosition {
    Unanimous,
    Interior,
    AtMin,
    AtMax,
    Outside,
}

pub fn hull_classify(xs: &[f64], value: f64, tie_tol: f64) -> HullPosition {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= tie_tol {
        HullPosition::Unanimous
    } else if (value - lo).abs() <= tie_tol {
        HullPosition::AtMin
    } else if (value - hi).abs() <= tie_tol {
        HullPosition::AtMax
    } else if lo < value && value < hi {
        HullPosition::Interior
    } else {
        HullPosition::Outside
    }
}

/// Hull position of `x` at every outcome, against the predictions there.
pub fn hull_positions(
    predictions: &[RandomVariable],
    x: &RandomVariable,
    tie_tol: f64,
) -> Vec<HullPosition> {
    (0..x.len())
        .map(|i| {
            let row: Vec<f64> = predictions.iter().map(|p| p.value(i)).collect();
            hull_classify(&row, x.value(i), tie_tol)
        })
        .collect()
}

/// Partition generated by the predictions themselves: the join of their level sets.
pub fn revealed_partition(
    space: &ProbabilitySpace,
    predictions: &[RandomVariable],
) -> Result<Partition> {
    let parts = predictions
        .iter()
        .map(|x| partition_from_rv(space, x, LEVEL_TOL))
        .collect::<Result<Vec<_>>>()?;
    join_all(&parts)
}

/// E(Y | X_1, …, X_N) for already-computed predictions.
pub fn efficient_from_predictions(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    predictions: &[RandomVariable],
) -> Result<RandomVariable> {
    let joint = revealed_partition(space, predictions)?;
    conditional_expectation(space, y, &joint)
}

/// The efficient aggregator X'' for forecasters with the given information.
///
/// Conditions on what the calibrated predictions reveal, σ(X_1, …, X_N), which
/// can be coarser than the join of the raw information partitions.
pub fn efficient_aggregator(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    infos: &[Partition],
) -> Result<RandomVariable> {
    if infos.is_empty() {
        return Err(Error::EmptyInput);
    }
    let predictions = infos
        .iter()
        .map(|g| conditional_expectation(space, y, g))
        .collect::<Result<Vec<_>>>()?;
    efficient_from_predictions(space, y, &predictions)
}

/// Regression weights β = Cov(X, Y) Σ⁻¹ of the best linear pool.
///
/// `cov` is the N×N prediction covariance (row-major, symmetric) and
/// `cov_with_y` the vector Cov(X_j, Y). For calibrated predictions the latter
/// equals the diagonal of `cov`.
pub fn linear_pool_weights(cov: &[Vec<f64>], cov_with_y: &[f64]) -> Result<Vec<f64>> {
    let n = cov_with_y.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if cov.len() != n || cov.iter().any(|row| row.len() != n) {
        return Err(Error::SizeMismatch {
            left: cov.len(),
            right: n,
        });
    }
    let sigma = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let singular = sigma.singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    let rhs = DVector::from_column_slice(cov_with_y);
    // Σ is symmetric, so β Σ = c is the same system as Σ βᵀ = cᵀ.
    let beta = sigma
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularCovariance { condition })?;
    Ok(beta.iter().copied().collect())
}

/// β for two calibrated predictions from their variances and covariance.
pub fn two_forecaster_weights(delta1: f64, delta2: f64, rho: f64) -> Result<[f64; 2]> {
    let beta = linear_pool_weights(&[vec![delta1, rho], vec![rho, delta2]], &[delta1, delta2])?;
    Ok([beta[0], beta[1]])
}
