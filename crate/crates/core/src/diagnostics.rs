//! Executable checks of calibration, extremizing, under-confidence and
//! efficiency for an aggregate on a finite space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregators::{efficient_from_predictions, revealed_partition};
use crate::error::{Error, Result};
use crate::forecasters::substream;
use crate::prob::{
    conditional_expectation, expectation, join_all, partition_from_rv, variance, ProbabilitySpace,
    RandomVariable, AS_TOL, LEVEL_TOL,
};

/// Variance excess that counts as an extremizing violation.
pub const VIOLATION_TOL: f64 = 1e-10;

/// Largest forecaster count for exhaustive subset enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    pub gap: f64,
    pub pass: bool,
}

/// Largest |E(Y | atom) − X(atom)| over positive-probability level sets of `x`.
pub fn check_calibration(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    x: &RandomVariable,
    tol: f64,
) -> Result<CalibrationCheck> {
    let atoms = partition_from_rv(space, x, LEVEL_TOL)?;
    let recal = conditional_expectation(space, y, &atoms)?;
    let mut gap: f64 = 0.0;
    for block in atoms.blocks() {
        let mass = space.prob(block);
        if mass <= 0.0 {
            continue;
        }
        let x_atom = block
            .iter()
            .map(|&i| space.weight(i) * x.value(i))
            .sum::<f64>()
            / mass;
        gap = gap.max((recal.value(block[0]) - x_atom).abs());
    }
    Ok(CalibrationCheck {
        gap,
        pass: gap <= tol,
    })
}

/// E(Y | X), the calibrated version of `x`.
pub fn recalibrate(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    x: &RandomVariable,
) -> Result<RandomVariable> {
    let atoms = partition_from_rv(space, x, LEVEL_TOL)?;
    conditional_expectation(space, y, &atoms)
}

/// Mass of outcomes where `x` and `x_eff` differ by more than `tol`.
pub fn inefficiency_probability(
    space: &ProbabilitySpace,
    x: &RandomVariable,
    x_eff: &RandomVariable,
    tol: f64,
) -> Result<f64> {
    crate::prob::disagreement_mass(space, x, x_eff, tol)
}

/// Which forecaster subsets to test for extremizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetBudget {
    /// Number of random subsets drawn when N exceeds the exhaustive limit.
    pub random_subsets: usize,
    pub seed: u64,
}

impl Default for SubsetBudget {
    fn default() -> Self {
        Self {
            random_subsets: 200,
            seed: 0,
        }
    }
}

/// Subsets of `0..n` to test, in a deterministic order.
///
/// For `n <= 12` this is every non-empty subset in bitmask order. Larger `n`
/// gets all singletons, the full set, then seeded random subsets.
pub fn enumerate_subsets(n: usize, budget: SubsetBudget) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    if n <= EXHAUSTIVE_LIMIT {
        return (1u32..(1 << n))
            .map(|mask| (0..n).filter(|&j| mask & (1 << j) != 0).collect())
            .collect();
    }
    let mut out: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
    out.push((0..n).collect());
    let mut rng = substream(budget.seed, u64::MAX);
    for _ in 0..budget.random_subsets {
        let mut subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if subset.is_empty() {
            subset.push(rng.gen_range(0..n));
        }
        out.push(subset);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Forecaster indices (0-based) of the subset.
    pub subset: Vec<usize>,
    /// Var(E(Y | X_j, j ∈ subset)) − Var(x).
    pub excess: f64,
}

/// Subsets whose efficient aggregate has larger variance than `x`.
pub fn check_extremizing(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    predictions: &[RandomVariable],
    x: &RandomVariable,
    budget: SubsetBudget,
) -> Result<Vec<Violation>> {
    let var_x = variance(space, x)?;
    let level_sets = predictions
        .iter()
        .map(|p| partition_from_rv(space, p, LEVEL_TOL))
        .collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    for subset in enumerate_subsets(predictions.len(), budget) {
        let joint = join_all(subset.iter().map(|&j| &level_sets[j]))?;
        let sub_eff = conditional_expectation(space, y, &joint)?;
        let excess = variance(space, &sub_eff)? - var_x;
        if excess > VIOLATION_TOL {
            violations.push(Violation { subset, excess });
        }
    }
    Ok(violations)
}

/// Largest residual of X_j(A) = Σ_k P(B_k)/P(A) · X''(B_k) over forecasters
/// `j`, positive-probability level-set atoms `A` of X_j, and atoms `B_k ⊆ A`
/// of the joint revealed partition.
pub fn decomposition_residual(
    space: &ProbabilitySpace,
    predictions: &[RandomVariable],
    x_eff: &RandomVariable,
) -> Result<f64> {
    let joint = revealed_partition(space, predictions)?;
    let mut worst: f64 = 0.0;
    for x in predictions {
        let atoms = partition_from_rv(space, x, LEVEL_TOL)?;
        for block in atoms.blocks() {
            let mass = space.prob(block);
            if mass <= 0.0 {
                continue;
            }
            let x_atom = block
                .iter()
                .map(|&i| space.weight(i) * x.value(i))
                .sum::<f64>()
                / mass;
            // Joint atoms inside A, each counted once.
            let mut seen = Vec::new();
            let mut combo = 0.0;
            for &i in block {
                let b = joint.block_of(i);
                if seen.contains(&b) {
                    continue;
                }
                seen.push(b);
                let atom = &joint.blocks()[b];
                debug_assert!(atom.iter().all(|k| atoms.block_of(*k) == atoms.block_of(i)));
                combo += space.prob(atom) / mass * x_eff.value(atom[0]);
            }
            worst = worst.max((x_atom - combo).abs());
        }
    }
    Ok(worst)
}

/// Quantitative evidence for one aggregate `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub marginal_gap: f64,
    pub calibration_gap: f64,
    pub extremizing_violations: Vec<Violation>,
    pub inefficiency_prob: f64,
    pub var_x: f64,
    pub var_recalibrated: f64,
    pub var_efficient: f64,
    pub max_individual_var: f64,
    pub marginally_consistent: bool,
    pub calibrated: bool,
    pub extremizing: bool,
    pub efficient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnoseOptions {
    /// Tolerance for the calibration and marginal-consistency passes.
    pub tol: f64,
    /// Tolerance for a.s. disagreement with X''.
    pub as_tol: f64,
    pub budget: SubsetBudget,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            as_tol: AS_TOL,
            budget: SubsetBudget::default(),
        }
    }
}

/// Runs every check on `x` given the calibrated `predictions`.
pub fn diagnose(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    predictions: &[RandomVariable],
    x: &RandomVariable,
    opts: DiagnoseOptions,
) -> Result<DiagnosticsReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mu0 = expectation(space, y)?;
    let marginal_gap = (expectation(space, x)? - mu0).abs();
    let calibration = check_calibration(space, y, x, opts.tol)?;
    let extremizing_violations = check_extremizing(space, y, predictions, x, opts.budget)?;
    let x_eff = efficient_from_predictions(space, y, predictions)?;
    let inefficiency_prob = inefficiency_probability(space, x, &x_eff, opts.as_tol)?;
    let var_recalibrated = variance(space, &recalibrate(space, y, x)?)?;
    let max_individual_var = predictions
        .iter()
        .map(|p| variance(space, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DiagnosticsReport {
        marginal_gap,
        calibration_gap: calibration.gap,
        marginally_consistent: marginal_gap <= opts.tol,
        calibrated: calibration.pass,
        extremizing: extremizing_violations.is_empty(),
        efficient: inefficiency_prob == 0.0,
        extremizing_violations,
        inefficiency_prob,
        var_x: variance(space, x)?,
        var_recalibrated,
        var_efficient: variance(space, &x_eff)?,
        max_individual_var,
    })
}

impl DiagnosticsReport {
    /// Rows of `check,subject,gap_or_prob,pass` for comma-separated output.
    pub fn csv_rows(&self, subject: &str) -> Vec<(String, String, f64, bool)> {
        let excess = self
            .extremizing_violations
            .iter()
            .map(|v| v.excess)
            .fold(0.0, f64::max);
        vec![
            (
                "marginal_consistency".into(),
                subject.into(),
                self.marginal_gap,
                self.marginally_consistent,
            ),
            (
                "calibration".into(),
                subject.into(),
                self.calibration_gap,
                self.calibrated,
            ),
            (
                "extremizing".into(),
                subject.into(),
                excess,
                self.extremizing,
            ),
            (
                "efficiency".into(),
                subject.into(),
                self.inefficiency_prob,
                self.efficient,
            ),
        ]
    }
}
