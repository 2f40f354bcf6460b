//! Finite probability spaces, random variables, and partitions.
//!
//! A finitely generated σ-field on a finite outcome set is represented by the
//! partition of its atoms. Conditional expectation given such a σ-field is the
//! probability-weighted block average, which is exact on a finite space.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "almost sure" equality of two variables.
pub const AS_TOL: f64 = 1e-9;

/// Default tolerance for grouping level sets of derived predictions.
pub const LEVEL_TOL: f64 = 1e-9;

/// Identity of a probability space, derived from its weights.
///
/// Spaces with bit-identical weights share an id and are interchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDoc", into = "SpaceDoc")]
pub struct ProbabilitySpace {
    id: SpaceId,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpaceDoc {
    weights: Vec<f64>,
}

impl TryFrom<SpaceDoc> for ProbabilitySpace {
    type Error = Error;

    fn try_from(doc: SpaceDoc) -> Result<Self> {
        make_space(&doc.weights)
    }
}

impl From<ProbabilitySpace> for SpaceDoc {
    fn from(space: ProbabilitySpace) -> Self {
        SpaceDoc {
            weights: space.weights,
        }
    }
}

/// Builds a space from non-negative weights, rescaled to sum to one.
///
/// The rounding residue of the rescaling is absorbed by the last outcome with
/// positive weight, so zero-probability outcomes stay exactly zero.
pub fn make_space(weights: &[f64]) -> Result<ProbabilitySpace> {
    if weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut scaled: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let last = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("positive total implies a positive weight");
    let rest: f64 = scaled
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != last)
        .map(|(_, w)| w)
        .sum();
    scaled[last] = (1.0 - rest).max(0.0);

    let mut hasher = DefaultHasher::new();
    for w in &scaled {
        w.to_bits().hash(&mut hasher);
    }
    Ok(ProbabilitySpace {
        id: SpaceId(hasher.finish()),
        weights: scaled,
    })
}

impl ProbabilitySpace {
    /// Uniform space on `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self> {
        make_space(&vec![1.0; n])
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn n_outcomes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, outcome: usize) -> f64 {
        self.weights[outcome]
    }

    /// Probability of a set of outcomes.
    pub fn prob(&self, outcomes: &[usize]) -> f64 {
        outcomes.iter().fold(0.0, |acc, &i| acc + self.weights[i])
    }

    /// Builds a variable on this space from per-outcome values.
    pub fn variable(&self, values: Vec<f64>) -> Result<RandomVariable> {
        RandomVariable::new(self, values)
    }

    /// The constant variable `c`.
    pub fn constant(&self, c: f64) -> Result<RandomVariable> {
        RandomVariable::new(self, vec![c; self.n_outcomes()])
    }

    /// Variable obtained by applying `f` to every outcome index.
    pub fn variable_from_fn(&self, f: impl Fn(usize) -> f64) -> Result<RandomVariable> {
        RandomVariable::new(self, (0..self.n_outcomes()).map(f).collect())
    }

    fn check(&self, x: &RandomVariable) -> Result<()> {
        if x.space != self.id || x.values.len() != self.n_outcomes() {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    fn check_partition(&self, g: &Partition) -> Result<()> {
        if g.n_outcomes() != self.n_outcomes() {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }
}

/// A real value per outcome of a particular space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomVariable {
    #[serde(skip)]
    space: SpaceId,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: &ProbabilitySpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_outcomes() {
            return Err(Error::SpaceMismatch);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            space: space.id,
            values,
        })
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, outcome: usize) -> f64 {
        self.values[outcome]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map, keeping the owning space.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            space: self.space,
            values,
        })
    }
}

/// Disjoint, non-empty blocks of outcome indices covering `0..n`.
///
/// Blocks are kept in canonical order: each block sorted, blocks ordered by
/// their smallest outcome. Two partitions are equal iff they have the same
/// blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct Partition {
    labels: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<PartitionDoc> for Partition {
    type Error = Error;

    fn try_from(doc: PartitionDoc) -> Result<Self> {
        Partition::from_blocks(doc.blocks)
    }
}

impl From<Partition> for PartitionDoc {
    fn from(p: Partition) -> Self {
        PartitionDoc { blocks: p.blocks }
    }
}

impl Partition {
    /// Builds a partition from explicit blocks over outcomes `0..n`, where `n`
    /// is the total number of listed outcomes.
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        if n == 0 {
            return Err(Error::InvalidPartition("no outcomes".into()));
        }
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "outcome {i} out of range for {n} outcomes"
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "outcome {i} appears in more than one block"
                    )));
                }
                labels[i] = b;
            }
        }
        Ok(Self::from_labels(&labels))
    }

    /// Builds a partition from a block label per outcome. Any labelling works;
    /// the result is canonicalised.
    pub fn from_labels<L: Hash + Eq + Copy>(labels: &[L]) -> Self {
        let mut ids: HashMap<L, usize> = HashMap::new();
        let mut canon = Vec::with_capacity(labels.len());
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let next = ids.len();
            let id = *ids.entry(*l).or_insert(next);
            if id == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[id].push(i);
            canon.push(id);
        }
        Self {
            labels: canon,
            blocks,
        }
    }

    /// The single-block partition (no information).
    pub fn trivial(n: usize) -> Self {
        Self::from_labels(&vec![0u8; n])
    }

    /// The partition into singletons (full information).
    pub fn finest(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    /// σ(A) for a single event `A`: the blocks `A` and its complement.
    pub fn from_event(n: usize, event: &[usize]) -> Result<Self> {
        let mut labels = vec![false; n];
        for &i in event {
            if i >= n {
                return Err(Error::InvalidPartition(format!(
                    "outcome {i} out of range for {n} outcomes"
                )));
            }
            labels[i] = true;
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn n_outcomes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Index of the block containing `outcome`.
    pub fn block_of(&self, outcome: usize) -> usize {
        self.labels[outcome]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n_outcomes() != coarser.n_outcomes() {
            return false;
        }
        self.blocks.iter().all(|block| {
            let owner = coarser.block_of(block[0]);
            block.iter().all(|&i| coarser.block_of(i) == owner)
        })
    }
}

/// Level-set partition of `x`: outcomes whose values are linked by a chain of
/// gaps no larger than `tol` share a block.
pub fn partition_from_rv(
    space: &ProbabilitySpace,
    x: &RandomVariable,
    tol: f64,
) -> Result<Partition> {
    space.check(x)?;
    if !(tol >= 0.0) {
        return Err(Error::DomainError(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    let values = x.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut labels = vec![0usize; values.len()];
    let mut group = 0;
    for pair in order.windows(2) {
        if values[pair[1]] - values[pair[0]] > tol {
            group += 1;
        }
        labels[pair[1]] = group;
    }
    Ok(Partition::from_labels(&labels))
}

/// Coarsest common refinement of `p` and `q`.
pub fn join(p: &Partition, q: &Partition) -> Result<Partition> {
    if p.n_outcomes() != q.n_outcomes() {
        return Err(Error::SizeMismatch {
            left: p.n_outcomes(),
            right: q.n_outcomes(),
        });
    }
    let pairs: Vec<(usize, usize)> = p
        .labels
        .iter()
        .zip(&q.labels)
        .map(|(&a, &b)| (a, b))
        .collect();
    Ok(Partition::from_labels(&pairs))
}

/// Iterated join of a non-empty list of partitions.
pub fn join_all<'a>(parts: impl IntoIterator<Item = &'a Partition>) -> Result<Partition> {
    let mut iter = parts.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidPartition("cannot join an empty list".into()))?;
    iter.try_fold(first.clone(), |acc, p| join(&acc, p))
}

/// E(Y | σ(g)). Zero-probability blocks receive the unconditional mean.
pub fn conditional_expectation(
    space: &ProbabilitySpace,
    y: &RandomVariable,
    g: &Partition,
) -> Result<RandomVariable> {
    space.check(y)?;
    space.check_partition(g)?;
    let mu0 = mean(space, y);
    let mut values = vec![0.0; space.n_outcomes()];
    for block in g.blocks() {
        let (mass, moment) = block.iter().fold((0.0, 0.0), |(m, s), &i| {
            (m + space.weight(i), s + space.weight(i) * y.value(i))
        });
        let avg = if mass > 0.0 { moment / mass } else { mu0 };
        for &i in block {
            values[i] = avg;
        }
    }
    RandomVariable::new(space, values)
}

fn mean(space: &ProbabilitySpace, x: &RandomVariable) -> f64 {
    space
        .weights()
        .iter()
        .zip(x.values())
        .map(|(w, v)| w * v)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub covariance: Option<f64>,
}

/// Probability-weighted mean and variance of `x`, and Cov(x, y) when `y` is given.
pub fn moments(
    space: &ProbabilitySpace,
    x: &RandomVariable,
    y: Option<&RandomVariable>,
) -> Result<Moments> {
    space.check(x)?;
    if let Some(y) = y {
        space.check(y)?;
    }
    let mx = mean(space, x);
    let w = space.weights();
    let variance = w
        .iter()
        .zip(x.values())
        .map(|(w, v)| w * (v - mx) * (v - mx))
        .sum();
    let covariance = y.map(|y| {
        let my = mean(space, y);
        w.iter()
            .zip(x.values().iter().zip(y.values()))
            .map(|(w, (a, b))| w * (a - mx) * (b - my))
            .sum()
    });
    Ok(Moments {
        mean: mx,
        variance,
        covariance,
    })
}

/// Shorthand for the mean of `x`.
pub fn expectation(space: &ProbabilitySpace, x: &RandomVariable) -> Result<f64> {
    space.check(x)?;
    Ok(mean(space, x))
}

/// Shorthand for the variance of `x`.
pub fn variance(space: &ProbabilitySpace, x: &RandomVariable) -> Result<f64> {
    Ok(moments(space, x, None)?.variance)
}

/// Probability mass of outcomes where `|x - y| > tol`.
pub fn disagreement_mass(
    space: &ProbabilitySpace,
    x: &RandomVariable,
    y: &RandomVariable,
    tol: f64,
) -> Result<f64> {
    space.check(x)?;
    space.check(y)?;
    Ok(space
        .weights()
        .iter()
        .zip(x.values().iter().zip(y.values()))
        .filter(|(_, (a, b))| (*a - *b).abs() > tol)
        .fold(0.0, |acc, (w, _)| acc + w))
}

/// Equality within [`AS_TOL`] on every positive-probability outcome.
pub fn almost_surely_equal(
    space: &ProbabilitySpace,
    x: &RandomVariable,
    y: &RandomVariable,
) -> Result<bool> {
    space.check(x)?;
    space.check(y)?;
    Ok(space
        .weights()
        .iter()
        .zip(x.values().iter().zip(y.values()))
        .all(|(w, (a, b))| *w == 0.0 || (a - b).abs() <= AS_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn die() -> (ProbabilitySpace, RandomVariable) {
        let space = make_space(&[1.0; 6]).unwrap();
        let y = space.variable(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        (space, y)
    }

    #[test]
    fn make_space_normalizes() {
        let s = make_space(&[1.0; 6]).unwrap();
        for w in s.weights() {
            assert!((w - 1.0 / 6.0).abs() < 1e-16);
        }
        assert_eq!(s.weights().iter().sum::<f64>(), 1.0);

        let s = make_space(&[2.0, 0.0, 2.0]).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.0, 0.5]);
        let s = make_space(&[3.0, 1.0]).unwrap();
        assert_eq!(s.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn make_space_errors() {
        assert_eq!(make_space(&[]), Err(Error::EmptyWeights));
        assert!(matches!(
            make_space(&[1.0, -0.5]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            make_space(&[1.0, f64::NAN]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert_eq!(make_space(&[0.0, 0.0]), Err(Error::ZeroMass));
    }

    #[test]
    fn trailing_zero_weight_stays_zero() {
        let s = make_space(&[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.weight(3), 0.0);
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn level_sets_of_example_prediction() {
        let (space, _) = die();
        let x1 = space.variable(vec![0.0, 0.6, 0.6, 0.6, 0.6, 0.6]).unwrap();
        let p = partition_from_rv(&space, &x1, 0.0).unwrap();
        assert_eq!(p.blocks(), &[vec![0], vec![1, 2, 3, 4, 5]]);

        let c = space.constant(0.3).unwrap();
        let p = partition_from_rv(&space, &c, 0.0).unwrap();
        assert_eq!(p.n_blocks(), 1);
    }

    #[test]
    fn level_sets_with_tolerance() {
        let space = ProbabilitySpace::uniform(3).unwrap();
        let x = space.variable(vec![0.1, 0.100000001, 0.2]).unwrap();
        let p = partition_from_rv(&space, &x, 1e-6).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 1], vec![2]]);
        let p = partition_from_rv(&space, &x, 0.0).unwrap();
        assert_eq!(p.n_blocks(), 3);
    }

    #[test]
    fn level_sets_chain_transitively() {
        let space = ProbabilitySpace::uniform(3).unwrap();
        let x = space.variable(vec![0.0, 0.8e-6, 1.6e-6]).unwrap();
        let p = partition_from_rv(&space, &x, 1e-6).unwrap();
        assert_eq!(p.n_blocks(), 1);
    }

    #[test]
    fn level_sets_reject_foreign_variable() {
        let a = ProbabilitySpace::uniform(3).unwrap();
        let b = make_space(&[1.0, 2.0, 3.0]).unwrap();
        let x = b.constant(1.0).unwrap();
        assert_eq!(partition_from_rv(&a, &x, 0.0), Err(Error::SpaceMismatch));
    }

    #[test]
    fn join_examples() {
        let p = Partition::from_blocks(vec![vec![0], vec![1, 2, 3, 4, 5]]).unwrap();
        let q = Partition::from_blocks(vec![vec![5], vec![0, 1, 2, 3, 4]]).unwrap();
        let j = join(&p, &q).unwrap();
        assert_eq!(j.blocks(), &[vec![0], vec![1, 2, 3, 4], vec![5]]);
        assert_eq!(join(&p, &p).unwrap(), p);

        let a = Partition::from_blocks(vec![vec![0, 1], vec![2, 3]]).unwrap();
        let b = Partition::from_blocks(vec![vec![0, 2], vec![1, 3]]).unwrap();
        assert_eq!(join(&a, &b).unwrap(), Partition::finest(4));

        assert_eq!(
            join(&a, &Partition::trivial(3)),
            Err(Error::SizeMismatch { left: 4, right: 3 })
        );
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::from_blocks(vec![vec![0], vec![]]).is_err());
        assert!(Partition::from_blocks(vec![vec![0, 1], vec![1]]).is_err());
        assert!(Partition::from_blocks(vec![vec![0, 3]]).is_err());
        let p = Partition::from_blocks(vec![vec![2, 1], vec![0]]).unwrap();
        assert_eq!(p.blocks(), &[vec![0], vec![1, 2]]);
    }

    #[test]
    fn conditional_expectation_on_die() {
        let (space, y) = die();
        let g = Partition::from_event(6, &[0]).unwrap();
        let x1 = conditional_expectation(&space, &y, &g).unwrap();
        let expect = [0.0, 0.6, 0.6, 0.6, 0.6, 0.6];
        for (a, b) in x1.values().iter().zip(expect) {
            assert!((a - b).abs() <= 1e-15);
        }
        let flat = conditional_expectation(&space, &y, &Partition::trivial(6)).unwrap();
        for v in flat.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_probability_block_gets_unconditional_mean() {
        let space = make_space(&[1.0, 1.0, 0.0]).unwrap();
        let y = space.variable(vec![0.0, 1.0, 7.0]).unwrap();
        let x = conditional_expectation(&space, &y, &Partition::finest(3)).unwrap();
        assert_eq!(x.values(), &[0.0, 1.0, 0.5]);
    }

    #[test]
    fn moments_of_die_indicator() {
        let (space, y) = die();
        let m = moments(&space, &y, None).unwrap();
        assert!((m.mean - 0.5).abs() < 1e-15);
        assert!((m.variance - 0.25).abs() < 1e-15);
        assert_eq!(m.covariance, None);
        let c = space.constant(4.0).unwrap();
        assert_eq!(moments(&space, &c, None).unwrap().variance, 0.0);
        let m = moments(&space, &y, Some(&y)).unwrap();
        assert!((m.covariance.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn serde_documents_use_expected_keys() {
        let p = Partition::from_blocks(vec![vec![0], vec![1, 2]]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"blocks":[[0],[1,2]]}"#);
        let back: Partition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let s = make_space(&[3.0, 1.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"weights":[0.75,0.25]}"#);
        let back: ProbabilitySpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);

        let x = s.variable(vec![1.0, 2.0]).unwrap();
        assert_eq!(
            serde_json::to_string(&x).unwrap(),
            r#"{"values":[1.0,2.0]}"#
        );

        assert!(serde_json::from_str::<Partition>(r#"{"blocks":[[0],[0]]}"#).is_err());
        assert!(serde_json::from_str::<ProbabilitySpace>(r#"{"weights":[]}"#).is_err());
    }
}
