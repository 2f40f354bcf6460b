//! Seeded random finite spaces with calibrated forecasters, for property
//! checks over many instances.

use rand::Rng;

use crate::error::Result;
use crate::forecasters::substream;
use crate::prob::{
    conditional_expectation, disagreement_mass, make_space, Partition, ProbabilitySpace,
    RandomVariable, AS_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub min_outcomes: usize,
    pub max_outcomes: usize,
    pub min_forecasters: usize,
    pub max_forecasters: usize,
    /// Smallest number of blocks in a forecaster's information partition.
    pub min_blocks: usize,
    pub max_blocks: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            min_outcomes: 4,
            max_outcomes: 64,
            min_forecasters: 2,
            max_forecasters: 6,
            min_blocks: 3,
            max_blocks: 8,
        }
    }
}

/// One random space with outcome values in (0, 1) and calibrated forecasters.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: ProbabilitySpace,
    pub y: RandomVariable,
    pub infos: Vec<Partition>,
    pub predictions: Vec<RandomVariable>,
    /// Positive fixed weights summing to one, one per forecaster.
    pub weights: Vec<f64>,
}

fn random_partition<R: Rng>(rng: &mut R, n: usize, blocks: usize) -> Partition {
    // Assign the first `blocks` outcomes of a shuffle to distinct blocks so none is empty.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut labels = vec![0usize; n];
    for (k, &i) in order.iter().enumerate() {
        labels[i] = if k < blocks {
            k
        } else {
            rng.gen_range(0..blocks)
        };
    }
    Partition::from_labels(&labels)
}

/// Generates instance `index` of the stream seeded by `seed`.
///
/// Weights and outcome values are small integers over 20, which keeps
/// conditioning well scaled. Instances are redrawn until two predictions
/// disagree with positive probability.
pub fn random_instance(seed: u64, index: u64, shape: InstanceShape) -> Result<Instance> {
    let mut rng = substream(seed, index);
    loop {
        let n = rng.gen_range(shape.min_outcomes..=shape.max_outcomes);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64).collect();
        let space = make_space(&raw)?;
        let y = space.variable(
            (0..n)
                .map(|_| rng.gen_range(1..=19) as f64 / 20.0)
                .collect(),
        )?;
        let n_forecasters = rng.gen_range(shape.min_forecasters..=shape.max_forecasters);
        let max_blocks = shape.max_blocks.min(n);
        let min_blocks = shape.min_blocks.min(max_blocks);
        let infos: Vec<Partition> = (0..n_forecasters)
            .map(|_| {
                let blocks = rng.gen_range(min_blocks..=max_blocks);
                random_partition(&mut rng, n, blocks)
            })
            .collect();
        let predictions = infos
            .iter()
            .map(|g| conditional_expectation(&space, &y, g))
            .collect::<Result<Vec<_>>>()?;
        let mut disagree = false;
        'outer: for (i, a) in predictions.iter().enumerate() {
            for b in &predictions[i + 1..] {
                if disagreement_mass(&space, a, b, AS_TOL)? > 0.0 {
                    disagree = true;
                    break 'outer;
                }
            }
        }
        if !disagree {
            continue;
        }
        let raw_w: Vec<f64> = (0..n_forecasters)
            .map(|_| rng.gen_range(1..=10) as f64)
            .collect();
        let total: f64 = raw_w.iter().sum();
        let mut weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();
        let head: f64 = weights[..n_forecasters - 1].iter().sum();
        weights[n_forecasters - 1] = 1.0 - head;
        return Ok(Instance {
            space,
            y,
            infos,
            predictions,
            weights,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_shape() {
        let shape = InstanceShape::default();
        for i in 0..50 {
            let inst = random_instance(5, i, shape).unwrap();
            let n = inst.space.n_outcomes();
            assert!((4..=64).contains(&n));
            assert!((2..=6).contains(&inst.infos.len()));
            assert!(inst
                .infos
                .iter()
                .all(|p| p.n_blocks() >= 3 && p.n_outcomes() == n));
            assert!((inst.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(inst.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn instances_are_deterministic() {
        let a = random_instance(1, 7, InstanceShape::default()).unwrap();
        let b = random_instance(1, 7, InstanceShape::default()).unwrap();
        assert_eq!(a.space, b.space);
        assert_eq!(a.predictions, b.predictions);
    }
}
