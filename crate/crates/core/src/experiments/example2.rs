//! Fair die, outcome "even", forecasters who know whether 1 or 6 came up.

use serde::{Deserialize, Serialize};

use crate::aggregators::{efficient_aggregator, hull_classify, HullPosition, TIE_TOL};
use crate::error::Result;
use crate::forecasters::calibrate;
use crate::prob::{make_space, Partition, ProbabilitySpace, RandomVariable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Row {
    /// Die face, 1 to 6.
    pub face: usize,
    pub y: f64,
    pub x1: f64,
    pub x2: f64,
    pub efficient: f64,
    pub hull: HullPosition,
}

pub struct Example2Setup {
    pub space: ProbabilitySpace,
    pub y: RandomVariable,
    pub infos: [Partition; 2],
}

/// The die space, Y = 1{even}, F₁ = σ({1}), F₂ = σ({6}) with 0-based outcomes.
pub fn setup() -> Result<Example2Setup> {
    let space = make_space(&[1.0; 6])?;
    let y = space.variable_from_fn(|i| if (i + 1) % 2 == 0 { 1.0 } else { 0.0 })?;
    let infos = [
        Partition::from_event(6, &[0])?,
        Partition::from_event(6, &[5])?,
    ];
    Ok(Example2Setup { space, y, infos })
}

pub fn run_example2() -> Result<Vec<Example2Row>> {
    let Example2Setup { space, y, infos } = setup()?;
    let x1 = calibrate(&space, &y, &infos[0])?.into_prediction();
    let x2 = calibrate(&space, &y, &infos[1])?.into_prediction();
    let eff = efficient_aggregator(&space, &y, &infos)?;
    Ok((0..6)
        .map(|i| Example2Row {
            face: i + 1,
            y: y.value(i),
            x1: x1.value(i),
            x2: x2.value(i),
            efficient: eff.value(i),
            hull: hull_classify(&[x1.value(i), x2.value(i)], eff.value(i), TIE_TOL),
        })
        .collect())
}
