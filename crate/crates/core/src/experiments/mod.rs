//! Reproductions of the worked examples and the noisy-forecaster asymptotics.

pub mod corollary1;
pub mod example1;
pub mod example2;
pub mod example3;
pub mod jamison;

pub use corollary1::{
    run_corollary1, Corollary1Config, Corollary1Run, Corollary1Summary, TraceRow,
};
pub use example1::{run_example1, Example1Config, Example1Report};
pub use example2::{run_example2, Example2Row};
pub use example3::{run_example3, Example3Config, Example3Report, SequenceChoice};
pub use jamison::{jamison_check, JamisonReport, WeightRule};
