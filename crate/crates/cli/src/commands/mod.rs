mod bench;
mod datagen;
mod evaluate;
mod explain;
mod predict;
mod train;

pub use bench::{bench_csv, cmd_bench, BenchRequest, BenchRow, KSpec, EQUIVALENCE_TOL};
pub use datagen::cmd_datagen;
pub use evaluate::cmd_evaluate;
pub use explain::{cmd_explain, ExplainOutcome, ExplainRequest, InstanceExplanation};
pub use predict::{cmd_predict, Forecast};
pub use train::{cmd_train, TrainOutcome};
