//! Tabular ingest, gap filling, normalization, chronological splitting,
//! windowing and the synthetic stand-in record.

mod normalize;
mod schema;
mod series;
mod synth;
mod window;

use chrono::NaiveDate;
use thiserror::Error;

pub use normalize::Normalizer;
pub use schema::{Feature, FeatureGroup, FeatureSchema, GATE_RAINFALL, TARGET_COLUMN};
pub use series::{fill_missing, load_table, read_table, FillReport, RawSeries, DATE_FORMAT};
pub use synth::{synth_generate, synth_generate_with, SynthOptions, SYNTH_MIN_ROWS};
pub use window::{
    chronological_split, make_windows, prepare_dataset, prepare_dataset_with, window_count, Sample, Split, SplitBoundaries,
    SplitFractions, WindowedDataset,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema mismatch: missing columns {missing:?}, unknown columns {unknown:?}")]
    Schema { missing: Vec<String>, unknown: Vec<String> },
    #[error("line {line}: unparsable date `{value}`")]
    Date { line: usize, value: String },
    #[error("line {line}: date {date} is not after the previous row")]
    NonMonotone { line: usize, date: NaiveDate },
    #[error("line {line}: column `{column}` has unparsable value `{value}`")]
    Parse { line: usize, column: String, value: String },
    #[error("row {row}: column `{column}` is missing")]
    Missing { row: usize, column: String },
    #[error("column `{column}` has no observed values")]
    AllMissing { column: String },
    #[error("{rows} rows available, {needed} needed")]
    InsufficientRows { rows: usize, needed: usize },
    #[error("invalid split: {0}")]
    Fractions(String),
    #[error("{segment} segment has {rows} rows, needs at least {needed}")]
    TooShort { segment: &'static str, rows: usize, needed: usize },
    #[error("column `{column}` is constant on the training rows")]
    ConstantFeature { column: String },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
