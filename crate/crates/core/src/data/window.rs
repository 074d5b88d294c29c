use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureSchema, Normalizer, RawSeries};
use crate::tensor::{Float, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Chronological fractions in train, validation, test order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.10,
            test: 0.20,
        }
    }
}

/// Row ranges of the three contiguous segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBoundaries {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitBoundaries {
    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

/// Splits `rows` into train → validation → test segments; the test segment
/// is the end of the record. Every segment must hold at least
/// `lookback + horizon` rows.
pub fn chronological_split(
    rows: usize,
    fractions: SplitFractions,
    lookback: usize,
    horizon: usize,
) -> Result<SplitBoundaries, DataError> {
    let f = [fractions.train, fractions.val, fractions.test];
    if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::Fractions(format!(
            "split fractions must be positive and sum to 1, got {:?}",
            f
        )));
    }
    let train_end = (rows as f64 * fractions.train).round() as usize;
    let val_end = (rows as f64 * (fractions.train + fractions.val)).round() as usize;
    let b = SplitBoundaries {
        train: 0..train_end,
        val: train_end..val_end.min(rows),
        test: val_end.min(rows)..rows,
    };
    let needed = lookback + horizon;
    for split in [Split::Train, Split::Val, Split::Test] {
        let len = b.range(split).len();
        if len < needed {
            return Err(DataError::TooShort {
                segment: split.name(),
                rows: len,
                needed,
            });
        }
    }
    Ok(b)
}

/// One supervised example anchored at row `anchor`.
#[derive(Clone, Debug)]
pub struct Sample {
    /// Normalized rows `anchor - lookback + 1 ..= anchor`, all features.
    pub window: Tensor,
    /// Normalized target at rows `anchor + 1 ..= anchor + horizon`.
    pub targets: Vec<Float>,
    pub anchor: usize,
    pub anchor_date: NaiveDate,
    pub split: Split,
}

impl Sample {
    /// Teacher-forced decoder input: the last observed target followed by
    /// the first `horizon - 1` true targets.
    pub fn decoder_input(&self, target_index: usize) -> Vec<Float> {
        let last = self.window.get(self.window.rows() - 1, target_index);
        std::iter::once(last)
            .chain(self.targets[..self.targets.len() - 1].iter().copied())
            .collect()
    }

    /// First and last row index this sample touches.
    pub fn span(&self, lookback: usize) -> (usize, usize) {
        (self.anchor + 1 - lookback, self.anchor + self.targets.len())
    }
}

#[derive(Clone, Debug)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub horizon: usize,
    pub target_index: usize,
    pub boundaries: SplitBoundaries,
    pub dates: Vec<NaiveDate>,
    pub samples: Vec<Sample>,
}

impl WindowedDataset {
    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }
}

/// Number of samples a contiguous segment of `rows` rows yields.
pub fn window_count(rows: usize, lookback: usize, horizon: usize) -> usize {
    (rows + 1).saturating_sub(lookback + horizon)
}

/// Builds samples whose whole `[window ∪ targets]` range lies inside one
/// segment; anchors straddling a boundary are dropped.
pub fn make_windows(
    rows: &[Vec<f64>],
    dates: &[NaiveDate],
    lookback: usize,
    horizon: usize,
    target_index: usize,
    boundaries: &SplitBoundaries,
) -> Result<WindowedDataset, DataError> {
    if lookback == 0 || horizon == 0 {
        return Err(DataError::Fractions("lookback and horizon must be at least 1".into()));
    }
    if rows.len() < lookback + horizon {
        return Err(DataError::InsufficientRows {
            rows: rows.len(),
            needed: lookback + horizon,
        });
    }
    let ncol = rows[0].len();
    let mut samples = Vec::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        let seg = boundaries.range(split);
        if seg.len() < lookback + horizon {
            continue;
        }
        for anchor in seg.start + lookback - 1..seg.end - horizon {
            let mut data = Vec::with_capacity(lookback * ncol);
            for row in &rows[anchor + 1 - lookback..=anchor] {
                data.extend(row.iter().map(|&v| v as Float));
            }
            let targets = (anchor + 1..=anchor + horizon)
                .map(|r| rows[r][target_index] as Float)
                .collect();
            samples.push(Sample {
                window: Tensor::matrix(lookback, ncol, data)?,
                targets,
                anchor,
                anchor_date: dates[anchor],
                split,
            });
        }
    }
    Ok(WindowedDataset {
        lookback,
        horizon,
        target_index,
        boundaries: boundaries.clone(),
        dates: dates.to_vec(),
        samples,
    })
}

/// Fill, split, normalize with training statistics, and window a series.
pub fn prepare_dataset(
    series: &RawSeries,
    schema: &FeatureSchema,
    lookback: usize,
    horizon: usize,
    fractions: SplitFractions,
) -> Result<(WindowedDataset, Normalizer), DataError> {
    build_dataset(series, schema, lookback, horizon, fractions, None)
}

/// Same as [`prepare_dataset`] but normalizes with `normalizer` instead of
/// refitting, e.g. the statistics stored alongside a trained model.
pub fn prepare_dataset_with(
    series: &RawSeries,
    schema: &FeatureSchema,
    lookback: usize,
    horizon: usize,
    fractions: SplitFractions,
    normalizer: &Normalizer,
) -> Result<WindowedDataset, DataError> {
    build_dataset(series, schema, lookback, horizon, fractions, Some(normalizer)).map(|(ds, _)| ds)
}

fn build_dataset(
    series: &RawSeries,
    schema: &FeatureSchema,
    lookback: usize,
    horizon: usize,
    fractions: SplitFractions,
    fitted: Option<&Normalizer>,
) -> Result<(WindowedDataset, Normalizer), DataError> {
    let (filled, report) = super::fill_missing(series)?;
    if report.total() > 0 {
        log::info!("filled {} missing cells ({} inserted dates)", report.total(), report.inserted_dates);
    }
    let matrix = filled.to_matrix()?;
    let boundaries = chronological_split(matrix.len(), fractions, lookback, horizon)?;
    let normalizer = match fitted {
        Some(n) => {
            if n.columns != filled.columns {
                return Err(DataError::Schema {
                    missing: n.columns.iter().filter(|c| !filled.columns.contains(c)).cloned().collect(),
                    unknown: filled.columns.iter().filter(|c| !n.columns.contains(c)).cloned().collect(),
                });
            }
            n.clone()
        }
        None => Normalizer::fit(&matrix[boundaries.train.clone()], &filled.columns)?,
    };
    let normalized = normalizer.apply(&matrix);
    let ds = make_windows(
        &normalized,
        &filled.dates,
        lookback,
        horizon,
        schema.target_index(),
        &boundaries,
    )?;
    Ok((ds, normalizer))
}
