use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};

use super::{DataError, FeatureSchema};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Daily multivariate record; `None` marks a missing observation.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    pub columns: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Count of cells filled per column by [`fill_missing`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FillReport {
    pub inserted_dates: usize,
    pub filled: Vec<(String, usize)>,
}

impl FillReport {
    pub fn total(&self) -> usize {
        self.filled.iter().map(|(_, n)| n).sum()
    }
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[c]).collect())
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().flatten().any(Option::is_none)
    }

    /// Dense row-major values; fails if any cell is missing.
    pub fn to_matrix(&self) -> Result<Vec<Vec<f64>>, DataError> {
        self.values
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, v)| {
                        v.ok_or_else(|| DataError::Missing {
                            row: r,
                            column: self.columns[c].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.dates.iter().zip(&self.values) {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(row.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Reads a comma-separated table whose header is `date` followed by the
/// schema's columns (any order). Empty cells become missing values.
pub fn read_table<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("date") {
        return Err(DataError::Schema {
            missing: vec!["date (first column)".into()],
            unknown: Vec::new(),
        });
    }
    let names = schema.names();
    let missing: Vec<String> = names
        .iter()
        .filter(|n| !header[1..].iter().any(|h| h == *n))
        .map(|n| n.to_string())
        .collect();
    let unknown: Vec<String> = header[1..]
        .iter()
        .filter(|h| !names.contains(&h.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !unknown.is_empty() {
        return Err(DataError::Schema { missing, unknown });
    }
    // Column position in the file for every schema feature.
    let positions: Vec<usize> = names
        .iter()
        .map(|n| 1 + header[1..].iter().position(|h| h == n).expect("checked above"))
        .collect();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let raw_date = rec.get(0).unwrap_or_default();
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| DataError::Date {
            line,
            value: raw_date.to_string(),
        })?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(DataError::NonMonotone { line, date });
            }
        }
        let row = positions
            .iter()
            .zip(&names)
            .map(|(&p, name)| {
                let cell = rec.get(p).unwrap_or_default();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| DataError::Parse {
                        line,
                        column: name.to_string(),
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        dates.push(date);
        values.push(row);
    }
    Ok(RawSeries {
        columns: names.iter().map(|n| n.to_string()).collect(),
        dates,
        values,
    })
}

pub fn load_table(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawSeries, DataError> {
    let f = std::fs::File::open(path)?;
    read_table(std::io::BufReader::new(f), schema)
}

/// Reindexes to a gap-free daily calendar, then fills missing cells: linear
/// interpolation in time between observations, nearest observation at the
/// edges. Idempotent.
pub fn fill_missing(series: &RawSeries) -> Result<(RawSeries, FillReport), DataError> {
    if series.is_empty() {
        return Err(DataError::InsufficientRows { rows: 0, needed: 1 });
    }
    let ncol = series.columns.len();
    let first = series.dates[0];
    let last = *series.dates.last().expect("non-empty");
    let span = (last - first).num_days() as usize + 1;
    let mut dates = Vec::with_capacity(span);
    let mut values = vec![vec![None; ncol]; span];
    for d in 0..span {
        dates.push(first + Days::new(d as u64));
    }
    for (date, row) in series.dates.iter().zip(&series.values) {
        let idx = (*date - first).num_days() as usize;
        values[idx].clone_from(row);
    }
    let inserted_dates = span - series.len();

    let mut filled = Vec::with_capacity(ncol);
    for c in 0..ncol {
        let observed: Vec<usize> = (0..span).filter(|&r| values[r][c].is_some()).collect();
        if observed.is_empty() {
            return Err(DataError::AllMissing {
                column: series.columns[c].clone(),
            });
        }
        let mut count = 0;
        let (lo, hi) = (observed[0], *observed.last().expect("non-empty"));
        let (vlo, vhi) = (values[lo][c], values[hi][c]);
        for row in values.iter_mut().take(lo) {
            row[c] = vlo;
            count += 1;
        }
        for row in values.iter_mut().skip(hi + 1) {
            row[c] = vhi;
            count += 1;
        }
        for pair in observed.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (va, vb) = (values[a][c].expect("observed"), values[b][c].expect("observed"));
            for r in a + 1..b {
                let frac = (r - a) as f64 / (b - a) as f64;
                values[r][c] = Some(va + (vb - va) * frac);
                count += 1;
            }
        }
        filled.push((series.columns[c].clone(), count));
    }
    Ok((
        RawSeries {
            columns: series.columns.clone(),
            dates,
            values,
        },
        FillReport { inserted_dates, filled },
    ))
}
