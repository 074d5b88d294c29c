use chrono::{Days, NaiveDate};
use hydroformer::data::{
    chronological_split, fill_missing, load_table, make_windows, prepare_dataset, read_table, synth_generate,
    window_count, DataError, FeatureSchema, Normalizer, RawSeries, Split, SplitBoundaries, SplitFractions,
};
use proptest::prelude::*;

const HEADER: &str = "date,tm,pre,tmax,tmin,ssd,win,rhu,ch_wl,ch_pre,qk_pre,zm_pre,ty_pre,xg_pre,zh_pre,zq_pre,lj_pre,jn_pre,nh_pre,tc_pre";

fn row(date: &str, base: f64) -> String {
    let vals: Vec<String> = (0..19).map(|c| format!("{}", base + c as f64)).collect();
    format!("{date},{}", vals.join(","))
}

#[test]
fn well_formed_file_loads() {
    let text = [HEADER.to_string(), row("2001-01-01", 1.0), row("2001-01-02", 2.0), row("2001-01-03", 3.0)].join("\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lake.csv");
    std::fs::write(&path, text).unwrap();
    let s = load_table(&path, &FeatureSchema::lake()).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.values[2][7], Some(3.0 + 7.0));
}

#[test]
fn missing_column_is_named() {
    let header = HEADER.replace(",rhu", "");
    let mut r = row("2001-01-01", 1.0);
    r.truncate(r.rfind(',').unwrap());
    match read_table(format!("{header}\n{r}").as_bytes(), &FeatureSchema::lake()) {
        Err(DataError::Schema { missing, unknown }) => {
            assert_eq!(missing, vec!["rhu".to_string()]);
            assert!(unknown.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
    let header = format!("{HEADER},extra");
    let r = format!("{},0", row("2001-01-01", 1.0));
    match read_table(format!("{header}\n{r}").as_bytes(), &FeatureSchema::lake()) {
        Err(DataError::Schema { unknown, .. }) => assert_eq!(unknown, vec!["extra".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicated_date_cites_the_line() {
    let text = [HEADER.to_string(), row("2001-01-01", 1.0), row("2001-01-02", 2.0), row("2001-01-02", 3.0)].join("\n");
    match read_table(text.as_bytes(), &FeatureSchema::lake()) {
        Err(DataError::NonMonotone { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_cells_and_dates_are_reported() {
    let text = format!("{HEADER}\n{}", row("01/02/2001", 1.0));
    assert!(matches!(read_table(text.as_bytes(), &FeatureSchema::lake()), Err(DataError::Date { line: 2, .. })));
    let text = format!("{HEADER}\n{}", row("2001-01-01", 1.0).replacen(",1,", ",abc,", 1));
    assert!(matches!(read_table(text.as_bytes(), &FeatureSchema::lake()), Err(DataError::Parse { .. })));
}

#[test]
fn columns_may_be_reordered_and_cells_empty() {
    let names: Vec<&str> = HEADER.split(',').skip(1).collect();
    let mut reversed = names.clone();
    reversed.reverse();
    let vals: Vec<String> = reversed
        .iter()
        .map(|n| if *n == "ssd" { String::new() } else { names.iter().position(|m| m == n).unwrap().to_string() })
        .collect();
    let text = format!("date,{}\n2001-01-01,{}", reversed.join(","), vals.join(","));
    let s = read_table(text.as_bytes(), &FeatureSchema::lake()).unwrap();
    assert_eq!(s.columns[0], "tm");
    assert_eq!(s.values[0][7], Some(7.0));
    assert_eq!(s.values[0][4], None);
}

#[test]
fn csv_round_trip_of_synthetic_series() {
    let schema = FeatureSchema::lake();
    let s = synth_generate(5, 420, &schema);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with(HEADER));
    let back = read_table(buf.as_slice(), &schema).unwrap();
    assert_eq!(back, s);
}

#[test]
fn prepared_dataset_never_leaks_across_boundaries() {
    let schema = FeatureSchema::lake();
    let s = synth_generate(6, 600, &schema);
    let (ds, norm) = prepare_dataset(&s, &schema, 30, 7, SplitFractions::default()).unwrap();
    let b = &ds.boundaries;
    assert_eq!((b.train.end, b.val.end, b.test.end), (420, 480, 600));
    for split in [Split::Train, Split::Val, Split::Test] {
        let range = b.range(split);
        assert_eq!(ds.count(split), window_count(range.len(), 30, 7));
        for sample in ds.split(split) {
            let (lo, hi) = sample.span(30);
            assert!(lo >= range.start && hi < range.end);
        }
    }

    // Statistics come from the training rows only.
    let matrix = s.to_matrix().unwrap();
    let train_only = Normalizer::fit(&matrix[..420], &s.columns).unwrap();
    assert_eq!(norm, train_only);
    let with_val = Normalizer::fit(&matrix[..480], &s.columns).unwrap();
    assert_ne!(norm.mean, with_val.mean);

    // Windows are normalized with those statistics.
    let first = &ds.samples[0];
    assert!((first.window.get(0, 7) - norm.normalize(7, matrix[0][7])).abs() < 1e-12);
    assert!((first.targets[0] - norm.normalize(7, matrix[30][7])).abs() < 1e-12);
}

#[test]
fn constant_training_column_is_rejected_by_prepare() {
    let schema = FeatureSchema::lake();
    let mut s = synth_generate(7, 500, &schema);
    for r in &mut s.values {
        r[5] = Some(2.0);
    }
    match prepare_dataset(&s, &schema, 10, 2, SplitFractions::default()) {
        Err(DataError::ConstantFeature { column }) => assert_eq!(column, "win"),
        other => panic!("unexpected {other:?}"),
    }
}

fn series(vals: &[Option<f64>]) -> RawSeries {
    let start = NaiveDate::from_ymd_opt(1999, 12, 30).unwrap();
    RawSeries {
        columns: vec!["x".into()],
        dates: (0..vals.len()).map(|i| start + Days::new(i as u64)).collect(),
        values: vals.iter().map(|v| vec![*v]).collect(),
    }
}

proptest! {
    #[test]
    fn window_count_formula(rows in 1usize..80, lookback in 1usize..12, horizon in 1usize..6) {
        let dates: Vec<NaiveDate> = (0..rows).map(|i| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + Days::new(i as u64)).collect();
        let data: Vec<Vec<f64>> = (0..rows).map(|r| vec![r as f64]).collect();
        let b = SplitBoundaries { train: 0..rows, val: rows..rows, test: rows..rows };
        match make_windows(&data, &dates, lookback, horizon, 0, &b) {
            Ok(ds) => {
                prop_assert_eq!(ds.samples.len(), (rows + 1).saturating_sub(lookback + horizon));
                for s in &ds.samples {
                    // Contiguous in time: consecutive window rows are consecutive days.
                    let col: Vec<f64> = (0..lookback).map(|i| s.window.get(i, 0)).collect();
                    prop_assert!(col.windows(2).all(|w| w[1] == w[0] + 1.0));
                    prop_assert_eq!(s.targets[0], col[lookback - 1] + 1.0);
                }
            }
            Err(DataError::InsufficientRows { .. }) => prop_assert!(rows < lookback + horizon),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn fill_is_idempotent_and_preserves_observations(
        cells in proptest::collection::vec(proptest::option::weighted(0.6, -50.0f64..50.0), 2..40)
    ) {
        prop_assume!(cells.iter().any(Option::is_some));
        let s = series(&cells);
        let (once, _) = fill_missing(&s).unwrap();
        let (twice, rep) = fill_missing(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(rep.total(), 0);
        for (orig, filled) in cells.iter().zip(&once.values) {
            if let Some(v) = orig {
                prop_assert_eq!(Some(*v), filled[0]);
            }
        }
    }

    #[test]
    fn split_segments_are_ordered_and_cover_the_record(rows in 200usize..5000) {
        let b = chronological_split(rows, SplitFractions::default(), 10, 5).unwrap();
        prop_assert_eq!(b.train.start, 0);
        prop_assert_eq!(b.train.end, b.val.start);
        prop_assert_eq!(b.val.end, b.test.start);
        prop_assert_eq!(b.test.end, rows);
        prop_assert_eq!(b.train.end, (rows as f64 * 0.7).round() as usize);
    }
}
