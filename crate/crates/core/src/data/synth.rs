//! Synthetic lake record with the 19-column schema.
//!
//! Generative structure, per day `t`:
//!
//! ```text
//! season(t)  = sin(2π (doy - 105) / 365.25)          peaks mid-July
//! tm         = 16 + 11·season + anomaly,  anomaly AR(1) φ=0.7
//! tmax, tmin = tm ± (4 + 1.5·season) + noise
//! storm      = two-state Markov chain, wet-season onset probability higher
//! gate_i     = storm · scale · LogNormal · gauge factor_i
//! pre        = 0.9 · mean(gate) + small noise
//! rhu        = 72 + 6·season + 1.2·pre, clipped to [20, 100]
//! ssd        = 6 + 2·season − 0.3·pre, clipped to [0, 13]
//! win        = 2.5 − 0.5·season + |noise|
//! storage    = 0.97 · storage + 0.0008 · Σ gate_i
//! heat       = 0.9 · heat + 0.1 · (tm − 16)
//! ch_wl      = 8.8 + 0.6·season + storage − 0.03·heat + AR(1) noise φ=0.8
//! ```
//!
//! The random stream is consumed identically for every `rainfall_scale`, so
//! scaling rain changes only the rain-driven terms.

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{FeatureSchema, RawSeries, GATE_RAINFALL, TARGET_COLUMN};

pub const SYNTH_MIN_ROWS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthOptions {
    /// Multiplier on every gate rainfall column; `0.0` removes rain entirely.
    pub rainfall_scale: f64,
    pub start: NaiveDate,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            rainfall_scale: 1.0,
            start: NaiveDate::from_ymd_opt(1980, 1, 1).expect("valid date"),
        }
    }
}

/// Deterministic synthetic series of `rows` days (at least 400).
pub fn synth_generate(seed: u64, rows: usize, schema: &FeatureSchema) -> RawSeries {
    synth_generate_with(seed, rows, schema, SynthOptions::default())
}

pub fn synth_generate_with(seed: u64, rows: usize, schema: &FeatureSchema, opts: SynthOptions) -> RawSeries {
    let rows = rows.max(SYNTH_MIN_ROWS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let storm_depth = LogNormal::new(2.0, 0.8).expect("valid lognormal");
    let gauge: Vec<f64> = (0..GATE_RAINFALL.len()).map(|i| 0.8 + 0.04 * i as f64).collect();

    let mut anomaly = 0.0;
    let mut storm = false;
    let mut storage = 0.0;
    let mut heat = 0.0;
    let mut noise = 0.0;

    let mut dates = Vec::with_capacity(rows);
    let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
    let push = |name: &'static str, v: f64, columns: &mut Vec<(&str, Vec<f64>)>| {
        match columns.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => c.push(v),
            None => columns.push((name, vec![v])),
        }
    };

    for t in 0..rows {
        let date = opts.start + Days::new(t as u64);
        dates.push(date);
        let doy = date.ordinal() as f64;
        let season = (2.0 * std::f64::consts::PI * (doy - 105.0) / 365.25).sin();

        anomaly = 0.7 * anomaly + 1.8 * std_normal.sample(&mut rng);
        let tm = 16.0 + 11.0 * season + anomaly;
        let spread = 4.0 + 1.5 * season;
        let tmax = tm + spread + 0.5 * std_normal.sample(&mut rng);
        let tmin = tm - spread + 0.5 * std_normal.sample(&mut rng);

        let onset = 0.12 + 0.10 * season;
        let persist = 0.45 + 0.15 * season;
        let u: f64 = rng.random();
        storm = if storm { u < persist } else { u < onset };
        let depth = storm_depth.sample(&mut rng);
        let mut gates = [0.0; 11];
        for (g, f) in gates.iter_mut().zip(&gauge) {
            let local = (0.6 + 0.4 * rng.random::<f64>()) * f;
            *g = if storm { opts.rainfall_scale * depth * local } else { 0.0 };
        }
        let gate_sum: f64 = gates.iter().sum();
        let pre_noise = 0.3 * std_normal.sample(&mut rng).abs();
        let pre = 0.9 * gate_sum / gates.len() as f64 + if storm { opts.rainfall_scale * pre_noise } else { 0.0 };

        let rhu = (72.0 + 6.0 * season + 1.2 * pre + 4.0 * std_normal.sample(&mut rng)).clamp(20.0, 100.0);
        let ssd = (6.0 + 2.0 * season - 0.3 * pre + 1.5 * std_normal.sample(&mut rng)).clamp(0.0, 13.0);
        let win = 2.5 - 0.5 * season + 0.8 * std_normal.sample(&mut rng).abs();

        storage = 0.97 * storage + 0.0008 * gate_sum;
        heat = 0.9 * heat + 0.1 * (tm - 16.0);
        noise = 0.8 * noise + 0.01 * std_normal.sample(&mut rng);
        let level = 8.8 + 0.6 * season + storage - 0.03 * heat + noise;

        push("tm", tm, &mut columns);
        push("pre", pre, &mut columns);
        push("tmax", tmax, &mut columns);
        push("tmin", tmin, &mut columns);
        push("ssd", ssd, &mut columns);
        push("win", win, &mut columns);
        push("rhu", rhu, &mut columns);
        push(TARGET_COLUMN, level, &mut columns);
        for (name, g) in GATE_RAINFALL.iter().zip(gates) {
            push(name, g, &mut columns);
        }
    }

    let names = schema.names();
    let ordered: Vec<&Vec<f64>> = names
        .iter()
        .map(|n| {
            &columns
                .iter()
                .find(|(c, _)| c == n)
                .unwrap_or_else(|| panic!("synthetic generator has no column `{n}`"))
                .1
        })
        .collect();
    let values = (0..rows)
        .map(|r| ordered.iter().map(|c| Some(c[r])).collect())
        .collect();
    RawSeries {
        columns: names.iter().map(|n| n.to_string()).collect(),
        dates,
        values,
    }
}
