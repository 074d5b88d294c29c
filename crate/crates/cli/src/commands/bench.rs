use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use hydroformer::attention::attention;
use hydroformer::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::write_file;

/// Kept-score count, fixed or relative to the sequence length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KSpec {
    Fixed(usize),
    /// `L / d`, at least 1.
    Fraction(usize),
    /// `L`
    Full,
}

impl KSpec {
    pub fn resolve(self, len: usize) -> usize {
        match self {
            KSpec::Fixed(k) => k,
            KSpec::Fraction(d) => (len / d).max(1),
            KSpec::Full => len,
        }
    }
}

impl FromStr for KSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "L" {
            return Ok(KSpec::Full);
        }
        if let Some(d) = s.strip_prefix("L/") {
            return match d.parse() {
                Ok(d) if d > 0 => Ok(KSpec::Fraction(d)),
                _ => Err(format!("bad k `{s}`: expected L/<positive integer>")),
            };
        }
        match s.parse() {
            Ok(k) if k > 0 => Ok(KSpec::Fixed(k)),
            _ => Err(format!("bad k `{s}`: expected a positive integer, L/<d> or L")),
        }
    }
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSpec::Fixed(k) => write!(f, "{k}"),
            KSpec::Fraction(d) => write!(f, "L/{d}"),
            KSpec::Full => f.write_str("L"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRequest {
    pub lengths: Vec<usize>,
    pub ks: Vec<KSpec>,
    /// Timed repetitions per row.
    pub repeats: usize,
    /// Untimed repetitions run first.
    pub warmup: usize,
    /// Query/key/value width.
    pub width: usize,
}

impl Default for BenchRequest {
    fn default() -> Self {
        Self {
            lengths: vec![64, 128, 256],
            ks: vec![KSpec::Fixed(8), KSpec::Fraction(4), KSpec::Full],
            repeats: 5,
            warmup: 1,
            width: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub len: usize,
    pub k_spec: KSpec,
    pub k: usize,
    pub mode: &'static str,
    pub min_ms: f64,
    pub median_ms: f64,
    /// Largest |sparse − dense| output difference.
    pub max_abs_diff: f64,
    /// `pass` / `fail` when k ≥ L, where the outputs must agree; `n/a` otherwise.
    pub correctness: &'static str,
}

/// Equivalence tolerance for k ≥ L.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("positive shape")
}

/// One forward and backward pass; returns the forward output.
fn pass(q: &Tensor, k: &Tensor, v: &Tensor, k_sparse: Option<usize>) -> Result<Tensor, CliError> {
    let mut tape = Tape::new();
    let (qv, kv, vv) = (
        tape.leaf(q.clone(), true),
        tape.leaf(k.clone(), true),
        tape.leaf(v.clone(), true),
    );
    let out = attention(&mut tape, qv, kv, vv, k_sparse, false)?;
    let loss = tape.sum(out)?;
    tape.backward(loss)?;
    Ok(tape.value(out).clone())
}

fn time(req: &BenchRequest, mut f: impl FnMut() -> Result<(), CliError>) -> Result<(f64, f64), CliError> {
    for _ in 0..req.warmup {
        f()?;
    }
    let mut ms = Vec::with_capacity(req.repeats);
    for _ in 0..req.repeats {
        let t = Instant::now();
        f()?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let median = if n % 2 == 1 { ms[n / 2] } else { (ms[n / 2 - 1] + ms[n / 2]) / 2.0 };
    Ok((ms[0], median))
}

/// Times single-head self-attention forward+backward, dense against sparse,
/// for every (L, k) pair and writes `bench.csv` into `cfg.out`.
pub fn cmd_bench(cfg: &RunConfig, req: &BenchRequest) -> Result<Vec<BenchRow>, CliError> {
    if req.lengths.is_empty() || req.ks.is_empty() || req.repeats == 0 || req.width == 0 {
        return Err(CliError::Config(
            "bench needs at least one length, one k, one repeat and a positive width".into(),
        ));
    }
    if req.lengths.contains(&0) {
        return Err(CliError::Config("sequence lengths must be positive".into()));
    }
    cfg.echo_into(&cfg.out)?;
    let mut rows = Vec::new();
    for &len in &req.lengths {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ len as u64);
        let (q, k, v) = (random(&mut rng, len, req.width), random(&mut rng, len, req.width), random(&mut rng, len, req.width));
        let dense = pass(&q, &k, &v, None)?;
        let (dense_min, dense_median) = time(req, || pass(&q, &k, &v, None).map(drop))?;
        for &spec in &req.ks {
            let kk = spec.resolve(len);
            let sparse = pass(&q, &k, &v, Some(kk))?;
            let diff = sparse.max_abs_diff(&dense) as f64;
            let correctness = if kk >= len {
                if diff <= EQUIVALENCE_TOL {
                    "pass"
                } else {
                    "fail"
                }
            } else {
                "n/a"
            };
            let (min_ms, median_ms) = time(req, || pass(&q, &k, &v, Some(kk)).map(drop))?;
            for (mode, min_ms, median_ms) in [("dense", dense_min, dense_median), ("sparse", min_ms, median_ms)] {
                rows.push(BenchRow {
                    len,
                    k_spec: spec,
                    k: kk,
                    mode,
                    min_ms,
                    median_ms,
                    max_abs_diff: diff,
                    correctness,
                });
            }
            log::info!("L={len} k={kk}: dense {dense_median:.3} ms, sparse {median_ms:.3} ms, {correctness}");
        }
    }
    write_file(&cfg.out.join("bench.csv"), bench_csv(&rows))?;
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("L,k_spec,k,mode,min_ms,median_ms,max_abs_diff,correctness\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:e},{}",
            r.len, r.k_spec, r.k, r.mode, r.min_ms, r.median_ms, r.max_abs_diff, r.correctness
        );
    }
    out
}
