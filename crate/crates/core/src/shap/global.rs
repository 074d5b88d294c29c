use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Explanation, ShapError};
use crate::data::FeatureGroup;

/// Mean absolute attribution per feature over a set of instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub features: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub mean_abs: Vec<f64>,
    /// `100 · mean_abs / Σ mean_abs`; sums to 100.
    pub percent: Vec<f64>,
    pub instances: usize,
}

impl GlobalImportance {
    pub fn from_phis(
        phis: &[Vec<f64>],
        features: Vec<String>,
        groups: Vec<FeatureGroup>,
    ) -> Result<Self, ShapError> {
        if phis.is_empty() {
            return Err(ShapError::Empty);
        }
        let n = features.len();
        if groups.len() != n {
            return Err(ShapError::Misaligned(format!("{n} features but {} groups", groups.len())));
        }
        if let Some(row) = phis.iter().find(|r| r.len() != n) {
            return Err(ShapError::Misaligned(format!(
                "{n} features but an explanation with {}",
                row.len()
            )));
        }
        let m = phis.len() as f64;
        let mean_abs: Vec<f64> = (0..n).map(|i| phis.iter().map(|r| r[i].abs()).sum::<f64>() / m).collect();
        let total: f64 = mean_abs.iter().sum();
        if total == 0.0 {
            return Err(ShapError::ZeroImportance);
        }
        let percent = mean_abs.iter().map(|a| 100.0 * a / total).collect();
        Ok(Self {
            features,
            groups,
            mean_abs,
            percent,
            instances: phis.len(),
        })
    }

    pub fn from_explanations(
        explanations: &[Explanation],
        features: Vec<String>,
        groups: Vec<FeatureGroup>,
    ) -> Result<Self, ShapError> {
        let phis: Vec<Vec<f64>> = explanations.iter().map(|e| e.phis.clone()).collect();
        Self::from_phis(&phis, features, groups)
    }

    /// Feature indices by descending mean |φ|; ties keep column order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&a, &b| self.mean_abs[b].total_cmp(&self.mean_abs[a]));
        order
    }

    /// Summed percentage of every feature in `group`.
    pub fn group_share(&self, group: FeatureGroup) -> f64 {
        self.groups
            .iter()
            .zip(&self.percent)
            .filter(|(g, _)| **g == group)
            .map(|(_, p)| p)
            .sum()
    }

    /// `rank,feature,group,mean_abs_phi,percent`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,group,mean_abs_phi,percent\n");
        for (r, i) in self.ranking().into_iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r + 1,
                self.features[i],
                self.groups[i].name(),
                self.mean_abs[i],
                self.percent[i]
            );
        }
        out
    }

    /// `group,percent`
    pub fn groups_csv(&self) -> String {
        let mut out = String::from("group,percent\n");
        for g in [FeatureGroup::Meteorological, FeatureGroup::Hydrological] {
            let _ = writeln!(out, "{},{}", g.name(), self.group_share(g));
        }
        out
    }
}

/// One point of a beeswarm plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub feature: String,
    pub instance: usize,
    pub value: f64,
    pub phi: f64,
}

/// One row per (feature, instance). Feature blocks run by descending mean
/// |φ|; instances keep their order within a block.
///
/// `values[k][i]` is the raw value of feature `i` shown for instance `k`.
pub fn beeswarm_export(
    phis: &[Vec<f64>],
    values: &[Vec<f64>],
    features: &[String],
) -> Result<Vec<BeeswarmRow>, ShapError> {
    if phis.is_empty() {
        return Err(ShapError::Empty);
    }
    let n = features.len();
    if values.len() != phis.len() || phis.iter().chain(values).any(|r| r.len() != n) {
        return Err(ShapError::Misaligned("beeswarm inputs must be instances × features".into()));
    }
    let m = phis.len() as f64;
    let mean_abs: Vec<f64> = (0..n).map(|i| phis.iter().map(|r| r[i].abs()).sum::<f64>() / m).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]));
    let mut rows = Vec::with_capacity(n * phis.len());
    for i in order {
        for (k, (p, v)) in phis.iter().zip(values).enumerate() {
            rows.push(BeeswarmRow {
                feature: features[i].clone(),
                instance: k,
                value: v[i],
                phi: p[i],
            });
        }
    }
    Ok(rows)
}

/// `feature,instance,value,phi`, shortest round-trip float formatting.
pub fn beeswarm_csv(rows: &[BeeswarmRow]) -> String {
    let mut out = String::from("feature,instance,value,phi\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.feature, r.instance, r.value, r.phi);
    }
    out
}

pub fn parse_beeswarm(text: &str) -> Result<Vec<BeeswarmRow>, ShapError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("feature,instance,value,phi") => {}
        other => return Err(ShapError::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let bad = || ShapError::Parse(format!("line {}: `{line}`", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(BeeswarmRow {
                feature: f[0].to_string(),
                instance: f[1].parse().map_err(|_| bad())?,
                value: f[2].parse().map_err(|_| bad())?,
                phi: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
