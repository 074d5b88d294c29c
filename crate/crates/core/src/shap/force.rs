use serde::{Deserialize, Serialize};

use super::Explanation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceStep {
    pub feature: String,
    pub phi: f64,
    /// Running total after adding this feature.
    pub cumulative: f64,
    pub direction: Direction,
}

/// Walk from the base value to the prediction, largest |φ| first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceReport {
    pub base_value: f64,
    pub prediction: f64,
    pub steps: Vec<ForceStep>,
}

impl ForceReport {
    /// End point of the walk.
    pub fn end(&self) -> f64 {
        self.steps.last().map_or(self.base_value, |s| s.cumulative)
    }

    /// `rank,feature,phi,cumulative,direction` preceded by a base row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,phi,cumulative,direction\n");
        out.push_str(&format!("0,base_value,0,{},zero\n", self.base_value));
        for (r, s) in self.steps.iter().enumerate() {
            let dir = match s.direction {
                Direction::Positive => "positive",
                Direction::Negative => "negative",
                Direction::Zero => "zero",
            };
            out.push_str(&format!("{},{},{},{},{}\n", r + 1, s.feature, s.phi, s.cumulative, dir));
        }
        out
    }
}

pub fn force_report(explanation: &Explanation, names: &[String]) -> ForceReport {
    let mut order: Vec<usize> = (0..explanation.phis.len()).collect();
    order.sort_by(|&a, &b| explanation.phis[b].abs().total_cmp(&explanation.phis[a].abs()));
    let mut cumulative = explanation.phi0;
    let steps = order
        .into_iter()
        .map(|i| {
            let phi = explanation.phis[i];
            cumulative += phi;
            ForceStep {
                feature: names.get(i).cloned().unwrap_or_else(|| format!("f{i}")),
                phi,
                cumulative,
                direction: if phi > 0.0 {
                    Direction::Positive
                } else if phi < 0.0 {
                    Direction::Negative
                } else {
                    Direction::Zero
                },
            }
        })
        .collect();
    ForceReport {
        base_value: explanation.phi0,
        prediction: explanation.fx,
        steps,
    }
}
