use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Meteorological,
    Hydrological,
}

impl FeatureGroup {
    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Meteorological => "meteorological",
            FeatureGroup::Hydrological => "hydrological",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub unit: String,
    pub group: FeatureGroup,
}

/// Ordered input columns plus the forecast target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    target: usize,
}

const METEOROLOGICAL: [(&str, &str); 7] = [
    ("tm", "degC"),
    ("pre", "mm/d"),
    ("tmax", "degC"),
    ("tmin", "degC"),
    ("ssd", "h/d"),
    ("win", "m/s"),
    ("rhu", "%"),
];

/// Gate rain gauges, in column order.
pub const GATE_RAINFALL: [&str; 11] = [
    "ch_pre", "qk_pre", "zm_pre", "ty_pre", "xg_pre", "zh_pre", "zq_pre", "lj_pre", "jn_pre", "nh_pre", "tc_pre",
];

pub const TARGET_COLUMN: &str = "ch_wl";

impl FeatureSchema {
    pub fn new(features: Vec<Feature>, target: &str) -> Result<Self, String> {
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(format!("duplicate feature name `{}`", f.name));
            }
        }
        let target = features
            .iter()
            .position(|f| f.name == target)
            .ok_or_else(|| format!("target column `{target}` is not in the schema"))?;
        Ok(Self { features, target })
    }

    /// The 19-column lake schema: seven meteorological columns, the lake
    /// water level (target) and eleven gate rain gauges.
    pub fn lake() -> Self {
        let mut features: Vec<Feature> = METEOROLOGICAL
            .iter()
            .map(|(n, u)| Feature {
                name: n.to_string(),
                unit: u.to_string(),
                group: FeatureGroup::Meteorological,
            })
            .collect();
        features.push(Feature {
            name: TARGET_COLUMN.into(),
            unit: "m".into(),
            group: FeatureGroup::Hydrological,
        });
        features.extend(GATE_RAINFALL.iter().map(|n| Feature {
            name: n.to_string(),
            unit: "mm".into(),
            group: FeatureGroup::Hydrological,
        }));
        Self::new(features, TARGET_COLUMN).expect("static schema is valid")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.features[self.target].name
    }

    pub fn groups(&self) -> Vec<FeatureGroup> {
        self.features.iter().map(|f| f.group).collect()
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::lake()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lake_schema_contract() {
        let s = FeatureSchema::lake();
        assert_eq!(s.len(), 19);
        assert_eq!(s.target_name(), "ch_wl");
        assert_eq!(s.target_index(), 7);
        let met = s.groups().iter().filter(|g| **g == FeatureGroup::Meteorological).count();
        assert_eq!(met, 7);
        assert_eq!(s.names()[..3], ["tm", "pre", "tmax"]);
        assert_eq!(s.names()[18], "tc_pre");
    }

    #[test]
    fn rejects_duplicates_and_missing_target() {
        let f = |n: &str| Feature {
            name: n.into(),
            unit: String::new(),
            group: FeatureGroup::Hydrological,
        };
        assert!(FeatureSchema::new(vec![f("a"), f("a")], "a").is_err());
        assert!(FeatureSchema::new(vec![f("a"), f("b")], "c").is_err());
    }
}
