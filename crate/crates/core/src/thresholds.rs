use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionThresholds {
    /// Diagonal self-consistency threshold.
    pub cons: f64,
    /// Off-diagonal confusion threshold.
    pub conf: f64,
}

/// Per-dimension binarization thresholds. Always covers all four dimensions.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ThresholdTable {
    table: BTreeMap<Dimension, DimensionThresholds>,
}

impl ThresholdTable {
    /// Thresholds calibrated against the human-labeled subset of the benchmark.
    pub fn builtin() -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            Dimension::FaceIdentity,
            DimensionThresholds {
                cons: -0.9111,
                conf: 0.1086,
            },
        );
        table.insert(
            Dimension::Appearance,
            DimensionThresholds {
                cons: -0.3662,
                conf: 0.1117,
            },
        );
        table.insert(
            Dimension::Pose,
            DimensionThresholds {
                cons: -0.5289,
                conf: 0.2912,
            },
        );
        table.insert(
            Dimension::Expression,
            DimensionThresholds {
                cons: -0.4203,
                conf: 0.0714,
            },
        );
        Self { table }
    }

    /// Builds a complete table; every dimension must be present and finite.
    pub fn from_map(table: BTreeMap<Dimension, DimensionThresholds>) -> Result<Self> {
        for d in Dimension::ALL {
            let t = table
                .get(&d)
                .ok_or_else(|| Error::Validation(format!("threshold table missing `{d}`")))?;
            if !t.cons.is_finite() || !t.conf.is_finite() {
                return Err(Error::Validation(format!("threshold for `{d}` is not finite")));
            }
        }
        Ok(Self { table })
    }

    /// Overrides individual dimensions, keeping the rest.
    pub fn merged(&self, overrides: &BTreeMap<Dimension, DimensionThresholds>) -> Result<Self> {
        let mut table = self.table.clone();
        table.extend(overrides.iter().map(|(d, t)| (*d, *t)));
        Self::from_map(table)
    }

    pub fn get(&self, d: Dimension) -> DimensionThresholds {
        self.table[&d]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dimension, DimensionThresholds)> + '_ {
        self.table.iter().map(|(d, t)| (*d, *t))
    }
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self::builtin()
    }
}
