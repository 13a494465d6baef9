use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::Schema;
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub dropout_rate: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a better validation micro-F1.
    pub patience: usize,
    pub seed: u64,
    pub widths: Vec<usize>,
    pub d_a: usize,
    pub mean_variant: bool,
    /// Loss weight per labeled type name; missing types weigh 1.
    pub type_weights: BTreeMap<String, f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainConfig {
            learning_rate: 0.01,
            l2_weight: 5e-4,
            dropout_rate: 0.5,
            max_epochs: 300,
            patience: 30,
            seed: 0,
            widths: m.widths,
            d_a: m.d_a,
            mean_variant: m.mean_variant,
            type_weights: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            widths: self.widths.clone(),
            d_a: self.d_a,
            mean_variant: self.mean_variant,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.model().check()?;
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} out of range")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight", self.l2_weight);
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", self.dropout_rate);
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        for (name, &w) in &self.type_weights {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(&format!("type_weights.{name}"), w);
            }
        }
        Ok(())
    }

    /// Like [`Self::check`], plus type names in `type_weights` must exist.
    pub fn check_for(&self, schema: &Schema) -> Result<()> {
        self.check()?;
        for name in self.type_weights.keys() {
            schema.type_id(name)?;
        }
        Ok(())
    }

    pub fn type_weight(&self, name: &str) -> f64 {
        self.type_weights.get(name).copied().unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_ranges() {
        let c = TrainConfig::default();
        c.check().unwrap();
        assert_eq!(
            (c.learning_rate, c.l2_weight, c.dropout_rate),
            (0.01, 5e-4, 0.5)
        );
        assert!(TrainConfig {
            dropout_rate: 1.0,
            ..c.clone()
        }
        .check()
        .is_err());
        assert!(TrainConfig {
            patience: 301,
            ..c.clone()
        }
        .check()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..c.clone()
        }
        .check()
        .is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"seed": 4, "widths": [8]}"#).unwrap();
        assert_eq!(
            (parsed.seed, parsed.widths.as_slice(), parsed.d_a),
            (4, &[8][..], 64)
        );
        assert!(serde_json::from_str::<TrainConfig>(r#"{"sed": 4}"#).is_err());
    }
}
