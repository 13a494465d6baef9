use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{Schema, TypeId};
use crate::model::AttentionRecords;

/// Mean attention of one block in one layer transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRow {
    /// 1-based input layer of the transition.
    pub from_layer: usize,
    pub to_layer: usize,
    pub block: String,
    /// `Self` and neighbor type names, in any order.
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
}

/// Mean attention distributions, one row per (transition, block).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionSummary {
    pub n_layers: usize,
    pub rows: Vec<SummaryRow>,
}

const SUM_TOL: f64 = 1e-6;

/// Column means of every recorded attention matrix.
pub fn summarize_attention(schema: &Schema, records: &AttentionRecords) -> AttentionSummary {
    let mut rows = Vec::new();
    for (l, blocks) in records.blocks.iter().enumerate() {
        for (t, att) in blocks.iter().enumerate() {
            let Some(att) = att else { continue };
            let n = att.rows();
            let mean = (0..att.cols())
                .map(|c| {
                    if n == 0 {
                        1.0 / att.cols() as f64
                    } else {
                        att.column(c).iter().sum::<f64>() / n as f64
                    }
                })
                .collect();
            rows.push(SummaryRow {
                from_layer: l + 1,
                to_layer: l + 2,
                block: schema.type_name(t).to_string(),
                columns: AttentionRecords::columns(schema, t),
                mean,
            });
        }
    }
    AttentionSummary {
        n_layers: records.blocks.len() + 1,
        rows,
    }
}

impl AttentionSummary {
    /// Checks names against `schema` and that every mean vector is a
    /// distribution.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.n_layers < 2 {
            return Err(Error::Data(
                "attention summary needs at least two layers".into(),
            ));
        }
        for r in &self.rows {
            let at = format!("summary row {}-{} {}", r.from_layer, r.to_layer, r.block);
            if r.to_layer != r.from_layer + 1 || r.from_layer == 0 || r.to_layer > self.n_layers {
                return Err(Error::Data(format!("{at}: bad layer pair")));
            }
            let t = schema.type_id(&r.block)?;
            if r.columns.len() != r.mean.len() {
                return Err(Error::Data(format!(
                    "{at}: {} columns, {} values",
                    r.columns.len(),
                    r.mean.len()
                )));
            }
            let mut expected = AttentionRecords::columns(schema, t);
            let mut got = r.columns.clone();
            expected.sort();
            got.sort();
            if expected != got {
                return Err(Error::Data(format!(
                    "{at}: columns {:?} do not match {:?}",
                    r.columns, expected
                )));
            }
            let sum: f64 = r.mean.iter().sum();
            if r.mean.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::Data(format!(
                    "{at}: {:?} is not a distribution",
                    r.mean
                )));
            }
        }
        Ok(())
    }

    /// Mean coefficient of `column` in block `block` of the transition
    /// starting at 0-based layer `transition`.
    pub fn coefficient(
        &self,
        schema: &Schema,
        transition: usize,
        block: TypeId,
        column: &str,
    ) -> Option<f64> {
        let name = schema.type_name(block);
        self.rows
            .iter()
            .find(|r| r.from_layer == transition + 1 && r.block == name)
            .and_then(|r| {
                r.columns
                    .iter()
                    .position(|c| c == column)
                    .map(|k| r.mean[k])
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn column_means() {
        let s = Schema::new(&["P", "A"], &[("A", "P"), ("P", "A")]).unwrap();
        let rec = AttentionRecords {
            blocks: vec![vec![
                Some(Matrix::from_rows(&[[0.2, 0.8], [0.4, 0.6]]).unwrap()),
                None,
            ]],
        };
        let sum = summarize_attention(&s, &rec);
        assert_eq!(sum.n_layers, 2);
        assert_eq!(sum.rows.len(), 1);
        assert!((sum.rows[0].mean[0] - 0.3).abs() < 1e-15);
        sum.validate(&s).unwrap();
        assert_eq!(sum.coefficient(&s, 0, 0, "A"), Some(0.7));
        assert_eq!(sum.coefficient(&s, 0, 1, "P"), None);
        let mut bad = sum.clone();
        bad.rows[0].mean[0] = 0.5;
        assert!(bad.validate(&s).is_err());
    }
}
