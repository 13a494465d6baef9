use crate::error::{Error, Result};
use crate::hin::{HinGraph, TypeId};
use crate::numerics::{Tape, Var};

/// Labeled objects of one type that enter the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub ty: TypeId,
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub weight: f64,
}

impl LabeledSet {
    /// The objects of split `part` of type `t`, with their labels.
    pub fn from_split(g: &HinGraph, t: TypeId, part: &str, weight: f64) -> Result<LabeledSet> {
        let name = g.schema().type_name(t);
        let split = g
            .split(t)
            .ok_or_else(|| Error::Data(format!("type {name} has no split")))?;
        let rows = split
            .part(part)
            .ok_or_else(|| Error::Data(format!("unknown split part `{part}`")))?
            .to_vec();
        let labels = g
            .labels(t)
            .ok_or_else(|| Error::Data(format!("type {name} has no labels")))?;
        let labels = rows
            .iter()
            .map(|&i| {
                labels.get(i).copied().flatten().ok_or_else(|| {
                    Error::Data(format!("{part} object {i} of type {name} is unlabeled"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(LabeledSet {
            ty: t,
            rows,
            labels,
            weight,
        })
    }
}

/// Sum over labeled types of the (weighted) row-softmax cross-entropy.
pub fn cross_entropy_loss(
    tape: &mut Tape,
    finals: &[Option<Var>],
    sets: &[LabeledSet],
    g: &HinGraph,
) -> Result<Var> {
    if sets.is_empty() {
        return Err(Error::Data("no labeled objects".into()));
    }
    let mut terms = Vec::with_capacity(sets.len());
    for s in sets {
        let name = g.schema().type_name(s.ty);
        let logits = finals
            .get(s.ty)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Model(format!("no output for labeled type {name}")))?;
        let classes = g.class_count(s.ty);
        if tape.shape(logits).1 != classes {
            return Err(Error::shape(
                format!("loss for type {name}"),
                tape.shape(logits),
                (classes, classes),
            ));
        }
        if let Some(&y) = s.labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelRange {
                ty: name.to_string(),
                label: y,
                classes,
            });
        }
        terms.push(tape.cross_entropy(logits, &s.rows, &s.labels, s.weight)?);
    }
    tape.sum(&terms)
}
