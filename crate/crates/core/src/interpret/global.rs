use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{Schema, TypeId};

use super::summary::AttentionSummary;

/// What a block picks in one transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    /// The dummy self-relation: stay in the same block.
    Stay,
    /// Aggregate from this neighbor type.
    From(TypeId),
}

/// One path through the choice tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceSequence {
    pub target: TypeId,
    /// `(block, choice)` per transition, first transition first.
    pub steps: Vec<(TypeId, Choice)>,
}

impl ChoiceSequence {
    /// `Self(P)` or `C->P` per transition.
    pub fn labels(&self, schema: &Schema) -> Vec<String> {
        self.steps
            .iter()
            .map(|&(b, c)| match c {
                Choice::Stay => format!("Self({})", schema.type_name(b)),
                Choice::From(g) => format!("{}->{}", schema.type_name(g), schema.type_name(b)),
            })
            .collect()
    }
}

/// The meta-path a choice sequence evaluates, source first, with dummy
/// self-hops dropped.
pub fn meta_path_of(seq: &ChoiceSequence) -> Vec<TypeId> {
    let start = seq.steps.first().map_or(seq.target, |&(b, c)| match c {
        Choice::Stay => b,
        Choice::From(g) => g,
    });
    let mut path = vec![start];
    for &(b, c) in &seq.steps {
        if let Choice::From(_) = c {
            path.push(b);
        }
    }
    path
}

/// Every choice sequence of a model with `n_layers` layers ending in block
/// `target`, read backward from the output; Self before neighbors in schema
/// order at every step.
pub fn enumerate_choice_sequences(
    schema: &Schema,
    target: &str,
    n_layers: usize,
) -> Result<Vec<ChoiceSequence>> {
    let t = schema.type_id(target)?;
    if n_layers < 2 {
        return Err(Error::Config(format!(
            "need at least 2 layers, got {n_layers}"
        )));
    }
    let mut out = Vec::new();
    let mut rev = Vec::with_capacity(n_layers - 1);
    fn walk(
        schema: &Schema,
        block: TypeId,
        left: usize,
        rev: &mut Vec<(TypeId, Choice)>,
        target: TypeId,
        out: &mut Vec<ChoiceSequence>,
    ) {
        if left == 0 {
            out.push(ChoiceSequence {
                target,
                steps: rev.iter().rev().copied().collect(),
            });
            return;
        }
        rev.push((block, Choice::Stay));
        walk(schema, block, left - 1, rev, target, out);
        rev.pop();
        for &(g, _) in schema.neighbors(block) {
            rev.push((block, Choice::From(g)));
            walk(schema, g, left - 1, rev, target, out);
            rev.pop();
        }
    }
    walk(schema, t, n_layers - 1, &mut rev, t, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub choices: Vec<String>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaPathScore {
    pub meta_path: String,
    pub types: Vec<String>,
    pub score: f64,
    pub contributors: Vec<Contributor>,
}

/// Global meta-path importance: each choice sequence scores the product of
/// its mean coefficients; sequences that differ only by dummy self-hops
/// merge. Sorted by score, ties broken by the type sequence.
pub fn score_meta_paths(
    summary: &AttentionSummary,
    schema: &Schema,
    target: &str,
) -> Result<Vec<MetaPathScore>> {
    summary.validate(schema)?;
    let seqs = enumerate_choice_sequences(schema, target, summary.n_layers)?;
    let mut merged: BTreeMap<Vec<String>, (f64, Vec<Contributor>)> = BTreeMap::new();
    for seq in seqs {
        let mut score = 1.0;
        for (l, &(b, c)) in seq.steps.iter().enumerate() {
            let col = match c {
                Choice::Stay => "Self",
                Choice::From(g) => schema.type_name(g),
            };
            score *= summary.coefficient(schema, l, b, col).ok_or_else(|| {
                Error::Data(format!(
                    "summary has no coefficient for block {} column {col} in layers {}-{}",
                    schema.type_name(b),
                    l + 1,
                    l + 2
                ))
            })?;
        }
        let types: Vec<String> = meta_path_of(&seq)
            .iter()
            .map(|&t| schema.type_name(t).to_string())
            .collect();
        let entry = merged.entry(types).or_default();
        entry.0 += score;
        entry.1.push(Contributor {
            choices: seq.labels(schema),
            score,
        });
    }
    let mut out: Vec<MetaPathScore> = merged
        .into_iter()
        .map(|(types, (score, contributors))| MetaPathScore {
            meta_path: super::report::path_label(&types),
            types,
            score,
            contributors,
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.types.cmp(&b.types))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_layer_author_sequences() {
        let s = Schema::dblp();
        let seqs = enumerate_choice_sequences(&s, "A", 2).unwrap();
        let paths: Vec<Vec<TypeId>> = seqs.iter().map(meta_path_of).collect();
        let a = s.type_id("A").unwrap();
        let p = s.type_id("P").unwrap();
        assert_eq!(paths, vec![vec![a], vec![p, a]]);
        assert!(enumerate_choice_sequences(&s, "X", 3).is_err());
        assert!(enumerate_choice_sequences(&s, "A", 1).is_err());
    }

    #[test]
    fn real_self_relation_is_kept() {
        let s = Schema::new(&["P", "A"], &[("A", "P"), ("P", "A"), ("P", "P")]).unwrap();
        let seqs = enumerate_choice_sequences(&s, "P", 2).unwrap();
        let paths: Vec<Vec<TypeId>> = seqs.iter().map(meta_path_of).collect();
        assert_eq!(paths, vec![vec![0], vec![1, 0], vec![0, 0]]);
    }
}
