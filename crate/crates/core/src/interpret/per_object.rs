use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hin::{HinGraph, TypeId};
use crate::model::AttentionRecords;
use crate::numerics::{kernels, Matrix};

/// Default cap on meta-path prefixes tracked per block.
pub const DEFAULT_BUDGET: usize = 256;

/// Per-object meta-path scores of one target type.
#[derive(Clone, Debug)]
pub struct PerObjectScores {
    pub target: TypeId,
    /// Meta-paths (source first) indexing the columns of `scores`.
    pub paths: Vec<Vec<TypeId>>,
    /// `n_target × paths.len()`.
    pub scores: Matrix,
    /// Total prefix score dropped by the budget, summed over the objects
    /// of the blocks where it was dropped.
    pub truncated_mass: f64,
}

impl PerObjectScores {
    /// `(path index, score)` for object `i`, best first; ties by path.
    pub fn ranked(&self, i: usize) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.scores.row(i).iter().copied().enumerate().collect();
        r.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.paths[a.0].cmp(&self.paths[b.0]))
        });
        r
    }
}

struct State {
    paths: Vec<Vec<TypeId>>,
    scores: Matrix,
}

/// Exact per-object meta-path scores: every path instance ending at an
/// object contributes the product of the attention coefficients of the
/// objects it passes and the normalized link weights it uses.
///
/// At most `budget` prefixes are kept per block after every transition;
/// the lowest-mass ones are dropped with a warning.
pub fn per_object_scores(
    g: &HinGraph,
    records: &AttentionRecords,
    target: &str,
    budget: usize,
) -> Result<PerObjectScores> {
    let schema = g.schema();
    let target = schema.type_id(target)?;
    if budget == 0 {
        return Err(Error::Config("prefix budget must be positive".into()));
    }
    let n_types = schema.n_types();
    let mut state: Vec<Option<State>> = (0..n_types)
        .map(|t| {
            Some(State {
                paths: vec![vec![t]],
                scores: Matrix::filled(g.num_objects(t), 1, 1.0),
            })
        })
        .collect();
    let mut truncated_mass = 0.0;
    for (l, blocks) in records.blocks.iter().enumerate() {
        let mut next: Vec<Option<State>> = (0..n_types).map(|_| None).collect();
        for (t, att) in blocks.iter().enumerate() {
            let Some(att) = att else { continue };
            let n = g.num_objects(t);
            let neighbors = schema.neighbors(t);
            if att.shape() != (n, 1 + neighbors.len()) {
                return Err(Error::shape(
                    format!(
                        "attention of block {} in transition {}",
                        schema.type_name(t),
                        l + 1
                    ),
                    att.shape(),
                    (n, 1 + neighbors.len()),
                ));
            }
            let missing = |u: TypeId| {
                Error::Data(format!(
                    "attention records lack block {} before transition {}",
                    schema.type_name(u),
                    l + 1
                ))
            };
            let mut index: HashMap<Vec<TypeId>, usize> = HashMap::new();
            let mut paths: Vec<Vec<TypeId>> = Vec::new();
            let mut slot = |p: Vec<TypeId>| {
                let k = paths.len();
                *index.entry(p.clone()).or_insert_with(|| {
                    paths.push(p);
                    k
                })
            };
            let own = state[t].as_ref().ok_or_else(|| missing(t))?;
            let own_cols: Vec<usize> = own.paths.iter().map(|p| slot(p.clone())).collect();
            let mut contributions = vec![(own.scores.clone(), own_cols, 0)];
            for (c, &(u, r)) in neighbors.iter().enumerate() {
                let from = state[u].as_ref().ok_or_else(|| missing(u))?;
                let cols = from
                    .paths
                    .iter()
                    .map(|p| {
                        let mut q = p.clone();
                        q.push(t);
                        slot(q)
                    })
                    .collect();
                let z = kernels::spmm(g.normalized(r).matrix(), &from.scores);
                contributions.push((z, cols, c + 1));
            }
            let mut scores = Matrix::zeros(n, paths.len());
            for (z, cols, c) in contributions {
                for i in 0..n {
                    let a = att.get(i, c);
                    let row = scores.row_mut(i);
                    for (&k, &v) in cols.iter().zip(z.row(i)) {
                        row[k] += a * v;
                    }
                }
            }
            let mut s = State { paths, scores };
            let before = s.paths.len();
            if before > budget {
                let dropped = truncate(&mut s, budget);
                log::warn!(
                    "block {} after transition {}: dropped {} meta-path prefixes carrying total score {dropped:e}",
                    schema.type_name(t),
                    l + 1,
                    before - budget
                );
                truncated_mass += dropped;
            }
            next[t] = Some(s);
        }
        state = next;
    }
    let s = state[target].take().ok_or_else(|| {
        Error::Data(format!(
            "attention records do not reach block {}",
            schema.type_name(target)
        ))
    })?;
    Ok(PerObjectScores {
        target,
        paths: s.paths,
        scores: s.scores,
        truncated_mass,
    })
}

/// Keeps the `budget` prefixes with the largest total score; returns the
/// dropped total.
fn truncate(s: &mut State, budget: usize) -> f64 {
    let mass: Vec<f64> = (0..s.paths.len())
        .map(|k| s.scores.column(k).iter().sum())
        .collect();
    let mut order: Vec<usize> = (0..s.paths.len()).collect();
    order.sort_by(|&a, &b| {
        mass[b]
            .total_cmp(&mass[a])
            .then_with(|| s.paths[a].cmp(&s.paths[b]))
    });
    let (keep, drop) = order.split_at(budget);
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let dropped = drop.iter().map(|&k| mass[k]).sum();
    let n = s.scores.rows();
    s.scores = Matrix::from_fn(n, keep.len(), |i, j| s.scores.get(i, keep[j]));
    s.paths = keep.iter().map(|&k| s.paths[k].clone()).collect();
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{GraphParts, Schema, SparseAdj};
    use crate::numerics::Matrix;

    fn chain() -> HinGraph {
        let s = Schema::dblp();
        let (p, a, c, t) = (0, 1, 2, 3);
        let n = [1usize, 1, 1, 1];
        let rel = |src: usize, dst: usize| {
            let pair = [(p, c), (p, a)]
                .iter()
                .any(|&(x, y)| (x, y) == (src, dst) || (y, x) == (src, dst));
            let trip: Vec<(usize, usize, f64)> = if pair { vec![(0, 0, 1.0)] } else { vec![] };
            SparseAdj::from_triplets(n[dst], n[src], trip).unwrap()
        };
        let adjacency = s
            .relations()
            .iter()
            .map(|&(src, dst)| rel(src, dst))
            .collect();
        let features = (0..4).map(|_| Matrix::filled(1, 2, 1.0)).collect();
        let _ = t;
        HinGraph::validated(GraphParts::unlabeled(s, adjacency, features)).unwrap()
    }

    #[test]
    fn single_instance_chain() {
        let g = chain();
        let s = g.schema();
        // Transition 1: P attends Self .1, C .7, A .1, T .1; transition 2: A attends Self .4, P .6.
        let mut rec = AttentionRecords {
            blocks: vec![vec![None; 4], vec![None; 4]],
        };
        rec.blocks[0][0] = Some(Matrix::from_rows(&[[0.1, 0.7, 0.1, 0.1]]).unwrap());
        rec.blocks[0][1] = Some(Matrix::from_rows(&[[0.5, 0.5]]).unwrap());
        rec.blocks[1][1] = Some(Matrix::from_rows(&[[0.4, 0.6]]).unwrap());
        let r = per_object_scores(&g, &rec, "A", DEFAULT_BUDGET).unwrap();
        let (best, score) = r.ranked(0)[0];
        let name: Vec<&str> = r.paths[best].iter().map(|&t| s.type_name(t)).collect();
        assert_eq!(name, ["C", "P", "A"]);
        assert!((score - 0.7 * 0.6).abs() < 1e-15);
        // T has no links, so the T-rooted path carries nothing.
        assert!((r.scores.row(0).iter().sum::<f64>() - (1.0 - 0.1 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn truncation_reports_dropped_mass() {
        let g = chain();
        let mut rec = AttentionRecords {
            blocks: vec![vec![None; 4], vec![None; 4]],
        };
        rec.blocks[0][0] = Some(Matrix::from_rows(&[[0.1, 0.7, 0.1, 0.1]]).unwrap());
        rec.blocks[0][1] = Some(Matrix::from_rows(&[[0.5, 0.5]]).unwrap());
        rec.blocks[1][1] = Some(Matrix::from_rows(&[[0.4, 0.6]]).unwrap());
        let full = per_object_scores(&g, &rec, "A", DEFAULT_BUDGET).unwrap();
        let cut = per_object_scores(&g, &rec, "A", 1).unwrap();
        assert!(cut.truncated_mass > 0.0);
        assert!(cut.scores.sum() < full.scores.sum());
        assert_eq!(full.truncated_mass, 0.0);
    }
}
