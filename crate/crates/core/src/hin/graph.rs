use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{RelId, Schema, SparseAdj, TypeId};
use crate::numerics::tape::SparseOperand;
use crate::numerics::Matrix;

/// Index lists of labeled objects.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn part(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Raw pieces of a graph, indexed like the schema (types, relations).
#[derive(Clone, Debug)]
pub struct GraphParts {
    pub schema: Schema,
    /// `adjacency[r]` for `r = ⟨Γ,Ω⟩` is `|𝒱^Ω| × |𝒱^Γ|`.
    pub adjacency: Vec<SparseAdj>,
    pub features: Vec<Matrix>,
    /// Class per object, `None` for unlabeled objects; `None` for unlabeled types.
    pub labels: Vec<Option<Vec<Option<usize>>>>,
    pub class_counts: Vec<usize>,
    pub splits: Vec<Option<Split>>,
}

impl GraphParts {
    /// Parts with no labels or splits.
    pub fn unlabeled(
        schema: Schema,
        adjacency: Vec<SparseAdj>,
        features: Vec<Matrix>,
    ) -> GraphParts {
        let n = schema.n_types();
        GraphParts {
            schema,
            adjacency,
            features,
            labels: vec![None; n],
            class_counts: vec![0; n],
            splits: vec![None; n],
        }
    }
}

/// A heterogeneous information network with per-type features, optional
/// labels and splits, and row-normalized adjacency cached per relation.
///
/// Object counts per type are the feature-matrix row counts. Construction
/// does not validate; see [`validate_graph`] and [`HinGraph::validated`].
#[derive(Clone, Debug)]
pub struct HinGraph {
    parts: GraphParts,
    normalized: Vec<Arc<SparseOperand>>,
}

impl HinGraph {
    pub fn new(parts: GraphParts) -> HinGraph {
        let normalized = parts
            .adjacency
            .iter()
            .map(|a| Arc::new(SparseOperand::new(a.row_normalize())))
            .collect();
        HinGraph { parts, normalized }
    }

    /// Builds and validates; every violation is returned on failure.
    pub fn validated(parts: GraphParts) -> Result<HinGraph> {
        let g = HinGraph::new(parts);
        let v = validate_graph(&g);
        if v.is_empty() {
            Ok(g)
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn parts(&self) -> &GraphParts {
        &self.parts
    }

    pub fn into_parts(self) -> GraphParts {
        self.parts
    }

    pub fn schema(&self) -> &Schema {
        &self.parts.schema
    }

    pub fn num_objects(&self, t: TypeId) -> usize {
        self.parts.features.get(t).map_or(0, |f| f.rows())
    }

    pub fn total_objects(&self) -> usize {
        (0..self.schema().n_types())
            .map(|t| self.num_objects(t))
            .sum()
    }

    /// Stored entries over all relations.
    pub fn total_entries(&self) -> usize {
        self.parts.adjacency.iter().map(|a| a.nnz()).sum()
    }

    /// Links with each declared pair of opposite relations counted once.
    pub fn total_links(&self) -> usize {
        let s = self.schema();
        s.relations()
            .iter()
            .enumerate()
            .filter(|&(_, &(src, dst))| match s.relation_id(dst, src) {
                Some(_) if src != dst => src < dst,
                _ => true,
            })
            .map(|(r, _)| self.parts.adjacency[r].nnz())
            .sum()
    }

    pub fn adjacency(&self, r: RelId) -> &SparseAdj {
        &self.parts.adjacency[r]
    }

    /// Row-normalized `Â` for relation `r` with its transpose.
    pub fn normalized(&self, r: RelId) -> &Arc<SparseOperand> {
        &self.normalized[r]
    }

    pub fn features(&self, t: TypeId) -> &Matrix {
        &self.parts.features[t]
    }

    pub fn labels(&self, t: TypeId) -> Option<&[Option<usize>]> {
        self.parts.labels.get(t).and_then(|l| l.as_deref())
    }

    pub fn class_count(&self, t: TypeId) -> usize {
        self.parts.class_counts.get(t).copied().unwrap_or(0)
    }

    pub fn split(&self, t: TypeId) -> Option<&Split> {
        self.parts.splits.get(t).and_then(|s| s.as_ref())
    }

    pub fn labeled_types(&self) -> Vec<TypeId> {
        (0..self.schema().n_types())
            .filter(|&t| self.labels(t).is_some() && self.class_count(t) > 0)
            .collect()
    }

    /// Indices of labeled objects of `t`.
    pub fn labeled_indices(&self, t: TypeId) -> Vec<usize> {
        self.labels(t)
            .map(|l| {
                l.iter()
                    .enumerate()
                    .filter_map(|(i, y)| y.map(|_| i))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn with_splits(&self, splits: Vec<Option<Split>>) -> HinGraph {
        let mut g = self.clone();
        g.parts.splits = splits;
        g
    }

    pub fn with_features(&self, features: Vec<Matrix>) -> HinGraph {
        let mut g = self.clone();
        g.parts.features = features;
        g
    }

    /// Relabels the objects of type `t`: old index `i` becomes `perm[i]`.
    /// Adjacency, features, labels and splits move consistently.
    pub fn permute_type(&self, t: TypeId, perm: &[usize]) -> HinGraph {
        let n = self.num_objects(t);
        assert_eq!(perm.len(), n);
        let schema = self.schema().clone();
        let identity = |k: usize| (0..k).collect::<Vec<_>>();
        let adjacency = schema
            .relations()
            .iter()
            .enumerate()
            .map(|(r, &(src, dst))| {
                let a = &self.parts.adjacency[r];
                let rows = if dst == t {
                    perm.to_vec()
                } else {
                    identity(a.n_rows())
                };
                let cols = if src == t {
                    perm.to_vec()
                } else {
                    identity(a.n_cols())
                };
                a.permuted(&rows, &cols)
            })
            .collect();
        let mut features = self.parts.features.clone();
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        features[t] = self.parts.features[t].select_rows(&inverse);
        let mut labels = self.parts.labels.clone();
        if let Some(l) = &self.parts.labels[t] {
            labels[t] = Some(inverse.iter().map(|&i| l[i]).collect());
        }
        let mut splits = self.parts.splits.clone();
        if let Some(s) = &self.parts.splits[t] {
            let map = |v: &Vec<usize>| v.iter().map(|&i| perm[i]).collect();
            splits[t] = Some(Split {
                train: map(&s.train),
                val: map(&s.val),
                test: map(&s.test),
            });
        }
        HinGraph::new(GraphParts {
            schema,
            adjacency,
            features,
            labels,
            class_counts: self.parts.class_counts.clone(),
            splits,
        })
    }
}

impl HinGraph {
    /// The subgraph induced by the first `max_objects` objects of every
    /// type, keeping the first `max_features` feature columns. Splits are
    /// filtered to the kept objects.
    pub fn truncated(&self, max_objects: usize, max_features: usize) -> HinGraph {
        let schema = self.schema().clone();
        let keep: Vec<usize> = (0..schema.n_types())
            .map(|t| self.num_objects(t).min(max_objects))
            .collect();
        let adjacency = schema
            .relations()
            .iter()
            .enumerate()
            .map(|(r, &(src, dst))| {
                let trip: Vec<(usize, usize, f64)> = self.parts.adjacency[r]
                    .triplets()
                    .filter(|&(i, j, _)| i < keep[dst] && j < keep[src])
                    .collect();
                SparseAdj::from_triplets(keep[dst], keep[src], trip)
                    .expect("sub-pattern of a valid matrix")
            })
            .collect();
        let features = self
            .parts
            .features
            .iter()
            .zip(&keep)
            .map(|(f, &k)| Matrix::from_fn(k, f.cols().min(max_features), |i, j| f.get(i, j)))
            .collect();
        let labels = self
            .parts
            .labels
            .iter()
            .zip(&keep)
            .map(|(l, &k)| l.as_ref().map(|l| l[..k].to_vec()))
            .collect();
        let splits = self
            .parts
            .splits
            .iter()
            .zip(&keep)
            .map(|(s, &k)| {
                s.as_ref().map(|s| {
                    let f = |v: &[usize]| v.iter().copied().filter(|&i| i < k).collect();
                    Split {
                        train: f(&s.train),
                        val: f(&s.val),
                        test: f(&s.test),
                    }
                })
            })
            .collect();
        HinGraph::new(GraphParts {
            schema,
            adjacency,
            features,
            labels,
            class_counts: self.parts.class_counts.clone(),
            splits,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MissingAdjacency,
    Shape,
    Csr,
    Symmetry,
    Features,
    Labels,
    Split,
}

/// One failed graph invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// The relation (`"A->P"`) or type the check is about.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}: {}", self.kind, self.subject, self.detail)
    }
}

/// Checks every graph invariant; an empty list means the graph is valid.
pub fn validate_graph(g: &HinGraph) -> Vec<Violation> {
    let s = g.schema();
    let p = g.parts();
    let mut out = Vec::new();
    let mut push = |kind, subject: String, detail: String| {
        out.push(Violation {
            kind,
            subject,
            detail,
        })
    };

    if p.features.len() != s.n_types() {
        push(
            ViolationKind::Features,
            "<graph>".into(),
            format!(
                "{} feature matrices for {} types",
                p.features.len(),
                s.n_types()
            ),
        );
        return out;
    }
    for t in 0..s.n_types() {
        if !p.features[t].is_finite() {
            push(
                ViolationKind::Features,
                s.type_name(t).into(),
                "non-finite feature value".into(),
            );
        }
    }

    if p.adjacency.len() != s.relations().len() {
        push(
            ViolationKind::MissingAdjacency,
            "<graph>".into(),
            format!(
                "{} adjacency matrices for {} relations",
                p.adjacency.len(),
                s.relations().len()
            ),
        );
        return out;
    }
    let mut shape_ok = vec![false; p.adjacency.len()];
    for (r, &(src, dst)) in s.relations().iter().enumerate() {
        let a = &p.adjacency[r];
        let want = (g.num_objects(dst), g.num_objects(src));
        if a.shape() != want {
            push(
                ViolationKind::Shape,
                s.relation_name(r),
                format!("adjacency is {:?}, expected {:?}", a.shape(), want),
            );
            continue;
        }
        if let Err(e) = a.check() {
            push(ViolationKind::Csr, s.relation_name(r), e.to_string());
            continue;
        }
        shape_ok[r] = true;
    }
    for (r, &(src, dst)) in s.relations().iter().enumerate() {
        if src >= dst {
            continue;
        }
        let Some(back) = s.relation_id(dst, src) else {
            continue;
        };
        if shape_ok[r]
            && shape_ok[back]
            && !p.adjacency[r].is_transpose_pattern_of(&p.adjacency[back])
        {
            push(
                ViolationKind::Symmetry,
                s.relation_name(r),
                format!("pattern is not the transpose of {}", s.relation_name(back)),
            );
        }
    }

    for t in 0..s.n_types() {
        let name = s.type_name(t).to_string();
        let labels = p.labels.get(t).and_then(|l| l.as_ref());
        let classes = p.class_counts.get(t).copied().unwrap_or(0);
        if let Some(l) = labels {
            if l.len() != g.num_objects(t) {
                push(
                    ViolationKind::Labels,
                    name.clone(),
                    format!("{} labels for {} objects", l.len(), g.num_objects(t)),
                );
            }
            if let Some((i, y)) = l
                .iter()
                .enumerate()
                .find_map(|(i, y)| y.filter(|&y| y >= classes).map(|y| (i, y)))
            {
                push(
                    ViolationKind::Labels,
                    name.clone(),
                    format!("object {i} has class {y} but the type has {classes} classes"),
                );
            }
        }
        let Some(split) = p.splits.get(t).and_then(|x| x.as_ref()) else {
            continue;
        };
        let mut seen = HashSet::new();
        for (part, idx) in [
            ("train", &split.train),
            ("val", &split.val),
            ("test", &split.test),
        ] {
            for &i in idx.iter() {
                if !seen.insert(i) {
                    push(
                        ViolationKind::Split,
                        name.clone(),
                        format!("{part}: index {i} repeated across splits"),
                    );
                    break;
                }
                if i >= g.num_objects(t) {
                    push(
                        ViolationKind::Split,
                        name.clone(),
                        format!("{part}: index {i} out of range"),
                    );
                    break;
                }
                if labels.and_then(|l| l.get(i).copied().flatten()).is_none() {
                    push(
                        ViolationKind::Split,
                        name.clone(),
                        format!("{part}: object {i} is unlabeled"),
                    );
                    break;
                }
            }
        }
    }
    out
}
