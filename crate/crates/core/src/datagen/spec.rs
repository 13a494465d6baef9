use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{Schema, SchemaFile, TypeId};

/// `(authors, total objects, total links)` of the eight scaled DBLP graphs.
pub const DBLP_SCALES: [(usize, usize, usize); 8] = [
    (800, 6183, 21308),
    (1500, 9799, 38384),
    (2500, 13935, 59578),
    (4000, 18785, 84356),
    (5500, 22969, 106171),
    (7000, 26327, 125894),
    (10000, 31775, 147777),
    (14475, 37791, 170794),
];

/// Wiring of one relation pair. Every `owner` object draws a degree and
/// picks that many distinct `other` objects; both directions are emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    pub owner: String,
    pub other: String,
    /// Power-law exponent of the degree distribution; `None` draws degrees
    /// uniformly from `[min_degree, max_degree]`.
    pub exponent: Option<f64>,
    pub min_degree: usize,
    pub max_degree: Option<usize>,
    /// Exact number of links; degrees are power-law weights rescaled to
    /// this total. `None` samples degrees independently.
    #[serde(default)]
    pub links: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSpec {
    pub schema: SchemaFile,
    pub counts: BTreeMap<String, usize>,
    pub relations: Vec<RelationSpec>,
    /// Types along which labels are planted, anchor first, labeled type last.
    pub planted: Vec<String>,
    pub n_classes: usize,
    /// Probability of replacing a label by a different random class.
    pub noise: f64,
    /// Probability that a labeled object's planted link is off-class; the
    /// off-class share is capped below one half so the majority holds.
    pub mix: f64,
    pub feature_dim: usize,
    /// Add a class indicator to the labeled type's features.
    pub informative_features: bool,
    pub seed: u64,
}

impl Default for GenSpec {
    /// A DBLP-like network of about 5k objects labeled along C→P→A.
    fn default() -> Self {
        let counts = [("P", 2500), ("A", 1500), ("C", 20), ("T", 1000)];
        GenSpec {
            schema: Schema::dblp().to_file(),
            counts: counts.iter().map(|&(t, n)| (t.to_string(), n)).collect(),
            relations: vec![
                RelationSpec::fixed("P", "C", 1),
                RelationSpec::power_law("A", "P", 1, 2.5),
                RelationSpec::power_law("P", "T", 3, 2.5),
            ],
            planted: vec!["C".into(), "P".into(), "A".into()],
            n_classes: 4,
            noise: 0.05,
            mix: 0.2,
            feature_dim: 128,
            informative_features: false,
            seed: 0,
        }
    }
}

impl RelationSpec {
    pub fn fixed(owner: &str, other: &str, degree: usize) -> RelationSpec {
        RelationSpec {
            owner: owner.into(),
            other: other.into(),
            exponent: None,
            min_degree: degree,
            max_degree: Some(degree),
            links: None,
        }
    }

    pub fn power_law(owner: &str, other: &str, min_degree: usize, exponent: f64) -> RelationSpec {
        RelationSpec {
            owner: owner.into(),
            other: other.into(),
            exponent: Some(exponent),
            min_degree,
            max_degree: None,
            links: None,
        }
    }

    fn with_links(mut self, links: usize) -> RelationSpec {
        self.links = Some(links);
        self
    }
}

/// Share of the non-conference objects that are papers, and of the
/// non-conference links that are author links, in the scaled graphs.
const PAPER_SHARE: f64 = 0.617;
const AUTHOR_LINK_SHARE: f64 = 0.25;

impl GenSpec {
    /// A DBLP-like spec hitting `authors`, `total` objects and `links`
    /// exactly.
    pub fn dblp_scaled(authors: usize, total: usize, links: usize, seed: u64) -> Result<GenSpec> {
        let conferences = 20;
        let rest = total
            .checked_sub(authors + conferences)
            .filter(|&r| r >= 2)
            .ok_or_else(|| {
                Error::Config(format!("{total} objects cannot hold {authors} authors"))
            })?;
        let papers = ((rest as f64 * PAPER_SHARE).round() as usize).clamp(1, rest - 1);
        let terms = rest - papers;
        let other_links = links.checked_sub(papers).ok_or_else(|| {
            Error::Config(format!(
                "{links} links are fewer than the {papers} paper-conference links"
            ))
        })?;
        let author_links = ((other_links as f64 * AUTHOR_LINK_SHARE).round() as usize).max(authors);
        let term_links = other_links
            .checked_sub(author_links)
            .filter(|&l| l >= papers)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{links} links too few for {papers} papers with terms"
                ))
            })?;
        let counts = [
            ("P", papers),
            ("A", authors),
            ("C", conferences),
            ("T", terms),
        ];
        Ok(GenSpec {
            counts: counts.iter().map(|&(t, n)| (t.to_string(), n)).collect(),
            relations: vec![
                RelationSpec::fixed("P", "C", 1),
                RelationSpec::power_law("A", "P", 1, 2.5).with_links(author_links),
                RelationSpec::power_law("P", "T", 1, 2.5).with_links(term_links),
            ],
            seed,
            ..GenSpec::default()
        })
    }

    /// A DBLP-shaped graph of 15 objects with narrow features, for
    /// gradient checks and smoke tests.
    pub fn tiny(seed: u64) -> GenSpec {
        let counts = [("P", 6), ("A", 4), ("C", 2), ("T", 3)];
        GenSpec {
            counts: counts.iter().map(|&(t, n)| (t.to_string(), n)).collect(),
            relations: vec![
                RelationSpec::fixed("P", "C", 1),
                RelationSpec {
                    max_degree: Some(3),
                    ..RelationSpec::power_law("A", "P", 1, 2.5)
                },
                RelationSpec {
                    max_degree: Some(2),
                    ..RelationSpec::power_law("P", "T", 1, 2.5)
                },
            ],
            n_classes: 2,
            noise: 0.0,
            feature_dim: 5,
            seed,
            ..GenSpec::default()
        }
    }

    /// Checks the spec and resolves names against its schema.
    pub fn resolve(&self) -> Result<Resolved> {
        let schema = Schema::from_file(&self.schema)?;
        let n = schema.n_types();
        let mut counts = vec![None; n];
        for (name, &c) in &self.counts {
            counts[schema.type_id(name)?] = Some(c);
        }
        let counts = counts
            .into_iter()
            .enumerate()
            .map(|(t, c)| {
                c.filter(|&c| c > 0).ok_or_else(|| {
                    Error::Config(format!(
                        "no positive object count for type {}",
                        schema.type_name(t)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if self.n_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} not in [0, 1)", self.noise)));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::Config(format!("mix {} not in [0, 1]", self.mix)));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        let mut relations = Vec::new();
        let mut covered = vec![false; schema.relations().len()];
        for r in &self.relations {
            let (o, x) = (schema.type_id(&r.owner)?, schema.type_id(&r.other)?);
            let fwd = schema.relation_id(x, o);
            let back = schema.relation_id(o, x);
            let (Some(fwd), Some(back)) = (fwd, back) else {
                return Err(Error::Config(format!(
                    "schema lacks {}<->{} in both directions",
                    r.owner, r.other
                )));
            };
            for id in [fwd, back] {
                if std::mem::replace(&mut covered[id], true) && fwd != back {
                    return Err(Error::Config(format!(
                        "relation {} wired twice",
                        schema.relation_name(id)
                    )));
                }
            }
            if r.max_degree.is_some_and(|m| m < r.min_degree) {
                return Err(Error::Config(format!(
                    "{}-{}: max_degree below min_degree",
                    r.owner, r.other
                )));
            }
            if r.exponent.is_some_and(|e| !(e > 1.0 && e.is_finite())) {
                return Err(Error::Config(format!(
                    "{}-{}: exponent must exceed 1",
                    r.owner, r.other
                )));
            }
            if r.exponent.is_none() && r.max_degree.is_none() {
                return Err(Error::Config(format!(
                    "{}-{}: uniform degrees need max_degree",
                    r.owner, r.other
                )));
            }
            relations.push((o, x, fwd, back));
        }
        if let Some(r) = covered.iter().position(|c| !c) {
            return Err(Error::Config(format!(
                "relation {} has no wiring spec",
                schema.relation_name(r)
            )));
        }
        if self.planted.len() < 2 {
            return Err(Error::Config(
                "planted meta-path needs at least two types".into(),
            ));
        }
        let planted = self
            .planted
            .iter()
            .map(|t| schema.type_id(t))
            .collect::<Result<Vec<_>>>()?;
        for (k, &t) in planted.iter().enumerate() {
            if planted[..k].contains(&t) {
                return Err(Error::Config(format!(
                    "planted meta-path repeats type {}",
                    schema.type_name(t)
                )));
            }
        }
        let mut planted_rel = Vec::new();
        for w in planted.windows(2) {
            let k = relations
                .iter()
                .position(|&(o, x, _, _)| o == w[1] && x == w[0])
                .ok_or_else(|| {
                    Error::Config(format!(
                        "planted hop {}->{} must be wired with owner {}",
                        schema.type_name(w[0]),
                        schema.type_name(w[1]),
                        schema.type_name(w[1])
                    ))
                })?;
            if self.relations[k].min_degree == 0 {
                return Err(Error::Config("planted hops need min_degree >= 1".into()));
            }
            planted_rel.push(k);
        }
        Ok(Resolved {
            schema,
            counts,
            relations,
            planted,
            planted_rel,
        })
    }
}

/// A checked spec with names resolved to ids.
#[derive(Debug)]
pub struct Resolved {
    pub schema: Schema,
    pub counts: Vec<usize>,
    /// Per relation spec: owner, other, relation other→owner, owner→other.
    pub relations: Vec<(TypeId, TypeId, usize, usize)>,
    pub planted: Vec<TypeId>,
    /// Index into `relations` for each planted hop.
    pub planted_rel: Vec<usize>,
}
