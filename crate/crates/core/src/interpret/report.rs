use serde::{Deserialize, Serialize};

use crate::hin::Schema;

use super::global::MetaPathScore;
use super::per_object::PerObjectScores;

/// `CPA` when every type name is one character, `Conf-Paper-Author`
/// otherwise.
pub fn path_label<S: AsRef<str>>(types: &[S]) -> String {
    let sep = if types.iter().all(|t| t.as_ref().chars().count() == 1) {
        ""
    } else {
        "-"
    };
    types
        .iter()
        .map(|t| t.as_ref())
        .collect::<Vec<_>>()
        .join(sep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathScore {
    pub meta_path: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub object: usize,
    pub paths: Vec<PathScore>,
}

/// Output of `explain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub target: String,
    pub n_layers: usize,
    pub global: Vec<MetaPathScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_object: Option<Vec<ObjectReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_mass: Option<f64>,
}

impl ExplainReport {
    /// Keeps the `k` best global meta-paths (and per-object paths).
    pub fn top_k(mut self, k: usize) -> ExplainReport {
        self.global.truncate(k);
        if let Some(objs) = &mut self.per_object {
            objs.iter_mut().for_each(|o| o.paths.truncate(k));
        }
        self
    }

    pub fn with_per_object(mut self, schema: &Schema, scores: &PerObjectScores) -> ExplainReport {
        let labels: Vec<String> = scores
            .paths
            .iter()
            .map(|p| path_label(&p.iter().map(|&t| schema.type_name(t)).collect::<Vec<_>>()))
            .collect();
        let objects = (0..scores.scores.rows())
            .map(|i| ObjectReport {
                object: i,
                paths: scores
                    .ranked(i)
                    .into_iter()
                    .map(|(k, score)| PathScore {
                        meta_path: labels[k].clone(),
                        score,
                    })
                    .collect(),
            })
            .collect();
        self.per_object = Some(objects);
        self.truncated_mass = Some(scores.truncated_mass);
        self
    }

    /// One line per meta-path contributor:
    /// `meta_path  score  choices  choice_score`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("meta_path\tscore\tchoices\tchoice_score\n");
        for m in &self.global {
            for c in &m.contributors {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    m.meta_path,
                    m.score,
                    c.choices.join(" "),
                    c.score
                ));
            }
        }
        out
    }
}
