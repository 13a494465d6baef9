use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TypeId = usize;
pub type RelId = usize;

/// On-disk form of a [`Schema`]; array order is the canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub types: Vec<String>,
    pub relations: Vec<[String; 2]>,
}

/// Object types and directed relations `⟨source, target⟩`.
///
/// Relation order is the declaration order and is used everywhere a
/// deterministic iteration order is needed (attention columns, parameter
/// names, reports).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    types: Vec<String>,
    relations: Vec<(TypeId, TypeId)>,
    /// Per target type: `(source type, relation)` in declaration order.
    incoming: Vec<Vec<(TypeId, RelId)>>,
}

impl Schema {
    pub fn new<S: AsRef<str>>(types: &[S], relations: &[(S, S)]) -> Result<Schema> {
        let file = SchemaFile {
            types: types.iter().map(|t| t.as_ref().to_string()).collect(),
            relations: relations
                .iter()
                .map(|(s, d)| [s.as_ref().to_string(), d.as_ref().to_string()])
                .collect(),
        };
        Schema::from_file(&file)
    }

    pub fn from_file(file: &SchemaFile) -> Result<Schema> {
        if file.types.len() + file.relations.len() <= 2 {
            return Err(Error::Schema(format!(
                "need more than two types plus relations, got {} + {}",
                file.types.len(),
                file.relations.len()
            )));
        }
        let mut seen = HashSet::new();
        for t in &file.types {
            if t.is_empty()
                || t.chars()
                    .any(|c| c.is_whitespace() || c == '/' || c == '\\')
            {
                return Err(Error::Schema(format!("invalid type name `{t}`")));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::Schema(format!("duplicate type `{t}`")));
            }
        }
        let lookup = |name: &str| {
            file.types.iter().position(|t| t == name).ok_or_else(|| {
                Error::Schema(format!("relation endpoint `{name}` is not a declared type"))
            })
        };
        let mut relations = Vec::with_capacity(file.relations.len());
        for [s, d] in &file.relations {
            let pair = (lookup(s)?, lookup(d)?);
            if relations.contains(&pair) {
                return Err(Error::Schema(format!("duplicate relation ⟨{s}, {d}⟩")));
            }
            relations.push(pair);
        }
        let mut incoming = vec![Vec::new(); file.types.len()];
        for (r, &(s, d)) in relations.iter().enumerate() {
            incoming[d].push((s, r));
        }
        Ok(Schema {
            types: file.types.clone(),
            relations,
            incoming,
        })
    }

    pub fn to_file(&self) -> SchemaFile {
        SchemaFile {
            types: self.types.clone(),
            relations: self
                .relations
                .iter()
                .map(|&(s, d)| [self.types[s].clone(), self.types[d].clone()])
                .collect(),
        }
    }

    /// The DBLP-style schema P/A/C/T with paper–author, paper–conference
    /// and paper–term relations in both directions.
    pub fn dblp() -> Schema {
        Schema::new(
            &["P", "A", "C", "T"],
            &[
                ("C", "P"),
                ("P", "C"),
                ("A", "P"),
                ("P", "A"),
                ("T", "P"),
                ("P", "T"),
            ],
        )
        .expect("static schema")
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types[t]
    }

    pub fn type_id(&self, name: &str) -> Result<TypeId> {
        self.types
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    pub fn relations(&self) -> &[(TypeId, TypeId)] {
        &self.relations
    }

    pub fn relation_id(&self, source: TypeId, target: TypeId) -> Option<RelId> {
        self.relations.iter().position(|&p| p == (source, target))
    }

    /// `"S->D"`.
    pub fn relation_name(&self, r: RelId) -> String {
        let (s, d) = self.relations[r];
        format!("{}->{}", self.types[s], self.types[d])
    }

    /// `𝒩_Ω` with the relation carrying each neighbor type, in declaration
    /// order.
    pub fn neighbors(&self, t: TypeId) -> &[(TypeId, RelId)] {
        &self.incoming[t]
    }

    /// Names of the neighbor types of `omega` in declaration order.
    pub fn neighbor_types(&self, omega: &str) -> Result<Vec<&str>> {
        let t = self.type_id(omega)?;
        Ok(self.incoming[t]
            .iter()
            .map(|&(g, _)| self.types[g].as_str())
            .collect())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.to_file()).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn dblp_neighbors_follow_declaration_order() {
        let s = Schema::dblp();
        assert_eq!(s.neighbor_types("P").unwrap(), vec!["C", "A", "T"]);
        assert_eq!(s.neighbor_types("C").unwrap(), vec!["P"]);
        assert!(matches!(s.neighbor_types("X"), Err(Error::UnknownType(t)) if t == "X"));
    }

    #[test]
    fn source_only_type_has_no_neighbors() {
        let s = Schema::new(&["A", "B"], &[("A", "B")]).unwrap();
        assert!(s.neighbor_types("A").unwrap().is_empty());
        assert_eq!(s.neighbor_types("B").unwrap(), vec!["A"]);
    }

    #[test]
    fn rejects_malformed_schemas() {
        assert!(Schema::new(&["A", "B"], &[]).is_err());
        assert!(Schema::new(&["A"], &[("A", "A")]).is_err());
        assert!(Schema::new(&["A", "A", "B"], &[("A", "B")]).is_err());
        assert!(Schema::new(&["A", "B"], &[("A", "C")]).is_err());
        assert!(Schema::new(&["A", "B"], &[("A", "B"), ("A", "B")]).is_err());
        assert!(Schema::new(&["A", "B C"], &[("A", "A")]).is_err());
    }

    #[test]
    fn real_self_relation_is_a_neighbor() {
        let s = Schema::new(&["P", "A"], &[("P", "P"), ("A", "P"), ("P", "A")]).unwrap();
        assert_eq!(s.neighbor_types("P").unwrap(), vec!["P", "A"]);
    }

    #[test]
    fn hash_tracks_order() {
        let a = Schema::new(&["A", "B"], &[("A", "B"), ("B", "A")]).unwrap();
        let b = Schema::new(&["A", "B"], &[("B", "A"), ("A", "B")]).unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }

    proptest! {
        #[test]
        fn neighbor_membership_matches_relations(edges in proptest::collection::hash_set((0usize..5, 0usize..5), 1..12)) {
            let names = ["A", "B", "C", "D", "E"];
            let rels: Vec<(&str, &str)> = edges.iter().map(|&(s, d)| (names[s], names[d])).collect();
            let s = Schema::new(&names, &rels).unwrap();
            for (o, omega) in names.iter().enumerate() {
                let n = s.neighbor_types(omega).unwrap();
                for (g, gamma) in names.iter().enumerate() {
                    prop_assert_eq!(n.contains(gamma), edges.contains(&(g, o)));
                }
            }
        }
    }
}
