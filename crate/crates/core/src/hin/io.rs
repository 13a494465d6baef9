//! Directory layout:
//!
//! - `schema.json`: `{"types": [...], "relations": [["A","P"], ...]}`
//! - `edges_<SRC>_<DST>.tsv`: `src<TAB>dst[<TAB>weight]`, 0-based per type,
//!   weight defaults to 1; repeated pairs are summed
//! - `features_<TYPE>.tsv`: `rows cols` header, then the dense rows
//! - `labels_<TYPE>.tsv`: `object<TAB>class`; missing objects are unlabeled
//! - `split_<TYPE>.json`: `{"train": [...], "val": [...], "test": [...]}`

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hin::{GraphParts, HinGraph, Schema, SchemaFile, SparseAdj, Split};
use crate::io_util::{read_to_string, write_atomic, write_json};
use crate::numerics::Matrix;

pub fn schema_path(dir: &Path) -> PathBuf {
    dir.join("schema.json")
}

pub fn edges_path(dir: &Path, src: &str, dst: &str) -> PathBuf {
    dir.join(format!("edges_{src}_{dst}.tsv"))
}

pub fn features_path(dir: &Path, t: &str) -> PathBuf {
    dir.join(format!("features_{t}.tsv"))
}

pub fn labels_path(dir: &Path, t: &str) -> PathBuf {
    dir.join(format!("labels_{t}.tsv"))
}

pub fn split_path(dir: &Path, t: &str) -> PathBuf {
    dir.join(format!("split_{t}.json"))
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let text = read_to_string(path)?;
    let file: SchemaFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    Schema::from_file(&file).map_err(|e| Error::parse(path, e.to_string()))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_index(tok: Option<&str>, path: &Path, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(path, format!("line {line}: missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(path, format!("line {line}: bad {what} `{tok}`")))
}

fn load_edges(path: &Path, n_src: usize, n_dst: usize) -> Result<SparseAdj> {
    let text = read_to_string(path)?;
    let mut triplets = Vec::new();
    for (line, l) in data_lines(&text) {
        let mut tok = l.split_whitespace();
        let s = parse_index(tok.next(), path, line, "source index")?;
        let d = parse_index(tok.next(), path, line, "target index")?;
        let w = match tok.next() {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| Error::parse(path, format!("line {line}: bad weight `{t}`")))?,
            None => 1.0,
        };
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::parse(
                path,
                format!("line {line}: weight must be positive and finite"),
            ));
        }
        if s >= n_src || d >= n_dst {
            return Err(Error::parse(
                path,
                format!("line {line}: edge ({s}, {d}) outside {n_src} x {n_dst} objects"),
            ));
        }
        triplets.push((d, s, w));
    }
    SparseAdj::from_triplets(n_dst, n_src, triplets).map_err(|e| Error::parse(path, e.to_string()))
}

fn load_labels(path: &Path, n: usize) -> Result<(Vec<Option<usize>>, usize)> {
    let text = read_to_string(path)?;
    let mut labels = vec![None; n];
    for (line, l) in data_lines(&text) {
        let mut tok = l.split_whitespace();
        let i = parse_index(tok.next(), path, line, "object index")?;
        let y = parse_index(tok.next(), path, line, "class index")?;
        if i >= n {
            return Err(Error::parse(
                path,
                format!("line {line}: object {i} out of range {n}"),
            ));
        }
        if labels[i].is_some() {
            return Err(Error::parse(
                path,
                format!("line {line}: object {i} labeled twice"),
            ));
        }
        labels[i] = Some(y);
    }
    let classes = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    Ok((labels, classes))
}

/// Reads a graph directory. The result is not validated.
pub fn load_dir(dir: &Path) -> Result<HinGraph> {
    let schema = load_schema(&schema_path(dir))?;
    let mut features = Vec::with_capacity(schema.n_types());
    for t in schema.types() {
        features.push(Matrix::load(&features_path(dir, t))?);
    }
    let mut adjacency = Vec::with_capacity(schema.relations().len());
    for &(src, dst) in schema.relations() {
        let path = edges_path(dir, schema.type_name(src), schema.type_name(dst));
        adjacency.push(load_edges(
            &path,
            features[src].rows(),
            features[dst].rows(),
        )?);
    }
    let mut parts = GraphParts::unlabeled(schema.clone(), adjacency, features);
    for (t, name) in schema.types().iter().enumerate() {
        let lp = labels_path(dir, name);
        let sp = split_path(dir, name);
        if lp.exists() {
            let (labels, classes) = load_labels(&lp, parts.features[t].rows())?;
            parts.labels[t] = Some(labels);
            parts.class_counts[t] = classes;
        }
        if sp.exists() {
            if !lp.exists() {
                return Err(Error::Data(format!(
                    "{} exists but labels file {} is missing",
                    sp.display(),
                    lp.display()
                )));
            }
            let text = read_to_string(&sp)?;
            let split: Split =
                serde_json::from_str(&text).map_err(|e| Error::parse(&sp, e.to_string()))?;
            parts.splits[t] = Some(split);
        }
    }
    Ok(HinGraph::new(parts))
}

/// Writes every file of the layout for `g`.
pub fn save_dir(g: &HinGraph, dir: &Path) -> Result<()> {
    let s = g.schema();
    write_json(&schema_path(dir), &s.to_file())?;
    for (t, name) in s.types().iter().enumerate() {
        g.features(t).save(&features_path(dir, name))?;
        if let Some(labels) = g.labels(t) {
            let mut text = String::new();
            for (i, y) in labels.iter().enumerate() {
                if let Some(y) = y {
                    text.push_str(&format!("{i}\t{y}\n"));
                }
            }
            write_atomic(&labels_path(dir, name), text.as_bytes())?;
        }
        if let Some(split) = g.split(t) {
            write_json(&split_path(dir, name), split)?;
        }
    }
    for (r, &(src, dst)) in s.relations().iter().enumerate() {
        let mut text = String::new();
        for (i, j, w) in g.adjacency(r).triplets() {
            if w == 1.0 {
                text.push_str(&format!("{j}\t{i}\n"));
            } else {
                text.push_str(&format!("{j}\t{i}\t{w:e}\n"));
            }
        }
        write_atomic(
            &edges_path(dir, s.type_name(src), s.type_name(dst)),
            text.as_bytes(),
        )?;
    }
    Ok(())
}
