//! Checkpoint directory: `model.json` plus one `L<layer>_<block>_<param>.tsv`
//! per parameter matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{Schema, SchemaFile};
use crate::io_util::{read_to_string, write_dir_atomic, write_json};
use crate::numerics::Matrix;

use super::params::{BlockParams, ModelParams};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub schema: SchemaFile,
    pub schema_hash: String,
    pub dims: Vec<Vec<usize>>,
    pub d_a: usize,
    pub mean_variant: bool,
    pub params: Vec<String>,
}

pub fn meta_path(dir: &Path) -> std::path::PathBuf {
    dir.join("model.json")
}

pub fn save(dir: &Path, params: &ModelParams, schema: &Schema) -> Result<()> {
    let names = params.names(schema);
    let meta = ModelMeta {
        schema: schema.to_file(),
        schema_hash: schema.hash(),
        dims: params.dims.clone(),
        d_a: params.d_a,
        mean_variant: params.mean_variant,
        params: names.clone(),
    };
    write_dir_atomic(dir, |tmp| {
        for (name, m) in names.iter().zip(params.matrices()) {
            m.save(&tmp.join(format!("{name}.tsv")))?;
        }
        write_json(&meta_path(tmp), &meta)
    })
}

/// Loads a checkpoint; the schema stored with it is returned alongside.
pub fn load(dir: &Path) -> Result<(ModelParams, Schema)> {
    let path = meta_path(dir);
    let meta: ModelMeta = serde_json::from_str(&read_to_string(&path)?)
        .map_err(|e| Error::parse(&path, e.to_string()))?;
    let schema = Schema::from_file(&meta.schema).map_err(|e| Error::parse(&path, e.to_string()))?;
    if schema.hash() != meta.schema_hash {
        return Err(Error::parse(
            &path,
            "schema hash does not match the stored schema",
        ));
    }
    if meta.dims.len() < 2 || meta.dims.iter().any(|d| d.len() != schema.n_types()) {
        return Err(Error::parse(&path, "layer widths do not match the schema"));
    }
    let load = |name: String| Matrix::load(&dir.join(format!("{name}.tsv")));
    let mut layers = Vec::new();
    for l in 0..meta.dims.len() - 1 {
        let mut blocks = Vec::new();
        for t in 0..schema.n_types() {
            let prefix = format!("L{}_{}", l + 2, schema.type_name(t));
            blocks.push(BlockParams {
                w_self: load(format!("{prefix}_self"))?,
                w_rel: schema
                    .neighbors(t)
                    .iter()
                    .map(|&(g, _)| load(format!("{prefix}_rel_{}", schema.type_name(g))))
                    .collect::<Result<_>>()?,
                w_q: load(format!("{prefix}_wq"))?,
                w_k: load(format!("{prefix}_wk"))?,
                w_a: load(format!("{prefix}_wa"))?,
            });
        }
        layers.push(blocks);
    }
    let params = ModelParams {
        dims: meta.dims.clone(),
        layers,
        d_a: meta.d_a,
        mean_variant: meta.mean_variant,
    };
    params.check(&schema, &meta.dims[0])?;
    Ok((params, schema))
}

/// Fails unless `schema` is the one the checkpoint was trained on.
pub fn ensure_schema(stored: &Schema, actual: &Schema) -> Result<()> {
    if stored.hash() != actual.hash() {
        return Err(Error::Model(format!(
            "checkpoint schema {} does not match data schema {}",
            &stored.hash()[..12],
            &actual.hash()[..12]
        )));
    }
    Ok(())
}
