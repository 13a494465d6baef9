use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{Schema, TypeId};
use crate::numerics::{xavier_uniform, Matrix, Tape, Var};

/// Architecture knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Output width of each non-input layer; the model has
    /// `widths.len() + 1` layers. The last entry is replaced by the class
    /// count for labeled types.
    pub widths: Vec<usize>,
    /// Hidden size of the type-level attention.
    pub d_a: usize,
    /// Replace type-level attention by an unweighted mean.
    pub mean_variant: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            widths: vec![64, 32, 16, 8],
            d_a: 64,
            mean_variant: false,
        }
    }
}

impl ModelConfig {
    pub fn n_layers(&self) -> usize {
        self.widths.len() + 1
    }

    pub fn check(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths {:?} must be non-empty and positive",
                self.widths
            )));
        }
        if self.d_a == 0 {
            return Err(Error::Config("attention size d_a must be positive".into()));
        }
        Ok(())
    }
}

/// Per-layer, per-type widths: row 0 holds the input feature widths.
/// `output[t]` overrides the last layer's width for type `t`.
pub fn layer_dims(input: &[usize], widths: &[usize], output: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut dims = vec![input.to_vec()];
    for (l, &w) in widths.iter().enumerate() {
        let last = l + 1 == widths.len();
        dims.push(
            (0..input.len())
                .map(|t| {
                    if last {
                        output.get(t).copied().flatten().unwrap_or(w)
                    } else {
                        w
                    }
                })
                .collect(),
        );
    }
    dims
}

/// Parameters of one `Ω` block: `W^{Self−Ω}`, `W^{Γ→Ω}` per neighbor type
/// (schema order), the attention query/key maps and the attention vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub w_self: Matrix,
    pub w_rel: Vec<Matrix>,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_a: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `dims[l][t]`: width of type `t` at layer `l` (layer 0 = input).
    pub dims: Vec<Vec<usize>>,
    /// `layers[l][t]`: block for type `t` producing layer `l + 1`.
    pub layers: Vec<Vec<BlockParams>>,
    pub d_a: usize,
    pub mean_variant: bool,
}

impl ModelParams {
    /// Xavier-uniform initialization of every matrix, in [`Self::names`]
    /// order.
    pub fn init<R: Rng + ?Sized>(
        schema: &Schema,
        dims: Vec<Vec<usize>>,
        d_a: usize,
        mean_variant: bool,
        rng: &mut R,
    ) -> ModelParams {
        let layers = (0..dims.len() - 1)
            .map(|l| {
                (0..schema.n_types())
                    .map(|t| {
                        let out = dims[l + 1][t];
                        BlockParams {
                            w_self: xavier_uniform(dims[l][t], out, rng),
                            w_rel: schema
                                .neighbors(t)
                                .iter()
                                .map(|&(g, _)| xavier_uniform(dims[l][g], out, rng))
                                .collect(),
                            w_q: xavier_uniform(out, d_a, rng),
                            w_k: xavier_uniform(out, d_a, rng),
                            w_a: xavier_uniform(2 * d_a, 1, rng),
                        }
                    })
                    .collect()
            })
            .collect();
        ModelParams {
            dims,
            layers,
            d_a,
            mean_variant,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len()
    }

    pub fn output_dim(&self, t: TypeId) -> usize {
        self.dims.last().map_or(0, |d| d[t])
    }

    /// Checkpoint names `L<layer>_<block>_<param>` in canonical order; the
    /// layer number is the 1-based index of the layer the block produces.
    pub fn names(&self, schema: &Schema) -> Vec<String> {
        let mut names = Vec::new();
        for (l, blocks) in self.layers.iter().enumerate() {
            for (t, _) in blocks.iter().enumerate() {
                let prefix = format!("L{}_{}", l + 2, schema.type_name(t));
                names.push(format!("{prefix}_self"));
                for &(g, _) in schema.neighbors(t) {
                    names.push(format!("{prefix}_rel_{}", schema.type_name(g)));
                }
                for p in ["wq", "wk", "wa"] {
                    names.push(format!("{prefix}_{p}"));
                }
            }
        }
        names
    }

    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for b in self.layers.iter().flatten() {
            out.push(&b.w_self);
            out.extend(b.w_rel.iter());
            out.extend([&b.w_q, &b.w_k, &b.w_a]);
        }
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for b in self.layers.iter_mut().flatten() {
            out.push(&mut b.w_self);
            out.extend(b.w_rel.iter_mut());
            out.push(&mut b.w_q);
            out.push(&mut b.w_k);
            out.push(&mut b.w_a);
        }
        out
    }

    /// Replaces every matrix from a flat list in [`Self::matrices`] order.
    pub fn set_matrices(&mut self, values: &[Matrix]) -> Result<()> {
        let mut slots = self.matrices_mut();
        if slots.len() != values.len() {
            return Err(Error::Model(format!(
                "{} matrices for {} parameters",
                values.len(),
                slots.len()
            )));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::shape("set_matrices", slot.shape(), v.shape()));
            }
            **slot = v.clone();
        }
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.matrices().iter().map(|m| m.as_slice().len()).sum()
    }

    /// Checks the shape contract against a schema and input widths.
    pub fn check(&self, schema: &Schema, input_dims: &[usize]) -> Result<()> {
        let n = schema.n_types();
        if self.dims.len() < 2
            || self.dims.iter().any(|d| d.len() != n)
            || self.layers.len() + 1 != self.dims.len()
        {
            return Err(Error::Model(format!(
                "parameters describe {} layers over {} types, schema has {n} types",
                self.dims.len(),
                self.dims.first().map_or(0, |d| d.len())
            )));
        }
        for (t, &d) in input_dims.iter().enumerate() {
            if self.dims[0][t] != d {
                return Err(Error::Model(format!(
                    "type {}: features have {d} columns, model expects {}",
                    schema.type_name(t),
                    self.dims[0][t]
                )));
            }
        }
        for (l, blocks) in self.layers.iter().enumerate() {
            if blocks.len() != n {
                return Err(Error::Model(format!(
                    "layer {}: {} blocks for {n} types",
                    l + 2,
                    blocks.len()
                )));
            }
            for (t, b) in blocks.iter().enumerate() {
                let at =
                    |what: &str| format!("layer {} block {} ({what})", l + 2, schema.type_name(t));
                let out = self.dims[l + 1][t];
                let mut expect = vec![(at("self"), b.w_self.shape(), (self.dims[l][t], out))];
                if b.w_rel.len() != schema.neighbors(t).len() {
                    return Err(Error::Model(
                        format!(
                            "{} relation projections for {} neighbor types",
                            b.w_rel.len(),
                            schema.neighbors(t).len()
                        ) + &format!(" at {}", at("rel")),
                    ));
                }
                for (w, &(g, _)) in b.w_rel.iter().zip(schema.neighbors(t)) {
                    expect.push((
                        at(&format!("rel {}", schema.type_name(g))),
                        w.shape(),
                        (self.dims[l][g], out),
                    ));
                }
                expect.push((at("wq"), b.w_q.shape(), (out, self.d_a)));
                expect.push((at("wk"), b.w_k.shape(), (out, self.d_a)));
                expect.push((at("wa"), b.w_a.shape(), (2 * self.d_a, 1)));
                for (what, got, want) in expect {
                    if got != want {
                        return Err(Error::shape(what, got, want));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Tape handles for one block.
#[derive(Clone, Debug)]
pub struct BlockVars {
    pub w_self: Var,
    pub w_rel: Vec<Var>,
    pub w_q: Var,
    pub w_k: Var,
    pub w_a: Var,
}

/// Every parameter of a [`ModelParams`] registered on a tape.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub layers: Vec<Vec<BlockVars>>,
    /// Same order as [`ModelParams::matrices`].
    pub flat: Vec<Var>,
}

impl ParamVars {
    pub fn register(tape: &mut Tape, params: &ModelParams) -> ParamVars {
        let mut flat = Vec::new();
        let mut reg = |m: &Matrix| {
            let v = tape.param(m.clone());
            flat.push(v);
            v
        };
        let layers = params
            .layers
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .map(|b| BlockVars {
                        w_self: reg(&b.w_self),
                        w_rel: b.w_rel.iter().map(&mut reg).collect(),
                        w_q: reg(&b.w_q),
                        w_k: reg(&b.w_k),
                        w_a: reg(&b.w_a),
                    })
                    .collect()
            })
            .collect();
        ParamVars { layers, flat }
    }

    /// Gradients in [`ModelParams::matrices`] order; zeros where nothing flowed.
    pub fn gradients(&self, tape: &Tape, grads: &crate::numerics::Gradients) -> Vec<Matrix> {
        self.flat
            .iter()
            .map(|&v| grads.get_or_zeros(v, tape.shape(v)))
            .collect()
    }
}
