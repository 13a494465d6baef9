use rand::Rng;

use crate::error::{Error, Result};
use crate::hin::{HinGraph, Schema, TypeId};
use crate::numerics::{Matrix, Tape, Var};
use crate::rng;

use super::layer::{hetero_conv, project, type_attention};
use super::params::{ModelParams, ParamVars};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Inverted dropout with this rate after every hidden layer.
    Train {
        dropout: f64,
    },
    Eval,
}

/// Attention coefficients of one pass: `blocks[l][t]` is the
/// `n_t × (1 + |𝒩_t|)` matrix of the block producing layer `l + 1`, or
/// `None` when that block was pruned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionRecords {
    pub blocks: Vec<Vec<Option<Matrix>>>,
}

impl AttentionRecords {
    /// Column labels of block `t`: `Self` then neighbor type names.
    pub fn columns(schema: &Schema, t: TypeId) -> Vec<String> {
        std::iter::once("Self".to_string())
            .chain(
                schema
                    .neighbors(t)
                    .iter()
                    .map(|&(g, _)| schema.type_name(g).to_string()),
            )
            .collect()
    }
}

#[derive(Debug)]
pub struct ForwardOutput {
    /// Last-layer representations of the target types.
    pub outputs: Vec<Option<Var>>,
    pub attention: AttentionRecords,
}

/// Which blocks each transition must compute so that `targets` are
/// available at the last layer.
fn needed_blocks(schema: &Schema, n_transitions: usize, targets: &[TypeId]) -> Vec<Vec<bool>> {
    let n = schema.n_types();
    let mut need = vec![vec![false; n]; n_transitions];
    for &t in targets {
        need[n_transitions - 1][t] = true;
    }
    for l in (0..n_transitions - 1).rev() {
        for t in 0..n {
            if need[l + 1][t] {
                need[l][t] = true;
                for &(g, _) in schema.neighbors(t) {
                    need[l][g] = true;
                }
            }
        }
    }
    need
}

/// Runs the model on `tape`. Only blocks feeding `targets` are computed;
/// `None` means every type.
pub fn forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &ModelParams,
    vars: &ParamVars,
    g: &HinGraph,
    targets: Option<&[TypeId]>,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput> {
    let schema = g.schema();
    let n_types = schema.n_types();
    let input_dims: Vec<usize> = (0..n_types).map(|t| g.features(t).cols()).collect();
    params.check(schema, &input_dims)?;
    let all: Vec<TypeId> = (0..n_types).collect();
    let targets = targets.unwrap_or(&all);
    if let Some(&bad) = targets.iter().find(|&&t| t >= n_types) {
        return Err(Error::Model(format!("target type id {bad} out of range")));
    }
    let n_trans = params.layers.len();
    let need = needed_blocks(schema, n_trans, targets);

    let mut inputs = vec![false; n_types];
    for t in (0..n_types).filter(|&t| need[0][t]) {
        inputs[t] = true;
        for &(u, _) in schema.neighbors(t) {
            inputs[u] = true;
        }
    }
    let mut h: Vec<Option<Var>> = (0..n_types)
        .map(|t| inputs[t].then(|| tape.constant(g.features(t).clone())))
        .collect();
    let mut attention = AttentionRecords {
        blocks: vec![vec![None; n_types]; n_trans],
    };
    for (l, need_l) in need.iter().enumerate() {
        let mut next = vec![None; n_types];
        for t in (0..n_types).filter(|&t| need_l[t]) {
            let block = &vars.layers[l][t];
            let neighbors = schema.neighbors(t);
            let input = |u: TypeId| {
                h[u].ok_or_else(|| {
                    Error::Model(format!(
                        "layer {} input for type {} missing",
                        l + 1,
                        schema.type_name(u)
                    ))
                })
            };
            let h_self = input(t)?;
            let h_neigh = neighbors
                .iter()
                .map(|&(u, _)| input(u))
                .collect::<Result<Vec<_>>>()?;
            let adj: Vec<_> = neighbors.iter().map(|&(_, r)| g.normalized(r)).collect();
            let (y_self, y_neigh) = project(tape, block, h_self, &h_neigh)?;
            let (z_self, z_neigh) = hetero_conv(tape, y_self, &y_neigh, &adj)?;
            let out = type_attention(tape, block, z_self, &z_neigh, params.mean_variant)?;
            let hidden = l + 1 < n_trans;
            next[t] = Some(match mode {
                Mode::Train { dropout } if hidden => tape.dropout(out.h, dropout, true, rng)?,
                _ => out.h,
            });
            attention.blocks[l][t] = Some(out.attention);
        }
        h = next;
    }
    let outputs = (0..n_types)
        .map(|t| if targets.contains(&t) { h[t] } else { None })
        .collect();
    Ok(ForwardOutput { outputs, attention })
}

/// Evaluation-mode pass returning plain matrices.
pub fn eval_forward(
    params: &ModelParams,
    g: &HinGraph,
    targets: Option<&[TypeId]>,
) -> Result<(Vec<Option<Matrix>>, AttentionRecords)> {
    let mut tape = Tape::new();
    let vars = ParamVars::register(&mut tape, params);
    let out = forward(
        &mut tape,
        params,
        &vars,
        g,
        targets,
        Mode::Eval,
        &mut rng::stream(0, 0),
    )?;
    let values = out
        .outputs
        .iter()
        .map(|o| o.map(|v| tape.value(v).clone()))
        .collect();
    Ok((values, out.attention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::{GraphParts, SparseAdj};
    use crate::model::layer_dims;

    fn toy() -> HinGraph {
        let schema = Schema::new(&["P", "A"], &[("A", "P"), ("P", "A")]).unwrap();
        let pa =
            SparseAdj::from_triplets(3, 2, [(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)])
                .unwrap();
        let adjacency = vec![pa.clone(), pa.transpose()];
        let features = vec![
            Matrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5)),
            Matrix::from_fn(2, 3, |i, j| (i * j) as f64 * 0.3 - 0.2),
        ];
        HinGraph::validated(GraphParts::unlabeled(schema, adjacency, features)).unwrap()
    }

    fn params(g: &HinGraph) -> ModelParams {
        let dims = layer_dims(&[4, 3], &[5, 4, 2], &[]);
        ModelParams::init(
            g.schema(),
            dims,
            3,
            false,
            &mut rng::stream(3, rng::ids::INIT),
        )
    }

    #[test]
    fn pruned_pass_matches_full_pass() {
        let g = toy();
        let p = params(&g);
        let (full, att) = eval_forward(&p, &g, None).unwrap();
        let (pruned, _) = eval_forward(&p, &g, Some(&[0])).unwrap();
        assert!(pruned[1].is_none());
        assert_eq!(full[0], pruned[0]);
        assert_eq!(att.blocks.len(), 3);
        assert_eq!(att.blocks[2][0].as_ref().unwrap().shape(), (3, 2));
        assert_eq!(AttentionRecords::columns(g.schema(), 0), ["Self", "A"]);
    }

    #[test]
    fn pruned_two_layer_pass_reads_neighbor_inputs() {
        let g = crate::datagen::generate(&crate::datagen::GenSpec::tiny(0)).unwrap();
        let a = g.schema().type_id("A").unwrap();
        let dims = layer_dims(&[5; 4], &[4, 2], &[]);
        let p = ModelParams::init(g.schema(), dims, 3, false, &mut rng::stream(1, 1));
        let (out, att) = eval_forward(&p, &g, Some(&[a])).unwrap();
        assert_eq!(out[a].as_ref().unwrap().shape(), (4, 2));
        let (full, _) = eval_forward(&p, &g, None).unwrap();
        assert_eq!(out[a], full[a]);
        // Transition 1 computes only A and its neighbor P.
        assert_eq!(att.blocks[0].iter().filter(|b| b.is_some()).count(), 2);
    }

    #[test]
    fn mismatched_features_are_reported() {
        let g = toy();
        let dims = layer_dims(&[5, 3], &[2], &[]);
        let p = ModelParams::init(g.schema(), dims, 3, false, &mut rng::stream(3, 1));
        let err = eval_forward(&p, &g, None).unwrap_err().to_string();
        assert!(err.contains("type P"), "{err}");
    }

    #[test]
    fn dropout_only_in_training() {
        let g = toy();
        let p = params(&g);
        let run = |mode| {
            let mut tape = Tape::new();
            let vars = ParamVars::register(&mut tape, &p);
            let out =
                forward(&mut tape, &p, &vars, &g, None, mode, &mut rng::stream(9, 9)).unwrap();
            tape.value(out.outputs[0].unwrap()).clone()
        };
        let eval = run(Mode::Eval);
        assert_eq!(eval, run(Mode::Train { dropout: 0.0 }));
        assert_ne!(eval, run(Mode::Train { dropout: 0.5 }));
    }
}
