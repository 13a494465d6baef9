use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::tape::SparseOperand;
use crate::numerics::{Matrix, Tape, Var};

use super::params::BlockVars;

/// Row sums of a normalized adjacency may drift this far from 1.
const ROW_SUM_TOL: f64 = 1e-6;

/// Projection: `Y_self = H^Ω W_self` and `Y_Γ = H^Γ W^{Γ→Ω}` for each
/// neighbor type, in schema order.
pub fn project(
    tape: &mut Tape,
    block: &BlockVars,
    h_self: Var,
    h_neigh: &[Var],
) -> Result<(Var, Vec<Var>)> {
    if h_neigh.len() != block.w_rel.len() {
        return Err(Error::Model(format!(
            "{} neighbor inputs for {} relation projections",
            h_neigh.len(),
            block.w_rel.len()
        )));
    }
    let y_self = tape.matmul(h_self, block.w_self)?;
    let y_neigh = h_neigh
        .iter()
        .zip(&block.w_rel)
        .map(|(&h, &w)| tape.matmul(h, w))
        .collect::<Result<_>>()?;
    Ok((y_self, y_neigh))
}

/// Convolution: `Z_Γ = Â^{Ω−Γ} Y_Γ`; the self part passes through.
/// Each adjacency must already be row-normalized (empty rows allowed).
pub fn hetero_conv(
    tape: &mut Tape,
    y_self: Var,
    y_neigh: &[Var],
    adj: &[&Arc<SparseOperand>],
) -> Result<(Var, Vec<Var>)> {
    if y_neigh.len() != adj.len() {
        return Err(Error::Model(format!(
            "{} neighbor projections for {} adjacencies",
            y_neigh.len(),
            adj.len()
        )));
    }
    let n = tape.shape(y_self).0;
    let mut z = Vec::with_capacity(adj.len());
    for (&y, a) in y_neigh.iter().zip(adj) {
        let m = a.matrix();
        if m.n_rows() != n {
            return Err(Error::shape("hetero_conv", m.shape(), tape.shape(y)));
        }
        let err = m.max_row_sum_error();
        if err > ROW_SUM_TOL {
            return Err(Error::Model(format!(
                "adjacency is not row-normalized (row sum off by {err:e})"
            )));
        }
        z.push(tape.spmm(a, y)?);
    }
    Ok((y_self, z))
}

/// Result of the type-level attention for one block.
#[derive(Debug)]
pub struct BlockOutput {
    pub h: Var,
    /// `n × (1 + |𝒩|)`: column 0 is Self, then neighbor types in schema order.
    pub attention: Matrix,
}

/// Type-level attention and fusion. With `mean_variant` every column gets
/// weight `1 / (1 + |𝒩|)` and the attention parameters are unused.
pub fn type_attention(
    tape: &mut Tape,
    block: &BlockVars,
    z_self: Var,
    z_neigh: &[Var],
    mean_variant: bool,
) -> Result<BlockOutput> {
    let n = tape.shape(z_self).0;
    let m = 1 + z_neigh.len();
    let mut zs = Vec::with_capacity(m);
    zs.push(z_self);
    zs.extend_from_slice(z_neigh);
    if mean_variant {
        let total = tape.sum(&zs)?;
        let mean = tape.scale(total, 1.0 / m as f64);
        let h = tape.elu(mean);
        return Ok(BlockOutput {
            h,
            attention: Matrix::filled(n, m, 1.0 / m as f64),
        });
    }
    // [Z_c W_k ‖ Z_self W_q] w_a is evaluated as Z_c (W_k a_k) + Z_self (W_q a_q)
    // so the n × d_a keys and queries are never formed.
    let d_a = tape.shape(block.w_k).1;
    let a_k = tape.row_block(block.w_a, 0, d_a)?;
    let a_q = tape.row_block(block.w_a, d_a, d_a)?;
    let u_k = tape.matmul(block.w_k, a_k)?;
    let u_q = tape.matmul(block.w_q, a_q)?;
    let s_q = tape.matmul(z_self, u_q)?;
    let mut scores = Vec::with_capacity(m);
    for &z in &zs {
        let s_k = tape.matmul(z, u_k)?;
        let e = tape.add(s_k, s_q)?;
        scores.push(tape.elu(e));
    }
    let logits = tape.concat_cols(&scores)?;
    let att = tape.softmax_rows(logits);
    let fused = tape.weighted_sum(&zs, att)?;
    let h = tape.elu(fused);
    Ok(BlockOutput {
        h,
        attention: tape.value(att).clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hin::SparseAdj;

    fn block(tape: &mut Tape, d: usize, d_out: usize, d_a: usize, n_rel: usize) -> BlockVars {
        let f = |r: usize, c: usize, s: f64| {
            Matrix::from_fn(r, c, |i, j| ((i * 7 + j * 3) as f64 * s).sin() * 0.5)
        };
        BlockVars {
            w_self: tape.param(f(d, d_out, 0.3)),
            w_rel: (0..n_rel)
                .map(|k| tape.param(f(d, d_out, 0.5 + k as f64)))
                .collect(),
            w_q: tape.param(f(d_out, d_a, 0.7)),
            w_k: tape.param(f(d_out, d_a, 0.9)),
            w_a: tape.param(f(2 * d_a, 1, 1.1)),
        }
    }

    #[test]
    fn unnormalized_adjacency_is_rejected() {
        let mut tape = Tape::new();
        let y = tape.constant(Matrix::filled(2, 3, 1.0));
        let raw = Arc::new(SparseOperand::new(
            SparseAdj::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0)]).unwrap(),
        ));
        assert!(hetero_conv(&mut tape, y, &[y], &[&raw]).is_err());
        let norm = Arc::new(SparseOperand::new(raw.matrix().row_normalize()));
        let (_, z) = hetero_conv(&mut tape, y, &[y], &[&norm]).unwrap();
        // The empty row stays zero.
        assert_eq!(tape.value(z[0]).row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(tape.value(z[0]).row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn attention_rows_are_distributions() {
        let mut tape = Tape::new();
        let b = block(&mut tape, 3, 4, 2, 2);
        let z: Vec<Var> = (0..3)
            .map(|k| tape.constant(Matrix::from_fn(5, 4, |i, j| ((i + 2 * j + k) as f64).cos())))
            .collect();
        let out = type_attention(&mut tape, &b, z[0], &z[1..], false).unwrap();
        assert_eq!(out.attention.shape(), (5, 3));
        for i in 0..5 {
            let row = out.attention.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&a| a > 0.0));
        }
        let mean = type_attention(&mut tape, &b, z[0], &z[1..], true).unwrap();
        assert!(mean.attention.as_slice().iter().all(|&a| a == 1.0 / 3.0));
    }

    #[test]
    fn isolated_type_keeps_all_weight_on_self() {
        let mut tape = Tape::new();
        let b = block(&mut tape, 3, 4, 2, 0);
        let z = tape.constant(Matrix::from_fn(3, 4, |i, j| i as f64 - j as f64));
        let out = type_attention(&mut tape, &b, z, &[], false).unwrap();
        assert!(out.attention.as_slice().iter().all(|&a| a == 1.0));
        let elu = tape.value(z).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        assert!(tape.value(out.h).max_abs_diff(&elu) < 1e-15);
    }
}
