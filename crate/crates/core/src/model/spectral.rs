//! Numerical check that the heterogeneous convolution on one relation pair
//! coincides with a first-order spectral convolution on the bipartite graph
//! built from that pair.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hin::{HinGraph, SparseAdj};
use crate::numerics::tape::SparseOperand;
use crate::numerics::{Matrix, Tape};

/// The adjacency of one relation pair.
#[derive(Clone, Copy, Debug)]
pub enum RelationPair<'a> {
    /// `omega_gamma` is `n_Ω × n_Γ`, `gamma_omega` is `n_Γ × n_Ω`.
    Bipartite {
        omega_gamma: &'a SparseAdj,
        gamma_omega: &'a SparseAdj,
    },
    /// `Ω = Γ`: one square matrix.
    SelfRelation(&'a SparseAdj),
}

/// Dense `D⁻¹ A` with empty rows left at zero.
fn dense_random_walk(a: &Matrix) -> Matrix {
    let mut p = a.clone();
    for i in 0..p.rows() {
        let s: f64 = p.row(i).iter().sum();
        if s != 0.0 {
            p.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
    }
    p
}

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

fn stack_padded(blocks: &[&Matrix], width: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = blocks
        .iter()
        .flat_map(|m| {
            (0..m.rows()).map(move |i| {
                let mut r = m.row(i).to_vec();
                r.resize(width, 0.0);
                r
            })
        })
        .collect();
    Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, width))
}

/// Sparse route: `H w_self + Â H' w_rel` per side, with
/// `w_self = θ0[..d]` and `w_rel = θ1[..d']`.
fn conv_route(
    adj: &SparseAdj,
    h_self: &Matrix,
    h_other: &Matrix,
    theta0: &Matrix,
    theta1: &Matrix,
) -> Result<Matrix> {
    let mut tape = Tape::new();
    let w_self = tape.constant(Matrix::from_fn(h_self.cols(), theta0.cols(), |i, j| {
        theta0.get(i, j)
    }));
    let w_rel = tape.constant(Matrix::from_fn(h_other.cols(), theta1.cols(), |i, j| {
        theta1.get(i, j)
    }));
    let hs = tape.constant(h_self.clone());
    let ho = tape.constant(h_other.clone());
    let y_self = tape.matmul(hs, w_self)?;
    let y_rel = tape.matmul(ho, w_rel)?;
    let op = Arc::new(SparseOperand::new(adj.row_normalize()));
    let z = tape.spmm(&op, y_rel)?;
    let out = tape.add(y_self, z)?;
    Ok(tape.value(out).clone())
}

/// Maximum absolute difference between the two routes over both blocks.
///
/// `theta0` and `theta1` are `max(d_Ω, d_Γ) × d'`; features narrower than
/// that are zero-padded on the dense route and use the leading rows of
/// the thetas on the sparse route.
pub fn spectral_equivalence_check(
    pair: RelationPair<'_>,
    h_omega: &Matrix,
    h_gamma: &Matrix,
    theta0: &Matrix,
    theta1: &Matrix,
) -> Result<f64> {
    let d = h_omega.cols().max(h_gamma.cols());
    if theta0.shape() != theta1.shape() || theta0.rows() != d {
        return Err(Error::shape(
            "spectral_equivalence_check (theta)",
            theta0.shape(),
            theta1.shape(),
        ));
    }
    match pair {
        RelationPair::SelfRelation(a) => {
            if a.n_rows() != a.n_cols() || a.n_rows() != h_omega.rows() {
                return Err(Error::shape(
                    "spectral_equivalence_check",
                    a.shape(),
                    h_omega.shape(),
                ));
            }
            let p = dense_random_walk(&a.to_dense());
            let h = stack_padded(&[h_omega], d);
            let mut dense = naive_matmul(&naive_matmul(&p, &h), theta1);
            dense.add_assign(&naive_matmul(&h, theta0));
            let sparse = conv_route(a, h_omega, h_omega, theta0, theta1)?;
            Ok(dense.max_abs_diff(&sparse))
        }
        RelationPair::Bipartite {
            omega_gamma,
            gamma_omega,
        } => {
            let (n_o, n_g) = (h_omega.rows(), h_gamma.rows());
            if omega_gamma.shape() != (n_o, n_g) {
                return Err(Error::shape(
                    "spectral_equivalence_check (Ω−Γ)",
                    omega_gamma.shape(),
                    (n_o, n_g),
                ));
            }
            if gamma_omega.shape() != (n_g, n_o) {
                return Err(Error::shape(
                    "spectral_equivalence_check (Γ−Ω)",
                    gamma_omega.shape(),
                    (n_g, n_o),
                ));
            }
            let n = n_o + n_g;
            let mut a = Matrix::zeros(n, n);
            for (i, j, v) in omega_gamma.triplets() {
                a.set(i, n_o + j, v);
            }
            for (i, j, v) in gamma_omega.triplets() {
                a.set(n_o + i, j, v);
            }
            let p = dense_random_walk(&a);
            let h = stack_padded(&[h_omega, h_gamma], d);
            let mut dense = naive_matmul(&naive_matmul(&p, &h), theta1);
            dense.add_assign(&naive_matmul(&h, theta0));
            let top = conv_route(omega_gamma, h_omega, h_gamma, theta0, theta1)?;
            let bottom = conv_route(gamma_omega, h_gamma, h_omega, theta0, theta1)?;
            let mut dev: f64 = 0.0;
            for i in 0..n {
                let row = if i < n_o {
                    top.row(i)
                } else {
                    bottom.row(i - n_o)
                };
                for (x, y) in dense.row(i).iter().zip(row) {
                    dev = dev.max((x - y).abs());
                }
            }
            Ok(dev)
        }
    }
}

/// Runs the check on the relation pair `omega`/`gamma` of a graph using its
/// features.
pub fn check_graph_pair(
    g: &HinGraph,
    omega: &str,
    gamma: &str,
    theta0: &Matrix,
    theta1: &Matrix,
) -> Result<f64> {
    let s = g.schema();
    let (o, gm) = (s.type_id(omega)?, s.type_id(gamma)?);
    let forward = s
        .relation_id(gm, o)
        .ok_or_else(|| Error::Schema(format!("no relation {gamma}->{omega}")))?;
    let pair = if o == gm {
        RelationPair::SelfRelation(g.adjacency(forward))
    } else {
        let back = s.relation_id(o, gm).ok_or_else(|| {
            Error::Schema(format!(
                "relation {gamma}->{omega} has no reverse {omega}->{gamma}"
            ))
        })?;
        RelationPair::Bipartite {
            omega_gamma: g.adjacency(forward),
            gamma_omega: g.adjacency(back),
        }
    };
    spectral_equivalence_check(pair, g.features(o), g.features(gm), theta0, theta1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bipartite_pair_agrees() {
        let og = SparseAdj::from_triplets(3, 2, [(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let go = og.transpose();
        let ho = Matrix::from_fn(3, 2, |i, j| (i + j) as f64 - 1.0);
        let hg = Matrix::from_fn(2, 4, |i, j| (i * j) as f64 * 0.5);
        let t0 = Matrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.1);
        let t1 = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.05);
        let pair = RelationPair::Bipartite {
            omega_gamma: &og,
            gamma_omega: &go,
        };
        assert!(spectral_equivalence_check(pair, &ho, &hg, &t0, &t1).unwrap() < 1e-12);
        assert!(spectral_equivalence_check(pair, &hg, &ho, &t0, &t1).is_err());
    }

    #[test]
    fn self_relation_agrees() {
        let a = SparseAdj::from_triplets(3, 3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 3.0)]).unwrap();
        let h = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let t = Matrix::from_fn(2, 2, |i, j| (i + j) as f64 * 0.3);
        assert!(
            spectral_equivalence_check(RelationPair::SelfRelation(&a), &h, &h, &t, &t).unwrap()
                < 1e-12
        );
    }
}
