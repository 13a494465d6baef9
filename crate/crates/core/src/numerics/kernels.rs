//! Dense and sparse-dense products.
//!
//! Both the sequential and the rayon implementations cut the work into the
//! same fixed-size row chunks and reduce partial sums in chunk order, so the
//! two paths produce bit-identical results for any thread count.

use crate::hin::SparseAdj;
use crate::numerics::Matrix;

/// Output rows per task for row-parallel kernels.
pub const ROW_CHUNK: usize = 128;
/// Input rows per partial product in `aᵀ·b` reductions.
pub const REDUCE_CHUNK: usize = 1024;
/// Below this many multiply-adds the dispatcher stays sequential.
pub const PAR_THRESHOLD: usize = 1 << 16;

/// `out = a_rows · b` for a contiguous block of `m` rows of `a`.
fn gemm_block(a_rows: &[f64], m: usize, k: usize, b: &Matrix, out: &mut [f64]) {
    let n = b.cols();
    debug_assert_eq!(a_rows.len(), m * k);
    debug_assert_eq!(out.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.fill(0.0);
        return;
    }
    // SAFETY: slice lengths match the row-major strides passed in.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a_rows.as_ptr(),
            k as isize,
            1,
            b.as_slice().as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = a_blockᵀ · b_block` where both blocks hold `rows` rows.
fn gemm_tn_block(
    a_rows: &[f64],
    ka: usize,
    b_rows: &[f64],
    nb: usize,
    rows: usize,
    out: &mut [f64],
) {
    if rows == 0 || ka == 0 || nb == 0 {
        out.fill(0.0);
        return;
    }
    // SAFETY: aᵀ is read through swapped strides of the row-major block.
    unsafe {
        matrixmultiply::dgemm(
            ka,
            rows,
            nb,
            1.0,
            a_rows.as_ptr(),
            1,
            ka as isize,
            b_rows.as_ptr(),
            nb as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            nb as isize,
            1,
        );
    }
}

fn spmm_block(adj: &SparseAdj, first_row: usize, b: &Matrix, out: &mut [f64]) {
    let d = b.cols();
    if d == 0 {
        return;
    }
    for (r, dst) in out.chunks_mut(d).enumerate() {
        dst.fill(0.0);
        let (cols, vals) = adj.row(first_row + r);
        for (&j, &w) in cols.iter().zip(vals) {
            for (o, x) in dst.iter_mut().zip(b.row(j)) {
                *o += w * x;
            }
        }
    }
}

fn check_matmul(a: &Matrix, b: &Matrix) {
    assert_eq!(
        a.cols(),
        b.rows(),
        "matmul inner dimensions {:?} x {:?}",
        a.shape(),
        b.shape()
    );
}

pub mod seq {
    use super::*;

    pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
        check_matmul(a, b);
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = Matrix::zeros(m, n);
        if n == 0 {
            return out;
        }
        for (c, dst) in out.as_mut_slice().chunks_mut(ROW_CHUNK * n).enumerate() {
            let rows = dst.len() / n;
            let start = c * ROW_CHUNK * k;
            gemm_block(&a.as_slice()[start..start + rows * k], rows, k, b, dst);
        }
        out
    }

    /// `aᵀ · b`.
    pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
        assert_eq!(
            a.rows(),
            b.rows(),
            "matmul_tn row counts {:?} vs {:?}",
            a.shape(),
            b.shape()
        );
        let (ka, nb) = (a.cols(), b.cols());
        let mut acc = Matrix::zeros(ka, nb);
        let mut part = Matrix::zeros(ka, nb);
        for start in (0..a.rows()).step_by(REDUCE_CHUNK) {
            let rows = REDUCE_CHUNK.min(a.rows() - start);
            gemm_tn_block(
                &a.as_slice()[start * ka..(start + rows) * ka],
                ka,
                &b.as_slice()[start * nb..(start + rows) * nb],
                nb,
                rows,
                part.as_mut_slice(),
            );
            acc.add_assign(&part);
        }
        acc
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
        matmul(a, &b.transpose())
    }

    pub fn spmm(adj: &SparseAdj, b: &Matrix) -> Matrix {
        assert_eq!(
            adj.n_cols(),
            b.rows(),
            "spmm {:?} x {:?}",
            adj.shape(),
            b.shape()
        );
        let d = b.cols();
        let mut out = Matrix::zeros(adj.n_rows(), d);
        if d == 0 {
            return out;
        }
        for (c, dst) in out.as_mut_slice().chunks_mut(ROW_CHUNK * d).enumerate() {
            spmm_block(adj, c * ROW_CHUNK, b, dst);
        }
        out
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use rayon::prelude::*;

    use super::*;

    pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
        check_matmul(a, b);
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = Matrix::zeros(m, n);
        if n == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(ROW_CHUNK * n)
            .enumerate()
            .for_each(|(c, dst)| {
                let rows = dst.len() / n;
                let start = c * ROW_CHUNK * k;
                gemm_block(&a.as_slice()[start..start + rows * k], rows, k, b, dst);
            });
        out
    }

    pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
        assert_eq!(
            a.rows(),
            b.rows(),
            "matmul_tn row counts {:?} vs {:?}",
            a.shape(),
            b.shape()
        );
        let (ka, nb) = (a.cols(), b.cols());
        let starts: Vec<usize> = (0..a.rows()).step_by(REDUCE_CHUNK).collect();
        let parts: Vec<Matrix> = starts
            .par_iter()
            .map(|&start| {
                let rows = REDUCE_CHUNK.min(a.rows() - start);
                let mut part = Matrix::zeros(ka, nb);
                gemm_tn_block(
                    &a.as_slice()[start * ka..(start + rows) * ka],
                    ka,
                    &b.as_slice()[start * nb..(start + rows) * nb],
                    nb,
                    rows,
                    part.as_mut_slice(),
                );
                part
            })
            .collect();
        let mut acc = Matrix::zeros(ka, nb);
        for p in &parts {
            acc.add_assign(p);
        }
        acc
    }

    pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
        matmul(a, &b.transpose())
    }

    pub fn spmm(adj: &SparseAdj, b: &Matrix) -> Matrix {
        assert_eq!(
            adj.n_cols(),
            b.rows(),
            "spmm {:?} x {:?}",
            adj.shape(),
            b.shape()
        );
        let d = b.cols();
        let mut out = Matrix::zeros(adj.n_rows(), d);
        if d == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(ROW_CHUNK * d)
            .enumerate()
            .for_each(|(c, dst)| spmm_block(adj, c * ROW_CHUNK, b, dst));
        out
    }
}

#[cfg(feature = "parallel")]
#[inline]
fn go_parallel(work: usize) -> bool {
    work >= PAR_THRESHOLD && rayon::current_num_threads() > 1
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    #[cfg(feature = "parallel")]
    if go_parallel(a.rows() * a.cols() * b.cols()) {
        return par::matmul(a, b);
    }
    seq::matmul(a, b)
}

pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    #[cfg(feature = "parallel")]
    if go_parallel(a.rows() * a.cols() * b.cols()) {
        return par::matmul_tn(a, b);
    }
    seq::matmul_tn(a, b)
}

pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    #[cfg(feature = "parallel")]
    if go_parallel(a.rows() * a.cols() * b.rows()) {
        return par::matmul_nt(a, b);
    }
    seq::matmul_nt(a, b)
}

pub fn spmm(adj: &SparseAdj, b: &Matrix) -> Matrix {
    #[cfg(feature = "parallel")]
    if go_parallel(adj.nnz() * b.cols()) {
        return par::spmm(adj, b);
    }
    seq::spmm(adj, b)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 0);
        Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
    }

    #[test]
    fn matmul_matches_naive_across_chunk_boundaries() {
        let a = random(300, 17, 1);
        let b = random(17, 9, 2);
        assert!(matmul(&a, &b).max_abs_diff(&naive(&a, &b)) < 1e-12);
        assert!(
            matmul_tn(&a, &random(300, 5, 3))
                .max_abs_diff(&naive(&a.transpose(), &random(300, 5, 3)))
                < 1e-11
        );
        let c = random(4, 9, 4);
        assert!(matmul_nt(&b, &c).max_abs_diff(&naive(&b, &c.transpose())) < 1e-12);
    }

    #[test]
    fn matmul_tn_spans_several_reduction_chunks() {
        let a = random(2 * REDUCE_CHUNK + 7, 3, 5);
        let b = random(2 * REDUCE_CHUNK + 7, 2, 6);
        assert!(matmul_tn(&a, &b).max_abs_diff(&naive(&a.transpose(), &b)) < 1e-10);
    }

    #[test]
    fn empty_inner_dimension_gives_zeros() {
        let a = Matrix::zeros(3, 0);
        let b = Matrix::zeros(0, 2);
        assert_eq!(matmul(&a, &b), Matrix::zeros(3, 2));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let a = random(1000, 33, 7);
        let b = random(33, 20, 8);
        let g = random(1000, 20, 9);
        let adj = SparseAdj::from_triplets(
            700,
            1000,
            (0..5000).map(|t| ((t * 7919) % 700, (t * 104729) % 1000, 1.0 + (t % 3) as f64)),
        )
        .unwrap()
        .row_normalize();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        pool.install(|| {
            assert_eq!(par::matmul(&a, &b), seq::matmul(&a, &b));
            assert_eq!(par::matmul_tn(&a, &g), seq::matmul_tn(&a, &g));
            assert_eq!(par::matmul_nt(&g, &b), seq::matmul_nt(&g, &b));
            assert_eq!(par::spmm(&adj, &g), seq::spmm(&adj, &g));
        });
    }
}
