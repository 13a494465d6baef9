use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Compressed-sparse-row adjacency `A^{Ω−Γ}`: rows index target-type
/// objects, columns index source-type objects.
///
/// Column indices are strictly increasing within a row and every stored
/// weight is finite and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdj {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdj {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        SparseAdj {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, weight)` triplets. Duplicate coordinates are
    /// merged by summing their weights; zero weights are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, w) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Sparse(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Sparse(format!(
                    "entry ({r}, {c}) has invalid weight {w}"
                )));
            }
            entries.push((r, c, w));
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, w) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("merged entry") += w;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            values.push(w);
            indptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        let merged = SparseAdj {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        };
        Ok(merged.drop_zeros())
    }

    /// Builds from raw CSR arrays, checking every invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let a = SparseAdj {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        };
        a.check()?;
        Ok(a)
    }

    /// Verifies the CSR invariants.
    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Sparse(m));
        if self.indptr.len() != self.n_rows + 1 || self.indptr[0] != 0 {
            return fail(format!(
                "indptr length {} for {} rows",
                self.indptr.len(),
                self.n_rows
            ));
        }
        if self.indices.len() != self.values.len()
            || *self.indptr.last().unwrap() != self.indices.len()
        {
            return fail("indptr/indices/values lengths disagree".into());
        }
        for i in 0..self.n_rows {
            if self.indptr[i] > self.indptr[i + 1] {
                return fail(format!("indptr decreases at row {i}"));
            }
            let (cols, vals) = self.row(i);
            for (k, (&c, &w)) in cols.iter().zip(vals).enumerate() {
                if c >= self.n_cols {
                    return fail(format!("row {i}: column {c} out of range {}", self.n_cols));
                }
                if k > 0 && cols[k - 1] >= c {
                    return fail(format!("row {i}: columns not strictly increasing"));
                }
                if !(w.is_finite() && w > 0.0) {
                    return fail(format!("row {i}: stored weight {w} is not positive"));
                }
            }
        }
        Ok(())
    }

    fn drop_zeros(self) -> Self {
        if self.values.iter().all(|&w| w > 0.0) {
            return self;
        }
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                if w > 0.0 {
                    indices.push(c);
                    values.push(w);
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseAdj {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and weights of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    /// `D⁻¹·A`: every row with at least one entry sums to one; empty rows
    /// stay empty. The sparsity pattern is unchanged.
    pub fn row_normalize(&self) -> SparseAdj {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            let s: f64 = self.values[a..b].iter().sum();
            if s > 0.0 {
                for w in &mut out.values[a..b] {
                    *w /= s;
                }
            }
        }
        out
    }

    /// Largest `|row sum − 1|` over nonempty rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n_rows)
            .filter(|&i| self.indptr[i + 1] > self.indptr[i])
            .map(|i| (self.row(i).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> SparseAdj {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                let dst = next[c];
                indices[dst] = i;
                values[dst] = w;
                next[c] += 1;
            }
        }
        SparseAdj {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
            values,
        }
    }

    /// True when `other` has exactly the transposed sparsity pattern.
    pub fn is_transpose_pattern_of(&self, other: &SparseAdj) -> bool {
        if self.shape() != (other.n_cols, other.n_rows) {
            return false;
        }
        let t = other.transpose();
        self.indptr == t.indptr && self.indices == t.indices
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for (i, j, w) in self.triplets() {
            m.set(i, j, w);
        }
        m
    }

    /// Reorders rows and columns: output row `row_perm[i]` is input row `i`,
    /// output column `col_perm[j]` is input column `j`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> SparseAdj {
        SparseAdj::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets()
                .map(|(i, j, w)| (row_perm[i], col_perm[j], w)),
        )
        .expect("permutation preserves validity")
    }
}
