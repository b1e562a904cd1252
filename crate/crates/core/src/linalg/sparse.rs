//! Compressed sparse row storage.

use crate::error::{Error, Result};

/// Marker for an entry dropped by a row or column restriction.
pub const DROPPED: usize = usize::MAX;

/// CSR matrix with sorted, unique column indices in each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let coords: Vec<(usize, usize)> = triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        let (mut m, pos) = Self::pattern(nrows, ncols, &coords);
        for (&(_, _, v), &p) in triplets.iter().zip(&pos) {
            m.values[p] += v;
        }
        m
    }

    /// Zero matrix with the union sparsity pattern of `coords`, and for each
    /// coordinate the index of its slot in the value array.
    pub fn pattern(nrows: usize, ncols: usize, coords: &[(usize, usize)]) -> (Self, Vec<usize>) {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j) in coords {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) outside {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; coords.len()];
        let mut fill = counts.clone();
        for &(i, j) in coords {
            cols[fill[i]] = j;
            fill[i] += 1;
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(coords.len());
        for i in 0..nrows {
            let row = &mut cols[counts[i]..counts[i + 1]];
            row.sort_unstable();
            let mut last = None;
            for &j in row.iter() {
                if last != Some(j) {
                    col_idx.push(j);
                    last = Some(j);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        let nnz = col_idx.len();
        let m = SparseMatrix { nrows, ncols, row_ptr, col_idx, values: vec![0.0; nnz] };
        let pos = coords.iter().map(|&(i, j)| m.position(i, j).expect("entry in pattern")).collect();
        (m, pos)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(rows.len(), ncols, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `|A| |x|` entrywise; bounds the rounding error of `A x` row by row.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| (self.values[k] * x[self.col_idx[k]]).abs()).sum())
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (j, i, v)));
        }
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `alpha·self + beta·other` on the union pattern.
    pub fn add(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension { expected: self.nrows * self.ncols, got: other.nrows * other.ncols });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.nrows {
                let (cols, vals) = m.row(i);
                triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, s * v)));
            }
        }
        Ok(Self::from_triplets(self.nrows, self.ncols, &triplets))
    }

    /// Submatrix on the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![DROPPED; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            let (cs, vs) = self.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                if col_map[j] != DROPPED {
                    triplets.push((new_i, col_map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }
}

/// A block placed at `(row, col)` of a larger matrix with a scale factor.
pub struct Block<'a> {
    pub row: usize,
    pub col: usize,
    pub matrix: &'a SparseMatrix,
    pub scale: f64,
}

impl<'a> Block<'a> {
    pub fn new(row: usize, col: usize, matrix: &'a SparseMatrix, scale: f64) -> Self {
        Block { row, col, matrix, scale }
    }
}

/// Assembled block matrix that remembers where each block's entries went,
/// so values can be refreshed without rebuilding the pattern.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    matrix: SparseMatrix,
    slots: Vec<Vec<usize>>,
}

impl BlockMatrix {
    pub fn new(nrows: usize, ncols: usize, blocks: &[Block<'_>]) -> Self {
        let mut coords = Vec::with_capacity(blocks.iter().map(|b| b.matrix.nnz()).sum());
        for b in blocks {
            for i in 0..b.matrix.nrows() {
                let (cols, _) = b.matrix.row(i);
                coords.extend(cols.iter().map(|&j| (b.row + i, b.col + j)));
            }
        }
        let (matrix, pos) = SparseMatrix::pattern(nrows, ncols, &coords);
        let mut slots = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for b in blocks {
            slots.push(pos[offset..offset + b.matrix.nnz()].to_vec());
            offset += b.matrix.nnz();
        }
        let mut bm = BlockMatrix { matrix, slots };
        bm.refill(blocks);
        bm
    }

    /// Overwrites all values from blocks with the same patterns and order
    /// as at construction.
    pub fn refill(&mut self, blocks: &[Block<'_>]) {
        assert_eq!(blocks.len(), self.slots.len());
        self.matrix.values.iter_mut().for_each(|v| *v = 0.0);
        for (b, slots) in blocks.iter().zip(&self.slots) {
            assert_eq!(b.matrix.nnz(), slots.len(), "block pattern changed");
            for (&s, &v) in slots.iter().zip(b.matrix.values()) {
                self.matrix.values[s] += b.scale * v;
            }
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}
