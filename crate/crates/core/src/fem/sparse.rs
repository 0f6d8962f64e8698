//! Compressed sparse row storage with deterministic triplet assembly.

use std::io::{BufRead, Write};

/// Triplet accumulator. Duplicates are summed in insertion order when compressed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols, "({row}, {col}) outside {}x{}", self.nrows, self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * m` with its top-left corner at `(row0, col0)`.
    pub fn push_block(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for r in 0..m.nrows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                self.push(row0 + r, col0 + m.col_idx[k], scale * m.values[k]);
            }
        }
    }

    /// Adds `scale * m^T` with its top-left corner at `(row0, col0)`.
    pub fn push_block_transposed(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        for r in 0..m.nrows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                self.push(row0 + m.col_idx[k], col0 + r, scale * m.values[k]);
            }
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable sort keeps insertion order among duplicates, so sums are reproducible.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::with_capacity(n, n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
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

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "vector length does not match matrix columns");
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// `y^T A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        assert_eq!(x.len(), self.ncols);
        let mut total = 0.0;
        for (r, &yr) in y.iter().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            total += yr * s;
        }
        total
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        b.push_block_transposed(0, 0, self, 1.0);
        b.build()
    }

    /// `alpha * self + beta * other`; the result pattern is the union of both patterns.
    pub fn add(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        b.push_block(0, 0, self, alpha);
        b.push_block(0, 0, other, beta);
        b.build()
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// Block diagonal matrix with `copies` copies of `self`.
    pub fn block_diagonal(&self, copies: usize) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.nrows * copies, self.ncols * copies, self.nnz() * copies);
        for c in 0..copies {
            b.push_block(c * self.nrows, c * self.ncols, self, 1.0);
        }
        b.build()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let diff = self.add(1.0, &t, -1.0);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 { 0.0 } else { worst / scale }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] += v;
        }
        d
    }

    /// Writes the coordinate text format: a `# rows cols nnz` header, then `row col value` lines.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_coo<R: BufRead>(reader: R) -> std::io::Result<CsrMatrix> {
        let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty matrix file".into()))??;
        let dims: Vec<usize> = header
            .trim_start_matches('#')
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad(format!("bad header `{header}`"))))
            .collect::<Result<_, _>>()?;
        if dims.len() != 3 {
            return Err(bad(format!("bad header `{header}`")));
        }
        let mut b = TripletBuilder::with_capacity(dims[0], dims[1], dims[2]);
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 3 {
                return Err(bad(format!("bad entry `{line}`")));
            }
            let r: usize = f[0].parse().map_err(|_| bad(format!("bad row in `{line}`")))?;
            let c: usize = f[1].parse().map_err(|_| bad(format!("bad column in `{line}`")))?;
            let v: f64 = f[2].parse().map_err(|_| bad(format!("bad value in `{line}`")))?;
            if r >= dims[0] || c >= dims[1] {
                return Err(bad(format!("entry ({r}, {c}) outside {}x{}", dims[0], dims[1])));
            }
            b.push(r, c, v);
        }
        Ok(b.build())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
