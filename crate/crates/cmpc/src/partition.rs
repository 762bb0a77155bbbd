//! Dense matrices over the field, block splitting of the inputs and
//! reassembly of the product `Y = A^T B`.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::PrimeModulus;

/// Row-major dense matrix of canonical field values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn random<R: Rng + ?Sized>(field: &PrimeModulus, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        Matrix { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.cols.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Reduces every entry modulo p (for externally supplied matrices).
    pub fn reduced(mut self, field: &PrimeModulus) -> Self {
        for v in self.data.iter_mut() {
            *v = field.reduce(*v);
        }
        self
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn mul(&self, field: &PrimeModulus, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let mut acc = vec![0u128; other.cols];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0);
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (x, &b) in acc.iter_mut().zip(brow) {
                    *x += (a * b) as u128;
                }
            }
            for (c, x) in acc.iter().enumerate() {
                out.data[r * other.cols + c] = field.reduce_wide(*x);
            }
        }
        Ok(out)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, field: &PrimeModulus, other: &Matrix, c: u64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch("add_scaled".into()));
        }
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = field.add(*x, field.mul(c, y));
        }
        Ok(())
    }

    pub fn add(&self, field: &PrimeModulus, other: &Matrix) -> Result<Matrix> {
        let mut out = self.clone();
        out.add_scaled(field, other, 1)?;
        Ok(out)
    }

    pub fn scale(&self, field: &PrimeModulus, c: u64) -> Matrix {
        let data = self.data.iter().map(|&v| field.mul(v, c)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, h: usize, w: usize) -> Matrix {
        let mut out = Matrix::zeros(h, w);
        for r in 0..h {
            let src = (r0 + r) * self.cols + c0;
            out.data[r * w..(r + 1) * w].copy_from_slice(&self.data[src..src + w]);
        }
        out
    }
}

/// Parses rows of integers separated by commas and/or whitespace. Blank
/// lines and lines starting with `#` are skipped.
pub fn read_matrix<R: BufRead>(reader: R) -> Result<Matrix> {
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<u64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(rows)
}

pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    for row in m.to_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub m: usize,
    pub s: usize,
    pub t: usize,
}

impl PartitionSpec {
    pub fn new(m: usize, s: usize, t: usize) -> Result<Self> {
        if s == 0 || t == 0 || m == 0 {
            return Err(Error::InvalidParameters("m, s and t must be positive".into()));
        }
        for by in [s, t] {
            if m % by != 0 {
                return Err(Error::IndivisibleDimension { m, by });
            }
        }
        Ok(PartitionSpec { m, s, t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Blocks `A_{i,j}` of `A^T`, `i < t`, `j < s`, each `(m/t) x (m/s)`.
    ATransposed,
    /// Blocks `B_{k,l}`, `k < s`, `l < t`, each `(m/s) x (m/t)`.
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMatrix {
    grid_rows: usize,
    grid_cols: usize,
    blocks: Vec<Matrix>,
}

impl BlockMatrix {
    pub fn grid(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn block(&self, r: usize, c: usize) -> &Matrix {
        &self.blocks[r * self.grid_cols + c]
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks[0].shape()
    }
}

pub fn split(m: &Matrix, spec: PartitionSpec, role: Role) -> Result<BlockMatrix> {
    if m.shape() != (spec.m, spec.m) {
        return Err(Error::ShapeMismatch(format!(
            "expected {0}x{0}, got {1}x{2}",
            spec.m,
            m.rows(),
            m.cols()
        )));
    }
    let (src, gr, gc) = match role {
        Role::ATransposed => (m.transpose(), spec.t, spec.s),
        Role::B => (m.clone(), spec.s, spec.t),
    };
    let (h, w) = (spec.m / gr, spec.m / gc);
    let mut blocks = Vec::with_capacity(gr * gc);
    for r in 0..gr {
        for c in 0..gc {
            blocks.push(src.submatrix(r * h, c * w, h, w));
        }
    }
    Ok(BlockMatrix { grid_rows: gr, grid_cols: gc, blocks })
}

/// Places block `(i, l)` of a `t x t` grid at row-block `i`, column-block `l`.
pub fn assemble_product(grid: &[Vec<Matrix>]) -> Result<Matrix> {
    let t = grid.len();
    if t == 0 || grid.iter().any(|row| row.len() != t) {
        return Err(Error::ShapeMismatch("product grid must be t x t".into()));
    }
    let shape = grid[0][0].shape();
    if grid.iter().flatten().any(|b| b.shape() != shape) {
        return Err(Error::ShapeMismatch("product blocks differ in shape".into()));
    }
    let (h, w) = shape;
    let mut out = Matrix::zeros(t * h, t * w);
    for (i, row) in grid.iter().enumerate() {
        for (l, b) in row.iter().enumerate() {
            for r in 0..h {
                for c in 0..w {
                    out.set(i * h + r, l * w + c, b.get(r, c));
                }
            }
        }
    }
    Ok(out)
}
