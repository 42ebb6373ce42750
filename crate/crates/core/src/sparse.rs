//! Sparse matrix wrapper used for every assembled operator, plus Matrix
//! Market coordinate I/O.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{Error, Real, Result};

pub const MATRIX_MARKET_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// CSR matrix with a flag recording whether symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledMatrix<T: Real> {
    csr: CsrMatrix<T>,
    symmetric: bool,
}

impl<T: Real> AssembledMatrix<T> {
    /// Sums duplicate triplets and drops exact zeros.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
        symmetric: bool,
    ) -> Self {
        let mut coo = CooMatrix::new(nrows, ncols);
        for &(i, j, v) in triplets {
            coo.push(i, j, v);
        }
        Self::from_csr(CsrMatrix::from(&coo), symmetric)
    }

    pub fn from_csr(csr: CsrMatrix<T>, symmetric: bool) -> Self {
        let csr = csr.filter(|_, _, v| *v != T::zero());
        Self { csr, symmetric }
    }

    pub fn from_dense(m: &DMatrix<T>, symmetric: bool) -> Self {
        let mut trips = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != T::zero() {
                    trips.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trips, symmetric)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            csr: CsrMatrix::zeros(nrows, ncols),
            symmetric: nrows == ncols,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            csr: CsrMatrix::identity(n),
            symmetric: true,
        }
    }

    pub fn csr(&self) -> &CsrMatrix<T> {
        &self.csr
    }

    pub fn nrows(&self) -> usize {
        self.csr.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.csr.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let row = self.csr.row(i);
        match row.col_indices().binary_search(&j) {
            Ok(k) => row.values()[k],
            Err(_) => T::zero(),
        }
    }

    /// Nonzero entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.csr.row_offsets()[i]..self.csr.row_offsets()[i + 1];
        self.csr.col_indices()[range.clone()]
            .iter()
            .copied()
            .zip(self.csr.values()[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.csr.triplet_iter().map(|(i, j, v)| (i, j, *v))
    }

    pub fn mul_vec(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.ncols(), "dimension mismatch in mul_vec");
        DVector::from_fn(self.nrows(), |i, _| {
            self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j])
        })
    }

    pub fn transpose(&self) -> Self {
        Self {
            csr: self.csr.transpose(),
            symmetric: self.symmetric,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_csr(&self.csr + &other.csr, self.symmetric && other.symmetric)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_csr(&self.csr - &other.csr, self.symmetric && other.symmetric)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_csr(&self.csr * s, self.symmetric)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::from_csr(&self.csr * &other.csr, false)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.csr
            .values()
            .iter()
            .fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// `max |A - A^T|` over all entries.
    pub fn symmetry_defect(&self) -> T {
        self.sub(&self.transpose()).max_abs()
    }

    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MATRIX_MARKET_HEADER}")?;
        writeln!(out, "{} {} {}", self.nrows(), self.ncols(), self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Matrix Market input".into()))??;
        if header.trim() != MATRIX_MARKET_HEADER {
            return Err(Error::Parse(format!("unsupported header `{header}`")));
        }
        let mut size: Option<(usize, usize, usize)> = None;
        let mut trips = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("malformed line `{t}`")));
            }
            let bad = |_| Error::Parse(format!("malformed line `{t}`"));
            match size {
                None => {
                    size = Some((
                        fields[0].parse().map_err(bad)?,
                        fields[1].parse().map_err(bad)?,
                        fields[2].parse().map_err(bad)?,
                    ))
                }
                Some((nr, nc, _)) => {
                    let i: usize = fields[0].parse().map_err(bad)?;
                    let j: usize = fields[1].parse().map_err(bad)?;
                    let v: f64 = fields[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad value in `{t}`")))?;
                    if i == 0 || j == 0 || i > nr || j > nc {
                        return Err(Error::Parse(format!("index out of range in `{t}`")));
                    }
                    trips.push((i - 1, j - 1, crate::lit::<T>(v)));
                }
            }
        }
        let (nr, nc, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
        if trips.len() != nnz {
            return Err(Error::Parse(format!(
                "expected {nnz} entries, found {}",
                trips.len()
            )));
        }
        Ok(Self::from_triplets(nr, nc, &trips, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_market_round_trip() {
        let a = AssembledMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.5), (2, 1, -1.0 / 3.0), (1, 0, 2.0), (1, 0, 1.0)],
            false,
        );
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 2 3\n1 1 "));
        let b = AssembledMatrix::<f64>::read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a.to_dense(), b.to_dense());
        assert_eq!(b.get(1, 0), 3.0);
    }

    #[test]
    fn zeros_are_dropped() {
        let a = AssembledMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, -1.0), (1, 1, 2.0)], true);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.mul_vec(&DVector::from_vec(vec![1.0, 3.0]))[1], 6.0);
    }
}
