//! Minimal dense/sparse matrix storage for the factorization.

use std::io::{self, BufRead, Write};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Text format: a `rows cols` header line, then one row per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|x| format!("{x:.10e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad header")))
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(bad("header must be `rows cols`"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for line in lines.take(rows) {
            for t in line?.split_whitespace() {
                data.push(t.parse().map_err(|_| bad("bad entry"))?);
            }
        }
        if data.len() != rows * cols {
            return Err(bad("entry count does not match header"));
        }
        Ok(Self { rows, cols, data })
    }
}

/// Sparse matrix kept in both CSR and CSC order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    row_ptr: Vec<usize>,
    row_entries: Vec<(u32, f64)>,
    col_ptr: Vec<usize>,
    col_entries: Vec<(u32, f64)>,
}

impl SparseMatrix {
    /// Duplicate coordinates are summed. Explicit zeros are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        t.sort_unstable_by_key(|x| (x.0, x.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            assert!(
                i < rows && j < cols,
                "entry ({i}, {j}) outside {rows}x{cols}"
            );
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_ptr = vec![0usize; cols + 1];
        for &(i, j, _) in &merged {
            row_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_entries = merged.iter().map(|&(_, j, v)| (j as u32, v)).collect();
        let mut fill = col_ptr.clone();
        let mut col_entries = vec![(0u32, 0.0); merged.len()];
        for &(i, j, v) in &merged {
            col_entries[fill[j]] = (i as u32, v);
            fill[j] += 1;
        }
        Self {
            rows,
            cols,
            row_ptr,
            row_entries,
            col_ptr,
            col_entries,
        }
    }

    /// Stores every entry, zeros included.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_triplets(
            m.rows,
            m.cols,
            (0..m.rows).flat_map(|i| (0..m.cols).map(move |j| (i, j, m.get(i, j)))),
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for &(j, v) in self.row(i) {
                d.data[i * self.cols + j as usize] = v;
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.row_entries.len()
    }

    /// Every entry is stored explicitly.
    pub fn is_complete(&self) -> bool {
        self.nnz() == self.rows * self.cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.row_entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn col(&self, j: usize) -> &[(u32, f64)] {
        &self.col_entries[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row(i);
        r.binary_search_by_key(&(j as u32), |e| e.0)
            .map_or(0.0, |k| r[k].1)
    }

    pub fn min_value(&self) -> f64 {
        self.row_entries
            .iter()
            .map(|e| e.1)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.row_entries.iter().map(|e| e.1).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.row_entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for i in 0..self.rows {
            for &(j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v:.10e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_transpose_views() {
        let m = SparseMatrix::from_triplets(2, 3, [(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.col(1), &[(0, 2.0)]);
        assert!(!m.is_complete());
        let d = m.to_dense();
        assert_eq!(d.data, vec![0.0, 2.0, 0.0, 0.0, 0.0, 1.5]);
        assert!(SparseMatrix::from_dense(&d).is_complete());
    }

    #[test]
    fn dense_text_round_trip() {
        let d = DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.25);
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        assert!(buf.starts_with(b"2 3\n"));
        assert_eq!(DenseMatrix::read_text(buf.as_slice()).unwrap(), d);
    }
}
