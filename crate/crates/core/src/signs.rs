//! Dense `n × (d−1)` matrices of ±1 entries, shared by parameter patterns
//! and joint actions.

use std::fmt;

use crate::error::{Error, Result};

/// Row-major matrix of signs; row = agent, column = feature component.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl SignMatrix {
    /// Every entry set to `sign`.
    pub fn filled(rows: usize, cols: usize, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1, "sign must be ±1");
        Self {
            rows,
            cols,
            data: vec![sign; rows * cols],
        }
    }

    /// Validates a nested integer array (one inner array per agent).
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::MalformedSigns(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            for (p, &v) in row.iter().enumerate() {
                match v {
                    1 => data.push(1),
                    -1 => data.push(-1),
                    other => {
                        return Err(Error::MalformedSigns(format!(
                            "entry [{i}][{p}] = {other}, expected ±1"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// The `index`-th pattern in lexicographic order with `−1 < +1`: the
    /// first entry (agent 0, component 0) is the most significant bit.
    pub fn from_index(rows: usize, cols: usize, index: u64) -> Self {
        let m = rows * cols;
        debug_assert!(m <= 64);
        let data = (0..m)
            .map(|q| {
                if (index >> (m - 1 - q)) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Self { rows, cols, data }
    }

    /// Inverse of [`SignMatrix::from_index`].
    pub fn to_index(&self) -> u64 {
        self.data
            .iter()
            .fold(0u64, |acc, &s| (acc << 1) | u64::from(s > 0))
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

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, sign: i8) {
        assert!(sign == 1 || sign == -1, "sign must be ±1");
        self.data[row * self.cols + col] = sign;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[i8] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.data
    }

    /// Negates column `col` in every row.
    pub fn negate_column(&mut self, col: usize) {
        for r in 0..self.rows {
            let k = r * self.cols + col;
            self.data[k] = -self.data[k];
        }
    }

    /// Elementwise negation.
    pub fn negated(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|s| -s).collect(),
        }
    }

    /// Number of entries of `row` that differ from `other`'s.
    #[inline]
    pub fn row_mismatches(&self, other: &SignMatrix, row: usize) -> usize {
        self.row(row)
            .iter()
            .zip(other.row(row))
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|&s| i64::from(s)).collect())
            .collect()
    }
}

impl fmt::Debug for SignMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SignMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for (p, s) in self.row(r).iter().enumerate() {
                if p > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", if *s > 0 { "+1" } else { "-1" })?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order_is_lexicographic() {
        let a = SignMatrix::from_index(1, 2, 0);
        let b = SignMatrix::from_index(1, 2, 1);
        let c = SignMatrix::from_index(1, 2, 2);
        assert_eq!(a.to_rows(), vec![vec![-1, -1]]);
        assert_eq!(b.to_rows(), vec![vec![-1, 1]]);
        assert_eq!(c.to_rows(), vec![vec![1, -1]]);
    }

    #[test]
    fn index_round_trip() {
        for idx in 0..64 {
            assert_eq!(SignMatrix::from_index(2, 3, idx).to_index(), idx);
        }
    }

    #[test]
    fn rejects_zero_and_ragged() {
        assert!(SignMatrix::from_rows(&[vec![1, 0]], 2).is_err());
        assert!(SignMatrix::from_rows(&[vec![1], vec![1, -1]], 1).is_err());
        assert!(SignMatrix::from_rows(&[vec![1, -1]], 2).is_ok());
    }
}
