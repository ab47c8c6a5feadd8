use serde::{Deserialize, Serialize};

/// Dense row-major square matrix, sized by the number of sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Writes the matrix as CSV, one row per line, with a header naming the
    /// columns `c1..cn` (1-based, matching sector labels).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.n).map(|j| format!("c{j}")).collect();
        s.push_str("row,");
        s.push_str(&header.join(","));
        s.push('\n');
        for i in 0..self.n {
            s.push_str(&format!("{}", i + 1));
            for j in 0..self.n {
                s.push_str(&format!(",{:.12e}", self.get(i, j)));
            }
            s.push('\n');
        }
        s
    }
}
