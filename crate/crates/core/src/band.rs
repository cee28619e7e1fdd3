//! Symmetric band matrices and their Cholesky factorization.
//!
//! Structured shape meshes numbered column by column have a degree-of-freedom
//! bandwidth of `2 * n_y + 3`, so a band solver is a sparse direct solver here.

use crate::error::{Error, Result};

/// Square matrix storing only the entries with `|i - j| <= half_band`.
///
/// Both triangles are stored so that symmetry is an actual property of the
/// assembled data rather than of the layout.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    half_band: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, half_band: usize) -> Self {
        Self { n, half_band, data: vec![0.0; n * (2 * half_band + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_band(&self) -> usize {
        self.half_band
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let w = self.half_band;
        (i < self.n && j < self.n && i.abs_diff(j) <= w).then(|| i * (2 * w + 1) + (j + w - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.half_band));
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if let Some(s) = self.slot(i, j) {
            self.data[s] = v;
        }
    }

    fn band_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.half_band)..(i + self.half_band + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.band_cols(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.band_cols(i).map(move |j| (i, j)))
            .map(|(i, j)| (self.get(i, j) - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `L Lᵀ` factorization using the lower triangle.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, w) = (self.n, self.half_band);
        // lower[i][k] holds L(i, i - w + k)
        let mut lower = vec![0.0; n * (w + 1)];
        let at = |i: usize, j: usize| i * (w + 1) + (j + w - i);
        let (mut min_pivot, mut max_pivot) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let jlo = j.saturating_sub(w).max(lo);
                let mut sum = self.get(i, j);
                for k in jlo..j {
                    sum -= lower[at(i, k)] * lower[at(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Numerical(format!(
                            "Cholesky pivot {i} is {sum:e}; pivots so far in [{min_pivot:e}, {max_pivot:e}] \
                             (matrix not positive definite or severely ill-conditioned)"
                        )));
                    }
                    let d = sum.sqrt();
                    min_pivot = min_pivot.min(sum);
                    max_pivot = max_pivot.max(sum);
                    lower[at(i, i)] = d;
                } else {
                    lower[at(i, j)] = sum / lower[at(j, j)];
                }
            }
        }
        Ok(BandCholesky { n, w, lower, pivot_ratio: max_pivot / min_pivot })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    w: usize,
    lower: Vec<f64>,
    pivot_ratio: f64,
}

impl BandCholesky {
    fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[i * (self.w + 1) + (j + self.w - i)]
    }

    /// Ratio of largest to smallest squared pivot; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let (n, w) = (self.n, self.w);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(w)..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= self.l(k, i) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        y
    }
}
