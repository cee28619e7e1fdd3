//! B-spline reduction of the shape: meanline and thickness profiles are each
//! a linear combination of `n_B` clamped B-spline basis functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A B-spline basis on `[0, 1]` defined by its degree and knot vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::Contract(format!(
                "degree {degree} needs at least {} knots, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Contract("knot vector must be finite and non-decreasing".into()));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(Error::Contract("knot vector must span [0, 1]".into()));
        }
        Ok(Self { degree, knots })
    }

    /// Clamped basis with `n_basis` functions and uniformly spaced interior knots.
    pub fn clamped_uniform(n_basis: usize, degree: usize) -> Result<Self> {
        if n_basis < degree + 1 {
            return Err(Error::Contract(format!(
                "a degree-{degree} basis needs at least {} functions, got {n_basis}",
                degree + 1
            )));
        }
        let n_interior = n_basis - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..=n_interior).map(|i| i as f64 / (n_interior + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Greville abscissae; interpolating a linear function at these points
    /// gives its exact B-spline coefficients.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.knots[j + 1..=j + self.degree].iter().sum::<f64>() / self.degree.max(1) as f64)
            .collect()
    }

    fn span(&self, z: f64) -> usize {
        let n = self.len();
        if z >= self.knots[n] {
            // z == 1: last non-empty span
            let mut s = n - 1;
            while self.knots[s] == self.knots[s + 1] {
                s -= 1;
            }
            return s;
        }
        // knots[span] <= z < knots[span + 1]
        self.knots.partition_point(|&k| k <= z) - 1
    }

    /// Values of all basis functions at `z` via the Cox-de Boor recursion.
    pub fn eval(&self, z: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!("basis argument {z} outside [0, 1]")));
        }
        let p = self.degree;
        let span = self.span(z);
        let mut local = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        local[0] = 1.0;
        for j in 1..=p {
            left[j] = z - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { local[r] / denom };
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        let mut values = vec![0.0; self.len()];
        for (r, v) in local.into_iter().enumerate() {
            values[span - p + r] = v;
        }
        Ok(values)
    }

    /// Evaluates `sum_j coeffs[j] * basis_j(z)`.
    pub fn combine(&self, coeffs: &[f64], z: f64) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Contract(format!(
                "expected {} coefficients, got {}",
                self.len(),
                coeffs.len()
            )));
        }
        Ok(self.eval(z)?.iter().zip(coeffs).map(|(b, c)| b * c).sum())
    }
}

/// Meanline and thickness B-spline coefficients of a shape.
///
/// The mask covers `q_ml` followed by `q_th`; `true` marks an optimization
/// variable. Pinned coefficients are carried along unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub q_ml: Vec<f64>,
    pub q_th: Vec<f64>,
    pub free_mask: Vec<bool>,
}

impl ShapeParams {
    pub fn new(q_ml: Vec<f64>, q_th: Vec<f64>, free_mask: Vec<bool>) -> Result<Self> {
        if q_ml.len() != q_th.len() || free_mask.len() != 2 * q_ml.len() {
            return Err(Error::Contract(format!(
                "coefficient lengths ml={}, th={}, mask={} are inconsistent",
                q_ml.len(),
                q_th.len(),
                free_mask.len()
            )));
        }
        let params = Self { q_ml, q_th, free_mask };
        params.check_thickness()?;
        Ok(params)
    }

    /// Pins the first and last coefficient of each family (the boundary heights).
    pub fn with_pinned_ends(q_ml: Vec<f64>, q_th: Vec<f64>) -> Result<Self> {
        let n = q_ml.len();
        let family = |i: usize| i != 0 && i + 1 != n;
        let free_mask = (0..n).map(family).chain((0..n).map(family)).collect();
        Self::new(q_ml, q_th, free_mask)
    }

    pub fn n_basis(&self) -> usize {
        self.q_ml.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_mask.iter().filter(|&&f| f).count()
    }

    fn check_thickness(&self) -> Result<()> {
        match self.q_th.iter().position(|&t| !(t > 0.0)) {
            Some(index) => Err(Error::DegenerateShape { index, value: self.q_th[index] }),
            None => Ok(()),
        }
    }

    fn all(&self) -> impl Iterator<Item = &f64> {
        self.q_ml.iter().chain(&self.q_th)
    }

    /// Free coefficients, meanline first.
    pub fn to_flat(&self) -> Vec<f64> {
        self.all()
            .zip(&self.free_mask)
            .filter_map(|(&v, &free)| free.then_some(v))
            .collect()
    }

    /// Replaces the free coefficients by `flat`, keeping pinned ones.
    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_free() {
            return Err(Error::Contract(format!(
                "expected {} free coefficients, got {}",
                self.n_free(),
                flat.len()
            )));
        }
        let n = self.n_basis();
        let mut out = self.clone();
        let mut values = flat.iter();
        for (slot, &free) in self.free_mask.iter().enumerate() {
            if free {
                let v = *values.next().expect("length checked");
                if slot < n {
                    out.q_ml[slot] = v;
                } else {
                    out.q_th[slot - n] = v;
                }
            }
        }
        out.check_thickness()?;
        Ok(out)
    }

    /// Slot indices (into `q_ml ++ q_th`) of the free coefficients.
    pub fn free_slots(&self) -> Vec<usize> {
        self.free_mask.iter().enumerate().filter_map(|(i, &f)| f.then_some(i)).collect()
    }
}
