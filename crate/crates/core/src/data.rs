use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Responses `y` and an `n × q` covariate matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    q: usize,
}

impl Dataset {
    /// Builds a dataset from responses and covariate rows.
    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: rows.len(),
            });
        }
        let q = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(y.len() * q);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != q {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} covariates, expected {q}",
                    r.len()
                )));
            }
            x.extend_from_slice(r);
        }
        Self::from_row_major(y, x, q)
    }

    pub fn from_row_major(y: Vec<f64>, x: Vec<f64>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidData("at least one covariate is required".into()));
        }
        if y.is_empty() {
            return Err(Error::InvalidData("dataset has no observations".into()));
        }
        if x.len() != y.len() * q {
            return Err(Error::DimensionMismatch {
                expected: y.len() * q,
                got: x.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite response at row {i}")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                k / q,
                k % q
            )));
        }
        Ok(Dataset { y, x, q })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of coefficients, intercept included.
    pub fn p(&self) -> usize {
        self.q + 1
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_row_major(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.q)
    }

    /// Fitted value `β₁ + β₂ᵀ xᵢ`.
    pub fn fitted(&self, i: usize, beta: &DVector<f64>) -> f64 {
        beta[0]
            + self
                .row(i)
                .iter()
                .zip(beta.iter().skip(1))
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Residuals `yᵢ - β₁ - β₂ᵀ xᵢ`.
    pub fn residuals(&self, beta: &DVector<f64>) -> Vec<f64> {
        (0..self.n()).map(|i| self.y[i] - self.fitted(i, beta)).collect()
    }

    /// Accumulates `Σ cᵢ x̃ᵢ x̃ᵢᵀ` with `x̃ᵢ = (1, xᵢ)`, in data order.
    pub(crate) fn weighted_moment(&self, coef: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let p = self.p();
        let mut m = DMatrix::<f64>::zeros(p, p);
        let mut xt = vec![0.0; p];
        xt[0] = 1.0;
        for i in 0..self.n() {
            let c = coef(i);
            if c == 0.0 {
                continue;
            }
            xt[1..].copy_from_slice(self.row(i));
            for a in 0..p {
                let ca = c * xt[a];
                for b in a..p {
                    m[(a, b)] += ca * xt[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        m
    }

    /// Accumulates `Σ cᵢ x̃ᵢ`, in data order.
    pub(crate) fn weighted_sum(&self, coef: impl Fn(usize) -> f64) -> DVector<f64> {
        let mut v = DVector::<f64>::zeros(self.p());
        for i in 0..self.n() {
            let c = coef(i);
            v[0] += c;
            for (k, xv) in self.row(i).iter().enumerate() {
                v[k + 1] += c * xv;
            }
        }
        v
    }
}
