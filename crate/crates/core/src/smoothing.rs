//! Nadaraya-Watson machinery shared by the weight estimators and the
//! bandwidth selector.
//!
//! Every smoother here acts on an [`Embedding`]: the covariates mapped into
//! the space where distances are measured. Raw covariates give the fully
//! nonparametric smoother, `Â xᵢ` gives the projected semiparametric one and
//! the scalar index `β₂ᵀxᵢ` gives the single-index one. Because `Â` is
//! linear, `Â(xᵢ - x) = Âxᵢ - Âx`, so all three reduce to Euclidean kernel
//! sums over embedded points.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    dim: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn raw(data: &Dataset) -> Self {
        Embedding {
            dim: data.q(),
            coords: data.x_row_major().to_vec(),
        }
    }

    /// Points `a · xᵢ` for a `q × q` matrix `a`.
    pub fn linear(data: &Dataset, a: &DMatrix<f64>) -> Result<Self> {
        let q = data.q();
        if a.nrows() != q || a.ncols() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: a.nrows(),
            });
        }
        let mut coords = Vec::with_capacity(data.n() * q);
        for row in data.rows() {
            for r in 0..q {
                coords.push((0..q).map(|c| a[(r, c)] * row[c]).sum());
            }
        }
        Ok(Embedding { dim: q, coords })
    }

    /// Scalar index `β₂ᵀ xᵢ`.
    pub fn index(data: &Dataset, beta2: &DVector<f64>) -> Result<Self> {
        if beta2.len() != data.q() {
            return Err(Error::DimensionMismatch {
                expected: data.q(),
                got: beta2.len(),
            });
        }
        let coords = data
            .rows()
            .map(|row| row.iter().zip(beta2.iter()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Embedding { dim: 1, coords })
    }

    pub fn from_points(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        Embedding { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    /// Square root of the summed per-coordinate variances.
    pub fn spread(&self) -> f64 {
        let n = self.len() as f64;
        let mut total = 0.0;
        for k in 0..self.dim {
            let mean = (0..self.len()).map(|i| self.point(i)[k]).sum::<f64>() / n;
            let var = (0..self.len())
                .map(|i| {
                    let d = self.point(i)[k] - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            total += var;
        }
        total.sqrt()
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For every point `j`, `Σᵢ aᵢ K_h(zᵢ - zⱼ)` and `Σᵢ bᵢ K_h(zᵢ - zⱼ)`, with
/// or without the `i = j` term. Pairs are visited in a fixed order so the
/// result is bit-reproducible.
pub fn kernel_sums(
    emb: &Embedding,
    kernel: &Kernel,
    h: f64,
    a: &[f64],
    b: &[f64],
    include_self: bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = emb.len();
    let scale = kernel.bandwidth_scale(h);
    let inv_h2 = 1.0 / (h * h);
    let mut sa = vec![0.0; n];
    let mut sb = vec![0.0; n];
    if include_self {
        let k0 = kernel.eval_sq_norm(0.0) * scale;
        for j in 0..n {
            sa[j] = a[j] * k0;
            sb[j] = b[j] * k0;
        }
    }
    for j in 0..n {
        let pj = emb.point(j);
        for i in (j + 1)..n {
            let r2 = sq_dist(emb.point(i), pj) * inv_h2;
            if r2 >= 1.0 {
                continue;
            }
            let k = kernel.eval_sq_norm(r2) * scale;
            sa[j] += a[i] * k;
            sb[j] += b[i] * k;
            sa[i] += a[j] * k;
            sb[i] += b[j] * k;
        }
    }
    (sa, sb)
}

/// Ratio `N(zⱼ)/D(zⱼ)` of kernel smooths of `num` and `den` at every sample
/// point, self-term included. Both sums are floored at `1e-8` times their
/// largest value so the ratio stays finite and positive.
pub fn nw_ratio_at_samples(
    emb: &Embedding,
    kernel: &Kernel,
    h: f64,
    num: &[f64],
    den: &[f64],
) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    if kernel.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: kernel.dim(),
        });
    }
    let (mut n_hat, mut d_hat) = kernel_sums(emb, kernel, h, num, den, true);
    floor_relative(&mut d_hat, h)?;
    floor_relative(&mut n_hat, h)?;
    Ok(n_hat.iter().zip(&d_hat).map(|(n, d)| n / d).collect())
}

pub(crate) const RELATIVE_FLOOR: f64 = 1e-8;

fn floor_relative(v: &mut [f64], h: f64) -> Result<()> {
    let max = v.iter().cloned().fold(0.0f64, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::BandwidthTooSmall { h });
    }
    let floor = RELATIVE_FLOOR * max;
    for x in v.iter_mut() {
        if *x < floor {
            *x = floor;
        }
    }
    Ok(())
}

/// Unfloored `N(z)/D(z)` at an arbitrary point; `None` when `D(z) = 0`.
pub fn nw_ratio_at(
    emb: &Embedding,
    kernel: &Kernel,
    h: f64,
    num: &[f64],
    den: &[f64],
    z: &[f64],
) -> Option<f64> {
    let inv_h2 = 1.0 / (h * h);
    let (mut sn, mut sd) = (0.0, 0.0);
    for i in 0..emb.len() {
        let k = kernel.eval_sq_norm(sq_dist(emb.point(i), z) * inv_h2);
        sn += num[i] * k;
        sd += den[i] * k;
    }
    (sd > 0.0).then(|| sn / sd)
}
