//! Probabilists' Hermite polynomials and their design rows.
//!
//! `h_0 = 1`, `h_1 = x`, `h_{k+1} = x h_k - k h_{k-1}`. Two-dimensional
//! rows are products `h_k(z1) h_q(z2)` over `k + q <= K`, enumerated
//! lexicographically in `(k, q)`. That order is part of the table format.

use crate::error::{Error, Result};

/// Largest polynomial order accepted by [`hermite_eval`].
pub const MAX_ORDER: usize = 20;

/// `h_k(x)` by the three-term recurrence.
pub fn hermite_eval(k: usize, x: f64) -> Result<f64> {
    if k > MAX_ORDER {
        return Err(Error::Domain(format!(
            "Hermite order {k} exceeds the cap of {MAX_ORDER}"
        )));
    }
    let mut buf = [0.0; MAX_ORDER + 1];
    hermite_all(x, &mut buf[..=k]);
    Ok(buf[k])
}

/// Writes `h_0(x), ..., h_{len-1}(x)` into `out`.
#[inline]
pub fn hermite_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisDim {
    One,
    Two,
}

/// Basis with total-degree cap `K` in one or two variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HermiteBasis {
    degree: usize,
    dim: BasisDim,
}

impl HermiteBasis {
    pub fn new(degree: usize, dim: BasisDim) -> Result<Self> {
        if degree > MAX_ORDER {
            return Err(Error::Domain(format!(
                "basis degree {degree} exceeds the cap of {MAX_ORDER}"
            )));
        }
        Ok(Self { degree, dim })
    }

    /// One-dimensional basis for AR(1), two-dimensional for AR(2).
    pub fn for_order(order: usize, degree: usize) -> Result<Self> {
        match order {
            1 => Self::new(degree, BasisDim::One),
            2 => Self::new(degree, BasisDim::Two),
            other => Err(Error::Order(other)),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> BasisDim {
        self.dim
    }

    pub fn inputs(&self) -> usize {
        match self.dim {
            BasisDim::One => 1,
            BasisDim::Two => 2,
        }
    }

    /// `K + 1` terms in 1-D, `(K + 1)(K + 2) / 2` in 2-D.
    pub fn len(&self) -> usize {
        let k = self.degree;
        match self.dim {
            BasisDim::One => k + 1,
            BasisDim::Two => (k + 1) * (k + 2) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Enumeration identifier written into table files.
    pub fn id(&self) -> &'static str {
        match self.dim {
            BasisDim::One => "hermite-prob-1d",
            BasisDim::Two => "hermite-prob-2d-lex-total",
        }
    }

    /// `(k, q)` exponent pairs in row order (`q = 0` throughout in 1-D).
    pub fn terms(&self) -> Vec<(usize, usize)> {
        match self.dim {
            BasisDim::One => (0..=self.degree).map(|k| (k, 0)).collect(),
            BasisDim::Two => (0..=self.degree)
                .flat_map(|k| (0..=self.degree - k).map(move |q| (k, q)))
                .collect(),
        }
    }

    /// Fills `out` (length [`len`](Self::len)) with the design row at `z`
    /// (length [`inputs`](Self::inputs)).
    #[inline]
    pub fn row_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        match self.dim {
            BasisDim::One => hermite_all(z[0], out),
            BasisDim::Two => {
                let mut h1 = [0.0; MAX_ORDER + 1];
                let mut h2 = [0.0; MAX_ORDER + 1];
                hermite_all(z[0], &mut h1[..=self.degree]);
                hermite_all(z[1], &mut h2[..=self.degree]);
                let mut i = 0;
                for k in 0..=self.degree {
                    for q in 0..=self.degree - k {
                        out[i] = h1[k] * h2[q];
                        i += 1;
                    }
                }
            }
        }
    }

    pub fn row(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.row_into(z, &mut out);
        out
    }

    /// Derivative of `sum_i coef_i row_i` with respect to `z[axis]`.
    pub fn gradient_of(&self, coef: &[f64], z: &[f64], axis: usize) -> f64 {
        // h_k' = k h_{k-1}
        let mut h = [[0.0; MAX_ORDER + 1]; 2];
        for (d, hz) in h.iter_mut().enumerate().take(self.inputs()) {
            hermite_all(z[d], &mut hz[..=self.degree]);
        }
        let dh = |d: usize, k: usize| if k == 0 { 0.0 } else { k as f64 * h[d][k - 1] };
        self.terms()
            .iter()
            .zip(coef)
            .map(|(&(k, q), c)| match (self.dim, axis) {
                (BasisDim::One, _) => c * dh(0, k),
                (BasisDim::Two, 0) => c * dh(0, k) * h[1][q],
                (BasisDim::Two, _) => c * h[0][k] * dh(1, q),
            })
            .sum()
    }
}

pub fn design_row_1d(basis: &HermiteBasis, z: f64) -> Vec<f64> {
    basis.row(&[z])
}

pub fn design_row_2d(basis: &HermiteBasis, z1: f64, z2: f64) -> Vec<f64> {
    basis.row(&[z1, z2])
}
