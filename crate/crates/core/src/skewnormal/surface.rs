//! Hermite-regression surfaces for skew-normal parameters and the AR(2)
//! logit-scale correlation, as functions of the true coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::ar::{logit_unchecked, PartialAutocorrelations};
use crate::error::{Error, Result};
use crate::hermite::HermiteBasis;

use super::SkewNormalParams;

/// Predicted correlations are clamped into `[-RHO_LIMIT, RHO_LIMIT]`.
pub const RHO_LIMIT: f64 = 0.999;

const LOG_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceParam {
    Mu1,
    Sigma1,
    Xi1,
    Mu2,
    Sigma2,
    Xi2,
    Rho,
}

impl SurfaceParam {
    pub fn for_order(order: usize) -> &'static [SurfaceParam] {
        use SurfaceParam::*;
        if order == 1 {
            &[Mu1, Sigma1, Xi1]
        } else {
            &[Mu1, Sigma1, Xi1, Mu2, Sigma2, Xi2, Rho]
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            SurfaceParam::Mu1 => "mu_1",
            SurfaceParam::Sigma1 => "sigma_1",
            SurfaceParam::Xi1 => "xi_1",
            SurfaceParam::Mu2 => "mu_2",
            SurfaceParam::Sigma2 => "sigma_2",
            SurfaceParam::Xi2 => "xi_2",
            SurfaceParam::Rho => "rho",
        }
    }

    /// Scale and shape are regressed on the log scale.
    pub fn is_log_scale(self) -> bool {
        matches!(
            self,
            SurfaceParam::Sigma1 | SurfaceParam::Xi1 | SurfaceParam::Sigma2 | SurfaceParam::Xi2
        )
    }

    fn response(self, fit: &CellFit) -> f64 {
        let m = |i: usize| &fit.marginals[i];
        match self {
            SurfaceParam::Mu1 => m(0).mu,
            SurfaceParam::Sigma1 => m(0).sigma.ln(),
            SurfaceParam::Xi1 => m(0).xi.ln(),
            SurfaceParam::Mu2 => m(1).mu,
            SurfaceParam::Sigma2 => m(1).sigma.ln(),
            SurfaceParam::Xi2 => m(1).xi.ln(),
            SurfaceParam::Rho => fit.rho.unwrap_or(0.0),
        }
    }
}

impl fmt::Display for SurfaceParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SurfaceParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use SurfaceParam::*;
        [Mu1, Sigma1, Xi1, Mu2, Sigma2, Xi2, Rho]
            .into_iter()
            .find(|p| p.code() == s)
            .ok_or_else(|| Error::Domain(format!("unknown surface parameter '{s}'")))
    }
}

/// Per-cell skew-normal fits (one per coefficient) and, for AR(2), the
/// sample correlation of the logit-scale estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFit {
    pub marginals: Vec<SkewNormalParams>,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceModel {
    pub param: SurfaceParam,
    pub coef: Vec<f64>,
}

impl SurfaceModel {
    /// Raw linear predictor at a design row.
    fn linear(&self, row: &[f64]) -> f64 {
        self.coef.iter().zip(row).map(|(b, h)| b * h).sum()
    }

    /// Back-transformed prediction: exponentiated for scale/shape, clamped
    /// for the correlation.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let eta = self.linear(row);
        if self.param.is_log_scale() {
            eta.clamp(-LOG_LIMIT, LOG_LIMIT).exp()
        } else if self.param == SurfaceParam::Rho {
            eta.clamp(-RHO_LIMIT, RHO_LIMIT)
        } else {
            eta
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePrediction {
    pub marginals: Vec<SkewNormalParams>,
    pub rho: Option<f64>,
}

/// All surfaces for one `(order, method, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSet {
    pub basis: HermiteBasis,
    pub surfaces: Vec<SurfaceModel>,
}

impl SurfaceSet {
    pub fn order(&self) -> usize {
        self.basis.inputs()
    }

    pub fn get(&self, param: SurfaceParam) -> Option<&SurfaceModel> {
        self.surfaces.iter().find(|s| s.param == param)
    }

    /// Evaluates every surface at `g(psi)`.
    pub fn predict(&self, psi: &PartialAutocorrelations) -> Result<SurfacePrediction> {
        if psi.order() != self.order() {
            return Err(Error::Mismatch(format!(
                "order-{} coefficients given to order-{} surfaces",
                psi.order(),
                self.order()
            )));
        }
        let z: Vec<f64> = psi.psi().iter().map(|&v| logit_unchecked(v)).collect();
        let row = self.basis.row(&z);
        let value = |p: SurfaceParam| -> Result<f64> {
            self.get(p)
                .map(|s| s.predict_row(&row))
                .ok_or_else(|| Error::Mismatch(format!("missing surface {p}")))
        };
        use SurfaceParam::*;
        let mut marginals = vec![SkewNormalParams::new(value(Mu1)?, value(Sigma1)?, value(Xi1)?)?];
        let mut rho = None;
        if self.order() == 2 {
            marginals.push(SkewNormalParams::new(value(Mu2)?, value(Sigma2)?, value(Xi2)?)?);
            rho = Some(value(Rho)?);
        }
        Ok(SurfacePrediction { marginals, rho })
    }
}

/// Ordinary least squares with a rank check.
pub(crate) fn ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<Vec<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::RankDeficient { rows, cols });
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::RankDeficient { rows, cols });
    }
    let coef = svd
        .solve(response, 0.0)
        .map_err(|_| Error::RankDeficient { rows, cols })?;
    Ok(coef.iter().copied().collect())
}

/// One OLS Hermite regression per parameter, over design rows at the
/// logit-scale true coefficients `inputs[r]` (first `order` entries used).
pub fn fit_parameter_surfaces(
    order: usize,
    inputs: &[[f64; 2]],
    fits: &[CellFit],
    degree: usize,
) -> Result<SurfaceSet> {
    if inputs.len() != fits.len() {
        return Err(Error::Config(format!(
            "{} inputs but {} cell fits",
            inputs.len(),
            fits.len()
        )));
    }
    if let Some(bad) = fits.iter().find(|f| f.marginals.len() != order) {
        return Err(Error::Mismatch(format!(
            "cell fit has {} marginals for order {order}",
            bad.marginals.len()
        )));
    }
    let basis = HermiteBasis::for_order(order, degree)?;
    let design = DMatrix::from_fn(inputs.len(), basis.len(), |r, c| {
        basis.row(&inputs[r][..order])[c]
    });
    let surfaces = SurfaceParam::for_order(order)
        .iter()
        .map(|&param| {
            let y = DVector::from_iterator(fits.len(), fits.iter().map(|f| param.response(f)));
            Ok(SurfaceModel {
                param,
                coef: ols(&design, &y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceSet { basis, surfaces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sn(mu: f64, sigma: f64, xi: f64) -> SkewNormalParams {
        SkewNormalParams::new(mu, sigma, xi).unwrap()
    }

    fn grid_1d() -> Vec<[f64; 2]> {
        (0..39)
            .map(|i| [logit_unchecked(-0.95 + 0.05 * i as f64), 0.0])
            .collect()
    }

    #[test]
    fn constant_responses_give_constant_surfaces() {
        let inputs = grid_1d();
        let fits: Vec<CellFit> = inputs
            .iter()
            .map(|_| CellFit {
                marginals: vec![sn(0.4, 0.3, 1.2)],
                rho: None,
            })
            .collect();
        let set = fit_parameter_surfaces(1, &inputs, &fits, 3).unwrap();
        let mu = set.get(SurfaceParam::Mu1).unwrap();
        assert_abs_diff_eq!(mu.coef[0], 0.4, epsilon = 1e-10);
        for c in &mu.coef[1..] {
            assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-10);
        }
        let sigma = set.get(SurfaceParam::Sigma1).unwrap();
        assert_abs_diff_eq!(sigma.coef[0], 0.3f64.ln(), epsilon = 1e-10);
        for psi in [-0.99, 0.0, 0.7] {
            let pred = set.predict(&PartialAutocorrelations::new(&[psi]).unwrap()).unwrap();
            assert_abs_diff_eq!(pred.marginals[0].mu, 0.4, epsilon = 1e-9);
            assert_abs_diff_eq!(pred.marginals[0].sigma, 0.3, epsilon = 1e-9);
            assert_abs_diff_eq!(pred.marginals[0].xi, 1.2, epsilon = 1e-9);
            assert!(pred.rho.is_none());
        }
    }

    #[test]
    fn rank_deficient_design() {
        let inputs = vec![[0.0, 0.0]; 10];
        let fits = vec![
            CellFit {
                marginals: vec![sn(0.0, 1.0, 1.0)],
                rho: None
            };
            10
        ];
        assert!(matches!(
            fit_parameter_surfaces(1, &inputs, &fits, 3),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn ar2_surfaces_positive_and_clamped() {
        let mut inputs = Vec::new();
        let mut fits = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let a = -0.9 + 0.2 * i as f64;
                let b = -0.9 + 0.2 * j as f64;
                inputs.push([logit_unchecked(a), logit_unchecked(b)]);
                fits.push(CellFit {
                    marginals: vec![sn(a, 0.2 + 0.1 * b * b, 1.0 + 0.3 * a), sn(b, 0.3, 1.0)],
                    rho: Some(0.99 * a),
                });
            }
        }
        let set = fit_parameter_surfaces(2, &inputs, &fits, 3).unwrap();
        assert_eq!(set.surfaces.len(), 7);
        assert!(set.surfaces.iter().all(|s| s.coef.len() == 10));
        for k in 0..1000 {
            let a = -0.999 + 1.998 * ((k * 37 % 1000) as f64 / 999.0);
            let b = -0.999 + 1.998 * ((k * 91 % 1000) as f64 / 999.0);
            let pred = set.predict(&PartialAutocorrelations::new(&[a, b]).unwrap()).unwrap();
            for m in &pred.marginals {
                assert!(m.sigma > 0.0 && m.xi > 0.0);
            }
            let rho = pred.rho.unwrap();
            assert!(rho.abs() <= RHO_LIMIT);
        }
        assert!(set.predict(&PartialAutocorrelations::new(&[0.1]).unwrap()).is_err());
    }
}
