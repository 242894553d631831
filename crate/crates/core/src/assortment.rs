//! Optimal assortments for a Gaussian posterior and the customer's
//! nearest-product choice rule.
//!
//! `k = 1` and `k = 2` have closed forms. Larger assortments are built from
//! a Lloyd-Max product quantizer, optionally refined by sample-based Lloyd
//! iteration; these are approximations, as no closed form exists.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::belief::GaussianBelief;
use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::quantize::{self, Assortment};

/// Two products placed symmetrically about the posterior mean along the
/// direction of greatest posterior variance.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgingPair {
    pub center: DVector<f64>,
    /// Leading eigenvector of the posterior covariance, sign-canonicalized.
    pub direction: DVector<f64>,
    /// Distance of each product from the center, `√(2λ₁/π)`.
    pub spread: f64,
    /// Utility gain over the single best product, `λ₁/π`.
    pub gain: f64,
}

impl HedgingPair {
    pub fn points(&self) -> [DVector<f64>; 2] {
        let offset = &self.direction * self.spread;
        [&self.center - &offset, &self.center + &offset]
    }

    pub fn assortment(&self) -> Assortment {
        Assortment::new(self.points().to_vec()).expect("pair points are finite")
    }
}

/// The customer's pick from an assortment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub index: usize,
    /// Squared distance from the ideal point to the chosen product.
    pub loss: f64,
}

/// The best single recommendation: the posterior mean.
pub fn best_single(belief: &GaussianBelief) -> DVector<f64> {
    belief.mean().clone()
}

/// Expected loss `E[½‖x − θ‖²]` of recommending `x`: bias plus variance.
pub fn single_expected_loss(belief: &GaussianBelief, x: &DVector<f64>) -> f64 {
    0.5 * (x - belief.mean()).norm_squared() + 0.5 * belief.trace()
}

pub fn best_pair(belief: &GaussianBelief) -> HedgingPair {
    let eig = SymEigen::new(belief.cov());
    let lambda1 = eig.values[0];
    HedgingPair {
        center: belief.mean().clone(),
        direction: eig.vector(0),
        spread: (2.0 * lambda1 / PI).sqrt(),
        gain: lambda1 / PI,
    }
}

/// Closed-form two-point distortion `tr Σ − (2/π) λ₁`.
pub fn d2_closed_form(cov: &DMatrix<f64>) -> f64 {
    let eig = SymEigen::new(cov);
    cov.trace() - 2.0 / PI * eig.values[0]
}

/// Expected squared loss of the symmetric pair `{±c·v}` under `N(0, cov)`:
/// the hedging residual `E[(c − |η|)²]` plus the unhedged variance.
pub fn symmetric_pair_loss(cov: &DMatrix<f64>, v: &DVector<f64>, c: f64) -> f64 {
    let v = v / v.norm();
    let tau2 = v.dot(&(cov * &v));
    let tau = tau2.sqrt();
    let residual = c * c - 2.0 * c * tau * (2.0 / PI).sqrt() + tau2;
    residual + cov.trace() - tau2
}

/// How assortments of size three or more are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssortmentMethod {
    /// Closed forms only; sizes above two are rejected.
    ClosedForm,
    /// Lloyd-Max product quantizer in the posterior eigenbasis.
    ProductQuantizer,
    /// Product quantizer refined by sample-based Lloyd iteration.
    LloydRefined { n_samples: usize },
}

/// A `k`-point assortment for `N(0, cov)`, centred at the origin.
pub fn centered_assortment<R: Rng + ?Sized>(
    cov: &DMatrix<f64>,
    k: usize,
    method: AssortmentMethod,
    rng: &mut R,
) -> Result<Assortment> {
    let d = cov.nrows();
    match k {
        0 => Err(Error::invalid("assortment size must be at least 1")),
        1 => Assortment::new(vec![DVector::zeros(d)]),
        2 => {
            let belief = GaussianBelief::new(DVector::zeros(d), cov.clone(), 1.0)?;
            Ok(best_pair(&belief).assortment())
        }
        _ => match method {
            AssortmentMethod::ClosedForm => Err(Error::Unsupported(format!(
                "no closed-form assortment for k = {k}; use a quantizer method"
            ))),
            AssortmentMethod::ProductQuantizer => quantize::product_quantizer(cov, k),
            AssortmentMethod::LloydRefined { n_samples } => {
                let init = quantize::product_quantizer(cov, k)?;
                Ok(quantize::lloyd_kd(cov, k, &init, n_samples, rng)?.assortment)
            }
        },
    }
}

/// Best `k`-product assortment for `belief`.
///
/// Exact for `k ≤ 2`; for `k ≥ 3` a Lloyd-refined product quantizer using
/// `n_samples` posterior draws.
pub fn best_k<R: Rng + ?Sized>(belief: &GaussianBelief, k: usize, n_samples: usize, rng: &mut R) -> Result<Assortment> {
    let method = AssortmentMethod::LloydRefined { n_samples };
    Ok(centered_assortment(belief.cov(), k, method, rng)?.translated(belief.mean()))
}

/// Nearest product to `theta`; ties go to the lowest index.
pub fn customer_choice(theta: &DVector<f64>, s: &Assortment) -> Result<Choice> {
    if theta.len() != s.dim() {
        return Err(Error::invalid("ideal point and assortment dimensions differ"));
    }
    let (index, loss) = s.nearest(theta);
    Ok(Choice { index, loss })
}

/// Value of unlimited breadth over a single product, `½ tr Σ`.
pub fn hedging_gap(cov: &DMatrix<f64>) -> f64 {
    0.5 * cov.trace()
}
