//! Gaussian belief over the customer's ideal point and its exact update
//! under noisy directional queries.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize};

/// Unit-norm tolerance for query directions.
pub const UNIT_TOL: f64 = 1e-12;

/// A unit-norm query direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Query(DVector<f64>);

impl Query {
    /// Wrap `direction`, which must already have unit norm.
    pub fn new(direction: DVector<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("query direction has norm {norm}, expected 1")));
        }
        Ok(Query(direction))
    }

    /// Normalise `v` onto the unit sphere. Zero vectors are rejected.
    pub fn normalized(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("query direction must be nonzero and finite"));
        }
        Ok(Query(v / norm))
    }

    /// The `i`th standard basis vector of `R^d`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        Query(v)
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A scalar response `z = θᵀy + ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response(f64);

impl Response {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("response must be finite"));
        }
        Ok(Response(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    noise_var: f64,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("belief dimension must be at least 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::invalid(format!(
                "covariance is {}x{}, mean has length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("mean has non-finite entries"));
        }
        check_noise_var(noise_var)?;
        linalg::check_spd(&cov)?;
        Ok(GaussianBelief { mean, cov, noise_var })
    }

    /// `N(0, scale·I_d)`.
    pub fn isotropic(d: usize, scale: f64, noise_var: f64) -> Result<Self> {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d) * scale, noise_var)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    /// Full positive-definiteness check via Cholesky.
    pub fn validate(&self) -> Result<()> {
        linalg::check_spd(&self.cov)
    }

    /// Kalman gain `Σy / (σ² + yᵀΣy)` for query `q`.
    pub fn kalman_gain(&self, q: &Query) -> Result<DVector<f64>> {
        self.check_query(q)?;
        let sy = &self.cov * q.direction();
        let denom = self.noise_var + q.direction().dot(&sy);
        Ok(sy / denom)
    }

    /// Exact posterior after observing `z` in direction `q`.
    pub fn kalman_update(&self, q: &Query, z: Response) -> Result<Self> {
        let y = q.direction();
        let gain = self.kalman_gain(q)?;
        let innovation = z.value() - y.dot(&self.mean);
        let mean = &self.mean + &gain * innovation;
        let cov = update_cov(&self.cov, y, &gain)?;
        Ok(GaussianBelief {
            mean,
            cov,
            noise_var: self.noise_var,
        })
    }

    /// Posterior covariance after `q`; independent of the response.
    pub fn updated_cov(&self, q: &Query) -> Result<DMatrix<f64>> {
        let gain = self.kalman_gain(q)?;
        update_cov(&self.cov, q.direction(), &gain)
    }

    /// Same belief with a different mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::invalid("mean dimension mismatch"));
        }
        Ok(GaussianBelief {
            mean,
            cov: self.cov.clone(),
            noise_var: self.noise_var,
        })
    }

    fn check_query(&self, q: &Query) -> Result<()> {
        if q.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "query has dimension {}, belief has {}",
                q.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn update_cov(cov: &DMatrix<f64>, y: &DVector<f64>, gain: &DVector<f64>) -> Result<DMatrix<f64>> {
    // Σ − κ (Σy)ᵀ, with Σy recomputed from the same product used for κ.
    let sy = cov * y;
    let mut out = cov - gain * sy.transpose();
    symmetrize(&mut out);
    if out.diagonal().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::numerical("posterior covariance lost positive definiteness"));
    }
    Ok(out)
}

fn check_noise_var(noise_var: f64) -> Result<()> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(())
}

/// Information-form posterior covariance `(Σ₀⁻¹ + σ⁻² Σ y yᵀ)⁻¹`.
pub fn cov_from_information(prior_cov: &DMatrix<f64>, queries: &[Query], noise_var: f64) -> Result<DMatrix<f64>> {
    check_noise_var(noise_var)?;
    let d = prior_cov.nrows();
    let mut precision = linalg::spd_inverse(prior_cov)?;
    precision += information_matrix(d, queries)? / noise_var;
    symmetrize(&mut precision);
    linalg::spd_inverse(&precision)
}

/// `Σ y yᵀ` over the queries.
pub fn information_matrix(d: usize, queries: &[Query]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(d, d);
    for q in queries {
        if q.dim() != d {
            return Err(Error::invalid("query dimension mismatch"));
        }
        m.ger(1.0, q.direction(), q.direction(), 1.0);
    }
    Ok(m)
}

/// Draw `θᵀy + ε` with `ε ~ N(0, noise_var)`.
///
/// `noise_var = 0` is accepted here (noiseless responses) and nowhere else.
pub fn simulate_response<R: Rng + ?Sized>(
    theta: &DVector<f64>,
    q: &Query,
    noise_var: f64,
    rng: &mut R,
) -> Result<Response> {
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be nonnegative, got {noise_var}"
        )));
    }
    if theta.len() != q.dim() {
        return Err(Error::invalid("theta and query dimensions differ"));
    }
    let eps: f64 = rng.sample(StandardNormal);
    Response::new(theta.dot(q.direction()) + noise_var.sqrt() * eps)
}
