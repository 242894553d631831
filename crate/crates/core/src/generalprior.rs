//! Grid posterior engine for non-Gaussian priors in up to three dimensions.
//!
//! The prior density is discretised on a cell-centred lattice and updated
//! node by node with the Gaussian response likelihood. Monte Carlo drivers
//! compare the resulting posterior uncertainty against the Gaussian prior
//! with matching first two moments.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::belief::{self, simulate_response, Query, Response};
use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize};
use crate::normal;
use crate::quantize::mean_and_se;
use crate::rng::substream;

/// Largest dimension the grid engine accepts.
pub const MAX_GRID_DIM: usize = 3;
pub const MIN_RESOLUTION: usize = 32;
/// Tolerated prior mass outside the grid bounds.
pub const MAX_TRUNCATION: f64 = 1e-4;
/// Half-width of default bounds, in prior standard deviations.
pub const DEFAULT_BOUND_SDS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// A prior distribution with a density and finite second moments.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    GaussianMixture { components: Vec<MixtureComponent> },
    UniformBox { lower: DVector<f64>, upper: DVector<f64> },
}

impl PriorSpec {
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::invalid("prior mean and covariance dimensions differ"));
        }
        linalg::check_spd(&cov)?;
        Ok(PriorSpec::Gaussian { mean, cov })
    }

    pub fn isotropic(d: usize, scale: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("prior dimension must be at least 1"));
        }
        Self::gaussian(DVector::zeros(d), DMatrix::identity(d, d) * scale)
    }

    pub fn mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("mixture needs a component"))?;
        let d = first.mean.len();
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &components {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::invalid("mixture weights must be positive"));
            }
            if c.mean.len() != d || c.cov.nrows() != d {
                return Err(Error::invalid("mixture components have mismatched dimensions"));
            }
            linalg::check_spd(&c.cov)?;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(PriorSpec::GaussianMixture { components })
    }

    pub fn uniform_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        if lower
            .iter()
            .zip(upper.iter())
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::invalid("box bounds must be finite with lower < upper"));
        }
        Ok(PriorSpec::UniformBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Gaussian { mean, .. } => mean.len(),
            PriorSpec::GaussianMixture { components } => components[0].mean.len(),
            PriorSpec::UniformBox { lower, .. } => lower.len(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            PriorSpec::Gaussian { mean, .. } => mean.clone(),
            PriorSpec::GaussianMixture { components } => components
                .iter()
                .fold(DVector::zeros(self.dim()), |acc, c| acc + &c.mean * c.weight),
            PriorSpec::UniformBox { lower, upper } => (lower + upper) * 0.5,
        }
    }

    pub fn cov(&self) -> DMatrix<f64> {
        match self {
            PriorSpec::Gaussian { cov, .. } => cov.clone(),
            PriorSpec::GaussianMixture { components } => {
                let mu = self.mean();
                let mut out = DMatrix::zeros(self.dim(), self.dim());
                for c in components {
                    let dm = &c.mean - &mu;
                    out += (&c.cov + &dm * dm.transpose()) * c.weight;
                }
                symmetrize(&mut out);
                out
            }
            PriorSpec::UniformBox { lower, upper } => {
                let w = upper - lower;
                DMatrix::from_diagonal(&w.map(|x| x * x / 12.0))
            }
        }
    }

    /// Draw one value from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        match self {
            PriorSpec::Gaussian { mean, cov } => Ok(mean + gaussian_draw(cov, rng)?),
            PriorSpec::GaussianMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let c = &components[pick];
                Ok(&c.mean + gaussian_draw(&c.cov, rng)?)
            }
            PriorSpec::UniformBox { lower, upper } => Ok(DVector::from_fn(lower.len(), |i, _| {
                rng.random_range(lower[i]..upper[i])
            })),
        }
    }

    /// Mean ± 6 standard deviations per axis; the box itself for a uniform prior.
    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        if let PriorSpec::UniformBox { lower, upper } = self {
            return lower.iter().zip(upper.iter()).map(|(&a, &b)| (a, b)).collect();
        }
        let mean = self.mean();
        let cov = self.cov();
        (0..self.dim())
            .map(|i| {
                let h = DEFAULT_BOUND_SDS * cov[(i, i)].sqrt();
                (mean[i] - h, mean[i] + h)
            })
            .collect()
    }

    /// Prior mass outside `bounds`. Exact for a uniform box; for Gaussian
    /// families the union bound over per-axis marginal tails.
    pub fn mass_outside(&self, bounds: &[(f64, f64)]) -> f64 {
        match self {
            PriorSpec::UniformBox { lower, upper } => {
                let inside: f64 = bounds
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| {
                        let overlap = (b.min(upper[i]) - a.max(lower[i])).max(0.0);
                        overlap / (upper[i] - lower[i])
                    })
                    .product();
                1.0 - inside
            }
            PriorSpec::Gaussian { mean, cov } => gaussian_tail(mean, cov, bounds),
            PriorSpec::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * gaussian_tail(&c.mean, &c.cov, bounds))
                .sum(),
        }
    }

    fn density_fn(&self) -> Result<DensityFn> {
        Ok(match self {
            PriorSpec::Gaussian { mean, cov } => {
                let g = GaussianDensity::new(mean, cov)?;
                Box::new(move |x| g.eval(x))
            }
            PriorSpec::GaussianMixture { components } => {
                let parts: Vec<(f64, GaussianDensity)> = components
                    .iter()
                    .map(|c| Ok((c.weight, GaussianDensity::new(&c.mean, &c.cov)?)))
                    .collect::<Result<_>>()?;
                Box::new(move |x| parts.iter().map(|(w, g)| w * g.eval(x)).sum())
            }
            PriorSpec::UniformBox { lower, upper } => {
                let (lower, upper) = (lower.clone(), upper.clone());
                Box::new(move |x| {
                    let inside = x.iter().enumerate().all(|(i, &v)| v >= lower[i] && v <= upper[i]);
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
        })
    }
}

type DensityFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn gaussian_tail(mean: &DVector<f64>, cov: &DMatrix<f64>, bounds: &[(f64, f64)]) -> f64 {
    bounds
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let sd = cov[(i, i)].sqrt();
            1.0 - normal::interval_mass((a - mean[i]) / sd, (b - mean[i]) / sd)
        })
        .sum::<f64>()
        .min(1.0)
}

fn gaussian_draw<R: Rng + ?Sized>(cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let l = linalg::cholesky(cov)?.l();
    let z = DVector::from_fn(cov.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(l * z)
}

/// Multivariate normal density with a cached inverse Cholesky factor.
struct GaussianDensity {
    mean: DVector<f64>,
    l_inv: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let chol = linalg::cholesky(cov)?;
        let l = chol.l();
        let d = mean.len() as f64;
        let log_det: f64 = l.diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let l_inv = l
            .try_inverse()
            .ok_or_else(|| Error::numerical("covariance factor is singular"))?;
        Ok(GaussianDensity {
            mean: mean.clone(),
            l_inv,
            log_norm: -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - &self.mean;
        let z = &self.l_inv * dx;
        (self.log_norm - 0.5 * z.norm_squared()).exp()
    }
}

/// One lattice axis: `n` cells of equal width on `[lo, hi]`, nodes at cell
/// centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

/// Discretised posterior over a lattice in `R^d`, `d ≤ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    axes: Vec<GridAxis>,
    /// Node coordinates, row-major `len × d`, last axis fastest.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Accumulated `σ⁻² Σ y yᵀ`.
    information: DMatrix<f64>,
}

impl GridPosterior {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[i * d..(i + 1) * d]
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.information
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(GridAxis::width).product()
    }

    /// Replace the weights (renormalised). Used for constructing test
    /// configurations.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::invalid("weight vector length does not match the grid"));
        }
        let mut out = self.clone();
        out.weights = weights;
        normalize(&mut out.weights)?;
        Ok(out)
    }
}

fn normalize(w: &mut [f64]) -> Result<()> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::numerical("grid weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::numerical("grid weights underflowed to zero"));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(())
}

/// Grid resolution and optional explicit bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl GridSpec {
    /// Default resolution per axis for dimension `d`.
    pub fn for_dim(d: usize) -> Self {
        let resolution = match d {
            1 => 1601,
            2 => 161,
            _ => 41,
        };
        GridSpec {
            resolution,
            bounds: None,
        }
    }
}

/// Discretise `prior` on a lattice over `bounds` with `resolution` cells
/// per axis.
pub fn grid_init(prior: &PriorSpec, bounds: &[(f64, f64)], resolution: usize) -> Result<GridPosterior> {
    let d = prior.dim();
    if d > MAX_GRID_DIM {
        return Err(Error::Unsupported(format!(
            "grid posterior supports d <= {MAX_GRID_DIM}, got {d}"
        )));
    }
    if bounds.len() != d {
        return Err(Error::invalid("one (lo, hi) pair per dimension is required"));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    if bounds.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
        return Err(Error::invalid("grid bounds must be finite with lo < hi"));
    }
    let outside = prior.mass_outside(bounds);
    if outside > MAX_TRUNCATION {
        return Err(Error::invalid(format!(
            "grid bounds truncate {outside:.2e} of the prior mass; widen the bounds"
        )));
    }

    let axes: Vec<GridAxis> = bounds
        .iter()
        .map(|&(lo, hi)| GridAxis { lo, hi, n: resolution })
        .collect();
    let total = resolution.pow(d as u32);
    let mut nodes = Vec::with_capacity(total * d);
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = [0.0; MAX_GRID_DIM];
        for ax in (0..d).rev() {
            coords[ax] = axes[ax].node(rem % resolution);
            rem /= resolution;
        }
        nodes.extend_from_slice(&coords[..d]);
    }

    let density = prior.density_fn()?;
    let mut weights: Vec<f64> = nodes.par_chunks(d).map(&density).collect();
    normalize(&mut weights)?;
    Ok(GridPosterior {
        axes,
        nodes,
        weights,
        information: DMatrix::zeros(d, d),
    })
}

/// [`grid_init`] with `spec`'s bounds, or the prior's default bounds.
pub fn grid_from_spec(prior: &PriorSpec, spec: &GridSpec) -> Result<GridPosterior> {
    let bounds = spec.bounds.clone().unwrap_or_else(|| prior.default_bounds());
    grid_init(prior, &bounds, spec.resolution)
}

/// Multiply in the likelihood of response `z` to query `q` and renormalise.
pub fn grid_update(post: &GridPosterior, q: &Query, z: Response, noise_var: f64) -> Result<GridPosterior> {
    let d = post.dim();
    if q.dim() != d {
        return Err(Error::invalid("query dimension does not match the grid"));
    }
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let y = q.direction().as_slice();
    let z = z.value();
    let inv_two_var = 0.5 / noise_var;
    let mut weights: Vec<f64> = post
        .nodes
        .par_chunks(d)
        .zip(post.weights.par_iter())
        .map(|(x, &w)| {
            let r = z - x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            w * (-r * r * inv_two_var).exp()
        })
        .collect();
    normalize(&mut weights)
        .map_err(|_| Error::numerical("likelihood underflow: response is far outside the grid support"))?;

    let mut information = post.information.clone();
    information.ger(1.0 / noise_var, q.direction(), q.direction(), 1.0);
    Ok(GridPosterior {
        axes: post.axes.clone(),
        nodes: post.nodes.clone(),
        weights,
        information,
    })
}

/// Posterior mean and covariance over the grid.
pub fn moments(post: &GridPosterior) -> (DVector<f64>, DMatrix<f64>) {
    let d = post.dim();
    let mut mean = DVector::zeros(d);
    for (i, &w) in post.weights.iter().enumerate() {
        for (a, &x) in post.node(i).iter().enumerate() {
            mean[a] += w * x;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (i, &w) in post.weights.iter().enumerate() {
        let x = post.node(i);
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += w * da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    (mean, cov)
}

/// Discretised total-variation distance between the grid posterior and
/// `N(θ̂, (σ⁻² S_m)⁻¹)`, with Gaussian cell masses from the midpoint rule.
/// Gaussian mass that falls outside the grid counts as disagreement.
pub fn tv_to_gaussian(post: &GridPosterior) -> Result<f64> {
    let d = post.dim();
    if d > 2 {
        return Err(Error::Unsupported("TV comparison supports d <= 2".into()));
    }
    let min_eig = nalgebra::SymmetricEigen::new(post.information.clone())
        .eigenvalues
        .min();
    if min_eig <= 0.0 {
        return Err(Error::numerical("accumulated information matrix is singular"));
    }
    let cov = linalg::spd_inverse(&post.information)?;
    let (mean, _) = moments(post);
    let g = GaussianDensity::new(&mean, &cov)?;
    let vol = post.cell_volume();
    let (abs_diff, gauss_mass) = post
        .weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let m = g.eval(post.node(i)) * vol;
            ((w - m).abs(), m)
        })
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok((0.5 * (abs_diff + (1.0 - gauss_mass).max(0.0))).clamp(0.0, 1.0))
}

/// Posterior summary of one simulated transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptOutcome {
    pub theta: DVector<f64>,
    pub posterior_mean: DVector<f64>,
    pub posterior_trace: f64,
}

/// Simulate `trials` customers from `prior`, answer the fixed `queries`,
/// and run the grid posterior for each.
pub fn simulate_transcripts<R: RngCore + ?Sized>(
    prior: &PriorSpec,
    queries: &[Query],
    noise_var: f64,
    trials: usize,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<Vec<TranscriptOutcome>> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let start = grid_from_spec(prior, grid)?;
    let seed = rng.next_u64();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = substream(seed, 0, t as u64);
            let theta = prior.sample(&mut r)?;
            let mut post = start.clone();
            for q in queries {
                let z = simulate_response(&theta, q, noise_var, &mut r)?;
                post = grid_update(&post, q, z, noise_var)?;
            }
            let (posterior_mean, cov) = moments(&post);
            Ok(TranscriptOutcome {
                theta,
                posterior_mean,
                posterior_trace: cov.trace(),
            })
        })
        .collect()
}

/// Expected posterior trace under `prior` versus the Gaussian benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservativeCheck {
    /// Monte Carlo `E[tr Σ_m(H_m)]`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `tr Σ_m^G` for the moment-matched Gaussian prior.
    pub rhs: f64,
}

pub fn conservative_check<R: RngCore + ?Sized>(
    prior: &PriorSpec,
    queries: &[Query],
    noise_var: f64,
    trials: usize,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<ConservativeCheck> {
    let rhs = belief::cov_from_information(&prior.cov(), queries, noise_var)?.trace();
    let outcomes = simulate_transcripts(prior, queries, noise_var, trials, grid, rng)?;
    let traces: Vec<f64> = outcomes.iter().map(|o| o.posterior_trace).collect();
    let (lhs, lhs_se) = mean_and_se(&traces);
    Ok(ConservativeCheck { lhs, lhs_se, rhs })
}

/// Value of solicitation under a general prior, two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VosEstimate {
    /// `½ tr Cov(θ̂_m)`, from the spread of posterior means.
    pub vos: f64,
    pub vos_se: f64,
    /// `½ (tr Σ₀ − E[tr Σ_m])`, from expected residual uncertainty.
    pub budget_form: f64,
    pub budget_se: f64,
    /// Gaussian-benchmark value `½ (tr Σ₀ − tr Σ_m^G)`.
    pub gaussian: f64,
}

pub fn vos_general<R: RngCore + ?Sized>(
    prior: &PriorSpec,
    queries: &[Query],
    noise_var: f64,
    trials: usize,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<VosEstimate> {
    let prior_cov = prior.cov();
    let prior_mean = prior.mean();
    let gaussian_post = belief::cov_from_information(&prior_cov, queries, noise_var)?;
    let outcomes = simulate_transcripts(prior, queries, noise_var, trials, grid, rng)?;

    let spread: Vec<f64> = outcomes
        .iter()
        .map(|o| 0.5 * (&o.posterior_mean - &prior_mean).norm_squared())
        .collect();
    let residual: Vec<f64> = outcomes
        .iter()
        .map(|o| 0.5 * (prior_cov.trace() - o.posterior_trace))
        .collect();
    let (vos, vos_se) = mean_and_se(&spread);
    let (budget_form, budget_se) = mean_and_se(&residual);
    Ok(VosEstimate {
        vos,
        vos_se,
        budget_form,
        budget_se,
        gaussian: 0.5 * (prior_cov.trace() - gaussian_post.trace()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn bimodal() -> PriorSpec {
        PriorSpec::mixture(vec![
            MixtureComponent {
                weight: 0.5,
                mean: v(&[-2.0]),
                cov: DMatrix::from_element(1, 1, 0.25),
            },
            MixtureComponent {
                weight: 0.5,
                mean: v(&[2.0]),
                cov: DMatrix::from_element(1, 1, 0.25),
            },
        ])
        .unwrap()
    }

    #[test]
    fn uniform_grid_moments() {
        let prior = PriorSpec::uniform_box(v(&[-1.0]), v(&[1.0])).unwrap();
        let g = grid_init(&prior, &prior.default_bounds(), 101).unwrap();
        let (mean, cov) = moments(&g);
        assert!(mean[0].abs() < 1e-12);
        assert!((cov[(0, 0)] / (1.0 / 3.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn normal_grid_moments() {
        let prior = PriorSpec::isotropic(1, 1.0).unwrap();
        let g = grid_init(&prior, &[(-6.0, 6.0)], 201).unwrap();
        let (_, cov) = moments(&g);
        assert!((cov[(0, 0)] - 1.0).abs() < 0.01);
    }

    #[test]
    fn mixture_grid_moments() {
        let prior = bimodal();
        assert!((prior.cov()[(0, 0)] - 4.25).abs() < 1e-14);
        let g = grid_from_spec(&prior, &GridSpec::for_dim(1)).unwrap();
        let (mean, cov) = moments(&g);
        assert!(mean[0].abs() < 1e-10);
        assert!((cov[(0, 0)] / 4.25 - 1.0).abs() < 0.01);
    }

    #[test]
    fn init_validation() {
        let prior = PriorSpec::isotropic(1, 1.0).unwrap();
        assert!(grid_init(&prior, &[(-2.0, 2.0)], 101).is_err());
        assert!(grid_init(&prior, &[(-6.0, 6.0)], 16).is_err());
        assert!(grid_init(&PriorSpec::isotropic(4, 1.0).unwrap(), &[(-6.0, 6.0); 4], 32).is_err());
    }

    #[test]
    fn flat_likelihood_keeps_uniform() {
        let prior = PriorSpec::uniform_box(v(&[-1.0]), v(&[1.0])).unwrap();
        let g = grid_init(&prior, &prior.default_bounds(), 101).unwrap();
        let post = grid_update(&g, &Query::basis(1, 0), Response::new(0.0).unwrap(), 1e4).unwrap();
        let max = post.weights().iter().cloned().fold(0.0, f64::max);
        let min = post.weights().iter().cloned().fold(1.0, f64::min);
        assert!(max / min < 1.1);
    }

    #[test]
    fn updates_commute() {
        let prior = PriorSpec::gaussian(v(&[0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let g = grid_from_spec(
            &prior,
            &GridSpec {
                resolution: 64,
                bounds: None,
            },
        )
        .unwrap();
        let q1 = Query::basis(2, 0);
        let q2 = Query::normalized(v(&[1.0, -2.0])).unwrap();
        let (z1, z2) = (Response::new(0.7).unwrap(), Response::new(-1.2).unwrap());
        let a = grid_update(&grid_update(&g, &q1, z1, 0.5).unwrap(), &q2, z2, 0.5).unwrap();
        let b = grid_update(&grid_update(&g, &q2, z2, 0.5).unwrap(), &q1, z1, 0.5).unwrap();
        let diff = a
            .weights()
            .iter()
            .zip(b.weights())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-12);
        let total: f64 = a.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_response_underflows() {
        let prior = PriorSpec::uniform_box(v(&[-1.0]), v(&[1.0])).unwrap();
        let g = grid_init(&prior, &prior.default_bounds(), 64).unwrap();
        let err = grid_update(&g, &Query::basis(1, 0), Response::new(1e3).unwrap(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn moments_edge_cases() {
        let prior = PriorSpec::isotropic(2, 1.0).unwrap();
        let g = grid_from_spec(
            &prior,
            &GridSpec {
                resolution: 40,
                bounds: None,
            },
        )
        .unwrap();
        let mut w = vec![0.0; g.len()];
        w[777] = 1.0;
        let point = g.with_weights(w).unwrap();
        let (mean, cov) = moments(&point);
        assert_eq!(mean.as_slice(), point.node(777));
        assert!(cov.amax() == 0.0);
        let (mean, _) = moments(&g);
        assert!(mean.amax() < 1e-12);
    }

    #[test]
    fn tv_requires_information() {
        let prior = PriorSpec::isotropic(1, 1.0).unwrap();
        let g = grid_from_spec(&prior, &GridSpec::for_dim(1)).unwrap();
        assert!(matches!(tv_to_gaussian(&g), Err(Error::Numerical(_))));
    }

    #[test]
    fn tv_disjoint_supports() {
        let prior = PriorSpec::uniform_box(v(&[-10.0]), v(&[10.0])).unwrap();
        let g = grid_init(&prior, &prior.default_bounds(), 200).unwrap();
        let mut w = vec![0.0; g.len()];
        w[0] = 0.5;
        w[199] = 0.5;
        let mut post = g.with_weights(w).unwrap();
        post.information = DMatrix::from_element(1, 1, 1e6);
        let tv = tv_to_gaussian(&post).unwrap();
        assert!((tv - 1.0).abs() < 1e-6, "{tv}");
    }

    #[test]
    fn tv_small_for_gaussian_posterior() {
        // A flat prior wide enough that the posterior is Gaussian with
        // precision m / σ², exactly the comparison law.
        let prior = PriorSpec::uniform_box(v(&[-6.0]), v(&[6.0])).unwrap();
        let mut tvs = Vec::new();
        for res in [64, 256, 1024] {
            let mut post = grid_init(&prior, &prior.default_bounds(), res).unwrap();
            for _ in 0..20 {
                post = grid_update(&post, &Query::basis(1, 0), Response::new(0.3).unwrap(), 1.0).unwrap();
            }
            tvs.push(tv_to_gaussian(&post).unwrap());
        }
        // Both sides are evaluated at the same nodes, so only rounding remains.
        assert!(tvs.iter().all(|&t| t < 1e-9), "{tvs:?}");
    }

    #[test]
    fn tv_shrinks_as_prior_washes_out() {
        let prior = PriorSpec::isotropic(1, 1.0).unwrap();
        let mut post = grid_init(&prior, &[(-6.0, 6.0)], 2001).unwrap();
        let mut tvs = Vec::new();
        for m in 1..=40 {
            post = grid_update(&post, &Query::basis(1, 0), Response::new(0.5).unwrap(), 1.0).unwrap();
            if [3, 10, 40].contains(&m) {
                tvs.push(tv_to_gaussian(&post).unwrap());
            }
        }
        assert!(tvs[2] < tvs[1] && tvs[1] < tvs[0], "{tvs:?}");
    }

    #[test]
    fn conservative_no_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = bimodal();
        let c = conservative_check(&prior, &[], 1.0, 20, &GridSpec::for_dim(1), &mut rng).unwrap();
        assert!((c.rhs - 4.25).abs() < 1e-12);
        assert!((c.lhs - 4.25).abs() < 0.01 * 4.25);
        let v = vos_general(&prior, &[], 1.0, 20, &GridSpec::for_dim(1), &mut rng).unwrap();
        assert!(v.vos.abs() < 1e-20);
        assert!(v.budget_form.abs() < 0.01);
    }
}
