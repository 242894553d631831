//! Seeded Monte Carlo comparison of solicitation depth and assortment
//! breadth.
//!
//! A sweep point `(m, k)` asks `m` water-filling queries, updates the
//! Gaussian belief, offers `k` products around the posterior mean and
//! records the distance from the customer's ideal point to the product
//! they pick. Every trial draws from its own substream of the master seed,
//! so results do not depend on the number of worker threads.

mod config;
mod output;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::assortment::{centered_assortment, customer_choice, AssortmentMethod};
use crate::belief::{simulate_response, GaussianBelief, Query};
use crate::error::{Error, Result};
use crate::generalprior::PriorSpec;
use crate::quantize::{mean_and_se, Assortment};
use crate::rng::substream;
use crate::solicitation::{realize_queries, waterfill};

pub use config::{load_config, parse_config, ScenarioConfig};
pub use output::{emit_csv, emit_svg, read_csv, write_csv, CSV_HEADER};

pub const DEFAULT_TRIALS: usize = 50_000;
pub const DEFAULT_SEED: u64 = 20_250_601;
/// Trial index reserved for the per-point assortment stream.
const ASSORTMENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Vary `m` with a single product.
    Depth,
    /// Vary `k` without solicitation.
    Breadth,
    /// Every `(m, k)` pair.
    Joint,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Depth => "depth",
            Mode::Breadth => "breadth",
            Mode::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(Mode::Depth),
            "breadth" => Ok(Mode::Breadth),
            "joint" => Ok(Mode::Joint),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// One experiment: a prior, a noise level and a list of `(m, k)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub d: usize,
    /// Distribution of customer ideal points.
    pub prior: PriorSpec,
    pub noise_var: f64,
    pub mode: Mode,
    /// Solicitation depths in depth and joint mode, assortment sizes in
    /// breadth mode.
    pub values: Vec<usize>,
    /// Assortment sizes crossed with `values` in joint mode.
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub assortment_method: AssortmentMethod,
}

impl Scenario {
    /// Depth or breadth sweep under the isotropic prior `N(0, I_d)` with unit noise.
    pub fn standard(mode: Mode, d: usize, values: Vec<usize>, trials: usize, master_seed: u64) -> Result<Self> {
        let s = Scenario {
            d,
            prior: PriorSpec::isotropic(d, 1.0)?,
            noise_var: 1.0,
            mode,
            values,
            k_values: Vec::new(),
            trials,
            master_seed,
            assortment_method: AssortmentMethod::ProductQuantizer,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.prior.dim() != self.d {
            return Err(Error::invalid(
                "scenario dimension must be positive and match the prior",
            ));
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.values.is_empty() {
            return Err(Error::invalid("sweep values must be nonempty"));
        }
        check_sorted(&self.values)?;
        match self.mode {
            Mode::Breadth => check_positive(&self.values, "assortment sizes")?,
            Mode::Joint => {
                if self.k_values.is_empty() {
                    return Err(Error::invalid("joint mode needs k_values"));
                }
                check_sorted(&self.k_values)?;
                check_positive(&self.k_values, "assortment sizes")?;
            }
            Mode::Depth => {}
        }
        if self.mode != Mode::Joint && !self.k_values.is_empty() {
            return Err(Error::invalid("k_values only applies to joint mode"));
        }
        Ok(())
    }

    /// Sweep points `(m, k)` in output order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        match self.mode {
            Mode::Depth => self.values.iter().map(|&m| (m, 1)).collect(),
            Mode::Breadth => self.values.iter().map(|&k| (0, k)).collect(),
            Mode::Joint => self
                .values
                .iter()
                .flat_map(|&m| self.k_values.iter().map(move |&k| (m, k)))
                .collect(),
        }
    }

    /// The agent's Gaussian prior: mean and covariance of the ideal-point law.
    pub fn agent_prior(&self) -> Result<GaussianBelief> {
        GaussianBelief::new(self.prior.mean(), self.prior.cov(), self.noise_var)
    }
}

fn check_sorted(values: &[usize]) -> Result<()> {
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep values must be strictly increasing"));
    }
    Ok(())
}

fn check_positive(values: &[usize], what: &str) -> Result<()> {
    if values.contains(&0) {
        return Err(Error::invalid(format!("{what} must be positive")));
    }
    Ok(())
}

/// One simulated customer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub theta: DVector<f64>,
    pub m: usize,
    pub k: usize,
    pub chosen_index: usize,
    /// `‖x − θ‖` for the chosen product `x`.
    pub distance: f64,
    pub squared_loss: f64,
}

/// Aggregate over the trials of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub mode: Mode,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_distance: f64,
    pub p25: f64,
    pub p75: f64,
    pub std_error: f64,
    /// Mean squared loss and its standard error. Not part of the CSV, so
    /// `None` for summaries read back from disk.
    pub squared_loss: Option<(f64, f64)>,
}

/// Everything about a sweep point that does not depend on the customer:
/// queries, Kalman gains and the centred assortment.
#[derive(Debug, Clone)]
pub struct PointPlan {
    m: usize,
    k: usize,
    noise_var: f64,
    prior_mean: DVector<f64>,
    queries: Vec<Query>,
    gains: Vec<DVector<f64>>,
    posterior_cov: DMatrix<f64>,
    centered: Assortment,
}

impl PointPlan {
    /// Plan for `(m, k)`. `rng` is only consumed by Lloyd refinement.
    pub fn new<R: Rng + ?Sized>(scenario: &Scenario, m: usize, k: usize, rng: &mut R) -> Result<Self> {
        let prior = scenario.agent_prior()?;
        let plan = waterfill(prior.cov(), m, scenario.noise_var)?;
        let queries = realize_queries(&plan, m)?;
        let mut belief = prior.clone();
        let mut gains = Vec::with_capacity(m);
        for q in &queries {
            gains.push(belief.kalman_gain(q)?);
            let cov = belief.updated_cov(q)?;
            belief = GaussianBelief::new(belief.mean().clone(), cov, scenario.noise_var)?;
        }
        let centered = centered_assortment(belief.cov(), k, scenario.assortment_method, rng)?;
        Ok(PointPlan {
            m,
            k,
            noise_var: scenario.noise_var,
            prior_mean: prior.mean().clone(),
            queries,
            gains,
            posterior_cov: belief.cov().clone(),
            centered,
        })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    /// Posterior covariance after all `m` queries; the same for every customer.
    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.posterior_cov
    }

    pub fn centered_assortment(&self) -> &Assortment {
        &self.centered
    }

    /// Run one customer with ideal point `theta`, drawing response noise from `rng`.
    pub fn trial<R: Rng + ?Sized>(&self, theta: &DVector<f64>, rng: &mut R) -> Result<TrialRecord> {
        let mut mean = self.prior_mean.clone();
        for (q, gain) in self.queries.iter().zip(&self.gains) {
            let z = simulate_response(theta, q, self.noise_var, rng)?;
            let innovation = z.value() - q.direction().dot(&mean);
            mean = &mean + gain * innovation;
        }
        let offered = self.centered.translated(&mean);
        let choice = customer_choice(theta, &offered)?;
        Ok(TrialRecord {
            theta: theta.clone(),
            m: self.m,
            k: self.k,
            chosen_index: choice.index,
            distance: choice.loss.sqrt(),
            squared_loss: choice.loss,
        })
    }
}

/// Simulate one customer at sweep point `(m, k)`.
pub fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    m: usize,
    k: usize,
    theta: &DVector<f64>,
    rng: &mut R,
) -> Result<TrialRecord> {
    scenario.validate()?;
    PointPlan::new(scenario, m, k, rng)?.trial(theta, rng)
}

/// Run every sweep point of `scenario`, trials in parallel.
pub fn run_sweep(scenario: &Scenario) -> Result<Vec<SweepSummary>> {
    scenario.validate()?;
    scenario
        .points()
        .into_iter()
        .enumerate()
        .map(|(point, (m, k))| run_point(scenario, point as u64, m, k))
        .collect()
}

fn run_point(scenario: &Scenario, point: u64, m: usize, k: usize) -> Result<SweepSummary> {
    let seed = scenario.master_seed;
    let plan = PointPlan::new(scenario, m, k, &mut substream(seed, point, ASSORTMENT_STREAM))?;
    let records: Vec<(f64, f64)> = (0..scenario.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, point, t as u64);
            let theta = scenario.prior.sample(&mut rng)?;
            let r = plan.trial(&theta, &mut rng)?;
            Ok((r.distance, r.squared_loss))
        })
        .collect::<Result<_>>()?;
    let distances: Vec<f64> = records.iter().map(|r| r.0).collect();
    let losses: Vec<f64> = records.iter().map(|r| r.1).collect();
    let (mean_distance, std_error) = mean_and_se(&distances);
    let mut sorted = distances;
    sorted.sort_by(f64::total_cmp);
    Ok(SweepSummary {
        mode: scenario.mode,
        d: scenario.d,
        m,
        k,
        trials: scenario.trials,
        seed,
        mean_distance,
        p25: percentile(&sorted, 0.25),
        p75: percentile(&sorted, 0.75),
        std_error,
        squared_loss: Some(mean_and_se(&losses)),
    })
}

/// Linearly interpolated percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}
