//! Solicitation policies: greedy directions, rank-capped water-filling and
//! its realization as unit-norm queries, the isotropic `k = 2` profile, and
//! the identities and bounds that tie solicitation depth to assortment
//! breadth.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::belief::Query;
use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};

/// `γ = √(1 − 2/π)`; `1/γ` is the locked eigenvalue ratio of the `k = 2` plan.
pub fn gamma() -> f64 {
    (1.0 - 2.0 / PI).sqrt()
}

/// Per-round utility gain of querying `y` under covariance `cov`:
/// `½ yᵀΣ²y / (σ² + yᵀΣy)`.
pub fn round_gain(cov: &DMatrix<f64>, y: &DVector<f64>, noise_var: f64) -> f64 {
    let sy = cov * y;
    0.5 * sy.norm_squared() / (noise_var + y.dot(&sy))
}

/// Leading eigenvector of `cov` and the gain of querying it.
pub fn greedy_direction(cov: &DMatrix<f64>, noise_var: f64) -> Result<(Query, f64)> {
    check_noise_var(noise_var)?;
    linalg::check_spd(cov)?;
    let eig = SymEigen::new(cov);
    let lambda = eig.values[0];
    let q = Query::normalized(eig.vector(0))?;
    Ok((q, 0.5 * lambda * lambda / (noise_var + lambda)))
}

/// Rank-capped water-filling allocation of `m` queries over the prior
/// eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SolicitationPlan {
    /// Prior eigenvectors as columns, eigenvalues decreasing.
    pub eigenbasis: DMatrix<f64>,
    pub prior_eigs: Vec<f64>,
    /// Precision allocated to each eigendirection, in units of `σ⁻²`.
    pub allocations: Vec<f64>,
    /// Number of directions that receive queries.
    pub active_rank: usize,
    /// Common posterior variance across the active directions. Equal to the
    /// leading prior eigenvalue when nothing is queried.
    pub common_level: f64,
    pub posterior_eigs: Vec<f64>,
    pub m: usize,
    pub noise_var: f64,
}

impl SolicitationPlan {
    pub fn dim(&self) -> usize {
        self.prior_eigs.len()
    }

    pub fn posterior_cov(&self) -> DMatrix<f64> {
        linalg::compose(&self.eigenbasis, &self.posterior_eigs)
    }

    pub fn posterior_trace(&self) -> f64 {
        self.posterior_eigs.iter().sum()
    }

    /// Aggregate information matrix `Σ y yᵀ` the plan calls for.
    pub fn information_matrix(&self) -> DMatrix<f64> {
        linalg::compose(&self.eigenbasis, &self.allocations)
    }
}

/// Optimal `k = 1` solicitation plan: equalize the top `r★` posterior
/// variances at `λ★` and leave the rest at their prior values.
pub fn waterfill(prior_cov: &DMatrix<f64>, m: usize, noise_var: f64) -> Result<SolicitationPlan> {
    check_noise_var(noise_var)?;
    linalg::check_spd(prior_cov)?;
    let eig = SymEigen::new(prior_cov);
    let d = eig.dim();
    let prior = eig.values.clone();

    let (rank, level) = active_set(&prior, m, noise_var);
    let allocations: Vec<f64> = prior
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            if i < rank {
                noise_var * (1.0 / level - 1.0 / lam)
            } else {
                0.0
            }
        })
        .collect();
    let posterior_eigs = prior
        .iter()
        .enumerate()
        .map(|(i, &lam)| if i < rank { level } else { lam })
        .collect();
    debug_assert_eq!(allocations.len(), d);

    Ok(SolicitationPlan {
        eigenbasis: eig.vectors,
        prior_eigs: prior,
        allocations,
        active_rank: rank,
        common_level: level,
        posterior_eigs,
        m,
        noise_var,
    })
}

/// `(r★, λ★)` for decreasing prior eigenvalues.
fn active_set(prior: &[f64], m: usize, noise_var: f64) -> (usize, f64) {
    let cap = m.min(prior.len());
    if cap == 0 {
        return (0, prior[0]);
    }
    let budget = m as f64 / noise_var;
    let mut inv_sum = 0.0;
    for r in 1..=cap {
        inv_sum += 1.0 / prior[r - 1];
        let level = r as f64 / (inv_sum + budget);
        // The first r whose level reaches the next prior eigenvalue; ties at
        // the boundary stay unqueried.
        if prior[r - 1] > level && (r == cap || level >= prior[r]) {
            return (r, level);
        }
    }
    unreachable!("water-filling scan always terminates at the rank cap")
}

/// Unit-norm queries whose information matrix is diagonal in the plan's
/// eigenbasis with the plan's allocations.
pub fn realize_queries(plan: &SolicitationPlan, m: usize) -> Result<Vec<Query>> {
    queries_for_allocation(&plan.eigenbasis, &plan.allocations, m)
}

/// `m` unit vectors `y_t` with `Σ y_t y_tᵀ = V diag(allocations) Vᵀ`.
///
/// Builds an `m × m` Gram matrix with the allocations as spectrum and unit
/// diagonal by successive Givens rotations, then reads the queries off its
/// square-root factor. Feasible whenever the allocations are nonnegative,
/// sum to `m`, and have at most `m` nonzero entries.
pub fn queries_for_allocation(basis: &DMatrix<f64>, allocations: &[f64], m: usize) -> Result<Vec<Query>> {
    let d = basis.nrows();
    if allocations.len() != d || basis.ncols() != d {
        return Err(Error::invalid("allocation length must match the basis dimension"));
    }
    if allocations.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::invalid("allocations must be finite and nonnegative"));
    }
    let total: f64 = allocations.iter().sum();
    if (total - m as f64).abs() > 1e-9 * (m as f64).max(1.0) {
        return Err(Error::invalid(format!("allocations sum to {total}, expected {m}")));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let support: Vec<usize> = (0..d).filter(|&i| allocations[i] > 0.0).collect();
    if support.len() > m {
        return Err(Error::invalid(format!(
            "{} directions cannot be covered by {m} rank-one queries",
            support.len()
        )));
    }

    // Spectrum padded with zeros; rescaled so the trace is exactly m.
    let scale = m as f64 / total;
    let mut spectrum = vec![0.0; m];
    for (slot, &i) in support.iter().enumerate() {
        spectrum[slot] = allocations[i] * scale;
    }
    let rotation = unit_diagonal_rotation(&spectrum);

    let mut queries = Vec::with_capacity(m);
    for t in 0..m {
        let mut y = DVector::zeros(d);
        for (slot, &i) in support.iter().enumerate() {
            y.axpy(rotation[(t, slot)] * spectrum[slot].sqrt(), &basis.column(i), 1.0);
        }
        queries.push(Query::normalized(y)?);
    }
    Ok(queries)
}

/// Orthogonal `U` such that `U diag(spectrum) Uᵀ` has unit diagonal.
/// Requires `Σ spectrum = len`.
fn unit_diagonal_rotation(spectrum: &[f64]) -> DMatrix<f64> {
    const TOL: f64 = 1e-14;
    let n = spectrum.len();
    let mut g = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
    let mut u = DMatrix::<f64>::identity(n, n);

    for _ in 0..n {
        let Some(i) = (0..n).find(|&i| g[(i, i)] < 1.0 - TOL) else {
            break;
        };
        let Some(j) = (0..n).find(|&j| g[(j, j)] > 1.0 + TOL) else {
            break;
        };
        let (a, b, c) = (g[(i, i)], g[(i, j)], g[(j, j)]);

        // Solve (c−1)t² + 2bt + (a−1) = 0 so the rotated (i,i) entry is 1.
        let qa = c - 1.0;
        let qb = 2.0 * b;
        let qc = a - 1.0;
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        let q = -0.5 * (qb + if qb >= 0.0 { disc } else { -disc });
        let t = qc / q;
        let cs = 1.0 / (1.0 + t * t).sqrt();
        let sn = t * cs;

        rotate_rows(&mut g, i, j, cs, sn);
        rotate_cols(&mut g, i, j, cs, sn);
        rotate_rows(&mut u, i, j, cs, sn);
        g[(i, i)] = 1.0;
        g[(j, j)] = a + c - 1.0;
    }
    u
}

fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for col in 0..m.ncols() {
        let (x, y) = (m[(i, col)], m[(j, col)]);
        m[(i, col)] = c * x + s * y;
        m[(j, col)] = -s * x + c * y;
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let (x, y) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = c * x + s * y;
        m[(row, j)] = -s * x + c * y;
    }
}

/// Regime of the isotropic `k = 2` solicitation optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K2Regime {
    /// Fewer queries than dimensions: water-filling is already optimal.
    RankCapped,
    /// The hedged direction is left at its prior variance.
    SelectiveFocus,
    /// Leading-to-trailing eigenvalue ratio fixed at `1/γ`.
    Locked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct K2Profile {
    /// Posterior eigenvalues, decreasing.
    pub eigs: Vec<f64>,
    pub regime: K2Regime,
    /// Query count at which the ratio locks.
    pub m_hat: f64,
}

impl K2Profile {
    pub fn ratio(&self) -> f64 {
        self.eigs[0] / self.eigs[self.eigs.len() - 1]
    }

    pub fn d2(&self) -> f64 {
        d2_from_eigs(&self.eigs)
    }
}

/// `(1−γ)/γ · (d−1) σ²/σ₀²`.
pub fn m_hat(prior_scale: f64, d: usize, noise_var: f64) -> f64 {
    let g = gamma();
    (1.0 - g) / g * (d as f64 - 1.0) * noise_var / prior_scale
}

/// Optimal `k = 2` posterior eigenvalues for the isotropic prior
/// `prior_scale · I_d` after `m` queries.
pub fn k2_plan(prior_scale: f64, d: usize, m: usize, noise_var: f64) -> Result<K2Profile> {
    check_noise_var(noise_var)?;
    if !(prior_scale.is_finite() && prior_scale > 0.0) {
        return Err(Error::invalid("prior scale must be positive"));
    }
    if d < 2 {
        return Err(Error::invalid("the two-product plan needs d >= 2"));
    }
    let m_hat = m_hat(prior_scale, d, noise_var);
    let mf = m as f64;
    let df = d as f64;

    if m < d {
        let plan = waterfill(&(DMatrix::identity(d, d) * prior_scale), m, noise_var)?;
        return Ok(K2Profile {
            eigs: plan.posterior_eigs,
            regime: K2Regime::RankCapped,
            m_hat,
        });
    }
    let (lead, rest, regime) = if mf <= m_hat {
        let rest = 1.0 / (1.0 / prior_scale + mf / ((df - 1.0) * noise_var));
        (prior_scale, rest, K2Regime::SelectiveFocus)
    } else {
        let g = gamma();
        let budget = df / prior_scale + mf / noise_var;
        let rest = (g + df - 1.0) / budget;
        (rest / g, rest, K2Regime::Locked)
    };
    let mut eigs = vec![rest; d];
    eigs[0] = lead;
    Ok(K2Profile { eigs, regime, m_hat })
}

/// [`k2_plan`] for an explicit prior covariance, which must be isotropic.
pub fn k2_plan_for_prior(prior_cov: &DMatrix<f64>, m: usize, noise_var: f64) -> Result<K2Profile> {
    linalg::check_spd(prior_cov)?;
    let d = prior_cov.nrows();
    let scale = prior_cov[(0, 0)];
    let iso = DMatrix::identity(d, d) * scale;
    if (prior_cov - &iso).amax() > 1e-12 * scale {
        return Err(Error::Unsupported(
            "the two-product plan has a closed form only for isotropic priors".into(),
        ));
    }
    k2_plan(scale, d, m, noise_var)
}

/// Two-point Gaussian distortion from eigenvalues: `Σλ − (2/π) max λ`.
pub fn d2_from_eigs(eigs: &[f64]) -> f64 {
    let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    eigs.iter().sum::<f64>() - 2.0 / PI * max
}

/// Value of solicitation `½(tr Σ₀ − tr Σ_m)`.
pub fn vos(prior_cov: &DMatrix<f64>, posterior_cov: &DMatrix<f64>) -> f64 {
    0.5 * (prior_cov.trace() - posterior_cov.trace())
}

/// Lower bound on the hedging gap after `m` queries under any policy:
/// `d² / (2 (tr Σ₀⁻¹ + m/σ²))`.
pub fn solicitation_lower_bound(prior_cov: &DMatrix<f64>, m: usize, noise_var: f64) -> Result<f64> {
    check_noise_var(noise_var)?;
    let d = prior_cov.nrows() as f64;
    let tr_inv = linalg::spd_inverse(prior_cov)?.trace();
    Ok(d * d / (2.0 * (tr_inv + m as f64 / noise_var)))
}

/// `tr Σ / (d (det Σ)^{1/d})` from eigenvalues; 1 exactly when isotropic.
pub fn isoperimetric_ratio(eigs: &[f64]) -> f64 {
    let d = eigs.len() as f64;
    let mean = eigs.iter().sum::<f64>() / d;
    let log_geo = eigs.iter().map(|l| l.ln()).sum::<f64>() / d;
    let first = eigs[0];
    if eigs.iter().all(|&l| l == first) {
        return 1.0;
    }
    mean / log_geo.exp()
}

/// Anisotropy and threshold quantities for a prior and query budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// Isoperimetric ratio of the water-filling posterior after `m` queries.
    pub alpha: f64,
    /// `σ² (d/λ_min(Σ₀) − tr Σ₀⁻¹)⁺`: beyond `max(d, m̄)` queries the
    /// water-filling posterior is isotropic.
    pub m_bar: f64,
    pub d: usize,
    /// `(det Σ₀)^{1/d}`.
    pub prior_det_root: f64,
    pub prior_trace_inv: f64,
    pub noise_var: f64,
}

impl Thresholds {
    /// Products needed to reach hedging gap `eps` without solicitation.
    pub fn breadth_requirement(&self, eps: f64) -> f64 {
        let d = self.d as f64;
        (d * self.prior_det_root / (2.0 * eps)).powf(d / 2.0)
    }

    /// Queries needed to reach hedging gap `eps` under any policy.
    pub fn depth_requirement(&self, eps: f64) -> f64 {
        let d = self.d as f64;
        (self.noise_var * (d * d / (2.0 * eps) - self.prior_trace_inv)).max(0.0)
    }
}

pub fn thresholds_and_ratios(prior_cov: &DMatrix<f64>, m: usize, noise_var: f64) -> Result<Thresholds> {
    let plan = waterfill(prior_cov, m, noise_var)?;
    let d = plan.dim();
    let df = d as f64;
    let prior_trace_inv: f64 = plan.prior_eigs.iter().map(|l| 1.0 / l).sum();
    let lambda_min = plan.prior_eigs[d - 1];
    let m_bar = (noise_var * (df / lambda_min - prior_trace_inv)).max(0.0);
    let prior_det_root = (plan.prior_eigs.iter().map(|l| l.ln()).sum::<f64>() / df).exp();
    Ok(Thresholds {
        alpha: isoperimetric_ratio(&plan.posterior_eigs),
        m_bar,
        d,
        prior_det_root,
        prior_trace_inv,
        noise_var,
    })
}

/// Distortion ratio of the water-filling posterior to the `k = 2` optimum
/// under an isotropic prior, with its dimension-only upper bound
/// `d (d − 2/π) / (γ + d − 1)²`.
pub fn r2_ratio(d: usize, m: usize, prior_scale: f64, noise_var: f64) -> Result<(f64, f64)> {
    let k2 = k2_plan(prior_scale, d, m, noise_var)?;
    let wf = waterfill(&(DMatrix::identity(d, d) * prior_scale), m, noise_var)?;
    let df = d as f64;
    let g = gamma();
    let bound = df * (df - 2.0 / PI) / ((g + df - 1.0) * (g + df - 1.0));
    Ok((d2_from_eigs(&wf.posterior_eigs) / k2.d2(), bound))
}

fn check_noise_var(noise_var: f64) -> Result<()> {
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(())
}
