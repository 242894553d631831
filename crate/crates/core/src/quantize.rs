//! Scalar (Lloyd-Max) and vector quantization of Gaussian distributions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};
use crate::normal;

/// Iteration cap for the scalar Lloyd-Max fixed point.
pub const LLOYD_MAX_ITER_CAP: usize = 10_000;
/// Iteration cap for sample-based Lloyd refinement.
pub const LLOYD_KD_ITER_CAP: usize = 500;
/// Relative distortion improvement below which Lloyd refinement stops.
pub const LLOYD_KD_REL_TOL: f64 = 1e-6;
/// Centroid tolerance used when callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Optimal `k`-level quantizer of N(0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    pub centroids: Vec<f64>,
    /// Midpoints between consecutive centroids.
    pub boundaries: Vec<f64>,
    /// `E[min_i (X − c_i)²]` for `X ~ N(0,1)`.
    pub distortion: f64,
    pub iterations: usize,
}

impl ScalarQuantizer {
    pub fn levels(&self) -> usize {
        self.centroids.len()
    }

    /// `1 − distortion`: fraction of unit variance removed.
    pub fn efficiency(&self) -> f64 {
        1.0 - self.distortion
    }

    fn from_centroids(centroids: Vec<f64>, iterations: usize) -> Self {
        let boundaries = midpoints(&centroids);
        let distortion = cell_edges(&boundaries)
            .zip(&centroids)
            .map(|((a, b), &c)| {
                let (m0, m1, m2) = normal::partial_moments(a, b);
                m2 - 2.0 * c * m1 + c * c * m0
            })
            .sum::<f64>()
            .max(0.0);
        ScalarQuantizer {
            centroids,
            boundaries,
            distortion,
            iterations,
        }
    }
}

fn midpoints(c: &[f64]) -> Vec<f64> {
    c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn cell_edges(boundaries: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    let k = boundaries.len() + 1;
    (0..k).map(move |i| {
        let a = if i == 0 { f64::NEG_INFINITY } else { boundaries[i - 1] };
        let b = if i + 1 == k { f64::INFINITY } else { boundaries[i] };
        (a, b)
    })
}

/// Lloyd-Max quantizer for the standard normal.
///
/// Alternates the nearest-neighbour and centroid conditions, using
/// closed-form Gaussian partial moments for every cell, until no centroid
/// moves by more than `tol`.
pub fn lloyd_max_normal(k: usize, tol: f64) -> Result<ScalarQuantizer> {
    if k == 0 {
        return Err(Error::invalid("quantizer needs at least one level"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    // Symmetric uniform start on [-2, 2]-ish, spacing shrinking with k.
    let span = 2.0 * (1.0 + (k as f64).ln()).min(3.0);
    let mut c: Vec<f64> = (0..k)
        .map(|i| {
            if k == 1 {
                0.0
            } else {
                -span / 2.0 + span * i as f64 / (k - 1) as f64
            }
        })
        .collect();
    symmetrize(&mut c);

    for it in 1..=LLOYD_MAX_ITER_CAP {
        let b = midpoints(&c);
        let mut next: Vec<f64> = cell_edges(&b)
            .map(|(lo, hi)| {
                let (m0, m1, _) = normal::partial_moments(lo, hi);
                m1 / m0
            })
            .collect();
        symmetrize(&mut next);
        let moved = c.iter().zip(&next).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
        c = next;
        if moved < tol {
            return Ok(ScalarQuantizer::from_centroids(c, it));
        }
    }
    Err(Error::NotConverged {
        iterations: LLOYD_MAX_ITER_CAP,
        last: Box::new(ScalarQuantizer::from_centroids(c, LLOYD_MAX_ITER_CAP)),
    })
}

/// Enforce `c = −reverse(c)`, which the Gaussian fixed point satisfies.
fn symmetrize(c: &mut [f64]) {
    let k = c.len();
    for i in 0..k / 2 {
        let v = 0.5 * (c[k - 1 - i] - c[i]);
        c[i] = -v;
        c[k - 1 - i] = v;
    }
    if k % 2 == 1 {
        c[k / 2] = 0.0;
    }
}

/// Optimal scalar quantizer, falling back to the last iterate if the
/// iteration cap is hit.
fn scalar_quantizer(k: usize) -> ScalarQuantizer {
    match lloyd_max_normal(k, DEFAULT_TOL) {
        Ok(q) => q,
        Err(Error::NotConverged { last, .. }) => *last,
        Err(e) => unreachable!("lloyd_max_normal({k}) failed: {e}"),
    }
}

/// Univariate quantization efficiency `η_k`.
pub fn quantization_efficiency(k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    scalar_quantizer(k).efficiency()
}

/// A set of recommended products in preference space.
#[derive(Debug, Clone, PartialEq)]
pub struct Assortment {
    points: Vec<DVector<f64>>,
}

impl Assortment {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("assortment must be nonempty"))?;
        let d = first.len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::invalid("assortment points have mixed dimensions"));
        }
        if points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("assortment points must be finite"));
        }
        Ok(Assortment { points })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn translated(&self, by: &DVector<f64>) -> Assortment {
        Assortment {
            points: self.points.iter().map(|p| p + by).collect(),
        }
    }

    /// Reflection through the origin.
    pub fn negated(&self) -> Assortment {
        Assortment {
            points: self.points.iter().map(|p| -p).collect(),
        }
    }

    /// Index of the nearest point (lowest index on ties) and squared distance.
    pub fn nearest(&self, x: &DVector<f64>) -> (usize, f64) {
        nearest(&self.points, x.as_slice())
    }
}

fn nearest(points: &[DVector<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, p) in points.iter().enumerate() {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum();
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    best
}

/// Per-axis level counts chosen for a product quantizer, aligned with the
/// decreasing eigenvalues of the covariance.
pub fn product_levels(eigenvalues: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("assortment size must be at least 1"));
    }
    let d = eigenvalues.len();
    let mut eta: HashMap<usize, f64> = HashMap::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::new();
    factorizations(k, k, d, &mut current, &mut |levels| {
        let cost: f64 = eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &lam)| {
                let n = levels.get(i).copied().unwrap_or(1);
                let e = *eta.entry(n).or_insert_with(|| quantization_efficiency(n));
                lam * (1.0 - e)
            })
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c * (1.0 - 1e-12)) {
            best = Some((cost, levels.to_vec()));
        }
    });
    let (_, mut levels) = best.expect("k itself is always a factorization");
    levels.resize(d, 1);
    Ok(levels)
}

/// Visit every nonincreasing factorization of `k` into at most `slots`
/// factors, each at least 2, largest first.
fn factorizations(k: usize, max: usize, slots: usize, current: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if k == 1 {
        visit(current);
        return;
    }
    if slots == 0 {
        return;
    }
    for f in (2..=max.min(k)).rev() {
        if k.is_multiple_of(f) {
            current.push(f);
            factorizations(k / f, f, slots - 1, current, visit);
            current.pop();
        }
    }
}

/// Product quantizer for `N(0, cov)` built from Lloyd-Max centroids.
///
/// Each principal axis `i` gets `n_i` levels scaled by `√λ_i`, with
/// `∏ n_i = k`; the level counts minimise the separable distortion
/// `Σ λ_i (1 − η_{n_i})`. Points are centred at the origin.
pub fn product_quantizer(cov: &DMatrix<f64>, k: usize) -> Result<Assortment> {
    linalg::check_spd(cov)?;
    let eig = SymEigen::new(cov);
    let levels = product_levels(&eig.values, k)?;
    let d = eig.dim();

    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    let axes: Vec<(usize, Vec<f64>)> = levels
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 1)
        .map(|(i, &n)| {
            let c = cache.entry(n).or_insert_with(|| scalar_quantizer(n).centroids).clone();
            (i, c.into_iter().map(|x| x * eig.values[i].sqrt()).collect())
        })
        .collect();

    let mut points = Vec::with_capacity(k);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut p = DVector::zeros(d);
        for ((axis, coords), &j) in axes.iter().zip(&idx) {
            p.axpy(coords[j], &eig.vectors.column(*axis), 1.0);
        }
        points.push(p);
        // Odometer over the axis grid, last axis fastest.
        let mut pos = axes.len();
        loop {
            if pos == 0 {
                return Assortment::new(points);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < axes[pos].1.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Draws from `N(0, cov)` as rows of a `n × d` buffer.
pub(crate) fn gaussian_samples<R: Rng + ?Sized>(
    cov: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let l = linalg::cholesky(cov)?.l();
    let d = cov.nrows();
    Ok((0..n)
        .map(|_| {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            &l * z
        })
        .collect())
}

/// Result of sample-based Lloyd refinement.
#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub assortment: Assortment,
    /// Distortion of `assortment` on the fixed sample set.
    pub distortion: f64,
    /// Distortion of the initial assortment on the same samples.
    pub initial_distortion: f64,
    pub iterations: usize,
    /// Number of empty cells re-seeded.
    pub reseeds: usize,
}

/// Lloyd (k-means) refinement of `init` against `n_samples` fixed draws
/// from `N(0, cov)`.
pub fn lloyd_kd<R: Rng + ?Sized>(
    cov: &DMatrix<f64>,
    k: usize,
    init: &Assortment,
    n_samples: usize,
    rng: &mut R,
) -> Result<LloydOutcome> {
    if init.len() != k {
        return Err(Error::invalid(format!("init has {} points, expected {k}", init.len())));
    }
    if init.dim() != cov.nrows() {
        return Err(Error::invalid("init dimension does not match covariance"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let samples = gaussian_samples(cov, n_samples, rng)?;
    let d = cov.nrows();

    let mut points = init.points().to_vec();
    let mut reseeds = 0;
    let mut previous = f64::INFINITY;
    let mut initial_distortion = f64::NAN;
    let mut iterations = 0;

    loop {
        let assign: Vec<(usize, f64)> = samples.par_iter().map(|x| nearest(&points, x.as_slice())).collect();
        let distortion = assign.iter().map(|a| a.1).sum::<f64>() / n_samples as f64;
        if iterations == 0 {
            initial_distortion = distortion;
        }
        let improved = previous - distortion;
        let converged = previous.is_finite() && improved <= LLOYD_KD_REL_TOL * previous;
        if converged || iterations == LLOYD_KD_ITER_CAP {
            return Ok(LloydOutcome {
                assortment: Assortment::new(points)?,
                distortion,
                initial_distortion,
                iterations,
                reseeds,
            });
        }
        previous = distortion;
        iterations += 1;

        let mut sums = vec![DVector::<f64>::zeros(d); k];
        let mut counts = vec![0usize; k];
        for (x, &(j, _)) in samples.iter().zip(&assign) {
            sums[j] += x;
            counts[j] += 1;
        }
        let mut far: Vec<usize> = Vec::new();
        for j in 0..k {
            if counts[j] > 0 {
                points[j] = &sums[j] / counts[j] as f64;
            } else {
                if far.is_empty() {
                    far = (0..n_samples).collect();
                    far.sort_by(|&a, &b| assign[b].1.total_cmp(&assign[a].1).then(a.cmp(&b)));
                    far.reverse();
                }
                let s = far.pop().expect("fewer samples than empty cells");
                points[j] = samples[s].clone();
                reseeds += 1;
            }
        }
    }
}

/// Monte Carlo estimate of `E[min_j ‖ξ − x_j‖²]`, `ξ ~ N(0, cov)`, with its
/// standard error.
///
/// Samples come in antithetic pairs `(ξ, −ξ)`; `n` is rounded up to an even
/// count, and the standard error is computed from the pair averages.
pub fn distortion_mc<R: Rng + ?Sized>(cov: &DMatrix<f64>, s: &Assortment, n: usize, rng: &mut R) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if s.dim() != cov.nrows() {
        return Err(Error::invalid("assortment dimension does not match covariance"));
    }
    let pairs = n.div_ceil(2);
    let xi = gaussian_samples(cov, pairs, rng)?;
    let values: Vec<f64> = xi
        .par_iter()
        .map(|x| {
            let neg = -x;
            0.5 * (s.nearest(x).1 + s.nearest(&neg).1)
        })
        .collect();
    Ok(mean_and_se(&values))
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn one_level() {
        let q = lloyd_max_normal(1, 1e-12).unwrap();
        assert_eq!(q.centroids, vec![0.0]);
        assert!(q.boundaries.is_empty());
        assert!((q.distortion - 1.0).abs() < 1e-15);
        assert_eq!(quantization_efficiency(1), 0.0);
    }

    #[test]
    fn two_levels_closed_form() {
        let q = lloyd_max_normal(2, 1e-12).unwrap();
        let c = (2.0 / PI).sqrt();
        assert!((q.centroids[1] - c).abs() < 1e-12);
        assert!((q.centroids[0] + c).abs() < 1e-12);
        assert!((q.distortion - (1.0 - 2.0 / PI)).abs() < 1e-12);
        assert!((quantization_efficiency(2) - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_conditions() {
        for k in 2..=12 {
            let q = lloyd_max_normal(k, 1e-13).unwrap();
            for (i, b) in q.boundaries.iter().enumerate() {
                assert_eq!(*b, 0.5 * (q.centroids[i] + q.centroids[i + 1]));
            }
            for (i, (lo, hi)) in cell_edges(&q.boundaries).enumerate() {
                let (m0, m1, _) = normal::partial_moments(lo, hi);
                assert!((m1 / m0 - q.centroids[i]).abs() < 1e-10, "k={k} cell {i}");
            }
            for i in 0..k {
                assert_eq!(q.centroids[i], -q.centroids[k - 1 - i]);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(lloyd_max_normal(0, 1e-9).is_err());
        assert!(lloyd_max_normal(3, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        match lloyd_max_normal(64, 1e-300) {
            Err(Error::NotConverged { iterations, last }) => {
                assert_eq!(iterations, LLOYD_MAX_ITER_CAP);
                assert_eq!(last.levels(), 64);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn product_quantizer_examples() {
        let a = product_quantizer(&DMatrix::identity(2, 2), 1).unwrap();
        assert_eq!(a.points(), &[DVector::zeros(2)]);

        let a = product_quantizer(&diag(&[4.0, 1.0]), 2).unwrap();
        let c = (8.0 / PI).sqrt();
        assert_eq!(a.len(), 2);
        assert!((&a.points()[0] - DVector::from_vec(vec![-c, 0.0])).amax() < 1e-12);
        assert!((&a.points()[1] - DVector::from_vec(vec![c, 0.0])).amax() < 1e-12);

        let a = product_quantizer(&DMatrix::identity(2, 2), 4).unwrap();
        let c = (2.0 / PI).sqrt();
        assert_eq!(a.len(), 4);
        for p in a.points() {
            assert!((p[0].abs() - c).abs() < 1e-12 && (p[1].abs() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn level_allocation_prefers_leading_axes() {
        assert_eq!(product_levels(&[1.0, 1.0], 4).unwrap(), vec![2, 2]);
        assert_eq!(product_levels(&[4.0, 1.0], 2).unwrap(), vec![2, 1]);
        assert_eq!(
            product_levels(&[1.0; 10], 32).unwrap(),
            vec![2, 2, 2, 2, 2, 1, 1, 1, 1, 1]
        );
        assert_eq!(product_levels(&[1.0], 7).unwrap(), vec![7]);
        // A dominant axis takes all levels.
        assert_eq!(product_levels(&[100.0, 1.0], 4).unwrap(), vec![4, 1]);
    }

    #[test]
    fn product_quantizer_any_k() {
        for k in 1..=20 {
            let a = product_quantizer(&diag(&[3.0, 2.0, 1.0]), k).unwrap();
            assert_eq!(a.len(), k);
        }
    }

    #[test]
    fn distortion_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = Assortment::new(vec![DVector::zeros(3)]).unwrap();
        let (est, se) = distortion_mc(&DMatrix::identity(3, 3), &zero, 200_000, &mut rng).unwrap();
        assert!((est - 3.0).abs() < 3.0 * se, "{est} ± {se}");

        let c = (8.0 / PI).sqrt();
        let pair = Assortment::new(vec![DVector::from_vec(vec![-c, 0.0]), DVector::from_vec(vec![c, 0.0])]).unwrap();
        let (est, se) = distortion_mc(&diag(&[4.0, 1.0]), &pair, 400_000, &mut rng).unwrap();
        assert!((est - (5.0 - 8.0 / PI)).abs() < 3.0 * se, "{est} ± {se}");
    }

    #[test]
    fn duplicated_point_does_not_change_estimate() {
        let cov = diag(&[2.0, 1.0]);
        let p = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![-1.0, 0.5])];
        let mut dup = p.clone();
        dup.push(p[0].clone());
        let a = distortion_mc(
            &cov,
            &Assortment::new(p).unwrap(),
            10_000,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let b = distortion_mc(
            &cov,
            &Assortment::new(dup).unwrap(),
            10_000,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reflection_symmetry_is_exact() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let s = Assortment::new(vec![
            DVector::from_vec(vec![0.3, 1.1]),
            DVector::from_vec(vec![-0.7, 0.2]),
            DVector::from_vec(vec![1.5, -0.4]),
        ])
        .unwrap();
        let a = distortion_mc(&cov, &s, 5_000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = distortion_mc(&cov, &s.negated(), 5_000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn lloyd_keeps_optimal_pair() {
        let cov = diag(&[4.0, 1.0]);
        let init = product_quantizer(&cov, 2).unwrap();
        let out = lloyd_kd(&cov, 2, &init, 200_000, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        let c = (8.0 / PI).sqrt();
        for (p, q) in out.assortment.points().iter().zip(init.points()) {
            // Sample-centroid noise is O(√(λ/n)).
            assert!((p - q).amax() < 0.02, "{p} vs {q}");
            assert!((p[0].abs() - c).abs() < 0.02);
        }
        assert!(out.distortion <= out.initial_distortion);
    }

    #[test]
    fn lloyd_single_point_goes_to_mean() {
        let cov = DMatrix::identity(2, 2);
        let init = Assortment::new(vec![DVector::from_vec(vec![3.0, -2.0])]).unwrap();
        let n = 50_000;
        let out = lloyd_kd(&cov, 1, &init, n, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let se = 1.0 / (n as f64).sqrt();
        assert!(out.assortment.points()[0].amax() < 3.0 * se);
    }

    #[test]
    fn lloyd_three_points_beats_product_pair() {
        let cov = DMatrix::identity(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let init = Assortment::new(
            (0..3)
                .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let out = lloyd_kd(&cov, 3, &init, 100_000, &mut rng).unwrap();
        let pair = product_quantizer(&cov, 2).unwrap();
        let (d3, se3) = distortion_mc(&cov, &out.assortment, 200_000, &mut rng).unwrap();
        let (d2, se2) = distortion_mc(&cov, &pair, 200_000, &mut rng).unwrap();
        assert!(d3 < d2 + 3.0 * (se2 * se2 + se3 * se3).sqrt(), "{d3} vs {d2}");
        assert!(out.distortion <= out.initial_distortion);
    }

    #[test]
    fn empty_cells_are_reseeded() {
        let cov = DMatrix::identity(1, 1);
        let far = DVector::from_vec(vec![100.0]);
        let init = Assortment::new(vec![DVector::zeros(1), far.clone(), far]).unwrap();
        let out = lloyd_kd(&cov, 3, &init, 10_000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(out.reseeds >= 2);
        assert!(out.assortment.points().iter().all(|p| p[0].abs() < 5.0));
    }
}
