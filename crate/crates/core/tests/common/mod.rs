//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerics, so agreement is an independent check.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `η_k = 1 − D_k` for the optimal `k`-level quantizer of `N(0,1)`,
/// computed offline by exact-boundary Lloyd iteration with Simpson
/// quadrature on each cell (tolerance 1e-12). Index `k − 1`.
pub const FROZEN_ETA: [f64; 16] = [
    0.0,
    0.6366197723693001,
    0.8098259607519118,
    0.8825181521698487,
    0.9200588729108004,
    0.9420223462840711,
    0.9559996175006273,
    0.9654522392108532,
    0.9721467390487567,
    0.9770629470950294,
    0.9807804919682137,
    0.9836603421172188,
    0.9859369437268186,
    0.9877679998913516,
    0.9892627894405794,
    0.9904989919916054,
];

/// `1 / √(1 − 2/π)`.
pub const INV_GAMMA: f64 = 1.658896739970306;

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `∫_a^b x^p φ(x) dx` for p = 0, 1, 2 by composite Simpson with `n` panels.
fn cell_moments(a: f64, b: f64, n: usize) -> [f64; 3] {
    let h = (b - a) / n as f64;
    let mut out = [0.0; 3];
    for i in 0..=n {
        let x = a + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = w * phi(x);
        out[0] += f;
        out[1] += f * x;
        out[2] += f * x * x;
    }
    out.map(|s| s * h / 3.0)
}

/// Lloyd-Max for `N(0,1)` by numerical quadrature on `[-12, 12]`; returns
/// the converged distortion.
pub fn eta_by_quadrature(k: usize) -> f64 {
    const EDGE: f64 = 12.0;
    const PANELS: usize = 2000;
    if k == 1 {
        return 0.0;
    }
    let mut c: Vec<f64> = (0..k).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / k as f64).collect();
    let mut distortion = 1.0;
    for _ in 0..50_000 {
        let mut edges = vec![-EDGE];
        edges.extend(c.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(EDGE);
        let mut next = Vec::with_capacity(k);
        distortion = 0.0;
        for (i, e) in edges.windows(2).enumerate() {
            let [m0, m1, m2] = cell_moments(e[0], e[1], PANELS);
            distortion += m2 - 2.0 * c[i] * m1 + c[i] * c[i] * m0;
            next.push(m1 / m0);
        }
        let shift = next.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c = next;
        if shift < 1e-13 {
            break;
        }
    }
    1.0 - distortion
}

/// Mean of the chi distribution with `d` degrees of freedom, via a
/// log-gamma series (Stirling with Bernoulli corrections after shifting).
pub fn chi_mean(d: usize) -> f64 {
    let a = d as f64 / 2.0;
    (2.0f64).sqrt() * (ln_gamma(a + 0.5) - ln_gamma(a)).exp()
}

fn ln_gamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Small dense symmetric solve by Gauss-Jordan with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn trace(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}
