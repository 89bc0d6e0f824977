//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own quadrature.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule by Golub–Welsch: nodes are the eigenvalues of the
/// Jacobi matrix, weights `√π v₀²`.
pub struct Hermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Hermite {
    pub fn new(n: usize) -> Self {
        let j = DMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { (a.max(b) as f64 / 2.0).sqrt() } else { 0.0 });
        let eig = SymmetricEigen::new(j);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|i| sqrt_pi * eig.eigenvectors[(0, i)].powi(2)).collect();
        Self { nodes, weights }
    }

    /// `E[f(m + s Z)]`, `Z ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64, m: f64, s: f64) -> f64 {
        let c = std::f64::consts::SQRT_2 * s;
        let sum: f64 = self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(m + c * t)).sum();
        sum / std::f64::consts::PI.sqrt()
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `E[f(m + s Z)]` by Simpson's rule on `m ± 12 s`, fine enough for kinked `f`.
pub fn normal_expectation(f: impl Fn(f64) -> f64, m: f64, s: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    simpson(|z| f(m + s * z) * phi(z), -12.0, 12.0, 48_000)
}

/// `2 / (1 − e^{−2})` in 1e−18 fixed point, summing the exponential series exactly.
pub fn two_over_one_minus_e_minus_two() -> f64 {
    const S: i128 = 1_000_000_000_000_000_000;
    // e^{-2} = Σ (−2)^k / k!
    let mut term: i128 = S;
    let mut sum: i128 = S;
    for k in 1..60i128 {
        term = term * -2 / k;
        sum += term;
    }
    let denom = S - sum;
    let q = 2 * S * S / denom;
    q as f64 / S as f64
}
