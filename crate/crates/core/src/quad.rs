//! Gaussian quadrature: Gauss–Hermite rules for expectations against normal
//! laws and composite Gauss–Legendre for finite intervals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Hermite rule for `∫ e^{-t²} g(t) dt`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes start from the eigenvalues of the symmetric Jacobi matrix and are
    /// polished by Newton steps on the orthonormal Hermite recurrence, which
    /// also yields weights accurate to full relative precision.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        guesses.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n / 2 {
            let mut z = guesses[i];
            let mut pp = 0.0;
            for _ in 0..NEWTON_MAX_ITER {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            let m = n / 2;
            // orthonormal ψ_{n-1}(0) by the same recurrence
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n - 1 {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = -(jf / (jf + 1.0)).sqrt() * p3;
            }
            x[m] = 0.0;
            w[m] = 1.0 / (nf * p1 * p1);
        }
        Self { nodes: x, weights: w }
    }

    /// Shared instance of the order-`n` rule.
    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(Self::new(n))).clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(Z)]` for `Z ~ N(mean, sd²)`.
    pub fn expect_normal(&self, g: impl Fn(f64) -> f64, mean: f64, sd: f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * g(mean + scale * t))
            .sum();
        s / PI.sqrt()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..NEWTON_MAX_ITER {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self { nodes: x, weights: w }
    }

    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(Self::new(n))).clone()
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self.nodes.iter().zip(&self.weights).map(|(t, w)| w * g(mid + half * t)).sum::<f64>()
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn integrate_composite(&self, g: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(&g, lo, hi)
            })
            .sum()
    }
}

/// Half-width, in standard deviations, of the window used by the piecewise rule.
const TAIL_SDS: f64 = 14.0;

/// `E[g(Z)]`, `Z ~ N(mean, sd²)`, for a function smooth except at `kinks`.
///
/// Smooth integrands use Gauss–Hermite with the order doubled from 32 until
/// successive results differ by less than 1e-10 (at most 256 nodes). Kinked
/// integrands, and smooth ones that fail to settle, fall back to composite
/// Gauss–Legendre on `mean ± 14 sd` split at the kinks.
pub fn gaussian_expectation(g: impl Fn(f64) -> f64, mean: f64, sd: f64, kinks: &[f64]) -> f64 {
    if sd == 0.0 {
        return g(mean);
    }
    let (lo, hi) = (mean - TAIL_SDS * sd, mean + TAIL_SDS * sd);
    let active: Vec<f64> = kinks.iter().copied().filter(|k| *k > lo && *k < hi).collect();
    if active.is_empty() {
        let mut prev = GaussHermite::cached(32).expect_normal(&g, mean, sd);
        for n in [64, 128, 256] {
            let next = GaussHermite::cached(n).expect_normal(&g, mean, sd);
            if (next - prev).abs() < 1e-10 {
                return next;
            }
            prev = next;
        }
    }
    piecewise_normal_expectation(&g, mean, sd, &active)
}

fn piecewise_normal_expectation(g: &impl Fn(f64) -> f64, mean: f64, sd: f64, kinks: &[f64]) -> f64 {
    let mut cuts = vec![mean - TAIL_SDS * sd];
    let mut sorted = kinks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite kinks"));
    cuts.extend(sorted);
    cuts.push(mean + TAIL_SDS * sd);
    let rule = GaussLegendre::cached(24);
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    let density = |z: f64| {
        let u = (z - mean) / sd;
        norm * (-0.5 * u * u).exp()
    };
    cuts.windows(2)
        .map(|w| {
            let panels = ((w[1] - w[0]) / (0.5 * sd)).ceil().max(1.0) as usize;
            rule.integrate_composite(|z| g(z) * density(z), w[0], w[1], panels)
        })
        .sum()
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}
