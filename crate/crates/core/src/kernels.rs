//! Ornstein–Uhlenbeck family `P_θ`, `θ ∈ [1/2, 1]`, its sup-kernel with
//! respect to `μ₀ = N(0, 1)`, and the numerical checks built on it.
//!
//! `P_θ f(x) = E f(m_θ(x) + √(1 − e^{−2θ}) Z)` with `m_θ(x) = e^{−θ}x`
//! ([`MeanMode::OuConsistent`], the time-1 law of `dX = −θX dt + √(2θ) dW`) or
//! `m_θ(x) = e^{θ}x` ([`MeanMode::AsPrinted`]). Only the first mode leaves
//! `μ₀` invariant.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, GexpError, Result};
use crate::gheat::{solve_from, DriftStencil, Grid1D, PdeKind, PDE_TOLERANCE};
use crate::model::{Drift, TestFunction, VolatilityBand};
use crate::quad::{gaussian_expectation, GaussLegendre};

/// Truncation radius for integrals against the unbounded sup-kernel.
pub const KERNEL_TRUNCATION: f64 = 8.0;

/// Slack of the sup-kernel dominance check.
pub const DOMINANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MeanMode {
    AsPrinted,
    #[default]
    OuConsistent,
}

impl MeanMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "as-printed" | "printed" => Ok(Self::AsPrinted),
            "ou-consistent" | "ou" => Ok(Self::OuConsistent),
            _ => Err(GexpError::Unknown { what: "mean mode", id: s.to_string() }),
        }
    }

    /// Coefficient `c_θ` in `m_θ(x) = c_θ x`.
    pub fn mean_factor(self, theta: f64) -> f64 {
        match self {
            Self::AsPrinted => theta.exp(),
            Self::OuConsistent => (-theta).exp(),
        }
    }
}

fn kernel_variance(theta: f64) -> f64 {
    -(-2.0 * theta).exp_m1()
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(invalid("theta", format!("must lie in [1/2, 1], got {theta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuFamily {
    pub thetas: Vec<f64>,
    pub mean_mode: MeanMode,
}

impl OuFamily {
    /// `n` equally spaced values of `θ` on `[1/2, 1]`.
    pub fn interval(n: usize, mean_mode: MeanMode) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "need at least two sample points"));
        }
        let thetas = (0..n).map(|i| 0.5 + 0.5 * i as f64 / (n - 1) as f64).collect();
        Ok(Self { thetas, mean_mode })
    }

    /// `θ ∈ {1/2, 1}`.
    pub fn pair(mean_mode: MeanMode) -> Self {
        Self { thetas: vec![0.5, 1.0], mean_mode }
    }

    /// `P̄f(x) = max_θ P_θ f(x)`.
    pub fn pbar(&self, payoff: &TestFunction, x: f64) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for &t in &self.thetas {
            best = best.max(ou_semigroup(t, payoff, x, self.mean_mode)?);
        }
        Ok(best)
    }

    /// `Ψ(x, y) = max_θ α c_θ² |x−y|² / (2(α−1)(1 − e^{−2θ}))`, the Gaussian
    /// Harnack exponent of each member maximized over the family.
    pub fn psi(&self, alpha: f64, x: f64, y: f64) -> Result<f64> {
        if !(alpha > 1.0) {
            return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
        }
        let d2 = (x - y).powi(2);
        Ok(self
            .thetas
            .iter()
            .map(|&t| {
                let c = self.mean_mode.mean_factor(t);
                alpha * c * c * d2 / (2.0 * (alpha - 1.0) * kernel_variance(t))
            })
            .fold(0.0, f64::max))
    }
}

/// `P_θ f(x)` by Gaussian quadrature.
pub fn ou_semigroup(theta: f64, payoff: &TestFunction, x: f64, mean_mode: MeanMode) -> Result<f64> {
    check_theta(theta)?;
    let mean = mean_mode.mean_factor(theta) * x;
    Ok(gaussian_expectation(|z| payoff.eval(z), mean, kernel_variance(theta).sqrt(), payoff.kinks()))
}

/// Lebesgue density `p_θ(x, z)` of `P_θ`.
pub fn p_theta(theta: f64, x: f64, z: f64, mean_mode: MeanMode) -> f64 {
    let s = kernel_variance(theta);
    let m = mean_mode.mean_factor(theta) * x;
    (-(z - m).powi(2) / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
}

/// Density of `P_θ(x, ·)` with respect to `μ₀`.
pub fn kernel_ratio(theta: f64, x: f64, z: f64, mean_mode: MeanMode) -> f64 {
    let s = kernel_variance(theta);
    let m = mean_mode.mean_factor(theta) * x;
    (z * z / 2.0 - (z - m).powi(2) / (2.0 * s)).exp() / s.sqrt()
}

/// Sup-kernel `e^{z²/2} / √(1 − e^{−1})`; it does not depend on `x`.
pub fn sup_kernel_ex34(_x: f64, z: f64) -> f64 {
    (z * z / 2.0).exp() / (-(-1.0f64).exp_m1()).sqrt()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub theta: f64,
    pub x: f64,
    pub z: f64,
    /// `kernel_ratio / sup_kernel`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub mean_mode: MeanMode,
    pub checked: usize,
    pub violations: usize,
    pub worst: GridPoint,
}

/// Checks `kernel_ratio(θ, x, z) ≤ sup_kernel(x, z) (1 + 1e−12)` on a grid.
pub fn dominance_check(family: &OuFamily, xs: &[f64], zs: &[f64]) -> DominanceReport {
    let mut worst = GridPoint { theta: f64::NAN, x: f64::NAN, z: f64::NAN, ratio: f64::NEG_INFINITY };
    let (mut checked, mut violations) = (0, 0);
    for &theta in &family.thetas {
        for &x in xs {
            for &z in zs {
                let ratio = kernel_ratio(theta, x, z, family.mean_mode) / sup_kernel_ex34(x, z);
                checked += 1;
                if ratio > 1.0 + DOMINANCE_SLACK {
                    violations += 1;
                }
                if ratio > worst.ratio {
                    worst = GridPoint { theta, x, z, ratio };
                }
            }
        }
    }
    DominanceReport { mean_mode: family.mean_mode, checked, violations, worst }
}

/// The stated grid: 11 values of `θ` on `[1/2, 1]`, `x ∈ [−2, 2]`, `z ∈ [−4, 4]`.
pub fn default_dominance_check(mean_mode: MeanMode) -> DominanceReport {
    let family = OuFamily::interval(11, mean_mode).expect("valid family");
    dominance_check(&family, &linspace(-2.0, 2.0, 41), &linspace(-4.0, 4.0, 81))
}

fn e0(g: impl Fn(f64) -> f64, kinks: &[f64]) -> f64 {
    gaussian_expectation(g, 0.0, 1.0, kinks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiInvariance {
    pub payoff: String,
    /// `E₀[P̄f]`
    pub lhs: f64,
    /// `2 E₀[f]`
    pub rhs: f64,
    pub gap: f64,
}

/// `E₀[max_θ P_θ f] − 2 E₀[f]` for the two-member family, by nested quadrature.
pub fn quasi_invariance_check(family: &OuFamily, payoff: &TestFunction) -> Result<QuasiInvariance> {
    payoff.require_nonnegative()?;
    for &t in &family.thetas {
        check_theta(t)?;
    }
    let lhs = e0(|x| family.pbar(payoff, x).unwrap_or(f64::NAN), &[]);
    let rhs = family.thetas.len() as f64 * e0(|z| payoff.eval(z), payoff.kinks());
    Ok(QuasiInvariance { payoff: payoff.id().to_string(), lhs, rhs, gap: lhs - rhs })
}

/// `|E₀[P_θ f] − E₀[f]|`.
pub fn member_invariance_gap(theta: f64, payoff: &TestFunction, mean_mode: MeanMode) -> Result<f64> {
    check_theta(theta)?;
    let outer = e0(|x| ou_semigroup(theta, payoff, x, mean_mode).unwrap_or(f64::NAN), &[]);
    Ok((outer - e0(|z| payoff.eval(z), payoff.kinks())).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
    pub truncation: f64,
    /// `∫_{−Z}^{Z} p(x,z) p(y,z) μ₀(dz)`
    pub lhs: f64,
    pub psi: f64,
    pub margin: f64,
}

/// `∫_{−Z}^{Z} p(x,z) p(y,z) μ₀(dz) − e^{−Ψ(x,y)}` for the sup-kernel.
pub fn kernel_lower_bound_check(family: &OuFamily, x: f64, y: f64, alpha: f64) -> Result<LowerBound> {
    let psi = family.psi(alpha, x, y)?;
    let z_max = KERNEL_TRUNCATION;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let lhs = GaussLegendre::cached(24).integrate_composite(
        |z| sup_kernel_ex34(x, z) * sup_kernel_ex34(y, z) * phi(z),
        -z_max,
        z_max,
        64,
    );
    Ok(LowerBound { x, y, alpha, truncation: z_max, lhs, psi, margin: lhs - (-psi).exp() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ex38Row {
    pub x: f64,
    pub y: f64,
    /// `p_{1/2}(x,y) + p_1(x,y)`
    pub lhs: f64,
    /// The claimed product-form bound.
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ex38Region {
    pub x: f64,
    pub violations: usize,
    pub y_lo: Option<f64>,
    pub y_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ex38Report {
    pub mean_mode: MeanMode,
    pub nx: usize,
    pub ny: usize,
    pub violations: usize,
    /// Grid points where `p_{1/2} + p_1 < max(p_{1/2}, p_1)`.
    pub p_sum_violations: usize,
    pub origin: Ex38Row,
    pub region: Vec<Ex38Region>,
    pub rows: Vec<Ex38Row>,
}

/// `(2π(1 − e^{−1}))^{−1/2} exp{A + B}`, with `A` and `B` the exponents of
/// the two member densities.
pub fn ex38_rhs(x: f64, y: f64, mean_mode: MeanMode) -> f64 {
    let (s_half, s_one) = (kernel_variance(0.5), kernel_variance(1.0));
    let a = -(y - mean_mode.mean_factor(0.5) * x).powi(2) / (2.0 * s_half);
    let b = -(y - mean_mode.mean_factor(1.0) * x).powi(2) / (2.0 * s_one);
    (a + b).exp() / (2.0 * PI * s_half).sqrt()
}

pub fn ex38_row(x: f64, y: f64, mean_mode: MeanMode) -> Ex38Row {
    let lhs = p_theta(0.5, x, y, mean_mode) + p_theta(1.0, x, y, mean_mode);
    let rhs = ex38_rhs(x, y, mean_mode);
    Ex38Row { x, y, lhs, rhs, violated: lhs > rhs }
}

/// Evaluates the claimed density bound on `x ∈ [−2, 2]`, `y ∈ [−6, 6]`.
pub fn ex38_probe(nx: usize, ny: usize, mean_mode: MeanMode) -> Result<Ex38Report> {
    if nx < 2 || ny < 2 {
        return Err(invalid("grid", "need at least two points per axis"));
    }
    let (xs, ys) = (linspace(-2.0, 2.0, nx), linspace(-6.0, 6.0, ny));
    let mut rows = Vec::with_capacity(nx * ny);
    let mut region = Vec::with_capacity(nx);
    let mut p_sum_violations = 0;
    for &x in &xs {
        let mut r = Ex38Region { x, violations: 0, y_lo: None, y_hi: None };
        for &y in &ys {
            let row = ex38_row(x, y, mean_mode);
            let (a, b) = (p_theta(0.5, x, y, mean_mode), p_theta(1.0, x, y, mean_mode));
            if a + b < a.max(b) {
                p_sum_violations += 1;
            }
            if row.violated {
                r.violations += 1;
                r.y_lo = Some(r.y_lo.map_or(y, |v: f64| v.min(y)));
                r.y_hi = Some(r.y_hi.map_or(y, |v: f64| v.max(y)));
            }
            rows.push(row);
        }
        region.push(r);
    }
    Ok(Ex38Report {
        mean_mode,
        nx,
        ny,
        violations: rows.iter().filter(|r| r.violated).count(),
        p_sum_violations,
        origin: ex38_row(0.0, 0.0, mean_mode),
        region,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupKernelRow {
    pub payoff: String,
    pub x: f64,
    /// `max_θ P_θ f(x)`
    pub pbar: f64,
    /// `∫_{−Z}^{Z} p(x,z) f(z) μ₀(dz)`
    pub dominating: f64,
    pub pass: bool,
}

/// `max_θ P_θ f(x) ≤ E₀[p(x,·) f]` with the sup-kernel, integrals truncated at `Z`.
pub fn sup_kernel_definition_check(family: &OuFamily, payoff: &TestFunction, x: f64) -> Result<SupKernelRow> {
    payoff.require_nonnegative()?;
    let pbar = family.pbar(payoff, x)?;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let z_max = KERNEL_TRUNCATION;
    let dominating = GaussLegendre::cached(24).integrate_composite(
        |z| sup_kernel_ex34(x, z) * payoff.eval(z) * phi(z),
        -z_max,
        z_max,
        64,
    );
    Ok(SupKernelRow { payoff: payoff.id().to_string(), x, pbar, dominating, pass: pbar <= dominating * (1.0 + 1e-10) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackApplication {
    pub payoff: String,
    pub x: f64,
    pub alpha: f64,
    /// `(P̄ f(x))^α / E₀[f^α]`, the left side for the normalized payoff.
    pub lhs: f64,
    /// `1 / E₀[e^{−Ψ(x,·)}]`
    pub rhs: f64,
    pub pass: bool,
}

/// `Φ(P̄f(x)) ≤ 1 / E₀[e^{−Ψ(x,·)}]` for `Φ(r) = r^α` and `f` normalized so
/// that `E₀[f^α] = 1`.
pub fn harnack_application_check(
    family: &OuFamily,
    payoff: &TestFunction,
    x: f64,
    alpha: f64,
) -> Result<HarnackApplication> {
    payoff.require_nonnegative()?;
    let norm = e0(|z| payoff.eval(z).powf(alpha), payoff.kinks());
    if !(norm > 0.0) {
        return Err(invalid("payoff", "E₀[f^α] must be positive"));
    }
    let lhs = family.pbar(payoff, x)?.powf(alpha) / norm;
    let c = family.psi(alpha, 0.0, 1.0)?;
    let rhs = 1.0 / e0(|y| (-c * (x - y).powi(2)).exp(), &[]);
    Ok(HarnackApplication { payoff: payoff.id().to_string(), x, alpha, lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-10) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GouStationarity {
    pub payoff: String,
    pub alpha: f64,
    /// `‖P̄_{t+1}φ − P̄_tφ‖_∞` over the grid, `t = 0, 1, …`
    pub increments: Vec<f64>,
    /// `max − min` of `P̄_tφ` on `|y| ≤ 2` at the last time.
    pub final_spread: f64,
    pub limit: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// Marches `dY = −αY dt + dB` forward in unit time steps and tracks how fast
/// `P̄_tφ` settles to a constant.
pub fn gou_stationarity(
    alpha: f64,
    band: &VolatilityBand,
    payoff: &TestFunction,
    grid: &Grid1D,
    t_max: usize,
) -> Result<GouStationarity> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if t_max == 0 {
        return Err(invalid("t_max", "must be positive"));
    }
    let drift = if alpha == 1.0 { Drift::ou() } else { Drift::custom(format!("ou:{alpha}"), move |x: f64| -alpha * x) };
    let kind = PdeKind::TimeDriven(drift);
    let nodes = grid.nodes();
    let mut u: Vec<f64> = nodes.iter().map(|x| payoff.eval(*x)).collect();
    let mut increments = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        let next = solve_from(&kind, u.clone(), band, 1.0, grid, DriftStencil::default())?.values;
        increments.push(next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        u = next;
    }
    let inner: Vec<f64> = nodes.iter().zip(&u).filter(|(x, _)| x.abs() <= 2.0).map(|(_, v)| *v).collect();
    let (lo, hi) = inner.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let limit = 0.5 * (lo + hi);
    let monotone = increments.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    let final_spread = hi - lo;
    Ok(GouStationarity {
        payoff: payoff.id().to_string(),
        alpha,
        increments,
        final_spread,
        limit,
        monotone,
        pass: monotone && final_spread <= PDE_TOLERANCE * limit.abs().max(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub mean_mode: MeanMode,
    pub truncation: f64,
    pub dominance: DominanceReport,
    pub quasi_invariance: Vec<QuasiInvariance>,
    /// `(payoff, θ, |E₀[P_θ f] − E₀[f]|)`
    pub member_invariance: Vec<(String, f64, f64)>,
    pub lower_bound: Vec<LowerBound>,
    pub sup_kernel: Vec<SupKernelRow>,
    pub harnack_application: Vec<HarnackApplication>,
    pub ex38: Ex38Report,
}

impl KernelReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dominance.violations > 0 {
            out.push(format!("dominance: {} violations", self.dominance.violations));
        }
        for q in &self.quasi_invariance {
            if q.gap > 1e-6 {
                out.push(format!("quasi-invariance {}: gap {}", q.payoff, q.gap));
            }
        }
        if self.mean_mode == MeanMode::OuConsistent {
            for (p, t, g) in &self.member_invariance {
                if *g > 1e-8 {
                    out.push(format!("invariance {p} theta={t}: {g}"));
                }
            }
            for h in &self.harnack_application {
                if !h.pass {
                    out.push(format!("harnack application {} x={}: {} > {}", h.payoff, h.x, h.lhs, h.rhs));
                }
            }
        }
        for l in &self.lower_bound {
            if l.margin < 0.0 {
                out.push(format!("lower bound ({}, {}): margin {}", l.x, l.y, l.margin));
            }
        }
        for s in &self.sup_kernel {
            if !s.pass {
                out.push(format!("sup-kernel {} x={}: {} > {}", s.payoff, s.x, s.pbar, s.dominating));
            }
        }
        if self.ex38.p_sum_violations > 0 {
            out.push(format!("p_sum: {} violations", self.ex38.p_sum_violations));
        }
        out
    }
}

/// Runs every kernel check on the test-function catalog.
pub fn kernel_suite(mean_mode: MeanMode, alpha: f64, ex38_grid: (usize, usize)) -> Result<KernelReport> {
    let pair = OuFamily::pair(mean_mode);
    let catalog = TestFunction::catalog();
    let mut quasi_invariance = Vec::new();
    let mut member_invariance = Vec::new();
    let mut sup_kernel = Vec::new();
    let mut harnack_application = Vec::new();
    for f in &catalog {
        quasi_invariance.push(quasi_invariance_check(&pair, f)?);
        for &t in &pair.thetas {
            member_invariance.push((f.id().to_string(), t, member_invariance_gap(t, f, mean_mode)?));
        }
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            sup_kernel.push(sup_kernel_definition_check(&pair, f, x)?);
            harnack_application.push(harnack_application_check(&pair, f, x, alpha)?);
        }
    }
    let mut lower_bound = Vec::new();
    for x in [-1.0, 0.0, 1.0] {
        for y in [-1.0, 0.0, 1.0] {
            lower_bound.push(kernel_lower_bound_check(&pair, x, y, alpha)?);
        }
    }
    Ok(KernelReport {
        mean_mode,
        truncation: KERNEL_TRUNCATION,
        dominance: default_dominance_check(mean_mode),
        quasi_invariance,
        member_invariance,
        lower_bound,
        sup_kernel,
        harnack_application,
        ex38: ex38_probe(ex38_grid.0, ex38_grid.1, mean_mode)?,
    })
}
