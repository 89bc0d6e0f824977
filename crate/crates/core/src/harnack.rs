//! Harnack and shift-Harnack constants, and certificate verification on the
//! PDE and Monte Carlo backends.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gheat::{pde_values_at, solve, DtPolicy, Grid1D, PdeKind, PADDING_SDS, PDE_TOLERANCE};
use crate::model::{Convexity, GsdeSpec, McConfig, Scenario, SdeKind, TestFunction, VolatilityBand};
use crate::simulate::pbar_mc;

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    Ok(())
}

fn check_k_positive(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(invalid("K", format!("must be positive, got {k}")));
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("horizon", format!("must be positive, got {t}")));
    }
    Ok(())
}

/// `K σ̄⁴ (1 − e^{−2σ̲²KT}) / (σ̲⁶ (1 − e^{−2σ̄²KT})²)`, the factor shared by
/// the Novikov, moment and Harnack exponents.
fn band_factor(k: f64, band: &VolatilityBand, horizon: f64) -> f64 {
    let (lo2, hi2) = (band.var_lo(), band.var_hi());
    let a = -(-2.0 * lo2 * k * horizon).exp_m1();
    let b = -(-2.0 * hi2 * k * horizon).exp_m1();
    k * hi2 * hi2 * a / (lo2 * lo2 * lo2 * b * b)
}

/// Harnack exponent `p K σ̄⁴ (1 − e^{−2σ̲²KT}) |x−y|² / ((p−1)² σ̲⁶ (1 − e^{−2σ̄²KT})²)`.
pub fn harnack_exponent(p: f64, k: f64, band: &VolatilityBand, horizon: f64, dist: f64) -> Result<f64> {
    check_p(p)?;
    check_k_positive(k)?;
    check_horizon(horizon)?;
    Ok(p * band_factor(k, band, horizon) * dist * dist / ((p - 1.0) * (p - 1.0)))
}

/// The exponent that Hölder's inequality actually delivers from the moment
/// bound on `M_T^{p/(p−1)}`: the moment bound raised to the power `p − 1`.
/// It equals [`harnack_exponent`] at `p = 2` and exceeds it for `p > 2`.
pub fn holder_harnack_exponent(p: f64, k: f64, band: &VolatilityBand, horizon: f64, dist: f64) -> Result<f64> {
    Ok((p - 1.0) * harnack_exponent(p, k, band, horizon, dist)?)
}

/// Log of the pathwise bound on `exp ∫₀^T |u_s|² d⟨B⟩_s`:
/// `2 K σ̄⁴ (1 − e^{−2σ̲²KT}) |x−y|² / (σ̲⁶ (1 − e^{−2σ̄²KT})²)`.
pub fn novikov_log_bound(k: f64, band: &VolatilityBand, horizon: f64, dist: f64) -> Result<f64> {
    check_k_positive(k)?;
    check_horizon(horizon)?;
    Ok(2.0 * band_factor(k, band, horizon) * dist * dist)
}

/// Log of the bound on `Ē[M_T^{p/(p−1)}]`; numerically the Harnack exponent.
pub fn moment_log_bound(p: f64, k: f64, band: &VolatilityBand, horizon: f64, dist: f64) -> Result<f64> {
    harnack_exponent(p, k, band, horizon, dist)
}

/// Shift-Harnack exponent `p v² / (2σ̲²(p−1)) · (1/T + K + K²T/3)`.
pub fn shift_harnack_exponent(p: f64, k: f64, sigma_lo: f64, horizon: f64, v: f64) -> Result<f64> {
    check_p(p)?;
    check_horizon(horizon)?;
    if !(sigma_lo > 0.0) {
        return Err(invalid("sigma_lo", "must be positive"));
    }
    if !(k >= 0.0) {
        return Err(invalid("K", "must be nonnegative"));
    }
    let s2 = sigma_lo * sigma_lo;
    Ok(p * v * v / (2.0 * s2 * (p - 1.0)) * (1.0 / horizon + k + k * k * horizon / 3.0))
}

/// Which closed form supplies the Harnack exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum HarnackConstant {
    /// [`harnack_exponent`]
    #[default]
    Stated,
    /// [`holder_harnack_exponent`]
    Holder,
}

impl HarnackConstant {
    pub fn exponent(self, p: f64, k: f64, band: &VolatilityBand, horizon: f64, dist: f64) -> Result<f64> {
        match self {
            Self::Stated => harnack_exponent(p, k, band, horizon, dist),
            Self::Holder => holder_harnack_exponent(p, k, band, horizon, dist),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    Harnack,
    ShiftHarnack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Pde,
    Mc,
}

/// Value backend for `P̄_T`.
#[derive(Debug, Clone)]
pub enum Backend {
    Pde(Grid1D),
    Mc { scenarios: Vec<Scenario>, mc: McConfig },
}

impl Backend {
    pub fn method(&self) -> Method {
        match self {
            Self::Pde(_) => Method::Pde,
            Self::Mc { .. } => Method::Mc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackCertificate {
    pub kind: CertificateKind,
    pub drift: String,
    pub k: f64,
    pub band: (f64, f64),
    pub p: f64,
    pub horizon: f64,
    pub x: f64,
    pub y: Option<f64>,
    pub v: Option<f64>,
    pub payoff: String,
    pub method: Method,
    pub lhs: f64,
    pub rhs: f64,
    pub exponent: f64,
    pub tolerance_budget: f64,
    /// `lhs / rhs − 1`; positive values are consumed from the budget.
    pub excess: f64,
    pub pass: bool,
}

/// One backend value with its standard error (zero for the PDE).
#[derive(Debug, Clone, Copy)]
struct Value {
    mean: f64,
    std_error: f64,
}

/// `P̄_T g` at the requested points from a single solve or ensemble per point.
fn values_at(spec: &GsdeSpec, g: &TestFunction, band: &VolatilityBand, horizon: f64, xs: &[f64], backend: &Backend) -> Result<Vec<Value>> {
    match backend {
        Backend::Pde(grid) => Ok(pde_values_at(&PdeKind::from_spec(spec), g, band, horizon, grid, xs)?
            .into_iter()
            .map(|mean| Value { mean, std_error: 0.0 })
            .collect()),
        Backend::Mc { scenarios, mc } => xs
            .iter()
            .map(|&x| {
                let est = pbar_mc(spec, g, x, horizon, scenarios, mc)?;
                let a = est.argmax();
                Ok(Value { mean: a.mean, std_error: a.std_error })
            })
            .collect(),
    }
}

fn budget(backend: &Backend, lhs_rel_se: f64, rhs_rel_se: f64) -> f64 {
    match backend {
        Backend::Pde(_) => PDE_TOLERANCE,
        Backend::Mc { .. } => 3.0 * (lhs_rel_se * lhs_rel_se + rhs_rel_se * rhs_rel_se).sqrt(),
    }
}

fn rel(v: Value) -> f64 {
    if v.mean > 0.0 {
        v.std_error / v.mean
    } else {
        0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn certificate(
    kind: CertificateKind,
    spec: &GsdeSpec,
    band: &VolatilityBand,
    p: f64,
    horizon: f64,
    (x, y, v): (f64, Option<f64>, Option<f64>),
    payoff: &TestFunction,
    backend: &Backend,
    lhs_value: Value,
    rhs_value: Value,
    exponent: f64,
) -> HarnackCertificate {
    let lhs = lhs_value.mean.powf(p);
    let rhs = rhs_value.mean * exponent.exp();
    let tolerance_budget = budget(backend, p * rel(lhs_value), rel(rhs_value));
    let pass = lhs <= rhs * (1.0 + tolerance_budget);
    HarnackCertificate {
        kind,
        drift: spec.drift.id().to_string(),
        k: spec.lipschitz_k,
        band: (band.sigma_lo(), band.sigma_hi()),
        p,
        horizon,
        x,
        y,
        v,
        payoff: payoff.id().to_string(),
        method: backend.method(),
        lhs,
        rhs,
        exponent,
        tolerance_budget,
        excess: if rhs > 0.0 { lhs / rhs - 1.0 } else { f64::INFINITY },
        pass,
    }
}

/// Certificates of `(P̄_T f)^p(y) ≤ P̄_T f^p(x) e^{exponent}` for every `(x, y)` pair,
/// sharing one solve of `f` and one of `f^p`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_certificates(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    band: &VolatilityBand,
    horizon: f64,
    p: f64,
    pairs: &[(f64, f64)],
    backend: &Backend,
    constant: HarnackConstant,
) -> Result<Vec<HarnackCertificate>> {
    if spec.kind != SdeKind::QvDriven {
        return Err(invalid("kind", "the Harnack inequality is stated for the quadratic-variation-driven equation"));
    }
    check_p(p)?;
    payoff.require_nonnegative()?;
    let fp = payoff.powf(p)?;
    let ys: Vec<f64> = pairs.iter().map(|(_, y)| *y).collect();
    let xs: Vec<f64> = pairs.iter().map(|(x, _)| *x).collect();
    let at_y = values_at(spec, payoff, band, horizon, &ys, backend)?;
    let at_x = values_at(spec, &fp, band, horizon, &xs, backend)?;
    pairs
        .iter()
        .zip(at_y.into_iter().zip(at_x))
        .map(|(&(x, y), (vy, vx))| {
            let exponent = constant.exponent(p, spec.lipschitz_k, band, horizon, (x - y).abs())?;
            Ok(certificate(CertificateKind::Harnack, spec, band, p, horizon, (x, Some(y), None), payoff, backend, vy, vx, exponent))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn verify_harnack(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    x: f64,
    y: f64,
    p: f64,
    horizon: f64,
    band: &VolatilityBand,
    backend: &Backend,
) -> Result<HarnackCertificate> {
    Ok(harnack_certificates(spec, payoff, band, horizon, p, &[(x, y)], backend, HarnackConstant::Stated)?.remove(0))
}

/// Certificates of `(P̄_T f(x))^p ≤ P̄_T[f^p(v + ·)](x) e^{exponent}` for each shift `v`.
#[allow(clippy::too_many_arguments)]
pub fn shift_harnack_certificates(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    band: &VolatilityBand,
    horizon: f64,
    p: f64,
    x: f64,
    shifts: &[f64],
    backend: &Backend,
) -> Result<Vec<HarnackCertificate>> {
    if spec.kind != SdeKind::TimeDriven {
        return Err(invalid("kind", "the shift Harnack inequality is stated for the time-driven equation"));
    }
    check_p(p)?;
    payoff.require_nonnegative()?;
    let base = values_at(spec, payoff, band, horizon, &[x], backend)?[0];
    let fp = payoff.powf(p)?;
    shifts
        .iter()
        .map(|&v| {
            let shifted = values_at(spec, &fp.shifted(v), band, horizon, &[x], backend)?[0];
            let exponent = shift_harnack_exponent(p, spec.lipschitz_k, band.sigma_lo(), horizon, v)?;
            Ok(certificate(CertificateKind::ShiftHarnack, spec, band, p, horizon, (x, None, Some(v)), payoff, backend, base, shifted, exponent))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn verify_shift_harnack(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    x: f64,
    v: f64,
    p: f64,
    horizon: f64,
    band: &VolatilityBand,
    backend: &Backend,
) -> Result<HarnackCertificate> {
    Ok(shift_harnack_certificates(spec, payoff, band, horizon, p, x, &[v], backend)?.remove(0))
}

/// `(0, ±d)` and `(±d, 0)` for `d` on an `n`-point grid of `[0, max_dist]`.
pub fn symmetric_pairs(n: usize, max_dist: f64) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        let d = if n == 1 { 0.0 } else { max_dist * i as f64 / (n - 1) as f64 };
        pairs.extend([(0.0, d), (d, 0.0), (0.0, -d), (-d, 0.0)]);
    }
    pairs
}

/// Sweep over drifts, bands, horizons, exponents `p` and payoffs.
#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub drifts: Vec<String>,
    pub bands: Vec<(f64, f64)>,
    pub horizons: Vec<f64>,
    pub ps: Vec<f64>,
    pub payoffs: Vec<String>,
    pub points: usize,
    pub max_dist: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            drifts: vec!["ou".into(), "tanh:1".into()],
            bands: vec![(1.0, 1.0), (0.5, 1.0)],
            horizons: vec![0.5, 1.0],
            ps: vec![1.5, 2.0, 4.0],
            payoffs: TestFunction::catalog().iter().map(|f| f.id().to_string()).collect(),
            points: 11,
            max_dist: 1.0,
        }
    }
}

/// `(drift, band, horizon, p, payoff)`
type SweepTuple = (String, (f64, f64), f64, f64, String);

impl Sweep {
    fn tuples(&self) -> Vec<SweepTuple> {
        let mut out = Vec::new();
        for d in &self.drifts {
            for b in &self.bands {
                for t in &self.horizons {
                    for p in &self.ps {
                        for f in &self.payoffs {
                            out.push((d.clone(), *b, *t, *p, f.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// Harnack certificates on the PDE backend; tuples run in parallel and are
    /// returned in sweep order.
    pub fn harnack(&self, grid: &Grid1D, constant: HarnackConstant) -> Result<Vec<HarnackCertificate>> {
        let pairs = symmetric_pairs(self.points, self.max_dist);
        let nested = self
            .tuples()
            .into_par_iter()
            .map(|(d, (lo, hi), t, p, f)| {
                let spec = GsdeSpec::from_catalog(&d, SdeKind::QvDriven)?;
                let band = VolatilityBand::new(lo, hi)?;
                harnack_certificates(&spec, &TestFunction::parse(&f)?, &band, t, p, &pairs, &Backend::Pde(*grid), constant)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(nested.into_iter().flatten().collect())
    }

    /// Shift-Harnack certificates at `x = 0` for shifts on the distance grid.
    pub fn shift_harnack(&self, grid: &Grid1D) -> Result<Vec<HarnackCertificate>> {
        let shifts: Vec<f64> = (0..self.points)
            .map(|i| if self.points == 1 { 0.0 } else { self.max_dist * i as f64 / (self.points - 1) as f64 })
            .collect();
        let nested = self
            .tuples()
            .into_par_iter()
            .map(|(d, (lo, hi), t, p, f)| {
                let spec = GsdeSpec::from_catalog(&d, SdeKind::TimeDriven)?;
                let band = VolatilityBand::new(lo, hi)?;
                shift_harnack_certificates(&spec, &TestFunction::parse(&f)?, &band, t, p, 0.0, &shifts, &Backend::Pde(*grid))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(nested.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FellerProbe {
    pub nx: Vec<usize>,
    /// Largest jump of `y ↦ P̄_T f(y)` between adjacent nodes in the usable zone.
    pub max_adjacent_diff: Vec<f64>,
    pub decreasing: bool,
}

/// Continuity of `y ↦ P̄_T 1_{[0,∞)}(y)` under grid refinement.
pub fn strong_feller_probe(spec: &GsdeSpec, band: &VolatilityBand, horizon: f64, nxs: &[usize]) -> Result<FellerProbe> {
    let step = TestFunction::new("step", |x: f64| if x >= 0.0 { 1.0 } else { 0.0 }, true, Convexity::Neither, 1.0)
        .with_kinks(vec![0.0]);
    let mut diffs = Vec::with_capacity(nxs.len());
    for &nx in nxs {
        let grid = Grid1D::new(-10.0, 10.0, nx, DtPolicy::AutoCfl(0.9))?;
        let sol = solve(&PdeKind::from_spec(spec), &step, band, horizon, &grid)?;
        let pad = PADDING_SDS * band.sigma_hi() * horizon.sqrt();
        let mut worst = 0.0f64;
        for j in 1..nx {
            let (a, b) = (grid.node(j - 1), grid.node(j));
            if a >= grid.x_min + pad && b <= grid.x_max - pad {
                worst = worst.max((sol.values[j] - sol.values[j - 1]).abs());
            }
        }
        diffs.push(worst);
    }
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(FellerProbe { nx: nxs.to_vec(), max_adjacent_diff: diffs, decreasing })
}
