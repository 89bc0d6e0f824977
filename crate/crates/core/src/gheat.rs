//! Explicit monotone finite-difference solver for the G-heat equation and the
//! drifted HJB equations whose solutions are `P̄_T f`.
//!
//! The solution is marched forward from `u(0, ·) = f` to `u(T, ·)`:
//!
//! * `GHeat`:      `u_t = G(u_xx)`
//! * `QvDriven`:   `u_t = sup_{v ∈ [σ̲², σ̄²]} v (b u_x + ½ u_xx)`
//! * `TimeDriven`: `u_t = b u_x + G(u_xx)`
//!
//! with `G(a) = ½(σ̄² a⁺ − σ̲² a⁻)`. Every update is a sup over `v` of
//! nonnegative-weight averages, so the discrete operator is monotone,
//! constant-preserving, subadditive and positively homogeneous.

use serde::Serialize;

use crate::error::{invalid, GexpError, Result};
use crate::model::{Drift, GsdeSpec, SdeKind, TestFunction, VolatilityBand};

/// Default relative tolerance claimed for PDE values on the default grid.
pub const PDE_TOLERANCE: f64 = 2e-3;

/// Padding, in units of `σ̄ √T`, kept clear of each boundary.
pub const PADDING_SDS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DtPolicy {
    /// `dt = safety × stable limit`, rounded down so the horizon is hit exactly.
    AutoCfl(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt_policy: DtPolicy,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, dt_policy: DtPolicy) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(invalid("grid", format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if nx < 3 {
            return Err(invalid("nx", format!("need at least 3 nodes, got {nx}")));
        }
        match dt_policy {
            DtPolicy::AutoCfl(s) if !(s > 0.0 && s <= 1.0) => {
                return Err(invalid("cfl", format!("safety factor must lie in (0, 1], got {s}")))
            }
            DtPolicy::Fixed(dt) if !(dt > 0.0) => return Err(invalid("dt", format!("must be positive, got {dt}"))),
            _ => {}
        }
        Ok(Self { x_min, x_max, nx, dt_policy })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + self.dx() * j as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.node(j)).collect()
    }

    /// Same spacing on a domain twice as wide about the same center.
    pub fn doubled(&self) -> Self {
        let center = 0.5 * (self.x_min + self.x_max);
        let half = 0.5 * (self.x_max - self.x_min);
        Self { x_min: center - 2.0 * half, x_max: center + 2.0 * half, nx: 2 * (self.nx - 1) + 1, ..*self }
    }

    /// Half the spacing on the same domain.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * (self.nx - 1) + 1, ..*self }
    }
}

impl Default for Grid1D {
    fn default() -> Self {
        Self { x_min: -10.0, x_max: 10.0, nx: 401, dt_policy: DtPolicy::AutoCfl(0.9) }
    }
}

/// Finite-difference stencil for the first-order term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum DriftStencil {
    /// Centered where the centered weights stay nonnegative, upwind elsewhere.
    #[default]
    Hybrid,
    Upwind,
}

#[derive(Debug, Clone)]
pub enum PdeKind {
    GHeat,
    QvDriven(Drift),
    TimeDriven(Drift),
}

impl PdeKind {
    pub fn from_spec(spec: &GsdeSpec) -> Self {
        match spec.kind {
            SdeKind::QvDriven => Self::QvDriven(spec.drift.clone()),
            SdeKind::TimeDriven => Self::TimeDriven(spec.drift.clone()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::GHeat => "gheat".into(),
            Self::QvDriven(d) => format!("qv:{}", d.id()),
            Self::TimeDriven(d) => format!("time:{}", d.id()),
        }
    }

    fn drift(&self) -> Option<&Drift> {
        match self {
            Self::GHeat => None,
            Self::QvDriven(d) | Self::TimeDriven(d) => Some(d),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeMeta {
    pub kind: String,
    pub dt: f64,
    pub steps: usize,
    pub boundary: &'static str,
    pub stencil: DriftStencil,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeSolution {
    pub grid: Grid1D,
    pub horizon: f64,
    pub values: Vec<f64>,
    pub scheme_meta: SchemeMeta,
}

impl PdeSolution {
    /// Linear interpolation of `u(T, ·)` at `x`.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let g = &self.grid;
        if !(x >= g.x_min && x <= g.x_max) {
            return Err(GexpError::BoundaryZone { x, lo: g.x_min, hi: g.x_max });
        }
        let s = (x - g.x_min) / g.dx();
        let j = (s.floor() as usize).min(g.nx - 2);
        let w = s - j as f64;
        if w == 0.0 {
            return Ok(self.values[j]);
        }
        Ok((1.0 - w) * self.values[j] + w * self.values[j + 1])
    }

    /// Rows `(x, u)` for the CSV dump.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(j, u)| (self.grid.node(j), *u))
    }
}

/// `G(a) = ½(σ̄² a⁺ − σ̲² a⁻)`.
#[inline]
pub fn g_operator(a: f64, band: &VolatilityBand) -> f64 {
    0.5 * (band.var_hi() * a.max(0.0) - band.var_lo() * (-a).max(0.0))
}

/// Marches `payoff` forward to `horizon`.
pub fn solve(
    kind: &PdeKind,
    payoff: &TestFunction,
    band: &VolatilityBand,
    horizon: f64,
    grid: &Grid1D,
) -> Result<PdeSolution> {
    let initial: Vec<f64> = grid.nodes().into_iter().map(|x| payoff.eval(x)).collect();
    solve_from(kind, initial, band, horizon, grid, DriftStencil::default())
}

/// Marches arbitrary initial node values forward to `horizon`.
pub fn solve_from(
    kind: &PdeKind,
    initial: Vec<f64>,
    band: &VolatilityBand,
    horizon: f64,
    grid: &Grid1D,
    stencil: DriftStencil,
) -> Result<PdeSolution> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon", format!("must be positive, got {horizon}")));
    }
    if initial.len() != grid.nx {
        return Err(invalid("initial", format!("{} values for {} nodes", initial.len(), grid.nx)));
    }
    if let Some(j) = initial.iter().position(|u| !u.is_finite()) {
        return Err(GexpError::NonFinite { stage: "initial data", step: j });
    }
    let nx = grid.nx;
    let dx = grid.dx();
    let (lo, hi) = (band.var_lo(), band.var_hi());
    let b: Vec<f64> = match kind.drift() {
        Some(d) => grid.nodes().into_iter().map(|x| d.eval(x)).collect(),
        None => vec![0.0; nx],
    };
    if let Some(j) = b.iter().position(|v| !v.is_finite()) {
        return Err(GexpError::NonFinite { stage: "drift", step: j });
    }
    let max_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // stable limit: the diagonal weight 1 - dt * (off-diagonal rates) stays nonnegative
    let limit = match kind {
        PdeKind::QvDriven(_) => dx * dx / (hi * (1.0 + dx * max_b)),
        _ => dx * dx / (hi + dx * max_b),
    };
    let (dt, steps) = match grid.dt_policy {
        DtPolicy::AutoCfl(safety) => {
            let steps = (horizon / (safety * limit)).ceil().max(1.0) as usize;
            (horizon / steps as f64, steps)
        }
        DtPolicy::Fixed(dt) => {
            if dt > limit * (1.0 + 1e-12) {
                return Err(GexpError::CflViolation { dt, limit });
            }
            let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
            (horizon / steps as f64, steps)
        }
    };

    // centered first differences keep nonnegative weights when |b| dx ≤ smallest diffusion rate
    let central_ok = match kind {
        PdeKind::QvDriven(_) => 1.0,
        _ => lo,
    };
    let central: Vec<bool> = b
        .iter()
        .map(|bj| stencil == DriftStencil::Hybrid && bj.abs() * dx <= central_ok)
        .collect();

    let inv_dx = 1.0 / dx;
    let inv_dx2 = inv_dx * inv_dx;
    let mut u = initial;
    let mut next = vec![0.0; nx];
    for step in 0..steps {
        for j in 0..nx {
            let bj = b[j];
            let (d1, d2) = if j == 0 {
                (if bj > 0.0 { (u[1] - u[0]) * inv_dx } else { 0.0 }, 0.0)
            } else if j + 1 == nx {
                (if bj < 0.0 { (u[j] - u[j - 1]) * inv_dx } else { 0.0 }, 0.0)
            } else {
                let d2 = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_dx2;
                let d1 = if central[j] {
                    0.5 * (u[j + 1] - u[j - 1]) * inv_dx
                } else if bj > 0.0 {
                    (u[j + 1] - u[j]) * inv_dx
                } else {
                    (u[j] - u[j - 1]) * inv_dx
                };
                (d1, d2)
            };
            let rate = match kind {
                PdeKind::GHeat => g_operator(d2, band),
                PdeKind::QvDriven(_) => {
                    let q = bj * d1 + 0.5 * d2;
                    // tie q = 0 resolved toward σ̄²; the flux vanishes either way
                    if q >= 0.0 {
                        hi * q
                    } else {
                        lo * q
                    }
                }
                PdeKind::TimeDriven(_) => bj * d1 + g_operator(d2, band),
            };
            next[j] = u[j] + dt * rate;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(GexpError::NonFinite { stage: "pde march", step });
        }
        std::mem::swap(&mut u, &mut next);
    }

    Ok(PdeSolution {
        grid: *grid,
        horizon,
        values: u,
        scheme_meta: SchemeMeta {
            kind: kind.label(),
            dt,
            steps,
            boundary: "neumann-zero-curvature",
            stencil,
        },
    })
}

/// Rejects `x` closer than `6 σ̄ √T` to either boundary.
pub fn check_padding(x: f64, horizon: f64, band: &VolatilityBand, grid: &Grid1D) -> Result<()> {
    let pad = PADDING_SDS * band.sigma_hi() * horizon.sqrt();
    let (lo, hi) = (grid.x_min + pad, grid.x_max - pad);
    if !(x >= lo && x <= hi) {
        return Err(GexpError::BoundaryZone { x, lo, hi });
    }
    Ok(())
}

/// `P̄_T f(x)` from the PDE backend.
pub fn pbar_pde(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    x: f64,
    horizon: f64,
    band: &VolatilityBand,
    grid: &Grid1D,
) -> Result<f64> {
    check_padding(x, horizon, band, grid)?;
    solve(&PdeKind::from_spec(spec), payoff, band, horizon, grid)?.value_at(x)
}

/// PDE values of `kind` at several points from a single solve.
pub fn pde_values_at(
    kind: &PdeKind,
    payoff: &TestFunction,
    band: &VolatilityBand,
    horizon: f64,
    grid: &Grid1D,
    xs: &[f64],
) -> Result<Vec<f64>> {
    for x in xs {
        check_padding(*x, horizon, band, grid)?;
    }
    let sol = solve(kind, payoff, band, horizon, grid)?;
    xs.iter().map(|x| sol.value_at(*x)).collect()
}

/// `|P̄_T f(x)|` change when the domain is doubled at fixed spacing.
pub fn truncation_check(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    x: f64,
    horizon: f64,
    band: &VolatilityBand,
    grid: &Grid1D,
) -> Result<f64> {
    let base = pbar_pde(spec, payoff, x, horizon, band, grid)?;
    let wide = pbar_pde(spec, payoff, x, horizon, band, &grid.doubled())?;
    Ok((base - wide).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Drift, GsdeSpec, SdeKind, TestFunction};

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    /// Simpson rule for E[f(m + s Z)], independent of the library quadrature.
    fn normal_oracle(f: impl Fn(f64) -> f64, m: f64, s: f64) -> f64 {
        let n = 20_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let g = |z: f64| f(m + s * z) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = g(a) + g(b);
        for i in 1..n {
            acc += g(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn g_operator_examples() {
        let b = band(0.5, 1.0);
        assert_eq!(g_operator(2.0, &b), 1.0);
        assert_eq!(g_operator(-2.0, &b), -0.25);
        assert_eq!(g_operator(0.0, &b), 0.0);
    }

    #[test]
    fn constants_are_preserved_exactly() {
        let g = Grid1D::default();
        let c = TestFunction::constant(0.37);
        for kind in [PdeKind::GHeat, PdeKind::QvDriven(Drift::ou()), PdeKind::TimeDriven(Drift::tanh(1.0))] {
            let sol = solve(&kind, &c, &band(0.5, 1.0), 1.0, &g).unwrap();
            assert!(sol.values.iter().all(|u| *u == 0.37), "{}", kind.label());
        }
    }

    #[test]
    fn classical_heat_second_moment() {
        let sol = solve(&PdeKind::GHeat, &TestFunction::clipped_square(400.0), &band(1.0, 1.0), 1.0, &Grid1D::default())
            .unwrap();
        assert!((sol.value_at(0.0).unwrap() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn g_normal_moments() {
        let g = Grid1D::default();
        let f = TestFunction::clipped_square(400.0);
        let up = solve(&PdeKind::GHeat, &f, &band(0.5, 1.0), 1.0, &g).unwrap().value_at(0.0).unwrap();
        let down = solve(&PdeKind::GHeat, &f.negated(), &band(0.5, 1.0), 1.0, &g).unwrap().value_at(0.0).unwrap();
        assert!((up - 1.0).abs() < 1e-2, "{up}");
        assert!((down + 0.25).abs() < 1e-2, "{down}");
    }

    #[test]
    fn classical_reduction_matches_gaussian_oracle() {
        let spec = GsdeSpec::new(Drift::zero(), 0.0, SdeKind::QvDriven).unwrap();
        let f = TestFunction::sigmoid();
        let pde = pbar_pde(&spec, &f, 0.0, 1.0, &band(1.0, 1.0), &Grid1D::default()).unwrap();
        let oracle = normal_oracle(|z| f.eval(z), 0.0, 1.0);
        assert!((pde - oracle).abs() < 1e-3, "{pde} vs {oracle}");

        let ou = GsdeSpec::new(Drift::ou(), 1.0, SdeKind::QvDriven).unwrap();
        let pde = pbar_pde(&ou, &f, 1.0, 1.0, &band(1.0, 1.0), &Grid1D::default()).unwrap();
        let s = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        let oracle = normal_oracle(|z| f.eval(z), (-1.0f64).exp(), s);
        assert!((pde - oracle).abs() < 1e-3 * oracle, "{pde} vs {oracle}");
    }

    #[test]
    fn wider_band_dominates_upper_band() {
        let spec = GsdeSpec::new(Drift::constant(0.5), 0.0, SdeKind::QvDriven).unwrap();
        let f = TestFunction::sigmoid();
        let g = Grid1D::default();
        let wide = solve(&PdeKind::from_spec(&spec), &f, &band(0.5, 1.0), 1.0, &g).unwrap();
        let narrow = solve(&PdeKind::from_spec(&spec), &f, &band(1.0, 1.0), 1.0, &g).unwrap();
        assert!(wide.values.iter().zip(&narrow.values).all(|(w, n)| w >= n));
    }

    #[test]
    fn bounded_payoff_stays_bounded() {
        let f = TestFunction::smoothed_indicator(-1.0, 1.0, 0.05);
        for kind in [PdeKind::GHeat, PdeKind::QvDriven(Drift::ou()), PdeKind::TimeDriven(Drift::constant(3.0))] {
            let sol = solve(&kind, &f, &band(0.5, 1.0), 2.0, &Grid1D::default()).unwrap();
            assert!(sol.values.iter().all(|u| (0.0..=1.0).contains(u)));
        }
    }

    #[test]
    fn fixed_dt_cfl_violation() {
        let g = Grid1D::new(-5.0, 5.0, 101, DtPolicy::Fixed(0.1)).unwrap();
        let err = solve(&PdeKind::GHeat, &TestFunction::sigmoid(), &band(1.0, 1.0), 1.0, &g).unwrap_err();
        assert!(matches!(err, GexpError::CflViolation { .. }));
        let ok = Grid1D::new(-5.0, 5.0, 101, DtPolicy::Fixed(0.004)).unwrap();
        let sol = solve(&PdeKind::GHeat, &TestFunction::sigmoid(), &band(1.0, 1.0), 1.0, &ok).unwrap();
        assert_eq!(sol.scheme_meta.steps, 250);
    }

    #[test]
    fn nan_payoff_is_reported() {
        let f = TestFunction::new("bad", |x| if x > 5.0 { f64::NAN } else { 0.0 }, true, crate::model::Convexity::Neither, 1.0);
        let err = solve(&PdeKind::GHeat, &f, &band(1.0, 1.0), 1.0, &Grid1D::default()).unwrap_err();
        assert!(matches!(err, GexpError::NonFinite { .. }));
    }

    #[test]
    fn boundary_zone_rejected() {
        let spec = GsdeSpec::new(Drift::zero(), 0.0, SdeKind::QvDriven).unwrap();
        let err = pbar_pde(&spec, &TestFunction::sigmoid(), 5.0, 1.0, &band(1.0, 1.0), &Grid1D::default()).unwrap_err();
        assert!(matches!(err, GexpError::BoundaryZone { .. }));
    }

    #[test]
    fn domain_doubling_is_harmless() {
        let spec = GsdeSpec::new(Drift::tanh(1.0), 1.0, SdeKind::TimeDriven).unwrap();
        for f in TestFunction::catalog() {
            let d = truncation_check(&spec, &f, 0.5, 1.0, &band(0.5, 1.0), &Grid1D::default()).unwrap();
            assert!(d < 1e-6 * f.bound().max(1.0), "{}: {d}", f.id());
        }
    }

    #[test]
    fn grid_refinement_sanity() {
        let coarse = Grid1D { nx: 201, ..Grid1D::default() };
        for f in TestFunction::catalog() {
            for kind in [PdeKind::GHeat, PdeKind::QvDriven(Drift::ou()), PdeKind::TimeDriven(Drift::tanh(1.0))] {
                let a = solve(&kind, &f, &band(0.5, 1.0), 1.0, &coarse).unwrap();
                let b = solve(&kind, &f, &band(0.5, 1.0), 1.0, &coarse.refined()).unwrap();
                for x in [-1.0, 0.0, 0.5, 2.0] {
                    let (va, vb) = (a.value_at(x).unwrap(), b.value_at(x).unwrap());
                    assert!((va - vb).abs() <= 4.0 * PDE_TOLERANCE * vb.abs().max(1e-2), "{} {}: {va} {vb}", f.id(), kind.label());
                }
            }
        }
    }

    #[test]
    fn interpolation_hits_nodes() {
        let sol = solve(&PdeKind::GHeat, &TestFunction::sigmoid(), &band(1.0, 1.0), 0.1, &Grid1D::default()).unwrap();
        assert_eq!(sol.value_at(0.0).unwrap(), sol.values[200]);
        assert!(sol.value_at(11.0).is_err());
        assert_eq!(sol.value_at(10.0).unwrap(), sol.values[400]);
    }
}
