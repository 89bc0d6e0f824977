//! Sublinear-expectation axioms (monotonicity, constant preservation,
//! subadditivity, positive homogeneity) checked on both backends.

use serde::Serialize;

use crate::error::Result;
use crate::gheat::{check_padding, solve, Grid1D, PdeKind, PDE_TOLERANCE};
use crate::model::{GsdeSpec, McConfig, Scenario, TestFunction, VolatilityBand};
use crate::simulate::simulate_ensemble;

/// Relative slack for the Monte Carlo estimator, which obeys the axioms up to
/// floating-point summation error only.
pub const ROUND_OFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    Monotonicity,
    ConstantPreservation,
    Subadditivity,
    PositiveHomogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomRow {
    pub backend: &'static str,
    pub axiom: Axiom,
    pub case: String,
    /// Largest violation `lhs − rhs` observed (≤ 0 when the inequality holds outright).
    pub worst: f64,
    pub allowed: f64,
    pub pass: bool,
}

const LAMBDAS: [f64; 3] = [0.0, 0.5, 3.0];
const CONSTANTS: [f64; 3] = [0.0, 1.0, 2.5];

/// Row helper: `excess[i] ≤ allowed[i]` for all `i`.
fn row(backend: &'static str, axiom: Axiom, case: String, excess: &[f64], allowed: &[f64]) -> AxiomRow {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_allowed = 0.0;
    let mut pass = true;
    for (e, a) in excess.iter().zip(allowed) {
        if e > a || e.is_nan() {
            pass = false;
        }
        if *e - *a > worst - worst_allowed || worst == f64::NEG_INFINITY {
            worst = *e;
            worst_allowed = *a;
        }
    }
    AxiomRow { backend, axiom, case, worst, allowed: worst_allowed, pass }
}

/// Runs the four axioms for `payoffs` against any evaluator returning a
/// vector of values (grid nodes for the PDE, one number for Monte Carlo).
fn suite(
    backend: &'static str,
    payoffs: &[TestFunction],
    eval: &dyn Fn(&TestFunction) -> Result<Vec<f64>>,
    slack: f64,
    exact_monotone: bool,
) -> Result<Vec<AxiomRow>> {
    let tol = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| slack * x.abs().max(1.0)).collect() };
    let base: Vec<Vec<f64>> = payoffs.iter().map(eval).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for c in CONSTANTS {
        let v = eval(&TestFunction::constant(c))?;
        let excess: Vec<f64> = v.iter().map(|u| (u - c).abs()).collect();
        let allowed = vec![slack * c.abs().max(1.0); v.len()];
        rows.push(row(backend, Axiom::ConstantPreservation, format!("const:{c}"), &excess, &allowed));
    }
    for (i, f) in payoffs.iter().enumerate() {
        for lambda in LAMBDAS {
            let v = eval(&f.scaled(lambda))?;
            let target: Vec<f64> = base[i].iter().map(|u| lambda * u).collect();
            let excess: Vec<f64> = v.iter().zip(&target).map(|(a, b)| (a - b).abs()).collect();
            rows.push(row(backend, Axiom::PositiveHomogeneity, format!("{}*{}", lambda, f.id()), &excess, &tol(&target)));
        }
        for (j, g) in payoffs.iter().enumerate().skip(i) {
            let sum = eval(&f.plus(g))?;
            let bound: Vec<f64> = base[i].iter().zip(&base[j]).map(|(a, b)| a + b).collect();
            let excess: Vec<f64> = sum.iter().zip(&bound).map(|(a, b)| a - b).collect();
            rows.push(row(backend, Axiom::Subadditivity, format!("{}+{}", f.id(), g.id()), &excess, &tol(&bound)));
            // g ≥ 0, so f ≤ f + g pointwise
            let excess: Vec<f64> = base[i].iter().zip(&sum).map(|(a, b)| a - b).collect();
            let allowed = if exact_monotone { vec![0.0; excess.len()] } else { tol(&sum) };
            rows.push(row(backend, Axiom::Monotonicity, format!("{} <= {}+{}", f.id(), f.id(), g.id()), &excess, &allowed));
        }
    }
    Ok(rows)
}

/// Axioms for the PDE backend on every node of the usable zone.
pub fn pde_axioms(
    spec: &GsdeSpec,
    band: &VolatilityBand,
    horizon: f64,
    grid: &Grid1D,
    payoffs: &[TestFunction],
) -> Result<Vec<AxiomRow>> {
    let kind = PdeKind::from_spec(spec);
    let inner: Vec<usize> =
        (0..grid.nx).filter(|&j| check_padding(grid.node(j), horizon, band, grid).is_ok()).collect();
    let eval = |f: &TestFunction| -> Result<Vec<f64>> {
        let sol = solve(&kind, f, band, horizon, grid)?;
        Ok(inner.iter().map(|&j| sol.values[j]).collect())
    };
    suite("pde", payoffs, &eval, PDE_TOLERANCE, false)
}

/// Axioms for the scenario-max estimator on one common-random-number ensemble.
pub fn mc_axioms(
    spec: &GsdeSpec,
    x0: f64,
    scenarios: &[Scenario],
    mc: &McConfig,
    payoffs: &[TestFunction],
) -> Result<Vec<AxiomRow>> {
    let ens = simulate_ensemble(spec, x0, scenarios, mc)?;
    let eval = |f: &TestFunction| -> Result<Vec<f64>> { Ok(vec![ens.estimate(f).value]) };
    suite("mc", payoffs, &eval, ROUND_OFF, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_scenario_lattice, Drift, SdeKind};

    #[test]
    fn both_backends_satisfy_the_axioms() {
        let band = VolatilityBand::new(0.5, 1.0).unwrap();
        let spec = GsdeSpec::new(Drift::tanh(1.0), 1.0, SdeKind::QvDriven).unwrap();
        let catalog = TestFunction::catalog();
        let scenarios = make_scenario_lattice(&band, 1.0, 2, 2).unwrap();
        let mc = McConfig::new(500, 16, 3).unwrap();
        let rows = mc_axioms(&spec, 0.2, &scenarios, &mc, &catalog).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{:?}", rows.iter().find(|r| !r.pass));
        let grid = Grid1D::new(-8.0, 8.0, 161, crate::gheat::DtPolicy::AutoCfl(0.9)).unwrap();
        let rows = pde_axioms(&spec, &band, 0.5, &grid, &catalog[..3]).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{:?}", rows.iter().find(|r| !r.pass));
    }
}
