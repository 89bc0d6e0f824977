//! Worst-case Monte Carlo: Euler–Maruyama per scenario with common random
//! numbers, and the scenario-max estimator of `P̄_T f`.
//!
//! The estimator is a lower bound for the sup over all admissible controls
//! (up to sampling noise) because the scenario lattice is a finite subset.
//! Per-path work may run on the rayon pool; all reductions run sequentially
//! in path order, so results are bit-identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, GexpError, Result};
use crate::model::{GsdeSpec, McConfig, Scenario, SdeKind, TestFunction};
use crate::rng::NormalSource;

/// Per-step `(Δ⟨B⟩, √Δ⟨B⟩)` of a scenario on the uniform grid.
pub(crate) fn qv_increments(scenario: &Scenario, n_steps: usize) -> Vec<(f64, f64)> {
    scenario
        .qv_grid(n_steps)
        .windows(2)
        .map(|w| {
            let dq = w[1] - w[0];
            (dq, dq.sqrt())
        })
        .collect()
}

/// One Euler–Maruyama path driven by the given standard normals.
#[inline]
pub(crate) fn em_terminal(spec: &GsdeSpec, x0: f64, incs: &[(f64, f64)], h: f64, normals: &[f64]) -> Result<f64> {
    let mut x = x0;
    match spec.kind {
        SdeKind::QvDriven => {
            for (k, ((dq, sq), z)) in incs.iter().zip(normals).enumerate() {
                x += spec.drift.eval(x) * dq + sq * z;
                if !x.is_finite() {
                    return Err(GexpError::NonFinite { stage: "euler-maruyama", step: k });
                }
            }
        }
        SdeKind::TimeDriven => {
            for (k, ((_, sq), z)) in incs.iter().zip(normals).enumerate() {
                x += spec.drift.eval(x) * h + sq * z;
                if !x.is_finite() {
                    return Err(GexpError::NonFinite { stage: "euler-maruyama", step: k });
                }
            }
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEnsemble {
    pub x0: f64,
    pub terminal: Vec<f64>,
    pub n_steps: usize,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn mean(&self) -> f64 {
        self.terminal.iter().sum::<f64>() / self.terminal.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.terminal.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.terminal.len() as f64 - 1.0)
    }
}

/// Euler–Maruyama on `h = T / n_steps`: `ΔX = b(X) Δ⟨B⟩ + √Δ⟨B⟩ Z` for the
/// quadratic-variation-driven kind, `ΔX = b(X) h + √Δ⟨B⟩ Z` for the time-driven one.
pub fn simulate_paths(spec: &GsdeSpec, x0: f64, scenario: &Scenario, mc: &McConfig) -> Result<PathEnsemble> {
    let ens = simulate_ensemble(spec, x0, std::slice::from_ref(scenario), mc)?;
    Ok(PathEnsemble { x0, terminal: ens.terminals.into_iter().map(|row| row[0]).collect(), n_steps: mc.n_steps, seed: mc.seed })
}

/// Terminal states of every scenario on shared normal draws.
#[derive(Debug, Clone)]
pub struct ScenarioEnsemble {
    pub labels: Vec<String>,
    /// `terminals[path][scenario]`
    pub terminals: Vec<Vec<f64>>,
    pub n_steps: usize,
    pub seed: u64,
}

pub fn simulate_ensemble(spec: &GsdeSpec, x0: f64, scenarios: &[Scenario], mc: &McConfig) -> Result<ScenarioEnsemble> {
    if scenarios.is_empty() {
        return Err(GexpError::EmptyScenarios);
    }
    let horizon = scenarios[0].horizon();
    if scenarios.iter().any(|s| (s.horizon() - horizon).abs() > 1e-12 * horizon) {
        return Err(invalid("scenarios", "all scenarios must share one horizon"));
    }
    let h = horizon / mc.n_steps as f64;
    let incs: Vec<Vec<(f64, f64)>> = scenarios.iter().map(|s| qv_increments(s, mc.n_steps)).collect();
    let source = NormalSource::new(mc.seed);
    let terminals = (0..mc.n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; mc.n_steps],
            |z, path| {
                source.fill_path(path, z);
                incs.iter().map(|inc| em_terminal(spec, x0, inc, h, z)).collect::<Result<Vec<f64>>>()
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioEnsemble {
        labels: scenarios.iter().map(Scenario::label).collect(),
        terminals,
        n_steps: mc.n_steps,
        seed: mc.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub mean: f64,
    pub std_error: f64,
}

impl SampleStats {
    /// Two-pass mean and standard error, summed in slice order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioStat {
    pub scenario: usize,
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PbarEstimate {
    pub payoff: String,
    pub value: f64,
    pub argmax_scenario: usize,
    pub per_scenario: Vec<ScenarioStat>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl PbarEstimate {
    pub fn argmax(&self) -> &ScenarioStat {
        &self.per_scenario[self.argmax_scenario]
    }
}

impl ScenarioEnsemble {
    pub fn estimate(&self, payoff: &TestFunction) -> PbarEstimate {
        let n_scen = self.labels.len();
        let mut per_scenario = Vec::with_capacity(n_scen);
        let mut column = vec![0.0; self.terminals.len()];
        for s in 0..n_scen {
            for (slot, row) in column.iter_mut().zip(&self.terminals) {
                *slot = payoff.eval(row[s]);
            }
            let st = SampleStats::from_samples(&column);
            per_scenario.push(ScenarioStat { scenario: s, label: self.labels[s].clone(), mean: st.mean, std_error: st.std_error });
        }
        let mut argmax = 0;
        for (i, s) in per_scenario.iter().enumerate() {
            if s.mean > per_scenario[argmax].mean {
                argmax = i;
            }
        }
        PbarEstimate {
            payoff: payoff.id().to_string(),
            value: per_scenario[argmax].mean,
            argmax_scenario: argmax,
            per_scenario,
            n_paths: self.terminals.len(),
            n_steps: self.n_steps,
            seed: self.seed,
        }
    }
}

/// Scenario-max estimator of `P̄_T f(x0)`.
pub fn pbar_mc(
    spec: &GsdeSpec,
    payoff: &TestFunction,
    x0: f64,
    horizon: f64,
    scenarios: &[Scenario],
    mc: &McConfig,
) -> Result<PbarEstimate> {
    if scenarios.is_empty() {
        return Err(GexpError::EmptyScenarios);
    }
    if scenarios.iter().any(|s| (s.horizon() - horizon).abs() > 1e-12 * horizon) {
        return Err(invalid("horizon", format!("scenarios do not end at T = {horizon}")));
    }
    Ok(simulate_ensemble(spec, x0, scenarios, mc)?.estimate(payoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_scenario_lattice, Convexity, Drift, VolatilityBand};

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    fn qv(drift: Drift) -> GsdeSpec {
        GsdeSpec { lipschitz_k: drift.natural_lipschitz().unwrap_or(0.0), drift, kind: SdeKind::QvDriven }
    }

    #[test]
    fn driftless_mean_and_variance() {
        let b = band(0.5, 1.0);
        let mc = McConfig::new(20_000, 16, 11).unwrap();
        for v0 in [0.25, 1.0] {
            let s = Scenario::constant(&b, v0, 2.0).unwrap();
            let ens = simulate_paths(&qv(Drift::zero()), 0.0, &s, &mc).unwrap();
            let n = mc.n_paths as f64;
            let var_exact = v0 * 2.0;
            assert!(ens.mean().abs() < 4.0 * (var_exact / n).sqrt());
            assert!((ens.variance() - var_exact).abs() < 4.0 * var_exact * (2.0 / (n - 1.0)).sqrt());
        }
    }

    #[test]
    fn constant_drift_mean() {
        let b = band(0.5, 1.0);
        let mc = McConfig::new(20_000, 32, 5).unwrap();
        let s = Scenario::constant(&b, 0.25, 1.0).unwrap();
        let ens = simulate_paths(&qv(Drift::constant(2.0)), 1.0, &s, &mc).unwrap();
        let se = (0.25f64 / 20_000.0).sqrt();
        assert!((ens.mean() - (1.0 + 2.0 * 0.25)).abs() < 4.0 * se);
        // time-driven: drift integrates against dt
        let spec = GsdeSpec { drift: Drift::constant(2.0), lipschitz_k: 0.0, kind: SdeKind::TimeDriven };
        let ens = simulate_paths(&spec, 1.0, &s, &mc).unwrap();
        assert!((ens.mean() - 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn constant_payoff_is_exact() {
        let b = band(0.5, 1.0);
        let sc = make_scenario_lattice(&b, 1.0, 2, 2).unwrap();
        let mc = McConfig::new(1000, 16, 3).unwrap();
        let est = pbar_mc(&qv(Drift::ou()), &TestFunction::constant(1.0), 0.3, 1.0, &sc, &mc).unwrap();
        assert_eq!(est.value, 1.0);
        assert!(est.per_scenario.iter().all(|s| s.std_error == 0.0));
    }

    #[test]
    fn convex_payoff_saturates_upper_volatility() {
        let b = band(0.5, 1.0);
        let sc = make_scenario_lattice(&b, 1.0, 2, 3).unwrap();
        let mc = McConfig::new(20_000, 16, 9).unwrap();
        let est = pbar_mc(&qv(Drift::zero()), &TestFunction::clipped_square(400.0), 0.0, 1.0, &sc, &mc).unwrap();
        assert!(est.argmax().label == "v=[1,1]", "{}", est.argmax().label);
        assert!((est.value - 1.0).abs() < 4.0 * est.argmax().std_error);
    }

    #[test]
    fn estimator_is_monotone_homogeneous_subadditive() {
        let b = band(0.5, 1.0);
        let sc = make_scenario_lattice(&b, 1.0, 2, 2).unwrap();
        let mc = McConfig::new(2000, 32, 17).unwrap();
        let ens = simulate_ensemble(&qv(Drift::tanh(1.0)), 0.2, &sc, &mc).unwrap();
        let f = TestFunction::sigmoid();
        let g = TestFunction::lorentz();
        let (ef, eg) = (ens.estimate(&f), ens.estimate(&g));
        let sum = ens.estimate(&f.plus(&g));
        assert!(sum.value <= ef.value + eg.value + 1e-14);
        let scaled = ens.estimate(&f.scaled(3.5));
        assert!((scaled.value - 3.5 * ef.value).abs() <= 1e-14 * scaled.value);
        // f + g ≥ f pointwise
        assert!(sum.value >= ef.value);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let b = band(0.5, 1.0);
        let sc = make_scenario_lattice(&b, 1.0, 2, 2).unwrap();
        let mc = McConfig::new(3000, 16, 23).unwrap();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| pbar_mc(&qv(Drift::ou()), &TestFunction::sigmoid(), 0.0, 1.0, &sc, &mc).unwrap())
        };
        let (a, c) = (run(1), run(3));
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        for (x, y) in a.per_scenario.iter().zip(&c.per_scenario) {
            assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        }
    }

    #[test]
    fn errors() {
        let mc = McConfig::new(10, 8, 1).unwrap();
        assert!(matches!(
            pbar_mc(&qv(Drift::zero()), &TestFunction::sigmoid(), 0.0, 1.0, &[], &mc),
            Err(GexpError::EmptyScenarios)
        ));
        let b = band(1.0, 1.0);
        let s = Scenario::constant(&b, 1.0, 1.0).unwrap();
        assert!(pbar_mc(&qv(Drift::zero()), &TestFunction::sigmoid(), 0.0, 2.0, std::slice::from_ref(&s), &mc).is_err());
        let explosive = GsdeSpec { drift: Drift::custom("exp", |x: f64| (x * x).exp()), lipschitz_k: 0.0, kind: SdeKind::QvDriven };
        let err = simulate_paths(&explosive, 3.0, &s, &mc).unwrap_err();
        assert!(matches!(err, GexpError::NonFinite { .. }));
        let _ = Convexity::Neither;
    }
}
