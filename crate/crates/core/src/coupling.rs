//! Coupling by change of measure for `dX = b(X) d⟨B⟩ + dB`.
//!
//! For a fixed scenario the quadratic variation `q(t)` is deterministic, so
//! the coupled system is simulated on the qv increments of the Euler grid.
//! `Y` receives the extra drift `u = η · sgn(X − Y)` until it meets `X`, and
//! `M_T = exp(−Σ u ΔB − ½ Σ u² Δq)` removes that drift. On the meeting step the
//! drift is reduced to the value that lands `Y` exactly on `X`; it is
//! adapted and never exceeds `η`, so the discrete Girsanov identity stays
//! exact and the Novikov bound is unaffected.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, GexpError, Result};
use crate::harnack::{moment_log_bound, novikov_log_bound};
use crate::model::{GsdeSpec, McConfig, Scenario, SdeKind, Shape, TestFunction, VolatilityBand};
use crate::rng::NormalSource;
use crate::simulate::SampleStats;

/// Step-constant control `η_k = |x−y| e^{−K q_mid} / D` with
/// `D = ∫₀^T e^{−2K q} dq = (1 − e^{−2K q(T)}) / (2K)`, evaluated at the
/// qv-midpoint `q_mid` of each step.
#[derive(Debug, Clone, Serialize)]
pub struct EtaSchedule {
    pub qv: Vec<f64>,
    pub eta: Vec<f64>,
    pub k: f64,
    pub dist: f64,
}

impl EtaSchedule {
    /// `Σ η_k ∫_{step k} e^{−K q} dq`, which equals `|x−y|` up to O(h²).
    pub fn transported(&self) -> f64 {
        self.eta
            .iter()
            .zip(self.qv.windows(2))
            .map(|(e, w)| {
                let seg = if self.k > 0.0 {
                    ((-self.k * w[0]).exp() - (-self.k * w[1]).exp()) / self.k
                } else {
                    w[1] - w[0]
                };
                e * seg
            })
            .sum()
    }

    pub fn defect(&self) -> f64 {
        (self.transported() - self.dist).abs()
    }

    /// `Σ η_k² Δq_k`, the largest value `∫ u² d⟨B⟩` can take on a path.
    pub fn energy(&self) -> f64 {
        self.eta.iter().zip(self.qv.windows(2)).map(|(e, w)| e * e * (w[1] - w[0])).sum()
    }
}

pub fn eta_schedule(scenario: &Scenario, k: f64, x: f64, y: f64, horizon: f64, n_steps: usize) -> Result<EtaSchedule> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(invalid("K", format!("must be positive, got {k}")));
    }
    if (scenario.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(invalid("horizon", format!("scenario ends at {}, not {horizon}", scenario.horizon())));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be positive"));
    }
    let qv = scenario.qv_grid(n_steps);
    let dist = (x - y).abs();
    let q_end = qv[n_steps];
    let denom = -(-2.0 * k * q_end).exp_m1() / (2.0 * k);
    let eta = qv.windows(2).map(|w| dist * (-k * 0.5 * (w[0] + w[1])).exp() / denom).collect();
    Ok(EtaSchedule { qv, eta, k, dist })
}

/// Merge tolerance `1e−10 (1 + |x−y|)`.
pub fn merge_tolerance(x: f64, y: f64) -> f64 {
    1e-10 * (1.0 + (x - y).abs())
}

/// Per-path outputs of one coupled simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoupledPath {
    pub x_t: f64,
    pub y_t: f64,
    /// Terminal value of the uncontrolled process started at `y`.
    pub x_tilde_t: f64,
    pub log_m: f64,
    /// `Σ u_k² Δq_k`.
    pub control_energy: f64,
    /// First grid index at which `Y = X`, if any.
    pub tau_step: Option<usize>,
}

/// All paths of one coupled simulation, in path order.
#[derive(Debug, Clone)]
pub struct CouplingRun {
    pub scenario: String,
    pub x: f64,
    pub y: f64,
    pub k: f64,
    pub band: VolatilityBand,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub eta_defect: f64,
    pub paths: Vec<CoupledPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl From<SampleStats> for Estimate {
    fn from(s: SampleStats) -> Self {
        Self { mean: s.mean, std_error: s.std_error }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub scenario: String,
    pub x: f64,
    pub y: f64,
    pub k: f64,
    pub p: f64,
    pub horizon: f64,
    pub payoff: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub merge_tolerance: f64,
    pub eta_defect: f64,
    /// Fraction of paths on which `Y` met `X` on the grid.
    pub coupled_fraction: f64,
    pub coupling_gap: f64,
    pub novikov_pathwise_max: f64,
    pub novikov_bound: f64,
    /// Logs of the two Novikov quantities, compared with slack `1e−9`.
    pub log_novikov_pathwise_max: f64,
    pub log_novikov_bound: f64,
    pub novikov_holds: bool,
    /// `E[M_T f(X_T^x)]`
    pub weighted: Estimate,
    /// `E[f(X̃_T^y)]`
    pub unweighted: Estimate,
    pub girsanov_identity_gap: f64,
    /// Standard error of the paired difference `M_T f(X_T^x) − f(X̃_T^y)`.
    pub girsanov_std_error: f64,
    pub m_mean: Estimate,
    pub mt_moment: Estimate,
    pub mt_moment_bound: f64,
}

pub const NOVIKOV_SLACK: f64 = 1e-9;

impl CouplingReport {
    pub fn coupling_ok(&self) -> bool {
        self.coupling_gap <= 1e-2 * (self.x - self.y).abs()
    }

    pub fn girsanov_ok(&self) -> bool {
        self.girsanov_identity_gap <= 3.0 * self.girsanov_std_error
    }

    pub fn unit_mean_ok(&self) -> bool {
        (self.m_mean.mean - 1.0).abs() <= 3.0 * self.m_mean.std_error
    }

    pub fn passes(&self) -> bool {
        self.coupling_ok() && self.novikov_holds && self.girsanov_ok() && mt_moment_check(self).pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub limit: f64,
    pub pass: bool,
}

/// `mean(M_T^{p/(p−1)}) ≤ bound · (1 + 3 · relative std error)`.
pub fn mt_moment_check(report: &CouplingReport) -> MomentCheck {
    let m = report.mt_moment;
    let rel = if m.mean > 0.0 { m.std_error / m.mean } else { 0.0 };
    let limit = report.mt_moment_bound * (1.0 + 3.0 * rel);
    MomentCheck { mean: m.mean, std_error: m.std_error, bound: report.mt_moment_bound, limit, pass: m.mean <= limit }
}

fn check_spec(spec: &GsdeSpec) -> Result<()> {
    if spec.kind != SdeKind::QvDriven {
        return Err(invalid("kind", "coupling is defined for the quadratic-variation-driven equation"));
    }
    if !(spec.lipschitz_k > 0.0) {
        return Err(invalid("K", format!("must be positive, got {}", spec.lipschitz_k)));
    }
    Ok(())
}

struct Prepared {
    incs: Vec<(f64, f64)>,
    etas: Vec<Vec<f64>>,
}

/// Paths advanced in lockstep; every lane runs the same IEEE operations, so a
/// path's result does not depend on which block it lands in.
const LANES: usize = 8;

type Block = [f64; LANES];

/// Couples every `(scenario, y)` pair for a block of paths. `z[k][l]` is the
/// normal of lane `l` at step `k`. Merged lanes keep stepping with zero control, which
/// reproduces `Y = X` exactly.
fn couple_block<B: Fn(f64) -> f64>(
    b: &B,
    x: f64,
    ys: &[f64],
    prepared: &[Prepared],
    z: &[Block],
) -> Result<Vec<[CoupledPath; LANES]>> {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the running CPU supports AVX2.
        return unsafe { couple_block_avx2(b, x, ys, prepared, z) };
    }
    couple_block_generic(b, x, ys, prepared, z)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn couple_block_avx2<B: Fn(f64) -> f64>(
    b: &B,
    x: f64,
    ys: &[f64],
    prepared: &[Prepared],
    z: &[Block],
) -> Result<Vec<[CoupledPath; LANES]>> {
    couple_block_generic(b, x, ys, prepared, z)
}

#[inline(always)]
fn couple_block_generic<B: Fn(f64) -> f64>(
    b: &B,
    x: f64,
    ys: &[f64],
    prepared: &[Prepared],
    z: &[Block],
) -> Result<Vec<[CoupledPath; LANES]>> {
    let n = z.len();
    let mut out = Vec::with_capacity(prepared.len() * ys.len());
    for prep in prepared {
        for (yi, &y0) in ys.iter().enumerate() {
            let tol = merge_tolerance(x, y0);
            let eta = &prep.etas[yi][..n];
            let incs = &prep.incs[..n];
            let mut xs: Block = [x; LANES];
            let mut y: Block = [y0; LANES];
            let mut xt: Block = [y0; LANES];
            let mut log_m: Block = [0.0; LANES];
            let mut energy: Block = [0.0; LANES];
            let mut tau = [if x == y0 { 0 } else { usize::MAX }; LANES];
            for (step, ((&(dq, sq), &e), zk)) in (1..).zip(incs.iter().zip(eta).zip(z)) {
                for l in 0..LANES {
                    let db = sq * zk[l];
                    let x_now = xs[l];
                    let bx = b(x_now);
                    let x_next = x_now + bx * dq + db;
                    xt[l] += b(xt[l]) * dq + db;
                    let active = tau[l] == usize::MAX;
                    let gap = x_now - y[l];
                    let by = b(y[l]);
                    let sign = 1.0f64.copysign(gap);
                    let u_run = e * sign;
                    let y_run = y[l] + by * dq + u_run * dq + db;
                    let lands = 1.0f64.copysign(x_next - y_run) != sign || (x_next - y_run).abs() <= tol;
                    // landing drift puts Y exactly on X at the end of this step
                    let u = if !active {
                        0.0
                    } else if lands {
                        gap / dq + bx - by
                    } else {
                        u_run
                    };
                    y[l] = if active && !lands { y_run } else { x_next };
                    if active && lands {
                        tau[l] = step;
                    }
                    log_m[l] -= u * db + 0.5 * u * u * dq;
                    energy[l] += u * u * dq;
                    xs[l] = x_next;
                }
            }
            let mut paths = [CoupledPath::default(); LANES];
            for l in 0..LANES {
                if !(xs[l].is_finite() && y[l].is_finite() && xt[l].is_finite() && log_m[l].is_finite()) {
                    return Err(GexpError::NonFinite { stage: "coupling", step: n });
                }
                paths[l] = CoupledPath {
                    x_t: xs[l],
                    y_t: y[l],
                    x_tilde_t: xt[l],
                    log_m: log_m[l],
                    control_energy: energy[l],
                    tau_step: (tau[l] != usize::MAX).then_some(tau[l]),
                };
            }
            out.push(paths);
        }
    }
    Ok(out)
}

/// All coupled paths, one column per `(scenario, y)` pair in scenario-major order.
fn coupled_columns<B: Fn(f64) -> f64 + Sync>(
    b: B,
    x: f64,
    ys: &[f64],
    prepared: &[Prepared],
    mc: &McConfig,
) -> Result<Vec<Vec<CoupledPath>>> {
    let source = NormalSource::new(mc.seed);
    let n_paths = mc.n_paths as u64;
    let blocks = (0..n_paths.div_ceil(LANES as u64))
        .into_par_iter()
        .map_init(
            || (vec![0.0; mc.n_steps], vec![[0.0; LANES]; mc.n_steps]),
            |(buf, z), block| {
                for l in 0..LANES {
                    // lanes past the end replay the last path and are dropped
                    let path = (block * LANES as u64 + l as u64).min(n_paths - 1);
                    source.fill_path(path, buf);
                    for (zk, &v) in z.iter_mut().zip(buf.iter()) {
                        zk[l] = v;
                    }
                }
                couple_block(&b, x, ys, prepared, z)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![Vec::with_capacity(mc.n_paths); prepared.len() * ys.len()];
    for (bi, block) in blocks.into_iter().enumerate() {
        let live = (mc.n_paths - bi * LANES).min(LANES);
        for (col, lanes) in columns.iter_mut().zip(block) {
            col.extend_from_slice(&lanes[..live]);
        }
    }
    Ok(columns)
}

/// Simulates every `(scenario, y)` pair on shared normals; runs are ordered
/// scenario-major.
pub fn simulate_couplings(
    spec: &GsdeSpec,
    band: &VolatilityBand,
    x: f64,
    ys: &[f64],
    horizon: f64,
    scenarios: &[Scenario],
    mc: &McConfig,
) -> Result<Vec<CouplingRun>> {
    check_spec(spec)?;
    if scenarios.is_empty() {
        return Err(GexpError::EmptyScenarios);
    }
    let mut prepared = Vec::with_capacity(scenarios.len());
    let mut defects = Vec::new();
    for s in scenarios {
        let mut etas = Vec::with_capacity(ys.len());
        for &y in ys {
            let sched = eta_schedule(s, spec.lipschitz_k, x, y, horizon, mc.n_steps)?;
            defects.push(sched.defect());
            etas.push(sched.eta);
        }
        prepared.push(Prepared { incs: crate::simulate::qv_increments(s, mc.n_steps), etas });
    }
    let columns = match spec.drift.shape() {
        Shape::Constant(c) => coupled_columns(move |_| c, x, ys, &prepared, mc)?,
        Shape::Linear(a) => coupled_columns(move |s| a * s, x, ys, &prepared, mc)?,
        Shape::Tanh(k) => coupled_columns(move |s: f64| -k * s.tanh(), x, ys, &prepared, mc)?,
        Shape::Custom => coupled_columns(|s| spec.drift.eval(s), x, ys, &prepared, mc)?,
    };
    let mut columns = columns.into_iter();
    let mut runs = Vec::with_capacity(scenarios.len() * ys.len());
    for (si, s) in scenarios.iter().enumerate() {
        for (yi, &y) in ys.iter().enumerate() {
            let col = si * ys.len() + yi;
            runs.push(CouplingRun {
                scenario: s.label(),
                x,
                y,
                k: spec.lipschitz_k,
                band: *band,
                horizon,
                n_steps: mc.n_steps,
                seed: mc.seed,
                eta_defect: defects[col],
                paths: columns.next().expect("one column per pair"),
            });
        }
    }
    Ok(runs)
}

impl CouplingRun {
    pub fn report(&self, p: f64, payoff: &TestFunction) -> Result<CouplingReport> {
        if !(p > 1.0) {
            return Err(invalid("p", format!("must exceed 1, got {p}")));
        }
        let dist = (self.x - self.y).abs();
        let n = self.paths.len();
        let coupling_gap = self.paths.iter().map(|c| (c.x_t - c.y_t).abs()).fold(0.0, f64::max);
        let coupled = self.paths.iter().filter(|c| c.tau_step.is_some()).count();
        let max_energy = self.paths.iter().map(|c| c.control_energy).fold(0.0, f64::max);
        let log_bound = novikov_log_bound(self.k, &self.band, self.horizon, dist)?;
        let q = p / (p - 1.0);
        let weighted: Vec<f64> = self.paths.iter().map(|c| c.log_m.exp() * payoff.eval(c.x_t)).collect();
        let unweighted: Vec<f64> = self.paths.iter().map(|c| payoff.eval(c.x_tilde_t)).collect();
        let diff: Vec<f64> = weighted.iter().zip(&unweighted).map(|(a, b)| a - b).collect();
        let m: Vec<f64> = self.paths.iter().map(|c| c.log_m.exp()).collect();
        let mq: Vec<f64> = self.paths.iter().map(|c| (q * c.log_m).exp()).collect();
        let w = SampleStats::from_samples(&weighted);
        let u = SampleStats::from_samples(&unweighted);
        let d = SampleStats::from_samples(&diff);
        Ok(CouplingReport {
            scenario: self.scenario.clone(),
            x: self.x,
            y: self.y,
            k: self.k,
            p,
            horizon: self.horizon,
            payoff: payoff.id().to_string(),
            n_paths: n,
            n_steps: self.n_steps,
            seed: self.seed,
            merge_tolerance: merge_tolerance(self.x, self.y),
            eta_defect: self.eta_defect,
            coupled_fraction: coupled as f64 / n as f64,
            coupling_gap,
            novikov_pathwise_max: max_energy.exp(),
            novikov_bound: log_bound.exp(),
            log_novikov_pathwise_max: max_energy,
            log_novikov_bound: log_bound,
            novikov_holds: max_energy <= log_bound + NOVIKOV_SLACK,
            weighted: w.into(),
            unweighted: u.into(),
            girsanov_identity_gap: (w.mean - u.mean).abs(),
            girsanov_std_error: d.std_error,
            m_mean: SampleStats::from_samples(&m).into(),
            mt_moment: SampleStats::from_samples(&mq).into(),
            mt_moment_bound: moment_log_bound(p, self.k, &self.band, self.horizon, dist)?.exp(),
        })
    }

    /// One CSV row per path.
    pub fn write_paths_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "x_t", "y_t", "x_tilde_t", "log_m", "control_energy", "tau_step"])?;
        for (i, c) in self.paths.iter().enumerate() {
            w.write_record([
                i.to_string(),
                c.x_t.to_string(),
                c.y_t.to_string(),
                c.x_tilde_t.to_string(),
                c.log_m.to_string(),
                c.control_energy.to_string(),
                c.tau_step.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coupling diagnostics for one scenario and one pair of starting points.
#[allow(clippy::too_many_arguments)]
pub fn run_coupling(
    spec: &GsdeSpec,
    band: &VolatilityBand,
    x: f64,
    y: f64,
    horizon: f64,
    scenario: &Scenario,
    mc: &McConfig,
    p: f64,
    payoff: &TestFunction,
) -> Result<CouplingReport> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    let runs = simulate_couplings(spec, band, x, &[y], horizon, std::slice::from_ref(scenario), mc)?;
    runs[0].report(p, payoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Drift;

    fn band(lo: f64, hi: f64) -> VolatilityBand {
        VolatilityBand::new(lo, hi).unwrap()
    }

    fn ou_spec() -> GsdeSpec {
        GsdeSpec::new(Drift::ou(), 1.0, SdeKind::QvDriven).unwrap()
    }

    #[test]
    fn eta_matches_hand_integration() {
        let b = band(1.0, 1.0);
        let s = Scenario::constant(&b, 1.0, 1.0).unwrap();
        let n = 1 << 12;
        let sched = eta_schedule(&s, 1.0, 0.0, 1.0, 1.0, n).unwrap();
        let c = 2.0 / (1.0 - (-2.0f64).exp());
        let h = 1.0 / n as f64;
        for k in [0, 100, n - 1] {
            let t = (k as f64 + 0.5) * h;
            assert!((sched.eta[k] - (-t).exp() * c).abs() < 1e-12);
        }
        assert!(sched.defect() < 1e-6);
    }

    #[test]
    fn eta_defect_on_lattice_scenarios() {
        let b = band(0.5, 1.0);
        for s in crate::model::make_scenario_lattice(&b, 1.0, 2, 3).unwrap() {
            let sched = eta_schedule(&s, 1.0, 0.0, 1.0, 1.0, 1 << 12).unwrap();
            assert!(sched.defect() < 1e-6, "{}", s.label());
        }
    }

    #[test]
    fn equal_starts_need_no_control() {
        let b = band(0.5, 1.0);
        let s = Scenario::constant(&b, 0.25, 1.0).unwrap();
        let sched = eta_schedule(&s, 1.0, 0.3, 0.3, 1.0, 64).unwrap();
        assert!(sched.eta.iter().all(|e| *e == 0.0));
        let mc = McConfig::new(500, 64, 4).unwrap();
        let r = run_coupling(&ou_spec(), &b, 0.3, 0.3, 1.0, &s, &mc, 2.0, &TestFunction::sigmoid()).unwrap();
        assert_eq!(r.coupling_gap, 0.0);
        assert_eq!(r.m_mean.mean, 1.0);
        assert_eq!(r.m_mean.std_error, 0.0);
        assert_eq!(r.girsanov_identity_gap, 0.0);
        assert_eq!(r.mt_moment.mean, 1.0);
        assert_eq!(r.mt_moment_bound, 1.0);
        assert!(r.passes());
    }

    #[test]
    fn small_k_without_drift_closes_the_gap() {
        let b = band(1.0, 1.0);
        let s = Scenario::constant(&b, 1.0, 1.0).unwrap();
        let spec = GsdeSpec::new(Drift::zero(), 1e-6, SdeKind::QvDriven).unwrap();
        let sched = eta_schedule(&s, 1e-6, 0.0, 0.7, 1.0, 256).unwrap();
        assert!(sched.eta.iter().all(|e| (e - 0.7).abs() < 1e-5));
        let mc = McConfig::new(200, 256, 8).unwrap();
        let r = run_coupling(&spec, &b, 0.0, 0.7, 1.0, &s, &mc, 2.0, &TestFunction::sigmoid()).unwrap();
        assert!(r.coupling_gap < 1e-9, "{}", r.coupling_gap);
        assert_eq!(r.coupled_fraction, 1.0);
    }

    #[test]
    fn girsanov_identity_and_bounds() {
        let b = band(0.5, 1.0);
        let s = Scenario::new(&b, vec![0.0, 0.5, 1.0], vec![0.25, 1.0]).unwrap();
        let mc = McConfig::new(4000, 1 << 10, 21).unwrap();
        let r = run_coupling(&ou_spec(), &b, 0.0, 1.0, 1.0, &s, &mc, 2.0, &TestFunction::sigmoid()).unwrap();
        assert!(r.coupling_ok(), "gap {}", r.coupling_gap);
        assert!(r.novikov_holds);
        assert!(r.girsanov_ok(), "{} vs {}", r.girsanov_identity_gap, r.girsanov_std_error);
        assert!(r.unit_mean_ok(), "{:?}", r.m_mean);
        assert!(mt_moment_check(&r).pass);
    }

    #[test]
    fn vector_and_scalar_kernels_agree_bitwise() {
        let b = band(0.5, 1.0);
        let scenarios = crate::model::make_scenario_lattice(&b, 1.0, 2, 2).unwrap();
        let n = 256;
        let ys = [0.3, 1.0];
        let prepared: Vec<Prepared> = scenarios
            .iter()
            .map(|s| Prepared {
                incs: crate::simulate::qv_increments(s, n),
                etas: ys.iter().map(|&y| eta_schedule(s, 1.0, 0.0, y, 1.0, n).unwrap().eta).collect(),
            })
            .collect();
        let src = NormalSource::new(5);
        let mut z = vec![[0.0; LANES]; n];
        for l in 0..LANES {
            for (zk, v) in z.iter_mut().zip(src.path(l as u64, n)) {
                zk[l] = v;
            }
        }
        let drift = |s: f64| -s.tanh();
        let fast = couple_block(&drift, 0.0, &ys, &prepared, &z).unwrap();
        let plain = couple_block_generic(&drift, 0.0, &ys, &prepared, &z).unwrap();
        assert_eq!(fast, plain);
        assert!(fast.iter().flatten().all(|p| p.tau_step.is_some() && p.x_t == p.y_t));
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = band(1.0, 1.0);
        let s = Scenario::constant(&b, 1.0, 1.0).unwrap();
        let mc = McConfig::new(10, 8, 1).unwrap();
        let f = TestFunction::sigmoid();
        assert!(run_coupling(&ou_spec(), &b, 0.0, 1.0, 1.0, &s, &mc, 1.0, &f).is_err());
        let zero_k = GsdeSpec { drift: Drift::zero(), lipschitz_k: 0.0, kind: SdeKind::QvDriven };
        assert!(run_coupling(&zero_k, &b, 0.0, 1.0, 1.0, &s, &mc, 2.0, &f).is_err());
        assert!(eta_schedule(&s, 0.0, 0.0, 1.0, 1.0, 8).is_err());
        let time = GsdeSpec { kind: SdeKind::TimeDriven, ..ou_spec() };
        assert!(run_coupling(&time, &b, 0.0, 1.0, 1.0, &s, &mc, 2.0, &f).is_err());
    }
}
