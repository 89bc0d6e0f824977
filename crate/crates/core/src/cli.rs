//! Command-line front end.
//!
//! Every subcommand writes one report: a JSON envelope
//! `{schema, version, subcommand, config, pass, result}` or CSV rows preceded
//! by `#` comment lines carrying the same header. Exit status is 0 when every
//! check passes, 1 when a check fails (the report is still written) and 2 on
//! usage or configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::axioms::{mc_axioms, pde_axioms};
use crate::coupling::{mt_moment_check, simulate_couplings};
use crate::error::{invalid, Result};
use crate::gheat::{pbar_pde, solve, DtPolicy, Grid1D, PdeKind, PDE_TOLERANCE};
use crate::harnack::{
    harnack_certificates, shift_harnack_certificates, Backend, HarnackCertificate, HarnackConstant, Sweep,
};
use crate::kernels::{kernel_suite, MeanMode};
use crate::model::{make_scenario_lattice, Drift, GsdeSpec, McConfig, SdeKind, TestFunction, VolatilityBand};
use crate::simulate::pbar_mc;

const SCHEMA: u32 = 1;

#[derive(Parser, Debug, Serialize)]
#[command(name = "gexp", version, about = "Sublinear expectations, G-heat PDE and Harnack certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the PDE and dump the terminal profile.
    Gheat(GheatArgs),
    /// P̄_T f(x) by PDE, Monte Carlo, or both with a cross-check.
    Pbar(PbarArgs),
    /// Harnack certificates.
    Harnack(HarnackArgs),
    /// Shift-Harnack certificates for the time-driven equation.
    ShiftHarnack(ShiftArgs),
    /// Coupling and Girsanov diagnostics per scenario.
    Coupling(CouplingArgs),
    /// OU sup-kernel suite and the density-bound probe.
    Kernels(KernelArgs),
    /// Sublinear-expectation axioms on both backends.
    Axioms(AxiomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Qv,
    Time,
    Gheat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Pde,
    Mc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantArg {
    Stated,
    Holder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanModeArg {
    AsPrinted,
    OuConsistent,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Volatility band `lo,hi`.
    #[arg(long, default_value = "0.5,1")]
    pub band: String,
    /// Horizon T.
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long, default_value = "sigmoid")]
    pub payoff: String,
    /// `zero`, `const:c`, `ou` or `tanh:k`.
    #[arg(long, default_value = "zero")]
    pub drift: String,
    /// Lipschitz constant; defaults to the drift's own.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[arg(long, value_enum, default_value_t = Kind::Qv)]
    pub kind: Kind,
    #[arg(long, default_value_t = 401)]
    pub nx: usize,
    #[arg(long, default_value_t = -10.0)]
    pub x_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub x_max: f64,
    /// Fraction of the stable time step.
    #[arg(long, default_value_t = 0.9)]
    pub cfl: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Euler steps per path (power of two).
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub pieces: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, env = "GEXP_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Single worker thread.
    #[arg(long)]
    #[serde(skip)]
    pub sequential: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct GheatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct PbarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Pde)]
    pub method: MethodArg,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct HarnackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "sweep")]
    pub x: Option<f64>,
    #[arg(long, required_unless_present = "sweep")]
    pub y: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Pde)]
    pub method: MethodArg,
    /// Full certificate grid on the PDE backend.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = ConstantArg::Stated)]
    pub constant: ConstantArg,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct ShiftArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, required_unless_present = "sweep")]
    pub x: Option<f64>,
    #[arg(long, required_unless_present = "sweep")]
    pub v: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Pde)]
    pub method: MethodArg,
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct CouplingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub y: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// With `--format csv`, one row per simulated path.
    #[arg(long)]
    pub per_path: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct KernelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MeanModeArg::OuConsistent)]
    pub mean_mode: MeanModeArg,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 41)]
    pub ex38_nx: usize,
    #[arg(long, default_value_t = 121)]
    pub ex38_ny: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct AxiomArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Starting point for the Monte Carlo estimator.
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Gheat(a) => &a.common,
            Self::Pbar(a) => &a.common,
            Self::Harnack(a) => &a.common,
            Self::ShiftHarnack(a) => &a.common,
            Self::Coupling(a) => &a.common,
            Self::Kernels(a) => &a.common,
            Self::Axioms(a) => &a.common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Gheat(_) => "gheat",
            Self::Pbar(_) => "pbar",
            Self::Harnack(_) => "harnack",
            Self::ShiftHarnack(_) => "shift-harnack",
            Self::Coupling(_) => "coupling",
            Self::Kernels(_) => "kernels",
            Self::Axioms(_) => "axioms",
        }
    }
}

impl Common {
    fn band(&self) -> Result<VolatilityBand> {
        let parts: Vec<&str> = self.band.split(',').collect();
        let bad = || invalid("band", format!("expected `lo,hi`, got `{}`", self.band));
        if parts.len() != 2 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        VolatilityBand::new(lo, hi)
    }

    fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.nx, DtPolicy::AutoCfl(self.cfl))
    }

    fn mc(&self) -> Result<McConfig> {
        McConfig::new(self.paths, self.steps, self.seed)
    }

    fn payoff(&self) -> Result<TestFunction> {
        TestFunction::parse(&self.payoff)
    }

    fn spec(&self, kind: SdeKind) -> Result<GsdeSpec> {
        let drift = Drift::parse(&self.drift)?;
        let k = self.k.or_else(|| drift.natural_lipschitz()).unwrap_or(0.0);
        GsdeSpec::new(drift, k, kind)
    }

    fn sde_kind(&self) -> SdeKind {
        match self.kind {
            Kind::Time => SdeKind::TimeDriven,
            Kind::Qv | Kind::Gheat => SdeKind::QvDriven,
        }
    }

    fn pde_kind(&self) -> Result<PdeKind> {
        Ok(match self.kind {
            Kind::Gheat => PdeKind::GHeat,
            _ => PdeKind::from_spec(&self.spec(self.sde_kind())?),
        })
    }

    fn resolved_k(&self) -> Option<f64> {
        let drift = Drift::parse(&self.drift).ok()?;
        Some(self.k.or_else(|| drift.natural_lipschitz()).unwrap_or(0.0))
    }
}

/// The result of one subcommand before formatting.
struct Outcome {
    result: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    summary: Vec<String>,
    pass: bool,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn run_gheat(a: &GheatArgs) -> Result<Outcome> {
    let c = &a.common;
    let sol = solve(&c.pde_kind()?, &c.payoff()?, &c.band()?, c.horizon, &c.grid()?)?;
    let rows = sol.rows().map(|(x, u)| vec![num(x), num(u)]).collect();
    Ok(Outcome {
        result: json!({ "scheme": sol.scheme_meta, "x": sol.grid.nodes(), "u": sol.values }),
        header: strings(&["x", "u"]),
        rows,
        summary: vec![format!("scheme={} dt={} steps={}", sol.scheme_meta.kind, sol.scheme_meta.dt, sol.scheme_meta.steps)],
        pass: true,
    })
}

fn run_pbar(a: &PbarArgs) -> Result<Outcome> {
    let c = &a.common;
    let band = c.band()?;
    let payoff = c.payoff()?;
    let spec = c.spec(c.sde_kind())?;
    let pde = match a.method {
        MethodArg::Mc => None,
        _ => Some(match c.kind {
            Kind::Gheat => {
                crate::gheat::check_padding(a.x, c.horizon, &band, &c.grid()?)?;
                solve(&PdeKind::GHeat, &payoff, &band, c.horizon, &c.grid()?)?.value_at(a.x)?
            }
            _ => pbar_pde(&spec, &payoff, a.x, c.horizon, &band, &c.grid()?)?,
        }),
    };
    let mc = match a.method {
        MethodArg::Pde => None,
        _ => {
            let scenarios = make_scenario_lattice(&band, c.horizon, c.pieces, c.levels)?;
            Some(pbar_mc(&spec, &payoff, a.x, c.horizon, &scenarios, &c.mc()?)?)
        }
    };
    let mut rows = Vec::new();
    if let Some(v) = pde {
        rows.push(vec!["pde".into(), num(v), "0".into(), String::new()]);
    }
    if let Some(m) = &mc {
        rows.push(vec!["mc".into(), num(m.value), num(m.argmax().std_error), m.argmax().label.clone()]);
    }
    let cross = match (pde, &mc) {
        (Some(p), Some(m)) => {
            let slack = 3.0 * m.argmax().std_error + PDE_TOLERANCE * p.abs().max(1.0);
            let upper_ok = m.value <= p + slack;
            // with a single volatility level the lattice attains the sup
            let lower_ok = !band.is_degenerate() || m.value >= p - slack;
            Some(json!({ "slack": slack, "difference": m.value - p, "pass": upper_ok && lower_ok }))
        }
        _ => None,
    };
    let pass = cross.as_ref().is_none_or(|c| c["pass"] == json!(true));
    Ok(Outcome {
        result: json!({ "x": a.x, "pde": pde, "mc": mc, "cross_check": cross }),
        header: strings(&["method", "value", "std_error", "argmax_scenario"]),
        rows,
        summary: cross.iter().map(|c| format!("cross_check={c}")).collect(),
        pass,
    })
}

fn backend(method: MethodArg, c: &Common, band: &VolatilityBand) -> Result<Backend> {
    match method {
        MethodArg::Pde => Ok(Backend::Pde(c.grid()?)),
        MethodArg::Mc => Ok(Backend::Mc {
            scenarios: make_scenario_lattice(band, c.horizon, c.pieces, c.levels)?,
            mc: c.mc()?,
        }),
        MethodArg::Both => Err(invalid("method", "certificates use one backend at a time")),
    }
}

fn certificate_outcome(certs: Vec<HarnackCertificate>) -> Outcome {
    let header = strings(&[
        "kind", "drift", "K", "sigma_lo", "sigma_hi", "p", "T", "x", "y", "v", "payoff", "method", "lhs", "rhs", "exponent",
        "budget", "excess", "pass",
    ]);
    let rows = certs
        .iter()
        .map(|c| {
            vec![
                format!("{:?}", c.kind),
                c.drift.clone(),
                num(c.k),
                num(c.band.0),
                num(c.band.1),
                num(c.p),
                num(c.horizon),
                num(c.x),
                opt(c.y),
                opt(c.v),
                c.payoff.clone(),
                format!("{:?}", c.method).to_lowercase(),
                num(c.lhs),
                num(c.rhs),
                num(c.exponent),
                num(c.tolerance_budget),
                num(c.excess),
                c.pass.to_string(),
            ]
        })
        .collect();
    let failed = certs.iter().filter(|c| !c.pass).count();
    let worst = certs.iter().map(|c| c.excess - c.tolerance_budget).fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        result: json!({ "certificates": certs.len(), "failed": failed, "worst_excess_over_budget": worst, "items": certs }),
        header,
        rows,
        summary: vec![format!("certificates={} failed={failed}", certs.len())],
        pass: failed == 0,
    }
}

fn sweep_from(points: usize) -> Sweep {
    Sweep { points, ..Sweep::default() }
}

fn run_harnack(a: &HarnackArgs) -> Result<Outcome> {
    let c = &a.common;
    let constant = match a.constant {
        ConstantArg::Stated => HarnackConstant::Stated,
        ConstantArg::Holder => HarnackConstant::Holder,
    };
    if a.sweep {
        return Ok(certificate_outcome(sweep_from(a.points).harnack(&c.grid()?, constant)?));
    }
    let (x, y) = (a.x.expect("required by clap"), a.y.expect("required by clap"));
    let band = c.band()?;
    let spec = c.spec(SdeKind::QvDriven)?;
    let certs =
        harnack_certificates(&spec, &c.payoff()?, &band, c.horizon, a.p, &[(x, y)], &backend(a.method, c, &band)?, constant)?;
    Ok(certificate_outcome(certs))
}

fn run_shift(a: &ShiftArgs) -> Result<Outcome> {
    let c = &a.common;
    if a.sweep {
        return Ok(certificate_outcome(sweep_from(a.points).shift_harnack(&c.grid()?)?));
    }
    let (x, v) = (a.x.expect("required by clap"), a.v.expect("required by clap"));
    let band = c.band()?;
    let spec = c.spec(SdeKind::TimeDriven)?;
    let certs =
        shift_harnack_certificates(&spec, &c.payoff()?, &band, c.horizon, a.p, x, &[v], &backend(a.method, c, &band)?)?;
    Ok(certificate_outcome(certs))
}

fn run_coupling(a: &CouplingArgs) -> Result<Outcome> {
    let c = &a.common;
    let band = c.band()?;
    let spec = c.spec(SdeKind::QvDriven)?;
    let payoff = c.payoff()?;
    let scenarios = make_scenario_lattice(&band, c.horizon, c.pieces, c.levels)?;
    let runs = simulate_couplings(&spec, &band, a.x, &[a.y], c.horizon, &scenarios, &c.mc()?)?;
    let reports = runs.iter().map(|r| r.report(a.p, &payoff)).collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.passes());
    let (header, rows) = if a.per_path {
        let header = strings(&["scenario", "path", "x_t", "y_t", "x_tilde_t", "log_m", "control_energy", "tau_step"]);
        let mut rows = Vec::new();
        for r in &runs {
            for (i, p) in r.paths.iter().enumerate() {
                rows.push(vec![
                    r.scenario.clone(),
                    i.to_string(),
                    num(p.x_t),
                    num(p.y_t),
                    num(p.x_tilde_t),
                    num(p.log_m),
                    num(p.control_energy),
                    p.tau_step.map(|t| t.to_string()).unwrap_or_default(),
                ]);
            }
        }
        (header, rows)
    } else {
        let header = strings(&[
            "scenario",
            "coupling_gap",
            "log_novikov_max",
            "log_novikov_bound",
            "girsanov_gap",
            "girsanov_se",
            "m_mean",
            "mt_moment",
            "mt_moment_bound",
            "pass",
        ]);
        let rows = reports
            .iter()
            .map(|r| {
                vec![
                    r.scenario.clone(),
                    num(r.coupling_gap),
                    num(r.log_novikov_pathwise_max),
                    num(r.log_novikov_bound),
                    num(r.girsanov_identity_gap),
                    num(r.girsanov_std_error),
                    num(r.m_mean.mean),
                    num(r.mt_moment.mean),
                    num(r.mt_moment_bound),
                    r.passes().to_string(),
                ]
            })
            .collect();
        (header, rows)
    };
    let checks: Vec<Value> = reports.iter().map(|r| json!(mt_moment_check(r))).collect();
    Ok(Outcome {
        result: json!({ "reports": reports, "moment_checks": checks }),
        header,
        rows,
        summary: vec![format!("scenarios={} pass={pass}", reports.len())],
        pass,
    })
}

fn run_kernels(a: &KernelArgs) -> Result<Outcome> {
    let mode = match a.mean_mode {
        MeanModeArg::AsPrinted => MeanMode::AsPrinted,
        MeanModeArg::OuConsistent => MeanMode::OuConsistent,
    };
    let report = kernel_suite(mode, a.alpha, (a.ex38_nx, a.ex38_ny))?;
    let failures = report.failures();
    let rows = report
        .ex38
        .region
        .iter()
        .map(|r| vec![num(r.x), r.violations.to_string(), opt(r.y_lo), opt(r.y_hi)])
        .collect();
    let summary = vec![
        format!("dominance_violations={}", report.dominance.violations),
        format!("ex38_violations={} p_sum_violations={}", report.ex38.violations, report.ex38.p_sum_violations),
        format!("failures={}", failures.len()),
    ];
    Ok(Outcome {
        result: json!({ "report": report, "failures": failures }),
        header: strings(&["x", "violations", "y_lo", "y_hi"]),
        rows,
        summary,
        pass: failures.is_empty(),
    })
}

fn run_axioms(a: &AxiomArgs) -> Result<Outcome> {
    let c = &a.common;
    let band = c.band()?;
    let spec = c.spec(c.sde_kind())?;
    let catalog = TestFunction::catalog();
    let mut rows = pde_axioms(&spec, &band, c.horizon, &c.grid()?, &catalog)?;
    let scenarios = make_scenario_lattice(&band, c.horizon, c.pieces, c.levels)?;
    rows.extend(mc_axioms(&spec, a.x, &scenarios, &c.mc()?, &catalog)?);
    let pass = rows.iter().all(|r| r.pass);
    let table = rows
        .iter()
        .map(|r| vec![r.backend.to_string(), format!("{:?}", r.axiom), r.case.clone(), num(r.worst), num(r.allowed), r.pass.to_string()])
        .collect();
    Ok(Outcome {
        result: json!({ "rows": rows }),
        header: strings(&["backend", "axiom", "case", "worst", "allowed", "pass"]),
        rows: table,
        summary: vec![format!("checks={} failed={}", rows.len(), rows.iter().filter(|r| !r.pass).count())],
        pass,
    })
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Gheat(a) => run_gheat(a),
        Command::Pbar(a) => run_pbar(a),
        Command::Harnack(a) => run_harnack(a),
        Command::ShiftHarnack(a) => run_shift(a),
        Command::Coupling(a) => run_coupling(a),
        Command::Kernels(a) => run_kernels(a),
        Command::Axioms(a) => run_axioms(a),
    }
}

fn render(cmd: &Command, outcome: &Outcome) -> Result<Vec<u8>> {
    let common = cmd.common();
    let mut config = serde_json::to_value(cmd)?;
    if let Some(k) = common.resolved_k() {
        if let Some(inner) = config.get_mut(cmd.name()).and_then(Value::as_object_mut) {
            inner.insert("K".into(), json!(k));
        }
    }
    let mut buf = Vec::new();
    match common.format {
        Format::Json => {
            let env = json!({
                "schema": SCHEMA,
                "version": crate::VERSION,
                "subcommand": cmd.name(),
                "config": config,
                "pass": outcome.pass,
                "result": outcome.result,
            });
            serde_json::to_writer_pretty(&mut buf, &env)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            writeln!(buf, "# gexp {} schema {SCHEMA} subcommand {}", crate::VERSION, cmd.name())?;
            writeln!(buf, "# config {}", serde_json::to_string(&config)?)?;
            for s in &outcome.summary {
                writeln!(buf, "# {s}")?;
            }
            writeln!(buf, "# pass {}", outcome.pass)?;
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&outcome.header)?;
            for r in &outcome.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(buf)
}

/// Reads `key = value` lines into flag arguments.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid("config", format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid("config", format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(invalid("config", "nested configuration files are not supported"));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

/// Inserts configuration-file flags right after the subcommand so that flags
/// given on the command line override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let Some(sub) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1) else {
        return Ok(args);
    };
    let mut out: Vec<OsString> = args[..=sub].to_vec();
    out.extend(config_args(&path)?);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    let common = cli.command.common();
    let threads = if common.sequential { Some(1) } else { common.threads };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let outcome = pool.install(|| dispatch(&cli.command))?;
    emit(&render(&cli.command, &outcome)?, common.out.as_deref())?;
    Ok(outcome.pass)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
