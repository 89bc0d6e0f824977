//! Domain types shared by every backend: the volatility band, piecewise-constant
//! volatility scenarios, drift handles and G-SDE specifications, the bounded
//! test-function catalog and Monte Carlo configuration.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, GexpError, Result};

/// Default cap on the number of scenarios a lattice may enumerate.
pub const DEFAULT_LATTICE_CAP: usize = 4096;

/// The volatility uncertainty interval `[sigma_lo, sigma_hi]`.
///
/// Every admissible scenario has quadratic-variation increments between
/// `sigma_lo² (t - s)` and `sigma_hi² (t - s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityBand {
    sigma_lo: f64,
    sigma_hi: f64,
}

impl VolatilityBand {
    pub fn new(sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        if !(sigma_lo.is_finite() && sigma_hi.is_finite()) || sigma_lo <= 0.0 {
            return Err(invalid("band", format!("need 0 < sigma_lo, got ({sigma_lo}, {sigma_hi})")));
        }
        if sigma_lo > sigma_hi {
            return Err(invalid("band", format!("sigma_lo {sigma_lo} > sigma_hi {sigma_hi}")));
        }
        Ok(Self { sigma_lo, sigma_hi })
    }

    /// Classical reduction `sigma_lo = sigma_hi = sigma`.
    pub fn degenerate(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    pub fn sigma_lo(&self) -> f64 {
        self.sigma_lo
    }

    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi
    }

    pub fn var_lo(&self) -> f64 {
        self.sigma_lo * self.sigma_lo
    }

    pub fn var_hi(&self) -> f64 {
        self.sigma_hi * self.sigma_hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_lo == self.sigma_hi
    }

    pub fn contains_var(&self, v: f64) -> bool {
        v >= self.var_lo() && v <= self.var_hi()
    }
}

impl fmt::Display for VolatilityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.sigma_lo, self.sigma_hi)
    }
}

/// A piecewise-constant squared-volatility control on `[0, T]`.
///
/// `values[i]` is the variance rate on `[breakpoints[i], breakpoints[i+1])`;
/// the induced quadratic variation is continuous and piecewise linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl Scenario {
    pub fn new(band: &VolatilityBand, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(invalid(
                "scenario",
                format!("{} breakpoints for {} values", breakpoints.len(), values.len()),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(invalid("scenario", "first breakpoint must be 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || !breakpoints.iter().all(|t| t.is_finite()) {
            return Err(invalid("scenario", "breakpoints must be finite and strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !band.contains_var(**v)) {
            return Err(invalid(
                "scenario",
                format!("level {v} outside [{}, {}]", band.var_lo(), band.var_hi()),
            ));
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        cumulative.push(0.0);
        for (i, v) in values.iter().enumerate() {
            let last = cumulative[i];
            cumulative.push(last + v * (breakpoints[i + 1] - breakpoints[i]));
        }
        Ok(Self { breakpoints, values, cumulative })
    }

    /// Constant scenario `v` on `[0, horizon]`.
    pub fn constant(band: &VolatilityBand, v: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        Self::new(band, vec![0.0, horizon], vec![v])
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫₀^t v_s ds`, exact on the piecewise-linear closed form.
    pub fn qv_at(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(GexpError::TimeOutOfRange { t, horizon });
        }
        Ok(self.qv_unchecked(t))
    }

    pub(crate) fn qv_unchecked(&self, t: f64) -> f64 {
        let m = self.values.len();
        if t >= self.horizon() {
            return self.cumulative[m];
        }
        // index of the piece containing t
        let i = self.breakpoints.partition_point(|b| *b <= t).saturating_sub(1).min(m - 1);
        self.cumulative[i] + self.values[i] * (t - self.breakpoints[i])
    }

    /// Quadratic variation on the uniform grid `k T / n_steps`, `k = 0..=n_steps`.
    pub fn qv_grid(&self, n_steps: usize) -> Vec<f64> {
        let h = self.horizon() / n_steps as f64;
        (0..=n_steps)
            .map(|k| if k == n_steps { self.cumulative[self.values.len()] } else { self.qv_unchecked(k as f64 * h) })
            .collect()
    }

    /// Merges adjacent pieces with equal levels; two scenarios with the same
    /// canonical form induce the same quadratic variation.
    pub fn canonical(&self) -> (Vec<f64>, Vec<f64>) {
        let mut bps = vec![self.breakpoints[0]];
        let mut vals: Vec<f64> = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            if vals.last() == Some(v) {
                *bps.last_mut().unwrap() = self.breakpoints[i + 1];
            } else {
                vals.push(*v);
                bps.push(self.breakpoints[i + 1]);
            }
        }
        (bps, vals)
    }

    pub fn label(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v}")).collect();
        format!("v=[{}]", vals.join(","))
    }
}

/// Enumerates every piecewise-constant control on a uniform partition of
/// `[0, horizon]` into `pieces` intervals with levels on a uniform grid of
/// `[sigma_lo², sigma_hi²]`.
pub fn make_scenario_lattice(
    band: &VolatilityBand,
    horizon: f64,
    pieces: usize,
    levels: usize,
) -> Result<Vec<Scenario>> {
    make_scenario_lattice_capped(band, horizon, pieces, levels, DEFAULT_LATTICE_CAP)
}

pub fn make_scenario_lattice_capped(
    band: &VolatilityBand,
    horizon: f64,
    pieces: usize,
    levels: usize,
    cap: usize,
) -> Result<Vec<Scenario>> {
    if pieces == 0 {
        return Err(invalid("pieces", "must be at least 1"));
    }
    if levels == 0 {
        return Err(invalid("levels", "must be at least 1"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon", format!("must be positive, got {horizon}")));
    }
    let grid: Vec<f64> = if band.is_degenerate() || levels == 1 {
        vec![band.var_hi()]
    } else {
        let (lo, hi) = (band.var_lo(), band.var_hi());
        (0..levels)
            .map(|i| if i + 1 == levels { hi } else { lo + (hi - lo) * i as f64 / (levels - 1) as f64 })
            .collect()
    };
    let requested = (grid.len() as u128).checked_pow(pieces as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(GexpError::LatticeTooLarge { requested, cap });
    }
    let breakpoints: Vec<f64> = (0..=pieces)
        .map(|i| if i == pieces { horizon } else { horizon * i as f64 / pieces as f64 })
        .collect();

    let base = grid.len();
    let mut out = Vec::with_capacity(requested as usize + 1);
    for index in 0..requested as usize {
        // base-`levels` digits of the index, last piece fastest
        let mut values = vec![0.0; pieces];
        let mut rest = index;
        for slot in values.iter_mut().rev() {
            *slot = grid[rest % base];
            rest /= base;
        }
        out.push(Scenario::new(band, breakpoints.clone(), values)?);
    }
    // both constant extremes are always admissible members
    for extreme in [band.var_lo(), band.var_hi()] {
        if !out.iter().any(|s| s.values.iter().all(|v| *v == extreme)) {
            out.push(Scenario::new(band, breakpoints.clone(), vec![extreme; pieces])?);
        }
    }
    Ok(out)
}

/// Drops scenarios that induce the same quadratic variation as an earlier one.
pub fn dedup_scenarios(scenarios: Vec<Scenario>) -> Vec<Scenario> {
    let mut seen: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut out = Vec::new();
    for s in scenarios {
        let c = s.canonical();
        if !seen.contains(&c) {
            seen.push(c);
            out.push(s);
        }
    }
    out
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A named drift `b: ℝ → ℝ`.
#[derive(Clone)]
pub struct Drift {
    id: String,
    f: RealFn,
    shape: Shape,
}

/// Closed forms of the catalog drifts, for monomorphized inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Shape {
    Constant(f64),
    Linear(f64),
    Tanh(f64),
    Custom,
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Drift").field("id", &self.id).finish()
    }
}

impl Drift {
    pub fn zero() -> Self {
        Self { id: "zero".into(), f: Arc::new(|_| 0.0), shape: Shape::Constant(0.0) }
    }

    pub fn constant(c: f64) -> Self {
        Self { id: format!("const:{c}"), f: Arc::new(move |_| c), shape: Shape::Constant(c) }
    }

    /// `b(x) = -x`.
    pub fn ou() -> Self {
        Self { id: "ou".into(), f: Arc::new(|x| -x), shape: Shape::Linear(-1.0) }
    }

    /// `b(x) = -k tanh(x)`.
    pub fn tanh(k: f64) -> Self {
        Self { id: format!("tanh:{k}"), f: Arc::new(move |x| -k * x.tanh()), shape: Shape::Tanh(k) }
    }

    pub fn custom(id: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { id: id.into(), f: Arc::new(f), shape: Shape::Custom }
    }

    /// Parses the catalog ids `zero`, `const:c`, `ou`, `tanh:K`.
    pub fn parse(id: &str) -> Result<Self> {
        let unknown = || GexpError::Unknown { what: "drift", id: id.to_string() };
        let (head, arg) = match id.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (id, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(unknown)?.trim().parse::<f64>().map_err(|_| unknown())
        };
        match head {
            "zero" if arg.is_none() => Ok(Self::zero()),
            "ou" if arg.is_none() => Ok(Self::ou()),
            "const" => Ok(Self::constant(num(arg)?)),
            "tanh" => Ok(Self::tanh(num(arg)?)),
            _ => Err(unknown()),
        }
    }

    /// Smallest Lipschitz constant of the catalog drifts.
    pub fn natural_lipschitz(&self) -> Option<f64> {
        let (head, arg) = self.id.split_once(':').unwrap_or((&self.id, ""));
        match head {
            "zero" | "const" => Some(0.0),
            "ou" => Some(1.0),
            "tanh" => arg.parse::<f64>().ok().map(f64::abs),
            _ => None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub(crate) fn shape(&self) -> Shape {
        self.shape
    }
}

/// Which clock drives the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdeKind {
    /// `dX = b(X) d⟨B⟩ + dB`
    QvDriven,
    /// `dX = b(X) dt + dB`
    TimeDriven,
}

#[derive(Debug, Clone)]
pub struct GsdeSpec {
    pub drift: Drift,
    pub lipschitz_k: f64,
    pub kind: SdeKind,
}

impl GsdeSpec {
    /// Spot-checks `|b(x) - b(y)| ≤ K |x - y|` on a sample grid of `[-20, 20]`.
    pub fn new(drift: Drift, lipschitz_k: f64, kind: SdeKind) -> Result<Self> {
        if !(lipschitz_k >= 0.0) || !lipschitz_k.is_finite() {
            return Err(invalid("K", format!("must be a finite nonnegative number, got {lipschitz_k}")));
        }
        let fine: Vec<f64> = (0..=800).map(|i| -20.0 + 0.05 * i as f64).collect();
        let coarse: Vec<f64> = (0..=40).map(|i| -20.0 + i as f64).collect();
        let check = |x: f64, y: f64| -> Result<()> {
            let lhs = (drift.eval(x) - drift.eval(y)).abs();
            if lhs > lipschitz_k * (x - y).abs() * (1.0 + 1e-12) + 1e-12 {
                return Err(GexpError::LipschitzViolation { drift: drift.id().to_string(), k: lipschitz_k, x, y });
            }
            Ok(())
        };
        for w in fine.windows(2) {
            check(w[0], w[1])?;
        }
        for (i, x) in coarse.iter().enumerate() {
            for y in &coarse[i + 1..] {
                check(*x, *y)?;
            }
        }
        Ok(Self { drift, lipschitz_k, kind })
    }

    /// Catalog drift with its natural Lipschitz constant.
    pub fn from_catalog(id: &str, kind: SdeKind) -> Result<Self> {
        let drift = Drift::parse(id)?;
        let k = drift.natural_lipschitz().unwrap_or(0.0);
        Self::new(drift, k, kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convexity {
    Convex,
    Concave,
    Neither,
}

/// A bounded payoff with its known sup-norm.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    eval: RealFn,
    positive: bool,
    convexity: Convexity,
    bound: f64,
    /// Points where the function is not smooth; quadrature splits there.
    kinks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("positive", &self.positive)
            .field("convexity", &self.convexity)
            .field("bound", &self.bound)
            .finish()
    }
}

pub const DEFAULT_CLIP: f64 = 25.0;
pub const DEFAULT_INDICATOR: (f64, f64, f64) = (-1.0, 1.0, 0.25);

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl TestFunction {
    pub fn new(
        id: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        positive: bool,
        convexity: Convexity,
        bound: f64,
    ) -> Self {
        Self { id: id.into(), eval: Arc::new(eval), positive, convexity, bound, kinks: Vec::new() }
    }

    /// Declares points where the function is not smooth.
    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn constant(c: f64) -> Self {
        let id = if c == 1.0 { "one".to_string() } else { format!("const:{c}") };
        Self::new(id, move |_| c, c >= 0.0, Convexity::Convex, c.abs())
    }

    pub fn sigmoid() -> Self {
        Self::new("sigmoid", logistic, true, Convexity::Neither, 1.0)
    }

    /// `1 / (1 + x²)`.
    pub fn lorentz() -> Self {
        Self::new("lorentz", |x| 1.0 / (1.0 + x * x), true, Convexity::Neither, 1.0)
    }

    /// Logistic-smoothed indicator of `[a, b]` with transition width `width`.
    pub fn smoothed_indicator(a: f64, b: f64, width: f64) -> Self {
        let id = if (a, b, width) == DEFAULT_INDICATOR {
            "indicator".to_string()
        } else {
            format!("indicator:{a},{b},{width}")
        };
        Self::new(
            id,
            move |x| logistic((x - a) / width) * logistic((b - x) / width),
            true,
            Convexity::Neither,
            1.0,
        )
    }

    /// `min(x², cap)`.
    pub fn clipped_square(cap: f64) -> Self {
        let id = if cap == DEFAULT_CLIP { "clipped-x2".to_string() } else { format!("clipped-x2:{cap}") };
        let mut f = Self::new(id, move |x| (x * x).min(cap), true, Convexity::Neither, cap);
        f.kinks = vec![-cap.sqrt(), cap.sqrt()];
        f
    }

    /// The five-member catalog used by the certificate and axiom suites.
    pub fn catalog() -> Vec<Self> {
        let (a, b, w) = DEFAULT_INDICATOR;
        vec![
            Self::constant(1.0),
            Self::sigmoid(),
            Self::lorentz(),
            Self::smoothed_indicator(a, b, w),
            Self::clipped_square(DEFAULT_CLIP),
        ]
    }

    /// Parses `one`, `const:c`, `sigmoid`, `lorentz`, `indicator[:a,b,w]`, `clipped-x2[:cap]`.
    pub fn parse(id: &str) -> Result<Self> {
        let unknown = || GexpError::Unknown { what: "payoff", id: id.to_string() };
        let (head, arg) = match id.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (id, None),
        };
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| unknown())).collect()
        };
        match (head, arg) {
            ("one", None) => Ok(Self::constant(1.0)),
            ("const", Some(a)) => Ok(Self::constant(nums(a)?.first().copied().ok_or_else(unknown)?)),
            ("sigmoid", None) => Ok(Self::sigmoid()),
            ("lorentz", None) => Ok(Self::lorentz()),
            ("indicator", None) => {
                let (a, b, w) = DEFAULT_INDICATOR;
                Ok(Self::smoothed_indicator(a, b, w))
            }
            ("indicator", Some(a)) => match nums(a)?.as_slice() {
                [a, b, w] if a < b && *w > 0.0 => Ok(Self::smoothed_indicator(*a, *b, *w)),
                _ => Err(unknown()),
            },
            ("clipped-x2", None) => Ok(Self::clipped_square(DEFAULT_CLIP)),
            ("clipped-x2", Some(a)) => match nums(a)?.as_slice() {
                [cap] if *cap > 0.0 => Ok(Self::clipped_square(*cap)),
                _ => Err(unknown()),
            },
            _ => Err(unknown()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// `λ f`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = self.eval.clone();
        let convexity = match (self.convexity, lambda >= 0.0) {
            (c, true) => c,
            (Convexity::Convex, false) => Convexity::Concave,
            (Convexity::Concave, false) => Convexity::Convex,
            (Convexity::Neither, false) => Convexity::Neither,
        };
        Self {
            id: format!("{lambda}*{}", self.id),
            eval: Arc::new(move |x| lambda * inner(x)),
            positive: self.positive && lambda >= 0.0,
            convexity,
            bound: self.bound * lambda.abs(),
            kinks: self.kinks.clone(),
        }
    }

    pub fn negated(&self) -> Self {
        let mut f = self.scaled(-1.0);
        f.id = format!("-{}", self.id);
        f
    }

    /// Pointwise `f^p`; requires a nonnegative function.
    pub fn powf(&self, p: f64) -> Result<Self> {
        if !self.positive {
            return Err(GexpError::NegativePayoff { id: self.id.clone() });
        }
        let inner = self.eval.clone();
        Ok(Self {
            id: format!("{}^{p}", self.id),
            eval: Arc::new(move |x| inner(x).powf(p)),
            positive: true,
            convexity: Convexity::Neither,
            bound: self.bound.powf(p),
            kinks: self.kinks.clone(),
        })
    }

    /// `x ↦ f(v + x)`.
    pub fn shifted(&self, v: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            id: format!("{}(·+{v})", self.id),
            eval: Arc::new(move |x| inner(x + v)),
            positive: self.positive,
            convexity: self.convexity,
            bound: self.bound,
            kinks: self.kinks.iter().map(|k| k - v).collect(),
        }
    }

    /// Pointwise sum `f + g`.
    pub fn plus(&self, other: &Self) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let convexity = if self.convexity == other.convexity { self.convexity } else { Convexity::Neither };
        let mut kinks = self.kinks.clone();
        kinks.extend_from_slice(&other.kinks);
        Self {
            id: format!("{}+{}", self.id, other.id),
            eval: Arc::new(move |x| f(x) + g(x)),
            positive: self.positive && other.positive,
            convexity,
            bound: self.bound + other.bound,
            kinks,
        }
    }

    pub fn require_nonnegative(&self) -> Result<()> {
        if self.positive {
            Ok(())
        } else {
            Err(GexpError::NegativePayoff { id: self.id.clone() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Novikov slack ε₀.
    pub epsilon0: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(invalid("n_paths", "must be positive"));
        }
        if !n_steps.is_power_of_two() {
            return Err(invalid("n_steps", format!("must be a power of two, got {n_steps}")));
        }
        Ok(Self { n_paths, n_steps, seed, epsilon0: 0.5 })
    }

    pub fn with_epsilon0(mut self, epsilon0: f64) -> Result<Self> {
        if !(epsilon0 > 0.0) {
            return Err(invalid("epsilon0", "must be positive"));
        }
        self.epsilon0 = epsilon0;
        Ok(self)
    }
}
