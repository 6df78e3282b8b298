//! Run configuration: a single JSON file, validated section by section.
//!
//! Every section is checked even after an earlier one fails, so a bad file
//! reports all of its problems at once.

use std::fmt;
use std::path::{Path, PathBuf};

use invdp_core::demand::Demand;
use invdp_core::{
    Belief, BoundaryConvention, Clamping, ContainerPartition, ContainerSpec, CostModel, HoldingCost,
    InventoryDynamics, InventoryModel, Lattice,
};
use serde::Deserialize;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveFinite,
    SolveDiscounted,
    SolveAverage,
    Classify,
    VerifyStructure,
    PomdpSolve,
    PomdpSimulate,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveFinite => "solve-finite",
            Command::SolveDiscounted => "solve-discounted",
            Command::SolveAverage => "solve-average",
            Command::Classify => "classify",
            Command::VerifyStructure => "verify-structure",
            Command::PomdpSolve => "pomdp-solve",
            Command::PomdpSimulate => "pomdp-simulate",
            Command::Simulate => "simulate",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Command::Simulate | Command::PomdpSimulate)
    }

    fn needs_pomdp(self) -> bool {
        matches!(self, Command::PomdpSolve | Command::PomdpSimulate)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    /// `section: message` entries.
    Validation(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(msg) => write!(f, "PARSE_ERROR: {msg}"),
            ConfigError::Parse(msg) => write!(f, "PARSE_ERROR: {msg}"),
            ConfigError::Validation(errors) => {
                write!(f, "VALIDATION_ERRORS ({}):", errors.len())?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

// Raw file layout. Everything is optional here so that missing keys become
// validation errors rather than parse errors.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    demand: Option<RawDemand>,
    cost: Option<RawCost>,
    grid: Option<RawGrid>,
    actions: Option<RawActions>,
    dynamics: Option<String>,
    solver: Option<RawSolver>,
    simulate: Option<RawSimulate>,
    pomdp: Option<RawPomdp>,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    atoms: Option<Vec<(f64, f64)>>,
    cdf: Option<Vec<(f64, f64)>>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    #[serde(rename = "K")]
    k: Option<f64>,
    c_unit: Option<f64>,
    holding: Option<RawHolding>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHolding {
    breakpoints: Option<Vec<f64>>,
    slopes: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lo: Option<f64>,
    hi: Option<f64>,
    step: Option<f64>,
    clamping: Option<String>,
    mass_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActions {
    a_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    alpha: Option<f64>,
    eps: Option<f64>,
    horizon: Option<usize>,
    terminal: Option<String>,
    ladder: Option<Vec<f64>>,
    k_tail: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    x0: Option<f64>,
    horizon: Option<usize>,
    reps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPomdp {
    containers: Option<Vec<RawContainer>>,
    convention: Option<String>,
    prior: Option<Vec<(f64, f64)>>,
    horizon: Option<usize>,
    max_nodes: Option<usize>,
    reps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContainer {
    lo: f64,
    hi: f64,
    transparent: bool,
    rep: Option<f64>,
}

/// Terminal values for finite-horizon solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Zero,
    /// Infinite-horizon values of the same model with `K = 0`.
    ZeroSetupValue,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub alpha: Option<f64>,
    pub eps: f64,
    pub horizon: Option<usize>,
    pub terminal: Terminal,
    pub ladder: Vec<f64>,
    pub k_tail: usize,
}

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    /// Starting inventory level (a grid value).
    pub x0: f64,
    /// Explicit horizon; otherwise chosen from the truncation bound.
    pub horizon: Option<usize>,
    pub reps: usize,
}

#[derive(Debug, Clone)]
pub struct PomdpConfig {
    pub partition: ContainerPartition,
    pub prior: Belief,
    pub horizon: usize,
    pub max_nodes: usize,
    pub reps: usize,
}

/// A fully validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub model: InventoryModel,
    pub solver: SolverConfig,
    pub simulate: SimulateConfig,
    pub pomdp: Option<PomdpConfig>,
    pub output: PathBuf,
    pub seed: Option<u64>,
    /// The parsed file, echoed into the report.
    pub echo: serde_json::Value,
}

#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, section: &str, msg: impl fmt::Display) {
        self.0.push(format!("{section}: {msg}"));
    }

    fn missing(&mut self, section: &str, key: &str) {
        self.push(section, format_args!("missing required key `{key}`"));
    }

    fn require<T>(&mut self, value: Option<T>, section: &str, key: &str) -> Option<T> {
        if value.is_none() {
            self.missing(section, key);
        }
        value
    }
}

pub fn load_config(path: &Path, command: Command, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, command, seed_override)
}

pub fn parse_config(text: &str, command: Command, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
    let echo: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let raw: RawConfig = serde_json::from_value(echo.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut errs = Errors::default();

    let demand = raw.demand.and_then(|d| demand(d, &mut errs));
    if demand.is_none() && !errs.0.iter().any(|e| e.starts_with("demand")) {
        errs.missing("demand", "demand");
    }
    let cost = match raw.cost {
        Some(c) => cost(c, &mut errs),
        None => {
            errs.missing("cost", "cost");
            None
        }
    };
    let (lattice, clamping) = match raw.grid {
        Some(g) => grid(g, &mut errs),
        None => {
            errs.missing("grid", "grid");
            (None, Clamping::Record)
        }
    };
    let dynamics = match raw.dynamics.as_deref() {
        None | Some("backorder") => Some(InventoryDynamics::Backorder),
        Some("lost_sales") => Some(InventoryDynamics::LostSales),
        Some(other) => {
            errs.push("dynamics", format_args!("unknown dynamics `{other}` (expected backorder or lost_sales)"));
            None
        }
    };
    let a_max = actions(raw.actions, lattice.as_ref(), &mut errs);
    let solver = solver(raw.solver.unwrap_or_default(), command, &mut errs);
    let simulate = simulate(raw.simulate.unwrap_or_default(), lattice.as_ref(), command == Command::Simulate, &mut errs);

    let seed = seed_override.or(raw.seed);
    if command.needs_seed() && seed.is_none() {
        errs.push("seed", format_args!("`{}` needs a seed (config key `seed` or --seed)", command.name()));
    }

    let pomdp = match (raw.pomdp, lattice) {
        (Some(p), Some(lat)) => pomdp(p, lat, &mut errs),
        (Some(_), None) => None,
        (None, _) => {
            if command.needs_pomdp() {
                errs.missing("pomdp", "pomdp");
            }
            None
        }
    };

    let model = match (cost, demand, lattice, a_max, dynamics) {
        (Some(c), Some(d), Some(lat), Some(a), Some(dy)) => match InventoryModel::new(c, d, lat, a, dy) {
            Ok(m) => Some(m.with_clamping(clamping)),
            Err(e) => {
                errs.push("grid", e);
                None
            }
        },
        _ => None,
    };

    if !errs.0.is_empty() {
        return Err(ConfigError::Validation(errs.0));
    }
    Ok(RunConfig {
        command,
        model: model.expect("validated"),
        solver: solver.expect("validated"),
        simulate: simulate.expect("validated"),
        pomdp,
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        seed,
        echo,
    })
}

fn demand(raw: RawDemand, errs: &mut Errors) -> Option<Demand> {
    let step = errs.require(raw.step, "demand", "step");
    let built = match (raw.atoms, raw.cdf) {
        (Some(atoms), None) => step.map(|s| Demand::from_atoms(&atoms, s)),
        (None, Some(cdf)) => step.map(|s| Demand::quantize(&cdf, s)),
        (Some(_), Some(_)) => {
            errs.push("demand", "give either `atoms` or `cdf`, not both");
            None
        }
        (None, None) => {
            errs.push("demand", "missing `atoms` or `cdf`");
            None
        }
    }?;
    built.map_err(|e| errs.push("demand", e)).ok()
}

fn cost(raw: RawCost, errs: &mut Errors) -> Option<CostModel> {
    let k = errs.require(raw.k, "cost", "K");
    let unit = errs.require(raw.c_unit, "cost", "c_unit");
    let holding = match raw.holding {
        Some(h) => {
            let b = errs.require(h.breakpoints, "cost.holding", "breakpoints");
            let s = errs.require(h.slopes, "cost.holding", "slopes");
            match (b, s) {
                (Some(b), Some(s)) => HoldingCost::new(b, s).map_err(|e| errs.push("cost.holding", e)).ok(),
                _ => None,
            }
        }
        None => {
            errs.missing("cost", "holding");
            None
        }
    };
    let (k, unit) = (k?, unit?);
    // check the scalar constraints even when the holding section failed
    let probe = HoldingCost::linear(1.0, 1.0).expect("valid");
    if let Err(e) = CostModel::new(k, unit, probe) {
        errs.push("cost", e);
        return None;
    }
    CostModel::new(k, unit, holding?).map_err(|e| errs.push("cost", e)).ok()
}

fn grid(raw: RawGrid, errs: &mut Errors) -> (Option<Lattice>, Clamping) {
    let clamping = match raw.clamping.as_deref() {
        None | Some("record") => Clamping::Record,
        Some("reject") => {
            let tol = raw.mass_tol.unwrap_or(DEFAULT_MASS_TOL);
            if tol.is_finite() && tol >= 0.0 {
                Clamping::Reject { mass_tol: tol }
            } else {
                errs.push("grid", "`mass_tol` must be finite and >= 0");
                Clamping::Record
            }
        }
        Some(other) => {
            errs.push("grid", format_args!("unknown clamping `{other}` (expected record or reject)"));
            Clamping::Record
        }
    };
    let lo = errs.require(raw.lo, "grid", "lo");
    let hi = errs.require(raw.hi, "grid", "hi");
    let step = errs.require(raw.step, "grid", "step");
    let lattice = match (lo, hi, step) {
        (Some(lo), Some(hi), Some(step)) => Lattice::from_values(lo, hi, step).map_err(|e| errs.push("grid", e)).ok(),
        _ => None,
    };
    (lattice, clamping)
}

fn actions(raw: Option<RawActions>, lattice: Option<&Lattice>, errs: &mut Errors) -> Option<i64> {
    let lat = lattice?;
    let Some(a_max) = raw.and_then(|a| a.a_max) else {
        // default: any order that stays on the grid
        return Some(lat.hi() - lat.lo());
    };
    let steps = a_max / lat.step();
    if !(a_max >= 0.0) || (steps - steps.round()).abs() > 1e-9 {
        errs.push("actions", format_args!("`a_max` = {a_max} must be a nonnegative multiple of the grid step"));
        return None;
    }
    Some(steps.round() as i64)
}

fn solver(raw: RawSolver, command: Command, errs: &mut Errors) -> Option<SolverConfig> {
    let mut ok = true;
    let needs_alpha = !matches!(command, Command::SolveAverage);
    if needs_alpha && raw.alpha.is_none() {
        errs.missing("solver", "alpha");
        ok = false;
    }
    if let Some(a) = raw.alpha {
        let max_ok = if matches!(command, Command::SolveFinite | Command::VerifyStructure | Command::PomdpSolve | Command::PomdpSimulate) {
            a <= 1.0
        } else {
            a < 1.0
        };
        if !(a >= 0.0 && max_ok) {
            errs.push("solver", format_args!("`alpha` = {a} out of range for `{}`", command.name()));
            ok = false;
        }
    }
    let eps = raw.eps.unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps.is_finite()) {
        errs.push("solver", "`eps` must be positive");
        ok = false;
    }
    if matches!(command, Command::SolveFinite | Command::VerifyStructure) && raw.horizon.is_none() {
        errs.missing("solver", "horizon");
        ok = false;
    }
    let terminal = match raw.terminal.as_deref() {
        None | Some("zero") => Terminal::Zero,
        Some("zero_setup_value") => Terminal::ZeroSetupValue,
        Some(other) => {
            errs.push("solver", format_args!("unknown terminal `{other}` (expected zero or zero_setup_value)"));
            ok = false;
            Terminal::Zero
        }
    };
    if terminal == Terminal::ZeroSetupValue && raw.alpha.is_some_and(|a| a >= 1.0) {
        errs.push("solver", "terminal `zero_setup_value` needs alpha < 1");
        ok = false;
    }
    let ladder = raw.ladder.unwrap_or_else(|| invdp_core::average::DEFAULT_LADDER.to_vec());
    if ladder.is_empty()
        || ladder.iter().any(|a| !(0.0..1.0).contains(a))
        || ladder.windows(2).any(|w| w[1] <= w[0])
    {
        errs.push("solver", "`ladder` must be a nonempty strictly increasing list in [0, 1)");
        ok = false;
    }
    let k_tail = raw.k_tail.unwrap_or(invdp_core::average::DEFAULT_K_TAIL);
    if k_tail == 0 || k_tail > ladder.len().max(1) {
        errs.push("solver", "`k_tail` must lie in 1..=ladder length");
        ok = false;
    }
    ok.then_some(SolverConfig { alpha: raw.alpha, eps, horizon: raw.horizon, terminal, ladder, k_tail })
}

fn simulate(raw: RawSimulate, lattice: Option<&Lattice>, used: bool, errs: &mut Errors) -> Option<SimulateConfig> {
    let mut ok = true;
    let x0 = raw.x0.unwrap_or(0.0);
    if let Some(lat) = lattice.filter(|_| used) {
        if lat.level_of_value(x0).ok().and_then(|l| lat.position(l)).is_none() {
            errs.push("simulate", format_args!("`x0` = {x0} is not a grid point"));
            ok = false;
        }
    }
    let reps = raw.reps.unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        errs.push("simulate", "`reps` must be positive");
        ok = false;
    }
    ok.then_some(SimulateConfig { x0, horizon: raw.horizon, reps })
}

fn pomdp(raw: RawPomdp, lattice: Lattice, errs: &mut Errors) -> Option<PomdpConfig> {
    let convention = match raw.convention.as_deref() {
        None | Some("lower_closed") => Some(BoundaryConvention::LowerClosed),
        Some("upper_closed") => Some(BoundaryConvention::UpperClosed),
        Some(other) => {
            errs.push("pomdp", format_args!("unknown convention `{other}` (expected lower_closed or upper_closed)"));
            None
        }
    };
    let partition = match (errs.require(raw.containers, "pomdp", "containers"), convention) {
        (Some(cs), Some(conv)) => {
            let specs: Vec<ContainerSpec> = cs
                .iter()
                .map(|c| ContainerSpec { lo: c.lo, hi: c.hi, transparent: c.transparent, rep: c.rep })
                .collect();
            ContainerPartition::new(lattice, &specs, conv).map_err(|e| errs.push("pomdp.containers", e)).ok()
        }
        _ => None,
    };
    let prior = errs.require(raw.prior, "pomdp", "prior").and_then(|atoms| prior(&atoms, &lattice, errs));
    let horizon = errs.require(raw.horizon, "pomdp", "horizon");
    let max_nodes = raw.max_nodes.unwrap_or(invdp_core::pomdp::DEFAULT_MAX_NODES);
    if max_nodes == 0 {
        errs.push("pomdp", "`max_nodes` must be positive");
    }
    let reps = raw.reps.unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        errs.push("pomdp", "`reps` must be positive");
    }
    Some(PomdpConfig { partition: partition?, prior: prior?, horizon: horizon?, max_nodes, reps })
}

fn prior(atoms: &[(f64, f64)], lattice: &Lattice, errs: &mut Errors) -> Option<Belief> {
    let mut probs = vec![0.0; lattice.len()];
    let mut ok = true;
    for &(x, p) in atoms {
        match lattice.level_of_value(x).ok().and_then(|l| lattice.position(l)) {
            Some(i) => probs[i] += p,
            None => {
                errs.push("pomdp.prior", format_args!("atom at {x} is not a grid point"));
                ok = false;
            }
        }
    }
    if !ok {
        return None;
    }
    Belief::new(probs).map_err(|e| errs.push("pomdp.prior", e)).ok()
}
