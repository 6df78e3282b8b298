//! Command dispatch: solve, write artifacts, assemble the report.

use std::fmt;
use std::path::Path;

use invdp_core::average::{
    assumption_b_diagnostic, greedy_policy, optimality_slacks, relative_value, solve_ladder,
};
use invdp_core::mdp::{check_stationary_optimality, finite_horizon_vi, infinite_horizon_vi};
use invdp_core::pomdp::{belief_value_iteration, pomdp_simulate, BeliefPolicy};
use invdp_core::simulate::{simulate_policy, truncation_allowance, truncation_horizon};
use invdp_core::structure::{
    classify_regime, extract_ss_g, predict_finite_horizon, predict_with_v0_terminal, prescriptions,
    v0_terminal, verify_structure, PolicyStructure,
};
use invdp_core::{GridMdp, InventoryDynamics, InventoryModel, Lattice, StepRule, Thresholds, ValueSolution};
use serde_json::{json, Value};

use crate::config::{Command, ConfigError, RunConfig, Terminal};
use crate::report::{fmt_f64, num, nums, set_cell, RunReport, Table, Warning};

/// Far-left probing depth for `N_alpha`.
const PROBE_T_MAX: usize = 200;
const PROBE_TOL: f64 = 1e-9;
/// Slack allowed in the order-up-to bound check of the average-cost report.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(invdp_core::Error),
    Io(std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Solver(e) => write!(f, "SOLVER_ERROR: {e}"),
            RunError::Io(e) => write!(f, "IO_ERROR: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<invdp_core::Error> for RunError {
    fn from(e: invdp_core::Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Runs `cfg.command`, writing artifacts and `report.json` into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let mut report = RunReport::new(cfg.command, cfg.echo.clone());
    if let Some(seed) = cfg.seed {
        report.set("seed", json!(seed));
    }
    match cfg.command {
        Command::SolveFinite => solve_finite(cfg, out, &mut report)?,
        Command::SolveDiscounted => solve_discounted(cfg, out, &mut report)?,
        Command::SolveAverage => solve_average(cfg, out, &mut report)?,
        Command::Classify => classify(cfg, &mut report)?,
        Command::VerifyStructure => verify(cfg, out, &mut report)?,
        Command::PomdpSolve => pomdp_solve(cfg, &mut report)?,
        Command::PomdpSimulate => pomdp_sim(cfg, out, &mut report)?,
        Command::Simulate => simulate(cfg, out, &mut report)?,
    }
    report.write(out)?;
    Ok(report)
}

fn alpha(cfg: &RunConfig) -> f64 {
    cfg.solver.alpha.expect("validated")
}

fn values_table(lat: &Lattice, v: &[f64]) -> Table {
    let mut t = Table::new(&["x", "v"]);
    for (i, &vi) in v.iter().enumerate() {
        t.push(vec![fmt_f64(lat.value(i)), fmt_f64(vi)]);
    }
    t
}

fn policy_table(lat: &Lattice, actions: &[usize], sets: &[Vec<usize>]) -> Table {
    let mut t = Table::new(&["x", "action", "argmin_set"]);
    for (i, (&a, set)) in actions.iter().zip(sets).enumerate() {
        t.push(vec![fmt_f64(lat.value(i)), fmt_f64(a as f64 * lat.step()), set_cell(set, lat.step())]);
    }
    t
}

fn threshold_row(t: &str, th: &Thresholds, lat: &Lattice) -> Vec<String> {
    let (s, big_s) = th.values(lat.step());
    vec![t.into(), fmt_f64(s), fmt_f64(big_s)]
}

fn thresholds_json(th: &Thresholds, lat: &Lattice) -> Value {
    let (s, big_s) = th.values(lat.step());
    json!({ "s": num(s), "S": num(big_s) })
}

/// Clamped-mass and action-cap warnings for the pairs a policy uses.
fn policy_warnings(report: &mut RunReport, m: &GridMdp, actions: &[usize]) {
    let lat = *m.lattice();
    let cap = m.n_actions() - 1;
    let mut clamped = 0usize;
    let mut worst = 0.0f64;
    for (x, &a) in actions.iter().enumerate() {
        let loss = m.mass_loss(x, a);
        if loss > 0.0 {
            clamped += 1;
            worst = worst.max(loss);
            report.warn(Warning {
                kind: "mass_loss",
                message: format!("successor mass {} clamped to the grid edge", fmt_f64(loss)),
                state: Some(lat.value(x)),
                action: Some(m.action_value(a)),
                node: None,
            });
        }
        // the cap binds if it is chosen while a larger order would still fit on the grid
        if a == cap && lat.level(x) + (cap as i64) < lat.hi() {
            report.warn(Warning {
                kind: "a_max_binding",
                message: "policy orders the action cap a_max".into(),
                state: Some(lat.value(x)),
                action: Some(m.action_value(a)),
                node: None,
            });
        }
    }
    report.set("clamped_policy_pairs", json!(clamped));
    report.set("max_clamped_mass", num(worst));
}

fn structure_json(ps: &PolicyStructure) -> Value {
    json!({
        "regime": ps.regime.label(),
        "alpha": num(ps.alpha),
        "alpha_star": num(ps.alpha_star),
        "n_alpha": match ps.n_alpha.finite() { Some(n) => json!(n), None => json!("inf") },
    })
}

fn rules_json(rules: &[StepRule]) -> Value {
    Value::Array(
        rules
            .iter()
            .map(|r| json!(if *r == StepRule::NeverOrder { "never_order" } else { "threshold" }))
            .collect(),
    )
}

fn finite_solve(cfg: &RunConfig, m: &GridMdp) -> Result<(Vec<ValueSolution>, Vec<StepRule>, PolicyStructure)> {
    let model = &cfg.model;
    let a = alpha(cfg);
    let n = cfg.solver.horizon.expect("validated");
    let ps = classify_regime(model.cost(), a);
    let (terminal, rules) = match cfg.solver.terminal {
        Terminal::Zero => (vec![0.0; m.n_states()], predict_finite_horizon(&ps, n)),
        Terminal::ZeroSetupValue => (v0_terminal(model, a, cfg.solver.eps)?, predict_with_v0_terminal(&ps, n)),
    };
    Ok((finite_horizon_vi(m, n, a, &terminal), rules, ps))
}

fn solve_finite(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let model = &cfg.model;
    let m = model.build_mdp()?;
    let lat = *m.lattice();
    let (sols, rules, ps) = finite_solve(cfg, &m)?;
    let top = sols.last().expect("horizon + 1 entries");
    let first = top.greedy();
    values_table(&lat, &top.values).write(out, "values.csv")?;
    policy_table(&lat, &first, &top.argmin_sets).write(out, "policy.csv")?;
    policy_warnings(report, &m, &first);
    report.set("horizon", json!(sols.len() - 1));
    report.set("structure", structure_json(&ps));
    if model.dynamics() == InventoryDynamics::Backorder {
        report.set("step_rules", rules_json(&rules));
        match prescriptions(model, &sols, &rules, alpha(cfg)) {
            Ok((_, ths)) => {
                let mut t = Table::new(&["t", "s", "S"]);
                for (step, th) in ths.iter().enumerate() {
                    if let Some(th) = th {
                        t.push(threshold_row(&step.to_string(), th, &lat));
                    }
                }
                t.write(out, "thresholds.csv")?;
            }
            Err(e) => report.warn(Warning {
                kind: "thresholds",
                message: format!("no (s,S) pairs: {e}"),
                state: None,
                action: None,
                node: None,
            }),
        }
    }
    Ok(())
}

fn solve_discounted(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let model = &cfg.model;
    let m = model.build_mdp()?;
    let lat = *m.lattice();
    let a = alpha(cfg);
    let sol = infinite_horizon_vi(&m, a, cfg.solver.eps)?;
    let phi = sol.greedy();
    values_table(&lat, &sol.values).write(out, "values.csv")?;
    policy_table(&lat, &phi, &sol.argmin_sets).write(out, "policy.csv")?;
    policy_warnings(report, &m, &phi);
    report.set("iterations", json!(sol.iterations));
    report.set("sup_residual", num(sol.residual));
    report.set("greedy_certificate", num(check_stationary_optimality(&m, &phi, &sol.values, a)));
    report.set("structure", structure_json(&classify_regime(model.cost(), a)));
    if model.dynamics() == InventoryDynamics::Backorder {
        match extract_ss_g(&model.g_function(&sol.values, a), model.cost().setup()) {
            Ok(th) => {
                let mut t = Table::new(&["t", "s", "S"]);
                t.push(threshold_row("inf", &th, &lat));
                t.write(out, "thresholds.csv")?;
                let res = check_stationary_optimality(&m, &th.policy(&lat), &sol.values, a);
                report.set("thresholds", thresholds_json(&th, &lat));
                report.set("threshold_certificate", num(res));
            }
            Err(e) => report.warn(Warning {
                kind: "thresholds",
                message: format!("no (s,S) pair: {e}"),
                state: None,
                action: None,
                node: None,
            }),
        }
    }
    Ok(())
}

fn solve_average(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let model = &cfg.model;
    let m = model.build_mdp()?;
    let lat = *m.lattice();
    let ladder = solve_ladder(&m, &cfg.solver.ladder, cfg.solver.eps)?;
    let mut t = Table::new(&["alpha", "m_alpha", "one_minus_alpha_m", "X_alpha_lo", "X_alpha_hi"]);
    for e in &ladder.entries {
        let (lo, hi) = e.x_alpha_range();
        t.push(vec![
            fmt_f64(e.alpha),
            fmt_f64(e.m_alpha),
            fmt_f64(e.scaled_min),
            fmt_f64(lat.value(lo)),
            fmt_f64(lat.value(hi)),
        ]);
    }
    t.write(out, "ladder.csv")?;

    let rv = relative_value(&ladder, cfg.solver.k_tail)?;
    let greedy = greedy_policy(&m, &rv.u, rv.w_upper);
    values_table(&lat, &rv.u).write(out, "values.csv")?;
    policy_table(&lat, &greedy.actions, &greedy.argmin_sets).write(out, "policy.csv")?;
    policy_warnings(report, &m, &greedy.actions);

    let slacks = optimality_slacks(&m, &rv.u, rv.w_upper, &greedy.actions);
    let (worst_x, worst) =
        slacks.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (x, s)| if s < acc.1 { (x, s) } else { acc });
    report.set("w_lower", num(rv.w_lower));
    report.set("w_upper", num(rv.w_upper));
    report.set("tail_spread", num(ladder.tail_spread(cfg.solver.k_tail)));
    report.set("min_slack", num(worst));
    report.set("min_slack_state", num(lat.value(worst_x)));
    report.set("slacks", nums(&slacks));
    let (lo, hi) = ladder.x_alpha_envelope();
    report.set("x_alpha_envelope", json!([num(lat.value(lo)), num(lat.value(hi))]));

    let cost = (model.dynamics() == InventoryDynamics::Backorder).then_some(model.cost());
    let diag = assumption_b_diagnostic(&ladder, &lat, cost, BOUND_SLACK);
    report.set("bound_checks", json!(diag.bound_checks));
    for &x in &diag.growth_flags {
        report.warn(Warning {
            kind: "relative_value_growth",
            message: "u_alpha grows like 1/(1 - alpha) along the ladder".into(),
            state: Some(lat.value(x)),
            action: None,
            node: None,
        });
    }
    for &(a, x, u, bound) in &diag.bound_violations {
        report.warn(Warning {
            kind: "order_up_to_bound",
            message: format!("u_alpha = {} exceeds {} at alpha = {}", fmt_f64(u), fmt_f64(bound), fmt_f64(a)),
            state: Some(lat.value(x)),
            action: None,
            node: None,
        });
    }
    if let (Some(e), Some(c)) = (ladder.entries.last(), cost) {
        if e.alpha < 1.0 {
            if let Ok(th) = extract_ss_g(&model.g_function(&e.u, e.alpha), c.setup()) {
                let mut t = Table::new(&["t", "s", "S"]);
                t.push(threshold_row("inf", &th, &lat));
                t.write(out, "thresholds.csv")?;
                report.set("thresholds", thresholds_json(&th, &lat));
            }
        }
    }
    Ok(())
}

fn classify(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let model = &cfg.model;
    let c = model.cost();
    let a = alpha(cfg);
    let ps = classify_regime(c, a);
    let rc = c.regime_constants();
    report.set("regime", json!(ps.regime.label()));
    report.set("alpha", num(a));
    report.set("alpha_star", num(rc.alpha_star));
    report.set("k_h", num(rc.k_h));
    report.set("n_alpha", json!(ps.n_alpha.to_string()));
    let probe = c.n_alpha_by_probe(model.demand(), a, PROBE_T_MAX, PROBE_TOL)?;
    report.set("n_alpha_probe", json!(probe.to_string()));
    let lat = model.lattice();
    let (lo, hi) = c.default_gb_probe(model.demand(), lat.value(0), lat.value(lat.len() - 1));
    report.set(
        "gb_witness",
        match c.check_gb(model.demand(), lo, hi) {
            Some((z, y)) => json!([num(z), num(y)]),
            None => Value::Null,
        },
    );
    println!("regime {} alpha* {} N_alpha {}", ps.regime, fmt_f64(rc.alpha_star), ps.n_alpha);
    Ok(())
}

fn verify(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let model = &cfg.model;
    if model.dynamics() != InventoryDynamics::Backorder {
        return Err(RunError::Config(ConfigError::Validation(vec![
            "dynamics: verify-structure needs backorder dynamics".into(),
        ])));
    }
    let m = model.build_mdp()?;
    let lat = *m.lattice();
    let (sols, rules, ps) = finite_solve(cfg, &m)?;
    let rep = verify_structure(model, &sols, &rules, alpha(cfg))?;
    let mut t = Table::new(&["t", "x", "predicted_action", "argmin_set"]);
    for v in &rep.violations {
        let set: Vec<String> = v.argmin.iter().map(|a| fmt_f64(*a)).collect();
        t.push(vec![v.t.to_string(), fmt_f64(v.x), fmt_f64(v.predicted), set.join(";")]);
    }
    t.write(out, "violations.csv")?;
    let mut th_table = Table::new(&["t", "s", "S"]);
    for (step, th) in rep.thresholds.iter().enumerate() {
        if let Some(th) = th {
            th_table.push(threshold_row(&step.to_string(), th, &lat));
        }
    }
    th_table.write(out, "thresholds.csv")?;
    report.set("structure", structure_json(&ps));
    report.set("step_rules", rules_json(&rules));
    report.set("violations", json!(rep.violations.len()));
    println!("{} violations over {} steps", rep.violations.len(), rules.len());
    Ok(())
}

fn tree_for(cfg: &RunConfig, m: &GridMdp, report: &mut RunReport) -> Result<invdp_core::BeliefTree> {
    let p = cfg.pomdp.as_ref().expect("validated");
    let tree = belief_value_iteration(m, &p.partition, &p.prior, p.horizon, alpha(cfg), p.max_nodes)?;
    let lat = m.lattice();
    report.set("tree_value", num(tree.value()));
    report.set(
        "root_actions",
        Value::Array(tree.root_actions().iter().map(|&a| num(a as f64 * lat.step())).collect()),
    );
    report.set("tree_nodes", json!(tree.nodes.len()));
    // flag trees that used more than half of the node budget
    if tree.nodes.len() * 2 > p.max_nodes {
        report.warn(Warning {
            kind: "tree_cap",
            message: format!("{} nodes of a {} node budget", tree.nodes.len(), p.max_nodes),
            state: None,
            action: None,
            node: Some(tree.nodes.len() - 1),
        });
    }
    Ok(tree)
}

fn pomdp_solve(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let m = cfg.model.build_mdp()?;
    let tree = tree_for(cfg, &m, report)?;
    println!("tree value {} ({} nodes)", fmt_f64(tree.value()), tree.nodes.len());
    Ok(())
}

fn samples_table(samples: &[f64], averages: Option<&[f64]>) -> Table {
    let mut t = match averages {
        Some(_) => Table::new(&["rep", "discounted", "average"]),
        None => Table::new(&["rep", "discounted"]),
    };
    for (r, &s) in samples.iter().enumerate() {
        let mut row = vec![r.to_string(), fmt_f64(s)];
        if let Some(avg) = averages {
            row.push(fmt_f64(avg[r]));
        }
        t.push(row);
    }
    t
}

fn summary_json(s: &invdp_core::SimulationSummary) -> Value {
    json!({ "mean": num(s.mean), "sd": num(s.sd), "ci95": [num(s.ci.0), num(s.ci.1)], "reps": s.samples.len() })
}

fn pomdp_sim(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let m = cfg.model.build_mdp()?;
    let tree = tree_for(cfg, &m, report)?;
    let p = cfg.pomdp.as_ref().expect("validated");
    let seed = cfg.seed.expect("validated");
    let sim = pomdp_simulate(&m, &p.partition, &BeliefPolicy::Tree(&tree), &p.prior, p.horizon, alpha(cfg), p.reps, seed)?;
    samples_table(&sim.samples, None).write(out, "samples.csv")?;
    report.set("simulation", summary_json(&sim));
    report.set("ci_covers_tree_value", json!(sim.covers(tree.value(), 0.0)));
    println!("tree value {} simulated {} [{}, {}]", fmt_f64(tree.value()), fmt_f64(sim.mean), fmt_f64(sim.ci.0), fmt_f64(sim.ci.1));
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path, report: &mut RunReport) -> Result<()> {
    let model: &InventoryModel = &cfg.model;
    let m = model.build_mdp()?;
    let lat = *m.lattice();
    let a = alpha(cfg);
    let sol = infinite_horizon_vi(&m, a, cfg.solver.eps)?;
    let phi = sol.greedy();
    policy_warnings(report, &m, &phi);
    let x0 = lat.level_of_value(cfg.simulate.x0).ok().and_then(|l| lat.position(l)).expect("validated");
    let max_cost = m.max_finite_cost();
    let horizon = match cfg.simulate.horizon {
        Some(n) => n,
        None => truncation_horizon(a, max_cost, cfg.solver.eps)?,
    };
    let allowance = cfg.solver.eps + truncation_allowance(a, max_cost, horizon);
    let sim = simulate_policy(&m, &phi, x0, horizon, a, cfg.simulate.reps, cfg.seed.expect("validated"))?;
    samples_table(&sim.samples, Some(&sim.running_averages)).write(out, "samples.csv")?;
    report.set("x0", num(lat.value(x0)));
    report.set("value_x0", num(sol.values[x0]));
    report.set("horizon", json!(horizon));
    report.set("truncation_allowance", num(allowance));
    report.set("simulation", summary_json(&sim));
    report.set("ci_covers_value", json!(sim.covers(sol.values[x0], allowance)));
    println!("v(x0) {} simulated {} [{}, {}]", fmt_f64(sol.values[x0]), fmt_f64(sim.mean), fmt_f64(sim.ci.0), fmt_f64(sim.ci.1));
    Ok(())
}
