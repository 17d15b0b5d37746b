use std::path::PathBuf;

use gksl_core::fock::{
    build_rep_capped, evolve, extract_moments_capped, gaussian_operator, random_identity, state_factory, verify_identity,
    DensityMatrix, FockRep, IdentityKind, OracleGenerator,
};
use gksl_core::gaussian::{is_stationary, stationarity_residuals};
use gksl_core::moments::MomentPropagator;
use gksl_core::{GeneratorSpec, MomentTensor, Statistics};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{CliError, Context};
use crate::output::{json_text, trajectory_csv, write_file};
use crate::scenario::{Scenario, TimeGrid};

/// Command-line overrides shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Settings {
    pub out: PathBuf,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub instances: usize,
}

impl Settings {
    fn seed(&self, scenario: &Scenario) -> u64 {
        self.seed.unwrap_or(scenario.seed)
    }

    fn tolerance(&self, default: f64) -> Result<f64, CliError> {
        let tol = self.tolerance.unwrap_or(default);
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::Input(format!("tolerance {tol} must be positive")));
        }
        Ok(tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

fn closed_form(
    spec: &GeneratorSpec,
    y0: &MomentTensor,
    grid: &TimeGrid,
    times: &[f64],
    cap: usize,
) -> Result<Vec<MomentTensor>, CliError> {
    let propagator = MomentPropagator::with_cap(spec, y0.order(), cap).context("moments")?;
    if grid.reuse_step && times.len() > 1 && grid.step() > 0.0 {
        return propagator.uniform(y0, grid.start, grid.step(), times.len()).context("moments");
    }
    times.par_iter().map(|&t| propagator.at(y0, t).context("moments")).collect()
}

fn oracle_moments(
    trajectory: &[DensityMatrix],
    rep: &FockRep,
    order: usize,
    cap: usize,
) -> Result<Vec<MomentTensor>, CliError> {
    trajectory
        .par_iter()
        .map(|rho| extract_moments_capped(rho, rep, order, cap).context("oracle moments"))
        .collect()
}

fn initial_state(scenario: &Scenario, rep: &FockRep, seed: u64) -> Result<DensityMatrix, CliError> {
    state_factory(&scenario.init_spec(seed)?, rep).context("initial state")
}

/// Closed-form trajectories, one CSV per order.
pub fn propagate(scenario: &Scenario, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = settings.seed(scenario);
    let spec = scenario.generator(seed)?;
    let grid = scenario.time_grid()?;
    let times = grid.points()?;
    let orders = scenario.orders()?;
    let cap = scenario.oracle.moment_cap;

    let mut oracle_start: Option<(FockRep, DensityMatrix)> = None;
    for order in orders {
        let y0 = match scenario.explicit_moments(order)? {
            Some(y0) => y0,
            None => {
                if oracle_start.is_none() {
                    let rep = scenario.representation()?;
                    let rho0 = initial_state(scenario, &rep, seed)?;
                    oracle_start = Some((rep, rho0));
                }
                let (rep, rho0) = oracle_start.as_ref().expect("initialized above");
                extract_moments_capped(rho0, rep, order, cap).context("initial moments")?
            }
        };
        let trajectory = closed_form(&spec, &y0, grid, &times, cap)?;
        let path = write_file(&settings.out, &format!("propagate_m{order}.csv"), &trajectory_csv(&times, &trajectory))?;
        println!("propagate: order {order}, {} time point(s) -> {}", times.len(), path.display());
    }
    Ok(Outcome::Pass)
}

/// Oracle evolution: moment CSVs for the requested orders and a JSON
/// summary of trace, purity and truncation-edge population.
pub fn oracle(scenario: &Scenario, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = settings.seed(scenario);
    let spec = scenario.generator(seed)?;
    let times = scenario.time_points()?;
    let rep = scenario.representation()?;
    let rho0 = initial_state(scenario, &rep, seed)?;
    let trajectory = evolve(&spec, &rep, &rho0, &times, &scenario.evolve_options()).context("oracle evolution")?;

    for &order in &scenario.moment_orders {
        let moments = oracle_moments(&trajectory, &rep, order, scenario.oracle.moment_cap)?;
        let path = write_file(&settings.out, &format!("oracle_m{order}.csv"), &trajectory_csv(&times, &moments))?;
        println!("oracle: order {order} -> {}", path.display());
    }
    let points: Vec<Value> = times
        .iter()
        .zip(&trajectory)
        .map(|(t, rho)| {
            json!({
                "t": t,
                "trace": [rho.trace().re, rho.trace().im],
                "purity": rho.purity(),
                "hermiticity_defect": rho.matrix().hermiticity_defect(),
                "edge_population": rep.edge_population(rho.matrix()),
            })
        })
        .collect();
    let report = json!({
        "command": "oracle",
        "seed": seed,
        "dimension": rep.dim(),
        "trajectory": points,
    });
    let path = write_file(&settings.out, "oracle.json", &json_text(&report))?;
    println!("oracle: {} time point(s), dimension {} -> {}", times.len(), rep.dim(), path.display());
    Ok(Outcome::Pass)
}

/// Runs both pipelines from the oracle's initial state and compares
/// moments at every time point.
pub fn compare(scenario: &Scenario, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = settings.seed(scenario);
    let tolerance = settings.tolerance(scenario.tolerances.compare)?;
    let spec = scenario.generator(seed)?;
    let grid = scenario.time_grid()?;
    let times = grid.points()?;
    let orders = scenario.orders()?;
    let cap = scenario.oracle.moment_cap;
    let rep = scenario.representation()?;
    for &order in &orders {
        MomentPropagator::with_cap(&spec, order, cap).context("moments")?;
    }

    let oracle_run = initial_state(scenario, &rep, seed).and_then(|rho0| {
        evolve(&spec, &rep, &rho0, &times, &scenario.evolve_options()).context("oracle evolution")
    });
    let trajectory = match oracle_run {
        Ok(trajectory) => trajectory,
        Err(err) if err.is_truncation() => {
            let report = json!({
                "command": "compare",
                "seed": seed,
                "verdict": "truncation-alarm",
                "message": err.to_string(),
            });
            write_file(&settings.out, "compare.json", &json_text(&report))?;
            println!("compare: truncation alarm, no verdict");
            return Err(err);
        }
        Err(err) => return Err(err),
    };

    let mut order_reports = Vec::new();
    let mut all_pass = true;
    for &order in &orders {
        let y0 = extract_moments_capped(&trajectory[0], &rep, order, cap).context("initial moments")?;
        let closed = closed_form(&spec, &y0, grid, &times, cap)?;
        let oracle = oracle_moments(&trajectory, &rep, order, cap)?;
        let deviations: Vec<f64> = closed.iter().zip(&oracle).map(|(a, b)| a.max_abs_diff(b)).collect();
        let max = deviations.iter().copied().fold(0.0, f64::max);
        let passed = max < tolerance;
        all_pass &= passed;
        println!(
            "compare: order {order} max deviation {max:e} (tolerance {tolerance:e}) {}",
            if passed { "pass" } else { "FAIL" }
        );
        let per_time: Vec<Value> =
            times.iter().zip(&deviations).map(|(t, d)| json!({ "t": t, "deviation": d })).collect();
        order_reports.push(json!({
            "order": order,
            "max_deviation": max,
            "passed": passed,
            "per_time": per_time,
        }));
    }
    let report = json!({
        "command": "compare",
        "seed": seed,
        "tolerance": tolerance,
        "dimension": rep.dim(),
        "orders": order_reports,
        "verdict": if all_pass { "pass" } else { "fail" },
    });
    write_file(&settings.out, "compare.json", &json_text(&report))?;
    Ok(if all_pass { Outcome::Pass } else { Outcome::Fail })
}

/// Commutator residuals of a Gaussian state, with an optional oracle check.
pub fn stationary(scenario: &Scenario, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = settings.seed(scenario);
    let tolerance = settings.tolerance(scenario.tolerances.stationary)?;
    let spec = scenario.generator(seed)?;
    let g = scenario.gaussian_state(&spec)?;
    let residuals = stationarity_residuals(&spec, &g).context("stationarity")?;
    let stationary = is_stationary(&residuals, tolerance);
    let s = g.log_normalization();

    let mut report = json!({
        "command": "stationary",
        "seed": seed,
        "tolerance": tolerance,
        "log_normalization": [s.re, s.im],
        "residuals": residuals
            .iter()
            .enumerate()
            .map(|(j, r)| json!({ "coefficient": j + 1, "absolute": r.absolute, "relative": r.relative }))
            .collect::<Vec<_>>(),
        "verdict": if stationary { "stationary" } else { "not stationary" },
    });
    let wants_oracle = scenario.gaussian.as_ref().is_some_and(|c| c.oracle);
    if wants_oracle {
        let rep = scenario.representation()?;
        let rho = gaussian_operator(&g, &rep).context("oracle state")?;
        let generator = OracleGenerator::new(&spec, &rep).context("oracle")?;
        let norm = generator.apply(&rho).frobenius_norm();
        let trace = rho.trace();
        report["oracle"] = json!({
            "dimension": rep.dim(),
            "trace": [trace.re, trace.im],
            "generator_norm": norm,
        });
        println!("stationary: oracle |L(rho)|_F = {norm:e}, trace = {}", trace.re);
    }
    let worst = residuals.iter().map(|r| r.absolute).fold(0.0, f64::max);
    println!(
        "stationary: max residual {worst:e} (tolerance {tolerance:e}), s = {} -> {}",
        s.re,
        if stationary { "stationary" } else { "not stationary" }
    );
    write_file(&settings.out, "stationary.json", &json_text(&report))?;
    Ok(if stationary { Outcome::Pass } else { Outcome::Fail })
}

/// Random instances of every operator identity on the oracle space.
pub fn verify_lemmas(scenario: &Scenario, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = settings.seed(scenario);
    let system = scenario.mode_system()?;
    let cutoff = match system.statistics() {
        Statistics::Fermion => 0,
        Statistics::Boson => scenario
            .oracle
            .cutoff
            .ok_or_else(|| CliError::Input("oracle.cutoff is required for bosonic identity checks".into()))?,
    };
    let rep = build_rep_capped(system, cutoff, scenario.oracle.dim_cap).context("oracle")?;
    let count = settings.instances;
    if count == 0 {
        return Err(CliError::Input("--instances must be at least 1".into()));
    }

    let mut kinds = Vec::new();
    let mut all_pass = true;
    for (k, kind) in IdentityKind::ALL.into_iter().enumerate() {
        let reports = (0..count)
            .into_par_iter()
            .map(|i| {
                let stream = (k * count + i) as u64;
                let mut rng = StdRng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let identity = random_identity(kind, &rep, &mut rng).context(kind.name())?;
                verify_identity(&identity, &rep).context(kind.name())
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let max = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
        let passed = reports.iter().all(|r| r.passed);
        let protected = reports.iter().map(|r| r.protected_states).min().unwrap_or(0);
        all_pass &= passed;
        println!(
            "verify-lemmas: {} max residual {max:e} over {count} instance(s) {}",
            kind.name(),
            if passed { "pass" } else { "FAIL" }
        );
        kinds.push(json!({
            "identity": kind.name(),
            "instances": count,
            "max_residual": max,
            "min_protected_states": protected,
            "passed": passed,
        }));
    }
    let report = json!({
        "command": "verify-lemmas",
        "seed": seed,
        "dimension": rep.dim(),
        "identities": kinds,
        "verdict": if all_pass { "pass" } else { "fail" },
    });
    write_file(&settings.out, "lemmas.json", &json_text(&report))?;
    Ok(if all_pass { Outcome::Pass } else { Outcome::Fail })
}
