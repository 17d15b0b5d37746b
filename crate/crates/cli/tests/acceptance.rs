//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gksl_core::algebra::{drift_matrix, random_coefficient, random_matrix, structure_matrices, symmetrize};
use gksl_core::fock::{
    build_rep, evolve, extract_moments, gaussian_operator, random_density, random_identity, state_factory,
    verify_identity, DensityMatrix, EvolveOptions, FockRep, IdentityKind, InitSpec, OracleGenerator,
};
use gksl_core::gaussian::{gibbs_candidate, stationarity_residuals, GaussianStateSpec};
use gksl_core::linalg::kron;
use gksl_core::moments::{kron_sum, moment_generator, propagate_moments};
use gksl_core::{ComplexMatrix, GeneratorSpec, ModeSystem, QuadraticCoefficient, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

/// Oracle runs collected for the physical-invariant criterion.
#[derive(Default)]
struct Runs {
    trajectories: Vec<(String, Vec<DensityMatrix>)>,
    generators: Vec<(String, OracleGenerator)>,
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dephasing() -> (GeneratorSpec, FockRep, DensityMatrix) {
    let system = ModeSystem::boson(1).unwrap();
    let (_, e) = structure_matrices(system);
    let spec = GeneratorSpec::from_matrices(system, vec![e]).unwrap();
    let rep = build_rep(system, 30).unwrap();
    let rho0 = state_factory(&InitSpec::Coherent(vec![C64::new(0.5, 0.0)]), &rep).unwrap();
    (spec, rep, rho0)
}

fn grid(stop: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| stop * k as f64 / (points - 1) as f64).collect()
}

fn max_moment_deviation(spec: &GeneratorSpec, rep: &FockRep, trajectory: &[DensityMatrix], times: &[f64], m: usize) -> f64 {
    let y0 = extract_moments(&trajectory[0], rep, m).unwrap();
    let closed = propagate_moments(spec, &y0, times).unwrap();
    closed
        .iter()
        .zip(trajectory)
        .map(|(y, rho)| y.max_abs_diff(&extract_moments(rho, rep, m).unwrap()))
        .fold(0.0, f64::max)
}

fn criterion_1(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let (spec, rep, rho0) = dephasing();
    let times = grid(5.0, 51);
    let trajectory = evolve(&spec, &rep, &rho0, &times, &EvolveOptions::default()).map_err(|e| e.to_string())?;
    let dev = max_moment_deviation(&spec, &rep, &trajectory, &times, 1);
    let elapsed = start.elapsed().as_secs_f64();
    // The closed form itself: (0.5, 0.5)·e^{−t/2}.
    let y0 = extract_moments(&rho0, &rep, 1).unwrap();
    let closed = propagate_moments(&spec, &y0, &times).unwrap();
    let exact = times
        .iter()
        .zip(&closed)
        .map(|(t, y)| y.values().iter().map(|z| (z - C64::new(0.5 * (-t / 2.0).exp(), 0.0)).norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    runs.trajectories.push(("dephasing boson".into(), trajectory));
    runs.generators.push(("dephasing boson".into(), OracleGenerator::new(&spec, &rep).unwrap()));
    ensure(dev < 1e-6, format!("deviation {dev:e}"))?;
    ensure(exact < 1e-12, format!("closed form off hand value by {exact:e}"))?;
    ensure(elapsed < 10.0, format!("took {elapsed:.2} s"))?;
    Ok(format!("max deviation {dev:.2e}, {elapsed:.2} s"))
}

fn criterion_2(_: &mut Runs) -> Outcome {
    let (spec, rep, rho0) = dephasing();
    let times = grid(5.0, 51);
    let trajectory = evolve(&spec, &rep, &rho0, &times, &EvolveOptions::default()).map_err(|e| e.to_string())?;
    let dev = max_moment_deviation(&spec, &rep, &trajectory, &times, 2);
    let g2 = moment_generator(&spec, 2).unwrap();
    let hand = ComplexMatrix::from_real_diag(&[-2.0, 0.0, 0.0, -2.0]);
    let gen_err = g2.max_abs_diff(&hand);
    ensure(dev < 1e-6, format!("deviation {dev:e}"))?;
    ensure(gen_err < 1e-13, format!("G_2 off by {gen_err:e}"))?;
    Ok(format!("max deviation {dev:.2e}, G_2 error {gen_err:.1e}"))
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(303);
    let times = grid(3.0, 16);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let modes = 1 + i % 3;
        let system = ModeSystem::fermion(modes).unwrap();
        let rep = build_rep(system, 0).unwrap();
        let terms = rng.random_range(1..=3);
        let spec = GeneratorSpec::new(system, (0..terms).map(|_| random_coefficient(system, 0.8, &mut rng)).collect())
            .unwrap();
        let rho0 = random_density(rep.dim(), None, &rep, &mut rng).unwrap();
        let trajectory = evolve(&spec, &rep, &rho0, &times, &EvolveOptions::default()).map_err(|e| e.to_string())?;
        for m in 1..=2 {
            worst = worst.max(max_moment_deviation(&spec, &rep, &trajectory, &times, m));
        }
        runs.trajectories.push((format!("fermion spec {i}"), trajectory));
        runs.generators.push((format!("fermion spec {i}"), OracleGenerator::new(&spec, &rep).unwrap()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst < 1e-8, format!("deviation {worst:e}"))?;
    ensure(elapsed < 60.0, format!("took {elapsed:.2} s"))?;
    Ok(format!("20 specs, max deviation {worst:.2e}, {elapsed:.2} s"))
}

fn power(a: &ComplexMatrix, k: usize) -> ComplexMatrix {
    (0..k).fold(ComplexMatrix::identity(a.rows()), |acc, _| &acc * a)
}

/// `Σ_{i,p} ⊗_l A^{δ_il + δ_pl}`, summed term by term.
fn double_sum(a: &ComplexMatrix, m: usize) -> ComplexMatrix {
    let size = a.rows().pow(m as u32);
    let mut total = ComplexMatrix::zeros(size, size);
    for i in 0..m {
        for p in 0..m {
            let term = (0..m).fold(ComplexMatrix::identity(1), |acc, l| {
                kron(&acc, &power(a, usize::from(i == l) + usize::from(p == l))).unwrap()
            });
            total += &term;
        }
    }
    total
}

fn criterion_4(_: &mut Runs) -> Outcome {
    let mut rng = StdRng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let modes = 1 + i % 2;
        let system = if i % 4 < 2 { ModeSystem::boson(modes) } else { ModeSystem::fermion(modes) }.unwrap();
        let a = drift_matrix(&random_coefficient(system, 1.0, &mut rng));
        let m = 1 + i % 3;
        let s = kron_sum(&a, m).unwrap();
        worst = worst.max((&s * &s).frobenius_distance(&double_sum(&a, m)));
    }
    ensure(worst < 1e-12, format!("residual {worst:e}"))?;
    Ok(format!("50 drifts, max residual {worst:.2e}"))
}

fn criterion_5(_: &mut Runs) -> Outcome {
    let mut rng = StdRng::seed_from_u64(505);
    let mut fermion_worst: f64 = 0.0;
    for i in 0..20 {
        let system = ModeSystem::fermion(1 + i % 3).unwrap();
        let rep = build_rep(system, 0).unwrap();
        let coeff = random_coefficient(system, 0.7, &mut rng);
        let g = gibbs_candidate(&coeff, rng.random_range(-1.5..1.5)).unwrap();
        let spec = GeneratorSpec::new(system, vec![coeff]).unwrap();
        let rho = gaussian_operator(&g, &rep).unwrap();
        fermion_worst = fermion_worst.max(OracleGenerator::new(&spec, &rep).unwrap().apply(&rho).frobenius_norm());
    }
    let system = ModeSystem::boson(1).unwrap();
    let rep = build_rep(system, 40).unwrap();
    let (_, e) = structure_matrices(system);
    let mut boson_worst: f64 = 0.0;
    for _ in 0..20 {
        // K·E positive definite, so β < 0 gives a normalizable state.
        let raw = symmetrize(&random_matrix(2, 2, 0.15, &mut rng), system).unwrap();
        let k = &raw + &e.scale_real(rng.random_range(1.0..2.0));
        let coeff = QuadraticCoefficient::new(k, system).unwrap();
        let g = gibbs_candidate(&coeff, -rng.random_range(0.5..1.5)).map_err(|e| e.to_string())?;
        let spec = GeneratorSpec::new(system, vec![coeff]).unwrap();
        let rho = gaussian_operator(&g, &rep).unwrap();
        boson_worst = boson_worst.max(OracleGenerator::new(&spec, &rep).unwrap().apply(&rho).frobenius_norm());
    }
    ensure(fermion_worst < 1e-8, format!("fermion |L(rho)| {fermion_worst:e}"))?;
    ensure(boson_worst < 1e-6, format!("boson |L(rho)| {boson_worst:e}"))?;
    Ok(format!("|L(rho)|_F fermion {fermion_worst:.2e}, boson {boson_worst:.2e}"))
}

fn criterion_6(_: &mut Runs) -> Outcome {
    let system = ModeSystem::boson(1).unwrap();
    let (_, e) = structure_matrices(system);
    let spec = GeneratorSpec::from_matrices(system, vec![e]).unwrap();
    let m = ComplexMatrix::from_real_rows(&[[0.3, -1.0], [-1.0, 0.3]]).unwrap();
    let g = GaussianStateSpec::new(m, system).map_err(|e| e.to_string())?;
    let residual = stationarity_residuals(&spec, &g).unwrap()[0].absolute;
    let rep = build_rep(system, 40).unwrap();
    let rho = gaussian_operator(&g, &rep).unwrap();
    let oracle = OracleGenerator::new(&spec, &rep).unwrap().apply(&rho).frobenius_norm();
    ensure(residual > 1e-2, format!("residual {residual:e}"))?;
    ensure(oracle > 1e-4, format!("|L(rho)| {oracle:e}"))?;
    Ok(format!("residual {residual:.3e}, |L(rho)|_F {oracle:.3e}"))
}

fn criterion_7(_: &mut Runs) -> Outcome {
    let boson = ModeSystem::boson(1).unwrap();
    let (_, e) = structure_matrices(boson);
    let g = GaussianStateSpec::new(-&e, boson).map_err(|e| e.to_string())?;
    let es = g.log_normalization().exp();
    let expected = 0.5f64.exp() - (-0.5f64).exp();
    let trace = gaussian_operator(&g, &build_rep(boson, 40).unwrap()).unwrap().trace();
    let fermion = ModeSystem::fermion(1).unwrap();
    let m = ComplexMatrix::from_real_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
    let gf = GaussianStateSpec::new(m, fermion).map_err(|e| e.to_string())?;
    let e_minus_s = (-gf.log_normalization()).exp();
    let expected_f = 0.5f64.exp() + (-0.5f64).exp();
    ensure((es - expected).norm() < 1e-9, format!("boson e^s = {es}"))?;
    ensure((trace - 1.0).norm() < 1e-6, format!("boson oracle trace {trace}"))?;
    ensure((e_minus_s - expected_f).norm() < 1e-12, format!("fermion e^-s = {e_minus_s}"))?;
    Ok(format!("boson e^s = {:.10}, trace {:.3e} off, fermion e^-s = {:.10}", es.re, (trace - 1.0).norm(), e_minus_s.re))
}

fn criterion_8(_: &mut Runs) -> Outcome {
    let mut rng = StdRng::seed_from_u64(808);
    let systems = [
        (ModeSystem::fermion(1).unwrap(), 0),
        (ModeSystem::fermion(2).unwrap(), 0),
        (ModeSystem::fermion(3).unwrap(), 0),
        (ModeSystem::boson(1).unwrap(), 12),
        (ModeSystem::boson(2).unwrap(), 9),
    ];
    let mut summary = Vec::new();
    for (system, cutoff) in systems {
        let rep = build_rep(system, cutoff).unwrap();
        let mut worst: f64 = 0.0;
        for kind in IdentityKind::ALL {
            for _ in 0..20 {
                let identity = random_identity(kind, &rep, &mut rng).map_err(|e| e.to_string())?;
                let report = verify_identity(&identity, &rep).map_err(|e| e.to_string())?;
                ensure(
                    report.residual < 1e-10 && report.protected_states > 0,
                    format!("{} on {system:?}: residual {:e}", kind.name(), report.residual),
                )?;
                worst = worst.max(report.residual);
            }
        }
        summary.push(format!("{:?}{}:{worst:.1e}", system.statistics(), system.modes()));
    }
    Ok(format!("5 identities x 20 instances, max residual {}", summary.join(" ")))
}

fn criterion_9(runs: &mut Runs) -> Outcome {
    let mut checked = 0;
    for (name, trajectory) in &runs.trajectories {
        let mut purity = f64::INFINITY;
        for rho in trajectory {
            let trace_err = (rho.trace() - C64::new(1.0, 0.0)).norm();
            ensure(trace_err < 1e-9, format!("{name}: trace off by {trace_err:e}"))?;
            let herm = rho.matrix().frobenius_distance(&rho.matrix().adjoint());
            ensure(herm < 1e-9, format!("{name}: Hermiticity defect {herm:e}"))?;
            let p = rho.purity();
            ensure(p <= purity + 1e-9, format!("{name}: purity rose {purity} -> {p}"))?;
            purity = p;
            checked += 1;
        }
    }
    let mut worst_unital: f64 = 0.0;
    for (_, generator) in &runs.generators {
        let mixed = DensityMatrix::maximally_mixed(generator.dim());
        worst_unital = worst_unital.max(generator.apply(mixed.matrix()).frobenius_norm());
    }
    ensure(checked > 0, "no oracle runs recorded")?;
    ensure(worst_unital < 1e-12, format!("|L(I/dim)| {worst_unital:e}"))?;
    Ok(format!("{checked} states over {} runs, |L(I/dim)| {worst_unital:.1e}", runs.trajectories.len()))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn gksl(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_gksl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("gksl binary runs");
    (output.status.code().unwrap_or(-1), String::from_utf8_lossy(&output.stdout).into_owned())
}

fn verdict(out: &Path) -> String {
    let text = std::fs::read_to_string(out.join("compare.json")).unwrap_or_default();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap_or_default();
    value["verdict"].as_str().unwrap_or("missing").to_string()
}

fn criterion_10(_: &mut Runs) -> Outcome {
    let dir = scenarios();
    let cases = [
        ("dephasing.json", 0, "pass"),
        ("dephasing_truncated.json", 3, "truncation-alarm"),
        ("fermion_random.json", 0, "pass"),
    ];
    for (file, code, expected) in cases {
        let out = tempfile::tempdir().unwrap();
        let config = dir.join(file);
        let (status, _) = gksl(&["compare", "--config", config.to_str().unwrap()], out.path());
        ensure(status == code, format!("{file}: exit {status}, expected {code}"))?;
        let got = verdict(out.path());
        ensure(got == expected, format!("{file}: verdict {got}, expected {expected}"))?;
    }
    let config = dir.join("fermion_random.json");
    let mut outputs = Vec::new();
    for jobs in ["1", "1", "3"] {
        let out = tempfile::tempdir().unwrap();
        let (status, _) = gksl(
            &["propagate", "--config", config.to_str().unwrap(), "--seed", "99", "--jobs", jobs],
            out.path(),
        );
        ensure(status == 0, format!("propagate exit {status}"))?;
        let files: Vec<Vec<u8>> = ["propagate_m1.csv", "propagate_m2.csv"]
            .iter()
            .map(|f| std::fs::read(out.path().join(f)).unwrap_or_default())
            .collect();
        ensure(files.iter().all(|f| !f.is_empty()), "missing CSV output")?;
        outputs.push(files);
    }
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), "CSV output differs between runs")?;
    Ok("verdicts pass / truncation-alarm / pass with exits 0/3/0, CSV byte-identical".into())
}

fn main() {
    let criteria: [(&str, fn(&mut Runs) -> Outcome); 10] = [
        ("dephasing first moments against oracle", criterion_1),
        ("dephasing second moments and G_2", criterion_2),
        ("fermionic moments against oracle", criterion_3),
        ("Kronecker-sum structure identity", criterion_4),
        ("Gibbs candidates are stationary in the oracle", criterion_5),
        ("non-stationary exponent is detected", criterion_6),
        ("Gaussian normalization", criterion_7),
        ("operator identity suite", criterion_8),
        ("physical invariants of oracle runs", criterion_9),
        ("CLI verdicts, exit codes and CSV determinism", criterion_10),
    ];
    let mut runs = Runs::default();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut runs)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match result {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("acceptance {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
