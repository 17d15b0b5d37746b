use gksl_core::algebra::{random_coefficient, random_matrix, structure_matrices, symmetrize};
use gksl_core::fock::{
    build_rep, evolve, extract_moments, random_density, state_factory, DensityMatrix, EvolveMethod, EvolveOptions,
    FockRep, InitSpec, OracleGenerator,
};
use gksl_core::moments::propagate_moments;
use gksl_core::{GeneratorSpec, ModeSystem, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_spec(system: ModeSystem, terms: usize, scale: f64, rng: &mut StdRng) -> GeneratorSpec {
    GeneratorSpec::new(system, (0..terms).map(|_| random_coefficient(system, scale, rng)).collect()).unwrap()
}

fn check_physical(trajectory: &[DensityMatrix]) {
    let mut purity = f64::INFINITY;
    for rho in trajectory {
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-9, "trace {}", rho.trace());
        let m = rho.matrix();
        assert!(m.frobenius_distance(&m.adjoint()) < 1e-9);
        let p = rho.purity();
        assert!(p <= purity + 1e-9, "purity rose from {purity} to {p}");
        purity = p;
    }
}

/// Largest deviation between closed-form and oracle moments over the grid.
fn moment_deviation(spec: &GeneratorSpec, rep: &FockRep, trajectory: &[DensityMatrix], times: &[f64], order: usize) -> f64 {
    let y0 = extract_moments(&trajectory[0], rep, order).unwrap();
    let closed = propagate_moments(spec, &y0, times).unwrap();
    closed
        .iter()
        .zip(trajectory)
        .map(|(y, rho)| y.max_abs_diff(&extract_moments(rho, rep, order).unwrap()))
        .fold(0.0, f64::max)
}

#[test]
fn fermion_oracle_matches_closed_form() {
    let mut rng = StdRng::seed_from_u64(2024);
    let times: Vec<f64> = (0..=8).map(|k| 0.25 * k as f64).collect();
    for modes in 1..=3 {
        let system = ModeSystem::fermion(modes).unwrap();
        let rep = build_rep(system, 0).unwrap();
        for _ in 0..3 {
            let terms = rng.random_range(1..=3);
            let spec = random_spec(system, terms, 0.8, &mut rng);
            let rho0 = random_density(rep.dim(), None, &rep, &mut rng).unwrap();
            let trajectory = evolve(&spec, &rep, &rho0, &times, &EvolveOptions::default()).unwrap();
            check_physical(&trajectory);
            for order in 1..=2 {
                let dev = moment_deviation(&spec, &rep, &trajectory, &times, order);
                assert!(dev < 1e-8, "n={modes} m={order}: {dev}");
            }
        }
    }
}

#[test]
fn boson_oracle_matches_closed_form() {
    let mut rng = StdRng::seed_from_u64(77);
    let system = ModeSystem::boson(1).unwrap();
    let rep = build_rep(system, 30).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
    let options = EvolveOptions { method: EvolveMethod::Rk4, ..EvolveOptions::default() };
    for _ in 0..2 {
        let spec = random_spec(system, 2, 0.15, &mut rng);
        let alpha = C64::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
        let rho0 = state_factory(&InitSpec::Coherent(vec![alpha]), &rep).unwrap();
        let trajectory = evolve(&spec, &rep, &rho0, &times, &options).unwrap();
        check_physical(&trajectory);
        for order in 1..=2 {
            let dev = moment_deviation(&spec, &rep, &trajectory, &times, order);
            assert!(dev < 1e-6, "m={order}: {dev}");
        }
    }
}

#[test]
fn superoperator_and_rk4_agree() {
    let mut rng = StdRng::seed_from_u64(5);
    let times = [0.0, 0.3, 0.9, 2.0];
    let cases = [
        (ModeSystem::fermion(2).unwrap(), 0usize, 1.0),
        (ModeSystem::fermion(3).unwrap(), 0, 0.6),
        (ModeSystem::boson(1).unwrap(), 20, 0.08),
    ];
    for (system, cutoff, scale) in cases {
        let rep = build_rep(system, cutoff).unwrap();
        let spec = random_spec(system, 2, scale, &mut rng);
        let rho0 = random_density(rep.dim(), Some(2), &rep, &mut rng).unwrap();
        let run = |method| {
            let options = EvolveOptions { method, ..EvolveOptions::default() };
            evolve(&spec, &rep, &rho0, &times, &options).unwrap()
        };
        let exact = run(EvolveMethod::SuperopExpm);
        let stepped = run(EvolveMethod::Rk4);
        check_physical(&exact);
        check_physical(&stepped);
        for (a, b) in exact.iter().zip(&stepped) {
            let diff = a.matrix().max_abs_diff(b.matrix());
            assert!(diff < 1e-7, "{system:?}: {diff}");
        }
    }
}

#[test]
fn generator_is_unital() {
    let mut rng = StdRng::seed_from_u64(9);
    for (system, cutoff) in [(ModeSystem::fermion(3).unwrap(), 0), (ModeSystem::boson(2).unwrap(), 5)] {
        let rep = build_rep(system, cutoff).unwrap();
        let spec = random_spec(system, 3, 1.0, &mut rng);
        let generator = OracleGenerator::new(&spec, &rep).unwrap();
        let mixed = DensityMatrix::maximally_mixed(rep.dim());
        assert!(generator.apply(mixed.matrix()).frobenius_norm() < 1e-12);
    }
}

#[test]
fn generator_is_dissipative() {
    // tr(ρ 𝓛ρ) = −½ Σ ‖[C, ρ]‖² ≤ 0 for Hermitian ρ.
    let mut rng = StdRng::seed_from_u64(10);
    let system = ModeSystem::fermion(2).unwrap();
    let rep = build_rep(system, 0).unwrap();
    for _ in 0..10 {
        let spec = random_spec(system, 2, 1.0, &mut rng);
        let generator = OracleGenerator::new(&spec, &rep).unwrap();
        let rho = random_density(1, None, &rep, &mut rng).unwrap();
        let rate = rho.matrix().trace_product(&generator.apply(rho.matrix()));
        assert!(rate.re <= 1e-14 && rate.im.abs() < 1e-12);
        let jumps: f64 = generator
            .jumps()
            .iter()
            .map(|c| gksl_core::linalg::comm(c, rho.matrix()).unwrap().frobenius_norm().powi(2))
            .sum();
        assert!((rate.re + 0.5 * jumps).abs() < 1e-12);
    }
}

#[test]
fn structured_inputs_are_rejected_before_running() {
    let system = ModeSystem::boson(1).unwrap();
    let rep = build_rep(system, 4).unwrap();
    let spec = GeneratorSpec::from_matrices(system, vec![structure_matrices(system).1]).unwrap();
    let wrong = DensityMatrix::maximally_mixed(3);
    assert!(evolve(&spec, &rep, &wrong, &[1.0], &EvolveOptions::default()).is_err());
    let skew = random_matrix(2, 2, 1.0, &mut StdRng::seed_from_u64(1));
    assert!(GeneratorSpec::from_matrices(system, vec![skew.clone()]).is_err());
    assert!(GeneratorSpec::from_matrices(system, vec![symmetrize(&skew, system).unwrap()]).is_ok());
}
