//! Brute-force Fock-space realization of the master equation.
//!
//! Bosonic modes are truncated to `cutoff` levels each; fermionic modes are
//! realized exactly on `2^n` states through Jordan–Wigner strings. Mode 1 is
//! the leftmost tensor factor, and level `k` of a mode is its `k`-th basis
//! vector (for fermions index 1 is the occupied state).

mod identities;
mod states;

pub use identities::{
    commutator_drift, random_identity, verify_identity, verify_random_identities, Identity, IdentityKind, IdentityReport,
    IDENTITY_TOLERANCE,
};
pub use states::{gaussian_operator, random_density, state_factory, InitSpec};

use crate::algebra::{GeneratorSpec, ModeSystem, QuadraticCoefficient, Statistics};
use crate::error::{Error, Result};
use crate::linalg::{expm, kron, ComplexMatrix, ComplexVector, C64};
use crate::moments::{flat_index, MomentTensor, DEFAULT_MOMENT_CAP};

/// Default cap on the Hilbert-space dimension of the oracle.
pub const DEFAULT_DIM_CAP: usize = 256;
/// Default cap on `dim` for the vectorized superoperator route.
pub const DEFAULT_SUPEROP_DIM_CAP: usize = 64;
/// Default alarm threshold for population on the truncation edge.
pub const DEFAULT_EDGE_TOLERANCE: f64 = 1e-6;

/// Explicit operator matrices for the stacked vector `𝔞` or `𝔠`.
#[derive(Clone, Debug)]
pub struct FockRep {
    system: ModeSystem,
    levels: usize,
    dim: usize,
    ops: Vec<ComplexMatrix>,
}

/// Single-mode lowering operator on `levels` states.
fn lowering(levels: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(levels, levels, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Places a single-mode operator at `mode` in an `n`-mode tensor product,
/// with `fill` on the modes to its left and the identity to its right.
fn embed(single: &ComplexMatrix, fill: &ComplexMatrix, mode: usize, modes: usize) -> Result<ComplexMatrix> {
    let levels = single.rows();
    let mut out = ComplexMatrix::identity(1);
    for m in 0..modes {
        let factor = if m < mode {
            fill.clone()
        } else if m == mode {
            single.clone()
        } else {
            ComplexMatrix::identity(levels)
        };
        out = kron(&out, &factor)?;
    }
    Ok(out)
}

/// Builds the operator matrices with the default dimension cap.
pub fn build_rep(system: ModeSystem, cutoff: usize) -> Result<FockRep> {
    build_rep_capped(system, cutoff, DEFAULT_DIM_CAP)
}

pub fn build_rep_capped(system: ModeSystem, cutoff: usize, dim_cap: usize) -> Result<FockRep> {
    let n = system.modes();
    let levels = match system.statistics() {
        Statistics::Boson => {
            if cutoff < 2 {
                return Err(Error::Configuration(format!("bosonic cutoff {cutoff} must be at least 2")));
            }
            cutoff
        }
        Statistics::Fermion => 2,
    };
    let dim = (levels as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > dim_cap as u128 {
        return Err(Error::SizeLimit {
            what: "oracle Hilbert-space dimension",
            requested: dim,
            cap: dim_cap,
        });
    }
    let dim = dim as usize;

    let single = lowering(levels);
    let fill = match system.statistics() {
        Statistics::Boson => ComplexMatrix::identity(levels),
        Statistics::Fermion => ComplexMatrix::from_real_diag(&[1.0, -1.0]),
    };
    let mut ops = Vec::with_capacity(2 * n);
    for mode in 0..n {
        ops.push(embed(&single, &fill, mode, n)?);
    }
    for mode in 0..n {
        let creator = ops[mode].adjoint();
        ops.push(creator);
    }
    Ok(FockRep {
        system,
        levels,
        dim,
        ops,
    })
}

impl FockRep {
    pub fn system(&self) -> ModeSystem {
        self.system
    }

    /// Per-mode occupation cap for bosons.
    pub fn cutoff(&self) -> Option<usize> {
        match self.system.statistics() {
            Statistics::Boson => Some(self.levels),
            Statistics::Fermion => None,
        }
    }

    /// Levels per mode (the cutoff for bosons, 2 for fermions).
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn op(&self, index: usize) -> &ComplexMatrix {
        &self.ops[index]
    }

    /// Occupation numbers of a basis state, mode 1 first.
    pub fn occupations(&self, basis: usize) -> Vec<usize> {
        let n = self.system.modes();
        let mut out = vec![0; n];
        let mut rest = basis;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.levels;
            rest /= self.levels;
        }
        out
    }

    pub fn basis_index(&self, occupations: &[usize]) -> usize {
        flat_index(self.levels, occupations)
    }

    /// `op_α · op_β`.
    ///
    /// For two bosonic operators on the same mode the product is formed with
    /// one extra level and then truncated, so the result is the exact
    /// compression of the untruncated product (e.g. `a a†` has `d` on its
    /// last diagonal entry rather than 0).
    pub fn pair_product(&self, alpha: usize, beta: usize) -> Result<ComplexMatrix> {
        let n = self.system.modes();
        if self.system.statistics() == Statistics::Boson && alpha % n == beta % n {
            let mode = alpha % n;
            let wide = lowering(self.levels + 1);
            let pick = |index: usize| if index < n { wide.clone() } else { wide.adjoint() };
            let product = &pick(alpha) * &pick(beta);
            let keep: Vec<usize> = (0..self.levels).collect();
            let single = product.select(&keep, &keep);
            return embed(&single, &ComplexMatrix::identity(self.levels), mode, n);
        }
        Ok(&self.ops[alpha] * &self.ops[beta])
    }

    /// `fᵀ𝔞 = Σ_α f_α op_α`.
    pub fn linear_form(&self, f: &ComplexVector) -> Result<ComplexMatrix> {
        if f.len() != self.ops.len() {
            return Err(Error::Shape(format!(
                "linear form needs {} coefficients, got {}",
                self.ops.len(),
                f.len()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (op, &c) in self.ops.iter().zip(f.iter()) {
            if c != C64::new(0.0, 0.0) {
                out += &op.scale(c);
            }
        }
        Ok(out)
    }

    /// `½𝔞ᵀX𝔞 = ½ Σ_{α,β} X_{αβ} op_α op_β` for any `2n×2n` matrix `X`.
    pub fn quadratic_form(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.ops.len();
        if x.rows() != d || x.cols() != d {
            return Err(Error::Shape(format!(
                "quadratic form needs a {d}x{d} matrix, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for alpha in 0..d {
            for beta in 0..d {
                let c = x[(alpha, beta)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                out += &self.pair_product(alpha, beta)?.scale(c * 0.5);
            }
        }
        Ok(out)
    }

    /// Total population of basis states with some mode on its top level.
    /// Always 0 for fermions.
    pub fn edge_population(&self, rho: &ComplexMatrix) -> f64 {
        if self.system.statistics() == Statistics::Fermion {
            return 0.0;
        }
        (0..self.dim)
            .filter(|&b| self.occupations(b).iter().any(|&k| k + 1 == self.levels))
            .map(|b| rho[(b, b)].re)
            .sum()
    }

    fn check_system(&self, system: ModeSystem) -> Result<()> {
        if system != self.system {
            return Err(Error::InvalidInput(format!(
                "representation is for {:?}, got {:?}",
                self.system, system
            )));
        }
        Ok(())
    }
}

/// `C = ½𝔞ᵀK𝔞` as an explicit matrix.
pub fn quadratic_operator(coeff: &QuadraticCoefficient, rep: &FockRep) -> Result<ComplexMatrix> {
    rep.check_system(coeff.system())?;
    let c = rep.quadratic_form(coeff.matrix())?;
    // Hermitian up to rounding; drop the antihermitian residue.
    Ok(c.hermitian_part())
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: ComplexMatrix,
}

/// Hermiticity tolerance for [`DensityMatrix::new`].
pub const DENSITY_HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Trace tolerance for [`DensityMatrix::new`].
pub const DENSITY_TRACE_TOLERANCE: f64 = 1e-10;
/// Eigenvalues must be at least `−DENSITY_EIGEN_SLACK`.
pub const DENSITY_EIGEN_SLACK: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::StateValidity(format!("density matrix is {}x{}", rho.rows(), rho.cols())));
        }
        let defect = rho.hermiticity_defect();
        if !(defect <= DENSITY_HERMITIAN_TOLERANCE) {
            return Err(Error::StateValidity(format!("not Hermitian (defect {defect:.3e})")));
        }
        let trace = rho.trace();
        if !((trace - 1.0).norm() <= DENSITY_TRACE_TOLERANCE) {
            return Err(Error::StateValidity(format!("trace is {trace}, not 1")));
        }
        let shifted = &rho + &ComplexMatrix::identity(rho.rows()).scale_real(DENSITY_EIGEN_SLACK);
        if !crate::linalg::is_positive_definite(&shifted, 0.0)? {
            return Err(Error::StateValidity("has a negative eigenvalue".into()));
        }
        Ok(Self { rho })
    }

    /// Wraps a matrix produced by trace- and Hermiticity-preserving dynamics
    /// without re-running the checks.
    pub(crate) fn from_dynamics(rho: ComplexMatrix) -> Self {
        Self { rho }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn pure(state: &ComplexVector) -> Result<Self> {
        let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::StateValidity("zero state vector".into()));
        }
        let n = state.len();
        let rho = ComplexMatrix::from_fn(n, n, |i, j| state[i] * state[j].conj() / norm);
        Ok(Self { rho: rho.hermitian_part() })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.rho.trace_product(&self.rho).re
    }
}

/// The operators `C_j` realized on a Fock representation.
#[derive(Clone, Debug)]
pub struct OracleGenerator {
    jumps: Vec<ComplexMatrix>,
    dim: usize,
}

impl OracleGenerator {
    pub fn new(spec: &GeneratorSpec, rep: &FockRep) -> Result<Self> {
        rep.check_system(spec.system())?;
        let jumps = spec
            .coefficients()
            .iter()
            .map(|k| quadratic_operator(k, rep))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { jumps, dim: rep.dim })
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `−½ Σ_j [C_j, [C_j, X]]` for any operator `X`.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
        for c in &self.jumps {
            let inner = &(c * x) - &(x * c);
            let outer = &(c * &inner) - &(&inner * c);
            out -= &outer.scale_real(0.5);
        }
        out
    }

    /// The generator acting on row-major `vec(ρ)`:
    /// `−½ Σ_j (C_j² ⊗ I − 2 C_j ⊗ C_jᵀ + I ⊗ (C_j²)ᵀ)`.
    pub fn superoperator(&self) -> Result<ComplexMatrix> {
        let id = ComplexMatrix::identity(self.dim);
        let size = self.dim * self.dim;
        let mut out = ComplexMatrix::zeros(size, size);
        for c in &self.jumps {
            let c2 = c * c;
            out += &kron(&c2, &id)?;
            out -= &kron(c, &c.transpose())?.scale_real(2.0);
            out += &kron(&id, &c2.transpose())?;
        }
        Ok(out.scale_real(-0.5))
    }

    /// Upper bound on the induced 1-norm of the generator, `2 Σ_j ‖C_j‖₁²`.
    pub fn norm_bound(&self) -> f64 {
        self.jumps.iter().map(|c| 2.0 * c.one_norm().powi(2)).sum()
    }
}

/// `𝓛(ρ) = −½ Σ_j [C_j, [C_j, ρ]]`.
pub fn apply_generator(spec: &GeneratorSpec, rep: &FockRep, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != rep.dim {
        return Err(Error::InvalidInput(format!(
            "density matrix has dimension {}, representation {}",
            rho.dim(),
            rep.dim
        )));
    }
    Ok(OracleGenerator::new(spec, rep)?.apply(&rho.rho))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvolveMethod {
    /// Superoperator exponential when `dim` is within the superoperator cap,
    /// RK4 otherwise.
    #[default]
    Auto,
    SuperopExpm,
    Rk4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub method: EvolveMethod,
    pub superop_dim_cap: usize,
    /// Abort when population on the bosonic truncation edge exceeds this.
    pub edge_tolerance: f64,
    /// RK4 steps satisfy `‖𝓛‖·h ≤ step_safety`.
    pub step_safety: f64,
    /// Upper bound on RK4 steps per output interval.
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            method: EvolveMethod::Auto,
            superop_dim_cap: DEFAULT_SUPEROP_DIM_CAP,
            edge_tolerance: DEFAULT_EDGE_TOLERANCE,
            step_safety: 0.05,
            max_steps: 10_000_000,
        }
    }
}

fn vectorize(rho: &ComplexMatrix) -> ComplexVector {
    ComplexVector::new(rho.as_slice().to_vec()).expect("finite density matrix")
}

fn unvectorize(v: ComplexVector, dim: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::new(dim, dim, v.into_vec())
}

/// Relative tolerance for reusing the previous interval's propagator.
const SAME_STEP: f64 = 1e-12;

/// Integrates `dρ/dt = 𝓛(ρ)` and returns `ρ(t_k)` for each requested time.
///
/// Consecutive intervals of equal length reuse one propagator, so uniform
/// grids cost a single matrix exponential on the superoperator route.
pub fn evolve(
    spec: &GeneratorSpec,
    rep: &FockRep,
    rho0: &DensityMatrix,
    times: &[f64],
    options: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != rep.dim {
        return Err(Error::InvalidInput(format!(
            "initial state has dimension {}, representation {}",
            rho0.dim(),
            rep.dim
        )));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::InvalidInput(format!("time {t} is negative or not finite")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be ascending".into()));
    }
    let generator = OracleGenerator::new(spec, rep)?;
    let method = match options.method {
        EvolveMethod::Auto if rep.dim <= options.superop_dim_cap => EvolveMethod::SuperopExpm,
        EvolveMethod::Auto => EvolveMethod::Rk4,
        other => other,
    };
    if method == EvolveMethod::SuperopExpm && rep.dim > options.superop_dim_cap {
        return Err(Error::SizeLimit {
            what: "superoperator route Hilbert-space dimension",
            requested: rep.dim as u128,
            cap: options.superop_dim_cap,
        });
    }

    let check_edge = |rho: &ComplexMatrix, t: f64| -> Result<()> {
        let edge = rep.edge_population(rho);
        if edge > options.edge_tolerance {
            return Err(Error::Truncation(format!(
                "population {edge:.3e} on the truncation edge at t = {t} exceeds {:.0e}",
                options.edge_tolerance
            )));
        }
        Ok(())
    };

    let mut out = Vec::with_capacity(times.len());
    let mut current = rho0.rho.clone();
    let mut now = 0.0;
    check_edge(&current, now)?;

    match method {
        EvolveMethod::SuperopExpm => {
            let superop = generator.superoperator()?;
            let mut cached: Option<(f64, ComplexMatrix)> = None;
            for &t in times {
                let dt = t - now;
                if dt > 0.0 {
                    let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= SAME_STEP * dt.max(*h));
                    if !reuse {
                        cached = Some((dt, expm(&superop.scale_real(dt))?));
                    }
                    let (_, step) = cached.as_ref().expect("propagator cached above");
                    current = unvectorize(step.matvec(&vectorize(&current)), rep.dim)?;
                    now = t;
                    check_edge(&current, t)?;
                }
                out.push(DensityMatrix::from_dynamics(current.clone()));
            }
        }
        EvolveMethod::Rk4 | EvolveMethod::Auto => {
            let bound = generator.norm_bound();
            for &t in times {
                let dt = t - now;
                if dt > 0.0 {
                    let steps = if bound > 0.0 {
                        (dt * bound / options.step_safety).ceil().max(1.0)
                    } else {
                        1.0
                    };
                    if steps > options.max_steps as f64 {
                        return Err(Error::Integration(format!(
                            "interval of length {dt} needs {steps} RK4 steps, limit is {}",
                            options.max_steps
                        )));
                    }
                    let steps = steps as usize;
                    let h = dt / steps as f64;
                    if h <= f64::EPSILON * t.max(1.0) {
                        return Err(Error::Integration(format!("step size {h} underflows at t = {t}")));
                    }
                    for _ in 0..steps {
                        current = rk4_step(&generator, &current, h);
                    }
                    now = t;
                    check_edge(&current, t)?;
                }
                out.push(DensityMatrix::from_dynamics(current.clone()));
            }
        }
    }
    Ok(out)
}

fn rk4_step(generator: &OracleGenerator, rho: &ComplexMatrix, h: f64) -> ComplexMatrix {
    let k1 = generator.apply(rho);
    let k2 = generator.apply(&(rho + &k1.scale_real(h / 2.0)));
    let k3 = generator.apply(&(rho + &k2.scale_real(h / 2.0)));
    let k4 = generator.apply(&(rho + &k3.scale_real(h)));
    let mut next = rho.clone();
    next += &k1.scale_real(h / 6.0);
    next += &k2.scale_real(h / 3.0);
    next += &k3.scale_real(h / 3.0);
    next += &k4.scale_real(h / 6.0);
    next
}

/// Moments `tr(op_{i_1}⋯op_{i_m} ρ)` with the default moment cap.
pub fn extract_moments(rho: &DensityMatrix, rep: &FockRep, m: usize) -> Result<MomentTensor> {
    extract_moments_capped(rho, rep, m, DEFAULT_MOMENT_CAP)
}

pub fn extract_moments_capped(rho: &DensityMatrix, rep: &FockRep, m: usize, cap: usize) -> Result<MomentTensor> {
    if m == 0 {
        return Err(Error::InvalidInput("moment order must be at least 1".into()));
    }
    if rho.dim() != rep.dim {
        return Err(Error::InvalidInput("density matrix does not match the representation".into()));
    }
    let d = rep.ops.len();
    let size = (d as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::SizeLimit {
            what: "moment space dimension",
            requested: size,
            cap,
        });
    }
    // Suffix products op_{i_k}⋯op_{i_m}·ρ, built from the right.
    let mut suffixes: Vec<ComplexMatrix> = vec![rho.rho.clone()];
    for _ in 1..m {
        let mut next = Vec::with_capacity(suffixes.len() * d);
        for op in &rep.ops {
            for s in &suffixes {
                next.push(op * s);
            }
        }
        suffixes = next;
    }
    let mut values = Vec::with_capacity(size as usize);
    for op in &rep.ops {
        for s in &suffixes {
            values.push(op.trace_product(s));
        }
    }
    MomentTensor::new(rep.system, m, ComplexVector::new(values)?)
}
