use rand::Rng;
use rand_distr::StandardNormal;

use super::{DensityMatrix, FockRep};
use crate::algebra::Statistics;
use crate::error::{Error, Result};
use crate::gaussian::GaussianStateSpec;
use crate::linalg::{expm, kron, ComplexMatrix, ComplexVector, C64};

/// Untruncated probability mass allowed beyond the bosonic cutoff.
const TAIL_TOLERANCE: f64 = 1e-8;

/// Initial states the oracle can construct.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Vacuum,
    /// Occupation number per mode.
    Fock(Vec<usize>),
    /// Coherent amplitude per mode (bosons only).
    Coherent(Vec<C64>),
    /// `ρ ∝ ⊗_i e^{−λ_i n_i}`, one `λ` per mode.
    Thermal(Vec<f64>),
    /// `exp(½𝔞ᵀM𝔞 + s)`, renormalized after truncation.
    Gaussian(GaussianStateSpec),
    /// `GG†/tr(GG†)` for a seeded Gaussian `G`, optionally restricted to
    /// occupations below `support` in every mode.
    Random { seed: u64, support: Option<usize> },
}

fn per_mode<T>(values: &[T], rep: &FockRep, what: &str) -> Result<()> {
    let n = rep.system().modes();
    if values.len() != n {
        return Err(Error::InvalidInput(format!("{what} needs {n} value(s), got {}", values.len())));
    }
    Ok(())
}

fn kron_all(factors: Vec<ComplexMatrix>) -> Result<ComplexMatrix> {
    factors
        .into_iter()
        .try_fold(ComplexMatrix::identity(1), |acc, f| kron(&acc, &f))
}

/// Builds a valid density matrix on `rep`.
pub fn state_factory(init: &InitSpec, rep: &FockRep) -> Result<DensityMatrix> {
    let levels = rep.levels();
    match init {
        InitSpec::Vacuum => state_factory(&InitSpec::Fock(vec![0; rep.system().modes()]), rep),
        InitSpec::Fock(occupations) => {
            per_mode(occupations, rep, "Fock state")?;
            if let Some(&k) = occupations.iter().find(|&&k| k >= levels) {
                return Err(Error::InvalidInput(format!(
                    "occupation {k} not representable with {levels} levels per mode"
                )));
            }
            let mut v = ComplexVector::zeros(rep.dim()).into_vec();
            v[rep.basis_index(occupations)] = C64::new(1.0, 0.0);
            DensityMatrix::pure(&ComplexVector::new(v)?)
        }
        InitSpec::Coherent(alphas) => {
            if rep.system().statistics() == Statistics::Fermion {
                return Err(Error::InvalidInput("coherent states are bosonic".into()));
            }
            per_mode(alphas, rep, "coherent state")?;
            let mut factors = Vec::with_capacity(alphas.len());
            for &alpha in alphas {
                let mut amp = Vec::with_capacity(levels);
                let mut current = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
                for k in 0..levels {
                    if k > 0 {
                        current = current * alpha / (k as f64).sqrt();
                    }
                    amp.push(current);
                }
                let kept: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
                let tail = 1.0 - kept;
                if tail > TAIL_TOLERANCE {
                    return Err(Error::Truncation(format!(
                        "coherent amplitude {alpha} leaves mass {tail:.3e} beyond cutoff {levels}"
                    )));
                }
                let psi = ComplexVector::new(amp)?;
                factors.push(DensityMatrix::pure(&psi)?.into_matrix());
            }
            DensityMatrix::new(kron_all(factors)?.hermitian_part())
        }
        InitSpec::Thermal(lambdas) => {
            per_mode(lambdas, rep, "thermal state")?;
            let mut factors = Vec::with_capacity(lambdas.len());
            for &lambda in lambdas {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::InvalidInput(format!("thermal lambda {lambda} must be positive")));
                }
                if rep.system().statistics() == Statistics::Boson {
                    let tail = (-lambda * levels as f64).exp();
                    if tail > TAIL_TOLERANCE {
                        return Err(Error::Truncation(format!(
                            "thermal lambda {lambda} leaves mass {tail:.3e} beyond cutoff {levels}"
                        )));
                    }
                }
                let weights: Vec<f64> = (0..levels).map(|k| (-lambda * k as f64).exp()).collect();
                let z: f64 = weights.iter().sum();
                let diag: Vec<f64> = weights.iter().map(|w| w / z).collect();
                factors.push(ComplexMatrix::from_real_diag(&diag));
            }
            DensityMatrix::new(kron_all(factors)?)
        }
        InitSpec::Gaussian(g) => {
            let raw = gaussian_operator(g, rep)?;
            let trace = raw.trace().re;
            if !((trace - 1.0).abs() <= TAIL_TOLERANCE) {
                return Err(Error::Truncation(format!(
                    "Gaussian state has trace {trace} in the truncated space"
                )));
            }
            DensityMatrix::new(raw.scale_real(1.0 / trace).hermitian_part())
        }
        InitSpec::Random { seed, support } => {
            use rand::SeedableRng;
            let mut rng = rand::rngs::StdRng::seed_from_u64(*seed);
            random_density(rep.dim(), *support, rep, &mut rng)
        }
    }
}

/// `exp(½𝔞ᵀM𝔞 + s)` on `rep`, not renormalized.
pub fn gaussian_operator(g: &GaussianStateSpec, rep: &FockRep) -> Result<ComplexMatrix> {
    if g.system() != rep.system() {
        return Err(Error::InvalidInput("Gaussian state and representation differ in mode system".into()));
    }
    let mut exponent = rep.quadratic_form(g.m_matrix())?.hermitian_part();
    let s = g.log_normalization();
    for i in 0..rep.dim() {
        exponent[(i, i)] += s;
    }
    Ok(expm(&exponent)?.hermitian_part())
}

/// Random full-rank density matrix, optionally supported on basis states
/// with every occupation below `support`. `rank` columns are drawn for `G`.
pub fn random_density<R: Rng + ?Sized>(
    rank: usize,
    support: Option<usize>,
    rep: &FockRep,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let dim = rep.dim();
    let allowed: Vec<bool> = (0..dim)
        .map(|b| support.is_none_or(|cap| rep.occupations(b).iter().all(|&k| k < cap)))
        .collect();
    let g = ComplexMatrix::from_fn(dim, rank.max(1), |i, _| {
        if allowed[i] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let rho = &g * &g.adjoint();
    let trace = rho.trace().re;
    DensityMatrix::new(rho.scale_real(1.0 / trace).hermitian_part())
}
