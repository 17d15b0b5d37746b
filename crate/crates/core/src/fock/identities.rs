//! Operator identities behind the moment equations, checked on explicit
//! matrices.
//!
//! In a truncated bosonic space an operator polynomial of total degree `D`
//! applied to a basis state with every occupation at most `cutoff − D` never
//! leaves the space before the final factor, so the columns of those states
//! are exact. Residuals are measured on those columns only. Fermionic checks
//! use every column.

use rand::Rng;

use super::{build_rep_capped, FockRep, OracleGenerator};
use crate::algebra::{
    random_coefficient, random_matrix, structure_matrices, GeneratorSpec, QuadraticCoefficient, Statistics,
};
use crate::error::{Error, Result};
use crate::linalg::{expm, ComplexMatrix, ComplexVector};

/// Pass threshold for identity residuals.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IdentityKind {
    LinearCommutator,
    ProductCommutator,
    DoubleCommutator,
    Duality,
    ExpSandwich,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 5] = [
        IdentityKind::LinearCommutator,
        IdentityKind::ProductCommutator,
        IdentityKind::DoubleCommutator,
        IdentityKind::Duality,
        IdentityKind::ExpSandwich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::LinearCommutator => "linear-commutator",
            IdentityKind::ProductCommutator => "product-commutator",
            IdentityKind::DoubleCommutator => "double-commutator",
            IdentityKind::Duality => "generator-duality",
            IdentityKind::ExpSandwich => "exponential-sandwich",
        }
    }
}

/// One instance of an identity with its parameters.
#[derive(Clone, Debug)]
pub enum Identity {
    /// `[½𝔞ᵀK𝔞, fᵀ𝔞] = fᵀA𝔞`.
    LinearCommutator { coeff: QuadraticCoefficient, f: ComplexVector },
    /// `[½𝔞ᵀK𝔞, ∏_l f_lᵀ𝔞] = Σ_i ∏_l f_lᵀA^{δ_il}𝔞`.
    ProductCommutator { coeff: QuadraticCoefficient, factors: Vec<ComplexVector> },
    /// `[C, [C, ∏_l f_lᵀ𝔞]] = Σ_{p,i} ∏_l f_lᵀA^{δ_il+δ_pl}𝔞`.
    DoubleCommutator { coeff: QuadraticCoefficient, factors: Vec<ComplexVector> },
    /// `tr X𝓛(ρ) = tr 𝓛(X)ρ`.
    Duality { spec: GeneratorSpec, rho: ComplexMatrix, observable: ComplexMatrix },
    /// `e^{½𝔞ᵀM𝔞} ½𝔞ᵀK𝔞 e^{−½𝔞ᵀM𝔞} = ½𝔞ᵀ e^{−MJ} K e^{JM} 𝔞` for bosons,
    /// `½𝔠ᵀ e^{ME} K e^{−EM} 𝔠` for fermions.
    ExpSandwich { coeff: QuadraticCoefficient, exponent: ComplexMatrix },
}

impl Identity {
    pub fn kind(&self) -> IdentityKind {
        match self {
            Identity::LinearCommutator { .. } => IdentityKind::LinearCommutator,
            Identity::ProductCommutator { .. } => IdentityKind::ProductCommutator,
            Identity::DoubleCommutator { .. } => IdentityKind::DoubleCommutator,
            Identity::Duality { .. } => IdentityKind::Duality,
            Identity::ExpSandwich { .. } => IdentityKind::ExpSandwich,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub kind: IdentityKind,
    /// `‖LHS − RHS‖_F` over the protected columns (a scalar difference for
    /// the duality check).
    pub residual: f64,
    /// Number of basis states whose columns were compared.
    pub protected_states: usize,
    pub passed: bool,
}

/// The matrix `A` with `[½𝔞ᵀK𝔞, fᵀ𝔞] = fᵀA𝔞`: `JK` for bosons and `−EK`
/// for fermions.
///
/// The fermionic sign follows from `{𝔠_α, 𝔠_β} = E_αβ`. It cancels in the
/// double commutator, so the moment generator uses `EK` either way.
pub fn commutator_drift(coeff: &QuadraticCoefficient) -> ComplexMatrix {
    let (j, e) = structure_matrices(coeff.system());
    match coeff.system().statistics() {
        Statistics::Boson => &j * coeff.matrix(),
        Statistics::Fermion => -&(&e * coeff.matrix()),
    }
}

enum Protection {
    PerMode(usize),
    Total(usize),
}

fn protected_columns(rep: &FockRep, protection: Protection) -> Result<Vec<usize>> {
    let Some(cutoff) = rep.cutoff() else {
        return Ok((0..rep.dim()).collect());
    };
    let (buffer, total) = match protection {
        Protection::PerMode(b) => (b, false),
        Protection::Total(b) => (b, true),
    };
    if buffer > cutoff {
        return Err(Error::Configuration(format!(
            "identity needs a buffer of {buffer} levels but the cutoff is {cutoff}"
        )));
    }
    let limit = cutoff - buffer;
    Ok((0..rep.dim())
        .filter(|&b| {
            let occ = rep.occupations(b);
            if total {
                occ.iter().sum::<usize>() <= limit
            } else {
                occ.iter().all(|&k| k <= limit)
            }
        })
        .collect())
}

fn column_residual(lhs: &ComplexMatrix, rhs: &ComplexMatrix, columns: &[usize]) -> f64 {
    let rows: Vec<usize> = (0..lhs.rows()).collect();
    lhs.select(&rows, columns).frobenius_distance(&rhs.select(&rows, columns))
}

fn check_vectors(rep: &FockRep, factors: &[ComplexVector]) -> Result<()> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("product needs at least one linear factor".into()));
    }
    if let Some(f) = factors.iter().find(|f| f.len() != rep.ops().len()) {
        return Err(Error::Shape(format!(
            "linear form has {} coefficients, expected {}",
            f.len(),
            rep.ops().len()
        )));
    }
    Ok(())
}

/// `∏_l f_lᵀ A^{powers_l} 𝔞`, left to right.
fn product_of_forms(rep: &FockRep, factors: &[ComplexVector], drift_t: &[ComplexMatrix], powers: &[usize]) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(rep.dim());
    for (f, &p) in factors.iter().zip(powers) {
        let coeffs = if p == 0 { f.clone() } else { drift_t[p - 1].matvec(f) };
        out = &out * &rep.linear_form(&coeffs)?;
    }
    Ok(out)
}

fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

fn check_coeff(rep: &FockRep, coeff: &QuadraticCoefficient) -> Result<()> {
    if coeff.system() != rep.system() {
        return Err(Error::InvalidInput("coefficient and representation differ in mode system".into()));
    }
    Ok(())
}

/// Evaluates both sides of an identity and reports the residual.
pub fn verify_identity(identity: &Identity, rep: &FockRep) -> Result<IdentityReport> {
    let kind = identity.kind();
    let (residual, protected_states) = match identity {
        Identity::LinearCommutator { coeff, f } => {
            check_coeff(rep, coeff)?;
            check_vectors(rep, std::slice::from_ref(f))?;
            let columns = protected_columns(rep, Protection::PerMode(3))?;
            let c = rep.quadratic_form(coeff.matrix())?;
            let lhs = commutator(&c, &rep.linear_form(f)?);
            let rhs = rep.linear_form(&commutator_drift(coeff).transpose().matvec(f))?;
            (column_residual(&lhs, &rhs, &columns), columns.len())
        }
        Identity::ProductCommutator { coeff, factors } => {
            check_coeff(rep, coeff)?;
            check_vectors(rep, factors)?;
            let m = factors.len();
            let columns = protected_columns(rep, Protection::PerMode(2 + m))?;
            let c = rep.quadratic_form(coeff.matrix())?;
            let drift_t = vec![commutator_drift(coeff).transpose()];
            let product = product_of_forms(rep, factors, &drift_t, &vec![0; m])?;
            let lhs = commutator(&c, &product);
            let mut rhs = ComplexMatrix::zeros(rep.dim(), rep.dim());
            for i in 0..m {
                let powers: Vec<usize> = (0..m).map(|l| usize::from(l == i)).collect();
                rhs += &product_of_forms(rep, factors, &drift_t, &powers)?;
            }
            (column_residual(&lhs, &rhs, &columns), columns.len())
        }
        Identity::DoubleCommutator { coeff, factors } => {
            check_coeff(rep, coeff)?;
            check_vectors(rep, factors)?;
            let m = factors.len();
            let columns = protected_columns(rep, Protection::PerMode(4 + m))?;
            let c = rep.quadratic_form(coeff.matrix())?;
            let a_t = commutator_drift(coeff).transpose();
            let drift_t = vec![a_t.clone(), &a_t * &a_t];
            let product = product_of_forms(rep, factors, &drift_t, &vec![0; m])?;
            let lhs = commutator(&c, &commutator(&c, &product));
            let mut rhs = ComplexMatrix::zeros(rep.dim(), rep.dim());
            for p in 0..m {
                for i in 0..m {
                    let powers: Vec<usize> = (0..m).map(|l| usize::from(l == i) + usize::from(l == p)).collect();
                    rhs += &product_of_forms(rep, factors, &drift_t, &powers)?;
                }
            }
            (column_residual(&lhs, &rhs, &columns), columns.len())
        }
        Identity::Duality { spec, rho, observable } => {
            let dim = rep.dim();
            if rho.rows() != dim || rho.cols() != dim || observable.rows() != dim || observable.cols() != dim {
                return Err(Error::Shape(format!("duality check needs {dim}x{dim} operators")));
            }
            let generator = OracleGenerator::new(spec, rep)?;
            let lhs = observable.trace_product(&generator.apply(rho));
            let rhs = generator.apply(observable).trace_product(rho);
            ((lhs - rhs).norm(), dim)
        }
        Identity::ExpSandwich { coeff, exponent } => {
            check_coeff(rep, coeff)?;
            let system = rep.system();
            let d = system.dim();
            if exponent.rows() != d || exponent.cols() != d {
                return Err(Error::Shape(format!("exponent must be {d}x{d}")));
            }
            let (j, e) = structure_matrices(system);
            let columns = match system.statistics() {
                Statistics::Boson => {
                    let n = system.modes();
                    let active = (0..n).any(|a| (0..n).any(|b| exponent[(a, b)].norm() > 0.0 || exponent[(n + a, n + b)].norm() > 0.0));
                    if active {
                        return Err(Error::Configuration(
                            "a truncated bosonic space supports the sandwich check only for number-conserving exponents".into(),
                        ));
                    }
                    protected_columns(rep, Protection::Total(3))?
                }
                Statistics::Fermion => protected_columns(rep, Protection::PerMode(0))?,
            };
            let q = rep.quadratic_form(exponent)?;
            let c = rep.quadratic_form(coeff.matrix())?;
            let lhs = &(&expm(&q)? * &c) * &expm(&-&q)?;
            let transformed = match system.statistics() {
                Statistics::Boson => &(&expm(&-&(exponent * &j))? * coeff.matrix()) * &expm(&(&j * exponent))?,
                Statistics::Fermion => &(&expm(&(exponent * &e))? * coeff.matrix()) * &expm(&-&(&e * exponent))?,
            };
            let rhs = rep.quadratic_form(&transformed)?;
            (column_residual(&lhs, &rhs, &columns), columns.len())
        }
    };
    Ok(IdentityReport {
        kind,
        residual,
        protected_states,
        passed: residual < IDENTITY_TOLERANCE,
    })
}

fn random_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> ComplexVector {
    let m = random_matrix(len, 1, 1.0, rng);
    ComplexVector::new(m.into_vec()).expect("finite samples")
}

/// Draws a random instance of `kind` suited to `rep`.
///
/// Bosonic exponential sandwiches use number-conserving exponents
/// `½𝔞ᵀM𝔞 = a†Ha + ½ tr H` with Hermitian `H`.
pub fn random_identity<R: Rng + ?Sized>(kind: IdentityKind, rep: &FockRep, rng: &mut R) -> Result<Identity> {
    let system = rep.system();
    let d = system.dim();
    let coeff = random_coefficient(system, 0.5, rng);
    Ok(match kind {
        IdentityKind::LinearCommutator => Identity::LinearCommutator {
            coeff,
            f: random_vector(d, rng),
        },
        IdentityKind::ProductCommutator => {
            let m = rng.random_range(1..=3);
            Identity::ProductCommutator {
                coeff,
                factors: (0..m).map(|_| random_vector(d, rng)).collect(),
            }
        }
        IdentityKind::DoubleCommutator => {
            let m = rng.random_range(1..=2);
            Identity::DoubleCommutator {
                coeff,
                factors: (0..m).map(|_| random_vector(d, rng)).collect(),
            }
        }
        IdentityKind::Duality => {
            let terms = rng.random_range(1..=2);
            let mut coefficients = vec![coeff];
            coefficients.extend((1..terms).map(|_| random_coefficient(system, 0.5, rng)));
            let spec = GeneratorSpec::new(system, coefficients)?;
            let rho = super::random_density(rep.dim(), None, rep, rng)?.into_matrix();
            let observable = random_matrix(rep.dim(), rep.dim(), 1.0, rng);
            Identity::Duality { spec, rho, observable }
        }
        IdentityKind::ExpSandwich => {
            let exponent = match system.statistics() {
                Statistics::Boson => {
                    let n = system.modes();
                    let h = random_matrix(n, n, 0.3, rng).hermitian_part();
                    let mut m = ComplexMatrix::zeros(d, d);
                    for a in 0..n {
                        for b in 0..n {
                            m[(a, n + b)] = h[(b, a)];
                            m[(n + a, b)] = h[(a, b)];
                        }
                    }
                    m
                }
                Statistics::Fermion => random_coefficient(system, 0.5, rng).matrix().clone(),
            };
            Identity::ExpSandwich { coeff, exponent }
        }
    })
}

/// Runs `count` random instances of every identity kind on a fresh
/// representation.
pub fn verify_random_identities<R: Rng + ?Sized>(
    system: crate::algebra::ModeSystem,
    cutoff: usize,
    dim_cap: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<IdentityReport>> {
    let rep = build_rep_capped(system, cutoff, dim_cap)?;
    let mut out = Vec::with_capacity(count * IdentityKind::ALL.len());
    for kind in IdentityKind::ALL {
        for _ in 0..count {
            out.push(verify_identity(&random_identity(kind, &rep, rng)?, &rep)?);
        }
    }
    Ok(out)
}
