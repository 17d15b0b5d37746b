//! Gaussian states `ρ = exp(½𝔞ᵀM𝔞 + s)` and their stationarity conditions.

use crate::algebra::{structure_matrices, validate_coefficient, GeneratorSpec, ModeSystem, QuadraticCoefficient, Statistics};
use crate::error::{Error, Result};
use crate::linalg::{comm, det, expm, is_positive_definite, ComplexMatrix, C64};

/// Default threshold on the commutator residuals.
pub const STATIONARITY_TOLERANCE: f64 = 1e-10;

/// Eigenvalues of the Hermitian part of `ME` must lie below `−DEFINITENESS_MARGIN`.
pub const DEFINITENESS_MARGIN: f64 = 1e-10;

/// `|det(e^{MJ} − I)|` at or below this is treated as singular.
const SINGULAR_DET: f64 = 1e-14;

/// Which matrix the fermionic normalization exponentiates.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum FermionNormalization {
    /// `e^{−s} = √det(e^{ME} + I)` with the state's own exponent.
    #[default]
    StateExponent,
    /// `e^{−s} = √det(e^{KE} + I)` with an externally supplied `K`.
    Coefficient(ComplexMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStateSpec {
    m_matrix: ComplexMatrix,
    s: C64,
    system: ModeSystem,
}

impl GaussianStateSpec {
    /// Validates `M` and computes `s` from [`normalization`].
    pub fn new(m_matrix: ComplexMatrix, system: ModeSystem) -> Result<Self> {
        validate_exponent(&m_matrix, system)?;
        let s = normalization(&m_matrix, system)?;
        Ok(Self { m_matrix, s, system })
    }

    /// Validates `M` and keeps a caller-supplied log-normalization.
    pub fn with_log_normalization(m_matrix: ComplexMatrix, s: C64, system: ModeSystem) -> Result<Self> {
        validate_exponent(&m_matrix, system)?;
        if !s.is_finite() {
            return Err(Error::StateValidity(format!("log-normalization {s} is not finite")));
        }
        Ok(Self { m_matrix, s, system })
    }

    pub fn m_matrix(&self) -> &ComplexMatrix {
        &self.m_matrix
    }

    pub fn log_normalization(&self) -> C64 {
        self.s
    }

    pub fn system(&self) -> ModeSystem {
        self.system
    }
}

/// Checks the symmetry class of `M` and, for bosons, that `ME < 0`.
pub fn validate_exponent(m: &ComplexMatrix, system: ModeSystem) -> Result<()> {
    validate_coefficient(m, system)?.check("M")?;
    if system.statistics() == Statistics::Boson {
        let (_, e) = structure_matrices(system);
        let me = m * &e;
        let negated = (-&me).hermitian_part();
        if !is_positive_definite(&negated, DEFINITENESS_MARGIN)? {
            return Err(Error::StateValidity("ME is not negative definite".into()));
        }
    }
    Ok(())
}

/// `S = J` for bosons, `E` for fermions.
fn structure(system: ModeSystem) -> ComplexMatrix {
    let (j, e) = structure_matrices(system);
    match system.statistics() {
        Statistics::Boson => j,
        Statistics::Fermion => e,
    }
}

/// Log-normalization `s` making `exp(½𝔞ᵀM𝔞 + s)` unit-trace.
///
/// Bosons: `s = ½ log|det(e^{MJ} − I)|`. Fermions: `s = −½ log det(e^{ME} + I)`.
pub fn normalization(m: &ComplexMatrix, system: ModeSystem) -> Result<C64> {
    normalization_with(m, system, &FermionNormalization::StateExponent)
}

pub fn normalization_with(m: &ComplexMatrix, system: ModeSystem, fermion: &FermionNormalization) -> Result<C64> {
    let d = system.dim();
    if m.rows() != d || m.cols() != d {
        return Err(Error::Shape(format!("exponent is {}x{}, expected {d}x{d}", m.rows(), m.cols())));
    }
    let s_matrix = structure(system);
    match system.statistics() {
        Statistics::Boson => {
            let mut x = expm(&(m * &s_matrix))?;
            x -= &ComplexMatrix::identity(d);
            let value = det(&x)?.norm();
            if !(value > SINGULAR_DET) {
                return Err(Error::SingularNormalization);
            }
            Ok(C64::new(0.5 * value.ln(), 0.0))
        }
        Statistics::Fermion => {
            let exponent = match fermion {
                FermionNormalization::StateExponent => m,
                FermionNormalization::Coefficient(k) => {
                    if k.rows() != d || k.cols() != d {
                        return Err(Error::Shape("coefficient for normalization has wrong shape".into()));
                    }
                    k
                }
            };
            let mut x = expm(&(exponent * &s_matrix))?;
            x += &ComplexMatrix::identity(d);
            Ok(det(&x)?.ln() * -0.5)
        }
    }
}

/// Commutator residual for one coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityResidual {
    /// `‖[K_j S, e^{MS}]‖_F`.
    pub absolute: f64,
    /// The absolute residual divided by `‖K_j S‖_F ‖e^{MS}‖_F` (0 if either vanishes).
    pub relative: f64,
}

/// `‖[K_j S, e^{MS}]‖_F` for each coefficient, `S = J` (bosons) or `E` (fermions).
pub fn stationarity_residuals(spec: &GeneratorSpec, g: &GaussianStateSpec) -> Result<Vec<StationarityResidual>> {
    if spec.system() != g.system {
        return Err(Error::InvalidInput(format!(
            "generator acts on {:?} but the state lives on {:?}",
            spec.system(),
            g.system
        )));
    }
    let s_matrix = structure(g.system);
    let propagator = expm(&(&g.m_matrix * &s_matrix))?;
    let prop_norm = propagator.frobenius_norm();
    spec.coefficients()
        .iter()
        .map(|coeff| {
            let ks = coeff.matrix() * &s_matrix;
            let absolute = comm(&ks, &propagator)?.frobenius_norm();
            let scale = ks.frobenius_norm() * prop_norm;
            let relative = if scale > 0.0 { absolute / scale } else { 0.0 };
            Ok(StationarityResidual { absolute, relative })
        })
        .collect()
}

pub fn is_stationary(residuals: &[StationarityResidual], tolerance: f64) -> bool {
    residuals.iter().all(|r| r.absolute < tolerance)
}

/// The state with exponent `M = βK`, stationary for `K` by construction.
pub fn gibbs_candidate(coeff: &QuadraticCoefficient, beta: f64) -> Result<GaussianStateSpec> {
    if !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta {beta} is not finite")));
    }
    GaussianStateSpec::new(coeff.matrix().scale_real(beta), coeff.system())
}
