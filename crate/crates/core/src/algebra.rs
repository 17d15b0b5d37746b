//! Structure data for the canonical commutation and anticommutation relations.
//!
//! Operators are stacked as `(a_1, …, a_n, a_1†, …, a_n†)`: components
//! `0..n` are annihilators, `n..2n` creators. Every 2n-dimensional index in
//! the crate follows this order.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// Absolute Frobenius tolerance for the symmetry conditions on `K` and `M`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    /// `+1` for bosons, `−1` for fermions: the sign in `K = ±Kᵀ = ±K̃`.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Boson => 1.0,
            Statistics::Fermion => -1.0,
        }
    }
}

/// Number of modes together with their statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeSystem {
    modes: usize,
    statistics: Statistics,
}

impl ModeSystem {
    pub fn new(modes: usize, statistics: Statistics) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidInput("mode count must be at least 1".into()));
        }
        Ok(Self { modes, statistics })
    }

    pub fn boson(modes: usize) -> Result<Self> {
        Self::new(modes, Statistics::Boson)
    }

    pub fn fermion(modes: usize) -> Result<Self> {
        Self::new(modes, Statistics::Fermion)
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// Length of the stacked operator vector, `2n`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    fn check_square(&self, x: &ComplexMatrix, what: &str) -> Result<()> {
        let d = self.dim();
        if x.rows() != d || x.cols() != d {
            return Err(Error::Shape(format!(
                "{what} is {}x{}, expected {d}x{d} for {} mode(s)",
                x.rows(),
                x.cols(),
                self.modes
            )));
        }
        Ok(())
    }
}

/// Returns `(J, E)` with `J = [[0, −I],[I, 0]]` and `E = [[0, I],[I, 0]]`.
pub fn structure_matrices(system: ModeSystem) -> (ComplexMatrix, ComplexMatrix) {
    let n = system.modes();
    let d = system.dim();
    let mut j = ComplexMatrix::zeros(d, d);
    let mut e = ComplexMatrix::zeros(d, d);
    for i in 0..n {
        j[(i, n + i)] = C64::new(-1.0, 0.0);
        j[(n + i, i)] = C64::new(1.0, 0.0);
        e[(i, n + i)] = C64::new(1.0, 0.0);
        e[(n + i, i)] = C64::new(1.0, 0.0);
    }
    (j, e)
}

/// `X̃ = E·conj(X)·E`. Conjugation by `E` swaps the annihilator and creator
/// halves of both indices.
pub fn tilde(x: &ComplexMatrix, system: ModeSystem) -> Result<ComplexMatrix> {
    system.check_square(x, "matrix")?;
    let n = system.modes();
    let d = system.dim();
    let swap = |i: usize| (i + n) % d;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| x[(swap(i), swap(j))].conj()))
}

/// Deviation of a matrix from the symmetry class of its statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryReport {
    pub statistics: Statistics,
    /// `‖X ∓ Xᵀ‖_F`.
    pub transpose_deviation: f64,
    /// `‖X ∓ X̃‖_F`.
    pub tilde_deviation: f64,
    pub tolerance: f64,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.transpose_deviation <= self.tolerance && self.tilde_deviation <= self.tolerance
    }

    /// The two conditions rendered for a matrix called `symbol`, e.g.
    /// `"K = K^T"` and `"K = K~"` for bosons.
    pub fn conditions(&self, symbol: &str) -> [String; 2] {
        match self.statistics {
            Statistics::Boson => [
                format!("{symbol} = {symbol}^T"),
                format!("{symbol} = {symbol}~"),
            ],
            Statistics::Fermion => [
                format!("{symbol} = -{symbol}^T"),
                format!("{symbol} = -{symbol}~"),
            ],
        }
    }

    /// The first violated condition as an error, if any.
    pub fn check(&self, symbol: &str) -> Result<()> {
        let [transpose, tilde] = self.conditions(symbol);
        for (condition, deviation) in [
            (transpose, self.transpose_deviation),
            (tilde, self.tilde_deviation),
        ] {
            if !(deviation <= self.tolerance) {
                return Err(Error::Symmetry {
                    condition,
                    deviation,
                    tolerance: self.tolerance,
                });
            }
        }
        Ok(())
    }
}

/// Measures `‖K ∓ Kᵀ‖_F` and `‖K ∓ K̃‖_F` (upper sign for bosons).
pub fn validate_coefficient(k: &ComplexMatrix, system: ModeSystem) -> Result<SymmetryReport> {
    system.check_square(k, "coefficient")?;
    let sign = system.statistics().sign();
    let transpose_deviation = (k - &k.transpose().scale_real(sign)).frobenius_norm();
    let tilde_deviation = (k - &tilde(k, system)?.scale_real(sign)).frobenius_norm();
    Ok(SymmetryReport {
        statistics: system.statistics(),
        transpose_deviation,
        tilde_deviation,
        tolerance: SYMMETRY_TOLERANCE,
    })
}

/// Projects an arbitrary `2n×2n` matrix onto the valid coefficient class:
/// (anti)symmetrize, then average with the (negated) tilde-conjugate. The two
/// projections commute.
pub fn symmetrize(k: &ComplexMatrix, system: ModeSystem) -> Result<ComplexMatrix> {
    system.check_square(k, "matrix")?;
    let sign = system.statistics().sign();
    let k = (k + &k.transpose().scale_real(sign)).scale_real(0.5);
    let t = tilde(&k, system)?;
    Ok((&k + &t.scale_real(sign)).scale_real(0.5))
}

/// One coefficient `K_j` of `C_j = ½𝔞ᵀK_j𝔞`, validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCoefficient {
    k: ComplexMatrix,
    system: ModeSystem,
}

impl QuadraticCoefficient {
    pub fn new(k: ComplexMatrix, system: ModeSystem) -> Result<Self> {
        validate_coefficient(&k, system)?.check("K")?;
        Ok(Self { k, system })
    }

    pub fn zero(system: ModeSystem) -> Self {
        let d = system.dim();
        Self {
            k: ComplexMatrix::zeros(d, d),
            system,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.k
    }

    pub fn system(&self) -> ModeSystem {
        self.system
    }

    /// `K·J` (bosons) or `K·E` (fermions), the matrix entering the
    /// stationarity commutator.
    pub fn times_structure(&self) -> ComplexMatrix {
        let (j, e) = structure_matrices(self.system);
        match self.system.statistics() {
            Statistics::Boson => &self.k * &j,
            Statistics::Fermion => &self.k * &e,
        }
    }
}

/// `J·K` for bosons, `E·K` for fermions.
pub fn drift_matrix(coeff: &QuadraticCoefficient) -> ComplexMatrix {
    let (j, e) = structure_matrices(coeff.system);
    match coeff.system.statistics() {
        Statistics::Boson => &j * &coeff.k,
        Statistics::Fermion => &e * &coeff.k,
    }
}

/// A generator `𝓛(ρ) = −½ Σ_j [C_j, [C_j, ρ]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    system: ModeSystem,
    coefficients: Vec<QuadraticCoefficient>,
}

impl GeneratorSpec {
    pub fn new(system: ModeSystem, coefficients: Vec<QuadraticCoefficient>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("generator needs at least one coefficient".into()));
        }
        if let Some(bad) = coefficients.iter().position(|c| c.system != system) {
            return Err(Error::InvalidInput(format!(
                "coefficient {bad} belongs to a different mode system"
            )));
        }
        Ok(Self {
            system,
            coefficients,
        })
    }

    /// Convenience constructor validating raw matrices.
    pub fn from_matrices(system: ModeSystem, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let coefficients = matrices
            .into_iter()
            .map(|k| QuadraticCoefficient::new(k, system))
            .collect::<Result<Vec<_>>>()?;
        Self::new(system, coefficients)
    }

    pub fn system(&self) -> ModeSystem {
        self.system
    }

    pub fn coefficients(&self) -> &[QuadraticCoefficient] {
        &self.coefficients
    }
}

/// Random complex matrix with independent standard normal parts.
pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * scale
    })
}

/// Draws a random valid coefficient by projecting a Gaussian matrix.
pub fn random_coefficient<R: Rng + ?Sized>(
    system: ModeSystem,
    scale: f64,
    rng: &mut R,
) -> QuadraticCoefficient {
    let d = system.dim();
    let raw = random_matrix(d, d, scale, rng);
    let k = symmetrize(&raw, system).expect("square by construction");
    QuadraticCoefficient::new(k, system).expect("projection yields a valid coefficient")
}
