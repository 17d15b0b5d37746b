//! Closed-form moment dynamics.
//!
//! For `C_j = ½𝔞ᵀK_j𝔞` the order-m moment vector `y = ⟨𝔞⊗…⊗𝔞⟩` obeys the
//! linear equation `dy/dt = G_m y` with
//!
//! ```text
//! G_m = −½ Σ_j Σ_{i,p=1..m} ⊗_l A_j^{δ_il + δ_pl},    A_j = JK_j (or EK_j)
//! ```
//!
//! Factors sitting in distinct tensor slots commute, so the double sum is the
//! square of the Kronecker sum `Σ_i I⊗…⊗A_j⊗…⊗I`. That is how the generator
//! is built here.

use crate::algebra::{drift_matrix, GeneratorSpec, ModeSystem};
use crate::error::{Error, Result};
use crate::linalg::{expm, kron, ComplexMatrix, ComplexVector, C64};

/// Default cap on the moment-space dimension `(2n)^m`.
pub const DEFAULT_MOMENT_CAP: usize = 4096;

/// Moments `⟨𝔞_{i_1}⋯𝔞_{i_m}⟩` in row-major lexicographic order of the
/// multi-index, `i_1` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTensor {
    system: ModeSystem,
    order: usize,
    values: ComplexVector,
}

impl MomentTensor {
    pub fn new(system: ModeSystem, order: usize, values: ComplexVector) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("moment order must be at least 1".into()));
        }
        let expected = moment_space_dim(system, order)?;
        if values.len() as u128 != expected {
            return Err(Error::Shape(format!(
                "order-{order} moments for {} mode(s) need {expected} entries, got {}",
                system.modes(),
                values.len()
            )));
        }
        Ok(Self {
            system,
            order,
            values,
        })
    }

    pub fn system(&self) -> ModeSystem {
        self.system
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &ComplexVector {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entry at a zero-based multi-index.
    pub fn get(&self, index: &[usize]) -> C64 {
        self.values[flat_index(self.system.dim(), index)]
    }

    /// Zero-based multi-index of a flat position.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(self.system.dim(), self.order, flat)
    }

    /// Column label such as `m2_1_2`, with one-based component indices.
    pub fn label(&self, flat: usize) -> String {
        moment_label(self.system.dim(), self.order, flat)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.max_abs_diff(&other.values)
    }
}

pub fn flat_index(dim: usize, index: &[usize]) -> usize {
    index.iter().fold(0, |acc, &i| {
        debug_assert!(i < dim);
        acc * dim + i
    })
}

pub fn multi_index(dim: usize, order: usize, mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; order];
    for slot in out.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
    out
}

pub fn moment_label(dim: usize, order: usize, flat: usize) -> String {
    let mut label = format!("m{order}");
    for i in multi_index(dim, order, flat) {
        label.push('_');
        label.push_str(&(i + 1).to_string());
    }
    label
}

fn moment_space_dim(system: ModeSystem, order: usize) -> Result<u128> {
    (system.dim() as u128)
        .checked_pow(order as u32)
        .ok_or(Error::SizeLimit {
            what: "moment space dimension",
            requested: u128::MAX,
            cap: DEFAULT_MOMENT_CAP,
        })
}

fn check_cap(base: usize, order: usize, cap: usize) -> Result<usize> {
    if order == 0 {
        return Err(Error::InvalidInput("moment order must be at least 1".into()));
    }
    let size = (base as u128).checked_pow(order as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::SizeLimit {
            what: "moment space dimension",
            requested: size,
            cap,
        });
    }
    Ok(size as usize)
}

/// `Σ_{i=1..m} I^{⊗(i−1)} ⊗ a ⊗ I^{⊗(m−i)}` with the default size cap.
pub fn kron_sum(a: &ComplexMatrix, m: usize) -> Result<ComplexMatrix> {
    kron_sum_capped(a, m, DEFAULT_MOMENT_CAP)
}

pub fn kron_sum_capped(a: &ComplexMatrix, m: usize, cap: usize) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "Kronecker sum of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let d = a.rows();
    let size = check_cap(d, m, cap)?;
    let mut out = ComplexMatrix::zeros(size, size);
    for slot in 0..m {
        let left = ComplexMatrix::identity(d.pow(slot as u32));
        let right = ComplexMatrix::identity(d.pow((m - 1 - slot) as u32));
        out += &kron(&kron(&left, a)?, &right)?;
    }
    Ok(out)
}

/// The order-m moment generator `G_m` with the default size cap.
pub fn moment_generator(spec: &GeneratorSpec, m: usize) -> Result<ComplexMatrix> {
    moment_generator_capped(spec, m, DEFAULT_MOMENT_CAP)
}

pub fn moment_generator_capped(spec: &GeneratorSpec, m: usize, cap: usize) -> Result<ComplexMatrix> {
    let size = check_cap(spec.system().dim(), m, cap)?;
    let mut acc = ComplexMatrix::zeros(size, size);
    for coeff in spec.coefficients() {
        let sum = kron_sum_capped(&drift_matrix(coeff), m, cap)?;
        acc += &(&sum * &sum);
    }
    Ok(acc.scale_real(-0.5))
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::InvalidInput(format!("time {t} is negative or not finite")));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(format!(
            "times must be ascending, found {} after {}",
            w[1], w[0]
        )));
    }
    Ok(())
}

/// A precomputed generator for one moment order.
#[derive(Clone, Debug)]
pub struct MomentPropagator {
    system: ModeSystem,
    order: usize,
    generator: ComplexMatrix,
}

impl MomentPropagator {
    pub fn new(spec: &GeneratorSpec, order: usize) -> Result<Self> {
        Self::with_cap(spec, order, DEFAULT_MOMENT_CAP)
    }

    pub fn with_cap(spec: &GeneratorSpec, order: usize, cap: usize) -> Result<Self> {
        Ok(Self {
            system: spec.system(),
            order,
            generator: moment_generator_capped(spec, order, cap)?,
        })
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    fn check_initial(&self, y0: &MomentTensor) -> Result<()> {
        if y0.system != self.system || y0.order != self.order {
            return Err(Error::InvalidInput(format!(
                "initial moments are order {} for {:?}, propagator is order {} for {:?}",
                y0.order, y0.system, self.order, self.system
            )));
        }
        Ok(())
    }

    /// `expm(t·G_m)·y0`; returns `y0` unchanged at `t = 0`.
    pub fn at(&self, y0: &MomentTensor, t: f64) -> Result<MomentTensor> {
        self.check_initial(y0)?;
        check_times(&[t])?;
        if t == 0.0 {
            return Ok(y0.clone());
        }
        let values = expm(&self.generator.scale_real(t))?.matvec(&y0.values);
        MomentTensor::new(self.system, self.order, values)
    }

    /// One matrix exponential per requested time.
    pub fn trajectory(&self, y0: &MomentTensor, times: &[f64]) -> Result<Vec<MomentTensor>> {
        check_times(times)?;
        times.iter().map(|&t| self.at(y0, t)).collect()
    }

    /// Uniform grid `start + k·step`, `k = 0..count`, reusing a single
    /// `expm(step·G_m)` after the first point.
    pub fn uniform(&self, y0: &MomentTensor, start: f64, step: f64, count: usize) -> Result<Vec<MomentTensor>> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidInput(format!("uniform grid step {step} must be positive")));
        }
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return Ok(out);
        }
        let step_map = expm(&self.generator.scale_real(step))?;
        let mut current = self.at(y0, start)?;
        for _ in 0..count {
            let next = step_map.matvec(&current.values);
            out.push(current);
            current = MomentTensor::new(self.system, self.order, next)?;
        }
        Ok(out)
    }
}

/// Closed-form moment trajectory `y(t_k) = expm(t_k·G_m)·y0`.
pub fn propagate_moments(spec: &GeneratorSpec, y0: &MomentTensor, times: &[f64]) -> Result<Vec<MomentTensor>> {
    if y0.system != spec.system() {
        return Err(Error::InvalidInput("initial moments belong to a different mode system".into()));
    }
    check_times(times)?;
    MomentPropagator::new(spec, y0.order)?.trajectory(y0, times)
}
