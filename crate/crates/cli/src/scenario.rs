use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use gksl_core::algebra::{random_coefficient, QuadraticCoefficient};
use gksl_core::fock::{
    build_rep_capped, EvolveMethod, EvolveOptions, FockRep, InitSpec, DEFAULT_DIM_CAP, DEFAULT_EDGE_TOLERANCE,
    DEFAULT_SUPEROP_DIM_CAP,
};
use gksl_core::gaussian::{normalization_with, FermionNormalization, GaussianStateSpec};
use gksl_core::moments::DEFAULT_MOMENT_CAP;
use gksl_core::{ComplexMatrix, ComplexVector, GeneratorSpec, ModeSystem, MomentTensor, Statistics, C64};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, Context};

/// A complex number written as `[re, im]`; a bare number is read as real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex(pub C64);

impl Serialize for Complex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Complex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ComplexVisitor;

        impl<'de> Visitor<'de> for ComplexVisitor {
            type Value = Complex;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a [re, im] pair")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Complex, E> {
                Ok(Complex(C64::new(v, 0.0)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Complex, E> {
                Ok(Complex(C64::new(v as f64, 0.0)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Complex, E> {
                Ok(Complex(C64::new(v as f64, 0.0)))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Complex, A::Error> {
                let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Complex(C64::new(re, im)))
            }
        }

        deserializer.deserialize_any(ComplexVisitor)
    }
}

/// Row-major nested arrays.
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticsConfig {
    Boson,
    Fermion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub statistics: StatisticsConfig,
    pub modes: usize,
}

/// Coefficients drawn from the scenario seed and appended to the explicit ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCoefficients {
    pub count: usize,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateConfig {
    Vacuum,
    Fock {
        occupations: Vec<usize>,
    },
    Coherent {
        alpha: Vec<Complex>,
    },
    Thermal {
        lambda: Vec<f64>,
    },
    Gaussian {
        m: Matrix,
    },
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub state: StateConfig,
    /// Explicit initial moments keyed by order, flattened row-major.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub moments: BTreeMap<usize, Vec<Complex>>,
}

/// `steps` evenly spaced points from `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Propagate closed-form moments with one reused step propagator
    /// instead of one exponential per point.
    #[serde(default)]
    pub reuse_step: bool,
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.steps == 0 {
            return Err(CliError::Input("times.steps must be at least 1".into()));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.start < 0.0 {
            return Err(CliError::Input("times.start and times.stop must be finite and non-negative".into()));
        }
        if self.stop < self.start {
            return Err(CliError::Input("times.stop must not precede times.start".into()));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let last = self.steps - 1;
        let h = self.step();
        Ok((0..self.steps).map(|k| if k == last { self.stop } else { self.start + k as f64 * h }).collect())
    }

    pub fn step(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.stop - self.start) / (self.steps - 1) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    #[default]
    Auto,
    SuperopExpm,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Levels per bosonic mode; ignored for fermions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    pub method: MethodConfig,
    pub dim_cap: usize,
    pub superop_dim_cap: usize,
    pub moment_cap: usize,
    pub edge_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cutoff: None,
            method: MethodConfig::Auto,
            dim_cap: DEFAULT_DIM_CAP,
            superop_dim_cap: DEFAULT_SUPEROP_DIM_CAP,
            moment_cap: DEFAULT_MOMENT_CAP,
            edge_tolerance: DEFAULT_EDGE_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub compare: f64,
    pub stationary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { compare: 1e-6, stationary: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationConfig {
    /// Fermions: `−½ log det(e^{ME} + I)`.
    #[default]
    StateExponent,
    /// Fermions: the same formula with the first coefficient in place of `M`.
    Coefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub m: Matrix,
    #[serde(default = "yes")]
    pub oracle: bool,
    #[serde(default)]
    pub normalization: NormalizationConfig,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    #[serde(default)]
    pub coefficients: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_coefficients: Option<RandomCoefficients>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default)]
    pub moment_orders: Vec<usize>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Parses JSON, reporting the offending field path and position.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|err| {
            let path = err.path().to_string();
            CliError::Input(format!("{origin}: field `{path}`: {}", err.into_inner()))
        })?;
        de.end().map_err(|err| CliError::Input(format!("{origin}: {err}")))?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { context: format!("reading {}", path.display()), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario values serialize") + "\n"
    }

    pub fn mode_system(&self) -> Result<ModeSystem, CliError> {
        let statistics = match self.system.statistics {
            StatisticsConfig::Boson => Statistics::Boson,
            StatisticsConfig::Fermion => Statistics::Fermion,
        };
        ModeSystem::new(self.system.modes, statistics).context("system")
    }

    /// Explicit coefficients followed by any drawn from `seed`.
    pub fn generator(&self, seed: u64) -> Result<GeneratorSpec, CliError> {
        let system = self.mode_system()?;
        let mut coefficients = Vec::new();
        for (i, raw) in self.coefficients.iter().enumerate() {
            let where_ = format!("coefficients[{i}]");
            let k = matrix(raw, system.dim(), &where_)?;
            coefficients.push(QuadraticCoefficient::new(k, system).context(&where_)?);
        }
        if let Some(random) = &self.random_coefficients {
            if !(random.scale > 0.0) || !random.scale.is_finite() {
                return Err(CliError::Input("random_coefficients.scale must be positive".into()));
            }
            let mut rng = StdRng::seed_from_u64(seed);
            for _ in 0..random.count {
                coefficients.push(random_coefficient(system, random.scale, &mut rng));
            }
        }
        if coefficients.is_empty() {
            return Err(CliError::Input("scenario defines no coefficients".into()));
        }
        GeneratorSpec::new(system, coefficients).context("coefficients")
    }

    pub fn time_points(&self) -> Result<Vec<f64>, CliError> {
        self.time_grid()?.points()
    }

    pub fn time_grid(&self) -> Result<&TimeGrid, CliError> {
        self.times.as_ref().ok_or_else(|| CliError::Input("scenario needs a `times` section".into()))
    }

    pub fn orders(&self) -> Result<Vec<usize>, CliError> {
        if self.moment_orders.is_empty() {
            return Err(CliError::Input("moment_orders must not be empty".into()));
        }
        if self.moment_orders.contains(&0) {
            return Err(CliError::Input("moment orders start at 1".into()));
        }
        Ok(self.moment_orders.clone())
    }

    pub fn initial(&self) -> Result<&InitialConfig, CliError> {
        self.initial.as_ref().ok_or_else(|| CliError::Input("scenario needs an `initial` section".into()))
    }

    /// The oracle's initial state; random states fall back to `seed + 1`.
    pub fn init_spec(&self, seed: u64) -> Result<InitSpec, CliError> {
        let system = self.mode_system()?;
        Ok(match &self.initial()?.state {
            StateConfig::Vacuum => InitSpec::Vacuum,
            StateConfig::Fock { occupations } => InitSpec::Fock(occupations.clone()),
            StateConfig::Coherent { alpha } => InitSpec::Coherent(alpha.iter().map(|z| z.0).collect()),
            StateConfig::Thermal { lambda } => InitSpec::Thermal(lambda.clone()),
            StateConfig::Gaussian { m } => {
                let m = matrix(m, system.dim(), "initial.state.m")?;
                InitSpec::Gaussian(GaussianStateSpec::new(m, system).context("initial.state.m")?)
            }
            StateConfig::Random { seed: own, support } => InitSpec::Random {
                seed: own.unwrap_or_else(|| seed.wrapping_add(1)),
                support: *support,
            },
        })
    }

    /// Caller-supplied initial moments of one order, if present.
    pub fn explicit_moments(&self, order: usize) -> Result<Option<MomentTensor>, CliError> {
        let system = self.mode_system()?;
        let Some(values) = self.initial.as_ref().and_then(|init| init.moments.get(&order)) else {
            return Ok(None);
        };
        let where_ = format!("initial.moments.{order}");
        let values = ComplexVector::new(values.iter().map(|z| z.0).collect()).context(&where_)?;
        MomentTensor::new(system, order, values).context(&where_).map(Some)
    }

    pub fn representation(&self) -> Result<FockRep, CliError> {
        let system = self.mode_system()?;
        let cutoff = match system.statistics() {
            Statistics::Fermion => 0,
            Statistics::Boson => self
                .oracle
                .cutoff
                .ok_or_else(|| CliError::Input("oracle.cutoff is required for bosonic oracle runs".into()))?,
        };
        build_rep_capped(system, cutoff, self.oracle.dim_cap).context("oracle")
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            method: match self.oracle.method {
                MethodConfig::Auto => EvolveMethod::Auto,
                MethodConfig::SuperopExpm => EvolveMethod::SuperopExpm,
                MethodConfig::Rk4 => EvolveMethod::Rk4,
            },
            superop_dim_cap: self.oracle.superop_dim_cap,
            edge_tolerance: self.oracle.edge_tolerance,
            ..EvolveOptions::default()
        }
    }

    /// The Gaussian state under test, normalized as configured.
    pub fn gaussian_state(&self, spec: &GeneratorSpec) -> Result<GaussianStateSpec, CliError> {
        let config = self
            .gaussian
            .as_ref()
            .ok_or_else(|| CliError::Input("scenario needs a `gaussian` section".into()))?;
        let system = spec.system();
        let m = matrix(&config.m, system.dim(), "gaussian.m")?;
        match (config.normalization, system.statistics()) {
            (NormalizationConfig::Coefficient, Statistics::Fermion) => {
                let k = spec.coefficients()[0].matrix().clone();
                let s = normalization_with(&m, system, &FermionNormalization::Coefficient(k)).context("gaussian")?;
                GaussianStateSpec::with_log_normalization(m, s, system).context("gaussian.m")
            }
            _ => GaussianStateSpec::new(m, system).context("gaussian.m"),
        }
    }
}

fn matrix(raw: &Matrix, dim: usize, where_: &str) -> Result<ComplexMatrix, CliError> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, Vec::len);
    if rows != dim || raw.iter().any(|r| r.len() != dim) {
        return Err(CliError::Input(format!(
            "{where_} must be {dim}x{dim}, got {rows} row(s) with {cols} column(s) in the first"
        )));
    }
    let rows: Vec<Vec<C64>> = raw.iter().map(|r| r.iter().map(|z| z.0).collect()).collect();
    ComplexMatrix::from_rows(&rows).context(where_)
}
