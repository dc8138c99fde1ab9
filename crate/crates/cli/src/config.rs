//! Run configuration, read from JSON. Every field has a default, so `{}` is a
//! valid config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cconcave::counterexample::CounterexampleConfig;
use cconcave::field::{FieldSpec, ScalarField};
use cconcave::manifold::ManifoldSpec;
use serde::{Deserialize, Serialize};

/// Divisor applied to grid sizes under `--quick`.
pub const QUICK_FACTOR: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub quick: bool,
    pub manifold: ManifoldSpec,
    pub field: FieldSpec,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub certify: CertifyConfig,
    pub compare: CompareConfig,
    pub cconcavity: CConcavityConfig,
    pub counterexample: CounterexampleConfig,
    pub transport: TransportConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            quick: false,
            manifold: ManifoldSpec::unit_sphere(),
            field: FieldSpec::Constant { value: 0.0 },
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            certify: CertifyConfig::default(),
            compare: CompareConfig::default(),
            cconcavity: CConcavityConfig::default(),
            counterexample: CounterexampleConfig::default(),
            transport: TransportConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Points of the certification and comparison grids.
    pub samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { samples: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub value: f64,
    pub closed_form: f64,
    pub transport: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { value: 1e-7, closed_form: 1e-8, transport: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyMode {
    Technical,
    Main,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub mode: CertifyMode,
    pub epsilon: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { mode: CertifyMode::Technical, epsilon: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Step of the finite-difference Hessians in the sphere identity check.
    pub fd_step: f64,
    pub t_samples: usize,
    /// Convexity ball radius as a fraction of the guaranteed convexity radius.
    pub convexity_fraction: f64,
    pub convexity_pairs: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { fd_step: 1e-3, t_samples: 1000, convexity_fraction: 0.9, convexity_pairs: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CConcavityConfig {
    pub x_samples: usize,
    pub y_samples: usize,
}

impl Default for CConcavityConfig {
    fn default() -> Self {
        Self { x_samples: 4096, y_samples: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub n: usize,
    pub trials: usize,
    /// Run even if the field is not certified.
    pub skip_certification: bool,
    /// Source points as CSV; random points when absent.
    pub cloud: Option<PathBuf>,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { n: 64, trials: 1000, skip_certification: false, cloud: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Scales the configured field.
    Lambda,
    /// Mixing coefficient of the counterexample.
    EpsMix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Grid size per sweep point.
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Lambda,
            values: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            samples: 1024,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Scales every grid down by [`QUICK_FACTOR`].
    pub fn quickened(&self) -> Self {
        let shrink = |n: usize| (n / QUICK_FACTOR).max(64);
        let mut c = self.clone();
        c.quick = true;
        c.grid.samples = shrink(c.grid.samples);
        c.compare.t_samples = shrink(c.compare.t_samples);
        c.compare.convexity_pairs = shrink(c.compare.convexity_pairs);
        c.cconcavity.x_samples = shrink(c.cconcavity.x_samples);
        c.cconcavity.y_samples = shrink(c.cconcavity.y_samples);
        c.counterexample = c.counterexample.shrunk(QUICK_FACTOR);
        c.transport.trials = shrink(c.transport.trials);
        c.sweep.samples = shrink(c.sweep.samples);
        c
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.manifold.validate()?;
        self.scalar_field()?;
        self.counterexample.validate()?;
        if self.grid.samples == 0 || self.cconcavity.x_samples == 0 || self.cconcavity.y_samples == 0 {
            bail!("grid sizes must be positive");
        }
        if !(self.certify.epsilon > 0.0 && self.certify.epsilon < 1.0) {
            bail!("certify.epsilon must lie in (0, 1), got {}", self.certify.epsilon);
        }
        if !(self.compare.fd_step > 0.0) || !(0.0 < self.compare.convexity_fraction && self.compare.convexity_fraction <= 1.0) {
            bail!("need compare.fd_step > 0 and compare.convexity_fraction in (0, 1]");
        }
        for (name, tol) in [
            ("value", self.tolerances.value),
            ("closed_form", self.tolerances.closed_form),
            ("transport", self.tolerances.transport),
        ] {
            if !(tol >= 0.0) {
                bail!("tolerances.{name} must be non-negative, got {tol}");
            }
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            bail!("sweep.values must be finite");
        }
        Ok(())
    }

    pub fn scalar_field(&self) -> anyhow::Result<ScalarField> {
        Ok(ScalarField::new(self.manifold.clone(), self.field.clone())?)
    }
}
