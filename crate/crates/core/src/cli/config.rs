//! TOML run configuration.
//!
//! ```toml
//! seed = 7                      # optional; overrides every section seed
//! method = "coil-sketching"
//! out = "out"
//!
//! [testbed]                     # phantom, coils, sampling, noise
//! shape = [64, 64]
//! coils = 8
//! sampling = "radial"           # or "cartesian"
//! spokes = 24
//!
//! [params]                      # regularizer, solver and sketch settings
//! reg = "l1-wavelet"            # "l2", "l1-wavelet", "l1-tv"
//! lambda = 0.002
//! c_hat = 4
//!
//! [ablate]
//! v_values = [0, 1, 2, 3, 4]
//! seeds = 50
//!
//! [gfactor]
//! trials = 60
//!
//! [bench]
//! reference_iters = 1500
//! ```
//!
//! Every key is optional and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AblationSweep, Method, MethodParams, TestbedSpec};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "SKETCHRECON_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GFactorSettings {
    pub trials: usize,
    /// Seed of the noise replicas.
    pub seed: u64,
}

impl Default for GFactorSettings {
    fn default() -> Self {
        Self { trials: 60, seed: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    /// Baseline iterations of the converged reference.
    pub reference_iters: usize,
    pub methods: Vec<Method>,
    /// Coil-transform budgets of the difference images; derived from the baseline
    /// run when empty.
    pub checkpoints: Vec<u64>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            reference_iters: 1500,
            methods: Method::ALL.to_vec(),
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub method: Method,
    pub out: PathBuf,
    pub testbed: TestbedSpec,
    pub params: MethodParams,
    pub ablate: AblationSweep,
    pub gfactor: GFactorSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            method: Method::CoilSketching,
            out: PathBuf::from("out"),
            testbed: TestbedSpec::default(),
            params: MethodParams::default(),
            ablate: AblationSweep::default(),
            gfactor: GFactorSettings::default(),
            bench: BenchSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.testbed.validate()?;
        self.params.validate()?;
        if self.gfactor.trials < 2 {
            return Err(Error::Config("gfactor.trials must be at least 2".into()));
        }
        if self.bench.reference_iters == 0 || self.bench.methods.is_empty() {
            return Err(Error::Config("bench needs reference iterations and at least one method".into()));
        }
        if self.ablate.v_values.iter().any(|&v| v > self.params.c_hat) {
            return Err(Error::Config("ablate.v_values must not exceed params.c_hat".into()));
        }
        Ok(())
    }

    /// Sets the seed and propagates it to every section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.propagate_seed();
    }

    fn propagate_seed(&mut self) {
        if let Some(s) = self.seed {
            self.testbed.seed = s;
            self.params.sketch_seed = s;
            self.params.sgd_seed = s;
            self.ablate.first_seed = s;
            self.gfactor.seed = s.wrapping_add(1000);
        }
    }

    /// Resolves the effective seed: `flag`, then `SKETCHRECON_SEED`, then the file.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<()> {
        let env_seed = match env {
            Some(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            ),
            None => None,
        };
        if let Some(s) = flag.or(env_seed).or(self.seed) {
            self.apply_seed(s);
        }
        Ok(())
    }
}
