//! Flat TOML run configuration. Every key mirrors a command-line flag; values
//! given on the command line take precedence.
//!
//! ```toml
//! tau = 1.0
//! c1 = 90.0
//! c2 = 90.0
//! c3 = 0.25
//! size_thresh = 16
//! merge_thresh = 45.0
//! seed = 7
//! dump_intermediates = false
//! timings = false
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub tau: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub size_thresh: Option<usize>,
    pub merge_thresh: Option<f64>,
    pub seed: Option<u64>,
    pub dump_intermediates: Option<bool>,
    pub timings: Option<bool>,
}

impl RunSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overridden_by(&self, over: &RunSettings) -> RunSettings {
        RunSettings {
            tau: over.tau.or(self.tau),
            c1: over.c1.or(self.c1),
            c2: over.c2.or(self.c2),
            c3: over.c3.or(self.c3),
            size_thresh: over.size_thresh.or(self.size_thresh),
            merge_thresh: over.merge_thresh.or(self.merge_thresh),
            seed: over.seed.or(self.seed),
            dump_intermediates: over.dump_intermediates.or(self.dump_intermediates),
            timings: over.timings.or(self.timings),
        }
    }

    /// Pipeline configuration with unset keys at their defaults; validated.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let p = &mut cfg.params;
        p.tau = self.tau.unwrap_or(p.tau);
        p.c1 = self.c1.unwrap_or(p.c1);
        p.c2 = self.c2.unwrap_or(p.c2);
        p.c3 = self.c3.unwrap_or(p.c3);
        cfg.size_thresh = self.size_thresh.or(cfg.size_thresh);
        cfg.merge_thresh = self.merge_thresh.unwrap_or(cfg.merge_thresh);
        cfg.validate()?;
        Ok(cfg)
    }
}
