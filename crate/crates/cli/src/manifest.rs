use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lctrace::lc_trace::SolverConfig;
use lctrace::second_order::SecondOrderConfig;
use lctrace::trace::Algorithm;
use lctrace::{Error, Result};

pub const DEFAULT_EPS_H: f64 = 1e-2;

/// Optional replacements for the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, rename = "Delta0", skip_serializing_if = "Option::is_none")]
    pub big_delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_tilde: Option<f64>,
}

/// Everything needed to reproduce one run from its instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Relative paths resolve against the manifest's directory.
    pub instance: PathBuf,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub overrides: ConfigOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// Seed of the generator that produced the instance; the solver is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl RunManifest {
    pub fn new(instance: PathBuf, algorithm: Algorithm) -> Self {
        Self {
            instance,
            algorithm,
            overrides: ConfigOverrides::default(),
            trace: None,
            summary: None,
            seed: 0,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            field: format!("manifest {}", path.display()),
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            m.rebase(dir);
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.instance);
        if let Some(p) = self.trace.as_mut() {
            fix(p);
        }
        if let Some(p) = self.summary.as_mut() {
            fix(p);
        }
    }

    pub fn first_order_config(&self) -> SolverConfig {
        let o = &self.overrides;
        let mut cfg = SolverConfig::default();
        if let Some(v) = o.eps_g {
            cfg.epsilon = v;
        }
        if let Some(v) = o.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = o.rho {
            cfg.rho = v;
        }
        if let Some(v) = o.delta0 {
            cfg.delta0 = v;
        }
        if let Some(v) = o.big_delta0 {
            cfg.big_delta0 = v;
        }
        if let Some(v) = o.sigma0 {
            cfg.sigma0_user = v;
        }
        cfg
    }

    pub fn second_order_config(&self) -> SecondOrderConfig {
        let inner = self.first_order_config();
        let mut cfg =
            SecondOrderConfig::new(inner.epsilon, self.overrides.eps_h.unwrap_or(DEFAULT_EPS_H)).with_inner(inner);
        cfg.h_tilde = self.overrides.h_tilde;
        cfg
    }
}
