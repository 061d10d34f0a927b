//! Versioned TOML run configuration and its content hash.

use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blowup::{FieldSpec, LambdaWindow, ModelBoundaryField};
use crate::corrector::GridSpec;
use crate::energy::LambdaPower;
use crate::error::{Error, Result};
use crate::exponents::parse_rational;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the boundary field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Builtin { name: String, points_per_side: usize },
    /// CSV with a `norm` column in row-major grid order.
    Table { path: PathBuf, period: f64, points_per_side: usize },
    Inline { period: f64, points_per_side: usize, spec: FieldSpec },
}

impl FieldConfig {
    pub fn build(&self, n: usize) -> Result<ModelBoundaryField> {
        match self {
            Self::Builtin { name, points_per_side } => ModelBoundaryField::builtin(name, n, *points_per_side),
            Self::Table { path, period, points_per_side } => ModelBoundaryField::from_table(n, *period, *points_per_side, path),
            Self::Inline { period, points_per_side, spec } => ModelBoundaryField::new(n, *period, *points_per_side, spec.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Integrals,
    Corrector,
    Energy,
    Blowup,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Integrals, Stage::Corrector, Stage::Energy, Stage::Blowup];
}

fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub n: usize,
    /// Supercriticality values of the blow-up family, as exact rationals.
    pub eps: Vec<String>,
    /// Values used by the boundary-term expansion fit.
    pub expansion_eps: Vec<String>,
    pub residual_deltas: Vec<f64>,
    pub grid: GridSpec,
    pub cutoff_radius: f64,
    pub field: FieldConfig,
    pub lambda_window: [f64; 2],
    pub p: u32,
    pub seeds: Vec<u64>,
    /// Samples for the Monte Carlo energy; the estimate is skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    /// Not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reference configuration for dimension `n`.
    pub fn default_for(n: usize) -> Self {
        let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            n,
            eps: strs(&["1/100", "1/1000", "1/10000", "1/100000"]),
            expansion_eps: strs(&["1/400", "1/1000", "1/2000", "1/4000", "1/10000", "1/20000", "1/40000", "1/100000"]),
            residual_deltas: vec![0.02, 0.01, 0.005, 0.0025],
            grid: GridSpec::default(),
            cutoff_radius: 1.0,
            field: FieldConfig::Builtin { name: "two_bump".into(), points_per_side: 4 },
            lambda_window: [0.05, 20.0],
            p: 2,
            seeds: vec![20240601],
            mc_samples: None,
            stages: default_stages(),
            output_dir: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn parse_list(list: &[String], what: &str) -> Result<Vec<BigRational>> {
        list.iter()
            .map(|s| parse_rational(s).map_err(|e| Error::Config(format!("{what}: {e}"))))
            .collect()
    }

    pub fn eps_rational(&self) -> Result<Vec<BigRational>> {
        Self::parse_list(&self.eps, "eps")
    }

    pub fn eps_f64(&self) -> Result<Vec<f64>> {
        Ok(self.eps_rational()?.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn expansion_eps_f64(&self) -> Result<Vec<f64>> {
        Ok(Self::parse_list(&self.expansion_eps, "expansion_eps")?
            .iter()
            .map(|r| r.to_f64().unwrap_or(f64::NAN))
            .collect())
    }

    pub fn power(&self) -> Result<LambdaPower> {
        LambdaPower::from_int(self.p).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn window(&self) -> Result<LambdaWindow> {
        LambdaWindow::new(self.lambda_window[0], self.lambda_window[1]).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.n < 7 {
            return bad(format!("n = {} must be >= 7", self.n));
        }
        self.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.cutoff_radius > 0.0 && self.cutoff_radius <= 1.0) {
            return bad(format!("cutoff_radius = {} must lie in (0, 1]", self.cutoff_radius));
        }
        for (name, list) in [("eps", self.eps_f64()?), ("expansion_eps", self.expansion_eps_f64()?)] {
            if list.is_empty() || list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return bad(format!("{name} values must lie in (0, 1) and the list must be non-empty"));
            }
        }
        if self.residual_deltas.len() < 3 || self.residual_deltas.windows(2).any(|w| w[1] >= w[0]) {
            return bad("residual_deltas needs at least three strictly decreasing values".into());
        }
        if self.residual_deltas.iter().any(|d| !(*d > 0.0) || *d > self.cutoff_radius / 10.0) {
            return bad("residual_deltas must lie in (0, R/10]".into());
        }
        self.window()?;
        self.power()?;
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.mc_samples.is_some_and(|s| s < 2) {
            return bad("mc_samples must be at least 2".into());
        }
        if self.stages.is_empty() {
            return bad("no stages selected".into());
        }
        let (FieldConfig::Builtin { points_per_side, .. }
        | FieldConfig::Table { points_per_side, .. }
        | FieldConfig::Inline { points_per_side, .. }) = &self.field;
        if *points_per_side < 2 {
            return bad("field needs at least 2 points per side".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (sorted keys), output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_string(&serde_json::to_value(&c).expect("config serializes")).expect("value serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut c = RunConfig::default_for(7);
        c.grid.dr = 0.1 + 0.2;
        c.residual_deltas = vec![1.0 / 30.0, 0.01, 1e-3];
        c.mc_samples = Some(1000);
        let s = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.grid.dr.to_bits(), c.grid.dr.to_bits());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let c = RunConfig::default_for(7);
        let mut d = c.clone();
        d.output_dir = Some("/tmp/x".into());
        assert_eq!(c.hash(), d.hash());
        d.grid.dr = 0.03;
        assert_ne!(c.hash(), d.hash());
        let mut e = c.clone();
        e.seeds = vec![1];
        assert_ne!(c.hash(), e.hash());
    }

    #[test]
    fn rejects_malformed() {
        let mut c = RunConfig::default_for(7);
        c.grid.dr = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default_for(7);
        c.eps.push("2".into());
        assert!(c.validate().is_err());
        let mut c = RunConfig::default_for(7);
        c.schema_version = 99;
        assert!(c.validate().is_err());
        assert!(RunConfig::from_toml_str("n = 7").is_err());
        let mut c = RunConfig::default_for(7);
        c.p = 3;
        assert!(c.validate().is_err());
    }
}
