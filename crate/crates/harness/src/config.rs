//! Experiment configuration: a flat TOML file with one table per concern.
//!
//! ```toml
//! [domain]
//! shape = "disk"          # or "polygon" with `vertices = [x0, y0, x1, y1, ...]`
//! d = 1
//! fourier = [0.1, 0.0]    # optional phase perturbation a1, b1, a2, b2, ...
//!
//! [model]
//! m = 2
//! eps = [0.2, 0.1, 0.05]
//! eta = []                # diffuse runs only; defaults to 4 eps
//!
//! [grid]
//! h_over_eps = 0.25
//!
//! [run]
//! kind = "sharp"          # or "diffuse"
//! init = "competitor"     # or "smooth", "random"
//! radius = 0.5
//! seeds = [0]
//! max_sweeps = 4000
//! output = "sharp-m2"
//! deterministic = true
//! large_steiner = false
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use fracvort_core::domain::{BoundaryMode, DomainSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub shape: String,
    #[serde(default)]
    pub vertices: Vec<f64>,
    pub d: u32,
    #[serde(default)]
    pub fourier: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub m: u32,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h_over_eps: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Sharp,
    Diffuse,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Competitor,
    Smooth,
    Random,
}

fn default_radius() -> f64 {
    0.5
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_sweeps() -> usize {
    4000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub kind: RunKind,
    pub init: InitKind,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    pub output: String,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub large_steiner: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok((Self::from_toml(&text)?, text))
    }

    /// Checks every field against the preconditions of the solvers it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.domain.shape.as_str() {
            "disk" => {
                if !self.domain.vertices.is_empty() {
                    return Err(invalid("domain.vertices", "only allowed with shape = \"polygon\""));
                }
            }
            "polygon" => {
                if self.domain.vertices.len() < 6 || !self.domain.vertices.len().is_multiple_of(2) {
                    return Err(invalid("domain.vertices", "need at least three x, y pairs"));
                }
            }
            other => return Err(invalid("domain.shape", format!("unknown shape {other:?}"))),
        }
        if !self.domain.fourier.len().is_multiple_of(2) {
            return Err(invalid("domain.fourier", "coefficients come in (a_k, b_k) pairs"));
        }
        if self.model.m < 2 {
            return Err(invalid("model.m", "must be at least 2"));
        }
        if self.model.eps.is_empty() || self.model.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(invalid("model.eps", "need a non-empty list of values in (0, 1)"));
        }
        let h = self.grid.h_over_eps;
        if !(h > 0.0 && h <= 0.5) {
            return Err(invalid("grid.h_over_eps", "must lie in (0, 1/2] so that eps >= 2h"));
        }
        if !self.model.eta.is_empty() {
            if self.model.eta.len() != self.model.eps.len() {
                return Err(invalid("model.eta", "must be empty or match model.eps in length"));
            }
            for (&eta, &eps) in self.model.eta.iter().zip(&self.model.eps) {
                if eta < 4.0 * h * eps {
                    return Err(invalid("model.eta", format!("eta = {eta} is below 4h = {}", 4.0 * h * eps)));
                }
            }
        }
        if self.run.init == InitKind::Competitor {
            if self.domain.d == 0 {
                return Err(invalid("run.init", "competitor start needs domain.d >= 1"));
            }
            if !(self.run.radius > 0.0 && self.run.radius < 0.9) {
                return Err(invalid("run.radius", "must lie in (0, 0.9)"));
            }
            if self.domain.shape != "disk" {
                return Err(invalid("run.init", "competitor start is only set up on the disk"));
            }
        }
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds", "need at least one seed"));
        }
        if self.run.max_sweeps == 0 {
            return Err(invalid("run.max_sweeps", "must be positive"));
        }
        if self.run.output.trim().is_empty() {
            return Err(invalid("run.output", "must name a directory"));
        }
        Ok(())
    }

    pub fn h(&self, eps: f64) -> f64 {
        self.grid.h_over_eps * eps
    }

    pub fn eta(&self, index: usize) -> f64 {
        self.model.eta.get(index).copied().unwrap_or(4.0 * self.model.eps[index])
    }

    pub fn domain_spec(&self, h: f64) -> DomainSpec {
        let mut spec = match self.domain.shape.as_str() {
            "polygon" => DomainSpec::polygon(
                self.domain.vertices.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
                h,
                self.domain.d,
            ),
            _ => DomainSpec::disk(h, self.domain.d),
        };
        if !self.domain.fourier.is_empty() {
            spec.mode = BoundaryMode::Fourier(self.domain.fourier.chunks(2).map(|c| (c[0], c[1])).collect());
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[domain]
shape = "disk"
d = 1

[model]
m = 2
eps = [0.2, 0.1]

[grid]
h_over_eps = 0.25

[run]
kind = "sharp"
init = "competitor"
output = "out"
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(GOOD).unwrap();
        assert_eq!(cfg.run.seeds, vec![0]);
        assert!(cfg.run.deterministic);
        assert_eq!(cfg.eta(1), 0.4);
        assert_eq!(cfg.h(0.2), 0.05);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = GOOD.replace("h_over_eps = 0.25", "h_over_eps = 0.75");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("grid.h_over_eps"), "{err}");
        let bad = GOOD.replace("m = 2", "m = 1");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("model.m"));
        let bad = GOOD.replace("eps = [0.2, 0.1]", "eps = [0.2, 0.1]\neta = [0.1]");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("model.eta"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = GOOD.replace("d = 1", "d = 1\nradius = 3");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(ConfigError::Parse(_))));
    }
}
