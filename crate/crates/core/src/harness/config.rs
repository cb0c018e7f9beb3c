use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::suites::SUITES;
use crate::error::{Error, Result};
use crate::qsve::QsveMode;
use crate::recsys::TruncationPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TsvdVerify,
    QsveVerify,
    Recsys,
    Completion,
    /// One of the named verification suites, given by `suite`.
    Suite,
}

/// Flat TOML experiment description. `seed` is mandatory; every other field
/// falls back to the default of the chosen experiment.
///
/// ```toml
/// kind = "recsys"
/// seed = 7
/// dims = [4, 4, 4]
/// bits = 10
/// trials = 25
/// output_json = "out/recsys.json"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Slice thresholds, e.g. `policy = { per-slice-best-rank = { k = 2 } }`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<TruncationPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Estimate register width `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<QsveMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config running the named suite with defaults.
    pub fn suite(name: &str, seed: u64) -> Self {
        Self {
            kind: ExperimentKind::Suite,
            seed,
            suite: Some(name.to_string()),
            dims: None,
            k: None,
            p: None,
            policy: None,
            gamma: None,
            zeta: None,
            delta: None,
            bits: None,
            mode: None,
            shots: None,
            trials: None,
            samples: None,
            output_json: None,
            output_csv: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Domain checks on every field that is set.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (&self.kind, &self.suite) {
            (ExperimentKind::Suite, None) => return bad("kind = \"suite\" needs `suite`".into()),
            (ExperimentKind::Suite, Some(s)) if !SUITES.contains(&s.as_str()) => {
                return bad(format!("unknown suite `{s}`; known: {}", SUITES.join(", ")))
            }
            (ExperimentKind::Suite, _) => {}
            (_, Some(_)) => return bad("`suite` is only valid with kind = \"suite\"".into()),
            _ => {}
        }
        if let Some(d) = &self.dims {
            if d.len() != 3 || d.contains(&0) {
                return bad(format!("dims must be three positive sizes, got {d:?}"));
            }
        }
        if self.k == Some(0) {
            return bad("k must be at least 1".into());
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("p must be in (0, 1], got {p}"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("zeta", self.zeta)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("{name} must be in [0, 1], got {v}"));
                }
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("delta must be in (0, 1], got {d}"));
            }
        }
        if let Some(b) = self.bits {
            if !(2..=crate::qsim::MAX_PHASE_BITS).contains(&b) {
                return bad(format!(
                    "bits must be in 2..={}, got {b}",
                    crate::qsim::MAX_PHASE_BITS
                ));
            }
        }
        for (name, v) in [("trials", self.trials), ("samples", self.samples)] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            "kind = \"recsys\"\nseed = 3\ndims = [4, 4, 4]\nbits = 10\nmode = \"oracle\"\n\
             policy = { per-slice-best-rank = { k = 2 } }\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Recsys);
        assert_eq!(cfg.mode, Some(QsveMode::Oracle));
        assert_eq!(cfg.policy, Some(TruncationPolicy::PerSliceBestRank { k: 2 }));
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "kind = \"recsys\"\n",
            "kind = \"recsys\"\nseed = 1\ncolour = 3\n",
            "kind = \"suite\"\nseed = 1\n",
            "kind = \"suite\"\nseed = 1\nsuite = \"nope\"\n",
            "kind = \"recsys\"\nseed = 1\np = 0.0\n",
            "kind = \"recsys\"\nseed = 1\ndims = [4, 4]\n",
            "kind = \"tsvd-verify\"\nseed = 1\nbits = 40\n",
            "seed = = 1",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
