use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{DomainBox, Feature};
use crate::fusion_optimizer::DEFAULT_ANCHOR_COUNT;
use crate::regression::DEFAULT_RIDGE;

/// Coefficients of the random cubic are drawn uniformly from this interval.
pub const RANDOM_CUBIC_RANGE: (f64, f64) = (-2.0, 2.0);

/// The function that generates the synthetic outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrueFunction {
    /// `c0 + c1 x + c2 x² + c3 x³` with seeded uniform coefficients.
    RandomCubic {
        seed: u64,
    },
    Expansion {
        terms: Vec<Term>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub feature: Feature,
    pub coeff: f64,
}

/// A true function resolved to explicit terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expansion {
    pub terms: Vec<Term>,
}

impl Expansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coeff * t.feature.eval(x)).sum()
    }
}

impl TrueFunction {
    pub fn resolve(&self) -> Expansion {
        match self {
            TrueFunction::RandomCubic { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let (lo, hi) = RANDOM_CUBIC_RANGE;
                Expansion {
                    terms: (0..4)
                        .map(|k| Term {
                            feature: Feature::monomial(k),
                            coeff: rng.random_range(lo..=hi),
                        })
                        .collect(),
                }
            }
            TrueFunction::Expansion { terms } => Expansion { terms: terms.clone() },
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            TrueFunction::RandomCubic { seed } => Some(*seed),
            TrueFunction::Expansion { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub features: Vec<Feature>,
    /// Union of closed intervals the agent observes.
    pub input_regions: Vec<(f64, f64)>,
    pub sample_count: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    #[serde(default = "default_anchor_count")]
    pub n_b: usize,
    #[serde(default = "default_range")]
    pub anchor_range: (f64, f64),
    pub seed: u64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_range")]
    pub grid_range: (f64, f64),
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            grid_range: default_range(),
            grid_points: default_grid_points(),
        }
    }
}

/// Everything needed to reproduce one two-agent experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub true_function: TrueFunction,
    pub agents: [AgentConfig; 2],
    pub fusion: FusionConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Ridge weight of the pooled-data baseline.
    #[serde(default = "default_ridge")]
    pub centralized_ridge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

fn default_anchor_count() -> usize {
    DEFAULT_ANCHOR_COUNT
}

fn default_range() -> (f64, f64) {
    (-10.0, 10.0)
}

fn default_grid_points() -> usize {
    401
}

fn check_interval(what: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Config(format!("{what}: bounds must be finite")));
    }
    if lo > hi {
        return Err(Error::Config(format!("{what}: empty interval [{lo}, {hi}]")));
    }
    Ok(())
}

fn check_ridge(what: &str, ridge: f64) -> Result<()> {
    if ridge.is_finite() && ridge > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what}: ridge must be positive and finite, got {ridge}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let TrueFunction::Expansion { terms } = &self.true_function {
            if terms.is_empty() {
                return Err(Error::Config("true function has no terms".into()));
            }
            for t in terms {
                if t.feature.input_dim() != 1 || !t.coeff.is_finite() {
                    return Err(Error::Config(format!("bad true-function term {}", t.feature)));
                }
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            let who = format!("agent {}", i + 1);
            if a.features.is_empty() {
                return Err(Error::Config(format!("{who}: no features")));
            }
            if let Some(f) = a.features.iter().find(|f| f.input_dim() != 1) {
                return Err(Error::Config(format!("{who}: feature {f} is not one-dimensional")));
            }
            if a.input_regions.is_empty() {
                return Err(Error::Config(format!("{who}: no input regions")));
            }
            for &r in &a.input_regions {
                check_interval(&format!("{who} region"), r)?;
            }
            if a.sample_count == 0 {
                return Err(Error::Config(format!("{who}: sample_count must be at least 1")));
            }
            if !(a.noise_std.is_finite() && a.noise_std >= 0.0) {
                return Err(Error::Config(format!(
                    "{who}: noise_std must be finite and nonnegative"
                )));
            }
            check_ridge(&who, a.ridge)?;
        }
        if self.fusion.n_b == 0 {
            return Err(Error::Config("fusion: n_b must be at least 1".into()));
        }
        check_interval("fusion anchor_range", self.fusion.anchor_range)?;
        check_ridge("fusion", self.fusion.ridge)?;
        check_ridge("centralized", self.centralized_ridge)?;
        check_interval("evaluation grid_range", self.evaluation.grid_range)?;
        if self.evaluation.grid_points < 2 {
            return Err(Error::Config("evaluation: grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Smallest interval holding the evaluation grid, every input region and
    /// the anchor range. Both agents' feature sets live on this box.
    pub fn domain(&self) -> Result<DomainBox> {
        let mut lo = self.evaluation.grid_range.0.min(self.fusion.anchor_range.0);
        let mut hi = self.evaluation.grid_range.1.max(self.fusion.anchor_range.1);
        for &(a, b) in self.agents.iter().flat_map(|a| &a.input_regions) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        DomainBox::interval(lo, hi)
    }

    /// The evaluation grid, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.evaluation.grid_range;
        linspace(lo, hi, self.evaluation.grid_points)
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive; the midpoint when
/// `n = 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "true_function": {"kind": "random_cubic", "seed": 5},
        "agents": [
            {"features": [{"kind": "monomial", "param": 0}], "input_regions": [[-1, 1]], "sample_count": 3},
            {"features": [{"kind": "monomial", "param": 1}], "input_regions": [[-1, 1]], "sample_count": 3}
        ],
        "fusion": {"seed": 1}
    }"#;

    #[test]
    fn defaults_are_filled_in() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.fusion.n_b, 40);
        assert_eq!(cfg.fusion.ridge, 1e-6);
        assert_eq!(cfg.evaluation.grid_points, 401);
        assert_eq!(cfg.agents[0].noise_std, 0.0);
        assert_eq!(cfg.domain().unwrap().bounds(), &[(-10.0, 10.0)]);
    }

    #[test]
    fn random_cubic_is_seeded_and_bounded() {
        let t = TrueFunction::RandomCubic { seed: 9 };
        let a = t.resolve();
        assert_eq!(a, t.resolve());
        assert_eq!(a.terms.len(), 4);
        assert!(a.terms.iter().all(|t| (-2.0..=2.0).contains(&t.coeff)));
        assert_ne!(a, TrueFunction::RandomCubic { seed: 10 }.resolve());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let broken = |path: &[&str], v: serde_json::Value| {
            let mut c = base.clone();
            let mut node = &mut c;
            for p in &path[..path.len() - 1] {
                node = match p.parse::<usize>() {
                    Ok(i) => &mut node[i],
                    Err(_) => &mut node[*p],
                };
            }
            node[path[path.len() - 1]] = v;
            ExperimentConfig::from_json(&c.to_string())
        };
        assert!(broken(&["agents", "0", "sample_count"], 0.into()).is_err());
        assert!(broken(&["agents", "1", "input_regions"], serde_json::json!([])).is_err());
        assert!(broken(&["agents", "1", "input_regions"], serde_json::json!([[2, 1]])).is_err());
        assert!(broken(&["agents", "0", "noise_std"], (-1.0).into()).is_err());
        assert!(broken(&["fusion", "ridge"], 0.0.into()).is_err());
        assert!(broken(&["evaluation"], serde_json::json!({"grid_points": 1})).is_err());
        assert!(broken(&["surprise"], 1.into()).is_err());
    }

    #[test]
    fn linspace_includes_endpoints() {
        let xs = linspace(-5.0, 5.0, 20);
        assert_eq!(xs.len(), 20);
        assert_eq!((xs[0], xs[19]), (-5.0, 5.0));
        assert_eq!(linspace(2.0, 4.0, 1), vec![3.0]);
    }
}
