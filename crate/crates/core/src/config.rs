//! Model and protocol parameters.
//!
//! A [`ModelConfig`] is read from JSON using the short parameter names of the
//! model (`theta`, `sigma_x`, `M`, `p_C`, ...). Every field is optional in the
//! document and falls back to the desk-scale defaults of
//! [`ModelConfig::default`]; unknown keys are rejected.

use std::fmt;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which point the non-flat highlighting propensity is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HighlightCenter {
    /// The agent's benchmark.
    Benchmark,
    /// The true state.
    Truth,
}

/// How the probability of being an active (highlighting) type is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum HighlightMode<F> {
    /// Constant probability, independent of the agent's signal.
    Flat {
        #[serde(rename = "p_A_const")]
        p_a_const: F,
    },
    /// `1 - exp(-(1/2a) ((x - c)/sigma_x)^(2a))`.
    NonFlat { alpha: F, center: HighlightCenter },
}

impl<F: Scalar> HighlightMode<F> {
    pub fn flat_default() -> Self {
        HighlightMode::Flat { p_a_const: F::of(0.5) }
    }

    pub fn non_flat_default() -> Self {
        HighlightMode::NonFlat { alpha: F::of(4.0), center: HighlightCenter::Benchmark }
    }

    pub fn kind(&self) -> ModeKind {
        match self {
            HighlightMode::Flat { .. } => ModeKind::Flat,
            HighlightMode::NonFlat { .. } => ModeKind::NonFlat,
        }
    }
}

/// Label of a highlight mode without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeKind {
    Flat,
    NonFlat,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Flat => "Flat",
            ModeKind::NonFlat => "NonFlat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum BenchmarkMode<F> {
    /// Every agent uses `theta_hat`.
    Common,
    /// Agent benchmarks drawn from a normal centred on `theta_hat`.
    Heterogeneous { sigma_theta_hat: F },
}

/// Basis used for the engagement term of the welfare index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngNormalization {
    /// Total clicks plus highlights in the window.
    Raw,
    /// Engagement divided by the window size.
    PerCapita,
}

/// Every model and protocol parameter of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "F: Scalar")]
pub struct ModelConfig<F> {
    /// True state.
    pub theta: F,
    /// Common benchmark separating like-minded from opposing items.
    pub theta_hat: F,
    pub sigma_x: F,
    pub sigma_y: F,
    #[serde(rename = "M")]
    pub items: usize,
    #[serde(rename = "N")]
    pub agents: usize,
    #[serde(rename = "T")]
    pub runs: usize,
    #[serde(rename = "p_C")]
    pub p_confirmatory: F,
    #[serde(rename = "p_E")]
    pub p_exploratory: F,
    #[serde(rename = "p_I")]
    pub p_indifferent: F,
    #[serde(rename = "gamma_C")]
    pub gamma_confirmatory: F,
    #[serde(rename = "gamma_E")]
    pub gamma_exploratory: F,
    #[serde(rename = "gamma_I")]
    pub gamma_indifferent: F,
    /// Attention bias: one rank higher is `beta` times more likely.
    pub beta: F,
    /// Extra popularity weight of a highlight.
    pub eta: F,
    /// Weight of the opposite group's activity in a group's ranking.
    pub lambda: F,
    pub highlight_mode: HighlightMode<F>,
    pub benchmark_mode: BenchmarkMode<F>,
    /// Number of trailing clicks the indices are computed on.
    pub window: usize,
    pub eng_normalization: EngNormalization,
    pub master_seed: u64,
}

impl<F: Scalar> Default for ModelConfig<F> {
    fn default() -> Self {
        ModelConfig {
            theta: F::zero(),
            theta_hat: F::zero(),
            sigma_x: F::of(3.0),
            sigma_y: F::of(3.0),
            items: 20,
            agents: 100_000,
            runs: 200,
            p_confirmatory: F::of(0.7),
            p_exploratory: F::of(0.15),
            p_indifferent: F::of(0.15),
            gamma_confirmatory: F::of(0.8),
            gamma_exploratory: F::of(0.4),
            gamma_indifferent: F::of(0.5),
            beta: F::of(1.25),
            eta: F::zero(),
            lambda: F::one(),
            highlight_mode: HighlightMode::non_flat_default(),
            benchmark_mode: BenchmarkMode::Common,
            window: 2000,
            eng_normalization: EngNormalization::PerCapita,
            master_seed: 1,
        }
    }
}

/// Non-fatal configuration findings.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigWarning {
    /// Heterogeneous benchmark dispersion above `min(sigma_x, sigma_y)/4`.
    WideBenchmarkDispersion { sigma_theta_hat: f64, limit: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::WideBenchmarkDispersion { sigma_theta_hat, limit } => write!(
                f,
                "sigma_theta_hat = {sigma_theta_hat} exceeds min(sigma_x, sigma_y)/4 = {limit}; \
                 results outside the narrow-dispersion regime"
            ),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn is_prob<F: Scalar>(p: F) -> bool {
    p >= F::zero() && p <= F::one()
}

impl<F: Scalar> ModelConfig<F> {
    /// Parses a JSON document and validates it.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every invariant; returns the non-fatal warnings, which are also
    /// logged.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        let finite = [
            self.theta,
            self.theta_hat,
            self.sigma_x,
            self.sigma_y,
            self.beta,
            self.eta,
            self.lambda,
        ];
        check(finite.iter().all(|v| v.is_finite()), || "non-finite parameter".into())?;
        check(self.sigma_x > F::zero(), || "sigma_x must be positive".into())?;
        check(self.sigma_y > F::zero(), || "sigma_y must be positive".into())?;
        check(self.items > 2, || format!("M must exceed 2 (got {})", self.items))?;
        check(self.agents >= 1, || "N must be at least 1".into())?;
        check(self.runs >= 1, || "T must be at least 1".into())?;

        let (pc, pe, pi) = (self.p_confirmatory, self.p_exploratory, self.p_indifferent);
        check(is_prob(pc) && is_prob(pe) && is_prob(pi), || {
            "type probabilities must lie in [0, 1]".into()
        })?;
        let total = (pc + pe + pi).as_f64();
        let tol = 1e-12_f64.max(4.0 * F::epsilon().as_f64());
        check((total - 1.0).abs() <= tol, || {
            format!("p_C + p_E + p_I must equal 1 (got {total})")
        })?;

        let half = F::of(0.5);
        check(self.gamma_confirmatory > half && self.gamma_confirmatory < F::one(), || {
            "gamma_C must lie in (1/2, 1)".into()
        })?;
        check(self.gamma_exploratory > F::zero() && self.gamma_exploratory < half, || {
            "gamma_E must lie in (0, 1/2)".into()
        })?;
        check(self.gamma_indifferent == half, || "gamma_I must equal 1/2".into())?;
        check(self.beta > F::one(), || "beta must exceed 1".into())?;
        check(self.eta >= F::zero(), || "eta must be non-negative".into())?;
        check(is_prob(self.lambda), || "lambda must lie in [0, 1]".into())?;
        check(self.window >= 1 && self.window <= self.agents, || {
            format!("window must lie in [1, N] (got {} with N = {})", self.window, self.agents)
        })?;

        match self.highlight_mode {
            HighlightMode::Flat { p_a_const } => check(
                p_a_const > F::zero() && p_a_const < F::one(),
                || "p_A_const must lie in (0, 1)".into(),
            )?,
            HighlightMode::NonFlat { alpha, .. } => {
                check(alpha >= F::one() && alpha.is_finite(), || "alpha must be at least 1".into())?
            }
        }

        let mut warnings = Vec::new();
        if let BenchmarkMode::Heterogeneous { sigma_theta_hat } = self.benchmark_mode {
            check(sigma_theta_hat >= F::zero() && sigma_theta_hat.is_finite(), || {
                "sigma_theta_hat must be non-negative".into()
            })?;
            let limit = self.sigma_x.min(self.sigma_y) / F::of(4.0);
            if sigma_theta_hat > limit {
                let w = ConfigWarning::WideBenchmarkDispersion {
                    sigma_theta_hat: sigma_theta_hat.as_f64(),
                    limit: limit.as_f64(),
                };
                warn!("{w}");
                warnings.push(w);
            }
        }
        Ok(warnings)
    }

    /// Population-average sign-match weight `p_C g_C + p_E g_E + p_I g_I`.
    pub fn gamma_bar(&self) -> F {
        self.p_confirmatory * self.gamma_confirmatory
            + self.p_exploratory * self.gamma_exploratory
            + self.p_indifferent * self.gamma_indifferent
    }

    pub fn mode_kind(&self) -> ModeKind {
        self.highlight_mode.kind()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Cfg = ModelConfig<f64>;

    #[test]
    fn defaults_validate() {
        assert!(Cfg::default().validate().unwrap().is_empty());
        assert!(ModelConfig::<f32>::default().validate().unwrap().is_empty());
    }

    #[test]
    fn json_uses_model_names() {
        let cfg = Cfg::from_json_str(
            r#"{"M": 10, "N": 50, "T": 3, "window": 20, "p_C": 0.5, "p_E": 0.25, "p_I": 0.25,
                "highlight_mode": {"Flat": {"p_A_const": 0.3}},
                "benchmark_mode": {"Heterogeneous": {"sigma_theta_hat": 0.5}},
                "eng_normalization": "Raw", "master_seed": 9}"#,
        )
        .unwrap();
        assert_eq!(cfg.items, 10);
        assert_eq!(cfg.agents, 50);
        assert_eq!(cfg.highlight_mode, HighlightMode::Flat { p_a_const: 0.3 });
        assert_eq!(cfg.eng_normalization, EngNormalization::Raw);
        let back = Cfg::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = Cfg::from_json_str(r#"{"etaa": 3}"#).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("etaa"));
    }

    #[test]
    fn invariant_violations() {
        let bad = |f: &dyn Fn(&mut Cfg)| {
            let mut c = Cfg::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(&|c| c.p_confirmatory = 0.8));
        assert!(bad(&|c| c.gamma_confirmatory = 0.5));
        assert!(bad(&|c| c.gamma_exploratory = 0.5));
        assert!(bad(&|c| c.gamma_indifferent = 0.4));
        assert!(bad(&|c| c.beta = 1.0));
        assert!(bad(&|c| c.eta = -1.0));
        assert!(bad(&|c| c.lambda = 1.5));
        assert!(bad(&|c| c.items = 2));
        assert!(bad(&|c| c.window = c.agents + 1));
        assert!(bad(&|c| c.highlight_mode = HighlightMode::Flat { p_a_const: 1.0 }));
        assert!(bad(&|c| c.highlight_mode =
            HighlightMode::NonFlat { alpha: 0.5, center: HighlightCenter::Truth }));
    }

    #[test]
    fn wide_benchmark_dispersion_warns() {
        let mut c = Cfg::default();
        c.benchmark_mode = BenchmarkMode::Heterogeneous { sigma_theta_hat: 0.75 };
        assert!(c.validate().unwrap().is_empty());
        c.benchmark_mode = BenchmarkMode::Heterogeneous { sigma_theta_hat: 0.76 };
        assert_eq!(c.validate().unwrap().len(), 1);
    }
}
