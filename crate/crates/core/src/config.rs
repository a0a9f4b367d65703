//! Scenario documents.
//!
//! A scenario is a TOML document naming the base and target intensities, the
//! horizon and the Monte Carlo settings; per-command knobs live under
//! `[options]`. Parsing reports the field path of the first problem, both
//! for schema errors and for violated invariants.

use serde::{Deserialize, Serialize};

use crate::criteria::MonteCarlo;
use crate::error::{Error, Result};
use crate::intensity::{AlphaFamily, IntensitySpec};
use crate::likelihood::Window;
use crate::simulate::DEFAULT_EVENT_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lambda: IntensitySpec,
    pub mu: IntensitySpec,
    pub horizon: f64,
    /// `[u, t]`; the whole horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub event_cap: usize,
    #[serde(default = "default_step")]
    pub quadrature_step: f64,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: Output,
}

fn default_cap() -> usize {
    DEFAULT_EVENT_CAP
}

fn default_step() -> f64 {
    1e-3
}

/// Per-command settings, all optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Window length for `check`.
    pub epsilon: f64,
    /// `simulate` draws from `lambda` or from `mu`.
    pub law: Law,
    pub statistic: Statistic,
    /// Target for `importance-sample`; `mu` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<IntensitySpec>,
    /// Two constant base rates: `importance-sample` then compares the two
    /// proposals instead of simulating the target directly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bases: Option<(f64, f64)>,
    pub tv_tolerance: f64,
    /// Birth rates for `explosion`; taken from a `piecewise_birth` `mu` when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<AlphaFamily>,
    pub oracles: OracleOptions,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            epsilon: 0.1,
            law: Law::Lambda,
            statistic: Statistic::CountMarginal,
            target: None,
            bases: None,
            tv_tolerance: 0.02,
            alphas: None,
            oracles: OracleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Lambda,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    CountMarginal,
    MeanCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    pub poisson_rate: f64,
    pub mgf_c: f64,
    pub zlogz_eps: f64,
    pub gaussian_dim: usize,
    pub gaussian_c: f64,
    pub gaussian_eps: f64,
    /// Every coordinate of the Gaussian mean.
    pub gaussian_mean: f64,
    pub ou_a: f64,
    pub ou_b: f64,
    pub ou_sigma: f64,
    pub ou_xi: f64,
    pub ou_time: f64,
    /// Euler step for the OU comparison; exact sampling when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ou_euler_step: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            poisson_rate: 1.0,
            mgf_c: std::f64::consts::LN_2,
            zlogz_eps: 0.5,
            gaussian_dim: 1,
            gaussian_c: 0.1,
            gaussian_eps: 0.5,
            gaussian_mean: 0.0,
            ou_a: 0.0,
            ou_b: -1.0,
            ou_sigma: 1.0,
            ou_xi: 1.0,
            ou_time: 1.0,
            ou_euler_step: None,
        }
    }
}

/// Which per-path files a run writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub events: bool,
    pub weights: bool,
    pub paths: bool,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            events: true,
            weights: true,
            paths: true,
        }
    }
}

impl ScenarioConfig {
    /// Minimal scenario with default settings.
    pub fn new(lambda: IntensitySpec, mu: IntensitySpec, horizon: f64, n_paths: usize, seed: u64) -> Self {
        ScenarioConfig {
            lambda,
            mu,
            horizon,
            window: None,
            n_paths,
            seed,
            event_cap: DEFAULT_EVENT_CAP,
            quadrature_step: default_step(),
            options: Options::default(),
            output: Output::default(),
        }
    }

    pub fn window(&self) -> Window {
        match self.window {
            Some((u, t)) => Window { start: u, end: t },
            None => Window {
                start: 0.0,
                end: self.horizon,
            },
        }
    }

    pub fn monte_carlo(&self) -> MonteCarlo {
        MonteCarlo {
            n_paths: self.n_paths,
            seed: self.seed,
            event_cap: self.event_cap,
            quadrature_step: self.quadrature_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lambda.validate("lambda")?;
        self.mu.validate("mu")?;
        if self.lambda.dimension() != self.mu.dimension() {
            return Err(invariant(
                "mu",
                format!(
                    "dimension {} differs from lambda's {}",
                    self.mu.dimension(),
                    self.lambda.dimension()
                ),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invariant("horizon", "must be finite and positive"));
        }
        if let Some((u, t)) = self.window {
            Window::new(u, t)?;
            if t > self.horizon {
                return Err(invariant("window", "window must lie inside [0, horizon]"));
            }
        }
        if self.n_paths == 0 {
            return Err(invariant("n_paths", "must be positive"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(invariant("seed", "must be below 2^63"));
        }
        if self.event_cap == 0 {
            return Err(invariant("event_cap", "must be positive"));
        }
        if !(self.quadrature_step > 0.0 && self.quadrature_step < self.horizon) {
            return Err(invariant("quadrature_step", "must lie in (0, horizon)"));
        }
        let o = &self.options;
        if !(o.epsilon > 0.0 && o.epsilon.is_finite()) {
            return Err(invariant("options.epsilon", "must be positive"));
        }
        if let Some(target) = &o.target {
            target.validate("options.target")?;
            if target.dimension() != self.lambda.dimension() {
                return Err(invariant("options.target", "dimension differs from lambda's"));
            }
        }
        if let Some((a, b)) = o.bases {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(invariant("options.bases", "base rates must be positive"));
            }
        }
        if let Some(alphas) = &o.alphas {
            alphas.validate("options.alphas")?;
        }
        if !(o.tv_tolerance > 0.0) {
            return Err(invariant("options.tv_tolerance", "must be positive"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema {
            path: String::new(),
            reason: e.to_string(),
        })
    }
}

fn invariant(path: &str, reason: impl Into<String>) -> Error {
    Error::Invariant {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema {
        path: String::new(),
        reason: e.message().to_string(),
    })?;
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        reason: e.inner().message().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{Kernel, Link, SequenceRule};
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
horizon = 1.0
n_paths = 10000
seed = 42

[lambda]
family = "constant"
rates = [1.0]

[mu]
family = "constant"
rates = [2.0]
"#;

    #[test]
    fn minimal_document() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.mu, IntensitySpec::Constant { rates: vec![2.0] });
        assert_eq!(c.window(), Window { start: 0.0, end: 1.0 });
        assert_eq!(c.options.epsilon, 0.1);
        assert_eq!(c.event_cap, DEFAULT_EVENT_CAP);
    }

    #[test]
    fn zero_reset_slope_is_rejected() {
        let doc = r#"
horizon = 1.0
n_paths = 100
seed = 1

[lambda]
family = "constant"
rates = [1.0]

[mu]
family = "resetou"
sigma = 0.5
xi = { kind = "constant", value = 1.0 }
a = { kind = "constant", value = 0.0 }
b = { kind = "constant", value = 0.0 }
"#;
        match parse_config(doc) {
            Err(Error::Invariant { path, reason }) => {
                assert_eq!(path, "mu.resetou.b");
                assert_eq!(reason, "b_n must be nonzero");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reversed_window_is_rejected() {
        let doc = format!("window = [0.5, 0.2]\n{MINIMAL}");
        match parse_config(&doc) {
            Err(Error::Invariant { path, reason }) => {
                assert_eq!(path, "window");
                assert_eq!(reason, "u ≤ t required");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_field_paths() {
        let doc = MINIMAL.replace("rates = [2.0]", "rates = [\"two\"]");
        match parse_config(&doc) {
            Err(Error::Schema { path, reason }) => {
                assert_eq!(path, "mu");
                assert!(reason.contains("string"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let doc = format!("n_path = 3\n{MINIMAL}");
        assert!(matches!(parse_config(&doc), Err(Error::Schema { .. })));
        let doc = MINIMAL.replace("family = \"constant\"\nrates = [2.0]", "family = \"nope\"");
        assert!(matches!(parse_config(&doc), Err(Error::Schema { .. })));
    }

    #[test]
    fn step_must_be_below_horizon() {
        let doc = format!("quadrature_step = 2.0\n{MINIMAL}");
        assert!(matches!(parse_config(&doc), Err(Error::Invariant { path, .. }) if path == "quadrature_step"));
    }

    fn arb_rule() -> impl Strategy<Value = SequenceRule> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|value| SequenceRule::Constant { value }),
            (0.1f64..5.0, 0.0f64..2.0).prop_map(|(intercept, slope)| SequenceRule::Affine { intercept, slope }),
            (0.1f64..5.0, 0.5f64..3.0).prop_map(|(scale, ratio)| SequenceRule::Geometric { scale, ratio }),
        ]
    }

    fn arb_spec() -> impl Strategy<Value = IntensitySpec> {
        prop_oneof![
            (0.0f64..5.0).prop_map(|r| IntensitySpec::Constant { rates: vec![r] }),
            (0.0f64..3.0, 0.0f64..1.0).prop_map(|(alpha, beta)| IntensitySpec::ExactAffine { alpha, beta, dim: 1 }),
            (0.0f64..3.0, 0.0f64..1.0).prop_map(|(alpha, beta)| IntensitySpec::AffineCount { alpha, beta, dim: 1 }),
            arb_rule().prop_map(|r| IntensitySpec::PiecewiseBirth { alphas: AlphaFamily(r) }),
            (-1.0f64..1.0, 0.1f64..3.0, 0.1f64..2.0).prop_map(|(a, decay, support)| IntensitySpec::Hawkes {
                links: vec![Link::Abs],
                kernels: vec![vec![if a > 0.0 {
                    Kernel::Exponential { amplitude: a, decay }
                } else {
                    Kernel::Box { level: a, support }
                }]],
                baseline: vec![],
            }),
        ]
    }

    proptest! {
        #[test]
        fn serialized_configs_parse_back(
            lambda in arb_spec(),
            mu in arb_spec(),
            horizon in 0.5f64..10.0,
            n_paths in 1usize..100_000,
            seed in 0u64..(1u64 << 62),
            frac in 0.0f64..1.0,
        ) {
            let mut c = ScenarioConfig::new(lambda, mu, horizon, n_paths, seed);
            c.window = Some((0.0, horizon * frac));
            let text = c.to_toml().unwrap();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
