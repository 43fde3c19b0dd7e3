//! Run configuration: TOML file plus flag overrides, validated at parse time.

use magvisc::diagnostics::TestFunction;
use magvisc::field::{ForcingTag, ProfileTag};
use magvisc::kernel::KernelSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid value for `{parameter}`: {constraint}")]
    Validation { parameter: String, constraint: String },
}

fn invalid(parameter: &str, constraint: &str) -> ConfigError {
    ConfigError::Validation {
        parameter: parameter.into(),
        constraint: constraint.into(),
    }
}

/// Top-level operation selected by the subcommand (or the `mode` key).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    SweepEpsilon,
    SweepDelta,
    Refine,
    ValidateKernel,
    CheckWeak,
}

/// Which formulation `simulate` integrates. Defaults by the kernel shift:
/// translated problem for `epsilon > 0`, evolution form for `epsilon = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    RegularEps,
    SingularEvolution,
    ViscoelasticOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct KernelConfig {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<(f64, f64)>>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: "constant".into(),
            alpha: None,
            scale: None,
            value: Some(1.0),
            terms: None,
        }
    }
}

impl KernelConfig {
    pub fn to_spec(&self) -> Result<KernelSpec, ConfigError> {
        match self.family.as_str() {
            "fractional" => {
                let alpha = self.alpha.ok_or_else(|| invalid("alpha", "required for the fractional family"))?;
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(invalid("alpha", "must lie in (0,1)"));
                }
                let scale = self.scale.unwrap_or(1.0);
                if !(scale > 0.0) {
                    return Err(invalid("scale", "must be positive"));
                }
                Ok(KernelSpec::Fractional { alpha, scale })
            }
            "prony" => {
                let terms = self
                    .terms
                    .clone()
                    .ok_or_else(|| invalid("terms", "required for the prony family"))?;
                if !terms.iter().any(|&(c, _)| c > 0.0) {
                    return Err(invalid("terms", "need at least one positive coefficient"));
                }
                if terms.iter().any(|&(c, r)| c < 0.0 || r < 0.0) {
                    return Err(invalid("terms", "coefficients and rates must be >= 0"));
                }
                Ok(KernelSpec::PronySeries { terms })
            }
            "constant" => {
                let value = self.value.unwrap_or(1.0);
                if !(value > 0.0) {
                    return Err(invalid("value", "must be positive"));
                }
                Ok(KernelSpec::Constant { value })
            }
            other => Err(invalid("kernel.family", &format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelConfig {
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub t_end: f64,
    pub n_cells: usize,
    pub cfl: f64,
    /// Explicit step; when absent the step is derived from the CFL fraction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lambda: 0.0,
            delta: 0.01,
            epsilon: 0.0,
            t_end: 1.0,
            n_cells: 200,
            cfl: 0.5,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub struct InitialConfig {
    #[serde(default = "default_u1")]
    pub u1: ProfileTag,
    #[serde(default = "default_theta")]
    pub theta: ProfileTag,
    #[serde(default = "default_forcing")]
    pub f: ForcingTag,
}

fn default_u1() -> ProfileTag {
    ProfileTag::Sine { amplitude: 1.0, mode: 1 }
}

fn default_theta() -> ProfileTag {
    ProfileTag::Zero
}

fn default_forcing() -> ForcingTag {
    ForcingTag::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OutputConfig {
    pub stride: usize,
    pub write_trajectory: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            stride: 10,
            write_trajectory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DiagnosticsConfig {
    pub energy: bool,
    pub bounds: bool,
    pub gronwall: bool,
    pub lemma21: bool,
    pub lemma22: bool,
    pub weak: bool,
    #[serde(default = "default_phi")]
    pub phi: TestFunction,
    #[serde(default = "default_psi1")]
    pub psi1: TestFunction,
    #[serde(default = "default_psi2")]
    pub psi2: TestFunction,
}

fn default_phi() -> TestFunction {
    TestFunction::SineLinearT { mode: 1 }
}

fn default_psi1() -> TestFunction {
    TestFunction::SineLinearT { mode: 1 }
}

fn default_psi2() -> TestFunction {
    TestFunction::Zero
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            energy: true,
            bounds: true,
            gronwall: false,
            lemma21: false,
            lemma22: false,
            weak: false,
            phi: default_phi(),
            psi1: default_psi1(),
            psi2: default_psi2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepConfig {
    pub epsilon_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// Number of (N, dt)-halving levels of the refinement study.
    pub refine_levels: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilon_values: vec![0.2, 0.1, 0.05, 0.025],
            delta_values: vec![0.1, 0.01, 0.001],
            refine_levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverKind>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// The initial displacement is not configurable; any `u0` key is an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<toml::Value>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.u0.is_some() {
            return Err(invalid("u0", "fixed to zero by model assumption"));
        }
        self.kernel.to_spec()?;
        let m = &self.model;
        if !(m.lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        if !(m.delta > 0.0 && m.delta < 1.0) {
            return Err(invalid("delta", "must lie in (0,1)"));
        }
        if !(m.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be >= 0"));
        }
        if !(m.t_end > 0.0) {
            return Err(invalid("t-end", "must be positive"));
        }
        if m.n_cells < 4 {
            return Err(invalid("n-cells", "must be at least 4"));
        }
        if !(m.cfl > 0.0 && m.cfl <= 1.0) {
            return Err(invalid("cfl", "must lie in (0,1]"));
        }
        if let Some(dt) = m.dt {
            if !(dt > 0.0 && dt <= m.t_end) {
                return Err(invalid("dt", "must lie in (0, t-end]"));
            }
        }
        if self.output.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if self.sweep.refine_levels < 2 {
            return Err(invalid("refine-levels", "need at least 2 levels"));
        }
        for w in self.sweep.epsilon_values.windows(2) {
            if w[1] >= w[0] {
                return Err(invalid("epsilon-values", "must be strictly decreasing"));
            }
        }
        for w in self.sweep.delta_values.windows(2) {
            if w[1] >= w[0] {
                return Err(invalid("delta-values", "must be strictly decreasing"));
            }
        }
        if self.sweep.epsilon_values.iter().any(|&v| v <= 0.0) {
            return Err(invalid("epsilon-values", "must be positive"));
        }
        if self.sweep.delta_values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(invalid("delta-values", "must lie in (0,1)"));
        }
        if self.diagnostics.lemma21
            && self.solver.map_or(true, |s| s != SolverKind::ViscoelasticOnly)
        {
            return Err(invalid(
                "diagnostics.lemma21",
                "requires solver = \"viscoelastic-only\"",
            ));
        }
        if self.diagnostics.lemma22 && self.solver == Some(SolverKind::ViscoelasticOnly) {
            return Err(invalid(
                "diagnostics.lemma22",
                "requires a coupled solver",
            ));
        }
        Ok(())
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.solver.unwrap_or(if self.model.epsilon > 0.0 {
            SolverKind::RegularEps
        } else {
            SolverKind::SingularEvolution
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses a config document and applies `--set key=value` overrides
/// (dotted paths) before validation.
pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut doc: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for (path, raw) in overrides {
        apply_override(&mut doc, path, raw)?;
    }
    let config: RunConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, overrides)
}

fn apply_override(doc: &mut toml::Value, path: &str, raw: &str) -> Result<(), ConfigError> {
    let parsed: toml::Value = match raw.parse::<toml::Value>() {
        Ok(v) => v,
        // Bare strings are not valid TOML values; treat them literally.
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::Parse(format!("`{path}` does not address a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str("[kernel]\nfamily = \"constant\"\nvalue = 1.0\n", &[]).unwrap();
        assert_eq!(cfg.model.n_cells, 200);
        assert_eq!(cfg.model.cfl, 0.5);
        assert_eq!(cfg.model.delta, 0.01);
        assert_eq!(cfg.model.lambda, 0.0);
        assert_eq!(cfg.mode, Mode::Simulate);
        assert_eq!(cfg.solver_kind(), SolverKind::SingularEvolution);
    }

    #[test]
    fn alpha_out_of_range_is_named() {
        let err = parse_config_str(
            "[kernel]\nfamily = \"fractional\"\nalpha = 1.5\n",
            &[],
        )
        .unwrap_err();
        match err {
            ConfigError::Validation { parameter, constraint } => {
                assert_eq!(parameter, "alpha");
                assert!(constraint.contains("(0,1)"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn u0_key_is_rejected() {
        let err = parse_config_str("u0 = 0.5\n", &[]).unwrap_err();
        match err {
            ConfigError::Validation { parameter, constraint } => {
                assert_eq!(parameter, "u0");
                assert_eq!(constraint, "fixed to zero by model assumption");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::SweepEpsilon;
        cfg.kernel = KernelConfig {
            family: "fractional".into(),
            alpha: Some(0.5),
            scale: Some(1.0),
            value: None,
            terms: None,
        };
        cfg.model.lambda = 1.0;
        cfg.model.epsilon = 0.05;
        cfg.initial.theta = ProfileTag::SmoothstepAngle { theta_max: 1.0 };
        cfg.diagnostics.lemma22 = true;
        let text = cfg.to_toml();
        let back = parse_config_str(&text, &[]).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn overrides_apply_to_nested_keys() {
        let cfg = parse_config_str(
            "[kernel]\nfamily = \"constant\"\n",
            &[
                ("model.lambda".into(), "2.5".into()),
                ("model.n-cells".into(), "100".into()),
                ("kernel.family".into(), "constant".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.lambda, 2.5);
        assert_eq!(cfg.model.n_cells, 100);
    }

    #[test]
    fn lemma21_needs_viscoelastic_solver() {
        let err = parse_config_str("[diagnostics]\nlemma21 = true\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { .. }));
        let ok = parse_config_str(
            "solver = \"viscoelastic-only\"\n[diagnostics]\nlemma21 = true\nlemma22 = false\n",
            &[],
        );
        assert!(ok.is_ok());
    }
}
