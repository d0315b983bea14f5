use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::models;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Computation {
    Floquet,
    Kato,
    Berry,
    Agpsolve,
    Hfe,
    Classify,
}

impl Computation {
    pub fn name(self) -> &'static str {
        match self {
            Computation::Floquet => "floquet",
            Computation::Kato => "kato",
            Computation::Berry => "berry",
            Computation::Agpsolve => "agpsolve",
            Computation::Hfe => "hfe",
            Computation::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub compute: Vec<Computation>,
    pub model: ModelSection,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Prefix of the output files; defaults to the parameter name.
    #[serde(default)]
    pub name: Option<String>,
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.parameter)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let n = (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + (self.stop - self.start) * i as f64 / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Initial integrator steps per period (doubled until converged).
    pub steps: usize,
    pub refine_tol: f64,
    pub max_steps: usize,
    /// Intervals of the explicit state grid used by `berry`.
    pub grid_points: usize,
    pub n_h: Option<usize>,
    pub rank_tol: f64,
    /// Disorder seed when the model parameters do not set one.
    pub seed: Option<u64>,
    pub ambiguity: f64,
    /// Fail (exit 3) on an ambiguous band assignment instead of flagging it.
    pub strict_tracking: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            steps: 128,
            refine_tol: 1e-10,
            max_steps: 1 << 16,
            grid_points: 64,
            n_h: None,
            rank_tol: 1e-10,
            seed: None,
            ambiguity: 0.05,
            strict_tracking: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, formats: vec![Format::Csv] }
    }
}

pub const MAX_SWEEP_POINTS: usize = 100_000;

/// Parse by extension: `.json` as JSON, anything else as the sectioned key-table format.
pub fn parse(path: &Path, text: &str) -> Result<ExperimentConfig, CliError> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse(path, &text)?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Validation(m));
    if cfg.compute.is_empty() {
        return bad("compute list is empty".into());
    }
    let Some(info) = models::lookup(&cfg.model.name) else {
        return bad(format!("unknown model '{}'", cfg.model.name));
    };
    for (k, v) in &cfg.model.params {
        if !models::accepts(&info, k) {
            return bad(format!("model '{}' has no parameter '{k}'", info.name));
        }
        if !v.is_finite() {
            return bad(format!("parameter '{k}' must be finite"));
        }
    }
    let mut labels = Vec::new();
    for s in &cfg.sweep {
        if !models::accepts(&info, &s.parameter) {
            return bad(format!("cannot sweep '{}': not a parameter of '{}'", s.parameter, info.name));
        }
        if s.points == 0 || s.points > MAX_SWEEP_POINTS {
            return bad(format!("sweep '{}' needs 1..={MAX_SWEEP_POINTS} points", s.label()));
        }
        if !s.start.is_finite() || !s.stop.is_finite() {
            return bad(format!("sweep '{}' bounds must be finite", s.label()));
        }
        if models::is_integer(&s.parameter) {
            return bad(format!("integer parameter '{}' cannot be swept", s.parameter));
        }
        if labels.contains(&s.label()) {
            return bad(format!("duplicate sweep name '{}'", s.label()));
        }
        labels.push(s.label());
    }
    let n = &cfg.numerics;
    if n.steps == 0 || n.max_steps < n.steps {
        return bad("numerics.steps must be positive and at most max_steps".into());
    }
    if !(n.refine_tol > 0.0) || !(n.rank_tol > 0.0) || !(n.ambiguity >= 0.0) {
        return bad("numerics tolerances must be positive".into());
    }
    if n.grid_points == 0 {
        return bad("numerics.grid_points must be positive".into());
    }
    if cfg.output.formats.is_empty() {
        return bad("output.formats is empty".into());
    }
    // Resolve the base point once so bad values surface before any work starts.
    let params = models::resolve(&info, &cfg.model.params, n.seed)?;
    let built = models::build(info.name, &params).map_err(|e| CliError::Validation(e.to_string()))?;
    if cfg.compute.contains(&Computation::Agpsolve) {
        if built.drive.harmonics().is_none() {
            return bad(format!("agpsolve needs a finite-harmonic drive; '{}' is not one", info.name));
        }
        let dim = built.drive.dim();
        let n_h = n.n_h.unwrap_or_else(|| floquet_kato::agpsolve::default_harmonics(&built.drive));
        let rows = dim * dim * (2 * n_h + 1);
        if rows > floquet_kato::agpsolve::MAX_ROWS {
            return bad(format!(
                "agpsolve superoperator would have {rows} rows (limit {})",
                floquet_kato::agpsolve::MAX_ROWS
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
compute = ["floquet"]
[model]
name = "xy"
"#;

    #[test]
    fn minimal_config_validates() {
        let c = parse(Path::new("a.cfg"), MINIMAL).unwrap();
        validate(&c).unwrap();
        assert_eq!(c.numerics, Numerics::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[numerics]\nstep = 3\n");
        assert!(matches!(parse(Path::new("a.cfg"), &text), Err(CliError::Validation(_))));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let text = format!("{MINIMAL}[model.params]\nq = 1.0\n");
        let c = parse(Path::new("a.cfg"), &text).unwrap();
        assert!(matches!(validate(&c), Err(CliError::Validation(_))));
    }

    #[test]
    fn json_encoding_equivalent() {
        let j = r#"{"compute": ["floquet"], "model": {"name": "xy"}}"#;
        let a = parse(Path::new("a.json"), j).unwrap();
        let b = parse(Path::new("a.cfg"), MINIMAL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_values_include_endpoints() {
        let s = SweepSpec { name: None, parameter: "k".into(), start: -1.0, stop: 1.0, points: 5 };
        assert_eq!(s.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn bundled_configs_validate() {
        for (name, text) in [
            ("xy_resonance.cfg", include_str!("../configs/xy_resonance.cfg")),
            ("dtc_pairing.cfg", include_str!("../configs/dtc_pairing.cfg")),
        ] {
            let c = parse(Path::new(name), text).unwrap();
            validate(&c).unwrap();
        }
    }
}
