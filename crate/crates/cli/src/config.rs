//! Experiment configuration files and their validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spline_martingale::convergence::Source;
use spline_martingale::functions::{FunctionSpec, MeasureSpec, ScalarFn};
use spline_martingale::{KnotFamily, KnotProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GramDecay,
    Project,
    Jackson,
    Maximal,
    TowerCheck,
    ShadrinProbe,
    SingularDecay,
    Converge,
    LimitConstruct,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::GramDecay,
        Experiment::Project,
        Experiment::Jackson,
        Experiment::Maximal,
        Experiment::TowerCheck,
        Experiment::ShadrinProbe,
        Experiment::SingularDecay,
        Experiment::Converge,
        Experiment::LimitConstruct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GramDecay => "gram-decay",
            Experiment::Project => "project",
            Experiment::Jackson => "jackson",
            Experiment::Maximal => "maximal",
            Experiment::TowerCheck => "tower-check",
            Experiment::ShadrinProbe => "shadrin-probe",
            Experiment::SingularDecay => "singular-decay",
            Experiment::Converge => "converge",
            Experiment::LimitConstruct => "limit-construct",
        }
    }

    /// Experiments that compare grids across `n` and so need nested grids.
    fn needs_nesting(self) -> bool {
        matches!(
            self,
            Experiment::TowerCheck | Experiment::Converge | Experiment::LimitConstruct
        )
    }
}

/// A knot family given either as a tagged record or by a short name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnotsField {
    Short(String),
    Full(KnotFamily),
}

impl KnotsField {
    fn resolve(&self) -> Result<KnotFamily, String> {
        match self {
            KnotsField::Full(f) => Ok(f.clone()),
            KnotsField::Short(name) => match name.as_str() {
                "uniform" | "uniform-dense" => Ok(KnotFamily::UniformDense),
                "dyadic" | "dyadic-dense" => Ok(KnotFamily::DyadicDense),
                other => Err(format!(
                    "unknown knot family shorthand {other:?} (use \"uniform\", \"dyadic\" or a tagged record)"
                )),
            },
        }
    }
}

/// Evaluation points: an explicit list, `n` equispaced cell midpoints, or
/// `n` seeded uniform draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsField {
    List(Vec<f64>),
    Count(usize),
    Random { random: usize },
}

/// Thresholds; every field has a per-experiment default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// gram-decay: largest admissible `q_hat` spread across the schedule.
    pub q_spread: Option<f64>,
    /// gram-decay: expected `q_hat` and its tolerance.
    pub q_expected: Option<f64>,
    pub q_tol: Option<f64>,
    /// project / tower-check: coefficient defects.
    pub idempotency: Option<f64>,
    pub tower: Option<f64>,
    /// jackson: largest admissible max/min of the ratio sequence.
    pub ratio_spread: Option<f64>,
    /// maximal / shadrin-probe: optional upper bound on the constant.
    pub max_constant: Option<f64>,
    /// converge: gap at the last schedule entry and certificate bound.
    pub final_gap: Option<f64>,
    pub certificate: Option<f64>,
    /// limit-construct: stabilization and biorthogonality tolerances.
    pub stabilization: Option<f64>,
    pub gap: Option<f64>,
    pub biorthogonality: Option<f64>,
    /// singular-decay: distance of the sample points from the support.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(alias = "k")]
    pub order: usize,
    #[serde(alias = "family")]
    pub knots: KnotsField,
    #[serde(alias = "schedule")]
    pub n_schedule: Vec<usize>,
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub points: Option<PointsField>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_quad_depth")]
    pub quad_depth: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_quad_depth() -> usize {
    2
}

/// A config problem, pointing at a line of the file when one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, keys: &[&str]) -> Option<usize> {
    keys.iter()
        .filter_map(|k| text.find(&format!("\"{k}\"")))
        .min()
        .map(|at| text[..at].matches('\n').count() + 1)
}

/// A config that passed validation, with the knot program resolved.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub program: KnotProgram,
}

impl Validated {
    /// The function or measure the experiment projects.
    pub fn source(&self) -> Option<Source> {
        match (&self.config.function, &self.config.measure) {
            (Some(f), None) => Some(Source::function(f.clone())),
            (None, Some(m)) => Some(Source::measure(m.clone())),
            _ => None,
        }
    }
}

pub fn load(path: &Path) -> Result<Validated, ConfigError> {
    let err = |line, message: String| ConfigError {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(None, format!("cannot read config: {e}")))?;
    parse(&text).map_err(|(line, message)| err(line, message))
}

/// Parses and validates config text; errors carry a line number when the
/// offending field can be located.
pub fn parse(text: &str) -> Result<Validated, (Option<usize>, String)> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| (Some(e.line().max(1)), e.to_string()))?;
    let at = |keys: &[&str], message: String| (line_of(text, keys), message);

    let schedule = &config.n_schedule;
    if schedule.is_empty() {
        return Err(at(&["n_schedule", "schedule"], "n_schedule is empty".into()));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[1] <= w[0]) {
        return Err(at(
            &["n_schedule", "schedule"],
            format!("n_schedule must be strictly increasing ({} follows {})", w[1], w[0]),
        ));
    }
    let family = config.knots.resolve().map_err(|m| at(&["knots", "family"], m))?;
    let program = KnotProgram::new(family, config.order).map_err(|e| at(&["knots", "family", "order", "k"], e.to_string()))?;
    if config.experiment.needs_nesting() && !program.family.is_sequence() {
        return Err(at(
            &["knots", "family"],
            format!(
                "{} compares grids across n and needs a nested knot sequence, not {}",
                config.experiment.name(),
                program.family.label()
            ),
        ));
    }
    if let Some(cap) = program.family.capacity() {
        let last = *schedule.last().expect("non-empty");
        if last > cap {
            return Err(at(
                &["n_schedule", "schedule"],
                format!("n = {last} exceeds the {cap} knots of the sequence"),
            ));
        }
    }
    if config.quad_depth == 0 {
        return Err(at(&["quad_depth"], "quad_depth must be at least 1".into()));
    }
    if config.function.is_some() && config.measure.is_some() {
        return Err(at(&["measure"], "give either function or measure, not both".into()));
    }
    if let Some(f) = &config.function {
        f.validate().map_err(|e| at(&["function"], e.to_string()))?;
    }
    if let Some(m) = &config.measure {
        m.validate().map_err(|e| at(&["measure"], e.to_string()))?;
    }
    match config.experiment {
        Experiment::Jackson | Experiment::Maximal if config.function.is_none() => {
            return Err(at(&["experiment"], format!("{} needs a function", config.experiment.name())));
        }
        Experiment::Project | Experiment::TowerCheck | Experiment::Converge | Experiment::LimitConstruct
            if config.function.is_none() && config.measure.is_none() =>
        {
            return Err(at(
                &["experiment"],
                format!("{} needs a function or a measure", config.experiment.name()),
            ));
        }
        _ => {}
    }
    if let Some(PointsField::List(points)) = &config.points {
        if points.is_empty() || points.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(at(&["points"], "points must be a non-empty list in [0, 1]".into()));
        }
    }
    if let Some(PointsField::Count(0) | PointsField::Random { random: 0 }) = &config.points {
        return Err(at(&["points"], "point count must be positive".into()));
    }
    let tol = &config.tolerances;
    let named = [
        ("q_spread", tol.q_spread),
        ("q_expected", tol.q_expected),
        ("q_tol", tol.q_tol),
        ("idempotency", tol.idempotency),
        ("tower", tol.tower),
        ("ratio_spread", tol.ratio_spread),
        ("max_constant", tol.max_constant),
        ("final_gap", tol.final_gap),
        ("certificate", tol.certificate),
        ("stabilization", tol.stabilization),
        ("gap", tol.gap),
        ("biorthogonality", tol.biorthogonality),
        ("margin", tol.margin),
    ];
    for (name, v) in named {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(at(&[name], format!("tolerance {name} must be positive, got {v}")));
            }
        }
    }
    Ok(Validated { config, program })
}

/// The default test function of experiments that need one.
pub fn default_function() -> FunctionSpec {
    ScalarFn::Sin2pi {
        freq: 1.0,
        phase: 0.0,
        amplitude: 1.0,
    }
    .into()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "experiment": "tower-check",
  "k": 3,
  "family": "dyadic",
  "schedule": [7, 15, 31, 63],
  "function": {"name": "sin2pi"}
}"#;

    #[test]
    fn parses_shorthand_and_aliases() {
        let v = parse(GOOD).unwrap();
        assert_eq!(v.config.order, 3);
        assert_eq!(v.program.family, KnotFamily::DyadicDense);
        assert_eq!(v.config.quad_depth, 2);
    }

    #[test]
    fn schedule_error_points_at_its_line() {
        let bad = GOOD.replace("[7, 15, 31, 63]", "[7, 15, 15]");
        let (line, msg) = parse(&bad).unwrap_err();
        assert_eq!(line, Some(5));
        assert!(msg.contains("strictly increasing"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let (line, _) = parse("{\n  \"experiment\": \"jackson\",\n  oops\n}").unwrap_err();
        assert_eq!(line, Some(3));
    }

    #[test]
    fn unknown_fields_and_families_are_rejected() {
        assert!(parse(&GOOD.replace("\"k\"", "\"kk\"")).is_err());
        assert!(parse(&GOOD.replace("\"dyadic\"", "\"cubic\"")).is_err());
        let uniform = GOOD.replace("\"dyadic\"", "\"uniform\"");
        assert!(parse(&uniform).unwrap_err().1.contains("nested"));
        let gram = uniform.replace("tower-check", "gram-decay");
        assert!(parse(&gram).is_ok());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let bad = GOOD.replace("\"function\"", "\"tolerances\": {\"tower\": 0},\n  \"function\"");
        assert!(parse(&bad).unwrap_err().1.contains("tower"));
    }
}
