//! Experiment configuration: a flat `key = value` document with one section
//! header per experiment. Parsing is total (defaults fill every gap) and the
//! canonical serialization round-trips.

use std::fmt;
use std::path::PathBuf;

use advcal::losses::{parse_loss, MarginLoss};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    UnitCircle,
    Segments,
    ConsistencyCurve,
    CalibrationReport,
    MarginOracle,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "unit_circle" => Self::UnitCircle,
            "segments" => Self::Segments,
            "consistency_curve" => Self::ConsistencyCurve,
            "calibration_report" => Self::CalibrationReport,
            "margin_oracle" => Self::MarginOracle,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UnitCircle => "unit_circle",
            Self::Segments => "segments",
            Self::ConsistencyCurve => "consistency_curve",
            Self::CalibrationReport => "calibration_report",
            Self::MarginOracle => "margin_oracle",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hypothesis class selector for calibration reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportParams {
    pub loss: String,
    pub class: String,
    pub g_bound: f64,
    pub lambda: f64,
    pub w_bound: f64,
    pub units: usize,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    pub cases: usize,
    pub dims: Vec<usize>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub gamma: f64,
    pub n_samples: usize,
    pub grid_n: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Surrogate descriptors for the table/consistency experiments.
    pub surrogates: Vec<String>,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub report: ReportParams,
    pub oracle: OracleParams,
}

impl ExperimentConfig {
    /// Baseline configuration for an experiment, before any document keys.
    pub fn defaults(experiment: Experiment) -> Self {
        let gamma = match experiment {
            Experiment::UnitCircle => std::f64::consts::FRAC_1_SQRT_2,
            Experiment::MarginOracle => 0.3,
            _ => 0.1,
        };
        let mut cfg = Self {
            experiment,
            gamma,
            n_samples: 1_000_000,
            grid_n: 4096,
            seed: 0,
            output_dir: PathBuf::from("out"),
            surrogates: Vec::new(),
            sizes: vec![100, 1000, 10_000, 100_000],
            reps: 10,
            report: ReportParams {
                loss: "rho_margin(rho=1.0)".into(),
                class: "h_lin".into(),
                g_bound: 2.0,
                lambda: 2.0,
                w_bound: 1.5,
                units: 4,
                epsilons: vec![0.05, 0.1, 0.25, 0.5],
            },
            oracle: OracleParams {
                cases: 200,
                dims: vec![2, 3],
                tol: 1e-3,
            },
        };
        cfg.surrogates = default_surrogates(experiment, cfg.gamma);
        cfg
    }

    /// The resolved surrogate losses.
    pub fn losses(&self) -> Result<Vec<MarginLoss>, ConfigError> {
        self.surrogates
            .iter()
            .map(|d| {
                parse_loss(d).map_err(|e| ConfigError::at(0, 0, format!("surrogate `{d}`: {e}")))
            })
            .collect()
    }

    /// Canonical document form; `parse_config` of this text reproduces the
    /// configuration exactly.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment = {}\n", self.experiment));
        out.push_str(&format!("gamma = {}\n", self.gamma));
        out.push_str(&format!("n_samples = {}\n", self.n_samples));
        out.push_str(&format!("grid_n = {}\n", self.grid_n));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        out.push_str(&format!("\n[{}]\n", table_section(self.experiment)));
        out.push_str(&format!("surrogates = {}\n", self.surrogates.join(", ")));
        out.push_str("\n[consistency_curve]\n");
        out.push_str(&format!("sizes = {}\n", join(&self.sizes)));
        out.push_str(&format!("reps = {}\n", self.reps));
        out.push_str("\n[calibration_report]\n");
        out.push_str(&format!("loss = {}\n", self.report.loss));
        out.push_str(&format!("class = {}\n", self.report.class));
        out.push_str(&format!("g_bound = {}\n", self.report.g_bound));
        out.push_str(&format!("lambda = {}\n", self.report.lambda));
        out.push_str(&format!("w_bound = {}\n", self.report.w_bound));
        out.push_str(&format!("units = {}\n", self.report.units));
        out.push_str(&format!("epsilons = {}\n", join(&self.report.epsilons)));
        out.push_str("\n[margin_oracle]\n");
        out.push_str(&format!("cases = {}\n", self.oracle.cases));
        out.push_str(&format!("dims = {}\n", join(&self.oracle.dims)));
        out.push_str(&format!("tol = {}\n", self.oracle.tol));
        out
    }
}

fn table_section(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::UnitCircle => "unit_circle",
        Experiment::Segments => "segments",
        // Surrogate lists are also accepted under the consistency section.
        _ => "consistency_curve",
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Experiment-specific surrogate defaults: the four shifted losses on the
/// unit circle, plus the extra convex/ramp pair on the segments.
fn default_surrogates(experiment: Experiment, gamma: f64) -> Vec<String> {
    let gamma_hat = (1.0 + 99.0 * gamma) / 100.0;
    match experiment {
        Experiment::UnitCircle => vec![
            "hinge_shifted".into(),
            "ramp_shifted".into(),
            "sigmoid_shifted".into(),
            "logistic_shifted".into(),
        ],
        Experiment::Segments => vec![
            "hinge_shifted".into(),
            "ramp_shifted".into(),
            "sigmoid_shifted".into(),
            "logistic_shifted".into(),
            format!("phi1(gamma={gamma})"),
            format!("rho_margin(rho={gamma_hat})"),
        ],
        Experiment::ConsistencyCurve => vec![
            format!("rho_margin(rho={gamma_hat})"),
            "ramp_shifted".into(),
        ],
        _ => Vec::new(),
    }
}

/// Parse a configuration document. Unknown keys, type mismatches, and
/// out-of-range values are reported with their line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_override(text, None)
}

/// [`parse_config`] with the experiment pinned from outside (the
/// `--experiment` flag), which also waives the document's experiment key.
pub fn parse_config_override(
    text: &str,
    override_experiment: Option<Experiment>,
) -> Result<ExperimentConfig, ConfigError> {
    // First pass: locate the experiment so defaults can be resolved.
    let mut experiment = override_experiment;
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if let Some((key, value, _)) = split_pair(line) {
            if key == "experiment" && override_experiment.is_none() {
                let exp = Experiment::parse(value).ok_or_else(|| {
                    ConfigError::at(
                        lineno + 1,
                        col_of(raw, value),
                        format!("unknown experiment `{value}`"),
                    )
                })?;
                experiment = Some(exp);
            }
        }
    }
    let experiment = experiment.ok_or_else(|| {
        ConfigError::at(1, 1, "missing required key `experiment`".to_string())
    })?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    let mut surrogates_set = false;

    let mut section: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                ConfigError::at(lineno, col_of(raw, trimmed), "unterminated section header")
            })?;
            if Experiment::parse(name).is_none() {
                return Err(ConfigError::at(
                    lineno,
                    col_of(raw, name),
                    format!("unknown section `{name}`"),
                ));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value, value_col)) = split_pair(line) else {
            return Err(ConfigError::at(
                lineno,
                col_of(raw, trimmed),
                "expected `key = value` or `[section]`",
            ));
        };
        let err = |msg: String| ConfigError::at(lineno, value_col, msg);
        let key_err = |msg: String| ConfigError::at(lineno, col_of(raw, key), msg);

        match (section.as_deref(), key) {
            (None, "experiment") => {} // handled in the first pass
            (None, "gamma") => {
                let g: f64 = parse_num(value).map_err(err)?;
                if !(g > 0.0 && g < 1.0) {
                    return Err(err(format!("gamma = {g} must lie in (0, 1)")));
                }
                cfg.gamma = g;
                if !surrogates_set {
                    cfg.surrogates = default_surrogates(experiment, g);
                }
            }
            (None, "n_samples") => cfg.n_samples = parse_count(value).map_err(err)?,
            (None, "grid_n") => cfg.grid_n = parse_count(value).map_err(err)?,
            (None, "seed") => cfg.seed = parse_num(value).map_err(err)?,
            (None, "output_dir") => cfg.output_dir = PathBuf::from(value),
            (None, other) => {
                return Err(key_err(format!("unknown key `{other}`")));
            }
            (Some(sec), key) => match (sec, key) {
                ("unit_circle" | "segments" | "consistency_curve", "surrogates") => {
                    let descriptors: Vec<String> = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    for d in &descriptors {
                        parse_loss(d).map_err(|e| err(format!("{e}")))?;
                    }
                    if sec == table_section(experiment) {
                        cfg.surrogates = descriptors;
                        surrogates_set = true;
                    }
                }
                ("consistency_curve", "sizes") => {
                    cfg.sizes = parse_list(value).map_err(err)?;
                }
                ("consistency_curve", "reps") => cfg.reps = parse_count(value).map_err(err)?,
                ("calibration_report", "loss") => {
                    parse_loss(value).map_err(|e| err(format!("{e}")))?;
                    cfg.report.loss = value.to_string();
                }
                ("calibration_report", "class") => {
                    if !matches!(value, "h_lin" | "h_relu" | "h_nn") {
                        return Err(err(format!(
                            "unknown class `{value}` (expected h_lin, h_relu, or h_nn)"
                        )));
                    }
                    cfg.report.class = value.to_string();
                }
                ("calibration_report", "g_bound") => {
                    cfg.report.g_bound = parse_num(value).map_err(err)?
                }
                ("calibration_report", "lambda") => {
                    cfg.report.lambda = parse_num(value).map_err(err)?
                }
                ("calibration_report", "w_bound") => {
                    cfg.report.w_bound = parse_num(value).map_err(err)?
                }
                ("calibration_report", "units") => {
                    cfg.report.units = parse_count(value).map_err(err)?
                }
                ("calibration_report", "epsilons") => {
                    let eps: Vec<f64> = parse_list(value).map_err(err)?;
                    if let Some(bad) = eps.iter().find(|e| !(0.0 < **e && **e <= 1.0)) {
                        return Err(err(format!("epsilon = {bad} must lie in (0, 1]")));
                    }
                    cfg.report.epsilons = eps;
                }
                ("margin_oracle", "cases") => cfg.oracle.cases = parse_count(value).map_err(err)?,
                ("margin_oracle", "dims") => cfg.oracle.dims = parse_list(value).map_err(err)?,
                ("margin_oracle", "tol") => {
                    let t: f64 = parse_num(value).map_err(err)?;
                    if t <= 0.0 {
                        return Err(err(format!("tol = {t} must be positive")));
                    }
                    cfg.oracle.tol = t;
                }
                (sec, other) => {
                    return Err(key_err(format!("unknown key `{other}` in section [{sec}]")));
                }
            },
        }
    }
    Ok(cfg)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Split `key = value`, returning the trimmed pieces and the 1-based column
/// of the value.
fn split_pair(line: &str) -> Option<(&str, &str, usize)> {
    let (key, value) = line.split_once('=')?;
    let key_trim = key.trim();
    if key_trim.is_empty() {
        return None;
    }
    let value_offset = key.len() + 1 + (value.len() - value.trim_start().len());
    Some((key_trim, value.trim(), value_offset + 1))
}

fn col_of(raw: &str, token: &str) -> usize {
    raw.find(token.trim()).map(|i| i + 1).unwrap_or(1)
}

fn parse_num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{value}` is not a valid number"))
}

fn parse_count(value: &str) -> Result<usize, String> {
    let n: usize = parse_num(value)?;
    if n == 0 {
        return Err(format!("`{value}` must be a positive count"));
    }
    Ok(n)
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, _> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("`{s}` is not a valid number")))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err("list must not be empty".to_string());
    }
    Ok(items)
}
