//! Experiment dispatch: wires a configuration to the library, writes the
//! CSV/JSON artifacts, and records a run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use advcal::calibration::{
    check_linear_characterization, check_quasiconcave_characterization, classify_glm_surrogate,
    classify_linear_surrogate, pseudo_calibration_search, CalibrationReport, Condition,
    GlmCalibrationContext, GlmDeltaTable, NnFamily, NnSearchBudget, Verdict,
    ETA_GRID_DEFAULT, T_GRID_DEFAULT,
};
use advcal::distributions::{Distribution, RngCursor, Segments};
use advcal::hypotheses::{
    margins_glm, margins_linear, margins_numeric, HypothesisSpec, LinkFn, SearchConfig,
};
use advcal::losses::{parse_loss, PerturbationBudget};
use advcal::risk::{
    consistency_experiment, segments_table, unit_circle_table, write_table_csv, TableConfig,
};
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
        move |source| RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> RunError {
    RunError::Numeric(e.to_string())
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        line: 0,
        col: 0,
        message: msg.into(),
    })
}

/// Run one experiment; returns the artifact paths written (the manifest is
/// always last).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(&cfg.output_dir).map_err(RunError::io(&cfg.output_dir))?;
    let gamma = PerturbationBudget::new(cfg.gamma)
        .map_err(|e| config_err(format!("gamma: {e}")))?;
    let table_cfg = TableConfig {
        n_samples: cfg.n_samples,
        grid_n: cfg.grid_n,
        seed: cfg.seed,
    };

    let mut outputs = Vec::new();
    match cfg.experiment {
        Experiment::UnitCircle => {
            let losses = cfg.losses()?;
            let (rows, bayes) = unit_circle_table(gamma, &losses, &table_cfg).map_err(numeric)?;
            let path = cfg.output_dir.join("unit_circle.csv");
            let mut buf = Vec::new();
            write_table_csv(&rows, false, &mut buf).map_err(RunError::io(&path))?;
            fs::write(&path, buf).map_err(RunError::io(&path))?;
            outputs.push(path);

            let path = cfg.output_dir.join("unit_circle_bayes.csv");
            let body = format!("theta,risk\n{},{}\n", bayes.t_star, bayes.risk);
            fs::write(&path, body).map_err(RunError::io(&path))?;
            outputs.push(path);
        }
        Experiment::Segments => {
            let losses = cfg.losses()?;
            let rows = segments_table(gamma, &losses, &table_cfg).map_err(numeric)?;
            let path = cfg.output_dir.join("segments.csv");
            let mut buf = Vec::new();
            write_table_csv(&rows, true, &mut buf).map_err(RunError::io(&path))?;
            fs::write(&path, buf).map_err(RunError::io(&path))?;
            outputs.push(path);
        }
        Experiment::ConsistencyCurve => {
            let dist = Distribution::Segments(Segments::new(gamma));
            for loss in cfg.losses()? {
                let curve = consistency_experiment(
                    &dist,
                    &loss,
                    &cfg.sizes,
                    cfg.reps,
                    gamma,
                    cfg.grid_n,
                    cfg.seed,
                    cfg.n_samples,
                )
                .map_err(numeric)?;
                let path = cfg
                    .output_dir
                    .join(format!("consistency_{}.csv", file_ident(loss.name())));
                let mut buf = Vec::new();
                curve.write_csv(&mut buf).map_err(RunError::io(&path))?;
                fs::write(&path, buf).map_err(RunError::io(&path))?;
                outputs.push(path);
            }
        }
        Experiment::CalibrationReport => {
            let report = build_report(cfg, gamma)?;
            let path = cfg.output_dir.join("calibration_report.json");
            let body = serde_json::to_string_pretty(&report).expect("report serialization");
            fs::write(&path, body).map_err(RunError::io(&path))?;
            outputs.push(path);
        }
        Experiment::MarginOracle => {
            outputs.push(run_margin_oracle(cfg, gamma)?);
        }
    }

    let manifest = json!({
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_document(),
        "outputs": outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    });
    let path = cfg.output_dir.join("run_manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(RunError::io(&path))?;
    outputs.push(path);
    Ok(outputs)
}

fn file_ident(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn build_report(
    cfg: &ExperimentConfig,
    gamma: PerturbationBudget,
) -> Result<CalibrationReport, RunError> {
    let loss = parse_loss(&cfg.report.loss).map_err(|e| config_err(e.to_string()))?;
    let mut report = CalibrationReport {
        loss: cfg.report.loss.clone(),
        class: cfg.report.class.clone(),
        gamma: cfg.gamma,
        conditions: Vec::new(),
        epsilons: cfg.report.epsilons.clone(),
        deltas: Vec::new(),
        verdict: Verdict::Inconclusive,
        witnesses: Vec::new(),
    };

    match cfg.report.class.as_str() {
        "h_lin" => {
            report.verdict = classify_linear_surrogate(&loss, gamma);
            if let Ok(certified) = loss.clone().certified() {
                if let Ok(outcome) = check_linear_characterization(&certified, gamma) {
                    report.conditions = outcome.conditions;
                }
            }
            report.epsilons.clear();
        }
        "h_relu" => {
            let ctx = GlmCalibrationContext::new(LinkFn::Relu, cfg.report.g_bound, gamma)
                .map_err(|e| config_err(e.to_string()))?;
            report.verdict = classify_glm_surrogate(&loss, &ctx);
            if let Ok(certified) = loss.clone().certified() {
                if let Ok(outcome) = check_quasiconcave_characterization(&certified, &ctx) {
                    report.conditions = outcome.conditions;
                }
            }
            let table = GlmDeltaTable::build(&loss, &ctx, ETA_GRID_DEFAULT, T_GRID_DEFAULT)
                .map_err(numeric)?;
            for &eps in &report.epsilons {
                let (delta, witness) = table.delta_hat(eps).map_err(numeric)?;
                report.deltas.push(delta);
                if let Some(w) = witness {
                    report.witnesses.push(w);
                }
            }
        }
        "h_nn" => {
            let certified = loss
                .clone()
                .certified()
                .map_err(|e| config_err(e.to_string()))?;
            let family = NnFamily {
                dim: 2,
                units: cfg.report.units,
                lambda: cfg.report.lambda,
                w_bound: cfg.report.w_bound,
            };
            let budget = NnSearchBudget {
                seed: cfg.seed,
                ..Default::default()
            };
            let curve =
                pseudo_calibration_search(&certified, &family, gamma, &report.epsilons, &budget)
                    .map_err(numeric)?;
            if let Some(rho) = loss.rho() {
                let reach = family.lambda * family.w_bound * (1.0 - cfg.gamma);
                report.conditions.push(Condition {
                    name: "family_margin_reaches_rho".into(),
                    lhs: reach,
                    rhs: rho,
                    holds: reach >= rho,
                });
            }
            report.deltas = curve.deltas;
            report.verdict = curve.verdict;
            report.witnesses = curve.witnesses;
        }
        other => return Err(config_err(format!("unknown class `{other}`"))),
    }
    Ok(report)
}

/// Cross-check the closed-form margins against the numeric search on random
/// instances; a discrepancy beyond the configured tolerance is a runtime
/// failure (exit code 3).
fn run_margin_oracle(
    cfg: &ExperimentConfig,
    gamma: PerturbationBudget,
) -> Result<PathBuf, RunError> {
    let g = gamma.gamma();
    let search = SearchConfig {
        tol: cfg.oracle.tol,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut cursor = RngCursor::new(cfg.seed, 0x0A);
    let mut rows = String::from("case,kind,dim,gamma,closed_lower,closed_upper,num_lower,num_upper,abs_err\n");
    let mut max_err: f64 = 0.0;
    for case in 0..cfg.oracle.cases {
        let dim = cfg.oracle.dims[case % cfg.oracle.dims.len()];
        let mut w: Vec<f64> = (0..dim).map(|_| cursor.uniform(-1.0, 1.0)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        w.iter_mut().for_each(|v| *v /= norm);
        let mut x: Vec<f64> = (0..dim).map(|_| cursor.uniform(-1.0, 1.0)).collect();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        let radius = cursor.u01() * 0.999;
        x.iter_mut().for_each(|v| *v *= radius / xn);

        let (kind, closed, spec) = if case % 2 == 0 {
            let spec = HypothesisSpec::linear(w.clone()).map_err(numeric)?;
            let closed = margins_linear(&w, &x, g).map_err(numeric)?;
            ("linear", closed, spec)
        } else {
            let b = cursor.uniform(-0.5, 0.5);
            let spec = HypothesisSpec::generalized_linear(LinkFn::Relu, w.clone(), b, 2.0)
                .map_err(numeric)?;
            let closed = margins_glm(&spec, &x, g).map_err(numeric)?;
            ("glm_relu", closed, spec)
        };
        let num = margins_numeric(&spec, &x, g, &search).map_err(numeric)?;
        let err = (num.lower() - closed.lower())
            .abs()
            .max((num.upper() - closed.upper()).abs());
        max_err = max_err.max(err);
        rows.push_str(&format!(
            "{case},{kind},{dim},{g},{},{},{},{},{err}\n",
            closed.lower(),
            closed.upper(),
            num.lower(),
            num.upper()
        ));
    }
    let path = cfg.output_dir.join("margin_oracle.csv");
    fs::write(&path, rows).map_err(RunError::io(&path))?;
    if max_err > cfg.oracle.tol {
        return Err(RunError::Numeric(format!(
            "margin search disagrees with closed forms: max error {max_err} > tol {}",
            cfg.oracle.tol
        )));
    }
    Ok(path)
}
