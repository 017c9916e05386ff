//! Risk evaluation over the one-parameter linear class on the plane, grid
//! ERM, and the simulated-data experiments.
//!
//! Classifiers are `w(t) = (cos t, sin t)`. On this class the adversarial
//! 0/1 loss is `1_{y w.x <= gamma}`, and for the flip-circle distribution
//! with the coupling `gamma = cos(sigma/2)` the adversarial risk has an
//! exact closed form: the zero-sets of the two indicator terms are arcs of
//! length sigma, so the risk is a weighted arc-overlap with the integration
//! half-window.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{classify_linear_surrogate, Verdict};
use crate::distributions::{sample_stream, Distribution, DistributionError, SampleBatch};
use crate::losses::{MarginLoss, PerturbationBudget};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("grid must have at least 2 angles, got {0}")]
    BadGrid(usize),
    #[error("sigma = {0} is outside (0, pi)")]
    BadSigma(f64),
    #[error("gamma = {gamma} is not coupled to sigma = {sigma}: expected cos(sigma/2) = {expected}")]
    UncoupledGamma { sigma: f64, gamma: f64, expected: f64 },
    #[error("sizes must be non-empty and ascending")]
    BadSizes,
    #[error("reps must be >= 1")]
    BadReps,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Angle of a unit-norm linear classifier, canonicalized to [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearAngle(f64);

impl LinearAngle {
    pub fn new(t: f64) -> Self {
        Self(t.rem_euclid(TAU))
    }

    pub fn radians(&self) -> f64 {
        self.0
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.0.cos(), self.0.sin()]
    }
}

/// Per-sample signed-score coefficients: the margin of sample i at angle t
/// is `a_i cos t + b_i sin t` with `(a_i, b_i) = (y_i x1_i, y_i x2_i)`.
pub struct MarginBatch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl MarginBatch {
    pub fn from_batch(batch: &SampleBatch) -> Self {
        let mut a = Vec::with_capacity(batch.n);
        let mut b = Vec::with_capacity(batch.n);
        for (p, y) in batch.points.iter().zip(&batch.labels) {
            let ys = f64::from(*y);
            a.push(ys * p[0]);
            b.push(ys * p[1]);
        }
        Self { a, b }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Mean of `score(y w.x - shift)` over the batch, summed in fixed-size
    /// chunks so results do not depend on evaluation order.
    pub fn mean_score<F: Fn(f64) -> f64>(&self, angle: LinearAngle, shift: f64, score: F) -> f64 {
        let (c, s) = (angle.radians().cos(), angle.radians().sin());
        let mut total = 0.0;
        for (ca, cb) in self.a.chunks(4096).zip(self.b.chunks(4096)) {
            let mut part = 0.0;
            for (ai, bi) in ca.iter().zip(cb) {
                part += score(ai * c + bi * s - shift);
            }
            total += part;
        }
        total / self.len() as f64
    }

    /// Mean and standard error of `score(y w.x - shift)`.
    pub fn mean_score_with_stderr<F: Fn(f64) -> f64>(
        &self,
        angle: LinearAngle,
        shift: f64,
        score: F,
    ) -> (f64, f64) {
        let (c, s) = (angle.radians().cos(), angle.radians().sin());
        let n = self.len() as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for (ai, bi) in self.a.iter().zip(&self.b) {
            let v = score(ai * c + bi * s - shift);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Empirical surrogate risk of the angle-t classifier on a batch: the plain
/// margin risk `phi(y w.x)`, or the sup-based value `phi(y w.x - gamma)`
/// when `adversarial` is set (the linear closed form of the ball supremum).
/// With the 0/1 indicator loss and `adversarial`, this is the empirical
/// adversarial error `1_{y w.x <= gamma}`.
pub fn empirical_surrogate_risk(
    loss: &MarginLoss,
    t: LinearAngle,
    batch: &SampleBatch,
    adversarial: bool,
    gamma: PerturbationBudget,
) -> Result<f64, RiskError> {
    if batch.n == 0 {
        return Err(RiskError::EmptyBatch);
    }
    let shift = if adversarial { gamma.gamma() } else { 0.0 };
    Ok(MarginBatch::from_batch(batch).mean_score(t, shift, |m| loss.eval(m)))
}

/// Exact length of the intersection of the circular interval
/// `[start, start + len)` with `[arc, arc + arc_len)`, all mod 2pi.
fn circ_overlap(start: f64, len: f64, arc: f64, arc_len: f64) -> f64 {
    let rel = (arc - start).rem_euclid(TAU);
    let mut overlap = 0.0;
    // First piece: [rel, min(rel + arc_len, 2pi)).
    overlap += (rel + arc_len).min(TAU).min(len) - rel.min(len);
    // Wrapped remainder: [0, rel + arc_len - 2pi).
    let wrapped = (rel + arc_len - TAU).max(0.0);
    overlap += wrapped.min(len);
    overlap
}

/// Exact adversarial risk of the angle-t classifier on the flip circle with
/// parameter sigma, requiring the coupling `gamma = cos(sigma/2)`.
///
/// The 1/4-weighted indicator vanishes exactly on the arc of length sigma
/// centered at 0 and the 7/4-weighted one on the arc centered at
/// `pi - sigma`; integrating over the half-window starting at `-t` gives
/// `1 - (L_a + 7 L_b) / (8 pi)` with the two window/arc overlap lengths.
pub fn exact_adv_risk_flipcircle(
    sigma: f64,
    gamma: f64,
    t: LinearAngle,
) -> Result<f64, RiskError> {
    if !(sigma > 0.0 && sigma < PI) {
        return Err(RiskError::BadSigma(sigma));
    }
    let expected = (sigma / 2.0).cos();
    if (gamma - expected).abs() > 1e-10 {
        return Err(RiskError::UncoupledGamma {
            sigma,
            gamma,
            expected,
        });
    }
    let start = -t.radians();
    let la = circ_overlap(start, PI, -sigma / 2.0, sigma);
    let lb = circ_overlap(start, PI, PI - 1.5 * sigma, sigma);
    Ok(1.0 - (la + 7.0 * lb) / (8.0 * PI))
}

/// The `grid_n` uniform angles `2 pi k / grid_n`.
pub fn angle_grid(grid_n: usize) -> Vec<LinearAngle> {
    (0..grid_n)
        .map(|k| LinearAngle::new(TAU * k as f64 / grid_n as f64))
        .collect()
}

/// Minimize an objective over the uniform angle grid; ties break to the
/// smallest angle.
pub fn grid_minimize<F>(objective: F, grid_n: usize) -> Result<(LinearAngle, f64), RiskError>
where
    F: Fn(LinearAngle) -> f64 + Sync,
{
    let values = grid_values(&objective, grid_n)?;
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    Ok((angle_grid(grid_n)[best], values[best]))
}

fn grid_values<F>(objective: &F, grid_n: usize) -> Result<Vec<f64>, RiskError>
where
    F: Fn(LinearAngle) -> f64 + Sync,
{
    if grid_n < 2 {
        return Err(RiskError::BadGrid(grid_n));
    }
    let angles = angle_grid(grid_n);
    Ok(angles.par_iter().map(|&a| objective(a)).collect())
}

/// Minimize over the grid and report the midpoint of the largest circular
/// run of exact ties. Empirical risks of clipped losses can vanish on a
/// whole arc of angles; the arc midpoint is the generic minimizer, where the
/// boundary angle is an artifact of the tie-break.
pub fn grid_minimize_arc_mid<F>(
    objective: F,
    grid_n: usize,
) -> Result<(LinearAngle, f64), RiskError>
where
    F: Fn(LinearAngle) -> f64 + Sync,
{
    let values = grid_values(&objective, grid_n)?;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ties: Vec<bool> = values.iter().map(|v| *v == min).collect();
    let n = values.len();
    if ties.iter().all(|t| *t) {
        return Ok((angle_grid(grid_n)[0], min));
    }
    // Walk runs starting just past a non-tie so circular runs stay contiguous.
    let offset = ties.iter().position(|t| !*t).unwrap();
    let (mut best_start, mut best_len) = (0, 0);
    let (mut cur_start, mut cur_len) = (0, 0);
    for k in 0..n {
        let i = (offset + 1 + k) % n;
        if ties[i] {
            if cur_len == 0 {
                cur_start = i;
            }
            cur_len += 1;
            if cur_len > best_len {
                best_len = cur_len;
                best_start = cur_start;
            }
        } else {
            cur_len = 0;
        }
    }
    let mid = (best_start + best_len / 2) % n;
    Ok((angle_grid(grid_n)[mid], values[mid]))
}

/// One surrogate row of a risk table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub t_star: f64,
    pub surrogate_risk: f64,
    pub adversarial_risk: f64,
    pub n: usize,
    pub seed: u64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub surrogate: String,
    pub report: RiskReport,
    pub calibrated: Verdict,
}

/// Exact adversarial Bayes summary of the flip circle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesRow {
    pub t_star: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TableConfig {
    pub n_samples: usize,
    pub grid_n: usize,
    pub seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            grid_n: 4096,
            seed: 0,
        }
    }
}

const TRAIN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 0;

/// Flip-circle experiment: surrogate ERM against the exact adversarial risk.
///
/// The flip arc is recovered from the coupling `sigma = 2 arccos(gamma)`.
/// ERM minimizes the plain surrogate risk on the training batch; the
/// reported adversarial risk of each minimizer is exact.
pub fn unit_circle_table(
    gamma: PerturbationBudget,
    surrogates: &[MarginLoss],
    cfg: &TableConfig,
) -> Result<(Vec<TableRow>, BayesRow), RiskError> {
    let g = gamma.gamma();
    let sigma = 2.0 * g.acos();
    let dist = Distribution::FlipCircle(crate::distributions::FlipCircle::new(sigma)?);
    let train = sample_stream(&dist, cfg.n_samples, cfg.seed, TRAIN_STREAM)?;
    let margins = MarginBatch::from_batch(&train);

    let mut rows = Vec::with_capacity(surrogates.len());
    for loss in surrogates {
        let (t_star, surrogate_risk) =
            grid_minimize_arc_mid(|a| margins.mean_score(a, 0.0, |m| loss.eval(m)), cfg.grid_n)?;
        let adversarial_risk = exact_adv_risk_flipcircle(sigma, g, t_star)?;
        rows.push(TableRow {
            surrogate: loss.name().to_string(),
            report: RiskReport {
                t_star: t_star.radians(),
                surrogate_risk,
                adversarial_risk,
                n: cfg.n_samples,
                seed: cfg.seed,
                stderr: 0.0,
            },
            calibrated: classify_linear_surrogate(loss, gamma),
        });
    }

    let (bayes_t, bayes_risk) = grid_minimize(
        |a| exact_adv_risk_flipcircle(sigma, g, a).unwrap(),
        cfg.grid_n,
    )?;
    Ok((
        rows,
        BayesRow {
            t_star: bayes_t.radians(),
            risk: bayes_risk,
        },
    ))
}

/// Segments experiment: surrogate ERM on a training batch, scored on a
/// held-out evaluation batch with the empirical adversarial error.
pub fn segments_table(
    gamma: PerturbationBudget,
    surrogates: &[MarginLoss],
    cfg: &TableConfig,
) -> Result<Vec<TableRow>, RiskError> {
    let g = gamma.gamma();
    let dist = Distribution::Segments(crate::distributions::Segments::new(gamma));
    let train = sample_stream(&dist, cfg.n_samples, cfg.seed, TRAIN_STREAM)?;
    let eval = sample_stream(&dist, cfg.n_samples, cfg.seed, EVAL_STREAM)?;
    let train_margins = MarginBatch::from_batch(&train);
    let eval_margins = MarginBatch::from_batch(&eval);
    let zero_one = MarginLoss::zero_one();

    let mut rows = Vec::with_capacity(surrogates.len());
    for loss in surrogates {
        let (t_star, _) = grid_minimize_arc_mid(
            |a| train_margins.mean_score(a, 0.0, |m| loss.eval(m)),
            cfg.grid_n,
        )?;
        let surrogate_risk = eval_margins.mean_score(t_star, 0.0, |m| loss.eval(m));
        let (adversarial_risk, stderr) =
            eval_margins.mean_score_with_stderr(t_star, g, |m| zero_one.eval(m));
        rows.push(TableRow {
            surrogate: loss.name().to_string(),
            report: RiskReport {
                t_star: t_star.radians(),
                surrogate_risk,
                adversarial_risk,
                n: cfg.n_samples,
                seed: cfg.seed,
                stderr,
            },
            calibrated: classify_linear_surrogate(loss, gamma),
        });
    }
    Ok(rows)
}

/// Serialize table rows in Table-1 column order. Column 2 (the surrogate
/// risk) is included when `with_surrogate_risk` is set.
pub fn write_table_csv<W: std::io::Write>(
    rows: &[TableRow],
    with_surrogate_risk: bool,
    mut w: W,
) -> std::io::Result<()> {
    if with_surrogate_risk {
        writeln!(w, "surrogate,adv_risk,surrogate_risk,theta,calibrated,n,seed,stderr")?;
    } else {
        writeln!(w, "surrogate,adv_risk,theta,calibrated,n,seed,stderr")?;
    }
    for row in rows {
        let r = &row.report;
        let verdict = match row.calibrated {
            Verdict::Calibrated => "yes",
            Verdict::NotCalibrated => "no",
            Verdict::Inconclusive => "inconclusive",
        };
        if with_surrogate_risk {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                row.surrogate,
                r.adversarial_risk,
                r.surrogate_risk,
                r.t_star,
                verdict,
                r.n,
                r.seed,
                r.stderr
            )?;
        } else {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.surrogate, r.adversarial_risk, r.t_star, verdict, r.n, r.seed, r.stderr
            )?;
        }
    }
    Ok(())
}

/// Adversarial generalization of grid-ERM minimizers against sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyCurve {
    pub sizes: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ConsistencyCurve {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,mean,std")?;
        for ((n, mean), std) in self.sizes.iter().zip(&self.means).zip(&self.stds) {
            writeln!(w, "{n},{mean},{std}")?;
        }
        Ok(())
    }
}

/// For each training size, repeat ERM on fresh batches and score the
/// minimizer's adversarial risk on a shared held-out evaluation batch
/// (exactly, for the coupled flip circle). Training batch (size index s,
/// rep r) draws from stream `1 + s * reps + r`, so the full experiment is
/// reproducible and cells are independent.
#[allow(clippy::too_many_arguments)]
pub fn consistency_experiment(
    dist: &Distribution,
    surrogate: &MarginLoss,
    sizes: &[usize],
    reps: usize,
    gamma: PerturbationBudget,
    grid_n: usize,
    seed: u64,
    eval_n: usize,
) -> Result<ConsistencyCurve, RiskError> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(RiskError::BadSizes);
    }
    if reps == 0 {
        return Err(RiskError::BadReps);
    }
    let g = gamma.gamma();
    let zero_one = MarginLoss::zero_one();

    // Exact scoring on the coupled flip circle, held-out batch otherwise.
    let exact_sigma = match dist {
        Distribution::FlipCircle(fc) if (g - (fc.sigma() / 2.0).cos()).abs() <= 1e-10 => {
            Some(fc.sigma())
        }
        _ => None,
    };
    let eval_margins = if exact_sigma.is_none() {
        Some(MarginBatch::from_batch(&sample_stream(
            dist,
            eval_n,
            seed,
            EVAL_STREAM,
        )?))
    } else {
        None
    };

    let mut means = Vec::with_capacity(sizes.len());
    let mut stds = Vec::with_capacity(sizes.len());
    for (si, &n) in sizes.iter().enumerate() {
        let mut risks = Vec::with_capacity(reps);
        for rep in 0..reps {
            let stream = 1 + (si * reps + rep) as u64;
            let train = sample_stream(dist, n, seed, stream)?;
            let margins = MarginBatch::from_batch(&train);
            let (t_star, _) = grid_minimize_arc_mid(
                |a| margins.mean_score(a, 0.0, |m| surrogate.eval(m)),
                grid_n,
            )?;
            let risk = match (exact_sigma, &eval_margins) {
                (Some(sigma), _) => exact_adv_risk_flipcircle(sigma, g, t_star)?,
                (None, Some(eval)) => eval.mean_score(t_star, g, |m| zero_one.eval(m)),
                _ => unreachable!(),
            };
            risks.push(risk);
        }
        let mean = risks.iter().sum::<f64>() / reps as f64;
        let std = if reps > 1 {
            (risks.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (reps - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        means.push(mean);
        stds.push(std);
    }
    Ok(ConsistencyCurve {
        sizes: sizes.to_vec(),
        means,
        stds,
    })
}
