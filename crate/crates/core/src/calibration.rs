//! Inner risks, pseudo-calibration functions, and iff calibration checkers.
//!
//! The target loss throughout is the adversarial 0/1 loss at budget gamma.
//! For the classes handled here its pseudo-minimal inner risk is
//! `min{eta, 1-eta}`, so a surrogate is pseudo-calibrated exactly when its
//! excess inner risk stays bounded away from zero on the constraint sets
//! where the adversarial excess risk is at least epsilon. For generalized
//! linear models those sets reduce to score intervals pinned by
//! `A_upper = sup_a g(a) - g(a - gamma)` and
//! `A_lower = inf_a g(a) - g(a + gamma)`; for networks they are expressed
//! through the sign pattern of the ball margins.
//!
//! Verdict policy: numeric infima on a grid can only overestimate the true
//! calibration function, so an estimate below [`DELTA_TOL`] is evidence of
//! non-calibration, while "calibrated" verdicts come only from the analytic
//! iff conditions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypotheses::{
    margins_numeric, AdversarialMargins, HypothesisError, HypothesisSpec, LinkFn, SearchConfig,
};
use crate::losses::{linspace, CertifiedLoss, LossError, MarginLoss, PerturbationBudget, Prop};
use crate::distributions::RngCursor;

/// Default eta discretization (includes 0, 1/2, 1 exactly).
pub const ETA_GRID_DEFAULT: usize = 201;
/// Default score discretization per branch interval.
pub const T_GRID_DEFAULT: usize = 2001;
/// Grid used to evaluate the link extremes A_upper / A_lower.
pub const ALPHA_GRID_DEFAULT: usize = 1001;
/// Estimates below this are treated as a zero calibration function.
pub const DELTA_TOL: f64 = 1e-6;
/// Tolerance for the analytic equality condition of the characterization.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("eta = {0} is outside [0, 1]")]
    BadEta(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("empty score domain: lo {0} > hi {1}")]
    EmptyDomain(f64, f64),
    #[error("grid must have at least 2 points, got {0}")]
    BadGrid(usize),
    #[error("loss `{loss}` lacks certified precondition: {missing}")]
    MissingPrecondition { loss: String, missing: String },
    #[error("theorem precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("search budget must be positive")]
    EmptySearchBudget,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
}

/// A conditional-risk query: class-probability eta and reduced score t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    eta: f64,
    score: f64,
}

impl RiskQuery {
    pub fn new(eta: f64, score: f64) -> Result<Self, CalibrationError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(CalibrationError::BadEta(eta));
        }
        Ok(Self { eta, score })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// Inner risk of a margin loss at score t: `eta phi(t) + (1-eta) phi(-t)`.
#[inline]
pub fn inner_risk(loss: &MarginLoss, q: &RiskQuery) -> f64 {
    q.eta * loss.eval(q.score) + (1.0 - q.eta) * loss.eval(-q.score)
}

#[inline]
fn inner_risk_at(loss: &MarginLoss, eta: f64, t: f64) -> f64 {
    eta * loss.eval(t) + (1.0 - eta) * loss.eval(-t)
}

/// Inner risk of the sup-based surrogate at margins `m`:
/// `eta phi(lower) + (1-eta) phi(-upper)`. Requires a certified
/// non-increasing loss so the sup = inf reduction applies.
pub fn inner_risk_adv(
    loss: &CertifiedLoss,
    m: &AdversarialMargins,
    eta: f64,
) -> Result<f64, CalibrationError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(CalibrationError::BadEta(eta));
    }
    if !loss.is(Prop::NonIncreasing) {
        return Err(CalibrationError::MissingPrecondition {
            loss: loss.name().into(),
            missing: "non_increasing".into(),
        });
    }
    Ok(eta * loss.eval(m.lower()) + (1.0 - eta) * loss.eval(-m.upper()))
}

/// Pseudo-minimal inner risk of the adversarial 0/1 loss: `min{eta, 1-eta}`,
/// valid for any class able to separate a point with either sign over the
/// whole ball.
pub fn minimal_inner_risk_adv_01(eta: f64) -> Result<f64, CalibrationError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(CalibrationError::BadEta(eta));
    }
    Ok(eta.min(1.0 - eta))
}

/// Infimum of the inner risk over scores `t` in `[lo, hi]`.
///
/// For losses certifying {quasi-concave even, bounded, continuous,
/// non-increasing} the infimum over an interval is attained at an endpoint,
/// so the value is exact; otherwise it falls back to a grid infimum.
pub fn minimal_inner_risk_interval(
    loss: &MarginLoss,
    lo: f64,
    hi: f64,
    eta: f64,
    grid_n: usize,
) -> Result<f64, CalibrationError> {
    if lo > hi {
        return Err(CalibrationError::EmptyDomain(lo, hi));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(CalibrationError::BadEta(eta));
    }
    if grid_n < 2 {
        return Err(CalibrationError::BadGrid(grid_n));
    }
    if lo == hi {
        return Ok(inner_risk_at(loss, eta, lo));
    }
    if let Ok(cl) = loss.clone().certified() {
        if cl.is(Prop::QuasiConcaveEven)
            && cl.is(Prop::Bounded)
            && cl.is(Prop::Continuous)
            && cl.is(Prop::NonIncreasing)
        {
            return Ok(inner_risk_at(loss, eta, lo).min(inner_risk_at(loss, eta, hi)));
        }
    }
    Ok(linspace(lo, hi, grid_n)
        .into_iter()
        .map(|t| inner_risk_at(loss, eta, t))
        .fold(f64::INFINITY, f64::min))
}

/// Score-domain geometry of a generalized-linear class: the link, its bound
/// G, and the extremes of `g(a) - g(a -/+ gamma)` over `a in [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmCalibrationContext {
    pub link: LinkFn,
    pub g_bound: f64,
    pub gamma: f64,
    a_upper: f64,
    a_lower: f64,
    t_lo: f64,
    t_hi: f64,
}

impl GlmCalibrationContext {
    pub fn new(
        link: LinkFn,
        g_bound: f64,
        gamma: PerturbationBudget,
    ) -> Result<Self, CalibrationError> {
        let gamma = gamma.gamma();
        link.check_monotone()?;
        let top = link.eval(1.0 + gamma);
        if top >= g_bound || top.is_nan() {
            return Err(CalibrationError::PreconditionFailed(format!(
                "g(1 + gamma) = {top} must be < G = {g_bound}"
            )));
        }
        let bottom = link.eval(-1.0 - gamma);
        if bottom <= -g_bound || bottom.is_nan() {
            return Err(CalibrationError::PreconditionFailed(format!(
                "g(-1 - gamma) = {bottom} must be > -G = {}",
                -g_bound
            )));
        }
        let grid = linspace(-1.0, 1.0, ALPHA_GRID_DEFAULT);
        let mut a_upper = f64::NEG_INFINITY;
        let mut a_lower = f64::INFINITY;
        for &a in &grid {
            a_upper = a_upper.max(link.eval(a) - link.eval(a - gamma));
            a_lower = a_lower.min(link.eval(a) - link.eval(a + gamma));
        }
        debug_assert!(a_lower <= 1e-12 && a_upper >= -1e-12);
        Ok(Self {
            link,
            g_bound,
            gamma,
            a_upper,
            a_lower,
            t_lo: link.eval(-1.0) - g_bound,
            t_hi: link.eval(1.0) + g_bound,
        })
    }

    pub fn a_upper(&self) -> f64 {
        self.a_upper
    }

    pub fn a_lower(&self) -> f64 {
        self.a_lower
    }

    /// Full score domain `[g(-1) - G, g(1) + G]`.
    pub fn t_domain(&self) -> (f64, f64) {
        (self.t_lo, self.t_hi)
    }
}

/// Per-eta constrained infima of the inner risk over the score grids.
struct EtaSlice {
    eta: f64,
    full: f64,
    middle: f64,
    lower_side: f64,
    upper_side: f64,
    middle_arg: f64,
    lower_arg: f64,
    upper_arg: f64,
}

/// Precomputed table of constrained infima; evaluating the pseudo-calibration
/// function at any epsilon is then a scan over eta.
pub struct GlmDeltaTable {
    slices: Vec<EtaSlice>,
}

impl GlmDeltaTable {
    pub fn build(
        loss: &MarginLoss,
        ctx: &GlmCalibrationContext,
        eta_grid: usize,
        t_grid: usize,
    ) -> Result<Self, CalibrationError> {
        if eta_grid < 3 || t_grid < 2 {
            return Err(CalibrationError::BadGrid(eta_grid.min(t_grid)));
        }
        // Union of per-branch uniform grids; branch endpoints and 0 are exact
        // members so infima anchored there carry no discretization bias.
        let mut ts: Vec<f64> = Vec::with_capacity(4 * t_grid + 5);
        ts.extend(linspace(ctx.t_lo, ctx.t_hi, t_grid));
        ts.extend(linspace(ctx.a_lower, ctx.a_upper, t_grid));
        ts.extend(linspace(ctx.t_lo, ctx.a_upper, t_grid));
        ts.extend(linspace(ctx.a_lower, ctx.t_hi, t_grid));
        for lm in [ctx.a_lower, ctx.a_upper, ctx.t_lo, ctx.t_hi, 0.0] {
            if (ctx.t_lo..=ctx.t_hi).contains(&lm) {
                ts.push(lm);
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();

        let phis: Vec<(f64, f64)> = ts.iter().map(|&t| (loss.eval(t), loss.eval(-t))).collect();

        let etas = linspace(0.0, 1.0, eta_grid);
        let mut slices = Vec::with_capacity(eta_grid);
        for eta in etas {
            let mut slice = EtaSlice {
                eta,
                full: f64::INFINITY,
                middle: f64::INFINITY,
                lower_side: f64::INFINITY,
                upper_side: f64::INFINITY,
                middle_arg: f64::NAN,
                lower_arg: f64::NAN,
                upper_arg: f64::NAN,
            };
            for (&t, &(p, q)) in ts.iter().zip(&phis) {
                let c = eta * p + (1.0 - eta) * q;
                slice.full = slice.full.min(c);
                if t >= ctx.a_lower && t <= ctx.a_upper && c < slice.middle {
                    slice.middle = c;
                    slice.middle_arg = t;
                }
                if t <= ctx.a_upper && c < slice.lower_side {
                    slice.lower_side = c;
                    slice.lower_arg = t;
                }
                if t >= ctx.a_lower && c < slice.upper_side {
                    slice.upper_side = c;
                    slice.upper_arg = t;
                }
            }
            slices.push(slice);
        }
        Ok(Self { slices })
    }

    /// delta-hat(eps): infimum over eta of the branch excess risk; +infinity
    /// when every eta falls in the unconstrained branch.
    pub fn delta_hat(&self, eps: f64) -> Result<(f64, Option<Witness>), CalibrationError> {
        if eps <= 0.0 {
            return Err(CalibrationError::BadEpsilon(eps));
        }
        let mut best = f64::INFINITY;
        let mut witness = None;
        for s in &self.slices {
            let spread = (2.0 * s.eta - 1.0).abs();
            let (constrained, arg) = if eps > s.eta.max(1.0 - s.eta) {
                continue; // no (f, x) can realize an eps excess: +infinity branch
            } else if spread < eps {
                (s.middle, s.middle_arg)
            } else if s.eta > 0.5 {
                (s.lower_side, s.lower_arg)
            } else {
                (s.upper_side, s.upper_arg)
            };
            let delta = constrained - s.full;
            if delta < best {
                best = delta;
                witness = Some(Witness::Score {
                    eta: s.eta,
                    t: arg,
                });
            }
        }
        Ok((best, witness))
    }
}

/// Pseudo-calibration function estimate for a margin loss against the
/// adversarial 0/1 loss on a generalized-linear class.
pub fn pseudo_calibration_glm(
    loss: &MarginLoss,
    ctx: &GlmCalibrationContext,
    eps: f64,
    eta_grid: usize,
    t_grid: usize,
) -> Result<f64, CalibrationError> {
    let table = GlmDeltaTable::build(loss, ctx, eta_grid, t_grid)?;
    Ok(table.delta_hat(eps)?.0)
}

/// Calibration verdict taxonomy. `Inconclusive` is an honest outcome for
/// searches that can only falsify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Calibrated,
    NotCalibrated,
    Inconclusive,
}

/// One analytic condition evaluated by a checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checker outcome: the verdict plus the evaluated conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
}

/// A location where a calibration-function infimum is (near-)attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Reduced-score witness (generalized-linear classes).
    Score { eta: f64, t: f64 },
    /// Function/point witness (network search).
    Point {
        eta: f64,
        candidate: String,
        x: Vec<f64>,
        lower: f64,
        upper: f64,
    },
}

/// Estimated calibration curve `eps -> delta-hat(eps)` with verdict and
/// witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}

impl CalibrationCurve {
    /// Check the structural invariants: deltas non-negative and
    /// non-decreasing in epsilon.
    pub fn validate(&self) -> Result<(), String> {
        for w in self.deltas.windows(2) {
            if w[1] < w[0] - 1e-12 {
                return Err(format!("deltas decrease: {} -> {}", w[0], w[1]));
            }
        }
        if let Some(d) = self.deltas.iter().find(|d| **d < -1e-12) {
            return Err(format!("negative delta {d}"));
        }
        Ok(())
    }
}

fn require(loss: &CertifiedLoss, prop: Prop, what: &str) -> Result<(), CalibrationError> {
    if loss.is(prop) {
        Ok(())
    } else {
        Err(CalibrationError::MissingPrecondition {
            loss: loss.name().into(),
            missing: what.into(),
        })
    }
}

/// Exact iff characterization of pseudo-calibration for bounded, continuous,
/// non-increasing, quasi-concave even losses on a generalized-linear class:
/// the symmetrized loss must agree at the two score-domain endpoints and
/// exceed that level strictly at `A_upper` and `A_lower`.
pub fn check_quasiconcave_characterization(
    loss: &CertifiedLoss,
    ctx: &GlmCalibrationContext,
) -> Result<CheckOutcome, CalibrationError> {
    require(loss, Prop::Bounded, "bounded")?;
    require(loss, Prop::Continuous, "continuous")?;
    require(loss, Prop::NonIncreasing, "non_increasing")?;
    require(loss, Prop::QuasiConcaveEven, "quasi_concave_even")?;

    let g = |z: f64| ctx.link.eval(z);
    let (g_m1, g_p1) = (g(-1.0), g(1.0));
    let bound = ctx.g_bound;
    if loss.eval(g_m1 - bound) <= loss.eval(bound - g_m1) {
        return Err(CalibrationError::PreconditionFailed(format!(
            "phi(g(-1) - G) = {} must exceed phi(G - g(-1)) = {}",
            loss.eval(g_m1 - bound),
            loss.eval(bound - g_m1)
        )));
    }
    if g_m1 + g_p1 < 0.0 {
        return Err(CalibrationError::PreconditionFailed(format!(
            "g(-1) + g(1) = {} must be >= 0",
            g_m1 + g_p1
        )));
    }

    let sym = |t: f64| loss.eval(t) + loss.eval(-t);
    let endpoint_level = sym(bound - g_m1);
    let equality = Condition {
        name: "endpoint_symmetrized_levels_equal".into(),
        lhs: endpoint_level,
        rhs: sym(g_p1 + bound),
        holds: (endpoint_level - sym(g_p1 + bound)).abs() <= EQ_TOL,
    };
    let interior_level = sym(ctx.a_upper).min(sym(ctx.a_lower));
    let strict = Condition {
        name: "perturbation_extremes_strictly_above_endpoints".into(),
        lhs: interior_level,
        rhs: endpoint_level,
        holds: interior_level > endpoint_level + EQ_TOL,
    };
    let verdict = if equality.holds && strict.holds {
        Verdict::Calibrated
    } else {
        Verdict::NotCalibrated
    };
    Ok(CheckOutcome {
        verdict,
        conditions: vec![equality, strict],
    })
}

/// Iff characterization for the linear class: with `B = phi(1) + phi(-1)`,
/// a bounded, non-increasing, quasi-concave even loss with
/// `phi(-1) > phi(1)` is pseudo-calibrated iff `phi(gamma) + phi(-gamma) > B`.
pub fn check_linear_characterization(
    loss: &CertifiedLoss,
    gamma: PerturbationBudget,
) -> Result<CheckOutcome, CalibrationError> {
    require(loss, Prop::Bounded, "bounded")?;
    require(loss, Prop::NonIncreasing, "non_increasing")?;
    require(loss, Prop::QuasiConcaveEven, "quasi_concave_even")?;
    if loss.eval(-1.0) <= loss.eval(1.0) {
        return Err(CalibrationError::PreconditionFailed(format!(
            "phi(-1) = {} must exceed phi(1) = {}",
            loss.eval(-1.0),
            loss.eval(1.0)
        )));
    }
    let g = gamma.gamma();
    let lhs = loss.eval(g) + loss.eval(-g);
    let rhs = loss.eval(1.0) + loss.eval(-1.0);
    let condition = Condition {
        name: "symmetrized_loss_at_gamma_exceeds_unit_level".into(),
        lhs,
        rhs,
        holds: lhs > rhs,
    };
    let verdict = if condition.holds {
        Verdict::Calibrated
    } else {
        Verdict::NotCalibrated
    };
    Ok(CheckOutcome {
        verdict,
        conditions: vec![condition],
    })
}

/// Verdict for a surrogate on the linear class, combining the convex
/// negative result with the quasi-concave even characterization.
pub fn classify_linear_surrogate(loss: &MarginLoss, gamma: PerturbationBudget) -> Verdict {
    let Ok(certified) = loss.clone().certified() else {
        return Verdict::Inconclusive;
    };
    if certified.is(Prop::Convex) {
        return Verdict::NotCalibrated;
    }
    match check_linear_characterization(&certified, gamma) {
        Ok(outcome) => outcome.verdict,
        Err(_) => Verdict::Inconclusive,
    }
}

/// Verdict for a surrogate on a generalized-linear class.
pub fn classify_glm_surrogate(loss: &MarginLoss, ctx: &GlmCalibrationContext) -> Verdict {
    let Ok(certified) = loss.clone().certified() else {
        return Verdict::Inconclusive;
    };
    if certified.is(Prop::Convex) && certified.is(Prop::Continuous) {
        return Verdict::NotCalibrated;
    }
    match check_quasiconcave_characterization(&certified, ctx) {
        Ok(outcome) => outcome.verdict,
        Err(_) => Verdict::Inconclusive,
    }
}

/// One-layer ReLU network family parameters for the falsification search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnFamily {
    pub dim: usize,
    pub units: usize,
    pub lambda: f64,
    pub w_bound: f64,
}

/// Budget for [`pseudo_calibration_search`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NnSearchBudget {
    /// Random function/point draws added to the seeded candidates.
    pub random_candidates: usize,
    pub eta_grid: usize,
    pub seed: u64,
    /// Margin search settings for random candidates.
    pub margins: SearchConfig,
}

impl Default for NnSearchBudget {
    fn default() -> Self {
        Self {
            random_candidates: 48,
            eta_grid: ETA_GRID_DEFAULT,
            seed: 0,
            margins: SearchConfig::default(),
        }
    }
}

struct Candidate {
    desc: String,
    x: Vec<f64>,
    margins: AdversarialMargins,
}

/// Randomized falsification of pseudo-calibration for the sup-based
/// surrogate of `loss` on a one-layer ReLU network family.
///
/// The candidate pool always contains the zero network and the same-sign
/// constructions `u_j = +/-Lambda/n`, `w_j = W x` whose ball margins are
/// known in closed form; random draws within the (Lambda, W) bounds are
/// scored by [`margins_numeric`]. The returned curve is a lower-confidence
/// estimate of delta-hat per epsilon: a value below [`DELTA_TOL`] is a
/// non-calibration witness, while "calibrated" is only issued from the
/// analytic margin condition `Lambda W (1 - gamma) >= rho`.
pub fn pseudo_calibration_search(
    loss: &CertifiedLoss,
    family: &NnFamily,
    gamma: PerturbationBudget,
    epsilons: &[f64],
    budget: &NnSearchBudget,
) -> Result<CalibrationCurve, CalibrationError> {
    if !loss.is(Prop::NonIncreasing) {
        return Err(CalibrationError::MissingPrecondition {
            loss: loss.name().into(),
            missing: "non_increasing".into(),
        });
    }
    if epsilons.is_empty() || budget.random_candidates == 0 || budget.eta_grid < 3 {
        return Err(CalibrationError::EmptySearchBudget);
    }
    for &eps in epsilons {
        if eps <= 0.0 {
            return Err(CalibrationError::BadEpsilon(eps));
        }
    }
    let g = gamma.gamma();
    let d = family.dim;

    let mut pool: Vec<Candidate> = Vec::new();
    let mut axis = vec![0.0; d];
    axis[0] = 1.0;

    // Zero network: both margins vanish at any point of the annulus.
    let x_mid: Vec<f64> = axis.iter().map(|v| v * (1.0 + g) / 2.0).collect();
    pool.push(Candidate {
        desc: "zero".into(),
        x: x_mid.clone(),
        margins: AdversarialMargins::degenerate(0.0),
    });

    // Same-sign constructions: f(x') = +/- Lambda W (x . x')_+ has exact
    // margins +/- Lambda W r (r -/+ gamma) at ||x|| = r > gamma.
    for r in [1.0, (1.0 + g) / 2.0] {
        let x: Vec<f64> = axis.iter().map(|v| v * r).collect();
        let m_in = family.lambda * family.w_bound * r * (r - g);
        let m_out = family.lambda * family.w_bound * r * (r + g);
        pool.push(Candidate {
            desc: format!("aligned_positive(r={r})"),
            x: x.clone(),
            margins: AdversarialMargins::new(m_in, m_out)?,
        });
        pool.push(Candidate {
            desc: format!("aligned_negative(r={r})"),
            x,
            margins: AdversarialMargins::new(-m_out, -m_in)?,
        });
    }

    // Random specs and points within the family bounds.
    let mut cursor = RngCursor::new(budget.seed, 0xCA11);
    for i in 0..budget.random_candidates {
        let scale = cursor.u01();
        let mut u: Vec<f64> = (0..family.units)
            .map(|_| cursor.uniform(-1.0, 1.0))
            .collect();
        let l1: f64 = u.iter().map(|v| v.abs()).sum::<f64>().max(1e-12);
        u.iter_mut()
            .for_each(|v| *v *= scale * family.lambda / l1);
        let mut w_flat = Vec::with_capacity(family.units * d);
        for _ in 0..family.units {
            let mut row: Vec<f64> = (0..d).map(|_| cursor.uniform(-1.0, 1.0)).collect();
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let target = family.w_bound * cursor.u01();
            row.iter_mut().for_each(|v| *v *= target / n);
            w_flat.extend(row);
        }
        let spec =
            HypothesisSpec::one_layer_nn(u, w_flat, d, family.lambda, family.w_bound)?;
        let r = g + (1.0 - g) * cursor.u01().max(1e-3);
        let mut x: Vec<f64> = (0..d).map(|_| cursor.uniform(-1.0, 1.0)).collect();
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        x.iter_mut().for_each(|v| *v *= r / n);
        let margins = margins_numeric(&spec, &x, g, &budget.margins)?;
        pool.push(Candidate {
            desc: format!("random[{i}]"),
            x,
            margins,
        });
    }

    // Per-eta constrained infima over the pool, per the margin-sign branch
    // structure of the pseudo-calibration function.
    let etas = linspace(0.0, 1.0, budget.eta_grid);
    let mut deltas = Vec::with_capacity(epsilons.len());
    let mut witnesses = Vec::new();
    for &eps in epsilons {
        let mut best = f64::INFINITY;
        let mut attained: Vec<(f64, f64, &Candidate)> = Vec::new();
        for &eta in &etas {
            if eps > eta.max(1.0 - eta) {
                continue;
            }
            let spread = (2.0 * eta - 1.0).abs();
            let mut full = f64::INFINITY;
            let mut constrained = f64::INFINITY;
            let mut arg: Option<&Candidate> = None;
            for cand in &pool {
                let (lo, hi) = (cand.margins.lower(), cand.margins.upper());
                let c = eta * loss.eval(lo) + (1.0 - eta) * loss.eval(-hi);
                full = full.min(c);
                let in_branch = if spread < eps {
                    lo <= 0.0 && hi >= 0.0
                } else if eta > 0.5 {
                    lo <= 0.0
                } else {
                    hi >= 0.0
                };
                if in_branch && c < constrained {
                    constrained = c;
                    arg = Some(cand);
                }
            }
            let delta = constrained - full;
            best = best.min(delta);
            if let Some(cand) = arg {
                attained.push((delta, eta, cand));
            }
        }
        deltas.push(best.max(0.0));
        // Near-attaining witnesses; the symmetric point eta = 1/2 is the
        // canonical representative, so order by distance from it.
        attained.retain(|(d, _, _)| *d <= best + DELTA_TOL);
        attained.sort_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()));
        for (_, eta, cand) in attained.into_iter().take(8) {
            witnesses.push(Witness::Point {
                eta,
                candidate: cand.desc.clone(),
                x: cand.x.clone(),
                lower: cand.margins.lower(),
                upper: cand.margins.upper(),
            });
        }
    }

    let analytic_margin = family.lambda * family.w_bound * (1.0 - g);
    let verdict = match loss.loss().rho() {
        Some(rho) if analytic_margin >= rho => Verdict::Calibrated,
        _ if deltas.iter().any(|d| *d <= DELTA_TOL) => Verdict::NotCalibrated,
        _ => Verdict::Inconclusive,
    };

    Ok(CalibrationCurve {
        epsilons: epsilons.to_vec(),
        deltas,
        verdict,
        witnesses,
    })
}

/// JSON calibration report emitted by the experiment front end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub loss: String,
    pub class: String,
    pub gamma: f64,
    pub conditions: Vec<Condition>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}
