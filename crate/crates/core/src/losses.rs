//! Margin-based loss functions and numerical property certification.
//!
//! A [`MarginLoss`] is a scalar function `t -> phi(t)` applied to the signed
//! score `y * f(x)`. Each builtin declares analytic property flags (convex,
//! non-increasing, bounded, continuous, quasi-concave even); the flags are
//! re-checked numerically by [`verify_props`] because the calibration
//! checkers use them as theorem preconditions and must not trust a bare
//! declaration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default verification window. All builtins are piecewise-analytic with
/// breakpoints well inside this range.
pub const DEFAULT_VERIFY_DOMAIN: (f64, f64) = (-4.0, 4.0);
/// Default number of verification grid points.
pub const DEFAULT_VERIFY_GRID: usize = 401;
/// Tolerance for the midpoint convexity test and monotonicity checks.
pub const PROP_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("unknown loss identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("loss `{name}` requires parameter `{param}`")]
    MissingParameter { name: String, param: String },
    #[error("parameter `{param}` = {value} is out of range: {reason}")]
    BadParameter {
        param: String,
        value: f64,
        reason: String,
    },
    #[error("malformed loss descriptor `{descriptor}`: {reason}")]
    BadDescriptor { descriptor: String, reason: String },
    #[error("loss `{name}` failed certification of declared flags: {failures:?}")]
    CertificationFailed {
        name: String,
        failures: Vec<PropCheck>,
    },
    #[error("invalid verification request: {0}")]
    BadVerifyRequest(String),
}

/// Perturbation radius of the adversary's l2 ball, restricted to (0, 1) as
/// everywhere the input space is the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    gamma: f64,
}

impl PerturbationBudget {
    pub fn new(gamma: f64) -> Result<Self, LossError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LossError::BadParameter {
                param: "gamma".into(),
                value: gamma,
                reason: "perturbation budget must lie in (0, 1)".into(),
            });
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Declared analytic properties of a loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Props {
    pub convex: bool,
    pub non_increasing: bool,
    pub bounded: bool,
    pub continuous: bool,
    pub quasi_concave_even: bool,
}

/// The property being checked in a [`PropCheck`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prop {
    Convex,
    NonIncreasing,
    Bounded,
    Continuous,
    QuasiConcaveEven,
}

impl Props {
    fn has(&self, p: Prop) -> bool {
        match p {
            Prop::Convex => self.convex,
            Prop::NonIncreasing => self.non_increasing,
            Prop::Bounded => self.bounded,
            Prop::Continuous => self.continuous,
            Prop::QuasiConcaveEven => self.quasi_concave_even,
        }
    }
}

/// Closed form of a builtin loss. Keeping the forms in an enum (rather than
/// boxed closures) keeps `MarginLoss` cheap to clone, trivially `Send + Sync`,
/// and lets calibration checkers recover parameters such as the ramp width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossForm {
    /// max{0, 1 - t + 0.2}
    HingeShifted,
    /// min{1, max{0, (1 - t + 0.2) / 2}}
    RampShifted,
    /// 1 / (1 + e^(t - 0.2))
    SigmoidShifted,
    /// log2(1 + e^(0.2 - t))
    LogisticShifted,
    /// max{0, gamma/2 - t}
    Phi1 { gamma: f64 },
    /// min{1, max{0, 1 - t/rho}}
    RhoMargin { rho: f64 },
    /// max{0, 1 - t}
    HingePlain,
    /// log2(1 + e^(-t))
    LogisticPlain,
    /// 1 if t <= 0 else 0
    ZeroOne,
}

/// A margin-based loss with declared property flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginLoss {
    name: String,
    form: LossForm,
    props: Props,
}

const LN2: f64 = std::f64::consts::LN_2;

impl MarginLoss {
    /// Evaluate the loss at score `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self.form {
            LossForm::HingeShifted => (1.2 - t).max(0.0),
            LossForm::RampShifted => ((1.2 - t) / 2.0).clamp(0.0, 1.0),
            LossForm::SigmoidShifted => 1.0 / (1.0 + (t - 0.2).exp()),
            LossForm::LogisticShifted => (1.0 + (0.2 - t).exp()).ln() / LN2,
            LossForm::Phi1 { gamma } => (gamma / 2.0 - t).max(0.0),
            LossForm::RhoMargin { rho } => (1.0 - t / rho).clamp(0.0, 1.0),
            LossForm::HingePlain => (1.0 - t).max(0.0),
            LossForm::LogisticPlain => (1.0 + (-t).exp()).ln() / LN2,
            LossForm::ZeroOne => {
                if t <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn form(&self) -> &LossForm {
        &self.form
    }

    pub fn props(&self) -> Props {
        self.props
    }

    /// Width parameter when this is a ramp-family loss.
    pub fn rho(&self) -> Option<f64> {
        match self.form {
            LossForm::RhoMargin { rho } => Some(rho),
            _ => None,
        }
    }

    pub fn hinge_shifted() -> Self {
        Self {
            name: "hinge_shifted".into(),
            form: LossForm::HingeShifted,
            props: Props {
                convex: true,
                non_increasing: true,
                continuous: true,
                ..Props::default()
            },
        }
    }

    pub fn ramp_shifted() -> Self {
        Self {
            name: "ramp_shifted".into(),
            form: LossForm::RampShifted,
            props: Props {
                non_increasing: true,
                bounded: true,
                continuous: true,
                quasi_concave_even: true,
                ..Props::default()
            },
        }
    }

    pub fn sigmoid_shifted() -> Self {
        Self {
            name: "sigmoid_shifted".into(),
            form: LossForm::SigmoidShifted,
            props: Props {
                non_increasing: true,
                bounded: true,
                continuous: true,
                quasi_concave_even: true,
                ..Props::default()
            },
        }
    }

    pub fn logistic_shifted() -> Self {
        Self {
            name: "logistic_shifted".into(),
            form: LossForm::LogisticShifted,
            props: Props {
                convex: true,
                non_increasing: true,
                continuous: true,
                ..Props::default()
            },
        }
    }

    pub fn phi1(gamma: f64) -> Result<Self, LossError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LossError::BadParameter {
                param: "gamma".into(),
                value: gamma,
                reason: "phi1 shift requires gamma in (0, 1)".into(),
            });
        }
        Ok(Self {
            name: format!("phi1(gamma={gamma})"),
            form: LossForm::Phi1 { gamma },
            props: Props {
                convex: true,
                non_increasing: true,
                continuous: true,
                ..Props::default()
            },
        })
    }

    pub fn rho_margin(rho: f64) -> Result<Self, LossError> {
        if rho <= 0.0 || !rho.is_finite() {
            return Err(LossError::BadParameter {
                param: "rho".into(),
                value: rho,
                reason: "ramp width must be positive and finite".into(),
            });
        }
        Ok(Self {
            name: format!("rho_margin(rho={rho})"),
            form: LossForm::RhoMargin { rho },
            props: Props {
                non_increasing: true,
                bounded: true,
                continuous: true,
                quasi_concave_even: true,
                ..Props::default()
            },
        })
    }

    pub fn hinge_plain() -> Self {
        Self {
            name: "hinge_plain".into(),
            form: LossForm::HingePlain,
            props: Props {
                convex: true,
                non_increasing: true,
                continuous: true,
                ..Props::default()
            },
        }
    }

    pub fn logistic_plain() -> Self {
        Self {
            name: "logistic_plain".into(),
            form: LossForm::LogisticPlain,
            props: Props {
                convex: true,
                non_increasing: true,
                continuous: true,
                ..Props::default()
            },
        }
    }

    /// The 0/1 indicator `1_{t <= 0}`, used as the target loss in risk
    /// evaluation. Not part of the surrogate name set accepted by
    /// [`make_builtin`].
    pub fn zero_one() -> Self {
        Self {
            name: "zero_one".into(),
            form: LossForm::ZeroOne,
            props: Props {
                non_increasing: true,
                bounded: true,
                quasi_concave_even: true,
                ..Props::default()
            },
        }
    }

    /// Run [`verify_props`] on the default grid and wrap the loss as
    /// certified; fails if any declared flag does not verify.
    pub fn certified(self) -> Result<CertifiedLoss, LossError> {
        let report = verify_props(
            &self,
            DEFAULT_VERIFY_DOMAIN.0,
            DEFAULT_VERIFY_DOMAIN.1,
            DEFAULT_VERIFY_GRID,
        )?;
        if report.declared_ok() {
            Ok(CertifiedLoss { loss: self, report })
        } else {
            Err(LossError::CertificationFailed {
                name: self.name,
                failures: report.declared_failures(),
            })
        }
    }
}

/// Optional parameters for [`make_builtin`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinParams {
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
}

/// Construct a builtin surrogate by identifier. `phi2` is an alias for
/// `rho_margin`; both require `rho`, and `phi1` requires `gamma`.
pub fn make_builtin(name: &str, params: &BuiltinParams) -> Result<MarginLoss, LossError> {
    match name {
        "hinge_shifted" => Ok(MarginLoss::hinge_shifted()),
        "ramp_shifted" => Ok(MarginLoss::ramp_shifted()),
        "sigmoid_shifted" => Ok(MarginLoss::sigmoid_shifted()),
        "logistic_shifted" => Ok(MarginLoss::logistic_shifted()),
        "phi1" => {
            let gamma = params.gamma.ok_or_else(|| LossError::MissingParameter {
                name: name.into(),
                param: "gamma".into(),
            })?;
            MarginLoss::phi1(gamma)
        }
        "phi2" | "rho_margin" => {
            let rho = params.rho.ok_or_else(|| LossError::MissingParameter {
                name: name.into(),
                param: "rho".into(),
            })?;
            MarginLoss::rho_margin(rho)
        }
        "hinge_plain" => Ok(MarginLoss::hinge_plain()),
        "logistic_plain" => Ok(MarginLoss::logistic_plain()),
        other => Err(LossError::UnknownIdentifier(other.into())),
    }
}

/// Parse a loss descriptor of the form `name` or `name(param=value,...)`,
/// e.g. `rho_margin(rho=0.109)`.
pub fn parse_loss(descriptor: &str) -> Result<MarginLoss, LossError> {
    let descriptor = descriptor.trim();
    let bad = |reason: &str| LossError::BadDescriptor {
        descriptor: descriptor.into(),
        reason: reason.into(),
    };

    let (name, args) = match descriptor.find('(') {
        None => (descriptor, ""),
        Some(open) => {
            if !descriptor.ends_with(')') {
                return Err(bad("missing closing `)`"));
            }
            (
                &descriptor[..open],
                &descriptor[open + 1..descriptor.len() - 1],
            )
        }
    };
    if name.is_empty() {
        return Err(bad("empty loss name"));
    }

    let mut params = BuiltinParams::default();
    for pair in args.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| bad("parameters must be key=value"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad(&format!("parameter `{}` is not a number", key.trim())))?;
        match key.trim() {
            "gamma" => params.gamma = Some(value),
            "rho" => params.rho = Some(value),
            other => return Err(bad(&format!("unknown parameter `{other}`"))),
        }
    }
    make_builtin(name, &params)
}

/// Outcome of one numeric property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropCheck {
    pub prop: Prop,
    pub passed: bool,
    /// A point (or triple midpoint) where the check failed.
    pub witness: Option<f64>,
}

/// Numeric certification report covering all five properties, with a summary
/// of whether every *declared* flag verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropCheck>,
    declared: Props,
}

impl PropertyReport {
    pub fn check(&self, prop: Prop) -> &PropCheck {
        self.checks.iter().find(|c| c.prop == prop).unwrap()
    }

    pub fn passed(&self, prop: Prop) -> bool {
        self.check(prop).passed
    }

    /// True when every declared flag passed its numeric check.
    pub fn declared_ok(&self) -> bool {
        self.checks
            .iter()
            .all(|c| !self.declared.has(c.prop) || c.passed)
    }

    pub fn declared_failures(&self) -> Vec<PropCheck> {
        self.checks
            .iter()
            .filter(|c| self.declared.has(c.prop) && !c.passed)
            .cloned()
            .collect()
    }
}

/// A loss whose declared flags have passed numeric verification. Theorem
/// checkers accept only certified losses.
#[derive(Debug, Clone)]
pub struct CertifiedLoss {
    loss: MarginLoss,
    report: PropertyReport,
}

impl CertifiedLoss {
    pub fn loss(&self) -> &MarginLoss {
        &self.loss
    }

    pub fn report(&self) -> &PropertyReport {
        &self.report
    }

    /// Certified-and-declared flag lookup.
    pub fn is(&self, prop: Prop) -> bool {
        self.loss.props.has(prop) && self.report.passed(prop)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.loss.eval(t)
    }

    pub fn name(&self) -> &str {
        self.loss.name()
    }
}

/// Numerically check all five property flags of `loss` on a uniform grid
/// over `[lo, hi]`.
///
/// Convexity uses the midpoint inequality over every equally spaced grid
/// triple; quasi-concavity of `s(t) = phi(t) + phi(-t)` is checked as
/// unimodality (no strict interior dip); boundedness probes far outside the
/// window; continuity bisects the steepest grid cell and flags a jump that
/// does not vanish with the interval.
pub fn verify_props(
    loss: &MarginLoss,
    lo: f64,
    hi: f64,
    grid_n: usize,
) -> Result<PropertyReport, LossError> {
    if grid_n < 3 {
        return Err(LossError::BadVerifyRequest(format!(
            "grid_n must be >= 3, got {grid_n}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(LossError::BadVerifyRequest(format!(
            "interval [{lo}, {hi}] must be finite and non-degenerate"
        )));
    }

    let grid = linspace(lo, hi, grid_n);
    let vals: Vec<f64> = grid.iter().map(|&t| loss.eval(t)).collect();

    let mut checks = Vec::with_capacity(5);

    // Convexity: phi(mid) <= (phi(a) + phi(c)) / 2 for every symmetric triple.
    let mut convex = PropCheck {
        prop: Prop::Convex,
        passed: true,
        witness: None,
    };
    'outer: for d in 1..grid_n / 2 + 1 {
        for i in 0..grid_n.saturating_sub(2 * d) {
            let (a, b, c) = (vals[i], vals[i + d], vals[i + 2 * d]);
            if b > 0.5 * (a + c) + PROP_TOL {
                convex.passed = false;
                convex.witness = Some(grid[i + d]);
                break 'outer;
            }
        }
    }
    checks.push(convex);

    // Non-increasing.
    let mut noninc = PropCheck {
        prop: Prop::NonIncreasing,
        passed: true,
        witness: None,
    };
    for i in 0..grid_n - 1 {
        if vals[i] < vals[i + 1] - PROP_TOL {
            noninc.passed = false;
            noninc.witness = Some(grid[i + 1]);
            break;
        }
    }
    checks.push(noninc);

    // Bounded: a growing tail (hinge, logistic) keeps growing between the
    // near and far probes, while a bounded loss levels off.
    let window_max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let near = window_max.max(loss.eval(-1e3)).max(loss.eval(1e3));
    let mut bounded = PropCheck {
        prop: Prop::Bounded,
        passed: true,
        witness: None,
    };
    for &probe in &[-1e6, 1e6] {
        let far = loss.eval(probe);
        if far > 2.0 * near + 1.0 || far.is_nan() {
            bounded.passed = false;
            bounded.witness = Some(probe);
            break;
        }
    }
    checks.push(bounded);

    // Continuity: bisect every cell with nontrivial variation; a genuine jump
    // survives shrinking the interval to ~1e-12.
    let mut continuous = PropCheck {
        prop: Prop::Continuous,
        passed: true,
        witness: None,
    };
    for i in 0..grid_n - 1 {
        if (vals[i + 1] - vals[i]).abs() <= PROP_TOL {
            continue;
        }
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, mut fb) = (vals[i], vals[i + 1]);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let fm = loss.eval(m);
            if (fm - fa).abs() >= (fb - fm).abs() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        if (fb - fa).abs() > 1e-6 && b - a < 1e-11 {
            continuous.passed = false;
            continuous.witness = Some(0.5 * (a + b));
            break;
        }
    }
    checks.push(continuous);

    // Quasi-concave even: s(t) = phi(t) + phi(-t) must be unimodal on the
    // grid, i.e. non-decreasing up to its max and non-increasing after.
    let s: Vec<f64> = grid.iter().map(|&t| loss.eval(t) + loss.eval(-t)).collect();
    let peak = s
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut qce = PropCheck {
        prop: Prop::QuasiConcaveEven,
        passed: true,
        witness: None,
    };
    for i in 0..peak {
        if s[i] > s[i + 1] + PROP_TOL {
            qce.passed = false;
            qce.witness = Some(grid[i + 1]);
            break;
        }
    }
    if qce.passed {
        for i in peak..grid_n - 1 {
            if s[i] < s[i + 1] - PROP_TOL {
                qce.passed = false;
                qce.witness = Some(grid[i]);
                break;
            }
        }
    }
    checks.push(qce);

    Ok(PropertyReport {
        checks,
        declared: loss.props,
    })
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}
