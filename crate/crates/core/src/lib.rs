//! Calibration and consistency analysis of adversarial surrogate losses.
//!
//! The library has five parts:
//!
//! - [`losses`]: margin-based surrogates with numerically certified
//!   property flags;
//! - [`hypotheses`]: linear, generalized-linear, and one-layer ReLU
//!   hypothesis classes with closed-form or searched ball margins;
//! - [`calibration`]: inner risks, pseudo-calibration functions, and the
//!   iff calibration checkers for the named loss families;
//! - [`distributions`]: the simulated data constructions with exact
//!   conditional probabilities and seeded counter-based sampling;
//! - [`risk`]: exact and Monte Carlo risk evaluation on the unit circle,
//!   grid ERM, and the consistency-curve experiment.
//!
//! ```
//! use advcal::calibration::{check_linear_characterization, Verdict};
//! use advcal::losses::{MarginLoss, PerturbationBudget};
//!
//! // The ramp of width rho is calibrated against the adversarial 0/1 loss
//! // on unit-norm linear models exactly when rho exceeds the budget.
//! let gamma = PerturbationBudget::new(0.25)?;
//! let ramp = MarginLoss::rho_margin(0.5)?.certified()?;
//! assert_eq!(
//!     check_linear_characterization(&ramp, gamma)?.verdict,
//!     Verdict::Calibrated
//! );
//!
//! let narrow = MarginLoss::rho_margin(0.25)?.certified()?;
//! assert_eq!(
//!     check_linear_characterization(&narrow, gamma)?.verdict,
//!     Verdict::NotCalibrated
//! );
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod calibration;
pub mod distributions;
pub mod hypotheses;
pub mod losses;
pub mod risk;

pub use calibration::{
    check_linear_characterization, check_quasiconcave_characterization, inner_risk,
    inner_risk_adv, minimal_inner_risk_adv_01, minimal_inner_risk_interval,
    pseudo_calibration_glm, pseudo_calibration_search, CalibrationCurve, CalibrationError,
    CalibrationReport, GlmCalibrationContext, NnFamily, RiskQuery, Verdict, Witness,
};
pub use distributions::{
    eta_of, sample, sample_stream, CounterRng, Distribution, DistributionError, FlipCircle,
    RngCursor, SampleBatch, Segments,
};
pub use hypotheses::{
    adversarial_loss, margins_glm, margins_linear, margins_numeric, sup_surrogate,
    AdversarialMargins, HypothesisError, HypothesisSpec, LinkFn, SearchConfig,
};
pub use losses::{
    make_builtin, parse_loss, verify_props, BuiltinParams, CertifiedLoss, LossError, MarginLoss,
    PerturbationBudget, Prop, PropertyReport, Props,
};
pub use risk::{
    consistency_experiment, empirical_surrogate_risk, exact_adv_risk_flipcircle, grid_minimize,
    ConsistencyCurve, LinearAngle, RiskError, RiskReport, TableConfig, TableRow,
};
