//! Hypothesis classes and adversarial margins over the l2 ball.
//!
//! The pair `(lower, upper) = (inf, sup)` of `f` over the gamma-ball at `x`
//! is the sufficient statistic for every supremum-based loss: when `phi` is
//! non-increasing, `sup phi(y f(x')) = phi(inf y f(x'))`, which reduces to
//! `phi(lower)` for `y = +1` and `phi(-upper)` for `y = -1`.
//!
//! Margins are closed-form for linear and monotone generalized-linear
//! models (the extremes are attained at the axial perturbations
//! `x -/+ gamma w`) and approximated by multistart projected local search
//! for one-layer ReLU networks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{CounterRng, RngCursor};
use crate::losses::{CertifiedLoss, Prop};

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("weight vector must have unit l2 norm (got {0})")]
    NonUnitWeight(f64),
    #[error("offset |b| = {b} exceeds bound G = {bound}")]
    OffsetOutOfBound { b: f64, bound: f64 },
    #[error("link function is not non-decreasing (witness z = {0})")]
    NonMonotoneLink(f64),
    #[error("||u||_1 = {norm} exceeds Lambda = {bound}")]
    UnitWeightsOutOfBound { norm: f64, bound: f64 },
    #[error("row {row} has norm {norm} exceeding W = {bound}")]
    RowNormOutOfBound { row: usize, norm: f64, bound: f64 },
    #[error("row-major weight buffer length {len} is not a multiple of dim {dim}")]
    RaggedRows { len: usize, dim: usize },
    #[error("dimension mismatch: spec expects {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is outside the input domain: {0}")]
    DomainViolation(String),
    #[error("perturbation radius {0} must lie in [0, 1)")]
    BadRadius(f64),
    #[error("margins are inverted: lower {lower} > upper {upper}")]
    InvertedMargins { lower: f64, upper: f64 },
    #[error("label must be +1 or -1 (got {0})")]
    BadLabel(i8),
    #[error("loss `{0}` is not certified non-increasing")]
    NotNonIncreasing(String),
    #[error("invalid search config: {0}")]
    BadSearchConfig(String),
    #[error("expected a generalized-linear spec")]
    NotGeneralizedLinear,
}

const UNIT_NORM_TOL: f64 = 1e-10;

/// Scalar link for generalized-linear models. `Affine` with a negative scale
/// is the stock example of a non-monotone link rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "link", rename_all = "snake_case")]
pub enum LinkFn {
    Identity,
    Relu,
    Affine { scale: f64, offset: f64 },
}

impl LinkFn {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            LinkFn::Identity => z,
            LinkFn::Relu => z.max(0.0),
            LinkFn::Affine { scale, offset } => scale * z + offset,
        }
    }

    /// Grid check that the link is non-decreasing; returns a witness on
    /// failure.
    pub fn check_monotone(&self) -> Result<(), HypothesisError> {
        let grid = crate::losses::linspace(-4.0, 4.0, 401);
        for w in grid.windows(2) {
            if self.eval(w[0]) > self.eval(w[1]) + 1e-12 {
                return Err(HypothesisError::NonMonotoneLink(w[1]));
            }
        }
        Ok(())
    }
}

/// One function from a hypothesis class, serialized as a tagged variant with
/// flat 64-bit float arrays (network rows are row-major in `w_flat`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum HypothesisSpec {
    Linear {
        w: Vec<f64>,
    },
    GeneralizedLinear {
        link: LinkFn,
        w: Vec<f64>,
        b: f64,
        g_bound: f64,
    },
    OneLayerNn {
        u: Vec<f64>,
        w_flat: Vec<f64>,
        dim: usize,
        lambda: f64,
        w_bound: f64,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl HypothesisSpec {
    pub fn linear(w: Vec<f64>) -> Result<Self, HypothesisError> {
        let spec = HypothesisSpec::Linear { w };
        spec.validate()?;
        Ok(spec)
    }

    pub fn generalized_linear(
        link: LinkFn,
        w: Vec<f64>,
        b: f64,
        g_bound: f64,
    ) -> Result<Self, HypothesisError> {
        let spec = HypothesisSpec::GeneralizedLinear {
            link,
            w,
            b,
            g_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn one_layer_nn(
        u: Vec<f64>,
        w_flat: Vec<f64>,
        dim: usize,
        lambda: f64,
        w_bound: f64,
    ) -> Result<Self, HypothesisError> {
        let spec = HypothesisSpec::OneLayerNn {
            u,
            w_flat,
            dim,
            lambda,
            w_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The identically-zero network (empty unit list).
    pub fn zero_nn(dim: usize, lambda: f64, w_bound: f64) -> Self {
        HypothesisSpec::OneLayerNn {
            u: Vec::new(),
            w_flat: Vec::new(),
            dim,
            lambda,
            w_bound,
        }
    }

    /// Re-check the class invariants (use after deserializing).
    pub fn validate(&self) -> Result<(), HypothesisError> {
        match self {
            HypothesisSpec::Linear { w } => {
                let n = norm2(w);
                if (n - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(HypothesisError::NonUnitWeight(n));
                }
            }
            HypothesisSpec::GeneralizedLinear {
                link,
                w,
                b,
                g_bound,
            } => {
                let n = norm2(w);
                if (n - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(HypothesisError::NonUnitWeight(n));
                }
                if b.abs() > *g_bound {
                    return Err(HypothesisError::OffsetOutOfBound {
                        b: *b,
                        bound: *g_bound,
                    });
                }
                link.check_monotone()?;
            }
            HypothesisSpec::OneLayerNn {
                u,
                w_flat,
                dim,
                lambda,
                w_bound,
            } => {
                if w_flat.len() != u.len() * dim {
                    return Err(HypothesisError::RaggedRows {
                        len: w_flat.len(),
                        dim: *dim,
                    });
                }
                let l1: f64 = u.iter().map(|v| v.abs()).sum();
                if l1 > *lambda + 1e-12 {
                    return Err(HypothesisError::UnitWeightsOutOfBound {
                        norm: l1,
                        bound: *lambda,
                    });
                }
                for (j, row) in w_flat.chunks_exact(*dim).enumerate() {
                    let n = norm2(row);
                    if n > *w_bound + 1e-12 {
                        return Err(HypothesisError::RowNormOutOfBound {
                            row: j,
                            norm: n,
                            bound: *w_bound,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            HypothesisSpec::Linear { w } => w.len(),
            HypothesisSpec::GeneralizedLinear { w, .. } => w.len(),
            HypothesisSpec::OneLayerNn { dim, .. } => *dim,
        }
    }

    /// Evaluate f(x).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            HypothesisSpec::Linear { w } => dot(w, x),
            HypothesisSpec::GeneralizedLinear { link, w, b, .. } => link.eval(dot(w, x)) + b,
            HypothesisSpec::OneLayerNn { u, w_flat, dim, .. } => u
                .iter()
                .zip(w_flat.chunks_exact(*dim))
                .map(|(uj, row)| uj * dot(row, x).max(0.0))
                .sum(),
        }
    }

    /// Unit directions along which the class's ball extremes are likely to
    /// sit: the weight axis for (generalized) linear models, the rows for
    /// networks. Flat ReLU regions stall subgradient steps, so these probes
    /// carry the search across them.
    fn probe_directions(&self) -> Vec<Vec<f64>> {
        let normalize = |v: &[f64]| -> Option<Vec<f64>> {
            let n = norm2(v);
            (n > 1e-12).then(|| v.iter().map(|x| x / n).collect())
        };
        match self {
            HypothesisSpec::Linear { w } => normalize(w).into_iter().collect(),
            HypothesisSpec::GeneralizedLinear { w, .. } => normalize(w).into_iter().collect(),
            HypothesisSpec::OneLayerNn { w_flat, dim, .. } => w_flat
                .chunks_exact(*dim)
                .take(64)
                .filter_map(normalize)
                .collect(),
        }
    }

    /// A subgradient of f at x, written into `out`.
    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self {
            HypothesisSpec::Linear { w } => out.copy_from_slice(w),
            HypothesisSpec::GeneralizedLinear { link, w, .. } => {
                let z = dot(w, x);
                let slope = match *link {
                    LinkFn::Identity => 1.0,
                    LinkFn::Relu => {
                        if z > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    LinkFn::Affine { scale, .. } => scale,
                };
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = slope * wi;
                }
            }
            HypothesisSpec::OneLayerNn { u, w_flat, dim, .. } => {
                for (uj, row) in u.iter().zip(w_flat.chunks_exact(*dim)) {
                    if dot(row, x) > 0.0 {
                        for (o, wi) in out.iter_mut().zip(row) {
                            *o += uj * wi;
                        }
                    }
                }
            }
        }
    }
}

/// Inf/sup of f over the gamma-ball at x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialMargins {
    lower: f64,
    upper: f64,
}

impl AdversarialMargins {
    pub fn new(lower: f64, upper: f64) -> Result<Self, HypothesisError> {
        if lower > upper {
            return Err(HypothesisError::InvertedMargins { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn degenerate(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

fn check_radius(gamma: f64) -> Result<(), HypothesisError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(HypothesisError::BadRadius(gamma));
    }
    Ok(())
}

/// Margins of a unit-norm linear model: `(w.x - gamma, w.x + gamma)`.
pub fn margins_linear(
    w: &[f64],
    x: &[f64],
    gamma: f64,
) -> Result<AdversarialMargins, HypothesisError> {
    check_radius(gamma)?;
    let n = norm2(w);
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(HypothesisError::NonUnitWeight(n));
    }
    if w.len() != x.len() {
        return Err(HypothesisError::DimensionMismatch {
            expected: w.len(),
            got: x.len(),
        });
    }
    let z = dot(w, x);
    AdversarialMargins::new(z - gamma, z + gamma)
}

/// Margins of a monotone generalized-linear model: the extremes sit at the
/// axial perturbations, giving `(g(w.x - gamma) + b, g(w.x + gamma) + b)`.
pub fn margins_glm(
    spec: &HypothesisSpec,
    x: &[f64],
    gamma: f64,
) -> Result<AdversarialMargins, HypothesisError> {
    check_radius(gamma)?;
    let HypothesisSpec::GeneralizedLinear { link, w, b, .. } = spec else {
        return Err(HypothesisError::NotGeneralizedLinear);
    };
    spec.validate()?;
    if w.len() != x.len() {
        return Err(HypothesisError::DimensionMismatch {
            expected: w.len(),
            got: x.len(),
        });
    }
    let z = dot(w, x);
    AdversarialMargins::new(link.eval(z - gamma) + b, link.eval(z + gamma) + b)
}

/// Configuration for [`margins_numeric`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Random restarts of projected local ascent/descent.
    pub starts: usize,
    /// Steps per restart.
    pub steps: usize,
    /// Initial step length as a fraction of gamma.
    pub step_frac: f64,
    /// Step decay on a failed step.
    pub decay: f64,
    /// Deterministic boundary probe count.
    pub boundary_points: usize,
    /// Certified slack of the returned margins on the test corpus.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            steps: 200,
            step_frac: 0.1,
            decay: 0.5,
            boundary_points: 256,
            tol: 1e-3,
            seed: 0,
        }
    }
}

/// Approximate inf/sup of `f` over the gamma-ball at `x` by multistart
/// projected subgradient ascent/descent plus a deterministic boundary grid.
/// Every candidate is feasible, so `lower >= exact inf` and
/// `upper <= exact sup`; the config's restart/probe budget keeps the gap
/// within `tol` on the test corpus.
pub fn margins_numeric(
    f: &HypothesisSpec,
    x: &[f64],
    gamma: f64,
    cfg: &SearchConfig,
) -> Result<AdversarialMargins, HypothesisError> {
    check_radius(gamma)?;
    if cfg.tol <= 0.0 {
        return Err(HypothesisError::BadSearchConfig(format!(
            "tol must be positive, got {}",
            cfg.tol
        )));
    }
    let d = f.dim();
    if x.len() != d {
        return Err(HypothesisError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    f.validate()?;
    let r = norm2(x);
    match f {
        HypothesisSpec::OneLayerNn { .. } => {
            if !(r > gamma && r <= 1.0 + 1e-12) {
                return Err(HypothesisError::DomainViolation(format!(
                    "one-layer networks require gamma < ||x|| <= 1 (gamma = {gamma}, ||x|| = {r})"
                )));
            }
        }
        _ => {
            if r > 1.0 + 1e-12 {
                return Err(HypothesisError::DomainViolation(format!(
                    "||x|| = {r} exceeds the unit ball"
                )));
            }
        }
    }

    if gamma == 0.0 {
        return Ok(AdversarialMargins::degenerate(f.eval(x)));
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut probe = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };

    // Center, axial, and class-direction probes.
    probe(f.eval(x));
    let mut pt = x.to_vec();
    for i in 0..d {
        for s in [-1.0, 1.0] {
            pt.copy_from_slice(x);
            pt[i] += s * gamma;
            probe(f.eval(&pt));
        }
    }
    for dir in f.probe_directions() {
        for s in [-1.0, 1.0] {
            for (p, (xi, di)) in pt.iter_mut().zip(x.iter().zip(&dir)) {
                *p = xi + s * gamma * di;
            }
            probe(f.eval(&pt));
        }
    }

    // Deterministic boundary grid: uniform angles in 2-D, a Fibonacci
    // sphere in 3-D, Gaussian directions beyond.
    let rng = CounterRng::new(cfg.seed, 0xB0);
    for k in 0..cfg.boundary_points {
        let dir = boundary_direction(d, k, cfg.boundary_points, &rng);
        for (p, (xi, di)) in pt.iter_mut().zip(x.iter().zip(&dir)) {
            *p = xi + gamma * di;
        }
        probe(f.eval(&pt));
    }

    // Multistart projected subgradient ascent and descent.
    let mut grad = vec![0.0; d];
    for start in 0..cfg.starts {
        for maximize in [false, true] {
            let mut cursor = RngCursor::new(cfg.seed, 0xA0 + 2 * start as u64 + maximize as u64);
            let mut cur = random_in_ball(x, gamma, d, &mut cursor);
            let mut cur_val = f.eval(&cur);
            probe(cur_val);
            let mut step = cfg.step_frac * gamma;
            for _ in 0..cfg.steps {
                f.subgradient(&cur, &mut grad);
                let gnorm = norm2(&grad);
                if gnorm < 1e-15 {
                    // Flat region: restart from a fresh point in the ball.
                    cur = random_in_ball(x, gamma, d, &mut cursor);
                    cur_val = f.eval(&cur);
                    probe(cur_val);
                    step = cfg.step_frac * gamma;
                    continue;
                }
                let sign = if maximize { 1.0 } else { -1.0 };
                for (p, (c, g)) in pt.iter_mut().zip(cur.iter().zip(&grad)) {
                    *p = c + sign * step * g / gnorm;
                }
                project_to_ball(&mut pt, x, gamma);
                let val = f.eval(&pt);
                probe(val);
                let improved = if maximize { val > cur_val } else { val < cur_val };
                if improved {
                    cur.copy_from_slice(&pt);
                    cur_val = val;
                } else {
                    step *= cfg.decay;
                    if step < 1e-14 {
                        break;
                    }
                }
            }
        }
    }

    AdversarialMargins::new(lo, hi)
}

fn boundary_direction(d: usize, k: usize, n: usize, rng: &CounterRng) -> Vec<f64> {
    match d {
        1 => vec![if k.is_multiple_of(2) { 1.0 } else { -1.0 }],
        2 => {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vec![theta.cos(), theta.sin()]
        }
        3 => {
            // Golden-angle Fibonacci spiral on the sphere.
            let t = k as f64 + 0.5;
            let z = 1.0 - 2.0 * t / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = std::f64::consts::PI * (1.0 + 5.0_f64.sqrt()) * t;
            vec![r * phi.cos(), r * phi.sin(), z]
        }
        _ => {
            // Deterministic Gaussian direction via Box-Muller on indexed draws.
            let mut dir = vec![0.0; d];
            let base = (k * d) as u64 * 2;
            for (i, v) in dir.iter_mut().enumerate() {
                let u1 = rng.u01(base + 2 * i as u64).max(1e-12);
                let u2 = rng.u01(base + 2 * i as u64 + 1);
                *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            let n = norm2(&dir).max(1e-12);
            dir.iter_mut().for_each(|v| *v /= n);
            dir
        }
    }
}

fn random_in_ball(x: &[f64], gamma: f64, d: usize, cursor: &mut RngCursor) -> Vec<f64> {
    // Gaussian direction scaled by u^(1/d) for a uniform-ish ball draw.
    let mut p = vec![0.0; d];
    for v in p.iter_mut() {
        let u1 = cursor.u01().max(1e-12);
        let u2 = cursor.u01();
        *v = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
    let n = norm2(&p).max(1e-12);
    let radius = gamma * cursor.u01().powf(1.0 / d as f64);
    for (v, xi) in p.iter_mut().zip(x) {
        *v = xi + radius * *v / n;
    }
    p
}

fn project_to_ball(p: &mut [f64], center: &[f64], gamma: f64) {
    let mut dist2 = 0.0;
    for (pi, ci) in p.iter().zip(center) {
        dist2 += (pi - ci) * (pi - ci);
    }
    let dist = dist2.sqrt();
    if dist > gamma {
        let scale = gamma / dist;
        for (pi, ci) in p.iter_mut().zip(center) {
            *pi = ci + (*pi - ci) * scale;
        }
    }
}

/// Adversarial 0/1 loss: 1 iff some point of the ball is misclassified,
/// i.e. `inf over the ball of y f(x') <= 0`.
pub fn adversarial_loss(m: &AdversarialMargins, y: i8) -> Result<u8, HypothesisError> {
    match y {
        1 => Ok(u8::from(m.lower <= 0.0)),
        -1 => Ok(u8::from(m.upper >= 0.0)),
        other => Err(HypothesisError::BadLabel(other)),
    }
}

/// Supremum-based surrogate value `sup over the ball of phi(y f(x'))`, which
/// for certified non-increasing `phi` equals `phi(lower)` at `y = +1` and
/// `phi(-upper)` at `y = -1`.
pub fn sup_surrogate(
    loss: &CertifiedLoss,
    m: &AdversarialMargins,
    y: i8,
) -> Result<f64, HypothesisError> {
    if !loss.is(Prop::NonIncreasing) {
        return Err(HypothesisError::NotNonIncreasing(loss.name().to_string()));
    }
    match y {
        1 => Ok(loss.eval(m.lower)),
        -1 => Ok(loss.eval(-m.upper)),
        other => Err(HypothesisError::BadLabel(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MarginLoss;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = norm2(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn linear_margins_closed_form() {
        let w = vec![1.0, 0.0];
        let m = margins_linear(&w, &[0.5, 0.3], 0.2).unwrap();
        assert_eq!((m.lower(), m.upper()), (0.3, 0.7));
        let m = margins_linear(&w, &[0.0, 0.9], 0.2).unwrap();
        assert_eq!((m.lower(), m.upper()), (-0.2, 0.2));
        let m = margins_linear(&w, &[0.5, 0.0], 0.0).unwrap();
        assert_eq!((m.lower(), m.upper()), (0.5, 0.5));
        assert!(margins_linear(&[2.0, 0.0], &[0.5, 0.0], 0.2).is_err());
    }

    #[test]
    fn glm_margins_closed_form() {
        let relu = HypothesisSpec::generalized_linear(LinkFn::Relu, vec![1.0, 0.0], 0.0, 2.0)
            .unwrap();
        let m = margins_glm(&relu, &[0.1, 0.0], 0.3).unwrap();
        assert_eq!((m.lower(), m.upper()), (0.0, 0.4));

        let ident = HypothesisSpec::generalized_linear(LinkFn::Identity, vec![1.0, 0.0], 0.1, 2.0)
            .unwrap();
        let m = margins_glm(&ident, &[0.5, 0.0], 0.2).unwrap();
        assert!((m.lower() - 0.4).abs() < 1e-15 && (m.upper() - 0.8).abs() < 1e-15);

        let relu_b = HypothesisSpec::generalized_linear(LinkFn::Relu, vec![1.0, 0.0], 0.05, 2.0)
            .unwrap();
        let m = margins_glm(&relu_b, &[-1.0, 0.0], 0.3).unwrap();
        assert_eq!((m.lower(), m.upper()), (0.05, 0.05));
    }

    #[test]
    fn non_monotone_link_rejected() {
        let bad = HypothesisSpec::GeneralizedLinear {
            link: LinkFn::Affine {
                scale: -1.0,
                offset: 0.0,
            },
            w: vec![1.0, 0.0],
            b: 0.0,
            g_bound: 2.0,
        };
        assert!(matches!(
            bad.validate(),
            Err(HypothesisError::NonMonotoneLink(_))
        ));
        assert!(margins_glm(&bad, &[0.1, 0.0], 0.3).is_err());
    }

    #[test]
    fn adversarial_loss_indicator() {
        let m = AdversarialMargins::new(-0.1, 0.2).unwrap();
        assert_eq!(adversarial_loss(&m, 1).unwrap(), 1);
        let m = AdversarialMargins::new(0.3, 0.7).unwrap();
        assert_eq!(adversarial_loss(&m, 1).unwrap(), 0);
        let m = AdversarialMargins::new(-0.5, -0.1).unwrap();
        assert_eq!(adversarial_loss(&m, -1).unwrap(), 0);
        assert!(adversarial_loss(&m, 0).is_err());
        assert!(adversarial_loss(&m, 2).is_err());
        // The event is "<= 0" exactly: a zero margin counts as an error.
        let m = AdversarialMargins::new(0.0, 0.5).unwrap();
        assert_eq!(adversarial_loss(&m, 1).unwrap(), 1);
    }

    #[test]
    fn sup_surrogate_values() {
        let ramp = MarginLoss::rho_margin(1.0).unwrap().certified().unwrap();
        let m = AdversarialMargins::new(0.3, 0.7).unwrap();
        assert!((sup_surrogate(&ramp, &m, 1).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(sup_surrogate(&ramp, &m, -1).unwrap(), 1.0);
        let hinge = MarginLoss::hinge_plain().certified().unwrap();
        let m = AdversarialMargins::new(-0.2, 0.2).unwrap();
        assert!((sup_surrogate(&hinge, &m, 1).unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn sup_equals_ball_brute_force_on_linear() {
        // sup over the ball of phi(y f(x')) vs a dense boundary sample; for
        // linear f the extremes are attained on the boundary.
        let losses = [
            MarginLoss::rho_margin(1.0).unwrap().certified().unwrap(),
            MarginLoss::hinge_plain().certified().unwrap(),
            MarginLoss::sigmoid_shifted().certified().unwrap(),
        ];
        let mut cursor = RngCursor::new(2024, 0);
        for case in 0..2000 {
            let w = unit(vec![cursor.uniform(-1.0, 1.0), cursor.uniform(-1.0, 1.0)]);
            let r = cursor.u01().sqrt() * 0.999;
            let phi = cursor.uniform(0.0, std::f64::consts::TAU);
            let x = [r * phi.cos(), r * phi.sin()];
            let gamma = cursor.uniform(0.01, 0.9);
            let y: i8 = if cursor.u01() < 0.5 { 1 } else { -1 };
            let m = margins_linear(&w, &x, gamma).unwrap();
            let loss = &losses[case % losses.len()];
            let sup = sup_surrogate(loss, &m, y).unwrap();
            let mut brute = f64::NEG_INFINITY;
            for k in 0..1000 {
                let a = std::f64::consts::TAU * k as f64 / 1000.0;
                let xp = [x[0] + gamma * a.cos(), x[1] + gamma * a.sin()];
                brute = brute.max(loss.eval(f64::from(y) * dot(&w, &xp)));
            }
            assert!(brute <= sup + 1e-12, "case {case}");
            assert!(sup - brute <= 1e-4, "case {case}: {sup} vs {brute}");
        }
    }

    #[test]
    fn numeric_margins_match_closed_forms() {
        let cfg = SearchConfig::default();
        let mut cursor = RngCursor::new(7, 0);
        for case in 0..300 {
            let w = unit(vec![cursor.uniform(-1.0, 1.0), cursor.uniform(-1.0, 1.0)]);
            let r = cursor.u01().sqrt() * 0.999;
            let phi = cursor.uniform(0.0, std::f64::consts::TAU);
            let x = [r * phi.cos(), r * phi.sin()];
            let gamma = cursor.uniform(0.05, 0.8);

            let lin = HypothesisSpec::linear(w.clone()).unwrap();
            let exact = margins_linear(&w, &x, gamma).unwrap();
            let num = margins_numeric(&lin, &x, gamma, &cfg).unwrap();
            assert!((num.lower() - exact.lower()).abs() <= cfg.tol, "case {case}");
            assert!((num.upper() - exact.upper()).abs() <= cfg.tol, "case {case}");

            let b = cursor.uniform(-0.5, 0.5);
            let glm =
                HypothesisSpec::generalized_linear(LinkFn::Relu, w.clone(), b, 2.0).unwrap();
            let exact = margins_glm(&glm, &x, gamma).unwrap();
            let num = margins_numeric(&glm, &x, gamma, &cfg).unwrap();
            assert!((num.lower() - exact.lower()).abs() <= cfg.tol, "case {case}");
            assert!((num.upper() - exact.upper()).abs() <= cfg.tol, "case {case}");
        }
    }

    #[test]
    fn numeric_margins_on_witness_network() {
        // Units u_j = Lambda/n with rows W*x give f(x') = Lambda W (x.x')_+,
        // whose exact ball margins are Lambda W (||x||^2 -/+ gamma ||x||)_+.
        let (lambda, w_bound, n) = (2.0, 1.5, 4);
        let x = [0.6, 0.48];
        let t = norm2(&x);
        let gamma = 0.3;
        let mut w_flat = Vec::new();
        for _ in 0..n {
            w_flat.extend(x.iter().map(|v| w_bound * v));
        }
        let spec = HypothesisSpec::one_layer_nn(
            vec![lambda / n as f64; n],
            w_flat,
            2,
            lambda,
            w_bound,
        )
        .unwrap();
        let cfg = SearchConfig::default();
        let m = margins_numeric(&spec, &x, gamma, &cfg).unwrap();
        let exact_lo = lambda * w_bound * t * (t - gamma);
        let exact_hi = lambda * w_bound * t * (t + gamma);
        assert!(m.lower() >= exact_lo - cfg.tol);
        assert!((m.lower() - exact_lo).abs() <= cfg.tol, "{} vs {exact_lo}", m.lower());
        assert!((m.upper() - exact_hi).abs() <= cfg.tol, "{} vs {exact_hi}", m.upper());
    }

    #[test]
    fn numeric_margins_match_dense_grid_on_random_network() {
        let mut cursor = RngCursor::new(99, 0);
        let n_units = 2;
        let mut u = Vec::new();
        let mut w_flat = Vec::new();
        for _ in 0..n_units {
            u.push(cursor.uniform(-0.2, 0.2));
            w_flat.push(cursor.uniform(-0.5, 0.5));
            w_flat.push(cursor.uniform(-0.5, 0.5));
        }
        let spec = HypothesisSpec::one_layer_nn(u, w_flat, 2, 1.0, 1.0).unwrap();
        let x = [0.5, 0.4];
        let gamma = 0.1;
        let m = margins_numeric(&spec, &x, gamma, &SearchConfig::default()).unwrap();

        // Dense polar grid over the ball, ~1e5 points.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for ir in 0..=200 {
            let r = gamma * ir as f64 / 200.0;
            for ia in 0..500 {
                let a = std::f64::consts::TAU * ia as f64 / 500.0;
                let v = spec.eval(&[x[0] + r * a.cos(), x[1] + r * a.sin()]);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!((m.lower() - lo).abs() <= 1e-3, "{} vs {lo}", m.lower());
        assert!((m.upper() - hi).abs() <= 1e-3, "{} vs {hi}", m.upper());
    }

    #[test]
    fn adversarial_loss_monotone_in_gamma() {
        let mut cursor = RngCursor::new(55, 0);
        for _ in 0..10_000 {
            let w = unit(vec![cursor.uniform(-1.0, 1.0), cursor.uniform(-1.0, 1.0)]);
            let x = [cursor.uniform(-0.7, 0.7), cursor.uniform(-0.7, 0.7)];
            let mut g1 = cursor.uniform(0.0, 0.99);
            let mut g2 = cursor.uniform(0.0, 0.99);
            if g1 > g2 {
                std::mem::swap(&mut g1, &mut g2);
            }
            let y: i8 = if cursor.u01() < 0.5 { 1 } else { -1 };
            let l1 = adversarial_loss(&margins_linear(&w, &x, g1).unwrap(), y).unwrap();
            let l2 = adversarial_loss(&margins_linear(&w, &x, g2).unwrap(), y).unwrap();
            assert!(l1 <= l2);
        }
    }

    #[test]
    fn nn_domain_is_the_annulus() {
        let spec = HypothesisSpec::zero_nn(2, 1.0, 1.0);
        let cfg = SearchConfig::default();
        // ||x|| <= gamma rejected, ||x|| > 1 rejected.
        assert!(margins_numeric(&spec, &[0.1, 0.0], 0.3, &cfg).is_err());
        assert!(margins_numeric(&spec, &[1.2, 0.0], 0.3, &cfg).is_err());
        let m = margins_numeric(&spec, &[0.5, 0.0], 0.3, &cfg).unwrap();
        assert_eq!((m.lower(), m.upper()), (0.0, 0.0));
    }

    #[test]
    fn bad_search_config_rejected() {
        let spec = HypothesisSpec::linear(vec![1.0, 0.0]).unwrap();
        let cfg = SearchConfig {
            tol: 0.0,
            ..SearchConfig::default()
        };
        assert!(margins_numeric(&spec, &[0.5, 0.0], 0.2, &cfg).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = HypothesisSpec::one_layer_nn(
            vec![0.25, -0.25],
            vec![0.3, 0.4, -0.1, 0.2],
            2,
            1.0,
            1.0,
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"variant\":\"one_layer_nn\""));
        let back: HypothesisSpec = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn nn_bound_violations_rejected() {
        assert!(HypothesisSpec::one_layer_nn(vec![2.0], vec![0.1, 0.1], 2, 1.0, 1.0).is_err());
        assert!(HypothesisSpec::one_layer_nn(vec![0.5], vec![3.0, 0.0], 2, 1.0, 1.0).is_err());
        assert!(HypothesisSpec::one_layer_nn(vec![0.5], vec![0.1], 2, 1.0, 1.0).is_err());
    }
}
