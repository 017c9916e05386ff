//! Simulated data distributions with exact conditional probabilities and
//! deterministic, splittable sampling.
//!
//! Sampling is driven by [`CounterRng`], a SplitMix64-style counter generator:
//! draw `k` of stream `(seed, stream)` is a pure function of `(seed, stream,
//! k)`, so batches are bit-identical across platforms and across any
//! parallel/sequential split of the index range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{LossError, PerturbationBudget};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("sample count must be >= 1")]
    EmptyBatch,
    #[error("sigma = {0} is outside (0, pi)")]
    BadSigma(f64),
    #[error("point ({0}, {1}) is off the support")]
    OffSupport(f64, f64),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("csv write failed: {0}")]
    Csv(#[from] std::io::Error),
}

/// Counter-based deterministic generator (SplitMix64 output function).
///
/// Constants: GOLDEN = 0x9E3779B97F4A7C15 (weyl increment), finalizer
/// multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB with shifts
/// 30/27/31. Uniform doubles use the top 53 bits scaled by 2^-53.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    base: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CounterRng {
    /// Generator for stream `stream` of the given seed.
    pub fn new(seed: u64, stream: u64) -> Self {
        let base = mix(seed.wrapping_add(GOLDEN)) ^ mix(stream.wrapping_mul(GOLDEN) ^ 0x5851_F42D_4C95_7F2D);
        Self { base }
    }

    /// The `k`-th raw word of this stream.
    #[inline]
    pub fn word(&self, k: u64) -> u64 {
        mix(self.base.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// The `k`-th uniform double in [0, 1), from the top 53 bits.
    #[inline]
    pub fn u01(&self, k: u64) -> f64 {
        (self.word(k) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Sequential adapter over a [`CounterRng`] stream.
#[derive(Debug, Clone)]
pub struct RngCursor {
    rng: CounterRng,
    next: u64,
}

impl RngCursor {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            rng: CounterRng::new(seed, stream),
            next: 0,
        }
    }

    #[inline]
    pub fn u01(&mut self) -> f64 {
        let v = self.rng.u01(self.next);
        self.next += 1;
        v
    }

    /// Uniform draw in [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.u01()
    }
}

/// Uniform angle on the circle with an asymmetric label-flip arc.
///
/// theta ~ U[0, 2pi); labels: +1 on [0, sigma) and [sigma+pi, 2pi), -1 on
/// [pi, sigma+pi), and on the flip arc [sigma, pi) the label is -1 with
/// probability 3/4. Boundary angles belong to the right-open arc starting
/// there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipCircle {
    sigma: f64,
}

/// Flip probability on the arc (sigma, pi).
pub const FLIP_PROB: f64 = 0.75;

impl FlipCircle {
    pub fn new(sigma: f64) -> Result<Self, DistributionError> {
        if !(sigma > 0.0 && sigma < PI) {
            return Err(DistributionError::BadSigma(sigma));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// P(Y = 1 | theta).
    pub fn eta_at_angle(&self, theta: f64) -> f64 {
        let theta = theta.rem_euclid(TAU);
        if theta < self.sigma {
            1.0
        } else if theta < PI {
            1.0 - FLIP_PROB
        } else if theta < self.sigma + PI {
            0.0
        } else {
            1.0
        }
    }
}

/// Two vertical segments at x1 = +/- gamma_hat carrying deterministic labels.
///
/// P(Y=1) = P(Y=-1) = 1/2; X | Y=1 is uniform on {(gamma_hat, z) : z in
/// [0, h]} and X | Y=-1 on {(-gamma_hat, z) : z in [-h, 0]}, with
/// h = sqrt(1 - gamma_hat^2) and gamma_hat = (1 + 99 gamma) / 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segments {
    gamma: f64,
    gamma_hat: f64,
}

impl Segments {
    pub fn new(gamma: PerturbationBudget) -> Self {
        let gamma = gamma.gamma();
        Self {
            gamma,
            gamma_hat: (1.0 + 99.0 * gamma) / 100.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    pub fn height(&self) -> f64 {
        (1.0 - self.gamma_hat * self.gamma_hat).sqrt()
    }
}

/// The two constructions plus the deterministic-label circle (labels by the
/// sign of the second coordinate, no flip arc).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum Distribution {
    FlipCircle(FlipCircle),
    Segments(Segments),
    CircleHalves,
}

/// A seeded i.i.d. sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<i8>,
    pub seed: u64,
    pub stream: u64,
    pub n: usize,
}

impl SampleBatch {
    /// Export as CSV with header `x1,x2,y`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,y")?;
        for (p, y) in self.points.iter().zip(&self.labels) {
            writeln!(w, "{},{},{}", p[0], p[1], y)?;
        }
        Ok(())
    }
}

/// Draw `n` i.i.d. samples from stream 0 of `seed`.
pub fn sample(dist: &Distribution, n: usize, seed: u64) -> Result<SampleBatch, DistributionError> {
    sample_stream(dist, n, seed, 0)
}

/// Draw `n` i.i.d. samples from the given stream. Sample `j` consumes the
/// indexed draws `2j` and `2j + 1`, so generation order is immaterial.
pub fn sample_stream(
    dist: &Distribution,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SampleBatch, DistributionError> {
    if n == 0 {
        return Err(DistributionError::EmptyBatch);
    }
    let rng = CounterRng::new(seed, stream);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n as u64 {
        let (u0, u1) = (rng.u01(2 * j), rng.u01(2 * j + 1));
        let (p, y) = draw(dist, u0, u1);
        points.push(p);
        labels.push(y);
    }
    Ok(SampleBatch {
        points,
        labels,
        seed,
        stream,
        n,
    })
}

fn draw(dist: &Distribution, u0: f64, u1: f64) -> ([f64; 2], i8) {
    match dist {
        Distribution::FlipCircle(fc) => {
            let theta = TAU * u0;
            let point = [theta.cos(), theta.sin()];
            let eta = fc.eta_at_angle(theta);
            // u1 < eta <=> y = +1; exact for the three-valued eta.
            let y = if u1 < eta { 1 } else { -1 };
            (point, y)
        }
        Distribution::Segments(seg) => {
            let h = seg.height();
            if u0 < 0.5 {
                ([seg.gamma_hat, u1 * h], 1)
            } else {
                ([-seg.gamma_hat, -u1 * h], -1)
            }
        }
        Distribution::CircleHalves => {
            let theta = TAU * u0;
            let point = [theta.cos(), theta.sin()];
            let y = if theta < PI { 1 } else { -1 };
            (point, y)
        }
    }
}

/// Exact conditional probability P(Y = 1 | X = x). Errors off the support.
pub fn eta_of(dist: &Distribution, x: [f64; 2]) -> Result<f64, DistributionError> {
    const SUPPORT_TOL: f64 = 1e-9;
    match dist {
        Distribution::FlipCircle(fc) => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if (r - 1.0).abs() > SUPPORT_TOL {
                return Err(DistributionError::OffSupport(x[0], x[1]));
            }
            let theta = x[1].atan2(x[0]).rem_euclid(TAU);
            Ok(fc.eta_at_angle(theta))
        }
        Distribution::Segments(seg) => {
            let h = seg.height();
            if (x[0] - seg.gamma_hat).abs() <= SUPPORT_TOL && (0.0..=h).contains(&x[1]) {
                Ok(1.0)
            } else if (x[0] + seg.gamma_hat).abs() <= SUPPORT_TOL && (-h..=0.0).contains(&x[1]) {
                Ok(0.0)
            } else {
                Err(DistributionError::OffSupport(x[0], x[1]))
            }
        }
        Distribution::CircleHalves => {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if (r - 1.0).abs() > SUPPORT_TOL {
                return Err(DistributionError::OffSupport(x[0], x[1]));
            }
            let theta = x[1].atan2(x[0]).rem_euclid(TAU);
            Ok(if theta < PI { 1.0 } else { 0.0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flip_circle(sigma: f64) -> Distribution {
        Distribution::FlipCircle(FlipCircle::new(sigma).unwrap())
    }

    fn segments(gamma: f64) -> Distribution {
        Distribution::Segments(Segments::new(PerturbationBudget::new(gamma).unwrap()))
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for dist in [flip_circle(PI / 2.0), segments(0.1), Distribution::CircleHalves] {
            let a = sample(&dist, 5, 7).unwrap();
            let b = sample(&dist, 5, 7).unwrap();
            assert_eq!(a, b);
            let c = sample(&dist, 5, 8).unwrap();
            assert_ne!(a.points, c.points);
        }
    }

    #[test]
    fn prefix_of_longer_batch_matches() {
        // Per-sample indexed draws: the first k samples do not depend on n.
        let dist = segments(0.1);
        let small = sample(&dist, 100, 3).unwrap();
        let big = sample(&dist, 1000, 3).unwrap();
        assert_eq!(small.points[..], big.points[..100]);
        assert_eq!(small.labels[..], big.labels[..100]);
    }

    #[test]
    fn flip_circle_empirical_flip_probability() {
        let fc = FlipCircle::new(PI / 2.0).unwrap();
        let batch = sample(&Distribution::FlipCircle(fc), 1_000_000, 1).unwrap();
        let (mut on_arc, mut pos) = (0u64, 0u64);
        for (p, y) in batch.points.iter().zip(&batch.labels) {
            let theta = p[1].atan2(p[0]).rem_euclid(TAU);
            if (PI / 2.0..PI).contains(&theta) {
                on_arc += 1;
                if *y == 1 {
                    pos += 1;
                }
            }
        }
        let frac = pos as f64 / on_arc as f64;
        assert!((frac - 0.25).abs() < 0.005, "got {frac}");
    }

    #[test]
    fn flip_circle_points_on_unit_circle() {
        let batch = sample(&flip_circle(1.0), 10_000, 11).unwrap();
        for p in &batch.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn segments_x_coordinates_are_exact() {
        let seg = Segments::new(PerturbationBudget::new(0.1).unwrap());
        assert!((seg.gamma_hat() - 0.109).abs() < 1e-15);
        let batch = sample(&segments(0.1), 100_000, 1).unwrap();
        let h = seg.height();
        for (p, y) in batch.points.iter().zip(&batch.labels) {
            if *y == 1 {
                assert_eq!(p[0], seg.gamma_hat());
                assert!((0.0..=h).contains(&p[1]));
            } else {
                assert_eq!(p[0], -seg.gamma_hat());
                assert!((-h..=0.0).contains(&p[1]));
            }
        }
    }

    #[test]
    fn segments_realizable_by_horizontal_classifier() {
        // w* = (1, 0) has empirical adversarial risk 0 at gamma = 0.1: every
        // sample satisfies y * (w . x) = gamma_hat > gamma.
        let batch = sample(&segments(0.1), 200_000, 5).unwrap();
        let gamma = 0.1;
        let errors = batch
            .points
            .iter()
            .zip(&batch.labels)
            .filter(|(p, y)| f64::from(**y) * p[0] <= gamma)
            .count();
        assert_eq!(errors, 0);
    }

    #[test]
    fn eta_of_matches_label_table() {
        let fc = flip_circle(PI / 2.0);
        let at = |theta: f64| [theta.cos(), theta.sin()];
        assert_eq!(eta_of(&fc, at(3.0 * PI / 4.0)).unwrap(), 0.25);
        assert_eq!(eta_of(&fc, at(PI / 4.0)).unwrap(), 1.0);
        assert_eq!(eta_of(&fc, at(4.0)).unwrap(), 0.0);
        let seg = segments(0.1);
        assert_eq!(eta_of(&seg, [0.109, 0.3]).unwrap(), 1.0);
        assert_eq!(eta_of(&seg, [-0.109, -0.3]).unwrap(), 0.0);
        assert!(eta_of(&seg, [0.2, 0.0]).is_err());
        assert!(eta_of(&fc, [0.5, 0.5]).is_err());
    }

    #[test]
    fn eta_of_integrates_against_samples() {
        // Conditional label frequencies per arc match eta within 4 standard
        // errors.
        let sigma = 1.1;
        let dist = flip_circle(sigma);
        let batch = sample(&dist, 400_000, 9).unwrap();
        let arcs = [
            (0.0, sigma, 1.0),
            (sigma, PI, 0.25),
            (PI, sigma + PI, 0.0),
            (sigma + PI, TAU, 1.0),
        ];
        for (lo, hi, eta) in arcs {
            let (mut n, mut pos) = (0u64, 0u64);
            for (p, y) in batch.points.iter().zip(&batch.labels) {
                let theta = p[1].atan2(p[0]).rem_euclid(TAU);
                if theta >= lo && theta < hi {
                    n += 1;
                    if *y == 1 {
                        pos += 1;
                    }
                }
            }
            let frac = pos as f64 / n as f64;
            let stderr = (eta * (1.0 - eta) / n as f64).sqrt().max(1e-3);
            assert!(
                (frac - eta).abs() <= 4.0 * stderr,
                "arc [{lo}, {hi}): {frac} vs {eta}"
            );
        }
    }

    #[test]
    fn boundary_angles_use_right_open_arcs() {
        let fc = FlipCircle::new(1.0).unwrap();
        assert_eq!(fc.eta_at_angle(0.0), 1.0);
        assert_eq!(fc.eta_at_angle(1.0), 0.25);
        assert_eq!(fc.eta_at_angle(PI), 0.0);
        assert_eq!(fc.eta_at_angle(1.0 + PI), 1.0);
    }

    #[test]
    fn rejects_empty_batch_and_bad_sigma() {
        assert!(sample(&segments(0.1), 0, 1).is_err());
        assert!(FlipCircle::new(0.0).is_err());
        assert!(FlipCircle::new(PI).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let batch = sample(&segments(0.1), 3, 2).unwrap();
        let mut out = Vec::new();
        batch.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,y"));
        assert_eq!(lines.count(), 3);
    }
}
