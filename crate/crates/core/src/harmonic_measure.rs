//! Walk-on-spheres estimates of harmonic measure and Poisson-kernel density.
//!
//! A walker started at x repeatedly jumps to a uniform point on the largest
//! sphere about its position that stays in the domain, and stops once it is
//! within `stop_tolerance` of the boundary; its projected stopping point is a
//! sample of harmonic measure ω_x, whose density against surface measure is
//! P(x, ·). Each walker draws from its own ChaCha stream selected by
//! (seed, walker index), so results do not depend on scheduling.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{gauss_legendre, Domain, Point};
use crate::model_kernels::{KernelEstimate, KernelEvaluator};

/// Fraction of δ used as the jump radius on implicit domains, where δ comes
/// from an iterative solver.
pub const IMPLICIT_SAFETY_FACTOR: f64 = 0.99;
pub const DEFAULT_STOP_FRACTION: f64 = 1e-4;
pub const DEFAULT_MAX_STEPS: usize = 10_000;
pub const DEFAULT_MAX_TRUNCATED_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WosConfig {
    pub walkers: usize,
    /// Walks stop once δ falls below this length.
    pub stop_tolerance: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Radius of the box about the origin outside which a walk counts as
    /// truncated. Required for the halfspace.
    pub truncation_radius: Option<f64>,
    /// Estimates fail when more than this fraction of walks is truncated.
    pub max_truncated_fraction: f64,
}

impl WosConfig {
    /// Defaults: stop tolerance 1e−4 × diameter, 10⁴ steps per walk.
    pub fn new(domain: &Domain, walkers: usize, seed: u64) -> Result<Self> {
        let diameter = domain.diameter().ok_or_else(|| {
            Error::InvalidInput("unbounded domains need a truncation radius".into())
        })?;
        Ok(WosConfig {
            walkers,
            stop_tolerance: DEFAULT_STOP_FRACTION * diameter,
            max_steps: DEFAULT_MAX_STEPS,
            seed,
            truncation_radius: None,
            max_truncated_fraction: DEFAULT_MAX_TRUNCATED_FRACTION,
        })
    }

    /// Defaults for the halfspace, truncated to the box of the given radius.
    pub fn truncated(walkers: usize, seed: u64, truncation_radius: f64) -> Self {
        WosConfig {
            walkers,
            stop_tolerance: DEFAULT_STOP_FRACTION * 2.0 * truncation_radius,
            max_steps: DEFAULT_MAX_STEPS,
            seed,
            truncation_radius: Some(truncation_radius),
            max_truncated_fraction: DEFAULT_MAX_TRUNCATED_FRACTION,
        }
    }

    pub fn with_stop_tolerance(mut self, stop_tolerance: f64) -> Self {
        self.stop_tolerance = stop_tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_walkers(mut self, walkers: usize) -> Self {
        self.walkers = walkers;
        self
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.walkers == 0 {
            return Err(Error::InvalidInput("walkers must be >= 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_truncated_fraction) {
            return Err(Error::InvalidInput(
                "max_truncated_fraction must lie in [0, 1]".into(),
            ));
        }
        let diameter = match (domain.diameter(), self.truncation_radius) {
            (Some(d), _) => d,
            (None, Some(t)) if t > 0.0 && t.is_finite() => 2.0 * t,
            (None, _) => {
                return Err(Error::InvalidInput(
                    "halfspace walks need a positive truncation radius".into(),
                ))
            }
        };
        if !(self.stop_tolerance > 0.0 && self.stop_tolerance < diameter) {
            return Err(Error::InvalidInput(format!(
                "stop tolerance must lie in (0, {diameter}), got {}",
                self.stop_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    /// Fraction of walkers exiting in the set (or that fraction divided by
    /// the set's area, for densities).
    pub estimate: f64,
    pub std_error: f64,
    pub walkers_used: usize,
    pub truncated_walks: usize,
    pub hits: usize,
    /// No walker landed in the set; the estimate is 0 and the interval is
    /// only bounded by the rule of three.
    pub wide_interval: bool,
}

/// Where one walker stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkExit {
    pub point: Point,
    pub steps: usize,
}

fn walker_rng(seed: u64, walker_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walker_index);
    rng
}

fn uniform_direction(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    if dim == 2 {
        let (s, c) = (TAU * rng.gen::<f64>()).sin_cos();
        return Point::from([c, s]);
    }
    loop {
        let v = Point::new((0..dim).map(|_| rng.sample(StandardNormal)).collect());
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// Inscribed-sphere radius at `x`: δ, shrunk on implicit domains.
fn jump_radius(domain: &Domain, x: &Point) -> Result<f64> {
    let delta = domain.delta(x)?;
    Ok(match domain {
        Domain::Implicit(_) => IMPLICIT_SAFETY_FACTOR * delta,
        _ => delta,
    })
}

/// Runs walker `walker_index` from `x` to the boundary.
pub fn wos_exit(
    domain: &Domain,
    x: &Point,
    config: &WosConfig,
    walker_index: u64,
) -> Result<WalkExit> {
    let mut rng = walker_rng(config.seed, walker_index);
    let dim = domain.dim();
    let mut current = x.clone();
    let mut steps = 0;
    loop {
        if let Some(t) = config.truncation_radius {
            if current.norm() > t {
                return Err(Error::WalkTruncated { steps });
            }
        }
        let radius = jump_radius(domain, &current)?;
        if radius < config.stop_tolerance {
            let foot = domain.project_to_boundary(&current)?.foot;
            return Ok(WalkExit { point: foot, steps });
        }
        if steps >= config.max_steps {
            return Err(Error::WalkTruncated { steps });
        }
        let dir = uniform_direction(&mut rng, dim);
        current = current.offset(&dir, radius);
        steps += 1;
    }
}

/// Exit points of every walker from one starting point.
#[derive(Clone, Debug)]
pub struct ExitSample {
    exits: Vec<Option<Point>>,
    truncated: usize,
}

impl ExitSample {
    pub fn walkers(&self) -> usize {
        self.exits.len()
    }

    pub fn truncated(&self) -> usize {
        self.truncated
    }

    pub fn exits(&self) -> impl Iterator<Item = &Point> {
        self.exits.iter().flatten()
    }

    /// Harmonic-measure estimate of a boundary set given by its indicator.
    pub fn measure(&self, mut indicator: impl FnMut(&Point) -> bool) -> MeasureEstimate {
        let n = self.exits.len();
        let hits = self.exits().filter(|p| indicator(p)).count();
        let p = hits as f64 / n as f64;
        MeasureEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            walkers_used: n,
            truncated_walks: self.truncated,
            hits,
            wide_interval: hits == 0,
        }
    }

    pub fn cap_measure(&self, center: &Point, radius: f64) -> MeasureEstimate {
        self.measure(|p| p.distance(center) < radius)
    }
}

/// Runs `config.walkers` walks from `x`. Walkers are evaluated in parallel and
/// reassembled in index order.
pub fn sample_exits(domain: &Domain, x: &Point, config: &WosConfig) -> Result<ExitSample> {
    config.validate(domain)?;
    x.check_dim(domain.dim())?;
    if !domain.contains(x)? {
        return Err(Error::NotInterior {
            signed_distance: domain.signed_distance(x)?,
        });
    }
    let results: Vec<Result<WalkExit>> = (0..config.walkers as u64)
        .into_par_iter()
        .map(|i| wos_exit(domain, x, config, i))
        .collect();
    let mut exits = Vec::with_capacity(results.len());
    let mut truncated = 0;
    for r in results {
        match r {
            Ok(exit) => exits.push(Some(exit.point)),
            Err(Error::WalkTruncated { .. }) => {
                truncated += 1;
                exits.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    if truncated == exits.len() {
        return Err(Error::EstimationFailed("every walk was truncated".into()));
    }
    let fraction = truncated as f64 / exits.len() as f64;
    if fraction > config.max_truncated_fraction {
        return Err(Error::EstimationFailed(format!(
            "{truncated} of {} walks truncated (limit {})",
            exits.len(),
            config.max_truncated_fraction
        )));
    }
    Ok(ExitSample { exits, truncated })
}

fn check_cap_radius(cap_radius: f64) -> Result<()> {
    if !(cap_radius > 0.0 && cap_radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cap radius must be positive, got {cap_radius}"
        )));
    }
    Ok(())
}

/// ω_x of the cap {τ ∈ ∂Ω : |τ − cap_center| < cap_radius}.
pub fn estimate_cap_measure(
    domain: &Domain,
    x: &Point,
    cap_center: &Point,
    cap_radius: f64,
    config: &WosConfig,
) -> Result<MeasureEstimate> {
    check_cap_radius(cap_radius)?;
    cap_center.check_dim(domain.dim())?;
    Ok(sample_exits(domain, x, config)?.cap_measure(cap_center, cap_radius))
}

/// Surface area of the Euclidean cap {τ ∈ ∂Ω : |τ − center| < radius}.
pub fn cap_area(domain: &Domain, center: &Point, radius: f64) -> Result<f64> {
    check_cap_radius(radius)?;
    domain.check_on_boundary(center)?;
    match domain {
        Domain::Ball {
            center: c,
            radius: r,
        } if c.dim() == 2 => {
            if radius >= 2.0 * r {
                return Ok(TAU * r);
            }
            Ok(4.0 * r * (radius / (2.0 * r)).asin())
        }
        Domain::Ball {
            center: c,
            radius: r,
        } if c.dim() == 3 => {
            // Height of the cap cut by a chord ball of radius ρ is ρ²/(2R).
            Ok(PI * radius.min(2.0 * r).powi(2))
        }
        Domain::Halfspace { dim: 2 } => Ok(2.0 * radius),
        Domain::Halfspace { dim: 3 } => Ok(PI * radius * radius),
        Domain::Ellipse { semi_axes } if semi_axes.len() == 2 => {
            ellipse_cap_length(semi_axes[0], semi_axes[1], center, radius)
        }
        other => Err(Error::Unsupported {
            operation: "cap area",
            kind: other.describe(),
        }),
    }
}

/// Arc length of the part of the ellipse (a cos θ, b sin θ) within `radius`
/// of `center`, assuming that part is a single arc.
fn ellipse_cap_length(a: f64, b: f64, center: &Point, radius: f64) -> Result<f64> {
    let theta_c = (center[1] / b).atan2(center[0] / a);
    let dist =
        |t: f64| ((a * t.cos() - center[0]).powi(2) + (b * t.sin() - center[1]).powi(2)).sqrt();
    let march = |sign: f64| -> Result<f64> {
        let step = 1e-3 * radius / a.max(b);
        let mut inside = 0.0;
        let mut k = 1.0;
        loop {
            let t = k * step;
            if t > PI {
                return Err(Error::InvalidInput(
                    "cap covers the whole ellipse; use a smaller cap radius".into(),
                ));
            }
            if dist(theta_c + sign * t) >= radius {
                let (mut lo, mut hi) = (inside, t);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if dist(theta_c + sign * mid) < radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
            inside = t;
            k *= 1.5;
            k = k.ceil();
        }
    };
    let (lo, hi) = (theta_c - march(-1.0)?, theta_c + march(1.0)?);
    let (nodes, weights) = gauss_legendre(32);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(nodes
        .iter()
        .zip(&weights)
        .map(|(x, w)| {
            let t = mid + half * x;
            w * half * (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
        })
        .sum())
}

/// Cap measure divided by cap area, an estimate of P(x, y).
pub fn estimate_kernel_density(
    domain: &Domain,
    x: &Point,
    y: &Point,
    cap_radius: f64,
    config: &WosConfig,
) -> Result<MeasureEstimate> {
    let area = cap_area(domain, y, cap_radius)?;
    let sample = sample_exits(domain, x, config)?;
    Ok(density_from_sample(&sample, y, cap_radius, area))
}

fn density_from_sample(
    sample: &ExitSample,
    y: &Point,
    cap_radius: f64,
    area: f64,
) -> MeasureEstimate {
    let m = sample.cap_measure(y, cap_radius);
    MeasureEstimate {
        estimate: m.estimate / area,
        std_error: m.std_error / area,
        ..m
    }
}

/// Poisson kernel estimated by walk-on-spheres cap densities.
#[derive(Clone, Debug)]
pub struct WosKernel {
    domain: Domain,
    config: WosConfig,
    cap_radius: f64,
}

impl WosKernel {
    pub fn new(domain: Domain, config: WosConfig, cap_radius: f64) -> Result<Self> {
        config.validate(&domain)?;
        check_cap_radius(cap_radius)?;
        Ok(WosKernel {
            domain,
            config,
            cap_radius,
        })
    }

    pub fn config(&self) -> &WosConfig {
        &self.config
    }

    pub fn cap_radius(&self) -> f64 {
        self.cap_radius
    }

    /// Density estimates for several targets from one set of walks.
    pub fn densities(&self, x: &Point, targets: &[Point]) -> Result<Vec<MeasureEstimate>> {
        let areas = targets
            .iter()
            .map(|y| cap_area(&self.domain, y, self.cap_radius))
            .collect::<Result<Vec<_>>>()?;
        let sample = sample_exits(&self.domain, x, &self.config)?;
        Ok(targets
            .iter()
            .zip(areas)
            .map(|(y, area)| density_from_sample(&sample, y, self.cap_radius, area))
            .collect())
    }
}

impl KernelEvaluator for WosKernel {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn evaluate(&self, x: &Point, t: &Point) -> Result<KernelEstimate> {
        Ok(self.evaluate_many(x, std::slice::from_ref(t))?[0])
    }

    fn evaluate_many(&self, x: &Point, targets: &[Point]) -> Result<Vec<KernelEstimate>> {
        Ok(self
            .densities(x, targets)?
            .into_iter()
            .map(|m| KernelEstimate {
                value: m.estimate,
                std_error: m.std_error,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_kernels::poisson_ball;

    fn disc() -> Domain {
        Domain::unit_ball(2).unwrap()
    }

    #[test]
    fn walks_are_deterministic_per_walker() {
        let cfg = WosConfig::new(&disc(), 10, 42).unwrap();
        let x = Point::from([0.3, 0.1]);
        let a = wos_exit(&disc(), &x, &cfg, 7).unwrap();
        let b = wos_exit(&disc(), &x, &cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = wos_exit(&disc(), &x, &cfg, 8).unwrap();
        assert_ne!(a, c);
        assert!((a.point.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_boundary_start_returns_immediately() {
        let cfg = WosConfig::new(&disc(), 1, 1).unwrap();
        let x = Point::from([1.0 - 1e-5, 0.0]);
        let exit = wos_exit(&disc(), &x, &cfg, 0).unwrap();
        assert_eq!(exit.steps, 0);
        assert!(exit.point.distance(&Point::from([1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn exit_angle_from_center_is_uniform() {
        let n = 100_000;
        let cfg = WosConfig::new(&disc(), n, 2024).unwrap();
        let sample = sample_exits(&disc(), &Point::zeros(2), &cfg).unwrap();
        let mut u: Vec<f64> = sample
            .exits()
            .map(|p| (p[1].atan2(p[0]) + PI) / TAU)
            .collect();
        u.sort_by(f64::total_cmp);
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, v)| {
                ((i + 1) as f64 / n as f64 - v)
                    .abs()
                    .max((v - i as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        // 99% Kolmogorov–Smirnov critical value 1.628/√n.
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn halfplane_exit_is_cauchy() {
        let h = Domain::halfspace(2).unwrap();
        let cfg = WosConfig::truncated(20_000, 5, 100.0);
        let sample = sample_exits(&h, &Point::from([0.0, 1.0]), &cfg).unwrap();
        let m = sample.measure(|p| p[0].abs() <= 1.0);
        assert!(
            (m.estimate - 0.5).abs() < 3.0 * m.std_error.max(1e-3),
            "{m:?}"
        );
        assert!(m.truncated_walks < sample.walkers() / 20);
    }

    #[test]
    fn cap_measure_quarter_arc() {
        let cfg = WosConfig::new(&disc(), 20_000, 11).unwrap();
        let sample = sample_exits(&disc(), &Point::zeros(2), &cfg).unwrap();
        // An arc of total angle α is the Euclidean cap of chord radius 2 sin(α/4).
        for (angle, want) in [(PI / 2.0, 0.25), (PI / 4.0, 0.125)] {
            let r = 2.0 * (angle / 4.0).sin();
            let m = sample.cap_measure(&Point::from([1.0, 0.0]), r);
            assert!(
                (m.estimate - want).abs() < 3.0 * m.std_error,
                "{angle}: {m:?}"
            );
        }
    }

    #[test]
    fn disc_density_near_three_over_two_pi() {
        let cfg = WosConfig::new(&disc(), 100_000, 3).unwrap();
        let x = Point::from([0.5, 0.0]);
        let y = Point::from([1.0, 0.0]);
        let m = estimate_kernel_density(&disc(), &x, &y, 0.05, &cfg).unwrap();
        let exact = poisson_ball(2, &x, &y).unwrap();
        // Cap-averaging bias is O(r²) relative.
        assert!(
            (m.estimate - exact).abs() < 3.0 * m.std_error + 0.01 * exact,
            "{m:?} vs {exact}"
        );
    }

    #[test]
    fn cap_areas() {
        let r = 0.1;
        let a = cap_area(&disc(), &Point::from([0.0, 1.0]), r).unwrap();
        assert!((a - 4.0 * (0.05f64).asin()).abs() < 1e-15);
        let s = cap_area(
            &Domain::unit_ball(3).unwrap(),
            &Point::from([0.0, 0.0, 1.0]),
            r,
        )
        .unwrap();
        assert!((s - PI * r * r).abs() < 1e-15);
        // Ellipse cap at the end of the minor axis versus brute-force arc length.
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        let got = cap_area(&e, &Point::from([0.0, 1.0]), 0.2).unwrap();
        let n = 400_000;
        let brute: f64 = (0..n)
            .map(|k| {
                let t = TAU * (k as f64 + 0.5) / n as f64;
                let p = Point::from([2.0 * t.cos(), t.sin()]);
                if p.distance(&Point::from([0.0, 1.0])) < 0.2 {
                    TAU / n as f64 * (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt()
                } else {
                    0.0
                }
            })
            .sum();
        assert!((got - brute).abs() < 1e-4, "{got} vs {brute}");
        assert!(matches!(
            cap_area(
                &Domain::unit_ball(4).unwrap(),
                &Point::from([0.0, 0.0, 0.0, 1.0]),
                0.1
            ),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = WosConfig::new(&disc(), 0, 1).unwrap();
        assert!(cfg.validate(&disc()).is_err());
        assert!(WosConfig::new(&Domain::halfspace(2).unwrap(), 10, 1).is_err());
        let cfg = WosConfig::new(&disc(), 10, 1)
            .unwrap()
            .with_stop_tolerance(5.0);
        assert!(cfg.validate(&disc()).is_err());
        let cfg = WosConfig::new(&disc(), 10, 1).unwrap();
        assert!(matches!(
            sample_exits(&disc(), &Point::from([2.0, 0.0]), &cfg),
            Err(Error::NotInterior { .. })
        ));
    }

    #[test]
    fn all_truncated_walks_fail_the_estimate() {
        let mut cfg = WosConfig::new(&disc(), 50, 1).unwrap();
        cfg.max_steps = 1;
        cfg.stop_tolerance = 1e-12;
        assert!(matches!(
            sample_exits(&disc(), &Point::from([0.5, 0.0]), &cfg),
            Err(Error::EstimationFailed(_))
        ));
    }

    #[test]
    fn zero_hits_are_flagged() {
        let cfg = WosConfig::new(&disc(), 200, 9).unwrap();
        let m = estimate_kernel_density(
            &disc(),
            &Point::from([-0.9, 0.0]),
            &Point::from([1.0, 0.0]),
            1e-4,
            &cfg,
        )
        .unwrap();
        assert_eq!(m.hits, 0);
        assert!(m.wide_interval);
        assert_eq!(m.estimate, 0.0);
    }
}
