//! Closed-form Poisson kernels of the ball and the halfspace, and the
//! Poisson integral on those domains.

mod gamma;

use std::f64::consts::PI;

use serde::Serialize;

pub use gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{boundary_quadrature, truncated_halfspace_quadrature, Domain, Point};

/// Γ(d/2)/π^{d/2}, the halfspace constant in ℝ^d.
pub fn halfspace_constant(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    gamma(h) / PI.powf(h)
}

/// Γ(d/2)/(2π^{d/2}), the ball constant in ℝ^d (1/|S^{d−1}|).
pub fn ball_constant(dim: usize) -> f64 {
    0.5 * halfspace_constant(dim)
}

/// A Poisson kernel value with its Monte Carlo standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl KernelEstimate {
    pub fn exact(value: f64) -> Self {
        KernelEstimate {
            value,
            std_error: 0.0,
        }
    }
}

/// Anything that evaluates (x, t) ↦ P(x, t) for interior x and boundary t.
pub trait KernelEvaluator: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &Point, t: &Point) -> Result<KernelEstimate>;

    /// Evaluates several boundary points against one interior point.
    /// Estimators that can share work across targets override this.
    fn evaluate_many(&self, x: &Point, targets: &[Point]) -> Result<Vec<KernelEstimate>> {
        targets.iter().map(|t| self.evaluate(x, t)).collect()
    }

    fn is_exact(&self) -> bool {
        false
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!(
            "dimension must be >= 2, got {dim}"
        )));
    }
    Ok(())
}

fn sphere_tolerance(radius: f64) -> f64 {
    1e-10 * radius.max(1.0)
}

/// Poisson kernel of the ball B(c, r) ⊂ ℝ^d:
/// Γ(d/2)/(2π^{d/2}) · (r² − |x − c|²)/(r |x − t|^d).
pub fn poisson_ball_general(center: &Point, radius: f64, x: &Point, t: &Point) -> Result<f64> {
    let d = center.dim();
    x.check_dim(d)?;
    t.check_dim(d)?;
    let rx = x.distance(center);
    if !(rx < radius) {
        return Err(Error::NotInterior {
            signed_distance: rx - radius,
        });
    }
    let rt = t.distance(center);
    if (rt - radius).abs() > sphere_tolerance(radius) {
        return Err(Error::NotOnBoundary {
            residual: (rt - radius).abs(),
        });
    }
    // Work with squared norms: taking square roots and squaring again costs
    // accuracy that finite differences of the kernel amplify.
    let numerator = radius * radius - (x - center).norm_squared();
    Ok(ball_constant(d) * numerator / (radius * power_half(x.distance_squared(t), d)))
}

/// s^{d/2} with integer powers and at most one square root.
fn power_half(s: f64, d: usize) -> f64 {
    let even = s.powi((d / 2) as i32);
    if d.is_multiple_of(2) {
        even
    } else {
        even * s.sqrt()
    }
}

/// Poisson kernel of the unit ball in ℝ^d.
pub fn poisson_ball(dim: usize, x: &Point, t: &Point) -> Result<f64> {
    check_dim(dim)?;
    poisson_ball_general(&Point::zeros(dim), 1.0, x, t)
}

/// Poisson kernel of the upper halfspace {x_d > 0} ⊂ ℝ^d:
/// Γ(d/2)/π^{d/2} · x_d/(|x′ − t′|² + x_d²)^{d/2}.
pub fn poisson_halfspace(dim: usize, x: &Point, t: &Point) -> Result<f64> {
    check_dim(dim)?;
    x.check_dim(dim)?;
    t.check_dim(dim)?;
    let h = x.last();
    if !(h > 0.0) {
        return Err(Error::NotInterior {
            signed_distance: -h,
        });
    }
    let t_scale = t.norm().max(1.0);
    if t.last().abs() > 1e-10 * t_scale {
        return Err(Error::NotOnBoundary {
            residual: t.last().abs(),
        });
    }
    let tangential: f64 = x
        .tangential()
        .iter()
        .zip(t.tangential())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(halfspace_constant(dim) * h / power_half(tangential + h * h, dim))
}

/// Exact kernel of a ball or halfspace domain.
#[derive(Clone, Debug)]
pub struct ModelKernel {
    domain: Domain,
}

impl ModelKernel {
    pub fn new(domain: Domain) -> Result<Self> {
        match domain {
            Domain::Ball { .. } | Domain::Halfspace { .. } => Ok(ModelKernel { domain }),
            other => Err(Error::Unsupported {
                operation: "closed-form Poisson kernel",
                kind: other.describe(),
            }),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn value(&self, x: &Point, t: &Point) -> Result<f64> {
        match &self.domain {
            Domain::Ball { center, radius } => poisson_ball_general(center, *radius, x, t),
            Domain::Halfspace { dim } => poisson_halfspace(*dim, x, t),
            _ => unreachable!("checked in ModelKernel::new"),
        }
    }

    /// P(x + s·e, t) − P(x, t), evaluated without subtracting two kernel
    /// values.
    ///
    /// Both kernels have the form C·u·v^{−d/2} where u and v change by exact
    /// quadratics in s along the line, so the increment is
    /// C·[Δu·(v+Δv)^{−d/2} + u·v^{−d/2}·((1 + Δv/v)^{−d/2} − 1)].
    pub fn increment(&self, x: &Point, t: &Point, e: &Point, s: f64) -> Result<f64> {
        e.check_dim(self.domain.dim())?;
        // Validates both endpoints.
        self.value(x, t)?;
        self.value(&x.offset(e, s), t)?;
        let d = self.domain.dim();
        let ee = e.norm_squared();
        let (constant, u, du, w) = match &self.domain {
            Domain::Ball { center, radius } => {
                let xc = x - center;
                (
                    ball_constant(d) / radius,
                    radius * radius - xc.norm_squared(),
                    -(2.0 * s * xc.dot(e) + s * s * ee),
                    x - t,
                )
            }
            Domain::Halfspace { .. } => {
                let mut w = x - t;
                w[d - 1] = x.last();
                (halfspace_constant(d), x.last(), s * e.last(), w)
            }
            _ => unreachable!("checked in ModelKernel::new"),
        };
        let v = w.norm_squared();
        let dv = 2.0 * s * w.dot(e) + s * s * ee;
        let p = -(d as f64) / 2.0;
        let relative = (p * (dv / v).ln_1p()).exp_m1();
        Ok(constant * (du * power_half(v + dv, d).recip() + u * relative / power_half(v, d)))
    }
}

impl KernelEvaluator for ModelKernel {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn evaluate(&self, x: &Point, t: &Point) -> Result<KernelEstimate> {
        self.value(x, t).map(KernelEstimate::exact)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Quadrature value of the Poisson integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoissonIntegral {
    pub value: f64,
    /// Harmonic measure outside the truncation window (halfspace only; 0 for
    /// bounded domains). The neglected part of the integral is at most
    /// sup|f| times this.
    pub tail_mass: f64,
    pub nodes: usize,
    pub spacing: f64,
}

/// Harmonic measure of the halfspace boundary within distance `r` of the
/// foot of a point at height `h`.
fn halfspace_mass_within(dim: usize, r: f64, h: f64) -> f64 {
    match dim {
        2 => 2.0 / PI * (r / h).atan(),
        3 => 1.0 - h / (r * r + h * h).sqrt(),
        _ => unreachable!("quadrature restricts the halfspace to d <= 3"),
    }
}

/// ∫ P(x, t) f(t) dσ(t) by boundary quadrature.
///
/// Balls (d = 2, 3) are integrated over the whole sphere. Halfspaces (d = 2,
/// 3) need `truncation`: the integral is taken over the window of that
/// radius around the origin and the harmonic measure of the rest is reported
/// as `tail_mass`. Fails with [`Error::RefinementNeeded`] when δ(x) is below
/// the node spacing.
pub fn harmonic_extend(
    domain: &Domain,
    boundary_data: impl Fn(&Point) -> f64,
    x: &Point,
    resolution: usize,
    truncation: Option<f64>,
) -> Result<PoissonIntegral> {
    let kernel = ModelKernel::new(domain.clone())?;
    let delta = domain.check_interior(x)?;
    let (quad, tail_mass) = match domain {
        Domain::Halfspace { dim } => {
            let t = truncation.ok_or_else(|| {
                Error::InvalidInput("halfspace Poisson integrals need a truncation radius".into())
            })?;
            let q = truncated_halfspace_quadrature(*dim, resolution, t)?;
            let offset = x.tangential().iter().map(|v| v * v).sum::<f64>().sqrt();
            if offset >= t {
                return Err(Error::InvalidInput(format!(
                    "point lies outside the truncation window (|x'| = {offset}, T = {t})"
                )));
            }
            (q, 1.0 - halfspace_mass_within(*dim, t - offset, x.last()))
        }
        _ => (boundary_quadrature(domain, resolution)?, 0.0),
    };
    if quad.spacing > delta {
        return Err(Error::RefinementNeeded {
            spacing: quad.spacing,
            delta,
        });
    }
    let mut sum = 0.0;
    for n in &quad.nodes {
        sum += n.weight * kernel.value(x, &n.node)? * boundary_data(&n.node);
    }
    Ok(PoissonIntegral {
        value: sum,
        tail_mass,
        nodes: quad.nodes.len(),
        spacing: quad.spacing,
    })
}

/// ∫ P(x, t) dσ(t); 1 on bounded models, 1 − tail on truncated halfspaces.
pub fn kernel_normalization(
    domain: &Domain,
    x: &Point,
    resolution: usize,
    truncation: Option<f64>,
) -> Result<PoissonIntegral> {
    harmonic_extend(domain, |_| 1.0, x, resolution, truncation)
}
