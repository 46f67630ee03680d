//! Boundary blow-up at a base point P.
//!
//! In frame coordinates (P at the origin, inward normal along +e_d) the
//! dilation is Φ_ε(x) = Q(x − P)/ε. Under it the normalised defining function
//! becomes ρ_ε(s) = ρ(P + εQᵀs)/(ε|∇ρ(P)|) = −s_d + O(ε), so Φ_ε(Ω) tends to
//! the upper halfspace, and Poisson kernels transform as
//! P_Ω(x, τ) = ε^{−(d−1)} P_{Φ_ε(Ω)}(Φ_ε x, Φ_ε τ).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryFrame, Domain, Point};
use crate::model_kernels::{halfspace_constant, KernelEstimate, KernelEvaluator};

/// Number of sample points used for the sup in [`linearization_gap`].
pub const GAP_GRID_POINTS: usize = 4096;

/// Φ_ε(x) = Q(x − P)/ε.
pub fn phi_eps(frame: &BoundaryFrame, x: &Point) -> Point {
    frame.local(x).scale(1.0 / frame.epsilon)
}

/// Φ_ε⁻¹(s) = P + εQᵀs.
pub fn phi_eps_inverse(frame: &BoundaryFrame, s: &Point) -> Point {
    frame.from_local(&s.scale(frame.epsilon))
}

/// The image Φ_ε(Ω) for the domains where it is again a model domain.
pub fn scaled_model_domain(frame: &BoundaryFrame, domain: &Domain) -> Result<Domain> {
    match domain {
        Domain::Ball { center, radius } => {
            Domain::ball(phi_eps(frame, center), radius / frame.epsilon)
        }
        Domain::Halfspace { dim } => {
            // A halfspace frame has Q = I and base on {x_d = 0}, so the
            // dilation maps the halfspace onto itself.
            let e = Point::basis(*dim, dim - 1);
            if frame.inward_normal.distance(&e) > 1e-12 || frame.base.last().abs() > 1e-12 {
                return Err(Error::InvalidInput(
                    "frame does not belong to the halfspace".into(),
                ));
            }
            Ok(domain.clone())
        }
        other => Err(Error::Unsupported {
            operation: "scaled model domain",
            kind: other.describe(),
        }),
    }
}

/// s ↦ ρ(Φ_ε⁻¹(s)) / (ε |∇ρ(P)|).
#[derive(Clone, Debug)]
pub struct TransferredDefiningFunction {
    frame: BoundaryFrame,
    domain: Domain,
    gradient_norm: f64,
}

impl TransferredDefiningFunction {
    pub fn frame(&self) -> &BoundaryFrame {
        &self.frame
    }

    pub fn epsilon(&self) -> f64 {
        self.frame.epsilon
    }

    pub fn value(&self, s: &Point) -> f64 {
        let x = phi_eps_inverse(&self.frame, s);
        self.domain.rho(&x) / (self.frame.epsilon * self.gradient_norm)
    }

    /// ∇_s ρ_ε(s) = Q ∇ρ(Φ_ε⁻¹ s)/|∇ρ(P)|.
    pub fn gradient(&self, s: &Point) -> Point {
        let x = phi_eps_inverse(&self.frame, s);
        self.frame
            .rotation
            .apply(&self.domain.rho_gradient(&x))
            .scale(1.0 / self.gradient_norm)
    }

    /// −s_d + ε · ½ sᵀ (Q H Qᵀ) s / |∇ρ(P)|, the expansion through first order in ε.
    pub fn second_order_model(&self, s: &Point) -> f64 {
        let h = self.domain.rho_hessian(&self.frame.base);
        let q = &self.frame.rotation;
        let rotated = q.matmul(&h).matmul(&q.transpose());
        -s.last() + self.frame.epsilon * 0.5 * rotated.quadratic_form(s) / self.gradient_norm
    }

    /// The same transfer at a different scale.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        TransferredDefiningFunction {
            frame: self.frame.with_epsilon(epsilon),
            ..self.clone()
        }
    }
}

pub fn transfer_defining_function(
    frame: &BoundaryFrame,
    domain: &Domain,
) -> Result<TransferredDefiningFunction> {
    frame.base.check_dim(domain.dim())?;
    let gradient_norm = domain.rho_gradient(&frame.base).norm();
    if !(gradient_norm > 1e-14) {
        return Err(Error::DegenerateGradient {
            norm: gradient_norm,
        });
    }
    Ok(TransferredDefiningFunction {
        frame: frame.clone(),
        domain: domain.clone(),
        gradient_norm,
    })
}

/// Halton radical inverse in the given prime base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut f = inv;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    result
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// The first `count` Halton points of the cube [−radius, radius]^d that fall
/// inside the ball of that radius.
pub fn halton_ball_grid(dim: usize, radius: f64, count: usize) -> Vec<Point> {
    assert!(
        dim <= PRIMES.len(),
        "Halton grid supports d <= {}",
        PRIMES.len()
    );
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let p = Point::new(
            PRIMES[..dim]
                .iter()
                .map(|&b| radius * (2.0 * radical_inverse(index, b) - 1.0))
                .collect(),
        );
        if p.norm() <= radius {
            out.push(p);
        }
        index += 1;
    }
    out
}

/// sup over a deterministic grid of {|s| ≤ radius} of |ρ_ε(s) + s_d|.
pub fn linearization_gap(tdf: &TransferredDefiningFunction, radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(halton_ball_grid(tdf.frame.dim(), radius, GAP_GRID_POINTS)
        .iter()
        .map(|s| (tdf.value(s) + s.last()).abs())
        .fold(0.0, f64::max))
}

/// K_ε(x, τ) = ε^{−(d−1)} P_{Φ_ε(Ω)}(Φ_ε x, Φ_ε τ).
pub fn kernel_pullback(
    frame: &BoundaryFrame,
    scaled_kernel: &dyn KernelEvaluator,
    x: &Point,
    tau: &Point,
) -> Result<KernelEstimate> {
    let d = frame.dim();
    let jacobian = frame.epsilon.powi(-(d as i32 - 1));
    let k = scaled_kernel.evaluate(&phi_eps(frame, x), &phi_eps(frame, tau))?;
    Ok(KernelEstimate {
        value: jacobian * k.value,
        std_error: jacobian * k.std_error,
    })
}

/// The halfspace kernel in frame coordinates centred at P:
/// c_d · x̃_d / (|x̃′ − τ̃′|² + x̃_d²)^{d/2} with x̃ = Q(x − P), τ̃ = Q(τ − P).
pub fn halfspace_surrogate(frame: &BoundaryFrame, x: &Point, tau: &Point) -> f64 {
    let d = frame.dim();
    let xl = frame.local(x);
    let tl = frame.local(tau);
    let h = xl.last();
    let tangential: f64 = xl
        .tangential()
        .iter()
        .zip(tl.tangential())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    halfspace_constant(d) * h / (tangential + h * h).powf(d as f64 / 2.0)
}

/// Scaling diagnostics at one ε, as reported by the `scale` command.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleDiagnostic {
    pub epsilon: f64,
    pub linearization_gap: f64,
    pub rho_eps_at_origin: f64,
    pub normal_derivative_at_origin: f64,
    pub interior_point_image: Vec<f64>,
}

pub fn scale_diagnostic(
    domain: &Domain,
    base: &Point,
    epsilon: f64,
    radius: f64,
) -> Result<ScaleDiagnostic> {
    let frame = BoundaryFrame::new(domain, base.clone(), epsilon)?;
    let tdf = transfer_defining_function(&frame, domain)?;
    let origin = Point::zeros(domain.dim());
    Ok(ScaleDiagnostic {
        epsilon,
        linearization_gap: linearization_gap(&tdf, radius)?,
        rho_eps_at_origin: tdf.value(&origin),
        normal_derivative_at_origin: tdf.gradient(&origin).last(),
        interior_point_image: phi_eps(&frame, &frame.interior_point()).into_coords(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_kernels::{poisson_ball, ModelKernel};

    fn disc() -> Domain {
        Domain::unit_ball(2).unwrap()
    }

    fn bottom_frame(eps: f64) -> BoundaryFrame {
        BoundaryFrame::new(&disc(), Point::from([0.0, -1.0]), eps).unwrap()
    }

    #[test]
    fn interior_point_maps_to_last_axis() {
        let f = bottom_frame(0.25);
        assert!(phi_eps(&f, &f.interior_point()).distance(&Point::from([0.0, 1.0])) < 1e-15);
        let f = BoundaryFrame::new(&disc(), Point::from([1.0, 0.0]), 0.3).unwrap();
        assert!(phi_eps(&f, &f.interior_point()).distance(&Point::from([0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn phi_eps_example() {
        let s = phi_eps(&bottom_frame(0.25), &Point::from([0.0, -0.5]));
        assert!(s.distance(&Point::from([0.0, 2.0])) < 1e-15);
    }

    #[test]
    fn transferred_disc_function_examples() {
        let tdf = transfer_defining_function(&bottom_frame(0.1), &disc()).unwrap();
        assert!((tdf.value(&Point::from([1.0, 0.0])) - 0.05).abs() < 1e-14);
        assert!((tdf.value(&Point::from([0.0, 1.0])) + 0.95).abs() < 1e-14);
        assert_eq!(tdf.value(&Point::zeros(2)), 0.0);
        // The disc's normalised ρ is exactly quadratic.
        for s in [[0.3, -0.2], [1.5, 0.7]] {
            let s = Point::from(s);
            assert!((tdf.value(&s) - tdf.second_order_model(&s)).abs() < 1e-13);
        }
    }

    #[test]
    fn halfspace_transfer_is_linear() {
        let h = Domain::halfspace(3).unwrap();
        for eps in [1.0, 0.1, 1e-3] {
            let f = BoundaryFrame::new(&h, Point::from([2.0, -1.0, 0.0]), eps).unwrap();
            let tdf = transfer_defining_function(&f, &h).unwrap();
            let s = Point::from([0.3, 0.4, -0.7]);
            assert!((tdf.value(&s) + s.last()).abs() < 1e-15);
            assert!(linearization_gap(&tdf, 1.0).unwrap() < 1e-15);
        }
    }

    #[test]
    fn disc_gap_is_half_epsilon() {
        let tdf = transfer_defining_function(&bottom_frame(0.1), &disc()).unwrap();
        let g1 = linearization_gap(&tdf, 1.0).unwrap();
        let g2 = linearization_gap(&tdf.with_epsilon(0.05), 1.0).unwrap();
        assert!((g1 - 0.05).abs() < 1e-3, "{g1}");
        assert!((g2 - 0.025).abs() < 1e-3, "{g2}");
        assert!((g2 / g1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ellipse_frame_normalization() {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        let t: f64 = 0.7;
        let base = Point::from([2.0 * t.cos(), t.sin()]);
        let f = BoundaryFrame::new(&e, base, 0.05).unwrap();
        let tdf = transfer_defining_function(&f, &e).unwrap();
        let origin = Point::zeros(2);
        assert!(tdf.value(&origin).abs() < 1e-12);
        let g = tdf.gradient(&origin);
        assert!((g.last() + 1.0).abs() < 1e-12);
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn surrogate_on_disc_has_relative_gap_half_h() {
        let f = bottom_frame(0.1);
        let tau = Point::from([0.0, -1.0]);
        for h in [0.2, 0.1, 0.01] {
            let x = Point::from([0.0, -1.0 + h]);
            let s = halfspace_surrogate(&f, &x, &tau);
            let exact = poisson_ball(2, &x, &tau).unwrap();
            assert!((s - 1.0 / (std::f64::consts::PI * h)).abs() < 1e-9 * s);
            let gap = (s - exact).abs() / exact;
            // exact = (1/π)(1 − h/2)/h, so surrogate/exact − 1 = (h/2)/(1 − h/2)
            assert!((gap - (h / 2.0) / (1.0 - h / 2.0)).abs() < 1e-9);
        }
        let x = Point::from([0.0, -0.99]);
        let tau = Point::from([0.02f64.sin(), -(0.02f64.cos())]);
        let s = halfspace_surrogate(&f, &x, &tau);
        let exact = poisson_ball(2, &x, &tau).unwrap();
        assert!((s - exact).abs() / exact < 0.05);
    }

    #[test]
    fn surrogate_equals_halfspace_kernel_on_halfspace() {
        let h = Domain::halfspace(2).unwrap();
        let f = BoundaryFrame::new(&h, Point::zeros(2), 1.0).unwrap();
        let k = ModelKernel::new(h).unwrap();
        let x = Point::from([0.3, 0.2]);
        let t = Point::from([-0.4, 0.0]);
        assert_eq!(halfspace_surrogate(&f, &x, &t), k.value(&x, &t).unwrap());
    }

    #[test]
    fn pullback_matches_exact_disc_kernel() {
        let f = bottom_frame(0.3);
        let scaled = ModelKernel::new(scaled_model_domain(&f, &disc()).unwrap()).unwrap();
        match scaled.domain() {
            Domain::Ball { center, radius } => {
                assert!(center.distance(&Point::from([0.0, 1.0 / 0.3])) < 1e-12);
                assert!((radius - 1.0 / 0.3).abs() < 1e-12);
            }
            _ => panic!("expected a ball"),
        }
        let x = Point::from([0.2, -0.7]);
        let tau = Point::from([0.6, -0.8]);
        let k = kernel_pullback(&f, &scaled, &x, &tau).unwrap().value;
        let p = poisson_ball(2, &x, &tau).unwrap();
        assert!(((k - p) / p).abs() < 1e-12);
    }

    #[test]
    fn halton_grid_is_deterministic_and_inside() {
        let a = halton_ball_grid(3, 2.0, 500);
        let b = halton_ball_grid(3, 2.0, 500);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.norm() <= 2.0));
    }
}
