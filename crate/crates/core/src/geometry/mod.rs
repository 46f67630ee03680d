//! Domains, distance to the boundary, boundary frames and boundary quadrature.
//!
//! Every domain is described by a defining function ρ with ρ < 0 inside,
//! ρ = 0 on the boundary and ∇ρ ≠ 0 there. The model domains (ball,
//! halfspace, axis-aligned ellipse/ellipsoid) carry closed-form ρ and
//! closed-form or one-dimensional projection; implicit domains are given by
//! a polynomial ρ and are projected by damped Newton on the Lagrange system.

pub(crate) mod frame;
mod implicit;
mod point;
mod polynomial;
mod quadrature;

use std::sync::Arc;

pub use frame::BoundaryFrame;
pub use implicit::{BoundingBox, DefiningFunction, ImplicitDomain};
pub use point::{Matrix, Point};
pub use polynomial::{Polynomial, PolynomialField};
pub use quadrature::{
    boundary_quadrature, gauss_legendre, truncated_halfspace_quadrature, BoundaryQuadrature,
    QuadratureNode,
};

use crate::error::{Error, Result};

/// Two candidate feet closer than this in distance are treated as a tie.
pub const PROJECTION_TIE_TOLERANCE: f64 = 1e-8;

/// Boundary membership tolerance, measured as the first-order distance |ρ|/|∇ρ|.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum Domain {
    Ball {
        center: Point,
        radius: f64,
    },
    /// The upper halfspace {x_d > 0}.
    Halfspace {
        dim: usize,
    },
    /// Axis-aligned ellipse (d = 2) or ellipsoid centred at the origin.
    Ellipse {
        semi_axes: Vec<f64>,
    },
    Implicit(Arc<ImplicitDomain>),
}

/// Closest boundary point of a query point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryProjection {
    pub foot: Point,
    /// Inward unit normal at the foot, −∇ρ/|∇ρ|.
    pub inward_normal: Point,
    /// Negative inside, positive outside.
    pub signed_distance: f64,
}

impl Domain {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if center.dim() < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be >= 2, got {}",
                center.dim()
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::InvalidInput("ball center must be finite".into()));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(Point::zeros(dim), 1.0)
    }

    pub fn halfspace(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        Ok(Domain::Halfspace { dim })
    }

    pub fn ellipse(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be >= 2, got {}",
                semi_axes.len()
            )));
        }
        if semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput("semi-axes must be positive".into()));
        }
        Ok(Domain::Ellipse { semi_axes })
    }

    pub fn implicit(domain: ImplicitDomain) -> Self {
        Domain::Implicit(Arc::new(domain))
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.dim(),
            Domain::Halfspace { dim } => *dim,
            Domain::Ellipse { semi_axes } => semi_axes.len(),
            Domain::Implicit(d) => d.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Domain::Ball { .. } => "ball",
            Domain::Halfspace { .. } => "halfspace",
            Domain::Ellipse { .. } => "ellipse",
            Domain::Implicit(_) => "implicit_polynomial",
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::Halfspace { .. })
    }

    /// Diameter, or `None` for the halfspace.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            Domain::Ball { radius, .. } => Some(2.0 * radius),
            Domain::Halfspace { .. } => None,
            Domain::Ellipse { semi_axes } => {
                Some(2.0 * semi_axes.iter().cloned().fold(0.0, f64::max))
            }
            Domain::Implicit(d) => Some(d.bounding_box().diagonal()),
        }
    }

    /// ρ(x). Models use ρ normalised so that |∇ρ| = 1 on the boundary where
    /// that is free (ball, halfspace); the ellipse uses Σ(x_i/a_i)² − 1.
    pub fn rho(&self, x: &Point) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                ((x - center).norm_squared() - radius * radius) / (2.0 * radius)
            }
            Domain::Halfspace { .. } => -x.last(),
            Domain::Ellipse { semi_axes } => {
                x.coords()
                    .iter()
                    .zip(semi_axes)
                    .map(|(xi, a)| (xi / a) * (xi / a))
                    .sum::<f64>()
                    - 1.0
            }
            Domain::Implicit(d) => d.rho(x),
        }
    }

    pub fn rho_gradient(&self, x: &Point) -> Point {
        match self {
            Domain::Ball { center, radius } => (x - center).scale(1.0 / radius),
            Domain::Halfspace { dim } => Point::basis(*dim, dim - 1).scale(-1.0),
            Domain::Ellipse { semi_axes } => Point::new(
                x.coords()
                    .iter()
                    .zip(semi_axes)
                    .map(|(xi, a)| 2.0 * xi / (a * a))
                    .collect(),
            ),
            Domain::Implicit(d) => d.rho_gradient(x),
        }
    }

    pub fn rho_hessian(&self, x: &Point) -> Matrix {
        match self {
            Domain::Ball { center, radius } => {
                let mut h = Matrix::identity(center.dim());
                for i in 0..center.dim() {
                    h[(i, i)] = 1.0 / radius;
                }
                h
            }
            Domain::Halfspace { dim } => Matrix::zeros(*dim),
            Domain::Ellipse { semi_axes } => {
                let mut h = Matrix::zeros(semi_axes.len());
                for (i, a) in semi_axes.iter().enumerate() {
                    h[(i, i)] = 2.0 / (a * a);
                }
                h
            }
            Domain::Implicit(d) => d.rho_hessian(x),
        }
    }

    /// Interior membership, ρ(x) < 0. Boundary points are not interior.
    pub fn contains(&self, x: &Point) -> Result<bool> {
        x.check_dim(self.dim())?;
        Ok(match self {
            Domain::Ball { center, radius } => (x - center).norm() < *radius,
            Domain::Halfspace { .. } => x.last() > 0.0,
            _ => self.rho(x) < 0.0,
        })
    }

    /// Signed Euclidean distance to the boundary: negative inside.
    pub fn signed_distance(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim())?;
        match self {
            Domain::Ball { center, radius } => Ok((x - center).norm() - radius),
            Domain::Halfspace { .. } => Ok(-x.last()),
            Domain::Ellipse { semi_axes } => Ok(ellipse_nearest(semi_axes, x)?.signed_distance),
            Domain::Implicit(d) => d.signed_distance(x),
        }
    }

    /// δ(x) = max(0, −signed_distance(x)).
    pub fn delta(&self, x: &Point) -> Result<f64> {
        Ok((-self.signed_distance(x)?).max(0.0))
    }

    /// Nearest boundary point and inward normal there.
    ///
    /// Works on either side of the boundary. Fails with
    /// [`Error::AmbiguousProjection`] when two distinct feet lie within
    /// [`PROJECTION_TIE_TOLERANCE`] of the same distance.
    pub fn project_to_boundary(&self, x: &Point) -> Result<BoundaryProjection> {
        x.check_dim(self.dim())?;
        match self {
            Domain::Ball { center, radius } => {
                let offset = x - center;
                let r = offset.norm();
                let Some(dir) = offset.normalized() else {
                    let e = Point::basis(x.dim(), 0);
                    return Err(Error::AmbiguousProjection {
                        first: center.offset(&e, *radius).into_coords(),
                        second: center.offset(&e, -radius).into_coords(),
                    });
                };
                Ok(BoundaryProjection {
                    foot: center.offset(&dir, *radius),
                    inward_normal: dir.scale(-1.0),
                    signed_distance: r - radius,
                })
            }
            Domain::Halfspace { dim } => {
                let mut foot = x.clone();
                foot[dim - 1] = 0.0;
                Ok(BoundaryProjection {
                    foot,
                    inward_normal: Point::basis(*dim, dim - 1),
                    signed_distance: -x.last(),
                })
            }
            Domain::Ellipse { semi_axes } => {
                let (foot, signed_distance) = ellipse_nearest(semi_axes, x)?.unique()?;
                let inward_normal = self.inward_normal(&foot)?;
                Ok(BoundaryProjection {
                    foot,
                    inward_normal,
                    signed_distance,
                })
            }
            Domain::Implicit(d) => d.project(x),
        }
    }

    /// −∇ρ/|∇ρ| at a point (normally a boundary point).
    pub fn inward_normal(&self, x: &Point) -> Result<Point> {
        let g = self.rho_gradient(x);
        let norm = g.norm();
        if !(norm > 1e-14) {
            return Err(Error::DegenerateGradient { norm });
        }
        Ok(g.scale(-1.0 / norm))
    }

    /// First-order distance of `x` from the zero set, |ρ(x)|/|∇ρ(x)|.
    pub fn boundary_residual(&self, x: &Point) -> f64 {
        let g = self.rho_gradient(x).norm();
        if g > 0.0 {
            self.rho(x).abs() / g
        } else {
            f64::INFINITY
        }
    }

    pub fn check_on_boundary(&self, x: &Point) -> Result<()> {
        x.check_dim(self.dim())?;
        let residual = self.boundary_residual(x);
        if residual > BOUNDARY_TOLERANCE {
            return Err(Error::NotOnBoundary { residual });
        }
        Ok(())
    }

    /// Returns δ(x), failing unless `x` is strictly interior.
    pub fn check_interior(&self, x: &Point) -> Result<f64> {
        let sd = self.signed_distance(x)?;
        if !(sd < 0.0) || !self.contains(x)? {
            return Err(Error::NotInterior {
                signed_distance: sd,
            });
        }
        Ok(-sd)
    }

    /// A canonical boundary point whose inward normal is +e_d (the "bottom"
    /// of the domain), used as the default frame base.
    pub fn default_base(&self) -> Result<Point> {
        let d = self.dim();
        match self {
            Domain::Ball { center, radius } => Ok(center.offset(&Point::basis(d, d - 1), -radius)),
            Domain::Halfspace { .. } => Ok(Point::zeros(d)),
            Domain::Ellipse { semi_axes } => Ok(Point::basis(d, d - 1).scale(-semi_axes[d - 1])),
            Domain::Implicit(dom) => {
                // Lowest point of the boundary along the last axis through the witness.
                let w = dom.witness();
                let below = dom.bounding_box().lo()[d - 1];
                let mut probe = w.clone();
                probe[d - 1] = below;
                let (mut inside, mut outside) = (w.last(), below);
                for _ in 0..200 {
                    let mid = 0.5 * (inside + outside);
                    probe[d - 1] = mid;
                    if dom.rho(&probe) < 0.0 {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                probe[d - 1] = 0.5 * (inside + outside);
                Ok(dom.project(&probe)?.foot)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Domain::Ball { center, radius } => {
                format!(
                    "ball(dim={}, center={:?}, radius={})",
                    center.dim(),
                    center.coords(),
                    radius
                )
            }
            Domain::Halfspace { dim } => format!("halfspace(dim={dim})"),
            Domain::Ellipse { semi_axes } => format!("ellipse(semi_axes={semi_axes:?})"),
            Domain::Implicit(d) => format!(
                "implicit_polynomial(dim={}, degree={})",
                d.dim(),
                d.degree()
            ),
        }
    }
}

struct Nearest {
    foot: Point,
    signed_distance: f64,
    /// A second foot at the same distance, when the projection is not unique.
    tie: Option<Point>,
}

impl Nearest {
    fn unique(self) -> Result<(Point, f64)> {
        match self.tie {
            Some(second) => Err(Error::AmbiguousProjection {
                first: self.foot.into_coords(),
                second: second.into_coords(),
            }),
            None => Ok((self.foot, self.signed_distance)),
        }
    }
}

/// Nearest point on the axis-aligned ellipsoid Σ(y_i/a_i)² = 1.
///
/// The foot is y_i = a_i² x_i / (a_i² + t) where t is the largest root of
/// F(t) = Σ (a_i x_i / (a_i² + t))² − 1. We solve in u = t + min a_i², where
/// F is convex and decreasing on u > 0, by safeguarded Newton.
fn ellipse_nearest(semi_axes: &[f64], x: &Point) -> Result<Nearest> {
    let d = semi_axes.len();
    let a2: Vec<f64> = semi_axes.iter().map(|a| a * a).collect();
    let m = a2.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift: Vec<f64> = a2.iter().map(|v| v - m).collect();
    let xs = x.coords();
    let rho = xs.iter().zip(&a2).map(|(xi, v)| xi * xi / v).sum::<f64>() - 1.0;
    let sign = if rho < 0.0 { -1.0 } else { 1.0 };

    let eval = |u: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for i in 0..d {
            if xs[i] == 0.0 {
                continue;
            }
            let q = semi_axes[i] * xs[i] / (shift[i] + u);
            f += q * q;
            df -= 2.0 * q * q / (shift[i] + u);
        }
        (f, df)
    };

    let foot_at = |u: f64| -> Point {
        Point::new(
            (0..d)
                .map(|i| {
                    if xs[i] == 0.0 {
                        0.0
                    } else {
                        a2[i] * xs[i] / (shift[i] + u)
                    }
                })
                .collect(),
        )
    };

    // Medial case: every minimal-axis coordinate is exactly zero and the
    // remaining terms cannot reach the ellipsoid with u > 0.
    let min_axes: Vec<usize> = (0..d).filter(|&i| shift[i] == 0.0).collect();
    if min_axes.iter().all(|&i| xs[i] == 0.0) {
        let f0 = (0..d)
            .filter(|i| shift[*i] > 0.0)
            .map(|i| {
                let q = semi_axes[i] * xs[i] / shift[i];
                q * q
            })
            .sum::<f64>()
            - 1.0;
        if f0 <= 0.0 {
            let mut foot = foot_at(0.0);
            let free = -f0;
            let k = min_axes[0];
            foot[k] = (m * free).sqrt();
            let dist = x.distance(&foot);
            let tie = (foot[k] > PROJECTION_TIE_TOLERANCE).then(|| {
                let mut mirror = foot.clone();
                mirror[k] = -foot[k];
                mirror
            });
            return Ok(Nearest {
                foot,
                signed_distance: sign * dist,
                tie,
            });
        }
    }

    let r: f64 = (0..d)
        .map(|i| (semi_axes[i] * xs[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    if r == 0.0 {
        // x is the centre and every axis is minimal: a sphere centre.
        let e = Point::basis(d, 0).scale(semi_axes[0]);
        return Ok(Nearest {
            signed_distance: -semi_axes[0],
            tie: Some(e.scale(-1.0)),
            foot: e,
        });
    }
    // F(r) <= 0 since shift_i + u >= u.
    let (mut lo, mut hi) = (0.0_f64, r);
    let mut u = r;
    let mut converged = false;
    for _ in 0..200 {
        let (f, df) = eval(u);
        if f > 0.0 {
            lo = lo.max(u);
        } else {
            hi = hi.min(u);
        }
        if f == 0.0 {
            converged = true;
            break;
        }
        let mut next = u - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= f64::EPSILON * hi
        {
            u = next;
            converged = true;
            break;
        }
        u = next;
    }
    if !converged {
        return Err(Error::NonConvergence {
            solver: "ellipse projection",
            iterations: 200,
            residual: eval(u).0.abs(),
        });
    }
    let mut foot = foot_at(u);
    // Pull the foot exactly onto the surface along the radial direction.
    let level = foot
        .coords()
        .iter()
        .zip(&a2)
        .map(|(y, v)| y * y / v)
        .sum::<f64>();
    if level > 0.0 {
        foot = foot.scale(1.0 / level.sqrt());
    }
    let dist = x.distance(&foot);

    // Reflections of the foot through coordinate hyperplanes stay on the
    // ellipsoid; a distinct reflected foot at the same distance is a tie.
    let tie = (0..d).find_map(|k| {
        let mut mirror = foot.clone();
        mirror[k] = -foot[k];
        (foot.distance(&mirror) > PROJECTION_TIE_TOLERANCE
            && (x.distance(&mirror) - dist).abs() <= PROJECTION_TIE_TOLERANCE)
            .then_some(mirror)
    });
    Ok(Nearest {
        foot,
        signed_distance: sign * dist,
        tie,
    })
}

/// Boundary frame at `base` with dilation `epsilon`; see [`BoundaryFrame::new`].
pub fn boundary_frame(domain: &Domain, base: &Point, epsilon: f64) -> Result<BoundaryFrame> {
    BoundaryFrame::new(domain, base.clone(), epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> Domain {
        Domain::unit_ball(2).unwrap()
    }

    /// Brute-force oracle: minimise |x - (a cosθ, b sinθ)| over a fine grid,
    /// then golden-section refine.
    fn ellipse_distance_oracle(a: f64, b: f64, x: [f64; 2]) -> f64 {
        let f = |t: f64| ((a * t.cos() - x[0]).powi(2) + (b * t.sin() - x[1]).powi(2)).sqrt();
        let n = 20_000;
        let (mut best, mut bt) = (f64::INFINITY, 0.0);
        for k in 0..n {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            if f(t) < best {
                best = f(t);
                bt = t;
            }
        }
        let h = std::f64::consts::TAU / n as f64;
        let (mut lo, mut hi) = (bt - h, bt + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        f(0.5 * (lo + hi))
    }

    #[test]
    fn contains_examples() {
        assert!(disc().contains(&Point::from([0.5, 0.0])).unwrap());
        assert!(!disc().contains(&Point::from([1.0, 0.0])).unwrap());
        let h = Domain::halfspace(3).unwrap();
        assert!(h.contains(&Point::from([5.0, -2.0, 0.1])).unwrap());
    }

    #[test]
    fn contains_rejects_dimension_mismatch() {
        assert!(matches!(
            disc().contains(&Point::from([0.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn signed_distance_examples() {
        assert!((disc().signed_distance(&Point::from([0.7, 0.0])).unwrap() + 0.3).abs() < 1e-15);
        let h = Domain::halfspace(2).unwrap();
        assert_eq!(h.signed_distance(&Point::from([3.0, 0.4])).unwrap(), -0.4);
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        // (1,0) sits on the medial axis: the distance is defined even though
        // the projection is not.
        let sd = e.signed_distance(&Point::from([1.0, 0.0])).unwrap();
        assert!((sd + (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((sd + 0.816497).abs() < 1e-6);
    }

    #[test]
    fn ellipse_distance_matches_brute_force() {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        for x in [
            [0.3, 0.2],
            [1.5, 0.3],
            [-1.2, -0.5],
            [0.0, 0.9],
            [2.5, 1.0],
            [0.1, -1.4],
        ] {
            let got = e.signed_distance(&Point::from(x)).unwrap().abs();
            let want = ellipse_distance_oracle(2.0, 1.0, x);
            assert!((got - want).abs() < 1e-10, "{x:?}: {got} vs {want}");
        }
    }

    #[test]
    fn projection_examples() {
        let p = disc()
            .project_to_boundary(&Point::from([0.5, 0.0]))
            .unwrap();
        assert_eq!(p.foot.coords(), &[1.0, 0.0]);
        assert_eq!(p.inward_normal.coords(), &[-1.0, 0.0]);

        let h = Domain::halfspace(2).unwrap();
        let p = h.project_to_boundary(&Point::from([3.0, 0.4])).unwrap();
        assert_eq!(p.foot.coords(), &[3.0, 0.0]);
        assert_eq!(p.inward_normal.coords(), &[0.0, 1.0]);
    }

    #[test]
    fn ellipse_medial_point_is_ambiguous() {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        match e.project_to_boundary(&Point::from([1.0, 0.0])) {
            Err(Error::AmbiguousProjection { first, second }) => {
                assert!((first[0] - 4.0 / 3.0).abs() < 1e-12);
                assert!((first[1].abs() - 5f64.sqrt() / 3.0).abs() < 1e-12);
                assert!((second[1] + first[1]).abs() < 1e-12);
            }
            other => panic!("expected ambiguity, got {other:?}"),
        }
        // Slightly off the axis the foot is unique and lands on the nearer side.
        let p = e.project_to_boundary(&Point::from([1.0, 1e-3])).unwrap();
        assert!(p.foot[1] > 0.0);
        let sd = p.signed_distance;
        assert!((sd + ellipse_distance_oracle(2.0, 1.0, [1.0, 1e-3])).abs() < 1e-10);
    }

    #[test]
    fn ball_center_projection_is_ambiguous() {
        assert!(matches!(
            disc().project_to_boundary(&Point::from([0.0, 0.0])),
            Err(Error::AmbiguousProjection { .. })
        ));
    }

    #[test]
    fn projection_normal_matches_gradient_on_ellipse() {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        let x = Point::from([0.7, 0.4]);
        let p = e.project_to_boundary(&x).unwrap();
        assert!(e.rho(&p.foot).abs() < 1e-14);
        let dir = (&x - &p.foot).normalized().unwrap();
        assert!(dir.distance(&p.inward_normal) < 1e-8);
        assert!((x.distance(&p.foot) + p.signed_distance).abs() < 1e-12);
    }

    #[test]
    fn constructor_validation() {
        assert!(Domain::ball(Point::from([0.0, 0.0]), 0.0).is_err());
        assert!(Domain::ball(Point::new(vec![0.0]), 1.0).is_err());
        assert!(Domain::halfspace(1).is_err());
        assert!(Domain::ellipse(vec![2.0, -1.0]).is_err());
    }

    #[test]
    fn default_bases_have_upward_normals() {
        for dom in [
            disc(),
            Domain::unit_ball(3).unwrap(),
            Domain::halfspace(3).unwrap(),
            Domain::ellipse(vec![2.0, 1.0]).unwrap(),
        ] {
            let b = dom.default_base().unwrap();
            dom.check_on_boundary(&b).unwrap();
            let n = dom.inward_normal(&b).unwrap();
            assert!(n.distance(&Point::basis(dom.dim(), dom.dim() - 1)) < 1e-14);
        }
    }
}
