use std::fmt::Debug;

use super::point::{solve_dense, Matrix, Point};
use super::polynomial::PolynomialField;
use super::{BoundaryProjection, PROJECTION_TIE_TOLERANCE};
use crate::error::{Error, Result};

/// A C² scalar field ρ with exact first and second derivatives.
pub trait DefiningFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn hessian(&self, x: &Point) -> Matrix;
}

impl DefiningFunction for PolynomialField {
    fn dim(&self) -> usize {
        PolynomialField::dim(self)
    }
    fn value(&self, x: &Point) -> f64 {
        PolynomialField::value(self, x)
    }
    fn gradient(&self, x: &Point) -> Point {
        PolynomialField::gradient(self, x)
    }
    fn hessian(&self, x: &Point) -> Matrix {
        PolynomialField::hessian(self, x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    lo: Point,
    hi: Point,
}

impl BoundingBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        lo.check_dim(hi.dim())?;
        if lo.coords().iter().zip(hi.coords()).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidInput(
                "bounding box needs lo < hi on every axis".into(),
            ));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.coords()
            .iter()
            .zip(self.lo.coords().iter().zip(self.hi.coords()))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn diagonal(&self) -> f64 {
        self.lo.distance(&self.hi)
    }
}

const NEWTON_MAX_ITERATIONS: usize = 100;
const KKT_TOLERANCE: f64 = 1e-12;
/// Newton starts per query, taken from the nearest boundary seeds.
const STARTS_PER_QUERY: usize = 6;
/// Seeds closer than this are considered the same foot.
const DISTINCT_FEET: f64 = 1e-6;

/// A bounded domain {ρ < 0} inside a bounding box.
#[derive(Debug)]
pub struct ImplicitDomain {
    rho: Box<dyn DefiningFunction>,
    bbox: BoundingBox,
    witness: Point,
    seeds: Vec<Point>,
    degree: u32,
}

impl ImplicitDomain {
    pub fn from_polynomial(
        field: PolynomialField,
        bbox: BoundingBox,
        witness: Point,
    ) -> Result<Self> {
        let degree = field.polynomial().degree();
        Self::new(Box::new(field), degree, bbox, witness)
    }

    /// Validates the interior witness and samples the zero set on a grid over
    /// the bounding box; the samples seed every later projection.
    pub fn new(
        rho: Box<dyn DefiningFunction>,
        degree: u32,
        bbox: BoundingBox,
        witness: Point,
    ) -> Result<Self> {
        let dim = rho.dim();
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        bbox.lo.check_dim(dim)?;
        witness.check_dim(dim)?;
        if !bbox.contains(&witness) {
            return Err(Error::InvalidInput(
                "interior witness lies outside the bounding box".into(),
            ));
        }
        let w = rho.value(&witness);
        if !(w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "defining function is not negative at the interior witness (rho = {w})"
            )));
        }
        let seeds = sample_zero_set(rho.as_ref(), &bbox)?;
        if seeds.is_empty() {
            return Err(Error::InvalidInput(
                "no boundary found inside the bounding box".into(),
            ));
        }
        Ok(ImplicitDomain {
            rho,
            bbox,
            witness,
            seeds,
            degree,
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn witness(&self) -> &Point {
        &self.witness
    }

    pub fn boundary_seeds(&self) -> &[Point] {
        &self.seeds
    }

    pub fn rho(&self, x: &Point) -> f64 {
        self.rho.value(x)
    }

    pub fn rho_gradient(&self, x: &Point) -> Point {
        self.rho.gradient(x)
    }

    pub fn rho_hessian(&self, x: &Point) -> Matrix {
        self.rho.hessian(x)
    }

    pub fn signed_distance(&self, x: &Point) -> Result<f64> {
        Ok(self.nearest(x)?.1)
    }

    pub fn project(&self, x: &Point) -> Result<BoundaryProjection> {
        let (foot, signed_distance, tie) = self.nearest(x)?;
        if let Some(second) = tie {
            return Err(Error::AmbiguousProjection {
                first: foot.into_coords(),
                second: second.into_coords(),
            });
        }
        let g = self.rho.gradient(&foot);
        let norm = g.norm();
        if !(norm > 1e-14) {
            return Err(Error::DegenerateGradient { norm });
        }
        Ok(BoundaryProjection {
            inward_normal: g.scale(-1.0 / norm),
            foot,
            signed_distance,
        })
    }

    /// (foot, signed distance, tied second foot)
    fn nearest(&self, x: &Point) -> Result<(Point, f64, Option<Point>)> {
        x.check_dim(self.dim())?;
        if !self.bbox.contains(x) {
            return Err(Error::InvalidInput(
                "query point lies outside the implicit domain's bounding box".into(),
            ));
        }
        let mut ranked: Vec<(f64, usize)> = self
            .seeds
            .iter()
            .enumerate()
            .map(|(i, s)| (s.distance(x), i))
            .collect();
        let k = STARTS_PER_QUERY.min(ranked.len());
        ranked.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        ranked.truncate(k);
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut feet: Vec<(f64, Point)> = Vec::new();
        let mut last_residual = f64::INFINITY;
        for &(_, i) in &ranked {
            match self.lagrange_newton(x, &self.seeds[i]) {
                Ok(foot) => feet.push((foot.distance(x), foot)),
                Err(Error::NonConvergence { residual, .. }) => last_residual = residual,
                Err(e) => return Err(e),
            }
        }
        if feet.is_empty() {
            return Err(Error::NonConvergence {
                solver: "implicit projection",
                iterations: NEWTON_MAX_ITERATIONS,
                residual: last_residual,
            });
        }
        feet.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (dist, foot) = feet[0].clone();
        let tie = feet[1..]
            .iter()
            .find(|(d, p)| {
                (d - dist).abs() <= PROJECTION_TIE_TOLERANCE && p.distance(&foot) > DISTINCT_FEET
            })
            .map(|(_, p)| p.clone());
        let sign = if self.rho.value(x) < 0.0 { -1.0 } else { 1.0 };
        Ok((foot, sign * dist, tie))
    }

    /// Damped Newton on y − x + λ∇ρ(y) = 0, ρ(y) = 0.
    fn lagrange_newton(&self, x: &Point, start: &Point) -> Result<Point> {
        let d = self.dim();
        let mut y = start.clone();
        let g0 = self.rho.gradient(&y);
        let mut lambda = (x - &y).dot(&g0) / g0.norm_squared().max(1e-300);
        let scale = x.norm().max(1.0);

        let residual = |y: &Point, lambda: f64| -> Vec<f64> {
            let g = self.rho.gradient(y);
            let mut r: Vec<f64> = (0..d).map(|i| y[i] - x[i] + lambda * g[i]).collect();
            r.push(self.rho.value(y));
            r
        };
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut r = residual(&y, lambda);
        for _ in 0..NEWTON_MAX_ITERATIONS {
            if r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < KKT_TOLERANCE * scale {
                return Ok(y);
            }
            let g = self.rho.gradient(&y);
            let h = self.rho.hessian(&y);
            let n = d + 1;
            let mut jac = vec![0.0; n * n];
            for i in 0..d {
                for j in 0..d {
                    jac[i * n + j] = lambda * h[(i, j)] + if i == j { 1.0 } else { 0.0 };
                }
                jac[i * n + d] = g[i];
                jac[d * n + i] = g[i];
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let Some(step) = solve_dense(jac, rhs) else {
                break;
            };
            let current = norm(&r);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let ty = Point::new((0..d).map(|i| y[i] + t * step[i]).collect());
                let tl = lambda + t * step[d];
                let tr = residual(&ty, tl);
                if norm(&tr) < current || norm(&tr) == 0.0 {
                    y = ty;
                    lambda = tl;
                    r = tr;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if res < KKT_TOLERANCE * scale {
            return Ok(y);
        }
        Err(Error::NonConvergence {
            solver: "implicit projection",
            iterations: NEWTON_MAX_ITERATIONS,
            residual: res,
        })
    }
}

/// Grid resolution per axis for the zero-set sampling.
fn grid_points_per_axis(dim: usize) -> usize {
    match dim {
        2 => 96,
        3 => 28,
        _ => ((20_000f64).powf(1.0 / dim as f64) as usize).max(4),
    }
}

/// Finds sign changes of ρ along grid edges, interpolates linearly and then
/// pulls each crossing onto ρ = 0 with a few Newton steps along ∇ρ.
fn sample_zero_set(rho: &dyn DefiningFunction, bbox: &BoundingBox) -> Result<Vec<Point>> {
    let d = rho.dim();
    let n = grid_points_per_axis(d);
    let total = n.pow(d as u32);
    let node = |mut idx: usize| -> Point {
        let mut p = Point::zeros(d);
        for k in 0..d {
            let i = idx % n;
            idx /= n;
            let (l, h) = (bbox.lo[k], bbox.hi[k]);
            p[k] = l + (h - l) * i as f64 / (n - 1) as f64;
        }
        p
    };
    let values: Vec<f64> = (0..total).map(|i| rho.value(&node(i))).collect();
    let mut seeds = Vec::new();
    for idx in 0..total {
        let mut stride = 1;
        let mut rem = idx;
        for _ in 0..d {
            let i = rem % n;
            rem /= n;
            if i + 1 < n {
                let j = idx + stride;
                let (a, b) = (values[idx], values[j]);
                if (a < 0.0) != (b < 0.0) {
                    let t = a / (a - b);
                    let (pa, pb) = (node(idx), node(j));
                    let mut p = pa.offset(&(&pb - &pa), t);
                    for _ in 0..8 {
                        let g = rho.gradient(&p);
                        let gn = g.norm_squared();
                        if gn == 0.0 {
                            break;
                        }
                        p = p.offset(&g, -rho.value(&p) / gn);
                    }
                    let gnorm = rho.gradient(&p).norm();
                    if !(gnorm > 1e-12) {
                        return Err(Error::DegenerateGradient { norm: gnorm });
                    }
                    if (rho.value(&p) / gnorm).abs() < 1e-10 && bbox.contains(&p) {
                        seeds.push(p);
                    }
                }
            }
            stride *= n;
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Polynomial};

    fn ellipse_poly() -> Domain {
        // x²/4 + y² − 1
        let p = Polynomial::new(
            2,
            [(vec![2, 0], 0.25), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
        )
        .unwrap();
        let bbox = BoundingBox::new(Point::from([-3.0, -2.0]), Point::from([3.0, 2.0])).unwrap();
        Domain::implicit(
            ImplicitDomain::from_polynomial(PolynomialField::new(p), bbox, Point::from([0.0, 0.0]))
                .unwrap(),
        )
    }

    #[test]
    fn implicit_ellipse_agrees_with_closed_form_model() {
        let implicit = ellipse_poly();
        let model = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        for x in [
            [0.3, 0.2],
            [1.5, 0.3],
            [-1.2, -0.5],
            [0.0, 0.9],
            [2.5, 1.0],
            [1.9, -0.05],
        ] {
            let x = Point::from(x);
            let a = implicit.signed_distance(&x).unwrap();
            let b = model.signed_distance(&x).unwrap();
            assert!((a - b).abs() < 1e-10, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn implicit_projection_satisfies_contract() {
        let dom = ellipse_poly();
        let x = Point::from([0.8, -0.3]);
        let p = dom.project_to_boundary(&x).unwrap();
        assert!(dom.rho(&p.foot).abs() < 1e-10);
        let dir = (&x - &p.foot).normalized().unwrap();
        assert!(dir.distance(&p.inward_normal) < 1e-8);
    }

    #[test]
    fn implicit_medial_axis_is_ambiguous() {
        let dom = ellipse_poly();
        assert!(matches!(
            dom.project_to_boundary(&Point::from([1.0, 0.0])),
            Err(Error::AmbiguousProjection { .. })
        ));
    }

    #[test]
    fn witness_must_be_inside() {
        let p = Polynomial::new(
            2,
            [(vec![2, 0], 1.0), (vec![0, 2], 1.0), (vec![0, 0], -1.0)],
        )
        .unwrap();
        let bbox = BoundingBox::new(Point::from([-2.0, -2.0]), Point::from([2.0, 2.0])).unwrap();
        let err =
            ImplicitDomain::from_polynomial(PolynomialField::new(p), bbox, Point::from([1.5, 0.0]));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn query_outside_bounding_box_is_rejected() {
        let dom = ellipse_poly();
        assert!(dom.signed_distance(&Point::from([10.0, 0.0])).is_err());
    }
}
