use serde::Serialize;

use super::point::{Matrix, Point};
use super::Domain;
use crate::error::{Error, Result};

/// Boundary-normalised coordinates at a base point P.
///
/// `rotation` Q is orthogonal with det Q = +1 and maps the inward normal ν to
/// e_d, so in frame coordinates P is the origin and the normal is the last axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryFrame {
    pub base: Point,
    pub inward_normal: Point,
    pub rotation: Matrix,
    pub epsilon: f64,
}

impl BoundaryFrame {
    pub fn new(domain: &Domain, base: Point, epsilon: f64) -> Result<Self> {
        domain.check_on_boundary(&base)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let inward_normal = domain.inward_normal(&base)?;
        let rotation = rotation_to_last_axis(&inward_normal);
        let interior = base.offset(&inward_normal, epsilon);
        if !domain.contains(&interior)? {
            return Err(Error::InvalidInput(format!(
                "epsilon {epsilon} too large: base + epsilon * normal is not interior"
            )));
        }
        Ok(BoundaryFrame {
            base,
            inward_normal,
            rotation,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The point P⁰ = P + εν.
    pub fn interior_point(&self) -> Point {
        self.base.offset(&self.inward_normal, self.epsilon)
    }

    /// Q(x − P), unscaled.
    pub fn local(&self, x: &Point) -> Point {
        self.rotation.apply(&(x - &self.base))
    }

    /// P + Qᵀ y
    pub fn from_local(&self, y: &Point) -> Point {
        &self.base + &self.rotation.apply_transpose(y)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        BoundaryFrame {
            epsilon,
            ..self.clone()
        }
    }
}

/// Deterministic Gram–Schmidt: the last row is ν; the other rows come from
/// the standard basis in index order, skipping the axis where |ν_i| is
/// largest. A final sign flip of the first row enforces det = +1.
pub(crate) fn rotation_to_last_axis(normal: &Point) -> Matrix {
    let d = normal.dim();
    let skip = (0..d)
        .max_by(|&i, &j| normal[i].abs().total_cmp(&normal[j].abs()).then(j.cmp(&i)))
        .unwrap();
    let mut rows: Vec<Point> = Vec::with_capacity(d);
    for axis in (0..d).filter(|&i| i != skip) {
        let mut v = Point::basis(d, axis);
        for _ in 0..2 {
            for u in rows.iter().chain(std::iter::once(normal)) {
                let c = v.dot(u);
                v = v.offset(u, -c);
            }
        }
        rows.push(v.normalized().expect("basis residual is nonzero"));
    }
    rows.push(normal.clone());
    let mut q = Matrix::from_rows(&rows);
    if q.determinant() < 0.0 {
        for j in 0..d {
            q[(0, j)] = -q[(0, j)];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_frames_match_examples() {
        let disc = Domain::unit_ball(2).unwrap();
        let f = BoundaryFrame::new(&disc, Point::from([0.0, -1.0]), 0.1).unwrap();
        assert_eq!(f.inward_normal.coords(), &[0.0, 1.0]);
        assert_eq!(f.rotation, Matrix::identity(2));

        let f = BoundaryFrame::new(&disc, Point::from([1.0, 0.0]), 0.1).unwrap();
        assert_eq!(f.inward_normal.coords(), &[-1.0, 0.0]);
        let expected = Matrix::from_rows(&[Point::from([0.0, 1.0]), Point::from([-1.0, 0.0])]);
        assert!(f.rotation.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn halfspace_frame_is_identity() {
        let h = Domain::halfspace(2).unwrap();
        let f = BoundaryFrame::new(&h, Point::from([7.0, 0.0]), 3.0).unwrap();
        assert_eq!(f.inward_normal.coords(), &[0.0, 1.0]);
        assert_eq!(f.rotation, Matrix::identity(2));
    }

    #[test]
    fn base_must_lie_on_boundary() {
        let disc = Domain::unit_ball(2).unwrap();
        assert!(matches!(
            BoundaryFrame::new(&disc, Point::from([0.0, -0.9]), 0.1),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn epsilon_must_keep_interior_point_inside() {
        let disc = Domain::unit_ball(2).unwrap();
        assert!(BoundaryFrame::new(&disc, Point::from([0.0, -1.0]), 2.5).is_err());
        assert!(BoundaryFrame::new(&disc, Point::from([0.0, -1.0]), 0.0).is_err());
    }

    #[test]
    fn rotation_is_proper_for_generic_normals() {
        for n in [
            [0.3, -0.4, 0.866_025_403_784_438_6],
            [-1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [0.577, 0.577, 0.577],
        ] {
            let nu = Point::from(n).normalized().unwrap();
            let q = rotation_to_last_axis(&nu);
            let qtq = q.transpose().matmul(&q);
            assert!(qtq.max_abs_diff(&Matrix::identity(3)) < 1e-12);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
            assert!(q.apply(&nu).distance(&Point::basis(3, 2)) < 1e-12);
        }
    }
}
