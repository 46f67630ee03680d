//! Empirical boundary asymptotics of the Poisson kernel.
//!
//! The two-sided estimate c₁ δ(x)/|x − y|^d ≤ P(x, y) ≤ c₂ δ(x)/|x − y|^d is
//! probed through the ratio P(x, y)·|x − y|^d/δ(x). Sweeps along inward
//! normals report the observed min/max ratio as empirical c₁, c₂ for that
//! exact grid; nothing is extrapolated.
//!
//! The derivative analogue is reported per direction and never asserted:
//! on the halfspace the normal-derivative ratio grows like |x − y|/δ(x),
//! so a two-sided band cannot hold in every direction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::model_kernels::{KernelEvaluator, ModelKernel};

/// Records with separation at least this are tagged far-field by default.
pub const DEFAULT_FAR_FIELD_SEPARATION: f64 = 0.5;

/// Direction/regime thresholds for flagging unbounded derivative ratios.
pub const NORMAL_COMPONENT_THRESHOLD: f64 = 0.5;
pub const FAR_FROM_BOUNDARY_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRecord {
    pub x: Point,
    pub y: Point,
    pub delta: f64,
    pub separation: f64,
    pub kernel: f64,
    pub kernel_std_error: f64,
    /// kernel · separation^d / delta
    pub ratio: f64,
    pub ratio_std_error: f64,
}

/// P(x, y)·|x − y|^d/δ(x) for interior x and boundary y.
pub fn kernel_ratio(
    domain: &Domain,
    kernel: &dyn KernelEvaluator,
    x: &Point,
    y: &Point,
) -> Result<RatioRecord> {
    let delta = domain.check_interior(x)?;
    domain.check_on_boundary(y)?;
    let estimate = kernel.evaluate(x, y)?;
    ratio_record(
        domain.dim(),
        x,
        y,
        delta,
        estimate.value,
        estimate.std_error,
    )
}

fn ratio_record(
    dim: usize,
    x: &Point,
    y: &Point,
    delta: f64,
    kernel: f64,
    kernel_std_error: f64,
) -> Result<RatioRecord> {
    let separation = x.distance(y);
    if !(separation > 0.0) {
        return Err(Error::InvalidInput("x and y coincide".into()));
    }
    let factor = separation.powi(dim as i32) / delta;
    Ok(RatioRecord {
        x: x.clone(),
        y: y.clone(),
        delta,
        separation,
        kernel,
        kernel_std_error,
        ratio: kernel * factor,
        ratio_std_error: kernel_std_error * factor,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub delta_index: usize,
    pub target_index: usize,
    pub far_field: bool,
    #[serde(flatten)]
    pub record: RatioRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub base: Point,
    pub inward_normal: Point,
    pub deltas: Vec<f64>,
    pub targets: Vec<Point>,
    pub far_field_separation: f64,
}

/// Observed min/max over a set of records, with the standard errors of the
/// records that attain them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioBand {
    pub c1_hat: f64,
    pub c1_std_error: f64,
    pub c2_hat: f64,
    pub c2_std_error: f64,
}

impl RatioBand {
    fn of<'a>(records: impl Iterator<Item = &'a RatioRecord>) -> Option<Self> {
        let mut band: Option<RatioBand> = None;
        for r in records {
            let b = band.get_or_insert(RatioBand {
                c1_hat: r.ratio,
                c1_std_error: r.ratio_std_error,
                c2_hat: r.ratio,
                c2_std_error: r.ratio_std_error,
            });
            if r.ratio < b.c1_hat {
                b.c1_hat = r.ratio;
                b.c1_std_error = r.ratio_std_error;
            }
            if r.ratio > b.c2_hat {
                b.c2_hat = r.ratio;
                b.c2_std_error = r.ratio_std_error;
            }
        }
        band
    }

    pub fn spread(&self) -> f64 {
        self.c2_hat / self.c1_hat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub domain: String,
    pub grid: SweepGrid,
    pub records: Vec<SweepRecord>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub band: RatioBand,
    pub near_field: Option<RatioBand>,
    pub far_field: Option<RatioBand>,
}

impl SweepReport {
    /// CSV of the records: delta, y-index, separation, kernel, ratio,
    /// far_field flag, plus positions and standard errors.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta_index,delta,y_index,separation,kernel,kernel_std_error,ratio,ratio_std_error,far_field,x,y\n",
        );
        for r in &self.records {
            let fmt = |p: &Point| {
                p.coords()
                    .iter()
                    .map(|v| format!("{v:e}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            out.push_str(&format!(
                "{},{:e},{},{:e},{:e},{:e},{:e},{:e},{},{},{}\n",
                r.delta_index,
                r.record.delta,
                r.target_index,
                r.record.separation,
                r.record.kernel,
                r.record.kernel_std_error,
                r.record.ratio,
                r.record.ratio_std_error,
                r.far_field,
                fmt(&r.record.x),
                fmt(&r.record.y),
            ));
        }
        out
    }
}

/// Ratios at x = base + δν for every δ in `deltas` against every target.
///
/// Each δ must be admissible: x interior with nearest boundary point `base`
/// at distance δ (i.e. inside the tubular neighbourhood).
pub fn normal_sweep(
    domain: &Domain,
    kernel: &dyn KernelEvaluator,
    base: &Point,
    deltas: &[f64],
    targets: &[Point],
    far_field_separation: f64,
) -> Result<SweepReport> {
    if deltas.is_empty() || targets.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be non-empty".into()));
    }
    domain.check_on_boundary(base)?;
    for t in targets {
        domain.check_on_boundary(t)?;
    }
    let normal = domain.inward_normal(base)?;
    let mut records = Vec::with_capacity(deltas.len() * targets.len());
    for (di, &delta) in deltas.iter().enumerate() {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "deltas must be positive, got {delta}"
            )));
        }
        let x = base.offset(&normal, delta);
        let measured = domain.check_interior(&x)?;
        let foot = domain.project_to_boundary(&x)?.foot;
        if (measured - delta).abs() > 1e-9 * delta.max(1.0) || foot.distance(base) > 1e-7 {
            return Err(Error::InvalidInput(format!(
                "delta {delta} leaves the tubular neighbourhood of the base point"
            )));
        }
        let values = kernel.evaluate_many(&x, targets)?;
        for (ti, (y, k)) in targets.iter().zip(values).enumerate() {
            let record = ratio_record(domain.dim(), &x, y, delta, k.value, k.std_error)?;
            records.push(SweepRecord {
                delta_index: di,
                target_index: ti,
                far_field: record.separation >= far_field_separation,
                record,
            });
        }
    }
    let band = RatioBand::of(records.iter().map(|r| &r.record)).expect("grid is non-empty");
    Ok(SweepReport {
        domain: domain.describe(),
        grid: SweepGrid {
            base: base.clone(),
            inward_normal: normal,
            deltas: deltas.to_vec(),
            targets: targets.to_vec(),
            far_field_separation,
        },
        c1_hat: band.c1_hat,
        c2_hat: band.c2_hat,
        band,
        near_field: RatioBand::of(records.iter().filter(|r| !r.far_field).map(|r| &r.record)),
        far_field: RatioBand::of(records.iter().filter(|r| r.far_field).map(|r| &r.record)),
        records,
    })
}

/// Finite-difference step used for derivatives at distance δ from the boundary.
pub fn difference_step(delta: f64) -> f64 {
    (1e-4 * delta).max(1e-6)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeDiagnostic {
    pub order: u32,
    pub direction: Point,
    /// D^k_direction P(x, y) by central differences.
    pub derivative: f64,
    /// |derivative| · |x − y|^{d+k} / δ(x)
    pub ratio: f64,
    pub delta: f64,
    pub separation: f64,
    pub step: f64,
    /// |direction · ν| with ν the inward normal at the foot of x.
    pub normal_component: f64,
    /// Mostly-normal direction with |x − y| ≫ δ(x): the ratio grows like
    /// |x − y|/δ here and no upper band is expected.
    pub unbounded_normal_regime: bool,
}

/// Central-difference directional derivative of order 1 or 2 of x ↦ P(x, y).
///
/// The stencil differences P(x ± h·v) − P(x) are taken from
/// [`ModelKernel::increment`], which avoids the cancellation of subtracting
/// nearly equal kernel values at small h.
pub fn directional_derivative(
    kernel: &ModelKernel,
    x: &Point,
    y: &Point,
    order: u32,
    direction: &Point,
    step: f64,
) -> Result<f64> {
    let plus = kernel.increment(x, y, direction, step)?;
    let minus = kernel.increment(x, y, direction, -step)?;
    match order {
        1 => Ok((plus - minus) / (2.0 * step)),
        2 => Ok((plus + minus) / (step * step)),
        _ => Err(Error::InvalidInput(format!(
            "derivative order must be 1 or 2, got {order}"
        ))),
    }
}

/// |D^k_v P(x, y)| · |x − y|^{d+k} / δ(x) for a closed-form kernel.
pub fn derivative_ratio(
    kernel: &ModelKernel,
    x: &Point,
    y: &Point,
    order: u32,
    direction: &Point,
) -> Result<DerivativeDiagnostic> {
    let domain = kernel.domain();
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    direction.check_dim(domain.dim())?;
    if (direction.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(
            "direction must be a unit vector".into(),
        ));
    }
    let delta = domain.check_interior(x)?;
    domain.check_on_boundary(y)?;
    let step = difference_step(delta);
    if step >= 0.5 * delta {
        return Err(Error::StepUnderflow {
            step,
            distance: delta,
        });
    }
    let separation = x.distance(y);
    if separation < 10.0 * step {
        return Err(Error::StepUnderflow {
            step,
            distance: separation,
        });
    }
    let derivative = directional_derivative(kernel, x, y, order, direction, step)?;
    let d = domain.dim() as i32;
    let normal = domain.project_to_boundary(x)?.inward_normal;
    let normal_component = direction.dot(&normal).abs();
    Ok(DerivativeDiagnostic {
        order,
        direction: direction.clone(),
        derivative,
        ratio: derivative.abs() * separation.powi(d + order as i32) / delta,
        delta,
        separation,
        step,
        normal_component,
        unbounded_normal_regime: normal_component >= NORMAL_COMPONENT_THRESHOLD
            && separation >= FAR_FROM_BOUNDARY_FACTOR * delta,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::model_kernels::{ball_constant, halfspace_constant};

    #[test]
    fn disc_ratio_law() {
        let disc = Domain::unit_ball(2).unwrap();
        let k = ModelKernel::new(disc.clone()).unwrap();
        let x = Point::from([0.9, 0.0]);
        for theta in [0.0, 1.0, 2.5, 4.0] {
            let y = Point::from([f64::cos(theta), f64::sin(theta)]);
            let r = kernel_ratio(&disc, &k, &x, &y).unwrap();
            assert!((r.ratio - 1.9 / (2.0 * PI)).abs() < 1e-12);
            assert!((r.ratio - 0.302394).abs() < 1e-6);
        }
    }

    #[test]
    fn halfspace_and_ball_ratio_laws() {
        for d in 2..=4 {
            let h = Domain::halfspace(d).unwrap();
            let k = ModelKernel::new(h.clone()).unwrap();
            let mut x = Point::zeros(d);
            x[d - 1] = 0.3;
            x[0] = 0.2;
            let mut y = Point::zeros(d);
            y[0] = -0.5;
            let r = kernel_ratio(&h, &k, &x, &y).unwrap();
            assert!((r.ratio - halfspace_constant(d)).abs() < 1e-14);
        }
        let ball = Domain::unit_ball(3).unwrap();
        let k = ModelKernel::new(ball.clone()).unwrap();
        let r = kernel_ratio(
            &ball,
            &k,
            &Point::from([0.0, 0.9, 0.0]),
            &Point::from([1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!((r.ratio - 1.9 / (4.0 * PI)).abs() < 1e-12);
        assert!((r.ratio - 0.151197).abs() < 1e-6);
        assert!((2.0 * ball_constant(3) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn ratio_rejects_bad_inputs() {
        let disc = Domain::unit_ball(2).unwrap();
        let k = ModelKernel::new(disc.clone()).unwrap();
        assert!(kernel_ratio(
            &disc,
            &k,
            &Point::from([1.2, 0.0]),
            &Point::from([1.0, 0.0])
        )
        .is_err());
        assert!(kernel_ratio(
            &disc,
            &k,
            &Point::from([0.2, 0.0]),
            &Point::from([0.9, 0.0])
        )
        .is_err());
    }

    #[test]
    fn disc_sweep_example() {
        let disc = Domain::unit_ball(2).unwrap();
        let k = ModelKernel::new(disc.clone()).unwrap();
        let base = Point::from([1.0, 0.0]);
        let report = normal_sweep(
            &disc,
            &k,
            &base,
            &[0.2, 0.1, 0.05],
            std::slice::from_ref(&base),
            0.5,
        )
        .unwrap();
        let want = [0.286479, 0.302394, 0.310352];
        for (r, w) in report.records.iter().zip(want) {
            assert!((r.record.ratio - w).abs() < 1e-6);
            assert!((r.record.ratio - (2.0 - r.record.delta) / (2.0 * PI)).abs() < 1e-12);
            assert!(!r.far_field);
        }
        assert_eq!(report.c1_hat, report.records[0].record.ratio);
        assert_eq!(report.c2_hat, report.records[2].record.ratio);
    }

    #[test]
    fn halfspace_sweep_has_equal_constants() {
        let h = Domain::halfspace(2).unwrap();
        let k = ModelKernel::new(h.clone()).unwrap();
        let targets: Vec<Point> = [-2.0, -0.1, 0.0, 0.3, 5.0]
            .iter()
            .map(|&t| Point::from([t, 0.0]))
            .collect();
        let report =
            normal_sweep(&h, &k, &Point::zeros(2), &[1.0, 0.1, 0.01], &targets, 0.5).unwrap();
        assert!((report.c1_hat - 1.0 / PI).abs() < 1e-14);
        assert!((report.c2_hat - 1.0 / PI).abs() < 1e-14);
        assert!(report.far_field.is_some() && report.near_field.is_some());
    }

    #[test]
    fn sweep_rejects_empty_grids_and_inadmissible_deltas() {
        let disc = Domain::unit_ball(2).unwrap();
        let k = ModelKernel::new(disc.clone()).unwrap();
        let base = Point::from([0.0, -1.0]);
        assert!(normal_sweep(&disc, &k, &base, &[], std::slice::from_ref(&base), 0.5).is_err());
        assert!(normal_sweep(&disc, &k, &base, &[0.1], &[], 0.5).is_err());
        // δ = 1.5 crosses the centre: the nearest boundary point is elsewhere.
        assert!(normal_sweep(&disc, &k, &base, &[1.5], std::slice::from_ref(&base), 0.5).is_err());
    }

    #[test]
    fn halfplane_derivative_examples() {
        let k = ModelKernel::new(Domain::halfspace(2).unwrap()).unwrap();
        let h = 0.1;
        let x = Point::from([0.0, h]);
        let e1 = Point::from([1.0, 0.0]);
        let e2 = Point::from([0.0, 1.0]);
        let r = derivative_ratio(&k, &x, &Point::from([h, 0.0]), 1, &e1).unwrap();
        assert!((r.ratio - 2f64.sqrt() / PI).abs() < 1e-5);
        let r = derivative_ratio(&k, &x, &Point::from([0.0, 0.0]), 1, &e1).unwrap();
        assert!(r.ratio.abs() < 1e-5);
        let r = derivative_ratio(&k, &x, &Point::from([0.0, 0.0]), 1, &e2).unwrap();
        assert!((r.ratio - 1.0 / PI).abs() < 1e-5);
        assert!(!r.unbounded_normal_regime);
        let far = derivative_ratio(&k, &x, &Point::from([3.0, 0.0]), 1, &e2).unwrap();
        assert!(far.unbounded_normal_regime);
        assert!(far.ratio > 5.0);
    }

    #[test]
    fn derivative_input_validation() {
        let k = ModelKernel::new(Domain::halfspace(2).unwrap()).unwrap();
        let x = Point::from([0.0, 0.1]);
        let y = Point::from([0.5, 0.0]);
        assert!(derivative_ratio(&k, &x, &y, 3, &Point::from([1.0, 0.0])).is_err());
        assert!(derivative_ratio(&k, &x, &y, 1, &Point::from([1.0, 1.0])).is_err());
        assert!(matches!(
            derivative_ratio(
                &k,
                &Point::from([0.0, 1.5e-6]),
                &y,
                1,
                &Point::from([1.0, 0.0])
            ),
            Err(Error::StepUnderflow { .. })
        ));
    }
}
