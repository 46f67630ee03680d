use poisson_asymptotics::geometry::{boundary_frame, Domain, Point};
use poisson_asymptotics::harmonic_measure::{sample_exits, WosConfig};
use poisson_asymptotics::scaling::{phi_eps, transfer_defining_function};
use proptest::prelude::*;

fn disc_point() -> impl Strategy<Value = Point> {
    (0.0..0.95f64, -3.2..3.2f64).prop_map(|(r, a)| Point::from([r * a.cos(), r * a.sin()]))
}

fn ellipse_point() -> impl Strategy<Value = Point> {
    (0.0..0.9f64, -3.2..3.2f64).prop_map(|(r, a)| Point::from([2.0 * r * a.cos(), r * a.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_is_distance_to_foot(x in ellipse_point()) {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        if let Ok(p) = e.project_to_boundary(&x) {
            let delta = e.delta(&x).unwrap();
            prop_assert!((delta - x.distance(&p.foot)).abs() < 1e-10);
            prop_assert!(e.boundary_residual(&p.foot) < 1e-10);
        }
    }

    #[test]
    fn frame_sends_normal_point_to_last_axis(x in disc_point(), eps in 0.01..0.5f64) {
        let disc = Domain::unit_ball(2).unwrap();
        prop_assume!(x.norm() > 1e-3);
        let foot = disc.project_to_boundary(&x).unwrap().foot;
        let frame = boundary_frame(&disc, &foot, eps).unwrap();
        let image = phi_eps(&frame, &frame.interior_point());
        prop_assert!(image[0].abs() < 1e-12 && (image[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transferred_normal_derivative_is_minus_one(a in -3.2..3.2f64, eps in 0.01..0.5f64) {
        let e = Domain::ellipse(vec![2.0, 1.0]).unwrap();
        let base = Point::from([2.0 * a.cos(), a.sin()]);
        let frame = boundary_frame(&e, &base, eps).unwrap();
        let tdf = transfer_defining_function(&frame, &e).unwrap();
        let g = tdf.gradient(&Point::zeros(2));
        prop_assert!(g[0].abs() < 1e-10 && (g[1] + 1.0).abs() < 1e-10);
        prop_assert!(tdf.value(&Point::zeros(2)).abs() < 1e-12);
    }
}

#[test]
fn partition_of_the_boundary_conserves_measure() {
    let disc = Domain::unit_ball(2).unwrap();
    let cfg = WosConfig::new(&disc, 20_000, 3).unwrap();
    let sample = sample_exits(&disc, &Point::from([0.3, 0.1]), &cfg).unwrap();
    let quadrants: f64 = (0..4)
        .map(|q| {
            sample
                .measure(|p| {
                    let a = p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU);
                    (a / std::f64::consts::FRAC_PI_2) as usize == q
                })
                .estimate
        })
        .sum();
    assert!((quadrants - 1.0).abs() < 1e-12);
}

#[test]
fn smaller_stop_tolerance_agrees_within_error() {
    let disc = Domain::unit_ball(2).unwrap();
    let x = Point::from([0.5, 0.2]);
    let cap = Point::from([1.0, 0.0]);
    let coarse = WosConfig::new(&disc, 40_000, 21)
        .unwrap()
        .with_stop_tolerance(2e-3);
    let fine = coarse.clone().with_stop_tolerance(1e-3).with_seed(22);
    let a = sample_exits(&disc, &x, &coarse)
        .unwrap()
        .cap_measure(&cap, 0.4);
    let b = sample_exits(&disc, &x, &fine)
        .unwrap()
        .cap_measure(&cap, 0.4);
    assert!((a.estimate - b.estimate).abs() <= 3.0 * a.std_error.hypot(b.std_error));
}
