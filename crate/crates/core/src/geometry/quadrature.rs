//! Boundary quadrature rules for the Poisson integral.
//!
//! Circles and ellipses use the periodic trapezoidal rule; 2-spheres use
//! Gauss–Legendre in cos θ times uniform azimuth; truncated halfspace
//! boundaries use composite Gauss–Legendre panels.

use std::f64::consts::{PI, TAU};

use super::point::Point;
use super::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureNode {
    pub node: Point,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<QuadratureNode>,
    /// Largest gap between neighbouring nodes.
    pub spacing: f64,
    /// Truncation radius for halfspace boundaries.
    pub truncation: Option<f64>,
}

impl BoundaryQuadrature {
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(&n.node)).sum()
    }
}

pub const MIN_RESOLUTION: usize = 8;
const PANEL_NODES: usize = 16;

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(format!(
            "quadrature resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    Ok(())
}

/// Quadrature for the boundary of a bounded model domain: circle (d = 2
/// ball), 2-sphere (d = 3 ball) or ellipse (d = 2).
pub fn boundary_quadrature(domain: &Domain, resolution: usize) -> Result<BoundaryQuadrature> {
    check_resolution(resolution)?;
    match domain {
        Domain::Ball { center, radius } if center.dim() == 2 => {
            let w = TAU * radius / resolution as f64;
            let nodes = (0..resolution)
                .map(|k| {
                    let (s, c) = (TAU * k as f64 / resolution as f64).sin_cos();
                    QuadratureNode {
                        node: Point::from([center[0] + radius * c, center[1] + radius * s]),
                        weight: w,
                    }
                })
                .collect();
            Ok(BoundaryQuadrature {
                nodes,
                spacing: w,
                truncation: None,
            })
        }
        Domain::Ball { center, radius } if center.dim() == 3 => {
            let n_polar = resolution;
            let n_azimuth = 2 * resolution;
            let (z, wz) = gauss_legendre(n_polar);
            let dphi = TAU / n_azimuth as f64;
            let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
            for (zj, wj) in z.iter().zip(&wz) {
                let r_xy = (1.0 - zj * zj).sqrt();
                for k in 0..n_azimuth {
                    let (s, c) = (dphi * k as f64).sin_cos();
                    nodes.push(QuadratureNode {
                        node: Point::from([
                            center[0] + radius * r_xy * c,
                            center[1] + radius * r_xy * s,
                            center[2] + radius * zj,
                        ]),
                        weight: radius * radius * wj * dphi,
                    });
                }
            }
            Ok(BoundaryQuadrature {
                nodes,
                spacing: PI * radius / n_polar as f64,
                truncation: None,
            })
        }
        Domain::Ellipse { semi_axes } if semi_axes.len() == 2 => {
            let (a, b) = (semi_axes[0], semi_axes[1]);
            let dt = TAU / resolution as f64;
            let nodes: Vec<QuadratureNode> = (0..resolution)
                .map(|k| {
                    let (s, c) = (dt * k as f64).sin_cos();
                    QuadratureNode {
                        node: Point::from([a * c, b * s]),
                        weight: dt * (a * a * s * s + b * b * c * c).sqrt(),
                    }
                })
                .collect();
            let spacing = nodes.iter().map(|n| n.weight).fold(0.0, f64::max);
            Ok(BoundaryQuadrature {
                nodes,
                spacing,
                truncation: None,
            })
        }
        other => Err(Error::Unsupported {
            operation: "boundary quadrature",
            kind: other.describe(),
        }),
    }
}

/// Quadrature on the part of ∂U^d = {x_d = 0} within radius `truncation` of
/// the origin (d = 2: the interval [−T, T]; d = 3: the disc of radius T).
pub fn truncated_halfspace_quadrature(
    dim: usize,
    resolution: usize,
    truncation: f64,
) -> Result<BoundaryQuadrature> {
    check_resolution(resolution)?;
    if !(truncation > 0.0 && truncation.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "truncation radius must be positive, got {truncation}"
        )));
    }
    match dim {
        2 => {
            let (t, w) = composite_gauss_legendre(-truncation, truncation, resolution);
            let spacing = max_gap(&t, -truncation, truncation);
            let nodes = t
                .into_iter()
                .zip(w)
                .map(|(ti, wi)| QuadratureNode {
                    node: Point::from([ti, 0.0]),
                    weight: wi,
                })
                .collect();
            Ok(BoundaryQuadrature {
                nodes,
                spacing,
                truncation: Some(truncation),
            })
        }
        3 => {
            let (r, w) = composite_gauss_legendre(0.0, truncation, resolution);
            let n_azimuth = 2 * resolution;
            let dphi = TAU / n_azimuth as f64;
            let mut nodes = Vec::with_capacity(r.len() * n_azimuth);
            for (ri, wi) in r.iter().zip(&w) {
                for k in 0..n_azimuth {
                    let (s, c) = (dphi * k as f64).sin_cos();
                    nodes.push(QuadratureNode {
                        node: Point::from([ri * c, ri * s, 0.0]),
                        weight: wi * ri * dphi,
                    });
                }
            }
            let spacing = max_gap(&r, 0.0, truncation).max(truncation * dphi);
            Ok(BoundaryQuadrature {
                nodes,
                spacing,
                truncation: Some(truncation),
            })
        }
        _ => Err(Error::Unsupported {
            operation: "truncated halfspace quadrature",
            kind: format!("halfspace(dim={dim})"),
        }),
    }
}

fn max_gap(sorted: &[f64], lo: f64, hi: f64) -> f64 {
    let mut gap = sorted[0] - lo;
    for w in sorted.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap.max(hi - sorted[sorted.len() - 1])
}

/// Gauss–Legendre panels on [lo, hi] with about `total` nodes.
fn composite_gauss_legendre(lo: f64, hi: f64, total: usize) -> (Vec<f64>, Vec<f64>) {
    let per_panel = PANEL_NODES.min(total);
    let panels = total.div_ceil(per_panel);
    let (x, w) = gauss_legendre(per_panel);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let mid = lo + width * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * width * xi);
            weights.push(0.5 * width * wi);
        }
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1], by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
