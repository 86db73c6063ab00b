//! Time-of-flight ranging and trilateration of ground devices.
//!
//! A UAV measures its range to a device from several waypoints in its
//! operational airspace; the device is assumed to sit on the ground plane,
//! which pins `z = 0` and leaves a two-unknown nonlinear least-squares
//! problem. The UAV's own position is taken as exact (GPS).
//!
//! Ranging noise is the only stochastic input: zero-mean Gaussian with a
//! per-scenario sigma, drawn from an explicitly passed RNG so runs replay
//! bit-identically.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Position3D;

/// Gradient-norm tolerance of the least-squares solve.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

/// Iteration cap of the least-squares solve.
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("need at least {needed} waypoints, airspace offers {available}")]
    NotEnoughPoints { needed: usize, available: usize },
    #[error("airspace is collinear in the ground plane; ranging geometry is degenerate")]
    DegenerateAirspace { selected: Vec<Position3D> },
    #[error("need at least 3 range measurements, got {0}")]
    NotEnoughMeasurements(usize),
    #[error("waypoints are collinear in the ground plane; the solve is ill-conditioned")]
    CollinearWaypoints,
    #[error("solver did not reach tolerance within {MAX_ITERATIONS} iterations")]
    NoConvergence { best: UeEstimate },
}

/// One time-of-flight range taken from a known UAV waypoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub waypoint: Position3D,
    pub measured_range_m: f64,
    pub noise_sigma_m: f64,
}

/// Solved device position with solve diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeEstimate {
    /// Estimated position, `z` fixed to 0.
    pub position: Position3D,
    pub residual_rms_m: f64,
    pub measurement_count: usize,
}

/// Range the device from `uav`, with Gaussian noise of the given sigma.
/// Negative raw draws clamp to zero (a range cannot be negative).
pub fn measure_range(
    uav: &Position3D,
    ue_true: &Position3D,
    sigma_m: f64,
    rng: &mut impl Rng,
) -> RangeMeasurement {
    let exact = uav.distance(ue_true);
    let measured = if sigma_m > 0.0 {
        let noise = Normal::new(0.0, sigma_m).expect("sigma validated non-negative");
        (exact + noise.sample(rng)).max(0.0)
    } else {
        exact
    };
    RangeMeasurement {
        waypoint: *uav,
        measured_range_m: measured,
        noise_sigma_m: sigma_m,
    }
}

/// True when all points lie on one line in the ground plane, judged by the
/// smaller eigenvalue of their 2-D scatter matrix.
pub fn collinear_xy(points: &[Position3D]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let trace = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    if trace <= 0.0 {
        return true; // all points coincide
    }
    let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
    let eig_min = (trace - disc) / 2.0;
    let eig_max = (trace + disc) / 2.0;
    eig_min <= 1e-9 * eig_max
}

/// Pick `k` ranging waypoints from the airspace by greedy farthest-point
/// selection, seeded at the point nearest the airspace centroid. When the
/// airspace allows it, the selection is guaranteed non-collinear in (x, y).
pub fn plan_ranging_waypoints(
    airspace: &[Position3D],
    k: usize,
) -> Result<Vec<Position3D>, LocalizationError> {
    if k < 3 || airspace.len() < k {
        return Err(LocalizationError::NotEnoughPoints {
            needed: k.max(3),
            available: airspace.len(),
        });
    }

    let n = airspace.len() as f64;
    let centroid = Position3D::new(
        airspace.iter().map(|p| p.x).sum::<f64>() / n,
        airspace.iter().map(|p| p.y).sum::<f64>() / n,
        airspace.iter().map(|p| p.z).sum::<f64>() / n,
    );
    let seed = argmin_by(airspace, |p| p.distance(&centroid));

    let mut selected_idx = vec![seed];
    while selected_idx.len() < k {
        let next = argmax_by(airspace, |i, p| {
            if selected_idx.contains(&i) {
                f64::NEG_INFINITY
            } else {
                selected_idx
                    .iter()
                    .map(|&s| p.distance(&airspace[s]))
                    .fold(f64::INFINITY, f64::min)
            }
        });
        selected_idx.push(next);
    }
    let mut selected: Vec<Position3D> = selected_idx.iter().map(|&i| airspace[i]).collect();

    if collinear_xy(&selected) {
        // Swap the last pick for the point farthest off the selection's line,
        // if any point leaves the line at all.
        let (a, b) = widest_pair(&selected);
        let replacement = argmax_by(airspace, |i, p| {
            if selected_idx.contains(&i) {
                f64::NEG_INFINITY
            } else {
                perpendicular_distance_xy(p, &a, &b)
            }
        });
        let off_line = perpendicular_distance_xy(&airspace[replacement], &a, &b) > 1e-9;
        if off_line {
            let last = selected.len() - 1;
            selected[last] = airspace[replacement];
        }
        if collinear_xy(&selected) {
            return Err(LocalizationError::DegenerateAirspace { selected });
        }
    }
    Ok(selected)
}

fn argmin_by(points: &[Position3D], score: impl Fn(&Position3D) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let s = score(p);
        if s < best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn argmax_by(points: &[Position3D], score: impl Fn(usize, &Position3D) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let s = score(i, p);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// The two selected points farthest apart in (x, y); defines the line used
/// by the collinearity repair.
fn widest_pair(points: &[Position3D]) -> (Position3D, Position3D) {
    let mut pair = (points[0], points[1 % points.len()]);
    let mut best = -1.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].horizontal_distance(&points[j]);
            if d > best {
                best = d;
                pair = (points[i], points[j]);
            }
        }
    }
    pair
}

fn perpendicular_distance_xy(p: &Position3D, a: &Position3D, b: &Position3D) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len = (abx * abx + aby * aby).sqrt();
    if len == 0.0 {
        return p.horizontal_distance(a);
    }
    ((p.x - a.x) * aby - (p.y - a.y) * abx).abs() / len
}

fn residuals(p: &Position3D, measurements: &[RangeMeasurement]) -> Vec<f64> {
    measurements
        .iter()
        .map(|m| m.waypoint.distance(p) - m.measured_range_m)
        .collect()
}

fn cost(p: &Position3D, measurements: &[RangeMeasurement]) -> f64 {
    residuals(p, measurements).iter().map(|e| e * e).sum()
}

fn rms(p: &Position3D, measurements: &[RangeMeasurement]) -> f64 {
    (cost(p, measurements) / measurements.len() as f64).sqrt()
}

/// Solve for the device position minimizing `Σ (‖waypoint − p‖ − range)²`
/// over (x, y) with z pinned to the ground plane, via Levenberg-Marquardt.
/// The initial iterate is the waypoint centroid projected to the ground.
pub fn trilaterate(measurements: &[RangeMeasurement]) -> Result<UeEstimate, LocalizationError> {
    if measurements.len() < 3 {
        return Err(LocalizationError::NotEnoughMeasurements(measurements.len()));
    }
    let waypoints: Vec<Position3D> = measurements.iter().map(|m| m.waypoint).collect();
    if collinear_xy(&waypoints) {
        return Err(LocalizationError::CollinearWaypoints);
    }

    let n = measurements.len() as f64;
    let mut p = Position3D::ground(
        waypoints.iter().map(|w| w.x).sum::<f64>() / n,
        waypoints.iter().map(|w| w.y).sum::<f64>() / n,
    );
    let mut current_cost = cost(&p, measurements);
    let mut damping = 1e-3;

    for _ in 0..MAX_ITERATIONS {
        let errs = residuals(&p, measurements);
        // Gradient and Gauss-Newton Hessian of ½Σe².
        let (mut gx, mut gy) = (0.0, 0.0);
        let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
        for (m, e) in measurements.iter().zip(&errs) {
            let dist = m.waypoint.distance(&p);
            if dist < 1e-12 {
                continue;
            }
            let jx = (p.x - m.waypoint.x) / dist;
            let jy = (p.y - m.waypoint.y) / dist;
            gx += jx * e;
            gy += jy * e;
            hxx += jx * jx;
            hxy += jx * jy;
            hyy += jy * jy;
        }
        // ∇(Σe²) = 2·Jᵀe.
        let grad_norm = 2.0 * (gx * gx + gy * gy).sqrt();
        if grad_norm <= CONVERGENCE_TOLERANCE {
            return Ok(UeEstimate {
                position: p,
                residual_rms_m: rms(&p, measurements),
                measurement_count: measurements.len(),
            });
        }

        // Marquardt-damped step, retrying with heavier damping until the
        // cost actually drops.
        let mut stepped = false;
        for _ in 0..60 {
            let axx = hxx + damping * (hxx + 1e-12);
            let ayy = hyy + damping * (hyy + 1e-12);
            let det = axx * ayy - hxy * hxy;
            if det.abs() < 1e-300 {
                damping *= 10.0;
                continue;
            }
            let dx = (-gx * ayy + gy * hxy) / det;
            let dy = (-gy * axx + gx * hxy) / det;
            let candidate = Position3D::ground(p.x + dx, p.y + dy);
            let candidate_cost = cost(&candidate, measurements);
            if candidate_cost < current_cost {
                p = candidate;
                current_cost = candidate_cost;
                damping = (damping / 10.0).max(1e-15);
                stepped = true;
                break;
            }
            damping *= 10.0;
            if damping > 1e15 {
                break;
            }
        }
        if !stepped {
            // No descent direction left at any damping: the iterate is the
            // numerical minimum. Accept it if the gradient is essentially
            // flat relative to the cost scale, otherwise report failure.
            if grad_norm <= 1e-7 * (1.0 + current_cost) {
                return Ok(UeEstimate {
                    position: p,
                    residual_rms_m: rms(&p, measurements),
                    measurement_count: measurements.len(),
                });
            }
            break;
        }
    }
    Err(LocalizationError::NoConvergence {
        best: UeEstimate {
            position: p,
            residual_rms_m: rms(&p, measurements),
            measurement_count: measurements.len(),
        },
    })
}
