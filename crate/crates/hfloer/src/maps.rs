//! The area-preserving planar maps the pipeline knows how to drive, with
//! exact inverses and analytic Jacobians, plus the hyperbolic fixed point
//! analysis (Newton polish, multiplier, unit eigenvectors).

use crate::error::{Error, Result};
use crate::geom::P2;
use nalgebra::Matrix2;

const TAU: f64 = std::f64::consts::TAU;

/// A concrete map of the plane. All variants are exactly area-preserving
/// (polynomial / trigonometric symplectic forms with unit Jacobian
/// determinant) and come with closed-form inverses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapModel {
    /// Chirikov standard map on the universal cover of the cylinder:
    /// p' = p + (k/2pi) sin(2pi q), q' = q + p'. Working on the lift (no
    /// angle reduction) keeps the stable and unstable manifolds of the
    /// origin honest: crossings found between them have zero winding by
    /// construction, while the familiar turnstile intersections connect
    /// different lifts of the fixed point and never show up.
    StandardMapLift { k: f64 },
    /// Cubic Henon map (x, y) -> (y, -x + a*y - y^3); hyperbolic at the
    /// origin for a > 2, with the odd symmetry phi(-z) = -phi(z).
    CubicHenon { a: f64 },
    /// One kick-drift-kick (Stoermer-Verlet) step of the pendulum
    /// q'' = -sin q with step tau; hyperbolic at (pi, 0).
    PendulumVerlet { tau: f64 },
    /// (q, p) -> (lambda q, p / lambda); the tracer's exactly solvable
    /// reference case.
    Linear { lambda: f64 },
}

impl MapModel {
    pub fn apply(&self, z: P2) -> P2 {
        match *self {
            MapModel::StandardMapLift { k } => {
                let p1 = z.y + (k / TAU) * (TAU * z.x).sin();
                P2::new(z.x + p1, p1)
            }
            MapModel::CubicHenon { a } => P2::new(z.y, -z.x + a * z.y - z.y * z.y * z.y),
            MapModel::PendulumVerlet { tau } => {
                let ph = z.y - 0.5 * tau * z.x.sin();
                let q1 = z.x + tau * ph;
                P2::new(q1, ph - 0.5 * tau * q1.sin())
            }
            MapModel::Linear { lambda } => P2::new(lambda * z.x, z.y / lambda),
        }
    }

    pub fn apply_inv(&self, z: P2) -> P2 {
        match *self {
            MapModel::StandardMapLift { k } => {
                let q = z.x - z.y;
                P2::new(q, z.y - (k / TAU) * (TAU * q).sin())
            }
            MapModel::CubicHenon { a } => P2::new(a * z.x - z.x * z.x * z.x - z.y, z.x),
            MapModel::PendulumVerlet { tau } => {
                // the scheme is time-reversible: step with -tau
                let ph = z.y + 0.5 * tau * z.x.sin();
                let q0 = z.x - tau * ph;
                P2::new(q0, ph + 0.5 * tau * q0.sin())
            }
            MapModel::Linear { lambda } => P2::new(z.x / lambda, lambda * z.y),
        }
    }

    pub fn jacobian(&self, z: P2) -> Matrix2<f64> {
        match *self {
            MapModel::StandardMapLift { k } => {
                let c = k * (TAU * z.x).cos();
                Matrix2::new(1.0 + c, 1.0, c, 1.0)
            }
            MapModel::CubicHenon { a } => Matrix2::new(0.0, 1.0, -1.0, a - 3.0 * z.y * z.y),
            MapModel::PendulumVerlet { tau } => {
                // kick(tau/2) . drift(tau) . kick(tau/2), differentiated at z
                let h = 0.5 * tau;
                let k1 = Matrix2::new(1.0, 0.0, -h * z.x.cos(), 1.0);
                let ph = z.y - h * z.x.sin();
                let q1 = z.x + tau * ph;
                let d = Matrix2::new(1.0, tau, 0.0, 1.0);
                let k2 = Matrix2::new(1.0, 0.0, -h * q1.cos(), 1.0);
                k2 * d * k1
            }
            MapModel::Linear { lambda } => Matrix2::new(lambda, 0.0, 0.0, 1.0 / lambda),
        }
    }

    /// Jacobian of the inverse map at `z`, i.e. (Dphi)^-1 evaluated at
    /// phi^-1(z). Exact because det Dphi = 1.
    pub fn jacobian_inv(&self, z: P2) -> Matrix2<f64> {
        let j = self.jacobian(self.apply_inv(z));
        // [[a,b],[c,d]]^-1 = [[d,-b],[-c,a]] for det = 1
        Matrix2::new(j[(1, 1)], -j[(0, 1)], -j[(1, 0)], j[(0, 0)])
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapModel::StandardMapLift { .. } => "standard_map_lift",
            MapModel::CubicHenon { .. } => "cubic_henon",
            MapModel::PendulumVerlet { .. } => "pendulum_verlet",
            MapModel::Linear { .. } => "linear",
        }
    }

    /// Natural starting guess for the hyperbolic fixed point of each model.
    pub fn default_fixed_point_guess(&self) -> P2 {
        match self {
            MapModel::PendulumVerlet { .. } => P2::new(std::f64::consts::PI, 0.0),
            _ => P2::new(0.0, 0.0),
        }
    }
}

/// Hyperbolic fixed point together with its multiplier and the unit
/// eigenvectors spanning the tangent directions of W^u and W^s.
#[derive(Clone, Copy, Debug)]
pub struct FixedPoint {
    pub x: P2,
    pub trace: f64,
    /// Expanding multiplier, > 1.
    pub lambda: f64,
    pub e_u: P2,
    pub e_s: P2,
}

/// Newton search for a fixed point of `model` starting at `guess`, followed
/// by the hyperbolicity analysis. Rejects non-hyperbolic points and negative
/// multipliers (those swap the half-branches and the branch bookkeeping
/// below would be meaningless).
pub fn find_fixed_point(model: &MapModel, guess: P2) -> Result<FixedPoint> {
    let mut z = guess;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..50 {
        let f = model.apply(z) - z;
        let j = model.jacobian(z) - Matrix2::identity();
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        if det == 0.0 {
            break;
        }
        let dx = P2::new(
            (f.x * j[(1, 1)] - f.y * j[(0, 1)]) / det,
            (f.y * j[(0, 0)] - f.x * j[(1, 0)]) / det,
        );
        z -= dx;
        last_step = dx.norm();
        if last_step < 1e-12 * (1.0 + z.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iters: 50, last_step });
    }

    let j = model.jacobian(z);
    let trace = j[(0, 0)] + j[(1, 1)];
    if trace.abs() <= 2.0 + 1e-8 {
        return Err(Error::NotHyperbolic { x: z.x, y: z.y, trace_abs: trace.abs() });
    }
    if trace < 0.0 {
        return Err(Error::OrientationReversing { trace });
    }
    let disc = (trace * trace - 4.0).sqrt();
    let lambda = 0.5 * (trace + disc);
    let lambda_s = 0.5 * (trace - disc);

    let e_u = eigenvector(&j, lambda);
    let e_s = eigenvector(&j, lambda_s);
    Ok(FixedPoint { x: z, trace, lambda, e_u, e_s })
}

/// Unit eigenvector of a 2x2 matrix for a known real eigenvalue, picked from
/// whichever row of (J - m I) is better conditioned, with a deterministic
/// sign normalization.
fn eigenvector(j: &Matrix2<f64>, m: f64) -> P2 {
    let v1 = P2::new(j[(0, 1)], m - j[(0, 0)]);
    let v2 = P2::new(m - j[(1, 1)], j[(1, 0)]);
    let mut v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    v /= v.norm();
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        v = -v;
    }
    v
}

/// Largest |det Dphi - 1| over the sample points; the pipeline applies this
/// along every traced curve.
pub fn max_area_deviation(model: &MapModel, pts: impl IntoIterator<Item = P2>) -> f64 {
    let mut worst: f64 = 0.0;
    for z in pts {
        let j = model.jacobian(z);
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        worst = worst.max((det - 1.0).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip_err(m: &MapModel, z: P2) -> f64 {
        (m.apply_inv(m.apply(z)) - z).norm().max((m.apply(m.apply_inv(z)) - z).norm())
    }

    #[test]
    fn inverses_roundtrip_on_a_point_cloud() {
        let models = [
            MapModel::StandardMapLift { k: 1.2 },
            MapModel::CubicHenon { a: 3.0 },
            MapModel::PendulumVerlet { tau: 1.0 },
            MapModel::Linear { lambda: 2.0 },
        ];
        for m in &models {
            for i in 0..20 {
                let z = P2::new(0.37 * i as f64 - 3.0, 0.23 * i as f64 - 2.0);
                assert!(roundtrip_err(m, z) < 1e-12, "{} at {:?}", m.name(), z);
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let models = [
            MapModel::StandardMapLift { k: 0.8 },
            MapModel::CubicHenon { a: 3.4 },
            MapModel::PendulumVerlet { tau: 0.9 },
        ];
        let h = 1e-6;
        for m in &models {
            let z = P2::new(0.31, -0.47);
            let j = m.jacobian(z);
            let dx = (m.apply(z + P2::new(h, 0.0)) - m.apply(z - P2::new(h, 0.0))) / (2.0 * h);
            let dy = (m.apply(z + P2::new(0.0, h)) - m.apply(z - P2::new(0.0, h))) / (2.0 * h);
            assert!((dx - P2::new(j[(0, 0)], j[(1, 0)])).norm() < 1e-8);
            assert!((dy - P2::new(j[(0, 1)], j[(1, 1)])).norm() < 1e-8);
        }
    }

    #[test]
    fn area_preservation_is_exact_for_the_catalogue() {
        let models = [
            MapModel::StandardMapLift { k: 2.0 },
            MapModel::CubicHenon { a: 2.6 },
            MapModel::PendulumVerlet { tau: 1.3 },
        ];
        for m in &models {
            let pts = (0..100).map(|i| P2::new((i % 10) as f64 * 0.7 - 3.0, (i / 10) as f64 * 0.7 - 3.0));
            assert!(max_area_deviation(m, pts) < 1e-12, "{}", m.name());
        }
    }

    #[test]
    fn standard_map_multiplier_matches_closed_form() {
        // trace = 2 + k, lambda = (2 + k + sqrt((2+k)^2 - 4)) / 2
        let fp = find_fixed_point(&MapModel::StandardMapLift { k: 1.2 }, P2::new(0.01, -0.01)).unwrap();
        assert!(fp.x.norm() < 1e-12);
        assert!((fp.trace - 3.2).abs() < 1e-12);
        assert!((fp.lambda - 2.8489995996796797).abs() < 1e-12);
    }

    #[test]
    fn henon_fixed_point_multiplier_and_eigenvectors() {
        let m = MapModel::CubicHenon { a: 3.0 };
        let fp = find_fixed_point(&m, P2::new(0.05, 0.05)).unwrap();
        assert!(fp.x.norm() < 1e-12);
        assert!((fp.trace - 3.0).abs() < 1e-12);
        let expected = 0.5 * (3.0 + 5.0_f64.sqrt());
        assert!((fp.lambda - expected).abs() < 1e-12);
        // J e_u = lambda e_u, J e_s = (1/lambda) e_s
        let j = m.jacobian(fp.x);
        assert!((j * fp.e_u - fp.lambda * fp.e_u).norm() < 1e-12);
        assert!((j * fp.e_s - fp.e_s / fp.lambda).norm() < 1e-12);
        assert!((fp.e_u.norm() - 1.0).abs() < 1e-14);
        assert!((fp.e_s.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pendulum_trace_is_two_plus_tau_squared() {
        let fp = find_fixed_point(
            &MapModel::PendulumVerlet { tau: 1.0 },
            P2::new(std::f64::consts::PI + 0.03, 0.02),
        )
        .unwrap();
        assert!((fp.x.x - std::f64::consts::PI).abs() < 1e-12);
        assert!(fp.x.y.abs() < 1e-12);
        assert!((fp.trace - 3.0).abs() < 1e-12);
    }

    #[test]
    fn elliptic_point_is_rejected_as_not_hyperbolic() {
        // the symmetric fixed points (s, s), s = sqrt(a-2), are elliptic for 2 < a < 4
        let s = 1.0_f64; // a = 3.0
        let err = find_fixed_point(&MapModel::CubicHenon { a: 3.0 }, P2::new(s + 1e-3, s - 1e-3));
        match err {
            Err(Error::NotHyperbolic { trace_abs, .. }) => assert!(trace_abs < 2.0),
            other => panic!("expected NotHyperbolic, got {other:?}"),
        }
    }

    #[test]
    fn standard_map_elliptic_half_integer_point_is_rejected() {
        // q = 1/2 gives cos(2 pi q) = -1 and trace 2 - k inside (-2, 2)
        let err = find_fixed_point(&MapModel::StandardMapLift { k: 1.2 }, P2::new(0.5 + 1e-4, 1e-4));
        assert!(matches!(err, Err(Error::NotHyperbolic { .. })), "{err:?}");
    }
}
