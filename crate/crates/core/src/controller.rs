//! Closed-form funnel controller that keeps a unicycle inside a tube.
//!
//! The distance error `e_d = ||x - c|| / r` and the gated orientation error
//! `e_theta` are normalized by exponentially shrinking funnels and mapped
//! through `log((1 + e) / (1 - e))`, which grows without bound as a
//! normalized error approaches the funnel boundary.
//!
//! The bearing `psi` is measured from the tube center to the robot. With that
//! convention a heading `theta = psi` points away from the center and the
//! law's negative `v` backs the robot towards it.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::sim::RobotState;
use crate::tube::Tube;

/// Exponential funnel `rho(t) = (rho_0 - rho_inf) exp(-decay t) + rho_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunnelParams {
    pub rho_0: f64,
    pub rho_inf: f64,
    pub decay: f64,
}

impl FunnelParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(0.0 < self.rho_inf && self.rho_inf < self.rho_0 && self.rho_0 < 1.0) {
            return config(format!(
                "{name}: need 0 < rho_inf < rho_0 < 1, got rho_0 = {}, rho_inf = {}",
                self.rho_0, self.rho_inf
            ));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return config(format!("{name}: decay must be non-negative, got {}", self.decay));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.rho_0 - self.rho_inf) * (-self.decay * t).exp() + self.rho_inf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    pub k_d: f64,
    pub k_theta: f64,
    /// Distance-error threshold above which orientation control is fully on.
    pub e_bar_d: f64,
    /// Width of the activation transition.
    pub delta: f64,
    pub funnel_d: FunnelParams,
    pub funnel_theta: FunnelParams,
    /// Lower clamp on `e_d` inside the orientation gain.
    pub e_d_floor: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            k_d: 2.0,
            k_theta: 2.0,
            e_bar_d: 0.25,
            delta: 0.2,
            funnel_d: FunnelParams {
                rho_0: 0.95,
                rho_inf: 0.3,
                decay: 1.0,
            },
            funnel_theta: FunnelParams {
                rho_0: 0.95,
                rho_inf: 0.2,
                decay: 1.0,
            },
            e_d_floor: 1e-6,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d > 0.0 && self.k_d.is_finite()) {
            return config("k_d must be positive");
        }
        if !(self.k_theta > 0.0 && self.k_theta.is_finite()) {
            return config("k_theta must be positive");
        }
        if !(0.0 < self.e_bar_d && self.e_bar_d < 1.0) {
            return config(format!("e_bar_d must lie in (0, 1), got {}", self.e_bar_d));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return config(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.e_d_floor > 0.0 && self.e_d_floor.is_finite()) {
            return config("e_d_floor must be positive");
        }
        self.funnel_d.validate("funnel_d")?;
        self.funnel_theta.validate("funnel_theta")
    }

    /// `e_d` below which the orientation error is switched off entirely.
    pub fn gate(&self) -> f64 {
        (1.0 - self.delta) * self.e_bar_d
    }
}

/// Smooth gate: 0 on `[0, 1 - delta]`, 1 on `[1, inf)`, quintic smoothstep
/// in between (twice continuously differentiable).
pub fn activation(s: f64, delta: f64) -> f64 {
    let lo = 1.0 - delta;
    if s <= lo {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let u = (s - lo) / delta;
        u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    }
}

/// Derivative of [`activation`] with respect to `s`.
pub fn activation_slope(s: f64, delta: f64) -> f64 {
    let lo = 1.0 - delta;
    if s <= lo || s >= 1.0 {
        0.0
    } else {
        let u = (s - lo) / delta;
        30.0 * u * u * (u - 1.0) * (u - 1.0) / delta
    }
}

/// `log((1 + e) / (1 - e))` for `e` in `(-1, 1)`.
pub fn transform(e_hat: f64) -> f64 {
    ((1.0 + e_hat) / (1.0 - e_hat)).ln()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub e_d: f64,
    pub e_theta: f64,
    pub e_hat_d: f64,
    pub e_hat_theta: f64,
    pub eps_d: f64,
    pub eps_theta: f64,
    /// Bearing of the robot as seen from the tube center.
    pub psi: f64,
    /// `wrap(psi - theta)`.
    pub heading_error: f64,
    pub rho_d: f64,
    pub rho_theta: f64,
    /// Tube radius at the evaluation time.
    pub radius: f64,
}

impl ErrorState {
    pub fn in_funnels(&self) -> bool {
        self.e_hat_d.abs() < 1.0 && self.e_hat_theta.abs() < 1.0
    }
}

/// Errors without the funnel check; `eps_*` are NaN outside the funnels.
pub fn raw_errors(state: &RobotState, t: f64, tube: &Tube, params: &ControllerParams) -> Result<ErrorState> {
    let c = tube.eval_center(t)?;
    let r = tube.eval_radius(t)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Numerical(format!("tube radius {r} is not positive at t = {t}")));
    }
    let dx = state.x1 - c.x;
    let dy = state.x2 - c.y;
    let e_d = dx.hypot(dy) / r;
    let psi = dy.atan2(dx);
    let heading_error = wrap_angle(psi - state.theta);
    let e_theta = activation(e_d / params.e_bar_d, params.delta) * FRAC_2_PI * heading_error;
    let rho_d = params.funnel_d.value(t);
    let rho_theta = params.funnel_theta.value(t);
    let e_hat_d = e_d / rho_d;
    let e_hat_theta = e_theta / rho_theta;
    let eps = |e: f64| if e.abs() < 1.0 { transform(e) } else { f64::NAN };
    Ok(ErrorState {
        e_d,
        e_theta,
        e_hat_d,
        e_hat_theta,
        eps_d: eps(e_hat_d),
        eps_theta: eps(e_hat_theta),
        psi,
        heading_error,
        rho_d,
        rho_theta,
        radius: r,
    })
}

/// Distance and orientation errors with their funnel normalization.
/// Fails with [`Error::FunnelViolation`] when either normalized error has
/// left `(-1, 1)`.
pub fn compute_errors(state: &RobotState, t: f64, tube: &Tube, params: &ControllerParams) -> Result<ErrorState> {
    let err = raw_errors(state, t, tube, params)?;
    if !err.in_funnels() {
        return Err(Error::FunnelViolation {
            t,
            e_hat_d: err.e_hat_d,
            e_hat_theta: err.e_hat_theta,
        });
    }
    Ok(err)
}

/// Linear and angular velocity commands.
///
/// The orientation terms enter `v` with the activation and its slope so that
/// `v` cancels the coupling of `e_d` and `e_theta` in
/// `(eps_d^2 + eps_theta^2) / 2`; outside the transition band this reduces to
/// `v = -k_d (eps_d alpha_d cos(psi - theta) - eps_theta alpha_theta sin(psi - theta))`.
pub fn control_law(err: &ErrorState, params: &ControllerParams) -> Result<(f64, f64)> {
    let r = err.radius;
    let dpsi = err.heading_error;
    let alpha_d = 2.0 / ((1.0 - err.e_hat_d * err.e_hat_d) * err.rho_d * r);
    let radial = err.eps_d * alpha_d;
    let (angular, coupling) = if err.e_d < params.gate() {
        (0.0, 0.0)
    } else {
        let s = err.e_d / params.e_bar_d;
        let xi_theta = 2.0 / ((1.0 - err.e_hat_theta * err.e_hat_theta) * err.rho_theta);
        let angular = err.eps_theta * xi_theta * FRAC_2_PI / (err.e_d.max(params.e_d_floor) * r);
        let band = err.eps_theta * xi_theta * activation_slope(s, params.delta) * FRAC_2_PI * dpsi
            / (params.e_bar_d * r);
        (angular, band * dpsi.cos() - activation(s, params.delta) * angular * dpsi.sin())
    };
    let v = -params.k_d * (radial * dpsi.cos() + coupling);
    let omega = params.k_theta * angular;
    if !(v.is_finite() && omega.is_finite()) {
        return Err(Error::Numerical(format!("non-finite control (v = {v}, omega = {omega})")));
    }
    Ok((v, omega))
}
