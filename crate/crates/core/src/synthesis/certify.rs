use crate::geometry::{workspace_margin, Environment};
use crate::tube::{CertificateRecord, Tube};

use super::problem::SopProblem;

/// Sampled-to-continuous validity certificate.
///
/// `lipschitz` bounds the time-slope of every constraint family: the
/// center and radius bounds of the tube plus the fastest obstacle speed,
/// since the distance to a moving set also changes with the set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub eta_star: f64,
    pub lipschitz: f64,
    pub lipschitz_center: f64,
    pub lipschitz_radius: f64,
    pub unsafe_speed: f64,
    pub epsilon: f64,
    pub valid: bool,
}

impl Certificate {
    pub fn slack(&self) -> f64 {
        self.eta_star + self.lipschitz * self.epsilon
    }

    pub fn record(&self) -> CertificateRecord {
        CertificateRecord {
            eta_star: self.eta_star,
            lipschitz: self.lipschitz,
            epsilon: self.epsilon,
        }
    }
}

pub fn certify(tube: &Tube, problem: &SopProblem, eta_star: f64) -> Certificate {
    let bounds = tube.lipschitz_bounds();
    let unsafe_speed = problem.env.unsafe_set_speed();
    let lipschitz = bounds.total() + unsafe_speed;
    let epsilon = problem.plan.epsilon;
    Certificate {
        eta_star,
        lipschitz,
        lipschitz_center: bounds.center,
        lipschitz_radius: bounds.radius,
        unsafe_speed,
        epsilon,
        valid: eta_star + lipschitz * epsilon <= 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstMargin {
    pub margin: f64,
    pub t: f64,
}

impl WorstMargin {
    fn update(&mut self, margin: f64, t: f64) {
        if margin > self.margin {
            *self = WorstMargin { margin, t };
        }
    }
}

/// Worst tube-condition margins over a uniform time grid. Every margin is
/// `<= 0` exactly when the corresponding condition holds at the grid times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseReport {
    pub grid_points: usize,
    /// Containment in the workspace.
    pub workspace: WorstMargin,
    /// `-r(t)`: strict positivity of the radius.
    pub radius: WorstMargin,
    /// `r(t) - dist(c(t), U(t))`: separation from the unsafe set.
    pub obstacle: WorstMargin,
    /// `||c(0) - c_S|| + r(0) - r_S`.
    pub start: f64,
    /// `||c(t_c) - c_T|| + r(t_c) - r_T`.
    pub target: f64,
}

impl DenseReport {
    pub fn worst(&self) -> f64 {
        self.workspace
            .margin
            .max(self.radius.margin)
            .max(self.obstacle.margin)
            .max(self.start)
            .max(self.target)
    }
}

/// Evaluates the tube conditions on `grid_points` uniformly spaced times,
/// directly from the geometry and independent of any sampling plan.
pub fn verify_dense(tube: &Tube, env: &Environment, grid_points: usize) -> DenseReport {
    let n = grid_points.max(2);
    let init = WorstMargin {
        margin: f64::NEG_INFINITY,
        t: 0.0,
    };
    let (mut ws, mut rad, mut obs) = (init, init, init);
    for k in 0..n {
        let t = if k == n - 1 {
            tube.t_c
        } else {
            tube.t_c * k as f64 / (n - 1) as f64
        };
        let c = tube.eval_center(t).expect("grid time inside horizon");
        let r = tube.eval_radius(t).expect("grid time inside horizon");
        ws.update(workspace_margin(c, r, env), t);
        rad.update(-r, t);
        obs.update(r - env.clearance(c, t), t);
    }
    let c0 = tube.eval_center(0.0).expect("t = 0");
    let r0 = tube.eval_radius(0.0).expect("t = 0");
    let c1 = tube.eval_center(tube.t_c).expect("t = t_c");
    let r1 = tube.eval_radius(tube.t_c).expect("t = t_c");
    DenseReport {
        grid_points: n,
        workspace: ws,
        radius: rad,
        obstacle: obs,
        start: (c0 - env.start.center).norm() + r0 - env.start.radius,
        target: (c1 - env.target.center).norm() + r1 - env.target.radius,
    }
}
