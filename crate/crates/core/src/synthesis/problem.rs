use crate::error::{config, Result};
use crate::geometry::{workspace_margin, Ball2, Environment};
use crate::tube::{BasisSpec, Tube};

use super::sampling::SamplingPlan;

/// The three sampled constraint families; each must be `<= eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    /// Containment of the tube cross-section in the workspace.
    pub workspace: f64,
    /// `r_d - r(t)`.
    pub radius: f64,
    /// `r(t) - dist(c(t), U(t))`.
    pub obstacle: f64,
}

impl Margins {
    pub fn max(&self) -> f64 {
        self.workspace.max(self.radius).max(self.obstacle)
    }
}

/// Coefficient layout: `[q_c1 | q_c2 | q_r]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub center: usize,
    pub radius: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        2 * self.center + self.radius
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn c1(&self) -> std::ops::Range<usize> {
        0..self.center
    }

    pub fn c2(&self) -> std::ops::Range<usize> {
        self.center..2 * self.center
    }

    pub fn r(&self) -> std::ops::Range<usize> {
        2 * self.center..self.len()
    }

    /// Indices fixed by the endpoint constraints.
    pub fn pinned(&self) -> [usize; 6] {
        [
            0,
            self.center - 1,
            self.center,
            2 * self.center - 1,
            2 * self.center,
            self.len() - 1,
        ]
    }
}

/// Sampled tube synthesis problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SopProblem {
    pub env: Environment,
    pub basis: BasisSpec,
    /// Degree of the radius expansion; equal to the center degree by default.
    pub radius_degree: usize,
    pub plan: SamplingPlan,
    pub r_d: f64,
    /// Pinned tube cross-section at `t = 0`, contained in the start set.
    pub start_ball: Ball2,
    /// Pinned tube cross-section at `t = t_c`, contained in the target set.
    pub target_ball: Ball2,
}

impl SopProblem {
    /// Problem pinned to the full start and target sets.
    pub fn new(env: Environment, basis: BasisSpec, plan: SamplingPlan, r_d: f64) -> Result<Self> {
        let (s, t) = (env.start, env.target);
        Self::with_pins(env, basis, basis.degree, plan, r_d, s, t)
    }

    pub fn with_pins(
        env: Environment,
        basis: BasisSpec,
        radius_degree: usize,
        plan: SamplingPlan,
        r_d: f64,
        start_ball: Ball2,
        target_ball: Ball2,
    ) -> Result<Self> {
        env.validate()?;
        basis.validate()?;
        if radius_degree < 1 {
            return config("radius degree must be at least 1");
        }
        if (basis.horizon - env.horizon).abs() > 1e-12 * env.horizon.max(1.0) {
            return config(format!(
                "basis horizon {} differs from task horizon {}",
                basis.horizon, env.horizon
            ));
        }
        if (plan.horizon - env.horizon).abs() > 1e-12 * env.horizon.max(1.0) {
            return config("sampling plan horizon differs from task horizon");
        }
        if !(r_d > 0.0 && r_d.is_finite()) {
            return config(format!("minimum radius r_d must be positive, got {r_d}"));
        }
        start_ball.validate()?;
        target_ball.validate()?;
        if start_ball.radius < r_d {
            return config(format!(
                "start radius {} is below the minimum tube radius {r_d}",
                start_ball.radius
            ));
        }
        if target_ball.radius < r_d {
            return config(format!(
                "target radius {} is below the minimum tube radius {r_d}",
                target_ball.radius
            ));
        }
        let inside = |inner: &Ball2, outer: &Ball2| {
            (inner.center - outer.center).norm() + inner.radius <= outer.radius + 1e-12
        };
        if !inside(&start_ball, &env.start) {
            return config("pinned start ball is not contained in the start set");
        }
        if !inside(&target_ball, &env.target) {
            return config("pinned target ball is not contained in the target set");
        }
        Ok(Self {
            env,
            basis,
            radius_degree,
            plan,
            r_d,
            start_ball,
            target_ball,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            center: self.basis.degree + 1,
            radius: self.radius_degree + 1,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.env.horizon
    }

    /// Splits a full coefficient vector into a tube.
    pub fn tube_from(&self, q: &[f64]) -> Result<Tube> {
        let l = self.layout();
        if q.len() != l.len() {
            return config(format!("expected {} coefficients, got {}", l.len(), q.len()));
        }
        Tube::new(
            self.horizon(),
            q[l.c1()].to_vec(),
            q[l.c2()].to_vec(),
            q[l.r()].to_vec(),
        )
    }

    /// Writes the endpoint constraints into `q`.
    pub fn pin(&self, q: &mut [f64]) {
        let [c1a, c1b, c2a, c2b, ra, rb] = self.layout().pinned();
        q[c1a] = self.start_ball.center.x;
        q[c1b] = self.target_ball.center.x;
        q[c2a] = self.start_ball.center.y;
        q[c2b] = self.target_ball.center.y;
        q[ra] = self.start_ball.radius;
        q[rb] = self.target_ball.radius;
    }

    /// Exact sampled objective: the largest constraint value over the plan.
    pub fn eta(&self, tube: &Tube) -> f64 {
        self.plan
            .sample_times
            .iter()
            .map(|&t| tube_margins(tube, &self.env, self.r_d, t).max())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Margins of `tube` at time `t`; `t` is clamped into the horizon.
pub fn tube_margins(tube: &Tube, env: &Environment, r_d: f64, t: f64) -> Margins {
    let t = t.clamp(0.0, tube.t_c);
    let c = tube.eval_center(t).expect("clamped time");
    let r = tube.eval_radius(t).expect("clamped time");
    Margins {
        workspace: workspace_margin(c, r, env),
        radius: r_d - r,
        obstacle: r - env.clearance(c, t),
    }
}

/// Constraint values of the coefficient vector `q` at time `t`.
pub fn constraint_values(q: &[f64], problem: &SopProblem, t: f64) -> Result<Margins> {
    let tube = problem.tube_from(q)?;
    Ok(tube_margins(&tube, &problem.env, problem.r_d, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Obstacle, Shape, Vec2, Workspace};
    use crate::synthesis::make_sampling_plan;

    fn env(obstacles: Vec<Obstacle>) -> Environment {
        Environment::new(
            Workspace::Ball(Ball2::new(Vec2::ZERO, 10.0).unwrap()),
            Ball2::new(Vec2::new(-5.0, 0.0), 0.5).unwrap(),
            Ball2::new(Vec2::new(5.0, 0.0), 0.5).unwrap(),
            obstacles,
            10.0,
        )
        .unwrap()
    }

    fn problem(env: Environment, r_d: f64) -> Result<SopProblem> {
        let basis = BasisSpec::new(3, 10.0).unwrap();
        let plan = make_sampling_plan(10.0, 0.5).unwrap();
        SopProblem::new(env, basis, plan, r_d)
    }

    #[test]
    fn obstacle_free_radius_margin() {
        let p = problem(env(vec![]), 0.2).unwrap();
        let mut q = vec![0.0; 12];
        q[8..].copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
        let m = constraint_values(&q, &p, 3.0).unwrap();
        assert_eq!(m.radius, 0.2 - 0.5);
        assert!(m.radius <= -0.2);
        assert!(m.workspace < 0.0);
    }

    #[test]
    fn tube_on_obstacle_violates() {
        let obs = Obstacle::fixed(Shape::Disc(Ball2::new(Vec2::new(0.0, 3.0), 1.0).unwrap()));
        let p = problem(env(vec![obs]), 0.2).unwrap();
        let mut q = vec![0.0; 12];
        q[4..8].copy_from_slice(&[3.0; 4]);
        q[8..].copy_from_slice(&[0.4; 4]);
        let m = constraint_values(&q, &p, 5.0).unwrap();
        assert!((m.obstacle - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_radius_below_minimum() {
        assert!(problem(env(vec![]), 0.6).is_err());
    }

    #[test]
    fn wrong_coefficient_count() {
        let p = problem(env(vec![]), 0.2).unwrap();
        assert!(constraint_values(&[0.0; 5], &p, 0.0).is_err());
    }

    #[test]
    fn pin_sets_endpoints() {
        let p = problem(env(vec![]), 0.2).unwrap();
        let mut q = vec![0.0; 12];
        p.pin(&mut q);
        let tube = p.tube_from(&q).unwrap();
        assert_eq!(tube.eval_center(0.0).unwrap(), Vec2::new(-5.0, 0.0));
        assert_eq!(tube.eval_center(10.0).unwrap(), Vec2::new(5.0, 0.0));
        assert_eq!(tube.eval_radius(10.0).unwrap(), 0.5);
    }
}
