//! Planar sets, time-varying unsafe regions and point-to-set distances.
//!
//! The robot is treated as a point. Obstacles that should account for a
//! physical footprint must be inflated in the configuration.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Distance reported when the unsafe set is empty. Finite so that optimizer
/// arithmetic on margins never produces infinities.
pub const NO_OBSTACLE_DISTANCE: f64 = 1e12;

/// Slack used when checking that motion waypoints cover the horizon.
const TIME_SLACK: f64 = 1e-9;

/// A point or vector in the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the direction of `self`, or `fallback` for the zero vector.
    pub fn normalized_or(self, fallback: Vec2) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            fallback
        }
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Closed disc `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball2 {
    pub center: Vec2,
    pub radius: f64,
}

impl Ball2 {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        let ball = Self { center, radius };
        ball.validate()?;
        Ok(ball)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return config("ball center must be finite");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return config(format!("ball radius must be positive, got {}", self.radius));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        let rect = Self { min, max };
        rect.validate()?;
        Ok(rect)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return config("rectangle corners must be finite");
        }
        if !(self.min.x < self.max.x && self.min.y < self.max.y) {
            return config(format!(
                "rectangle min {:?} must be below max {:?} componentwise",
                <[f64; 2]>::from(self.min),
                <[f64; 2]>::from(self.max)
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }
}

/// Obstacle footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Disc(Ball2),
    Rect(Rect),
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Disc(b) => b.validate(),
            Shape::Rect(r) => r.validate(),
        }
    }

    pub fn translated(&self, offset: Vec2) -> Shape {
        match *self {
            Shape::Disc(b) => Shape::Disc(Ball2 {
                center: b.center + offset,
                radius: b.radius,
            }),
            Shape::Rect(r) => Shape::Rect(Rect {
                min: r.min + offset,
                max: r.max + offset,
            }),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Disc(b) => b.contains(p),
            Shape::Rect(r) => r.contains(p),
        }
    }

    /// Signed distance (negative inside) and its gradient with respect to `p`.
    ///
    /// Inside a rectangle the gradient is the outward normal of the nearest
    /// face; at the exact center of a disc it is `+x`.
    pub fn signed_distance(&self, p: Vec2) -> (f64, Vec2) {
        match *self {
            Shape::Disc(b) => {
                let d = p - b.center;
                (d.norm() - b.radius, d.normalized_or(Vec2::new(1.0, 0.0)))
            }
            Shape::Rect(r) => {
                let dx = (r.min.x - p.x).max(p.x - r.max.x);
                let dy = (r.min.y - p.y).max(p.y - r.max.y);
                if dx <= 0.0 && dy <= 0.0 {
                    // Interior: nearest face.
                    let faces = [
                        (p.x - r.min.x, Vec2::new(-1.0, 0.0)),
                        (r.max.x - p.x, Vec2::new(1.0, 0.0)),
                        (p.y - r.min.y, Vec2::new(0.0, -1.0)),
                        (r.max.y - p.y, Vec2::new(0.0, 1.0)),
                    ];
                    let (depth, normal) = faces
                        .into_iter()
                        .fold(faces[0], |best, f| if f.0 < best.0 { f } else { best });
                    (-depth, normal)
                } else {
                    let closest = Vec2::new(p.x.clamp(r.min.x, r.max.x), p.y.clamp(r.min.y, r.max.y));
                    let d = p - closest;
                    (d.norm(), d.normalized_or(Vec2::new(1.0, 0.0)))
                }
            }
        }
    }
}

/// Euclidean distance from `p` to the nearest point of `shape`; zero inside.
pub fn dist_point_shape(p: Vec2, shape: &Shape) -> f64 {
    match *shape {
        Shape::Disc(b) => ((p - b.center).norm() - b.radius).max(0.0),
        Shape::Rect(r) => {
            let dx = (r.min.x - p.x).max(p.x - r.max.x).max(0.0);
            let dy = (r.min.y - p.y).max(p.y - r.max.y).max(0.0);
            dx.hypot(dy)
        }
    }
}

/// Rigid translation law of an obstacle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    /// Offsets linearly interpolated between `(time, offset)` waypoints and
    /// held constant outside the waypoint range.
    PiecewiseLinear { waypoints: Vec<(f64, Vec2)> },
}

impl Motion {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let Motion::PiecewiseLinear { waypoints } = self else {
            return Ok(());
        };
        if waypoints.is_empty() {
            return config("piecewise-linear motion needs at least one waypoint");
        }
        if waypoints.iter().any(|(t, o)| !t.is_finite() || !o.is_finite()) {
            return config("motion waypoints must be finite");
        }
        if waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return config("motion waypoint times must be strictly increasing");
        }
        let first = waypoints[0].0;
        let last = waypoints[waypoints.len() - 1].0;
        if first > TIME_SLACK || last < horizon - TIME_SLACK {
            return config(format!(
                "motion waypoints span [{first}, {last}] but must cover [0, {horizon}]"
            ));
        }
        Ok(())
    }

    pub fn offset(&self, t: f64) -> Vec2 {
        match self {
            Motion::Static => Vec2::ZERO,
            Motion::PiecewiseLinear { waypoints } => {
                let (t0, o0) = waypoints[0];
                if t <= t0 {
                    return o0;
                }
                for w in waypoints.windows(2) {
                    let (ta, oa) = w[0];
                    let (tb, ob) = w[1];
                    if t <= tb {
                        let s = (t - ta) / (tb - ta);
                        return oa + (ob - oa) * s;
                    }
                }
                waypoints[waypoints.len() - 1].1
            }
        }
    }

    /// Largest translation speed over all waypoint segments.
    pub fn max_speed(&self) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::PiecewiseLinear { waypoints } => waypoints
                .windows(2)
                .map(|w| (w[1].1 - w[0].1).norm() / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
        }
    }

    /// The same motion expressed on a clock that starts at global time `t0`.
    pub fn shifted(&self, t0: f64) -> Motion {
        match self {
            Motion::Static => Motion::Static,
            Motion::PiecewiseLinear { waypoints } => Motion::PiecewiseLinear {
                waypoints: waypoints.iter().map(|&(t, o)| (t - t0, o)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    #[serde(default)]
    pub motion: Motion,
}

impl Obstacle {
    pub fn fixed(shape: Shape) -> Self {
        Self {
            shape,
            motion: Motion::Static,
        }
    }

    pub fn shape_at(&self, t: f64) -> Shape {
        self.shape.translated(self.motion.offset(t))
    }
}

/// State space `X`: either a disc or an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workspace {
    Ball(Ball2),
    Rect(Rect),
}

impl Workspace {
    pub fn validate(&self) -> Result<()> {
        match self {
            Workspace::Ball(b) => b.validate(),
            Workspace::Rect(r) => r.validate(),
        }
    }

    /// Per-constraint containment margins of the disc `B(c, r)`; each entry is
    /// `<= 0` iff the corresponding boundary is respected. Returns the number
    /// of valid entries in the array (1 for a ball, 4 for a rectangle).
    pub fn margins(&self, c: Vec2, r: f64) -> ([f64; 4], usize) {
        match *self {
            Workspace::Ball(b) => ([(c - b.center).norm() + r - b.radius, 0.0, 0.0, 0.0], 1),
            Workspace::Rect(rect) => (
                [
                    rect.min.x - c.x + r,
                    c.x + r - rect.max.x,
                    rect.min.y - c.y + r,
                    c.y + r - rect.max.y,
                ],
                4,
            ),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Workspace::Ball(b) => b.contains(p),
            Workspace::Rect(r) => r.contains(p),
        }
    }

    pub fn bounds(&self) -> Rect {
        match *self {
            Workspace::Ball(b) => Rect {
                min: b.center - Vec2::new(b.radius, b.radius),
                max: b.center + Vec2::new(b.radius, b.radius),
            },
            Workspace::Rect(r) => r,
        }
    }
}

/// Signed containment margin of `B(c, r)` in the workspace: `<= 0` iff the
/// disc lies inside. For rectangles this is the worst of the four faces.
pub fn workspace_margin(c: Vec2, r: f64, env: &Environment) -> f64 {
    let (m, n) = env.workspace.margins(c, r);
    m[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// A single reach-avoid-stay task: reach `target` from `start` by `horizon`
/// inside `workspace` while avoiding the obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub workspace: Workspace,
    pub start: Ball2,
    pub target: Ball2,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub horizon: f64,
}

impl Environment {
    pub fn new(
        workspace: Workspace,
        start: Ball2,
        target: Ball2,
        obstacles: Vec<Obstacle>,
        horizon: f64,
    ) -> Result<Self> {
        let env = Self {
            workspace,
            start,
            target,
            obstacles,
            horizon,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return config(format!("horizon must be positive, got {}", self.horizon));
        }
        self.workspace.validate()?;
        self.start.validate().map_err(|e| prefix("start", e))?;
        self.target.validate().map_err(|e| prefix("target", e))?;
        for (i, obs) in self.obstacles.iter().enumerate() {
            obs.shape
                .validate()
                .and_then(|_| obs.motion.validate(self.horizon))
                .map_err(|e| prefix(&format!("obstacles[{i}]"), e))?;
        }
        if workspace_margin(self.start.center, self.start.radius, self) > 0.0 {
            return config("start set is not contained in the workspace");
        }
        if workspace_margin(self.target.center, self.target.radius, self) > 0.0 {
            return config("target set is not contained in the workspace");
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if dist_point_shape(self.start.center, &obs.shape_at(0.0)) <= self.start.radius {
                return config(format!("start set intersects obstacles[{i}] at t = 0"));
            }
            if dist_point_shape(self.target.center, &obs.shape_at(self.horizon)) <= self.target.radius {
                return config(format!(
                    "target set intersects obstacles[{i}] at t = {}",
                    self.horizon
                ));
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(Error::Domain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Distance from `p` to the unsafe set at time `t`.
    pub fn dist_point_unsafe(&self, p: Vec2, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.clearance(p, t))
    }

    /// Same as [`Environment::dist_point_unsafe`] without the horizon check;
    /// obstacle offsets are held past the waypoint range.
    pub fn clearance(&self, p: Vec2, t: f64) -> f64 {
        self.obstacles
            .iter()
            .map(|o| dist_point_shape(p, &o.shape_at(t)))
            .fold(NO_OBSTACLE_DISTANCE, f64::min)
    }

    /// Largest obstacle translation speed; bounds how fast the distance to
    /// the unsafe set can change at a fixed point.
    pub fn unsafe_set_speed(&self) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.motion.max_speed())
            .fold(0.0, f64::max)
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{field}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(x: f64, y: f64, r: f64) -> Shape {
        Shape::Disc(Ball2::new(Vec2::new(x, y), r).unwrap())
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
        Shape::Rect(Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1)).unwrap())
    }

    fn ball_env(obstacles: Vec<Obstacle>) -> Environment {
        Environment::new(
            Workspace::Ball(Ball2::new(Vec2::ZERO, 20.0).unwrap()),
            Ball2::new(Vec2::new(-10.0, 0.0), 0.5).unwrap(),
            Ball2::new(Vec2::new(10.0, 0.0), 0.5).unwrap(),
            obstacles,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist_point_shape(Vec2::ZERO, &disc(3.0, 0.0, 1.0)), 2.0);
        assert_eq!(dist_point_shape(Vec2::new(1.0, 1.0), &rect(0.0, 0.0, 2.0, 2.0)), 0.0);
        assert!((dist_point_shape(Vec2::new(3.0, 4.0), &disc(0.0, 0.0, 1.0)) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn disc_distance_matches_boundary_brute_force() {
        let p = Vec2::new(3.0, 4.0);
        let n = 200_000;
        let brute = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (p - Vec2::new(a.cos(), a.sin())).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rect_distance_corner_and_face() {
        let r = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(dist_point_shape(Vec2::new(5.0, 1.0), &r), 3.0);
        assert_eq!(dist_point_shape(Vec2::new(5.0, 6.0), &r), 5.0);
    }

    #[test]
    fn unsafe_distance_examples() {
        let env = ball_env(vec![]);
        assert_eq!(env.dist_point_unsafe(Vec2::ZERO, 0.5).unwrap(), NO_OBSTACLE_DISTANCE);

        let env = ball_env(vec![Obstacle::fixed(disc(3.0, 0.0, 1.0))]);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(env.dist_point_unsafe(Vec2::ZERO, t).unwrap(), 2.0);
        }

        let moving = Obstacle {
            shape: disc(0.0, 0.0, 1.0),
            motion: Motion::PiecewiseLinear {
                waypoints: vec![(0.0, Vec2::ZERO), (1.0, Vec2::new(4.0, 0.0))],
            },
        };
        let env = Environment {
            obstacles: vec![moving],
            start: Ball2::new(Vec2::new(-10.0, 5.0), 0.5).unwrap(),
            ..ball_env(vec![])
        };
        env.validate().unwrap();
        assert!((env.dist_point_unsafe(Vec2::ZERO, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // Dense time sampling of the same quantity stays continuous around t = 0.5.
        for k in 0..=100 {
            let t = 0.45 + 0.001 * k as f64;
            let expected = (4.0 * t - 1.0).abs().max(0.0);
            let d = env.dist_point_unsafe(Vec2::ZERO, t).unwrap();
            assert!((d - expected.max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn unsafe_distance_rejects_out_of_horizon() {
        let env = ball_env(vec![]);
        assert!(matches!(
            env.dist_point_unsafe(Vec2::ZERO, 1.5),
            Err(Error::Domain { .. })
        ));
        assert!(env.dist_point_unsafe(Vec2::ZERO, -0.1).is_err());
    }

    #[test]
    fn workspace_margin_examples() {
        let mut env = ball_env(vec![]);
        env.workspace = Workspace::Ball(Ball2::new(Vec2::ZERO, 10.0).unwrap());
        assert_eq!(workspace_margin(Vec2::ZERO, 1.0, &env), -9.0);
        assert_eq!(workspace_margin(Vec2::new(8.0, 0.0), 3.0, &env), 1.0);

        env.workspace = Workspace::Rect(Rect::new(Vec2::ZERO, Vec2::new(10.0, 10.0)).unwrap());
        let c = Vec2::new(1.0, 5.0);
        assert_eq!(workspace_margin(c, 2.0, &env), 1.0);
        // Dense boundary sampling: the disc pokes out of the left wall by exactly 1.
        let worst = (0..10_000)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
                0.0 - (c.x + 2.0 * a.cos())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((worst - 1.0).abs() < 1e-9);
    }

    #[test]
    fn environment_invariants() {
        let blocked = Obstacle::fixed(disc(-10.0, 0.0, 1.0));
        let err = Environment::new(
            Workspace::Ball(Ball2::new(Vec2::ZERO, 20.0).unwrap()),
            Ball2::new(Vec2::new(-10.0, 0.0), 0.5).unwrap(),
            Ball2::new(Vec2::new(10.0, 0.0), 0.5).unwrap(),
            vec![blocked],
            1.0,
        );
        assert!(err.is_err());
        assert!(Ball2::new(Vec2::ZERO, 0.0).is_err());
        assert!(Rect::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 2.0)).is_err());
    }

    #[test]
    fn motion_validation() {
        let m = Motion::PiecewiseLinear {
            waypoints: vec![(0.0, Vec2::ZERO), (0.5, Vec2::ZERO)],
        };
        assert!(m.validate(1.0).is_err());
        let m = Motion::PiecewiseLinear {
            waypoints: vec![(0.0, Vec2::ZERO), (0.0, Vec2::ZERO), (1.0, Vec2::ZERO)],
        };
        assert!(m.validate(1.0).is_err());
    }

    #[test]
    fn signed_distance_interior_uses_nearest_face() {
        let r = rect(0.0, 0.0, 4.0, 2.0);
        let (d, g) = r.signed_distance(Vec2::new(1.0, 1.5));
        assert_eq!(d, -0.5);
        assert_eq!(g, Vec2::new(0.0, 1.0));
        let (d, g) = r.signed_distance(Vec2::new(6.0, 1.0));
        assert_eq!(d, 2.0);
        assert_eq!(g, Vec2::new(1.0, 0.0));
    }
}
