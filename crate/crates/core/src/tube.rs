//! Circular spatiotemporal tubes `B(c(t), r(t))` with Bernstein-polynomial
//! center and radius.
//!
//! Time is normalized to `s = t / t_c` before evaluating the basis, so
//! derivatives carry a `1 / t_c` factor. The Bernstein endpoint property
//! gives `c(0) = q[0]` and `c(t_c) = q[last]` exactly, which synthesis uses to
//! pin the start and target balls.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::Vec2;

/// Polynomial basis used by a tube. Only Bernstein is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    #[default]
    Bernstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    #[serde(default)]
    pub kind: BasisKind,
    pub degree: usize,
    pub horizon: f64,
}

impl BasisSpec {
    pub fn new(degree: usize, horizon: f64) -> Result<Self> {
        let spec = Self {
            kind: BasisKind::Bernstein,
            degree,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return config("basis degree must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return config(format!("basis horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    /// Number of coefficients per coordinate.
    pub fn size(&self) -> usize {
        self.degree + 1
    }
}

/// Fills `out` (length `degree + 1`) with the Bernstein basis of the given
/// degree at `s` in `[0, 1]`, using the triangular de Casteljau recurrence.
pub fn bernstein_basis(s: f64, out: &mut [f64]) {
    let n = out.len();
    debug_assert!(n >= 1);
    out.iter_mut().for_each(|v| *v = 0.0);
    out[0] = 1.0;
    let u = 1.0 - s;
    for j in 1..n {
        for k in (1..=j).rev() {
            out[k] = u * out[k] + s * out[k - 1];
        }
        out[0] *= u;
    }
}

fn bernstein_eval(q: &[f64], s: f64) -> f64 {
    // de Casteljau on the coefficients directly.
    let mut work = q.to_vec();
    let u = 1.0 - s;
    for j in 1..work.len() {
        for k in 0..work.len() - j {
            work[k] = u * work[k] + s * work[k + 1];
        }
    }
    work[0]
}

fn bernstein_derivative(q: &[f64], s: f64, horizon: f64) -> f64 {
    let n = q.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let diffs: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();
    n as f64 / horizon * bernstein_eval(&diffs, s)
}

/// Upper bound on `sup |d/dt p(t)|` for a Bernstein expansion on `[0, horizon]`:
/// the derivative's coefficients are scaled forward differences and the
/// expansion lies in their convex hull.
pub fn bernstein_slope_bound(q: &[f64], horizon: f64) -> f64 {
    let n = q.len().saturating_sub(1);
    let max_diff = q
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    n as f64 / horizon * max_diff
}

/// Lipschitz constants of the tube center and radius in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBounds {
    pub center: f64,
    pub radius: f64,
}

impl LipschitzBounds {
    pub fn total(&self) -> f64 {
        self.center + self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub t_c: f64,
    pub q_c1: Vec<f64>,
    pub q_c2: Vec<f64>,
    pub q_r: Vec<f64>,
}

impl Tube {
    pub fn new(t_c: f64, q_c1: Vec<f64>, q_c2: Vec<f64>, q_r: Vec<f64>) -> Result<Self> {
        let tube = Self { t_c, q_c1, q_c2, q_r };
        tube.validate()?;
        Ok(tube)
    }

    /// A tube with constant center and radius.
    pub fn constant(t_c: f64, degree: usize, center: Vec2, radius: f64) -> Result<Self> {
        let n = degree + 1;
        Self::new(t_c, vec![center.x; n], vec![center.y; n], vec![radius; n])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0 && self.t_c.is_finite()) {
            return config(format!("tube horizon must be positive, got {}", self.t_c));
        }
        for (name, q) in [("q_c1", &self.q_c1), ("q_c2", &self.q_c2), ("q_r", &self.q_r)] {
            if q.len() < 2 {
                return config(format!("{name} needs at least 2 coefficients (degree >= 1)"));
            }
            if q.iter().any(|v| !v.is_finite()) {
                return config(format!("{name} contains non-finite coefficients"));
            }
        }
        Ok(())
    }

    /// Degree of the center expansion.
    pub fn degree(&self) -> usize {
        self.q_c1.len() - 1
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec {
            kind: BasisKind::Bernstein,
            degree: self.degree(),
            horizon: self.t_c,
        }
    }

    fn normalized(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 || t > self.t_c {
            return Err(Error::Domain { t, horizon: self.t_c });
        }
        Ok(t / self.t_c)
    }

    pub fn eval_center(&self, t: f64) -> Result<Vec2> {
        let s = self.normalized(t)?;
        Ok(Vec2::new(bernstein_eval(&self.q_c1, s), bernstein_eval(&self.q_c2, s)))
    }

    pub fn eval_radius(&self, t: f64) -> Result<f64> {
        let s = self.normalized(t)?;
        Ok(bernstein_eval(&self.q_r, s))
    }

    pub fn eval_center_derivative(&self, t: f64) -> Result<Vec2> {
        let s = self.normalized(t)?;
        Ok(Vec2::new(
            bernstein_derivative(&self.q_c1, s, self.t_c),
            bernstein_derivative(&self.q_c2, s, self.t_c),
        ))
    }

    pub fn eval_radius_derivative(&self, t: f64) -> Result<f64> {
        let s = self.normalized(t)?;
        Ok(bernstein_derivative(&self.q_r, s, self.t_c))
    }

    /// Certified bounds on `sup ||c'(t)||` and `sup |r'(t)|` over the horizon.
    pub fn lipschitz_bounds(&self) -> LipschitzBounds {
        let b1 = bernstein_slope_bound(&self.q_c1, self.t_c);
        let b2 = bernstein_slope_bound(&self.q_c2, self.t_c);
        LipschitzBounds {
            center: b1.hypot(b2),
            radius: bernstein_slope_bound(&self.q_r, self.t_c),
        }
    }

    /// Smallest radius on a uniform grid of `points` samples, with its time.
    pub fn min_radius_on_grid(&self, points: usize) -> (f64, f64) {
        let points = points.max(2);
        (0..points)
            .map(|k| {
                let t = self.t_c * k as f64 / (points - 1) as f64;
                (bernstein_eval(&self.q_r, t / self.t_c), t)
            })
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// Certificate fields stored alongside a serialized tube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub eta_star: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub epsilon: f64,
}

/// On-disk form of a tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeRecord {
    pub t_c: f64,
    pub degree: usize,
    pub q_c1: Vec<f64>,
    pub q_c2: Vec<f64>,
    pub q_r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
}

impl TubeRecord {
    pub fn from_tube(tube: &Tube, certificate: Option<CertificateRecord>) -> Self {
        Self {
            t_c: tube.t_c,
            degree: tube.degree(),
            q_c1: tube.q_c1.clone(),
            q_c2: tube.q_c2.clone(),
            q_r: tube.q_r.clone(),
            certificate,
        }
    }

    pub fn to_tube(&self) -> Result<Tube> {
        if self.q_c1.len() != self.degree + 1 {
            return config(format!(
                "degree {} does not match {} center coefficients",
                self.degree,
                self.q_c1.len()
            ));
        }
        Tube::new(self.t_c, self.q_c1.clone(), self.q_c2.clone(), self.q_r.clone())
    }
}
