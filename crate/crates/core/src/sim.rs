//! Disturbed unicycle closed loop: dynamics, fixed-step RK4 integration,
//! disturbance models, tracing and the reach-avoid-stay verdict.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{compute_errors, control_law, raw_errors, ControllerParams, ErrorState};
use crate::error::{config, Result};
use crate::geometry::{Environment, Vec2};
use crate::tube::Tube;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x1: f64,
    pub x2: f64,
    /// Heading, integrated without wrapping.
    pub theta: f64,
}

impl RobotState {
    pub fn new(x1: f64, x2: f64, theta: f64) -> Self {
        Self { x1, x2, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x1, self.x2)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.theta.is_finite()
    }

    fn add_scaled(&self, d: [f64; 3], h: f64) -> Self {
        Self::new(self.x1 + h * d[0], self.x2 + h * d[1], self.theta + h * d[2])
    }
}

/// Additive disturbance on `(x1, x2, theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    #[default]
    None,
    ConstantBias { d1: f64, d2: f64, d_theta: f64 },
    /// `a_i sin(w_i t + phi_i)` per channel.
    Sinusoid {
        amplitudes: [f64; 3],
        frequencies: [f64; 3],
        phases: [f64; 3],
    },
    /// Uniform on `[-bound_i, bound_i]`, redrawn once per integration step.
    BoundedNoise { bound: [f64; 3], seed: u64 },
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            DisturbanceSpec::None => Ok(()),
            DisturbanceSpec::ConstantBias { d1, d2, d_theta } => {
                if finite(&[*d1, *d2, *d_theta]) {
                    Ok(())
                } else {
                    config("disturbance bias must be finite")
                }
            }
            DisturbanceSpec::Sinusoid {
                amplitudes,
                frequencies,
                phases,
            } => {
                if finite(amplitudes) && finite(frequencies) && finite(phases) {
                    Ok(())
                } else {
                    config("sinusoid parameters must be finite")
                }
            }
            DisturbanceSpec::BoundedNoise { bound, .. } => {
                if bound.iter().all(|b| b.is_finite() && *b >= 0.0) {
                    Ok(())
                } else {
                    config("noise bounds must be finite and non-negative")
                }
            }
        }
    }

    /// Per-channel sup-norm bound of every realization.
    pub fn bound(&self) -> [f64; 3] {
        match self {
            DisturbanceSpec::None => [0.0; 3],
            DisturbanceSpec::ConstantBias { d1, d2, d_theta } => [d1.abs(), d2.abs(), d_theta.abs()],
            DisturbanceSpec::Sinusoid { amplitudes, .. } => amplitudes.map(f64::abs),
            DisturbanceSpec::BoundedNoise { bound, .. } => *bound,
        }
    }
}

/// A realization of a [`DisturbanceSpec`] for one random stream.
#[derive(Debug, Clone)]
pub struct Disturbance {
    spec: DisturbanceSpec,
    rng: Option<ChaCha8Rng>,
    held: [f64; 3],
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Disturbance {
    pub fn new(spec: &DisturbanceSpec, stream: u64) -> Self {
        let rng = match spec {
            DisturbanceSpec::BoundedNoise { seed, .. } => Some(ChaCha8Rng::seed_from_u64(mix_seed(*seed, stream))),
            _ => None,
        };
        Self {
            spec: spec.clone(),
            rng,
            held: [0.0; 3],
        }
    }

    /// Draws the held value for the step starting now.
    fn begin_step(&mut self) {
        if let (DisturbanceSpec::BoundedNoise { bound, .. }, Some(rng)) = (&self.spec, self.rng.as_mut()) {
            for (h, b) in self.held.iter_mut().zip(bound) {
                *h = if *b > 0.0 { rng.random_range(-*b..=*b) } else { 0.0 };
            }
        }
    }

    /// Value at time `t` within the current step.
    pub fn at(&self, t: f64) -> [f64; 3] {
        match &self.spec {
            DisturbanceSpec::None => [0.0; 3],
            DisturbanceSpec::ConstantBias { d1, d2, d_theta } => [*d1, *d2, *d_theta],
            DisturbanceSpec::Sinusoid {
                amplitudes,
                frequencies,
                phases,
            } => std::array::from_fn(|i| amplitudes[i] * (frequencies[i] * t + phases[i]).sin()),
            DisturbanceSpec::BoundedNoise { .. } => self.held,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Integration step; `t_c / 5000` when absent.
    pub step: Option<f64>,
    /// Simulated time; the tube horizon when absent.
    pub duration: Option<f64>,
    pub disturbance: DisturbanceSpec,
    pub log_stride: usize,
    /// Sets the initial heading so that the orientation error is zero.
    pub auto_align_heading: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: None,
            duration: None,
            disturbance: DisturbanceSpec::None,
            log_stride: 10,
            auto_align_heading: true,
        }
    }
}

impl SimConfig {
    /// Step count, step length and end time for a tube horizon `t_c`.
    pub fn grid(&self, t_c: f64) -> Result<(usize, f64, f64)> {
        let duration = self.duration.unwrap_or(t_c);
        if !(duration > 0.0 && duration <= t_c * (1.0 + 1e-12)) {
            return config(format!("sim duration {duration} must lie in (0, {t_c}]"));
        }
        let h = self.step.unwrap_or(t_c / 5000.0);
        if !(h > 0.0 && h.is_finite()) {
            return config(format!("sim step must be positive, got {h}"));
        }
        if h > t_c / 100.0 {
            return config(format!("sim step {h} exceeds t_c / 100 = {}", t_c / 100.0));
        }
        let n = ((duration / h) - 1e-9).ceil().max(1.0) as usize;
        let end = duration.min(t_c);
        Ok((n, end / n as f64, end))
    }

    pub fn validate(&self) -> Result<()> {
        if self.log_stride == 0 {
            return config("log_stride must be at least 1");
        }
        self.disturbance.validate()
    }
}

/// Unicycle kinematics with additive disturbance.
pub fn dynamics(state: &RobotState, u: (f64, f64), d: [f64; 3]) -> [f64; 3] {
    let (v, omega) = u;
    [
        v * state.theta.cos() + d[0],
        v * state.theta.sin() + d[1],
        omega + d[2],
    ]
}

/// One classical fourth-order Runge-Kutta step of `x' = f(x, t)`.
pub fn rk4_step<F>(state: &RobotState, t: f64, h: f64, mut f: F) -> Result<RobotState>
where
    F: FnMut(&RobotState, f64) -> Result<[f64; 3]>,
{
    let k1 = f(state, t)?;
    let k2 = f(&state.add_scaled(k1, h / 2.0), t + h / 2.0)?;
    let k3 = f(&state.add_scaled(k2, h / 2.0), t + h / 2.0)?;
    let k4 = f(&state.add_scaled(k3, h), t + h)?;
    let d: [f64; 3] = std::array::from_fn(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    Ok(state.add_scaled(d, h))
}

/// Closed-loop vector field at `(state, t)`; `t` is clamped to the horizon.
fn closed_loop(
    state: &RobotState,
    t: f64,
    tube: &Tube,
    params: &ControllerParams,
    d: [f64; 3],
) -> Result<[f64; 3]> {
    let t = t.clamp(0.0, tube.t_c);
    let err = compute_errors(state, t, tube, params)?;
    let u = control_law(&err, params)?;
    Ok(dynamics(state, u, d))
}

/// One closed-loop RK4 step with the disturbance realized for this step.
pub fn step(
    state: &RobotState,
    t: f64,
    h: f64,
    tube: &Tube,
    params: &ControllerParams,
    disturbance: &mut Disturbance,
    clock_offset: f64,
) -> Result<RobotState> {
    disturbance.begin_step();
    let dist = &*disturbance;
    rk4_step(state, t, h, |s, tau| {
        closed_loop(s, tau, tube, params, dist.at(clock_offset + tau))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    /// Mission time.
    pub t: f64,
    pub state: RobotState,
    pub v: f64,
    pub omega: f64,
    pub errors: ErrorState,
    pub in_tube: bool,
    /// Distance to the nearest unsafe set.
    pub clearance: f64,
    /// Disturbance held over the step that starts at this row.
    pub disturbance: [f64; 3],
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<SimRow>,
}

impl SimTrace {
    /// Delimited export with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,theta,v,omega,e_d,e_theta,rho_d,rho_theta,in_tube,clearance\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{:.9}\n",
                r.t,
                r.state.x1,
                r.state.x2,
                r.state.theta,
                r.v,
                r.omega,
                r.errors.e_d,
                r.errors.e_theta,
                r.errors.rho_d,
                r.errors.rho_theta,
                u8::from(r.in_tube),
                r.clearance.min(1e12),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub reached_target: bool,
    /// First time the position was inside the target set.
    pub hit_time: Option<f64>,
    pub always_safe: bool,
    pub always_in_tube: bool,
    pub min_clearance: f64,
    /// Distance of the final position from the target center.
    pub final_distance: f64,
}

impl Verdict {
    pub fn all_true(&self) -> bool {
        self.reached_target && self.always_safe && self.always_in_tube
    }

    /// Combines segment verdicts: every segment must hold.
    pub fn combine(verdicts: &[Verdict]) -> Option<Verdict> {
        let last = verdicts.last()?;
        Some(Verdict {
            reached_target: verdicts.iter().all(|v| v.reached_target),
            hit_time: last.hit_time,
            always_safe: verdicts.iter().all(|v| v.always_safe),
            always_in_tube: verdicts.iter().all(|v| v.always_in_tube),
            min_clearance: verdicts.iter().map(|v| v.min_clearance).fold(f64::INFINITY, f64::min),
            final_distance: last.final_distance,
        })
    }
}

struct VerdictBuilder {
    hit_time: Option<f64>,
    always_safe: bool,
    always_in_tube: bool,
    min_clearance: f64,
}

impl VerdictBuilder {
    fn observe(&mut self, env: &Environment, t_local: f64, t_mission: f64, s: &RobotState, in_tube: bool) -> f64 {
        let p = s.position();
        if self.hit_time.is_none() && env.target.contains(p) && t_local <= env.horizon {
            self.hit_time = Some(t_mission);
        }
        let clearance = env.clearance(p, t_local.clamp(0.0, env.horizon));
        self.min_clearance = self.min_clearance.min(clearance);
        if !(clearance > 0.0 && env.workspace.contains(p)) {
            self.always_safe = false;
        }
        if !in_tube {
            self.always_in_tube = false;
        }
        clearance
    }
}

/// Choose the initial heading that zeroes the orientation error.
fn aligned_heading(state: &RobotState, tube: &Tube, params: &ControllerParams) -> Result<f64> {
    let c = tube.eval_center(0.0)?;
    let r = tube.eval_radius(0.0)?;
    let offset = state.position() - c;
    if offset.norm() > params.e_d_floor * r {
        return Ok(offset.y.atan2(offset.x));
    }
    let dc = tube.eval_center_derivative(0.0)?;
    if dc.norm() > 0.0 {
        Ok((-dc.y).atan2(-dc.x))
    } else {
        Ok(state.theta)
    }
}

/// One tube segment of a mission.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub env: Environment,
    pub tube: Tube,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionResult {
    pub trace: SimTrace,
    pub segments: Vec<Verdict>,
    pub verdict: Verdict,
}

#[allow(clippy::too_many_arguments)]
fn run_segment(
    index: usize,
    segment: &Segment,
    params: &ControllerParams,
    cfg: &SimConfig,
    mut state: RobotState,
    align: bool,
    disturbance: &mut Disturbance,
    t0: f64,
    rows: &mut Vec<SimRow>,
) -> Result<(RobotState, Verdict)> {
    let Segment { env, tube } = segment;
    let (n, h, end) = cfg.grid(tube.t_c)?;
    if align {
        state.theta = aligned_heading(&state, tube, params)?;
    }
    let e0 = raw_errors(&state, 0.0, tube, params)?;
    if e0.e_d >= 1.0 {
        return config(format!(
            "segment {index}: initial position outside the tube (e_d(0) = {:.6})",
            e0.e_d
        ));
    }
    if e0.e_hat_d.abs() >= 1.0 {
        return config(format!(
            "segment {index}: initial distance error outside its funnel (e_d(0) = {:.6}, rho_d(0) = {})",
            e0.e_d, e0.rho_d
        ));
    }
    if e0.e_hat_theta.abs() >= 1.0 {
        return config(format!(
            "segment {index}: inadmissible initial heading (|e_theta(0)| = {:.6} >= rho_theta(0) = {})",
            e0.e_theta.abs(),
            e0.rho_theta
        ));
    }
    let mut vb = VerdictBuilder {
        hit_time: None,
        always_safe: true,
        always_in_tube: true,
        min_clearance: f64::INFINITY,
    };
    let mut t = 0.0;
    for k in 0..=n {
        let err = compute_errors(&state, t, tube, params)?;
        let in_tube = err.e_d < 1.0;
        let clearance = vb.observe(env, t, t0 + t, &state, in_tube);
        let log = k % cfg.log_stride == 0 || k == n;
        if k == n {
            if log {
                let (v, omega) = control_law(&err, params)?;
                rows.push(SimRow {
                    t: t0 + t,
                    state,
                    v,
                    omega,
                    errors: err,
                    in_tube,
                    clearance,
                    disturbance: [0.0; 3],
                    segment: index,
                });
            }
            break;
        }
        let next = step(&state, t, h, tube, params, disturbance, t0)?;
        if log {
            let (v, omega) = control_law(&err, params)?;
            rows.push(SimRow {
                t: t0 + t,
                state,
                v,
                omega,
                errors: err,
                in_tube,
                clearance,
                disturbance: disturbance.at(t0 + t),
                segment: index,
            });
        }
        state = next;
        t = if k + 1 == n { end } else { (k + 1) as f64 * h };
    }
    let final_distance = (state.position() - env.target.center).norm();
    Ok((
        state,
        Verdict {
            reached_target: vb.hit_time.is_some(),
            hit_time: vb.hit_time,
            always_safe: vb.always_safe,
            always_in_tube: vb.always_in_tube,
            min_clearance: vb.min_clearance,
            final_distance,
        },
    ))
}

/// Runs the segments back to back. Funnel clocks restart at each segment;
/// obstacle motion and disturbances follow the mission clock.
pub fn run_mission(
    segments: &[Segment],
    params: &ControllerParams,
    cfg: &SimConfig,
    initial: RobotState,
    stream: u64,
) -> Result<MissionResult> {
    params.validate()?;
    cfg.validate()?;
    if segments.is_empty() {
        return config("mission has no segments");
    }
    if !initial.is_finite() {
        return config("initial state must be finite");
    }
    let mut disturbance = Disturbance::new(&cfg.disturbance, stream);
    let mut rows = Vec::new();
    let mut verdicts = Vec::with_capacity(segments.len());
    let mut state = initial;
    let mut t0 = 0.0;
    for (i, seg) in segments.iter().enumerate() {
        let align = i == 0 && cfg.auto_align_heading;
        let (next, verdict) = run_segment(i, seg, params, cfg, state, align, &mut disturbance, t0, &mut rows)?;
        state = next;
        verdicts.push(verdict);
        t0 += seg.tube.t_c;
    }
    let verdict = Verdict::combine(&verdicts).expect("non-empty");
    Ok(MissionResult {
        trace: SimTrace { rows },
        segments: verdicts,
        verdict,
    })
}

/// Single-segment run.
pub fn run(
    env: &Environment,
    tube: &Tube,
    params: &ControllerParams,
    cfg: &SimConfig,
    initial: RobotState,
    stream: u64,
) -> Result<(SimTrace, Verdict)> {
    let seg = [Segment {
        env: env.clone(),
        tube: tube.clone(),
    }];
    let res = run_mission(&seg, params, cfg, initial, stream)?;
    Ok((res.trace, res.verdict))
}

/// Independent runs, one per stream, in parallel; results keep input order.
pub fn run_batch(
    segments: &[Segment],
    params: &ControllerParams,
    cfg: &SimConfig,
    initial: RobotState,
    streams: &[u64],
) -> Vec<Result<MissionResult>> {
    streams
        .par_iter()
        .map(|&s| run_mission(segments, params, cfg, initial, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball2, Workspace};
    use std::f64::consts::FRAC_PI_2;

    fn straight_env() -> Environment {
        Environment::new(
            Workspace::Ball(Ball2::new(Vec2::ZERO, 10.0).unwrap()),
            Ball2::new(Vec2::new(-5.0, 0.0), 1.0).unwrap(),
            Ball2::new(Vec2::new(5.0, 0.0), 1.0).unwrap(),
            vec![],
            10.0,
        )
        .unwrap()
    }

    fn straight_tube() -> Tube {
        Tube::new(10.0, vec![-5.0, 5.0], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn dynamics_examples() {
        let s = RobotState::new(0.0, 0.0, 0.0);
        assert_eq!(dynamics(&s, (1.0, 0.0), [0.0; 3]), [1.0, 0.0, 0.0]);
        assert_eq!(dynamics(&s, (0.0, 1.0), [0.0; 3]), [0.0, 0.0, 1.0]);
        let s = RobotState::new(0.0, 0.0, FRAC_PI_2);
        let d = dynamics(&s, (1.0, 0.0), [0.1, -0.1, 0.0]);
        assert!((d[0] - 0.1).abs() < 1e-15 && (d[1] - 0.9).abs() < 1e-15 && d[2] == 0.0);
    }

    #[test]
    fn zero_field_keeps_state() {
        let s = RobotState::new(0.3, -2.0, 7.0);
        let next = rk4_step(&s, 0.0, 0.1, |_, _| Ok([0.0; 3])).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn center_of_static_tube_is_equilibrium() {
        let tube = Tube::constant(5.0, 2, Vec2::new(1.0, 1.0), 1.0).unwrap();
        let s = RobotState::new(1.0, 1.0, 0.4);
        let mut d = Disturbance::new(&DisturbanceSpec::None, 0);
        let next = step(&s, 0.0, 0.01, &tube, &ControllerParams::default(), &mut d, 0.0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn straight_run_succeeds() {
        let (trace, verdict) = run(
            &straight_env(),
            &straight_tube(),
            &ControllerParams::default(),
            &SimConfig::default(),
            RobotState::new(-5.0, 0.0, 0.0),
            0,
        )
        .unwrap();
        assert!(verdict.all_true(), "{verdict:?}");
        for w in trace.rows.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        assert_eq!(trace.rows.last().unwrap().t, 10.0);
    }

    #[test]
    fn noise_respects_bound_and_is_deterministic() {
        let cfg = SimConfig {
            disturbance: DisturbanceSpec::BoundedNoise {
                bound: [0.1, 0.1, 0.05],
                seed: 9,
            },
            log_stride: 1,
            ..SimConfig::default()
        };
        let go = |stream| {
            run(
                &straight_env(),
                &straight_tube(),
                &ControllerParams::default(),
                &cfg,
                RobotState::new(-5.2, 0.1, 0.0),
                stream,
            )
            .unwrap()
        };
        let (a, va) = go(3);
        let (b, _) = go(3);
        let (c, _) = go(4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(va.all_true());
        for r in &a.rows {
            for i in 0..3 {
                assert!(r.disturbance[i].abs() <= cfg.disturbance.bound()[i]);
            }
        }
    }

    #[test]
    fn initial_state_outside_tube_is_rejected() {
        let res = run(
            &straight_env(),
            &straight_tube(),
            &ControllerParams::default(),
            &SimConfig::default(),
            RobotState::new(-5.0, 1.5, 0.0),
            0,
        );
        assert!(matches!(res, Err(crate::Error::Config(_))));
    }

    #[test]
    fn misaligned_heading_is_rejected_without_auto_align() {
        let cfg = SimConfig {
            auto_align_heading: false,
            ..SimConfig::default()
        };
        let res = run(
            &straight_env(),
            &straight_tube(),
            &ControllerParams::default(),
            &cfg,
            RobotState::new(-5.0, 0.5, -FRAC_PI_2),
            0,
        );
        assert!(matches!(res, Err(crate::Error::Config(_))));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let cfg = SimConfig {
            step: Some(0.5),
            ..SimConfig::default()
        };
        assert!(cfg.grid(10.0).is_err());
    }
}
