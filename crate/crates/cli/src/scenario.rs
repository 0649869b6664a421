//! Scenario documents: one environment, optionally split into a chain of
//! reach-avoid-stay legs, plus synthesis, controller and simulation settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stt_core::controller::ControllerParams;
use stt_core::geometry::{Ball2, Environment, Obstacle, Workspace};
use stt_core::sim::{RobotState, SimConfig};
use stt_core::synthesis::SolverOptions;

use crate::error::{CliError, CliResult};
use crate::files::read_json;

/// One leg of a mission: reach `target` within `horizon` from the previous
/// leg's target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub target: Ball2,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub workspace: Workspace,
    pub start: Ball2,
    /// Single-leg target; use either this with `horizon` or `mission`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Ball2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mission: Vec<Leg>,
    /// Obstacle motions use mission time.
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_degree: Option<usize>,
    pub epsilon: f64,
    pub r_d: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub sim: SimConfig,
    /// Initial robot state; the start center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<RobotState>,
    /// Disturbance streams simulated by default.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let s: Scenario = read_json(path)?;
        s.validate().map_err(|e| e.context(path.display()))?;
        Ok(s)
    }

    pub fn legs(&self) -> CliResult<Vec<Leg>> {
        match (&self.target, self.horizon, self.mission.is_empty()) {
            (Some(target), Some(horizon), true) => Ok(vec![Leg {
                target: *target,
                horizon,
            }]),
            (None, None, false) => Ok(self.mission.clone()),
            _ => Err(CliError::usage(
                "scenario needs either `target` and `horizon` or a non-empty `mission`",
            )),
        }
    }

    /// Per-segment environments on local time; segment `k` starts at the
    /// target of segment `k - 1`.
    pub fn environments(&self) -> CliResult<Vec<Environment>> {
        let legs = self.legs()?;
        let mut envs = Vec::with_capacity(legs.len());
        let mut start = self.start;
        let mut t0 = 0.0;
        for (k, leg) in legs.iter().enumerate() {
            let obstacles = self
                .obstacles
                .iter()
                .map(|o| Obstacle {
                    shape: o.shape,
                    motion: o.motion.shifted(t0),
                })
                .collect();
            let env = Environment::new(self.workspace, start, leg.target, obstacles, leg.horizon)
                .map_err(|e| CliError::from(e).context(format!("segment {k}")))?;
            envs.push(env);
            start = leg.target;
            t0 += leg.horizon;
        }
        Ok(envs)
    }

    pub fn mission_horizon(&self) -> CliResult<f64> {
        Ok(self.legs()?.iter().map(|l| l.horizon).sum())
    }

    pub fn initial_state(&self) -> RobotState {
        self.initial_state
            .unwrap_or(RobotState::new(self.start.center.x, self.start.center.y, 0.0))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.degree < 1 {
            return Err(CliError::usage("degree must be at least 1"));
        }
        if self.radius_degree == Some(0) {
            return Err(CliError::usage("radius_degree must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::usage(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.r_d > 0.0 && self.r_d.is_finite()) {
            return Err(CliError::usage(format!("r_d must be positive, got {}", self.r_d)));
        }
        if self.solver.starts == 0 || self.solver.rounds == 0 {
            return Err(CliError::usage("solver starts and rounds must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("seeds must not be empty"));
        }
        for (k, leg) in self.legs()?.iter().enumerate() {
            if !(leg.horizon > 0.0 && leg.horizon.is_finite()) {
                return Err(CliError::usage(format!(
                    "segment {k}: horizon must be positive, got {}",
                    leg.horizon
                )));
            }
        }
        self.controller.validate().map_err(|e| CliError::from(e).context("controller"))?;
        self.sim.validate().map_err(|e| CliError::from(e).context("sim"))?;
        for leg in self.legs()? {
            self.sim.grid(leg.horizon).map_err(|e| CliError::from(e).context("sim"))?;
        }
        self.environments()?;
        Ok(())
    }
}
