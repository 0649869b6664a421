//! Spatiotemporal tube synthesis and tube-following control for
//! differential-drive robots.
//!
//! A tube is a time-varying disc `B(c(t), r(t))` that starts in the start
//! set, ends in the target set at the deadline `t_c` and stays inside the
//! workspace and away from (possibly moving) obstacles for the whole
//! horizon. [`synthesis`] builds a certified tube from finitely many time
//! samples; [`controller`] keeps a disturbed unicycle inside it with a
//! closed-form funnel law; [`sim`] integrates the closed loop and checks the
//! reach-avoid-stay outcome.

pub mod controller;
pub mod error;
pub mod geometry;
pub mod sim;
pub mod synthesis;
pub mod tube;

pub use error::{Error, Result};
pub use geometry::{Ball2, Environment, Motion, Obstacle, Rect, Shape, Vec2, Workspace};
pub use tube::{BasisSpec, Tube, TubeRecord};
pub use controller::{ControllerParams, FunnelParams};
pub use sim::{RobotState, SimConfig, Verdict};
