//! Scenario files: flat TOML key/value pairs, all optional.
//!
//! ```toml
//! mass = 4.5
//! speed = 0.55
//! method = "trinal"
//! step = 6.5e-4
//! sync_mode = "both"
//! ```
//!
//! Contact parameters left out take their nominal values for `mass`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::{ContactCase, ContactParams, TrajectorySpec, DEFAULT_STEP};
use crate::engine::{EngineConfig, SyncMode};
use crate::error::{ReachError, Result};
use crate::guard::{Method, Tuning};
use crate::safety::ForceLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub mass: f64,
    pub speed: f64,
    pub method: Method,

    pub k_t: Option<f64>,
    pub d_t: Option<f64>,
    pub d_r: Option<f64>,
    pub f_t: Option<f64>,
    pub k_e: Option<f64>,
    pub d_e: Option<f64>,
    pub l: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,

    pub impact_time: f64,
    pub stop_position: f64,
    pub sample_rate: f64,
    pub horizon: f64,

    pub step: f64,
    pub max_order: f64,
    pub k_s: f64,
    /// Seconds; defaults to one step.
    pub r_delta_target: Option<f64>,
    pub r_vol_limit: f64,
    pub refine_factor: usize,
    /// Seconds; defaults to two steps.
    pub sync_threshold: Option<f64>,
    pub sync_mode: SyncMode,
    pub max_jumps: usize,
    pub max_branches: usize,

    pub transient_limit: f64,
    pub quasi_static_limit: f64,
    pub transient_window: f64,

    pub out: Option<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        let traj = TrajectorySpec::nominal(0.55);
        let tuning = Tuning::default();
        let cfg = EngineConfig::new(DEFAULT_STEP, traj.horizon, Method::Trinal);
        let limits = ForceLimits::default();
        Scenario {
            mass: 4.5,
            speed: traj.impact_speed,
            method: Method::Trinal,
            k_t: None,
            d_t: None,
            d_r: None,
            f_t: None,
            k_e: None,
            d_e: None,
            l: None,
            d1: None,
            d2: None,
            impact_time: traj.impact_time,
            stop_position: traj.stop_position,
            sample_rate: traj.sample_rate,
            horizon: traj.horizon,
            step: DEFAULT_STEP,
            max_order: cfg.max_order,
            k_s: tuning.k_s,
            r_delta_target: tuning.r_delta_target,
            r_vol_limit: tuning.r_vol_limit,
            refine_factor: tuning.refine_factor,
            sync_threshold: None,
            sync_mode: cfg.sync_mode,
            max_jumps: cfg.max_jumps,
            max_branches: cfg.max_branches,
            transient_limit: limits.transient,
            quasi_static_limit: limits.quasi_static,
            transient_window: limits.window,
            out: None,
        }
    }
}

impl Scenario {
    pub fn nominal(mass: f64, speed: f64, method: Method) -> Self {
        Scenario {
            mass,
            speed,
            method,
            ..Scenario::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| ReachError::InvalidArgument(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReachError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(ReachError::InvalidArgument("step must be positive".into()));
        }
        if self.refine_factor == 0 || self.max_jumps == 0 {
            return Err(ReachError::InvalidArgument("refine_factor and max_jumps must be positive".into()));
        }
        self.params().validate()?;
        self.trajectory().validate()?;
        self.engine_config().validate()
    }

    pub fn params(&self) -> ContactParams {
        let n = ContactParams::nominal(self.mass);
        ContactParams {
            m: self.mass,
            k_t: self.k_t.unwrap_or(n.k_t),
            d_t: self.d_t.unwrap_or(n.d_t),
            d_r: self.d_r.unwrap_or(n.d_r),
            f_t: self.f_t.unwrap_or(n.f_t),
            k_e: self.k_e.unwrap_or(n.k_e),
            d_e: self.d_e.unwrap_or(n.d_e),
            l: self.l.unwrap_or(n.l),
            d1: self.d1.unwrap_or(n.d1),
            d2: self.d2.unwrap_or(n.d2),
        }
    }

    pub fn trajectory(&self) -> TrajectorySpec {
        TrajectorySpec {
            impact_time: self.impact_time,
            impact_speed: self.speed,
            stop_position: self.stop_position,
            sample_rate: self.sample_rate,
            horizon: self.horizon,
        }
    }

    pub fn case(&self) -> Result<ContactCase> {
        ContactCase::new(self.params(), self.trajectory())
    }

    pub fn engine_config(&self) -> EngineConfig {
        let mut cfg = EngineConfig::new(self.step, self.horizon, self.method);
        cfg.tuning = Tuning {
            k_s: self.k_s,
            r_delta_target: self.r_delta_target,
            r_vol_limit: self.r_vol_limit,
            refine_factor: self.refine_factor,
            ..Tuning::default()
        };
        cfg.max_order = self.max_order;
        cfg.sync_threshold = self.sync_threshold;
        cfg.sync_mode = self.sync_mode;
        cfg.max_jumps = self.max_jumps;
        cfg.max_branches = self.max_branches;
        cfg
    }

    pub fn limits(&self) -> ForceLimits {
        ForceLimits {
            transient: self.transient_limit,
            quasi_static: self.quasi_static_limit,
            window: self.transient_window,
        }
    }
}
