//! When revisualization is shown and when attention capture is gated.
//!
//! * `AlwaysOn`: revisualization is always visible and capture never stops.
//! * `Explicit`: a spring-loaded control shows the revisualization while held;
//!   capture is disabled for exactly that time.
//! * `Implicit`: per-target thresholds on the cap-normalized short-term value
//!   raise emphasis (value too low) or de-emphasis (value too high) flags.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TriggerError {
    #[error("explicit trigger received in {0:?} mode")]
    WrongMode(TriggerMode),
    #[error("invalid implicit params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    #[default]
    AlwaysOn,
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    #[default]
    None,
    Emphasize,
    DeEmphasize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImplicitParams {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub hysteresis: f64,
    pub emphasis: bool,
    pub deemphasis: bool,
}

impl Default for ImplicitParams {
    fn default() -> Self {
        Self {
            theta_lo: 0.1,
            theta_hi: 0.9,
            hysteresis: 0.05,
            emphasis: true,
            deemphasis: true,
        }
    }
}

impl ImplicitParams {
    pub fn validate(&self) -> Result<(), TriggerError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.theta_lo) || !unit(self.theta_hi) || self.theta_lo >= self.theta_hi {
            return Err(TriggerError::InvalidParams(format!(
                "need 0 < theta_lo < theta_hi < 1, got {} / {}",
                self.theta_lo, self.theta_hi
            )));
        }
        if !(self.hysteresis > 0.0)
            || self.theta_lo + self.hysteresis >= self.theta_hi - self.hysteresis
        {
            return Err(TriggerError::InvalidParams(format!(
                "hysteresis {} must be positive and keep the bands apart",
                self.hysteresis
            )));
        }
        Ok(())
    }
}

/// Next implicit flag for one target given its cap-normalized short-term
/// value. Exactly one transition per evaluation.
pub fn evaluate_implicit(value: f64, flag: Flag, params: &ImplicitParams) -> Flag {
    let next = match flag {
        Flag::None if value < params.theta_lo => Flag::Emphasize,
        Flag::None if value > params.theta_hi => Flag::DeEmphasize,
        Flag::Emphasize if value >= params.theta_lo + params.hysteresis => Flag::None,
        Flag::DeEmphasize if value <= params.theta_hi - params.hysteresis => Flag::None,
        f => f,
    };
    match next {
        Flag::Emphasize if !params.emphasis => Flag::None,
        Flag::DeEmphasize if !params.deemphasis => Flag::None,
        f => f,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerState {
    pub mode: TriggerMode,
    pub revis_visible: bool,
    pub capture_enabled: bool,
    /// Implicit flags, aligned with the attention map's target slots. Empty
    /// outside implicit mode.
    pub flags: Vec<Flag>,
}

impl TriggerState {
    pub fn new(mode: TriggerMode, targets: usize) -> Self {
        Self {
            mode,
            revis_visible: mode == TriggerMode::AlwaysOn,
            capture_enabled: true,
            flags: if mode == TriggerMode::Implicit {
                vec![Flag::None; targets]
            } else {
                Vec::new()
            },
        }
    }

    /// Spring-loaded control: visible while pressed, capture off while visible.
    pub fn on_explicit(&mut self, pressed: bool) -> Result<(), TriggerError> {
        if self.mode != TriggerMode::Explicit {
            return Err(TriggerError::WrongMode(self.mode));
        }
        self.revis_visible = pressed;
        self.capture_enabled = !pressed;
        Ok(())
    }

    /// Re-evaluates every implicit flag; a no-op in other modes.
    pub fn update_flags(&mut self, values: &[f64], params: &ImplicitParams) {
        if self.mode != TriggerMode::Implicit {
            return;
        }
        self.flags.resize(values.len(), Flag::None);
        for (flag, &v) in self.flags.iter_mut().zip(values) {
            *flag = evaluate_implicit(v, *flag, params);
        }
        self.revis_visible = self.flags.iter().any(|f| *f != Flag::None);
    }

    /// Whether samples may accumulate right now. Implicit mode keeps
    /// capturing so a flagged target can clear its own flag.
    pub fn gate_capture(&self) -> bool {
        match self.mode {
            TriggerMode::AlwaysOn | TriggerMode::Implicit => true,
            TriggerMode::Explicit => self.capture_enabled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_press_and_release() {
        let mut s = TriggerState::new(TriggerMode::Explicit, 0);
        assert!(!s.revis_visible && s.gate_capture());
        s.on_explicit(true).unwrap();
        assert!(s.revis_visible && !s.capture_enabled && !s.gate_capture());
        s.on_explicit(true).unwrap();
        assert!(s.revis_visible);
        s.on_explicit(false).unwrap();
        assert!(!s.revis_visible && s.gate_capture());
    }

    #[test]
    fn explicit_in_other_mode_fails() {
        let mut s = TriggerState::new(TriggerMode::Implicit, 3);
        assert_eq!(
            s.on_explicit(true),
            Err(TriggerError::WrongMode(TriggerMode::Implicit))
        );
    }

    #[test]
    fn always_on_captures_while_visible() {
        let s = TriggerState::new(TriggerMode::AlwaysOn, 0);
        assert!(s.revis_visible && s.gate_capture());
    }

    #[test]
    fn implicit_thresholds() {
        let p = ImplicitParams::default();
        assert_eq!(evaluate_implicit(0.05, Flag::None, &p), Flag::Emphasize);
        assert_eq!(evaluate_implicit(0.95, Flag::None, &p), Flag::DeEmphasize);
        assert_eq!(evaluate_implicit(0.5, Flag::None, &p), Flag::None);
        assert_eq!(evaluate_implicit(0.12, Flag::Emphasize, &p), Flag::Emphasize);
        assert_eq!(evaluate_implicit(0.16, Flag::Emphasize, &p), Flag::None);
        assert_eq!(evaluate_implicit(0.86, Flag::DeEmphasize, &p), Flag::DeEmphasize);
        assert_eq!(evaluate_implicit(0.85, Flag::DeEmphasize, &p), Flag::None);
    }

    #[test]
    fn disabled_effects_never_flag() {
        let p = ImplicitParams {
            emphasis: false,
            ..ImplicitParams::default()
        };
        assert_eq!(evaluate_implicit(0.0, Flag::None, &p), Flag::None);
        assert_eq!(evaluate_implicit(1.0, Flag::None, &p), Flag::DeEmphasize);
        let p = ImplicitParams {
            deemphasis: false,
            ..ImplicitParams::default()
        };
        assert_eq!(evaluate_implicit(1.0, Flag::None, &p), Flag::None);
    }

    #[test]
    fn params_validation() {
        assert!(ImplicitParams::default().validate().is_ok());
        let overlapping = ImplicitParams {
            theta_lo: 0.4,
            theta_hi: 0.5,
            hysteresis: 0.06,
            ..ImplicitParams::default()
        };
        assert!(overlapping.validate().is_err());
        let inverted = ImplicitParams {
            theta_lo: 0.9,
            theta_hi: 0.1,
            ..ImplicitParams::default()
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn implicit_visibility_follows_flags() {
        let p = ImplicitParams::default();
        let mut s = TriggerState::new(TriggerMode::Implicit, 2);
        assert!(!s.revis_visible);
        s.update_flags(&[0.5, 0.5], &p);
        assert!(!s.revis_visible);
        s.update_flags(&[0.5, 0.0], &p);
        assert_eq!(s.flags, vec![Flag::None, Flag::Emphasize]);
        assert!(s.revis_visible && s.gate_capture());
    }
}
