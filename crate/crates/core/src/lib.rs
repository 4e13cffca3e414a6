//! Attention recording and revisualization for attention-aware visualizations.
//!
//! A viewer's attention stream (gaze, pointer, touch or head direction) is
//! integrated on a fixed tick lattice into two maps per target: a cumulative
//! dwell map that never decays and a capped short-term map that decays
//! exponentially while the target is not attended. Targets are either cells of
//! a regular grid laid over a mounted element ([`grid2d`]) or the individual
//! faces of a 3D scene, with visibility resolved through a software ID buffer
//! ([`marks3d`]).
//!
//! [`triggers`] decides when revisualization is shown and when capture is
//! gated, [`revis`] turns maps into heatmaps, contours, border marginals and
//! mark styles, and [`session`] records, persists and replays whole sessions
//! deterministically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grid2d;
pub mod marks3d;
pub mod model;
pub mod revis;
pub mod scanpath;
pub mod session;
pub mod triggers;

pub use grid2d::{AttentionGrid, Cell, GridConfig, GridError};
pub use marks3d::{Camera, FaceKey, MarkAttentionMap, PickBuffer, SceneObject};
pub use model::{
    AttentionLayers, AttentionSample, AttentionState, ModelError, ModelParams, Position, Source,
    TargetDomain,
};
pub use revis::RevisFrame;
pub use session::{Engine, LogEvent, LogHeader, SessionError, SessionLog, Snapshot};
pub use triggers::{Flag, ImplicitParams, TriggerMode, TriggerState};
