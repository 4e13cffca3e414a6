//! The attention value model shared by grid cells and scene faces.
//!
//! Each target carries a cumulative dwell time (seconds, never decreasing) and
//! a short-term value that grows linearly while attended, is clamped at a cap
//! and halves every `half_life_s` while unattended.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown target {0}")]
    UnknownTarget(String),
}

/// Where an attention measurement came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Gaze,
    Pointer,
    Touch,
    Head,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Gaze, Source::Pointer, Source::Touch, Source::Head];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Gaze => "gaze",
            Source::Pointer => "pointer",
            Source::Touch => "touch",
            Source::Head => "head",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum CenterTag {
    #[serde(rename = "screen-center")]
    ScreenCenter,
}

/// Attention point in element/screen pixels, or the center of whatever
/// surface the sample is applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Point { x: f64, y: f64 },
    ScreenCenter,
}

impl Position {
    pub fn point(x: f64, y: f64) -> Self {
        Position::Point { x, y }
    }

    /// Resolves the sentinel against a surface of the given size.
    pub fn resolve(self, width: f64, height: f64) -> (f64, f64) {
        match self {
            Position::Point { x, y } => (x, y),
            Position::ScreenCenter => (width / 2.0, height / 2.0),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PositionRepr {
    Point([f64; 2]),
    Center(CenterTag),
}

impl Serialize for Position {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            Position::Point { x, y } => PositionRepr::Point([x, y]),
            Position::ScreenCenter => PositionRepr::Center(CenterTag::ScreenCenter),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Position {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match PositionRepr::deserialize(deserializer)? {
            PositionRepr::Point([x, y]) => Position::Point { x, y },
            PositionRepr::Center(_) => Position::ScreenCenter,
        })
    }
}

/// One timestamped attention measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSample {
    pub timestamp_ms: u64,
    pub position: Position,
    pub source: Source,
    pub radius_px: f64,
}

impl AttentionSample {
    pub fn new(timestamp_ms: u64, position: Position, source: Source, radius_px: f64) -> Self {
        Self {
            timestamp_ms,
            position,
            source,
            radius_px,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.radius_px >= 0.0) || !self.radius_px.is_finite() {
            return Err(ModelError::InvalidArgument(format!(
                "radius_px must be a finite non-negative number, got {}",
                self.radius_px
            )));
        }
        if let Position::Point { x, y } = self.position {
            if !x.is_finite() || !y.is_finite() {
                return Err(ModelError::InvalidArgument("non-finite position".into()));
            }
        }
        Ok(())
    }
}

/// Per-target pair of attention values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttentionState {
    /// Attended seconds over the whole session.
    pub cumulative: f64,
    /// Decaying short-term attention in `[0, cap]`.
    pub short_term: f64,
}

impl AttentionState {
    pub const ZERO: AttentionState = AttentionState {
        cumulative: 0.0,
        short_term: 0.0,
    };

    pub fn new(cumulative: f64, short_term: f64) -> Self {
        Self {
            cumulative,
            short_term,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Short-term accumulation rate, per second attended.
    pub gain_per_s: f64,
    pub half_life_s: f64,
    /// Short-term ceiling.
    pub cap: f64,
    pub default_radius_px: f64,
    pub tick_ms: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gain_per_s: 1.0,
            half_life_s: 10.0,
            cap: 1.0,
            default_radius_px: 48.0,
            tick_ms: 100,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("gain_per_s", self.gain_per_s)?;
        positive("half_life_s", self.half_life_s)?;
        positive("cap", self.cap)?;
        positive("default_radius_px", self.default_radius_px)?;
        if self.tick_ms == 0 {
            return Err(ModelError::InvalidArgument("tick_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn tick_s(&self) -> f64 {
        self.tick_ms as f64 / 1000.0
    }

    /// Multiplicative short-term decay over `dt_s` unattended seconds.
    pub fn decay_factor(&self, dt_s: f64) -> f64 {
        (-dt_s / self.half_life_s).exp2()
    }
}

/// Advances one target by `dt_s` seconds.
pub fn tick(
    state: AttentionState,
    attended: bool,
    dt_s: f64,
    params: &ModelParams,
) -> Result<AttentionState, ModelError> {
    if !(dt_s > 0.0) || !dt_s.is_finite() {
        return Err(ModelError::InvalidArgument(format!(
            "dt_s must be positive, got {dt_s}"
        )));
    }
    Ok(advance(state, attended, dt_s, params.decay_factor(dt_s), params))
}

#[inline]
fn advance(
    state: AttentionState,
    attended: bool,
    dt_s: f64,
    decay: f64,
    params: &ModelParams,
) -> AttentionState {
    if attended {
        AttentionState {
            cumulative: state.cumulative + dt_s,
            short_term: (state.short_term + params.gain_per_s * dt_s).min(params.cap),
        }
    } else {
        AttentionState {
            cumulative: state.cumulative,
            short_term: state.short_term * decay,
        }
    }
}

/// Divides every value by the maximum; an all-zero (or empty) input stays zero.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// The set of attention targets a map is defined over.
pub trait TargetDomain {
    type Target: std::fmt::Debug;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense index of `target`, or `None` when it is not part of the domain.
    fn slot(&self, target: &Self::Target) -> Option<usize>;
}

/// Dual cumulative/short-term maps over a target domain, one layer per
/// attention source.
///
/// Layers are created on the first sample of their source; a missing layer is
/// indistinguishable from an all-zero one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayers<D> {
    pub domain: D,
    pub layers: BTreeMap<Source, Vec<AttentionState>>,
}

impl<D: TargetDomain> AttentionLayers<D> {
    pub fn new(domain: D) -> Self {
        Self {
            domain,
            layers: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn layer(&self, source: Source) -> Option<&[AttentionState]> {
        self.layers.get(&source).map(Vec::as_slice)
    }

    /// Checks that every layer covers exactly the domain and holds valid states.
    pub fn validate(&self, params: &ModelParams) -> Result<(), ModelError> {
        for (source, layer) in &self.layers {
            if layer.len() != self.domain.len() {
                return Err(ModelError::InvalidArgument(format!(
                    "{} layer has {} targets, domain has {}",
                    source.as_str(),
                    layer.len(),
                    self.domain.len()
                )));
            }
            for s in layer {
                let ok = s.cumulative >= 0.0
                    && s.cumulative.is_finite()
                    && s.short_term >= 0.0
                    && s.short_term <= params.cap;
                if !ok {
                    return Err(ModelError::InvalidArgument(format!(
                        "invalid attention state {s:?} in {} layer",
                        source.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Runs one tick: every target of every layer is updated exactly once,
    /// attended iff it appears in that source's hit list.
    ///
    /// Unknown targets are rejected before anything is mutated.
    pub fn step_session(
        &mut self,
        hits: &[(Source, Vec<D::Target>)],
        dt_s: f64,
        params: &ModelParams,
    ) -> Result<(), ModelError> {
        if !(dt_s > 0.0) || !dt_s.is_finite() {
            return Err(ModelError::InvalidArgument(format!(
                "dt_s must be positive, got {dt_s}"
            )));
        }
        let n = self.domain.len();
        let mut masks: BTreeMap<Source, Vec<bool>> = BTreeMap::new();
        for (source, targets) in hits {
            let mask = masks.entry(*source).or_insert_with(|| vec![false; n]);
            for t in targets {
                let slot = self
                    .domain
                    .slot(t)
                    .ok_or_else(|| ModelError::UnknownTarget(format!("{t:?}")))?;
                mask[slot] = true;
            }
        }
        for source in masks.keys() {
            self.layers
                .entry(*source)
                .or_insert_with(|| vec![AttentionState::ZERO; n]);
        }

        let decay = params.decay_factor(dt_s);
        for (source, layer) in self.layers.iter_mut() {
            match masks.get(source) {
                Some(mask) => {
                    for (state, &hit) in layer.iter_mut().zip(mask) {
                        *state = advance(*state, hit, dt_s, decay, params);
                    }
                }
                None => {
                    for state in layer.iter_mut() {
                        *state = advance(*state, false, dt_s, decay, params);
                    }
                }
            }
        }
        Ok(())
    }

    fn fused(&self, pick: impl Fn(&AttentionState) -> f64) -> Vec<f64> {
        let mut out = vec![0.0f64; self.domain.len()];
        for layer in self.layers.values() {
            for (o, s) in out.iter_mut().zip(layer) {
                *o = o.max(pick(s));
            }
        }
        out
    }

    /// Per-target maximum cumulative value across sources.
    pub fn fused_cumulative(&self) -> Vec<f64> {
        self.fused(|s| s.cumulative)
    }

    /// Per-target maximum short-term value across sources.
    pub fn fused_short_term(&self) -> Vec<f64> {
        self.fused(|s| s.short_term)
    }

    /// Fraction of targets with nonzero cumulative attention.
    pub fn coverage(&self) -> f64 {
        let n = self.domain.len();
        if n == 0 {
            return 0.0;
        }
        let touched = self.fused_cumulative().iter().filter(|&&v| v > 0.0).count();
        touched as f64 / n as f64
    }
}
