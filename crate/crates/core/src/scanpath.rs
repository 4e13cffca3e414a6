//! Synthetic scanpaths: stationary fixations joined by instantaneous saccades.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid2d::GridConfig;
use crate::model::{AttentionSample, ModelParams, Position, Source};
use crate::session::{LogEvent, LogHeader, SessionLog};

#[derive(Debug, Error, PartialEq)]
#[error("invalid scanpath spec: {0}")]
pub struct ScanpathError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetDistribution {
    /// Fixation points uniform over the mount.
    Uniform,
    /// Pick a hotspot by weight, then a point uniform in its disk.
    Hotspots { hotspots: Vec<Hotspot> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanpathSpec {
    pub seed: u64,
    pub fixation_count: usize,
    pub duration_mean_ms: f64,
    pub duration_sd_ms: f64,
    pub targets: TargetDistribution,
    #[serde(default = "default_source")]
    pub source: Source,
    /// Sample radius; the model default when absent.
    #[serde(default)]
    pub radius_px: Option<f64>,
}

fn default_source() -> Source {
    Source::Gaze
}

impl ScanpathSpec {
    pub fn uniform(seed: u64, fixation_count: usize) -> Self {
        Self {
            seed,
            fixation_count,
            duration_mean_ms: 300.0,
            duration_sd_ms: 100.0,
            targets: TargetDistribution::Uniform,
            source: Source::Gaze,
            radius_px: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScanpathError> {
        let err = |m: &str| Err(ScanpathError(m.into()));
        if self.fixation_count == 0 {
            return err("fixation_count must be positive");
        }
        if !(self.duration_mean_ms > 0.0 && self.duration_mean_ms.is_finite()) {
            return err("duration_mean_ms must be positive");
        }
        if !(self.duration_sd_ms >= 0.0 && self.duration_sd_ms.is_finite()) {
            return err("duration_sd_ms must be non-negative");
        }
        if let Some(r) = self.radius_px {
            if !(r >= 0.0 && r.is_finite()) {
                return err("radius_px must be non-negative");
            }
        }
        if let TargetDistribution::Hotspots { hotspots } = &self.targets {
            if hotspots.is_empty() {
                return err("hotspot list is empty");
            }
            for h in hotspots {
                if ![h.x, h.y, h.radius, h.weight].iter().all(|v| v.is_finite())
                    || h.radius < 0.0
                    || h.weight < 0.0
                {
                    return err("hotspots need finite coordinates and non-negative radius/weight");
                }
            }
            if hotspots.iter().map(|h| h.weight).sum::<f64>() <= 0.0 {
                return err("hotspot weights sum to zero");
            }
        }
        Ok(())
    }
}

fn fixation_point(rng: &mut ChaCha8Rng, spec: &ScanpathSpec, grid: &GridConfig) -> (f64, f64) {
    match &spec.targets {
        TargetDistribution::Uniform => (
            rng.random::<f64>() * grid.width_px,
            rng.random::<f64>() * grid.height_px,
        ),
        TargetDistribution::Hotspots { hotspots } => {
            let total: f64 = hotspots.iter().map(|h| h.weight).sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = hotspots.last().expect("validated non-empty");
            for h in hotspots {
                if pick < h.weight {
                    chosen = h;
                    break;
                }
                pick -= h.weight;
            }
            let r = chosen.radius * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            (chosen.x + r * a.cos(), chosen.y + r * a.sin())
        }
    }
}

/// Generates a grid-mode log. Each fixation lasts a whole number of ticks
/// (at least one) and emits one sample per tick window at a fixed point.
/// A closing tick marker makes replay integrate the last window.
pub fn simulate(
    spec: &ScanpathSpec,
    grid: GridConfig,
    params: ModelParams,
) -> Result<SessionLog, ScanpathError> {
    spec.validate()?;
    grid.validate().map_err(|e| ScanpathError(e.to_string()))?;
    params.validate().map_err(|e| ScanpathError(e.to_string()))?;
    let tick = params.tick_ms;
    let radius = spec.radius_px.unwrap_or(params.default_radius_px);
    let durations = Normal::new(spec.duration_mean_ms, spec.duration_sd_ms)
        .map_err(|e| ScanpathError(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut header = LogHeader::grid(grid);
    header.params = params;
    header.seed = spec.seed;
    let mut log = SessionLog::new(header);
    let mut t = 0u64;
    for _ in 0..spec.fixation_count {
        let ms = durations.sample(&mut rng).max(0.0);
        let ticks = ((ms / tick as f64).round() as u64).max(1);
        let (x, y) = fixation_point(&mut rng, spec, &grid);
        for _ in 0..ticks {
            let sample = AttentionSample::new(t, Position::point(x, y), spec.source, radius);
            log.record(LogEvent::sample(sample))
                .expect("generated in time order");
            t += tick;
        }
    }
    log.record(LogEvent::tick(t)).expect("generated in time order");
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::EventBody;

    #[test]
    fn same_seed_same_log() {
        let spec = ScanpathSpec::uniform(7, 20);
        let g = GridConfig::default();
        let a = simulate(&spec, g, ModelParams::default()).unwrap();
        let b = simulate(&spec, g, ModelParams::default()).unwrap();
        assert_eq!(a, b);
        let c = simulate(&ScanpathSpec::uniform(8, 20), g, ModelParams::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn samples_follow_tick_cadence() {
        let log = simulate(&ScanpathSpec::uniform(1, 5), GridConfig::default(), ModelParams::default())
            .unwrap();
        for (k, e) in log.events.iter().enumerate() {
            assert_eq!(e.t, k as u64 * 100);
        }
        assert!(matches!(log.events.last().unwrap().body, EventBody::Tick));
    }

    #[test]
    fn invalid_specs() {
        let mut s = ScanpathSpec::uniform(0, 0);
        assert!(s.validate().is_err());
        s.fixation_count = 3;
        s.duration_mean_ms = 0.0;
        assert!(s.validate().is_err());
        s.duration_mean_ms = 200.0;
        s.targets = TargetDistribution::Hotspots { hotspots: vec![] };
        assert!(s.validate().is_err());
    }
}
