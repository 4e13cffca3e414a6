//! Recording, persistence and deterministic replay of attention sessions.
//!
//! A session log is newline-delimited JSON: a header on line 1, then one event
//! per line in non-decreasing time order. Time is split into windows of
//! `tick_ms`: tick `k` fires at `k * tick_ms` and integrates the latest
//! accepted sample per source whose timestamp falls in
//! `[(k - 1) * tick_ms, k * tick_ms)`. A tick at time `t` runs before events
//! stamped `t`. Live sessions ([`Recorder`]) and replays ([`Replayer`]) drive
//! the same [`Engine`], so a recorded log replays to bit-identical state.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid2d::{AttentionGrid, GridConfig, GridError};
use crate::marks3d::{self, Camera, MarkAttentionMap, SceneError, SceneObject};
use crate::model::{AttentionSample, ModelError, ModelParams, Source};
use crate::revis::{self, RevisConfig, RevisFrame};
use crate::triggers::{ImplicitParams, TriggerError, TriggerMode, TriggerState};

pub const FORMAT_VERSION: u32 = 1;
pub const LOG_EXTENSION: &str = "aav.jsonl";
pub const SNAPSHOT_EXTENSION: &str = "aav.snap";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("event at {got} ms precedes the previous event at {last} ms")]
    OutOfOrder { last: u64, got: u64 },
    #[error("event at {t} ms is outside the current tick window [{start}, {end})")]
    OutsideWindow { t: u64, start: u64, end: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: Box<SessionError>,
    },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("empty log: missing header")]
    MissingHeader,
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Inline(Vec<SceneObject>),
    /// Mesh files, object ids assigned by order.
    Files(Vec<String>),
}

impl SceneSource {
    pub fn resolve(&self) -> Result<Vec<SceneObject>, SceneError> {
        match self {
            SceneSource::Inline(objects) => {
                marks3d::validate_scene(objects)?;
                Ok(objects.clone())
            }
            SceneSource::Files(paths) => marks3d::load_obj(paths),
        }
    }
}

/// What is being recorded: grid cells over a mount, or faces of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Recording {
    Grid { grid: GridConfig },
    Marks { scene: SceneSource, camera: Camera },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub v: u32,
    #[serde(flatten)]
    pub recording: Recording,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub trigger_mode: TriggerMode,
    #[serde(default)]
    pub implicit: ImplicitParams,
    #[serde(default)]
    pub revis: RevisConfig,
    #[serde(default)]
    pub seed: u64,
}

impl LogHeader {
    pub fn grid(grid: GridConfig) -> Self {
        Self {
            v: FORMAT_VERSION,
            recording: Recording::Grid { grid },
            params: ModelParams::default(),
            trigger_mode: TriggerMode::default(),
            implicit: ImplicitParams::default(),
            revis: RevisConfig::default(),
            seed: 0,
        }
    }

    pub fn marks(scene: SceneSource, camera: Camera) -> Self {
        let mut revis = RevisConfig::default();
        revis.stat = revis::Stat::Cumulative;
        Self {
            recording: Recording::Marks { scene, camera },
            revis,
            ..Self::grid(GridConfig::default())
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.v != FORMAT_VERSION {
            return Err(SessionError::Version(self.v));
        }
        self.params.validate()?;
        self.implicit.validate()?;
        if self.revis.iso_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(SessionError::Invalid(
                "iso levels must lie strictly between 0 and 1".into(),
            ));
        }
        match &self.recording {
            Recording::Grid { grid } => grid.validate()?,
            Recording::Marks { camera, .. } => camera.validate()?,
        }
        Ok(())
    }

    pub fn tick_ms(&self) -> u64 {
        self.params.tick_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventBody {
    Sample { sample: AttentionSample },
    Trigger { pressed: bool },
    Camera { camera: Camera },
    /// Marks a completed tick; keeps silent stretches in the log.
    Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl LogEvent {
    pub fn sample(sample: AttentionSample) -> Self {
        Self {
            t: sample.timestamp_ms,
            body: EventBody::Sample { sample },
        }
    }

    pub fn trigger(t: u64, pressed: bool) -> Self {
        Self {
            t,
            body: EventBody::Trigger { pressed },
        }
    }

    pub fn camera(t: u64, camera: Camera) -> Self {
        Self {
            t,
            body: EventBody::Camera { camera },
        }
    }

    pub fn tick(t: u64) -> Self {
        Self {
            t,
            body: EventBody::Tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub events: Vec<LogEvent>,
}

impl SessionLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
        }
    }

    pub fn last_t(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    /// Appends an event; timestamps may not go backwards.
    pub fn record(&mut self, event: LogEvent) -> Result<(), SessionError> {
        if let Some(last) = self.last_t() {
            if event.t < last {
                return Err(SessionError::OutOfOrder { last, got: event.t });
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), SessionError> {
        write_json_line(&mut w, &self.header)?;
        for e in &self.events {
            write_json_line(&mut w, e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, SessionError> {
        let mut lines = r.lines().enumerate();
        let header: LogHeader = loop {
            match lines.next() {
                None => return Err(SessionError::MissingHeader),
                Some((i, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let header: LogHeader = serde_json::from_str(&line).map_err(|e| {
                        SessionError::Parse {
                            line: i + 1,
                            msg: format!("bad header: {e}"),
                        }
                    })?;
                    if header.v != FORMAT_VERSION {
                        return Err(SessionError::Version(header.v));
                    }
                    break header;
                }
            }
        };
        let mut log = SessionLog::new(header);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: LogEvent = serde_json::from_str(&line).map_err(|e| SessionError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            log.record(event).map_err(|e| SessionError::Record {
                line: i + 1,
                source: Box::new(e),
            })?;
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SessionError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Line number of event `index` in the serialized log.
    pub fn line_of(index: usize) -> usize {
        index + 2
    }
}

fn write_json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<(), SessionError> {
    serde_json::to_writer(&mut *w, value)
        .map_err(|e| SessionError::Invalid(format!("serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Attention maps held by a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SessionMaps {
    Grid { grid: AttentionGrid },
    Marks { map: MarkAttentionMap, camera: Camera },
}

impl SessionMaps {
    pub fn fused_cumulative(&self) -> Vec<f64> {
        match self {
            SessionMaps::Grid { grid } => grid.fused_cumulative(),
            SessionMaps::Marks { map, .. } => map.fused_cumulative(),
        }
    }

    pub fn fused_short_term(&self) -> Vec<f64> {
        match self {
            SessionMaps::Grid { grid } => grid.fused_short_term(),
            SessionMaps::Marks { map, .. } => map.fused_short_term(),
        }
    }

    pub fn coverage(&self) -> f64 {
        match self {
            SessionMaps::Grid { grid } => grid.coverage(),
            SessionMaps::Marks { map, .. } => map.coverage(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SessionMaps::Grid { grid } => grid.len(),
            SessionMaps::Marks { map, .. } => map.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human-readable target name for slot `i`.
    pub fn label(&self, i: usize) -> String {
        match self {
            SessionMaps::Grid { grid } => {
                let c = grid.config().cell_at(i);
                format!("cell r{} c{}", c.row, c.col)
            }
            SessionMaps::Marks { map, .. } => {
                let k = map.keys()[i];
                format!("face o{} f{}", k.object_id, k.face_id)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub samples_accepted: u64,
    pub samples_dropped: u64,
}

/// Full session state at a point in time; enough to resume a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub v: u32,
    /// Time the session has been advanced to.
    pub t_ms: u64,
    /// Completed ticks.
    pub tick: u64,
    pub maps: SessionMaps,
    pub trigger: TriggerState,
    /// Accepted samples waiting for the next tick.
    #[serde(default)]
    pub pending: Vec<AttentionSample>,
    #[serde(default)]
    pub counters: Counters,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| SessionError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if snap.v != FORMAT_VERSION {
            return Err(SessionError::Version(snap.v));
        }
        Ok(snap)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SessionError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_json().as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Exact equality including the bit patterns of every float.
    pub fn bit_identical(&self, other: &Snapshot) -> bool {
        self.to_json() == other.to_json() && self == other
    }
}

#[derive(Debug, Clone)]
enum Targets {
    Grid(AttentionGrid),
    Marks {
        map: MarkAttentionMap,
        scene: Vec<SceneObject>,
        camera: Camera,
    },
}

/// The per-session state machine shared by live sessions and replays.
#[derive(Debug, Clone)]
pub struct Engine {
    header: LogHeader,
    targets: Targets,
    trigger: TriggerState,
    pending: BTreeMap<Source, AttentionSample>,
    tick: u64,
    clock_ms: u64,
    counters: Counters,
}

impl Engine {
    /// Builds a fresh engine, loading scene files if the header names any.
    pub fn new(header: LogHeader) -> Result<Self, SessionError> {
        let scene = match &header.recording {
            Recording::Marks { scene, .. } => scene.resolve()?,
            Recording::Grid { .. } => Vec::new(),
        };
        Self::with_scene(header, scene)
    }

    pub fn with_scene(header: LogHeader, scene: Vec<SceneObject>) -> Result<Self, SessionError> {
        header.validate()?;
        let targets = match &header.recording {
            Recording::Grid { grid } => Targets::Grid(AttentionGrid::new(*grid)),
            Recording::Marks { camera, .. } => {
                marks3d::validate_scene(&scene)?;
                Targets::Marks {
                    map: MarkAttentionMap::for_scene(&scene),
                    scene,
                    camera: *camera,
                }
            }
        };
        let n = match &targets {
            Targets::Grid(g) => g.len(),
            Targets::Marks { map, .. } => map.len(),
        };
        let mut engine = Self {
            trigger: TriggerState::new(header.trigger_mode, n),
            header,
            targets,
            pending: BTreeMap::new(),
            tick: 0,
            clock_ms: 0,
            counters: Counters::default(),
        };
        engine.refresh_flags();
        Ok(engine)
    }

    /// Rebuilds an engine from a snapshot taken under the same header.
    pub fn restore(header: LogHeader, snapshot: &Snapshot) -> Result<Self, SessionError> {
        let scene = match &header.recording {
            Recording::Marks { scene, .. } => scene.resolve()?,
            Recording::Grid { .. } => Vec::new(),
        };
        Self::restore_with_scene(header, scene, snapshot)
    }

    pub fn restore_with_scene(
        header: LogHeader,
        scene: Vec<SceneObject>,
        snapshot: &Snapshot,
    ) -> Result<Self, SessionError> {
        let mut engine = Self::with_scene(header, scene)?;
        let params = engine.header.params;
        match (&mut engine.targets, &snapshot.maps) {
            (Targets::Grid(g), SessionMaps::Grid { grid }) => {
                if grid.domain != g.domain {
                    return Err(SessionError::Invalid("snapshot grid differs from log".into()));
                }
                grid.validate(&params)?;
                *g = grid.clone();
            }
            (Targets::Marks { map, camera, .. }, SessionMaps::Marks { map: m, camera: c }) => {
                if m.domain != map.domain {
                    return Err(SessionError::Invalid("snapshot faces differ from scene".into()));
                }
                m.validate(&params)?;
                c.validate()?;
                *map = m.clone();
                *camera = *c;
            }
            _ => return Err(SessionError::Invalid("snapshot mode differs from log".into())),
        }
        if snapshot.trigger.mode != engine.header.trigger_mode {
            return Err(SessionError::Invalid("snapshot trigger mode differs from log".into()));
        }
        engine.trigger = snapshot.trigger.clone();
        engine.pending = snapshot.pending.iter().map(|s| (s.source, *s)).collect();
        engine.tick = snapshot.tick;
        engine.clock_ms = snapshot.t_ms;
        engine.counters = snapshot.counters;
        Ok(engine)
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn trigger(&self) -> &TriggerState {
        &self.trigger
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn tick_ms(&self) -> u64 {
        self.header.params.tick_ms
    }

    /// Time at which the next tick fires.
    pub fn next_tick_ms(&self) -> u64 {
        (self.tick + 1) * self.tick_ms()
    }

    /// Clamps a wall-clock time into the current tick window.
    pub fn stamp(&self, now_ms: u64) -> u64 {
        now_ms.clamp(self.clock_ms.max(self.tick * self.tick_ms()), self.next_tick_ms() - 1)
    }

    pub fn grid(&self) -> Option<&AttentionGrid> {
        match &self.targets {
            Targets::Grid(g) => Some(g),
            Targets::Marks { .. } => None,
        }
    }

    pub fn marks(&self) -> Option<&MarkAttentionMap> {
        match &self.targets {
            Targets::Marks { map, .. } => Some(map),
            Targets::Grid(_) => None,
        }
    }

    pub fn camera(&self) -> Option<&Camera> {
        match &self.targets {
            Targets::Marks { camera, .. } => Some(camera),
            Targets::Grid(_) => None,
        }
    }

    pub fn scene(&self) -> &[SceneObject] {
        match &self.targets {
            Targets::Marks { scene, .. } => scene,
            Targets::Grid(_) => &[],
        }
    }

    /// Applies one event inside the current tick window. Nothing is mutated
    /// when an error is returned.
    pub fn ingest(&mut self, event: &LogEvent) -> Result<(), SessionError> {
        let start = self.tick * self.tick_ms();
        let end = self.next_tick_ms();
        if event.t < self.clock_ms {
            return Err(SessionError::OutOfOrder {
                last: self.clock_ms,
                got: event.t,
            });
        }
        let in_window = match event.body {
            EventBody::Tick => event.t <= start,
            _ => event.t >= start && event.t < end,
        };
        if !in_window {
            return Err(SessionError::OutsideWindow {
                t: event.t,
                start,
                end,
            });
        }
        match &event.body {
            EventBody::Sample { sample } => {
                sample.validate()?;
                if sample.timestamp_ms != event.t {
                    return Err(SessionError::Invalid(format!(
                        "sample timestamp {} differs from event time {}",
                        sample.timestamp_ms, event.t
                    )));
                }
                if self.trigger.gate_capture() {
                    self.pending.insert(sample.source, *sample);
                    self.counters.samples_accepted += 1;
                } else {
                    self.counters.samples_dropped += 1;
                }
            }
            EventBody::Trigger { pressed } => self.trigger.on_explicit(*pressed)?,
            EventBody::Camera { camera: c } => match &mut self.targets {
                Targets::Marks { camera, .. } => {
                    c.validate()?;
                    *camera = *c;
                }
                Targets::Grid(_) => {
                    return Err(SessionError::Invalid("camera event in grid session".into()))
                }
            },
            EventBody::Tick => {}
        }
        self.clock_ms = event.t;
        Ok(())
    }

    /// Fires the next tick; returns a frame when revisualization is visible.
    pub fn run_tick(&mut self) -> Result<Option<RevisFrame>, SessionError> {
        let params = self.header.params;
        let dt = params.tick_s();
        let pending = std::mem::take(&mut self.pending);
        let result = match &mut self.targets {
            Targets::Grid(grid) => {
                let hits: Vec<_> = pending
                    .values()
                    .map(|s| (s.source, grid.sample_hits(s)))
                    .collect();
                grid.step_session(&hits, dt, &params).map_err(SessionError::from)
            }
            Targets::Marks { map, scene, camera } => {
                let hits = if pending.is_empty() {
                    Vec::new()
                } else {
                    let buffer = marks3d::rasterize(scene, camera)?;
                    pending
                        .values()
                        .map(|s| {
                            let center = s
                                .position
                                .resolve(buffer.width as f64, buffer.height as f64);
                            (s.source, buffer.sample_visible_faces(center, s.radius_px))
                        })
                        .collect()
                };
                map.step_session(&hits, dt, &params).map_err(SessionError::from)
            }
        };
        if let Err(e) = result {
            self.pending = pending;
            return Err(e);
        }
        self.tick += 1;
        self.clock_ms = self.clock_ms.max(self.tick * self.tick_ms());
        self.refresh_flags();
        Ok(self.trigger.revis_visible.then(|| self.frame()))
    }

    fn refresh_flags(&mut self) {
        if self.trigger.mode != TriggerMode::Implicit {
            return;
        }
        let cap = self.header.params.cap;
        let values: Vec<f64> = self.maps_view().fused_short_term().iter().map(|v| v / cap).collect();
        self.trigger.update_flags(&values, &self.header.implicit);
    }

    fn maps_view(&self) -> SessionMaps {
        match &self.targets {
            Targets::Grid(g) => SessionMaps::Grid { grid: g.clone() },
            Targets::Marks { map, camera, .. } => SessionMaps::Marks {
                map: map.clone(),
                camera: *camera,
            },
        }
    }

    /// Revisualization payload for the current state.
    pub fn frame(&self) -> RevisFrame {
        let t_ms = self.tick * self.tick_ms();
        match &self.targets {
            Targets::Grid(g) => revis::grid_frame(
                self.tick,
                t_ms,
                g,
                &self.trigger,
                &self.header.revis,
                &self.header.params,
            ),
            Targets::Marks { map, .. } => revis::marks_frame(
                self.tick,
                t_ms,
                map,
                &self.trigger,
                &self.header.revis,
                &self.header.params,
            ),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            v: FORMAT_VERSION,
            t_ms: self.clock_ms,
            tick: self.tick,
            maps: self.maps_view(),
            trigger: self.trigger.clone(),
            pending: self.pending.values().copied().collect(),
            counters: self.counters,
        }
    }

    /// Marks the session as advanced to `t_ms` without an event.
    fn set_clock(&mut self, t_ms: u64) {
        self.clock_ms = self.clock_ms.max(t_ms);
    }
}

/// Replays a log on the tick lattice, optionally stopping and resuming.
pub struct Replayer<'a> {
    engine: Engine,
    events: &'a [LogEvent],
    cursor: usize,
    frames: Option<Vec<RevisFrame>>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub snapshot: Snapshot,
    pub frames: Vec<RevisFrame>,
}

impl<'a> Replayer<'a> {
    pub fn new(log: &'a SessionLog) -> Result<Self, SessionError> {
        Ok(Self::from_engine(Engine::new(log.header.clone())?, log, 0))
    }

    pub fn with_scene(log: &'a SessionLog, scene: Vec<SceneObject>) -> Result<Self, SessionError> {
        Ok(Self::from_engine(
            Engine::with_scene(log.header.clone(), scene)?,
            log,
            0,
        ))
    }

    /// Continues from a snapshot taken by a replay of the same log.
    pub fn resume(log: &'a SessionLog, snapshot: &Snapshot) -> Result<Self, SessionError> {
        let engine = Engine::restore(log.header.clone(), snapshot)?;
        let cursor = log.events.partition_point(|e| e.t <= snapshot.t_ms);
        Ok(Self::from_engine(engine, log, cursor))
    }

    fn from_engine(engine: Engine, log: &'a SessionLog, cursor: usize) -> Self {
        Self {
            engine,
            events: &log.events,
            cursor,
            frames: None,
        }
    }

    /// Keep every frame produced from now on.
    pub fn collect_frames(mut self) -> Self {
        self.frames = Some(Vec::new());
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Runs every tick at or before `until_ms` and ingests every event
    /// stamped at or before it.
    pub fn advance_to(&mut self, until_ms: u64) -> Result<(), SessionError> {
        loop {
            let tick_at = self.engine.next_tick_ms();
            let next = self.events.get(self.cursor);
            if tick_at <= until_ms && next.is_none_or(|e| tick_at <= e.t) {
                let frame = self.engine.run_tick().map_err(|e| SessionError::Record {
                    line: SessionLog::line_of(self.cursor),
                    source: Box::new(e),
                })?;
                if let (Some(frames), Some(frame)) = (&mut self.frames, frame) {
                    frames.push(frame);
                }
                continue;
            }
            match next {
                Some(e) if e.t <= until_ms => {
                    self.engine.ingest(e).map_err(|err| SessionError::Record {
                        line: SessionLog::line_of(self.cursor),
                        source: Box::new(err),
                    })?;
                    self.cursor += 1;
                }
                _ => break,
            }
        }
        self.engine.set_clock(until_ms);
        Ok(())
    }

    /// Advances to the last event of the log.
    pub fn run_to_end(&mut self) -> Result<(), SessionError> {
        match self.events.last() {
            Some(e) => self.advance_to(e.t),
            None => Ok(()),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.engine.snapshot()
    }

    pub fn finish(self) -> ReplayOutput {
        ReplayOutput {
            snapshot: self.engine.snapshot(),
            frames: self.frames.unwrap_or_default(),
        }
    }
}

/// Replays `log` to `until_ms` (or its last event), collecting frames.
pub fn replay(log: &SessionLog, until_ms: Option<u64>) -> Result<ReplayOutput, SessionError> {
    let mut r = Replayer::new(log)?.collect_frames();
    match until_ms {
        Some(t) => r.advance_to(t)?,
        None => r.run_to_end()?,
    }
    Ok(r.finish())
}

/// A live session: every accepted event is applied to the engine and
/// appended to the log (and to an optional sink) in the same order.
pub struct Recorder {
    engine: Engine,
    log: SessionLog,
    sink: Option<Box<dyn Write + Send>>,
}

impl Recorder {
    pub fn new(header: LogHeader) -> Result<Self, SessionError> {
        let engine = Engine::new(header.clone())?;
        Ok(Self {
            engine,
            log: SessionLog::new(header),
            sink: None,
        })
    }

    /// Also streams the log to `sink`, starting with the header line.
    pub fn with_sink(mut self, mut sink: Box<dyn Write + Send>) -> Result<Self, SessionError> {
        write_json_line(&mut sink, &self.log.header)?;
        for e in &self.log.events {
            write_json_line(&mut sink, e)?;
        }
        sink.flush()?;
        self.sink = Some(sink);
        Ok(self)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }

    pub fn record(&mut self, event: LogEvent) -> Result<(), SessionError> {
        self.engine.ingest(&event)?;
        if let Some(sink) = &mut self.sink {
            write_json_line(sink, &event)?;
        }
        self.log.record(event)
    }

    /// Records a sample stamped at `now_ms`, clamped into the tick window.
    pub fn record_sample(&mut self, mut sample: AttentionSample, now_ms: u64) -> Result<(), SessionError> {
        sample.timestamp_ms = self.engine.stamp(now_ms);
        self.record(LogEvent::sample(sample))
    }

    pub fn record_trigger(&mut self, pressed: bool, now_ms: u64) -> Result<(), SessionError> {
        let t = self.engine.stamp(now_ms);
        self.record(LogEvent::trigger(t, pressed))
    }

    pub fn record_camera(&mut self, camera: Camera, now_ms: u64) -> Result<(), SessionError> {
        let t = self.engine.stamp(now_ms);
        self.record(LogEvent::camera(t, camera))
    }

    /// Fires the next tick and logs its marker.
    pub fn tick(&mut self) -> Result<Option<RevisFrame>, SessionError> {
        let frame = self.engine.run_tick()?;
        let t = self.engine.ticks() * self.engine.tick_ms();
        self.record(LogEvent::tick(t))?;
        if let Some(sink) = &mut self.sink {
            sink.flush()?;
        }
        Ok(frame)
    }

    pub fn snapshot(&self) -> Snapshot {
        self.engine.snapshot()
    }
}

/// Summary numbers for a replayed session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub ticks: u64,
    pub duration_ms: u64,
    pub targets: usize,
    pub coverage: f64,
    pub total_attention_s: f64,
    pub samples_accepted: u64,
    pub samples_dropped: u64,
    /// `(label, cumulative seconds)` in decreasing order.
    pub top: Vec<(String, f64)>,
}

pub fn stats(snapshot: &Snapshot, top_k: usize) -> SessionStats {
    let cum = snapshot.maps.fused_cumulative();
    let mut order: Vec<usize> = (0..cum.len()).filter(|&i| cum[i] > 0.0).collect();
    order.sort_by(|&a, &b| cum[b].total_cmp(&cum[a]).then(a.cmp(&b)));
    SessionStats {
        ticks: snapshot.tick,
        duration_ms: snapshot.t_ms,
        targets: cum.len(),
        coverage: snapshot.maps.coverage(),
        total_attention_s: cum.iter().sum(),
        samples_accepted: snapshot.counters.samples_accepted,
        samples_dropped: snapshot.counters.samples_dropped,
        top: order
            .into_iter()
            .take(top_k)
            .map(|i| (snapshot.maps.label(i), cum[i]))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;

    fn header() -> LogHeader {
        LogHeader::grid(GridConfig::new(100.0, 100.0, 10.0).unwrap())
    }

    fn sample(t: u64, x: f64, y: f64) -> LogEvent {
        LogEvent::sample(AttentionSample::new(t, Position::point(x, y), Source::Gaze, 5.0))
    }

    #[test]
    fn record_appends_and_rejects_out_of_order() {
        let mut log = SessionLog::new(header());
        log.record(sample(10, 1.0, 1.0)).unwrap();
        assert_eq!(log.events.len(), 1);
        let err = log.record(sample(5, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, SessionError::OutOfOrder { last: 10, got: 5 }));
        assert_eq!(log.events.len(), 1);
    }

    #[test]
    fn header_line_format() {
        let mut buf = Vec::new();
        SessionLog::new(header()).write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["v"], 1);
        assert_eq!(first["mode"], "grid");
        assert_eq!(first["trigger_mode"], "always_on");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut buf = Vec::new();
        let mut log = SessionLog::new(header());
        log.record(sample(0, 1.0, 1.0)).unwrap();
        log.write_to(&mut buf).unwrap();
        buf.extend_from_slice(b"{\"t\": 3, \"kind\": \"bogus\"}\n");
        let err = SessionLog::read_from(&buf[..]).unwrap_err();
        assert!(matches!(err, SessionError::Parse { line: 3, .. }), "{err}");

        let mut out_of_order = Vec::new();
        log.record(sample(50, 1.0, 1.0)).unwrap();
        log.write_to(&mut out_of_order).unwrap();
        out_of_order.extend_from_slice(b"{\"t\":1,\"kind\":\"tick\"}\n");
        let err = SessionLog::read_from(&out_of_order[..]).unwrap_err();
        assert!(matches!(err, SessionError::Record { line: 4, .. }), "{err}");

        assert!(matches!(
            SessionLog::read_from(&b""[..]),
            Err(SessionError::MissingHeader)
        ));
    }

    #[test]
    fn version_is_checked() {
        let mut h = header();
        h.v = 2;
        let line = serde_json::to_string(&h).unwrap();
        assert!(matches!(
            SessionLog::read_from(line.as_bytes()),
            Err(SessionError::Version(2))
        ));
    }

    #[test]
    fn empty_log_replays_to_fresh_map() {
        let log = SessionLog::new(header());
        let out = replay(&log, None).unwrap();
        assert_eq!(out.snapshot.tick, 0);
        assert!(out.snapshot.maps.fused_cumulative().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn samples_in_one_window_coalesce_to_latest() {
        let mut log = SessionLog::new(header());
        for k in 0..50 {
            log.record(sample(k, 5.0 + k as f64, 5.0)).unwrap();
        }
        log.record(LogEvent::tick(100)).unwrap();
        let out = replay(&log, None).unwrap();
        assert_eq!(out.snapshot.tick, 1);
        let cum = out.snapshot.maps.fused_cumulative();
        // Only the last sample (x = 54) lands: cells c4..c5 around it.
        let touched: Vec<usize> = (0..cum.len()).filter(|&i| cum[i] > 0.0).collect();
        let grid = GridConfig::new(100.0, 100.0, 10.0).unwrap();
        let expected: Vec<usize> =
            crate::grid2d::cells_intersecting_circle(&grid, (54.0, 5.0), 5.0)
                .into_iter()
                .map(|c| grid.index(c))
                .collect();
        assert_eq!(touched, expected);
    }

    #[test]
    fn ingest_rejects_events_outside_the_window() {
        let mut engine = Engine::new(header()).unwrap();
        let err = engine.ingest(&sample(100, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, SessionError::OutsideWindow { .. }));
        engine.ingest(&sample(99, 1.0, 1.0)).unwrap();
        engine.run_tick().unwrap();
        assert!(engine.ingest(&sample(98, 1.0, 1.0)).is_err());
        engine.ingest(&sample(100, 1.0, 1.0)).unwrap();
    }

    #[test]
    fn trigger_in_wrong_mode_is_an_error() {
        let mut engine = Engine::new(header()).unwrap();
        let before = engine.snapshot();
        assert!(matches!(
            engine.ingest(&LogEvent::trigger(0, true)),
            Err(SessionError::Trigger(_))
        ));
        assert_eq!(engine.snapshot(), before);
    }

    #[test]
    fn stamp_clamps_into_window() {
        let mut engine = Engine::new(header()).unwrap();
        assert_eq!(engine.stamp(250), 99);
        engine.run_tick().unwrap();
        engine.run_tick().unwrap();
        assert_eq!(engine.stamp(10), 200);
        assert_eq!(engine.stamp(250), 250);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rec = Recorder::new(header()).unwrap();
        rec.record_sample(
            AttentionSample::new(0, Position::point(33.3, 71.7), Source::Pointer, 12.5),
            42,
        )
        .unwrap();
        rec.tick().unwrap();
        rec.record_sample(
            AttentionSample::new(0, Position::point(1.0 / 3.0, 2.0), Source::Gaze, 1.0),
            150,
        )
        .unwrap();
        let snap = rec.snapshot();
        let back = Snapshot::from_json(&snap.to_json()).unwrap();
        assert!(snap.bit_identical(&back));
        assert_eq!(back.pending.len(), 1);
    }

    #[test]
    fn stats_rank_targets() {
        let mut log = SessionLog::new(header());
        for k in 0..5u64 {
            log.record(sample(k * 100, 5.0, 5.0)).unwrap();
        }
        log.record(sample(500, 95.0, 95.0)).unwrap();
        log.record(LogEvent::tick(600)).unwrap();
        let out = replay(&log, None).unwrap();
        let s = stats(&out.snapshot, 10);
        assert_eq!(s.ticks, 6);
        assert_eq!(s.top[0].0, "cell r0 c0");
        assert!((s.top[0].1 - 0.5).abs() < 1e-12);
        assert!((s.total_attention_s - s.top.iter().map(|t| t.1).sum::<f64>()).abs() < 1e-12);
    }
}
