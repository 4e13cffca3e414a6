//! JSON messages exchanged over `/session`. Every message is one UTF-8 text
//! frame holding an object tagged by `"type"`.

use aav_core::grid2d::GridConfig;
use aav_core::marks3d::Camera;
use aav_core::model::{AttentionSample, ModelParams};
use aav_core::revis::{RevisConfig, RevisFrame};
use aav_core::session::{LogHeader, Recording, SceneSource, FORMAT_VERSION};
use aav_core::triggers::{ImplicitParams, TriggerMode};
use aav_core::Snapshot;
use serde::{Deserialize, Serialize};

/// Session parameters sent by the owning client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
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
}

impl Hello {
    pub fn grid(grid: GridConfig) -> Self {
        Self::from_header(LogHeader::grid(grid))
    }

    pub fn marks(scene: SceneSource, camera: Camera) -> Self {
        Self::from_header(LogHeader::marks(scene, camera))
    }

    pub fn from_header(h: LogHeader) -> Self {
        Self {
            recording: h.recording,
            params: h.params,
            trigger_mode: h.trigger_mode,
            implicit: h.implicit,
            revis: h.revis,
        }
    }

    pub fn into_header(self) -> LogHeader {
        LogHeader {
            v: FORMAT_VERSION,
            recording: self.recording,
            params: self.params,
            trigger_mode: self.trigger_mode,
            implicit: self.implicit,
            revis: self.revis,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello(Hello),
    /// Attach read-only to a running session.
    Observe { session_id: String },
    Sample { sample: AttentionSample },
    Trigger { pressed: bool },
    Camera { camera: Camera },
    SnapshotRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Message out of handshake order.
    Handshake,
    /// Not valid JSON or not a known message.
    Malformed,
    /// Well-formed but rejected by the session.
    Invalid,
    UnknownSession,
    /// Observers may only request snapshots.
    ReadOnly,
    /// Observer fell too far behind the frame stream.
    Lagged,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome { session_id: String, config: LogHeader },
    Frame(RevisFrame),
    Snapshot { snapshot: Snapshot },
    Error { code: ErrorCode, text: String },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            text: text.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
