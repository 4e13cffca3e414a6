//! Data-aware recording for 3D scenes.
//!
//! Every triangle is painted into an off-screen pick buffer with a color that
//! encodes its identity: red holds the object id, green and blue the high and
//! low bytes of the face index. Sampling the buffer around the attention point
//! yields exactly the faces that are visible there, so occluded and
//! back-facing geometry never receives attention.

mod obj;
mod raster;

use std::collections::BTreeSet;

use nalgebra::{Matrix4, Perspective3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AttentionLayers, AttentionSample, ModelError, ModelParams, Position, Source, TargetDomain,
};

pub use obj::{load_obj, parse_obj};
pub use raster::rasterize;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("object id {0} outside 1..=255")]
    ObjectIdRange(u32),
    #[error("face id {0} outside 0..=65535")]
    FaceIdRange(u32),
    #[error("duplicate object id {0}")]
    DuplicateObject(u8),
    #[error("object {object}: {msg}")]
    InvalidObject { object: u8, msg: String },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("scene has more than 255 objects")]
    TooManyObjects,
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Identity of one triangle in the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FaceKey {
    pub object_id: u8,
    pub face_id: u16,
}

impl FaceKey {
    pub fn new(object_id: u8, face_id: u16) -> Self {
        Self { object_id, face_id }
    }
}

/// Encodes an (object, face) pair into a pick color. `(0, 0, 0)` is reserved
/// for the background.
pub fn encode_id(object_id: u32, face_id: u32) -> Result<[u8; 3], SceneError> {
    if !(1..=255).contains(&object_id) {
        return Err(SceneError::ObjectIdRange(object_id));
    }
    if face_id > 0xFFFF {
        return Err(SceneError::FaceIdRange(face_id));
    }
    Ok([object_id as u8, (face_id >> 8) as u8, (face_id & 0xFF) as u8])
}

/// Inverse of [`encode_id`]; background decodes to `None`.
pub fn decode_id(rgb: [u8; 3]) -> Option<FaceKey> {
    let [r, g, b] = rgb;
    (r != 0).then(|| FaceKey::new(r, u16::from(g) << 8 | u16::from(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: u8,
    pub vertices: Vec<[f64; 3]>,
    /// Vertex-index triples; a face's id is its position in this list.
    pub faces: Vec<[usize; 3]>,
}

impl SceneObject {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.object_id == 0 {
            return Err(SceneError::ObjectIdRange(0));
        }
        if self.faces.len() > 0x1_0000 {
            return Err(SceneError::InvalidObject {
                object: self.object_id,
                msg: format!("{} faces exceed the 65536 face budget", self.faces.len()),
            });
        }
        if let Some(v) = self.vertices.iter().find(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(SceneError::InvalidObject {
                object: self.object_id,
                msg: format!("non-finite vertex {v:?}"),
            });
        }
        let n = self.vertices.len();
        if let Some((i, f)) = self
            .faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&v| v >= n))
        {
            return Err(SceneError::InvalidObject {
                object: self.object_id,
                msg: format!("face {i} references vertex {f:?} but only {n} exist"),
            });
        }
        Ok(())
    }

    pub fn face_keys(&self) -> impl Iterator<Item = FaceKey> + '_ {
        (0..self.faces.len()).map(|f| FaceKey::new(self.object_id, f as u16))
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [a, b, c].map(|i| Point3::from(self.vertices[i]))
    }
}

pub fn validate_scene(scene: &[SceneObject]) -> Result<(), SceneError> {
    if scene.len() > 255 {
        return Err(SceneError::TooManyObjects);
    }
    let mut seen = BTreeSet::new();
    for obj in scene {
        obj.validate()?;
        if !seen.insert(obj.object_id) {
            return Err(SceneError::DuplicateObject(obj.object_id));
        }
    }
    Ok(())
}

/// Perspective view used for the pick buffer. `viewport` is the pick buffer
/// resolution; attention samples are expressed in that pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub forward: [f64; 3],
    pub up: [f64; 3],
    pub fov_y_deg: f64,
    pub near: f64,
    pub far: f64,
    pub viewport: [u32; 2],
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 5.0],
            forward: [0.0, 0.0, -1.0],
            up: [0.0, 1.0, 0.0],
            fov_y_deg: 60.0,
            near: 0.1,
            far: 100.0,
            viewport: [256, 256],
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fwd = Vector3::from(self.forward);
        let up = Vector3::from(self.up);
        let bad = |m: &str| Err(SceneError::InvalidCamera(m.into()));
        if !(fwd.norm() > 0.0) || !fwd.iter().all(|c| c.is_finite()) {
            return bad("forward must be a non-zero vector");
        }
        if !(fwd.cross(&up).norm() > 1e-12 * fwd.norm() * up.norm()) {
            return bad("up must not be parallel to forward");
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return bad("non-finite position");
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return bad("fov_y_deg must lie in (0, 180)");
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return bad("need 0 < near < far");
        }
        if self.viewport[0] == 0 || self.viewport[1] == 0 {
            return bad("viewport must be non-empty");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.viewport[0] as usize
    }

    pub fn height(&self) -> usize {
        self.viewport[1] as usize
    }

    /// World-to-view transform; the camera looks down -z in view space.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let eye = Point3::from(self.position);
        let target = eye + Vector3::from(self.forward);
        Matrix4::look_at_rh(&eye, &target, &Vector3::from(self.up))
    }

    pub fn projection(&self) -> Perspective3<f64> {
        let aspect = self.viewport[0] as f64 / self.viewport[1] as f64;
        Perspective3::new(aspect, self.fov_y_deg.to_radians(), self.near, self.far)
    }

    /// Default attention radius for the screen-center strategy: a tenth of
    /// the buffer width.
    pub fn screen_center_radius(&self) -> f64 {
        0.1 * self.viewport[0] as f64
    }

    /// Head-direction sample at the center of the view.
    pub fn screen_center_sample(&self, timestamp_ms: u64) -> AttentionSample {
        AttentionSample::new(
            timestamp_ms,
            Position::ScreenCenter,
            Source::Head,
            self.screen_center_radius(),
        )
    }
}

/// Per-pixel visibility: the pick color of the nearest front-facing triangle
/// and its normalized depth.
#[derive(Debug, Clone, PartialEq)]
pub struct PickBuffer {
    pub width: usize,
    pub height: usize,
    pub colors: Vec<[u8; 3]>,
    pub depth: Vec<f64>,
}

impl PickBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            colors: vec![[0; 3]; width * height],
            depth: vec![f64::INFINITY; width * height],
        }
    }

    pub fn id_at(&self, x: usize, y: usize) -> Option<FaceKey> {
        decode_id(self.colors[y * self.width + x])
    }

    /// Visible faces under a disk: every pixel whose center lies inside it,
    /// plus the pixel containing the center itself.
    pub fn sample_visible_faces(&self, center: (f64, f64), radius_px: f64) -> Vec<FaceKey> {
        let mut out = BTreeSet::new();
        let (cx, cy) = center;
        if !(radius_px >= 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Vec::new();
        }
        if cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64 {
            if let Some(k) = self.id_at(cx as usize, cy as usize) {
                out.insert(k);
            }
        }
        let x0 = (cx - radius_px - 0.5).floor().max(0.0) as usize;
        let y0 = (cy - radius_px - 0.5).floor().max(0.0) as usize;
        let x1 = (cx + radius_px - 0.5).ceil().min(self.width as f64 - 1.0);
        let y1 = (cy + radius_px - 0.5).ceil().min(self.height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            return out.into_iter().collect();
        }
        let r2 = radius_px * radius_px;
        for y in y0..=y1 as usize {
            let dy = y as f64 + 0.5 - cy;
            for x in x0..=x1 as usize {
                let dx = x as f64 + 0.5 - cx;
                if dx * dx + dy * dy <= r2 {
                    if let Some(k) = self.id_at(x, y) {
                        out.insert(k);
                    }
                }
            }
        }
        out.into_iter().collect()
    }
}

/// The sorted set of all faces in a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceDomain {
    pub keys: Vec<FaceKey>,
}

impl FaceDomain {
    pub fn from_scene(scene: &[SceneObject]) -> Self {
        let mut keys: Vec<FaceKey> = scene.iter().flat_map(|o| o.face_keys()).collect();
        keys.sort_unstable();
        Self { keys }
    }
}

impl TargetDomain for FaceDomain {
    type Target = FaceKey;

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn slot(&self, key: &FaceKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }
}

/// Per-source attention for every face of a scene.
pub type MarkAttentionMap = AttentionLayers<FaceDomain>;

impl AttentionLayers<FaceDomain> {
    pub fn for_scene(scene: &[SceneObject]) -> Self {
        Self::new(FaceDomain::from_scene(scene))
    }

    pub fn keys(&self) -> &[FaceKey] {
        &self.domain.keys
    }

    /// One tick against an already rasterized buffer.
    pub fn apply_buffer_sample(
        &mut self,
        buffer: &PickBuffer,
        sample: Option<&AttentionSample>,
        dt_s: f64,
        params: &ModelParams,
    ) -> Result<(), SceneError> {
        let hits = match sample {
            Some(s) => {
                s.validate()?;
                let center = s
                    .position
                    .resolve(buffer.width as f64, buffer.height as f64);
                vec![(s.source, buffer.sample_visible_faces(center, s.radius_px))]
            }
            None => Vec::new(),
        };
        self.step_session(&hits, dt_s, params)?;
        Ok(())
    }

    /// Rasterizes the scene from `camera` and applies one tick.
    pub fn apply_sample_3d(
        &mut self,
        scene: &[SceneObject],
        camera: &Camera,
        sample: Option<&AttentionSample>,
        dt_s: f64,
        params: &ModelParams,
    ) -> Result<(), SceneError> {
        let buffer = rasterize(scene, camera)?;
        self.apply_buffer_sample(&buffer, sample, dt_s, params)
    }
}
