//! Data-agnostic recording on a regular cell lattice laid over a mounted
//! rectangular element.
//!
//! Cells are squares of side `cell_px` anchored at the top-left corner of the
//! mount; the last column and row are clipped to the mount so the lattice
//! tiles it exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AttentionLayers, AttentionSample, ModelError, ModelParams, TargetDomain};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width_px: f64,
    pub height_px: f64,
    pub cell_px: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width_px: 640.0,
            height_px: 480.0,
            cell_px: 32.0,
        }
    }
}

impl GridConfig {
    pub fn new(width_px: f64, height_px: f64, cell_px: f64) -> Result<Self, GridError> {
        let c = Self {
            width_px,
            height_px,
            cell_px,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (name, v) in [
            ("width_px", self.width_px),
            ("height_px", self.height_px),
            ("cell_px", self.cell_px),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GridError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.cell_px > self.width_px.min(self.height_px) {
            return Err(GridError::InvalidConfig(format!(
                "cell_px {} exceeds the smaller mount side",
                self.cell_px
            )));
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        (self.width_px / self.cell_px).ceil() as usize
    }

    pub fn rows(&self) -> usize {
        (self.height_px / self.cell_px).ceil() as usize
    }

    pub fn cell_count(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols() + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.cols(), index % self.cols())
    }

    /// Closed rectangle `(x0, y0, x1, y1)` of a cell, clipped to the mount.
    pub fn cell_rect(&self, cell: Cell) -> (f64, f64, f64, f64) {
        let x0 = cell.col as f64 * self.cell_px;
        let y0 = cell.row as f64 * self.cell_px;
        (
            x0,
            y0,
            (x0 + self.cell_px).min(self.width_px),
            (y0 + self.cell_px).min(self.height_px),
        )
    }
}

impl TargetDomain for GridConfig {
    type Target = Cell;

    fn len(&self) -> usize {
        self.cell_count()
    }

    fn slot(&self, cell: &Cell) -> Option<usize> {
        (cell.row < self.rows() && cell.col < self.cols()).then(|| self.index(*cell))
    }
}

/// Cells whose closed rectangle meets the closed disk, in row-major order.
///
/// Works row by row: the disk's horizontal extent within a row band is the
/// chord at the band's nearest y, which is then mapped to a column range.
pub fn cells_intersecting_circle(config: &GridConfig, center: (f64, f64), radius_px: f64) -> Vec<Cell> {
    let (cx, cy) = center;
    let mut out = Vec::new();
    if !(radius_px >= 0.0) {
        return out;
    }
    let cols = config.cols();
    let rows = config.rows();
    let cell = config.cell_px;

    let first_row = (((cy - radius_px) / cell).floor() - 1.0).max(0.0) as usize;
    let last_row = (((cy + radius_px) / cell).floor() + 1.0).min(rows as f64 - 1.0);
    if last_row < 0.0 {
        return out;
    }
    for row in first_row..=last_row as usize {
        let (_, y0, _, y1) = config.cell_rect(Cell::new(row, 0));
        let dy = cy - cy.clamp(y0, y1);
        let reach = radius_px * radius_px - dy * dy;
        if reach < 0.0 {
            continue;
        }
        let half = reach.sqrt();
        let lo = (cx - half).max(0.0);
        let hi = (cx + half).min(config.width_px);
        if lo > hi {
            continue;
        }
        // Column c spans [c*cell, (c+1)*cell]; it meets [lo, hi] iff
        // c*cell <= hi and (c+1)*cell >= lo.
        let mut c0 = ((lo / cell).ceil() - 1.0).max(0.0) as usize;
        if (c0 as f64 + 1.0) * cell < lo {
            c0 += 1;
        }
        let mut c1 = ((hi / cell).floor() as usize).min(cols - 1);
        if c1 as f64 * cell > hi && c1 > 0 {
            c1 -= 1;
        }
        for col in c0..=c1 {
            out.push(Cell::new(row, col));
        }
    }
    out
}

/// Per-source cumulative/short-term maps over the cells of a grid.
pub type AttentionGrid = AttentionLayers<GridConfig>;

impl AttentionLayers<GridConfig> {
    pub fn config(&self) -> &GridConfig {
        &self.domain
    }

    /// Cells hit by a sample's attention circle.
    pub fn sample_hits(&self, sample: &AttentionSample) -> Vec<Cell> {
        let c = &self.domain;
        let center = sample.position.resolve(c.width_px, c.height_px);
        cells_intersecting_circle(c, center, sample.radius_px)
    }

    /// One tick with a single sample (or none).
    pub fn apply_sample(
        &mut self,
        sample: Option<&AttentionSample>,
        dt_s: f64,
        params: &ModelParams,
    ) -> Result<(), GridError> {
        let hits = match sample {
            Some(s) => {
                s.validate()?;
                vec![(s.source, self.sample_hits(s))]
            }
            None => Vec::new(),
        };
        self.step_session(&hits, dt_s, params)?;
        Ok(())
    }
}
