//! Revisualization payloads computed from attention maps.

mod contour;
pub mod svg;

use serde::{Deserialize, Serialize};

use crate::grid2d::AttentionGrid;
use crate::marks3d::{FaceKey, MarkAttentionMap};
use crate::model::{normalize, ModelParams};
use crate::triggers::{Flag, TriggerMode, TriggerState};

pub use contour::{contours, ContourRing};

pub type Rgb = [u8; 3];

/// Piecewise-linear color ramp over `[0, 1]` with evenly spaced stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Colormap {
    pub stops: Vec<Rgb>,
}

const VIRIDIS: [Rgb; 9] = [
    [68, 1, 84],
    [71, 45, 123],
    [59, 82, 139],
    [44, 114, 142],
    [33, 145, 140],
    [40, 174, 128],
    [94, 201, 98],
    [173, 220, 48],
    [253, 231, 37],
];

impl Default for Colormap {
    fn default() -> Self {
        Self::viridis()
    }
}

impl Colormap {
    pub fn viridis() -> Self {
        Self {
            stops: VIRIDIS.to_vec(),
        }
    }

    pub fn greys() -> Self {
        Self {
            stops: vec![[255, 255, 255], [0, 0, 0]],
        }
    }

    /// Transparent-to-red style ramp for glazes over light charts.
    pub fn heat() -> Self {
        Self {
            stops: vec![[255, 255, 204], [254, 178, 76], [240, 59, 32], [128, 0, 38]],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "viridis" => Some(Self::viridis()),
            "greys" | "grays" => Some(Self::greys()),
            "heat" => Some(Self::heat()),
            _ => None,
        }
    }

    pub fn zero_color(&self) -> Rgb {
        self.stops.first().copied().unwrap_or([0, 0, 0])
    }

    pub fn map(&self, t: f64) -> Rgb {
        match self.stops.len() {
            0 => [0, 0, 0],
            1 => self.stops[0],
            n => {
                let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
                let pos = t * (n - 1) as f64;
                let i = (pos.floor() as usize).min(n - 2);
                let frac = pos - i as f64;
                let (a, b) = (self.stops[i], self.stops[i + 1]);
                [0, 1, 2].map(|k| {
                    (a[k] as f64 + (b[k] as f64 - a[k] as f64) * frac).round() as u8
                })
            }
        }
    }
}

/// Colors per target: the colormap applied to max-normalized values.
pub fn heatmap(values: &[f64], colormap: &Colormap) -> Vec<Rgb> {
    normalize(values).into_iter().map(|v| colormap.map(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderStyle {
    #[default]
    Bar,
    Area,
    LinearHeatmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    #[default]
    ShortTerm,
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderMarginal {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub style: BorderStyle,
}

/// Row-major `values` summed over the orthogonal axis: one entry per column
/// for `Axis::X`, one per row for `Axis::Y`.
pub fn marginal_sums(values: &[f64], cols: usize, rows: usize, axis: Axis) -> Vec<f64> {
    debug_assert_eq!(values.len(), cols * rows);
    match axis {
        Axis::X => {
            let mut out = vec![0.0; cols];
            for row in values.chunks(cols) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
            out
        }
        Axis::Y => values.chunks(cols).map(|row| row.iter().sum()).collect(),
    }
}

pub fn border_marginal(
    values: &[f64],
    cols: usize,
    rows: usize,
    axis: Axis,
    style: BorderStyle,
) -> BorderMarginal {
    BorderMarginal {
        axis,
        values: normalize(&marginal_sums(values, cols, rows, axis)),
        style,
    }
}

/// Picks the requested statistic from a grid (fused across sources).
pub fn grid_stat(grid: &AttentionGrid, stat: Stat) -> Vec<f64> {
    match stat {
        Stat::ShortTerm => grid.fused_short_term(),
        Stat::Cumulative => grid.fused_cumulative(),
    }
}

pub fn border_marginals(
    grid: &AttentionGrid,
    axis: Axis,
    stat: Stat,
    style: BorderStyle,
) -> BorderMarginal {
    let c = grid.config();
    border_marginal(&grid_stat(grid, stat), c.cols(), c.rows(), axis, style)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshParams {
    /// Darkening at full short-term attention.
    pub darken: f64,
    /// Blur radius in pixels at full short-term attention.
    pub blur_px: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            darken: 0.6,
            blur_px: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshCellFilter {
    pub saturation: f64,
    pub blur_px: f64,
    pub darken: f64,
}

/// Seen areas lose saturation and get darker and blurrier.
pub fn mesh_filters(short_term_norm: &[f64], params: &MeshParams) -> Vec<MeshCellFilter> {
    short_term_norm
        .iter()
        .map(|&s| {
            let s = s.clamp(0.0, 1.0);
            MeshCellFilter {
                saturation: 1.0 - s,
                blur_px: params.blur_px * s,
                darken: params.darken * s,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkMode {
    Normal,
    Emphasis,
    DeEmphasis,
    Heatmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkStyle {
    pub mode: MarkMode,
    /// Replacement color; `None` keeps the mark's own color.
    pub color: Option<Rgb>,
    pub saturation_factor: f64,
}

impl MarkStyle {
    pub const IDENTITY: MarkStyle = MarkStyle {
        mode: MarkMode::Normal,
        color: None,
        saturation_factor: 1.0,
    };
}

/// Styles per mark. Implicit mode styles from flags; the other modes show a
/// heatmap of cumulative attention while the revisualization is visible.
pub fn mark_styles(
    short_term_norm: &[f64],
    cumulative: &[f64],
    trigger: &TriggerState,
    config: &RevisConfig,
) -> Vec<MarkStyle> {
    match trigger.mode {
        TriggerMode::Implicit => short_term_norm
            .iter()
            .enumerate()
            .map(|(i, &s)| match trigger.flags.get(i).copied().unwrap_or_default() {
                Flag::Emphasize => MarkStyle {
                    mode: MarkMode::Emphasis,
                    color: Some(config.emphasis_color),
                    saturation_factor: 1.0,
                },
                Flag::DeEmphasize => MarkStyle {
                    mode: MarkMode::DeEmphasis,
                    color: None,
                    saturation_factor: (1.0 - s).clamp(0.0, 1.0),
                },
                Flag::None => MarkStyle::IDENTITY,
            })
            .collect(),
        TriggerMode::AlwaysOn | TriggerMode::Explicit if trigger.revis_visible => {
            heatmap(cumulative, &config.colormap)
                .into_iter()
                .map(|c| MarkStyle {
                    mode: MarkMode::Heatmap,
                    color: Some(c),
                    saturation_factor: 1.0,
                })
                .collect()
        }
        _ => vec![MarkStyle::IDENTITY; short_term_norm.len()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlazeStyle {
    #[default]
    Heatmap,
    Contour,
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisConfig {
    pub glaze: GlazeStyle,
    pub border: BorderStyle,
    pub stat: Stat,
    pub iso_levels: Vec<f64>,
    pub colormap: Colormap,
    pub emphasis_color: Rgb,
    pub mesh: MeshParams,
}

impl Default for RevisConfig {
    fn default() -> Self {
        Self {
            glaze: GlazeStyle::Heatmap,
            border: BorderStyle::Bar,
            stat: Stat::ShortTerm,
            iso_levels: vec![0.25, 0.5, 0.75],
            colormap: Colormap::default(),
            emphasis_color: [255, 230, 0],
            mesh: MeshParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum Glaze {
    Heatmap { colors: Vec<Rgb> },
    Contour { rings: Vec<ContourRing> },
    Mesh { filters: Vec<MeshCellFilter> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FramePayload {
    Grid {
        cols: usize,
        rows: usize,
        cell_px: f64,
        /// Max-normalized values of the configured statistic.
        values: Vec<f64>,
        glaze: Glaze,
        border_x: BorderMarginal,
        border_y: BorderMarginal,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        flags: Vec<Flag>,
    },
    Marks {
        styles: Vec<(FaceKey, MarkStyle)>,
    },
}

/// One tick's revisualization output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisFrame {
    pub tick: u64,
    pub t_ms: u64,
    pub payload: FramePayload,
}

pub fn grid_frame(
    tick: u64,
    t_ms: u64,
    grid: &AttentionGrid,
    trigger: &TriggerState,
    config: &RevisConfig,
    params: &ModelParams,
) -> RevisFrame {
    let c = grid.config();
    let (cols, rows) = (c.cols(), c.rows());
    let raw = grid_stat(grid, config.stat);
    let values = normalize(&raw);
    let glaze = match config.glaze {
        GlazeStyle::Heatmap => Glaze::Heatmap {
            colors: values.iter().map(|&v| config.colormap.map(v)).collect(),
        },
        GlazeStyle::Contour => Glaze::Contour {
            rings: contours(&values, cols, rows, &config.iso_levels, c.cell_px),
        },
        GlazeStyle::Mesh => {
            let s: Vec<f64> = grid
                .fused_short_term()
                .iter()
                .map(|v| v / params.cap)
                .collect();
            Glaze::Mesh {
                filters: mesh_filters(&s, &config.mesh),
            }
        }
    };
    RevisFrame {
        tick,
        t_ms,
        payload: FramePayload::Grid {
            cols,
            rows,
            cell_px: c.cell_px,
            border_x: border_marginal(&raw, cols, rows, Axis::X, config.border),
            border_y: border_marginal(&raw, cols, rows, Axis::Y, config.border),
            values,
            glaze,
            flags: trigger.flags.clone(),
        },
    }
}

pub fn marks_frame(
    tick: u64,
    t_ms: u64,
    map: &MarkAttentionMap,
    trigger: &TriggerState,
    config: &RevisConfig,
    params: &ModelParams,
) -> RevisFrame {
    let s: Vec<f64> = map
        .fused_short_term()
        .iter()
        .map(|v| v / params.cap)
        .collect();
    let styles = mark_styles(&s, &map.fused_cumulative(), trigger, config);
    RevisFrame {
        tick,
        t_ms,
        payload: FramePayload::Marks {
            styles: map.keys().iter().copied().zip(styles).collect(),
        },
    }
}
