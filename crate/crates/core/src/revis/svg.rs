//! Static SVG rendering of glazes and border marginals.

use std::fmt::Write;

use super::{BorderMarginal, BorderStyle, Colormap, ContourRing, Rgb};
use crate::grid2d::{Cell, GridConfig};

/// Thickness of the decorative frame that carries border marginals.
pub const FRAME_PX: f64 = 24.0;

pub fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(out: &mut String, width: f64, height: f64, view: (f64, f64, f64, f64)) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{width}" height="{height}" viewBox="{} {} {} {}" overflow="visible">"#,
        view.0, view.1, view.2, view.3
    );
}

fn background(out: &mut String, config: &GridConfig, href: Option<&str>) {
    if let Some(href) = href {
        let _ = writeln!(
            out,
            r#"<image class="background" x="0" y="0" width="{}" height="{}" href="{}" preserveAspectRatio="none"/>"#,
            config.width_px,
            config.height_px,
            escape(href)
        );
    }
}

/// One `rect.cell` per grid cell, filled with its heatmap color.
pub fn heatmap_svg(config: &GridConfig, colors: &[Rgb], href: Option<&str>) -> String {
    let mut out = String::new();
    open(
        &mut out,
        config.width_px,
        config.height_px,
        (0.0, 0.0, config.width_px, config.height_px),
    );
    background(&mut out, config, href);
    out.push_str("<g class=\"glaze heatmap\" fill-opacity=\"0.6\">\n");
    for (i, color) in colors.iter().enumerate() {
        let (x0, y0, x1, y1) = config.cell_rect(config.cell_at(i));
        let _ = writeln!(
            out,
            r#"<rect class="cell" x="{x0}" y="{y0}" width="{}" height="{}" fill="{}"/>"#,
            x1 - x0,
            y1 - y0,
            hex(*color)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn ring_path(ring: &ContourRing) -> String {
    let mut d = String::new();
    for (k, [x, y]) in ring.points.iter().enumerate() {
        let _ = write!(d, "{}{x} {y}", if k == 0 { "M" } else { " L" });
    }
    if ring.closed {
        d.push_str(" Z");
    }
    d
}

/// One `path.ring` per contour ring, stroked with the colormap at its level.
pub fn contour_svg(
    config: &GridConfig,
    rings: &[ContourRing],
    colormap: &Colormap,
    href: Option<&str>,
) -> String {
    let mut out = String::new();
    open(
        &mut out,
        config.width_px,
        config.height_px,
        (0.0, 0.0, config.width_px, config.height_px),
    );
    background(&mut out, config, href);
    out.push_str("<g class=\"glaze contour\" fill=\"none\" stroke-width=\"2\">\n");
    for ring in rings {
        let _ = writeln!(
            out,
            r#"<path class="ring" data-level="{}" stroke="{}" d="{}"/>"#,
            ring.iso_level,
            hex(colormap.map(ring.iso_level)),
            ring_path(ring)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn marginal_group(
    out: &mut String,
    config: &GridConfig,
    m: &BorderMarginal,
    colormap: &Colormap,
    horizontal: bool,
) {
    let axis = if horizontal { "x" } else { "y" };
    let _ = writeln!(out, "<g class=\"border border-{axis}\">");
    let span = |i: usize| {
        let cell = if horizontal {
            Cell::new(0, i)
        } else {
            Cell::new(i, 0)
        };
        let (x0, y0, x1, y1) = config.cell_rect(cell);
        if horizontal {
            (x0, x1)
        } else {
            (y0, y1)
        }
    };
    match m.style {
        BorderStyle::Bar => {
            for (i, &v) in m.values.iter().enumerate() {
                let (a, b) = span(i);
                let len = v * FRAME_PX;
                let (x, y, w, h) = if horizontal {
                    (a, -len, b - a, len)
                } else {
                    (-len, a, len, b - a)
                };
                let _ = writeln!(
                    out,
                    r#"<rect class="bar bar-{axis}" x="{x}" y="{y}" width="{w}" height="{h}" fill="{}"/>"#,
                    hex(colormap.map(1.0))
                );
            }
        }
        BorderStyle::Area => {
            let mut d = String::new();
            let (start, _) = span(0);
            let (_, end) = span(m.values.len().saturating_sub(1));
            let point = |d: &mut String, along: f64, v: f64| {
                let off = -v * FRAME_PX;
                if horizontal {
                    let _ = write!(d, " L{along} {off}");
                } else {
                    let _ = write!(d, " L{off} {along}");
                }
            };
            let _ = write!(d, "M{} {}", if horizontal { start } else { 0.0 }, if horizontal { 0.0 } else { start });
            for (i, &v) in m.values.iter().enumerate() {
                let (a, b) = span(i);
                point(&mut d, (a + b) / 2.0, v);
            }
            point(&mut d, end, 0.0);
            d.push_str(" Z");
            let _ = writeln!(
                out,
                r#"<path class="area area-{axis}" fill="{}" d="{d}"/>"#,
                hex(colormap.map(1.0))
            );
        }
        BorderStyle::LinearHeatmap => {
            for (i, &v) in m.values.iter().enumerate() {
                let (a, b) = span(i);
                let (x, y, w, h) = if horizontal {
                    (a, -FRAME_PX, b - a, FRAME_PX)
                } else {
                    (-FRAME_PX, a, FRAME_PX, b - a)
                };
                let _ = writeln!(
                    out,
                    r#"<rect class="strip strip-{axis}" x="{x}" y="{y}" width="{w}" height="{h}" fill="{}"/>"#,
                    hex(colormap.map(v))
                );
            }
        }
    }
    out.push_str("</g>\n");
}

/// Mount plus a frame band on the top (x marginal) and left (y marginal).
pub fn border_svg(
    config: &GridConfig,
    x: &BorderMarginal,
    y: &BorderMarginal,
    colormap: &Colormap,
    href: Option<&str>,
) -> String {
    let mut out = String::new();
    open(
        &mut out,
        config.width_px + FRAME_PX,
        config.height_px + FRAME_PX,
        (
            -FRAME_PX,
            -FRAME_PX,
            config.width_px + FRAME_PX,
            config.height_px + FRAME_PX,
        ),
    );
    background(&mut out, config, href);
    let _ = writeln!(
        out,
        r#"<rect class="mount" x="0" y="0" width="{}" height="{}" fill="none" stroke="{}"/>"#,
        config.width_px,
        config.height_px,
        hex(colormap.zero_color())
    );
    marginal_group(&mut out, config, x, colormap, true);
    marginal_group(&mut out, config, y, colormap, false);
    out.push_str("</svg>\n");
    out
}
