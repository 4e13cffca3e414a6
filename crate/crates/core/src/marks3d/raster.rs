use nalgebra::{Point3, Vector3};

use super::{encode_id, validate_scene, Camera, PickBuffer, SceneError, SceneObject};

/// Screen-space vertex: pixel coordinates plus NDC depth.
#[derive(Debug, Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    z: f64,
}

/// Renders the scene into a pick buffer with z-buffering and back-face
/// culling. Faces are drawn in scene order; equal depths keep the first
/// triangle drawn.
pub fn rasterize(scene: &[SceneObject], camera: &Camera) -> Result<PickBuffer, SceneError> {
    camera.validate()?;
    validate_scene(scene)?;

    let view = camera.view_matrix();
    let proj = camera.projection();
    let (w, h) = (camera.width(), camera.height());
    let mut buffer = PickBuffer::new(w, h);

    let mut poly: Vec<Point3<f64>> = Vec::with_capacity(8);
    let mut clipped: Vec<Point3<f64>> = Vec::with_capacity(8);
    for obj in scene {
        let view_verts: Vec<Point3<f64>> = obj
            .vertices
            .iter()
            .map(|v| view.transform_point(&Point3::from(*v)))
            .collect();
        for (face_id, &[ia, ib, ic]) in obj.faces.iter().enumerate() {
            let (a, b, c) = (view_verts[ia], view_verts[ib], view_verts[ic]);
            let normal = (b - a).cross(&(c - a));
            // Counter-clockwise faces seen from the eye are front-facing.
            if !(normal.dot(&a.coords) < 0.0) {
                continue;
            }
            poly.clear();
            poly.extend([a, b, c]);
            clip_near(&poly, camera.near, &mut clipped);
            if clipped.len() < 3 {
                continue;
            }
            let screen: Vec<ScreenVertex> = clipped
                .iter()
                .map(|p| {
                    let ndc = proj.project_point(p);
                    ScreenVertex {
                        x: (ndc.x + 1.0) * 0.5 * w as f64,
                        y: (1.0 - ndc.y) * 0.5 * h as f64,
                        z: ndc.z,
                    }
                })
                .collect();
            let color = encode_id(obj.object_id.into(), face_id as u32)?;
            for i in 1..screen.len() - 1 {
                fill_triangle(&mut buffer, [screen[0], screen[i], screen[i + 1]], color);
            }
        }
    }
    Ok(buffer)
}

/// Sutherland-Hodgman against the plane `z = -near` in view space.
fn clip_near(input: &[Point3<f64>], near: f64, out: &mut Vec<Point3<f64>>) {
    out.clear();
    let inside = |p: &Point3<f64>| p.z <= -near;
    for i in 0..input.len() {
        let cur = input[i];
        let prev = input[(i + input.len() - 1) % input.len()];
        let (cur_in, prev_in) = (inside(&cur), inside(&prev));
        if cur_in != prev_in {
            let t = (-near - prev.z) / (cur.z - prev.z);
            let d: Vector3<f64> = cur - prev;
            out.push(prev + d * t);
        }
        if cur_in {
            out.push(cur);
        }
    }
}

fn edge(a: ScreenVertex, b: ScreenVertex, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

fn fill_triangle(buffer: &mut PickBuffer, [v0, v1, v2]: [ScreenVertex; 3], color: [u8; 3]) {
    let area = edge(v0, v1, v2.x, v2.y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let (w, h) = (buffer.width as f64, buffer.height as f64);
    let min_x = v0.x.min(v1.x).min(v2.x);
    let max_x = v0.x.max(v1.x).max(v2.x);
    let min_y = v0.y.min(v1.y).min(v2.y);
    let max_y = v0.y.max(v1.y).max(v2.y);
    // Pixel (i, j) is sampled at its center (i + 0.5, j + 0.5).
    let x0 = (min_x - 0.5).ceil().max(0.0);
    let y0 = (min_y - 0.5).ceil().max(0.0);
    let x1 = (max_x - 0.5).floor().min(w - 1.0);
    let y1 = (max_y - 0.5).floor().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let inv_area = 1.0 / area;
    for j in y0 as usize..=y1 as usize {
        let py = j as f64 + 0.5;
        for i in x0 as usize..=x1 as usize {
            let px = i as f64 + 0.5;
            let b0 = edge(v1, v2, px, py) * inv_area;
            let b1 = edge(v2, v0, px, py) * inv_area;
            let b2 = edge(v0, v1, px, py) * inv_area;
            if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                continue;
            }
            let z = b0 * v0.z + b1 * v1.z + b2 * v2.z;
            if z > 1.0 {
                continue;
            }
            let idx = j * buffer.width + i;
            if z < buffer.depth[idx] {
                buffer.depth[idx] = z;
                buffer.colors[idx] = color;
            }
        }
    }
}
