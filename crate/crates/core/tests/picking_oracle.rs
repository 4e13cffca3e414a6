use aav_core::marks3d::{decode_id, encode_id, rasterize, Camera, FaceKey, SceneObject};
use aav_core::model::{AttentionSample, Position, Source};
use aav_core::session::{replay, LogEvent, LogHeader, SceneSource, SessionLog};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn id_encoding_is_a_bijection_at_boundaries() {
    let objects = [1u32, 2, 127, 128, 254, 255];
    let faces = [0u32, 1, 255, 256, 257, 65279, 65280, 65534, 65535];
    let mut seen = std::collections::BTreeSet::new();
    for &o in &objects {
        for &f in &faces {
            let rgb = encode_id(o, f).unwrap();
            assert_ne!(rgb, [0, 0, 0]);
            assert_eq!(decode_id(rgb), Some(FaceKey::new(o as u8, f as u16)));
            assert!(seen.insert(rgb));
        }
    }
    for o in [1u32, 255] {
        for f in 0..=65535u32 {
            let rgb = encode_id(o, f).unwrap();
            assert_eq!(decode_id(rgb), Some(FaceKey::new(o as u8, f as u16)));
        }
    }
    assert!(encode_id(0, 0).is_err());
    assert!(encode_id(256, 0).is_err());
    assert!(encode_id(1, 65536).is_err());
    assert_eq!(decode_id([0, 0, 0]), None);
}

/// Nearest front-facing hit along the ray through each pixel center, using
/// the camera basis directly rather than the rasterizer's matrices.
fn ray_cast(scene: &[SceneObject], cam: &Camera) -> Vec<Option<FaceKey>> {
    let eye = Point3::from(cam.position);
    let f = Vector3::from(cam.forward).normalize();
    let r = f.cross(&Vector3::from(cam.up)).normalize();
    let u = r.cross(&f);
    let (w, h) = (cam.width(), cam.height());
    let tan = (cam.fov_y_deg.to_radians() / 2.0).tan();
    let aspect = w as f64 / h as f64;
    let mut out = Vec::with_capacity(w * h);
    for py in 0..h {
        for px in 0..w {
            let sx = 2.0 * (px as f64 + 0.5) / w as f64 - 1.0;
            let sy = 1.0 - 2.0 * (py as f64 + 0.5) / h as f64;
            let dir = f + r * (sx * tan * aspect) + u * (sy * tan);
            let mut best: Option<(f64, FaceKey)> = None;
            for obj in scene {
                for (fi, _) in obj.faces.iter().enumerate() {
                    let [a, b, c] = obj.triangle(fi);
                    let (e1, e2) = (b - a, c - a);
                    if e1.cross(&e2).dot(&dir) >= 0.0 {
                        continue;
                    }
                    let p = dir.cross(&e2);
                    let det = e1.dot(&p);
                    let s = eye - a;
                    let bu = s.dot(&p) / det;
                    let q = s.cross(&e1);
                    let bv = dir.dot(&q) / det;
                    if bu < 0.0 || bv < 0.0 || bu + bv > 1.0 {
                        continue;
                    }
                    // dir has unit component along f, so t is the view depth.
                    let t = e2.dot(&q) / det;
                    if t < cam.near || t > cam.far {
                        continue;
                    }
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, FaceKey::new(obj.object_id, fi as u16)));
                    }
                }
            }
            out.push(best.map(|b| b.1));
        }
    }
    out
}

fn random_scene(rng: &mut ChaCha8Rng) -> Vec<SceneObject> {
    let mut objects = Vec::new();
    for id in 1..=4u8 {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for _ in 0..5 {
            let c = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-3.0..3.0),
            ];
            let base = vertices.len();
            for _ in 0..3 {
                vertices.push([
                    c[0] + rng.random_range(-1.5..1.5),
                    c[1] + rng.random_range(-1.5..1.5),
                    c[2] + rng.random_range(-1.5..1.5),
                ]);
            }
            faces.push([base, base + 1, base + 2]);
        }
        objects.push(SceneObject {
            object_id: id,
            vertices,
            faces,
        });
    }
    objects
}

#[test]
fn rasterizer_matches_ray_cast_off_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cam = Camera {
        viewport: [64, 64],
        ..Camera::default()
    };
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..50 {
        let scene = random_scene(&mut rng);
        let buffer = rasterize(&scene, &cam).unwrap();
        let oracle = ray_cast(&scene, &cam);
        let (w, h) = (cam.width(), cam.height());
        for y in 0..h {
            for x in 0..w {
                let id = oracle[y * w + x];
                let interior = (y.saturating_sub(1)..=(y + 1).min(h - 1)).all(|ny| {
                    (x.saturating_sub(1)..=(x + 1).min(w - 1)).all(|nx| oracle[ny * w + nx] == id)
                });
                if !interior {
                    continue;
                }
                total += 1;
                agree += (buffer.id_at(x, y) == id) as usize;
            }
        }
    }
    let ratio = agree as f64 / total as f64;
    assert!(total > 50 * 64 * 64 / 2);
    assert!(ratio >= 0.99, "agreement {ratio}");
}

fn quad(object_id: u8, z: f64, half: f64) -> SceneObject {
    SceneObject {
        object_id,
        vertices: vec![
            [-half, -half, z],
            [half, -half, z],
            [half, half, z],
            [-half, half, z],
        ],
        faces: vec![[0, 1, 2], [0, 2, 3]],
    }
}

#[test]
fn occluded_faces_never_accumulate() {
    let scene = vec![quad(1, 0.0, 50.0), quad(2, -2.0, 0.5), quad(3, -5.0, 3.0)];
    let camera = Camera {
        viewport: [64, 64],
        ..Camera::default()
    };
    let mut header = LogHeader::marks(SceneSource::Inline(scene), camera);
    header.params.default_radius_px = 20.0;
    let mut log = SessionLog::new(header);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = 0;
    for k in 0..600u64 {
        let sample = if k % 3 == 0 {
            camera.screen_center_sample(t)
        } else {
            AttentionSample::new(
                t,
                Position::point(rng.random_range(0.0..64.0), rng.random_range(0.0..64.0)),
                Source::Pointer,
                rng.random_range(0.0..40.0),
            )
        };
        log.record(LogEvent::sample(sample)).unwrap();
        if k % 50 == 0 {
            let mut moved = camera;
            moved.position = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 5.0];
            log.record(LogEvent::camera(t, moved)).unwrap();
        }
        t += 100;
    }
    log.record(LogEvent::tick(t)).unwrap();
    let out = replay(&log, None).unwrap();
    let aav_core::session::SessionMaps::Marks { map, .. } = &out.snapshot.maps else {
        panic!("marks session");
    };
    let cum = map.fused_cumulative();
    for (key, v) in map.keys().iter().zip(&cum) {
        if key.object_id == 1 {
            assert!(*v > 0.0, "{key:?}");
        } else {
            assert_eq!(*v, 0.0, "{key:?}");
        }
    }
}
