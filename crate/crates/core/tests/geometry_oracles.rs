use std::collections::BTreeSet;

use aav_core::grid2d::{cells_intersecting_circle, Cell, GridConfig};
use aav_core::revis::{contours, ContourRing};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every cell whose closed rectangle is within `r` of the center.
fn disk_rect_oracle(g: &GridConfig, (cx, cy): (f64, f64), r: f64) -> Vec<Cell> {
    let mut out = Vec::new();
    for row in 0..g.rows() {
        for col in 0..g.cols() {
            let x0 = col as f64 * g.cell_px;
            let y0 = row as f64 * g.cell_px;
            let x1 = (x0 + g.cell_px).min(g.width_px);
            let y1 = (y0 + g.cell_px).min(g.height_px);
            let dx = cx - cx.clamp(x0, x1);
            let dy = cy - cy.clamp(y0, y1);
            if dx * dx + dy * dy <= r * r {
                out.push(Cell::new(row, col));
            }
        }
    }
    out
}

fn grid_strategy() -> impl Strategy<Value = GridConfig> {
    (40.0f64..500.0, 40.0f64..500.0, 5.0f64..40.0)
        .prop_map(|(w, h, c)| GridConfig::new(w, h, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn circle_cells_match_oracle(
        g in grid_strategy(),
        fx in -0.3f64..1.3,
        fy in -0.3f64..1.3,
        r in 0.0f64..150.0,
    ) {
        let center = (fx * g.width_px, fy * g.height_px);
        prop_assert_eq!(cells_intersecting_circle(&g, center, r), disk_rect_oracle(&g, center, r));
    }

    #[test]
    fn larger_radius_covers_superset(
        g in grid_strategy(),
        fx in 0.0f64..1.0,
        fy in 0.0f64..1.0,
        r in 0.0f64..100.0,
        dr in 0.0f64..50.0,
    ) {
        let center = (fx * g.width_px, fy * g.height_px);
        let small: BTreeSet<_> = cells_intersecting_circle(&g, center, r).into_iter().collect();
        let big: BTreeSet<_> = cells_intersecting_circle(&g, center, r + dr).into_iter().collect();
        prop_assert!(small.is_subset(&big));
        // A center on the mount always touches its own cell.
        prop_assert!(!small.is_empty());
    }
}

fn bilinear(values: &[f64], cols: usize, rows: usize, x: f64, y: f64) -> f64 {
    // (x, y) in sample units on the zero-padded lattice; sample (r, c) at (c + 1, r + 1).
    let at = |i: isize, j: isize| {
        if i < 1 || j < 1 || i as usize > cols || j as usize > rows {
            0.0
        } else {
            values[(j as usize - 1) * cols + (i as usize - 1)]
        }
    };
    let (i, j) = (x.floor() as isize, y.floor() as isize);
    let (fx, fy) = (x - i as f64, y - j as f64);
    let top = at(i, j) * (1.0 - fx) + at(i + 1, j) * fx;
    let bottom = at(i, j + 1) * (1.0 - fx) + at(i + 1, j + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Winding number of a closed ring around `p`.
fn winding(ring: &ContourRing, p: [f64; 2]) -> i32 {
    let n = ring.points.len();
    let mut w = 0;
    for k in 0..n {
        let a = ring.points[k];
        let b = ring.points[(k + 1) % n];
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Nonzero winding with y down: a counter-clockwise ring on screen winds -1
/// in the usual y-up convention used above, so flip the sign.
fn inside_count(rings: &[ContourRing], p: [f64; 2]) -> i32 {
    -rings.iter().map(|r| winding(r, p)).sum::<i32>()
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Pixel of sample (row, col) center for cell size `cell`.
fn center_px(col: usize, row: usize, cell: f64) -> [f64; 2] {
    [(col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell]
}

#[test]
fn contour_rings_agree_with_threshold_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (cols, rows, cell) = (16usize, 16usize, 10.0);
    for case in 0..20 {
        let field = random_field(&mut rng, cols * rows);
        let level = 0.5;
        let rings = contours(&field, cols, rows, &[level], cell);
        for ring in &rings {
            assert!(ring.closed && ring.points.len() >= 3, "case {case}");
            for p in &ring.points {
                // Vertices lie on lattice edges where bilinear = linear.
                let v = bilinear(&field, cols, rows, p[0] / cell + 0.5, p[1] / cell + 0.5);
                assert!((v - level).abs() < 1e-9, "case {case}: vertex value {v}");
            }
        }
        // Every sample point: inside exactly once if above the level.
        for row in 0..rows {
            for col in 0..cols {
                let want = (field[row * cols + col] > level) as i32;
                let got = inside_count(&rings, center_px(col, row, cell));
                assert_eq!(got, want, "case {case} sample ({row},{col})");
            }
        }
        // Pixels of lattice squares whose corners all sit on one side of the
        // level lie on that side of the bilinear field and of the rings.
        let sub = 8;
        for j in 0..=rows {
            for i in 0..=cols {
                let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
                    .map(|(a, b)| bilinear(&field, cols, rows, a as f64, b as f64) > level);
                if corners.iter().any(|&c| c != corners[0]) {
                    continue;
                }
                for sy in 0..sub {
                    for sx in 0..sub {
                        let x = i as f64 + (sx as f64 + 0.5) / sub as f64;
                        let y = j as f64 + (sy as f64 + 0.5) / sub as f64;
                        let want = (bilinear(&field, cols, rows, x, y) > level) as i32;
                        let p = [(x - 0.5) * cell, (y - 0.5) * cell];
                        assert_eq!(inside_count(&rings, p), want, "case {case} at {p:?}");
                    }
                }
            }
        }
    }
}

/// 4-connected components of `mask` on a `w x h` raster.
fn components(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (x, y) = (k % w, k / w);
            let mut push = |nx: usize, ny: usize| {
                let n = ny * w + nx;
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if x > 0 {
                push(x - 1, y);
            }
            if x + 1 < w {
                push(x + 1, y);
            }
            if y > 0 {
                push(x, y - 1);
            }
            if y + 1 < h {
                push(x, y + 1);
            }
        }
    }
    count
}

fn upsampled_components(field: &[f64], cols: usize, rows: usize, level: f64) -> usize {
    let sub = 16;
    let (w, h) = ((cols + 1) * sub, (rows + 1) * sub);
    let mask: Vec<bool> = (0..w * h)
        .map(|k| {
            let x = (k % w) as f64 / sub as f64 + 0.5 / sub as f64;
            let y = (k / w) as f64 / sub as f64 + 0.5 / sub as f64;
            bilinear(field, cols, rows, x, y) > level
        })
        .collect();
    components(&mask, w, h)
}

#[test]
fn ring_count_matches_component_count() {
    let (cols, rows) = (6, 5);
    let mut one = vec![0.0; cols * rows];
    one[2 * cols + 2] = 1.0;
    let mut two = one.clone();
    two[cols + 5] = 0.9;
    for (field, expected) in [(one, 1), (two, 2)] {
        let rings = contours(&field, cols, rows, &[0.5], 32.0);
        assert_eq!(rings.len(), expected);
        assert_eq!(upsampled_components(&field, cols, rows, 0.5), expected);
    }
}
