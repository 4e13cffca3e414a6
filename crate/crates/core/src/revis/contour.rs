//! Marching squares over cell-centered samples.
//!
//! Sample `(row, col)` sits at the center of its cell. The field is padded
//! with a ring of zeros so every isoline at a positive level closes. Crossings
//! are linearly interpolated along lattice edges; saddle cells are resolved
//! by the average of their four corners. Rings keep the region above the
//! level on their left as drawn on screen (x right, y down): rings around
//! raised regions run counter-clockwise, rings around holes clockwise.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRing {
    pub iso_level: f64,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

/// Lattice edge: `(horizontal, i, j)` starting at padded corner `(i, j)`.
type EdgeKey = (bool, usize, usize);

struct Padded<'a> {
    values: &'a [f64],
    cols: usize,
    rows: usize,
}

impl Padded<'_> {
    /// Value at padded corner `(i, j)`; `i` in `0..=cols+1`, `j` in `0..=rows+1`.
    fn at(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 || i > self.cols || j > self.rows {
            0.0
        } else {
            self.values[(j - 1) * self.cols + (i - 1)]
        }
    }
}

/// Isolines of a row-major `cols x rows` field at each level, in pixels for
/// cells of side `cell_px`.
pub fn contours(
    values: &[f64],
    cols: usize,
    rows: usize,
    iso_levels: &[f64],
    cell_px: f64,
) -> Vec<ContourRing> {
    assert_eq!(values.len(), cols * rows, "field size mismatch");
    let field = Padded { values, cols, rows };
    iso_levels
        .iter()
        .flat_map(|&level| rings_at(&field, level, cell_px))
        .collect()
}

fn rings_at(field: &Padded<'_>, level: f64, cell_px: f64) -> Vec<ContourRing> {
    let high = |i: usize, j: usize| field.at(i, j) > level;
    let pos = |i: usize, j: usize| [(i as f64 - 0.5) * cell_px, (j as f64 - 0.5) * cell_px];
    let crossing = |(horizontal, i, j): EdgeKey| {
        let (i2, j2) = if horizontal { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (field.at(i, j), field.at(i2, j2));
        let t = (level - a) / (b - a);
        let (pa, pb) = (pos(i, j), pos(i2, j2));
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    // Segment start edge -> end edge.
    let mut next: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    let mut order: Vec<EdgeKey> = Vec::new();
    for j in 0..=field.rows {
        for i in 0..=field.cols {
            // Corners clockwise on screen: tl, tr, br, bl, with the edge
            // leaving each corner.
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let edges: [EdgeKey; 4] = [
                (true, i, j),
                (false, i + 1, j),
                (true, i, j + 1),
                (false, i, j),
            ];
            let h = corners.map(|(a, b)| high(a, b));
            let mask = h.iter().fold(0u8, |m, &x| m << 1 | x as u8);
            if mask == 0 || mask == 0b1111 {
                continue;
            }
            // Walking clockwise, a crossing either enters (low -> high) or
            // exits the region above the level.
            let mut marks: Vec<(usize, bool)> = Vec::with_capacity(4);
            for k in 0..4 {
                let (from, to) = (h[k], h[(k + 1) % 4]);
                if from != to {
                    marks.push((k, to));
                }
            }
            let pairs: Vec<(usize, usize)> = if marks.len() == 2 {
                let (enter, exit) = if marks[0].1 {
                    (marks[0].0, marks[1].0)
                } else {
                    (marks[1].0, marks[0].0)
                };
                vec![(enter, exit)]
            } else {
                let center = corners.iter().map(|&(a, b)| field.at(a, b)).sum::<f64>() / 4.0;
                let center_high = center > level;
                (0..4)
                    .filter(|&m| marks[m].1)
                    .map(|m| {
                        let partner = if center_high { (m + 3) % 4 } else { (m + 1) % 4 };
                        (marks[m].0, marks[partner].0)
                    })
                    .collect()
            };
            for (enter, exit) in pairs {
                let from = edges[enter];
                next.insert(from, edges[exit]);
                order.push(from);
            }
        }
    }

    let mut rings = Vec::new();
    for start in order {
        if !next.contains_key(&start) {
            continue;
        }
        let mut points = Vec::new();
        let mut edge = start;
        loop {
            points.push(crossing(edge));
            match next.remove(&edge) {
                Some(e) if e == start => break,
                Some(e) => edge = e,
                None => unreachable!("open isoline on a padded field"),
            }
        }
        rings.push(ContourRing {
            iso_level: level,
            points,
            closed: true,
        });
    }
    rings
}
