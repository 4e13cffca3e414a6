use std::path::Path;

use super::{SceneError, SceneObject};

/// Parses the `v x y z` / `f i j k` subset of Wavefront OBJ into one object.
///
/// Indices are 1-based; negative indices count back from the last vertex.
/// `i/t/n` index forms keep only the vertex index. Faces with more than three
/// vertices are fan-triangulated. Every other statement is ignored.
pub fn parse_obj(text: &str, object_id: u8) -> Result<SceneObject, SceneError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |msg: String| SceneError::Parse { line, msg };
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|e| err(format!("bad index {t:?}: {e}")))?;
                        let resolved = match i {
                            0 => return Err(err("indices are 1-based".into())),
                            i if i > 0 => i - 1,
                            i => vertices.len() as i64 + i,
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(err(format!("index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let obj = SceneObject {
        object_id,
        vertices,
        faces,
    };
    obj.validate()?;
    Ok(obj)
}

/// Loads mesh files in order, assigning object ids 1, 2, 3, ...
pub fn load_obj<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SceneObject>, SceneError> {
    if paths.len() > 255 {
        return Err(SceneError::TooManyObjects);
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let text = std::fs::read_to_string(p.as_ref())
                .map_err(|e| SceneError::Io(format!("{}: {e}", p.as_ref().display())))?;
            parse_obj(&text, (i + 1) as u8)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_triangles_and_quads() {
        let text = "# cube side\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1 2 3\nf 1/1/1 2/2/1 3/3/1 4/4/1\nf -4 -2 -1\n";
        let obj = parse_obj(text, 3).unwrap();
        assert_eq!(obj.object_id, 3);
        assert_eq!(obj.vertices.len(), 4);
        assert_eq!(obj.faces, vec![[0, 1, 2], [0, 1, 2], [0, 2, 3], [0, 2, 3]]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_obj("v 0 0 0\nv 1 0\n", 1).unwrap_err();
        assert!(matches!(err, SceneError::Parse { line: 2, .. }), "{err}");
        let err = parse_obj("v 0 0 0\nf 1 2 3\n", 1).unwrap_err();
        assert!(matches!(err, SceneError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn load_assigns_ids_by_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.obj");
        let b = dir.path().join("b.obj");
        std::fs::write(&a, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        std::fs::write(&b, "v 0 0 1\nv 1 0 1\nv 0 1 1\nf 1 2 3\n").unwrap();
        let scene = load_obj(&[&a, &b]).unwrap();
        assert_eq!(scene[0].object_id, 1);
        assert_eq!(scene[1].object_id, 2);
        assert!(load_obj(&[dir.path().join("missing.obj")]).is_err());
    }
}
