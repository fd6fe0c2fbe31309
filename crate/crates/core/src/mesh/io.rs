//! JSON mesh files.
//!
//! ```json
//! {
//!   "vertices": [[0,0,0], [1,0,0], ...],
//!   "cells": [{"v": [0,1,2,3,4,5,6,7], "material": "copper"}],
//!   "materials": {"copper": {"lambda_h": 401.0, "c_v": 3.45e6}}
//! }
//! ```
//!
//! Cell vertex lists follow the local `(i, j, k)` order `v = i + 2j + 4k`.
//! Cells may carry an optional `id` which must be unique. Material ids may be
//! strings or integers.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellTopology, Material, Mesh, MeshError, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum Id {
    Int(i64),
    Text(String),
}

impl Id {
    fn key(&self) -> String {
        match self {
            Id::Int(i) => i.to_string(),
            Id::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<Id>,
    v: [usize; 8],
    material: Id,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 3]>,
    cells: Vec<CellRecord>,
    materials: BTreeMap<String, Material>,
}

/// Parses a mesh file. Faces, interfaces and boundary are enumerated; the
/// regularity check is left to [`super::validate_regular`].
pub fn load_mesh(source: impl Read) -> Result<Mesh, MeshError> {
    let file: MeshFile = serde_json::from_reader(source).map_err(|e| MeshError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut seen = HashSet::new();
    for rec in &file.cells {
        if let Some(id) = &rec.id {
            if !seen.insert(id.key()) {
                return Err(MeshError::DuplicateCellId(id.key()));
            }
        }
    }

    let vertices = file
        .vertices
        .iter()
        .map(|&[x, y, z]| Vec3::new(x, y, z))
        .collect();
    let cells = file
        .cells
        .into_iter()
        .map(|rec| CellTopology {
            vertex_ids: rec.v,
            material: rec.material.key(),
        })
        .collect();
    Mesh::new(vertices, cells, file.materials)
}

pub fn load_mesh_file(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let file = std::fs::File::open(path)?;
    load_mesh(std::io::BufReader::new(file))
}

/// Writes `mesh` in the format read by [`load_mesh`].
pub fn write_mesh(mesh: &Mesh, mut sink: impl Write) -> Result<(), MeshError> {
    let file = MeshFile {
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| CellRecord {
                id: None,
                v: c.vertex_ids,
                material: Id::Text(c.material.clone()),
            })
            .collect(),
        materials: mesh.materials.clone(),
    };
    serde_json::to_writer(&mut sink, &file).map_err(|e| MeshError::Io(e.into()))?;
    sink.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CUBE: &str = r#"{
        "vertices": [[0,0,0],[1,0,0],[0,1,0],[1,1,0],[0,0,1],[1,0,1],[0,1,1],[1,1,1]],
        "cells": [{"v": [0,1,2,3,4,5,6,7], "material": 1}],
        "materials": {"1": {"lambda_h": 1.0, "c_v": 2.0}}
    }"#;

    const TWO_CUBES: &str = r#"{
        "vertices": [[0,0,0],[1,0,0],[2,0,0],[0,1,0],[1,1,0],[2,1,0],
                     [0,0,1],[1,0,1],[2,0,1],[0,1,1],[1,1,1],[2,1,1]],
        "cells": [
            {"id": "a", "v": [0,1,3,4,6,7,9,10], "material": "m"},
            {"id": "b", "v": [1,2,4,5,7,8,10,11], "material": "m"}
        ],
        "materials": {"m": {"lambda_h": 1.0, "c_v": 1.0}}
    }"#;

    #[test]
    fn single_cube() {
        let mesh = load_mesh(ONE_CUBE.as_bytes()).unwrap();
        assert_eq!(mesh.num_cells(), 1);
        assert_eq!(mesh.boundary_faces.len(), 6);
        assert!(mesh.interfaces.is_empty());
        assert_eq!(mesh.material_of(0), Material::new(1.0, 2.0));
    }

    #[test]
    fn two_cubes_share_one_face() {
        let mesh = load_mesh(TWO_CUBES.as_bytes()).unwrap();
        assert_eq!(mesh.interfaces.len(), 1);
        assert_eq!(mesh.boundary_faces.len(), 10);
        let link = mesh.interfaces[0];
        assert_eq!((link.cell_a, link.face_a, link.cell_b, link.face_b), (0, 1, 1, 0));
    }

    #[test]
    fn vertex_out_of_range() {
        let text = ONE_CUBE.replace("[0,1,2,3,4,5,6,7]", "[0,1,2,3,4,5,6,9]");
        let err = load_mesh(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::VertexOutOfRange { cell: 0, index: 9, count: 8 }));
    }

    #[test]
    fn duplicate_cell_ids() {
        let text = TWO_CUBES.replace(r#""id": "b""#, r#""id": "a""#);
        let err = load_mesh(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::DuplicateCellId(id) if id == "a"));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\n  \"vertices\": [[0,0,0]],\n  \"cells\": [ {\"v\": [1,2]} ]\n}";
        match load_mesh(text.as_bytes()).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_load() {
        let mesh = load_mesh(TWO_CUBES.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = load_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.cells, mesh.cells);
        assert_eq!(back.interfaces, mesh.interfaces);
    }
}
