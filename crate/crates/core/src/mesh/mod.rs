//! Regular hexahedral meshes: topology, face enumeration, validation and
//! per-cell geometry.
//!
//! Cells are hexahedra whose eight vertices are ordered by local coordinates
//! `(i, j, k) ∈ {0,1}³` with local index `v = i + 2j + 4k`. Faces `2ρ` and
//! `2ρ + 1` are the pair normal to local direction `ρ`; the even face lies at
//! the low end of that direction.

mod geometry;
mod io;
mod validate;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{compute_geometry, CellGeometry, GeometryError, EDGE_TABLE};
pub use io::{load_mesh, load_mesh_file, write_mesh};
pub use validate::{validate_regular, ValidationReport, Violation};

/// Point or direction in ambient space.
pub type Vec3 = nalgebra::Vector3<f64>;

pub const FACES_PER_CELL: usize = 6;
pub const VERTICES_PER_CELL: usize = 8;

/// Local vertex indices of each face, listed in cyclic order around the face.
pub const FACE_VERTICES: [[usize; 4]; FACES_PER_CELL] = [
    [0, 2, 6, 4],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 1, 3, 2],
    [4, 5, 7, 6],
];

/// Local direction normal to face `face`.
#[inline]
pub fn normal_direction(face: usize) -> usize {
    face / 2
}

/// `(-1)^face`.
#[inline]
pub fn face_sign(face: usize) -> f64 {
    if face % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Thermal material constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Heat conductivity in W/(m·K).
    pub lambda_h: f64,
    /// Volumetric heat capacity in J/(m³·K).
    pub c_v: f64,
}

impl Material {
    pub fn new(lambda_h: f64, c_v: f64) -> Self {
        Self { lambda_h, c_v }
    }

    /// Thermal diffusivity `λ_H / c_v`.
    pub fn diffusivity(&self) -> f64 {
        self.lambda_h / self.c_v
    }

    pub fn is_valid(&self) -> bool {
        self.lambda_h.is_finite() && self.c_v.is_finite() && self.lambda_h > 0.0 && self.c_v > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTopology {
    pub vertex_ids: [usize; VERTICES_PER_CELL],
    pub material: String,
}

/// One geometric quadrilateral of the mesh and the (cell, local face) sides
/// that reference it.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Global vertex ids, sorted ascending (the matching key).
    pub vertices: [usize; 4],
    pub sides: Vec<(usize, usize)>,
}

impl Face {
    pub fn is_interface(&self) -> bool {
        self.sides.len() == 2
    }

    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }
}

/// A face shared by two cells: local face `face_a` of `cell_a` coincides
/// with local face `face_b` of `cell_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceLink {
    pub face: usize,
    pub cell_a: usize,
    pub face_a: usize,
    pub cell_b: usize,
    pub face_b: usize,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate cell id {0}")]
    DuplicateCellId(String),
    #[error("cell {cell}: vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange {
        cell: usize,
        index: usize,
        count: usize,
    },
    #[error("cell {cell}: vertex {vertex} appears more than once")]
    RepeatedVertex { cell: usize, vertex: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("cell {cell} references unknown material {material:?}")]
    UnknownMaterial { cell: usize, material: String },
    #[error("material {0:?} must have finite lambda_h > 0 and c_v > 0")]
    InvalidMaterial(String),
    #[error("mesh has no cells")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Hexahedral mesh with derived face adjacency.
///
/// Faces, interfaces and boundary faces are derived from the cell vertex
/// lists when the mesh is built; regularity is checked separately by
/// [`validate_regular`].
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub cells: Vec<CellTopology>,
    pub materials: BTreeMap<String, Material>,
    pub faces: Vec<Face>,
    pub interfaces: Vec<FaceLink>,
    pub boundary_faces: Vec<usize>,
    /// Global face id of every (cell, local face).
    pub cell_faces: Vec<[usize; FACES_PER_CELL]>,
}

impl Mesh {
    pub fn new(
        vertices: Vec<Vec3>,
        cells: Vec<CellTopology>,
        materials: BTreeMap<String, Material>,
    ) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(v) = vertices
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(MeshError::NonFiniteVertex(v));
        }
        for (name, m) in &materials {
            if !m.is_valid() {
                return Err(MeshError::InvalidMaterial(name.clone()));
            }
        }
        for (c, cell) in cells.iter().enumerate() {
            for (n, &v) in cell.vertex_ids.iter().enumerate() {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange {
                        cell: c,
                        index: v,
                        count: vertices.len(),
                    });
                }
                if cell.vertex_ids[..n].contains(&v) {
                    return Err(MeshError::RepeatedVertex { cell: c, vertex: v });
                }
            }
            if !materials.contains_key(&cell.material) {
                return Err(MeshError::UnknownMaterial {
                    cell: c,
                    material: cell.material.clone(),
                });
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut index: HashMap<[usize; 4], usize> = HashMap::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ids = [0usize; FACES_PER_CELL];
            for (local, corners) in FACE_VERTICES.iter().enumerate() {
                let mut key = corners.map(|v| cell.vertex_ids[v]);
                key.sort_unstable();
                let id = *index.entry(key).or_insert_with(|| {
                    faces.push(Face {
                        vertices: key,
                        sides: Vec::with_capacity(2),
                    });
                    faces.len() - 1
                });
                faces[id].sides.push((c, local));
                ids[local] = id;
            }
            cell_faces.push(ids);
        }

        let mut interfaces = Vec::new();
        let mut boundary_faces = Vec::new();
        for (id, face) in faces.iter().enumerate() {
            match face.sides.as_slice() {
                [_] => boundary_faces.push(id),
                [(ca, fa), (cb, fb)] => interfaces.push(FaceLink {
                    face: id,
                    cell_a: *ca,
                    face_a: *fa,
                    cell_b: *cb,
                    face_b: *fb,
                }),
                _ => {}
            }
        }

        Ok(Self {
            vertices,
            cells,
            materials,
            faces,
            interfaces,
            boundary_faces,
            cell_faces,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn material_of(&self, cell: usize) -> Material {
        self.materials[&self.cells[cell].material]
    }

    pub fn cell_vertices(&self, cell: usize) -> [Vec3; VERTICES_PER_CELL] {
        self.cells[cell].vertex_ids.map(|v| self.vertices[v])
    }

    /// Centre of a global face (mean of its four vertices).
    pub fn face_centre(&self, face: usize) -> Vec3 {
        self.faces[face]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .sum::<Vec3>()
            / 4.0
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&mut self, f: impl Fn(&Vec3) -> Vec3) {
        for v in &mut self.vertices {
            *v = f(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cube_vertices(origin: Vec3, h: f64) -> Vec<Vec3> {
        (0..8)
            .map(|v| {
                origin + Vec3::new((v & 1) as f64 * h, ((v >> 1) & 1) as f64 * h, ((v >> 2) & 1) as f64 * h)
            })
            .collect()
    }

    fn single_material() -> BTreeMap<String, Material> {
        BTreeMap::from([("m".to_string(), Material::new(1.0, 1.0))])
    }

    #[test]
    fn single_cube_has_six_boundary_faces() {
        let cell = CellTopology {
            vertex_ids: [0, 1, 2, 3, 4, 5, 6, 7],
            material: "m".into(),
        };
        let mesh = Mesh::new(cube_vertices(Vec3::zeros(), 1.0), vec![cell], single_material()).unwrap();
        assert_eq!(mesh.faces.len(), 6);
        assert_eq!(mesh.boundary_faces.len(), 6);
        assert!(mesh.interfaces.is_empty());
    }

    #[test]
    fn repeated_vertex_rejected() {
        let cell = CellTopology {
            vertex_ids: [0, 1, 2, 3, 4, 5, 6, 6],
            material: "m".into(),
        };
        let err = Mesh::new(cube_vertices(Vec3::zeros(), 1.0), vec![cell], single_material()).unwrap_err();
        assert!(matches!(err, MeshError::RepeatedVertex { cell: 0, vertex: 6 }));
    }

    #[test]
    fn unknown_material_rejected() {
        let cell = CellTopology {
            vertex_ids: [0, 1, 2, 3, 4, 5, 6, 7],
            material: "steel".into(),
        };
        let err = Mesh::new(cube_vertices(Vec3::zeros(), 1.0), vec![cell], single_material()).unwrap_err();
        assert!(matches!(err, MeshError::UnknownMaterial { .. }));
    }

    #[test]
    fn face_vertex_lists_match_normal_direction() {
        // every vertex of face 2ρ has local coordinate 0 along ρ, face 2ρ+1 has 1
        for (face, verts) in FACE_VERTICES.iter().enumerate() {
            let rho = normal_direction(face);
            for &v in verts {
                assert_eq!((v >> rho) & 1, face % 2, "face {face} vertex {v}");
            }
        }
    }
}
