use nalgebra::Matrix3;
use thiserror::Error;

use super::{face_sign, normal_direction, Mesh, Vec3, FACES_PER_CELL, FACE_VERTICES, VERTICES_PER_CELL};

/// Edge `ν` runs from local vertex `EDGE_TABLE[ν].0` to `EDGE_TABLE[ν].1`.
///
/// Edges `4μ..4μ+3` point along local direction `μ`. Within each group the
/// four edges are visited cyclically over the two remaining directions
/// `(μ+1, μ+2) mod 3` at positions `(0,0), (1,0), (1,1), (0,1)`, which makes
/// the face-vector formula pick the four edges bounding its own face.
pub const EDGE_TABLE: [(usize, usize); 12] = [
    // direction 0, positions (j, k)
    (0, 1),
    (2, 3),
    (6, 7),
    (4, 5),
    // direction 1, positions (k, i)
    (0, 2),
    (4, 6),
    (5, 7),
    (1, 3),
    // direction 2, positions (i, j)
    (0, 4),
    (1, 5),
    (3, 7),
    (2, 6),
];

const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cell {cell} is degenerate: |det β| = {det:e} below {threshold:e}")]
    Degenerate { cell: usize, det: f64, threshold: f64 },
    #[error("cell {cell} is inverted (volume {volume:e})")]
    Inverted { cell: usize, volume: f64 },
}

/// Derived geometry of one hexahedral cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub edge_vectors: [Vec3; 12],
    /// Mean edge vector per local direction.
    pub node_vectors: [Vec3; 3],
    /// Outward face area vectors.
    pub face_vectors: [Vec3; FACES_PER_CELL],
    /// Columns are the node vectors in Cartesian coordinates.
    pub beta: Matrix3<f64>,
    /// `(βᵀ)⁻¹`; maps node-vector projections to Cartesian components.
    pub gamma: Matrix3<f64>,
    pub volume: f64,
    /// `s[ι][μ] = λ_H · f_ι^ν γ_ν^μ`.
    pub s_coeff: [[f64; 3]; FACES_PER_CELL],
    pub node_position: Vec3,
    pub face_centres: [Vec3; FACES_PER_CELL],
}

impl CellGeometry {
    /// Builds the geometry from the eight vertex positions of a cell.
    ///
    /// `cell` is only used to label errors.
    pub fn from_vertices(
        cell: usize,
        vertices: &[Vec3; VERTICES_PER_CELL],
        lambda_h: f64,
    ) -> Result<Self, GeometryError> {
        let edge_vectors = EDGE_TABLE.map(|(a, b)| vertices[b] - vertices[a]);
        let node_vectors: [Vec3; 3] =
            std::array::from_fn(|mu| (0..4).map(|nu| edge_vectors[4 * mu + nu]).sum::<Vec3>() / 4.0);
        let face_vectors: [Vec3; FACES_PER_CELL] = std::array::from_fn(|iota| {
            let e = |k: isize| edge_vectors[k.rem_euclid(12) as usize];
            let i = iota as isize;
            let alt = if iota % 2 == 0 { 1 } else { -1 };
            let first = e(8 + 2 * i) + e(9 + 2 * (i + alt));
            let second = e(4 + 2 * i) + e(5 + 2 * i);
            first.cross(&second) * (face_sign(iota) / 4.0)
        });

        let beta = Matrix3::from_columns(&node_vectors);
        let mean_edge = edge_vectors.iter().map(|e| e.norm()).sum::<f64>() / 12.0;
        let det = beta.determinant();
        let threshold = DEGENERACY_TOLERANCE * mean_edge.powi(3);
        if !(det.abs() >= threshold) {
            return Err(GeometryError::Degenerate { cell, det, threshold });
        }
        let gamma = beta
            .transpose()
            .try_inverse()
            .ok_or(GeometryError::Degenerate { cell, det, threshold })?;
        let beta_inv = gamma.transpose();

        let node_position = vertices.iter().sum::<Vec3>() / 8.0;
        let face_centres: [Vec3; FACES_PER_CELL] =
            FACE_VERTICES.map(|corners| corners.iter().map(|&v| vertices[v]).sum::<Vec3>() / 4.0);
        let volume = face_centres
            .iter()
            .zip(&face_vectors)
            .map(|(c, f)| (c - node_position).dot(f))
            .sum::<f64>()
            / 3.0;
        if !(volume > 0.0) {
            return Err(GeometryError::Inverted { cell, volume });
        }

        let s_coeff = face_vectors.map(|f| {
            let s = beta_inv * f * lambda_h;
            [s.x, s.y, s.z]
        });

        Ok(Self {
            edge_vectors,
            node_vectors,
            face_vectors,
            beta,
            gamma,
            volume,
            s_coeff,
            node_position,
            face_centres,
        })
    }

    /// Normal coefficient `s[ι][[ι/2]]`.
    #[inline]
    pub fn normal_s(&self, face: usize) -> f64 {
        self.s_coeff[face][normal_direction(face)]
    }

    /// Orientation-free normal conductance `-(−1)^ι s[ι][[ι/2]]`; positive for
    /// a well-formed cell.
    #[inline]
    pub fn normal_conductance(&self, face: usize) -> f64 {
        -face_sign(face) * self.normal_s(face)
    }
}

/// Computes the geometry of `cell` using its material's conductivity.
pub fn compute_geometry(mesh: &Mesh, cell: usize) -> Result<CellGeometry, GeometryError> {
    let material = mesh.material_of(cell);
    CellGeometry::from_vertices(cell, &mesh.cell_vertices(cell), material.lambda_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn parallelepiped(origin: Vec3, b: [Vec3; 3]) -> [Vec3; 8] {
        std::array::from_fn(|v| {
            origin
                + b[0] * (v & 1) as f64
                + b[1] * ((v >> 1) & 1) as f64
                + b[2] * ((v >> 2) & 1) as f64
        })
    }

    fn unit_cube() -> [Vec3; 8] {
        parallelepiped(Vec3::zeros(), [Vec3::x(), Vec3::y(), Vec3::z()])
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn edge_groups_point_along_their_direction() {
        for (nu, (a, b)) in EDGE_TABLE.iter().enumerate() {
            let mu = nu / 4;
            assert_eq!(b - a, 1 << mu, "edge {nu}");
        }
    }

    #[test]
    fn unit_cube_geometry() {
        let g = CellGeometry::from_vertices(0, &unit_cube(), 1.0).unwrap();
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        for mu in 0..3 {
            assert!((g.node_vectors[mu] - axes[mu]).norm() < 1e-12);
        }
        assert!((g.gamma - Matrix3::identity()).norm() < 1e-12);
        assert_close(g.volume, 1.0, 1e-12);
        for iota in 0..6 {
            let f = g.face_vectors[iota];
            assert_close(f.norm(), 1.0, 1e-12);
            // outward: low face points against the axis, high face along it
            let expected = axes[iota / 2] * -face_sign(iota);
            assert!((f - expected).norm() < 1e-12, "face {iota}: {f:?}");
            for mu in 0..3 {
                if mu == iota / 2 {
                    assert_close(g.s_coeff[iota][mu], -face_sign(iota), 1e-12);
                } else {
                    assert_eq!(g.s_coeff[iota][mu], 0.0);
                }
            }
            assert_close(g.normal_conductance(iota), 1.0, 1e-12);
        }
    }

    #[test]
    fn scaled_cube_homogeneity() {
        let verts = unit_cube().map(|v| v * 2.0);
        let g = CellGeometry::from_vertices(0, &verts, 1.0).unwrap();
        let unit = CellGeometry::from_vertices(0, &unit_cube(), 1.0).unwrap();
        for mu in 0..3 {
            assert!((g.node_vectors[mu] - unit.node_vectors[mu] * 2.0).norm() < 1e-12);
        }
        for f in &g.face_vectors {
            assert_close(f.norm(), 4.0, 1e-12);
        }
        assert_close(g.volume, 8.0, 1e-12);
        assert!((g.gamma - unit.gamma * 0.5).norm() < 1e-12);
    }

    #[test]
    fn parallelepiped_faces_and_volume() {
        let b = [
            Vec3::new(1.2, 0.1, -0.2),
            Vec3::new(0.3, 0.9, 0.15),
            Vec3::new(-0.1, 0.25, 1.4),
        ];
        let g = CellGeometry::from_vertices(0, &parallelepiped(Vec3::new(3.0, -1.0, 2.0), b), 2.5).unwrap();
        let det = Matrix3::from_columns(&b).determinant();
        assert_close(g.volume, det.abs(), 1e-12);
        let cross = [b[1].cross(&b[2]), b[2].cross(&b[0]), b[0].cross(&b[1])];
        for rho in 0..3 {
            assert!((g.face_vectors[2 * rho] + cross[rho]).norm() < 1e-12);
            assert!((g.face_vectors[2 * rho + 1] - cross[rho]).norm() < 1e-12);
        }
        assert!((g.gamma * g.beta.transpose() - Matrix3::identity()).norm() < 1e-12);
        assert!((g.gamma.transpose() * g.beta - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn rotation_keeps_s_coefficients() {
        let verts = parallelepiped(
            Vec3::new(0.5, 0.2, 0.0),
            [
                Vec3::new(1.0, 0.2, 0.0),
                Vec3::new(-0.3, 1.1, 0.1),
                Vec3::new(0.0, 0.2, 0.8),
            ],
        );
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let rotated = verts.map(|v| rot * v);
        let a = CellGeometry::from_vertices(0, &verts, 1.7).unwrap();
        let b = CellGeometry::from_vertices(0, &rotated, 1.7).unwrap();
        for iota in 0..6 {
            assert!((rot * a.face_vectors[iota] - b.face_vectors[iota]).norm() < 1e-12);
            for mu in 0..3 {
                assert_close(a.s_coeff[iota][mu], b.s_coeff[iota][mu], 1e-12);
            }
        }
        assert_close(a.volume, b.volume, 1e-12);
    }

    #[test]
    fn flat_cell_is_degenerate() {
        let mut verts = unit_cube();
        for v in verts.iter_mut() {
            v.z = 0.0;
        }
        // vertices now repeat in space; topology is still 8 distinct ids
        let err = CellGeometry::from_vertices(7, &verts, 1.0).unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate { cell: 7, .. }));
    }

    #[test]
    fn mirrored_cell_is_inverted() {
        let verts = unit_cube().map(|v| Vec3::new(-v.x, v.y, v.z));
        let err = CellGeometry::from_vertices(3, &verts, 1.0).unwrap_err();
        assert!(matches!(err, GeometryError::Inverted { cell: 3, .. }));
    }
}
