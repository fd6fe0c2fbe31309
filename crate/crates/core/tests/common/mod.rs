#![allow(dead_code)]

use std::sync::Arc;

use dsc::engine::{
    ConnectionMap, DscSystem, Link, MapError, PhaseContext, ScheduledExcitation, Slot, Topology,
};
use dsc::harness::{generate_distorted_mesh, GridSpec};
use dsc::linear_propagator::{LinearModel, LinearReflection, Matrix, Vector};
use dsc::state::FieldLayout;
use nalgebra::Complex;
use dsc::mesh::{compute_geometry, face_sign, CellGeometry, Material, Mesh};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn grid(nx: usize, ny: usize, nz: usize, amplitude: f64, seed: u64) -> Mesh {
    let spec = GridSpec {
        nx,
        ny,
        nz,
        pitch: 1.0,
        amplitude,
        seed,
    };
    generate_distorted_mesh(&spec, Material::new(1.0, 1.0)).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

/// First-order model with a well-conditioned φ_0.
pub fn random_first_order(rng: &mut ChaCha8Rng, dim: usize) -> LinearModel {
    let phi0 = Matrix::identity(dim, dim) + random_matrix(rng, dim, dim, 0.3);
    let phi1 = random_matrix(rng, dim, dim, 0.5);
    let psi0 = random_matrix(rng, dim, dim, 0.5);
    LinearModel::first_order(phi0, phi1, psi0).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Direct transcription of the heat recurrences on totals, used as an
/// oracle: interface ports from the conservation/continuity quotient with
/// its orientation sign, adiabatic boundary ports from the zero-current
/// condition, node components from the time-balanced energy update.
pub struct LiteralHeat {
    pub geometry: Vec<CellGeometry>,
    pub materials: Vec<Material>,
    pub interfaces: Vec<(usize, usize, usize, usize)>,
    pub boundary: Vec<(usize, usize)>,
    pub zn: Vec<[[f64; 3]; 6]>,
    pub zp: Vec<[[f64; 3]; 6]>,
    pub tau: f64,
}

impl LiteralHeat {
    pub fn new(mesh: &Mesh, temperatures: &[f64], tau: f64) -> Self {
        let n = mesh.num_cells();
        let zn = temperatures
            .iter()
            .map(|&t| std::array::from_fn(|i| std::array::from_fn(|mu| if mu == i / 2 { 2.0 * face_sign(i) * t } else { 0.0 })))
            .collect();
        Self {
            geometry: (0..n).map(|c| compute_geometry(mesh, c).unwrap()).collect(),
            materials: (0..n).map(|c| mesh.material_of(c)).collect(),
            interfaces: mesh.interfaces.iter().map(|l| (l.cell_a, l.face_a, l.cell_b, l.face_b)).collect(),
            boundary: mesh.boundary_faces.iter().map(|&f| mesh.faces[f].sides[0]).collect(),
            zn,
            zp: vec![[[0.0; 3]; 6]; n],
            tau,
        }
    }

    fn weighted(&self, c: usize, f: usize) -> f64 {
        (0..3).map(|mu| self.geometry[c].s_coeff[f][mu] * self.zn[c][f][mu]).sum()
    }

    pub fn step(&mut self) {
        for &(z, i, x, k) in &self.interfaces {
            let num = self.weighted(z, i) + self.weighted(x, k);
            let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
            let den_z = self.geometry[z].s_coeff[i][i / 2] + sign * self.geometry[x].s_coeff[k][k / 2];
            let den_x = self.geometry[x].s_coeff[k][k / 2] + sign * self.geometry[z].s_coeff[i][i / 2];
            self.zp[z][i] = self.zn[z][i];
            self.zp[z][i][i / 2] = num / den_z;
            self.zp[x][k] = self.zn[x][k];
            self.zp[x][k][k / 2] = num / den_x;
        }
        for &(c, f) in &self.boundary {
            self.zp[c][f] = self.zn[c][f];
            self.zp[c][f][f / 2] = self.weighted(c, f) / self.geometry[c].s_coeff[f][f / 2];
        }
        for c in 0..self.zn.len() {
            let g = &self.geometry[c];
            let mut balance = 0.0;
            for k in 0..6 {
                for nu in 0..3 {
                    let port = if nu == k / 2 { self.zp[c][k][nu] } else { 0.0 };
                    balance += g.s_coeff[k][nu] * (self.zn[c][k][nu] - port);
                }
            }
            let rate = self.tau / (self.materials[c].c_v * g.volume);
            let old = self.zn[c];
            for i in 0..6 {
                for mu in 0..3 {
                    self.zn[c][i][mu] = if mu == i / 2 {
                        old[i][mu] + 2.0 * face_sign(i) * rate * balance
                    } else {
                        -0.5 * (self.zp[c][2 * mu + 1][mu] + self.zp[c][2 * mu][mu])
                    };
                }
            }
        }
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.zn.iter().map(|z| z[0][0] / 2.0).collect()
    }
}

/// Spectral radius from the characteristic polynomial (Faddeev–LeVerrier)
/// and its roots (Durand–Kerner). Slow and independent of any library
/// eigen-solver.
pub fn charpoly_radius(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        m = a * &m + Matrix::identity(n, n) * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    let bound = 1.0 + c[..n].iter().fold(0.0f64, |b, x| b.max(x.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|k| seed.powu(k as u32) * bound).collect();
    let eval = |z: Complex<f64>| c.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &ck| acc * z + ck);
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let mut den = Complex::new(1.0, 0.0);
            for (j, r) in roots.iter().enumerate() {
                if j != i {
                    den *= roots[i] - r;
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * bound) {
            break;
        }
    }
    roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Dominant eigenvalue modulus of a symmetric matrix by power iteration.
pub fn power_radius_symmetric(a: &Matrix) -> f64 {
    let sq = a * a;
    let mut v = Vector::from_fn(a.nrows(), |i, _| 1.0 + i as f64 * 0.1).normalize();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = &sq * &v;
        let next = w.norm();
        v = w / next;
        if (next - lambda).abs() < 1e-15 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Connection map with a fixed random scattering matrix per link.
pub struct RandomConnection {
    pub matrices: Vec<Matrix>,
}

impl RandomConnection {
    pub fn new(rng: &mut ChaCha8Rng, topology: &Topology) -> Self {
        let dim = topology.layout().dim;
        let matrices = topology
            .links()
            .iter()
            .map(|l| {
                let n = l.sides().len() * dim;
                random_matrix(rng, n, n, 0.6 / n as f64)
            })
            .collect();
        Self { matrices }
    }
}

impl ConnectionMap for RandomConnection {
    fn connect(&self, id: usize, link: &Link, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let z: Vec<f64> = link.sides().iter().flat_map(|&s| ctx.outgoing_slot(0, s).to_vec()).collect();
        let r = &self.matrices[id] * Vector::from_vec(z);
        out.copy_from_slice(r.as_slice());
        Ok(())
    }
}

/// Chain of cells with two faces each.
pub fn chain_topology(cells: usize, dim: usize) -> Topology {
    let mut links = vec![Link::Boundary { side: Slot::new(0, 0) }];
    for c in 0..cells - 1 {
        links.push(Link::Interface {
            a: Slot::new(c, 1),
            b: Slot::new(c + 1, 0),
        });
    }
    links.push(Link::Boundary {
        side: Slot::new(cells - 1, 1),
    });
    Topology::new(FieldLayout::new(cells, 2, dim), links).unwrap()
}

/// Runs a random first-order model per cell through the engine with a
/// random connection and boundary excitation, and returns the largest
/// model-equation residual relative to the state norm over `steps` steps.
pub fn engine_model_residual(rng: &mut ChaCha8Rng, steps: u64) -> f64 {
    let (cells, dim) = (3, 2);
    let topo = chain_topology(cells, dim);
    let models: Vec<Arc<LinearModel>> = (0..cells).map(|_| Arc::new(random_first_order(rng, 2 * dim))).collect();
    let conn = RandomConnection::new(rng, &topo);
    let drive: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut exc = ScheduledExcitation::new(&topo);
    exc.set(&topo, 0, move |step, _, out| {
        for (o, d) in out.iter_mut().zip(&drive) {
            *o += d * (0.3 * step as f64).cos();
        }
    })
    .unwrap();
    let refl = LinearReflection::new(models.clone());
    let mut sys = DscSystem::new(topo, conn, refl, 0.1, 3).unwrap().with_excitation(exc);
    let layout = sys.topology().layout();
    let mut prev_node = vec![0.0; layout.len()];
    let mut worst: f64 = 0.0;
    for step in 0..steps {
        sys.step().unwrap();
        let node = sys.node_totals();
        let port = sys.port_totals();
        for (c, model) in models.iter().enumerate() {
            let r = layout.cell_range(c);
            let terms = [&node[r.clone()], &prev_node[r.clone()], &port[r.clone()]];
            let res = model.residual(step, &terms[..2], &terms[2..]);
            let scale = terms.iter().map(|t| max_abs(t)).fold(f64::MIN_POSITIVE, f64::max);
            worst = worst.max(res.amax() / scale);
        }
        prev_node = node;
    }
    worst
}
