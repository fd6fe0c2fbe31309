//! Heat diffusion on non-orthogonal hexahedral cells.
//!
//! Every (cell, face) slot carries three components per side: index `μ`
//! runs over the cell's node-vector directions. For face `ι` with normal
//! direction `ρ = ι/2` the normal components encode temperatures,
//!
//! ```text
//! z^n[ι][ρ] = 2(−1)^ι T^n        z^p[ι][ρ] = 2(−1)^ι T^p[ι]
//! ```
//!
//! and the tangential components carry port-temperature differences across
//! the cell, `T^p[2μ+1] − T^p[2μ]`, one half-step old. The heat current into
//! the cell through face `ι` is
//!
//! ```text
//! J_ι = Σ_μ s_ι^μ (z^n[ι][μ] − δ_μρ z^p[ι][μ])
//! ```
//!
//! with `s` from the cell geometry. The connection phase solves current
//! conservation plus temperature continuity for the interface temperature;
//! the reflection phase integrates the nodal energy balance.

use std::sync::Arc;

use nalgebra::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{
    ConnectionMap, DscSystem, EngineError, Excitation, Link, MapError, PhaseContext, ReflectionMap, Schedule, Slot,
    Topology, TopologyError,
};
use crate::linear_propagator::{stability_norm, EigenError, LinearModel, Matrix, ModelError, StabilityReport};
use crate::mesh::{
    compute_geometry, face_sign, normal_direction, CellGeometry, GeometryError, Material, Mesh, FACES_PER_CELL,
};

pub const HEAT_DIM: usize = 3;
const CELL_DIM: usize = FACES_PER_CELL * HEAT_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(
        "interface between cell {cell_a} (face {face_a}) and cell {cell_b} (face {face_b}) has non-positive conductance {conductance:e}"
    )]
    DegenerateInterface {
        cell_a: usize,
        face_a: usize,
        cell_b: usize,
        face_b: usize,
        conductance: f64,
    },
    #[error("boundary face {face} of cell {cell} has vanishing normal coefficient")]
    DegenerateBoundary { cell: usize, face: usize },
    #[error("link {0} is not a boundary face")]
    NotBoundary(usize),
    #[error("heat source of cell {cell} is not finite: {value}")]
    InvalidSource { cell: usize, value: f64 },
    #[error("conductivity must be non-negative and finite, got {0}")]
    InvalidConductivity(f64),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Adiabatic,
    /// Temperature `value` imposed from time `onset` on.
    FixedTemperature { value: f64, onset: f64 },
}

/// Total states of one cell: `zn` at `t − τ/2`, `zp` at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeatCellState {
    pub zn: [[f64; HEAT_DIM]; FACES_PER_CELL],
    pub zp: [[f64; HEAT_DIM]; FACES_PER_CELL],
}

impl HeatCellState {
    pub fn from_slices(zn: &[f64], zp: &[f64]) -> Self {
        Self {
            zn: blocks(zn),
            zp: blocks(zp),
        }
    }

    /// State of a cell whose node and faces all sit at `node` and `faces`
    /// respectively (ports and node one half-step apart).
    pub fn from_temperatures(node: f64, faces: &[f64; FACES_PER_CELL]) -> Self {
        let mut s = Self::default();
        s.zn = node_state(node, faces);
        for iota in 0..FACES_PER_CELL {
            for mu in 0..HEAT_DIM {
                s.zp[iota][mu] = if mu == normal_direction(iota) {
                    2.0 * face_sign(iota) * faces[iota]
                } else {
                    s.zn[iota][mu]
                };
            }
        }
        s
    }

    pub fn node_temperature(&self) -> f64 {
        self.zn[0][0] / 2.0
    }

    pub fn port_temperature(&self, face: usize) -> f64 {
        self.zp[face][normal_direction(face)] / (2.0 * face_sign(face))
    }
}

fn blocks(z: &[f64]) -> [[f64; HEAT_DIM]; FACES_PER_CELL] {
    assert_eq!(z.len(), CELL_DIM);
    std::array::from_fn(|i| [z[3 * i], z[3 * i + 1], z[3 * i + 2]])
}

/// Node components for nodal temperature `node` and face temperatures
/// `faces`.
pub fn node_state(node: f64, faces: &[f64; FACES_PER_CELL]) -> [[f64; HEAT_DIM]; FACES_PER_CELL] {
    std::array::from_fn(|iota| {
        std::array::from_fn(|mu| {
            if mu == normal_direction(iota) {
                2.0 * face_sign(iota) * node
            } else {
                faces[2 * mu + 1] - faces[2 * mu]
            }
        })
    })
}

/// Time-shifted finite temperature differences along the node vectors at
/// face `face`.
pub fn nabla_b(state: &HeatCellState, face: usize) -> [f64; HEAT_DIM] {
    let rho = normal_direction(face);
    std::array::from_fn(|mu| {
        if mu == rho {
            state.zn[face][mu] - state.zp[face][mu]
        } else {
            state.zn[face][mu]
        }
    })
}

/// Heat current into the cell through `face`.
pub fn heat_current(geometry: &CellGeometry, state: &HeatCellState, face: usize) -> f64 {
    let g = nabla_b(state, face);
    (0..HEAT_DIM).map(|mu| geometry.s_coeff[face][mu] * g[mu]).sum()
}

fn weighted_node(geometry: &CellGeometry, zn: &[f64], face: usize) -> f64 {
    (0..HEAT_DIM).map(|mu| geometry.s_coeff[face][mu] * zn[mu]).sum()
}

/// Port values written to both sides of an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePorts {
    pub temperature: f64,
    pub a: [f64; HEAT_DIM],
    pub b: [f64; HEAT_DIM],
}

/// Solves current conservation and temperature continuity across an
/// interface. `zn_a`, `zn_b` are the node components of the two face slots.
pub fn connect_interface(
    (cell_a, geometry_a, face_a, zn_a): (usize, &CellGeometry, usize, &[f64]),
    (cell_b, geometry_b, face_b, zn_b): (usize, &CellGeometry, usize, &[f64]),
) -> Result<InterfacePorts, HeatError> {
    let conductance = geometry_a.normal_conductance(face_a) + geometry_b.normal_conductance(face_b);
    if !(conductance > 0.0) {
        return Err(HeatError::DegenerateInterface {
            cell_a,
            face_a,
            cell_b,
            face_b,
            conductance,
        });
    }
    let sum = weighted_node(geometry_a, zn_a, face_a) + weighted_node(geometry_b, zn_b, face_b);
    let temperature = -sum / (2.0 * conductance);
    Ok(InterfacePorts {
        temperature,
        a: face_ports(zn_a, face_a, temperature),
        b: face_ports(zn_b, face_b, temperature),
    })
}

fn face_ports(zn: &[f64], face: usize, temperature: f64) -> [f64; HEAT_DIM] {
    let rho = normal_direction(face);
    std::array::from_fn(|mu| if mu == rho { 2.0 * face_sign(face) * temperature } else { zn[mu] })
}

/// Total port values of a boundary face at port time `t`.
pub fn connect_boundary(
    cell: usize,
    geometry: &CellGeometry,
    face: usize,
    zn: &[f64],
    condition: BoundaryCondition,
    t: f64,
) -> Result<[f64; HEAT_DIM], HeatError> {
    let rho = normal_direction(face);
    let mut ports = face_ports(zn, face, 0.0);
    match condition {
        BoundaryCondition::Adiabatic => {
            let s = geometry.normal_s(face);
            if s == 0.0 {
                return Err(HeatError::DegenerateBoundary { cell, face });
            }
            ports[rho] = weighted_node(geometry, zn, face) / s;
        }
        BoundaryCondition::FixedTemperature { value, onset } => {
            if t >= onset {
                ports[rho] = 2.0 * face_sign(face) * value;
            }
        }
    }
    Ok(ports)
}

/// New node components of a cell at `t + τ/2` from its totals.
pub fn reflect_cell(
    geometry: &CellGeometry,
    material: &Material,
    state: &HeatCellState,
    source: f64,
    tau: f64,
) -> [[f64; HEAT_DIM]; FACES_PER_CELL] {
    let currents: f64 = (0..FACES_PER_CELL).map(|f| heat_current(geometry, state, f)).sum();
    let t = state.node_temperature() + tau / (material.c_v * geometry.volume) * (source + currents);
    std::array::from_fn(|iota| {
        std::array::from_fn(|mu| {
            if mu == normal_direction(iota) {
                2.0 * face_sign(iota) * t
            } else {
                -0.5 * (state.zp[2 * mu + 1][mu] + state.zp[2 * mu][mu])
            }
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conductivity {
    Sigma(f64),
    Factored {
        frequency: f64,
        permittivity: f64,
        loss_tangent: f64,
    },
}

impl Conductivity {
    pub fn sigma(&self) -> f64 {
        match *self {
            Conductivity::Sigma(s) => s,
            Conductivity::Factored {
                frequency,
                permittivity,
                loss_tangent,
            } => 2.0 * std::f64::consts::PI * frequency * permittivity * loss_tangent,
        }
    }
}

/// Dielectric loss power of a cell from complex node voltages along its
/// node vectors.
pub fn dielectric_source(
    geometry: &CellGeometry,
    conductivity: Conductivity,
    voltages: &[Complex<f64>; 3],
) -> Result<f64, HeatError> {
    let sigma = conductivity.sigma();
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(HeatError::InvalidConductivity(sigma));
    }
    let field: f64 = (0..3)
        .map(|nu| {
            (0..3)
                .map(|mu| voltages[mu] * geometry.gamma[(nu, mu)])
                .sum::<Complex<f64>>()
                .norm_sqr()
        })
        .sum();
    Ok(0.5 * sigma * geometry.volume * field)
}

/// Linear update of one cell's node components,
/// `zn(t + τ/2) = A_n zn(t − τ/2) + A_p zp(t) + source term`.
pub fn cell_update_matrices(geometry: &CellGeometry, material: &Material, tau: f64) -> (Matrix, Matrix) {
    let mut a_n = Matrix::zeros(CELL_DIM, CELL_DIM);
    let mut a_p = Matrix::zeros(CELL_DIM, CELL_DIM);
    let rate = tau / (material.c_v * geometry.volume);
    for iota in 0..FACES_PER_CELL {
        let rho = normal_direction(iota);
        for mu in 0..HEAT_DIM {
            let row = 3 * iota + mu;
            if mu == rho {
                let w = 2.0 * face_sign(iota);
                a_n[(row, 0)] += w * 0.5;
                for kappa in 0..FACES_PER_CELL {
                    for nu in 0..HEAT_DIM {
                        let s = geometry.s_coeff[kappa][nu];
                        a_n[(row, 3 * kappa + nu)] += w * rate * s;
                        if nu == normal_direction(kappa) {
                            a_p[(row, 3 * kappa + nu)] -= w * rate * s;
                        }
                    }
                }
            } else {
                a_p[(row, 3 * (2 * mu + 1) + mu)] = -0.5;
                a_p[(row, 3 * (2 * mu) + mu)] = -0.5;
            }
        }
    }
    (a_n, a_p)
}

/// First-order model of one cell whose ports are clamped: normal port
/// components held at zero temperature, tangential ports following the
/// cell's own node components. The spectral radius of its `N` is the
/// cell's stability measure.
pub fn cell_stability_model(geometry: &CellGeometry, material: &Material, tau: f64) -> Result<LinearModel, ModelError> {
    let (a_n, a_p) = cell_update_matrices(geometry, material, tau);
    let mut clamp = Matrix::zeros(CELL_DIM, CELL_DIM);
    for iota in 0..FACES_PER_CELL {
        for mu in 0..HEAT_DIM {
            if mu != normal_direction(iota) {
                clamp[(3 * iota + mu, 3 * iota + mu)] = 1.0;
            }
        }
    }
    let phi1 = -(a_n + a_p * clamp);
    LinearModel::first_order(Matrix::identity(CELL_DIM, CELL_DIM), phi1, Matrix::zeros(CELL_DIM, CELL_DIM))
}

/// Spectral radius of the cell's clamped propagator.
pub fn cell_spectral_radius(geometry: &CellGeometry, material: &Material, tau: f64) -> Result<f64, HeatError> {
    let model = cell_stability_model(geometry, material, tau)?;
    let p = crate::linear_propagator::klmn(&model)?;
    Ok(stability_norm(&p.n)?)
}

/// Conservative explicit step `0.9 · min c_v V / Σ_ι |s_ι^ρ|`.
pub fn default_time_step(geometry: &[CellGeometry], materials: &[Material]) -> f64 {
    geometry
        .iter()
        .zip(materials)
        .map(|(g, m)| {
            let sum: f64 = (0..FACES_PER_CELL).map(|f| g.normal_s(f).abs()).sum();
            m.c_v * g.volume / sum
        })
        .fold(f64::INFINITY, f64::min)
        * 0.9
}

/// Heat model over a mesh: geometry, materials, sources, boundary
/// conditions and time step. Acts as the engine's connection and
/// reflection maps.
#[derive(Debug, Clone)]
pub struct HeatModel {
    topology: Topology,
    geometry: Vec<CellGeometry>,
    materials: Vec<Material>,
    sources: Vec<f64>,
    boundary: Vec<Option<BoundaryCondition>>,
    tau: f64,
}

impl HeatModel {
    /// Builds the model with adiabatic boundaries, no sources and time step
    /// `tau`. Interfaces with non-positive conductance are rejected.
    pub fn new(mesh: &Mesh, tau: f64) -> Result<Self, HeatError> {
        let geometry = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| compute_geometry(mesh, c))
            .collect::<Result<Vec<_>, _>>()?;
        let materials = (0..mesh.num_cells()).map(|c| mesh.material_of(c)).collect();
        Self::from_parts(Topology::from_mesh(mesh, HEAT_DIM)?, geometry, materials, tau)
    }

    /// Same as [`HeatModel::new`] with the default time step.
    pub fn with_default_step(mesh: &Mesh) -> Result<Self, HeatError> {
        let mut model = Self::new(mesh, 1.0)?;
        model.tau = default_time_step(&model.geometry, &model.materials);
        Ok(model)
    }

    pub fn from_parts(
        topology: Topology,
        geometry: Vec<CellGeometry>,
        materials: Vec<Material>,
        tau: f64,
    ) -> Result<Self, HeatError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(HeatError::TimeStep(tau));
        }
        let cells = topology.layout().cells;
        for got in [geometry.len(), materials.len()] {
            if got != cells {
                return Err(HeatError::Length { expected: cells, got });
            }
        }
        let mut boundary = Vec::with_capacity(topology.links().len());
        for link in topology.links() {
            match *link {
                Link::Interface { a, b } => {
                    let g = geometry[a.cell].normal_conductance(a.face) + geometry[b.cell].normal_conductance(b.face);
                    if !(g > 0.0) {
                        return Err(HeatError::DegenerateInterface {
                            cell_a: a.cell,
                            face_a: a.face,
                            cell_b: b.cell,
                            face_b: b.face,
                            conductance: g,
                        });
                    }
                    boundary.push(None);
                }
                Link::Boundary { side } => {
                    if geometry[side.cell].normal_s(side.face) == 0.0 {
                        return Err(HeatError::DegenerateBoundary {
                            cell: side.cell,
                            face: side.face,
                        });
                    }
                    boundary.push(Some(BoundaryCondition::Adiabatic));
                }
            }
        }
        Ok(Self {
            sources: vec![0.0; cells],
            topology,
            geometry,
            materials,
            boundary,
            tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) -> Result<(), HeatError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(HeatError::TimeStep(tau));
        }
        self.tau = tau;
        Ok(())
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_cells(&self) -> usize {
        self.geometry.len()
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn geometries(&self) -> &[CellGeometry] {
        &self.geometry
    }

    pub fn material(&self, cell: usize) -> &Material {
        &self.materials[cell]
    }

    pub fn source(&self, cell: usize) -> f64 {
        self.sources[cell]
    }

    pub fn set_source(&mut self, cell: usize, value: f64) -> Result<(), HeatError> {
        if !value.is_finite() {
            return Err(HeatError::InvalidSource { cell, value });
        }
        self.sources[cell] = value;
        Ok(())
    }

    /// Boundary links as `(link id, slot)`.
    pub fn boundary_links(&self) -> impl Iterator<Item = (usize, Slot)> + '_ {
        self.topology.links().iter().enumerate().filter_map(|(id, l)| match *l {
            Link::Boundary { side } => Some((id, side)),
            Link::Interface { .. } => None,
        })
    }

    pub fn boundary_condition(&self, link: usize) -> Option<BoundaryCondition> {
        self.boundary.get(link).copied().flatten()
    }

    pub fn set_boundary(&mut self, link: usize, condition: BoundaryCondition) -> Result<(), HeatError> {
        match self.boundary.get_mut(link) {
            Some(Some(bc)) => {
                *bc = condition;
                Ok(())
            }
            _ => Err(HeatError::NotBoundary(link)),
        }
    }

    /// Per-cell stability measures at the model's time step.
    pub fn stability_report(&self) -> Result<StabilityReport, HeatError> {
        let radii = (0..self.num_cells())
            .into_par_iter()
            .map(|c| cell_spectral_radius(&self.geometry[c], &self.materials[c], self.tau))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StabilityReport { radii })
    }

    pub fn default_time_step(&self) -> f64 {
        default_time_step(&self.geometry, &self.materials)
    }

    fn node_total(ctx: &PhaseContext<'_>, slot: Slot) -> [f64; HEAT_DIM] {
        let a = ctx.incident_slot(0, slot);
        let b = ctx.outgoing_slot(0, slot);
        std::array::from_fn(|i| a[i] + b[i])
    }
}

impl ConnectionMap for HeatModel {
    fn connect(&self, id: usize, link: &Link, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let write = |out: &mut [f64], total: &[f64; HEAT_DIM], slot: Slot| {
            for ((o, t), z) in out.iter_mut().zip(total).zip(ctx.outgoing_slot(0, slot)) {
                *o = t - z;
            }
        };
        match *link {
            Link::Interface { a, b } => {
                let zn_a = Self::node_total(ctx, a);
                let zn_b = Self::node_total(ctx, b);
                let ports = connect_interface(
                    (a.cell, &self.geometry[a.cell], a.face, &zn_a),
                    (b.cell, &self.geometry[b.cell], b.face, &zn_b),
                )
                .map_err(|e| MapError::new(e.to_string()))?;
                let (first, second) = out.split_at_mut(HEAT_DIM);
                write(first, &ports.a, a);
                write(second, &ports.b, b);
            }
            Link::Boundary { side } => {
                let zn = Self::node_total(ctx, side);
                let total = match self.boundary[id] {
                    Some(BoundaryCondition::Adiabatic) | None => connect_boundary(
                        side.cell,
                        &self.geometry[side.cell],
                        side.face,
                        &zn,
                        BoundaryCondition::Adiabatic,
                        ctx.port_time(),
                    )
                    .map_err(|e| MapError::new(e.to_string()))?,
                    // the imposed value arrives through the excitation
                    Some(BoundaryCondition::FixedTemperature { .. }) => face_ports(&zn, side.face, 0.0),
                };
                write(out, &total, side);
            }
        }
        Ok(())
    }
}

impl ReflectionMap for HeatModel {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let incident = ctx.incident_cell(0, cell);
        let previous = ctx.incident_cell(1, cell);
        let outgoing = ctx.outgoing_cell(0, cell);
        let zn: Vec<f64> = previous.iter().zip(outgoing).map(|(a, b)| a + b).collect();
        let zp: Vec<f64> = incident.iter().zip(outgoing).map(|(a, b)| a + b).collect();
        let state = HeatCellState::from_slices(&zn, &zp);
        let next = reflect_cell(&self.geometry[cell], &self.materials[cell], &state, self.sources[cell], ctx.tau);
        for (i, o) in out.iter_mut().enumerate() {
            *o = next[i / HEAT_DIM][i % HEAT_DIM] - incident[i];
        }
        Ok(())
    }
}

/// Imposed boundary temperatures as a port excitation.
#[derive(Debug, Clone)]
pub struct HeatExcitation(pub Arc<HeatModel>);

impl Excitation for HeatExcitation {
    fn excite(&self, link_id: usize, slot: Slot, step: u64, tau: f64, out: &mut [f64]) {
        if let Some(BoundaryCondition::FixedTemperature { value, onset }) = self.0.boundary[link_id] {
            if step as f64 * tau >= onset {
                out[normal_direction(slot.face)] += 2.0 * face_sign(slot.face) * value;
            }
        }
    }
}

/// A heat model driven by the engine.
pub struct HeatSimulation {
    model: Arc<HeatModel>,
    system: DscSystem<Arc<HeatModel>, Arc<HeatModel>>,
}

impl HeatSimulation {
    /// Starts from zero temperature everywhere.
    pub fn new(model: HeatModel) -> Result<Self, HeatError> {
        let model = Arc::new(model);
        let system = DscSystem::new(model.topology.clone(), model.clone(), model.clone(), model.tau, 2)?
            .with_excitation(HeatExcitation(model.clone()));
        Ok(Self { model, system })
    }

    /// Starts from the given nodal temperatures, with every face at its
    /// cell's temperature.
    pub fn with_initial_temperatures(model: HeatModel, temperatures: &[f64]) -> Result<Self, HeatError> {
        let faces: Vec<[f64; FACES_PER_CELL]> = temperatures.iter().map(|&t| [t; FACES_PER_CELL]).collect();
        Self::with_initial_state(model, temperatures, &faces)
    }

    /// Starts from nodal temperatures and face temperatures per cell.
    pub fn with_initial_state(
        model: HeatModel,
        temperatures: &[f64],
        faces: &[[f64; FACES_PER_CELL]],
    ) -> Result<Self, HeatError> {
        let cells = model.num_cells();
        for got in [temperatures.len(), faces.len()] {
            if got != cells {
                return Err(HeatError::Length { expected: cells, got });
            }
        }
        let mut state = Vec::with_capacity(cells * CELL_DIM);
        for (t, f) in temperatures.iter().zip(faces) {
            state.extend(node_state(*t, f).iter().flatten());
        }
        let sim = Self::new(model)?;
        Ok(Self {
            system: sim.system.with_initial_outgoing(state)?,
            model: sim.model,
        })
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.system = self.system.with_schedule(schedule);
        self
    }

    pub fn model(&self) -> &HeatModel {
        &self.model
    }

    pub fn system(&self) -> &DscSystem<Arc<HeatModel>, Arc<HeatModel>> {
        &self.system
    }

    pub fn system_mut(&mut self) -> &mut DscSystem<Arc<HeatModel>, Arc<HeatModel>> {
        &mut self.system
    }

    pub fn step(&mut self) -> Result<(), HeatError> {
        Ok(self.system.step()?)
    }

    pub fn steps_taken(&self) -> u64 {
        self.system.clock().step
    }

    /// Time at which the current nodal temperatures hold.
    pub fn node_time(&self) -> f64 {
        (self.steps_taken() as f64 - 0.5) * self.model.tau
    }

    /// Nodal temperatures at [`HeatSimulation::node_time`].
    pub fn temperatures(&self) -> Vec<f64> {
        let zn = self.system.node_totals();
        (0..self.model.num_cells()).map(|c| zn[c * CELL_DIM] / 2.0).collect()
    }

    /// Face temperatures at the last connection time.
    pub fn port_temperatures(&self) -> Vec<[f64; FACES_PER_CELL]> {
        let zp = self.system.port_totals();
        (0..self.model.num_cells())
            .map(|c| {
                std::array::from_fn(|f| zp[c * CELL_DIM + HEAT_DIM * f + normal_direction(f)] / (2.0 * face_sign(f)))
            })
            .collect()
    }

    /// Cell states entering the last reflection phase.
    pub fn cell_states(&self) -> Vec<HeatCellState> {
        let inc = self.system.incident_history();
        let out = self.system.outgoing_history();
        let zn: Vec<f64> = inc.at(1).iter().zip(out.at(1)).map(|(a, b)| a + b).collect();
        let zp: Vec<f64> = inc.at(0).iter().zip(out.at(1)).map(|(a, b)| a + b).collect();
        (0..self.model.num_cells())
            .map(|c| {
                let r = c * CELL_DIM..(c + 1) * CELL_DIM;
                HeatCellState::from_slices(&zn[r.clone()], &zp[r])
            })
            .collect()
    }

    /// Heat currents per (cell, face) slot used by the last reflection.
    pub fn face_currents(&self) -> Vec<f64> {
        self.cell_states()
            .iter()
            .enumerate()
            .flat_map(|(c, s)| (0..FACES_PER_CELL).map(move |f| heat_current(&self.model.geometry[c], s, f)))
            .collect()
    }

    /// `Σ c_v V T^n`.
    pub fn total_energy(&self) -> f64 {
        self.temperatures()
            .iter()
            .enumerate()
            .map(|(c, t)| self.model.materials[c].c_v * self.model.geometry[c].volume * t)
            .sum()
    }
}
