//! The connection–reflection cycle.
//!
//! The engine stores the two operational halves of a propagating field:
//! incident node states `z_in^n` (written by the connection phase) and
//! outgoing port states `z_out^p` (written by the reflection phase). Because
//! the node-boundary map only relabels a block, both live in the same flat
//! slot layout. One [`DscSystem::step`] performs
//!
//! ```text
//! z_in^n(t + τ/2) := nb[ C[z_out^p](t) + e(t) ]
//! z_out^p(t + τ)  := nb[ R[z_in^n](t + τ/2) ]
//! t := t + τ
//! ```
//!
//! Connection maps run per link (interface or boundary face), reflection
//! maps per cell. Within a phase every task writes a disjoint partition, so
//! each phase runs in parallel with a barrier in between.
//!
//! Excitations are added to the connection output of boundary faces. They
//! may momentarily violate the model equations at those faces; keeping them
//! consistent is up to the model.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{Mesh, FACES_PER_CELL};
use crate::state::{FieldLayout, History, Phase, ProcessClock, PropagatingField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub cell: usize,
    pub face: usize,
}

impl Slot {
    pub fn new(cell: usize, face: usize) -> Self {
        Self { cell, face }
    }
}

/// A face as seen by the connection phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Interface { a: Slot, b: Slot },
    Boundary { side: Slot },
}

impl Link {
    pub fn sides(&self) -> Vec<Slot> {
        match *self {
            Link::Interface { a, b } => vec![a, b],
            Link::Boundary { side } => vec![side],
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Link::Boundary { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("slot (cell {}, face {}) is covered by {count} links", slot.cell, slot.face)]
    Coverage { slot: Slot, count: usize },
    #[error("slot (cell {}, face {}) is outside the layout", slot.cell, slot.face)]
    OutOfRange { slot: Slot },
    #[error("mesh face {face} is shared by {cells} cells")]
    Irregular { face: usize, cells: usize },
}

/// Slot layout plus the links of the connection phase. Every slot belongs
/// to exactly one link.
#[derive(Debug, Clone)]
pub struct Topology {
    layout: FieldLayout,
    links: Vec<Link>,
    slot_link: Vec<usize>,
}

impl Topology {
    pub fn new(layout: FieldLayout, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut slot_link = vec![usize::MAX; layout.slots()];
        let mut count = vec![0usize; layout.slots()];
        for (id, link) in links.iter().enumerate() {
            for s in link.sides() {
                if s.cell >= layout.cells || s.face >= layout.faces_per_cell {
                    return Err(TopologyError::OutOfRange { slot: s });
                }
                let k = layout.slot(s.cell, s.face);
                slot_link[k] = id;
                count[k] += 1;
            }
        }
        if let Some(k) = count.iter().position(|&c| c != 1) {
            let slot = Slot::new(k / layout.faces_per_cell, k % layout.faces_per_cell);
            return Err(TopologyError::Coverage { slot, count: count[k] });
        }
        Ok(Self {
            layout,
            links,
            slot_link,
        })
    }

    /// Links of a hexahedral mesh: interfaces first, in mesh order, then
    /// boundary faces.
    pub fn from_mesh(mesh: &Mesh, dim: usize) -> Result<Self, TopologyError> {
        if let Some((face, f)) = mesh.faces.iter().enumerate().find(|(_, f)| f.sides.len() > 2) {
            return Err(TopologyError::Irregular {
                face,
                cells: f.sides.len(),
            });
        }
        let layout = FieldLayout::new(mesh.num_cells(), FACES_PER_CELL, dim);
        let mut links: Vec<Link> = mesh
            .interfaces
            .iter()
            .map(|l| Link::Interface {
                a: Slot::new(l.cell_a, l.face_a),
                b: Slot::new(l.cell_b, l.face_b),
            })
            .collect();
        links.extend(mesh.boundary_faces.iter().map(|&f| {
            let (cell, face) = mesh.faces[f].sides[0];
            Link::Boundary {
                side: Slot::new(cell, face),
            }
        }));
        Self::new(layout, links)
    }

    pub fn layout(&self) -> FieldLayout {
        self.layout
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Link id owning `slot`.
    pub fn link_of(&self, slot: Slot) -> usize {
        self.slot_link[self.layout.slot(slot.cell, slot.face)]
    }
}

/// Read-only view of the histories handed to maps.
///
/// During the connection phase at port time `t`:
/// `incident(μ) = z_in^n(t − τ/2 − μτ)`, `outgoing(μ) = z_out^p(t − μτ)`.
///
/// During the reflection phase at node time `t + τ/2`:
/// `incident(μ) = z_in^n(t + τ/2 − μτ)`, `outgoing(μ) = z_out^p(t − μτ)`,
/// the latter being the relabelled `z_out^n(t − τ/2 − μτ)`.
pub struct PhaseContext<'a> {
    pub layout: FieldLayout,
    pub step: u64,
    pub tau: f64,
    pub phase: Phase,
    incident: &'a History,
    outgoing: &'a History,
}

impl<'a> PhaseContext<'a> {
    pub fn incident(&self, mu: usize) -> &'a [f64] {
        self.incident.at(mu)
    }

    pub fn outgoing(&self, mu: usize) -> &'a [f64] {
        self.outgoing.at(mu)
    }

    pub fn incident_slot(&self, mu: usize, slot: Slot) -> &'a [f64] {
        &self.incident.at(mu)[self.range(slot)]
    }

    pub fn outgoing_slot(&self, mu: usize, slot: Slot) -> &'a [f64] {
        &self.outgoing.at(mu)[self.range(slot)]
    }

    pub fn incident_cell(&self, mu: usize, cell: usize) -> &'a [f64] {
        &self.incident.at(mu)[self.layout.cell_range(cell)]
    }

    pub fn outgoing_cell(&self, mu: usize, cell: usize) -> &'a [f64] {
        &self.outgoing.at(mu)[self.layout.cell_range(cell)]
    }

    /// Time at which the current phase's outputs switch.
    pub fn time(&self) -> f64 {
        match self.phase {
            Phase::Connection => ProcessClock::node_time(self.step, self.tau),
            Phase::Reflection => ProcessClock::port_time(self.step + 1, self.tau),
        }
    }

    /// Port time `t` of the current cycle.
    pub fn port_time(&self) -> f64 {
        ProcessClock::port_time(self.step, self.tau)
    }

    fn range(&self, slot: Slot) -> std::ops::Range<usize> {
        self.layout.slot_range(self.layout.slot(slot.cell, slot.face))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct MapError(pub String);

impl MapError {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }
}

/// Connection map of one link. `out` holds one block of `dim` values per
/// side, in the order of [`Link::sides`]; it receives the incident node
/// states (already relabelled by `nb`).
pub trait ConnectionMap: Sync {
    fn connect(
        &self,
        link_id: usize,
        link: &Link,
        ctx: &PhaseContext<'_>,
        out: &mut [f64],
    ) -> Result<(), MapError>;
}

/// Reflection map of one cell. `out` spans the cell's slots and receives
/// the outgoing port states of the next cycle.
pub trait ReflectionMap: Sync {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError>;
}

/// Port process added at boundary faces before `nb`.
pub trait Excitation: Sync {
    /// Adds `e(t)` for `slot` at step `step` onto `out`.
    fn excite(&self, link_id: usize, slot: Slot, step: u64, tau: f64, out: &mut [f64]);
}

impl<T: ConnectionMap + Send> ConnectionMap for std::sync::Arc<T> {
    fn connect(&self, id: usize, link: &Link, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        (**self).connect(id, link, ctx, out)
    }
}

impl<T: ReflectionMap + Send> ReflectionMap for std::sync::Arc<T> {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        (**self).reflect(cell, ctx, out)
    }
}

impl<T: ConnectionMap> ConnectionMap for &T {
    fn connect(&self, id: usize, link: &Link, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        (**self).connect(id, link, ctx, out)
    }
}

impl<T: ReflectionMap> ReflectionMap for &T {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        (**self).reflect(cell, ctx, out)
    }
}

/// Classical transmission-line transfer: the outgoing state of one side
/// becomes the incident state of the other. Boundary faces reflect with a
/// fixed coefficient (0 absorbs).
#[derive(Debug, Clone, Copy, Default)]
pub struct TransferConnection {
    pub boundary_reflection: f64,
}

impl ConnectionMap for TransferConnection {
    fn connect(&self, _: usize, link: &Link, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let dim = ctx.layout.dim;
        match *link {
            Link::Interface { a, b } => {
                out[..dim].copy_from_slice(ctx.outgoing_slot(0, b));
                out[dim..].copy_from_slice(ctx.outgoing_slot(0, a));
            }
            Link::Boundary { side } => {
                for (o, z) in out.iter_mut().zip(ctx.outgoing_slot(0, side)) {
                    *o = self.boundary_reflection * z;
                }
            }
        }
        Ok(())
    }
}

/// Reflection map with identically zero output.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroReflection;

impl ReflectionMap for ZeroReflection {
    fn reflect(&self, _: usize, _: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        out.fill(0.0);
        Ok(())
    }
}

type ExcitationFn = Box<dyn Fn(u64, f64, &mut [f64]) + Send + Sync>;

/// Excitation given by per-link closures `f(step, tau, out)`.
#[derive(Default)]
pub struct ScheduledExcitation {
    sources: Vec<Option<ExcitationFn>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("excitation targets link {link}, which is not a boundary face")]
pub struct NotBoundary {
    pub link: usize,
}

impl ScheduledExcitation {
    pub fn new(topology: &Topology) -> Self {
        Self {
            sources: (0..topology.links().len()).map(|_| None).collect(),
        }
    }

    pub fn set(
        &mut self,
        topology: &Topology,
        link: usize,
        source: impl Fn(u64, f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<(), NotBoundary> {
        match topology.links().get(link) {
            Some(l) if l.is_boundary() => {
                self.sources[link] = Some(Box::new(source));
                Ok(())
            }
            _ => Err(NotBoundary { link }),
        }
    }
}

impl Excitation for ScheduledExcitation {
    fn excite(&self, link_id: usize, _: Slot, step: u64, tau: f64, out: &mut [f64]) {
        if let Some(Some(f)) = self.sources.get(link_id) {
            f(step, tau, out);
        }
    }
}

/// Order in which tasks of a phase are executed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Parallel,
    Sequential,
    /// Sequential in the given orders (a permutation of cells and links).
    Permuted { cells: Vec<usize>, links: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Link { id: usize, cell: usize, face: usize },
    Cell(usize),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Link { id, cell, face } => write!(f, "link {id} (cell {cell}, face {face})"),
            Location::Cell(c) => write!(f, "cell {c}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("step {step}, {phase:?} phase, {location}: {source}")]
    Map {
        step: u64,
        phase: Phase,
        location: Location,
        source: MapError,
    },
    #[error("initial state has length {got}, expected {expected}")]
    StateLength { got: usize, expected: usize },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("probe {index} lies outside the field layout")]
    Probe { index: usize },
}

/// A probed scalar of the total field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Node component, sampled at `(k + ½)τ`.
    Node { cell: usize, face: usize, component: usize },
    /// Port component, sampled at `kτ`.
    Port { cell: usize, face: usize, component: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub probe: Probe,
    pub samples: Vec<(f64, f64)>,
}

/// Writes probe series as `time,probe_id,value`, ordered by time then id.
pub fn write_probe_csv(series: &[ProbeSeries], mut out: impl Write) -> std::io::Result<()> {
    let mut rows: Vec<(f64, usize, f64)> = series
        .iter()
        .enumerate()
        .flat_map(|(id, s)| s.samples.iter().map(move |&(t, v)| (t, id, v)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    writeln!(out, "time,probe_id,value")?;
    for (t, id, v) in rows {
        writeln!(out, "{t:e},{id},{v:e}")?;
    }
    Ok(())
}

/// A DSC system: topology, maps, optional excitation, histories and clock.
pub struct DscSystem<C, R> {
    topology: Topology,
    connection: C,
    reflection: R,
    excitation: Option<Box<dyn Excitation + Send>>,
    schedule: Schedule,
    clock: ProcessClock,
    incident: History,
    outgoing: History,
    link_buf: Vec<f64>,
    spare_incident: Option<Vec<f64>>,
    spare_outgoing: Option<Vec<f64>>,
}

impl<C: ConnectionMap, R: ReflectionMap> DscSystem<C, R> {
    /// Zero-initialised system keeping `depth` past states of each half
    /// (at least 2; use model order + 1).
    pub fn new(topology: Topology, connection: C, reflection: R, tau: f64, depth: usize) -> Result<Self, EngineError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(EngineError::TimeStep(tau));
        }
        let layout = topology.layout();
        let depth = depth.max(2);
        let mut outgoing = History::new(depth, layout.len());
        outgoing.push(vec![0.0; layout.len()]);
        let width = 2 * layout.dim;
        Ok(Self {
            link_buf: vec![0.0; topology.links().len() * width],
            topology,
            connection,
            reflection,
            excitation: None,
            schedule: Schedule::Parallel,
            clock: ProcessClock::new(tau),
            incident: History::new(depth, layout.len()),
            outgoing,
            spare_incident: None,
            spare_outgoing: None,
        })
    }

    pub fn with_excitation(mut self, excitation: impl Excitation + Send + 'static) -> Self {
        self.excitation = Some(Box::new(excitation));
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// Replaces the zero start by a given outgoing port state `z_out^p(0)`.
    pub fn with_initial_outgoing(mut self, state: Vec<f64>) -> Result<Self, EngineError> {
        let expected = self.topology.layout().len();
        if state.len() != expected {
            return Err(EngineError::StateLength {
                got: state.len(),
                expected,
            });
        }
        self.outgoing.clear();
        self.outgoing.push(state);
        Ok(self)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn clock(&self) -> ProcessClock {
        self.clock
    }

    pub fn connection(&self) -> &C {
        &self.connection
    }

    pub fn reflection(&self) -> &R {
        &self.reflection
    }

    pub fn incident_history(&self) -> &History {
        &self.incident
    }

    pub fn outgoing_history(&self) -> &History {
        &self.outgoing
    }

    /// Total node state `z^n` at the last node time `(k − ½)τ`.
    pub fn node_totals(&self) -> Vec<f64> {
        add(self.incident.at(0), self.outgoing.at(0))
    }

    /// Total port state `z^p` at the last connection time `(k − 1)τ`.
    pub fn port_totals(&self) -> Vec<f64> {
        add(self.incident.at(0), self.outgoing.at(1))
    }

    /// Totals as a field (ports at the last connection time, nodes half a
    /// step later).
    pub fn totals(&self) -> PropagatingField {
        PropagatingField {
            layout: self.topology.layout(),
            port: self.port_totals(),
            node: self.node_totals(),
        }
    }

    pub fn step(&mut self) -> Result<(), EngineError> {
        let layout = self.topology.layout();
        let dim = layout.dim;
        let step = self.clock.step;
        let tau = self.clock.tau;

        self.clock.phase = Phase::Connection;
        self.link_buf.fill(0.0);
        {
            let ctx = PhaseContext {
                layout,
                step,
                tau,
                phase: Phase::Connection,
                incident: &self.incident,
                outgoing: &self.outgoing,
            };
            let links = self.topology.links();
            let connection = &self.connection;
            let excitation = self.excitation.as_deref();
            let task = |id: usize, chunk: &mut [f64]| -> Result<(), EngineError> {
                let link = &links[id];
                let n = link.sides().len() * dim;
                let out = &mut chunk[..n];
                connection.connect(id, link, &ctx, out).map_err(|e| {
                    let s = link.sides()[0];
                    EngineError::Map {
                        step,
                        phase: Phase::Connection,
                        location: Location::Link {
                            id,
                            cell: s.cell,
                            face: s.face,
                        },
                        source: e,
                    }
                })?;
                if let (Link::Boundary { side }, Some(e)) = (link, excitation) {
                    e.excite(id, *side, step, tau, out);
                }
                Ok(())
            };
            let width = 2 * dim;
            match &self.schedule {
                Schedule::Parallel => self
                    .link_buf
                    .par_chunks_mut(width)
                    .enumerate()
                    .try_for_each(|(id, c)| task(id, c))?,
                Schedule::Sequential => {
                    for (id, c) in self.link_buf.chunks_mut(width).enumerate() {
                        task(id, c)?;
                    }
                }
                Schedule::Permuted { links: order, .. } => {
                    for &id in order {
                        task(id, &mut self.link_buf[id * width..(id + 1) * width])?;
                    }
                }
            }
        }
        let mut incident = self.spare_incident.take().unwrap_or_else(|| vec![0.0; layout.len()]);
        let width = 2 * dim;
        for (id, link) in self.topology.links().iter().enumerate() {
            let chunk = &self.link_buf[id * width..(id + 1) * width];
            for (k, s) in link.sides().into_iter().enumerate() {
                let r = layout.slot_range(layout.slot(s.cell, s.face));
                incident[r].copy_from_slice(&chunk[k * dim..(k + 1) * dim]);
            }
        }
        self.spare_incident = self.incident.push(incident);

        self.clock.phase = Phase::Reflection;
        let mut outgoing = self.spare_outgoing.take().unwrap_or_else(|| vec![0.0; layout.len()]);
        outgoing.fill(0.0);
        {
            let ctx = PhaseContext {
                layout,
                step,
                tau,
                phase: Phase::Reflection,
                incident: &self.incident,
                outgoing: &self.outgoing,
            };
            let reflection = &self.reflection;
            let task = |cell: usize, out: &mut [f64]| {
                reflection.reflect(cell, &ctx, out).map_err(|e| EngineError::Map {
                    step,
                    phase: Phase::Reflection,
                    location: Location::Cell(cell),
                    source: e,
                })
            };
            let width = layout.cell_width();
            match &self.schedule {
                Schedule::Parallel => outgoing
                    .par_chunks_mut(width)
                    .enumerate()
                    .try_for_each(|(c, o)| task(c, o))?,
                Schedule::Sequential => {
                    for (c, o) in outgoing.chunks_mut(width).enumerate() {
                        task(c, o)?;
                    }
                }
                Schedule::Permuted { cells, .. } => {
                    for &c in cells {
                        task(c, &mut outgoing[c * width..(c + 1) * width])?;
                    }
                }
            }
        }
        self.spare_outgoing = self.outgoing.push(outgoing);
        self.clock.step += 1;
        self.clock.phase = Phase::Connection;
        Ok(())
    }

    /// Runs `n_steps` cycles and samples every probe once per cycle.
    pub fn run(&mut self, n_steps: u64, probes: &[Probe]) -> Result<Vec<ProbeSeries>, EngineError> {
        let layout = self.topology.layout();
        for (index, p) in probes.iter().enumerate() {
            let (Probe::Node { cell, face, component } | Probe::Port { cell, face, component }) = *p;
            if cell >= layout.cells || face >= layout.faces_per_cell || component >= layout.dim {
                return Err(EngineError::Probe { index });
            }
        }
        let mut series: Vec<ProbeSeries> = probes
            .iter()
            .map(|&probe| ProbeSeries {
                probe,
                samples: Vec::with_capacity(n_steps as usize),
            })
            .collect();
        for _ in 0..n_steps {
            let k = self.clock.step;
            self.step()?;
            let tau = self.clock.tau;
            for s in series.iter_mut() {
                let (cell, face, component, node) = match s.probe {
                    Probe::Node { cell, face, component } => (cell, face, component, true),
                    Probe::Port { cell, face, component } => (cell, face, component, false),
                };
                let i = layout.slot_range(layout.slot(cell, face)).start + component;
                let (value, t) = if node {
                    (self.incident.at(0)[i] + self.outgoing.at(0)[i], ProcessClock::node_time(k, tau))
                } else {
                    (self.incident.at(0)[i] + self.outgoing.at(1)[i], ProcessClock::port_time(k, tau))
                };
                s.samples.push((t, value));
            }
        }
        Ok(series)
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
