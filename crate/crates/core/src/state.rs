//! Propagating-field containers: paired port/node blocks, the node-boundary
//! swap, bounded history of past states and the process clock.

use std::collections::VecDeque;
use std::io::Write;

/// Port and node components of one scattering-channel block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Paired<T> {
    pub port: T,
    pub node: T,
}

impl<T> Paired<T> {
    pub fn new(port: T, node: T) -> Self {
        Self { port, node }
    }

    /// Port projection.
    pub fn port(self) -> T {
        self.port
    }

    /// Node projection.
    pub fn node(self) -> T {
        self.node
    }
}

/// Node-boundary map: swaps the port and node components.
#[inline]
pub fn nb<T>(block: Paired<T>) -> Paired<T> {
    Paired {
        port: block.node,
        node: block.port,
    }
}

/// Flat storage layout: `cells × faces_per_cell` slots of `dim` reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    pub cells: usize,
    pub faces_per_cell: usize,
    pub dim: usize,
}

impl FieldLayout {
    pub fn new(cells: usize, faces_per_cell: usize, dim: usize) -> Self {
        Self {
            cells,
            faces_per_cell,
            dim,
        }
    }

    pub fn slots(&self) -> usize {
        self.cells * self.faces_per_cell
    }

    pub fn len(&self) -> usize {
        self.slots() * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slot(&self, cell: usize, face: usize) -> usize {
        cell * self.faces_per_cell + face
    }

    #[inline]
    pub fn slot_range(&self, slot: usize) -> std::ops::Range<usize> {
        slot * self.dim..(slot + 1) * self.dim
    }

    #[inline]
    pub fn cell_range(&self, cell: usize) -> std::ops::Range<usize> {
        let w = self.faces_per_cell * self.dim;
        cell * w..(cell + 1) * w
    }

    pub fn cell_width(&self) -> usize {
        self.faces_per_cell * self.dim
    }
}

/// Total (or split-half) propagating field over a whole mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatingField {
    pub layout: FieldLayout,
    pub port: Vec<f64>,
    pub node: Vec<f64>,
}

impl PropagatingField {
    pub fn zeros(layout: FieldLayout) -> Self {
        Self {
            layout,
            port: vec![0.0; layout.len()],
            node: vec![0.0; layout.len()],
        }
    }

    pub fn block(&self, cell: usize, face: usize) -> Paired<&[f64]> {
        let r = self.layout.slot_range(self.layout.slot(cell, face));
        Paired::new(&self.port[r.clone()], &self.node[r])
    }

    /// Applies the node-boundary map on every block.
    pub fn nb(self) -> Self {
        Self {
            layout: self.layout,
            port: self.node,
            node: self.port,
        }
    }

    /// `incident + outgoing`, component-wise.
    pub fn total(incident: &Self, outgoing: &Self) -> Self {
        assert_eq!(incident.layout, outgoing.layout);
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Self {
            layout: incident.layout,
            port: add(&incident.port, &outgoing.port),
            node: add(&incident.node, &outgoing.node),
        }
    }

    /// Debug dump with columns `cell,face,component,z_port,z_node`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "cell,face,component,z_port,z_node")?;
        let l = self.layout;
        for cell in 0..l.cells {
            for face in 0..l.faces_per_cell {
                let r = l.slot_range(l.slot(cell, face));
                for (c, i) in r.enumerate() {
                    writeln!(out, "{cell},{face},{c},{:e},{:e}", self.port[i], self.node[i])?;
                }
            }
        }
        Ok(())
    }
}

/// Back-in-time sequence `[z]_μ = z(t − μτ)` of fixed depth.
///
/// Entries older than the recorded start read as zero, matching the
/// convention that every process vanishes at negative times.
#[derive(Debug, Clone)]
pub struct History {
    depth: usize,
    len: usize,
    entries: VecDeque<Vec<f64>>,
    zeros: Vec<f64>,
}

impl History {
    pub fn new(depth: usize, len: usize) -> Self {
        assert!(depth >= 1, "history depth must be at least 1");
        Self {
            depth,
            len,
            entries: VecDeque::with_capacity(depth),
            zeros: vec![0.0; len],
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Length of each stored state.
    pub fn state_len(&self) -> usize {
        self.len
    }

    /// Number of recorded states (at most `depth`).
    pub fn recorded(&self) -> usize {
        self.entries.len()
    }

    /// State `μ` steps back, or zero when that lies before the start.
    pub fn at(&self, mu: usize) -> &[f64] {
        self.entries.get(mu).map_or(&self.zeros, Vec::as_slice)
    }

    /// Records a new present state; the oldest falls off once full and is
    /// handed back so its allocation can be reused.
    pub fn push(&mut self, state: Vec<f64>) -> Option<Vec<f64>> {
        assert_eq!(state.len(), self.len, "history state length mismatch");
        let evicted = if self.entries.len() == self.depth {
            self.entries.pop_back()
        } else {
            None
        };
        self.entries.push_front(state);
        evicted
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Standalone accessor for `history_at`.
pub fn history_at(history: &History, mu: usize) -> &[f64] {
    history.at(mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Connection,
    Reflection,
}

/// Discrete process time. Ports switch at `kτ`, nodes at `(k + ½)τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessClock {
    pub step: u64,
    pub tau: f64,
    pub phase: Phase,
}

impl ProcessClock {
    pub fn new(tau: f64) -> Self {
        Self {
            step: 0,
            tau,
            phase: Phase::Connection,
        }
    }

    /// Time of the next connection phase.
    pub fn t(&self) -> f64 {
        self.step as f64 * self.tau
    }

    pub fn port_time(step: u64, tau: f64) -> f64 {
        step as f64 * tau
    }

    pub fn node_time(step: u64, tau: f64) -> f64 {
        (step as f64 + 0.5) * tau
    }
}
