//! Dispersion experiment: a temperature step imposed on one side of a
//! distorted square slab, the transient read at the opposite side and
//! compared with the analytic series for a slab heated at `x = 0` and
//! insulated at `x = L`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heat_model::{BoundaryCondition, HeatError, HeatModel, HeatSimulation};
use crate::mesh::{
    compute_geometry, load_mesh_file, validate_regular, CellTopology, Material, Mesh, MeshError, Vec3,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("generated mesh is invalid at cell {cell}: {message}")]
    Generation { cell: usize, message: String },
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error("time step {tau:e} fails the stability check; max spectral radius {max:.6} (cells {cells:?})")]
    Unstable {
        tau: f64,
        max: f64,
        cells: Vec<(usize, f64)>,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    #[serde(default = "one")]
    pub pitch: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Structured `nx × ny × nz` grid with every vertex moved by a seeded
/// random offset of length at most `amplitude`. Offsets normal to a
/// bounding plane are dropped for vertices on that plane, so the outer
/// shape stays a box.
pub fn generate_distorted_mesh(spec: &GridSpec, material: Material) -> Result<Mesh, HarnessError> {
    let GridSpec {
        nx,
        ny,
        nz,
        pitch,
        amplitude,
        seed,
    } = *spec;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(HarnessError::Config("grid dimensions must be positive".into()));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(HarnessError::Config(format!("pitch must be positive, got {pitch}")));
    }
    if !(amplitude >= 0.0 && amplitude < 0.5 * pitch) {
        return Err(HarnessError::Config(format!(
            "distortion amplitude {amplitude} must lie in [0, {})",
            0.5 * pitch
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [nx, ny, nz];
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let idx = [i, j, k];
                let mut offset = loop {
                    let v = Vec3::new(
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                    );
                    if v.norm_squared() <= 1.0 {
                        break v * amplitude;
                    }
                };
                for axis in 0..3 {
                    if idx[axis] == 0 || idx[axis] == dims[axis] {
                        offset[axis] = 0.0;
                    }
                }
                vertices.push(Vec3::new(i as f64, j as f64, k as f64) * pitch + offset);
            }
        }
    }
    let mut cells = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells.push(CellTopology {
                    vertex_ids: std::array::from_fn(|v| id(i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))),
                    material: "slab".into(),
                });
            }
        }
    }
    let mesh = Mesh::new(vertices, cells, [("slab".to_string(), material)].into())?;
    for cell in 0..mesh.num_cells() {
        compute_geometry(&mesh, cell).map_err(|e| HarnessError::Generation {
            cell,
            message: e.to_string(),
        })?;
    }
    Ok(mesh)
}

/// Temperature of a slab `0 ≤ x ≤ L` that starts at zero and has `T₀`
/// imposed at `x = 0` from `t = 0` on, with `x = L` insulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabOracle {
    pub length: f64,
    pub diffusivity: f64,
    pub amplitude: f64,
    pub max_terms: usize,
}

impl SlabOracle {
    pub fn new(length: f64, diffusivity: f64, amplitude: f64) -> Self {
        Self {
            length,
            diffusivity,
            amplitude,
            max_terms: 1_000_000,
        }
    }

    pub fn temperature(&self, x: f64, t: f64) -> f64 {
        analytic_slab_temperature(self, x, t)
    }
}

/// Fourier series of the slab solution, truncated once a term's bound
/// drops below `1e-12 · T₀`.
pub fn analytic_slab_temperature(oracle: &SlabOracle, x: f64, t: f64) -> f64 {
    let SlabOracle {
        length,
        diffusivity,
        amplitude,
        max_terms,
    } = *oracle;
    if t <= 0.0 {
        return if x <= 0.0 { amplitude } else { 0.0 };
    }
    let mut sum = 0.0;
    for n in 0..max_terms {
        let m = (2 * n + 1) as f64;
        let k = m * std::f64::consts::PI / (2.0 * length);
        let bound = 4.0 / (m * std::f64::consts::PI) * (-diffusivity * k * k * t).exp();
        if bound < 1e-12 {
            break;
        }
        sum += bound * (k * x).sin();
    }
    amplitude * (1.0 - sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn axis(self) -> usize {
        match self {
            Direction::Horizontal => 0,
            Direction::Vertical => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSource {
    Generate(GridSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeStep {
    Fixed(f64),
    Named(AutoStep),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoStep {
    Auto,
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Named(AutoStep::Auto)
    }
}

/// Experiment configuration, read from JSON. All quantities in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mesh")]
    pub mesh: MeshSource,
    /// Material of generated meshes; file meshes carry their own.
    #[serde(default = "default_material")]
    pub material: Material,
    #[serde(default)]
    pub tau: TimeStep,
    /// Steps per direction; by default the end of the error window.
    #[serde(default)]
    pub n_steps: Option<u64>,
    #[serde(default = "default_directions")]
    pub directions: Vec<Direction>,
    #[serde(default = "one")]
    pub step_amplitude: f64,
    /// Error window in units of `L²/α`.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Write every n-th step to the CSV.
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
}

fn default_mesh() -> MeshSource {
    MeshSource::Generate(GridSpec {
        nx: 20,
        ny: 20,
        nz: 1,
        pitch: 1.0,
        amplitude: 0.3,
        seed: 1,
    })
}

fn default_material() -> Material {
    Material::new(1.0, 1.0)
}

fn default_directions() -> Vec<Direction> {
    vec![Direction::Horizontal, Direction::Vertical]
}

fn default_window() -> [f64; 2] {
    [0.1, 3.0]
}

fn default_tolerance() -> f64 {
    0.02
}

fn default_sample_every() -> u64 {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        // relative mesh paths are taken from the config's directory
        if let MeshSource::File(p) = &mut config.mesh {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let TimeStep::Fixed(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tau must be positive, got {t}"));
            }
        }
        if !self.material.is_valid() {
            return bad("material constants must be positive".into());
        }
        if self.directions.is_empty() {
            return bad("no directions selected".into());
        }
        if !(self.window[0] >= 0.0 && self.window[1] > self.window[0]) {
            return bad(format!("invalid window {:?}", self.window));
        }
        if !self.step_amplitude.is_finite() {
            return bad("step amplitude must be finite".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh, HarnessError> {
        let mesh = match &self.mesh {
            MeshSource::Generate(spec) => generate_distorted_mesh(spec, self.material)?,
            MeshSource::File(path) => load_mesh_file(path)?,
        };
        let report = validate_regular(&mesh);
        if !report.is_ok() {
            return Err(HarnessError::Config(format!("mesh is not regular: {report}")));
        }
        Ok(mesh)
    }
}

/// Slab geometry along one axis of a mesh's bounding box.
#[derive(Debug, Clone)]
pub struct SlabSetup {
    pub low: f64,
    pub length: f64,
    /// Boundary links on the low plane.
    pub heated: Vec<usize>,
    /// Cells touching the high plane.
    pub probe_cells: Vec<usize>,
    /// Mean node coordinate of the probe cells, measured from the low plane.
    pub probe_position: f64,
}

pub fn slab_setup(mesh: &Mesh, model: &HeatModel, axis: usize) -> Result<SlabSetup, HarnessError> {
    let (low, high) = mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[axis]), hi.max(v[axis])));
    let length = high - low;
    let tol = 1e-9 * length;
    let mut heated = Vec::new();
    let mut probe_cells = Vec::new();
    for (id, slot) in model.boundary_links() {
        let c = model.geometry(slot.cell).face_centres[slot.face][axis];
        if (c - low).abs() <= tol {
            heated.push(id);
        } else if (c - high).abs() <= tol {
            probe_cells.push(slot.cell);
        }
    }
    probe_cells.sort_unstable();
    probe_cells.dedup();
    if heated.is_empty() || probe_cells.is_empty() {
        return Err(HarnessError::Config(format!(
            "mesh has no boundary faces on both bounding planes of axis {axis}"
        )));
    }
    let probe_position = probe_cells
        .iter()
        .map(|&c| model.geometry(c).node_position[axis] - low)
        .sum::<f64>()
        / probe_cells.len() as f64;
    Ok(SlabSetup {
        low,
        length,
        heated,
        probe_cells,
        probe_position,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub simulated: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionReport {
    pub direction: Direction,
    pub tau: f64,
    pub steps: u64,
    pub max_spectral_radius: f64,
    pub length: f64,
    pub diffusivity: f64,
    pub samples: Vec<Sample>,
    pub window: [f64; 2],
    /// `max |T_dsc − T_analytic| / max |T_analytic|` over the window.
    pub max_rel_error: f64,
}

impl DirectionReport {
    fn scale(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.t >= self.window[0] && s.t <= self.window[1])
            .map(|s| s.analytic.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    pub directions: Vec<DirectionReport>,
    pub tolerance: f64,
}

impl DispersionReport {
    pub fn passes(&self) -> bool {
        self.directions.iter().all(|d| d.max_rel_error <= self.tolerance)
    }

    /// CSV rows `t,probe,T_dsc,T_analytic,rel_error`, every `every`-th step.
    pub fn write_csv(&self, mut out: impl Write, every: u64) -> std::io::Result<()> {
        writeln!(out, "t,probe,T_dsc,T_analytic,rel_error")?;
        for d in &self.directions {
            let scale = d.scale();
            for s in d.samples.iter().step_by(every.max(1) as usize) {
                let diff = (s.simulated - s.analytic).abs();
                let rel = if scale > 0.0 { diff / scale } else { diff };
                writeln!(
                    out,
                    "{:e},{},{:e},{:e},{:e}",
                    s.t, d.direction, s.simulated, s.analytic, rel
                )?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for DispersionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.directions {
            writeln!(
                f,
                "{}: L = {}, tau = {:e}, steps = {}, max spectral radius = {:.6}, max relative error = {:.4e}",
                d.direction, d.length, d.tau, d.steps, d.max_spectral_radius, d.max_rel_error
            )?;
        }
        writeln!(
            f,
            "{} (tolerance {})",
            if self.passes() { "PASS" } else { "FAIL" },
            self.tolerance
        )
    }
}

/// Builds the heat model of `mesh` for the configured time step and checks
/// it against the stability gate.
pub fn stable_model(mesh: &Mesh, tau: TimeStep) -> Result<(HeatModel, f64), HarnessError> {
    let mut model = HeatModel::with_default_step(mesh)?;
    if let TimeStep::Fixed(t) = tau {
        model.set_tau(t)?;
    }
    let report = model.stability_report()?;
    if !report.passes() {
        return Err(HarnessError::Unstable {
            tau: model.tau(),
            max: report.max(),
            cells: report.offending().into_iter().map(|c| (c, report.radii[c])).collect(),
        });
    }
    Ok((model, report.max()))
}

fn uniform_material(mesh: &Mesh) -> Result<Material, HarnessError> {
    let first = mesh.material_of(0);
    if (1..mesh.num_cells()).any(|c| mesh.material_of(c) != first) {
        return Err(HarnessError::Config("the slab experiment needs a single material".into()));
    }
    Ok(first)
}

/// Runs one propagation direction on `mesh`.
pub fn run_direction(
    mesh: &Mesh,
    config: &ExperimentConfig,
    direction: Direction,
) -> Result<DirectionReport, HarnessError> {
    let material = uniform_material(mesh)?;
    let (mut model, max_spectral_radius) = stable_model(mesh, config.tau)?;
    let setup = slab_setup(mesh, &model, direction.axis())?;
    let fixed = BoundaryCondition::FixedTemperature {
        value: config.step_amplitude,
        onset: 0.0,
    };
    for &link in &setup.heated {
        model.set_boundary(link, fixed)?;
    }
    let tau = model.tau();
    let alpha = material.diffusivity();
    let t_char = setup.length * setup.length / alpha;
    let window = [config.window[0] * t_char, config.window[1] * t_char];
    let steps = config.n_steps.unwrap_or_else(|| (window[1] / tau).ceil() as u64 + 1);
    let oracle = SlabOracle::new(setup.length, alpha, config.step_amplitude);

    let mut sim = HeatSimulation::new(model)?;
    let mut samples = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        sim.step()?;
        let temps = sim.temperatures();
        let simulated = setup.probe_cells.iter().map(|&c| temps[c]).sum::<f64>() / setup.probe_cells.len() as f64;
        let t = sim.node_time();
        samples.push(Sample {
            t,
            simulated,
            analytic: oracle.temperature(setup.probe_position, t),
        });
    }

    let mut report = DirectionReport {
        direction,
        tau,
        steps,
        max_spectral_radius,
        length: setup.length,
        diffusivity: alpha,
        samples,
        window,
        max_rel_error: 0.0,
    };
    let scale = report.scale();
    let max_diff = report
        .samples
        .iter()
        .filter(|s| s.t >= window[0] && s.t <= window[1])
        .map(|s| (s.simulated - s.analytic).abs())
        .fold(0.0, f64::max);
    report.max_rel_error = if scale > 0.0 { max_diff / scale } else { max_diff };
    Ok(report)
}

/// Runs every configured direction and writes the CSV if requested.
pub fn run_dispersion_test(config: &ExperimentConfig) -> Result<DispersionReport, HarnessError> {
    config.check()?;
    let mesh = config.build_mesh()?;
    let directions = config
        .directions
        .iter()
        .map(|&d| run_direction(&mesh, config, d))
        .collect::<Result<Vec<_>, _>>()?;
    let report = DispersionReport {
        directions,
        tolerance: config.tolerance,
    };
    if let Some(path) = &config.output {
        let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        report
            .write_csv(std::io::BufWriter::new(file), config.sample_every)
            .map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
    }
    Ok(report)
}
