//! Reflection propagators for linear model equations
//!
//! ```text
//! Σ_μ φ_μ z^n(t + τ/2 − μτ) + ψ_μ z^p(t − μτ) = 0
//! ```
//!
//! solved for the outgoing node state by the general recursion, the
//! first-order closed form `K, L, M, N`, its deflected block form, gauge
//! transformations, and the deflection correction for perturbed equations.
//!
//! Node and port blocks have the same dimension; `nb` is carried as an
//! explicit matrix (identity when the caller already stores port states
//! relabelled onto the node layout, as the engine does).

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView, Schur};
use thiserror::Error;

use crate::engine::{MapError, PhaseContext, ReflectionMap};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model has no coefficients")]
    Empty,
    #[error("{name}_{mu} in coefficient set {set} is {rows}x{cols}, expected {dim}x{dim}")]
    Shape {
        name: &'static str,
        mu: usize,
        set: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("φ_0 of coefficient set {set} is singular")]
    SingularPhi0 { set: usize },
    #[error("closed form needs a time-independent model of order at most 1 (order {order}, {period} coefficient sets)")]
    NotFirstOrder { order: usize, period: usize },
    #[error("gauge matrix is singular or has the wrong shape")]
    SingularGauge,
}

/// Coefficients `φ_0..φ_order`, `ψ_0..ψ_order` valid at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub phi: Vec<Matrix>,
    pub psi: Vec<Matrix>,
}

impl Coefficients {
    pub fn first_order(phi0: Matrix, phi1: Matrix, psi0: Matrix) -> Self {
        Self {
            phi: vec![phi0, phi1],
            psi: vec![psi0],
        }
    }
}

/// Precomputed recursion weights of one coefficient set:
/// `z_out(t) = Σ_μ A_μ z_in(t − μτ) + B_μ z_out(t − τ − μτ)`.
#[derive(Debug, Clone)]
struct Recursion {
    a: Vec<Matrix>,
    b: Vec<Matrix>,
}

/// Linear model equations of finite order, possibly with periodically
/// repeating time-dependent coefficients.
#[derive(Debug, Clone)]
pub struct LinearModel {
    dim: usize,
    order: usize,
    sets: Vec<Coefficients>,
    nb: Matrix,
    recursions: Vec<Recursion>,
}

impl LinearModel {
    /// Time-independent model.
    pub fn new(phi: Vec<Matrix>, psi: Vec<Matrix>) -> Result<Self, ModelError> {
        Self::time_dependent(vec![Coefficients { phi, psi }])
    }

    pub fn first_order(phi0: Matrix, phi1: Matrix, psi0: Matrix) -> Result<Self, ModelError> {
        Self::new(vec![phi0, phi1], vec![psi0])
    }

    /// Model whose coefficient set at step `k` is `sets[k % sets.len()]`.
    pub fn time_dependent(sets: Vec<Coefficients>) -> Result<Self, ModelError> {
        let dim = sets
            .first()
            .and_then(|s| s.phi.first())
            .ok_or(ModelError::Empty)?
            .nrows();
        let order = sets
            .iter()
            .map(|s| s.phi.len().max(s.psi.len()).saturating_sub(1))
            .max()
            .unwrap_or(0);
        let mut model = Self {
            dim,
            order,
            sets,
            nb: Matrix::identity(dim, dim),
            recursions: Vec::new(),
        };
        model.check_shapes()?;
        model.rebuild()?;
        Ok(model)
    }

    /// Uses an explicit node-boundary matrix in place of the identity.
    pub fn with_nb(mut self, nb: Matrix) -> Result<Self, ModelError> {
        if nb.shape() != (self.dim, self.dim) {
            return Err(ModelError::Shape {
                name: "nb",
                mu: 0,
                set: 0,
                rows: nb.nrows(),
                cols: nb.ncols(),
                dim: self.dim,
            });
        }
        self.nb = nb;
        self.rebuild()?;
        Ok(self)
    }

    fn check_shapes(&self) -> Result<(), ModelError> {
        for (set, c) in self.sets.iter().enumerate() {
            if c.phi.is_empty() {
                return Err(ModelError::Empty);
            }
            let named = c.phi.iter().map(|m| ("φ", m)).enumerate();
            let named = named.chain(c.psi.iter().map(|m| ("ψ", m)).enumerate());
            for (mu, (name, m)) in named {
                if m.shape() != (self.dim, self.dim) {
                    return Err(ModelError::Shape {
                        name,
                        mu,
                        set,
                        rows: m.nrows(),
                        cols: m.ncols(),
                        dim: self.dim,
                    });
                }
            }
        }
        Ok(())
    }

    fn rebuild(&mut self) -> Result<(), ModelError> {
        let zero = Matrix::zeros(self.dim, self.dim);
        self.recursions = Vec::with_capacity(self.sets.len());
        for (set, c) in self.sets.iter().enumerate() {
            let inv = c.phi[0]
                .clone()
                .try_inverse()
                .filter(|m| m.iter().all(|x| x.is_finite()))
                .ok_or(ModelError::SingularPhi0 { set })?;
            let phi = |mu: usize| c.phi.get(mu).unwrap_or(&zero);
            let psi = |mu: usize| c.psi.get(mu).unwrap_or(&zero);
            let a = (0..=self.order)
                .map(|mu| -&inv * (phi(mu) + psi(mu) * &self.nb))
                .collect();
            let b = (0..=self.order)
                .map(|mu| -&inv * (phi(mu + 1) + psi(mu) * &self.nb))
                .collect();
            self.recursions.push(Recursion { a, b });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_time_dependent(&self) -> bool {
        self.sets.len() > 1
    }

    pub fn nb(&self) -> &Matrix {
        &self.nb
    }

    pub fn coefficients(&self, step: u64) -> &Coefficients {
        &self.sets[(step % self.sets.len() as u64) as usize]
    }

    /// `φ_μ` at `step` (zero beyond the order).
    pub fn phi(&self, step: u64, mu: usize) -> Matrix {
        self.coefficients(step)
            .phi
            .get(mu)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.dim, self.dim))
    }

    pub fn psi(&self, step: u64, mu: usize) -> Matrix {
        self.coefficients(step)
            .psi
            .get(mu)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.dim, self.dim))
    }

    /// Outgoing node state from the general recursion.
    ///
    /// `incident[μ] = z_in^n(t − μτ)` and `outgoing[μ] = z_out^n(t − τ − μτ)`;
    /// missing entries count as zero (times before the start).
    pub fn reflect_recursive(&self, step: u64, incident: &[&[f64]], outgoing: &[&[f64]], out: &mut [f64]) {
        let r = &self.recursions[(step % self.recursions.len() as u64) as usize];
        let mut acc = Vector::zeros(self.dim);
        for mu in 0..=self.order {
            if let Some(z) = incident.get(mu) {
                acc.gemv(1.0, &r.a[mu], &DVectorView::from_slice(z, self.dim), 1.0);
            }
            if let Some(z) = outgoing.get(mu) {
                acc.gemv(1.0, &r.b[mu], &DVectorView::from_slice(z, self.dim), 1.0);
            }
        }
        out.copy_from_slice(acc.as_slice());
    }

    /// Left-hand side of the model equations at step `step`, given
    /// `node[μ] = z^n(t + τ/2 − μτ)` and `port[μ] = z^p(t − μτ)`.
    pub fn residual(&self, step: u64, node: &[&[f64]], port: &[&[f64]]) -> Vector {
        let c = self.coefficients(step);
        let mut r = Vector::zeros(self.dim);
        for (m, z) in c.phi.iter().zip(node) {
            r.gemv(1.0, m, &DVectorView::from_slice(z, self.dim), 1.0);
        }
        for (m, z) in c.psi.iter().zip(port) {
            r.gemv(1.0, m, &DVectorView::from_slice(z, self.dim), 1.0);
        }
        r
    }
}

/// Standalone single-block reflection process driven by an incident
/// sequence, one call per time step.
#[derive(Debug, Clone)]
pub struct RecursiveProcess {
    model: Arc<LinearModel>,
    step: u64,
    incident: VecDeque<Vector>,
    outgoing: VecDeque<Vector>,
}

impl RecursiveProcess {
    pub fn new(model: Arc<LinearModel>) -> Self {
        Self {
            model,
            step: 0,
            incident: VecDeque::new(),
            outgoing: VecDeque::new(),
        }
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    /// Feeds `z_in^n(t)` and returns `z_out^n(t)`.
    pub fn push(&mut self, z_in: Vector) -> Vector {
        let keep = self.model.order() + 1;
        self.incident.push_front(z_in);
        self.incident.truncate(keep);
        let inc: Vec<&[f64]> = self.incident.iter().map(|v| v.as_slice()).collect();
        let out: Vec<&[f64]> = self.outgoing.iter().map(|v| v.as_slice()).collect();
        let mut z = Vector::zeros(self.model.dim());
        self.model.reflect_recursive(self.step, &inc, &out, z.as_mut_slice());
        self.outgoing.push_front(z.clone());
        self.outgoing.truncate(keep);
        self.step += 1;
        z
    }
}

/// First-order propagator matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Klmn {
    pub k: Matrix,
    pub l: Matrix,
    pub m: Matrix,
    pub n: Matrix,
}

/// Closed-form propagator of a time-independent model of order ≤ 1.
pub fn klmn(model: &LinearModel) -> Result<Klmn, ModelError> {
    if model.order() > 1 || model.is_time_dependent() {
        return Err(ModelError::NotFirstOrder {
            order: model.order(),
            period: model.sets.len(),
        });
    }
    let phi0 = model.phi(0, 0);
    let phi1 = model.phi(0, 1);
    let psi0 = model.psi(0, 0);
    let inv = phi0.clone().try_inverse().ok_or(ModelError::SingularPhi0 { set: 0 })?;
    let dim = model.dim();
    let psi_nb = &psi0 * model.nb();
    let k = -Matrix::identity(dim, dim) - &inv * &psi_nb;
    let l = -&inv;
    let coupling = &phi1 + &psi_nb;
    let m = &phi1 + &coupling * &k;
    let n = -(&coupling * &inv);
    Ok(Klmn { k, l, m, n })
}

/// Deflected block form
/// `(z_out, d) = [[K, L], [M, N]] · (z_in, d_prev)`.
pub fn deflected_step(p: &Klmn, z_in: &Vector, d_prev: &Vector) -> (Vector, Vector) {
    let z_out = &p.k * z_in + &p.l * d_prev;
    let d = &p.m * z_in + &p.n * d_prev;
    (z_out, d)
}

/// Deflected propagator with its state `d` (zero before the start).
#[derive(Debug, Clone)]
pub struct DeflectedProcess {
    pub propagator: Klmn,
    d: Vector,
}

impl DeflectedProcess {
    pub fn new(propagator: Klmn) -> Self {
        let dim = propagator.n.nrows();
        Self {
            propagator,
            d: Vector::zeros(dim),
        }
    }

    pub fn deflection(&self) -> &Vector {
        &self.d
    }

    pub fn push(&mut self, z_in: &Vector) -> Vector {
        let (z_out, d) = deflected_step(&self.propagator, z_in, &self.d);
        self.d = d;
        z_out
    }
}

/// Convolution series `K z_in(t) + L Σ_{ν≥1} N^{ν−1} M z_in(t − ντ)` for
/// every step of `inputs`.
pub fn series_response(p: &Klmn, inputs: &[Vector]) -> Vec<Vector> {
    let mut kernel = vec![p.m.clone()];
    for nu in 1..inputs.len() {
        let next = &p.n * &kernel[nu - 1];
        kernel.push(next);
    }
    (0..inputs.len())
        .map(|t| {
            let mut acc = &p.k * &inputs[t];
            for nu in 1..=t {
                acc += &p.l * (&kernel[nu - 1] * &inputs[t - nu]);
            }
            acc
        })
        .collect()
}

/// `L I⁻¹, I M, I N I⁻¹` with `K` unchanged.
pub fn gauge_transform(p: &Klmn, gauge: &Matrix) -> Result<Klmn, ModelError> {
    if gauge.shape() != p.n.shape() {
        return Err(ModelError::SingularGauge);
    }
    let inv = gauge.clone().try_inverse().ok_or(ModelError::SingularGauge)?;
    Ok(Klmn {
        k: p.k.clone(),
        l: &p.l * &inv,
        m: gauge * &p.m,
        n: gauge * &p.n * &inv,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge in {iterations} iterations (power-iteration residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Largest eigenvalue modulus.
pub fn stability_norm(n: &Matrix) -> Result<f64, EigenError> {
    if !n.is_square() {
        return Err(EigenError::NotSquare {
            rows: n.nrows(),
            cols: n.ncols(),
        });
    }
    if n.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    if n.is_empty() {
        return Ok(0.0);
    }
    match Schur::try_new(n.clone(), EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS) {
        Some(schur) => Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)),
        None => {
            let mut v = Vector::from_element(n.nrows(), 1.0).normalize();
            let mut lambda = 0.0;
            for _ in 0..EIGEN_MAX_ITERATIONS {
                let w = n * &v;
                lambda = w.norm();
                if lambda == 0.0 {
                    break;
                }
                v = w / lambda;
            }
            let residual = (n * &v - &v * lambda).norm();
            Err(EigenError::NoConvergence {
                iterations: EIGEN_MAX_ITERATIONS,
                residual,
            })
        }
    }
}

/// Per-block spectral radii checked against 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub radii: Vec<f64>,
}

impl StabilityReport {
    pub fn max(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.radii.iter().all(|&r| r < 1.0)
    }

    /// Indices whose radius is not below 1.
    pub fn offending(&self) -> Vec<usize> {
        (0..self.radii.len()).filter(|&i| !(self.radii[i] < 1.0)).collect()
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cell,spectral_radius")?;
        for (i, r) in self.radii.iter().enumerate() {
            writeln!(f, "{i},{r:.12}")?;
        }
        writeln!(f, "max {:.12}", self.max())?;
        writeln!(f, "{}", if self.passes() { "PASS" } else { "FAIL" })
    }
}

/// Deflection `D` of a perturbed model: the correction to add to the
/// unperturbed reflection when the equations gain a causal term `𝒥`.
#[derive(Debug, Clone)]
pub struct Deflection {
    model: Arc<LinearModel>,
    step: u64,
    history: VecDeque<Vector>,
}

impl Deflection {
    pub fn new(model: Arc<LinearModel>) -> Self {
        Self {
            model,
            step: 0,
            history: VecDeque::new(),
        }
    }

    /// `D(t + τ/2) = −φ_0⁻¹ { 𝒥_t + Σ_μ (φ_{μ+1} + ψ_μ nb) D(t − τ/2 − μτ) }`.
    pub fn update(&mut self, perturbation: &Vector) -> Vector {
        let r = &self.model.recursions[(self.step % self.model.recursions.len() as u64) as usize];
        let c = self.model.coefficients(self.step);
        let inv = c.phi[0].clone().try_inverse().expect("checked at construction");
        let mut d = -&inv * perturbation;
        for (mu, past) in self.history.iter().enumerate() {
            d += &r.b[mu] * past;
        }
        self.history.push_front(d.clone());
        self.history.truncate(self.model.order() + 1);
        self.step += 1;
        d
    }
}

/// Past totals visible to a perturbation at port time `t`:
/// `node(μ) = z^n(t − τ/2 − μτ)`, `port(μ) = z^p(t − μτ)`.
pub struct TotalsView<'a> {
    node: &'a VecDeque<Vector>,
    port: &'a VecDeque<Vector>,
    zero: Vector,
}

impl TotalsView<'_> {
    pub fn node(&self, mu: usize) -> &Vector {
        self.node.get(mu).unwrap_or(&self.zero)
    }

    pub fn port(&self, mu: usize) -> &Vector {
        self.port.get(mu).unwrap_or(&self.zero)
    }
}

/// Reflection of a perturbed model computed as unperturbed reflection
/// plus deflection.
pub struct PerturbedProcess<F> {
    unperturbed: RecursiveProcess,
    deflection: Deflection,
    perturbation: F,
    last_out: Vector,
    node: VecDeque<Vector>,
    port: VecDeque<Vector>,
    depth: usize,
}

impl<F: FnMut(&TotalsView<'_>) -> Vector> PerturbedProcess<F> {
    /// `depth` bounds how far back the perturbation may look.
    pub fn new(model: Arc<LinearModel>, perturbation: F, depth: usize) -> Self {
        let dim = model.dim();
        Self {
            unperturbed: RecursiveProcess::new(model.clone()),
            deflection: Deflection::new(model),
            perturbation,
            last_out: Vector::zeros(dim),
            node: VecDeque::new(),
            port: VecDeque::new(),
            depth: depth.max(1),
        }
    }

    /// Feeds `z_in^n(t + τ/2)` and returns the perturbed `z_out^n(t + τ/2)`.
    pub fn push(&mut self, z_in: Vector) -> Vector {
        let model = self.unperturbed.model();
        let port = model.nb() * (&z_in + &self.last_out);
        self.port.push_front(port);
        self.port.truncate(self.depth);
        let view = TotalsView {
            node: &self.node,
            port: &self.port,
            zero: Vector::zeros(model.dim()),
        };
        let j = (self.perturbation)(&view);
        let d = self.deflection.update(&j);
        let w = self.unperturbed.push(z_in.clone());
        let out = w + d;
        self.node.push_front(&z_in + &out);
        self.node.truncate(self.depth);
        self.last_out = out.clone();
        out
    }
}

/// Engine reflection map applying a linear model per cell; the cell's slot
/// block is the model's state vector.
#[derive(Debug, Clone)]
pub struct LinearReflection {
    models: Vec<Arc<LinearModel>>,
}

impl LinearReflection {
    pub fn new(models: Vec<Arc<LinearModel>>) -> Self {
        Self { models }
    }

    pub fn uniform(model: LinearModel, cells: usize) -> Self {
        Self::new(vec![Arc::new(model); cells])
    }

    pub fn model(&self, cell: usize) -> &LinearModel {
        &self.models[cell]
    }

    /// History depth the engine must keep.
    pub fn depth(&self) -> usize {
        self.models.iter().map(|m| m.order() + 1).max().unwrap_or(1)
    }
}

impl ReflectionMap for LinearReflection {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let model = &self.models[cell];
        if model.dim() != out.len() {
            return Err(MapError::new(format!(
                "model dimension {} does not match cell block {}",
                model.dim(),
                out.len()
            )));
        }
        let keep = model.order() + 1;
        let incident: Vec<&[f64]> = (0..keep).map(|mu| ctx.incident_cell(mu, cell)).collect();
        let outgoing: Vec<&[f64]> = (0..keep).map(|mu| ctx.outgoing_cell(mu, cell)).collect();
        model.reflect_recursive(ctx.step, &incident, &outgoing, out);
        Ok(())
    }
}
