//! Spectral distance on discretised surfaces.
//!
//! A [`SurfaceMesh`] samples a two-dimensional model on a regular chart grid
//! (periodic on the torus, latitude rows offset from the poles on the
//! sphere). The Dirac pair is assembled with central differences, and the
//! supremum defining the distance is computed either on the edge graph or by
//! an upwind sweeping projection onto the per-vertex gradient constraints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, CVector, FiberAlgebra, FockBasis, C64};
use crate::geometry::{GeometryModel, ModelKind};
use crate::unrep::{defining_cartan, r_q, r_q_matrix};

/// Tolerance on the sweeping update.
pub const SWEEP_TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiracVariant {
    /// `Σ e_j·∇_{e_j}`
    Metric,
    /// `−Σ (Je_j)·∇_{e_j}`
    Symplectic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central,
    /// Godunov upwind gradient, the discretisation used by the sweeping solver.
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    LipschitzGraph,
    ProjectedAscent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Torus { lx: f64, ly: f64 },
    Sphere { radius: f64 },
}

/// One neighbour of a vertex along a chart direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub vertex: usize,
    /// Signed chart offset to the neighbour along the direction.
    pub offset: f64,
    /// Whether the step crosses a pole, where the frame turns by `π`.
    pub across_pole: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// Regular chart grid with frames and connection values at every vertex.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    shape: Shape,
    rows: usize,
    cols: usize,
    spacing: [f64; 2],
    vertices: Vec<[f64; 2]>,
    frames: Vec<DMatrix<f64>>,
    connection: Vec<[DMatrix<f64>; 2]>,
    edges: Vec<Edge>,
}

impl SurfaceMesh {
    /// `resolution × resolution` periodic grid on a torus, or
    /// `resolution × 2·resolution` offset latitude grid on a sphere.
    pub fn new(model: &GeometryModel, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!("mesh resolution {resolution}")));
        }
        let base = match model.kind() {
            ModelKind::SampledGrid { base } => base.as_ref(),
            k => k,
        };
        let (shape, rows, cols) = match base {
            ModelKind::FlatTorus { periods } | ModelKind::TwistedFlat { periods, .. }
                if periods.len() == 2 =>
            {
                (
                    Shape::Torus {
                        lx: periods[0],
                        ly: periods[1],
                    },
                    resolution,
                    resolution,
                )
            }
            ModelKind::RoundSphere { radius } => {
                (Shape::Sphere { radius: *radius }, resolution, 2 * resolution)
            }
            _ => {
                return Err(Error::UnsupportedModel(format!(
                    "{} is not a surface with a mesh policy",
                    model.name()
                )))
            }
        };
        let spacing = match shape {
            Shape::Torus { lx, ly } => [lx / rows as f64, ly / cols as f64],
            Shape::Sphere { .. } => [PI / rows as f64, 2.0 * PI / cols as f64],
        };
        let mut vertices = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let x = match shape {
                    Shape::Torus { .. } => i as f64 * spacing[0],
                    Shape::Sphere { .. } => (i as f64 + 0.5) * spacing[0],
                };
                vertices.push([x, j as f64 * spacing[1]]);
            }
        }
        let frames = vertices.iter().map(|v| model.frame(v)).collect();
        let connection = vertices
            .iter()
            .map(|v| [model.connection(v, 0), model.connection(v, 1)])
            .collect();
        let mut mesh = Self {
            shape,
            rows,
            cols,
            spacing,
            vertices,
            frames,
            connection,
            edges: Vec::new(),
        };
        mesh.edges = mesh.build_edges();
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Chart spacing `(h_0, h_1)`.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn frame(&self, v: usize) -> &DMatrix<f64> {
        &self.frames[v]
    }

    pub fn connection(&self, v: usize, mu: usize) -> &DMatrix<f64> {
        &self.connection[v][mu]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.shape, Shape::Sphere { .. })
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    /// Neighbours of `v` along chart direction `mu`: `(minus, plus)`.
    pub fn neighbors(&self, v: usize, mu: usize) -> (Neighbor, Neighbor) {
        let (i, j) = (v / self.cols, v % self.cols);
        let h = self.spacing[mu];
        if mu == 1 {
            let jm = (j + self.cols - 1) % self.cols;
            let jp = (j + 1) % self.cols;
            return (
                Neighbor {
                    vertex: self.index(i, jm),
                    offset: -h,
                    across_pole: false,
                },
                Neighbor {
                    vertex: self.index(i, jp),
                    offset: h,
                    across_pole: false,
                },
            );
        }
        let step = |di: isize| -> Neighbor {
            let ii = i as isize + di;
            match self.shape {
                Shape::Torus { .. } => Neighbor {
                    vertex: self.index(ii.rem_euclid(self.rows as isize) as usize, j),
                    offset: di as f64 * h,
                    across_pole: false,
                },
                Shape::Sphere { .. } => {
                    if ii < 0 || ii >= self.rows as isize {
                        Neighbor {
                            vertex: self.index(i, (j + self.cols / 2) % self.cols),
                            offset: di as f64 * h,
                            across_pole: true,
                        }
                    } else {
                        Neighbor {
                            vertex: self.index(ii as usize, j),
                            offset: di as f64 * h,
                            across_pole: false,
                        }
                    }
                }
            }
        };
        (step(-1), step(1))
    }

    /// Metric length of a unit chart step along `mu` at vertex `v`.
    fn scale(&self, v: usize, mu: usize) -> f64 {
        match self.shape {
            Shape::Torus { .. } => 1.0,
            Shape::Sphere { radius } => {
                if mu == 0 {
                    radius
                } else {
                    radius * self.vertices[v][0].sin()
                }
            }
        }
    }

    fn build_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::with_capacity(2 * self.len());
        for v in 0..self.len() {
            for mu in 0..2 {
                let (_, plus) = self.neighbors(v, mu);
                edges.push(Edge {
                    from: v,
                    to: plus.vertex,
                    length: self.spacing[mu] * self.scale(v, mu),
                });
            }
            // the minus-side pole crossing has no plus-side partner
            if self.is_sphere() && v / self.cols == 0 && v % self.cols < self.cols / 2 {
                edges.push(Edge {
                    from: v,
                    to: self.neighbors(v, 0).0.vertex,
                    length: self.spacing[0] * self.scale(v, 0),
                });
            }
        }
        edges
    }

    /// Vertex closest to the chart point `x` in chart coordinates.
    pub fn nearest_vertex(&self, x: &[f64]) -> Result<usize> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "{}-component point on a surface",
                x.len()
            )));
        }
        let (p0, p1) = match self.shape {
            Shape::Torus { lx, ly } => (lx, ly),
            Shape::Sphere { .. } => (f64::INFINITY, 2.0 * PI),
        };
        let wrap = |d: f64, p: f64| {
            if p.is_finite() {
                let r = d.rem_euclid(p);
                r.min(p - r)
            } else {
                d.abs()
            }
        };
        let mut best = (f64::INFINITY, 0);
        for (k, v) in self.vertices.iter().enumerate() {
            let d = wrap(v[0] - x[0], p0).powi(2) + wrap(v[1] - x[1], p1).powi(2);
            if d < best.0 {
                best = (d, k);
            }
        }
        Ok(best.1)
    }
}

/// Real function on the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(mesh: &SurfaceMesh, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        Self {
            values: mesh.vertices().iter().map(f).collect(),
        }
    }
}

/// Fiber vector at every vertex.
#[derive(Debug, Clone)]
pub struct SpinorSection {
    basis: Arc<FockBasis>,
    values: Vec<CVector>,
}

impl SpinorSection {
    pub fn new(basis: Arc<FockBasis>, values: Vec<CVector>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| v.len() != basis.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "fiber vector of length {} in a basis of dimension {}",
                v.len(),
                basis.dim()
            )));
        }
        if values
            .iter()
            .any(|v| v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()))
        {
            return Err(Error::InvalidArgument("non-finite section value".into()));
        }
        Ok(Self { basis, values })
    }

    pub fn zero(mesh: &SurfaceMesh, basis: &Arc<FockBasis>) -> Self {
        Self {
            basis: basis.clone(),
            values: vec![CVector::zeros(basis.dim()); mesh.len()],
        }
    }

    /// Level-0 section with constant fiber norm `‖φ₀‖² = norm_sq`.
    pub fn ground(mesh: &SurfaceMesh, basis: &Arc<FockBasis>, norm_sq: f64) -> Self {
        let mut v = CVector::zeros(basis.dim());
        v[0] = C64::new(norm_sq.sqrt(), 0.0);
        Self {
            basis: basis.clone(),
            values: vec![v; mesh.len()],
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    pub fn at(&self, v: usize) -> &CVector {
        &self.values[v]
    }

    pub fn norm_sq_at(&self, v: usize) -> f64 {
        self.values[v].norm_squared()
    }
}

/// Central-difference Dirac operator, stored as per-vertex blocks.
#[derive(Debug, Clone)]
pub struct DiracOperator {
    basis: Arc<FockBasis>,
    /// `(column vertex, block)` for every row vertex.
    rows: Vec<Vec<(usize, CMatrix)>>,
}

impl DiracOperator {
    pub fn apply(&self, phi: &SpinorSection) -> Result<SpinorSection> {
        if *phi.basis != *self.basis || phi.values.len() != self.rows.len() {
            return Err(Error::DimensionMismatch(
                "section does not match the operator".into(),
            ));
        }
        let values = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = CVector::zeros(self.basis.dim());
                for (col, block) in row {
                    acc += block * &phi.values[*col];
                }
                acc
            })
            .collect();
        Ok(SpinorSection {
            basis: self.basis.clone(),
            values,
        })
    }

    /// Number of stored blocks.
    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Clifford factors `Γ_j` of a variant: `e_j·` or `−(Je_j)·`.
fn clifford_factors(alg: &FiberAlgebra, variant: DiracVariant) -> Vec<CMatrix> {
    (0..2)
        .map(|j| match variant {
            DiracVariant::Metric => alg.frame_op(j).matrix().clone(),
            DiracVariant::Symplectic => -alg.j_frame_op(j).matrix(),
        })
        .collect()
}

/// Spinor transport across a pole, where the frame turns by `π`.
fn pole_flip(alg: &FiberAlgebra) -> Result<CMatrix> {
    let k = r_q(alg, &defining_cartan(1, 0)?)?;
    Ok((k.matrix() * C64::new(PI, 0.0)).exp())
}

/// Assemble `D̃` or `D` with central differences and the spinor connection
/// `σ(u_μ) = −r_Q(u_μ)`.
pub fn assemble_dirac(
    mesh: &SurfaceMesh,
    basis: &Arc<FockBasis>,
    variant: DiracVariant,
) -> Result<DiracOperator> {
    if basis.n() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "surface sections need n = 1, got n = {}",
            basis.n()
        )));
    }
    let alg = FiberAlgebra::new(basis.clone());
    let gammas = clifford_factors(&alg, variant);
    let flip = pole_flip(&alg)?;
    let mut rows = Vec::with_capacity(mesh.len());
    for v in 0..mesh.len() {
        let e = mesh.frame(v);
        let mut row: Vec<(usize, CMatrix)> = Vec::new();
        let mut push = |col: usize, m: CMatrix| {
            if let Some(slot) = row.iter_mut().find(|(c, _)| *c == col) {
                slot.1 += m;
            } else {
                row.push((col, m));
            }
        };
        for mu in 0..2 {
            // Σ_j e_j^μ Γ_j
            let mut g = CMatrix::zeros(basis.dim(), basis.dim());
            for (j, gj) in gammas.iter().enumerate() {
                if e[(mu, j)] != 0.0 {
                    g += gj * C64::new(e[(mu, j)], 0.0);
                }
            }
            let (minus, plus) = mesh.neighbors(v, mu);
            let width = plus.offset - minus.offset;
            for (nb, sign) in [(plus, 1.0), (minus, -1.0)] {
                let mut block = &g * C64::new(sign / width, 0.0);
                if nb.across_pole {
                    block = &block * &flip;
                }
                push(nb.vertex, block);
            }
            let sigma = -r_q_matrix(&alg, mesh.connection(v, mu))?.matrix();
            push(v, &g * &sigma);
        }
        rows.push(row);
    }
    Ok(DiracOperator {
        basis: basis.clone(),
        rows,
    })
}

/// Gradient components `e_j a` at `v` in the unitary frame.
pub fn discrete_gradient(
    mesh: &SurfaceMesh,
    a: &ScalarField,
    v: usize,
    stencil: Stencil,
) -> Result<[f64; 2]> {
    if a.values.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "field with {} values on a mesh of {} vertices",
            a.values.len(),
            mesh.len()
        )));
    }
    let mut d = [0.0; 2];
    for (mu, dmu) in d.iter_mut().enumerate() {
        let (minus, plus) = mesh.neighbors(v, mu);
        let (am, ap, a0) = (a.values[minus.vertex], a.values[plus.vertex], a.values[v]);
        *dmu = match stencil {
            Stencil::Central => (ap - am) / (plus.offset - minus.offset),
            Stencil::Upwind => {
                let back = (a0 - am) / -minus.offset;
                let fwd = (ap - a0) / plus.offset;
                if back >= -fwd && back > 0.0 {
                    back
                } else if -fwd > 0.0 {
                    fwd
                } else {
                    0.0
                }
            }
        };
    }
    let e = mesh.frame(v);
    Ok([
        e[(0, 0)] * d[0] + e[(1, 0)] * d[1],
        e[(0, 1)] * d[0] + e[(1, 1)] * d[1],
    ])
}

fn check_ground(phi0: &SpinorSection, v: usize) -> Result<()> {
    let x = phi0.at(v);
    let leak: f64 = x.iter().skip(1).map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if leak > 1e-12 * x.norm().max(1.0) {
        return Err(Error::NotLevelZero(leak));
    }
    Ok(())
}

/// `‖[D,a]φ₀‖` at vertex `v`, evaluated as Clifford multiplication of
/// `φ₀(v)` by the discrete gradient.
pub fn commutator_norm(
    mesh: &SurfaceMesh,
    a: &ScalarField,
    v: usize,
    phi0: &SpinorSection,
    variant: DiracVariant,
    stencil: Stencil,
) -> Result<f64> {
    check_ground(phi0, v)?;
    let grad = discrete_gradient(mesh, a, v, stencil)?;
    let alg = FiberAlgebra::new(phi0.basis().clone());
    if alg.n() != 1 || phi0.basis().cutoff() < 1 {
        return Err(Error::InsufficientCutoff {
            cutoff: phi0.basis().cutoff(),
            required: 1,
        });
    }
    let gammas = clifford_factors(&alg, variant);
    let out =
        &gammas[0] * phi0.at(v) * C64::new(grad[0], 0.0) + &gammas[1] * phi0.at(v) * C64::new(grad[1], 0.0);
    Ok(out.norm())
}

/// Per-vertex factor `κ` with `‖[D,a]φ₀‖ = κ·|da|`; errors unless the
/// fiber quadratic form is isotropic.
fn constraint_scale(mesh: &SurfaceMesh, phi0: &SpinorSection, variant: DiracVariant) -> Result<Vec<f64>> {
    if phi0.values().len() != mesh.len() {
        return Err(Error::DimensionMismatch("section does not match the mesh".into()));
    }
    let alg = FiberAlgebra::new(phi0.basis().clone());
    let gammas = clifford_factors(&alg, variant);
    (0..mesh.len())
        .map(|v| {
            check_ground(phi0, v)?;
            let w: Vec<CVector> = gammas.iter().map(|g| g * phi0.at(v)).collect();
            let g00 = w[0].norm_squared();
            let g11 = w[1].norm_squared();
            let g01 = w[0].dotc(&w[1]).re;
            if (g00 - g11).abs() > 1e-12 * g00.max(1e-300) || g01.abs() > 1e-12 * g00.max(1e-300) {
                return Err(Error::InvalidArgument("anisotropic fiber constraint".into()));
            }
            if g00 <= 0.0 {
                return Err(Error::InvalidArgument("vanishing section".into()));
            }
            Ok(g00.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Largest field with `|a(u) − a(w)| ≤ speed·length` on every edge and
/// `a(source) = 0`, i.e. weighted graph distance from `source`.
fn graph_field(mesh: &SurfaceMesh, source: usize, speed: &[f64]) -> Result<Vec<f64>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.len()];
    for e in mesh.edges() {
        let w = e.length * speed[e.from].min(speed[e.to]);
        adj[e.from].push((e.to, w));
        adj[e.to].push((e.from, w));
    }
    let mut dist = vec![f64::INFINITY; mesh.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Key(0.0, source));
    while let Some(Key(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(w, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Key(nd, w));
            }
        }
    }
    if let Some(v) = dist.iter().position(|d| !d.is_finite()) {
        return Err(Error::Disconnected(v));
    }
    Ok(dist)
}

/// Largest `a` with `((a − m0)_+/h0)² + ((a − m1)_+/h1)² ≤ 1`.
fn local_solve(m0: f64, h0: f64, m1: f64, h1: f64) -> f64 {
    let (mx, hx, my, hy) = if m0 <= m1 {
        (m0, h0, m1, h1)
    } else {
        (m1, h1, m0, h0)
    };
    let a = mx + hx;
    if a <= my {
        return a;
    }
    let p = 1.0 / (hx * hx) + 1.0 / (hy * hy);
    let q = -2.0 * (mx / (hx * hx) + my / (hy * hy));
    let r = mx * mx / (hx * hx) + my * my / (hy * hy) - 1.0;
    (-q + (q * q - 4.0 * p * r).max(0.0).sqrt()) / (2.0 * p)
}

/// Gauss–Seidel sweeping projection onto the upwind constraints,
/// started from `init`. Returns the field and the number of sweeps.
fn sweep_field(mesh: &SurfaceMesh, source: usize, speed: &[f64], init: Vec<f64>) -> (Vec<f64>, usize) {
    let mut a = init;
    let (rows, cols) = (mesh.rows(), mesh.cols());
    for sweep in 1..=MAX_SWEEPS {
        let mut change = 0.0_f64;
        for (ri, ci) in [(false, false), (false, true), (true, false), (true, true)] {
            for ii in 0..rows {
                let i = if ri { rows - 1 - ii } else { ii };
                for jj in 0..cols {
                    let j = if ci { cols - 1 - jj } else { jj };
                    let v = i * cols + j;
                    if v == source {
                        continue;
                    }
                    let mut m = [0.0; 2];
                    let mut h = [0.0; 2];
                    for (mu, (mm, hh)) in m.iter_mut().zip(h.iter_mut()).enumerate() {
                        let (lo, hi) = mesh.neighbors(v, mu);
                        *mm = a[lo.vertex].min(a[hi.vertex]);
                        *hh = mesh.spacing[mu] * mesh.scale(v, mu) * speed[v];
                    }
                    let new = local_solve(m[0], h[0], m[1], h[1]);
                    if new < a[v] {
                        change = change.max(a[v] - new);
                        a[v] = new;
                    }
                }
            }
        }
        if change < SWEEP_TOL {
            return (a, sweep);
        }
    }
    (a, MAX_SWEEPS)
}

/// Result of a distance computation.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub distance: f64,
    /// The maximising field, normalised by `a(y) = 0`.
    pub field: ScalarField,
    pub sweeps: usize,
}

/// Options of the sup-problem: fiber section, variant and constraint bound.
#[derive(Debug, Clone)]
pub struct DistanceProblem<'a> {
    pub mesh: &'a SurfaceMesh,
    pub phi0: SpinorSection,
    pub variant: DiracVariant,
    pub bound: f64,
}

impl<'a> DistanceProblem<'a> {
    /// Ground section with `‖φ₀‖² = 2`, unit bound and the metric variant.
    pub fn standard(mesh: &'a SurfaceMesh) -> Result<Self> {
        let basis = FockBasis::new(1, 2)?;
        Ok(Self {
            mesh,
            phi0: SpinorSection::ground(mesh, &basis, 2.0),
            variant: DiracVariant::Metric,
            bound: 1.0,
        })
    }

    /// `sup { a(x) − a(y) : ‖[D,a]φ₀‖_p ≤ bound at every vertex }`.
    pub fn solve(&self, x: usize, y: usize, solver: Solver) -> Result<DistanceReport> {
        let n = self.mesh.len();
        if x >= n || y >= n {
            return Err(Error::InvalidArgument(format!(
                "vertex out of range (mesh has {n})"
            )));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("constraint bound {}", self.bound)));
        }
        let speed: Vec<f64> = constraint_scale(self.mesh, &self.phi0, self.variant)?
            .iter()
            .map(|k| self.bound / k)
            .collect();
        let graph = graph_field(self.mesh, y, &speed)?;
        let (values, sweeps) = match solver {
            Solver::LipschitzGraph => (graph, 0),
            Solver::ProjectedAscent => sweep_field(self.mesh, y, &speed, graph),
        };
        Ok(DistanceReport {
            distance: values[x],
            field: ScalarField { values },
            sweeps,
        })
    }
}

/// Spectral distance between vertices with the standard ground section.
pub fn spectral_distance(mesh: &SurfaceMesh, x: usize, y: usize, solver: Solver) -> Result<f64> {
    Ok(DistanceProblem::standard(mesh)?.solve(x, y, solver)?.distance)
}

/// Closed-form geodesic distance on the built-in surfaces.
pub fn geodesic_oracle(model: &GeometryModel, x: &[f64], y: &[f64]) -> Result<f64> {
    let base = match model.kind() {
        ModelKind::SampledGrid { base } => base.as_ref(),
        k => k,
    };
    if x.len() != model.dim() || y.len() != model.dim() {
        return Err(Error::DimensionMismatch("point dimension".into()));
    }
    match base {
        ModelKind::FlatTorus { periods } | ModelKind::TwistedFlat { periods, .. } => Ok(periods
            .iter()
            .zip(x.iter().zip(y))
            .map(|(p, (a, b))| {
                let r = (a - b).rem_euclid(*p);
                r.min(p - r).powi(2)
            })
            .sum::<f64>()
            .sqrt()),
        ModelKind::RoundSphere { radius } if x.len() == 2 => {
            let unit = |p: &[f64]| [p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()];
            let (u, w) = (unit(x), unit(y));
            let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
            let cross = [
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ];
            let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
            Ok(radius * sin.atan2(dot))
        }
        _ => Err(Error::UnsupportedModel(format!(
            "no geodesic oracle for {}",
            model.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::I;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn torus() -> GeometryModel {
        GeometryModel::new(
            ModelKind::FlatTorus {
                periods: vec![1.0, 1.0],
            },
            4,
        )
        .unwrap()
    }

    fn cp1() -> GeometryModel {
        GeometryModel::new(ModelKind::cp1(), 4).unwrap()
    }

    fn plane_wave(mesh: &SurfaceMesh, basis: &Arc<FockBasis>, k: [f64; 2], psi: &CVector) -> SpinorSection {
        let values = mesh
            .vertices()
            .iter()
            .map(|x| psi * C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]))
            .collect();
        SpinorSection::new(basis.clone(), values).unwrap()
    }

    #[test]
    fn plane_wave_symbol() {
        let mesh = SurfaceMesh::new(&torus(), 16).unwrap();
        let basis = FockBasis::new(1, 4).unwrap();
        let alg = FiberAlgebra::new(basis.clone());
        let mut psi = CVector::zeros(basis.dim());
        psi[0] = C64::new(0.6, 0.1);
        psi[2] = C64::new(-0.2, 0.7);
        let k = [2.0 * PI, 4.0 * PI];
        let h = mesh.spacing();
        let phi = plane_wave(&mesh, &basis, k, &psi);
        let out = assemble_dirac(&mesh, &basis, DiracVariant::Metric)
            .unwrap()
            .apply(&phi)
            .unwrap();
        let kt = [(k[0] * h[0]).sin() / h[0], (k[1] * h[1]).sin() / h[1]];
        let symbol = (alg.frame_op(0).matrix() * C64::new(kt[0], 0.0)
            + alg.frame_op(1).matrix() * C64::new(kt[1], 0.0))
            * I;
        for v in [0, 37, 255] {
            let want = &symbol * phi.at(v);
            assert!((out.at(v) - want).norm() < 1e-10);
        }
        // the discrete symbol approaches ik at second order
        assert!((kt[0] - k[0]).abs() < k[0].powi(3) * h[0] * h[0] / 6.0 + 1e-12);
    }

    #[test]
    fn laplacian_principal_symbol() {
        let mesh = SurfaceMesh::new(&torus(), 16).unwrap();
        let basis = FockBasis::new(1, 4).unwrap();
        let mut psi = CVector::zeros(basis.dim());
        psi[0] = C64::new(1.0, 0.0);
        let k = [2.0 * PI, -2.0 * PI];
        let h = mesh.spacing();
        let phi = plane_wave(&mesh, &basis, k, &psi);
        let dt = assemble_dirac(&mesh, &basis, DiracVariant::Metric).unwrap();
        let d = assemble_dirac(&mesh, &basis, DiracVariant::Symplectic).unwrap();
        let a = dt.apply(&d.apply(&phi).unwrap()).unwrap();
        let b = d.apply(&dt.apply(&phi).unwrap()).unwrap();
        let kt2: f64 = (0..2).map(|m| ((k[m] * h[m]).sin() / h[m]).powi(2)).sum();
        for v in [0, 100] {
            let p = (a.at(v) - b.at(v)) * I;
            let want = phi.at(v) * C64::new(kt2, 0.0);
            assert!((p - want).norm() < 1e-9);
        }
        let k2: f64 = k.iter().map(|x| x * x).sum();
        assert!((kt2 - k2).abs() / k2 < 0.06);
    }

    #[test]
    fn zero_section_maps_to_zero() {
        let mesh = SurfaceMesh::new(&cp1(), 6).unwrap();
        let basis = FockBasis::new(1, 3).unwrap();
        let d = assemble_dirac(&mesh, &basis, DiracVariant::Metric).unwrap();
        let out = d.apply(&SpinorSection::zero(&mesh, &basis)).unwrap();
        assert!(out.values().iter().all(|v| v.norm() == 0.0));
        assert!(d.nnz_blocks() >= 4 * mesh.len());
    }

    #[test]
    fn pole_flip_turns_the_frame() {
        let alg = FiberAlgebra::with_cutoff(1, 5).unwrap();
        let u = pole_flip(&alg).unwrap();
        let uinv = u.clone().try_inverse().unwrap();
        for k in 0..2 {
            let e = alg.frame_op(k).matrix();
            let conj = &u * e * &uinv;
            // exact on levels below the cutoff
            for c in 0..4 {
                for r in 0..6 {
                    assert!((conj[(r, c)] + e[(r, c)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn commutator_is_clifford_multiplication_by_gradient() {
        let mesh = SurfaceMesh::new(&torus(), 12).unwrap();
        let basis = FockBasis::new(1, 3).unwrap();
        let alg = FiberAlgebra::new(basis.clone());
        let phi0 = SpinorSection::ground(&mesh, &basis, 2.0);
        let a = ScalarField::from_fn(&mesh, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let d = assemble_dirac(&mesh, &basis, DiracVariant::Metric).unwrap();
        let aphi = SpinorSection::new(
            basis.clone(),
            phi0.values()
                .iter()
                .zip(&a.values)
                .map(|(p, s)| p * C64::new(*s, 0.0))
                .collect(),
        )
        .unwrap();
        let lhs = d.apply(&aphi).unwrap();
        let dphi = d.apply(&phi0).unwrap();
        for v in [0, 5, 77] {
            let g = discrete_gradient(&mesh, &a, v, Stencil::Central).unwrap();
            let cliff = alg.frame_op(0).matrix() * phi0.at(v) * C64::new(g[0], 0.0)
                + alg.frame_op(1).matrix() * phi0.at(v) * C64::new(g[1], 0.0);
            let comm = lhs.at(v) - dphi.at(v) * C64::new(a.values[v], 0.0);
            assert!((comm - &cliff).norm() < 1e-12);
            let norm = commutator_norm(&mesh, &a, v, &phi0, DiracVariant::Metric, Stencil::Central).unwrap();
            assert!((norm - cliff.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn commutator_norm_on_torus_converges() {
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let mesh = SurfaceMesh::new(&torus(), n).unwrap();
                let basis = FockBasis::new(1, 2).unwrap();
                let phi0 = SpinorSection::ground(&mesh, &basis, 2.0);
                let a = ScalarField::from_fn(&mesh, |x| (2.0 * PI * x[0]).sin());
                let v = mesh.nearest_vertex(&[0.0, 0.0]).unwrap();
                let got =
                    commutator_norm(&mesh, &a, v, &phi0, DiracVariant::Metric, Stencil::Central).unwrap();
                (got - 2.0 * PI).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8);
        }
        let mesh = SurfaceMesh::new(&torus(), 8).unwrap();
        let basis = FockBasis::new(1, 2).unwrap();
        let phi0 = SpinorSection::ground(&mesh, &basis, 2.0);
        let c = ScalarField::from_fn(&mesh, |_| 3.0);
        assert_eq!(
            commutator_norm(&mesh, &c, 9, &phi0, DiracVariant::Metric, Stencil::Central).unwrap(),
            0.0
        );
    }

    #[test]
    fn commutator_norm_on_sphere() {
        let r = 0.5;
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let mesh = SurfaceMesh::new(&cp1(), n).unwrap();
            let basis = FockBasis::new(1, 2).unwrap();
            let phi0 = SpinorSection::ground(&mesh, &basis, 2.0);
            let a = ScalarField::from_fn(&mesh, |x| r * x[0].cos() + r * x[0].sin() * x[1].sin());
            let mut worst = 0.0_f64;
            for v in 0..mesh.len() {
                let [th, ph] = mesh.vertex(v);
                // |grad a| for a = z + y on the sphere of radius r
                let gt = -th.sin() + th.cos() * ph.sin();
                let gp = ph.cos();
                let exact = (gt * gt + gp * gp).sqrt();
                for variant in [DiracVariant::Metric, DiracVariant::Symplectic] {
                    let got = commutator_norm(&mesh, &a, v, &phi0, variant, Stencil::Central).unwrap();
                    worst = worst.max((got - exact).abs());
                }
            }
            errs.push(worst);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn excited_sections_are_rejected() {
        let mesh = SurfaceMesh::new(&torus(), 4).unwrap();
        let basis = FockBasis::new(1, 2).unwrap();
        let mut v = CVector::zeros(basis.dim());
        v[0] = C64::new(1.0, 0.0);
        v[1] = C64::new(0.5, 0.0);
        let phi = SpinorSection::new(basis.clone(), vec![v; mesh.len()]).unwrap();
        let a = ScalarField::from_fn(&mesh, |x| x[0]);
        assert!(matches!(
            commutator_norm(&mesh, &a, 0, &phi, DiracVariant::Metric, Stencil::Central),
            Err(Error::NotLevelZero(_))
        ));
        let problem = DistanceProblem {
            mesh: &mesh,
            phi0: phi,
            variant: DiracVariant::Metric,
            bound: 1.0,
        };
        assert!(problem.solve(0, 1, Solver::LipschitzGraph).is_err());
    }

    #[test]
    fn geodesic_oracle_examples() {
        let t = torus();
        assert!((geodesic_oracle(&t, &[0.0, 0.0], &[0.9, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        let s = cp1();
        let q = geodesic_oracle(&s, &[PI / 2.0, 0.0], &[PI / 2.0, PI / 2.0]).unwrap();
        assert!((q - PI / 4.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p: Vec<[f64; 2]> = (0..3)
                .map(|_| [rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)])
                .collect();
            for m in [&t, &s] {
                let d = |a: &[f64; 2], b: &[f64; 2]| geodesic_oracle(m, a, b).unwrap();
                assert!(d(&p[0], &p[2]) <= d(&p[0], &p[1]) + d(&p[1], &p[2]) + 1e-12);
            }
        }
        let high = GeometryModel::new(
            ModelKind::FlatTorus {
                periods: vec![1.0; 4],
            },
            2,
        )
        .unwrap();
        assert!(geodesic_oracle(&high, &[0.0; 4], &[0.5, 0.0, 0.0, 0.0]).is_ok());
        let twisted = GeometryModel::new(ModelKind::random_twisted(2, 0), 2).unwrap();
        assert!(SurfaceMesh::new(&twisted, 8).is_err());
    }

    #[test]
    fn torus_distance() {
        let mesh = SurfaceMesh::new(&torus(), 64).unwrap();
        let x = mesh.nearest_vertex(&[0.0, 0.0]).unwrap();
        let y = mesh.nearest_vertex(&[0.5, 0.0]).unwrap();
        for solver in [Solver::LipschitzGraph, Solver::ProjectedAscent] {
            let d = spectral_distance(&mesh, x, y, solver).unwrap();
            assert!((d - 0.5).abs() < 0.01);
            assert_eq!(spectral_distance(&mesh, x, x, solver).unwrap(), 0.0);
        }
        let z = mesh.nearest_vertex(&[0.25, 0.25]).unwrap();
        let d = spectral_distance(&mesh, x, z, Solver::ProjectedAscent).unwrap();
        let exact = geodesic_oracle(&torus(), &mesh.vertex(x), &mesh.vertex(z)).unwrap();
        // first-order upwind error is largest off the grid axes
        assert!((d - exact).abs() / exact < 0.05, "{d} vs {exact}");
        // the edge graph overestimates off-axis distances
        assert!(spectral_distance(&mesh, x, z, Solver::LipschitzGraph).unwrap() > d);
    }

    #[test]
    fn sphere_antipodal_distance() {
        let model = cp1();
        let mesh = SurfaceMesh::new(&model, 64).unwrap();
        let n = mesh.rows();
        let x = n / 4 * mesh.cols();
        let y = (n - 1 - n / 4) * mesh.cols() + n;
        let exact = geodesic_oracle(&model, &mesh.vertex(x), &mesh.vertex(y)).unwrap();
        assert!((exact - PI / 2.0).abs() < 1e-12);
        let d = spectral_distance(&mesh, x, y, Solver::ProjectedAscent).unwrap();
        assert!((d - exact).abs() / exact < 0.02, "{d} vs {exact}");
    }

    #[test]
    fn variants_and_normalisation_agree() {
        let mesh = SurfaceMesh::new(&cp1(), 16).unwrap();
        let (x, y) = (3, 200);
        let base = DistanceProblem::standard(&mesh).unwrap();
        let d0 = base.solve(x, y, Solver::ProjectedAscent).unwrap().distance;
        let mut sym = base.clone();
        sym.variant = DiracVariant::Symplectic;
        let d1 = sym.solve(x, y, Solver::ProjectedAscent).unwrap().distance;
        assert!((d0 - d1).abs() <= 1e-3 * d0);
        let mut scaled = base.clone();
        scaled.phi0 = SpinorSection::ground(&mesh, base.phi0.basis(), 8.0);
        scaled.bound = 2.0;
        let d2 = scaled.solve(x, y, Solver::ProjectedAscent).unwrap().distance;
        assert!((d0 - d2).abs() < 1e-12);
        let back = base.solve(y, x, Solver::ProjectedAscent).unwrap().distance;
        assert!((d0 - back).abs() / d0 < 0.02);
    }

    #[test]
    fn sweeping_respects_the_constraint() {
        let mesh = SurfaceMesh::new(&cp1(), 12).unwrap();
        let rep = DistanceProblem::standard(&mesh)
            .unwrap()
            .solve(0, 100, Solver::ProjectedAscent)
            .unwrap();
        assert!(rep.sweeps < MAX_SWEEPS);
        let basis = FockBasis::new(1, 2).unwrap();
        let phi0 = SpinorSection::ground(&mesh, &basis, 2.0);
        for v in 0..mesh.len() {
            if v == 100 {
                continue;
            }
            let c =
                commutator_norm(&mesh, &rep.field, v, &phi0, DiracVariant::Metric, Stencil::Upwind).unwrap();
            assert!(c <= 1.0 + 1e-6, "vertex {v}: {c}");
        }
    }

    #[test]
    fn local_solve_cases() {
        assert_eq!(local_solve(0.0, 1.0, 5.0, 1.0), 1.0);
        let a = local_solve(0.0, 1.0, 0.0, 1.0);
        assert!((a - 0.5_f64.sqrt()).abs() < 1e-15);
    }
}
