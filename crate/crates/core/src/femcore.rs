//! P1 scalar potential space with Dirichlet lifting from gate fluxes, P0
//! vector fields, the 2D scalar-to-vector curl, objective evaluation and
//! assembly of tangent systems and residuals.
//!
//! The out-of-plane potential splits into free coefficients on interior and
//! gate nodes plus one constant per flux wall. The wall constants realize the
//! lifting: by Stokes, the flux through a gate equals the difference of the
//! potential at its two endpoints, so prescribing wall constants enforces the
//! gate fluxes exactly while the natural boundary condition on the gates
//! imposes `H x n = 0` weakly.

use rayon::prelude::*;
use sprs::{CsMatI, TriMatI};

use crate::material::{
    energy_density, energy_gradient, reg_norm, MaterialError, MaterialModel, PolarizationState,
};
use crate::mesh::{BoundaryLabel, BoundaryTopology, Mesh};
use crate::par;
use crate::vec2::{Mat2, Vec2};

pub type SparseMatrix = CsMatI<f64, usize>;

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("gate fluxes violate sum_l Phi_l = 0: sum {sum:.3e} Wb exceeds {tol:.3e}")]
    FluxBalance { sum: f64, tol: f64 },
    #[error("boundary walls and gates do not alternate: {0}")]
    NonAlternating(String),
    #[error("element {element} has a non-SPD reluctivity tensor")]
    NonSpdElement { element: usize },
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

/// Classification of a mesh node in the potential space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeDof {
    /// Unknown coefficient, with its index among the free nodes.
    Free(usize),
    /// Dirichlet node carrying the constant of wall `w`.
    Wall(usize),
}

/// Discretization data derived from a mesh: element geometry, curl basis,
/// dof numbering and boundary bookkeeping. Immutable once built.
#[derive(Clone, Debug)]
pub struct FemSpace {
    nodes: Vec<Vec2>,
    tris: Vec<[usize; 3]>,
    areas: Vec<f64>,
    /// `Curl phi_i` restricted to each element, per element-local node.
    curls: Vec<[Vec2; 3]>,
    node_dof: Vec<NodeDof>,
    free_nodes: Vec<usize>,
    n_walls: usize,
    n_gates: usize,
    topology: BoundaryTopology,
    /// Per gate: (start node, end node, owning triangle) of each edge.
    gate_edges: Vec<Vec<(usize, usize, usize)>>,
    total_area: f64,
}

impl FemSpace {
    pub fn new(mesh: &Mesh) -> Result<Self, FemError> {
        let nt = mesh.n_triangles();
        let mut areas = Vec::with_capacity(nt);
        let mut curls = Vec::with_capacity(nt);
        for t in 0..nt {
            let g = mesh.element_geometry(t)?;
            areas.push(g.area);
            curls.push([
                g.basis_gradients[0].rot_neg90(),
                g.basis_gradients[1].rot_neg90(),
                g.basis_gradients[2].rot_neg90(),
            ]);
        }

        let wall_of = mesh.wall_of_nodes()?;
        let mut node_dof = Vec::with_capacity(mesh.n_nodes());
        let mut free_nodes = Vec::new();
        for (n, w) in wall_of.iter().enumerate() {
            match w {
                Some(w) => node_dof.push(NodeDof::Wall(*w)),
                None => {
                    node_dof.push(NodeDof::Free(free_nodes.len()));
                    free_nodes.push(n);
                }
            }
        }

        let mut gate_edges = vec![Vec::new(); mesh.n_gates()];
        for (e, &([a, b], label)) in mesh.boundary_edges().iter().enumerate() {
            if let BoundaryLabel::Gate(g) = label {
                gate_edges[g].push((a, b, mesh.boundary_edge_triangles()[e]));
            }
        }

        let total_area = areas.iter().sum();
        Ok(Self {
            nodes: mesh.nodes().to_vec(),
            tris: mesh.triangles().to_vec(),
            areas,
            curls,
            node_dof,
            free_nodes,
            n_walls: mesh.n_walls(),
            n_gates: mesh.n_gates(),
            topology: mesh.boundary_topology(),
            gate_edges,
            total_area,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.tris.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn n_walls(&self) -> usize {
        self.n_walls
    }

    pub fn n_gates(&self) -> usize {
        self.n_gates
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.tris
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn curls(&self) -> &[[Vec2; 3]] {
        &self.curls
    }

    pub fn node_dof(&self) -> &[NodeDof] {
        &self.node_dof
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn topology(&self) -> &BoundaryTopology {
        &self.topology
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Flux through each gate recomputed from an element field by the
    /// boundary line integral of `B . n`. For the CCW loop the outward
    /// normal times the edge length is the edge vector rotated by -90
    /// degrees.
    pub fn gate_fluxes_from_field(&self, b: &[Vec2]) -> Vec<f64> {
        self.gate_edges
            .iter()
            .map(|edges| {
                edges
                    .iter()
                    .map(|&(na, nb, t)| b[t].dot((self.nodes[nb] - self.nodes[na]).rot_neg90()))
                    .sum()
            })
            .collect()
    }
}

/// Piecewise-linear potential: free nodal coefficients plus one Dirichlet
/// constant per flux wall, both in Wb/m.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub free: Vec<f64>,
    pub wall_constants: Vec<f64>,
}

impl PotentialField {
    pub fn zeros(space: &FemSpace) -> Self {
        Self { free: vec![0.0; space.n_free()], wall_constants: vec![0.0; space.n_walls()] }
    }

    pub fn with_walls(space: &FemSpace, walls: Vec<f64>) -> Self {
        Self { free: vec![0.0; space.n_free()], wall_constants: walls }
    }

    /// Value at a mesh node.
    pub fn node_value(&self, space: &FemSpace, node: usize) -> f64 {
        match space.node_dof()[node] {
            NodeDof::Free(i) => self.free[i],
            NodeDof::Wall(w) => self.wall_constants[w],
        }
    }
}

/// Element-constant flux density `B = Curl A_z` (exact for P1 potentials).
pub fn curl2d(space: &FemSpace, a: &PotentialField) -> Vec<Vec2> {
    (0..space.n_elements()).map(|t| element_curl(space, a, t)).collect()
}

#[inline]
pub fn element_curl(space: &FemSpace, a: &PotentialField, t: usize) -> Vec2 {
    let tri = space.tris[t];
    let c = &space.curls[t];
    let mut b = Vec2::ZERO;
    for i in 0..3 {
        b += c[i].scale(a.node_value(space, tri[i]));
    }
    b
}

/// Wall constants from prescribed gate fluxes (Wb for unit depth).
///
/// Walking the boundary loop counterclockwise, the flux through a gate
/// equals the potential difference of its endpoints, so constants accumulate
/// gate fluxes from wall to wall. Gauge: wall `w1` carries 0.
pub fn wall_constants(topology: &BoundaryTopology, fluxes: &[f64]) -> Result<Vec<f64>, FemError> {
    let nw = topology.n_walls;
    let ng = topology.n_gates;
    if fluxes.len() != ng {
        return Err(FemError::ShapeMismatch(format!(
            "{} gate fluxes supplied for {} gates",
            fluxes.len(),
            ng
        )));
    }
    if nw != ng || nw == 0 {
        return Err(FemError::NonAlternating(format!("{nw} walls vs {ng} gates")));
    }
    if topology.runs.len() != nw + ng {
        return Err(FemError::NonAlternating(format!(
            "{} boundary runs for {} labels (a label repeats along the loop)",
            topology.runs.len(),
            nw + ng
        )));
    }
    for (r, run) in topology.runs.iter().enumerate() {
        let next = &topology.runs[(r + 1) % topology.runs.len()];
        if matches!(
            (run.label, next.label),
            (BoundaryLabel::Wall(_), BoundaryLabel::Wall(_)) | (BoundaryLabel::Gate(_), BoundaryLabel::Gate(_))
        ) {
            return Err(FemError::NonAlternating(format!(
                "runs {} and {} have the same kind",
                run.label, next.label
            )));
        }
    }

    let max_flux = fluxes.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let sum: f64 = fluxes.iter().sum();
    let tol = 1e-12 * max_flux;
    if sum.abs() > tol && max_flux > 0.0 {
        return Err(FemError::FluxBalance { sum, tol });
    }

    let n_runs = topology.runs.len();
    let start = topology
        .runs
        .iter()
        .position(|r| r.label == BoundaryLabel::Wall(0))
        .expect("wall labels are contiguous, w1 exists");
    let mut constants = vec![0.0; nw];
    let mut current = 0.0;
    let mut pos = start;
    for _ in 0..ng {
        // wall run at pos, gate run follows, then the next wall
        let gate = &topology.runs[(pos + 1) % n_runs];
        let wall_next = &topology.runs[(pos + 2) % n_runs];
        let (BoundaryLabel::Gate(g), BoundaryLabel::Wall(w)) = (gate.label, wall_next.label) else {
            return Err(FemError::NonAlternating("expected wall-gate-wall sequence".into()));
        };
        current += fluxes[g];
        constants[w] = current;
        pos = (pos + 2) % n_runs;
    }
    constants[0] = 0.0;
    Ok(constants)
}

/// 3x3 element stiffness `w * (Curl phi_i) . nu (Curl phi_j)`, bitwise
/// symmetric by construction.
pub fn element_stiffness(curls: &[Vec2; 3], area: f64, nu: Mat2) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = area * curls[i].dot(nu.mul_vec(curls[j]));
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Sparse tangent matrix over the free coefficients with a fixed sparsity
/// pattern, refilled in place for each new reluctivity field.
pub struct TangentAssembler {
    matrix: SparseMatrix,
    /// Per element, row-major 3x3 data indices into the CSR values
    /// (`u32::MAX` where a node pair involves a wall node).
    scatter: Vec<[u32; 9]>,
    block_buf: Vec<[[f64; 3]; 3]>,
}

impl TangentAssembler {
    pub fn new(space: &FemSpace) -> Self {
        let n = space.n_free();
        let mut pattern: TriMatI<f64, usize> = TriMatI::new((n, n));
        for t in 0..space.n_elements() {
            let tri = space.triangles()[t];
            for i in 0..3 {
                for j in 0..3 {
                    if let (NodeDof::Free(fi), NodeDof::Free(fj)) =
                        (space.node_dof()[tri[i]], space.node_dof()[tri[j]])
                    {
                        pattern.add_triplet(fi, fj, 0.0);
                    }
                }
            }
        }
        let matrix: SparseMatrix = pattern.to_csr();

        let lookup = |row: usize, col: usize| -> u32 {
            let range = matrix.indptr().outer_inds_sz(row);
            let cols = &matrix.indices()[range.clone()];
            let off = cols.binary_search(&col).expect("pattern contains all element pairs");
            (range.start + off) as u32
        };
        let mut scatter = Vec::with_capacity(space.n_elements());
        for t in 0..space.n_elements() {
            let tri = space.triangles()[t];
            let mut slots = [u32::MAX; 9];
            for i in 0..3 {
                for j in 0..3 {
                    if let (NodeDof::Free(fi), NodeDof::Free(fj)) =
                        (space.node_dof()[tri[i]], space.node_dof()[tri[j]])
                    {
                        slots[3 * i + j] = lookup(fi, fj);
                    }
                }
            }
            scatter.push(slots);
        }
        Self { matrix, scatter, block_buf: Vec::new() }
    }

    /// Assemble the tangent for the given per-element reluctivity tensors.
    pub fn assemble(&mut self, space: &FemSpace, nu: &[Mat2]) -> Result<&SparseMatrix, FemError> {
        if nu.len() != space.n_elements() {
            return Err(FemError::ShapeMismatch(format!(
                "{} reluctivity tensors for {} elements",
                nu.len(),
                space.n_elements()
            )));
        }
        if let Some(element) = (0..nu.len()).find(|&t| !nu[t].is_spd(1e-12)) {
            return Err(FemError::NonSpdElement { element });
        }

        self.block_buf.resize(space.n_elements(), [[0.0; 3]; 3]);
        let areas = space.areas();
        let curls = space.curls();
        self.block_buf
            .par_iter_mut()
            .enumerate()
            .for_each(|(t, block)| *block = element_stiffness(&curls[t], areas[t], nu[t]));

        let values = self.matrix.data_mut();
        values.fill(0.0);
        for (t, slots) in self.scatter.iter().enumerate() {
            let block = &self.block_buf[t];
            for i in 0..3 {
                for j in 0..3 {
                    let s = slots[3 * i + j];
                    if s != u32::MAX {
                        values[s as usize] += block[i][j];
                    }
                }
            }
        }
        Ok(&self.matrix)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

/// One-shot tangent assembly (tests and single solves).
pub fn assemble_tangent(space: &FemSpace, nu: &[Mat2]) -> Result<SparseMatrix, FemError> {
    let mut asm = TangentAssembler::new(space);
    asm.assemble(space, nu)?;
    Ok(asm.matrix)
}

/// Gradient of the discrete objective: the weak residuals of the optimality
/// system.
#[derive(Clone, Debug)]
pub struct GradientParts {
    /// `dF/da_i` over the free coefficients.
    pub grad_free: Vec<f64>,
    /// `dF/dJ_{e,k}`, area-weighted, element-major.
    pub grad_j: Vec<Vec2>,
}

impl GradientParts {
    pub fn norm(&self) -> f64 {
        let a: f64 = self.grad_free.iter().map(|g| g * g).sum();
        let j: f64 = self.grad_j.iter().map(|g| g.norm_sq()).sum();
        (a + j).sqrt()
    }
}

/// Assemble the objective gradient at `(a, state)`.
pub fn assemble_gradient(
    space: &FemSpace,
    a: &PotentialField,
    state: &PolarizationState,
    m: &MaterialModel,
) -> Result<GradientParts, FemError> {
    let ne = space.n_elements();
    let kk = m.n_cells();
    if state.n_elements() != ne || state.n_cells() != kk {
        return Err(FemError::ShapeMismatch("polarization state does not match mesh/material".into()));
    }
    let nu0 = m.nu0();

    let mut node_grads = vec![[0.0; 3]; ne];
    let mut grad_j = vec![Vec2::ZERO; ne * kk];
    let results: Vec<Result<(), MaterialError>> = node_grads
        .par_iter_mut()
        .zip(grad_j.par_chunks_mut(kk))
        .enumerate()
        .map(|(t, (ng, gj))| {
            let w = space.areas()[t];
            let b = element_curl(space, a, t);
            let js = state.cells(t);
            let jps = state.cells_prev(t);
            let s = js.iter().fold(Vec2::ZERO, |acc, &j| acc + j);
            let r_b = (b - s).scale(nu0);
            for i in 0..3 {
                ng[i] = w * r_b.dot(space.curls()[t][i]);
            }
            for (k, p) in m.cells().iter().enumerate() {
                let d = js[k] - jps[k];
                let dn = reg_norm(d, p.eps);
                let v = if dn > 0.0 { d.scale(p.chi / dn) } else { Vec2::ZERO };
                let gu = energy_gradient(js[k], p)?;
                gj[k] = (gu - r_b + v).scale(w);
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }

    let mut grad_free = vec![0.0; space.n_free()];
    for t in 0..ne {
        let tri = space.triangles()[t];
        for i in 0..3 {
            if let NodeDof::Free(fi) = space.node_dof()[tri[i]] {
                grad_free[fi] += node_grads[t][i];
            }
        }
    }
    Ok(GradientParts { grad_free, grad_j })
}

/// Weak right-hand side of the reduced Newton system from per-element
/// densities (the eliminated residual `-(r_B + nu0 q)` per element).
pub fn assemble_newton_rhs(space: &FemSpace, density: &[Vec2]) -> Result<Vec<f64>, FemError> {
    if density.len() != space.n_elements() {
        return Err(FemError::ShapeMismatch(format!(
            "{} densities for {} elements",
            density.len(),
            space.n_elements()
        )));
    }
    let mut rhs = vec![0.0; space.n_free()];
    for t in 0..space.n_elements() {
        let tri = space.triangles()[t];
        let w = space.areas()[t];
        for i in 0..3 {
            if let NodeDof::Free(fi) = space.node_dof()[tri[i]] {
                rhs[fi] += w * density[t].dot(space.curls()[t][i]);
            }
        }
    }
    Ok(rhs)
}

/// Discrete objective (energy per unit depth, J/m): exact one-point
/// quadrature since both `B` and the polarizations are element-constant.
pub fn objective_value(
    space: &FemSpace,
    a: &PotentialField,
    state: &PolarizationState,
    m: &MaterialModel,
) -> Result<f64, FemError> {
    let ne = space.n_elements();
    let kk = m.n_cells();
    if state.n_elements() != ne || state.n_cells() != kk {
        return Err(FemError::ShapeMismatch("polarization state does not match mesh/material".into()));
    }
    let nu0 = m.nu0();
    let total = par::try_block_sum(ne, |t| -> Result<f64, MaterialError> {
        let b = element_curl(space, a, t);
        let js = state.cells(t);
        let jps = state.cells_prev(t);
        let mut s = Vec2::ZERO;
        let mut acc = 0.0;
        for (k, p) in m.cells().iter().enumerate() {
            s += js[k];
            acc += energy_density(js[k], p)? + p.chi * reg_norm(js[k] - jps[k], p.eps);
        }
        Ok(space.areas()[t] * (acc + 0.5 * nu0 * (b - s).norm_sq()))
    })?;
    Ok(total)
}
