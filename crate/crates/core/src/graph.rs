//! Modal graph construction from a superquadric primitive.
//!
//! The primitive is voxelized into a particle lattice, the particles are
//! connected by linear elastic rods, and the low-frequency free-vibration modes
//! of the resulting stiffness/mass pair are attached to every node.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::projection::{
    local_parametric_coords, parametric_distance, FramePose, ParametricCoords,
};

/// Number of rigid-body modes of a free 3D body.
pub const RIGID_MODES: usize = 6;

/// Smallest node count accepted from the discretization.
pub const MIN_NODES: usize = 30;

/// Residual bound for accepted eigenpairs.
const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Superquadric primitive and the pose of the graph frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperquadricParams {
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default)]
    pub pose: FramePose,
}

impl SuperquadricParams {
    pub fn ellipsoid(a_x: f64, a_y: f64, a_z: f64) -> Self {
        Self {
            a_x,
            a_y,
            a_z,
            alpha1: 1.0,
            alpha2: 1.0,
            pose: FramePose::identity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.a_x, self.a_y, self.a_z, self.alpha1, self.alpha2]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(Error::InvalidParameter(
                "superquadric semi-axes and exponents must be positive".into(),
            ));
        }
        if !self.pose.is_valid(1e-9) {
            return Err(Error::InvalidParameter("graph pose is not rigid".into()));
        }
        Ok(())
    }

    /// Inside-outside function; `<= 1` inside the primitive.
    pub fn implicit(&self, p: &Vector3<f64>) -> f64 {
        let e2 = 2.0 / self.alpha2;
        let e1 = 2.0 / self.alpha1;
        let xy = (p.x / self.a_x).abs().powf(e2) + (p.y / self.a_y).abs().powf(e2);
        xy.powf(self.alpha2 / self.alpha1) + (p.z / self.a_z).abs().powf(e1)
    }
}

fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

/// Point on the superquadric surface (graph frame) at parametric coordinates `c`.
pub fn superquadric_surface(params: &SuperquadricParams, c: &ParametricCoords) -> Vector3<f64> {
    let (cz, sz) = (c.zeta.cos(), c.zeta.sin());
    let (cs, ss) = (c.sigma.cos(), c.sigma.sin());
    let lat = signed_pow(cz, params.alpha1);
    Vector3::new(
        params.a_x * lat * signed_pow(cs, params.alpha2),
        params.a_y * lat * signed_pow(ss, params.alpha2),
        params.a_z * signed_pow(sz, params.alpha1),
    )
}

/// Arbitrary material assigned to the graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub total_mass: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, total_mass: f64) -> Self {
        Self {
            youngs_modulus,
            poisson_ratio,
            total_mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(Error::InvalidParameter("E must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::InvalidParameter("Poisson ratio must be in [0, 0.5)".into()));
        }
        if !(self.total_mass > 0.0 && self.total_mass.is_finite()) {
            return Err(Error::InvalidParameter("total mass must be positive".into()));
        }
        Ok(())
    }

    /// Constrained (P-wave) modulus `E (1 - v) / ((1 + v)(1 - 2v))`.
    pub fn constrained_modulus(&self) -> f64 {
        let v = self.poisson_ratio;
        self.youngs_modulus * (1.0 - v) / ((1.0 + v) * (1.0 - 2.0 * v))
    }
}

/// Lattice spacing per axis, and the lattice phase: nodes sit at
/// `(i + offset) * spacing`. The default offset of 1/2 places nodes at voxel
/// centers symmetric about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub spacing: [f64; 3],
    #[serde(default = "default_offset")]
    pub offset: [f64; 3],
}

fn default_offset() -> [f64; 3] {
    [0.5; 3]
}

impl Resolution {
    pub fn uniform(h: f64) -> Self {
        Self::new([h; 3])
    }

    pub fn new(spacing: [f64; 3]) -> Self {
        Self {
            spacing,
            offset: default_offset(),
        }
    }

    pub fn with_offset(mut self, offset: [f64; 3]) -> Self {
        self.offset = offset;
        self
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    /// Position in the graph frame.
    pub x: Vector3<f64>,
    pub c: ParametricCoords,
    pub is_boundary: bool,
}

/// Particle lattice of a voxelized primitive.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
}

const AXIS_NEIGHBORS: [[i64; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

/// Voxelizes the primitive.
///
/// Nodes sit at lattice points `(i + offset) * h` whose positions satisfy the
/// implicit inequality. Edges link all 26 lattice neighbors so that the rod
/// network is rigid; nodes whose neighbor directions do not span 3D are
/// removed. A node is on the boundary when one of its six axis neighbors is
/// missing.
pub fn discretize_superquadric(
    params: &SuperquadricParams,
    resolution: &Resolution,
) -> Result<Discretization> {
    params.validate()?;
    let h = resolution.spacing;
    let off = resolution.offset;
    if !h.iter().all(|v| v.is_finite() && *v > 0.0) || !off.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("lattice spacing must be positive".into()));
    }
    let half = [params.a_x, params.a_y, params.a_z];
    let extent: Vec<i64> = (0..3)
        .map(|a| (half[a] / h[a]).ceil() as i64 + off[a].abs().ceil() as i64 + 1)
        .collect();

    let center = |ijk: [i64; 3]| {
        Vector3::new(
            (ijk[0] as f64 + off[0]) * h[0],
            (ijk[1] as f64 + off[1]) * h[1],
            (ijk[2] as f64 + off[2]) * h[2],
        )
    };

    let mut cells: Vec<[i64; 3]> = Vec::new();
    for k in -extent[2]..extent[2] {
        for j in -extent[1]..extent[1] {
            for i in -extent[0]..extent[0] {
                if params.implicit(&center([i, j, k])) <= 1.0 {
                    cells.push([i, j, k]);
                }
            }
        }
    }

    // prune nodes that cannot be held rigidly by their neighbors
    let mut alive: HashMap<[i64; 3], ()> = cells.iter().map(|c| (*c, ())).collect();
    loop {
        let doomed: Vec<[i64; 3]> = cells
            .iter()
            .filter(|c| alive.contains_key(*c))
            .filter(|c| {
                let dirs: Vec<Vector3<f64>> = neighbor_offsets()
                    .filter(|o| alive.contains_key(&add(**c, *o)))
                    .map(|o| Vector3::new(o[0] as f64, o[1] as f64, o[2] as f64))
                    .collect();
                !spans_3d(&dirs)
            })
            .copied()
            .collect();
        if doomed.is_empty() {
            break;
        }
        for d in doomed {
            alive.remove(&d);
        }
    }
    let kept: Vec<[i64; 3]> = cells.into_iter().filter(|c| alive.contains_key(c)).collect();
    if kept.len() < MIN_NODES {
        return Err(Error::Construction(format!(
            "resolution too coarse: {} nodes (minimum {MIN_NODES})",
            kept.len()
        )));
    }
    let index: HashMap<[i64; 3], usize> =
        kept.iter().enumerate().map(|(n, c)| (*c, n)).collect();

    let mut nodes = Vec::with_capacity(kept.len());
    for ijk in &kept {
        let x = center(*ijk);
        // the lattice may hold a node at the primitive center
        let c = if x == Vector3::zeros() {
            ParametricCoords::default()
        } else {
            local_parametric_coords(&x)?
        };
        let is_boundary = AXIS_NEIGHBORS
            .iter()
            .any(|o| !index.contains_key(&add(*ijk, *o)));
        nodes.push(GraphNode { x, c, is_boundary });
    }

    let mut edges = Vec::new();
    for (n, ijk) in kept.iter().enumerate() {
        for o in neighbor_offsets() {
            if let Some(&m) = index.get(&add(*ijk, o)) {
                if m > n {
                    edges.push((n, m));
                }
            }
        }
    }
    Ok(Discretization { nodes, edges })
}

fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn neighbor_offsets() -> impl Iterator<Item = [i64; 3]> {
    (-1..=1).flat_map(move |k| {
        (-1..=1).flat_map(move |j| (-1..=1).map(move |i| [i, j, k]))
    })
    .filter(|o| *o != [0, 0, 0])
}

fn spans_3d(dirs: &[Vector3<f64>]) -> bool {
    if dirs.len() < 3 {
        return false;
    }
    let mut gram = nalgebra::Matrix3::zeros();
    for d in dirs {
        gram += d * d.transpose();
    }
    gram.determinant() > 1e-9
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Rod-network stiffness and lumped mass.
///
/// Each edge is an axial rod with stiffness `E_c * V / L^2`, where `E_c` is the
/// constrained modulus of the material and `V` the voxel volume. The mass is
/// spread uniformly over the nodes; the returned vector is the diagonal of the
/// `3N x 3N` mass matrix.
pub fn assemble_stiffness_mass(
    nodes: &[GraphNode],
    edges: &[(usize, usize)],
    material: &MaterialParams,
    cell_volume: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    material.validate()?;
    let n = nodes.len();
    if !connected(n, edges) {
        return Err(Error::Construction("node graph is disconnected".into()));
    }
    let modulus = material.constrained_modulus();
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    for &(a, b) in edges {
        let d = nodes[b].x - nodes[a].x;
        let len = d.norm();
        let e = d / len;
        let block = (modulus * cell_volume / (len * len)) * e * e.transpose();
        for r in 0..3 {
            for c in 0..3 {
                let v = block[(r, c)];
                k[(3 * a + r, 3 * a + c)] += v;
                k[(3 * b + r, 3 * b + c)] += v;
                k[(3 * a + r, 3 * b + c)] -= v;
                k[(3 * b + r, 3 * a + c)] -= v;
            }
        }
    }
    let mass = DVector::from_element(3 * n, material.total_mass / n as f64);
    Ok((k, mass))
}

/// Lowest `m` generalized eigenpairs of `(K, M)` with `M` diagonal.
///
/// Eigenvectors are mass-orthonormal and each column is flipped so that its
/// largest-magnitude entry is positive.
pub fn solve_low_frequency_modes(
    k: &DMatrix<f64>,
    mass_diag: &DVector<f64>,
    m: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dof = k.nrows();
    if m < RIGID_MODES || m > dof {
        return Err(Error::InvalidParameter(format!(
            "mode count {m} outside [{RIGID_MODES}, {dof}]"
        )));
    }
    if mass_diag.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("mass must be positive".into()));
    }
    let inv_sqrt = mass_diag.map(|v| 1.0 / v.sqrt());
    let mut a = k.clone();
    for j in 0..dof {
        for i in 0..dof {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // exact symmetry for the tridiagonalization
    let a = (&a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or(Error::EigenSolver { residual: f64::NAN })?;

    let mut order: Vec<usize> = (0..dof).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut phi = DMatrix::zeros(dof, m);
    let mut lambdas = DVector::zeros(m);
    for (col, &src) in order.iter().take(m).enumerate() {
        lambdas[col] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).component_mul(&inv_sqrt);
        let pivot = v
            .iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            v.neg_mut();
        }
        phi.set_column(col, &v);
    }

    let kphi = k * &phi;
    let mut mphil = phi.clone();
    for j in 0..m {
        for i in 0..dof {
            mphil[(i, j)] *= mass_diag[i] * lambdas[j];
        }
    }
    let scale = k.norm() * phi.norm();
    let residual = if scale > 0.0 {
        (&kphi - &mphil).norm() / scale
    } else {
        (&kphi - &mphil).norm()
    };
    if !residual.is_finite() || residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::EigenSolver { residual });
    }
    Ok((phi, lambdas))
}

/// Scaling of the mode columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeNormalization {
    /// `phi^T M phi = I`.
    #[default]
    Mass,
    /// Unit Euclidean norm per column.
    Unit,
}

/// Particle graph carrying the truncated mode matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalGraph {
    pub params: SuperquadricParams,
    pub material: MaterialParams,
    pub resolution: Resolution,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
    /// `3N x m`, scaled per `normalization`.
    pub phi: DMatrix<f64>,
    #[serde(default)]
    pub normalization: ModeNormalization,
    /// Ascending eigenvalues.
    pub lambdas: DVector<f64>,
    /// Modal stiffness `phi^T K phi`.
    pub ktilde: DMatrix<f64>,
    /// Mean squared parametric distance between neighboring boundary nodes.
    pub mean_edge_len: f64,
    boundary: Vec<usize>,
}

impl ModalGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn mode_count(&self) -> usize {
        self.phi.ncols()
    }

    /// Indices of boundary nodes, ascending.
    pub fn boundary_indices(&self) -> &[usize] {
        &self.boundary
    }

    /// The `3 x m` block of mode rows of node `i`.
    pub fn node_modes(&self, i: usize) -> DMatrix<f64> {
        self.phi.rows(3 * i, 3).into_owned()
    }

    /// Projection of parametric coordinates onto the primitive, graph frame.
    pub fn surface(&self, c: &ParametricCoords) -> Vector3<f64> {
        superquadric_surface(&self.params, c)
    }

    /// `K~ + I6`, the rigid block regularized by the identity.
    pub fn regularized_modal_stiffness(&self) -> DMatrix<f64> {
        let mut out = self.ktilde.clone();
        for i in 0..RIGID_MODES.min(out.nrows()) {
            out[(i, i)] += 1.0;
        }
        out
    }

    /// `(K~ + I6)^-1`.
    pub fn modal_compliance(&self) -> Result<DMatrix<f64>> {
        let reg = self.regularized_modal_stiffness();
        let sym = (&reg + reg.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(sym)
            .ok_or_else(|| Error::Singular("K~ + I6 is not positive definite".into()))?;
        Ok(chol.inverse())
    }

    /// Same graph with rescaled mode columns; `ktilde` follows as `S ktilde S`.
    pub fn normalized(&self, normalization: ModeNormalization) -> Self {
        if normalization == self.normalization {
            return self.clone();
        }
        let mass = self.material.total_mass / self.node_count() as f64;
        let scale: Vec<f64> = (0..self.mode_count())
            .map(|j| match normalization {
                ModeNormalization::Unit => 1.0 / self.phi.column(j).norm(),
                ModeNormalization::Mass => 1.0 / (self.phi.column(j).norm() * mass.sqrt()),
            })
            .collect();
        let mut g = self.clone();
        for (j, s) in scale.iter().enumerate() {
            g.phi.column_mut(j).scale_mut(*s);
            g.ktilde.column_mut(j).scale_mut(*s);
            g.ktilde.row_mut(j).scale_mut(*s);
        }
        g.normalization = normalization;
        g
    }

    /// Same graph placed at another world pose.
    pub fn with_pose(&self, pose: FramePose) -> Self {
        let mut g = self.clone();
        g.params.pose = pose;
        g
    }

    pub fn to_graph_frame(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.params.pose.to_local(world)
    }

    pub fn to_world_frame(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.params.pose.to_parent(local)
    }
}

/// Discretizes, assembles and solves for the lowest `m` modes.
pub fn build_modal_graph(
    params: &SuperquadricParams,
    material: &MaterialParams,
    resolution: &Resolution,
    m: usize,
) -> Result<ModalGraph> {
    let disc = discretize_superquadric(params, resolution)?;
    let (k, mass) =
        assemble_stiffness_mass(&disc.nodes, &disc.edges, material, resolution.cell_volume())?;
    let (phi, lambdas) = solve_low_frequency_modes(&k, &mass, m)?;
    let ktilde = phi.transpose() * &k * &phi;

    let boundary: Vec<usize> = disc
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.is_boundary)
        .map(|(i, _)| i)
        .collect();
    let mean_edge_len = mean_boundary_edge_distance(&disc.nodes, &disc.edges)?;

    Ok(ModalGraph {
        params: *params,
        material: *material,
        resolution: *resolution,
        nodes: disc.nodes,
        edges: disc.edges,
        phi,
        normalization: ModeNormalization::Mass,
        lambdas,
        ktilde,
        mean_edge_len,
        boundary,
    })
}

fn mean_boundary_edge_distance(nodes: &[GraphNode], edges: &[(usize, usize)]) -> Result<f64> {
    let (sum, count) = edges
        .iter()
        .filter(|(a, b)| nodes[*a].is_boundary && nodes[*b].is_boundary)
        .fold((0.0, 0usize), |(s, n), (a, b)| {
            (s + parametric_distance(&nodes[*a].c, &nodes[*b].c), n + 1)
        });
    if count == 0 {
        return Err(Error::Construction("graph has no boundary edges".into()));
    }
    Ok(sum / count as f64)
}

/// On-disk graph container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub format: String,
    pub version: u32,
    pub graph: ModalGraph,
}

impl GraphFile {
    pub const FORMAT: &'static str = "modalgraph";
    pub const VERSION: u32 = 1;

    pub fn new(graph: ModalGraph) -> Self {
        Self {
            format: Self::FORMAT.into(),
            version: Self::VERSION,
            graph,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<ModalGraph> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let file: GraphFile = serde_json::from_reader(f)?;
        if file.format != Self::FORMAT || file.version != Self::VERSION {
            return Err(Error::Config(format!(
                "unsupported graph file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.graph)
    }
}
