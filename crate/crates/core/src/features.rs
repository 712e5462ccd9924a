//! Modal deformation features from raw point clouds, and their inversion into
//! manipulation-point motion.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::graph::ModalGraph;
use crate::projection::{
    compute_point_cloud_frame, domain_of_influence, local_parametric_coords_with, weight,
    parametric_distance, FramePose, InfluenceDomain, LatitudeMode, ParametricCoords, ShapeMatrix,
};

/// Modal coefficients `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub DVector<f64>);

impl FeatureVector {
    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Support of the weight function for a batch of points.
#[derive(Debug, Clone, Copy)]
pub struct Support<'a> {
    pub d_s: f64,
    /// Candidate nodes; all boundary nodes when `None`.
    pub restrict_to: Option<&'a [usize]>,
}

impl<'a> Support<'a> {
    pub fn new(d_s: f64) -> Self {
        Self {
            d_s,
            restrict_to: None,
        }
    }

    pub fn restricted(d_s: f64, nodes: &'a [usize]) -> Self {
        Self {
            d_s,
            restrict_to: Some(nodes),
        }
    }
}

/// Points projected onto the graph: coordinates, projections and residuals.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Point-cloud frame in the graph frame.
    pub frame: FramePose,
    pub coords: Vec<ParametricCoords>,
    /// Projections on the primitive, graph frame.
    pub gamma: Vec<Vector3<f64>>,
    /// `x - gamma`, graph frame.
    pub residual: Vec<Vector3<f64>>,
}

/// Result of one extraction.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub features: FeatureVector,
    /// Sorted supporting node set `n_p`.
    pub supporting_nodes: Vec<usize>,
    /// `m > min(3l, 3n)` or the extraction map lost numerical rank.
    pub rank_deficient: bool,
    /// Points whose support had to be enlarged to find nodes.
    pub enlarged_points: usize,
    pub point_count: usize,
    pub frame: FramePose,
}

/// Relative singular-value floor for the rank check.
pub const RANK_TOL: f64 = 1e-10;

/// Maximum number of support doublings before falling back to infinite support.
const MAX_ENLARGE: usize = 8;

/// Feature extraction bound to one graph.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<'g> {
    graph: &'g ModalGraph,
    compliance: DMatrix<f64>,
    /// Weight-shape constant.
    pub c: f64,
    pub latitude: LatitudeMode,
}

impl<'g> FeatureExtractor<'g> {
    pub fn new(graph: &'g ModalGraph, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter("weight constant c must be positive".into()));
        }
        if graph.mode_count() < crate::graph::RIGID_MODES {
            return Err(Error::InvalidParameter("at least six modes are required".into()));
        }
        Ok(Self {
            graph,
            compliance: graph.modal_compliance()?,
            c,
            latitude: LatitudeMode::Standard,
        })
    }

    pub fn with_latitude(mut self, mode: LatitudeMode) -> Self {
        self.latitude = mode;
        self
    }

    pub fn graph(&self) -> &ModalGraph {
        self.graph
    }

    /// `(K~ + I6)^-1`.
    pub fn compliance(&self) -> &DMatrix<f64> {
        &self.compliance
    }

    /// Projects world-frame points onto the graph using their own cloud frame.
    pub fn project(&self, points: &[Vector3<f64>]) -> Result<Projection> {
        let local: Vec<Vector3<f64>> =
            points.iter().map(|p| self.graph.to_graph_frame(p)).collect();
        let frame = compute_point_cloud_frame(&local, self.graph.params.a_z)?;
        self.project_in_frame(&local, frame)
    }

    /// Projects graph-frame points through a given cloud frame.
    pub fn project_in_frame(
        &self,
        points_graph: &[Vector3<f64>],
        frame: FramePose,
    ) -> Result<Projection> {
        let mut coords = Vec::with_capacity(points_graph.len());
        let mut gamma = Vec::with_capacity(points_graph.len());
        let mut residual = Vec::with_capacity(points_graph.len());
        for p in points_graph {
            let c = local_parametric_coords_with(&frame.to_local(p), self.latitude)?;
            let g = self.graph.surface(&c);
            coords.push(c);
            gamma.push(g);
            residual.push(p - g);
        }
        Ok(Projection {
            frame,
            coords,
            gamma,
            residual,
        })
    }

    /// Domain of influence, doubling `d_s` for unsupported points and finally
    /// using the infinite support. Returns the domain and whether it was enlarged.
    pub fn supported_domain(
        &self,
        coords: &ParametricCoords,
        support: &Support<'_>,
    ) -> Result<(InfluenceDomain, bool)> {
        let mut d_s = support.d_s;
        for attempt in 0..=MAX_ENLARGE + 1 {
            if attempt == MAX_ENLARGE + 1 {
                d_s = f64::INFINITY;
            }
            match domain_of_influence(coords, self.graph, d_s, self.c, support.restrict_to) {
                Ok(dom) => return Ok((dom, attempt > 0)),
                Err(Error::UnsupportedPoint) if d_s.is_finite() => d_s *= 2.0,
                Err(e) => return Err(e),
            }
        }
        Err(Error::UnsupportedPoint)
    }

    /// `s = (K~ + I6)^-1 Phi(n_p)^T Psi^T u_gamma` for world-frame points.
    pub fn extract(&self, points: &[Vector3<f64>], support: &Support<'_>) -> Result<Extraction> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let proj = self.project(points)?;
        let mut domains = Vec::with_capacity(points.len());
        let mut enlarged_points = 0;
        for c in &proj.coords {
            let (dom, enlarged) = self.supported_domain(c, support)?;
            enlarged_points += enlarged as usize;
            domains.push(dom);
        }
        let psi = ShapeMatrix::assemble(&domains);
        let phi_np = psi.gather_modes(self.graph);
        let u = stack(&proj.residual);

        let map = &self.compliance * phi_np.transpose() * psi.matrix.transpose();
        let s = &map * u;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }

        let m = self.graph.mode_count();
        let l = points.len();
        let n = psi.nodes.len();
        let rank_deficient = m > 3 * l.min(n) || !has_full_row_rank(&map);
        Ok(Extraction {
            features: FeatureVector(s),
            supporting_nodes: psi.nodes,
            rank_deficient,
            enlarged_points,
            point_count: l,
            frame: proj.frame,
        })
    }

    /// Union of the supporting node sets of several clouds under support `d_s`.
    pub fn restriction_set(&self, clouds: &[&[Vector3<f64>]], d_s: f64) -> Result<Vec<usize>> {
        let mut nodes = Vec::new();
        for cloud in clouds {
            nodes.extend(self.extract(cloud, &Support::new(d_s))?.supporting_nodes);
        }
        nodes.sort_unstable();
        nodes.dedup();
        Ok(nodes)
    }

    /// Desired features `s*` and the restriction set `S`.
    ///
    /// `S` is the supporting set of the desired cloud under `d_s_init`; `s*` is
    /// then extracted with the runtime support `d_s` restricted to `S`, the same
    /// way as every later measurement.
    pub fn desired(
        &self,
        desired_points: &[Vector3<f64>],
        d_s_init: f64,
        d_s: f64,
    ) -> Result<(FeatureVector, Vec<usize>)> {
        let set = self.restriction_set(&[desired_points], d_s_init)?;
        let ex = self.extract(desired_points, &Support::restricted(d_s, &set))?;
        Ok((ex.features, set))
    }

    /// Mean feature vector over several frames of the same shape.
    pub fn mean_features(
        &self,
        clouds: &[&[Vector3<f64>]],
        support: &Support<'_>,
    ) -> Result<FeatureVector> {
        if clouds.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut sum = DVector::zeros(self.graph.mode_count());
        for cloud in clouds {
            sum += self.extract(cloud, support)?.features.0;
        }
        Ok(FeatureVector(sum / clouds.len() as f64))
    }
}

fn has_full_row_rank(map: &DMatrix<f64>) -> bool {
    let m = map.nrows();
    if map.ncols() < m {
        return false;
    }
    let sv = map.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > RANK_TOL * max
}

pub(crate) fn stack(v: &[Vector3<f64>]) -> DVector<f64> {
    DVector::from_iterator(3 * v.len(), v.iter().flat_map(|p| p.iter().copied()))
}

/// A linear map from feature changes to manipulation motion.
pub trait FeatureInversion {
    /// The `rows x m` matrix of the map.
    fn jacobian(&self) -> &DMatrix<f64>;

    fn invert(&self, delta_s: &DVector<f64>) -> DVector<f64> {
        self.jacobian() * delta_s
    }
}

/// Quantities of the manipulation points frozen at `t0`.
#[derive(Debug, Clone)]
pub struct ManipulationSetup {
    /// World-frame positions at `t0`.
    pub r_positions_t0: Vec<Vector3<f64>>,
    /// The same positions in the graph frame.
    pub r_graph_t0: Vec<Vector3<f64>>,
    /// Cloud frame (graph frame) used for the projections.
    pub frame: FramePose,
    pub coords: Vec<ParametricCoords>,
    /// Projections of the manipulation points, graph frame.
    pub gamma_r: Vec<Vector3<f64>>,
    pub psi_r: ShapeMatrix,
    /// `3h x m`.
    pub phi_r: DMatrix<f64>,
    /// `H = Psi_r Phi_r`, `3k x m`.
    pub h: DMatrix<f64>,
    pub d_s: f64,
    pub c: f64,
    latitude: LatitudeMode,
}

impl ManipulationSetup {
    pub fn k(&self) -> usize {
        self.r_positions_t0.len()
    }

    /// Supporting node set `n_r`.
    pub fn supporting_nodes(&self) -> &[usize] {
        &self.psi_r.nodes
    }

    /// `u_gamma(r, t) = x(r, t) - gamma(c(r, t0))`, graph frame, stacked.
    pub fn displacement(&self, graph: &ModalGraph, r_world: &[Vector3<f64>]) -> DVector<f64> {
        let d: Vec<Vector3<f64>> = r_world
            .iter()
            .zip(&self.gamma_r)
            .map(|(x, g)| graph.to_graph_frame(x) - g)
            .collect();
        stack(&d)
    }
}

impl FeatureInversion for ManipulationSetup {
    fn jacobian(&self) -> &DMatrix<f64> {
        &self.h
    }
}

/// Builds the manipulation setup at `t0`.
///
/// `cloud_frame` is the point-cloud frame of the `t0` measurement (graph frame).
pub fn manipulation_setup(
    extractor: &FeatureExtractor<'_>,
    r_positions: &[Vector3<f64>],
    cloud_frame: FramePose,
    d_s: f64,
) -> Result<ManipulationSetup> {
    if r_positions.is_empty() {
        return Err(Error::InvalidParameter("at least one manipulation point".into()));
    }
    let graph = extractor.graph();
    let local: Vec<Vector3<f64>> = r_positions.iter().map(|p| graph.to_graph_frame(p)).collect();
    let proj = extractor.project_in_frame(&local, cloud_frame)?;
    let domains = proj
        .coords
        .iter()
        .map(|c| domain_of_influence(c, graph, d_s, extractor.c, None))
        .collect::<Result<Vec<_>>>()?;
    let psi_r = ShapeMatrix::assemble(&domains);
    let phi_r = psi_r.gather_modes(graph);
    let h = &psi_r.matrix * &phi_r;
    Ok(ManipulationSetup {
        r_positions_t0: r_positions.to_vec(),
        r_graph_t0: local,
        frame: cloud_frame,
        coords: proj.coords,
        gamma_r: proj.gamma,
        psi_r,
        phi_r,
        h,
        d_s,
        c: extractor.c,
        latitude: extractor.latitude,
    })
}

/// `D(r, delta_s) = H delta_s`.
pub fn feature_inversion(setup: &impl FeatureInversion, delta_s: &DVector<f64>) -> DVector<f64> {
    setup.invert(delta_s)
}

/// Manipulation setup extended with the modal rotation rows.
#[derive(Debug, Clone)]
pub struct RotationalSetup {
    pub base: ManipulationSetup,
    /// `3k x 3h`, half the curl of the weight field per node.
    pub psi_w: DMatrix<f64>,
    /// `[Psi; Psi_w] Phi`, `6k x m` (all translation rows, then all rotation rows).
    pub h_bar: DMatrix<f64>,
    pub fd_step: f64,
}

impl FeatureInversion for RotationalSetup {
    fn jacobian(&self) -> &DMatrix<f64> {
        &self.h_bar
    }
}

impl RotationalSetup {
    /// Converts `[u_dot; omega_gamma]` of the projections into manipulation-point
    /// linear and angular velocities, inverting
    /// `u_dot = x_dot + [u_gamma(t0)]_x^T omega`.
    pub fn to_manipulation_twist(&self, v: &DVector<f64>) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let k = self.base.k();
        let mut linear = Vec::with_capacity(k);
        let mut angular = Vec::with_capacity(k);
        for i in 0..k {
            let u_dot = Vector3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
            let omega = Vector3::new(v[3 * k + 3 * i], v[3 * k + 3 * i + 1], v[3 * k + 3 * i + 2]);
            let u0 = self.base.r_graph_t0[i] - self.base.gamma_r[i];
            linear.push(u_dot - skew(&u0).transpose() * omega);
            angular.push(omega);
        }
        (linear, angular)
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Normalized weights of the nodes `nodes` at a graph-frame position.
fn weights_at(
    graph: &ModalGraph,
    setup: &ManipulationSetup,
    nodes: &[usize],
    x_graph: &Vector3<f64>,
) -> Result<Vec<f64>> {
    let c = local_parametric_coords_with(&setup.frame.to_local(x_graph), setup.latitude)?;
    let raw: Vec<f64> = nodes
        .iter()
        .map(|&j| weight(parametric_distance(&c, &graph.nodes[j].c), setup.d_s, setup.c))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UnsupportedPoint);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Central-difference curl of a vector field.
pub fn fd_curl(
    field: impl Fn(&Vector3<f64>) -> Vector3<f64>,
    at: &Vector3<f64>,
    step: f64,
) -> Vector3<f64> {
    let mut jac = Matrix3::zeros(); // jac[(i, a)] = d field_i / d x_a
    for a in 0..3 {
        let mut e = Vector3::zeros();
        e[a] = step;
        let d = (field(&(at + e)) - field(&(at - e))) / (2.0 * step);
        jac.set_column(a, &d);
    }
    Vector3::new(
        jac[(2, 1)] - jac[(1, 2)],
        jac[(0, 2)] - jac[(2, 0)],
        jac[(1, 0)] - jac[(0, 1)],
    )
}

/// Adds the rotation rows `Psi_w Phi(n_r)` to a manipulation setup.
///
/// The weight gradients are central differences with step `fd_step` (graph
/// units) at each manipulation point's `t0` position.
pub fn modal_rotation_setup(
    setup: &ManipulationSetup,
    graph: &ModalGraph,
    fd_step: f64,
) -> Result<RotationalSetup> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParameter("fd_step must be positive".into()));
    }
    let nodes = setup.supporting_nodes().to_vec();
    let k = setup.k();
    let mut psi_w = DMatrix::zeros(3 * k, 3 * nodes.len());
    for (i, x) in setup.r_graph_t0.iter().enumerate() {
        let mut grads = vec![Vector3::zeros(); nodes.len()];
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = fd_step;
            let wp = weights_at(graph, setup, &nodes, &(x + e))?;
            let wm = weights_at(graph, setup, &nodes, &(x - e))?;
            for j in 0..nodes.len() {
                grads[j][a] = (wp[j] - wm[j]) / (2.0 * fd_step);
            }
        }
        for (j, g) in grads.iter().enumerate() {
            let block = 0.5 * skew(g);
            psi_w
                .view_mut((3 * i, 3 * j), (3, 3))
                .copy_from(&block);
        }
    }
    let rot = &psi_w * &setup.phi_r;
    let m = setup.h.ncols();
    let mut h_bar = DMatrix::zeros(6 * k, m);
    h_bar.rows_mut(0, 3 * k).copy_from(&setup.h);
    h_bar.rows_mut(3 * k, 3 * k).copy_from(&rot);
    Ok(RotationalSetup {
        base: setup.clone(),
        psi_w,
        h_bar,
        fd_step,
    })
}
