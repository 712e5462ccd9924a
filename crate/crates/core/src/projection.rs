//! Relating measured and manipulated points to the graph.
//!
//! Points are projected to the graph boundary through their local parametric
//! coordinates (latitude/longitude in the point-cloud frame) and their
//! displacement is spread over nearby boundary nodes with normalized
//! exponential inverse-distance weights (Shepard interpolation).

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::ModalGraph;

/// Rigid transform. Maps local coordinates into the parent frame:
/// `x_parent = rotation * x_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for FramePose {
    fn default() -> Self {
        Self::identity()
    }
}

impl FramePose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Checks that `rotation` is orthonormal with determinant +1.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).norm() <= tol
            && (r.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn to_parent(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * local + self.translation
    }

    pub fn to_local(&self, parent: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (parent - self.translation)
    }
}

/// Latitude `zeta` in [-pi/2, pi/2] and longitude `sigma` in [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParametricCoords {
    pub zeta: f64,
    pub sigma: f64,
}

impl ParametricCoords {
    pub fn new(zeta: f64, sigma: f64) -> Self {
        Self { zeta, sigma }
    }

    pub fn in_range(&self) -> bool {
        (-PI / 2.0..=PI / 2.0).contains(&self.zeta) && (-PI..PI).contains(&self.sigma)
    }
}

/// How latitude is computed from a local point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatitudeMode {
    /// `atan2(z, hypot(x, y))`.
    #[default]
    Standard,
    /// `sgn(eps_c . eps_p) * atan(z) * cos(sigma) / max(x, y)`, with the camera
    /// z-axis assumed aligned with the point-cloud z-axis (sign +1).
    Literal,
}

/// Point-cloud frame expressed in the graph frame: identity rotation, origin at
/// the mass center of the points shifted down by `a_z` along z.
pub fn compute_point_cloud_frame(points: &[Vector3<f64>], a_z: f64) -> Result<FramePose> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p);
    let centroid = sum / points.len() as f64;
    Ok(FramePose::from_translation(
        centroid - a_z * Vector3::z(),
    ))
}

/// Latitude/longitude of a point given in the point-cloud frame.
pub fn local_parametric_coords(point: &Vector3<f64>) -> Result<ParametricCoords> {
    local_parametric_coords_with(point, LatitudeMode::Standard)
}

pub fn local_parametric_coords_with(
    point: &Vector3<f64>,
    mode: LatitudeMode,
) -> Result<ParametricCoords> {
    let (x, y, z) = (point.x, point.y, point.z);
    if point.norm() == 0.0 || !point.iter().all(|v| v.is_finite()) {
        return Err(Error::DegeneratePoint);
    }
    let rho = x.hypot(y);
    // longitude is 0 on the polar axis
    let mut sigma = if rho == 0.0 { 0.0 } else { y.atan2(x) };
    if sigma >= PI {
        sigma -= 2.0 * PI;
    }
    let zeta = match mode {
        LatitudeMode::Standard => z.atan2(rho),
        LatitudeMode::Literal => {
            let denom = x.max(y);
            if denom == 0.0 {
                return Err(Error::DegeneratePoint);
            }
            (z.atan() * sigma.cos() / denom).clamp(-PI / 2.0, PI / 2.0)
        }
    };
    Ok(ParametricCoords { zeta, sigma })
}

/// Wraps an angle difference into (-pi, pi].
pub fn wrap_angle(d: f64) -> f64 {
    let mut w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Squared parametric distance with the longitude difference wrapped.
pub fn parametric_distance(c1: &ParametricCoords, c2: &ParametricCoords) -> f64 {
    let dz = c1.zeta - c2.zeta;
    let ds = wrap_angle(c1.sigma - c2.sigma);
    dz * dz + ds * ds
}

/// `d_s = r_s * mean_edge_len`. An infinite `r_s` gives an infinite support.
pub fn support_size(r_s: f64, mean_edge_len: f64) -> f64 {
    if r_s.is_infinite() {
        f64::INFINITY
    } else {
        r_s * mean_edge_len
    }
}

/// Exponential weight with compact support `d_s`; for `d_s = inf` the plain
/// exponential `exp(-d_i / c^2)`.
pub fn weight(d_i: f64, d_s: f64, c: f64) -> f64 {
    let c2 = c * c;
    if d_s.is_infinite() {
        return (-d_i / c2).exp();
    }
    if d_i > d_s {
        return 0.0;
    }
    let tail = (-d_s / c2).exp();
    ((-d_i / c2).exp() - tail) / (1.0 - tail)
}

/// Boundary nodes supporting one point, with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDomain {
    pub node_indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl InfluenceDomain {
    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }
}

/// Domain of influence of a point with parametric coordinates `coords`.
///
/// Candidates are the graph boundary nodes, or `restrict_to` when given (which
/// must hold boundary node indices). Nodes with zero weight are dropped.
pub fn domain_of_influence(
    coords: &ParametricCoords,
    graph: &ModalGraph,
    d_s: f64,
    c: f64,
    restrict_to: Option<&[usize]>,
) -> Result<InfluenceDomain> {
    let candidates = restrict_to.unwrap_or(graph.boundary_indices());
    let mut node_indices = Vec::new();
    let mut raw = Vec::new();
    for &i in candidates {
        let d = parametric_distance(coords, &graph.nodes[i].c);
        let w = weight(d, d_s, c);
        if w > 0.0 {
            node_indices.push(i);
            raw.push(w);
        }
    }
    let total: f64 = raw.iter().sum();
    if node_indices.is_empty() || !(total > 0.0) {
        return Err(Error::UnsupportedPoint);
    }
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(InfluenceDomain {
        node_indices,
        weights,
    })
}

/// Block matrix of normalized weights, `3 * points` by `3 * nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMatrix {
    pub matrix: DMatrix<f64>,
    /// Graph node index of each 3-column block.
    pub nodes: Vec<usize>,
}

impl ShapeMatrix {
    /// Assembles over the sorted union of the nodes used by `domains`.
    pub fn assemble(domains: &[InfluenceDomain]) -> Self {
        let mut nodes: Vec<usize> = domains
            .iter()
            .flat_map(|d| d.node_indices.iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        Self::assemble_over(domains, nodes)
    }

    /// Assembles over a given node universe; every domain node must be in it.
    pub fn assemble_over(domains: &[InfluenceDomain], nodes: Vec<usize>) -> Self {
        let col = |node: usize| {
            nodes
                .binary_search(&node)
                .expect("domain node outside the shape-matrix node universe")
        };
        let mut matrix = DMatrix::zeros(3 * domains.len(), 3 * nodes.len());
        for (p, dom) in domains.iter().enumerate() {
            for (&node, &w) in dom.node_indices.iter().zip(&dom.weights) {
                let j = col(node);
                for a in 0..3 {
                    matrix[(3 * p + a, 3 * j + a)] += w;
                }
            }
        }
        Self { matrix, nodes }
    }

    pub fn point_count(&self) -> usize {
        self.matrix.nrows() / 3
    }

    /// Rows of the graph mode matrix for this matrix's nodes (`3n x m`).
    pub fn gather_modes(&self, graph: &ModalGraph) -> DMatrix<f64> {
        let m = graph.mode_count();
        let mut out = DMatrix::zeros(3 * self.nodes.len(), m);
        for (j, &node) in self.nodes.iter().enumerate() {
            out.rows_mut(3 * j, 3).copy_from(&graph.node_modes(node));
        }
        out
    }
}
