//! Ground-truth deformable objects: a quasi-static linear tetrahedral FEM body,
//! and a matched-model plant evolving directly in feature space.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, SMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::w_of;
use crate::error::{Error, Result};
use crate::graph::MaterialParams;

/// Parametric blob: an egg-shaped ellipsoid with a spherical notch, filled
/// with a cubic lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    /// Semi-axes; `front_x` replaces the x semi-axis for `x > 0`.
    pub semi_axes: [f64; 3],
    pub front_x: f64,
    pub spacing: f64,
    /// Notch sphere center relative to the blob center, and radius (0 disables).
    pub notch_center: [f64; 3],
    pub notch_radius: f64,
    /// World position of the blob center.
    pub center: [f64; 3],
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub total_mass: f64,
    /// Bottom-layer nodes within this fraction of the length from the back are fixed.
    pub fixed_fraction: f64,
    /// Number of manipulation nodes picked automatically on the front top surface.
    pub manip_count: usize,
    /// Explicit manipulation nodes, overriding `manip_count`.
    pub manip_nodes: Option<Vec<usize>>,
    /// Number of observable top-surface nodes.
    pub observable_count: usize,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            semi_axes: [0.10, 0.08, 0.045],
            front_x: 0.13,
            spacing: 0.018,
            notch_center: [0.02, 0.08, 0.0],
            notch_radius: 0.03,
            center: [0.0, 0.0, 0.0],
            youngs_modulus: 5000.0,
            poisson_ratio: 0.47,
            total_mass: 100.0,
            fixed_fraction: 0.3,
            manip_count: 1,
            manip_nodes: None,
            observable_count: 30,
        }
    }
}

impl PlantConfig {
    pub fn material(&self) -> MaterialParams {
        MaterialParams::new(self.youngs_modulus, self.poisson_ratio, self.total_mass)
    }

    fn inside(&self, p: &Vector3<f64>) -> bool {
        let ax = if p.x > 0.0 { self.front_x } else { self.semi_axes[0] };
        let e = (p.x / ax).powi(2) + (p.y / self.semi_axes[1]).powi(2)
            + (p.z / self.semi_axes[2]).powi(2);
        let notch = Vector3::from(self.notch_center);
        e <= 1.0 + 1e-12 && (p - notch).norm() > self.notch_radius
    }

    fn validate(&self) -> Result<()> {
        let positive = self.semi_axes.iter().all(|a| *a > 0.0)
            && self.front_x > 0.0
            && self.spacing > 0.0
            && self.notch_radius >= 0.0
            && self.fixed_fraction > 0.0
            && self.fixed_fraction <= 1.0
            && self.observable_count > 0;
        if !positive {
            return Err(Error::InvalidParameter("invalid plant geometry".into()));
        }
        self.material().validate()
    }
}

/// Linear tetrahedral FEM body with Dirichlet fixed and manipulation nodes.
#[derive(Debug, Clone)]
pub struct FemPlant {
    pub rest_positions: Vec<Vector3<f64>>,
    pub tets: Vec<[usize; 4]>,
    pub material: MaterialParams,
    /// Full `3P x 3P` stiffness.
    pub stiffness: DMatrix<f64>,
    pub fixed_set: Vec<usize>,
    pub manip_set: Vec<usize>,
    pub observable_set: Vec<usize>,
    free_dofs: Vec<usize>,
    manip_dofs: Vec<usize>,
    k_ff: Cholesky<f64, Dyn>,
    k_ff_dense: DMatrix<f64>,
    k_fc: DMatrix<f64>,
    /// `-K_ff^-1 K_fc`.
    response: DMatrix<f64>,
    stiffness_norm: f64,
    /// Imposed manipulation displacements, stacked.
    manip_displacement: DVector<f64>,
    /// External nodal forces on free DOFs.
    force: DVector<f64>,
    displacement: DVector<f64>,
}

const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Builds the blob lattice body.
pub fn build_test_object(config: &PlantConfig) -> Result<FemPlant> {
    config.validate()?;
    let h = config.spacing;
    let ext = [config.semi_axes[0].max(config.front_x), config.semi_axes[1], config.semi_axes[2]];
    let n: Vec<i64> = ext.iter().map(|e| (e / h).ceil() as i64 + 1).collect();
    let point = |i: i64, j: i64, k: i64| Vector3::new(i as f64 * h, j as f64 * h, k as f64 * h);

    // Cells whose eight corners are all inside.
    let mut cells = Vec::new();
    for i in -n[0]..n[0] {
        for j in -n[1]..n[1] {
            for k in -n[2]..n[2] {
                let all = (0..8).all(|b| {
                    config.inside(&point(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)))
                });
                if all {
                    cells.push([i, j, k]);
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Construction("plant lattice has no cells".into()));
    }

    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut lattice = Vec::new();
    let mut tets = Vec::new();
    let center = Vector3::from(config.center);
    for cell in &cells {
        let mut corner = [0usize; 8];
        for (b, slot) in corner.iter_mut().enumerate() {
            let key = [cell[0] + (b as i64 & 1), cell[1] + ((b as i64 >> 1) & 1), cell[2] + ((b as i64 >> 2) & 1)];
            *slot = *index.entry(key).or_insert_with(|| {
                lattice.push(key);
                lattice.len() - 1
            });
        }
        for perm in KUHN {
            let mut bits = 0usize;
            let mut tet = [corner[0]; 4];
            for (s, axis) in perm.iter().enumerate() {
                bits |= 1 << axis;
                tet[s + 1] = corner[bits];
            }
            tets.push(tet);
        }
    }
    let rest_positions: Vec<Vector3<f64>> = lattice
        .iter()
        .map(|k| point(k[0], k[1], k[2]) + center)
        .collect();
    for t in &mut tets {
        if signed_volume(&rest_positions, t) < 0.0 {
            t.swap(2, 3);
        }
    }

    let p = rest_positions.len();
    let material = config.material();
    let stiffness = assemble_tet_stiffness(&rest_positions, &tets, &material)?;

    let has = |k: [i64; 3]| index.contains_key(&k);
    let top: Vec<usize> = (0..p)
        .filter(|&i| {
            let k = lattice[i];
            !has([k[0], k[1], k[2] + 1])
        })
        .collect();
    let x_min = rest_positions.iter().map(|x| x.x).fold(f64::INFINITY, f64::min);
    let x_max = rest_positions.iter().map(|x| x.x).fold(f64::NEG_INFINITY, f64::max);
    let length = x_max - x_min;
    let fixed_set: Vec<usize> = (0..p)
        .filter(|&i| {
            let k = lattice[i];
            !has([k[0], k[1], k[2] - 1])
                && rest_positions[i].x <= x_min + config.fixed_fraction * length
        })
        .collect();
    if fixed_set.len() < 3 {
        return Err(Error::Construction("fewer than three fixed nodes".into()));
    }

    let manip_set = match &config.manip_nodes {
        Some(nodes) => {
            if nodes.is_empty() || nodes.iter().any(|&i| i >= p || fixed_set.contains(&i)) {
                return Err(Error::InvalidParameter("invalid manipulation nodes".into()));
            }
            nodes.clone()
        }
        None => {
            let front: Vec<usize> = top
                .iter()
                .copied()
                .filter(|&i| rest_positions[i].x >= x_max - 0.35 * length && !fixed_set.contains(&i))
                .collect();
            let start = *front
                .iter()
                .max_by(|&&a, &&b| rest_positions[a].x.total_cmp(&rest_positions[b].x))
                .ok_or_else(|| Error::Construction("no manipulation candidates".into()))?;
            farthest_point_sampling(&rest_positions, &front, start, config.manip_count)?
        }
    };

    let candidates: Vec<usize> = top
        .iter()
        .copied()
        .filter(|i| !manip_set.contains(i) && !fixed_set.contains(i))
        .collect();
    let start = *candidates
        .iter()
        .max_by(|&&a, &&b| rest_positions[a].x.total_cmp(&rest_positions[b].x))
        .ok_or_else(|| Error::Construction("no observable candidates".into()))?;
    let observable_set =
        farthest_point_sampling(&rest_positions, &candidates, start, config.observable_count)?;

    FemPlant::new(rest_positions, tets, material, stiffness, fixed_set, manip_set, observable_set)
}

fn signed_volume(x: &[Vector3<f64>], t: &[usize; 4]) -> f64 {
    Matrix3::from_columns(&[x[t[1]] - x[t[0]], x[t[2]] - x[t[0]], x[t[3]] - x[t[0]]]).determinant() / 6.0
}

/// Greedy farthest-point subset of `candidates`, starting at `start`.
fn farthest_point_sampling(
    x: &[Vector3<f64>],
    candidates: &[usize],
    start: usize,
    count: usize,
) -> Result<Vec<usize>> {
    if count > candidates.len() {
        return Err(Error::Construction(format!(
            "requested {count} nodes but only {} candidates",
            candidates.len()
        )));
    }
    let mut chosen = vec![start];
    let mut dist: Vec<f64> = candidates.iter().map(|&c| (x[c] - x[start]).norm()).collect();
    while chosen.len() < count {
        let (best, _) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("candidates nonempty");
        let node = candidates[best];
        chosen.push(node);
        for (d, &c) in dist.iter_mut().zip(candidates) {
            *d = d.min((x[c] - x[node]).norm());
        }
    }
    Ok(chosen)
}

/// Linear elastic stiffness of a tetrahedral mesh.
pub fn assemble_tet_stiffness(
    x: &[Vector3<f64>],
    tets: &[[usize; 4]],
    material: &MaterialParams,
) -> Result<DMatrix<f64>> {
    material.validate()?;
    let e = material.youngs_modulus;
    let nu = material.poisson_ratio;
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }

    let n = x.len();
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    for t in tets {
        let dm = Matrix3::from_columns(&[x[t[1]] - x[t[0]], x[t[2]] - x[t[0]], x[t[3]] - x[t[0]]]);
        let vol = dm.determinant() / 6.0;
        let inv = dm
            .try_inverse()
            .filter(|_| vol > 0.0)
            .ok_or_else(|| Error::Construction("degenerate tetrahedron".into()))?;
        let mut grads = [Vector3::zeros(); 4];
        for a in 0..3 {
            grads[a + 1] = inv.row(a).transpose();
        }
        grads[0] = -(grads[1] + grads[2] + grads[3]);
        let mut b = SMatrix::<f64, 6, 12>::zeros();
        for (a, g) in grads.iter().enumerate() {
            let c = 3 * a;
            b[(0, c)] = g.x;
            b[(1, c + 1)] = g.y;
            b[(2, c + 2)] = g.z;
            b[(3, c)] = g.y;
            b[(3, c + 1)] = g.x;
            b[(4, c + 1)] = g.z;
            b[(4, c + 2)] = g.y;
            b[(5, c)] = g.z;
            b[(5, c + 2)] = g.x;
        }
        let ke = b.transpose() * d * b * vol;
        for (a, &na) in t.iter().enumerate() {
            for (bb, &nb) in t.iter().enumerate() {
                let mut blk = k.view_mut((3 * na, 3 * nb), (3, 3));
                blk += ke.fixed_view::<3, 3>(3 * a, 3 * bb);
            }
        }
    }
    Ok(k)
}

impl FemPlant {
    pub fn new(
        rest_positions: Vec<Vector3<f64>>,
        tets: Vec<[usize; 4]>,
        material: MaterialParams,
        stiffness: DMatrix<f64>,
        fixed_set: Vec<usize>,
        manip_set: Vec<usize>,
        observable_set: Vec<usize>,
    ) -> Result<Self> {
        let p = rest_positions.len();
        if fixed_set.iter().any(|i| manip_set.contains(i)) {
            return Err(Error::InvalidParameter("fixed and manipulation sets overlap".into()));
        }
        if observable_set.is_empty() || observable_set.iter().any(|&i| i >= p) {
            return Err(Error::InvalidParameter("invalid observable set".into()));
        }
        let mut constrained = vec![false; p];
        for &i in fixed_set.iter().chain(&manip_set) {
            constrained[i] = true;
        }
        let free_dofs: Vec<usize> = (0..p)
            .filter(|&i| !constrained[i])
            .flat_map(|i| 3 * i..3 * i + 3)
            .collect();
        let manip_dofs: Vec<usize> = manip_set.iter().flat_map(|&i| 3 * i..3 * i + 3).collect();
        let k_ff = stiffness.select_rows(&free_dofs).select_columns(&free_dofs);
        let k_fc = stiffness.select_rows(&free_dofs).select_columns(&manip_dofs);
        let k_ff_dense = k_ff.clone();
        let k_ff = Cholesky::new(k_ff)
            .ok_or_else(|| Error::Singular("constrained stiffness is not positive definite".into()))?;
        let response = -k_ff.solve(&k_fc);
        let stiffness_norm = stiffness.norm();
        let nm = manip_dofs.len();
        let nf = free_dofs.len();
        Ok(Self {
            rest_positions,
            tets,
            material,
            stiffness,
            fixed_set,
            manip_set,
            observable_set,
            free_dofs,
            manip_dofs,
            k_ff,
            k_ff_dense,
            k_fc,
            response,
            stiffness_norm,
            manip_displacement: DVector::zeros(nm),
            force: DVector::zeros(nf),
            displacement: DVector::zeros(3 * p),
        })
    }

    pub fn node_count(&self) -> usize {
        self.rest_positions.len()
    }

    /// Free-node displacements for given manipulation displacements (`K_ff u_f = -K_fc u_c + f`).
    pub fn quasi_static_solve(&mut self, manip_displacements: &DVector<f64>) -> Result<()> {
        if manip_displacements.len() != self.manip_dofs.len() {
            return Err(Error::Dimension("one 3-vector per manipulation node".into()));
        }
        if !manip_displacements.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("manipulation displacement"));
        }
        self.manip_displacement = manip_displacements.clone();
        self.update();
        Ok(())
    }

    fn update(&mut self) {
        let mut u_f = &self.response * &self.manip_displacement;
        if self.force.iter().any(|f| *f != 0.0) {
            u_f += self.k_ff.solve(&self.force);
        }
        self.displacement.fill(0.0);
        for (k, &dof) in self.free_dofs.iter().enumerate() {
            self.displacement[dof] = u_f[k];
        }
        for (k, &dof) in self.manip_dofs.iter().enumerate() {
            self.displacement[dof] = self.manip_displacement[k];
        }
    }

    /// Moves the manipulation nodes by `v dt` and re-solves equilibrium.
    pub fn step_manipulation(&mut self, v: &DVector<f64>, dt: f64) -> Result<()> {
        if v.len() != self.manip_dofs.len() {
            return Err(Error::Dimension("one 3-vector per manipulation node".into()));
        }
        let target = &self.manip_displacement + v * dt;
        self.quasi_static_solve(&target)
    }

    /// Sets the external forces on nodes; forces on constrained nodes are ignored.
    pub fn set_forces(&mut self, forces: &[(usize, Vector3<f64>)]) -> Result<()> {
        let mut f = DVector::zeros(3 * self.node_count());
        for (i, v) in forces {
            if *i >= self.node_count() || !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParameter("invalid force".into()));
            }
            let mut blk = f.fixed_rows_mut::<3>(3 * i);
            blk += v;
        }
        self.force = f.select_rows(&self.free_dofs);
        self.update();
        Ok(())
    }

    pub fn clear_forces(&mut self) {
        if self.force.iter().any(|f| *f != 0.0) {
            self.force.fill(0.0);
            self.update();
        }
    }

    /// Back to rest: zero manipulation displacement and no forces.
    pub fn reset(&mut self) {
        self.manip_displacement.fill(0.0);
        self.force.fill(0.0);
        self.update();
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    pub fn manip_displacement(&self) -> &DVector<f64> {
        &self.manip_displacement
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        self.rest_positions[i] + self.displacement.fixed_rows::<3>(3 * i)
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        (0..self.node_count()).map(|i| self.position(i)).collect()
    }

    pub fn manip_positions(&self) -> Vec<Vector3<f64>> {
        self.manip_set.iter().map(|&i| self.position(i)).collect()
    }

    /// `||K_ff u_f + K_fc u_c - f|| / (||K|| ||u||)`, zero at rest.
    pub fn equilibrium_residual(&self) -> f64 {
        let u_f = self.displacement.select_rows(&self.free_dofs);
        let r = &self.k_ff_dense * &u_f + &self.k_fc * &self.manip_displacement
            - &self.force;
        let scale = self.stiffness_norm * self.displacement.norm();
        if scale == 0.0 {
            r.norm()
        } else {
            r.norm() / scale
        }
    }

    /// `u^T K u / 2`.
    pub fn strain_energy(&self) -> f64 {
        0.5 * self.displacement.dot(&(&self.stiffness * &self.displacement))
    }
}

/// Feature-space plant `s_dot = W(theta_true) H^T v + eta`.
#[derive(Debug, Clone)]
pub struct MatchedPlant {
    theta_true: DVector<f64>,
    pub s: DVector<f64>,
}

impl MatchedPlant {
    pub fn new(theta_true: DVector<f64>, s0: DVector<f64>) -> Result<Self> {
        if theta_true.len() != s0.len() {
            return Err(Error::Dimension("theta and s sizes differ".into()));
        }
        if !theta_true.iter().all(|t| *t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter("theta_true entries must be positive".into()));
        }
        Ok(Self { theta_true, s: s0 })
    }

    pub fn theta_true(&self) -> &DVector<f64> {
        &self.theta_true
    }

    /// `s += dt (W(theta_true) H^T v + eta)`.
    pub fn step(
        &mut self,
        v: &DVector<f64>,
        h: &DMatrix<f64>,
        compliance: &DMatrix<f64>,
        dt: f64,
        eta: Option<&DVector<f64>>,
    ) {
        let mut ds = w_of(&self.theta_true, compliance) * (h.transpose() * v);
        if let Some(eta) = eta {
            ds += eta;
        }
        self.s += ds * dt;
    }
}

/// Bounded external force applied on plant nodes during `[start_step, end_step)`.
///
/// With a `direction` every node receives the constant force
/// `bound * direction / |direction|`; without one each node and step draws an
/// independent force uniformly in the ball of radius `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub nodes: Vec<usize>,
    pub bound: f64,
    pub start_step: usize,
    pub end_step: usize,
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
}

impl Disturbance {
    pub fn is_active(&self, step: usize) -> bool {
        step >= self.start_step && step < self.end_step
    }

    /// Per-node forces at `step`; every force has norm at most `bound`.
    pub fn forces(&self, step: usize, seed: u64) -> Vec<(usize, Vector3<f64>)> {
        if !self.is_active(step) || self.bound == 0.0 {
            return Vec::new();
        }
        match self.direction {
            Some(direction) => {
                let d = Vector3::from(direction);
                let n = d.norm();
                let f = if n > 0.0 { d * (self.bound / n) } else { Vector3::zeros() };
                self.nodes.iter().map(|&i| (i, f)).collect()
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6469_7374_7572_6221);
                rng.set_stream(step as u64);
                self.nodes
                    .iter()
                    .map(|&i| {
                        let f = loop {
                            let v = Vector3::new(
                                rng.random_range(-1.0..=1.0),
                                rng.random_range(-1.0..=1.0),
                                rng.random_range(-1.0..=1.0),
                            );
                            if v.norm_squared() <= 1.0 {
                                break v;
                            }
                        };
                        (i, f * self.bound)
                    })
                    .collect()
            }
        }
    }
}

/// Applies the summed forces of all disturbances at `step`.
pub fn inject_disturbance(
    plant: &mut FemPlant,
    profile: &[Disturbance],
    step: usize,
    seed: u64,
) -> Result<()> {
    let forces: Vec<_> = profile.iter().flat_map(|d| d.forces(step, seed)).collect();
    if forces.is_empty() {
        plant.clear_forces();
        Ok(())
    } else {
        plant.set_forces(&forces)
    }
}
