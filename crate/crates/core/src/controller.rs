//! Adaptive robust velocity controller on modal feature errors.
//!
//! `v = -k_s H W(theta_hat)^T z - k_d H W(theta_hat)^T e_s`, with `z` a
//! first-order filtered copy of `e_s` and `theta_hat` adapted online through
//! the regression matrix `Y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureInversion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub k_s: f64,
    /// Smooth gain in (0, 1]; the filter constant is `k = (1 - q) / q`.
    pub q: f64,
    pub k_d: f64,
    pub gamma: f64,
    /// Control period in seconds.
    pub dt: f64,
}

impl Gains {
    /// Gains given the filter constant `k` instead of `q`.
    pub fn with_filter_constant(k_s: f64, k: f64, k_d: f64, gamma: f64, dt: f64) -> Self {
        Self {
            k_s,
            q: 1.0 / (1.0 + k),
            k_d,
            gamma,
            dt,
        }
    }

    /// Simulation gains: `k_s = 150`, `k = 0.6`, `k_d = 7.5`, `Gamma = 500` at 50 Hz.
    pub fn simulation() -> Self {
        Self::with_filter_constant(150.0, 0.6, 7.5, 500.0, 0.02)
    }

    pub fn k(&self) -> f64 {
        (1.0 - self.q) / self.q
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.k_s > 0.0
            && self.q > 0.0
            && self.q <= 1.0
            && self.k_d > 0.0
            && self.gamma > 0.0
            && self.dt > 0.0
            && [self.k_s, self.k_d, self.gamma, self.dt].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid gains {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Dynamic extension; `None` until the first error is seen.
    pub z: Option<DVector<f64>>,
    pub theta_hat: DVector<f64>,
}

impl ControllerState {
    pub fn new(m: usize) -> Self {
        Self {
            z: None,
            theta_hat: DVector::from_element(m, 1.0),
        }
    }
}

/// One explicit Euler step of `k z_dot = e_s - z`. `z` starts at `e_s`, and
/// `q = 1` makes the filter transparent.
pub fn dynamic_extension_step(
    z: Option<&DVector<f64>>,
    e_s: &DVector<f64>,
    gains: &Gains,
) -> DVector<f64> {
    let k = gains.k();
    match z {
        Some(z) if k > 0.0 => z + (e_s - z) * (gains.dt / k),
        _ => e_s.clone(),
    }
}

/// `W(theta) = diag(theta) (K~ + I6)^-1`.
pub fn w_of(theta: &DVector<f64>, compliance: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = compliance.clone();
    for (i, t) in theta.iter().enumerate() {
        w.row_mut(i).scale_mut(*t);
    }
    w
}

/// `v_s = -k_s D(r, W(theta_hat)^T z)`.
pub fn nominal_term(
    z: &DVector<f64>,
    theta_hat: &DVector<f64>,
    inversion: &impl FeatureInversion,
    compliance: &DMatrix<f64>,
    gains: &Gains,
) -> DVector<f64> {
    let w = w_of(theta_hat, compliance);
    inversion.invert(&(w.transpose() * z)) * -gains.k_s
}

/// `v_d = -k_d D(r, W(theta_hat)^T e_s)`.
pub fn robust_term(
    e_s: &DVector<f64>,
    theta_hat: &DVector<f64>,
    inversion: &impl FeatureInversion,
    compliance: &DMatrix<f64>,
    gains: &Gains,
) -> DVector<f64> {
    let w = w_of(theta_hat, compliance);
    inversion.invert(&(w.transpose() * e_s)) * -gains.k_d
}

/// Regression matrix `Y = diag(g)`, `g = (K~ + I6)^-1 H^T b`, with
/// `b = k_s H W(theta_hat)^T z + k_d H W(theta_hat)^T e_s`.
///
/// It satisfies `(W(theta_hat) - W(theta)) H^T b = Y (theta_hat - theta)` for
/// every `theta`, since `diag(a) c = diag(c) a`.
pub fn regression_matrix(
    e_s: &DVector<f64>,
    z: &DVector<f64>,
    theta_hat: &DVector<f64>,
    inversion: &impl FeatureInversion,
    compliance: &DMatrix<f64>,
    gains: &Gains,
) -> DMatrix<f64> {
    let h = inversion.jacobian();
    let w = w_of(theta_hat, compliance);
    let wt = w.transpose();
    let b = h * (&wt * z) * gains.k_s + h * (&wt * e_s) * gains.k_d;
    let g = compliance * (h.transpose() * b);
    DMatrix::from_diagonal(&g)
}

/// Euler step of `theta_hat_dot = -Gamma^-1 Y^T e_s`.
pub fn adapt_parameters(
    theta_hat: &DVector<f64>,
    y: &DMatrix<f64>,
    e_s: &DVector<f64>,
    gains: &Gains,
) -> DVector<f64> {
    theta_hat - (y.transpose() * e_s) * (gains.dt / gains.gamma)
}

/// Output of one control step.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub v: DVector<f64>,
    pub e_s: DVector<f64>,
    pub z: DVector<f64>,
}

/// Stateful controller.
#[derive(Debug, Clone)]
pub struct AdaptiveController {
    pub gains: Gains,
    compliance: DMatrix<f64>,
    pub state: ControllerState,
}

impl AdaptiveController {
    pub fn new(gains: Gains, compliance: DMatrix<f64>) -> Result<Self> {
        gains.validate()?;
        let m = compliance.nrows();
        if compliance.ncols() != m {
            return Err(Error::Dimension("compliance must be square".into()));
        }
        Ok(Self {
            gains,
            compliance,
            state: ControllerState::new(m),
        })
    }

    pub fn compliance(&self) -> &DMatrix<f64> {
        &self.compliance
    }

    pub fn m(&self) -> usize {
        self.compliance.nrows()
    }

    /// `e_s = s - s*`; update `z`; `v = v_s + v_d`; adapt `theta_hat`.
    ///
    /// On non-finite input the state is left untouched and an error returned;
    /// the caller should command zero velocity.
    pub fn step(
        &mut self,
        s: &DVector<f64>,
        s_star: &DVector<f64>,
        inversion: &impl FeatureInversion,
    ) -> Result<ControlOutput> {
        let m = self.m();
        if s.len() != m || s_star.len() != m || inversion.jacobian().ncols() != m {
            return Err(Error::Dimension(format!("expected {m} features")));
        }
        if !s.iter().chain(s_star.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let e_s = s - s_star;
        let z = dynamic_extension_step(self.state.z.as_ref(), &e_s, &self.gains);
        let theta = &self.state.theta_hat;
        let v = nominal_term(&z, theta, inversion, &self.compliance, &self.gains)
            + robust_term(&e_s, theta, inversion, &self.compliance, &self.gains);
        let y = regression_matrix(&e_s, &z, theta, inversion, &self.compliance, &self.gains);
        let theta_next = adapt_parameters(theta, &y, &e_s, &self.gains);
        if !v.iter().chain(theta_next.iter()).chain(z.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("controller state"));
        }
        self.state.theta_hat = theta_next;
        self.state.z = Some(z.clone());
        Ok(ControlOutput { v, e_s, z })
    }

    /// `W(theta_hat)` of the current state.
    pub fn w_hat(&self) -> DMatrix<f64> {
        w_of(&self.state.theta_hat, &self.compliance)
    }
}

/// Inversion map given directly by its matrix.
#[derive(Debug, Clone)]
pub struct MatrixInversion(pub DMatrix<f64>);

impl FeatureInversion for MatrixInversion {
    fn jacobian(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(q: f64) -> Gains {
        Gains {
            k_s: 2.0,
            q,
            k_d: 0.5,
            gamma: 10.0,
            dt: 0.01,
        }
    }

    #[test]
    fn q_from_k() {
        let g = Gains::simulation();
        assert!((g.q - 0.625).abs() < 1e-15);
        assert!((g.k() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn extension_transparent_for_unit_q() {
        let e = DVector::from_vec(vec![1.0, -2.0]);
        let z0 = DVector::from_vec(vec![5.0, 5.0]);
        assert_eq!(dynamic_extension_step(Some(&z0), &e, &gains(1.0)), e);
    }

    #[test]
    fn extension_fixed_point_and_geometric_decay() {
        let g = gains(0.5); // k = 1
        let e = DVector::from_vec(vec![1.0, 3.0]);
        assert_eq!(dynamic_extension_step(Some(&e), &e, &g), e);

        let mut z = DVector::zeros(2);
        let ratio = 1.0 - g.dt / g.k();
        for n in 1..=50 {
            z = dynamic_extension_step(Some(&z), &e, &g);
            let expected = &e * (1.0 - ratio.powi(n));
            assert!((&z - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn w_limits() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(w_of(&DVector::from_element(2, 1.0), &c), c);
        assert_eq!(w_of(&DVector::zeros(2), &c), DMatrix::zeros(2, 2));
        let w = w_of(&DVector::from_vec(vec![3.0, -1.0]), &c);
        let dense = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0])) * &c;
        assert!((w - dense).norm() < 1e-15);
    }

    #[test]
    fn adaptation_one_step() {
        let g = gains(0.5);
        let th = DVector::from_vec(vec![1.0, 1.0]);
        let y = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -4.0]);
        let e = DVector::from_vec(vec![0.5, 0.25]);
        let next = adapt_parameters(&th, &y, &e, &g);
        // 1 - 0.01/10 * 2 * 0.5 = 0.999 ; 1 + 0.01/10 * 4 * 0.25 = 1.001
        assert!((next[0] - 0.999).abs() < 1e-15);
        assert!((next[1] - 1.001).abs() < 1e-15);
        assert_eq!(adapt_parameters(&th, &y, &DVector::zeros(2), &g), th);
    }

    #[test]
    fn equilibrium_commands_nothing() {
        let h = MatrixInversion(DMatrix::from_row_slice(3, 6, &[
            1.0, 0.0, 0.0, 0.2, 0.0, 0.1, 0.0, 1.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 1.0, 0.1, 0.0,
            0.4,
        ]));
        let mut ctl = AdaptiveController::new(gains(0.5), DMatrix::identity(6, 6)).unwrap();
        let s = DVector::from_element(6, 0.3);
        let out = ctl.step(&s, &s, &h).unwrap();
        assert_eq!(out.v, DVector::zeros(3));
        assert_eq!(ctl.state.theta_hat, DVector::from_element(6, 1.0));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let h = MatrixInversion(DMatrix::identity(6, 6));
        let mut ctl = AdaptiveController::new(gains(0.5), DMatrix::identity(6, 6)).unwrap();
        let mut s = DVector::zeros(6);
        s[2] = f64::NAN;
        assert!(ctl.step(&s, &DVector::zeros(6), &h).is_err());
        assert!(ctl.state.z.is_none());
    }
}
