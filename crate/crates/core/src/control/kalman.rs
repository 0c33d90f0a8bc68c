use nalgebra::{DMatrix, DVector};

use super::LtiModel;
use crate::error::ControlError;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl EstimatorState {
    pub fn new(x_hat: DVector<f64>, p: DMatrix<f64>) -> Self {
        EstimatorState { x_hat, p }
    }
}

/// Process (`q`) and measurement (`r`) noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanNoise {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl KalmanNoise {
    /// `q·I` process noise and scalar measurement noise.
    pub fn isotropic(n: usize, q: f64, r: f64) -> Self {
        KalmanNoise { q: DMatrix::identity(n, n) * q, r: DMatrix::from_element(1, 1, r) }
    }
}

/// Symmetric within `tol` (relative to the largest entry) with no eigenvalue
/// below `-tol`.
pub fn is_symmetric_psd(p: &DMatrix<f64>, tol: f64) -> bool {
    if !p.is_square() || p.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = p.abs().max().max(1.0);
    if (p - p.transpose()).abs().max() > tol * scale {
        return false;
    }
    let sym = (p + p.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().all(|&l| l >= -tol * scale)
}

/// Time update: `x = x_eq + A (x - x_eq) + B (u - u_eq)`, `P = A P Aᵀ + Q`.
pub fn kf_predict(
    est: &EstimatorState,
    model: &LtiModel,
    u_prev: &DVector<f64>,
    noise: &KalmanNoise,
) -> Result<EstimatorState, ControlError> {
    check_dims(est, model, u_prev, noise)?;
    let dx = &est.x_hat - &model.x_eq;
    let du = u_prev - &model.u_eq;
    let x_hat = &model.x_eq + &model.a * dx + &model.b * du;
    let p = &model.a * &est.p * model.a.transpose() + &noise.q;
    Ok(EstimatorState { x_hat, p: symmetrize(p) })
}

/// Predict with the previous input, then correct with `y_meas`. The
/// covariance update uses the Joseph form.
pub fn kf_step(
    est: &EstimatorState,
    model: &LtiModel,
    u_prev: &DVector<f64>,
    y_meas: &DVector<f64>,
    noise: &KalmanNoise,
) -> Result<EstimatorState, ControlError> {
    if !is_symmetric_psd(&est.p, 1e-9) {
        return Err(ControlError::NotPsd);
    }
    let prior = kf_predict(est, model, u_prev, noise)?;
    let c = &model.c;
    if y_meas.len() != c.nrows() || noise.r.shape() != (c.nrows(), c.nrows()) {
        return Err(ControlError::Dimension("measurement does not match output matrix".into()));
    }
    let s = c * &prior.p * c.transpose() + &noise.r;
    let s_inv = s.try_inverse().ok_or_else(|| ControlError::Dimension("innovation covariance is singular".into()))?;
    let gain = &prior.p * c.transpose() * s_inv;
    let innovation = y_meas - c * &prior.x_hat;
    let x_hat = &prior.x_hat + &gain * innovation;
    let n = model.state_dim();
    let i_kc = DMatrix::identity(n, n) - &gain * c;
    let p = &i_kc * &prior.p * i_kc.transpose() + &gain * &noise.r * gain.transpose();
    Ok(EstimatorState { x_hat, p: symmetrize(p) })
}

fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}

fn check_dims(
    est: &EstimatorState,
    model: &LtiModel,
    u: &DVector<f64>,
    noise: &KalmanNoise,
) -> Result<(), ControlError> {
    model.check()?;
    let n = model.state_dim();
    if est.x_hat.len() != n || est.p.shape() != (n, n) || noise.q.shape() != (n, n) {
        return Err(ControlError::Dimension(format!("estimate of size {} for a model of order {n}", est.x_hat.len())));
    }
    if u.len() != model.input_dim() {
        return Err(ControlError::Dimension("input size".into()));
    }
    Ok(())
}
