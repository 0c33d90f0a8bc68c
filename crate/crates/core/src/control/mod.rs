//! Runtime behaviors of the evaluation services: LTI tank models, Kalman
//! filter, converter, PID and MPC.

pub mod kalman;
pub mod mpc;
pub mod pid;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::ControlError;
use crate::plant::PlantParams;
use crate::service_model::ComplexityLevel;

pub use kalman::{is_symmetric_psd, kf_predict, kf_step, EstimatorState, KalmanNoise};
pub use mpc::{mpc_solve, mpc_step, MpcConfig, MpcProblem, MpcSolution};
pub use pid::{pid_step, PidGains, PidState};

/// Tank level a model state refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TankLevel {
    H1,
    H2,
    H3,
}

impl TankLevel {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TankLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.index() + 1)
    }
}

/// Pump command, always within `[0, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ControlCommand(f64);

impl ControlCommand {
    pub fn clamped(u: f64, u_max: f64) -> Self {
        ControlCommand(if u.is_nan() { 0.0 } else { u.clamp(0.0, u_max) })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Discrete-time LTI model in deviation form around an operating point:
/// `x+ - x_eq = A (x - x_eq) + B (u - u_eq)`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub labels: Vec<TankLevel>,
    pub x_eq: DVector<f64>,
    pub u_eq: DVector<f64>,
}

impl LtiModel {
    /// Model without an operating-point offset.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, labels: Vec<TankLevel>) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        LtiModel { a, b, c, labels, x_eq: DVector::zeros(n), u_eq: DVector::zeros(m) }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Position of the tank-3 level in the state vector.
    pub fn h3_index(&self) -> Option<usize> {
        self.labels.iter().position(|l| *l == TankLevel::H3)
    }

    pub fn check(&self) -> Result<(), ControlError> {
        let n = self.state_dim();
        let dims_ok = self.a.is_square()
            && self.b.nrows() == n
            && self.c.ncols() == n
            && self.labels.len() == n
            && self.x_eq.len() == n
            && self.u_eq.len() == self.input_dim();
        if dims_ok {
            Ok(())
        } else {
            Err(ControlError::Dimension("inconsistent model matrices".into()))
        }
    }
}

/// Zero-order-hold discretization via the matrix exponential of
/// `[[A, B], [0, 0]] * ts`.
pub fn discretize(
    a_c: &DMatrix<f64>,
    b_c: &DMatrix<f64>,
    ts: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ControlError> {
    if ts.is_nan() || ts <= 0.0 {
        return Err(ControlError::SampleTime(ts));
    }
    let n = a_c.nrows();
    let m = b_c.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a_c * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(b_c * ts));
    let e = aug.exp();
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

/// Continuous-time linearization of the full cascade at the operating point.
/// Returns `(A, B)` for states `(h1, h2, h3)`.
pub fn linearize_high(params: &PlantParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let eq = params.equilibrium(params.operating_h3);
    let [h1, h2, h3] = eq.levels;
    let k12 = flow_slope(params.c12, params.gravity, h1 - h2);
    let k23 = flow_slope(params.c23, params.gravity, h2 - h3);
    let k3 = flow_slope(params.c3, params.gravity, h3);
    let [a1, a2, a3] = params.areas;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 3, &[
        -k12 / a1, k12 / a1, 0.0,
        k12 / a2, -(k12 + k23) / a2, k23 / a2,
        0.0, k23 / a3, -(k23 + k3) / a3,
    ]);
    let b = DMatrix::from_column_slice(3, 1, &[1.0 / a1, 0.0, 0.0]);
    (a, b)
}

/// d/dΔh of `c * sqrt(2 g Δh)`.
fn flow_slope(coeff: f64, gravity: f64, dh: f64) -> f64 {
    coeff * gravity / (2.0 * gravity * dh).sqrt()
}

/// Builds the low (h3), medium (h2, h3) and high (h1, h2, h3) complexity
/// models, discretized at `ts`.
///
/// The medium model drops tank 1 and feeds the inflow straight into tank 2;
/// the low model feeds it straight into tank 3. All three share the plant's
/// operating point.
pub fn build_models(params: &PlantParams, ts: f64) -> Result<[LtiModel; 3], ControlError> {
    params.validate()?;
    if ts.is_nan() || ts <= 0.0 {
        return Err(ControlError::SampleTime(ts));
    }
    let eq = params.equilibrium(params.operating_h3);
    let u_eq = params.equilibrium_inflow(params.operating_h3);
    let [h1, h2, h3] = eq.levels;
    let [_, a2, a3] = params.areas;
    let k23 = flow_slope(params.c23, params.gravity, h2 - h3);
    let k3 = flow_slope(params.c3, params.gravity, h3);

    let (a_high, b_high) = linearize_high(params);
    #[rustfmt::skip]
    let a_medium = DMatrix::from_row_slice(2, 2, &[
        -k23 / a2, k23 / a2,
        k23 / a3, -(k23 + k3) / a3,
    ]);
    let b_medium = DMatrix::from_column_slice(2, 1, &[1.0 / a2, 0.0]);
    let a_low = DMatrix::from_element(1, 1, -k3 / a3);
    let b_low = DMatrix::from_element(1, 1, 1.0 / a3);

    let build = |a_c: DMatrix<f64>, b_c: DMatrix<f64>, labels: Vec<TankLevel>, x_eq: Vec<f64>| {
        let (a, b) = discretize(&a_c, &b_c, ts)?;
        let n = labels.len();
        let mut c = DMatrix::zeros(1, n);
        c[(0, n - 1)] = 1.0;
        Ok::<_, ControlError>(LtiModel {
            a,
            b,
            c,
            labels,
            x_eq: DVector::from_vec(x_eq),
            u_eq: DVector::from_element(1, u_eq),
        })
    };
    use TankLevel::*;
    Ok([
        build(a_low, b_low, vec![H3], vec![h3])?,
        build(a_medium, b_medium, vec![H2, H3], vec![h2, h3])?,
        build(a_high, b_high, vec![H1, H2, H3], vec![h1, h2, h3])?,
    ])
}

/// Model for a complexity level, indexed like [`build_models`].
pub fn model_for(models: &[LtiModel; 3], level: ComplexityLevel) -> &LtiModel {
    match level {
        ComplexityLevel::Low => &models[0],
        ComplexityLevel::Medium => &models[1],
        ComplexityLevel::High => &models[2],
    }
}

/// Identity filter: forwards the measurement unchanged.
pub fn converter_step(y_meas: f64) -> f64 {
    y_meas
}
