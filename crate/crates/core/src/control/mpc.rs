//! Linear MPC for the tank-3 level.
//!
//! Over a horizon of `N` steps the controller minimizes
//!
//! ```text
//! J(u) = q Σ_{k=1..N} (h3_k - ref)² + r_u Σ_{k=0..N-1} (u_k - u_eq)²
//! ```
//!
//! subject to the model dynamics, `0 <= u_k <= u_max` and `h3_k <= h_max`.
//! The input penalty is taken relative to the model's equilibrium input so
//! that the operating point is a stationary solution.
//!
//! The QP is solved in inputs normalized by `u_max`: the box is handled by
//! projection (accelerated projected gradient with restarts) and the level
//! bound by an augmented Lagrangian outer loop. Convergence is declared
//! when the projected-gradient KKT residual drops below the tolerance.

use nalgebra::{DMatrix, DVector};

use super::{ControlCommand, LtiModel};
use crate::error::ControlError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub q: f64,
    pub r_u: f64,
    pub u_max: f64,
    pub h_max: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl MpcConfig {
    pub fn new(horizon: usize, q: f64, r_u: f64, u_max: f64, h_max: f64) -> Self {
        MpcConfig { horizon, q, r_u, u_max, h_max, tolerance: 1e-6, max_iterations: 50_000 }
    }
}

/// Condensed QP for one MPC step.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    /// `h3 = free + sensitivity * u` over the horizon (absolute inputs).
    sensitivity: DMatrix<f64>,
    free: DVector<f64>,
    reference: f64,
    q: f64,
    r_u: f64,
    u_eq: f64,
    u_max: f64,
    h_max: f64,
    /// Lipschitz constant of the objective gradient in normalized inputs.
    lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Optimal input sequence (m³/s).
    pub inputs: Vec<f64>,
    /// Multipliers of the level bounds `h3_k <= h_max`.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl MpcSolution {
    pub fn first_input(&self) -> f64 {
        self.inputs[0]
    }
}

impl MpcProblem {
    pub fn new(model: &LtiModel, x_hat: &DVector<f64>, reference: f64, cfg: &MpcConfig) -> Result<Self, ControlError> {
        model.check()?;
        let n = model.state_dim();
        if x_hat.len() != n {
            return Err(ControlError::Dimension(format!("estimate of size {} for a model of order {n}", x_hat.len())));
        }
        if model.input_dim() != 1 {
            return Err(ControlError::Dimension("MPC supports a single input".into()));
        }
        if cfg.horizon == 0 {
            return Err(ControlError::Dimension("horizon must be at least 1".into()));
        }
        if !(cfg.u_max > 0.0 && cfg.q >= 0.0 && cfg.r_u >= 0.0 && cfg.q + cfg.r_u > 0.0) {
            return Err(ControlError::Dimension("invalid MPC weights or bounds".into()));
        }
        let h3 = model.h3_index().ok_or_else(|| ControlError::Dimension("model has no h3 state".into()))?;
        let horizon = cfg.horizon;
        let u_eq = model.u_eq[0];
        let b = model.b.column(0).into_owned();

        // Row k of the prediction: e3ᵀ A^k (x - x_eq) and e3ᵀ A^(k-1-j) B.
        let mut powers_b = Vec::with_capacity(horizon);
        let mut ab = b.clone();
        for _ in 0..horizon {
            powers_b.push(ab[h3]);
            ab = &model.a * ab;
        }
        let mut sensitivity = DMatrix::zeros(horizon, horizon);
        for k in 0..horizon {
            for j in 0..=k {
                sensitivity[(k, j)] = powers_b[k - j];
            }
        }
        let mut free = DVector::zeros(horizon);
        let mut dx = x_hat - &model.x_eq;
        for k in 0..horizon {
            dx = &model.a * dx;
            let offset: f64 = sensitivity.row(k).sum() * u_eq;
            free[k] = model.x_eq[h3] + dx[h3] - offset;
        }

        let hessian = (sensitivity.transpose() * &sensitivity) * (2.0 * cfg.q)
            + DMatrix::identity(horizon, horizon) * (2.0 * cfg.r_u);
        let lipschitz = max_eigenvalue(&hessian) * cfg.u_max * cfg.u_max;
        Ok(MpcProblem {
            sensitivity,
            free,
            reference,
            q: cfg.q,
            r_u: cfg.r_u,
            u_eq,
            u_max: cfg.u_max,
            h_max: cfg.h_max,
            lipschitz,
        })
    }

    pub fn horizon(&self) -> usize {
        self.free.len()
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Predicted tank-3 levels for an input sequence.
    pub fn levels(&self, inputs: &[f64]) -> DVector<f64> {
        &self.free + &self.sensitivity * DVector::from_column_slice(inputs)
    }

    pub fn objective(&self, inputs: &[f64]) -> f64 {
        let tracking = self.levels(inputs).map(|h| h - self.reference).norm_squared();
        let effort: f64 = inputs.iter().map(|u| (u - self.u_eq).powi(2)).sum();
        self.q * tracking + self.r_u * effort
    }

    /// Gradient of the objective with respect to the absolute inputs.
    pub fn gradient(&self, inputs: &[f64]) -> DVector<f64> {
        let err = self.levels(inputs).map(|h| h - self.reference);
        let u = DVector::from_column_slice(inputs);
        self.sensitivity.transpose() * err * (2.0 * self.q) + (u.map(|v| v - self.u_eq)) * (2.0 * self.r_u)
    }

    /// Level-bound values `h3_k - h_max` (feasible when `<= 0`).
    pub fn bound_values(&self, inputs: &[f64]) -> DVector<f64> {
        self.levels(inputs).map(|h| h - self.h_max)
    }

    /// Jacobian of the level bounds with respect to the inputs.
    pub fn bound_jacobian(&self) -> &DMatrix<f64> {
        &self.sensitivity
    }

    /// Lipschitz constant of the objective gradient in inputs normalized by
    /// `u_max`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// KKT residual for `inputs`, given the objective gradient (absolute
    /// inputs) and bound multipliers.
    ///
    /// Stationarity is the projected-gradient step `‖v - Π(v - ∇L / Lip)‖∞`
    /// in normalized inputs `v = u / u_max`; feasibility is measured in
    /// meters; complementarity as `min(λ_k u_max / Lip, -g_k)`.
    pub fn kkt_residual(&self, inputs: &[f64], gradient: &DVector<f64>, multipliers: &[f64]) -> f64 {
        let lam = DVector::from_column_slice(multipliers);
        let grad_l = (gradient + self.sensitivity.transpose() * lam) * self.u_max;
        let mut residual: f64 = 0.0;
        for (k, &u) in inputs.iter().enumerate() {
            let v = u / self.u_max;
            let stepped = (v - grad_l[k] / self.lipschitz).clamp(0.0, 1.0);
            residual = residual.max((v - stepped).abs());
        }
        let g = self.bound_values(inputs);
        for (k, &gk) in g.iter().enumerate() {
            residual = residual.max(gk.max(0.0));
            let scaled = multipliers[k] * self.u_max / self.lipschitz;
            residual = residual.max(scaled.min(-gk).max(0.0));
        }
        residual
    }

    /// Lowest level each bound can reach over the input box.
    fn best_case_bounds(&self) -> DVector<f64> {
        let mut out = self.free.map(|h| h - self.h_max);
        for k in 0..self.horizon() {
            for j in 0..self.horizon() {
                out[k] += (self.sensitivity[(k, j)] * self.u_max).min(0.0);
            }
        }
        out
    }

    /// Minimizes the box-constrained inner objective
    /// `J(v) + ρ/2 Σ max(0, g_k(v) + λ_k/ρ)²` from `v`, in normalized inputs.
    fn inner_solve(
        &self,
        v: &mut DVector<f64>,
        multipliers: &DVector<f64>,
        rho: f64,
        step_lipschitz: f64,
        tol: f64,
        budget: usize,
    ) -> usize {
        let n = self.horizon();
        let grad = |v: &DVector<f64>| -> DVector<f64> {
            let u: Vec<f64> = v.iter().map(|x| x * self.u_max).collect();
            let mut g = self.gradient(&u);
            if rho > 0.0 {
                let bounds = self.bound_values(&u);
                let weights = DVector::from_fn(n, |k, _| (rho * bounds[k] + multipliers[k]).max(0.0));
                g += self.sensitivity.transpose() * weights;
            }
            g * self.u_max
        };
        let value = |v: &DVector<f64>| -> f64 {
            let u: Vec<f64> = v.iter().map(|x| x * self.u_max).collect();
            let mut f = self.objective(&u);
            if rho > 0.0 {
                let bounds = self.bound_values(&u);
                for k in 0..n {
                    f += 0.5 * ((rho * bounds[k] + multipliers[k]).max(0.0).powi(2)) / rho;
                }
            }
            f
        };
        let project = |x: DVector<f64>| x.map(|c| c.clamp(0.0, 1.0));
        // Measured with the objective's own constant so the stopping test
        // does not loosen as the penalty grows.
        let residual = |v: &DVector<f64>| -> f64 {
            let stepped = project(v - grad(v) / self.lipschitz);
            (v - stepped).amax()
        };

        let mut y = v.clone();
        let mut t = 1.0f64;
        let mut f_prev = value(v);
        for it in 0..budget {
            if residual(v) <= tol {
                return it;
            }
            let next = project(&y - grad(&y) / step_lipschitz);
            let f_next = value(&next);
            if f_next > f_prev {
                // Momentum overshot: restart from the last iterate.
                y = v.clone();
                t = 1.0;
                let plain = project(&*v - grad(v) / step_lipschitz);
                f_prev = value(&plain);
                *v = plain;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &*v) * ((t - 1.0) / t_next);
            *v = next;
            t = t_next;
            f_prev = f_next;
        }
        budget
    }
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max().max(f64::MIN_POSITIVE)
}

/// Solves the MPC problem, returning the full input sequence.
pub fn mpc_solve(
    model: &LtiModel,
    x_hat: &DVector<f64>,
    reference: f64,
    cfg: &MpcConfig,
) -> Result<MpcSolution, ControlError> {
    let problem = MpcProblem::new(model, x_hat, reference, cfg)?;
    let n = problem.horizon();
    let tol = cfg.tolerance;
    let start = (problem.u_eq / problem.u_max).clamp(0.0, 1.0);
    let mut v = DVector::from_element(n, start);
    let mut multipliers = DVector::zeros(n);
    let g_gram = problem.sensitivity.transpose() * &problem.sensitivity * problem.u_max.powi(2);
    let g_norm = max_eigenvalue(&g_gram);

    let best = problem.best_case_bounds();
    let violation = best.max();
    if violation > tol {
        // No input keeps the level bound; fall back to a heavily penalized
        // soft constraint.
        let rho = 1e4 * problem.lipschitz / g_norm;
        let lip = problem.lipschitz + rho * g_norm;
        problem.inner_solve(&mut v, &DVector::zeros(n), rho, lip, tol, cfg.max_iterations);
        return Err(ControlError::Infeasible { violation, fallback_u: v[0] * problem.u_max });
    }

    let mut iterations = 0;
    // Box-only solve first; the level bound is usually inactive.
    iterations += problem.inner_solve(&mut v, &multipliers, 0.0, problem.lipschitz, tol, cfg.max_iterations);
    let mut rho = problem.lipschitz / g_norm;
    let mut last_violation = f64::INFINITY;
    loop {
        let inputs: Vec<f64> = v.iter().map(|x| x * problem.u_max).collect();
        let gradient = problem.gradient(&inputs);
        let residual = problem.kkt_residual(&inputs, &gradient, multipliers.as_slice());
        if residual <= tol {
            return Ok(MpcSolution {
                inputs,
                multipliers: multipliers.iter().copied().collect(),
                kkt_residual: residual,
                iterations,
            });
        }
        if iterations >= cfg.max_iterations {
            return Err(ControlError::NotConverged { iterations, residual });
        }
        let lip = problem.lipschitz + rho * g_norm;
        let budget = cfg.max_iterations - iterations;
        iterations += problem.inner_solve(&mut v, &multipliers, rho, lip, 0.1 * tol, budget).max(1);
        let u: Vec<f64> = v.iter().map(|x| x * problem.u_max).collect();
        let bounds = problem.bound_values(&u);
        for k in 0..n {
            multipliers[k] = (multipliers[k] + rho * bounds[k]).max(0.0);
        }
        let violation = bounds.max().max(0.0);
        if violation > tol && violation > 0.25 * last_violation {
            rho *= 10.0;
        }
        last_violation = violation;
    }
}

/// First input of the MPC solution, clamped to the actuator range.
pub fn mpc_step(
    model: &LtiModel,
    x_hat: &DVector<f64>,
    reference: f64,
    cfg: &MpcConfig,
) -> Result<ControlCommand, ControlError> {
    let solution = mpc_solve(model, x_hat, reference, cfg)?;
    Ok(ControlCommand::clamped(solution.first_input(), cfg.u_max))
}
