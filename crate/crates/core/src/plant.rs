//! Nonlinear three-tank cascade used as simulation ground truth.
//!
//! Inflow `u` enters tank 1, water flows 1 → 2 → 3 through Torricelli
//! couplings and leaves tank 3 through its outlet. Levels are in meters and
//! flows in m³/s.

use crate::error::ControlError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Cross-section areas of tanks 1..3 (m²).
    pub areas: [f64; 3],
    /// Effective coupling coefficient between tanks 1 and 2 (m²).
    pub c12: f64,
    /// Effective coupling coefficient between tanks 2 and 3 (m²).
    pub c23: f64,
    /// Effective outlet coefficient of tank 3 (m²).
    pub c3: f64,
    pub gravity: f64,
    /// Maximum pump inflow (m³/s).
    pub u_max: f64,
    /// Level bound on tank 3 enforced by the MPC (m).
    pub h_max: f64,
    /// Physical tank height; water above it overflows (m).
    pub tank_height: f64,
    /// Tank-3 level the models are linearized around (m).
    pub operating_h3: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            areas: [0.0154, 0.0154, 0.0154],
            c12: 5.0e-5,
            c23: 5.0e-5,
            c3: 2.5e-5,
            gravity: 9.81,
            u_max: 1.0e-4,
            h_max: 0.6,
            tank_height: 0.62,
            operating_h3: 0.3,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        let positive = [
            ("area1", self.areas[0]),
            ("area2", self.areas[1]),
            ("area3", self.areas[2]),
            ("c12", self.c12),
            ("c23", self.c23),
            ("c3", self.c3),
            ("gravity", self.gravity),
            ("u_max", self.u_max),
            ("h_max", self.h_max),
            ("tank_height", self.tank_height),
            ("operating_h3", self.operating_h3),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ControlError::InvalidPlant { name, value });
            }
        }
        let eq = self.equilibrium(self.operating_h3);
        if eq.levels[0] > self.tank_height {
            return Err(ControlError::InvalidPlant { name: "operating_h3", value: self.operating_h3 });
        }
        if self.equilibrium_inflow(self.operating_h3) > self.u_max {
            return Err(ControlError::InvalidPlant { name: "u_max", value: self.u_max });
        }
        Ok(())
    }

    /// Inflow holding tank 3 at level `h3` in steady state.
    pub fn equilibrium_inflow(&self, h3: f64) -> f64 {
        self.c3 * (2.0 * self.gravity * h3).sqrt()
    }

    /// Steady state with tank 3 at level `h3`.
    pub fn equilibrium(&self, h3: f64) -> PlantState {
        let q = self.equilibrium_inflow(h3);
        let two_g = 2.0 * self.gravity;
        let h2 = h3 + (q / self.c23).powi(2) / two_g;
        let h1 = h2 + (q / self.c12).powi(2) / two_g;
        PlantState { levels: [h1, h2, h3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub levels: [f64; 3],
}

impl PlantState {
    pub fn new(h1: f64, h2: f64, h3: f64) -> Self {
        PlantState { levels: [h1, h2, h3] }
    }

    pub fn h3(&self) -> f64 {
        self.levels[2]
    }

    /// Stored water volume (m³).
    pub fn volume(&self, params: &PlantParams) -> f64 {
        self.levels.iter().zip(params.areas).map(|(h, a)| h * a).sum()
    }
}

fn torricelli(coeff: f64, gravity: f64, dh: f64) -> f64 {
    coeff * dh.signum() * (2.0 * gravity * dh.abs()).sqrt()
}

/// One explicit-Euler step. Levels are floored at 0 and clipped at the tank
/// height.
///
/// A tank's outflows over one step are scaled down to the water it holds,
/// so a nearly empty tank drains to exactly zero instead of overshooting.
pub fn plant_step(state: &PlantState, u: f64, params: &PlantParams, ts: f64) -> PlantState {
    let [h1, h2, h3] = state.levels;
    let g = params.gravity;
    let [a1, a2, a3] = params.areas;
    let mut q12 = if h1 == h2 { 0.0 } else { torricelli(params.c12, g, h1 - h2) };
    let mut q23 = if h2 == h3 { 0.0 } else { torricelli(params.c23, g, h2 - h3) };
    let mut q3 = params.c3 * (2.0 * g * h3.max(0.0)).sqrt();

    let outflow = [q12.max(0.0), (-q12).max(0.0) + q23.max(0.0), (-q23).max(0.0) + q3];
    let stored = [h1 * a1, h2 * a2, h3 * a3];
    let scale: [f64; 3] = std::array::from_fn(|i| {
        let drained = outflow[i] * ts;
        if drained > stored[i] {
            stored[i].max(0.0) / drained
        } else {
            1.0
        }
    });
    q12 *= if q12 > 0.0 { scale[0] } else { scale[1] };
    q23 *= if q23 > 0.0 { scale[1] } else { scale[2] };
    q3 *= scale[2];

    let next = [h1 + ts * (u - q12) / a1, h2 + ts * (q12 - q23) / a2, h3 + ts * (q23 - q3) / a3];
    PlantState { levels: next.map(|h| h.clamp(0.0, params.tank_height)) }
}
