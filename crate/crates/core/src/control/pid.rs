use super::ControlCommand;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    /// State whose next output with error `error` equals `u`, for bumpless
    /// hand-over from another controller.
    pub fn bumpless(u: f64, error: f64, gains: &PidGains) -> Self {
        let integral = if gains.ki != 0.0 { (u - gains.kp * error) / gains.ki } else { 0.0 };
        PidState { integral, prev_error: Some(error) }
    }
}

/// One PID step on `e = reference - y`.
///
/// The integrator is only advanced when the resulting command is within
/// `[0, u_max]`; while the output saturates it stays frozen.
pub fn pid_step(
    state: &PidState,
    reference: f64,
    y: f64,
    gains: &PidGains,
    ts: f64,
    u_max: f64,
) -> (PidState, ControlCommand) {
    let error = reference - y;
    let derivative = state.prev_error.map_or(0.0, |prev| (error - prev) / ts);
    let advanced = state.integral + error * ts;
    let raw = gains.kp * error + gains.ki * advanced + gains.kd * derivative;
    let integral = if (0.0..=u_max).contains(&raw) { advanced } else { state.integral };
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (PidState { integral, prev_error: Some(error) }, ControlCommand::clamped(u, u_max))
}
