//! Linear cost function and attribute derivation for grouped nodes.

use crate::error::ModelError;
use crate::service_model::{CostAttributes, ServiceKind};

/// Objective weights. Changing them is an orchestration event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    alpha_comp: f64,
    beta_inacc: f64,
}

impl CostWeights {
    pub fn new(alpha_comp: f64, beta_inacc: f64) -> Result<Self, ModelError> {
        if !(alpha_comp.is_finite() && alpha_comp > 0.0) {
            return Err(ModelError::NonPositiveWeight { name: "alpha", value: alpha_comp });
        }
        if !(beta_inacc.is_finite() && beta_inacc > 0.0) {
            return Err(ModelError::NonPositiveWeight { name: "beta", value: beta_inacc });
        }
        Ok(CostWeights { alpha_comp, beta_inacc })
    }

    pub fn alpha_comp(&self) -> f64 {
        self.alpha_comp
    }

    pub fn beta_inacc(&self) -> f64 {
        self.beta_inacc
    }
}

/// `alpha_comp * x_comp + beta_inacc * y_inacc`.
pub fn service_cost(attrs: &CostAttributes, w: &CostWeights) -> f64 {
    w.alpha_comp * attrs.x_comp() + w.beta_inacc * attrs.y_inacc()
}

/// Attributes of a filter or controller grouped with a model.
///
/// The computation factor grows with the model's own computation factor `m`:
/// `m^2` for controllers and `m^3` for filters. The inaccuracy is the
/// model's inaccuracy.
pub fn grouped_attributes(base_kind: ServiceKind, model_attrs: &CostAttributes) -> Result<CostAttributes, ModelError> {
    let m = model_attrs.x_comp();
    let x_comp = match base_kind {
        ServiceKind::Controller => m * m,
        ServiceKind::Filter => m * m * m,
        other => return Err(ModelError::NotGroupable(other)),
    };
    CostAttributes::new(x_comp, model_attrs.y_inacc())
}
