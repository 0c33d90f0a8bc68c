//! Service vocabulary: functionality types, ports, model complexity and the
//! catalog entry describing a single control-system service.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::ModelError;

/// Data-kind tag carried by a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Functionality {
    /// τ_y
    MeasuredOutput,
    /// τ_u
    ControlInput,
    /// τ_x
    StateEstimate,
    /// τ_model
    Model,
    /// τ_ref
    Reference,
}

impl Functionality {
    pub const ALL: [Functionality; 5] = [
        Functionality::MeasuredOutput,
        Functionality::ControlInput,
        Functionality::StateEstimate,
        Functionality::Model,
        Functionality::Reference,
    ];

    /// Short tag used in catalog files and reports.
    pub fn tag(self) -> &'static str {
        match self {
            Functionality::MeasuredOutput => "y",
            Functionality::ControlInput => "u",
            Functionality::StateEstimate => "x",
            Functionality::Model => "model",
            Functionality::Reference => "ref",
        }
    }
}

impl fmt::Display for Functionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Functionality {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Functionality::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| ModelError::UnknownFunctionality(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Requirement,
    Guarantee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Port {
    pub direction: Direction,
    pub functionality: Functionality,
}

impl Port {
    pub fn requirement(functionality: Functionality) -> Self {
        Port { direction: Direction::Requirement, functionality }
    }

    pub fn guarantee(functionality: Functionality) -> Self {
        Port { direction: Direction::Guarantee, functionality }
    }
}

/// A requirement and a guarantee are compatible iff they carry the same
/// functionality type.
pub fn ports_compatible(req: Port, guar: Port) -> Result<bool, ModelError> {
    if req.direction != Direction::Requirement || guar.direction != Direction::Guarantee {
        return Err(ModelError::PortDirection);
    }
    Ok(req.functionality == guar.functionality)
}

/// Ordinal model complexity. The derived ordering is `Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComplexityLevel {
    Low,
    Medium,
    High,
}

impl ComplexityLevel {
    pub const ALL: [ComplexityLevel; 3] = [ComplexityLevel::Low, ComplexityLevel::Medium, ComplexityLevel::High];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityLevel::Low => "low",
            ComplexityLevel::Medium => "medium",
            ComplexityLevel::High => "high",
        }
    }

    /// Default state dimension for a level (tank subsets h3, h2..h3, h1..h3).
    pub fn default_dimension(self) -> usize {
        match self {
            ComplexityLevel::Low => 1,
            ComplexityLevel::Medium => 2,
            ComplexityLevel::High => 3,
        }
    }
}

impl fmt::Display for ComplexityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComplexityLevel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ComplexityLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ModelError::UnknownComplexity(s.to_string()))
    }
}

/// Complexity of an LTI model: an ordinal level plus the dimension of its
/// system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelComplexity {
    pub level: ComplexityLevel,
    pub state_dimension: usize,
}

impl ModelComplexity {
    pub fn new(level: ComplexityLevel, state_dimension: usize) -> Result<Self, ModelError> {
        if state_dimension == 0 {
            return Err(ModelError::ZeroStateDimension);
        }
        Ok(ModelComplexity { level, state_dimension })
    }

    pub fn with_default_dimension(level: ComplexityLevel) -> Self {
        ModelComplexity { level, state_dimension: level.default_dimension() }
    }
}

/// True iff `a` is at least as complex as `b`.
pub fn complexity_geq(a: ModelComplexity, b: ModelComplexity) -> bool {
    a.level >= b.level
}

/// Operands of the cost function: computation factor and inaccuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostAttributes {
    x_comp: f64,
    y_inacc: f64,
}

impl CostAttributes {
    pub fn new(x_comp: f64, y_inacc: f64) -> Result<Self, ModelError> {
        if !(x_comp.is_finite() && x_comp > 0.0) {
            return Err(ModelError::NonPositiveAttribute { name: "x_comp", value: x_comp });
        }
        if !(y_inacc.is_finite() && y_inacc > 0.0) {
            return Err(ModelError::NonPositiveAttribute { name: "y_inacc", value: y_inacc });
        }
        Ok(CostAttributes { x_comp, y_inacc })
    }

    pub fn x_comp(&self) -> f64 {
        self.x_comp
    }

    pub fn y_inacc(&self) -> f64 {
        self.y_inacc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServiceKind {
    Sensor,
    Filter,
    Controller,
    Actuator,
    Model,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 5] =
        [ServiceKind::Sensor, ServiceKind::Filter, ServiceKind::Controller, ServiceKind::Actuator, ServiceKind::Model];

    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Sensor => "sensor",
            ServiceKind::Filter => "filter",
            ServiceKind::Controller => "controller",
            ServiceKind::Actuator => "actuator",
            ServiceKind::Model => "model",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ServiceKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ServiceKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

/// Runtime behavior bound to a service, used by the simulator. Services
/// without a behavior can still be orchestrated.
#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    Sensor { noise_std: f64 },
    Converter,
    Kalman { q: f64, r: f64 },
    Pid { kp: f64, ki: f64, kd: f64 },
    Mpc { horizon: usize, q: f64, r_u: f64 },
    Actuator,
    Lti,
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Sensor { .. } => "sensor",
            Behavior::Converter => "converter",
            Behavior::Kalman { .. } => "kalman",
            Behavior::Pid { .. } => "pid",
            Behavior::Mpc { .. } => "mpc",
            Behavior::Actuator => "actuator",
            Behavior::Lti => "lti",
        }
    }

    /// Service kind this behavior can be bound to.
    pub fn kind(&self) -> ServiceKind {
        match self {
            Behavior::Sensor { .. } => ServiceKind::Sensor,
            Behavior::Converter | Behavior::Kalman { .. } => ServiceKind::Filter,
            Behavior::Pid { .. } | Behavior::Mpc { .. } => ServiceKind::Controller,
            Behavior::Actuator => ServiceKind::Actuator,
            Behavior::Lti => ServiceKind::Model,
        }
    }
}

/// Identifiers may only use ASCII alphanumerics, `_`, `-` and `.`, so that
/// grouped node ids (`<base>+<model>`) stay unambiguous.
pub fn valid_service_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// A catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDescriptor {
    pub id: String,
    pub kind: ServiceKind,
    pub requires_model: bool,
    pub ports: Vec<Port>,
    /// Absent for model-requiring filters/controllers: their attributes are
    /// derived from the model they are grouped with.
    pub attrs: Option<CostAttributes>,
    pub complexity: Option<ModelComplexity>,
    pub behavior: Option<Behavior>,
}

impl ServiceDescriptor {
    /// Ports implied by kind and model dependency when a catalog does not
    /// list them explicitly.
    pub fn default_ports(kind: ServiceKind, requires_model: bool) -> Vec<Port> {
        use Functionality::*;
        let mut ports = Vec::new();
        match kind {
            ServiceKind::Sensor => ports.push(Port::guarantee(MeasuredOutput)),
            ServiceKind::Filter => {
                ports.push(Port::requirement(MeasuredOutput));
                if requires_model {
                    ports.push(Port::requirement(ControlInput));
                    ports.push(Port::requirement(Model));
                }
                ports.push(Port::guarantee(StateEstimate));
            }
            ServiceKind::Controller => {
                ports.push(Port::requirement(StateEstimate));
                ports.push(Port::requirement(Reference));
                if requires_model {
                    ports.push(Port::requirement(Model));
                }
                ports.push(Port::guarantee(ControlInput));
            }
            ServiceKind::Actuator => ports.push(Port::requirement(ControlInput)),
            ServiceKind::Model => ports.push(Port::guarantee(Model)),
        }
        ports
    }

    /// Atomic service with default ports and attributes.
    pub fn atomic(id: &str, kind: ServiceKind, attrs: CostAttributes) -> Self {
        ServiceDescriptor {
            id: id.to_string(),
            kind,
            requires_model: false,
            ports: Self::default_ports(kind, false),
            attrs: Some(attrs),
            complexity: None,
            behavior: None,
        }
    }

    /// Filter or controller whose attributes come from a grouped model.
    pub fn model_based(id: &str, kind: ServiceKind) -> Self {
        ServiceDescriptor {
            id: id.to_string(),
            kind,
            requires_model: true,
            ports: Self::default_ports(kind, true),
            attrs: None,
            complexity: None,
            behavior: None,
        }
    }

    pub fn model(id: &str, attrs: CostAttributes, complexity: ModelComplexity) -> Self {
        ServiceDescriptor {
            id: id.to_string(),
            kind: ServiceKind::Model,
            requires_model: false,
            ports: Self::default_ports(ServiceKind::Model, false),
            attrs: Some(attrs),
            complexity: Some(complexity),
            behavior: None,
        }
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = Some(behavior);
        self
    }

    pub fn requirements(&self) -> impl Iterator<Item = Functionality> + '_ {
        self.ports.iter().filter(|p| p.direction == Direction::Requirement).map(|p| p.functionality)
    }

    pub fn guarantees(&self) -> impl Iterator<Item = Functionality> + '_ {
        self.ports.iter().filter(|p| p.direction == Direction::Guarantee).map(|p| p.functionality)
    }

    pub fn guarantees_functionality(&self, f: Functionality) -> bool {
        self.guarantees().any(|g| g == f)
    }

    /// Checks the per-descriptor invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !valid_service_id(&self.id) {
            return Err(ModelError::InvalidId(self.id.clone()));
        }
        let is_model = self.kind == ServiceKind::Model;
        if is_model != self.complexity.is_some() {
            return Err(ModelError::ComplexityMismatch { id: self.id.clone(), kind: self.kind });
        }
        if self.requires_model && !matches!(self.kind, ServiceKind::Filter | ServiceKind::Controller) {
            return Err(ModelError::RequiresModelOnKind { id: self.id.clone(), kind: self.kind });
        }
        match (self.requires_model, self.attrs.is_some()) {
            (false, false) => return Err(ModelError::MissingAttributes(self.id.clone())),
            (true, true) => return Err(ModelError::DerivedAttributes(self.id.clone())),
            _ => {}
        }
        let mut seen = HashSet::new();
        for port in &self.ports {
            if !seen.insert(port.functionality) {
                // The same tag as both requirement and guarantee, or listed twice.
                return Err(ModelError::DuplicatePort { id: self.id.clone(), functionality: port.functionality });
            }
        }
        if let Some(behavior) = &self.behavior {
            if behavior.kind() != self.kind {
                return Err(ModelError::BehaviorKind {
                    id: self.id.clone(),
                    behavior: behavior.name(),
                    kind: self.kind,
                });
            }
        }
        Ok(())
    }
}

/// Validated collection of descriptors with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    services: Vec<ServiceDescriptor>,
}

impl Catalog {
    pub fn new(services: Vec<ServiceDescriptor>) -> Result<Self, ModelError> {
        let mut catalog = Catalog::default();
        for service in services {
            catalog.insert(service)?;
        }
        catalog.check_complexity_order()?;
        Ok(catalog)
    }

    pub fn services(&self) -> &[ServiceDescriptor] {
        &self.services
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ServiceDescriptor> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn of_kind(&self, kind: ServiceKind) -> impl Iterator<Item = &ServiceDescriptor> + '_ {
        self.services.iter().filter(move |s| s.kind == kind)
    }

    pub fn insert(&mut self, service: ServiceDescriptor) -> Result<(), ModelError> {
        service.validate()?;
        if self.contains(&service.id) {
            return Err(ModelError::DuplicateId(service.id));
        }
        self.services.push(service);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Result<ServiceDescriptor, ModelError> {
        let pos =
            self.services.iter().position(|s| s.id == id).ok_or_else(|| ModelError::UnknownService(id.to_string()))?;
        Ok(self.services.remove(pos))
    }

    /// Replaces the descriptor with the same id, keeping its position.
    pub fn replace(&mut self, service: ServiceDescriptor) -> Result<ServiceDescriptor, ModelError> {
        service.validate()?;
        let slot = self
            .services
            .iter_mut()
            .find(|s| s.id == service.id)
            .ok_or_else(|| ModelError::UnknownService(service.id.clone()))?;
        Ok(std::mem::replace(slot, service))
    }

    /// Model levels must be ordered consistently with their state dimensions.
    pub fn check_complexity_order(&self) -> Result<(), ModelError> {
        let models: Vec<_> =
            self.of_kind(ServiceKind::Model).filter_map(|m| m.complexity.map(|c| (m.id.as_str(), c))).collect();
        for (ia, a) in &models {
            for (ib, b) in &models {
                if a.level < b.level && a.state_dimension > b.state_dimension {
                    return Err(ModelError::InconsistentComplexity { lower: ia.to_string(), higher: ib.to_string() });
                }
            }
        }
        Ok(())
    }
}
