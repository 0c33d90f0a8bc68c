//! Line-oriented catalog and scenario files.
//!
//! Both formats are sequences of `[section]` headers followed by
//! `key = value` lines. `#` starts a comment line; blank lines are ignored.
//! Keys are unique within a section and unknown keys are errors. See
//! the README for the full grammar.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::cost::CostWeights;
use crate::error::ParseError;
use crate::plant::PlantParams;
use crate::service_model::{
    Behavior, Catalog, ComplexityLevel, CostAttributes, Direction, Functionality, ModelComplexity, Port,
    ServiceDescriptor, ServiceKind,
};

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

#[derive(Debug)]
struct Section {
    name: String,
    arg: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        let entry = self.entries.iter().find(|e| e.key == key)?;
        entry.used.set(true);
        Some(entry)
    }

    fn require(&self, key: &str) -> Result<&Entry, ParseError> {
        self.get(key)
            .ok_or_else(|| ParseError::new(self.line, format!("[{}] is missing required key `{key}`", self.title())))
    }

    fn title(&self) -> String {
        match &self.arg {
            Some(arg) => format!("{} {arg}", self.name),
            None => self.name.clone(),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ParseError> {
        self.get(key).map(|e| e.real()).transpose()
    }

    fn reject_unused(&self) -> Result<(), ParseError> {
        match self.entries.iter().find(|e| !e.used.get()) {
            Some(e) => Err(ParseError::new(e.line, format!("unknown key `{}` in [{}]", e.key, self.title()))),
            None => Ok(()),
        }
    }
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, message)
    }

    fn real(&self) -> Result<f64, ParseError> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("`{}`: expected a number, got `{}`", self.key, self.value)))
    }

    fn positive(&self) -> Result<f64, ParseError> {
        let v = self.real()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("`{}` must be > 0, got {}", self.key, self.value)))
        }
    }

    fn non_negative(&self) -> Result<f64, ParseError> {
        let v = self.real()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("`{}` must be >= 0, got {}", self.key, self.value)))
        }
    }

    fn integer(&self) -> Result<u64, ParseError> {
        self.value.parse::<u64>().map_err(|_| self.err(format!("`{}`: expected a non-negative integer", self.key)))
    }

    fn boolean(&self) -> Result<bool, ParseError> {
        match self.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(format!("`{}`: expected true or false, got `{other}`", self.key))),
        }
    }

    fn list(&self) -> Vec<&str> {
        self.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let inner =
                inner.strip_suffix(']').ok_or_else(|| ParseError::new(line, "unterminated section header"))?.trim();
            let mut parts = inner.splitn(2, char::is_whitespace);
            let name = parts.next().unwrap_or_default().to_string();
            let arg = parts.next().map(|a| a.trim().to_string()).filter(|a| !a.is_empty());
            if name.is_empty() {
                return Err(ParseError::new(line, "empty section header"));
            }
            sections.push(Section { name, arg, line, entries: Vec::new() });
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| ParseError::new(line, format!("expected `key = value`, got `{trimmed}`")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ParseError::new(line, "empty key"));
        }
        let section = sections.last_mut().ok_or_else(|| ParseError::new(line, "key outside of any section"))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ParseError::new(line, format!("duplicate key `{key}`")));
        }
        section.entries.push(Entry { key, value, line, used: std::cell::Cell::new(false) });
    }
    Ok(sections)
}

fn parse_ports(entry: &Entry, direction: Direction) -> Result<Vec<Port>, ParseError> {
    entry
        .list()
        .into_iter()
        .map(|tag| {
            tag.parse::<Functionality>()
                .map(|functionality| Port { direction, functionality })
                .map_err(|e| entry.err(e.to_string()))
        })
        .collect()
}

fn parse_behavior(section: &Section, kind: ServiceKind) -> Result<Option<Behavior>, ParseError> {
    let Some(entry) = section.get("behavior") else {
        return Ok(None);
    };
    let defaults = BehaviorDefaults::default();
    let real_or = |key: &str, default: f64| -> Result<f64, ParseError> {
        section.get(key).map_or(Ok(default), Entry::non_negative)
    };
    let behavior = match entry.value.as_str() {
        "sensor" => Behavior::Sensor { noise_std: real_or("noise_std", defaults.noise_std)? },
        "converter" => Behavior::Converter,
        "kalman" => Behavior::Kalman {
            q: real_or("q", defaults.kalman_q)?,
            r: section.get("r").map_or(Ok(defaults.kalman_r), Entry::positive)?,
        },
        "pid" => Behavior::Pid {
            kp: real_or("kp", defaults.kp)?,
            ki: real_or("ki", defaults.ki)?,
            kd: real_or("kd", defaults.kd)?,
        },
        "mpc" => {
            let horizon = match section.get("horizon") {
                Some(e) => match e.integer()? {
                    0 => return Err(e.err("`horizon` must be at least 1")),
                    h => h as usize,
                },
                None => defaults.horizon,
            };
            Behavior::Mpc { horizon, q: real_or("q", defaults.mpc_q)?, r_u: real_or("r_u", defaults.mpc_r_u)? }
        }
        "actuator" => Behavior::Actuator,
        "lti" => Behavior::Lti,
        other => return Err(entry.err(format!("unknown behavior `{other}`"))),
    };
    if behavior.kind() != kind {
        return Err(entry.err(format!("behavior `{}` cannot be bound to a {kind}", behavior.name())));
    }
    Ok(Some(behavior))
}

/// Defaults for behavior parameters omitted from a catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorDefaults {
    pub noise_std: f64,
    pub kalman_q: f64,
    pub kalman_r: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub horizon: usize,
    pub mpc_q: f64,
    pub mpc_r_u: f64,
}

impl Default for BehaviorDefaults {
    fn default() -> Self {
        BehaviorDefaults {
            noise_std: 1e-3f64.sqrt(),
            kalman_q: 1e-4,
            kalman_r: 1e-3,
            kp: 1e-3,
            ki: 1e-5,
            kd: 0.0,
            horizon: 10,
            mpc_q: 1.0,
            mpc_r_u: 1e3,
        }
    }
}

fn parse_service(section: &Section) -> Result<ServiceDescriptor, ParseError> {
    let id = section
        .arg
        .clone()
        .ok_or_else(|| ParseError::new(section.line, "service section needs an id: [service <id>]"))?;
    let kind_entry = section.require("kind")?;
    let kind: ServiceKind =
        kind_entry.value.parse().map_err(|e: crate::error::ModelError| kind_entry.err(e.to_string()))?;

    let requires_model = match kind {
        ServiceKind::Filter | ServiceKind::Controller => section.require("requires_model")?.boolean()?,
        _ => match section.get("requires_model") {
            Some(e) if e.boolean()? => {
                return Err(e.err(format!("a {kind} cannot require a model")));
            }
            _ => false,
        },
    };

    let x = section.get("x_comp");
    let y = section.get("y_inacc");
    let attrs = if requires_model {
        if let Some(e) = x.or(y) {
            return Err(e.err(format!("`{}` is derived from the grouped model for model-requiring services", e.key)));
        }
        None
    } else {
        let x = section.require("x_comp")?.positive()?;
        let y = section.require("y_inacc")?.positive()?;
        Some(CostAttributes::new(x, y).map_err(|e| ParseError::new(section.line, e.to_string()))?)
    };

    let complexity = if kind == ServiceKind::Model {
        let level_entry = section.require("complexity")?;
        let level: ComplexityLevel =
            level_entry.value.parse().map_err(|e: crate::error::ModelError| level_entry.err(e.to_string()))?;
        let dim = match section.get("state_dimension") {
            Some(e) => match e.integer()? {
                0 => return Err(e.err("`state_dimension` must be positive")),
                d => d as usize,
            },
            None => level.default_dimension(),
        };
        Some(ModelComplexity { level, state_dimension: dim })
    } else {
        for key in ["complexity", "state_dimension"] {
            if let Some(e) = section.get(key) {
                return Err(e.err(format!("`{key}` is only allowed for models")));
            }
        }
        None
    };

    let defaults = ServiceDescriptor::default_ports(kind, requires_model);
    let requirements = match section.get("requires") {
        Some(e) => parse_ports(e, Direction::Requirement)?,
        None => defaults.iter().copied().filter(|p| p.direction == Direction::Requirement).collect(),
    };
    let guarantees = match section.get("guarantees") {
        Some(e) => parse_ports(e, Direction::Guarantee)?,
        None => defaults.iter().copied().filter(|p| p.direction == Direction::Guarantee).collect(),
    };
    let mut ports = requirements;
    ports.extend(guarantees);

    let behavior = parse_behavior(section, kind)?;
    section.reject_unused()?;

    let service = ServiceDescriptor { id, kind, requires_model, ports, attrs, complexity, behavior };
    service.validate().map_err(|e| ParseError::new(section.line, e.to_string()))?;
    Ok(service)
}

/// Parses a catalog. Every section must be `[service <id>]`.
pub fn parse_catalog(text: &str) -> Result<Catalog, ParseError> {
    let mut catalog = Catalog::default();
    for section in split_sections(text)? {
        if section.name != "service" {
            return Err(ParseError::new(section.line, format!("unexpected section [{}] in catalog", section.title())));
        }
        let service = parse_service(&section)?;
        catalog.insert(service).map_err(|e| ParseError::new(section.line, e.to_string()))?;
    }
    catalog.check_complexity_order().map_err(|e| ParseError::new(0, e.to_string()))?;
    Ok(catalog)
}

fn write_ports(out: &mut String, key: &str, ports: &[Port]) {
    let tags: Vec<_> = ports.iter().map(|p| p.functionality.tag()).collect();
    let _ = writeln!(out, "{key} = {}", tags.join(", "));
}

/// Canonical text for a catalog. Ports are written only when they differ
/// from the defaults for the service's kind.
pub fn serialize_catalog(catalog: &Catalog) -> String {
    let mut out = String::new();
    for (i, s) in catalog.services().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "[service {}]", s.id);
        let _ = writeln!(out, "kind = {}", s.kind);
        if matches!(s.kind, ServiceKind::Filter | ServiceKind::Controller) {
            let _ = writeln!(out, "requires_model = {}", s.requires_model);
        }
        if let Some(attrs) = &s.attrs {
            let _ = writeln!(out, "x_comp = {}", attrs.x_comp());
            let _ = writeln!(out, "y_inacc = {}", attrs.y_inacc());
        }
        if let Some(c) = &s.complexity {
            let _ = writeln!(out, "complexity = {}", c.level);
            let _ = writeln!(out, "state_dimension = {}", c.state_dimension);
        }
        let defaults = ServiceDescriptor::default_ports(s.kind, s.requires_model);
        if s.ports != defaults {
            let reqs: Vec<Port> = s.ports.iter().copied().filter(|p| p.direction == Direction::Requirement).collect();
            let guars: Vec<Port> = s.ports.iter().copied().filter(|p| p.direction == Direction::Guarantee).collect();
            write_ports(&mut out, "requires", &reqs);
            write_ports(&mut out, "guarantees", &guars);
        }
        if let Some(b) = &s.behavior {
            let _ = writeln!(out, "behavior = {}", b.name());
            match b {
                Behavior::Sensor { noise_std } => {
                    let _ = writeln!(out, "noise_std = {noise_std}");
                }
                Behavior::Kalman { q, r } => {
                    let _ = writeln!(out, "q = {q}\nr = {r}");
                }
                Behavior::Pid { kp, ki, kd } => {
                    let _ = writeln!(out, "kp = {kp}\nki = {ki}\nkd = {kd}");
                }
                Behavior::Mpc { horizon, q, r_u } => {
                    let _ = writeln!(out, "horizon = {horizon}\nq = {q}\nr_u = {r_u}");
                }
                Behavior::Converter | Behavior::Actuator | Behavior::Lti => {}
            }
        }
    }
    out
}

/// Scripted change applied to the orchestrator during a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioAction {
    /// Release a withheld catalog service.
    Add(String),
    Remove(String),
    /// Replace the cost attributes of a catalog service.
    Update {
        service: String,
        x_comp: Option<f64>,
        y_inacc: Option<f64>,
    },
    Weights(CostWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub time: f64,
    pub action: ScenarioAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub duration: f64,
    pub sample_time: f64,
    pub seed: u64,
    pub weights: Option<CostWeights>,
    /// Catalog services that are unavailable until an `add` event.
    pub withheld: Vec<String>,
    /// Plant levels at t = 0; the operating point when absent.
    pub initial_levels: Option<[f64; 3]>,
    /// Estimator covariance prior, `prior_variance * I`.
    pub prior_variance: f64,
    /// Piecewise-constant tank-3 reference as `(from time, level)`.
    pub reference: Vec<(f64, f64)>,
    pub events: Vec<TimedEvent>,
    pub plant: PlantParams,
}

impl SimScenario {
    pub fn reference_at(&self, t: f64) -> f64 {
        self.reference
            .iter()
            .take_while(|(from, _)| *from <= t)
            .last()
            .or(self.reference.first())
            .map_or(self.plant.operating_h3, |(_, level)| *level)
    }
}

pub const DEFAULT_PRIOR_VARIANCE: f64 = 1e-2;

fn parse_plant(section: &Section) -> Result<PlantParams, ParseError> {
    let mut p = PlantParams::default();
    let fields: [(&str, &mut f64); 11] = {
        let [a1, a2, a3] = &mut p.areas;
        [
            ("area1", a1),
            ("area2", a2),
            ("area3", a3),
            ("c12", &mut p.c12),
            ("c23", &mut p.c23),
            ("c3", &mut p.c3),
            ("gravity", &mut p.gravity),
            ("u_max", &mut p.u_max),
            ("h_max", &mut p.h_max),
            ("tank_height", &mut p.tank_height),
            ("operating_h3", &mut p.operating_h3),
        ]
    };
    for (key, slot) in fields {
        if let Some(e) = section.get(key) {
            *slot = e.positive()?;
        }
    }
    section.reject_unused()?;
    p.validate().map_err(|e| ParseError::new(section.line, e.to_string()))?;
    Ok(p)
}

fn plant_fields(p: &PlantParams) -> [(&'static str, f64); 11] {
    [
        ("area1", p.areas[0]),
        ("area2", p.areas[1]),
        ("area3", p.areas[2]),
        ("c12", p.c12),
        ("c23", p.c23),
        ("c3", p.c3),
        ("gravity", p.gravity),
        ("u_max", p.u_max),
        ("h_max", p.h_max),
        ("tank_height", p.tank_height),
        ("operating_h3", p.operating_h3),
    ]
}

fn parse_event(section: &Section) -> Result<TimedEvent, ParseError> {
    let time = section.require("time")?.non_negative()?;
    let kind = section.require("kind")?;
    let service = || section.require("service").map(|e| e.value.clone());
    let action = match kind.value.as_str() {
        "add" => ScenarioAction::Add(service()?),
        "remove" => ScenarioAction::Remove(service()?),
        "update" => {
            let service = service()?;
            let x_comp = section.get("x_comp").map(Entry::positive).transpose()?;
            let y_inacc = section.get("y_inacc").map(Entry::positive).transpose()?;
            if x_comp.is_none() && y_inacc.is_none() {
                return Err(ParseError::new(section.line, "update event changes nothing"));
            }
            ScenarioAction::Update { service, x_comp, y_inacc }
        }
        "weights" => {
            let alpha = section.require("alpha")?.positive()?;
            let beta = section.require("beta")?.positive()?;
            ScenarioAction::Weights(CostWeights::new(alpha, beta).map_err(|e| kind.err(e.to_string()))?)
        }
        other => return Err(kind.err(format!("unknown event kind `{other}`"))),
    };
    section.reject_unused()?;
    Ok(TimedEvent { time, action })
}

/// Parses a scenario script.
pub fn parse_scenario(text: &str) -> Result<SimScenario, ParseError> {
    let sections = split_sections(text)?;
    let mut header: Option<&Section> = None;
    let mut plant = PlantParams::default();
    let mut reference = Vec::new();
    let mut events = Vec::new();
    let mut seen_reference = false;
    let mut seen_plant = false;

    for section in &sections {
        match section.name.as_str() {
            "scenario" if header.is_none() => header = Some(section),
            "plant" if !seen_plant => {
                seen_plant = true;
                plant = parse_plant(section)?;
            }
            "reference" if !seen_reference => {
                seen_reference = true;
                for e in &section.entries {
                    let from = e.key.parse::<f64>().ok().filter(|t| t.is_finite() && *t >= 0.0);
                    let from =
                        from.ok_or_else(|| e.err(format!("reference time `{}` is not a non-negative number", e.key)))?;
                    e.used.set(true);
                    reference.push((from, e.positive()?, e.line));
                }
            }
            "event" => events.push((parse_event(section)?, section.line)),
            "scenario" | "plant" | "reference" => {
                return Err(ParseError::new(section.line, format!("duplicate [{}] section", section.name)))
            }
            other => return Err(ParseError::new(section.line, format!("unknown section [{other}]"))),
        }
    }

    let header = header.ok_or_else(|| ParseError::new(1, "missing [scenario] section"))?;
    let duration = header.require("duration")?.non_negative()?;
    let sample_time = header.require("sample_time")?.positive()?;
    let seed = header.require("seed")?.integer()?;
    let weights = match (header.real("alpha")?, header.real("beta")?) {
        (Some(a), Some(b)) => Some(CostWeights::new(a, b).map_err(|e| ParseError::new(header.line, e.to_string()))?),
        (None, None) => None,
        _ => return Err(ParseError::new(header.line, "`alpha` and `beta` must be given together")),
    };
    let withheld: Vec<String> =
        header.get("withhold").map(|e| e.list().into_iter().map(str::to_string).collect()).unwrap_or_default();
    let initial_levels = match header.get("initial_levels") {
        Some(e) => {
            let parts = e.list();
            let levels: Vec<f64> = parts
                .iter()
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0))
                .collect::<Option<_>>()
                .filter(|v: &Vec<f64>| v.len() == 3)
                .ok_or_else(|| e.err("`initial_levels` needs three non-negative levels"))?;
            Some([levels[0], levels[1], levels[2]])
        }
        None => None,
    };
    let prior_variance = header.get("prior_variance").map_or(Ok(DEFAULT_PRIOR_VARIANCE), Entry::positive)?;
    header.reject_unused()?;

    if reference.is_empty() {
        return Err(ParseError::new(header.line, "missing [reference] section with at least one level"));
    }
    if reference[0].0 != 0.0 {
        return Err(ParseError::new(reference[0].2, "the first reference level must start at time 0"));
    }
    for w in reference.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(ParseError::new(w[1].2, "reference times must be strictly increasing"));
        }
    }
    let mut last_time = f64::NEG_INFINITY;
    for (event, line) in &events {
        if event.time > duration {
            return Err(ParseError::new(*line, format!("event time {} exceeds duration {duration}", event.time)));
        }
        if event.time <= last_time {
            return Err(ParseError::new(*line, "event times must be strictly increasing"));
        }
        last_time = event.time;
    }
    let mut withheld_set = BTreeSet::new();
    for id in &withheld {
        if !withheld_set.insert(id.as_str()) {
            return Err(ParseError::new(header.line, format!("`{id}` withheld twice")));
        }
    }

    Ok(SimScenario {
        duration,
        sample_time,
        seed,
        weights,
        withheld,
        initial_levels,
        prior_variance,
        reference: reference.into_iter().map(|(t, v, _)| (t, v)).collect(),
        events: events.into_iter().map(|(e, _)| e).collect(),
        plant,
    })
}

/// Canonical text for a scenario; `[plant]` is written only when it differs
/// from the defaults.
pub fn serialize_scenario(s: &SimScenario) -> String {
    let mut out = String::new();
    out.push_str("[scenario]\n");
    let _ = writeln!(out, "duration = {}", s.duration);
    let _ = writeln!(out, "sample_time = {}", s.sample_time);
    let _ = writeln!(out, "seed = {}", s.seed);
    if let Some(w) = &s.weights {
        let _ = writeln!(out, "alpha = {}\nbeta = {}", w.alpha_comp(), w.beta_inacc());
    }
    if !s.withheld.is_empty() {
        let _ = writeln!(out, "withhold = {}", s.withheld.join(", "));
    }
    if let Some([a, b, c]) = s.initial_levels {
        let _ = writeln!(out, "initial_levels = {a}, {b}, {c}");
    }
    if s.prior_variance != DEFAULT_PRIOR_VARIANCE {
        let _ = writeln!(out, "prior_variance = {}", s.prior_variance);
    }
    if s.plant != PlantParams::default() {
        out.push_str("\n[plant]\n");
        let defaults = plant_fields(&PlantParams::default());
        for ((key, value), (_, default)) in plant_fields(&s.plant).into_iter().zip(defaults) {
            if value != default {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
    }
    out.push_str("\n[reference]\n");
    for (t, level) in &s.reference {
        let _ = writeln!(out, "{t} = {level}");
    }
    for e in &s.events {
        let _ = write!(out, "\n[event]\ntime = {}\n", e.time);
        match &e.action {
            ScenarioAction::Add(id) => {
                let _ = writeln!(out, "kind = add\nservice = {id}");
            }
            ScenarioAction::Remove(id) => {
                let _ = writeln!(out, "kind = remove\nservice = {id}");
            }
            ScenarioAction::Update { service, x_comp, y_inacc } => {
                let _ = writeln!(out, "kind = update\nservice = {service}");
                if let Some(x) = x_comp {
                    let _ = writeln!(out, "x_comp = {x}");
                }
                if let Some(y) = y_inacc {
                    let _ = writeln!(out, "y_inacc = {y}");
                }
            }
            ScenarioAction::Weights(w) => {
                let _ = writeln!(out, "kind = weights\nalpha = {}\nbeta = {}", w.alpha_comp(), w.beta_inacc());
            }
        }
    }
    out
}
