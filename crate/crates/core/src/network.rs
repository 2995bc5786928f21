//! In-memory pipeline network: nodes, typed arcs, supply and demand points,
//! and decision groups over the controllable arcs.
//!
//! A [`Network`] is immutable once constructed. Construction never rejects
//! data on invariant grounds; [`validate`] reports every violation so that
//! importers can surface all problems of a file at once.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("unknown arc id `{0}`")]
    UnknownArc(String),
}

/// Isothermal gas description shared by every component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConstants {
    /// Specific gas constant, J/(kg K).
    #[serde(rename = "R_g")]
    pub r_gas: f64,
    /// Temperature, K.
    #[serde(rename = "T")]
    pub temperature: f64,
    /// Specific gravity relative to air.
    #[serde(rename = "G")]
    pub specific_gravity: f64,
    /// Atmospheric pressure, Pa.
    pub p_atm: f64,
}

/// Molar mass of dry air, kg/kmol.
pub const AIR_MOLAR_MASS: f64 = 28.9647;
/// Universal gas constant, J/(kmol K).
pub const UNIVERSAL_GAS_CONSTANT: f64 = 8314.462618;

impl GasConstants {
    pub const DEFAULT_TEMPERATURE: f64 = 288.706;
    pub const DEFAULT_SPECIFIC_GRAVITY: f64 = 0.6;
    pub const DEFAULT_P_ATM: f64 = 101_350.0;

    /// Gas constants derived from specific gravity alone.
    pub fn from_gravity(specific_gravity: f64, temperature: f64) -> Self {
        Self {
            r_gas: UNIVERSAL_GAS_CONSTANT / (specific_gravity * AIR_MOLAR_MASS),
            temperature,
            specific_gravity,
            p_atm: Self::DEFAULT_P_ATM,
        }
    }

    /// Isothermal speed of sound `sqrt(R_g T)`, m/s.
    pub fn sound_speed(&self) -> f64 {
        (self.r_gas * self.temperature).sqrt()
    }
}

impl Default for GasConstants {
    fn default() -> Self {
        Self::from_gravity(Self::DEFAULT_SPECIFIC_GRAVITY, Self::DEFAULT_TEMPERATURE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    /// Pa
    pub p_min: f64,
    /// Pa
    pub p_max: f64,
    #[serde(default)]
    pub injections: Vec<String>,
    #[serde(default)]
    pub withdrawals: Vec<String>,
}

impl Node {
    pub fn new(id: impl Into<String>, p_min: f64, p_max: f64) -> Self {
        Self {
            id: id.into(),
            p_min,
            p_max,
            injections: Vec::new(),
            withdrawals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcClass {
    Pipe,
    ShortPipe,
    Resistor,
    LossResistor,
    Compressor,
    Valve,
    ControlValve,
}

impl ArcClass {
    /// Compressors, valves and control valves.
    pub fn is_active(self) -> bool {
        matches!(
            self,
            ArcClass::Compressor | ArcClass::Valve | ArcClass::ControlValve
        )
    }

    /// Arcs with an active/bypass sub-mode.
    pub fn has_sub_modes(self) -> bool {
        matches!(self, ArcClass::Compressor | ArcClass::ControlValve)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArcClass::Pipe => "pipe",
            ArcClass::ShortPipe => "short_pipe",
            ArcClass::Resistor => "resistor",
            ArcClass::LossResistor => "loss_resistor",
            ArcClass::Compressor => "compressor",
            ArcClass::Valve => "valve",
            ArcClass::ControlValve => "control_valve",
        }
    }
}

impl fmt::Display for ArcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class-specific data of an arc. All quantities SI.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcKind {
    Pipe {
        length: f64,
        diameter: f64,
        area: f64,
        friction_factor: f64,
    },
    ShortPipe,
    Resistor {
        drag: f64,
        area: f64,
    },
    LossResistor {
        delta_p: f64,
    },
    Compressor {
        alpha_min: f64,
        alpha_max: f64,
    },
    Valve {
        /// Cap on |p_i - p_j| while closed; `None` means unrestricted.
        delta_p_max: Option<f64>,
    },
    ControlValve {
        delta_p_min: f64,
        delta_p_max: f64,
    },
}

impl ArcKind {
    pub fn class(&self) -> ArcClass {
        match self {
            ArcKind::Pipe { .. } => ArcClass::Pipe,
            ArcKind::ShortPipe => ArcClass::ShortPipe,
            ArcKind::Resistor { .. } => ArcClass::Resistor,
            ArcKind::LossResistor { .. } => ArcClass::LossResistor,
            ArcKind::Compressor { .. } => ArcClass::Compressor,
            ArcKind::Valve { .. } => ArcClass::Valve,
            ArcKind::ControlValve { .. } => ArcClass::ControlValve,
        }
    }
}

/// A directed arc. Negative flow means gas moves from `to` to `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: String,
    pub from: String,
    pub to: String,
    /// kg/s
    pub f_min: f64,
    /// kg/s
    pub f_max: f64,
    pub kind: ArcKind,
}

impl Arc {
    pub fn class(&self) -> ArcClass {
        self.kind.class()
    }

    pub fn pipe(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
        diameter: f64,
        friction_factor: f64,
        f_bounds: (f64, f64),
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            f_min: f_bounds.0,
            f_max: f_bounds.1,
            kind: ArcKind::Pipe {
                length,
                diameter,
                area: circle_area(diameter),
                friction_factor,
            },
        }
    }

    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        f_bounds: (f64, f64),
        kind: ArcKind,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            f_min: f_bounds.0,
            f_max: f_bounds.1,
            kind,
        }
    }
}

pub fn circle_area(diameter: f64) -> f64 {
    std::f64::consts::PI * diameter * diameter / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPoint {
    pub id: String,
    pub node: String,
    /// kg/s
    pub s_max: f64,
    /// cost per unit injected flow
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithdrawalPoint {
    pub id: String,
    pub node: String,
    /// kg/s
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubMode {
    Active,
    Bypass,
}

/// One admissible joint configuration of a decision group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperationMode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub status: BTreeMap<String, ArcStatus>,
    /// +1 along the arc, -1 against it, 0 unspecified.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub direction: BTreeMap<String, i8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sub_mode: BTreeMap<String, SubMode>,
}

impl OperationMode {
    pub fn direction_of(&self, arc: &str) -> i8 {
        self.direction.get(arc).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionGroup {
    pub id: String,
    pub arcs: Vec<String>,
    pub modes: Vec<OperationMode>,
}

/// Arc indices entering and leaving one node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Incidence {
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    gas: GasConstants,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    injections: Vec<InjectionPoint>,
    withdrawals: Vec<WithdrawalPoint>,
    decision_groups: Vec<DecisionGroup>,
    node_index: HashMap<String, usize>,
    arc_index: HashMap<String, usize>,
    incidence: Vec<Incidence>,
}

impl Network {
    /// Assembles a network and its lookup tables. The per-node injection and
    /// withdrawal id lists are rebuilt from the point records.
    pub fn new(
        name: impl Into<String>,
        gas: GasConstants,
        mut nodes: Vec<Node>,
        arcs: Vec<Arc>,
        injections: Vec<InjectionPoint>,
        withdrawals: Vec<WithdrawalPoint>,
        decision_groups: Vec<DecisionGroup>,
    ) -> Self {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (k, n) in nodes.iter().enumerate() {
            node_index.entry(n.id.clone()).or_insert(k);
        }
        let mut arc_index = HashMap::with_capacity(arcs.len());
        for (k, a) in arcs.iter().enumerate() {
            arc_index.entry(a.id.clone()).or_insert(k);
        }
        for n in nodes.iter_mut() {
            n.injections.clear();
            n.withdrawals.clear();
        }
        for s in &injections {
            if let Some(&k) = node_index.get(&s.node) {
                nodes[k].injections.push(s.id.clone());
            }
        }
        for w in &withdrawals {
            if let Some(&k) = node_index.get(&w.node) {
                nodes[k].withdrawals.push(w.id.clone());
            }
        }
        let mut incidence = vec![Incidence::default(); nodes.len()];
        for (k, a) in arcs.iter().enumerate() {
            if let Some(&i) = node_index.get(&a.from) {
                incidence[i].outgoing.push(k);
            }
            if let Some(&j) = node_index.get(&a.to) {
                incidence[j].incoming.push(k);
            }
        }
        Self {
            name: name.into(),
            gas,
            nodes,
            arcs,
            injections,
            withdrawals,
            decision_groups,
            node_index,
            arc_index,
            incidence,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn gas(&self) -> &GasConstants {
        &self.gas
    }
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }
    pub fn injections(&self) -> &[InjectionPoint] {
        &self.injections
    }
    pub fn withdrawals(&self) -> &[WithdrawalPoint] {
        &self.withdrawals
    }
    pub fn decision_groups(&self) -> &[DecisionGroup] {
        &self.decision_groups
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }
    pub fn arc_idx(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_idx(id).map(|k| &self.nodes[k])
    }
    pub fn arc(&self, id: &str) -> Option<&Arc> {
        self.arc_idx(id).map(|k| &self.arcs[k])
    }

    /// Arcs of one class, in data order.
    pub fn arcs_of(&self, class: ArcClass) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(move |a| a.class() == class)
    }

    pub fn count(&self, class: ArcClass) -> usize {
        self.arcs_of(class).count()
    }

    /// Incoming `(j, i)` and outgoing `(i, j)` arcs of node `i`.
    pub fn incidence(&self, node: &str) -> Result<&Incidence, NetworkError> {
        self.node_idx(node)
            .map(|k| &self.incidence[k])
            .ok_or_else(|| NetworkError::UnknownNode(node.to_string()))
    }

    pub fn total_demand(&self) -> f64 {
        self.withdrawals.iter().map(|w| w.d).sum()
    }

    pub fn total_supply_capacity(&self) -> f64 {
        self.injections.iter().map(|s| s.s_max).sum()
    }

    /// Copy with the supply/demand records replaced, e.g. by a nomination.
    pub fn with_points(
        &self,
        injections: Vec<InjectionPoint>,
        withdrawals: Vec<WithdrawalPoint>,
    ) -> Network {
        Network::new(
            self.name.clone(),
            self.gas,
            self.nodes.clone(),
            self.arcs.clone(),
            injections,
            withdrawals,
            self.decision_groups.clone(),
        )
    }

    /// Copy with a different decision-group list.
    pub fn with_decision_groups(&self, groups: Vec<DecisionGroup>) -> Network {
        Network::new(
            self.name.clone(),
            self.gas,
            self.nodes.clone(),
            self.arcs.clone(),
            self.injections.clone(),
            self.withdrawals.clone(),
            groups,
        )
    }

    pub fn with_gas(&self, gas: GasConstants) -> Network {
        let mut n = self.clone();
        n.gas = gas;
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub element: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn error(&mut self, element: &str, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            element: element.to_string(),
            message: message.into(),
        });
    }

    fn warn(&mut self, element: &str, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            element: element.to_string(),
            message: message.into(),
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    /// The network is accepted iff there are no errors.
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            let tag = match i.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}: {}", i.element, i.message)?;
        }
        Ok(())
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

/// Checks every structural invariant. Pure; calling it twice yields the same report.
pub fn validate(net: &Network) -> ValidationReport {
    let mut r = ValidationReport::default();

    let gas = net.gas();
    if !(gas.r_gas > 0.0 && gas.temperature > 0.0 && gas.specific_gravity > 0.0 && gas.p_atm > 0.0)
    {
        r.error("gas", "gas constants R_g, T, G, p_atm must be positive");
    }

    let mut seen = HashSet::new();
    for n in net.nodes() {
        if !seen.insert(n.id.as_str()) {
            r.error(&n.id, "duplicate node id");
        }
        if !(finite(n.p_min) && n.p_min > 0.0) {
            r.error(&n.id, "minimum pressure must be positive");
        }
        if !(finite(n.p_max) && n.p_max >= n.p_min) {
            r.error(
                &n.id,
                "maximum pressure must be at least the minimum pressure",
            );
        }
    }

    let mut seen = HashSet::new();
    for a in net.arcs() {
        let id = a.id.as_str();
        if !seen.insert(id) {
            r.error(id, "duplicate arc id");
        }
        if net.node_idx(&a.from).is_none() {
            r.error(id, format!("unknown from-node `{}`", a.from));
        }
        if net.node_idx(&a.to).is_none() {
            r.error(id, format!("unknown to-node `{}`", a.to));
        }
        if !(finite(a.f_min) && finite(a.f_max)) {
            r.error(id, "flow bounds must be finite");
        } else if a.f_min > a.f_max {
            r.error(id, "flow lower bound exceeds upper bound");
        }
        match &a.kind {
            ArcKind::Pipe {
                length,
                diameter,
                area,
                friction_factor,
            } => {
                if !(*length > 0.0) {
                    r.error(id, "length must be positive");
                }
                if !(*diameter > 0.0) {
                    r.error(id, "diameter must be positive");
                }
                if !(*area > 0.0) {
                    r.error(id, "area must be positive");
                }
                if !(*friction_factor > 0.0) {
                    r.error(id, "friction factor must be positive");
                }
            }
            ArcKind::ShortPipe => {}
            ArcKind::Resistor { drag, area } => {
                if !(*drag > 0.0) {
                    r.error(id, "drag factor must be positive");
                }
                if !(*area > 0.0) {
                    r.error(id, "area must be positive");
                }
            }
            ArcKind::LossResistor { delta_p } => {
                if !(*delta_p >= 0.0) {
                    r.error(id, "pressure loss must be non-negative");
                }
            }
            ArcKind::Compressor {
                alpha_min,
                alpha_max,
            } => {
                if !(*alpha_min >= 1.0 && alpha_max >= alpha_min) {
                    r.error(
                        id,
                        "compression ratios must satisfy 1 <= alpha_min <= alpha_max",
                    );
                }
            }
            ArcKind::Valve { delta_p_max } => {
                if let Some(dp) = delta_p_max {
                    if !(*dp >= 0.0) {
                        r.error(id, "valve pressure-difference cap must be non-negative");
                    }
                }
            }
            ArcKind::ControlValve {
                delta_p_min,
                delta_p_max,
            } => {
                if !(*delta_p_min >= 0.0 && delta_p_max >= delta_p_min) {
                    r.error(
                        id,
                        "control valve pressure reduction must satisfy 0 <= min <= max",
                    );
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for s in net.injections() {
        if !seen.insert(s.id.as_str()) {
            r.error(&s.id, "duplicate injection id");
        }
        if net.node_idx(&s.node).is_none() {
            r.error(&s.id, format!("unknown node `{}`", s.node));
        }
        if !(s.s_max >= 0.0 && s.s_max.is_finite()) {
            r.error(&s.id, "injection capacity must be non-negative");
        }
        if !(s.cost >= 0.0 && s.cost.is_finite()) {
            r.error(&s.id, "injection cost must be non-negative");
        }
    }
    let mut seen = HashSet::new();
    for w in net.withdrawals() {
        if !seen.insert(w.id.as_str()) {
            r.error(&w.id, "duplicate withdrawal id");
        }
        if net.node_idx(&w.node).is_none() {
            r.error(&w.id, format!("unknown node `{}`", w.node));
        }
        if !(w.d >= 0.0 && w.d.is_finite()) {
            r.error(&w.id, "withdrawal must be non-negative");
        }
    }

    let mut seen = HashSet::new();
    for g in net.decision_groups() {
        if !seen.insert(g.id.as_str()) {
            r.error(&g.id, "duplicate decision group id");
        }
        check_group(net, g, &mut r);
    }

    if !weakly_connected(net) {
        r.warn("network", "network is not weakly connected");
    }
    r
}

fn check_group(net: &Network, g: &DecisionGroup, r: &mut ValidationReport) {
    let id = g.id.as_str();
    if g.modes.is_empty() {
        r.error(id, "decision group has no operation modes");
    }
    let mut members = HashSet::new();
    for a in &g.arcs {
        members.insert(a.as_str());
        match net.arc(a) {
            None => r.error(id, format!("unknown arc `{a}`")),
            Some(arc) if !arc.class().is_active() => {
                r.error(id, "decision group arcs must be active arcs")
            }
            Some(_) => {}
        }
    }
    for (k, m) in g.modes.iter().enumerate() {
        let mode = m.id.clone().unwrap_or_else(|| format!("mode {k}"));
        for a in &g.arcs {
            if !m.status.contains_key(a) {
                r.error(id, format!("{mode}: no status for arc `{a}`"));
            }
        }
        for a in m
            .status
            .keys()
            .chain(m.direction.keys())
            .chain(m.sub_mode.keys())
        {
            if !members.contains(a.as_str()) {
                r.error(id, format!("{mode}: arc `{a}` is not in the group"));
            }
        }
        for (a, &dir) in &m.direction {
            if !(-1..=1).contains(&dir) {
                r.error(id, format!("{mode}: direction of `{a}` must be -1, 0 or 1"));
            }
            if dir != 0 && m.status.get(a) != Some(&ArcStatus::Open) {
                r.error(
                    id,
                    format!("{mode}: direction given for non-open arc `{a}`"),
                );
            }
        }
        for (a, sub) in &m.sub_mode {
            let class = net.arc(a).map(|x| x.class());
            if !class.is_some_and(|c| c.has_sub_modes()) {
                r.error(
                    id,
                    format!("{mode}: sub-mode given for `{a}` which is not a compressor or control valve"),
                );
            }
            if m.status.get(a) != Some(&ArcStatus::Open) {
                r.error(id, format!("{mode}: sub-mode given for non-open arc `{a}`"));
            }
            if *sub == SubMode::Active && m.direction_of(a) < 0 {
                r.error(
                    id,
                    format!("{mode}: active arc `{a}` cannot carry flow against its direction"),
                );
            }
        }
    }
}

fn weakly_connected(net: &Network) -> bool {
    let n = net.nodes().len();
    if n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); n];
    for a in net.arcs() {
        if let (Some(i), Some(j)) = (net.node_idx(&a.from), net.node_idx(&a.to)) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}
