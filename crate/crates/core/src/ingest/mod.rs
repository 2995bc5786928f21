//! Reading and writing networks, decision groups and nominations.
//!
//! Two network formats are understood: the canonical json document
//! (`ogf-net/1`, schema in `schema/ogf-net-1.schema.json`) and the subset of
//! GasLib XML that describes the components modeled here.

mod gaslib;
mod json;
pub mod xml;

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{validate, DecisionGroup, GasConstants, Network};
use crate::physics::{eos_coefficients, Eos, PhysicsError};

pub use gaslib::{parse_gaslib_groups, parse_gaslib_network, parse_gaslib_nomination};
pub use json::{network_from_json, network_to_json, NETWORK_SCHEMA};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("xml line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{element}: missing attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("{element}: unit `{unit}` is not a {quantity} unit")]
    Unit {
        element: String,
        unit: String,
        quantity: &'static str,
    },
    #[error("{element}: value `{value}` is not a number")]
    BadNumber { element: String, value: String },
    #[error("unsupported document schema `{0}`")]
    Schema(String),
    #[error("unknown {kind} `{id}`")]
    UnknownReference { kind: &'static str, id: String },
    #[error("decision group `{0}` has no modes")]
    EmptyModes(String),
    #[error("{element}: {message}")]
    Unsupported { element: String, message: String },
    #[error("invalid network:\n{0}")]
    Invalid(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkFormat {
    GaslibXml,
    Json,
}

impl std::str::FromStr for NetworkFormat {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaslib-xml" | "xml" => Ok(NetworkFormat::GaslibXml),
            "json" | "canonical-json" => Ok(NetworkFormat::Json),
            _ => Err(IngestError::Schema(s.to_string())),
        }
    }
}

/// Conversion settings shared by the importers.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Velocity cap for flow bounds the data leaves open, m/s.
    pub velocity_cap: f64,
    /// Cross-section used for those bounds on arcs without an area, m^2.
    pub default_area: f64,
    /// Norm conditions for volumetric flow units.
    pub p_norm: f64,
    pub t_norm: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            velocity_cap: 60.0,
            default_area: 1.0,
            p_norm: 101_325.0,
            t_norm: 273.15,
        }
    }
}

impl IngestOptions {
    /// Symmetric flow cap `rho(p_max) * area * v_cap`, kg/s.
    pub fn flow_cap(&self, gas: &GasConstants, p_max: f64, area: f64) -> Result<f64, IngestError> {
        let (b1, b2) = eos_coefficients(gas, Eos::Cnga)?;
        let rho = p_max * (b1 + b2 * p_max) / (gas.r_gas * gas.temperature);
        Ok(rho * area * self.velocity_cap)
    }

    /// Mass per norm cubic metre, kg/m^3.
    pub fn norm_density(&self, gas: &GasConstants) -> Result<f64, IngestError> {
        let (b1, b2) = eos_coefficients(gas, Eos::Cnga)?;
        let p = self.p_norm;
        Ok(p * (b1 + b2 * p) / (gas.r_gas * self.t_norm))
    }
}

pub fn parse_network(
    text: &str,
    format: NetworkFormat,
    opts: &IngestOptions,
) -> Result<Network, IngestError> {
    match format {
        NetworkFormat::Json => network_from_json(text, opts),
        NetworkFormat::GaslibXml => parse_gaslib_network(text, opts),
    }
}

/// Parses and rejects networks with validation errors; warnings are logged.
pub fn load_network(
    text: &str,
    format: NetworkFormat,
    opts: &IngestOptions,
) -> Result<Network, IngestError> {
    let net = parse_network(text, format, opts)?;
    check(&net)?;
    Ok(net)
}

fn check(net: &Network) -> Result<(), IngestError> {
    let report = validate(net);
    for w in report.warnings() {
        warn!("{}: {}", w.element, w.message);
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(IngestError::Invalid(report.to_string()))
    }
}

/// Decision groups from json (a list of groups) or GasLib XML, checked
/// against the network.
pub fn parse_decision_groups(
    text: &str,
    format: NetworkFormat,
    network: &Network,
) -> Result<Vec<DecisionGroup>, IngestError> {
    let groups = match format {
        NetworkFormat::Json => serde_json::from_str::<Vec<DecisionGroup>>(text)?,
        NetworkFormat::GaslibXml => parse_gaslib_groups(text)?,
    };
    for g in &groups {
        if g.modes.is_empty() {
            return Err(IngestError::EmptyModes(g.id.clone()));
        }
        for a in &g.arcs {
            if network.arc(a).is_none() {
                return Err(IngestError::UnknownReference {
                    kind: "arc",
                    id: a.clone(),
                });
            }
        }
    }
    let mut all = network.decision_groups().to_vec();
    all.extend(groups.iter().cloned());
    check(&network.with_decision_groups(all))?;
    Ok(groups)
}

pub const NOMINATION_SCHEMA: &str = "ogf-nom/1";

/// Supply limits and costs of one injection point in a nomination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionNomination {
    pub id: String,
    /// kg/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithdrawalNomination {
    pub id: String,
    /// kg/s
    pub d: f64,
}

/// Document form of a nomination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominationDoc {
    #[serde(default = "nomination_schema")]
    pub schema: String,
    pub id: String,
    #[serde(default)]
    pub withdrawals: Vec<WithdrawalNomination>,
    #[serde(default)]
    pub injections: Vec<InjectionNomination>,
    /// True when `s_max` values already include the 5 % margin.
    #[serde(default)]
    pub s_max_scaled: bool,
    /// Objective of a known MINLP-feasible solution, for gap reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_objective: Option<f64>,
}

fn nomination_schema() -> String {
    NOMINATION_SCHEMA.into()
}

/// Resolved supply and demand for every point of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nomination {
    pub id: String,
    /// kg/s per withdrawal id.
    pub demand: BTreeMap<String, f64>,
    /// kg/s per injection id, margin included.
    pub s_max: BTreeMap<String, f64>,
    pub cost: BTreeMap<String, f64>,
    /// Seed used for costs the source left open.
    pub cost_seed: u64,
    /// Injection ids whose cost was drawn.
    pub drawn_costs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_objective: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Margin applied to nominated injection limits.
pub const SUPPLY_MARGIN: f64 = 1.05;

impl Nomination {
    /// Resolves a nomination document against a network: unknown ids are
    /// errors, unlisted withdrawals get zero demand, unlisted injections keep
    /// the network's limit, limits get the 5 % margin unless already scaled,
    /// and open costs are drawn from U[1, 5] in network order.
    pub fn resolve(
        doc: &NominationDoc,
        network: &Network,
        cost_seed: u64,
    ) -> Result<Self, IngestError> {
        if doc.schema != NOMINATION_SCHEMA {
            return Err(IngestError::Schema(doc.schema.clone()));
        }
        let mut demand: BTreeMap<String, f64> = network
            .withdrawals()
            .iter()
            .map(|w| (w.id.clone(), 0.0))
            .collect();
        for w in &doc.withdrawals {
            let slot = demand
                .get_mut(&w.id)
                .ok_or_else(|| IngestError::UnknownReference {
                    kind: "withdrawal",
                    id: w.id.clone(),
                })?;
            if !(w.d >= 0.0 && w.d.is_finite()) {
                return Err(IngestError::Unsupported {
                    element: format!("withdrawal `{}`", w.id),
                    message: "demand must be finite and nonnegative".into(),
                });
            }
            *slot = w.d;
        }
        let listed: BTreeMap<&str, &InjectionNomination> =
            doc.injections.iter().map(|i| (i.id.as_str(), i)).collect();
        for id in listed.keys() {
            if !network.injections().iter().any(|s| s.id == *id) {
                return Err(IngestError::UnknownReference {
                    kind: "injection",
                    id: id.to_string(),
                });
            }
        }
        let factor = if doc.s_max_scaled { 1.0 } else { SUPPLY_MARGIN };
        let mut rng = ChaCha8Rng::seed_from_u64(cost_seed);
        let mut s_max = BTreeMap::new();
        let mut cost = BTreeMap::new();
        let mut drawn = Vec::new();
        for s in network.injections() {
            let entry = listed.get(s.id.as_str());
            let cap = entry.and_then(|e| e.s_max).unwrap_or(s.s_max);
            if !(cap >= 0.0 && cap.is_finite()) {
                return Err(IngestError::Unsupported {
                    element: format!("injection `{}`", s.id),
                    message: "s_max must be finite and nonnegative".into(),
                });
            }
            s_max.insert(s.id.clone(), cap * factor);
            let c = match entry.and_then(|e| e.cost) {
                Some(c) => c,
                None => {
                    drawn.push(s.id.clone());
                    rng.random_range(1.0..=5.0)
                }
            };
            cost.insert(s.id.clone(), c);
        }
        let mut warnings = Vec::new();
        let (need, have): (f64, f64) = (demand.values().sum(), s_max.values().sum());
        if need > have {
            let msg = format!(
                "nomination `{}`: total withdrawal {need} kg/s exceeds injection capacity {have} kg/s",
                doc.id
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        Ok(Self {
            id: doc.id.clone(),
            demand,
            s_max,
            cost,
            cost_seed,
            drawn_costs: drawn,
            reference_objective: doc.reference_objective,
            warnings,
        })
    }

    /// Nomination that keeps the network's own supply and demand data.
    pub fn from_network(network: &Network) -> Self {
        Self {
            id: network.name().to_string(),
            demand: network
                .withdrawals()
                .iter()
                .map(|w| (w.id.clone(), w.d))
                .collect(),
            s_max: network
                .injections()
                .iter()
                .map(|s| (s.id.clone(), s.s_max))
                .collect(),
            cost: network
                .injections()
                .iter()
                .map(|s| (s.id.clone(), s.cost))
                .collect(),
            cost_seed: 0,
            drawn_costs: Vec::new(),
            reference_objective: None,
            warnings: Vec::new(),
        }
    }

    /// Copy of the network with this nomination's supply and demand.
    pub fn apply(&self, network: &Network) -> Network {
        let inj = network
            .injections()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.s_max = self.s_max.get(&s.id).copied().unwrap_or(s.s_max);
                s.cost = self.cost.get(&s.id).copied().unwrap_or(s.cost);
                s
            })
            .collect();
        let wd = network
            .withdrawals()
            .iter()
            .map(|w| {
                let mut w = w.clone();
                w.d = self.demand.get(&w.id).copied().unwrap_or(0.0);
                w
            })
            .collect();
        network.with_points(inj, wd)
    }

    /// Document that resolves back to this nomination.
    pub fn to_doc(&self) -> NominationDoc {
        NominationDoc {
            schema: NOMINATION_SCHEMA.into(),
            id: self.id.clone(),
            withdrawals: self
                .demand
                .iter()
                .map(|(id, &d)| WithdrawalNomination { id: id.clone(), d })
                .collect(),
            injections: self
                .s_max
                .iter()
                .map(|(id, &s)| InjectionNomination {
                    id: id.clone(),
                    s_max: Some(s),
                    cost: self.cost.get(id).copied(),
                })
                .collect(),
            s_max_scaled: true,
            reference_objective: self.reference_objective,
        }
    }
}

/// Nomination from json (`ogf-nom/1`) or a GasLib scenario file.
pub fn parse_nomination(
    text: &str,
    format: NetworkFormat,
    network: &Network,
    cost_seed: u64,
    opts: &IngestOptions,
) -> Result<Nomination, IngestError> {
    let doc = match format {
        NetworkFormat::Json => serde_json::from_str::<NominationDoc>(text)?,
        NetworkFormat::GaslibXml => parse_gaslib_nomination(text, network, opts)?,
    };
    Nomination::resolve(&doc, network, cost_seed)
}

/// Guesses the format from the first non-blank character.
pub fn sniff_format(text: &str) -> NetworkFormat {
    if text.trim_start().starts_with('<') {
        NetworkFormat::GaslibXml
    } else {
        NetworkFormat::Json
    }
}
