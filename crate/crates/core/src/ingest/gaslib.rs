//! GasLib XML subset: network topology (`.net`), combined decisions and
//! scenario nominations (`.scn`).

use std::collections::BTreeMap;

use log::warn;

use super::json::flow_bounds;
use super::xml::{self, Element};
use super::{IngestError, IngestOptions, InjectionNomination, NominationDoc, WithdrawalNomination};
use crate::network::{
    circle_area, Arc, ArcKind, ArcStatus, DecisionGroup, GasConstants, InjectionPoint, Network,
    Node, OperationMode, SubMode, WithdrawalPoint,
};
use crate::physics::nikuradse;

/// Norm density of dry air, kg/m^3 at 273.15 K and 101325 Pa.
const AIR_NORM_DENSITY: f64 = 1.292923;
const CELSIUS_OFFSET: f64 = 273.15;

#[derive(Clone, Copy)]
enum Quantity {
    Pressure,
    Length,
    Flow,
    Temperature,
    Density,
    Plain,
}

impl Quantity {
    fn label(self) -> &'static str {
        match self {
            Quantity::Pressure => "pressure",
            Quantity::Length => "length",
            Quantity::Flow => "flow",
            Quantity::Temperature => "temperature",
            Quantity::Density => "density",
            Quantity::Plain => "dimensionless",
        }
    }
}

struct Units {
    /// kg per norm cubic metre.
    norm_density: f64,
}

impl Units {
    fn to_si(
        &self,
        q: Quantity,
        value: f64,
        unit: &str,
        element: &str,
    ) -> Result<f64, IngestError> {
        let v = match (q, unit) {
            (Quantity::Pressure, "bar") => value * 1e5,
            (Quantity::Pressure, "Pa") => value,
            (Quantity::Pressure, "kPa") => value * 1e3,
            (Quantity::Pressure, "MPa") => value * 1e6,
            (Quantity::Length, "m") => value,
            (Quantity::Length, "km") => value * 1e3,
            (Quantity::Length, "mm") => value * 1e-3,
            (Quantity::Length, "cm") => value * 1e-2,
            (Quantity::Flow, "1000m_cube_per_hour") => value * 1000.0 / 3600.0 * self.norm_density,
            (Quantity::Flow, "m_cube_per_hour") => value / 3600.0 * self.norm_density,
            (Quantity::Flow, "m_cube_per_s") => value * self.norm_density,
            (Quantity::Flow, "kg_per_s") => value,
            (Quantity::Temperature, "Celsius") => value + CELSIUS_OFFSET,
            (Quantity::Temperature, "K") => value,
            (Quantity::Density, "kg_per_m_cube") => value,
            (Quantity::Plain, "" | "dimensionless" | "-") => value,
            _ => {
                return Err(IngestError::Unit {
                    element: element.to_string(),
                    unit: unit.to_string(),
                    quantity: q.label(),
                })
            }
        };
        Ok(v)
    }

    /// Reads `<child value=".." unit=".."/>` of `el`.
    fn value(&self, el: &Element, child: &str, q: Quantity) -> Result<Option<f64>, IngestError> {
        let Some(c) = el.child(child) else {
            return Ok(None);
        };
        let raw = c.require("value")?;
        let value: f64 = raw.trim().parse().map_err(|_| IngestError::BadNumber {
            element: format!("{}/{child}", el.label()),
            value: raw.to_string(),
        })?;
        let unit = c.attr("unit").unwrap_or("");
        self.to_si(q, value, unit, &format!("{}/{child}", el.label()))
            .map(Some)
    }

    fn required(&self, el: &Element, child: &str, q: Quantity) -> Result<f64, IngestError> {
        self.value(el, child, q)?
            .ok_or_else(|| IngestError::MissingAttribute {
                element: el.label(),
                attribute: child.to_string(),
            })
    }
}

fn section<'a>(root: &'a Element, name: &str) -> Vec<&'a Element> {
    root.find(name)
        .map(|s| s.children.iter().collect())
        .unwrap_or_default()
}

/// Gas temperature and specific gravity from the sources, when given.
fn gas_from_sources(nodes: &[&Element], probe: &Units) -> Result<GasConstants, IngestError> {
    let mut temps = Vec::new();
    let mut densities = Vec::new();
    for n in nodes.iter().filter(|n| n.name == "source") {
        if let Some(t) = probe.value(n, "gasTemperature", Quantity::Temperature)? {
            temps.push(t);
        }
        if let Some(d) = probe.value(n, "normDensity", Quantity::Density)? {
            densities.push(d);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let d = GasConstants::default();
    let gravity = mean(&densities).map_or(d.specific_gravity, |rho| rho / AIR_NORM_DENSITY);
    let temperature = mean(&temps).unwrap_or(d.temperature);
    Ok(GasConstants::from_gravity(gravity, temperature))
}

pub fn parse_gaslib_network(text: &str, opts: &IngestOptions) -> Result<Network, IngestError> {
    let root = xml::parse(text)?;
    let node_els = section(&root, "nodes");
    let conn_els = section(&root, "connections");
    let probe = Units { norm_density: 1.0 };
    let gas = gas_from_sources(&node_els, &probe)?;
    let units = Units {
        norm_density: opts.norm_density(&gas)?,
    };

    let mut nodes = Vec::new();
    let mut injections = Vec::new();
    let mut withdrawals = Vec::new();
    for el in &node_els {
        if !matches!(el.name.as_str(), "source" | "sink" | "innode") {
            warn!("ignoring node element {}", el.label());
            continue;
        }
        let id = el.require("id")?.to_string();
        let p_min = units.required(el, "pressureMin", Quantity::Pressure)?;
        let p_max = units.required(el, "pressureMax", Quantity::Pressure)?;
        nodes.push(Node::new(id.clone(), p_min, p_max));
        match el.name.as_str() {
            "source" => injections.push(InjectionPoint {
                id: id.clone(),
                node: id,
                s_max: units.required(el, "flowMax", Quantity::Flow)?.max(0.0),
                cost: 1.0,
            }),
            "sink" => withdrawals.push(WithdrawalPoint {
                id: id.clone(),
                node: id,
                d: 0.0,
            }),
            _ => {}
        }
    }

    let p_of = |id: &str| {
        nodes
            .iter()
            .find(|n| n.id == id)
            .map(|n| (n.p_min, n.p_max))
    };
    let mut arcs = Vec::new();
    for el in &conn_els {
        let kind_name = el.name.as_str();
        if !matches!(
            kind_name,
            "pipe" | "shortPipe" | "resistor" | "valve" | "controlValve" | "compressorStation"
        ) {
            warn!("ignoring connection element {}", el.label());
            continue;
        }
        let id = el.require("id")?.to_string();
        let from = el.require("from")?.to_string();
        let to = el.require("to")?.to_string();
        let given = (
            units.value(el, "flowMin", Quantity::Flow)?,
            units.value(el, "flowMax", Quantity::Flow)?,
        );
        let (pf, pt) = (p_of(&from), p_of(&to));
        let (kind, area) = match kind_name {
            "pipe" => {
                let length = units.required(el, "length", Quantity::Length)?;
                let diameter = units.required(el, "diameter", Quantity::Length)?;
                let area = circle_area(diameter);
                let friction_factor = match units.value(el, "frictionFactor", Quantity::Plain)? {
                    Some(l) => l,
                    None => nikuradse(diameter, units.required(el, "roughness", Quantity::Length)?),
                };
                (
                    ArcKind::Pipe {
                        length,
                        diameter,
                        area,
                        friction_factor,
                    },
                    Some(area),
                )
            }
            "shortPipe" => (ArcKind::ShortPipe, None),
            "resistor" => {
                let drag = units.value(el, "dragFactor", Quantity::Plain)?;
                let loss = units.value(el, "pressureLoss", Quantity::Pressure)?;
                match (drag, loss) {
                    (Some(drag), _) => {
                        let d = units.required(el, "diameter", Quantity::Length)?;
                        let area = circle_area(d);
                        (ArcKind::Resistor { drag, area }, Some(area))
                    }
                    (None, Some(delta_p)) => (ArcKind::LossResistor { delta_p }, None),
                    (None, None) => {
                        return Err(IngestError::Unsupported {
                            element: el.label(),
                            message: "resistor needs dragFactor or a constant pressureLoss".into(),
                        })
                    }
                }
            }
            "valve" => (
                ArcKind::Valve {
                    delta_p_max: units.value(el, "pressureDifferentialMax", Quantity::Pressure)?,
                },
                None,
            ),
            "controlValve" => {
                let lo = units
                    .value(el, "pressureDifferentialMin", Quantity::Pressure)?
                    .unwrap_or(0.0);
                let hi = match units.value(el, "pressureDifferentialMax", Quantity::Pressure)? {
                    Some(v) => v,
                    None => match (pf, pt) {
                        (Some((_, fmax)), Some((tmin, _))) => (fmax - tmin).max(lo),
                        _ => lo,
                    },
                };
                (
                    ArcKind::ControlValve {
                        delta_p_min: lo,
                        delta_p_max: hi,
                    },
                    None,
                )
            }
            _ => {
                let alpha_min = units
                    .value(el, "compressionRatioMin", Quantity::Plain)?
                    .unwrap_or(1.0);
                let alpha_max = match units.value(el, "compressionRatioMax", Quantity::Plain)? {
                    Some(a) => a,
                    None => match (pf, pt) {
                        (Some((fmin, _)), Some((_, tmax))) => (tmax / fmin).max(alpha_min),
                        _ => alpha_min,
                    },
                };
                (
                    ArcKind::Compressor {
                        alpha_min,
                        alpha_max,
                    },
                    None,
                )
            }
        };
        let bounds = flow_bounds(&gas, &nodes, &from, &to, area, given, opts)?;
        arcs.push(Arc::new(id, from, to, bounds, kind));
    }
    let name = root
        .find("title")
        .and_then(|t| t.attr("value"))
        .unwrap_or("gaslib")
        .to_string();
    Ok(Network::new(
        name,
        gas,
        nodes,
        arcs,
        injections,
        withdrawals,
        vec![],
    ))
}

fn parse_status(el: &Element) -> Result<ArcStatus, IngestError> {
    match el.require("value")? {
        "1" | "open" => Ok(ArcStatus::Open),
        "0" | "closed" => Ok(ArcStatus::Closed),
        other => Err(IngestError::Unsupported {
            element: el.label(),
            message: format!("status `{other}`"),
        }),
    }
}

/// `decisionGroup/decision/<arc-type id value [mode] [flowDirection]>`.
pub fn parse_gaslib_groups(text: &str) -> Result<Vec<DecisionGroup>, IngestError> {
    let root = xml::parse(text)?;
    let mut group_els = Vec::new();
    collect(&root, "decisionGroup", &mut group_els);
    let mut groups = Vec::new();
    for g in group_els {
        let id = g.require("id")?.to_string();
        let mut arcs: Vec<String> = Vec::new();
        let mut modes = Vec::new();
        for d in g.children_named("decision") {
            let mut mode = OperationMode {
                id: d.attr("id").map(str::to_string),
                ..OperationMode::default()
            };
            for a in &d.children {
                let arc = a.require("id")?.to_string();
                if !arcs.contains(&arc) {
                    arcs.push(arc.clone());
                }
                mode.status.insert(arc.clone(), parse_status(a)?);
                if let Some(m) = a.attr("mode") {
                    let sub = match m {
                        "active" => SubMode::Active,
                        "bypass" => SubMode::Bypass,
                        other => {
                            return Err(IngestError::Unsupported {
                                element: a.label(),
                                message: format!("mode `{other}`"),
                            })
                        }
                    };
                    mode.sub_mode.insert(arc.clone(), sub);
                }
                if let Some(dir) = a.attr("flowDirection") {
                    let v: i8 = dir.trim().parse().map_err(|_| IngestError::BadNumber {
                        element: a.label(),
                        value: dir.to_string(),
                    })?;
                    if v != 0 {
                        mode.direction.insert(arc, v);
                    }
                }
            }
            modes.push(mode);
        }
        if modes.is_empty() {
            return Err(IngestError::EmptyModes(id));
        }
        groups.push(DecisionGroup { id, arcs, modes });
    }
    Ok(groups)
}

fn collect<'a>(el: &'a Element, name: &str, out: &mut Vec<&'a Element>) {
    if el.name == name {
        out.push(el);
        return;
    }
    for c in &el.children {
        collect(c, name, out);
    }
}

/// Scenario file: entry `flow` upper bounds become supply limits, exit
/// `flow` values become demands.
pub fn parse_gaslib_nomination(
    text: &str,
    network: &Network,
    opts: &IngestOptions,
) -> Result<NominationDoc, IngestError> {
    let root = xml::parse(text)?;
    let scenario = root.find("scenario").unwrap_or(&root);
    let units = Units {
        norm_density: opts.norm_density(network.gas())?,
    };
    let mut withdrawals = Vec::new();
    let mut injections = Vec::new();
    for n in scenario.children_named("node") {
        let id = n.require("id")?.to_string();
        let mut by_bound: BTreeMap<&str, f64> = BTreeMap::new();
        for f in n.children_named("flow") {
            let raw = f.require("value")?;
            let v: f64 = raw.trim().parse().map_err(|_| IngestError::BadNumber {
                element: n.label(),
                value: raw.to_string(),
            })?;
            let unit = f.attr("unit").unwrap_or("kg_per_s");
            let si = units.to_si(Quantity::Flow, v, unit, &n.label())?;
            by_bound.insert(f.attr("bound").unwrap_or("both"), si);
        }
        let both = by_bound.get("both").copied();
        match n.attr("type") {
            Some("entry") => {
                let cap = both.or(by_bound.get("upper").copied());
                injections.push(InjectionNomination {
                    id,
                    s_max: cap,
                    cost: None,
                });
            }
            Some("exit") => {
                let d = both
                    .or(by_bound.get("lower").copied())
                    .or(by_bound.get("upper").copied())
                    .unwrap_or(0.0);
                withdrawals.push(WithdrawalNomination { id, d: d.max(0.0) });
            }
            _ => warn!("ignoring scenario node {}", n.label()),
        }
    }
    Ok(NominationDoc {
        schema: super::NOMINATION_SCHEMA.into(),
        id: scenario.attr("id").unwrap_or("scenario").to_string(),
        withdrawals,
        injections,
        s_max_scaled: false,
        reference_objective: None,
    })
}
