//! Canonical json network document, schema `ogf-net/1`.

use serde::{Deserialize, Serialize};

use super::{IngestError, IngestOptions};
use crate::network::{
    circle_area, Arc, ArcKind, DecisionGroup, GasConstants, InjectionPoint, Network, Node,
    WithdrawalPoint,
};
use crate::physics::nikuradse;

pub const NETWORK_SCHEMA: &str = "ogf-net/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDoc {
    schema: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    gas: GasDoc,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    pipes: Vec<PipeDoc>,
    #[serde(default)]
    short_pipes: Vec<PlainDoc>,
    #[serde(default)]
    resistors: Vec<ResistorDoc>,
    #[serde(default)]
    loss_resistors: Vec<LossResistorDoc>,
    #[serde(default)]
    compressors: Vec<CompressorDoc>,
    #[serde(default)]
    valves: Vec<ValveDoc>,
    #[serde(default)]
    control_valves: Vec<ControlValveDoc>,
    #[serde(default)]
    injections: Vec<InjectionPoint>,
    #[serde(default)]
    withdrawals: Vec<WithdrawalPoint>,
    #[serde(default)]
    decision_groups: Vec<DecisionGroup>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GasDoc {
    #[serde(rename = "R_g", default, skip_serializing_if = "Option::is_none")]
    r_gas: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    specific_gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_atm: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    p_min: f64,
    p_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipeDoc {
    id: String,
    from: String,
    to: String,
    length: f64,
    diameter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    friction_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roughness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlainDoc {
    id: String,
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResistorDoc {
    id: String,
    from: String,
    to: String,
    drag: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossResistorDoc {
    id: String,
    from: String,
    to: String,
    delta_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompressorDoc {
    id: String,
    from: String,
    to: String,
    alpha_min: f64,
    alpha_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValveDoc {
    id: String,
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlValveDoc {
    id: String,
    from: String,
    to: String,
    delta_p_min: f64,
    delta_p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
}

fn gas_from_doc(g: &GasDoc) -> GasConstants {
    let d = GasConstants::default();
    let gravity = g.specific_gravity.unwrap_or(d.specific_gravity);
    let temperature = g.temperature.unwrap_or(d.temperature);
    let mut gas = GasConstants::from_gravity(gravity, temperature);
    if let Some(r) = g.r_gas {
        gas.r_gas = r;
    }
    if let Some(p) = g.p_atm {
        gas.p_atm = p;
    }
    gas
}

/// Resolves open flow bounds of one arc. Unresolvable endpoints leave the
/// arc with zero-area caps so that validation reports the dangling id.
pub(crate) fn flow_bounds(
    gas: &GasConstants,
    nodes: &[Node],
    from: &str,
    to: &str,
    area: Option<f64>,
    given: (Option<f64>, Option<f64>),
    opts: &IngestOptions,
) -> Result<(f64, f64), IngestError> {
    if let (Some(lo), Some(hi)) = given {
        return Ok((lo, hi));
    }
    let p_max = nodes
        .iter()
        .filter(|n| n.id == from || n.id == to)
        .map(|n| n.p_max)
        .fold(0.0, f64::max);
    let cap = opts.flow_cap(gas, p_max, area.unwrap_or(opts.default_area))?;
    Ok((given.0.unwrap_or(-cap), given.1.unwrap_or(cap)))
}

pub fn network_from_json(text: &str, opts: &IngestOptions) -> Result<Network, IngestError> {
    let doc: NetDoc = serde_json::from_str(text)?;
    if doc.schema != NETWORK_SCHEMA {
        return Err(IngestError::Schema(doc.schema));
    }
    let gas = gas_from_doc(&doc.gas);
    let nodes: Vec<Node> = doc
        .nodes
        .iter()
        .map(|n| Node::new(n.id.clone(), n.p_min, n.p_max))
        .collect();
    let bounds = |from: &str, to: &str, area: Option<f64>, lo, hi| {
        flow_bounds(&gas, &nodes, from, to, area, (lo, hi), opts)
    };
    let mut arcs = Vec::new();
    for p in &doc.pipes {
        let area = p.area.unwrap_or_else(|| circle_area(p.diameter));
        let friction_factor = match (p.friction_factor, p.roughness) {
            (Some(l), _) => l,
            (None, Some(k)) => nikuradse(p.diameter, k),
            (None, None) => {
                return Err(IngestError::MissingAttribute {
                    element: format!("pipe `{}`", p.id),
                    attribute: "friction_factor".into(),
                })
            }
        };
        let b = bounds(&p.from, &p.to, Some(area), p.f_min, p.f_max)?;
        arcs.push(Arc::new(
            p.id.clone(),
            p.from.clone(),
            p.to.clone(),
            b,
            ArcKind::Pipe {
                length: p.length,
                diameter: p.diameter,
                area,
                friction_factor,
            },
        ));
    }
    for s in &doc.short_pipes {
        let b = bounds(&s.from, &s.to, None, s.f_min, s.f_max)?;
        arcs.push(Arc::new(
            s.id.clone(),
            s.from.clone(),
            s.to.clone(),
            b,
            ArcKind::ShortPipe,
        ));
    }
    for r in &doc.resistors {
        let area = match (r.area, r.diameter) {
            (Some(a), _) => a,
            (None, Some(d)) => circle_area(d),
            (None, None) => {
                return Err(IngestError::MissingAttribute {
                    element: format!("resistor `{}`", r.id),
                    attribute: "area".into(),
                })
            }
        };
        let b = bounds(&r.from, &r.to, Some(area), r.f_min, r.f_max)?;
        arcs.push(Arc::new(
            r.id.clone(),
            r.from.clone(),
            r.to.clone(),
            b,
            ArcKind::Resistor { drag: r.drag, area },
        ));
    }
    for r in &doc.loss_resistors {
        let b = bounds(&r.from, &r.to, None, r.f_min, r.f_max)?;
        arcs.push(Arc::new(
            r.id.clone(),
            r.from.clone(),
            r.to.clone(),
            b,
            ArcKind::LossResistor { delta_p: r.delta_p },
        ));
    }
    for c in &doc.compressors {
        let b = bounds(&c.from, &c.to, None, c.f_min, c.f_max)?;
        arcs.push(Arc::new(
            c.id.clone(),
            c.from.clone(),
            c.to.clone(),
            b,
            ArcKind::Compressor {
                alpha_min: c.alpha_min,
                alpha_max: c.alpha_max,
            },
        ));
    }
    for v in &doc.valves {
        let b = bounds(&v.from, &v.to, None, v.f_min, v.f_max)?;
        arcs.push(Arc::new(
            v.id.clone(),
            v.from.clone(),
            v.to.clone(),
            b,
            ArcKind::Valve {
                delta_p_max: v.delta_p_max,
            },
        ));
    }
    for v in &doc.control_valves {
        let b = bounds(&v.from, &v.to, None, v.f_min, v.f_max)?;
        arcs.push(Arc::new(
            v.id.clone(),
            v.from.clone(),
            v.to.clone(),
            b,
            ArcKind::ControlValve {
                delta_p_min: v.delta_p_min,
                delta_p_max: v.delta_p_max,
            },
        ));
    }
    Ok(Network::new(
        doc.name,
        gas,
        nodes,
        arcs,
        doc.injections,
        doc.withdrawals,
        doc.decision_groups,
    ))
}

/// Writes every derived quantity explicitly, so the output parses back to
/// the same network.
pub fn network_to_json(net: &Network) -> String {
    let g = net.gas();
    let mut doc = NetDoc {
        schema: NETWORK_SCHEMA.into(),
        name: net.name().to_string(),
        gas: GasDoc {
            r_gas: Some(g.r_gas),
            temperature: Some(g.temperature),
            specific_gravity: Some(g.specific_gravity),
            p_atm: Some(g.p_atm),
        },
        nodes: net
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                p_min: n.p_min,
                p_max: n.p_max,
            })
            .collect(),
        pipes: vec![],
        short_pipes: vec![],
        resistors: vec![],
        loss_resistors: vec![],
        compressors: vec![],
        valves: vec![],
        control_valves: vec![],
        injections: net.injections().to_vec(),
        withdrawals: net.withdrawals().to_vec(),
        decision_groups: net.decision_groups().to_vec(),
    };
    for a in net.arcs() {
        let (id, from, to) = (a.id.clone(), a.from.clone(), a.to.clone());
        let (f_min, f_max) = (Some(a.f_min), Some(a.f_max));
        match a.kind {
            ArcKind::Pipe {
                length,
                diameter,
                area,
                friction_factor,
            } => doc.pipes.push(PipeDoc {
                id,
                from,
                to,
                length,
                diameter,
                area: Some(area),
                friction_factor: Some(friction_factor),
                roughness: None,
                f_min,
                f_max,
            }),
            ArcKind::ShortPipe => doc.short_pipes.push(PlainDoc {
                id,
                from,
                to,
                f_min,
                f_max,
            }),
            ArcKind::Resistor { drag, area } => doc.resistors.push(ResistorDoc {
                id,
                from,
                to,
                drag,
                area: Some(area),
                diameter: None,
                f_min,
                f_max,
            }),
            ArcKind::LossResistor { delta_p } => doc.loss_resistors.push(LossResistorDoc {
                id,
                from,
                to,
                delta_p,
                f_min,
                f_max,
            }),
            ArcKind::Compressor {
                alpha_min,
                alpha_max,
            } => doc.compressors.push(CompressorDoc {
                id,
                from,
                to,
                alpha_min,
                alpha_max,
                f_min,
                f_max,
            }),
            ArcKind::Valve { delta_p_max } => doc.valves.push(ValveDoc {
                id,
                from,
                to,
                delta_p_max,
                f_min,
                f_max,
            }),
            ArcKind::ControlValve {
                delta_p_min,
                delta_p_max,
            } => doc.control_valves.push(ControlValveDoc {
                id,
                from,
                to,
                delta_p_min,
                delta_p_max,
                f_min,
                f_max,
            }),
        }
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("network document serializes");
    s.push('\n');
    s
}
