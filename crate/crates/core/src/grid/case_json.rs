//! Canonical JSON case documents.
//!
//! Electrical parameters of lines and transformers are per unit on
//! `base_mva`; powers and ratings are in MW, MVAr and MVA. Unknown keys are
//! rejected. Load ids in a document only need to be unique: they are
//! re-indexed to `0..n_loads` in document order.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::model::{
    Bus, BusKind, Generator, Line, Load, Network, NetworkParts, Shunt, Transformer,
    DEFAULT_V_MAX, DEFAULT_V_MIN,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    base_mva: f64,
    buses: Vec<BusDoc>,
    lines: Vec<LineDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transformers: Vec<TransformerDoc>,
    generators: Vec<GeneratorDoc>,
    loads: Vec<LoadDoc>,
    #[serde(default)]
    shunts: Vec<ShuntDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: u32,
    kind: BusKind,
    base_kv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_setpoint: Option<f64>,
    #[serde(default)]
    v_min: Option<f64>,
    #[serde(default)]
    v_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    id: usize,
    from: u32,
    to: u32,
    r: f64,
    x: f64,
    b: f64,
    rating_mva: f64,
    #[serde(default)]
    in_service: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformerDoc {
    id: usize,
    from: u32,
    to: u32,
    r: f64,
    x: f64,
    #[serde(default)]
    b: f64,
    rating_mva: f64,
    #[serde(default = "unit_tap")]
    tap: f64,
    #[serde(default)]
    in_service: Option<bool>,
}

fn unit_tap() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    id: usize,
    bus: u32,
    p_mw: f64,
    v_setpoint: f64,
    q_min: f64,
    q_max: f64,
    #[serde(default)]
    in_service: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    id: i64,
    bus: u32,
    p_mw: f64,
    q_mvar: f64,
    #[serde(default)]
    importance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShuntDoc {
    bus: u32,
    g_mw: f64,
    b_mvar: f64,
}

/// Parses and validates a canonical JSON case document.
pub fn parse_case(text: &str) -> Result<Network> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: CaseDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })?;

    let mut load_ids = HashSet::new();
    let mut loads = Vec::with_capacity(doc.loads.len());
    for (pos, l) in doc.loads.into_iter().enumerate() {
        if !load_ids.insert(l.id) {
            return Err(Error::DuplicateId { kind: "load", id: l.id });
        }
        loads.push(Load {
            id: pos,
            bus: l.bus,
            p_mw: l.p_mw,
            q_mvar: l.q_mvar,
            importance: l.importance.unwrap_or(1.0),
        });
    }

    Network::new(NetworkParts {
        base_mva: doc.base_mva,
        buses: doc
            .buses
            .into_iter()
            .map(|b| Bus {
                id: b.id,
                kind: b.kind,
                base_kv: b.base_kv,
                v_setpoint: b.v_setpoint,
                v_min: b.v_min.unwrap_or(DEFAULT_V_MIN),
                v_max: b.v_max.unwrap_or(DEFAULT_V_MAX),
            })
            .collect(),
        lines: doc
            .lines
            .into_iter()
            .map(|l| Line {
                id: l.id,
                from_bus: l.from,
                to_bus: l.to,
                r: l.r,
                x: l.x,
                b_charging: l.b,
                rating_mva: l.rating_mva,
                in_service: l.in_service.unwrap_or(true),
            })
            .collect(),
        transformers: doc
            .transformers
            .into_iter()
            .map(|t| Transformer {
                id: t.id,
                from_bus: t.from,
                to_bus: t.to,
                r: t.r,
                x: t.x,
                b_charging: t.b,
                rating_mva: t.rating_mva,
                tap: t.tap,
                in_service: t.in_service.unwrap_or(true),
            })
            .collect(),
        generators: doc
            .generators
            .into_iter()
            .map(|g| Generator {
                id: g.id,
                bus: g.bus,
                p_mw: g.p_mw,
                v_setpoint: g.v_setpoint,
                q_min_mvar: g.q_min,
                q_max_mvar: g.q_max,
                in_service: g.in_service.unwrap_or(true),
            })
            .collect(),
        loads,
        shunts: doc
            .shunts
            .into_iter()
            .map(|s| Shunt {
                bus: s.bus,
                g_mw: s.g_mw,
                b_mvar: s.b_mvar,
            })
            .collect(),
    })
}

fn to_doc(net: &Network) -> CaseDoc {
    CaseDoc {
        base_mva: net.base_mva(),
        buses: net
            .buses()
            .iter()
            .map(|b| BusDoc {
                id: b.id,
                kind: b.kind,
                base_kv: b.base_kv,
                v_setpoint: b.v_setpoint,
                v_min: Some(b.v_min),
                v_max: Some(b.v_max),
            })
            .collect(),
        lines: net
            .lines()
            .iter()
            .map(|l| LineDoc {
                id: l.id,
                from: l.from_bus,
                to: l.to_bus,
                r: l.r,
                x: l.x,
                b: l.b_charging,
                rating_mva: l.rating_mva,
                in_service: Some(l.in_service),
            })
            .collect(),
        transformers: net
            .transformers()
            .iter()
            .map(|t| TransformerDoc {
                id: t.id,
                from: t.from_bus,
                to: t.to_bus,
                r: t.r,
                x: t.x,
                b: t.b_charging,
                rating_mva: t.rating_mva,
                tap: t.tap,
                in_service: Some(t.in_service),
            })
            .collect(),
        generators: net
            .generators()
            .iter()
            .map(|g| GeneratorDoc {
                id: g.id,
                bus: g.bus,
                p_mw: g.p_mw,
                v_setpoint: g.v_setpoint,
                q_min: g.q_min_mvar,
                q_max: g.q_max_mvar,
                in_service: Some(g.in_service),
            })
            .collect(),
        loads: net
            .loads()
            .iter()
            .map(|l| LoadDoc {
                id: l.id as i64,
                bus: l.bus,
                p_mw: l.p_mw,
                q_mvar: l.q_mvar,
                importance: Some(l.importance),
            })
            .collect(),
        shunts: net
            .shunts()
            .iter()
            .map(|s| ShuntDoc {
                bus: s.bus,
                g_mw: s.g_mw,
                b_mvar: s.b_mvar,
            })
            .collect(),
    }
}

/// Serializes a network as a pretty-printed canonical JSON document.
pub fn serialize_case(net: &Network) -> String {
    serde_json::to_string_pretty(&to_doc(net)).expect("case document serializes")
}

/// Compact form used for content addressing.
pub fn serialize_case_compact(net: &Network) -> String {
    serde_json::to_string(&to_doc(net)).expect("case document serializes")
}
