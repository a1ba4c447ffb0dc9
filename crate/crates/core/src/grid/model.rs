use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower voltage bound for load buses, per unit.
pub const DEFAULT_V_MIN: f64 = 0.95;
/// Default upper voltage bound for load buses, per unit.
pub const DEFAULT_V_MAX: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub base_kv: f64,
    /// Voltage magnitude setpoint for slack and PV buses, per unit.
    pub v_setpoint: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: usize,
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance, per unit.
    pub b_charging: f64,
    pub rating_mva: f64,
    pub in_service: bool,
}

/// Two-winding transformer with a fixed off-nominal turns ratio on the
/// from side. Transformers are not outage candidates; they keep their own
/// id space so line numbering follows the line table only.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    pub id: usize,
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    pub b_charging: f64,
    pub rating_mva: f64,
    pub tap: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: usize,
    pub bus: u32,
    pub p_mw: f64,
    pub v_setpoint: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    pub in_service: bool,
}

/// A load. Its `id` is also its gene index in every chromosome.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub id: usize,
    pub bus: u32,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub importance: f64,
}

/// Fixed bus shunt at 1.0 pu voltage: `g_mw` is real power drawn and
/// `b_mvar` is reactive power injected (negative for a reactor).
#[derive(Debug, Clone, PartialEq)]
pub struct Shunt {
    pub bus: u32,
    pub g_mw: f64,
    pub b_mvar: f64,
}

/// A validated grid model. Immutable once built: outage and load-scaling
/// operations return new networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    transformers: Vec<Transformer>,
    generators: Vec<Generator>,
    loads: Vec<Load>,
    shunts: Vec<Shunt>,
    bus_index: HashMap<u32, usize>,
    line_index: HashMap<usize, usize>,
}

/// Element collections used to assemble a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct NetworkParts {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub transformers: Vec<Transformer>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub shunts: Vec<Shunt>,
}

fn finite(path: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::schema(path, format!("expected a finite number, got {value}")))
    }
}

impl Network {
    /// Validates the parts and builds the network.
    ///
    /// Load ids must already be dense (`0..n_loads` in order); the case
    /// readers re-index document ids before calling this.
    pub fn new(parts: NetworkParts) -> Result<Self> {
        let NetworkParts {
            base_mva,
            buses,
            lines,
            transformers,
            generators,
            loads,
            shunts,
        } = parts;

        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(Error::schema("base_mva", "must be a positive number"));
        }

        let mut bus_index = HashMap::with_capacity(buses.len());
        let mut slack_count = 0;
        for (pos, bus) in buses.iter().enumerate() {
            let path = format!("buses[{pos}]");
            if bus_index.insert(bus.id, pos).is_some() {
                return Err(Error::DuplicateId {
                    kind: "bus",
                    id: bus.id as i64,
                });
            }
            if !(bus.base_kv.is_finite() && bus.base_kv > 0.0) {
                return Err(Error::schema(format!("{path}.base_kv"), "must be positive"));
            }
            finite(&format!("{path}.v_min"), bus.v_min)?;
            finite(&format!("{path}.v_max"), bus.v_max)?;
            if bus.v_min >= bus.v_max {
                return Err(Error::schema(
                    format!("{path}.v_min"),
                    "v_min must be below v_max",
                ));
            }
            if let Some(v) = bus.v_setpoint {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::schema(format!("{path}.v_setpoint"), "must be positive"));
                }
            }
            if bus.kind == BusKind::Slack {
                slack_count += 1;
            }
        }
        if slack_count == 0 {
            return Err(Error::NoSlack);
        }
        if slack_count > 1 {
            return Err(Error::InvalidNetwork(format!(
                "expected exactly one slack bus, found {slack_count}"
            )));
        }

        let bus_ref = |path: String, id: u32| -> Result<()> {
            if bus_index.contains_key(&id) {
                Ok(())
            } else {
                Err(Error::reference(path, format!("unknown bus {id}")))
            }
        };

        let mut line_index = HashMap::with_capacity(lines.len());
        for (pos, line) in lines.iter().enumerate() {
            let path = format!("lines[{pos}]");
            if line_index.insert(line.id, pos).is_some() {
                return Err(Error::DuplicateId {
                    kind: "line",
                    id: line.id as i64,
                });
            }
            bus_ref(format!("{path}.from"), line.from_bus)?;
            bus_ref(format!("{path}.to"), line.to_bus)?;
            if line.from_bus == line.to_bus {
                return Err(Error::schema(format!("{path}.to"), "line must join two distinct buses"));
            }
            for (name, v) in [("r", line.r), ("x", line.x), ("b", line.b_charging)] {
                finite(&format!("{path}.{name}"), v)?;
            }
            if line.r == 0.0 && line.x == 0.0 {
                return Err(Error::ZeroImpedance(line.id));
            }
            if !(line.rating_mva > 0.0) {
                return Err(Error::schema(format!("{path}.rating_mva"), "must be positive"));
            }
        }

        let mut seen = HashSet::new();
        for (pos, tr) in transformers.iter().enumerate() {
            let path = format!("transformers[{pos}]");
            if !seen.insert(tr.id) {
                return Err(Error::DuplicateId {
                    kind: "transformer",
                    id: tr.id as i64,
                });
            }
            bus_ref(format!("{path}.from"), tr.from_bus)?;
            bus_ref(format!("{path}.to"), tr.to_bus)?;
            if tr.from_bus == tr.to_bus {
                return Err(Error::schema(format!("{path}.to"), "transformer must join two distinct buses"));
            }
            if tr.r == 0.0 && tr.x == 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "transformer {} has zero impedance",
                    tr.id
                )));
            }
            if !(tr.tap.is_finite() && tr.tap > 0.0) {
                return Err(Error::schema(format!("{path}.tap"), "must be positive"));
            }
            if !(tr.rating_mva > 0.0) {
                return Err(Error::schema(format!("{path}.rating_mva"), "must be positive"));
            }
        }

        seen.clear();
        for (pos, gen) in generators.iter().enumerate() {
            let path = format!("generators[{pos}]");
            if !seen.insert(gen.id) {
                return Err(Error::DuplicateId {
                    kind: "generator",
                    id: gen.id as i64,
                });
            }
            bus_ref(format!("{path}.bus"), gen.bus)?;
            finite(&format!("{path}.p_mw"), gen.p_mw)?;
            if gen.q_min_mvar > gen.q_max_mvar {
                return Err(Error::schema(format!("{path}.q_min"), "q_min exceeds q_max"));
            }
            if !(gen.v_setpoint.is_finite() && gen.v_setpoint > 0.0) {
                return Err(Error::schema(format!("{path}.v_setpoint"), "must be positive"));
            }
        }

        for (pos, load) in loads.iter().enumerate() {
            let path = format!("loads[{pos}]");
            if load.id != pos {
                return Err(Error::InvalidNetwork(format!(
                    "load at position {pos} has id {}; load ids must be 0..n_loads in order",
                    load.id
                )));
            }
            bus_ref(format!("{path}.bus"), load.bus)?;
            if !(load.p_mw.is_finite() && load.p_mw >= 0.0) {
                return Err(Error::schema(format!("{path}.p_mw"), "must be non-negative"));
            }
            finite(&format!("{path}.q_mvar"), load.q_mvar)?;
            if !(0.0..=1.0).contains(&load.importance) {
                return Err(Error::schema(format!("{path}.importance"), "must lie in [0, 1]"));
            }
        }

        for (pos, shunt) in shunts.iter().enumerate() {
            let path = format!("shunts[{pos}]");
            bus_ref(format!("{path}.bus"), shunt.bus)?;
            finite(&format!("{path}.g_mw"), shunt.g_mw)?;
            finite(&format!("{path}.b_mvar"), shunt.b_mvar)?;
        }

        Ok(Network {
            base_mva,
            buses,
            lines,
            transformers,
            generators,
            loads,
            shunts,
            bus_index,
            line_index,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }
    pub fn transformers(&self) -> &[Transformer] {
        &self.transformers
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn loads(&self) -> &[Load] {
        &self.loads
    }
    pub fn shunts(&self) -> &[Shunt] {
        &self.shunts
    }
    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    /// Position of a bus in [`Network::buses`].
    pub fn bus_position(&self, id: u32) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn line(&self, id: usize) -> Option<&Line> {
        self.line_index.get(&id).map(|&pos| &self.lines[pos])
    }

    pub fn slack_position(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    /// Consumes the network back into its element collections.
    pub fn into_parts(self) -> NetworkParts {
        NetworkParts {
            base_mva: self.base_mva,
            buses: self.buses,
            lines: self.lines,
            transformers: self.transformers,
            generators: self.generators,
            loads: self.loads,
            shunts: self.shunts,
        }
    }

    /// Returns a copy with the given lines out of service.
    pub fn apply_outage(&self, out_lines: &[usize]) -> Result<Network> {
        let mut next = self.clone();
        for &id in out_lines {
            let pos = *self.line_index.get(&id).ok_or(Error::UnknownLine(id))?;
            next.lines[pos].in_service = false;
        }
        Ok(next)
    }

    /// Returns a copy where load `i` draws `fractions[i]` of its nominal
    /// active and reactive power.
    pub fn scale_loads(&self, fractions: &[f64]) -> Result<Network> {
        self.check_fractions(fractions)?;
        let mut next = self.clone();
        for (load, &g) in next.loads.iter_mut().zip(fractions) {
            load.p_mw *= g;
            load.q_mvar *= g;
        }
        Ok(next)
    }

    pub(crate) fn check_fractions(&self, fractions: &[f64]) -> Result<()> {
        if fractions.len() != self.loads.len() {
            return Err(Error::ChromosomeLength {
                expected: self.loads.len(),
                got: fractions.len(),
            });
        }
        if let Some((index, &value)) = fractions
            .iter()
            .enumerate()
            .find(|(_, g)| !(0.0..=1.0).contains(*g))
        {
            return Err(Error::GeneOutOfRange { index, value });
        }
        Ok(())
    }

    /// Returns a copy with the load importance vector replaced.
    pub fn with_importance(&self, importance: &[f64]) -> Result<Network> {
        if importance.len() != self.loads.len() {
            return Err(Error::ChromosomeLength {
                expected: self.loads.len(),
                got: importance.len(),
            });
        }
        let mut next = self.clone();
        for (pos, (load, &w)) in next.loads.iter_mut().zip(importance).enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::schema(format!("loads[{pos}].importance"), "must lie in [0, 1]"));
            }
            load.importance = w;
        }
        Ok(next)
    }

    /// Total demand `(p_mw, q_mvar)` over all loads.
    pub fn total_load(&self) -> (f64, f64) {
        self.loads
            .iter()
            .fold((0.0, 0.0), |(p, q), l| (p + l.p_mw, q + l.q_mvar))
    }

    /// Marks every bus reachable from the slack through in-service branches.
    pub fn energized(&self) -> Vec<bool> {
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        let branches = self
            .lines
            .iter()
            .filter(|l| l.in_service)
            .map(|l| (l.from_bus, l.to_bus))
            .chain(
                self.transformers
                    .iter()
                    .filter(|t| t.in_service)
                    .map(|t| (t.from_bus, t.to_bus)),
            );
        for (f, t) in branches {
            let (f, t) = (self.bus_index[&f], self.bus_index[&t]);
            adjacency[f].push(t);
            adjacency[t].push(f);
        }
        let mut seen = vec![false; n];
        let slack = self.slack_position();
        seen[slack] = true;
        let mut stack = vec![slack];
        while let Some(b) = stack.pop() {
            for &next in &adjacency[b] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen
    }

    /// Ids of loads whose bus is cut off from the slack.
    pub fn islanded_loads(&self) -> Vec<usize> {
        let energized = self.energized();
        self.loads
            .iter()
            .filter(|l| !energized[self.bus_index[&l.bus]])
            .map(|l| l.id)
            .collect()
    }
}
