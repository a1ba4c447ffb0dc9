//! MATPOWER-style case text (`mpc.bus`, `mpc.gen`, `mpc.branch` tables).
//!
//! Branches with a zero turns ratio become lines, numbered from 0 in table
//! order; branches with any non-zero ratio become transformers with their
//! own numbering. Loads are synthesized from the bus `Pd`/`Qd` columns in
//! bus order, with importance 1.0. A `RATE_A` of 0 (unlimited) maps to
//! [`UNLIMITED_RATING_MVA`].

use std::fmt::Write as _;

use super::model::{
    Bus, BusKind, Generator, Line, Load, Network, NetworkParts, Shunt, Transformer,
};
use crate::error::{Error, Result};

pub const UNLIMITED_RATING_MVA: f64 = 1.0e9;

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

struct Table {
    rows: Vec<Vec<f64>>,
    /// Source line of each row, for error messages.
    lines: Vec<usize>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn find_scalar(text: &str, name: &str) -> Result<f64> {
    let key = format!("mpc.{name}");
    for (no, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if let Some(rest) = line.strip_prefix(&key) {
            let rest = rest.trim_start();
            if let Some(value) = rest.strip_prefix('=') {
                let value = value.trim().trim_end_matches(';').trim();
                return value.parse().map_err(|_| Error::CaseText {
                    line: no + 1,
                    message: format!("cannot parse {key} value `{value}`"),
                });
            }
        }
    }
    Err(Error::CaseText {
        line: 0,
        message: format!("missing {key}"),
    })
}

fn find_table(text: &str, name: &str, min_cols: usize) -> Result<Table> {
    let key = format!("mpc.{name}");
    let mut table = Table {
        rows: Vec::new(),
        lines: Vec::new(),
    };
    let mut inside = false;
    let mut found = false;
    for (no, raw) in text.lines().enumerate() {
        let mut line = strip_comment(raw).trim();
        if !inside {
            let Some(rest) = line.strip_prefix(&key) else {
                continue;
            };
            let rest = rest.trim_start();
            let Some(rest) = rest.strip_prefix('=') else {
                continue;
            };
            let rest = rest.trim_start();
            let Some(rest) = rest.strip_prefix('[') else {
                return Err(Error::CaseText {
                    line: no + 1,
                    message: format!("expected `[` after {key} ="),
                });
            };
            inside = true;
            found = true;
            line = rest;
        }
        let (body, closed) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        for row in body.split(';') {
            let row = row.trim();
            if row.is_empty() {
                continue;
            }
            let values = row
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|tok| match tok {
                    "Inf" | "inf" => Ok(f64::INFINITY),
                    "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
                    _ => tok.parse::<f64>(),
                })
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| Error::CaseText {
                    line: no + 1,
                    message: format!("unparseable {key} row `{row}`"),
                })?;
            if values.len() < min_cols {
                return Err(Error::CaseText {
                    line: no + 1,
                    message: format!(
                        "{key} row has {} columns, expected at least {min_cols}",
                        values.len()
                    ),
                });
            }
            table.rows.push(values);
            table.lines.push(no + 1);
        }
        if closed {
            inside = false;
            break;
        }
    }
    if !found {
        return Err(Error::CaseText {
            line: 0,
            message: format!("missing {key} table"),
        });
    }
    if inside {
        return Err(Error::CaseText {
            line: 0,
            message: format!("unterminated {key} table"),
        });
    }
    Ok(table)
}

fn as_bus_id(v: f64, line: usize) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::CaseText {
            line,
            message: format!("invalid bus number {v}"),
        })
    }
}

/// Parses MATPOWER case text into a validated network.
pub fn parse_matpower(text: &str) -> Result<Network> {
    let base_mva = find_scalar(text, "baseMVA")?;
    let bus_table = find_table(text, "bus", BUS_COLS)?;
    let gen_table = find_table(text, "gen", GEN_COLS)?;
    let branch_table = find_table(text, "branch", BRANCH_COLS)?;

    let mut generators = Vec::with_capacity(gen_table.rows.len());
    for (id, (row, &line)) in gen_table.rows.iter().zip(&gen_table.lines).enumerate() {
        generators.push(Generator {
            id,
            bus: as_bus_id(row[0], line)?,
            p_mw: row[1],
            q_max_mvar: row[3],
            q_min_mvar: row[4],
            v_setpoint: row[5],
            in_service: row[7] > 0.0,
        });
    }

    let mut buses = Vec::with_capacity(bus_table.rows.len());
    let mut loads = Vec::new();
    let mut shunts = Vec::new();
    for (row, &line) in bus_table.rows.iter().zip(&bus_table.lines) {
        let id = as_bus_id(row[0], line)?;
        let code = row[1];
        let online_gen = generators.iter().find(|g| g.bus == id && g.in_service);
        let kind = match code as i64 {
            _ if code.fract() != 0.0 => return Err(Error::UnsupportedBusType(code as i64)),
            1 => BusKind::Pq,
            // A PV bus without an online unit cannot hold its voltage.
            2 if online_gen.is_some() => BusKind::Pv,
            2 => BusKind::Pq,
            3 => BusKind::Slack,
            other => return Err(Error::UnsupportedBusType(other)),
        };
        let v_setpoint = match kind {
            BusKind::Pq => None,
            _ => Some(online_gen.map_or(row[7], |g| g.v_setpoint)),
        };
        let (pd, qd) = (row[2], row[3]);
        if pd != 0.0 || qd != 0.0 {
            if pd < 0.0 {
                return Err(Error::CaseText {
                    line,
                    message: format!("bus {id} has negative demand {pd} MW"),
                });
            }
            loads.push(Load {
                id: loads.len(),
                bus: id,
                p_mw: pd,
                q_mvar: qd,
                importance: 1.0,
            });
        }
        let (gs, bs) = (row[4], row[5]);
        if gs != 0.0 || bs != 0.0 {
            shunts.push(Shunt {
                bus: id,
                g_mw: gs,
                b_mvar: bs,
            });
        }
        buses.push(Bus {
            id,
            kind,
            base_kv: row[9],
            v_setpoint,
            v_max: row[11],
            v_min: row[12],
        });
    }

    let mut lines = Vec::new();
    let mut transformers = Vec::new();
    for (row, &line) in branch_table.rows.iter().zip(&branch_table.lines) {
        let from_bus = as_bus_id(row[0], line)?;
        let to_bus = as_bus_id(row[1], line)?;
        let rating_mva = if row[5] > 0.0 { row[5] } else { UNLIMITED_RATING_MVA };
        let (ratio, shift) = (row[8], row[9]);
        if shift != 0.0 {
            return Err(Error::CaseText {
                line,
                message: "phase-shifting transformers are not supported".into(),
            });
        }
        let in_service = row[10] > 0.0;
        if ratio == 0.0 {
            lines.push(Line {
                id: lines.len(),
                from_bus,
                to_bus,
                r: row[2],
                x: row[3],
                b_charging: row[4],
                rating_mva,
                in_service,
            });
        } else {
            transformers.push(Transformer {
                id: transformers.len(),
                from_bus,
                to_bus,
                r: row[2],
                x: row[3],
                b_charging: row[4],
                rating_mva,
                tap: ratio,
                in_service,
            });
        }
    }

    let net = Network::new(NetworkParts {
        base_mva,
        buses,
        lines,
        transformers,
        generators,
        loads,
        shunts,
    })?;

    // Every bus with demand must be reachable from the slack in the
    // as-read topology.
    let energized = net.energized();
    if let Some(load) = net
        .loads()
        .iter()
        .find(|l| !energized[net.bus_position(l.bus).unwrap()])
    {
        return Err(Error::reference(
            format!("loads[{}].bus", load.id),
            format!("bus {} has no in-service path to the slack bus", load.bus),
        ));
    }
    Ok(net)
}

fn bus_type_code(kind: BusKind) -> u8 {
    match kind {
        BusKind::Pq => 1,
        BusKind::Pv => 2,
        BusKind::Slack => 3,
    }
}

/// Writes a network as MATPOWER case text.
///
/// Loads sharing a bus are merged into that bus's `Pd`/`Qd` and importance
/// is not represented, so a round trip preserves the admittance matrix and
/// per-bus demand but not load importance.
pub fn serialize_matpower(net: &Network, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {name}");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {};", net.base_mva());
    let _ = writeln!(out, "\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
    let _ = writeln!(out, "mpc.bus = [");
    for bus in net.buses() {
        let (pd, qd) = net
            .loads()
            .iter()
            .filter(|l| l.bus == bus.id)
            .fold((0.0, 0.0), |(p, q), l| (p + l.p_mw, q + l.q_mvar));
        let (gs, bs) = net
            .shunts()
            .iter()
            .filter(|s| s.bus == bus.id)
            .fold((0.0, 0.0), |(g, b), s| (g + s.g_mw, b + s.b_mvar));
        let _ = writeln!(
            out,
            "\t{}\t{}\t{pd:?}\t{qd:?}\t{gs:?}\t{bs:?}\t1\t{:?}\t0\t{:?}\t1\t{:?}\t{:?};",
            bus.id,
            bus_type_code(bus.kind),
            bus.v_setpoint.unwrap_or(1.0),
            bus.base_kv,
            bus.v_max,
            bus.v_min
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin");
    let _ = writeln!(out, "mpc.gen = [");
    for g in net.generators() {
        let _ = writeln!(
            out,
            "\t{}\t{:?}\t0\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t{:?}\t0;",
            g.bus,
            g.p_mw,
            g.q_max_mvar,
            g.q_min_mvar,
            g.v_setpoint,
            net.base_mva(),
            u8::from(g.in_service),
            g.p_mw.max(0.0)
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus");
    let _ = writeln!(out, "mpc.branch = [");
    for l in net.lines() {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t0\t0\t{};",
            l.from_bus,
            l.to_bus,
            l.r,
            l.x,
            l.b_charging,
            l.rating_mva,
            l.rating_mva,
            l.rating_mva,
            u8::from(l.in_service)
        );
    }
    for t in net.transformers() {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t0\t{};",
            t.from_bus,
            t.to_bus,
            t.r,
            t.x,
            t.b_charging,
            t.rating_mva,
            t.rating_mva,
            t.rating_mva,
            t.tap,
            u8::from(t.in_service)
        );
    }
    let _ = writeln!(out, "];");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	138	1	1.05	0.95;
	2	1	40	10	0	5	1	1	0	138	1	1.05	0.95;
];
mpc.gen = [
	1	0	0	100	-100	1.02	100	1	100	0;
];
mpc.branch = [
	1	2	0.01	0.1	0.02	120	120	120	0	0	1	-360	360;
];
";

    #[test]
    fn parses_small_case() {
        let net = parse_matpower(TWO_BUS).unwrap();
        assert_eq!(net.buses().len(), 2);
        assert_eq!(net.lines().len(), 1);
        assert_eq!(net.loads().len(), 1);
        assert_eq!(net.shunts().len(), 1);
        assert_eq!(net.buses()[0].v_setpoint, Some(1.02));
        assert_eq!(net.loads()[0].importance, 1.0);
    }

    #[test]
    fn empty_branch_table_is_reference_error() {
        let text = TWO_BUS.replace(
            "\t1\t2\t0.01\t0.1\t0.02\t120\t120\t120\t0\t0\t1\t-360\t360;\n",
            "",
        );
        assert!(matches!(parse_matpower(&text), Err(Error::Reference { .. })));
    }

    #[test]
    fn rejects_bad_tables() {
        let text = TWO_BUS.replace("2\t1\t40", "2\t7\t40");
        assert!(matches!(parse_matpower(&text), Err(Error::UnsupportedBusType(7))));
        let text = TWO_BUS.replace("0.01\t0.1", "0.01\tabc");
        assert!(matches!(parse_matpower(&text), Err(Error::CaseText { .. })));
        assert!(parse_matpower("mpc.baseMVA = 100;").is_err());
    }

    #[test]
    fn transformers_split_from_lines() {
        let text = TWO_BUS.replace("120\t0\t0\t1", "120\t1.05\t0\t1");
        let net = parse_matpower(&text).unwrap();
        assert!(net.lines().is_empty());
        assert_eq!(net.transformers()[0].tap, 1.05);
    }
}
