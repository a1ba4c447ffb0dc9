#![allow(dead_code)]

use std::path::PathBuf;

use gridshed::grid::{read_case_file, Bus, BusKind, Generator, Line, Load, Network, NetworkParts, Shunt, Transformer};
use gridshed::powerflow::{solve, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn rts() -> Network {
    read_case_file(data_file("case_RTS_GMLC.m")).expect("bundled RTS-GMLC case")
}

pub fn bus(id: u32, kind: BusKind) -> Bus {
    Bus {
        id,
        kind,
        base_kv: 138.0,
        v_setpoint: (kind != BusKind::Pq).then_some(1.0),
        v_min: 0.95,
        v_max: 1.05,
    }
}

pub fn line(id: usize, from: u32, to: u32, r: f64, x: f64, b: f64, rating_mva: f64) -> Line {
    Line {
        id,
        from_bus: from,
        to_bus: to,
        r,
        x,
        b_charging: b,
        rating_mva,
        in_service: true,
    }
}

pub fn load(id: usize, bus: u32, p_mw: f64, q_mvar: f64) -> Load {
    Load {
        id,
        bus,
        p_mw,
        q_mvar,
        importance: 1.0,
    }
}

/// Slack at 1.0 pu feeding a 50 MW unity-power-factor load over a lossless
/// 0.1 pu reactance on a 100 MVA base.
pub fn two_bus_analytic() -> Network {
    Network::new(NetworkParts {
        base_mva: 100.0,
        buses: vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
        lines: vec![line(0, 1, 2, 0.0, 0.1, 0.0, 100.0)],
        loads: vec![load(0, 2, 50.0, 0.0)],
        ..Default::default()
    })
    .unwrap()
}

/// Three buses, three charged lines and a 10 MVAr capacitor at bus 3.
pub fn three_bus() -> Network {
    Network::new(NetworkParts {
        base_mva: 100.0,
        buses: vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq), bus(3, BusKind::Pq)],
        lines: vec![
            line(0, 1, 2, 0.02, 0.06, 0.06, 100.0),
            line(1, 1, 3, 0.08, 0.24, 0.05, 100.0),
            line(2, 2, 3, 0.06, 0.18, 0.04, 100.0),
        ],
        loads: vec![load(0, 2, 40.0, 10.0), load(1, 3, 30.0, 5.0)],
        shunts: vec![Shunt {
            bus: 3,
            g_mw: 0.0,
            b_mvar: 10.0,
        }],
        ..Default::default()
    })
    .unwrap()
}

/// A connected network with at most `max_buses` buses: a random tree plus a
/// few extra lines, an occasional transformer, PV units, loads and shunts.
pub fn random_network(rng: &mut ChaCha8Rng, max_buses: usize) -> Network {
    let n = rng.random_range(2..=max_buses);
    let ids: Vec<u32> = (1..=n as u32).collect();
    let mut buses = vec![bus(1, BusKind::Slack)];
    let mut generators = Vec::new();
    for &id in &ids[1..] {
        if rng.random_bool(0.25) {
            let v = rng.random_range(0.98..1.04);
            let mut b = bus(id, BusKind::Pv);
            b.v_setpoint = Some(v);
            buses.push(b);
            generators.push(Generator {
                id: generators.len(),
                bus: id,
                p_mw: rng.random_range(5.0..40.0),
                v_setpoint: v,
                q_min_mvar: -200.0,
                q_max_mvar: 200.0,
                in_service: true,
            });
        } else {
            buses.push(bus(id, BusKind::Pq));
        }
    }

    let mut lines = Vec::new();
    let mut transformers = Vec::new();
    let mut branch = |rng: &mut ChaCha8Rng, from: u32, to: u32| {
        let r = rng.random_range(0.001..0.03);
        let x = rng.random_range(0.01..0.12);
        if rng.random_bool(0.15) {
            transformers.push(Transformer {
                id: transformers.len(),
                from_bus: from,
                to_bus: to,
                r,
                x,
                b_charging: 0.0,
                rating_mva: 200.0,
                tap: rng.random_range(0.95..1.05),
                in_service: true,
            });
        } else {
            let b = rng.random_range(0.0..0.05);
            lines.push(line(lines.len(), from, to, r, x, b, 200.0));
        }
    };
    for k in 1..n {
        let parent = ids[rng.random_range(0..k)];
        branch(rng, parent, ids[k]);
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let a = ids[rng.random_range(0..n)];
        let b = ids[rng.random_range(0..n)];
        if a != b {
            branch(rng, a, b);
        }
    }

    let mut loads = Vec::new();
    for &id in &ids {
        if rng.random_bool(0.7) {
            loads.push(load(
                loads.len(),
                id,
                rng.random_range(0.0..40.0),
                rng.random_range(-5.0..15.0),
            ));
        }
    }
    let mut shunts = Vec::new();
    if rng.random_bool(0.5) {
        shunts.push(Shunt {
            bus: ids[rng.random_range(0..n)],
            g_mw: rng.random_range(0.0..2.0),
            b_mvar: rng.random_range(-10.0..20.0),
        });
    }

    Network::new(NetworkParts {
        base_mva: 100.0,
        buses,
        lines,
        transformers,
        generators,
        loads,
        shunts,
    })
    .unwrap()
}

/// A small shedding problem whose intact state is overloaded.
///
/// Five buses in a meshed ring around the slack carry `n_loads` loads. After
/// an all-loads-on solve, two lines are re-rated below their flow so that
/// some load has to go. Voltages stay well inside the band.
pub fn toy_instance(seed: u64, n_loads: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buses: Vec<Bus> = (1..=5)
        .map(|id| bus(id, if id == 1 { BusKind::Slack } else { BusKind::Pq }))
        .collect();
    let topology = [(1, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5)];
    let lines: Vec<Line> = topology
        .iter()
        .enumerate()
        .map(|(i, &(f, t))| {
            let x = rng.random_range(0.01..0.03);
            line(i, f, t, x / 5.0, x, 0.0, 1000.0)
        })
        .collect();
    let loads: Vec<Load> = (0..n_loads)
        .map(|i| {
            let p = rng.random_range(5.0..25.0);
            load(i, rng.random_range(2..=5), p, p * rng.random_range(0.1..0.3))
        })
        .collect();
    let parts = NetworkParts {
        base_mva: 100.0,
        buses,
        lines,
        loads,
        ..Default::default()
    };

    let free = Network::new(parts.clone()).unwrap();
    let sol = solve(&free, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    let mut parts = parts;
    let mut flows: Vec<(usize, f64)> = sol
        .line_flows
        .iter()
        .map(|f| (f.id, f.s_from.norm().max(f.s_to.norm())))
        .collect();
    flows.sort_by(|a, b| b.1.total_cmp(&a.1));
    for &(id, mva) in flows.iter().take(2) {
        parts.lines[id].rating_mva = mva * rng.random_range(0.6..0.9);
    }
    Network::new(parts).unwrap()
}
