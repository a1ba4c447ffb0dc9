mod common;

use approx::assert_abs_diff_eq;
use common::*;
use gridshed::grid::{parse_matpower, read_case_file, serialize_matpower, BusKind, Network, NetworkParts};
use gridshed::powerflow::{
    build_ybus, evaluate_safety, line_loading_percent, solve, BranchFlow, LoadingBasis, PowerFlowSolution,
    SolverOptions,
};
use gridshed::Error;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// sin(2δ) = 0.1 with V2 = cos δ, solved by hand ahead of time.
const TWO_BUS_DELTA: f64 = 0.0500837105807799;
const TWO_BUS_V2: f64 = 0.9987460731103327;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn two_bus_matches_closed_form() {
    let sol = solve(&two_bus_analytic(), &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert_abs_diff_eq!(sol.v_mag[1], TWO_BUS_V2, epsilon = 1e-6);
    assert_abs_diff_eq!(sol.v_ang[1], -TWO_BUS_DELTA, epsilon = 1e-6);
    assert_abs_diff_eq!((2.0 * TWO_BUS_DELTA).sin(), 0.1, epsilon = 1e-15);
}

#[test]
fn three_bus_ybus_matches_hand_computation() {
    let y = build_ybus(&three_bus()).unwrap();
    let expected = [
        [c(6.25, -18.695), c(-5.0, 15.0), c(-1.25, 3.75)],
        [c(-5.0, 15.0), c(6.666666666666667, -19.95), c(-1.6666666666666667, 5.0)],
        [c(-1.25, 3.75), c(-1.6666666666666667, 5.0), c(2.9166666666666667, -8.605)],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let got = y.get(i, j);
            assert!((got - e).norm() < 1e-12, "Y[{i}][{j}] = {got}, expected {e}");
        }
    }
}

#[test]
fn no_load_network_stays_flat() {
    let mut net = three_bus().into_parts();
    net.loads.clear();
    net.shunts.clear();
    for l in &mut net.lines {
        l.b_charging = 0.0;
    }
    let sol = solve(&Network::new(net).unwrap(), &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.iterations, 0);
    assert!(sol.v_mag.iter().all(|&v| v == 1.0));
    assert!(sol.v_ang.iter().all(|&a| a == 0.0));
    assert!(sol.line_flows.iter().all(|f| f.s_from.norm() == 0.0 && f.s_to.norm() == 0.0));
}

#[test]
fn ybus_is_symmetric_and_outages_are_local() {
    let net = rts();
    let y = build_ybus(&net).unwrap();
    for i in 0..y.n() {
        for &(j, v) in y.row(i) {
            assert_eq!(v, y.get(j, i));
        }
    }
    let l = net.line(77).unwrap().clone();
    let f = net.bus_position(l.from_bus).unwrap();
    let t = net.bus_position(l.to_bus).unwrap();
    let ys = c(1.0, 0.0) / c(l.r, l.x);
    let half = c(0.0, l.b_charging / 2.0);
    let out = build_ybus(&net.apply_outage(&[77]).unwrap()).unwrap();
    for i in 0..y.n() {
        for j in 0..y.n() {
            let stamp = match (i, j) {
                _ if i == j && (i == f || i == t) => ys + half,
                _ if (i, j) == (f, t) || (i, j) == (t, f) => -ys,
                _ => c(0.0, 0.0),
            };
            assert!((y.get(i, j) - stamp - out.get(i, j)).norm() < 1e-9, "entry {i},{j}");
        }
    }
}

/// Recomputes every branch flow from the pi model and the solved voltages.
fn injections_from_branches(net: &Network, sol: &PowerFlowSolution) -> Vec<Complex64> {
    let base = net.base_mva();
    let v: Vec<Complex64> = (0..net.buses().len()).map(|i| sol.voltage(i)).collect();
    let mut inj = vec![c(0.0, 0.0); v.len()];
    let mut stamp = |from: u32, to: u32, r: f64, x: f64, b: f64, tap: f64| {
        let (f, t) = (net.bus_position(from).unwrap(), net.bus_position(to).unwrap());
        let ys = c(1.0, 0.0) / c(r, x);
        let yc = c(0.0, b / 2.0);
        let i_from = (ys + yc) / (tap * tap) * v[f] - ys / tap * v[t];
        let i_to = (ys + yc) * v[t] - ys / tap * v[f];
        inj[f] += v[f] * i_from.conj() * base;
        inj[t] += v[t] * i_to.conj() * base;
    };
    for l in net.lines().iter().filter(|l| l.in_service) {
        stamp(l.from_bus, l.to_bus, l.r, l.x, l.b_charging, 1.0);
    }
    for tr in net.transformers().iter().filter(|t| t.in_service) {
        stamp(tr.from_bus, tr.to_bus, tr.r, tr.x, tr.b_charging, tr.tap);
    }
    for sh in net.shunts() {
        let i = net.bus_position(sh.bus).unwrap();
        inj[i] += c(sh.g_mw, -sh.b_mvar) * sol.v_mag[i].powi(2);
    }
    inj
}

fn specified_p(net: &Network) -> Vec<f64> {
    let mut p = vec![0.0; net.buses().len()];
    for g in net.generators().iter().filter(|g| g.in_service) {
        p[net.bus_position(g.bus).unwrap()] += g.p_mw;
    }
    for l in net.loads() {
        p[net.bus_position(l.bus).unwrap()] -= l.p_mw;
    }
    p
}

fn balance_error(net: &Network, sol: &PowerFlowSolution) -> f64 {
    let slack = net.slack_position();
    let slack_bus = net.buses()[slack].id;
    let slack_load: f64 = net.loads().iter().filter(|l| l.bus == slack_bus).map(|l| l.p_mw).sum();
    let other_gen: f64 = net
        .generators()
        .iter()
        .filter(|g| g.in_service && g.bus != slack_bus)
        .map(|g| g.p_mw)
        .sum();
    let generation = sol.slack_injection.re + slack_load + other_gen;
    let load: f64 = net.loads().iter().map(|l| l.p_mw).sum();
    let losses: f64 = sol
        .line_flows
        .iter()
        .chain(&sol.transformer_flows)
        .map(|f: &BranchFlow| f.losses().re)
        .sum::<f64>()
        + net
            .shunts()
            .iter()
            .map(|s| s.g_mw * sol.v_mag[net.bus_position(s.bus).unwrap()].powi(2))
            .sum::<f64>();
    (generation - load - losses).abs() / net.base_mva()
}

#[test]
fn power_balance_and_mismatch_on_random_networks() {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut converged = 0;
    for _ in 0..60 {
        let net = random_network(&mut rng, 10);
        let sol = solve(&net, &opts).unwrap();
        if !sol.converged {
            continue;
        }
        converged += 1;
        assert!(sol.max_mismatch <= opts.tolerance);
        assert!(balance_error(&net, &sol) <= 10.0 * opts.tolerance);

        let inj = injections_from_branches(&net, &sol);
        let p = specified_p(&net);
        for (i, b) in net.buses().iter().enumerate() {
            if b.kind != BusKind::Slack {
                assert!((inj[i].re - p[i]).abs() / net.base_mva() <= opts.tolerance, "bus {}", b.id);
            }
        }
    }
    assert!(converged >= 50, "only {converged} of 60 converged");
}

#[test]
fn loading_percent_definitions() {
    let flow = BranchFlow {
        id: 0,
        s_from: c(60.0, 80.0),
        s_to: c(-59.0, -78.0),
        v_from: 1.0,
        v_to: 0.98,
    };
    assert_eq!(flow.loading_percent(100.0, LoadingBasis::ApparentPower), 100.0);
    let zero = BranchFlow {
        s_from: c(0.0, 0.0),
        s_to: c(0.0, 0.0),
        ..flow
    };
    assert_eq!(zero.loading_percent(100.0, LoadingBasis::ApparentPower), 0.0);
    assert_eq!(zero.loading_percent(100.0, LoadingBasis::Current), 0.0);
}

#[test]
fn loading_of_nonconverged_solution_is_an_error() {
    let net = two_bus_analytic();
    let opts = SolverOptions {
        max_iterations: 1,
        tolerance: 1e-14,
        ..SolverOptions::default()
    };
    let sol = solve(&net.scale_loads(&[1.0]).unwrap(), &opts).unwrap();
    assert!(!sol.converged);
    assert!(matches!(
        line_loading_percent(&sol, &net.lines()[0], LoadingBasis::ApparentPower),
        Err(Error::NotConverged)
    ));
    let report = evaluate_safety(&net, &opts).unwrap();
    assert!(!report.safe && report.nonconverged);
}

#[test]
fn structural_errors_are_reported() {
    let mut parts = two_bus_analytic().into_parts();
    parts.lines[0].in_service = false;
    let net = Network::new(parts).unwrap();
    assert!(solve(&net, &SolverOptions::default()).is_err());

    let no_slack = Network::new(NetworkParts {
        base_mva: 100.0,
        buses: vec![bus(1, BusKind::Pq)],
        ..Default::default()
    });
    assert!(no_slack.is_err());
}

#[test]
fn matpower_case9_reads_and_round_trips() {
    let net = read_case_file(data_file("case9.m")).unwrap();
    assert_eq!(net.buses().len(), 9);
    assert_eq!(net.lines().len() + net.transformers().len(), 9);
    assert_eq!(net.generators().len(), 3);
    assert_eq!(net.n_loads(), 3);
    assert_eq!(net.total_load().0, 315.0);

    let again = parse_matpower(&serialize_matpower(&net, "case9")).unwrap();
    assert_eq!(build_ybus(&net).unwrap(), build_ybus(&again).unwrap());

    let sol = solve(&net, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(balance_error(&net, &sol) <= 1e-7);
}

#[test]
fn rts_element_counts() {
    let net = rts();
    assert_eq!(net.buses().len(), 73);
    assert_eq!(net.lines().len(), 104);
    assert_eq!(net.n_loads(), 51);
    assert_eq!(net.shunts().len(), 3);
    assert_eq!(net.loads()[39].p_mw, 136.0);
}

#[test]
fn rts_intact_is_safe() {
    let net = rts();
    let report = evaluate_safety(&net, &SolverOptions::default()).unwrap();
    assert!(report.safe, "{report:?}");
    assert!(evaluate_safety(&net, &SolverOptions::thermal_only()).unwrap().safe);
}

#[test]
fn rts_line_77_outage_overloads_line_73() {
    let net = rts().apply_outage(&[77]).unwrap();
    let opts = SolverOptions::thermal_only();
    let sol = solve(&net, &opts).unwrap();
    assert!(sol.converged);
    let l73 = net.line(73).unwrap();
    let current = line_loading_percent(&sol, l73, LoadingBasis::Current).unwrap();
    let apparent = line_loading_percent(&sol, l73, LoadingBasis::ApparentPower).unwrap();
    assert_abs_diff_eq!(current, 128.0, epsilon = 1.0);
    // The apparent-power basis reads higher because bus 306 sags to about 0.69 pu.
    assert_abs_diff_eq!(apparent, 133.0, epsilon = 1.0);

    let report = evaluate_safety(&net, &opts).unwrap();
    assert!(!report.safe);
    assert!(report.line_violations.iter().any(|&(id, _)| id == 73));
    assert!(!evaluate_safety(&net, &SolverOptions::default()).unwrap().safe);
}

#[test]
fn rts_line_77_outage_with_load_39_at_seventy_percent() {
    let net = rts().apply_outage(&[77]).unwrap();
    let mut fractions = vec![1.0; net.n_loads()];
    fractions[39] = 0.7;
    let shed = net.scale_loads(&fractions).unwrap();
    assert!(evaluate_safety(&shed, &SolverOptions::thermal_only()).unwrap().safe);

    // With the voltage band enforced bus 306 is still below 0.95 pu.
    let opts = SolverOptions {
        enforce_q_limits: false,
        ..SolverOptions::default()
    };
    let report = evaluate_safety(&shed, &opts).unwrap();
    assert!(!report.safe);
    assert!(report.voltage_violations.iter().any(|&(bus, v)| bus == 306 && v < 0.95));
}
