mod common;

use common::*;
use gridshed::ga::{
    brute_force_optimal, fitness, init_population, load_weights, mutate, run_ga, run_multistep, sample_importance,
    select_parents, BruteForce, Chromosome, FitnessValue, GAConfig, GeneticSearch, Selection, StageConfig,
    SAFETY_REWARD,
};
use gridshed::grid::{BusKind, Network, NetworkParts};
use gridshed::powerflow::{evaluate_safety, SolverOptions};
use gridshed::Error;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain(levels: &[u16], d: u16) -> Chromosome {
    Chromosome::from_levels(levels.to_vec(), d).unwrap()
}

#[test]
fn intact_rts_all_ones_fitness_is_reward_plus_total_load() {
    let net = rts();
    let f = fitness(&net, &Chromosome::ones(net.n_loads(), 10), &SolverOptions::default()).unwrap();
    let (p, q) = net.total_load();
    assert!(f.safe);
    assert!((f.scalar - (SAFETY_REWARD + p + q)).abs() < 1e-9);
    // The bundled snapshot serves 8550 MW and 1740 MVAr.
    assert!((p + q - 10290.0).abs() < 1e-6, "P + Q = {}", p + q);
}

#[test]
fn unsafe_chromosome_scores_served_load_only() {
    let net = rts().apply_outage(&[77]).unwrap();
    let f = fitness(&net, &Chromosome::ones(net.n_loads(), 10), &SolverOptions::thermal_only()).unwrap();
    assert!(!f.safe);
    let (p, q) = net.total_load();
    assert!((f.scalar - (p + q)).abs() < 1e-9);
}

#[test]
fn mutation_count_matches_binomial_mean() {
    let trials = 10_000;
    for (step, d) in [(0.001, 1000u16), (0.1, 10)] {
        let cfg = GAConfig {
            gene_step: step,
            ..GAConfig::default()
        };
        let ones = Chromosome::ones(51, d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let changed: usize = (0..trials)
            .map(|_| {
                let m = mutate(&ones, &cfg, &mut rng);
                m.levels().iter().filter(|&&l| l != d).count()
            })
            .sum();
        let mean = changed as f64 / trials as f64;
        // A resampled gene lands on its old value with probability 1/(d+1).
        let expected = 51.0 * 0.1 * f64::from(d) / f64::from(d + 1);
        assert!((mean - expected).abs() < 0.2, "step {step}: mean {mean}, expected {expected}");
    }
    assert!((51.0f64 * 0.1 - 5.1).abs() < 1e-12);
}

#[test]
fn beta_importance_statistics() {
    let rng = &mut ChaCha8Rng::seed_from_u64(5);
    let draws = sample_importance(100_000, 5.0, 1.0, rng).unwrap();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - 5.0 / 6.0).abs() < 0.01);
    assert!(draws.iter().all(|&x| x > 0.0 && x < 1.0));

    let mut a = ChaCha8Rng::seed_from_u64(9);
    let mut b = ChaCha8Rng::seed_from_u64(9);
    assert_eq!(
        sample_importance(51, 5.0, 1.0, &mut a).unwrap(),
        sample_importance(51, 5.0, 1.0, &mut b).unwrap()
    );

    // Kolmogorov-Smirnov against U(0, 1) at the 5% level.
    let mut u = sample_importance(10_000, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(d < 1.358 / n.sqrt(), "KS statistic {d}");

    assert!(sample_importance(3, 0.0, 1.0, &mut a).is_err());
}

fn scored(scalars: &[f64]) -> (Vec<Chromosome>, Vec<FitnessValue>) {
    let pop = (0..scalars.len())
        .map(|i| {
            let mut levels = vec![1u16; scalars.len()];
            levels[i] = 0;
            chain(&levels, 1)
        })
        .collect();
    let fits = scalars.iter().map(|&s| FitnessValue::new(false, s, false)).collect();
    (pop, fits)
}

#[test]
fn degenerate_tournament_picks_the_best() {
    let (pop, fits) = scored(&[3.0, 9.0, 1.0, 4.0, 2.0]);
    let cfg = GAConfig {
        population_size: 5,
        parents: 4,
        selection: Selection::Tournament { size: 5 },
        ..GAConfig::default()
    };
    let parents = select_parents(&pop, &fits, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(parents.iter().all(|p| *p == pop[1]));
}

#[test]
fn roulette_never_picks_zero_weight_members() {
    let (pop, fits) = scored(&[0.0, 0.0, 100.0]);
    let cfg = GAConfig {
        population_size: 3,
        parents: 3,
        selection: Selection::Roulette,
        ..GAConfig::default()
    };
    for seed in 0..20 {
        let parents = select_parents(&pop, &fits, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(parents.iter().all(|p| *p == pop[2]));
    }
}

#[test]
fn seeded_tournament_matches_resimulation() {
    let scalars = [3.0, 9.0, 1.0, 4.0, 2.0];
    let (pop, fits) = scored(&scalars);
    let cfg = GAConfig {
        population_size: 5,
        parents: 5,
        selection: Selection::Tournament { size: 3 },
        ..GAConfig::default()
    };
    let parents = select_parents(&pop, &fits, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let expected: Vec<usize> = (0..5)
        .map(|_| {
            let entrants = index::sample(&mut rng, 5, 3).into_vec();
            *entrants
                .iter()
                .max_by(|&&a, &&b| scalars[a].total_cmp(&scalars[b]))
                .unwrap()
        })
        .collect();
    let got: Vec<usize> = parents.iter().map(|p| pop.iter().position(|m| m == p).unwrap()).collect();
    assert_eq!(got, expected);

    let too_many = GAConfig {
        parents: 6,
        ..cfg
    };
    assert!(select_parents(&pop, &fits, &too_many, &mut rng).is_err());
}

#[test]
fn init_population_examples() {
    let cfg = GAConfig {
        ones_bias: 1.0,
        ..GAConfig::default()
    };
    let pop = init_population(51, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(pop.len(), 50);
    assert!(pop.iter().all(|c| c.shed_count() == 0));

    let cfg = GAConfig::default();
    let a = init_population(51, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = init_population(51, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    assert!(a.iter().any(|c| c.shed_count() == 0));
    let mean = a.iter().map(|c| c.levels().iter().filter(|&&l| l != 10).count()).sum::<usize>() as f64 / 50.0;
    // Expected 51 * 0.1 * 10/11 changed genes; the sample is small.
    assert!((2.5..7.0).contains(&mean), "mean non-one genes {mean}");
}

/// Slack feeding one bus over a 100 MVA line.
fn single_load(p_mw: f64) -> Network {
    Network::new(NetworkParts {
        base_mva: 100.0,
        buses: vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
        lines: vec![line(0, 1, 2, 0.001, 0.01, 0.0, 100.0)],
        loads: vec![load(0, 2, p_mw, 0.0)],
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn brute_force_forced_answers() {
    let opts = SolverOptions::default();
    let r = brute_force_optimal(&single_load(150.0), 1.0, &opts).unwrap();
    assert!(r.feasible);
    assert_eq!(r.best.levels(), &[0]);

    let safe = toy_instance(1, 4).into_parts();
    let mut relaxed = safe.clone();
    for l in &mut relaxed.lines {
        l.rating_mva = 1000.0;
    }
    let r = brute_force_optimal(&Network::new(relaxed).unwrap(), 1.0, &opts).unwrap();
    assert_eq!(r.best.shed_count(), 0);

    let big = toy_instance(1, 8);
    assert!(matches!(
        brute_force_optimal(&big, 0.1, &opts),
        Err(Error::InstanceTooLarge { .. })
    ));
}

#[test]
fn brute_force_matches_independent_enumeration() {
    let opts = SolverOptions::default();
    for seed in 0..3 {
        let net = toy_instance(seed, 4);
        let weights: Vec<f64> = net.loads().iter().map(|l| l.p_mw + l.q_mvar).collect();
        let grid = [0.0, 0.5, 1.0];
        let mut best: Option<(f64, Vec<f64>)> = None;
        for a in grid {
            for b in grid {
                for c in grid {
                    for d in grid {
                        let g = vec![a, b, c, d];
                        if !evaluate_safety(&net.scale_loads(&g).unwrap(), &opts).unwrap().safe {
                            continue;
                        }
                        let served: f64 = g.iter().zip(&weights).map(|(x, w)| x * w).sum();
                        if best.as_ref().is_none_or(|(s, _)| served > *s + 1e-9) {
                            best = Some((served, g));
                        }
                    }
                }
            }
        }
        let r = brute_force_optimal(&net, 0.5, &opts).unwrap();
        match best {
            Some((served, _)) => {
                assert!(r.feasible);
                assert!((r.best_fitness.remaining_load - served).abs() < 1e-9, "seed {seed}");
            }
            None => assert!(!r.feasible),
        }
    }
}

#[test]
fn ga_matches_oracle_on_five_load_binary_toy() {
    let opts = SolverOptions::default();
    let net = toy_instance(4, 5);
    let oracle = brute_force_optimal(&net, 1.0, &opts).unwrap();
    assert!(oracle.feasible);
    assert!(oracle.best.shed_count() > 0);
    let hits = (0..20)
        .filter(|&seed| {
            let cfg = GAConfig {
                seed,
                ..GAConfig::binary()
            };
            run_ga(&net, &cfg, &opts).unwrap().best_fitness.scalar == oracle.best_fitness.scalar
        })
        .count();
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn safe_network_needs_no_shedding() {
    let net = single_load(50.0);
    let r = run_ga(&net, &GAConfig { max_iterations: 20, ..GAConfig::default() }, &SolverOptions::default()).unwrap();
    assert!(r.feasible);
    assert_eq!(r.shed_mw, 0.0);
    assert!(r.shed_loads.is_empty());
}

#[test]
fn result_is_independent_of_thread_count() {
    let net = toy_instance(2, 6);
    let cfg = GAConfig {
        max_iterations: 60,
        seed: 8,
        ..GAConfig::default()
    };
    let opts = SolverOptions::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ga(&net, &cfg, &opts).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());

    let weights = load_weights(&net);
    let served: f64 = a.best.genes().iter().zip(&weights).map(|(g, w)| g * w).sum();
    let reward = if a.best_fitness.safe { SAFETY_REWARD } else { 0.0 };
    assert!((a.best_fitness.scalar - reward - served).abs() <= 1e-9 * served.max(1.0));
    assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn pinned_genes_stay_put() {
    let net = toy_instance(3, 6);
    let cfg = GAConfig {
        max_iterations: 40,
        ..GAConfig::default()
    };
    let r = GeneticSearch::new(&net, &cfg, &SolverOptions::default())
        .pin(0, 1.0)
        .pin(1, 0.5)
        .run()
        .unwrap();
    assert_eq!(r.best.gene(0), 1.0);
    assert_eq!(r.best.gene(1), 0.5);
    assert!(BruteForce::new(&net, 0.1, &SolverOptions::default()).free_only(&[2, 3]).size().unwrap() == 121);
}

#[test]
fn multistep_without_protected_loads_is_a_plain_run() {
    let net = toy_instance(5, 5).with_importance(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
    let cfg = GAConfig {
        max_iterations: 80,
        seed: 4,
        ..GAConfig::default()
    };
    let opts = SolverOptions::default();
    let staged = run_multistep(&net, &StageConfig::with_threshold(0.8), &cfg, &opts).unwrap();
    let plain = run_ga(&net, &cfg, &opts).unwrap();
    assert_eq!(staged.stages.len(), 1);
    assert_eq!(staged.result.best, plain.best);
    assert_eq!(staged.result.history, plain.history);
}

#[test]
fn rts_line_77_partial_and_binary_plans() {
    let net = rts().apply_outage(&[77]).unwrap();
    let opts = SolverOptions::thermal_only();

    let partial = run_ga(&net, &GAConfig::default(), &opts).unwrap();
    assert!(partial.feasible);
    let plan: Vec<(usize, f64)> = partial.shed_loads.iter().map(|s| (s.load, s.fraction)).collect();
    assert_eq!(plan, vec![(39, 0.7)]);
    assert!((partial.shed_mw - 40.8).abs() < 1e-6);

    let binary = run_ga(&net, &GAConfig::binary(), &opts).unwrap();
    assert!(binary.feasible);
    let plan: Vec<(usize, f64)> = binary.shed_loads.iter().map(|s| (s.load, s.fraction)).collect();
    assert_eq!(plan, vec![(39, 0.0)]);
    assert!((binary.shed_mw - 136.0).abs() < 1e-6);
}

#[test]
fn rts_line_23_multistep_spares_the_important_load() {
    let mut importance = vec![1.0; 51];
    importance[0] = 0.794;
    importance[2] = 0.915;
    importance[34] = 0.566;
    importance[36] = 0.750;
    let net = rts().apply_outage(&[23]).unwrap().with_importance(&importance).unwrap();
    let r = run_multistep(&net, &StageConfig::with_threshold(0.8), &GAConfig::default(), &SolverOptions::thermal_only())
        .unwrap();
    assert_eq!(r.stage_reached, 1);
    assert!(r.result.feasible);
    assert_eq!(r.result.best.gene(2), 1.0);
    let plan: Vec<(usize, f64)> = r.result.shed_loads.iter().map(|s| (s.load, s.fraction)).collect();
    assert_eq!(plan, vec![(0, 0.3)]);
    assert!((r.result.shed_mw - 75.6).abs() < 1e-6);
}

mod props {
    use gridshed::ga::{crossover_at, mutate, Chromosome, GAConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair() -> impl Strategy<Value = (Vec<u16>, Vec<u16>, u16)> {
        (1u16..=20, 2usize..40).prop_flat_map(|(d, len)| {
            (
                proptest::collection::vec(0..=d, len),
                proptest::collection::vec(0..=d, len),
                Just(d),
            )
        })
    }

    proptest! {
        #[test]
        fn crossover_swaps_tails((a, b, d) in pair(), cut_frac in 0.0f64..1.0) {
            let cut = 1 + (cut_frac * (a.len() - 1) as f64) as usize;
            let x = Chromosome::from_levels(a.clone(), d).unwrap();
            let y = Chromosome::from_levels(b.clone(), d).unwrap();
            let (p, q) = crossover_at(&x, &y, cut).unwrap();
            prop_assert_eq!(&p.levels()[..cut], &a[..cut]);
            prop_assert_eq!(&p.levels()[cut..], &b[cut..]);
            prop_assert_eq!(&q.levels()[..cut], &b[..cut]);
            prop_assert_eq!(&q.levels()[cut..], &a[cut..]);
        }

        #[test]
        fn mutation_stays_on_the_lattice((a, _, d) in pair(), rate in 0.0f64..=1.0, seed: u64) {
            let cfg = GAConfig { mutation_rate: rate, ..GAConfig::default() };
            let x = Chromosome::from_levels(a.clone(), d).unwrap();
            let m = mutate(&x, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(m.len(), a.len());
            prop_assert_eq!(m.divisions(), d);
            prop_assert!(m.levels().iter().all(|&l| l <= d));
            if rate == 0.0 {
                prop_assert_eq!(m.levels(), &a[..]);
            }
        }
    }
}
