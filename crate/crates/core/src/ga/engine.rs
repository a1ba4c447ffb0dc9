use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chromosome::Chromosome;
use super::config::GAConfig;
use super::fitness::{compare_candidates, FitnessEvaluator, FitnessValue};
use super::operators::{
    apply_pins, crossover_single_point, init_population_pinned, mutate_pinned, rng_stream, select_parents,
};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::powerflow::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShedAssignment {
    pub load: usize,
    /// Served fraction of the load (its gene).
    pub fraction: f64,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GAResult {
    pub best: Chromosome,
    pub best_fitness: FitnessValue,
    pub feasible: bool,
    pub shed_mw: f64,
    pub shed_mvar: f64,
    pub shed_loads: Vec<ShedAssignment>,
    /// Best fitness scalar of the population after each generation; entry 0
    /// is the initial population.
    pub history: Vec<f64>,
    pub generations_run: usize,
    /// Distinct chromosomes whose power flow was solved.
    pub evaluations: usize,
    /// Evaluations whose power flow did not converge.
    pub nonconverged_evaluations: usize,
    /// Wall-clock seconds. Kept out of serialized records.
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl GAResult {
    pub(crate) fn from_best(
        net: &Network,
        best: Chromosome,
        best_fitness: FitnessValue,
        history: Vec<f64>,
        generations_run: usize,
        evaluations: usize,
        nonconverged_evaluations: usize,
        elapsed_s: f64,
    ) -> Self {
        let mut shed_mw = 0.0;
        let mut shed_mvar = 0.0;
        let mut shed_loads = Vec::new();
        for (i, load) in net.loads().iter().enumerate() {
            let g = best.gene(i);
            shed_mw += (1.0 - g) * load.p_mw;
            shed_mvar += (1.0 - g) * load.q_mvar;
            if g < 1.0 {
                shed_loads.push(ShedAssignment {
                    load: i,
                    fraction: g,
                    importance: load.importance,
                });
            }
        }
        GAResult {
            feasible: best_fitness.safe,
            best,
            best_fitness,
            shed_mw,
            shed_mvar,
            shed_loads,
            history,
            generations_run,
            evaluations,
            nonconverged_evaluations,
            elapsed_s,
        }
    }
}

impl GAResult {
    /// Result for the plan that serves every load, without a search.
    /// Returns `None` when that plan is unsafe or leaves demand on an island.
    pub fn all_served(net: &Network, cfg: &GAConfig, opts: &SolverOptions) -> Result<Option<GAResult>> {
        let start = Instant::now();
        cfg.validate()?;
        let loads = net.loads();
        if net
            .islanded_loads()
            .into_iter()
            .any(|i| loads[i].p_mw != 0.0 || loads[i].q_mvar != 0.0)
        {
            return Ok(None);
        }
        let c = Chromosome::ones(net.n_loads(), cfg.divisions()?);
        let f = FitnessEvaluator::new(net, opts)?.evaluate(&c)?;
        if !f.safe {
            return Ok(None);
        }
        let scalar = f.scalar;
        Ok(Some(GAResult::from_best(
            net,
            c,
            f,
            vec![scalar],
            0,
            1,
            0,
            start.elapsed().as_secs_f64(),
        )))
    }
}

/// Progress callback argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationProgress {
    pub generation: usize,
    pub max_generations: usize,
    pub best_scalar: f64,
}

type ProgressFn<'p> = dyn Fn(GenerationProgress) + Sync + 'p;

/// Generational GA over one network with optional pinned genes.
///
/// Loads on buses cut off from the slack are always pinned to 0.
pub struct GeneticSearch<'a, 'p> {
    net: &'a Network,
    cfg: GAConfig,
    opts: SolverOptions,
    pins: Vec<Option<f64>>,
    progress: Option<&'p ProgressFn<'p>>,
}

impl<'a, 'p> GeneticSearch<'a, 'p> {
    pub fn new(net: &'a Network, cfg: &GAConfig, opts: &SolverOptions) -> Self {
        GeneticSearch {
            net,
            cfg: cfg.clone(),
            opts: *opts,
            pins: vec![None; net.n_loads()],
            progress: None,
        }
    }

    /// Fixes the gene of `load` to `value` for the whole run.
    pub fn pin(mut self, load: usize, value: f64) -> Self {
        if let Some(slot) = self.pins.get_mut(load) {
            *slot = Some(value);
        }
        self
    }

    pub fn pins(mut self, pins: &[Option<f64>]) -> Self {
        for (slot, p) in self.pins.iter_mut().zip(pins) {
            if p.is_some() {
                *slot = *p;
            }
        }
        self
    }

    pub fn on_progress(mut self, f: &'p ProgressFn<'p>) -> Self {
        self.progress = Some(f);
        self
    }

    pub fn run(self) -> Result<GAResult> {
        let start = Instant::now();
        let cfg = &self.cfg;
        cfg.validate()?;
        let n = self.net.n_loads();
        if n == 0 {
            return Err(Error::Config("network has no loads to optimize".into()));
        }
        let d = cfg.divisions()?;
        let pins = level_pins(self.net, &self.pins, d)?;
        let evaluator = FitnessEvaluator::new(self.net, &self.opts)?;
        let mut cache = EvalCache::default();

        let mut rng = rng_stream(cfg.seed, 0, 0);
        let init = init_population_pinned(n, cfg, &pins, &mut rng)?;
        cache.fill(&evaluator, &init)?;
        let mut population = survivors(init, &cache, cfg.population_size);
        let mut history = vec![cache.get(&population[0]).scalar];
        self.report(0, history[0]);

        let offspring_count = cfg.population_size - cfg.parents;
        let mut stale = 0;
        let mut generation = 0;
        while generation < cfg.max_iterations {
            if cfg.saturate.is_some_and(|s| stale >= s) {
                break;
            }
            generation += 1;

            let fits: Vec<FitnessValue> = population.iter().map(|c| cache.get(c)).collect();
            let parents = select_parents(&population, &fits, cfg, &mut rng_stream(cfg.seed, generation, 0))?;
            let offspring = breed(&parents, offspring_count, cfg, &pins, generation)?;
            cache.fill(&evaluator, &offspring)?;

            let mut pool = population;
            pool.extend(offspring);
            population = survivors(pool, &cache, cfg.population_size);

            let best = cache.get(&population[0]).scalar;
            let previous = *history.last().expect("history starts nonempty");
            if best > previous {
                stale = 0;
            } else {
                stale += 1;
            }
            history.push(best);
            self.report(generation, best);
        }

        let (best, best_fitness) = cache.best_safe().unwrap_or_else(|| {
            let c = population[0].clone();
            let f = cache.get(&c);
            (c, f)
        });
        Ok(GAResult::from_best(
            self.net,
            best,
            best_fitness,
            history,
            generation,
            cache.values.len(),
            cache.nonconverged,
            start.elapsed().as_secs_f64(),
        ))
    }

    fn report(&self, generation: usize, best_scalar: f64) {
        if let Some(f) = self.progress {
            f(GenerationProgress {
                generation,
                max_generations: self.cfg.max_iterations,
                best_scalar,
            });
        }
    }
}

/// Runs the GA with every gene free (except loads in dead islands).
pub fn run_ga(net: &Network, cfg: &GAConfig, opts: &SolverOptions) -> Result<GAResult> {
    GeneticSearch::new(net, cfg, opts).run()
}

pub(crate) fn level_pins(net: &Network, pins: &[Option<f64>], divisions: u16) -> Result<Vec<Option<u16>>> {
    let d = f64::from(divisions);
    let mut levels = Vec::with_capacity(pins.len());
    for (index, pin) in pins.iter().enumerate() {
        levels.push(match *pin {
            None => None,
            Some(v) => {
                let l = (v * d).round();
                if !(0.0..=1.0).contains(&v) || (l - v * d).abs() > 1e-9 {
                    return Err(Error::GeneOutOfRange { index, value: v });
                }
                Some(l as u16)
            }
        });
    }
    for i in net.islanded_loads() {
        levels[i] = Some(0);
    }
    Ok(levels)
}

fn breed(
    parents: &[Chromosome],
    count: usize,
    cfg: &GAConfig,
    pins: &[Option<u16>],
    generation: usize,
) -> Result<Vec<Chromosome>> {
    let mut children = Vec::with_capacity(count + 1);
    let mut pair = 0;
    while children.len() < count {
        pair += 1;
        let mut rng = rng_stream(cfg.seed, generation, pair);
        let a = &parents[rng.random_range(0..parents.len())];
        let b = &parents[rng.random_range(0..parents.len())];
        let (x, y) = if a.len() >= 2 {
            crossover_single_point(a, b, &mut rng)?
        } else {
            (a.clone(), b.clone())
        };
        for child in [x, y] {
            let mut m = mutate_pinned(&child, cfg.mutation_rate, pins, &mut rng);
            apply_pins(&mut m, pins);
            children.push(m);
        }
    }
    children.truncate(count);
    Ok(children)
}

/// Top `size` of the pool by [`compare_candidates`], distinct members first;
/// duplicates only fill up when there are too few distinct ones.
fn survivors(mut pool: Vec<Chromosome>, cache: &EvalCache, size: usize) -> Vec<Chromosome> {
    pool.sort_by(|a, b| compare_candidates((b, &cache.get(b)), (a, &cache.get(a))));
    let mut seen = HashSet::new();
    let (mut unique, dupes): (Vec<_>, Vec<_>) = pool.into_iter().partition(|c| seen.insert(c.clone()));
    unique.truncate(size);
    let missing = size.saturating_sub(unique.len());
    unique.extend(dupes.into_iter().take(missing));
    unique
}

#[derive(Default)]
struct EvalCache {
    values: HashMap<Chromosome, FitnessValue>,
    nonconverged: usize,
    best_safe: Option<(Chromosome, FitnessValue)>,
}

impl EvalCache {
    fn get(&self, c: &Chromosome) -> FitnessValue {
        self.values[c]
    }

    /// Evaluates every chromosome not yet cached, in parallel.
    fn fill(&mut self, evaluator: &FitnessEvaluator<'_>, batch: &[Chromosome]) -> Result<()> {
        let mut todo: Vec<&Chromosome> = batch.iter().filter(|c| !self.values.contains_key(*c)).collect();
        todo.sort();
        todo.dedup();
        let results: Vec<Result<FitnessValue>> = todo.par_iter().map(|c| evaluator.evaluate(c)).collect();
        for (c, r) in todo.into_iter().zip(results) {
            let f = r?;
            if f.nonconverged {
                self.nonconverged += 1;
            }
            if f.safe {
                let better = match &self.best_safe {
                    None => true,
                    Some((bc, bf)) => compare_candidates((c, &f), (bc, bf)) == Ordering::Greater,
                };
                if better {
                    self.best_safe = Some((c.clone(), f));
                }
            }
            self.values.insert(c.clone(), f);
        }
        Ok(())
    }

    fn best_safe(&self) -> Option<(Chromosome, FitnessValue)> {
        self.best_safe.clone()
    }
}
