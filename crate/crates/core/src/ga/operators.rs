use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chromosome::Chromosome;
use super::config::{GAConfig, Selection};
use super::fitness::{compare_candidates, FitnessValue};
use crate::error::{Error, Result};

/// Independent random stream for one `(generation, index)` slot of a run.
pub fn rng_stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | (index as u64 & 0xffff_ffff));
    rng
}

/// Initial population: one all-ones member, the rest with each gene at 1
/// with probability `ones_bias` and uniform on the lattice otherwise.
pub fn init_population<R: Rng + ?Sized>(n_loads: usize, cfg: &GAConfig, rng: &mut R) -> Result<Vec<Chromosome>> {
    init_population_pinned(n_loads, cfg, &vec![None; n_loads], rng)
}

pub(crate) fn init_population_pinned<R: Rng + ?Sized>(
    n_loads: usize,
    cfg: &GAConfig,
    pins: &[Option<u16>],
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    if n_loads == 0 {
        return Err(Error::Config("a chromosome needs at least one load".into()));
    }
    cfg.validate()?;
    let d = cfg.divisions()?;
    let mut pop = Vec::with_capacity(cfg.population_size);
    let mut ones = Chromosome::ones(n_loads, d);
    apply_pins(&mut ones, pins);
    pop.push(ones);
    while pop.len() < cfg.population_size {
        let mut c = Chromosome::ones(n_loads, d);
        for (level, pin) in c.levels_mut().iter_mut().zip(pins) {
            *level = match pin {
                Some(p) => *p,
                None if rng.random_bool(cfg.ones_bias) => d,
                None => rng.random_range(0..=d),
            };
        }
        pop.push(c);
    }
    Ok(pop)
}

pub(crate) fn apply_pins(c: &mut Chromosome, pins: &[Option<u16>]) {
    for (level, pin) in c.levels_mut().iter_mut().zip(pins) {
        if let Some(p) = pin {
            *level = *p;
        }
    }
}

/// Draws `cfg.parents` members (with replacement across draws).
pub fn select_parents<R: Rng + ?Sized>(
    population: &[Chromosome],
    fitness: &[FitnessValue],
    cfg: &GAConfig,
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    let n = population.len();
    if n == 0 || fitness.len() != n {
        return Err(Error::Config("selection needs one fitness per population member".into()));
    }
    if cfg.parents > n {
        return Err(Error::Config(format!("cannot select {} parents from {n} members", cfg.parents)));
    }
    let picks: Vec<usize> = match cfg.selection {
        Selection::Tournament { size } => {
            let size = size.clamp(1, n);
            (0..cfg.parents)
                .map(|_| {
                    index::sample(rng, n, size)
                        .into_iter()
                        .max_by(|&a, &b| {
                            compare_candidates((&population[a], &fitness[a]), (&population[b], &fitness[b]))
                        })
                        .expect("tournament is nonempty")
                })
                .collect()
        }
        Selection::Roulette => {
            let weights: Vec<f64> = fitness.iter().map(|f| f.scalar.max(0.0)).collect();
            match WeightedIndex::new(&weights) {
                Ok(dist) => (0..cfg.parents).map(|_| dist.sample(rng)).collect(),
                // All weights zero: uniform.
                Err(_) => (0..cfg.parents).map(|_| rng.random_range(0..n)).collect(),
            }
        }
    };
    Ok(picks.into_iter().map(|i| population[i].clone()).collect())
}

/// Children `a[..cut] + b[cut..]` and `b[..cut] + a[cut..]`.
pub fn crossover_at(a: &Chromosome, b: &Chromosome, cut: usize) -> Result<(Chromosome, Chromosome)> {
    check_pair(a, b)?;
    if cut == 0 || cut >= a.len() {
        return Err(Error::Config(format!("cut point {cut} outside 1..{}", a.len())));
    }
    let mut x = a.clone();
    let mut y = b.clone();
    x.levels_mut()[cut..].copy_from_slice(&b.levels()[cut..]);
    y.levels_mut()[cut..].copy_from_slice(&a.levels()[cut..]);
    Ok((x, y))
}

/// Single-point crossover with the cut uniform in `1..len`.
pub fn crossover_single_point<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    check_pair(a, b)?;
    let cut = rng.random_range(1..a.len());
    crossover_at(a, b, cut)
}

fn check_pair(a: &Chromosome, b: &Chromosome) -> Result<()> {
    if a.len() != b.len() || a.divisions() != b.divisions() {
        return Err(Error::ChromosomeLength {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Config("crossover needs chromosomes of length 2 or more".into()));
    }
    Ok(())
}

/// Resamples each gene uniformly on the lattice with probability
/// `cfg.mutation_rate`.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, cfg: &GAConfig, rng: &mut R) -> Chromosome {
    mutate_pinned(c, cfg.mutation_rate, &vec![None; c.len()], rng)
}

pub(crate) fn mutate_pinned<R: Rng + ?Sized>(c: &Chromosome, rate: f64, pins: &[Option<u16>], rng: &mut R) -> Chromosome {
    let d = c.divisions();
    let mut out = c.clone();
    for (level, pin) in out.levels_mut().iter_mut().zip(pins) {
        if pin.is_none() && rng.random_bool(rate) {
            *level = rng.random_range(0..=d);
        }
    }
    out
}
