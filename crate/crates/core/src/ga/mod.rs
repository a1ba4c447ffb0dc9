//! Genetic search for load-shedding plans.
//!
//! A chromosome holds one serving fraction per load. Fitness rewards a safe
//! network with a fixed bonus and otherwise counts served `P + Q`, so the
//! search settles on the safe plan that sheds the least.

mod chromosome;
mod config;
mod engine;
mod fitness;
mod multistep;
mod operators;
mod oracle;

pub use chromosome::{lattice_divisions, Chromosome};
pub use config::{GAConfig, Selection};
pub use engine::{run_ga, GAResult, GenerationProgress, GeneticSearch, ShedAssignment};
pub use fitness::{compare_candidates, fitness, load_weights, FitnessEvaluator, FitnessValue, SAFETY_REWARD};
pub use multistep::{run_multistep, run_multistep_observed, MultiStepResult, StageConfig, StageTrace};
pub use operators::{crossover_at, crossover_single_point, init_population, mutate, rng_stream, select_parents};
pub use oracle::{brute_force_optimal, BruteForce, BRUTE_FORCE_LIMIT};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

/// `n_loads` independent Beta(`alpha`, `beta`) draws.
pub fn sample_importance<R: Rng + ?Sized>(n_loads: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<Vec<f64>> {
    let dist = Beta::new(alpha, beta)
        .map_err(|e| Error::Config(format!("beta({alpha}, {beta}): {e}")))?;
    Ok((0..n_loads).map(|_| dist.sample(rng)).collect())
}
