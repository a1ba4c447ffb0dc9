//! Exhaustive search over the gene lattice for small instances.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;

use super::chromosome::{lattice_divisions, Chromosome};
use super::engine::{level_pins, GAResult};
use super::fitness::{compare_candidates, FitnessEvaluator, FitnessValue};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::powerflow::SolverOptions;

/// Largest number of lattice points an exhaustive search may visit.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Exhaustive search with optional pinned genes.
pub struct BruteForce<'a> {
    net: &'a Network,
    gene_step: f64,
    opts: SolverOptions,
    pins: Vec<Option<f64>>,
    limit: u128,
}

impl<'a> BruteForce<'a> {
    pub fn new(net: &'a Network, gene_step: f64, opts: &SolverOptions) -> Self {
        BruteForce {
            net,
            gene_step,
            opts: *opts,
            pins: vec![None; net.n_loads()],
            limit: BRUTE_FORCE_LIMIT,
        }
    }

    pub fn pins(mut self, pins: &[Option<f64>]) -> Self {
        for (slot, p) in self.pins.iter_mut().zip(pins) {
            if p.is_some() {
                *slot = *p;
            }
        }
        self
    }

    /// Frees only the listed loads; every other gene is held at 1.
    pub fn free_only(mut self, loads: &[usize]) -> Self {
        for (i, slot) in self.pins.iter_mut().enumerate() {
            *slot = if loads.contains(&i) { None } else { Some(1.0) };
        }
        self
    }

    pub fn limit(mut self, points: u128) -> Self {
        self.limit = points;
        self
    }

    /// Number of lattice points the search would visit.
    pub fn size(&self) -> Result<u128> {
        let d = lattice_divisions(self.gene_step)?;
        let pins = level_pins(self.net, &self.pins, d)?;
        let free = pins.iter().filter(|p| p.is_none()).count();
        Ok((u128::from(d) + 1).checked_pow(free as u32).unwrap_or(u128::MAX))
    }

    pub fn run(self) -> Result<GAResult> {
        let start = Instant::now();
        let d = lattice_divisions(self.gene_step)?;
        let n = self.net.n_loads();
        if n == 0 {
            return Err(Error::Config("network has no loads to optimize".into()));
        }
        let points = self.size()?;
        if points > self.limit {
            return Err(Error::InstanceTooLarge {
                points,
                limit: self.limit,
            });
        }
        let pins = level_pins(self.net, &self.pins, d)?;
        let free: Vec<usize> = (0..n).filter(|&i| pins[i].is_none()).collect();
        let base: Vec<u16> = pins.iter().map(|p| p.unwrap_or(d)).collect();
        let evaluator = FitnessEvaluator::new(self.net, &self.opts)?;
        let radix = u64::from(d) + 1;

        let decode = |mut k: u64| {
            let mut levels = base.clone();
            for &i in &free {
                levels[i] = (k % radix) as u16;
                k /= radix;
            }
            Chromosome::from_levels(levels, d).expect("levels on lattice")
        };

        type Best = Option<(Chromosome, FitnessValue)>;
        let pick = |a: Best, b: Best| -> Best {
            match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if compare_candidates((&b.0, &b.1), (&a.0, &a.1)) == Ordering::Greater {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            }
        };
        let evaluated: Result<(Best, Best, usize)> = (0..points as u64)
            .into_par_iter()
            .map(|k| {
                let c = decode(k);
                let f = evaluator.evaluate(&c)?;
                let nonconv = usize::from(f.nonconverged);
                let safe = f.safe.then(|| (c.clone(), f));
                Ok((safe, Some((c, f)), nonconv))
            })
            .try_reduce(
                || (None, None, 0),
                |a, b| Ok((pick(a.0, b.0), pick(a.1, b.1), a.2 + b.2)),
            );
        let (best_safe, best_any, nonconverged) = evaluated?;
        let (best, best_fitness) = best_safe.or(best_any).expect("lattice has at least one point");
        Ok(GAResult::from_best(
            self.net,
            best,
            best_fitness,
            Vec::new(),
            0,
            points as usize,
            nonconverged,
            start.elapsed().as_secs_f64(),
        ))
    }
}

/// Best chromosome over the whole lattice with every gene free.
pub fn brute_force_optimal(net: &Network, gene_step: f64, opts: &SolverOptions) -> Result<GAResult> {
    BruteForce::new(net, gene_step, opts).run()
}
