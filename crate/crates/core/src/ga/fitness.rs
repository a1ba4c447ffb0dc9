use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::chromosome::Chromosome;
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::powerflow::{PowerFlowModel, SolverOptions};

/// Reward added to the served load when the network is safe. It exceeds any
/// served total of the networks this is used on, so every safe chromosome
/// outranks every unsafe one.
pub const SAFETY_REWARD: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessValue {
    pub scalar: f64,
    pub safe: bool,
    /// Served `P + Q` in MW + MVAr.
    pub remaining_load: f64,
    /// The power flow did not converge (implies `!safe`).
    pub nonconverged: bool,
}

impl FitnessValue {
    pub fn new(safe: bool, remaining_load: f64, nonconverged: bool) -> Self {
        let reward = if safe { SAFETY_REWARD } else { 0.0 };
        FitnessValue {
            scalar: reward + remaining_load,
            safe,
            remaining_load,
            nonconverged,
        }
    }
}

/// Total order used everywhere a "best" chromosome is picked: higher scalar,
/// then fewer shed loads, then the lexicographically smallest list of shed
/// load ids, then smaller levels. `Greater` means `a` is better.
pub fn compare_candidates(a: (&Chromosome, &FitnessValue), b: (&Chromosome, &FitnessValue)) -> Ordering {
    a.1.scalar
        .total_cmp(&b.1.scalar)
        .then_with(|| b.0.shed_count().cmp(&a.0.shed_count()))
        .then_with(|| b.0.shed_ids().cmp(&a.0.shed_ids()))
        .then_with(|| b.0.levels().cmp(a.0.levels()))
}

/// `P + Q` of every load, the weight of its gene in the served-load sum.
pub fn load_weights(net: &Network) -> Vec<f64> {
    net.loads().iter().map(|l| l.p_mw + l.q_mvar).collect()
}

/// Evaluates chromosomes against one network, reusing its admittance data.
pub struct FitnessEvaluator<'a> {
    model: PowerFlowModel<'a>,
    weights: Vec<f64>,
    opts: SolverOptions,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(net: &'a Network, opts: &SolverOptions) -> Result<Self> {
        opts.validate()?;
        Ok(FitnessEvaluator {
            model: PowerFlowModel::new(net)?,
            weights: load_weights(net),
            opts: *opts,
        })
    }

    pub fn network(&self) -> &Network {
        self.model.network()
    }

    pub fn evaluate(&self, c: &Chromosome) -> Result<FitnessValue> {
        if c.len() != self.weights.len() {
            return Err(Error::ChromosomeLength {
                expected: self.weights.len(),
                got: c.len(),
            });
        }
        let genes = c.genes();
        let remaining = genes.iter().zip(&self.weights).map(|(g, w)| g * w).sum();
        let report = self.model.evaluate_safety(Some(&genes), &self.opts)?;
        Ok(FitnessValue::new(report.safe, remaining, report.nonconverged))
    }
}

/// One-shot fitness of `c` on `net`.
pub fn fitness(net: &Network, c: &Chromosome, opts: &SolverOptions) -> Result<FitnessValue> {
    FitnessEvaluator::new(net, opts)?.evaluate(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::*;
    use crate::grid::{BusKind, NetworkParts};

    fn two_loads() -> Network {
        Network::new(NetworkParts {
            base_mva: 100.0,
            buses: vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
            lines: vec![line(0, 1, 2, 0.001, 0.01)],
            loads: vec![load(0, 2, 10.0, 2.0), load(1, 2, 6.0, 2.0)],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn safe_toy_adds_reward() {
        let net = two_loads();
        let c = Chromosome::from_fractions(&[0.5, 1.0], 0.5).unwrap();
        let f = fitness(&net, &c, &SolverOptions::default()).unwrap();
        assert!(f.safe);
        assert!((f.scalar - 10_014.0).abs() < 1e-9);
        assert!((f.remaining_load - 14.0).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch() {
        let net = two_loads();
        let c = Chromosome::ones(3, 10);
        assert!(matches!(
            fitness(&net, &c, &SolverOptions::default()),
            Err(Error::ChromosomeLength { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn tie_break_prefers_fewer_then_lower_ids() {
        let f = FitnessValue::new(true, 10.0, false);
        let one = Chromosome::from_levels(vec![0, 1, 1], 1).unwrap();
        let two = Chromosome::from_levels(vec![0, 0, 1], 1).unwrap();
        let other = Chromosome::from_levels(vec![1, 0, 1], 1).unwrap();
        assert_eq!(compare_candidates((&one, &f), (&two, &f)), Ordering::Greater);
        assert_eq!(compare_candidates((&one, &f), (&other, &f)), Ordering::Greater);
    }
}
