use serde::{Deserialize, Serialize};

use super::chromosome::lattice_divisions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    /// Best of `size` members drawn without replacement, once per parent.
    Tournament { size: usize },
    /// Probability proportional to the fitness scalar.
    Roulette,
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Tournament { size: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GAConfig {
    pub population_size: usize,
    pub parents: usize,
    pub selection: Selection,
    pub mutation_rate: f64,
    pub max_iterations: usize,
    /// Stop after this many generations without improvement of the best
    /// fitness.
    pub saturate: Option<usize>,
    /// Lattice spacing of genes; 1.0 gives binary shedding.
    pub gene_step: f64,
    /// Probability that an initial gene is 1.
    pub ones_bias: f64,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig {
            population_size: 50,
            parents: 10,
            selection: Selection::default(),
            mutation_rate: 0.1,
            max_iterations: 500,
            saturate: None,
            gene_step: 0.1,
            ones_bias: 0.9,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn binary() -> Self {
        GAConfig {
            gene_step: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size == 0 {
            return bad("population_size must be at least 1".into());
        }
        if self.parents == 0 || self.parents > self.population_size {
            return bad(format!(
                "parents must be in 1..={} (population_size), got {}",
                self.population_size, self.parents
            ));
        }
        if let Selection::Tournament { size } = self.selection {
            if size == 0 || size > self.population_size {
                return bad(format!("tournament size must be in 1..={}", self.population_size));
            }
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation_rate {} outside [0, 1]", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.ones_bias) {
            return bad(format!("ones_bias {} outside [0, 1]", self.ones_bias));
        }
        if self.saturate == Some(0) {
            return bad("saturate must be at least 1 generation".into());
        }
        lattice_divisions(self.gene_step)?;
        Ok(())
    }

    pub fn divisions(&self) -> Result<u16> {
        lattice_divisions(self.gene_step)
    }
}
