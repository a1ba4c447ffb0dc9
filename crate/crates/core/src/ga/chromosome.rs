use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-load serving fractions on a uniform lattice `{0, 1/d, 2/d, …, 1}`.
///
/// Genes are stored as integer levels so lattice membership is exact and
/// chromosomes can be hashed and compared without floating-point noise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chromosome {
    levels: Vec<u16>,
    divisions: u16,
}

/// Number of lattice intervals for a gene step, e.g. 10 for 0.1 and 1 for
/// binary genes.
pub fn lattice_divisions(gene_step: f64) -> Result<u16> {
    if !(gene_step > 0.0 && gene_step <= 1.0) {
        return Err(Error::Config(format!("gene_step {gene_step} must lie in (0, 1]")));
    }
    let d = (1.0 / gene_step).round();
    if d > f64::from(u16::MAX) || ((d * gene_step) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("gene_step {gene_step} does not divide 1 evenly")));
    }
    Ok(d as u16)
}

impl Chromosome {
    pub fn ones(len: usize, divisions: u16) -> Self {
        Chromosome {
            levels: vec![divisions; len],
            divisions,
        }
    }

    pub fn from_levels(levels: Vec<u16>, divisions: u16) -> Result<Self> {
        if divisions == 0 {
            return Err(Error::Config("lattice needs at least one division".into()));
        }
        if let Some((index, &l)) = levels.iter().enumerate().find(|(_, &l)| l > divisions) {
            return Err(Error::GeneOutOfRange {
                index,
                value: f64::from(l) / f64::from(divisions),
            });
        }
        Ok(Chromosome { levels, divisions })
    }

    /// Snaps fractions onto the lattice; values off the lattice by more than
    /// 1e-9 are rejected.
    pub fn from_fractions(genes: &[f64], gene_step: f64) -> Result<Self> {
        let divisions = lattice_divisions(gene_step)?;
        let d = f64::from(divisions);
        let mut levels = Vec::with_capacity(genes.len());
        for (index, &g) in genes.iter().enumerate() {
            let level = (g * d).round();
            if !(0.0..=1.0).contains(&g) || (level - g * d).abs() > 1e-9 {
                return Err(Error::GeneOutOfRange { index, value: g });
            }
            levels.push(level as u16);
        }
        Ok(Chromosome { levels, divisions })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn divisions(&self) -> u16 {
        self.divisions
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub(crate) fn levels_mut(&mut self) -> &mut [u16] {
        &mut self.levels
    }

    pub fn gene(&self, i: usize) -> f64 {
        f64::from(self.levels[i]) / f64::from(self.divisions)
    }

    pub fn genes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.gene(i)).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.divisions == 1
    }

    /// Indices of genes below 1, ascending.
    pub fn shed_ids(&self) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < self.divisions)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn shed_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l < self.divisions).count()
    }
}
