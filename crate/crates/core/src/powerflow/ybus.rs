use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Network;

/// Pi-model admittances of one in-service branch, per unit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BranchStamp {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

impl BranchStamp {
    fn new(from: usize, to: usize, r: f64, x: f64, b: f64, tap: f64) -> Self {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
        let half_b = Complex64::new(0.0, b / 2.0);
        BranchStamp {
            from,
            to,
            yff: (ys + half_b) / (tap * tap),
            yft: -ys / tap,
            ytf: -ys / tap,
            ytt: ys + half_b,
        }
    }
}

/// Stamps for every in-service line (first, in line order) followed by every
/// in-service transformer. Each entry carries the element id.
pub(crate) fn branch_stamps(net: &Network) -> Result<(Vec<(usize, BranchStamp)>, Vec<(usize, BranchStamp)>)> {
    let pos = |id: u32| net.bus_position(id).expect("validated bus reference");
    let mut lines = Vec::new();
    for l in net.lines().iter().filter(|l| l.in_service) {
        if l.r == 0.0 && l.x == 0.0 {
            return Err(Error::ZeroImpedance(l.id));
        }
        lines.push((
            l.id,
            BranchStamp::new(pos(l.from_bus), pos(l.to_bus), l.r, l.x, l.b_charging, 1.0),
        ));
    }
    let transformers = net
        .transformers()
        .iter()
        .filter(|t| t.in_service)
        .map(|t| {
            (
                t.id,
                BranchStamp::new(pos(t.from_bus), pos(t.to_bus), t.r, t.x, t.b_charging, t.tap),
            )
        })
        .collect();
    Ok((lines, transformers))
}

/// Sparse bus admittance matrix in per unit, indexed by bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Stored entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, y) in row {
                dense[i][j] = y;
            }
        }
        dense
    }

    /// `Y · v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, y)| y * v[j]).sum())
            .collect()
    }
}

/// Builds the bus admittance matrix: series elements, line charging split
/// between both ends, transformer turns ratios and bus shunts. Out-of-service
/// branches contribute nothing.
pub fn build_ybus(net: &Network) -> Result<AdmittanceMatrix> {
    let n = net.buses().len();
    let mut acc: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
    let mut add = |i: usize, j: usize, y: Complex64| {
        *acc[i].entry(j).or_insert(Complex64::new(0.0, 0.0)) += y;
    };
    let (lines, transformers) = branch_stamps(net)?;
    for (_, s) in lines.iter().chain(&transformers) {
        add(s.from, s.from, s.yff);
        add(s.from, s.to, s.yft);
        add(s.to, s.from, s.ytf);
        add(s.to, s.to, s.ytt);
    }
    for sh in net.shunts() {
        let i = net.bus_position(sh.bus).expect("validated bus reference");
        add(i, i, Complex64::new(sh.g_mw, sh.b_mvar) / net.base_mva());
    }
    Ok(AdmittanceMatrix {
        n,
        rows: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
    })
}
