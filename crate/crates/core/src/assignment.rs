//! Minimum-cost linear assignment over rectangular matrices with forbidden
//! (`+inf`) entries.
//!
//! [`solve`] returns a matching of maximum cardinality among the feasible
//! pairs and, among those, one of minimum total cost. It runs successive
//! shortest augmenting paths (Dijkstra on reduced costs, all free rows as
//! sources) with row and column potentials, in the Jonker-Volgonant family.
//! Forbidden entries never take part in the potential arithmetic.

use crate::error::{Error, Result};

/// Dense row-major cost matrix. Entries are finite and non-negative, or `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        for (k, &value) in data.iter().enumerate() {
            if value.is_nan() || value < 0.0 || value == f64::NEG_INFINITY {
                return Err(Error::InvalidCost { row: k / cols.max(1), col: k % cols.max(1), value });
            }
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        CostMatrix { rows, cols, data: vec![f64::INFINITY; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_finite()
    }

    pub fn transposed(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        CostMatrix { rows: self.cols, cols: self.rows, data }
    }
}

/// Disjoint `(row, col)` pairs, sorted by row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        Matching { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of costs in row order.
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }

    pub fn unmatched_rows(&self, rows: usize) -> Vec<usize> {
        let mut used = vec![false; rows];
        for &(r, _) in &self.pairs {
            used[r] = true;
        }
        (0..rows).filter(|&r| !used[r]).collect()
    }

    pub fn unmatched_cols(&self, cols: usize) -> Vec<usize> {
        let mut used = vec![false; cols];
        for &(_, c) in &self.pairs {
            used[c] = true;
        }
        (0..cols).filter(|&c| !used[c]).collect()
    }
}

pub fn solve(costs: &CostMatrix) -> Matching {
    let (n, m) = (costs.rows, costs.cols);
    if n == 0 || m == 0 {
        return Matching::default();
    }

    // Costs are non-negative, so zero potentials are feasible. Free rows and
    // free columns keep equal potentials throughout, which lets every free row
    // start the search at distance zero.
    let mut row_pot = vec![0.0f64; n];
    let mut col_pot = vec![0.0f64; m];
    let mut row_match: Vec<Option<usize>> = vec![None; n];
    let mut col_match: Vec<Option<usize>> = vec![None; m];

    let mut dist = vec![f64::INFINITY; m];
    let mut pred = vec![usize::MAX; m];
    let mut settled = vec![false; m];
    let mut row_dist = vec![f64::INFINITY; n];

    loop {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        settled.fill(false);
        row_dist.fill(f64::INFINITY);

        let relax = |i: usize, base: f64, dist: &mut [f64], pred: &mut [usize], settled: &[bool], col_match: &[Option<usize>], row_pot: &[f64], col_pot: &[f64]| {
            for j in 0..m {
                if settled[j] || col_match[j] == Some(i) {
                    continue;
                }
                let c = costs.get(i, j);
                if !c.is_finite() {
                    continue;
                }
                let reduced = (c + row_pot[i] - col_pot[j]).max(0.0);
                let candidate = base + reduced;
                if candidate < dist[j] {
                    dist[j] = candidate;
                    pred[j] = i;
                }
            }
        };

        let mut any_free = false;
        for i in 0..n {
            if row_match[i].is_none() {
                any_free = true;
                row_dist[i] = 0.0;
                relax(i, 0.0, &mut dist, &mut pred, &settled, &col_match, &row_pot, &col_pot);
            }
        }
        if !any_free {
            break;
        }

        let end = loop {
            // Nearest unsettled column; the lowest index wins ties.
            let mut best: Option<usize> = None;
            for j in 0..m {
                if !settled[j] && dist[j].is_finite() && best.is_none_or(|b| dist[j] < dist[b]) {
                    best = Some(j);
                }
            }
            let Some(j) = best else { break None };
            settled[j] = true;
            match col_match[j] {
                None => break Some(j),
                Some(r) => {
                    row_dist[r] = dist[j];
                    relax(r, dist[j], &mut dist, &mut pred, &settled, &col_match, &row_pot, &col_pot);
                }
            }
        };
        let Some(end) = end else { break };

        let reach = dist[end];
        for i in 0..n {
            row_pot[i] += row_dist[i].min(reach);
        }
        for j in 0..m {
            col_pot[j] += if settled[j] { dist[j] } else { reach };
        }

        let mut j = end;
        loop {
            let i = pred[j];
            let previous = row_match[i];
            row_match[i] = Some(j);
            col_match[j] = Some(i);
            match previous {
                None => break,
                Some(pj) => j = pj,
            }
        }
    }

    Matching::from_pairs(
        row_match
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)))
            .collect(),
    )
}

/// Largest `min(rows, cols)` accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Exhaustive reference solver: enumerates every partial injective assignment
/// and keeps the one with the most pairs, then the lowest cost.
pub fn brute_force_solve(costs: &CostMatrix) -> Result<Matching> {
    let (n, m) = (costs.rows, costs.cols);
    if n.min(m) > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleLimit { rows: n, cols: m, limit: BRUTE_FORCE_LIMIT });
    }
    if n == 0 || m == 0 {
        return Ok(Matching::default());
    }
    let transposed = n > m;
    let work = if transposed { costs.transposed() } else { costs.clone() };

    struct Search<'a> {
        costs: &'a CostMatrix,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Vec<(usize, usize)>,
        best_cost: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize, cost: f64) {
            if row == self.costs.rows {
                let better = self.current.len() > self.best.len()
                    || (self.current.len() == self.best.len() && cost < self.best_cost);
                if better {
                    self.best = self.current.clone();
                    self.best_cost = cost;
                }
                return;
            }
            for col in 0..self.costs.cols {
                if self.used[col] || !self.costs.is_feasible(row, col) {
                    continue;
                }
                self.used[col] = true;
                self.current.push((row, col));
                self.visit(row + 1, cost + self.costs.get(row, col));
                self.current.pop();
                self.used[col] = false;
            }
            self.visit(row + 1, cost);
        }
    }

    let mut search = Search {
        costs: &work,
        used: vec![false; work.cols],
        current: Vec::new(),
        best: Vec::new(),
        best_cost: 0.0,
    };
    search.visit(0, 0.0);
    let pairs = if transposed {
        search.best.into_iter().map(|(r, c)| (c, r)).collect()
    } else {
        search.best
    };
    Ok(Matching::from_pairs(pairs))
}
