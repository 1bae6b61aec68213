//! Sufficient statistics `n_xy` of a child variable against the joint
//! configurations of its parents.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tabular_data::Dataset;

/// Mixed-radix rank of a parent configuration; the last parent varies fastest.
pub fn parent_config_index(states: &[usize], cards: &[usize]) -> Result<usize> {
    if states.len() != cards.len() {
        return Err(Error::invalid("states and cardinalities differ in length"));
    }
    let mut idx = 0usize;
    for (&s, &c) in states.iter().zip(cards) {
        if s >= c {
            return Err(Error::StateOutOfRange {
                state: s,
                cardinality: c,
            });
        }
        idx = idx * c + s;
    }
    Ok(idx)
}

/// Inverse of [`parent_config_index`].
pub fn parent_config_states(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut states = vec![0; cards.len()];
    for (s, &c) in states.iter_mut().zip(cards).rev() {
        *s = index % c;
        index /= c;
    }
    states
}

/// `r × q` contingency table of child state against parent configuration.
/// Columns with `n_y = 0` are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    r: usize,
    q: usize,
    /// Row-major: `counts[x * q + y]`.
    counts: Vec<u64>,
    col_totals: Vec<u64>,
    parent_cards: Vec<usize>,
}

impl CountTable {
    /// Build from a dense `r × q` matrix given as rows (one row per child state).
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::invalid("a count table needs at least one child state"));
        }
        let q = rows[0].len();
        if q == 0 || rows.iter().any(|row| row.len() != q) {
            return Err(Error::invalid("count rows must be non-empty and equally long"));
        }
        let counts: Vec<u64> = rows.iter().flatten().copied().collect();
        Ok(Self::from_parts(r, q, counts, vec![q]))
    }

    /// Build from columns (one count vector per parent configuration).
    pub fn from_columns(cols: &[Vec<u64>]) -> Result<Self> {
        let q = cols.len();
        if q == 0 {
            return Err(Error::invalid("a count table needs at least one column"));
        }
        let r = cols[0].len();
        if r == 0 || cols.iter().any(|c| c.len() != r) {
            return Err(Error::invalid("count columns must be non-empty and equally long"));
        }
        let mut counts = vec![0; r * q];
        for (y, col) in cols.iter().enumerate() {
            for (x, &n) in col.iter().enumerate() {
                counts[x * q + y] = n;
            }
        }
        Ok(Self::from_parts(r, q, counts, vec![q]))
    }

    pub(crate) fn from_parts(r: usize, q: usize, counts: Vec<u64>, parent_cards: Vec<usize>) -> Self {
        let mut col_totals = vec![0; q];
        for x in 0..r {
            for y in 0..q {
                col_totals[y] += counts[x * q + y];
            }
        }
        CountTable {
            r,
            q,
            counts,
            col_totals,
            parent_cards,
        }
    }

    pub fn zeros(r: usize, q: usize) -> Self {
        Self::from_parts(r, q, vec![0; r * q], vec![q])
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.q + y]
    }

    pub fn col_total(&self, y: usize) -> u64 {
        self.col_totals[y]
    }

    pub fn col_totals(&self) -> &[u64] {
        &self.col_totals
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn column(&self, y: usize) -> Vec<u64> {
        (0..self.r).map(|x| self.count(x, y)).collect()
    }

    pub fn total(&self) -> u64 {
        self.col_totals.iter().sum()
    }

    pub(crate) fn add(&mut self, x: usize, y: usize, n: u64) {
        self.counts[x * self.q + y] += n;
        self.col_totals[y] += n;
    }

    /// For each child state `x`, the distinct non-zero values of `n_xy` with
    /// their multiplicities across columns.
    pub fn count_histogram(&self) -> Vec<Vec<(u64, u64)>> {
        (0..self.r)
            .map(|x| {
                let mut vals: Vec<u64> = (0..self.q).map(|y| self.count(x, y)).filter(|&n| n > 0).collect();
                vals.sort_unstable();
                let mut hist: Vec<(u64, u64)> = Vec::new();
                for v in vals {
                    match hist.last_mut() {
                        Some((val, m)) if *val == v => *m += 1,
                        _ => hist.push((v, 1)),
                    }
                }
                hist
            })
            .collect()
    }

    /// CSV with one row per child state and one column per parent configuration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for y in 0..self.q {
            let _ = write!(out, ",pa{y}");
        }
        out.push('\n');
        for x in 0..self.r {
            let _ = write!(out, "{x}");
            for y in 0..self.q {
                let _ = write!(out, ",{}", self.count(x, y));
            }
            out.push('\n');
        }
        out
    }
}

/// Tally `child` against the joint configurations of `parents`.
pub fn count_table(ds: &Dataset, child: usize, parents: &[usize]) -> Result<CountTable> {
    let n_vars = ds.n_vars();
    if child >= n_vars || parents.iter().any(|&p| p >= n_vars) {
        return Err(Error::InvalidParents("variable id out of range".into()));
    }
    if parents.contains(&child) {
        return Err(Error::InvalidParents(format!(
            "variable {child} is listed as its own parent"
        )));
    }
    for (i, p) in parents.iter().enumerate() {
        if parents[..i].contains(p) {
            return Err(Error::InvalidParents(format!("duplicate parent {p}")));
        }
    }
    let r = ds.cardinality(child);
    let cards: Vec<usize> = parents.iter().map(|&p| ds.cardinality(p)).collect();
    let q: usize = cards.iter().product();
    let mut table = CountTable::from_parts(r, q, vec![0; r * q], cards.clone());
    for row in ds.rows() {
        let y = parents.iter().zip(&cards).fold(0, |acc, (&p, &c)| acc * c + row[p]);
        table.add(row[child], y, 1);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular_data::VariableMeta;
    use proptest::prelude::*;

    #[test]
    fn radix_examples() {
        assert_eq!(parent_config_index(&[0, 0], &[2, 3]).unwrap(), 0);
        assert_eq!(parent_config_index(&[1, 2], &[2, 3]).unwrap(), 5);
        assert_eq!(parent_config_index(&[], &[]).unwrap(), 0);
        assert!(parent_config_index(&[2, 0], &[2, 3]).is_err());
    }

    #[test]
    fn radix_enumeration_order() {
        // last parent fastest: (0,0),(0,1),(0,2),(1,0),(1,1),(1,2)
        let mut k = 0;
        for a in 0..2 {
            for b in 0..3 {
                assert_eq!(parent_config_index(&[a, b], &[2, 3]).unwrap(), k);
                assert_eq!(parent_config_states(k, &[2, 3]), vec![a, b]);
                k += 1;
            }
        }
    }

    fn ds(rows: &[Vec<usize>], cards: &[usize]) -> Dataset {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| VariableMeta::indexed(format!("v{i}"), c))
            .collect();
        Dataset::new(vars, rows).unwrap()
    }

    #[test]
    fn hand_tally() {
        let d = ds(&[vec![0, 0], vec![1, 0], vec![0, 1], vec![0, 1]], &[2, 2]);
        let ct = count_table(&d, 0, &[1]).unwrap();
        assert_eq!(ct.column(0), vec![1, 1]);
        assert_eq!(ct.column(1), vec![2, 0]);
        assert_eq!(ct.count(0, 1), 2);
        assert_eq!(ct.col_totals(), &[2, 2]);
    }

    #[test]
    fn empty_and_parentless() {
        let d = ds(&[], &[3, 2]);
        let ct = count_table(&d, 0, &[1]).unwrap();
        assert_eq!(ct.total(), 0);
        assert_eq!((ct.r(), ct.q()), (3, 2));

        let d = ds(&[vec![2, 0], vec![2, 1], vec![0, 1]], &[3, 2]);
        let ct = count_table(&d, 0, &[]).unwrap();
        assert_eq!(ct.q(), 1);
        assert_eq!(ct.column(0), vec![1, 0, 2]);
    }

    #[test]
    fn invalid_parent_sets() {
        let d = ds(&[vec![0, 0, 0]], &[2, 2, 2]);
        assert!(count_table(&d, 0, &[0]).is_err());
        assert!(count_table(&d, 0, &[1, 1]).is_err());
        assert!(count_table(&d, 0, &[5]).is_err());
    }

    #[test]
    fn histogram_groups_equal_counts() {
        let ct = CountTable::from_columns(&[vec![3, 0], vec![3, 1], vec![1, 0]]).unwrap();
        assert_eq!(ct.count_histogram(), vec![vec![(1, 1), (3, 2)], vec![(1, 1)]]);
    }

    #[test]
    fn csv_layout() {
        let ct = CountTable::from_columns(&[vec![1, 1], vec![2, 0]]).unwrap();
        assert_eq!(ct.to_csv(), "state,pa0,pa1\n0,1,2\n1,1,0\n");
    }

    proptest! {
        #[test]
        fn permutation_and_marginals(rows in proptest::collection::vec((0usize..3, 0usize..2, 0usize..4), 0..60), rot in 0usize..60) {
            let rows: Vec<Vec<usize>> = rows.into_iter().map(|(a, b, c)| vec![a, b, c]).collect();
            let d = ds(&rows, &[3, 2, 4]);
            let ct = count_table(&d, 0, &[1, 2]).unwrap();
            let mut shuffled = rows.clone();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
            }
            prop_assert_eq!(&ct, &count_table(&ds(&shuffled, &[3, 2, 4]), 0, &[1, 2]).unwrap());
            prop_assert_eq!(ct.total() as usize, rows.len());
            // marginal over the child equals the parent-configuration histogram
            let mut hist = [0u64; 8];
            for r in &rows {
                hist[parent_config_index(&r[1..], &[2, 4]).unwrap()] += 1;
            }
            prop_assert_eq!(ct.col_totals(), &hist[..]);
        }
    }
}
