//! Latin squares as relay network-coding maps.
//!
//! Cell `(row, col)` of an order-`M²` map holds the cluster label of the
//! quadruple whose row index is `M·x_A1 + x_A2` and column index is
//! `M·x_B1 + x_B2`. A map satisfies the exclusive law exactly when no label
//! repeats in a row or column.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A transmit possibility `((x_A1, x_B1), (x_A2, x_B2))` over the two MA uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quadruple {
    pub a1: usize,
    pub b1: usize,
    pub a2: usize,
    pub b2: usize,
}

impl Quadruple {
    pub fn new(a1: usize, b1: usize, a2: usize, b2: usize) -> Self {
        Quadruple { a1, b1, a2, b2 }
    }

    /// Builds a quadruple from the single-use pairs of use 1 and use 2.
    pub fn from_uses(first: (usize, usize), second: (usize, usize)) -> Self {
        Quadruple::new(first.0, first.1, second.0, second.1)
    }

    pub fn row(self, m: usize) -> usize {
        m * self.a1 + self.a2
    }

    pub fn col(self, m: usize) -> usize {
        m * self.b1 + self.b2
    }

    pub fn from_cell(row: usize, col: usize, m: usize) -> Self {
        Quadruple::new(row / m, col / m, row % m, col % m)
    }
}

impl std::fmt::Display for Quadruple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(({},{}),({},{}))", self.a1, self.b1, self.a2, self.b2)
    }
}

/// Which uniqueness rule a cell breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Column,
}

/// A repeated label: `(row, col)` carries a label already seen earlier in the
/// same row or column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub label: u32,
    pub axis: Axis,
}

/// Outcome of [`LatinSquare::validate`]; violations are in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// An `n × n` array of labels in `[0, t)` where every label is used.
///
/// Construction only checks the shape and label range; call
/// [`LatinSquare::validate`] for the row/column property.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatinSquare {
    order: usize,
    label_count: usize,
    cells: Vec<u32>,
}

impl LatinSquare {
    /// Builds a square from rows. The label count is `max + 1`; every label
    /// below it must occur.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::MalformedSquare("empty square".into()));
        }
        let mut cells = Vec::with_capacity(order * order);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::MalformedSquare(format!(
                    "row {r} has {} cells, expected {order}",
                    row.len()
                )));
            }
            cells.extend_from_slice(row);
        }
        Self::from_flat(order, cells)
    }

    pub fn from_flat(order: usize, cells: Vec<u32>) -> Result<Self> {
        if order == 0 || cells.len() != order * order {
            return Err(Error::MalformedSquare(format!(
                "{} cells do not form a square of order {order}",
                cells.len()
            )));
        }
        let label_count = cells.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut seen = vec![false; label_count];
        for &l in &cells {
            seen[l as usize] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::MalformedSquare(format!("label {gap} is never used")));
        }
        Ok(LatinSquare {
            order,
            label_count,
            cells,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.order + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.cells[row * self.order..(row + 1) * self.order]
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.cells.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// Row/column uniqueness check. Each cell whose label already appeared to
    /// its left (or above it) is reported.
    pub fn validate(&self) -> ValidationReport {
        let n = self.order;
        let t = self.label_count;
        let mut col_seen = vec![false; n * t];
        let mut violations = Vec::new();
        for r in 0..n {
            let mut row_seen = vec![false; t];
            for c in 0..n {
                let l = self.get(r, c);
                let li = l as usize;
                if row_seen[li] {
                    violations.push(Violation { row: r, col: c, label: l, axis: Axis::Row });
                } else if col_seen[c * t + li] {
                    violations.push(Violation { row: r, col: c, label: l, axis: Axis::Column });
                }
                row_seen[li] = true;
                col_seen[c * t + li] = true;
            }
        }
        ValidationReport { violations }
    }

    pub fn is_latin(&self) -> bool {
        self.validate().is_ok()
    }

    /// Relabels by first occurrence in a row-major scan.
    pub fn canonical(&self) -> LatinSquare {
        let mut rename: Vec<Option<u32>> = vec![None; self.label_count];
        let mut next = 0u32;
        let cells = self
            .cells
            .iter()
            .map(|&l| {
                *rename[l as usize].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        LatinSquare {
            order: self.order,
            label_count: self.label_count,
            cells,
        }
    }

    /// True when both squares induce the same partition of cells.
    pub fn same_partition(&self, other: &LatinSquare) -> bool {
        self.order == other.order && self.canonical().cells == other.canonical().cells
    }

    /// The column in `row` carrying `label`, if present.
    pub fn decode_row(&self, row: usize, label: u32) -> Option<usize> {
        self.row(row).iter().position(|&l| l == label)
    }

    /// The row in `col` carrying `label`, if present.
    pub fn decode_col(&self, col: usize, label: u32) -> Option<usize> {
        (0..self.order).find(|&r| self.get(r, col) == label)
    }

    pub fn transpose(&self) -> LatinSquare {
        let n = self.order;
        let mut cells = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                cells[c * n + r] = self.get(r, c);
            }
        }
        LatinSquare {
            order: n,
            label_count: self.label_count,
            cells,
        }
    }

    /// Applies a column permutation: output column `c` is input column
    /// `perm[c]`.
    pub fn permute_columns(&self, perm: &[usize]) -> LatinSquare {
        let n = self.order;
        assert_eq!(perm.len(), n);
        let mut cells = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                cells[r * n + c] = self.get(r, perm[c]);
            }
        }
        LatinSquare {
            order: n,
            label_count: self.label_count,
            cells,
        }
    }

    /// Splits the square into an `m × m` grid of sub-squares of order `n/m`.
    pub fn blocks(&self, m: usize) -> Result<BlockView> {
        let n = self.order;
        if m == 0 || n % m != 0 {
            return Err(Error::OrderNotDivisible { order: n, block: m });
        }
        let s = n / m;
        let mut sub_squares = Vec::with_capacity(m);
        let mut ids: HashMap<Vec<Vec<u32>>, usize> = HashMap::new();
        let mut block_square = vec![vec![0; m]; m];
        for (i, block_row) in block_square.iter_mut().enumerate() {
            let mut line = Vec::with_capacity(m);
            for (j, slot) in block_row.iter_mut().enumerate() {
                let sub: Vec<Vec<u32>> = (0..s)
                    .map(|r| (0..s).map(|c| self.get(i * s + r, j * s + c)).collect())
                    .collect();
                let next = ids.len();
                *slot = *ids.entry(sub.clone()).or_insert(next);
                line.push(sub);
            }
            sub_squares.push(line);
        }
        Ok(BlockView {
            sub_squares,
            block_square,
        })
    }
}

/// Decomposition of a square into sub-squares `L_{i,j}` and the array `L_B`
/// identifying equal sub-squares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockView {
    pub sub_squares: Vec<Vec<Vec<Vec<u32>>>>,
    pub block_square: Vec<Vec<usize>>,
}

impl BlockView {
    pub fn reassemble(&self) -> Result<LatinSquare> {
        let m = self.sub_squares.len();
        let s = self.sub_squares[0][0].len();
        let n = m * s;
        let mut cells = vec![0; n * n];
        for (i, line) in self.sub_squares.iter().enumerate() {
            for (j, sub) in line.iter().enumerate() {
                for (r, row) in sub.iter().enumerate() {
                    for (c, &l) in row.iter().enumerate() {
                        cells[(i * s + r) * n + j * s + c] = l;
                    }
                }
            }
        }
        LatinSquare::from_flat(n, cells)
    }

    /// Number of distinct sub-squares.
    pub fn distinct_blocks(&self) -> usize {
        self.block_square.iter().flatten().max().map_or(0, |&b| b + 1)
    }
}

/// Clusters of quadruples, one per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Symbol alphabet size `M`; the square order is `M²`.
    pub m: usize,
    pub clusters: Vec<Vec<Quadruple>>,
}

impl ClusterPartition {
    /// Reads the clusters off an order-`M²` square, numbered canonically.
    pub fn from_square(sq: &LatinSquare) -> Result<Self> {
        let n = sq.order();
        let m = (n as f64).sqrt().round() as usize;
        if m * m != n {
            return Err(Error::OrderNotDivisible { order: n, block: m.max(1) });
        }
        let canon = sq.canonical();
        let mut clusters = vec![Vec::new(); canon.label_count()];
        for r in 0..n {
            for c in 0..n {
                clusters[canon.get(r, c) as usize].push(Quadruple::from_cell(r, c, m));
            }
        }
        Ok(ClusterPartition { m, clusters })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Rebuilds the square; rejects partitions that do not cover every cell
    /// exactly once or that put two quadruples of one row/column together.
    pub fn to_square(&self) -> Result<LatinSquare> {
        let m = self.m;
        let n = m * m;
        let mut cells: Vec<Option<u32>> = vec![None; n * n];
        for (label, cluster) in self.clusters.iter().enumerate() {
            let mut rows: HashMap<usize, Quadruple> = HashMap::new();
            let mut cols: HashMap<usize, Quadruple> = HashMap::new();
            for &q in cluster {
                if q.a1 >= m || q.b1 >= m || q.a2 >= m || q.b2 >= m {
                    return Err(Error::MalformedSquare(format!("quadruple {q} out of range")));
                }
                if let Some(&p) = rows.get(&q.row(m)).or_else(|| cols.get(&q.col(m))) {
                    return Err(Error::PartitionConflict { first: p, second: q });
                }
                rows.insert(q.row(m), q);
                cols.insert(q.col(m), q);
                let slot = &mut cells[q.row(m) * n + q.col(m)];
                if slot.is_some() {
                    return Err(Error::MalformedSquare(format!("quadruple {q} appears twice")));
                }
                *slot = Some(label as u32);
            }
        }
        let cells: Option<Vec<u32>> = cells.into_iter().collect();
        let cells = cells.ok_or_else(|| Error::MalformedSquare("partition does not cover every quadruple".into()))?;
        LatinSquare::from_flat(n, cells)
    }
}

/// A partially filled array used while seeding and completing maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSquare {
    order: usize,
    cells: Vec<Option<u32>>,
}

impl PartialSquare {
    pub fn empty(order: usize) -> Self {
        PartialSquare {
            order,
            cells: vec![None; order * order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.cells[row * self.order + col]
    }

    pub fn set(&mut self, row: usize, col: usize, label: u32) {
        self.cells[row * self.order + col] = Some(label);
    }

    pub fn clear(&mut self, row: usize, col: usize) {
        self.cells[row * self.order + col] = None;
    }

    /// True when `label` already occurs in `row` or `col`.
    pub fn conflicts(&self, row: usize, col: usize, label: u32) -> bool {
        (0..self.order).any(|k| self.get(row, k) == Some(label) || self.get(k, col) == Some(label))
    }

    pub fn filled(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Number of labels in use, taken as `max + 1`.
    pub fn label_count(&self) -> usize {
        self.cells.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.is_some())
    }

    pub fn to_square(&self) -> Result<LatinSquare> {
        let cells: Option<Vec<u32>> = self.cells.iter().copied().collect();
        let cells = cells.ok_or_else(|| Error::MalformedSquare("array has empty cells".into()))?;
        LatinSquare::from_flat(self.order, cells)
    }
}

impl From<&LatinSquare> for PartialSquare {
    fn from(sq: &LatinSquare) -> Self {
        PartialSquare {
            order: sq.order(),
            cells: sq.cells().iter().map(|&l| Some(l)).collect(),
        }
    }
}
