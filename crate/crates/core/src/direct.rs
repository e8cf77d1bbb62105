//! Direct clustering of the ACF map.
//!
//! Instead of lifting a two-stage clustering, the order-16 array is seeded
//! with the singularity removal constraints of a fade state and then
//! completed. With `l_i` the single-use collision classes and `m_k` the
//! symbols pairs that collide with nothing, the constraints are the products
//! `l_i × l_j`, `l_i × m_k` and `m_k × l_i`. They are exactly the classes of
//! quadruples that collide in both channel uses, so they are pairwise
//! disjoint.

use serde::{Deserialize, Serialize};

use crate::constellation::{SignalSet, TOLERANCE};
use crate::fadestates::FadeState;
use crate::latin::{LatinSquare, PartialSquare, Quadruple};
use crate::mapgen::{base_clustering, cartesian_product, collision_classes};
use crate::{Error, Result};

/// Label budget used when completing direct maps.
pub const DIRECT_BUDGET: usize = 20;
/// Node cap for the budgeted completion search.
pub const NODE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// `l_i × l_j`.
    PairProduct,
    /// `l_i × m_k` or `m_k × l_i`.
    PairSingleton,
}

/// Quadruples that must share one cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub members: Vec<Quadruple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub fade: FadeState,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }
}

/// Enumerates the constraints at a singular fade `h`.
pub fn enumerate_constraints(set: &SignalSet, h: FadeState) -> Result<ConstraintSet> {
    let classes = collision_classes(set, h);
    let (ls, ms): (Vec<_>, Vec<_>) = classes.into_iter().partition(|c| c.len() > 1);
    if ls.is_empty() {
        return Err(Error::NonSingularFade { re: h.re, im: h.im });
    }
    let ms: Vec<(usize, usize)> = ms.into_iter().map(|c| c[0]).collect();
    let product = |first: &[(usize, usize)], second: &[(usize, usize)]| -> Vec<Quadruple> {
        let mut out = Vec::with_capacity(first.len() * second.len());
        for &p in first {
            for &q in second {
                out.push(Quadruple::from_uses(p, q));
            }
        }
        out
    };
    let mut constraints = Vec::new();
    for li in &ls {
        for lj in &ls {
            constraints.push(Constraint { kind: ConstraintKind::PairProduct, members: product(li, lj) });
        }
    }
    for li in &ls {
        for &mk in &ms {
            constraints.push(Constraint { kind: ConstraintKind::PairSingleton, members: product(li, &[mk]) });
        }
    }
    for li in &ls {
        for &mk in &ms {
            constraints.push(Constraint { kind: ConstraintKind::PairSingleton, members: product(&[mk], li) });
        }
    }
    Ok(ConstraintSet { fade: h, constraints })
}

/// Places every constraint in the array with the lowest label that causes no
/// row or column clash, opening a new label when none fits.
pub fn seed_array(cs: &ConstraintSet, m: usize) -> Result<PartialSquare> {
    let n = m * m;
    let mut partial = PartialSquare::empty(n);
    let mut labels = 0u32;
    for c in &cs.constraints {
        for q in &c.members {
            if partial.get(q.row(m), q.col(m)).is_some() {
                return Err(Error::SeedContradiction { row: q.row(m), col: q.col(m) });
            }
        }
        let label = (0..labels)
            .find(|&l| c.members.iter().all(|q| !partial.conflicts(q.row(m), q.col(m), l)))
            .unwrap_or_else(|| {
                labels += 1;
                labels - 1
            });
        for q in &c.members {
            partial.set(q.row(m), q.col(m), label);
        }
    }
    Ok(partial)
}

/// Node cap for the label-minimising seeding search at each label count.
pub const SEED_NODE_CAP: u64 = 200_000;

/// Seeds the array with at most `labels` labels, choosing labels for whole
/// constraints so that no two clashing constraints share one. Constraints are
/// coloured most-saturated first; returns `None` when no colouring is found
/// within [`SEED_NODE_CAP`] nodes.
pub fn seed_array_with(cs: &ConstraintSet, m: usize, labels: usize) -> Result<Option<PartialSquare>> {
    let k = cs.len();
    if k > 128 || labels > 64 {
        return Ok(None);
    }
    // Validate disjointness once through the first-fit path.
    seed_array(cs, m)?;
    let cells: Vec<Vec<(usize, usize)>> = cs
        .constraints
        .iter()
        .map(|c| c.members.iter().map(|q| (q.row(m), q.col(m))).collect())
        .collect();
    let mut adj = vec![0u128; k];
    for i in 0..k {
        for j in i + 1..k {
            let clash = cells[i]
                .iter()
                .any(|&(r, c)| cells[j].iter().any(|&(r2, c2)| r == r2 || c == c2));
            if clash {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    let mut colour = vec![None; k];
    let mut nodes = 0u64;
    if !colour_dfs(&adj, &mut colour, 0, labels as u32, &mut nodes) {
        return Ok(None);
    }
    let mut partial = PartialSquare::empty(m * m);
    for (c, l) in cells.iter().zip(&colour) {
        for &(r, col) in c {
            partial.set(r, col, l.expect("coloured"));
        }
    }
    Ok(Some(partial))
}

fn colour_dfs(adj: &[u128], colour: &mut [Option<u32>], used: u32, limit: u32, nodes: &mut u64) -> bool {
    *nodes += 1;
    if *nodes > SEED_NODE_CAP {
        return false;
    }
    let taken = |i: usize, colour: &[Option<u32>]| -> u64 {
        let mut mask = 0u64;
        let mut rest = adj[i];
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if let Some(l) = colour[j] {
                mask |= 1 << l;
            }
        }
        mask
    };
    let mut pick: Option<(usize, u64, (u32, u32))> = None;
    for i in 0..adj.len() {
        if colour[i].is_some() {
            continue;
        }
        let mask = taken(i, colour);
        let key = (mask.count_ones(), adj[i].count_ones());
        if pick.is_none_or(|(_, _, best)| key > best) {
            pick = Some((i, mask, key));
        }
    }
    let Some((i, mask, _)) = pick else {
        return true;
    };
    // A fresh label is only tried once, as the next unused one.
    for l in 0..(used + 1).min(limit) {
        if mask & (1 << l) != 0 {
            continue;
        }
        colour[i] = Some(l);
        if colour_dfs(adj, colour, used.max(l + 1), limit, nodes) {
            return true;
        }
        colour[i] = None;
        if *nodes > SEED_NODE_CAP {
            return false;
        }
    }
    false
}

/// Result of [`complete`].
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub square: LatinSquare,
    /// True when the square uses at most the requested number of labels.
    pub within_budget: bool,
    /// Search nodes spent in the budgeted search (0 when greedy sufficed).
    pub nodes: u64,
}

/// Greedy completion: cells in row-major order take the smallest label
/// absent from their row and column.
pub fn greedy_complete(partial: &PartialSquare) -> LatinSquare {
    let n = partial.order();
    let mut p = partial.clone();
    for r in 0..n {
        for c in 0..n {
            if p.get(r, c).is_none() {
                let l = (0..).find(|&l| !p.conflicts(r, c, l)).expect("unbounded labels");
                p.set(r, c, l);
            }
        }
    }
    p.to_square().expect("greedy fill leaves no gaps")
}

/// Completes a conflict-free partial array. When the greedy fill exceeds
/// `budget` labels, a backtracking search (most constrained cell first,
/// capped at [`NODE_CAP`] nodes) looks for a completion within budget; if it
/// finds none the greedy square is returned with `within_budget = false`.
pub fn complete(partial: &PartialSquare, budget: usize) -> Completion {
    let greedy = greedy_complete(partial);
    if greedy.label_count() <= budget {
        return Completion { square: greedy, within_budget: true, nodes: 0 };
    }
    let mut search = Backtrack::new(partial, budget.min(64));
    match search.run() {
        Some(square) => Completion { square, within_budget: true, nodes: search.nodes },
        None => Completion { square: greedy, within_budget: false, nodes: search.nodes },
    }
}

struct Backtrack {
    n: usize,
    budget: u32,
    cells: Vec<Option<u32>>,
    row_mask: Vec<u64>,
    col_mask: Vec<u64>,
    nodes: u64,
}

impl Backtrack {
    fn new(partial: &PartialSquare, budget: usize) -> Self {
        let n = partial.order();
        let mut row_mask = vec![0u64; n];
        let mut col_mask = vec![0u64; n];
        let mut cells = vec![None; n * n];
        for r in 0..n {
            for c in 0..n {
                if let Some(l) = partial.get(r, c) {
                    cells[r * n + c] = Some(l);
                    if (l as usize) < 64 {
                        row_mask[r] |= 1 << l;
                        col_mask[c] |= 1 << l;
                    }
                }
            }
        }
        Backtrack { n, budget: budget as u32, cells, row_mask, col_mask, nodes: 0 }
    }

    fn full(&self) -> u64 {
        if self.budget >= 64 {
            u64::MAX
        } else {
            (1u64 << self.budget) - 1
        }
    }

    fn run(&mut self) -> Option<LatinSquare> {
        if self.cells.iter().flatten().any(|&l| l >= self.budget) {
            return None;
        }
        if self.dfs() {
            let cells: Vec<u32> = self.cells.iter().map(|c| c.expect("filled")).collect();
            LatinSquare::from_flat(self.n, cells).ok()
        } else {
            None
        }
    }

    fn dfs(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > NODE_CAP {
            return false;
        }
        let n = self.n;
        let full = self.full();
        let mut pick: Option<(usize, u64)> = None;
        for idx in 0..n * n {
            if self.cells[idx].is_some() {
                continue;
            }
            let free = full & !(self.row_mask[idx / n] | self.col_mask[idx % n]);
            if pick.is_none_or(|(_, best)| free.count_ones() < best.count_ones()) {
                pick = Some((idx, free));
                if free.count_ones() <= 1 {
                    break;
                }
            }
        }
        let Some((idx, mut free)) = pick else {
            return true;
        };
        let (r, c) = (idx / n, idx % n);
        while free != 0 {
            let l = free.trailing_zeros();
            free &= free - 1;
            let bit = 1u64 << l;
            self.cells[idx] = Some(l);
            self.row_mask[r] |= bit;
            self.col_mask[c] |= bit;
            if self.dfs() {
                return true;
            }
            self.row_mask[r] &= !bit;
            self.col_mask[c] &= !bit;
            self.cells[idx] = None;
            if self.nodes > NODE_CAP {
                return false;
            }
        }
        false
    }
}

/// Output of [`direct_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectMap {
    pub square: LatinSquare,
    pub constraints: ConstraintSet,
    pub seed_labels: usize,
    pub within_budget: bool,
}

/// Builds the direct-clustering map for `h` (4-PSK only). Fades on the unit
/// circle return the Cartesian map, which already has the minimal 16 labels.
///
/// Seedings with as few labels as possible are tried first (16, 17, ...),
/// each completed against [`DIRECT_BUDGET`]; the first-fit seeding is the
/// last resort.
pub fn direct_map(set: &SignalSet, h: FadeState) -> Result<DirectMap> {
    if set.lambda() != 2 {
        return Err(Error::DirectUnsupported(set.lambda()));
    }
    let constraints = enumerate_constraints(set, h)?;
    if (h.gamma() - 1.0).abs() <= TOLERANCE {
        let square = cartesian_product(&base_clustering(set, h)?);
        return Ok(DirectMap { seed_labels: square.label_count(), square, constraints, within_budget: true });
    }
    let m = set.size();
    let first_fit = seed_array(&constraints, m)?;
    let mut fallback = None;
    for labels in m * m..first_fit.label_count() {
        let Some(partial) = seed_array_with(&constraints, m, labels)? else {
            continue;
        };
        let done = complete(&partial, DIRECT_BUDGET);
        if done.within_budget {
            let seed_labels = partial.label_count();
            return Ok(DirectMap { square: done.square, constraints, seed_labels, within_budget: true });
        }
        fallback.get_or_insert((done, partial.label_count()));
    }
    let done = complete(&first_fit, DIRECT_BUDGET);
    if done.within_budget {
        let seed_labels = first_fit.label_count();
        return Ok(DirectMap { square: done.square, constraints, seed_labels, within_budget: true });
    }
    let (done, seed_labels) = fallback.unwrap_or((done, first_fit.label_count()));
    Ok(DirectMap { square: done.square, constraints, seed_labels, within_budget: false })
}
