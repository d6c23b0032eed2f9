//! Combinatorial classification of nonnegative families.
//!
//! Everything here works on zero patterns: an entry is zero iff it is
//! exactly `0.0`. Indices are 0-based.
//!
//! The union digraph has an edge `i -> j` iff some matrix has `A[i][j] > 0`.
//! A coordinate set `S` spans a subspace invariant under every matrix iff
//! every edge ending in `S` starts in `S` (`S` is closed under in-edges);
//! [`Reducibility::invariant_set`] reports such a set.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;

/// Default budget of distinct product patterns explored by
/// [`positive_product_or_partition`].
pub const DEFAULT_PATTERN_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionB {
    /// Per matrix: has at least one zero row.
    pub has_zero_row: Vec<bool>,
    /// Per matrix: has at least one zero column.
    pub has_zero_col: Vec<bool>,
    pub holds: bool,
}

/// Checks that no matrix has a zero row or a zero column.
pub fn check_condition_b(family: &MatrixFamily) -> Result<ConditionB> {
    family.require_nonnegative()?;
    let d = family.dim();
    let mut has_zero_row = Vec::with_capacity(family.len());
    let mut has_zero_col = Vec::with_capacity(family.len());
    for a in family.matrices() {
        has_zero_row.push((0..d).any(|i| (0..d).all(|j| a[(i, j)] == 0.0)));
        has_zero_col.push((0..d).any(|j| (0..d).all(|i| a[(i, j)] == 0.0)));
    }
    let holds = !has_zero_row.iter().any(|&z| z) && !has_zero_col.iter().any(|&z| z);
    Ok(ConditionB {
        has_zero_row,
        has_zero_col,
        holds,
    })
}

/// Adjacency lists of the union digraph, sorted.
fn union_digraph(family: &MatrixFamily) -> Vec<Vec<usize>> {
    let d = family.dim();
    (0..d)
        .map(|i| {
            (0..d)
                .filter(|&j| family.matrices().iter().any(|a| a[(i, j)] > 0.0))
                .collect()
        })
        .collect()
}

/// Tarjan's algorithm; components come out in reverse topological order.
fn tarjan_scc(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State {
        index: usize,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, graph: &[Vec<usize>], s: &mut State) {
        s.idx[v] = Some(s.index);
        s.low[v] = s.index;
        s.index += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &graph[v] {
            match s.idx[w] {
                None => {
                    connect(w, graph, s);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.idx[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("tarjan stack underflow");
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.comps.push(comp);
        }
    }

    let n = graph.len();
    let mut s = State {
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        idx: vec![None; n],
        low: vec![0; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if s.idx[v].is_none() {
            connect(v, graph, &mut s);
        }
    }
    s.comps
}

/// Strongly connected components of the union digraph in topological order
/// (every edge between components goes from an earlier to a later one).
fn components_topological(family: &MatrixFamily) -> Vec<Vec<usize>> {
    let mut comps = tarjan_scc(&union_digraph(family));
    comps.reverse();
    comps
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reducibility {
    pub reducible: bool,
    /// A nontrivial coordinate set whose span every matrix maps into itself.
    pub invariant_set: Option<Vec<usize>>,
}

/// A family is reducible iff its union digraph is not strongly connected.
pub fn is_reducible(family: &MatrixFamily) -> Result<Reducibility> {
    family.require_nonnegative()?;
    let comps = components_topological(family);
    if comps.len() > 1 {
        // a source component receives no edges from outside
        Ok(Reducibility {
            reducible: true,
            invariant_set: Some(comps[0].clone()),
        })
    } else {
        Ok(Reducibility {
            reducible: false,
            invariant_set: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOrder {
    /// `permutation[new] = old`; see [`MatrixFamily::permuted`].
    pub permutation: Vec<usize>,
    /// Diagonal blocks, as sets of original indices, in block order.
    pub blocks: Vec<Vec<usize>>,
}

impl BlockOrder {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Simultaneous block upper-triangular form with irreducible diagonal
/// blocks: the condensation of the union digraph in topological order.
pub fn block_triangularize(family: &MatrixFamily) -> Result<BlockOrder> {
    family.require_nonnegative()?;
    let blocks = components_topological(family);
    let permutation = blocks.iter().flatten().copied().collect();
    Ok(BlockOrder {
        permutation,
        blocks,
    })
}

/// The restriction of `family` to the coordinates of one diagonal block.
pub fn restrict_to_block(family: &MatrixFamily, block: &[usize]) -> Result<MatrixFamily> {
    let n = block.len();
    let mats = family
        .matrices()
        .iter()
        .map(|a| nalgebra::DMatrix::from_fn(n, n, |i, j| a[(block[i], block[j])]))
        .collect();
    MatrixFamily::new(mats, Some(family.probs().to_vec()))
}

/// A partition `Omega_1..Omega_r` of the coordinates on which every matrix
/// acts as a permutation of the classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionStructure {
    pub classes: Vec<Vec<usize>>,
    /// `perms[j][l]` is the class that matrix `j` maps class `l` into.
    pub perms: Vec<Vec<usize>>,
}

impl PartitionStructure {
    /// The single-class partition of `0..dim` for `m` matrices.
    pub fn trivial(dim: usize, m: usize) -> Self {
        Self {
            classes: vec![(0..dim).collect()],
            perms: vec![vec![0]; m],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class index of every coordinate. Fails unless the classes are
    /// nonempty, disjoint and cover `0..dim`.
    pub fn class_map(&self, dim: usize) -> Result<Vec<usize>> {
        let mut owner = vec![usize::MAX; dim];
        for (l, class) in self.classes.iter().enumerate() {
            if class.is_empty() {
                return Err(Error::PartitionMismatch(format!("class {l} is empty")));
            }
            for &i in class {
                if i >= dim {
                    return Err(Error::PartitionMismatch(format!("index {i} out of range")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::PartitionMismatch(format!("index {i} appears twice")));
                }
                owner[i] = l;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::PartitionMismatch(format!(
                "index {i} is not covered"
            )));
        }
        Ok(owner)
    }

    /// Structural soundness: every nonzero column in class `l` of matrix `j`
    /// has its row support inside class `perms[j][l]`, and each `perms[j]`
    /// is a permutation.
    pub fn check_against(&self, family: &MatrixFamily) -> Result<()> {
        let d = family.dim();
        let owner = self.class_map(d)?;
        let r = self.classes.len();
        if self.perms.len() != family.len() {
            return Err(Error::PartitionMismatch(format!(
                "{} class permutations for {} matrices",
                self.perms.len(),
                family.len()
            )));
        }
        for (j, (a, sigma)) in family.matrices().iter().zip(&self.perms).enumerate() {
            let mut hit = vec![false; r];
            if sigma.len() != r
                || sigma
                    .iter()
                    .any(|&t| t >= r || std::mem::replace(&mut hit[t], true))
            {
                return Err(Error::PartitionMismatch(format!(
                    "class map of matrix {j} is not a permutation"
                )));
            }
            for (l, class) in self.classes.iter().enumerate() {
                for &c in class {
                    for i in 0..d {
                        if a[(i, c)] != 0.0 && owner[i] != sigma[l] {
                            return Err(Error::PartitionMismatch(format!(
                                "matrix {j} maps coordinate {c} (class {l}) to {i}, outside class {}",
                                sigma[l]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Outcome of the positive-product dichotomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Positivity {
    /// The product along `word` (first letter acts first) is entrywise positive.
    PositiveProduct {
        word: Vec<usize>,
    },
    Partition(PartitionStructure),
}

/// Square boolean pattern stored as bit rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Pattern {
    d: usize,
    rows: Vec<u64>,
}

impl Pattern {
    fn words(d: usize) -> usize {
        d.div_ceil(64)
    }

    fn of(a: &nalgebra::DMatrix<f64>) -> Self {
        let d = a.nrows();
        let w = Self::words(d);
        let mut rows = vec![0u64; d * w];
        for i in 0..d {
            for j in 0..d {
                if a[(i, j)] != 0.0 {
                    rows[i * w + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self { d, rows }
    }

    fn get(&self, i: usize, j: usize) -> bool {
        let w = Self::words(self.d);
        self.rows[i * w + j / 64] >> (j % 64) & 1 == 1
    }

    /// Pattern of `self * rhs`.
    fn mul(&self, rhs: &Pattern) -> Pattern {
        let d = self.d;
        let w = Self::words(d);
        let mut rows = vec![0u64; d * w];
        for i in 0..d {
            for l in 0..d {
                if self.get(i, l) {
                    for t in 0..w {
                        rows[i * w + t] |= rhs.rows[l * w + t];
                    }
                }
            }
        }
        Pattern { d, rows }
    }

    fn is_full(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| self.get(i, j)))
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

/// Finest partition such that every matrix maps each class into a single
/// class. Classes are sorted by their smallest element.
fn finest_class_partition(family: &MatrixFamily) -> Vec<Vec<usize>> {
    let d = family.dim();
    let mut uf = UnionFind((0..d).collect());
    loop {
        let mut changed = false;
        for a in family.matrices() {
            // anchor[root of column class] = a row reached from that class
            let mut anchor: Vec<Option<usize>> = vec![None; d];
            for c in 0..d {
                let rc = uf.find(c);
                for i in 0..d {
                    if a[(i, c)] != 0.0 {
                        match anchor[rc] {
                            None => anchor[rc] = Some(i),
                            Some(first) => changed |= uf.union(first, i),
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[r]].push(i);
    }
    classes
}

/// Decides whether the family has an entrywise positive product or acts as
/// a permutation on a partition of the coordinates (r >= 2).
///
/// Requires a nonnegative, irreducible family without zero rows or columns.
/// The partition returned is the finest one every matrix maps class-to-class;
/// when it has a single class, the shortest positive word is found by
/// breadth-first closure over product patterns. Exploring more than
/// `max_pattern_states` distinct patterns yields [`Error::Undecided`].
pub fn positive_product_or_partition(
    family: &MatrixFamily,
    max_pattern_states: usize,
) -> Result<Positivity> {
    let cond = check_condition_b(family)?;
    if !cond.holds {
        return Err(Error::Precondition(
            "matrices must have no zero rows and no zero columns".into(),
        ));
    }
    if is_reducible(family)?.reducible {
        return Err(Error::Precondition("family must be irreducible".into()));
    }

    let classes = finest_class_partition(family);
    if classes.len() >= 2 {
        let d = family.dim();
        let mut owner = vec![0; d];
        for (l, class) in classes.iter().enumerate() {
            for &i in class {
                owner[i] = l;
            }
        }
        let perms = family
            .matrices()
            .iter()
            .map(|a| {
                classes
                    .iter()
                    .map(|class| {
                        let c = class[0];
                        let i = (0..d).find(|&i| a[(i, c)] != 0.0).expect("no zero columns");
                        owner[i]
                    })
                    .collect()
            })
            .collect();
        let partition = PartitionStructure { classes, perms };
        partition
            .check_against(family)
            .map_err(|e| Error::Precondition(format!("class map is not a permutation: {e}")))?;
        return Ok(Positivity::Partition(partition));
    }

    let gens: Vec<Pattern> = family.matrices().iter().map(Pattern::of).collect();
    let mut seen: HashSet<Pattern> = HashSet::new();
    let mut queue: VecDeque<(Pattern, Vec<usize>)> = VecDeque::new();
    for (j, g) in gens.iter().enumerate() {
        if seen.insert(g.clone()) {
            queue.push_back((g.clone(), vec![j]));
        }
    }
    while let Some((pat, word)) = queue.pop_front() {
        if pat.is_full() {
            return Ok(Positivity::PositiveProduct { word });
        }
        for (j, g) in gens.iter().enumerate() {
            let next = g.mul(&pat);
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= max_pattern_states {
                return Err(Error::Undecided {
                    budget: max_pattern_states,
                });
            }
            seen.insert(next.clone());
            let mut w = word.clone();
            w.push(j);
            queue.push_back((next, w));
        }
    }
    Err(Error::Precondition(
        "pattern closure has no positive product and no class partition".into(),
    ))
}

/// Outcome of the dichotomy in a [`StructureReport`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum PositivityStatus {
    PositiveProduct { word: Vec<usize> },
    Partition(PartitionStructure),
    Undecided { budget: usize },
}

impl From<Positivity> for PositivityStatus {
    fn from(p: Positivity) -> Self {
        match p {
            Positivity::PositiveProduct { word } => Self::PositiveProduct { word },
            Positivity::Partition(s) => Self::Partition(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub has_zero_row: Vec<bool>,
    pub has_zero_col: Vec<bool>,
    pub condition_b: bool,
    pub reducible: bool,
    /// Present iff reducible.
    pub invariant_set: Option<Vec<usize>>,
    /// Present iff reducible.
    pub block_order: Option<BlockOrder>,
    /// Present iff irreducible and condition (b) holds.
    pub positivity: Option<PositivityStatus>,
}

/// Full classification of a nonnegative family.
pub fn analyze(family: &MatrixFamily, max_pattern_states: usize) -> Result<StructureReport> {
    let cond = check_condition_b(family)?;
    let red = is_reducible(family)?;
    let block_order = if red.reducible {
        Some(block_triangularize(family)?)
    } else {
        None
    };
    let positivity = if !red.reducible && cond.holds {
        match positive_product_or_partition(family, max_pattern_states) {
            Ok(p) => Some(p.into()),
            Err(Error::Undecided { budget }) => Some(PositivityStatus::Undecided { budget }),
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(StructureReport {
        has_zero_row: cond.has_zero_row,
        has_zero_col: cond.has_zero_col,
        condition_b: cond.holds,
        reducible: red.reducible,
        invariant_set: red.invariant_set,
        block_order,
        positivity,
    })
}
