//! Exact expectations over the product ensemble `A^k`.
//!
//! All `m^k` products are enumerated by a depth-first walk that keeps one
//! state per level, so memory is `O(k)` states whatever the ensemble size.
//! Sums are accumulated bottom-up in the tree, `node = sum_j p_j * child_j`,
//! in lexicographic word order. The result is deterministic and does not
//! depend on the caller.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;

/// Default cap on the number of enumerated products.
pub const DEFAULT_LEAF_CAP: u64 = 1 << 24;

/// How a leaf state is propagated from the root down a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `y -> A_j y`; leaves hold `B x`.
    Forward,
    /// `w -> A_j^T w`; leaves hold `B^T v` (up to word reversal, which
    /// leaves the i.i.d. ensemble unchanged).
    Transpose,
}

/// Propagation mode for [`expect_over_products`].
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    Forward(DVector<f64>),
    Transpose(DVector<f64>),
    Full,
}

/// The state handed to a reducer at a leaf.
#[derive(Debug, Clone, Copy)]
pub enum LeafState<'s> {
    Vector(&'s DVector<f64>),
    Matrix(&'s DMatrix<f64>),
}

/// Values that can be summed with weights in the enumeration tree.
pub trait Accumulate: Sized {
    fn scale(&mut self, w: f64);
    fn add_scaled(&mut self, w: f64, other: &Self);
}

impl Accumulate for f64 {
    fn scale(&mut self, w: f64) {
        *self *= w;
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += w * other;
    }
}

impl Accumulate for Vec<f64> {
    fn scale(&mut self, w: f64) {
        self.iter_mut().for_each(|x| *x *= w);
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
    }
}

impl Accumulate for DVector<f64> {
    fn scale(&mut self, w: f64) {
        *self *= w;
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        self.axpy(w, other, 1.0);
    }
}

impl<A: Accumulate, B: Accumulate> Accumulate for (A, B) {
    fn scale(&mut self, w: f64) {
        self.0.scale(w);
        self.1.scale(w);
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        self.0.add_scaled(w, &other.0);
        self.1.add_scaled(w, &other.1);
    }
}

/// The ensemble `A^k` of a family, checked against a leaf cap.
#[derive(Debug, Clone, Copy)]
pub struct Ensemble<'a> {
    family: &'a MatrixFamily,
    k: usize,
}

impl<'a> Ensemble<'a> {
    pub fn new(family: &'a MatrixFamily, k: usize) -> Result<Self> {
        Self::with_cap(family, k, DEFAULT_LEAF_CAP)
    }

    pub fn with_cap(family: &'a MatrixFamily, k: usize, cap: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "product length k must be >= 1".into(),
            ));
        }
        let leaves = leaf_count(family.len(), k);
        if leaves > cap as u128 {
            return Err(Error::EnsembleTooLarge { k, leaves, cap });
        }
        Ok(Self { family, k })
    }

    pub fn family(&self) -> &'a MatrixFamily {
        self.family
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn leaves(&self) -> u128 {
        leaf_count(self.family.len(), self.k)
    }

    /// `sum_B p_B * leaf(state_B)` for vector propagation from `start`.
    pub fn reduce_vectors<R, F>(&self, start: &DVector<f64>, dir: Direction, leaf: &mut F) -> R
    where
        R: Accumulate,
        F: FnMut(&DVector<f64>) -> R,
    {
        self.reduce_vec_rec(0, start, dir, leaf)
    }

    fn reduce_vec_rec<R, F>(
        &self,
        depth: usize,
        state: &DVector<f64>,
        dir: Direction,
        leaf: &mut F,
    ) -> R
    where
        R: Accumulate,
        F: FnMut(&DVector<f64>) -> R,
    {
        if depth == self.k {
            return leaf(state);
        }
        let mut acc: Option<R> = None;
        for (a, &p) in self.family.matrices().iter().zip(self.family.probs()) {
            let next = step_vector(a, state, dir);
            let child = self.reduce_vec_rec(depth + 1, &next, dir, leaf);
            match acc.as_mut() {
                None => {
                    let mut c = child;
                    c.scale(p);
                    acc = Some(c);
                }
                Some(s) => s.add_scaled(p, &child),
            }
        }
        acc.expect("family is nonempty")
    }

    /// `sum_B p_B * leaf(B)` over full products `B = A_{d_k} .. A_{d_1}`.
    pub fn reduce_products<R, F>(&self, leaf: &mut F) -> R
    where
        R: Accumulate,
        F: FnMut(&DMatrix<f64>) -> R,
    {
        let id = DMatrix::identity(self.family.dim(), self.family.dim());
        self.reduce_mat_rec(0, &id, leaf)
    }

    fn reduce_mat_rec<R, F>(&self, depth: usize, state: &DMatrix<f64>, leaf: &mut F) -> R
    where
        R: Accumulate,
        F: FnMut(&DMatrix<f64>) -> R,
    {
        if depth == self.k {
            return leaf(state);
        }
        let mut acc: Option<R> = None;
        for (a, &p) in self.family.matrices().iter().zip(self.family.probs()) {
            let next = a * state;
            let child = self.reduce_mat_rec(depth + 1, &next, leaf);
            match acc.as_mut() {
                None => {
                    let mut c = child;
                    c.scale(p);
                    acc = Some(c);
                }
                Some(s) => s.add_scaled(p, &child),
            }
        }
        acc.expect("family is nonempty")
    }

    /// Calls `f(word, p_B, B)` for every product in lexicographic word order.
    pub fn visit_products<F>(&self, f: &mut F)
    where
        F: FnMut(&[usize], f64, &DMatrix<f64>),
    {
        let id = DMatrix::identity(self.family.dim(), self.family.dim());
        let mut word = Vec::with_capacity(self.k);
        self.visit_rec(&id, 1.0, &mut word, f);
    }

    fn visit_rec<F>(&self, state: &DMatrix<f64>, prob: f64, word: &mut Vec<usize>, f: &mut F)
    where
        F: FnMut(&[usize], f64, &DMatrix<f64>),
    {
        if word.len() == self.k {
            f(word, prob, state);
            return;
        }
        for (j, (a, &p)) in self
            .family
            .matrices()
            .iter()
            .zip(self.family.probs())
            .enumerate()
        {
            word.push(j);
            self.visit_rec(&(a * state), prob * p, word, f);
            word.pop();
        }
    }

    /// Calls `f(p_B, state_B)` for every leaf of the vector tree, in
    /// lexicographic word order.
    pub fn visit_vectors<F>(&self, start: &DVector<f64>, dir: Direction, f: &mut F)
    where
        F: FnMut(f64, &DVector<f64>),
    {
        self.visit_vec_rec(0, start, 1.0, dir, f);
    }

    fn visit_vec_rec<F>(
        &self,
        depth: usize,
        state: &DVector<f64>,
        prob: f64,
        dir: Direction,
        f: &mut F,
    ) where
        F: FnMut(f64, &DVector<f64>),
    {
        if depth == self.k {
            f(prob, state);
            return;
        }
        for (a, &p) in self.family.matrices().iter().zip(self.family.probs()) {
            self.visit_vec_rec(depth + 1, &step_vector(a, state, dir), prob * p, dir, f);
        }
    }

    /// Reverse-mode pass through the vector tree.
    ///
    /// `leaf(state)` returns `(value, d value / d state)`, where `value` may
    /// carry extra accumulated data. The result is
    /// `(sum_B p_B value_B, sum_B p_B * d value_B / d start)`.
    pub fn backprop_vectors<R, F>(
        &self,
        start: &DVector<f64>,
        dir: Direction,
        leaf: &mut F,
    ) -> (R, DVector<f64>)
    where
        R: Accumulate,
        F: FnMut(&DVector<f64>) -> (R, DVector<f64>),
    {
        self.backprop_rec(0, start, dir, leaf)
    }

    fn backprop_rec<R, F>(
        &self,
        depth: usize,
        state: &DVector<f64>,
        dir: Direction,
        leaf: &mut F,
    ) -> (R, DVector<f64>)
    where
        R: Accumulate,
        F: FnMut(&DVector<f64>) -> (R, DVector<f64>),
    {
        if depth == self.k {
            return leaf(state);
        }
        let mut value: Option<R> = None;
        let mut adj = DVector::zeros(state.len());
        for (a, &p) in self.family.matrices().iter().zip(self.family.probs()) {
            let next = step_vector(a, state, dir);
            let (v, g) = self.backprop_rec(depth + 1, &next, dir, leaf);
            match value.as_mut() {
                None => {
                    let mut c = v;
                    c.scale(p);
                    value = Some(c);
                }
                Some(s) => s.add_scaled(p, &v),
            }
            // adjoint of the step: Forward y' = A y => A^T g; Transpose => A g
            match dir {
                Direction::Forward => adj.gemv_tr(p, a, &g, 1.0),
                Direction::Transpose => adj.gemv(p, a, &g, 1.0),
            }
        }
        (value.expect("family is nonempty"), adj)
    }
}

fn step_vector(a: &DMatrix<f64>, y: &DVector<f64>, dir: Direction) -> DVector<f64> {
    match dir {
        Direction::Forward => a * y,
        Direction::Transpose => a.tr_mul(y),
    }
}

pub(crate) fn leaf_count(m: usize, k: usize) -> u128 {
    let mut n: u128 = 1;
    for _ in 0..k {
        n = n.saturating_mul(m as u128);
    }
    n
}

/// `sum_{B in A^k} p_B * reducer(leaf state)`, by depth-first recursion.
///
/// Fails with [`Error::EnsembleTooLarge`] when `m^k` exceeds
/// [`DEFAULT_LEAF_CAP`]; nothing is truncated.
pub fn expect_over_products<F>(
    family: &MatrixFamily,
    k: usize,
    mode: &Propagation,
    reducer: F,
) -> Result<f64>
where
    F: Fn(LeafState<'_>) -> f64,
{
    let ens = Ensemble::new(family, k)?;
    let check_start = |x: &DVector<f64>, strict: bool| -> Result<()> {
        if x.len() != family.dim() {
            return Err(Error::InvalidParameter(format!(
                "start vector has length {}, expected {}",
                x.len(),
                family.dim()
            )));
        }
        let ok = if strict {
            x.iter().all(|&v| v > 0.0 && v.is_finite())
        } else {
            x.iter().all(|&v| v >= 0.0 && v.is_finite()) && x.iter().any(|&v| v > 0.0)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "start vector must be positive".into(),
            ))
        }
    };
    let value = match mode {
        Propagation::Forward(x) => {
            check_start(x, true)?;
            ens.reduce_vectors(x, Direction::Forward, &mut |y| {
                reducer(LeafState::Vector(y))
            })
        }
        Propagation::Transpose(v) => {
            check_start(v, false)?;
            ens.reduce_vectors(v, Direction::Transpose, &mut |w| {
                reducer(LeafState::Vector(w))
            })
        }
        Propagation::Full => ens.reduce_products(&mut |b| reducer(LeafState::Matrix(b))),
    };
    Ok(value)
}
