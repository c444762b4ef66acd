//! Sliding window over the latest `m + 1` iterates.
//!
//! Besides the stored `(x, g, f)` triples the window keeps the Gram matrix of
//! pairwise residual inner products. A push costs one inner product per stored
//! entry, `O(mn)`, after which the normal equations of the coefficient problem
//! can be assembled in `O(m^2)` without touching the length-`n` vectors.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Entry {
    pub k: usize,
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub f: DVector<f64>,
    pub f_norm: f64,
}

#[derive(Debug, Clone)]
pub struct HistoryWindow {
    capacity: usize,
    dim: usize,
    slots: Vec<Option<Entry>>,
    /// Occupied slots, oldest first.
    order: VecDeque<usize>,
    /// Indexed by slot, only the occupied block is meaningful.
    gram: DMatrix<f64>,
}

/// The ordering `(k_0, k_1, ..., k_m)` of the stored iterates.
///
/// `k_0` is the newest iterate among those with the smallest residual norm;
/// the rest follow in decreasing iteration index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pivot: usize,
    rest: Vec<usize>,
    pivot_slot: usize,
    rest_slots: Vec<usize>,
}

impl Permutation {
    /// Raw iteration index of the pivot.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    /// Raw iteration indices of the remaining entries.
    pub fn rest(&self) -> &[usize] {
        &self.rest
    }

    /// Number of coefficients, `m̂` = window size - 1.
    pub fn m(&self) -> usize {
        self.rest.len()
    }
}

impl HistoryWindow {
    /// A window holding at most `capacity` iterates (that is, `m + 1`).
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be positive");
        Self {
            capacity,
            dim,
            slots: vec![None; capacity],
            order: VecDeque::with_capacity(capacity),
            gram: DMatrix::zeros(capacity, capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Entries oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &Entry> + '_ {
        self.order.iter().map(move |&s| self.slot(s))
    }

    /// Looks up an entry by its raw iteration index.
    pub fn get(&self, k: usize) -> Option<&Entry> {
        self.entries().find(|e| e.k == k)
    }

    pub fn newest(&self) -> Option<&Entry> {
        self.order.back().map(|&s| self.slot(s))
    }

    /// Largest residual norm over the window.
    pub fn max_norm(&self) -> f64 {
        self.entries().map(|e| e.f_norm).fold(0.0, f64::max)
    }

    /// The Gram matrix of the stored residuals, rows ordered oldest first.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.order.len();
        DMatrix::from_fn(n, n, |i, j| self.gram[(self.order[i], self.order[j])])
    }

    fn slot(&self, s: usize) -> &Entry {
        self.slots[s].as_ref().expect("occupied slot")
    }

    pub fn push(
        &mut self,
        k: usize,
        x: DVector<f64>,
        g: DVector<f64>,
        f: DVector<f64>,
    ) -> Result<()> {
        for v in [&x, &g, &f] {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
        }
        if let Some(newest) = self.newest() {
            if k <= newest.k {
                return Err(Error::NonMonotoneIndex {
                    newest: newest.k,
                    got: k,
                });
            }
        }

        let slot = if self.order.len() == self.capacity {
            let oldest = self.order.pop_front().expect("full window");
            self.slots[oldest] = None;
            oldest
        } else {
            (0..self.capacity)
                .find(|&s| self.slots[s].is_none())
                .expect("free slot")
        };

        for &other in &self.order {
            let ip = f.dot(&self.slot(other).f);
            self.gram[(slot, other)] = ip;
            self.gram[(other, slot)] = ip;
        }
        let sq = f.dot(&f);
        self.gram[(slot, slot)] = sq;

        self.slots[slot] = Some(Entry {
            k,
            x,
            g,
            f,
            f_norm: sq.sqrt(),
        });
        self.order.push_back(slot);
        Ok(())
    }

    /// Builds the ordering with the smallest-residual pivot.
    pub fn permute(&self) -> Permutation {
        assert!(!self.is_empty(), "permute on an empty window");
        // Newest first, so a strict comparison keeps the largest index among ties.
        let pivot_slot = self
            .order
            .iter()
            .rev()
            .copied()
            .reduce(|best, s| {
                if self.slot(s).f_norm < self.slot(best).f_norm {
                    s
                } else {
                    best
                }
            })
            .expect("non-empty");
        self.permutation_with_slot(pivot_slot)
    }

    /// Ordering with an arbitrary pivot, for comparing pivot choices.
    pub fn permute_with_pivot(&self, k: usize) -> Option<Permutation> {
        let slot = self.order.iter().copied().find(|&s| self.slot(s).k == k)?;
        Some(self.permutation_with_slot(slot))
    }

    fn permutation_with_slot(&self, pivot_slot: usize) -> Permutation {
        let rest_slots: Vec<usize> = self
            .order
            .iter()
            .rev()
            .copied()
            .filter(|&s| s != pivot_slot)
            .collect();
        Permutation {
            pivot: self.slot(pivot_slot).k,
            rest: rest_slots.iter().map(|&s| self.slot(s).k).collect(),
            pivot_slot,
            rest_slots,
        }
    }

    pub fn pivot_entry(&self, p: &Permutation) -> &Entry {
        self.slot(p.pivot_slot)
    }

    pub(crate) fn rest_entries<'a>(
        &'a self,
        p: &'a Permutation,
    ) -> impl Iterator<Item = &'a Entry> + 'a {
        p.rest_slots.iter().map(move |&s| self.slot(s))
    }

    /// Returns `(J^T J, J^T f^{k0}, ||f^{k0}||^2)` for
    /// `J = [f^{k1} - f^{k0}, ..., f^{km} - f^{k0}]`, from cached inner products only.
    pub fn difference_gram(&self, p: &Permutation) -> (DMatrix<f64>, DVector<f64>, f64) {
        let m = p.m();
        let z = p.pivot_slot;
        let g = &self.gram;
        let zz = g[(z, z)];
        let jtj = DMatrix::from_fn(m, m, |i, j| {
            let (a, b) = (p.rest_slots[i], p.rest_slots[j]);
            g[(a, b)] - g[(a, z)] - g[(z, b)] + zz
        });
        let jtf = DVector::from_fn(m, |i, _| g[(p.rest_slots[i], z)] - zz);
        (jtj, jtf, zz)
    }
}
