//! Sparse chains: sorted lists of `(CellId, coefficient)` with no zero entries.

use crate::field::Field;

/// Opaque cell identifier. Allocated in strictly increasing order and never
/// reused within a run.
pub type CellId = u64;

/// A homogeneous chain. Terms are sorted by cell id and carry nonzero
/// coefficients in the ambient field.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Chain {
    dim: usize,
    terms: Vec<(CellId, u32)>,
}

impl Chain {
    pub fn zero(dim: usize) -> Self {
        Chain { dim, terms: Vec::new() }
    }

    pub fn unit(dim: usize, id: CellId) -> Self {
        Chain { dim, terms: vec![(id, 1)] }
    }

    /// Builds a chain from arbitrary terms, combining duplicates and dropping
    /// zeros. Coefficients must already be reduced residues.
    pub fn from_terms<I>(field: &Field, dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (CellId, u32)>,
    {
        let mut v: Vec<(CellId, u32)> = terms.into_iter().collect();
        v.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(CellId, u32)> = Vec::with_capacity(v.len());
        for (id, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == id => last.1 = field.add(last.1, c),
                _ => out.push((id, c % field.characteristic())),
            }
        }
        out.retain(|t| t.1 != 0);
        Chain { dim, terms: out }
    }

    /// Wraps terms that are already sorted, deduplicated and nonzero.
    pub fn from_sorted(dim: usize, terms: Vec<(CellId, u32)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(terms.iter().all(|t| t.1 != 0));
        Chain { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(CellId, u32)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(CellId, u32)> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, u32)> + '_ {
        self.terms.iter().copied()
    }

    pub fn coeff(&self, id: CellId) -> u32 {
        match self.terms.binary_search_by_key(&id, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0,
        }
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.terms.binary_search_by_key(&id, |t| t.0).is_ok()
    }

    /// Largest cell id in the support.
    pub fn lead(&self) -> Option<CellId> {
        self.terms.last().map(|t| t.0)
    }

    pub fn scale(&mut self, field: &Field, a: u32) {
        if a == 0 {
            self.terms.clear();
            return;
        }
        for t in &mut self.terms {
            t.1 = field.mul(t.1, a);
        }
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, field: &Field, a: u32, other: &Chain) {
        self.add_scaled_tracked(field, a, other, &mut |_, _| {});
    }

    /// `self += a * other`, reporting every support change through
    /// `on_change(id, now_present)`.
    pub fn add_scaled_tracked<F>(&mut self, field: &Field, a: u32, other: &Chain, on_change: &mut F)
    where
        F: FnMut(CellId, bool),
    {
        if a == 0 || other.terms.is_empty() {
            return;
        }
        let old = std::mem::take(&mut self.terms);
        let mut out = Vec::with_capacity(old.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < old.len() || j < other.terms.len() {
            if j == other.terms.len() || (i < old.len() && old[i].0 < other.terms[j].0) {
                out.push(old[i]);
                i += 1;
            } else if i == old.len() || other.terms[j].0 < old[i].0 {
                let (id, c) = other.terms[j];
                out.push((id, field.mul(a, c)));
                on_change(id, true);
                j += 1;
            } else {
                let (id, c) = old[i];
                let v = field.add(c, field.mul(a, other.terms[j].1));
                if v == 0 {
                    on_change(id, false);
                } else {
                    out.push((id, v));
                }
                i += 1;
                j += 1;
            }
        }
        self.terms = out;
    }

    /// Removes the term for `id`, returning its coefficient.
    pub fn remove(&mut self, id: CellId) -> u32 {
        match self.terms.binary_search_by_key(&id, |t| t.0) {
            Ok(i) => self.terms.remove(i).1,
            Err(_) => 0,
        }
    }

    /// Sets the coefficient of `id` (removing it when `c == 0`).
    pub fn set(&mut self, id: CellId, c: u32) {
        match self.terms.binary_search_by_key(&id, |t| t.0) {
            Ok(i) => {
                if c == 0 {
                    self.terms.remove(i);
                } else {
                    self.terms[i].1 = c;
                }
            }
            Err(i) => {
                if c != 0 {
                    self.terms.insert(i, (id, c));
                }
            }
        }
    }
}
