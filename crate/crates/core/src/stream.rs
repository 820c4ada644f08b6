//! Block streams, their decomposition into atomic Morse operations, and the
//! running Morse-reduced state.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::chain::{CellId, Chain};
use crate::complex::{Complex, ComplexError};
use crate::field::Field;
use crate::morse::{coreduce_cells, morse_boundary, morse_coboundary, CoreductionInput, Matching, MorseError, Role};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Morse(#[from] MorseError),
    #[error("matching of the block has a cycle in the Hasse diagram")]
    CyclicMatching,
    #[error("cell {0} has a cofacet outside the removed set")]
    NotRemovable(u64),
    #[error("cell key {0} is not in the complex")]
    UnknownKey(u64),
    #[error("cell key {0} is already in the complex")]
    DuplicateKey(u64),
    #[error("invalid atomic operation: {0}")]
    InvalidOp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// A cell of a forward block, referencing facets by user key. Coefficients
/// are integers, reduced into the field when the block is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSpec {
    pub key: u64,
    pub dim: usize,
    pub facets: Vec<(u64, i64)>,
}

/// One arrow of a zigzag filtration: a batch of insertions or removals.
/// `scale` is an optional filtration value used to annotate intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockOp {
    Forward { cells: Vec<CellSpec>, scale: Option<f64> },
    Backward { keys: Vec<u64>, scale: Option<f64> },
}

impl BlockOp {
    pub fn direction(&self) -> Direction {
        match self {
            BlockOp::Forward { .. } => Direction::Forward,
            BlockOp::Backward { .. } => Direction::Backward,
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match self {
            BlockOp::Forward { scale, .. } | BlockOp::Backward { scale, .. } => *scale,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockOp::Forward { cells, .. } => cells.len(),
            BlockOp::Backward { keys, .. } => keys.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A cell about to be inserted, with field-reduced facet coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewCell {
    pub key: u64,
    pub dim: usize,
    pub facets: Vec<(u64, u32)>,
}

impl NewCell {
    pub fn from_spec(field: &Field, spec: &CellSpec) -> Self {
        let mut acc: FxHashMap<u64, u32> = FxHashMap::default();
        for &(k, c) in &spec.facets {
            let e = acc.entry(k).or_insert(0);
            *e = field.add(*e, field.from_i64(c));
        }
        let mut facets: Vec<(u64, u32)> = acc.into_iter().filter(|t| t.1 != 0).collect();
        facets.sort_unstable();
        NewCell { key: spec.key, dim: spec.dim, facets }
    }
}

/// The elementary arrows of a zigzag Morse filtration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomicOp {
    InsertCritical(NewCell),
    /// Inserts `tau` then `sigma`, matched together.
    InsertPair(NewCell, NewCell),
    RemoveCritical(CellId),
    RemovePair { tau: CellId, sigma: CellId },
    /// Removes `sigma` while its partner `tau` stays in the complex.
    RemoveUnpaired { sigma: CellId, tau: CellId },
}

impl AtomicOp {
    /// Number of cells inserted or removed in the full complex.
    pub fn cell_count(&self) -> usize {
        match self {
            AtomicOp::InsertPair(..) | AtomicOp::RemovePair { .. } => 2,
            _ => 1,
        }
    }

    /// Whether the operation changes the set of critical cells.
    pub fn is_critical_event(&self) -> bool {
        !matches!(self, AtomicOp::InsertPair(..) | AtomicOp::RemovePair { .. })
    }
}

/// What the persistence kernel has to do after an atomic operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorseUpdate {
    Nothing,
    /// A critical cell appeared, with its Morse boundary.
    Insert { sigma: CellId, dim: usize, boundary: Chain },
    /// A critical cell disappeared.
    Remove { sigma: CellId },
    /// The pair `(tau, sigma)` was split and `sigma` then removed.
    /// `boundary_sigma` and `coboundary_tau` are computed in the Morse complex
    /// where both cells are critical; `incidence` is `⟨sigma, tau⟩`.
    Unpair { tau: CellId, sigma: CellId, boundary_sigma: Chain, coboundary_tau: Chain, incidence: u32 },
}

/// Matching for the cells of a forward block, keyed by user keys. Facets
/// outside the block count as already matched. With `morse == false` every
/// cell is critical.
pub fn block_matching(cells: &[NewCell], morse: bool) -> Matching {
    if !morse {
        let mut m = Matching::new();
        for c in cells {
            m.add_critical(c.key);
        }
        return m;
    }
    let input: Vec<CoreductionInput> = cells
        .iter()
        .map(|c| CoreductionInput { key: c.key, dim: c.dim, facets: c.facets.clone() })
        .collect();
    coreduce_cells(&input)
}

/// Orders the cells of a forward block so that facets come first and the
/// two cells of a pair are consecutive.
pub fn atomize_forward(cells: &[NewCell], m: &Matching) -> Result<Vec<AtomicOp>, StreamError> {
    let pos: FxHashMap<u64, usize> = cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
    if pos.len() != cells.len() {
        let mut seen = FxHashSet::default();
        let dup = cells.iter().find(|c| !seen.insert(c.key)).unwrap();
        return Err(StreamError::DuplicateKey(dup.key));
    }
    // unit = (lower cell, optional upper cell), as indices into `cells`
    let mut units: Vec<(usize, Option<usize>)> = Vec::new();
    let mut unit_of = vec![usize::MAX; cells.len()];
    for (i, c) in cells.iter().enumerate() {
        match m.role(c.key) {
            Some(Role::Critical) => {
                unit_of[i] = units.len();
                units.push((i, None));
            }
            Some(Role::Queue(s)) => {
                let j = *pos.get(&s).ok_or_else(|| StreamError::InvalidOp(format!("partner of {} missing", c.key)))?;
                unit_of[i] = units.len();
                unit_of[j] = units.len();
                units.push((i, Some(j)));
            }
            Some(Role::King(t)) => {
                if !pos.contains_key(&t) {
                    return Err(StreamError::InvalidOp(format!("partner of {} missing", c.key)));
                }
            }
            None => return Err(StreamError::InvalidOp(format!("cell {} has no role", c.key))),
        }
    }
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); units.len()];
    let mut indeg = vec![0usize; units.len()];
    for (u, &(a, b)) in units.iter().enumerate() {
        let mut deps: Vec<usize> = Vec::new();
        for i in std::iter::once(a).chain(b) {
            for &(f, _) in &cells[i].facets {
                if let Some(&j) = pos.get(&f) {
                    if unit_of[j] != u {
                        deps.push(unit_of[j]);
                    }
                }
            }
        }
        deps.sort_unstable();
        deps.dedup();
        for d in deps {
            succ[d].push(u);
            indeg[u] += 1;
        }
    }
    let prio = |u: usize| (cells[units[u].0].dim, cells[units[u].0].key, u);
    let mut heap: BinaryHeap<Reverse<(usize, u64, usize)>> =
        (0..units.len()).filter(|&u| indeg[u] == 0).map(|u| Reverse(prio(u))).collect();
    let mut ops = Vec::with_capacity(units.len());
    while let Some(Reverse((_, _, u))) = heap.pop() {
        let (a, b) = units[u];
        ops.push(match b {
            None => AtomicOp::InsertCritical(cells[a].clone()),
            Some(b) => AtomicOp::InsertPair(cells[a].clone(), cells[b].clone()),
        });
        for &v in &succ[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                heap.push(Reverse(prio(v)));
            }
        }
    }
    if ops.len() != units.len() {
        return Err(StreamError::CyclicMatching);
    }
    Ok(ops)
}

/// The full complex, its Morse matching, and the user-key bookkeeping.
#[derive(Debug, Clone)]
pub struct MorseState {
    cx: Complex,
    matching: Matching,
    ids: FxHashMap<u64, CellId>,
    keys: FxHashMap<CellId, u64>,
}

impl MorseState {
    pub fn new(field: Field, validate: bool) -> Self {
        let mut cx = Complex::new(field);
        cx.set_validation(validate);
        MorseState { cx, matching: Matching::new(), ids: FxHashMap::default(), keys: FxHashMap::default() }
    }

    pub fn complex(&self) -> &Complex {
        &self.cx
    }

    pub fn matching(&self) -> &Matching {
        &self.matching
    }

    pub fn field(&self) -> &Field {
        self.cx.field()
    }

    pub fn id_of(&self, key: u64) -> Option<CellId> {
        self.ids.get(&key).copied()
    }

    pub fn key_of(&self, id: CellId) -> Option<u64> {
        self.keys.get(&id).copied()
    }

    pub fn num_cells(&self) -> usize {
        self.cx.len()
    }

    pub fn num_critical(&self) -> usize {
        self.matching.num_critical()
    }

    fn insert(&mut self, cell: &NewCell) -> Result<CellId, StreamError> {
        if self.ids.contains_key(&cell.key) {
            return Err(StreamError::DuplicateKey(cell.key));
        }
        let mut terms = Vec::with_capacity(cell.facets.len());
        for &(k, c) in &cell.facets {
            let id = self.id_of(k).ok_or(StreamError::UnknownKey(k))?;
            terms.push((id, c));
        }
        let bd = Chain::from_terms(self.cx.field(), cell.dim.saturating_sub(1), terms);
        let id = self.cx.insert_cell(cell.dim, &bd)?;
        self.ids.insert(cell.key, id);
        self.keys.insert(id, cell.key);
        Ok(id)
    }

    fn remove(&mut self, id: CellId) -> Result<(), StreamError> {
        self.cx.remove_cell(id)?;
        self.matching.remove(id);
        if let Some(k) = self.keys.remove(&id) {
            self.ids.remove(&k);
        }
        Ok(())
    }

    fn require_maximal(&self, id: CellId) -> Result<(), StreamError> {
        if !self.cx.cofacets(id)?.is_empty() {
            return Err(StreamError::InvalidOp(format!("cell {id} is not maximal")));
        }
        Ok(())
    }

    fn require_pair(&self, tau: CellId, sigma: CellId) -> Result<(), StreamError> {
        if self.matching.role(tau) != Some(Role::Queue(sigma)) {
            return Err(StreamError::InvalidOp(format!("({tau},{sigma}) is not a Morse pair")));
        }
        Ok(())
    }

    /// Applies one atomic operation and reports the Morse-level change.
    pub fn apply_atomic(&mut self, op: &AtomicOp) -> Result<MorseUpdate, StreamError> {
        match op {
            AtomicOp::InsertCritical(cell) => {
                let id = self.insert(cell)?;
                self.matching.add_critical(id);
                let boundary = morse_boundary(&self.cx, &self.matching, id)?;
                Ok(MorseUpdate::Insert { sigma: id, dim: cell.dim, boundary })
            }
            AtomicOp::InsertPair(tau, sigma) => {
                if !sigma.facets.iter().any(|&(k, c)| k == tau.key && c != 0) {
                    return Err(StreamError::InvalidOp(format!("{} is not a facet of {}", tau.key, sigma.key)));
                }
                let t = self.insert(tau)?;
                let s = self.insert(sigma)?;
                self.matching.add_pair(t, s);
                Ok(MorseUpdate::Nothing)
            }
            AtomicOp::RemoveCritical(id) => {
                if !self.matching.is_critical(*id) {
                    return Err(StreamError::InvalidOp(format!("cell {id} is not critical")));
                }
                self.require_maximal(*id)?;
                self.remove(*id)?;
                Ok(MorseUpdate::Remove { sigma: *id })
            }
            AtomicOp::RemovePair { tau, sigma } => {
                self.require_pair(*tau, *sigma)?;
                self.require_maximal(*sigma)?;
                let cof = self.cx.cofacets(*tau)?;
                if cof.len() != 1 || cof[0].0 != *sigma {
                    return Err(StreamError::InvalidOp(format!("cell {tau} has cofacets besides {sigma}")));
                }
                self.remove(*sigma)?;
                self.remove(*tau)?;
                Ok(MorseUpdate::Nothing)
            }
            AtomicOp::RemoveUnpaired { sigma, tau } => {
                self.require_pair(*tau, *sigma)?;
                self.require_maximal(*sigma)?;
                let incidence = self.cx.incidence(*sigma, *tau);
                self.matching.unpair(*tau, *sigma);
                let boundary_sigma = morse_boundary(&self.cx, &self.matching, *sigma)?;
                let coboundary_tau = morse_coboundary(&self.cx, &self.matching, *tau)?;
                self.remove(*sigma)?;
                Ok(MorseUpdate::Unpair { tau: *tau, sigma: *sigma, boundary_sigma, coboundary_tau, incidence })
            }
        }
    }

    /// Matching and atomic decomposition of a forward block.
    pub fn forward_ops(&self, cells: &[CellSpec], morse: bool) -> Result<Vec<AtomicOp>, StreamError> {
        let field = *self.cx.field();
        let cells: Vec<NewCell> = cells.iter().map(|c| NewCell::from_spec(&field, c)).collect();
        for c in &cells {
            if self.ids.contains_key(&c.key) {
                return Err(StreamError::DuplicateKey(c.key));
            }
        }
        let m = block_matching(&cells, morse);
        atomize_forward(&cells, &m)
    }

    /// Atomic decomposition of a backward block given by user keys.
    pub fn backward_ops(&self, keys: &[u64]) -> Result<Vec<AtomicOp>, StreamError> {
        let mut ids = Vec::with_capacity(keys.len());
        for &k in keys {
            ids.push(self.id_of(k).ok_or(StreamError::UnknownKey(k))?);
        }
        atomize_backward(&ids, self)
    }
}

/// Orders the removal of `sigma_set` into atomic operations, each removing a
/// currently maximal cell. Cells matched inside the set go out as pairs,
/// cells matched across its border as unpaired removals. Among ready
/// candidates the highest dimension and then the lowest id goes first.
pub fn atomize_backward(sigma_set: &[CellId], state: &MorseState) -> Result<Vec<AtomicOp>, StreamError> {
    let cx = state.complex();
    let m = state.matching();
    let inside: FxHashSet<CellId> = sigma_set.iter().copied().collect();
    let mut remaining: FxHashMap<CellId, usize> = FxHashMap::default();
    for &id in &inside {
        let cof = cx.cofacets(id)?;
        for &(c, _) in cof {
            if !inside.contains(&c) {
                return Err(StreamError::NotRemovable(state.key_of(id).unwrap_or(id)));
            }
        }
        remaining.insert(id, cof.len());
    }
    let mut heap: BinaryHeap<(usize, Reverse<CellId>)> = BinaryHeap::new();
    for (&id, &r) in &remaining {
        if r == 0 {
            heap.push((cx.dim(id)?, Reverse(id)));
        }
    }
    let mut removed: FxHashSet<CellId> = FxHashSet::default();
    let mut ops = Vec::with_capacity(inside.len());

    let drop_cell = |x: CellId,
                     remaining: &mut FxHashMap<CellId, usize>,
                     heap: &mut BinaryHeap<(usize, Reverse<CellId>)>|
     -> Result<(), StreamError> {
        for &(f, _) in cx.facets(x)? {
            if let Some(r) = remaining.get_mut(&f) {
                *r -= 1;
                let d = cx.dim(f)?;
                if *r == 0 {
                    heap.push((d, Reverse(f)));
                } else if *r == 1 {
                    // a paired lower cell whose last cofacet is its partner
                    if let Some(Role::Queue(s)) = m.role(f) {
                        if remaining.get(&s) == Some(&0) {
                            heap.push((d + 1, Reverse(s)));
                        }
                    }
                }
            }
        }
        Ok(())
    };

    while let Some((_, Reverse(x))) = heap.pop() {
        if removed.contains(&x) || remaining.get(&x) != Some(&0) {
            continue;
        }
        match m.role(x) {
            Some(Role::Critical) => {
                ops.push(AtomicOp::RemoveCritical(x));
                removed.insert(x);
                drop_cell(x, &mut remaining, &mut heap)?;
            }
            Some(Role::King(t)) if inside.contains(&t) => {
                if remaining.get(&t) != Some(&1) {
                    continue;
                }
                ops.push(AtomicOp::RemovePair { tau: t, sigma: x });
                removed.insert(x);
                drop_cell(x, &mut remaining, &mut heap)?;
                removed.insert(t);
                drop_cell(t, &mut remaining, &mut heap)?;
            }
            Some(Role::King(t)) => {
                ops.push(AtomicOp::RemoveUnpaired { sigma: x, tau: t });
                removed.insert(x);
                drop_cell(x, &mut remaining, &mut heap)?;
            }
            // lower cells leave together with their partner
            Some(Role::Queue(_)) => {}
            None => return Err(StreamError::InvalidOp(format!("cell {x} has no role"))),
        }
    }
    if removed.len() != inside.len() {
        return Err(StreamError::CyclicMatching);
    }
    Ok(ops)
}
