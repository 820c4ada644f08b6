//! Zigzag persistence kernel over a homology matrix.
//!
//! The matrix holds one column per row (critical cell). Rows are ordered by
//! cell id, which is also an order in which every prefix is a subcomplex, and
//! the leading term of a column is its largest id. Columns are split into
//! cycles `F` (each carrying the birth of an alive interval), boundaries `G`,
//! and chains `H` whose boundary is their paired `G` column.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::chain::{CellId, Chain};
use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("boundary is inconsistent with the homology matrix: {0}")]
    InconsistentBoundary(String),
    #[error("row {0} is not in the homology matrix")]
    UnknownRow(CellId),
    #[error("row {0} is already in the homology matrix")]
    DuplicateRow(CellId),
    #[error("row {0} appears in a boundary column, so its cell is not maximal")]
    NotMaximal(CellId),
    #[error("paired incidence is zero")]
    ZeroPairIncidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    F,
    G,
    H,
}

/// Creation record of an interval. Intervals born at removals are older than
/// intervals born at insertions; among removal births the later one is
/// older, among insertion births the earlier one is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Birth {
    pub backward: bool,
    pub event: u64,
    pub block: usize,
}

impl Birth {
    fn age_key(&self) -> (u8, i128) {
        if self.backward {
            (0, -(self.event as i128))
        } else {
            (1, self.event as i128)
        }
    }

    /// Strictly older than `other`.
    pub fn older_than(&self, other: &Birth) -> bool {
        self.age_key() < other.age_key()
    }
}

/// Outcome of a single kernel operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Birth { dim: usize },
    Death { dim: usize, birth_block: usize },
}

/// A closed interval of block indices `[birth, death]` in which a class is
/// alive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockInterval {
    pub dim: usize,
    pub birth: usize,
    pub death: usize,
}

#[derive(Debug, Clone)]
struct Column {
    chain: Chain,
    kind: Kind,
    partner: usize,
    birth: Option<Birth>,
}

/// Operation counters, useful for checking locality of updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelStats {
    pub inserts: u64,
    pub removals: u64,
    pub unpairs: u64,
    /// Columns inspected by unpair updates.
    pub unpair_columns_touched: u64,
    /// Columns actually modified by unpair updates.
    pub unpair_columns_changed: u64,
}

#[derive(Debug, Clone)]
pub struct ZigzagKernel {
    field: Field,
    cols: Vec<Option<Column>>,
    free: Vec<usize>,
    pivot: FxHashMap<CellId, usize>,
    rows: FxHashMap<CellId, Vec<usize>>,
    row_dim: FxHashMap<CellId, usize>,
    max_row: Option<CellId>,
    event: u64,
    intervals: Vec<BlockInterval>,
    stats: KernelStats,
}

const NONE: usize = usize::MAX;

impl ZigzagKernel {
    pub fn new(field: Field) -> Self {
        ZigzagKernel {
            field,
            cols: Vec::new(),
            free: Vec::new(),
            pivot: FxHashMap::default(),
            rows: FxHashMap::default(),
            row_dim: FxHashMap::default(),
            max_row: None,
            event: 0,
            intervals: Vec::new(),
            stats: KernelStats::default(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.row_dim.len()
    }

    pub fn stats(&self) -> KernelStats {
        self.stats
    }

    /// Intervals completed so far.
    pub fn intervals(&self) -> &[BlockInterval] {
        &self.intervals
    }

    pub fn take_intervals(&mut self) -> Vec<BlockInterval> {
        std::mem::take(&mut self.intervals)
    }

    /// Number of `F` columns per dimension: the Betti numbers of the current
    /// complex.
    pub fn betti(&self) -> Vec<usize> {
        let mut b = Vec::new();
        for c in self.cols.iter().flatten() {
            if c.kind == Kind::F {
                let d = c.chain.dim();
                if b.len() <= d {
                    b.resize(d + 1, 0);
                }
                b[d] += 1;
            }
        }
        while b.last() == Some(&0) {
            b.pop();
        }
        b
    }

    fn col(&self, i: usize) -> &Column {
        self.cols[i].as_ref().expect("live column")
    }

    fn col_mut(&mut self, i: usize) -> &mut Column {
        self.cols[i].as_mut().expect("live column")
    }

    fn lead(&self, i: usize) -> CellId {
        self.col(i).chain.lead().expect("columns are nonzero")
    }

    fn row_add(rows: &mut FxHashMap<CellId, Vec<usize>>, id: CellId, col: usize) {
        rows.entry(id).or_default().push(col);
    }

    fn row_remove(rows: &mut FxHashMap<CellId, Vec<usize>>, id: CellId, col: usize) {
        if let Some(v) = rows.get_mut(&id) {
            if let Some(p) = v.iter().position(|&c| c == col) {
                v.swap_remove(p);
            }
        }
    }

    fn new_column(&mut self, chain: Chain, kind: Kind, birth: Option<Birth>) -> usize {
        let col = Column { chain, kind, partner: NONE, birth };
        let idx = match self.free.pop() {
            Some(i) => {
                self.cols[i] = Some(col);
                i
            }
            None => {
                self.cols.push(Some(col));
                self.cols.len() - 1
            }
        };
        let ids: Vec<CellId> = self.col(idx).chain.iter().map(|t| t.0).collect();
        for id in ids {
            Self::row_add(&mut self.rows, id, idx);
        }
        idx
    }

    fn drop_column(&mut self, idx: usize) -> Column {
        let col = self.cols[idx].take().expect("live column");
        for (id, _) in col.chain.iter() {
            Self::row_remove(&mut self.rows, id, idx);
        }
        self.free.push(idx);
        col
    }

    fn set_chain(&mut self, idx: usize, chain: Chain) {
        let old = std::mem::replace(&mut self.col_mut(idx).chain, chain);
        for (id, _) in old.iter() {
            Self::row_remove(&mut self.rows, id, idx);
        }
        let ids: Vec<CellId> = self.col(idx).chain.iter().map(|t| t.0).collect();
        for id in ids {
            Self::row_add(&mut self.rows, id, idx);
        }
    }

    /// `cols[target] += a * cols[source]`, keeping the row index current.
    fn add_col(&mut self, target: usize, a: u32, source: usize) {
        debug_assert_ne!(target, source);
        let field = self.field;
        let mut chain = std::mem::take(&mut self.col_mut(target).chain);
        let src = &self.cols[source].as_ref().expect("live column").chain;
        let rows = &mut self.rows;
        chain.add_scaled_tracked(&field, a, src, &mut |id, present| {
            if present {
                Self::row_add(rows, id, target);
            } else {
                Self::row_remove(rows, id, target);
            }
        });
        self.col_mut(target).chain = chain;
    }

    fn record_death(&mut self, dim: usize, birth: Birth, block: usize) {
        if birth.block < block {
            self.intervals.push(BlockInterval { dim, birth: birth.block, death: block - 1 });
        }
    }

    /// Inserts the critical cell `sigma` whose Morse boundary is `bd`.
    pub fn forward_insert(&mut self, sigma: CellId, dim: usize, bd: &Chain, block: usize) -> Result<Event, KernelError> {
        if self.row_dim.contains_key(&sigma) {
            return Err(KernelError::DuplicateRow(sigma));
        }
        if self.max_row.is_some_and(|m| sigma <= m) {
            return Err(KernelError::InconsistentBoundary(format!(
                "new row {sigma} does not come after existing rows"
            )));
        }
        let field = self.field;
        let mut r = bd.clone();
        let mut fcoef: Vec<(usize, u32)> = Vec::new();
        let mut gcoef: Vec<(usize, u32)> = Vec::new();
        while let Some(l) = r.lead() {
            let c = *self
                .pivot
                .get(&l)
                .ok_or_else(|| KernelError::InconsistentBoundary(format!("unknown row {l}")))?;
            let col = self.col(c);
            let a = field.div(r.coeff(l), col.chain.coeff(l));
            r.add_scaled(&field, field.neg(a), &col.chain);
            match col.kind {
                Kind::F => fcoef.push((c, a)),
                Kind::G => gcoef.push((c, a)),
                Kind::H => {
                    return Err(KernelError::InconsistentBoundary(format!(
                        "boundary of {sigma} is not a cycle"
                    )))
                }
            }
        }
        self.event += 1;
        self.stats.inserts += 1;
        let mut chain = Chain::unit(dim, sigma);
        for &(g, a) in &gcoef {
            let h = self.col(g).partner;
            chain.add_scaled(&field, field.neg(a), &self.col(h).chain);
        }
        self.row_dim.insert(sigma, dim);
        self.max_row = Some(sigma);

        if fcoef.is_empty() {
            let birth = Birth { backward: false, event: self.event, block };
            let idx = self.new_column(chain, Kind::F, Some(birth));
            self.pivot.insert(sigma, idx);
            return Ok(Event::Birth { dim });
        }

        // the youngest interval among the cycles hit by the boundary dies
        let fstar = fcoef
            .iter()
            .map(|&(f, _)| f)
            .max_by(|&a, &b| {
                let (ba, bb) = (self.col(a).birth.unwrap(), self.col(b).birth.unwrap());
                ba.age_key().cmp(&bb.age_key())
            })
            .unwrap();
        let dead = self.col(fstar).birth.unwrap();
        let mut z = Chain::zero(bd.dim());
        for &(f, a) in &fcoef {
            z.add_scaled(&field, a, &self.col(f).chain);
        }
        fcoef.sort_by_key(|&(f, _)| self.lead(f));
        let (fk, ak) = *fcoef.last().unwrap();

        if fk == fstar {
            self.set_chain(fstar, z);
        } else {
            let mut moving = self.col(fk).chain.clone();
            moving.add_scaled(&field, field.neg(field.inv(ak).unwrap()), &z);
            let mut moving_birth = self.col(fk).birth.unwrap();
            self.set_chain(fk, z);
            loop {
                let l = moving.lead().expect("moving chain keeps a term on the dying cycle");
                let q = self.pivot[&l];
                if q == fstar {
                    self.set_chain(fstar, moving);
                    self.col_mut(fstar).birth = Some(moving_birth);
                    break;
                }
                let qc = self.col(q);
                let qb = qc.birth.expect("F column");
                let t = field.div(moving.coeff(l), qc.chain.coeff(l));
                if qb.older_than(&moving_birth) {
                    moving.add_scaled(&field, field.neg(t), &qc.chain);
                } else {
                    let mut next = qc.chain.clone();
                    next.add_scaled(&field, field.neg(field.inv(t).unwrap()), &moving);
                    self.set_chain(q, moving);
                    self.col_mut(q).birth = Some(moving_birth);
                    moving = next;
                    moving_birth = qb;
                }
            }
        }
        let g = fk;
        {
            let gc = self.col_mut(g);
            gc.kind = Kind::G;
            gc.birth = None;
        }
        let h = self.new_column(chain, Kind::H, None);
        self.col_mut(h).partner = g;
        self.col_mut(g).partner = h;
        self.pivot.insert(sigma, h);
        self.record_death(dim - 1, dead, block);
        Ok(Event::Death { dim: dim - 1, birth_block: dead.block })
    }

    /// Removes the row `sigma`, whose cell must be maximal in the current
    /// complex.
    pub fn backward_remove(&mut self, sigma: CellId, block: usize) -> Result<Event, KernelError> {
        let owner = *self.pivot.get(&sigma).ok_or(KernelError::UnknownRow(sigma))?;
        let field = self.field;
        let mut others: Vec<usize> = self.rows.get(&sigma).cloned().unwrap_or_default();
        others.retain(|&c| c != owner);
        others.sort_by_key(|&c| self.lead(c));
        self.event += 1;
        self.stats.removals += 1;
        let mut cur = owner;
        for nxt in others {
            let b = self.lead(nxt);
            let x = self.col(nxt).chain.coeff(sigma);
            let y = self.col(cur).chain.coeff(sigma);
            let (kc, kn) = (self.col(cur).kind, self.col(nxt).kind);
            // true: nxt absorbs cur; false: cur absorbs nxt and takes its slot
            let keep_cur = match (kc, kn) {
                (Kind::F, Kind::F) => {
                    let (bc, bn) = (self.col(cur).birth.unwrap(), self.col(nxt).birth.unwrap());
                    bc.older_than(&bn)
                }
                (Kind::F, Kind::H) => true,
                (Kind::H, Kind::F) => false,
                (Kind::H, Kind::H) => {
                    let (g1, g2) = (self.col(cur).partner, self.col(nxt).partner);
                    if self.lead(g1) < self.lead(g2) {
                        self.add_col(g2, field.neg(field.div(x, y)), g1);
                        true
                    } else {
                        self.add_col(g1, field.neg(field.div(y, x)), g2);
                        false
                    }
                }
                _ => return Err(KernelError::NotMaximal(sigma)),
            };
            if keep_cur {
                self.add_col(nxt, field.neg(field.div(x, y)), cur);
            } else {
                self.add_col(cur, field.neg(field.div(y, x)), nxt);
                self.pivot.insert(b, cur);
                cur = nxt;
            }
        }
        let dim = self.row_dim.remove(&sigma).expect("row present");
        self.pivot.remove(&sigma);
        let col = self.drop_column(cur);
        self.rows.remove(&sigma);
        match col.kind {
            Kind::F => {
                let birth = col.birth.unwrap();
                self.record_death(dim, birth, block);
                Ok(Event::Death { dim, birth_block: birth.block })
            }
            Kind::H => {
                let g = col.partner;
                let event = self.event;
                let gc = self.col_mut(g);
                gc.kind = Kind::F;
                gc.partner = NONE;
                gc.birth = Some(Birth { backward: true, event, block });
                Ok(Event::Birth { dim: dim - 1 })
            }
            Kind::G => Err(KernelError::NotMaximal(sigma)),
        }
    }

    /// Splits the Morse pair `(tau, sigma)`: both cells become rows.
    /// `bd_sigma` is the Morse boundary of `sigma` after the split,
    /// `inc_tau` the Morse coboundary of `tau`, and `inc_sigma_tau` the
    /// incidence `⟨sigma, tau⟩`.
    pub fn unpair_update(
        &mut self,
        tau: CellId,
        sigma: CellId,
        bd_sigma: &Chain,
        inc_tau: &Chain,
        inc_sigma_tau: u32,
    ) -> Result<(), KernelError> {
        if inc_sigma_tau == 0 {
            return Err(KernelError::ZeroPairIncidence);
        }
        for r in [tau, sigma] {
            if self.row_dim.contains_key(&r) {
                return Err(KernelError::DuplicateRow(r));
            }
        }
        if bd_sigma.lead() != Some(tau) {
            return Err(KernelError::InconsistentBoundary(format!(
                "boundary of {sigma} must lead with {tau}"
            )));
        }
        let field = self.field;
        let inv = field.inv(inc_sigma_tau).unwrap();
        let mut affected: Vec<usize> = Vec::new();
        for (nu, _) in inc_tau.iter() {
            if nu == sigma {
                continue;
            }
            if nu < sigma {
                return Err(KernelError::InconsistentBoundary(format!("cofacet {nu} precedes {sigma}")));
            }
            if let Some(v) = self.rows.get(&nu) {
                affected.extend_from_slice(v);
            }
        }
        affected.sort_unstable();
        affected.dedup();
        self.event += 1;
        self.stats.unpairs += 1;
        for idx in affected {
            self.stats.unpair_columns_touched += 1;
            let c = self.col(idx);
            let mut s = 0u32;
            for (nu, w) in inc_tau.iter() {
                let v = c.chain.coeff(nu);
                if v != 0 {
                    s = field.add(s, field.mul(v, w));
                }
            }
            if s == 0 {
                continue;
            }
            if c.kind == Kind::G {
                return Err(KernelError::InconsistentBoundary(format!(
                    "boundary column {idx} meets the coboundary of {tau}"
                )));
            }
            self.stats.unpair_columns_changed += 1;
            let coef = field.neg(field.mul(inv, s));
            self.col_mut(idx).chain.set(sigma, coef);
            Self::row_add(&mut self.rows, sigma, idx);
        }
        let dim = bd_sigma.dim();
        self.row_dim.insert(tau, dim);
        self.row_dim.insert(sigma, dim + 1);
        let g = self.new_column(bd_sigma.clone(), Kind::G, None);
        let h = self.new_column(Chain::unit(dim + 1, sigma), Kind::H, None);
        self.col_mut(g).partner = h;
        self.col_mut(h).partner = g;
        self.pivot.insert(tau, g);
        self.pivot.insert(sigma, h);
        Ok(())
    }

    /// Checks the homology-matrix conditions against the boundary operator
    /// of the current complex: one column per row with distinct leading
    /// terms, rows in an order whose prefixes are subcomplexes, `∂c = 0` on
    /// `F`, `∂c_h = c_g` on paired columns, and a consistent row index.
    pub fn check_invariants<B>(&self, mut boundary: B) -> Result<(), String>
    where
        B: FnMut(CellId) -> Chain,
    {
        let field = self.field;
        let live: Vec<usize> = (0..self.cols.len()).filter(|&i| self.cols[i].is_some()).collect();
        if live.len() != self.row_dim.len() || self.pivot.len() != self.row_dim.len() {
            return Err(format!(
                "{} columns, {} pivots for {} rows",
                live.len(),
                self.pivot.len(),
                self.row_dim.len()
            ));
        }
        let mut bd_cache: FxHashMap<CellId, Chain> = FxHashMap::default();
        for &r in self.row_dim.keys() {
            let bd = boundary(r);
            if let Some(l) = bd.lead() {
                if l >= r {
                    return Err(format!("row {r} has a boundary term {l} after it"));
                }
            }
            for (f, _) in bd.iter() {
                if !self.row_dim.contains_key(&f) {
                    return Err(format!("row {r} has boundary term {f} outside the matrix"));
                }
            }
            bd_cache.insert(r, bd);
        }
        let apply = |c: &Chain| -> Chain {
            let mut terms = Vec::new();
            for (id, a) in c.iter() {
                for (f, b) in bd_cache[&id].iter() {
                    terms.push((f, field.mul(a, b)));
                }
            }
            Chain::from_terms(&field, c.dim().saturating_sub(1), terms)
        };
        for &i in &live {
            let c = self.col(i);
            let lead = c.chain.lead().ok_or(format!("column {i} is zero"))?;
            if self.pivot.get(&lead) != Some(&i) {
                return Err(format!("column {i} has lead {lead} not registered as its pivot"));
            }
            for (id, _) in c.chain.iter() {
                match self.row_dim.get(&id) {
                    Some(&d) if d == c.chain.dim() => {}
                    _ => return Err(format!("column {i} has bad entry {id}")),
                }
                if !self.rows.get(&id).is_some_and(|v| v.contains(&i)) {
                    return Err(format!("row index misses ({id}, column {i})"));
                }
            }
            match c.kind {
                Kind::F => {
                    if c.birth.is_none() {
                        return Err(format!("cycle column {i} without birth"));
                    }
                    if !apply(&c.chain).is_zero() {
                        return Err(format!("cycle column {i} has nonzero boundary"));
                    }
                }
                Kind::G => {
                    let h = self.cols.get(c.partner).and_then(|x| x.as_ref());
                    match h {
                        Some(hc) if hc.kind == Kind::H && hc.partner == i => {}
                        _ => return Err(format!("boundary column {i} is not paired")),
                    }
                }
                Kind::H => {
                    let g = self.cols.get(c.partner).and_then(|x| x.as_ref());
                    match g {
                        Some(gc) if gc.kind == Kind::G && gc.partner == i => {
                            if apply(&c.chain) != gc.chain {
                                return Err(format!("column {i} does not bound its partner"));
                            }
                        }
                        _ => return Err(format!("chain column {i} is not paired")),
                    }
                }
            }
        }
        for (&id, cols) in &self.rows {
            for &i in cols {
                if !self.cols.get(i).and_then(|x| x.as_ref()).is_some_and(|c| c.chain.contains(id)) {
                    return Err(format!("row index has stale entry ({id}, column {i})"));
                }
            }
        }
        Ok(())
    }
}
