//! Discrete Morse matchings: coreduction, acyclicity, and Morse boundaries
//! computed by traversing the oriented Hasse diagram.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::betti::betti_numbers;
use crate::chain::{CellId, Chain};
use crate::complex::{Complex, ComplexError};
use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorseError {
    #[error("cell {0} is not critical")]
    NotCritical(CellId),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Role of a cell in a Morse matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Critical,
    /// Lower cell of a pair; holds its partner `ω(τ)`.
    Queue(CellId),
    /// Upper cell of a pair; holds its partner `τ`.
    King(CellId),
}

/// A partial Morse matching `(A, Q, K, ω)` over cell ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    roles: FxHashMap<CellId, Role>,
    n_critical: usize,
}

impl Matching {
    pub fn new() -> Self {
        Matching::default()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn num_critical(&self) -> usize {
        self.n_critical
    }

    pub fn role(&self, id: CellId) -> Option<Role> {
        self.roles.get(&id).copied()
    }

    pub fn is_critical(&self, id: CellId) -> bool {
        self.roles.get(&id) == Some(&Role::Critical)
    }

    pub fn partner(&self, id: CellId) -> Option<CellId> {
        match self.roles.get(&id) {
            Some(Role::Queue(p)) | Some(Role::King(p)) => Some(*p),
            _ => None,
        }
    }

    pub fn add_critical(&mut self, id: CellId) {
        if self.roles.insert(id, Role::Critical) != Some(Role::Critical) {
            self.n_critical += 1;
        }
    }

    /// Records the pair `(tau, sigma)` with `sigma = ω(tau)`.
    pub fn add_pair(&mut self, tau: CellId, sigma: CellId) {
        for id in [tau, sigma] {
            if self.roles.get(&id) == Some(&Role::Critical) {
                self.n_critical -= 1;
            }
        }
        self.roles.insert(tau, Role::Queue(sigma));
        self.roles.insert(sigma, Role::King(tau));
    }

    /// Forgets a single cell. Callers remove paired cells together.
    pub fn remove(&mut self, id: CellId) -> Option<Role> {
        let r = self.roles.remove(&id);
        if r == Some(Role::Critical) {
            self.n_critical -= 1;
        }
        r
    }

    /// Turns the pair `(tau, sigma)` into two critical cells.
    pub fn unpair(&mut self, tau: CellId, sigma: CellId) -> bool {
        if self.roles.get(&tau) != Some(&Role::Queue(sigma)) {
            return false;
        }
        self.roles.insert(tau, Role::Critical);
        self.roles.insert(sigma, Role::Critical);
        self.n_critical += 2;
        true
    }

    fn sorted_where(&self, pred: impl Fn(&Role) -> bool) -> Vec<CellId> {
        let mut v: Vec<CellId> = self.roles.iter().filter(|(_, r)| pred(r)).map(|(&id, _)| id).collect();
        v.sort_unstable();
        v
    }

    /// Critical cells `A`, sorted.
    pub fn critical_cells(&self) -> Vec<CellId> {
        self.sorted_where(|r| *r == Role::Critical)
    }

    /// Lower pair cells `Q`, sorted.
    pub fn queue_cells(&self) -> Vec<CellId> {
        self.sorted_where(|r| matches!(r, Role::Queue(_)))
    }

    /// Upper pair cells `K`, sorted.
    pub fn king_cells(&self) -> Vec<CellId> {
        self.sorted_where(|r| matches!(r, Role::King(_)))
    }

    /// Pairs `(τ, ω(τ))` sorted by `τ`.
    pub fn pairs(&self) -> Vec<(CellId, CellId)> {
        self.queue_cells().into_iter().map(|t| (t, self.partner(t).unwrap())).collect()
    }
}

/// A cell offered to the coreduction: key, dimension, and facets with
/// nonzero coefficients. Facets whose key is not offered are treated as
/// already matched.
#[derive(Debug, Clone)]
pub struct CoreductionInput {
    pub key: u64,
    pub dim: usize,
    pub facets: Vec<(u64, u32)>,
}

/// Greedy coreduction over an arbitrary set of cells.
///
/// Repeatedly pairs a cell whose boundary inside the unmatched set consists of
/// exactly one cell; when no such cell exists the lowest `(dim, key)`
/// unmatched cell becomes critical. The returned matching is keyed by the
/// input keys and is acyclic.
pub fn coreduce_cells(cells: &[CoreductionInput]) -> Matching {
    let n = cells.len();
    let index: FxHashMap<u64, usize> = cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
    let mut facets_in: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    let mut cofacets_in: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in cells.iter().enumerate() {
        for &(f, coef) in &c.facets {
            if coef == 0 {
                continue;
            }
            if let Some(&j) = index.get(&f) {
                facets_in[i].push((j, coef));
                cofacets_in[j].push(i);
            }
        }
    }
    let mut count: Vec<usize> = facets_in.iter().map(|f| f.len()).collect();
    let mut processed = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (cells[i].dim, cells[i].key));
    let mut heap: BinaryHeap<Reverse<(usize, u64, usize)>> = BinaryHeap::new();
    for i in 0..n {
        if count[i] == 1 {
            heap.push(Reverse((cells[i].dim, cells[i].key, i)));
        }
    }
    let mut m = Matching::new();
    let mut cursor = 0;

    fn settle(
        x: usize,
        cells: &[CoreductionInput],
        cofacets_in: &[Vec<usize>],
        processed: &[bool],
        count: &mut [usize],
        heap: &mut BinaryHeap<Reverse<(usize, u64, usize)>>,
    ) {
        for &y in &cofacets_in[x] {
            if !processed[y] {
                count[y] -= 1;
                if count[y] == 1 {
                    heap.push(Reverse((cells[y].dim, cells[y].key, y)));
                }
            }
        }
    }

    loop {
        while let Some(Reverse((_, _, s))) = heap.pop() {
            if processed[s] || count[s] != 1 {
                continue;
            }
            let Some(&(t, coef)) = facets_in[s].iter().find(|(j, _)| !processed[*j]) else {
                continue;
            };
            if coef == 0 {
                continue;
            }
            m.add_pair(cells[t].key, cells[s].key);
            processed[t] = true;
            processed[s] = true;
            settle(t, cells, &cofacets_in, &processed, &mut count, &mut heap);
            settle(s, cells, &cofacets_in, &processed, &mut count, &mut heap);
        }
        while cursor < n && processed[order[cursor]] {
            cursor += 1;
        }
        if cursor == n {
            break;
        }
        let c = order[cursor];
        m.add_critical(cells[c].key);
        processed[c] = true;
        settle(c, cells, &cofacets_in, &processed, &mut count, &mut heap);
    }
    m
}

/// Coreduction of `sigma_set` inside `cx`. Cells outside the set are assumed
/// to be matched already (by `frozen`) and are never paired with cells of the
/// set.
pub fn coreduce(cx: &Complex, sigma_set: &[CellId], frozen: &Matching) -> Result<Matching, MorseError> {
    let inside: FxHashSet<CellId> = sigma_set.iter().copied().collect();
    let mut input = Vec::with_capacity(sigma_set.len());
    for &id in sigma_set {
        debug_assert!(frozen.role(id).is_none());
        let facets = cx.facets(id)?.iter().copied().filter(|(f, _)| inside.contains(f)).collect();
        input.push(CoreductionInput { key: id, dim: cx.dim(id)?, facets });
    }
    Ok(coreduce_cells(&input))
}

/// Checks that every pair is a facet relation with nonzero incidence and that
/// every cell of `cx` has a role.
pub fn check_matching(cx: &Complex, m: &Matching) -> Result<(), String> {
    for id in cx.cell_ids() {
        match m.role(id) {
            None => return Err(format!("cell {id} has no role")),
            Some(Role::Queue(s)) => {
                if m.role(s) != Some(Role::King(id)) {
                    return Err(format!("pair ({id},{s}) is not mirrored"));
                }
                if cx.incidence(s, id) == 0 {
                    return Err(format!("pair ({id},{s}) has zero incidence"));
                }
            }
            _ => {}
        }
    }
    if m.len() != cx.len() {
        return Err("matching references cells outside the complex".into());
    }
    Ok(())
}

/// True iff the Hasse diagram of `cx`, with matched edges reversed, has no
/// directed cycle.
pub fn is_acyclic_matching(cx: &Complex, m: &Matching) -> bool {
    let successors = |x: CellId| -> Vec<CellId> {
        let mut out: Vec<CellId> = cx
            .facets(x)
            .unwrap_or(&[])
            .iter()
            .map(|t| t.0)
            .filter(|&y| m.role(y) != Some(Role::Queue(x)))
            .collect();
        if let Some(Role::Queue(s)) = m.role(x) {
            out.push(s);
        }
        out
    };
    // 1 = on stack, 2 = finished
    let mut color: FxHashMap<CellId, u8> = FxHashMap::default();
    for root in cx.cell_ids() {
        if color.contains_key(&root) {
            continue;
        }
        color.insert(root, 1);
        let mut stack: Vec<(CellId, Vec<CellId>)> = vec![(root, successors(root))];
        while let Some((_, succ)) = stack.last_mut() {
            match succ.pop() {
                Some(y) => match color.get(&y) {
                    Some(1) => return false,
                    Some(_) => {}
                    None => {
                        color.insert(y, 1);
                        let s = successors(y);
                        stack.push((y, s));
                    }
                },
                None => {
                    let (x, _) = stack.pop().unwrap();
                    color.insert(x, 2);
                }
            }
        }
    }
    true
}

/// Reverse postorder of the graph reachable from `seeds`, i.e. an order in
/// which every node precedes its successors.
fn topological_order<F>(seeds: &[CellId], mut successors: F) -> Vec<CellId>
where
    F: FnMut(CellId, &mut Vec<CellId>),
{
    let mut seen: FxHashSet<CellId> = FxHashSet::default();
    let mut post: Vec<CellId> = Vec::new();
    for &s in seeds {
        if !seen.insert(s) {
            continue;
        }
        let mut buf = Vec::new();
        successors(s, &mut buf);
        let mut stack: Vec<(CellId, Vec<CellId>)> = vec![(s, buf)];
        while let Some((_, succ)) = stack.last_mut() {
            match succ.pop() {
                Some(y) => {
                    if seen.insert(y) {
                        let mut b = Vec::new();
                        successors(y, &mut b);
                        stack.push((y, b));
                    }
                }
                None => {
                    let (x, _) = stack.pop().unwrap();
                    post.push(x);
                }
            }
        }
    }
    post.reverse();
    post
}

fn add_to(field: &Field, map: &mut FxHashMap<CellId, u32>, id: CellId, v: u32) {
    let e = map.entry(id).or_insert(0);
    *e = field.add(*e, v);
}

/// Morse boundary `∂^A ν`: the sum over gradient paths from `nu` to critical
/// cells one dimension lower, weighted by path multiplicity.
pub fn morse_boundary(cx: &Complex, m: &Matching, nu: CellId) -> Result<Chain, MorseError> {
    if !m.is_critical(nu) {
        return Err(MorseError::NotCritical(nu));
    }
    let field = *cx.field();
    let dim = cx.dim(nu)?;
    let mut result: FxHashMap<CellId, u32> = FxHashMap::default();
    let mut weight: FxHashMap<CellId, u32> = FxHashMap::default();
    for &(y, c) in cx.facets(nu)? {
        match m.role(y) {
            Some(Role::Critical) => add_to(&field, &mut result, y, c),
            Some(Role::Queue(_)) => add_to(&field, &mut weight, y, c),
            _ => {}
        }
    }
    if !weight.is_empty() {
        let mut seeds: Vec<CellId> = weight.keys().copied().collect();
        seeds.sort_unstable();
        let order = topological_order(&seeds, |x, out| {
            let s = m.partner(x).expect("queue cell");
            for &(y, _) in cx.facets(s).unwrap_or(&[]) {
                if y != x && matches!(m.role(y), Some(Role::Queue(_))) {
                    out.push(y);
                }
            }
        });
        for x in order {
            let wx = weight.get(&x).copied().unwrap_or(0);
            if wx == 0 {
                continue;
            }
            let s = m.partner(x).expect("queue cell");
            let up = field.neg(field.inv(cx.incidence(s, x)).expect("paired incidence is nonzero"));
            let factor = field.mul(wx, up);
            for &(y, c) in cx.facets(s)? {
                if y == x {
                    continue;
                }
                match m.role(y) {
                    Some(Role::Critical) => add_to(&field, &mut result, y, field.mul(factor, c)),
                    Some(Role::Queue(_)) => add_to(&field, &mut weight, y, field.mul(factor, c)),
                    _ => {}
                }
            }
        }
    }
    Ok(Chain::from_terms(&field, dim.saturating_sub(1), result))
}

/// Morse coboundary: the critical cells `ν` one dimension up with
/// `⟨ν, tau⟩^A ≠ 0`, with those incidences as coefficients.
pub fn morse_coboundary(cx: &Complex, m: &Matching, tau: CellId) -> Result<Chain, MorseError> {
    if !m.is_critical(tau) {
        return Err(MorseError::NotCritical(tau));
    }
    let field = *cx.field();
    let dim = cx.dim(tau)?;
    let down = |z: CellId, x: CellId| field.neg(field.inv(cx.incidence(z, x)).expect("nonzero"));
    let mut result: FxHashMap<CellId, u32> = FxHashMap::default();
    let mut weight: FxHashMap<CellId, u32> = FxHashMap::default();
    for &(y, c) in cx.cofacets(tau)? {
        match m.role(y) {
            Some(Role::Critical) => add_to(&field, &mut result, y, c),
            Some(Role::King(x)) => add_to(&field, &mut weight, x, field.mul(c, down(y, x))),
            _ => {}
        }
    }
    if !weight.is_empty() {
        let mut seeds: Vec<CellId> = weight.keys().copied().collect();
        seeds.sort_unstable();
        let order = topological_order(&seeds, |x, out| {
            let own = m.partner(x);
            for &(z, _) in cx.cofacets(x).unwrap_or(&[]) {
                if Some(z) == own {
                    continue;
                }
                if let Some(Role::King(x2)) = m.role(z) {
                    out.push(x2);
                }
            }
        });
        for x in order {
            let wx = weight.get(&x).copied().unwrap_or(0);
            if wx == 0 {
                continue;
            }
            let own = m.partner(x);
            for &(z, c) in cx.cofacets(x)? {
                if Some(z) == own {
                    continue;
                }
                match m.role(z) {
                    Some(Role::Critical) => add_to(&field, &mut result, z, field.mul(wx, c)),
                    Some(Role::King(x2)) => {
                        let v = field.mul(field.mul(wx, c), down(z, x2));
                        add_to(&field, &mut weight, x2, v);
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(Chain::from_terms(&field, dim + 1, result))
}

/// A gradient path `ν, τ1, ω(τ1), …, τr, ω(τr), μ` and its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientPath {
    pub cells: Vec<CellId>,
    pub multiplicity: u32,
}

/// Enumerates every gradient path from the critical cell `nu` to critical
/// cells one dimension lower. Exponential in general; meant for small
/// complexes and cross-checks.
pub fn gradient_paths(cx: &Complex, m: &Matching, nu: CellId) -> Result<Vec<GradientPath>, MorseError> {
    if !m.is_critical(nu) {
        return Err(MorseError::NotCritical(nu));
    }
    let field = *cx.field();
    let mut out = Vec::new();
    let mut path = vec![nu];
    extend_paths(cx, m, &field, nu, 1, &mut path, &mut out)?;
    Ok(out)
}

fn extend_paths(
    cx: &Complex,
    m: &Matching,
    field: &Field,
    from: CellId,
    mult: u32,
    path: &mut Vec<CellId>,
    out: &mut Vec<GradientPath>,
) -> Result<(), MorseError> {
    let came_from = if path.len() >= 2 { Some(path[path.len() - 2]) } else { None };
    for &(y, c) in cx.facets(from)? {
        if Some(y) == came_from || path.contains(&y) {
            continue;
        }
        match m.role(y) {
            Some(Role::Critical) => {
                let mut cells = path.clone();
                cells.push(y);
                out.push(GradientPath { cells, multiplicity: field.mul(mult, c) });
            }
            Some(Role::Queue(s)) => {
                if path.contains(&s) {
                    continue;
                }
                let up = field.neg(field.inv(cx.incidence(s, y)).expect("nonzero"));
                let next = field.mul(field.mul(mult, c), up);
                path.push(y);
                path.push(s);
                extend_paths(cx, m, field, s, next, path, out)?;
                path.pop();
                path.pop();
            }
            _ => {}
        }
    }
    Ok(())
}

/// Morse boundary by explicit path enumeration.
pub fn morse_boundary_by_paths(cx: &Complex, m: &Matching, nu: CellId) -> Result<Chain, MorseError> {
    let field = *cx.field();
    let dim = cx.dim(nu)?;
    let paths = gradient_paths(cx, m, nu)?;
    Ok(Chain::from_terms(
        &field,
        dim.saturating_sub(1),
        paths.into_iter().map(|p| (*p.cells.last().unwrap(), p.multiplicity)),
    ))
}

/// Betti numbers of the full complex.
pub fn complex_betti(cx: &Complex) -> Vec<usize> {
    let gens: Vec<(usize, Chain)> =
        cx.cell_ids().into_iter().map(|id| (cx.dim(id).unwrap(), cx.boundary(id).unwrap())).collect();
    betti_numbers(cx.field(), gens.iter().map(|(d, c)| (*d, c)))
}

/// Betti numbers of the Morse complex of `(cx, m)`.
pub fn morse_betti(cx: &Complex, m: &Matching) -> Result<Vec<usize>, MorseError> {
    let mut gens = Vec::new();
    for id in m.critical_cells() {
        gens.push((cx.dim(id)?, morse_boundary(cx, m, id)?));
    }
    Ok(betti_numbers(cx.field(), gens.iter().map(|(d, c)| (*d, c))))
}
