//! Brute-force zigzag persistence for small inputs.
//!
//! Homology of every intermediate complex is computed with dense linear
//! algebra on full boundary matrices, the maps between consecutive spaces
//! are computed on explicit cycle representatives, and the interval
//! decomposition is read off the ranks of the limit-to-colimit maps of all
//! sub-intervals. Nothing here depends on the Morse or kernel code.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::field::Field;
use crate::stream::{BlockOp, Direction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("complex after block {block} has {cells} cells, above the limit of {limit}")]
    TooLarge { block: usize, cells: usize, limit: usize },
    #[error("invalid stream at block {block}: {message}")]
    InvalidStream { block: usize, message: String },
}

/// Largest complex the oracle accepts by default.
pub const DEFAULT_CELL_LIMIT: usize = 200;

/// Dense matrix over `Z/p`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<u32>]) -> Self {
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, field: &Field, v: &[u32]) -> Vec<u32> {
        (0..self.rows)
            .map(|r| (0..self.cols).fold(0, |acc, c| field.add(acc, field.mul(self.get(r, c), v[c]))))
            .collect()
    }

    pub fn mul(&self, field: &Field, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(field, &other.column(j));
            for (i, v) in col.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(field: &Field, m: &mut Matrix) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.cols {
        if row == m.rows {
            break;
        }
        let Some(p) = (row..m.rows).find(|&r| m.get(r, col) != 0) else {
            continue;
        };
        if p != row {
            for c in 0..m.cols {
                let (a, b) = (m.get(p, c), m.get(row, c));
                m.set(p, c, b);
                m.set(row, c, a);
            }
        }
        let inv = field.inv(m.get(row, col)).unwrap();
        for c in 0..m.cols {
            let v = field.mul(m.get(row, c), inv);
            m.set(row, c, v);
        }
        for r in 0..m.rows {
            if r != row {
                let f = m.get(r, col);
                if f != 0 {
                    for c in 0..m.cols {
                        let v = field.sub(m.get(r, c), field.mul(f, m.get(row, c)));
                        m.set(r, c, v);
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank(field: &Field, m: &Matrix) -> usize {
    let mut a = m.clone();
    rref(field, &mut a).len()
}

/// Basis of the null space of `m`.
pub fn nullspace(field: &Field, m: &Matrix) -> Vec<Vec<u32>> {
    let mut a = m.clone();
    let pivots = rref(field, &mut a);
    let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in (0..m.cols).filter(|c| !pivot_set.contains(c)) {
        let mut v = vec![0u32; m.cols];
        v[free] = 1;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = field.neg(a.get(r, free));
        }
        basis.push(v);
    }
    basis
}

/// Some solution `x` of `m x = b`, or `None` if the system is inconsistent.
pub fn solve(field: &Field, m: &Matrix, b: &[u32]) -> Option<Vec<u32>> {
    let mut aug = Matrix::zeros(m.rows, m.cols + 1);
    for r in 0..m.rows {
        for c in 0..m.cols {
            aug.set(r, c, m.get(r, c));
        }
        aug.set(r, m.cols, b[r]);
    }
    let pivots = rref(field, &mut aug);
    if pivots.last() == Some(&m.cols) {
        return None;
    }
    let mut x = vec![0u32; m.cols];
    for (r, &pc) in pivots.iter().enumerate() {
        x[pc] = aug.get(r, m.cols);
    }
    Some(x)
}

/// A zigzag module: spaces `V_1..V_K` and, between `V_i` and `V_{i+1}`, a map
/// in the given direction. A forward map goes `V_i → V_{i+1}` and has shape
/// `dim V_{i+1} × dim V_i`; a backward one goes `V_{i+1} → V_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitModule {
    pub spaces: Vec<usize>,
    pub maps: Vec<(Direction, Matrix)>,
}

#[derive(Debug, Clone)]
struct OracleCell {
    dim: usize,
    facets: Vec<(u64, u32)>,
}

type OracleState = BTreeMap<u64, OracleCell>;

/// Complexes after each block, validated.
fn replay(field: &Field, blocks: &[BlockOp], limit: usize) -> Result<Vec<OracleState>, OracleError> {
    let mut cur: OracleState = BTreeMap::new();
    let mut out = Vec::with_capacity(blocks.len());
    for (i, block) in blocks.iter().enumerate() {
        let b = i + 1;
        let bad = |message: String| OracleError::InvalidStream { block: b, message };
        match block {
            BlockOp::Forward { cells, .. } => {
                let new_keys: BTreeSet<u64> = cells.iter().map(|c| c.key).collect();
                if new_keys.len() != cells.len() {
                    return Err(bad("repeated key".into()));
                }
                for c in cells {
                    if cur.contains_key(&c.key) {
                        return Err(bad(format!("key {} already present", c.key)));
                    }
                }
                let dims: BTreeMap<u64, usize> = cells.iter().map(|c| (c.key, c.dim)).collect();
                for c in cells {
                    let mut facets: BTreeMap<u64, u32> = BTreeMap::new();
                    for &(f, a) in &c.facets {
                        let fd = cur.get(&f).map(|x| x.dim).or_else(|| dims.get(&f).copied());
                        match fd {
                            Some(d) if d + 1 == c.dim => {}
                            _ => return Err(bad(format!("cell {} has bad facet {f}", c.key))),
                        }
                        let e = facets.entry(f).or_insert(0);
                        *e = field.add(*e, field.from_i64(a));
                    }
                    facets.retain(|_, v| *v != 0);
                    cur.insert(c.key, OracleCell { dim: c.dim, facets: facets.into_iter().collect() });
                }
            }
            BlockOp::Backward { keys, .. } => {
                let gone: BTreeSet<u64> = keys.iter().copied().collect();
                for k in &gone {
                    if !cur.contains_key(k) {
                        return Err(bad(format!("key {k} not present")));
                    }
                }
                for (k, c) in &cur {
                    if !gone.contains(k) && c.facets.iter().any(|(f, _)| gone.contains(f)) {
                        return Err(bad(format!("removal leaves {k} without a facet")));
                    }
                }
                for k in &gone {
                    cur.remove(k);
                }
            }
        }
        if cur.len() > limit {
            return Err(OracleError::TooLarge { block: b, cells: cur.len(), limit });
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Homology of one complex in one dimension: the cells of that dimension,
/// the boundary space, and representatives of a homology basis.
struct HomologyBasis {
    cells: Vec<u64>,
    index: BTreeMap<u64, usize>,
    /// columns: boundary generators followed by representatives
    system: Matrix,
    n_boundaries: usize,
    reps: Vec<Vec<u32>>,
}

impl HomologyBasis {
    fn new(field: &Field, state: &OracleState, d: usize) -> Self {
        let cells: Vec<u64> = state.iter().filter(|(_, c)| c.dim == d).map(|(k, _)| *k).collect();
        let index: BTreeMap<u64, usize> = cells.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let lower: Vec<u64> = state.iter().filter(|(_, c)| d > 0 && c.dim == d - 1).map(|(k, _)| *k).collect();
        let lower_index: BTreeMap<u64, usize> = lower.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut bd = Matrix::zeros(lower.len(), cells.len());
        for (j, k) in cells.iter().enumerate() {
            for &(f, a) in &state[k].facets {
                bd.set(lower_index[&f], j, a);
            }
        }
        let cycles = nullspace(field, &bd);
        let mut boundaries: Vec<Vec<u32>> = Vec::new();
        for c in state.values().filter(|c| c.dim == d + 1) {
            let mut v = vec![0u32; cells.len()];
            for &(f, a) in &c.facets {
                v[index[&f]] = a;
            }
            boundaries.push(v);
        }
        let mut span = boundaries.clone();
        let mut r = rank(field, &Matrix::from_columns(cells.len(), &span));
        let mut reps = Vec::new();
        for z in cycles {
            span.push(z.clone());
            let r2 = rank(field, &Matrix::from_columns(cells.len(), &span));
            if r2 > r {
                reps.push(z);
                r = r2;
            } else {
                span.pop();
            }
        }
        let n_boundaries = boundaries.len();
        let mut cols = boundaries;
        cols.extend(reps.iter().cloned());
        let system = Matrix::from_columns(cells.len(), &cols);
        HomologyBasis { cells, index, system, n_boundaries, reps }
    }

    fn dim(&self) -> usize {
        self.reps.len()
    }

    /// Coordinates of the class of a cycle given on keys.
    fn coordinates(&self, field: &Field, cycle: &BTreeMap<u64, u32>) -> Vec<u32> {
        let mut v = vec![0u32; self.cells.len()];
        for (k, &a) in cycle {
            v[self.index[k]] = a;
        }
        let x = solve(field, &self.system, &v).expect("inclusion maps cycles to cycles");
        x[self.n_boundaries..].to_vec()
    }

    fn rep_on_keys(&self, i: usize) -> BTreeMap<u64, u32> {
        self.reps[i].iter().enumerate().filter(|(_, &a)| a != 0).map(|(j, &a)| (self.cells[j], a)).collect()
    }
}

/// The homology zigzag modules of the complexes after each block, one per
/// dimension up to the largest cell dimension.
pub fn homology_module(field: &Field, blocks: &[BlockOp], limit: usize) -> Result<Vec<ExplicitModule>, OracleError> {
    let states = replay(field, blocks, limit)?;
    let top = states.iter().flat_map(|s| s.values().map(|c| c.dim)).max();
    let Some(top) = top else {
        return Ok(Vec::new());
    };
    let mut modules = Vec::new();
    for d in 0..=top {
        let bases: Vec<HomologyBasis> = states.iter().map(|s| HomologyBasis::new(field, s, d)).collect();
        let spaces = bases.iter().map(|b| b.dim()).collect();
        let mut maps = Vec::new();
        for i in 0..states.len().saturating_sub(1) {
            let dir = blocks[i + 1].direction();
            let (src, dst) = match dir {
                Direction::Forward => (&bases[i], &bases[i + 1]),
                Direction::Backward => (&bases[i + 1], &bases[i]),
            };
            let cols: Vec<Vec<u32>> =
                (0..src.dim()).map(|j| dst.coordinates(field, &src.rep_on_keys(j))).collect();
            maps.push((dir, Matrix::from_columns(dst.dim(), &cols)));
        }
        modules.push(ExplicitModule { spaces, maps });
    }
    Ok(modules)
}

/// Rank of the map from the limit to the colimit of the module restricted to
/// `[b, d]` (1-based, inclusive). This counts the intervals containing
/// `[b, d]`.
fn limit_colimit_rank(field: &Field, m: &ExplicitModule, b: usize, d: usize) -> usize {
    let range = (b - 1)..d;
    if m.spaces[range.clone()].contains(&0) {
        return 0;
    }
    let mut offset = Vec::new();
    let mut total = 0;
    for i in range.clone() {
        offset.push(total);
        total += m.spaces[i];
    }
    let off = |i: usize| offset[i - (b - 1)];
    // limit: tuples compatible with every map
    let mut constraints: Vec<Vec<u32>> = Vec::new();
    // colimit relations
    let mut relations: Vec<Vec<u32>> = Vec::new();
    for i in (b - 1)..(d - 1) {
        let (dir, f) = &m.maps[i];
        let (s, t) = match dir {
            Direction::Forward => (i, i + 1),
            Direction::Backward => (i + 1, i),
        };
        for r in 0..f.rows {
            let mut row = vec![0u32; total];
            for c in 0..f.cols {
                row[off(s) + c] = f.get(r, c);
            }
            row[off(t) + r] = field.sub(row[off(t) + r], 1);
            constraints.push(row);
        }
        for c in 0..f.cols {
            let mut rel = vec![0u32; total];
            rel[off(s) + c] = 1;
            for r in 0..f.rows {
                rel[off(t) + r] = field.sub(rel[off(t) + r], f.get(r, c));
            }
            relations.push(rel);
        }
    }
    let lim = if constraints.is_empty() {
        (0..total)
            .map(|i| {
                let mut v = vec![0u32; total];
                v[i] = 1;
                v
            })
            .collect()
    } else {
        let mut cm = Matrix::zeros(constraints.len(), total);
        for (r, row) in constraints.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                cm.set(r, c, v);
            }
        }
        nullspace(field, &cm)
    };
    let base = rank(field, &Matrix::from_columns(total, &relations));
    let mut cols = relations;
    for l in lim {
        let mut v = vec![0u32; total];
        let o = off(b - 1);
        v[o..o + m.spaces[b - 1]].copy_from_slice(&l[o..o + m.spaces[b - 1]]);
        cols.push(v);
    }
    rank(field, &Matrix::from_columns(total, &cols)) - base
}

/// Interval decomposition of a zigzag module as `(birth, death)` pairs of
/// 1-based indices, sorted, with multiplicity.
pub fn decompose_module(field: &Field, m: &ExplicitModule) -> Vec<(usize, usize)> {
    let k = m.spaces.len();
    let mut rk = vec![vec![0i64; k + 2]; k + 2];
    for b in 1..=k {
        for d in b..=k {
            rk[b][d] = limit_colimit_rank(field, m, b, d) as i64;
        }
    }
    let mut out = Vec::new();
    for b in 1..=k {
        for d in b..=k {
            let mult = rk[b][d] - rk[b - 1][d] - rk[b][d + 1] + rk[b - 1][d + 1];
            assert!(mult >= 0, "negative interval multiplicity");
            for _ in 0..mult {
                out.push((b, d));
            }
        }
    }
    out
}

/// `(dim, birth, death)` triples of the stream's zigzag persistence, sorted.
pub fn oracle_diagram(field: &Field, blocks: &[BlockOp], limit: usize) -> Result<Vec<(usize, usize, usize)>, OracleError> {
    let modules = homology_module(field, blocks, limit)?;
    let mut out = Vec::new();
    for (d, m) in modules.iter().enumerate() {
        for (b, e) in decompose_module(field, m) {
            out.push((d, b, e));
        }
    }
    out.sort_unstable();
    Ok(out)
}
