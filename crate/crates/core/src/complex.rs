//! Cell complexes stored as a Hasse diagram with field-valued incidences.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::chain::{CellId, Chain};
use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("facet {0} is not in the complex")]
    MissingFacet(CellId),
    #[error("facet {facet} has dimension {found}, expected {expected}")]
    DimensionMismatch { facet: CellId, expected: usize, found: usize },
    #[error("boundary of the new cell is not a cycle")]
    BrokenBoundary,
    #[error("cell {0} has cofacets and cannot be removed")]
    NotMaximal(CellId),
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("face {0:?} is missing")]
    MissingFace(Vec<u32>),
    #[error("vertex list {0:?} is not strictly increasing")]
    UnsortedSimplex(Vec<u32>),
    #[error("grid dimensions must be at least 1 along every axis")]
    EmptyDims,
}

#[derive(Debug, Clone)]
struct CellData {
    dim: usize,
    facets: Vec<(CellId, u32)>,
    cofacets: Vec<(CellId, u32)>,
}

/// A finite cell complex. Facet and cofacet lists are kept sorted by id and
/// mirror each other exactly.
#[derive(Debug, Clone)]
pub struct Complex {
    field: Field,
    cells: FxHashMap<CellId, CellData>,
    next_id: CellId,
    validate: bool,
    count_by_dim: Vec<usize>,
}

impl Complex {
    /// Empty complex that checks `∂∂ = 0` on every insertion.
    pub fn new(field: Field) -> Self {
        Complex {
            field,
            cells: FxHashMap::default(),
            next_id: 0,
            validate: true,
            count_by_dim: Vec::new(),
        }
    }

    /// Empty complex that trusts callers to insert valid boundaries.
    pub fn unchecked(field: Field) -> Self {
        Complex { validate: false, ..Complex::new(field) }
    }

    pub fn set_validation(&mut self, on: bool) {
        self.validate = on;
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.cells.contains_key(&id)
    }

    /// Id the next insertion will receive.
    pub fn next_id(&self) -> CellId {
        self.next_id
    }

    /// Number of cells per dimension, indexed by dimension.
    pub fn count_by_dim(&self) -> &[usize] {
        &self.count_by_dim
    }

    pub fn dim(&self, id: CellId) -> Result<usize, ComplexError> {
        self.cells.get(&id).map(|c| c.dim).ok_or(ComplexError::UnknownCell(id))
    }

    pub fn facets(&self, id: CellId) -> Result<&[(CellId, u32)], ComplexError> {
        self.cells.get(&id).map(|c| c.facets.as_slice()).ok_or(ComplexError::UnknownCell(id))
    }

    pub fn cofacets(&self, id: CellId) -> Result<&[(CellId, u32)], ComplexError> {
        self.cells.get(&id).map(|c| c.cofacets.as_slice()).ok_or(ComplexError::UnknownCell(id))
    }

    /// Incidence `⟨sigma, tau⟩`, zero when `tau` is not a facet of `sigma`.
    pub fn incidence(&self, sigma: CellId, tau: CellId) -> u32 {
        match self.cells.get(&sigma) {
            Some(c) => match c.facets.binary_search_by_key(&tau, |t| t.0) {
                Ok(i) => c.facets[i].1,
                Err(_) => 0,
            },
            None => 0,
        }
    }

    pub fn boundary(&self, id: CellId) -> Result<Chain, ComplexError> {
        let c = self.cells.get(&id).ok_or(ComplexError::UnknownCell(id))?;
        Ok(Chain::from_sorted(c.dim.saturating_sub(1), c.facets.clone()))
    }

    pub fn coboundary(&self, id: CellId) -> Result<Chain, ComplexError> {
        let c = self.cells.get(&id).ok_or(ComplexError::UnknownCell(id))?;
        Ok(Chain::from_sorted(c.dim + 1, c.cofacets.clone()))
    }

    /// All cell ids in increasing order.
    pub fn cell_ids(&self) -> Vec<CellId> {
        let mut v: Vec<CellId> = self.cells.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Applies the boundary operator to an arbitrary chain.
    pub fn boundary_of_chain(&self, chain: &Chain) -> Result<Chain, ComplexError> {
        let mut terms = Vec::new();
        for (id, c) in chain.iter() {
            let data = self.cells.get(&id).ok_or(ComplexError::MissingFacet(id))?;
            for &(f, a) in &data.facets {
                terms.push((f, self.field.mul(c, a)));
            }
        }
        Ok(Chain::from_terms(&self.field, chain.dim().saturating_sub(1), terms))
    }

    /// Inserts a new cell with the given boundary and returns its fresh id.
    pub fn insert_cell(&mut self, dim: usize, boundary: &Chain) -> Result<CellId, ComplexError> {
        for (f, _) in boundary.iter() {
            let fd = self.cells.get(&f).ok_or(ComplexError::MissingFacet(f))?.dim;
            if dim == 0 || fd != dim - 1 {
                return Err(ComplexError::DimensionMismatch {
                    facet: f,
                    expected: dim.wrapping_sub(1),
                    found: fd,
                });
            }
        }
        if self.validate && !self.boundary_of_chain(boundary)?.is_zero() {
            return Err(ComplexError::BrokenBoundary);
        }
        let id = self.next_id;
        self.next_id += 1;
        for (f, c) in boundary.iter() {
            // `id` exceeds every existing id, so pushing keeps the list sorted.
            self.cells.get_mut(&f).expect("facet checked above").cofacets.push((id, c));
        }
        self.cells.insert(
            id,
            CellData { dim, facets: boundary.terms().to_vec(), cofacets: Vec::new() },
        );
        if self.count_by_dim.len() <= dim {
            self.count_by_dim.resize(dim + 1, 0);
        }
        self.count_by_dim[dim] += 1;
        Ok(id)
    }

    /// Removes a maximal cell.
    pub fn remove_cell(&mut self, id: CellId) -> Result<(), ComplexError> {
        let data = self.cells.get(&id).ok_or(ComplexError::UnknownCell(id))?;
        if !data.cofacets.is_empty() {
            return Err(ComplexError::NotMaximal(id));
        }
        let data = self.cells.remove(&id).expect("present");
        for (f, _) in data.facets {
            let cof = &mut self.cells.get_mut(&f).expect("mirror").cofacets;
            if let Ok(i) = cof.binary_search_by_key(&id, |t| t.0) {
                cof.remove(i);
            }
        }
        self.count_by_dim[data.dim] -= 1;
        while self.count_by_dim.last() == Some(&0) {
            self.count_by_dim.pop();
        }
        Ok(())
    }

    /// Exhaustive check of `∂∘∂ = 0` and of the facet/cofacet mirror.
    pub fn check_invariants(&self) -> Result<(), String> {
        for id in self.cell_ids() {
            let data = &self.cells[&id];
            for &(f, c) in &data.facets {
                let fd = self.cells.get(&f).ok_or(format!("cell {id}: dangling facet {f}"))?;
                if fd.dim + 1 != data.dim {
                    return Err(format!("cell {id}: facet {f} has wrong dimension"));
                }
                if c == 0 {
                    return Err(format!("cell {id}: zero incidence stored for {f}"));
                }
                match fd.cofacets.binary_search_by_key(&id, |t| t.0) {
                    Ok(i) if fd.cofacets[i].1 == c => {}
                    _ => return Err(format!("cell {id}: cofacet mirror of {f} broken")),
                }
            }
            for &(g, c) in &data.cofacets {
                if self.incidence(g, id) != c {
                    return Err(format!("cell {id}: facet mirror of {g} broken"));
                }
            }
            let bd = self.boundary(id).map_err(|e| e.to_string())?;
            if !self.boundary_of_chain(&bd).map_err(|e| e.to_string())?.is_zero() {
                return Err(format!("cell {id}: boundary of boundary is nonzero"));
            }
        }
        Ok(())
    }
}

/// Simplicial boundary with the `(-1)^j` sign rule, as integer coefficients.
pub fn simplex_facets(vertices: &[u32]) -> Vec<(Vec<u32>, i64)> {
    if vertices.len() < 2 {
        return Vec::new();
    }
    (0..vertices.len())
        .map(|j| {
            let mut face = vertices.to_vec();
            face.remove(j);
            (face, if j % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

/// Builds a simplicial complex from a face-closed list of sorted vertex lists.
/// Returns the complex and the id assigned to each simplex.
pub fn build_simplicial(
    field: Field,
    simplices: &[Vec<u32>],
) -> Result<(Complex, BTreeMap<Vec<u32>, CellId>), ComplexError> {
    let mut order: Vec<&Vec<u32>> = simplices.iter().collect();
    order.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    order.dedup();
    let mut cx = Complex::new(field);
    let mut ids = BTreeMap::new();
    for s in order {
        if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ComplexError::UnsortedSimplex(s.clone()));
        }
        let mut terms = Vec::new();
        for (face, sign) in simplex_facets(s) {
            let fid = *ids.get(&face).ok_or(ComplexError::MissingFace(face.clone()))?;
            terms.push((fid, field.from_i64(sign)));
        }
        let bd = Chain::from_terms(&field, s.len().saturating_sub(2), terms);
        let id = cx.insert_cell(s.len() - 1, &bd)?;
        ids.insert(s.clone(), id);
    }
    Ok((cx, ids))
}

/// Index arithmetic for the cells of a regular cubical grid with
/// `nx × ny × nz` vertices, using doubled coordinates: a cell is a point of
/// the `(2nx-1) × (2ny-1) × (2nz-1)` lattice, and odd coordinates mark the
/// axes along which the cell extends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubicalGrid {
    n: [usize; 3],
    k: [usize; 3],
}

impl CubicalGrid {
    pub fn new(dims: (usize, usize, usize)) -> Result<Self, ComplexError> {
        let n = [dims.0, dims.1, dims.2];
        if n.contains(&0) {
            return Err(ComplexError::EmptyDims);
        }
        Ok(CubicalGrid { n, k: [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1] })
    }

    pub fn vertex_dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn num_keys(&self) -> u64 {
        (self.k[0] * self.k[1] * self.k[2]) as u64
    }

    pub fn key(&self, c: [usize; 3]) -> u64 {
        (c[0] + self.k[0] * (c[1] + self.k[1] * c[2])) as u64
    }

    pub fn coords(&self, key: u64) -> [usize; 3] {
        let key = key as usize;
        let x = key % self.k[0];
        let r = key / self.k[0];
        [x, r % self.k[1], r / self.k[1]]
    }

    pub fn dim(&self, key: u64) -> usize {
        self.coords(key).iter().filter(|&&c| c % 2 == 1).count()
    }

    /// Facets with their integral incidences.
    pub fn facets(&self, key: u64) -> Vec<(u64, i64)> {
        let c = self.coords(key);
        let mut out = Vec::new();
        let mut odd_before = 0;
        for axis in 0..3 {
            if c[axis] % 2 == 1 {
                let sign = if odd_before % 2 == 0 { 1 } else { -1 };
                let mut lo = c;
                lo[axis] -= 1;
                let mut hi = c;
                hi[axis] += 1;
                out.push((self.key(lo), -sign));
                out.push((self.key(hi), sign));
                odd_before += 1;
            }
        }
        out
    }

    /// Linear indices (x-fastest) of the corner vertices of a cell.
    pub fn corner_vertices(&self, key: u64) -> Vec<usize> {
        let c = self.coords(key);
        let ranges: Vec<Vec<usize>> = c
            .iter()
            .map(|&v| if v % 2 == 1 { vec![(v - 1) / 2, (v + 1) / 2] } else { vec![v / 2] })
            .collect();
        let mut out = Vec::with_capacity(8);
        for &z in &ranges[2] {
            for &y in &ranges[1] {
                for &x in &ranges[0] {
                    out.push(x + self.n[0] * (y + self.n[1] * z));
                }
            }
        }
        out
    }
}

/// Builds the full cubical complex on an `nx × ny × nz` vertex grid. The
/// returned vector maps each grid key to its cell id.
pub fn build_cubical(
    field: Field,
    dims: (usize, usize, usize),
) -> Result<(Complex, Vec<CellId>), ComplexError> {
    let grid = CubicalGrid::new(dims)?;
    let mut cx = Complex::new(field);
    let mut ids = vec![CellId::MAX; grid.num_keys() as usize];
    for d in 0..=3 {
        for key in 0..grid.num_keys() {
            if grid.dim(key) != d {
                continue;
            }
            let terms = grid
                .facets(key)
                .into_iter()
                .map(|(f, s)| (ids[f as usize], field.from_i64(s)));
            let bd = Chain::from_terms(&field, d.saturating_sub(1), terms);
            ids[key as usize] = cx.insert_cell(d, &bd)?;
        }
    }
    Ok((cx, ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> Field {
        Field::new(2).unwrap()
    }

    fn triangle() -> Vec<Vec<u32>> {
        vec![vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2, 3]]
    }

    #[test]
    fn insert_vertex_then_edge() {
        let mut cx = Complex::new(f2());
        let v1 = cx.insert_cell(0, &Chain::zero(0)).unwrap();
        let v3 = cx.insert_cell(0, &Chain::zero(0)).unwrap();
        assert!(cx.facets(v1).unwrap().is_empty());
        let e = cx.insert_cell(1, &Chain::from_terms(&f2(), 0, [(v1, 1), (v3, 1)])).unwrap();
        assert!(e > v3 && v3 > v1);
        let bd = cx.boundary(e).unwrap();
        assert!(cx.boundary_of_chain(&bd).unwrap().is_zero());
    }

    #[test]
    fn broken_boundary_is_rejected() {
        let (mut cx, ids) = build_simplicial(f2(), &triangle()[..6]).unwrap();
        let bd = Chain::from_terms(&f2(), 1, [(ids[&vec![1, 2]], 1), (ids[&vec![2, 3]], 1)]);
        assert_eq!(cx.insert_cell(2, &bd), Err(ComplexError::BrokenBoundary));
    }

    #[test]
    fn missing_facet_is_rejected() {
        let mut cx = Complex::new(f2());
        let bd = Chain::from_terms(&f2(), 0, [(42, 1)]);
        assert_eq!(cx.insert_cell(1, &bd), Err(ComplexError::MissingFacet(42)));
    }

    #[test]
    fn removal_rules() {
        let (mut cx, ids) = build_simplicial(f2(), &triangle()).unwrap();
        assert_eq!(cx.remove_cell(ids[&vec![1, 3]]), Err(ComplexError::NotMaximal(ids[&vec![1, 3]])));
        cx.remove_cell(ids[&vec![1, 2, 3]]).unwrap();
        assert_eq!(cx.len(), 6);
        assert!(cx.coboundary(ids[&vec![1, 3]]).unwrap().is_zero());
        cx.check_invariants().unwrap();
        let mut empty = Complex::new(f2());
        assert_eq!(empty.remove_cell(0), Err(ComplexError::UnknownCell(0)));
    }

    #[test]
    fn boundary_and_coboundary_queries() {
        let (cx, ids) = build_simplicial(f2(), &triangle()).unwrap();
        let e13 = cx.boundary(ids[&vec![1, 3]]).unwrap();
        assert_eq!(e13.terms(), &[(ids[&vec![1]], 1), (ids[&vec![3]], 1)]);
        let cob = cx.coboundary(ids[&vec![1, 3]]).unwrap();
        assert_eq!(cob.terms(), &[(ids[&vec![1, 2, 3]], 1)]);
        assert!(cx.boundary(ids[&vec![1]]).unwrap().is_zero());
    }

    #[test]
    fn simplicial_signs() {
        let f = Field::new(5).unwrap();
        let (cx, ids) = build_simplicial(f, &[vec![1], vec![2], vec![1, 2]]).unwrap();
        assert_eq!(cx.len(), 3);
        assert_eq!(cx.incidence(ids[&vec![1, 2]], ids[&vec![2]]), 1);
        assert_eq!(cx.incidence(ids[&vec![1, 2]], ids[&vec![1]]), 4);
        let (cx2, ids2) = build_simplicial(f2(), &[vec![1], vec![2], vec![1, 2]]).unwrap();
        assert_eq!(cx2.incidence(ids2[&vec![1, 2]], ids2[&vec![1]]), 1);
    }

    #[test]
    fn full_triangle_over_odd_prime() {
        let (cx, _) = build_simplicial(Field::new(7).unwrap(), &triangle()).unwrap();
        assert_eq!(cx.len(), 7);
        cx.check_invariants().unwrap();
    }

    #[test]
    fn simplicial_missing_face() {
        let err = build_simplicial(f2(), &[vec![1, 2]]).unwrap_err();
        assert!(matches!(err, ComplexError::MissingFace(_)));
    }

    #[test]
    fn cubical_sizes() {
        let (cx, _) = build_cubical(f2(), (2, 1, 1)).unwrap();
        assert_eq!(cx.count_by_dim(), &[2, 1]);
        let (cx, _) = build_cubical(Field::new(3).unwrap(), (2, 2, 1)).unwrap();
        assert_eq!(cx.count_by_dim(), &[4, 4, 1]);
        cx.check_invariants().unwrap();
        let (cx, _) = build_cubical(f2(), (1, 1, 1)).unwrap();
        assert_eq!(cx.count_by_dim(), &[1]);
        assert_eq!(build_cubical(f2(), (0, 1, 1)).unwrap_err(), ComplexError::EmptyDims);
    }

    #[test]
    fn cubical_3d_satisfies_boundary_squared() {
        let (cx, _) = build_cubical(Field::new(5).unwrap(), (3, 2, 2)).unwrap();
        // 12 vertices, 20 edges, 11 squares, 2 cubes
        assert_eq!(cx.count_by_dim(), &[12, 20, 11, 2]);
        cx.check_invariants().unwrap();
    }

    #[test]
    fn grid_corners() {
        let g = CubicalGrid::new((2, 2, 2)).unwrap();
        let cube = g.key([1, 1, 1]);
        assert_eq!(g.dim(cube), 3);
        let mut c = g.corner_vertices(cube);
        c.sort();
        assert_eq!(c, (0..8).collect::<Vec<_>>());
        assert_eq!(g.corner_vertices(g.key([2, 0, 0])), vec![1]);
    }
}
