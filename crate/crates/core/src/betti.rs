//! Betti numbers of a finite chain complex by sparse column reduction.

use rustc_hash::FxHashMap;

use crate::chain::{CellId, Chain};
use crate::field::Field;

/// Betti numbers of the chain complex whose generators are `(dim, boundary)`
/// pairs. Boundaries may reference any ids; only their ranks matter.
/// The result is indexed by dimension and trimmed of trailing zeros.
pub fn betti_numbers<'a, I>(field: &Field, generators: I) -> Vec<usize>
where
    I: IntoIterator<Item = (usize, &'a Chain)>,
{
    let mut counts: Vec<usize> = Vec::new();
    let mut by_dim: Vec<Vec<&Chain>> = Vec::new();
    for (d, bd) in generators {
        if counts.len() <= d {
            counts.resize(d + 1, 0);
            by_dim.resize(d + 1, Vec::new());
        }
        counts[d] += 1;
        by_dim[d].push(bd);
    }
    let mut ranks = vec![0usize; counts.len() + 1];
    for (d, cols) in by_dim.iter().enumerate() {
        ranks[d] = boundary_rank(field, cols);
    }
    let mut betti: Vec<usize> = (0..counts.len()).map(|d| counts[d] - ranks[d] - ranks[d + 1]).collect();
    while betti.last() == Some(&0) {
        betti.pop();
    }
    betti
}

/// Rank of the matrix whose columns are the given chains.
pub fn boundary_rank(field: &Field, cols: &[&Chain]) -> usize {
    let mut pivots: FxHashMap<CellId, Chain> = FxHashMap::default();
    for &col in cols {
        let mut c = col.clone();
        while let Some(l) = c.lead() {
            match pivots.get(&l) {
                Some(p) => {
                    let a = field.neg(field.div(c.coeff(l), p.coeff(l)));
                    c.add_scaled(field, a, p);
                }
                None => {
                    pivots.insert(l, c);
                    break;
                }
            }
        }
    }
    pivots.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::build_simplicial;

    #[test]
    fn circle_and_disk() {
        let f = Field::new(3).unwrap();
        let mut simplices = vec![vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3]];
        let (cx, _) = build_simplicial(f, &simplices).unwrap();
        let bds: Vec<(usize, Chain)> =
            cx.cell_ids().into_iter().map(|id| (cx.dim(id).unwrap(), cx.boundary(id).unwrap())).collect();
        assert_eq!(betti_numbers(&f, bds.iter().map(|(d, c)| (*d, c))), vec![1, 1]);
        simplices.push(vec![1, 2, 3]);
        let (cx, _) = build_simplicial(f, &simplices).unwrap();
        let bds: Vec<(usize, Chain)> =
            cx.cell_ids().into_iter().map(|id| (cx.dim(id).unwrap(), cx.boundary(id).unwrap())).collect();
        assert_eq!(betti_numbers(&f, bds.iter().map(|(d, c)| (*d, c))), vec![1]);
    }
}
