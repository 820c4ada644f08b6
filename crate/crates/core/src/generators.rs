//! Block streams for oscillating Rips zigzags, levelset zigzags of 3D
//! images, and small random zigzags for differential testing.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex::{build_simplicial, simplex_facets, Complex, ComplexError, CubicalGrid};
use crate::field::Field;
use crate::stream::{BlockOp, CellSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("points have differing dimensions")]
    RaggedPoints,
    #[error("point dimension {0} exceeds 16")]
    DimensionTooLarge(usize),
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("levels must be strictly increasing and at least two")]
    NonMonotoneLevels,
    #[error("image has {found} values, expected {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, GeneratorError> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(GeneratorError::RaggedPoints);
        }
        if dim > 16 {
            return Err(GeneratorError::DimensionTooLarge(dim));
        }
        Ok(PointCloud { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        self.points[i].iter().zip(&self.points[j]).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Scalar values on the vertices of an `nx × ny × nz` grid, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    pub dims: (usize, usize, usize),
    pub values: Vec<f64>,
}

impl ScalarImage {
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self, GeneratorError> {
        let expected = dims.0 * dims.1 * dims.2;
        if expected == 0 {
            return Err(GeneratorError::BadParameters("image dimensions must be positive".into()));
        }
        if values.len() != expected {
            return Err(GeneratorError::CountMismatch { expected, found: values.len() });
        }
        Ok(ScalarImage { dims, values })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Greedy furthest-point permutation from `start`. `eps[i]` is the distance
/// from the `(i+2)`-th point of the order to the first `i+1`.
pub fn furthest_point_ordering(pc: &PointCloud, start: usize) -> Result<(Vec<usize>, Vec<f64>), GeneratorError> {
    if pc.is_empty() {
        return Err(GeneratorError::EmptyCloud);
    }
    if start >= pc.len() {
        return Err(GeneratorError::BadParameters(format!("start index {start} out of range")));
    }
    let n = pc.len();
    let mut order = vec![start];
    let mut eps = Vec::with_capacity(n - 1);
    let mut best: Vec<f64> = (0..n).map(|j| pc.dist2(start, j)).collect();
    let mut used = vec![false; n];
    used[start] = true;
    for _ in 1..n {
        // ties go to the lowest index
        let mut pick = usize::MAX;
        for j in 0..n {
            if !used[j] && (pick == usize::MAX || best[j] > best[pick]) {
                pick = j;
            }
        }
        used[pick] = true;
        eps.push(best[pick].sqrt());
        order.push(pick);
        for j in 0..n {
            let d = pc.dist2(pick, j);
            if d < best[j] {
                best[j] = d;
            }
        }
    }
    Ok((order, eps))
}

/// Simplices of the Rips complex on `subset` at threshold `rho`, as sorted
/// vertex lists. An edge is present iff its squared length is at most `rho²`.
pub fn rips_simplices(pc: &PointCloud, subset: &[usize], rho: f64, max_dim: usize) -> Vec<Vec<u32>> {
    let mut verts: Vec<usize> = subset.to_vec();
    verts.sort_unstable();
    verts.dedup();
    let r2 = rho * rho;
    let nbrs: Vec<Vec<usize>> = (0..verts.len())
        .map(|a| ((a + 1)..verts.len()).filter(|&b| pc.dist2(verts[a], verts[b]) <= r2).collect())
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, Vec<usize>)> = (0..verts.len()).rev().map(|a| (vec![a], nbrs[a].clone())).collect();
    while let Some((simplex, cands)) = stack.pop() {
        out.push(simplex.iter().map(|&a| verts[a] as u32).collect());
        if simplex.len() > max_dim {
            continue;
        }
        for (i, &c) in cands.iter().enumerate().rev() {
            let next: Vec<usize> = cands[i + 1..].iter().copied().filter(|x| nbrs[c].binary_search(x).is_ok()).collect();
            let mut s = simplex.clone();
            s.push(c);
            stack.push((s, next));
        }
    }
    out
}

pub fn rips_complex(
    field: Field,
    pc: &PointCloud,
    subset: &[usize],
    rho: f64,
    max_dim: usize,
) -> Result<Complex, GeneratorError> {
    Ok(build_simplicial(field, &rips_simplices(pc, subset, rho, max_dim))?.0)
}

/// Assigns stable keys to simplices across a whole stream.
#[derive(Debug, Default)]
struct SimplexKeys {
    keys: BTreeMap<Vec<u32>, u64>,
}

impl SimplexKeys {
    fn key(&mut self, s: &[u32]) -> u64 {
        let next = self.keys.len() as u64;
        *self.keys.entry(s.to_vec()).or_insert(next)
    }

    fn spec(&mut self, s: &[u32]) -> CellSpec {
        let facets = simplex_facets(s).into_iter().map(|(f, c)| (self.key(&f), c)).collect();
        CellSpec { key: self.key(s), dim: s.len() - 1, facets }
    }
}

type SimplexSet = BTreeSet<Vec<u32>>;

fn by_dim_then_lex(a: &Vec<u32>, b: &Vec<u32>) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

fn forward_block(keys: &mut SimplexKeys, from: &SimplexSet, to: &SimplexSet, scale: Option<f64>) -> BlockOp {
    let mut new: Vec<&Vec<u32>> = to.difference(from).collect();
    new.sort_by(|a, b| by_dim_then_lex(a, b));
    BlockOp::Forward { cells: new.into_iter().map(|s| keys.spec(s)).collect(), scale }
}

fn backward_block(keys: &mut SimplexKeys, from: &SimplexSet, to: &SimplexSet, scale: Option<f64>) -> BlockOp {
    let mut gone: Vec<&Vec<u32>> = from.difference(to).collect();
    gone.sort_by(|a, b| by_dim_then_lex(b, a));
    BlockOp::Backward { keys: gone.into_iter().map(|s| keys.key(s)).collect(), scale }
}

/// Oscillating Rips zigzag over the furthest-point order from point 0:
///
/// `∅ → {p_1} → R^{νε_1}(P_2) ← R^{με_1}(P_2) → R^{νε_2}(P_3) ← … ← ∅`.
///
/// When a down-complex is not contained in the next up-complex, a backward
/// block to their intersection `R^{min(με_i, νε_{i+1})}(P_{i+1})` is
/// inserted first. Each block carries the threshold of the complex it ends
/// at; the first and the last block carry none.
pub fn oscillating_rips_stream(
    pc: &PointCloud,
    mu: f64,
    nu: f64,
    max_dim: usize,
) -> Result<Vec<BlockOp>, GeneratorError> {
    if !(mu > 0.0 && mu <= nu) {
        return Err(GeneratorError::BadParameters(format!("need 0 < mu <= nu, got mu={mu}, nu={nu}")));
    }
    let (order, eps) = furthest_point_ordering(pc, 0)?;
    let mut keys = SimplexKeys::default();
    let mut blocks = Vec::new();
    let empty = SimplexSet::new();
    let mut cur: SimplexSet = [vec![order[0] as u32]].into_iter().collect();
    blocks.push(forward_block(&mut keys, &empty, &cur, None));
    let mut down_scale: Option<f64> = None;
    for (i, &e) in eps.iter().enumerate() {
        let pts = &order[..i + 2];
        let up_rho = nu * e;
        let up: SimplexSet = rips_simplices(pc, pts, up_rho, max_dim).into_iter().collect();
        if !cur.is_subset(&up) {
            let meet: SimplexSet = cur.intersection(&up).cloned().collect();
            let scale = down_scale.map(|d| d.min(up_rho));
            blocks.push(backward_block(&mut keys, &cur, &meet, scale));
            cur = meet;
        }
        blocks.push(forward_block(&mut keys, &cur, &up, Some(up_rho)));
        let down_rho = mu * e;
        let down: SimplexSet = rips_simplices(pc, pts, down_rho, max_dim).into_iter().collect();
        blocks.push(backward_block(&mut keys, &up, &down, Some(down_rho)));
        cur = down;
        down_scale = Some(down_rho);
    }
    blocks.push(backward_block(&mut keys, &cur, &empty, None));
    Ok(blocks)
}

/// Levelset zigzag
///
/// `f⁻¹[s_0,s_1] → f⁻¹[s_0,s_2] ← f⁻¹[s_1,s_2] → f⁻¹[s_1,s_3] ← … ← f⁻¹[s_{k-2},s_{k-1}] ← ∅`
///
/// on the cubical complex of the image grid, where a cube lies in
/// `f⁻¹[a,b]` iff all its corner values do. Cell keys are grid keys. Each
/// block carries the midpoint of the range it ends at.
pub fn levelset_stream(img: &ScalarImage, levels: &[f64]) -> Result<Vec<BlockOp>, GeneratorError> {
    if levels.len() < 2 || levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(GeneratorError::NonMonotoneLevels);
    }
    let grid = CubicalGrid::new(img.dims)?;
    let n = grid.num_keys() as usize;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut dims = vec![0usize; n];
    for key in 0..n {
        let (a, b) = grid
            .corner_vertices(key as u64)
            .into_iter()
            .map(|v| img.values[v])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        lo[key] = a;
        hi[key] = b;
        dims[key] = grid.dim(key as u64);
    }
    let member = |key: usize, r: (f64, f64)| lo[key] >= r.0 && hi[key] <= r.1;
    let mut ranges = vec![(levels[0], levels[1])];
    for i in 1..levels.len() - 1 {
        ranges.push((levels[i - 1], levels[i + 1]));
        ranges.push((levels[i], levels[i + 1]));
    }
    let mut blocks = Vec::with_capacity(ranges.len() + 1);
    let mut prev: Option<(f64, f64)> = None;
    for (j, &r) in ranges.iter().enumerate() {
        let scale = Some(0.5 * (r.0 + r.1));
        let was = |key: usize| prev.is_some_and(|p| member(key, p));
        if j % 2 == 0 && j > 0 {
            let keys = (0..n).filter(|&k| was(k) && !member(k, r)).map(|k| k as u64).collect();
            blocks.push(BlockOp::Backward { keys, scale });
        } else {
            let mut added: Vec<usize> = (0..n).filter(|&k| member(k, r) && !was(k)).collect();
            added.sort_by_key(|&k| (dims[k], k));
            let cells = added
                .into_iter()
                .map(|k| CellSpec { key: k as u64, dim: dims[k], facets: grid.facets(k as u64) })
                .collect();
            blocks.push(BlockOp::Forward { cells, scale });
        }
        prev = Some(r);
    }
    let last = prev.unwrap();
    let keys = (0..n).filter(|&k| member(k, last)).map(|k| k as u64).collect();
    blocks.push(BlockOp::Backward { keys, scale: None });
    Ok(blocks)
}

/// Levels `s_0 = ⌊min/ε⌋·ε, s_0 + ε, …` up to the first one at or above
/// `max`, and at least two.
pub fn levels_from_epsilon(min: f64, max: f64, eps: f64) -> Result<Vec<f64>, GeneratorError> {
    if !(eps > 0.0) || !min.is_finite() || !max.is_finite() || min > max {
        return Err(GeneratorError::BadParameters(format!("cannot space levels over [{min}, {max}] by {eps}")));
    }
    let s0 = (min / eps).floor() * eps;
    let mut levels = vec![s0];
    let mut j = 1;
    loop {
        let s = s0 + j as f64 * eps;
        levels.push(s);
        if s >= max {
            break;
        }
        j += 1;
    }
    Ok(levels)
}

/// Smooth random image `f(x) = Σ a_j sin(2π ω_j·x + φ_j)` on `[0,1]³`
/// sampled at the grid vertices.
pub fn fourier_image(dims: (usize, usize, usize), seed: u64, terms: usize) -> Result<ScalarImage, GeneratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, [f64; 3], f64)> = (0..terms)
        .map(|_| {
            let a = rng.gen_range(-1.0..=1.0);
            let w = [0; 3].map(|_: i32| rng.gen_range(-8i32..=8) as f64);
            let phi = rng.gen_range(0.0..2.0 * PI);
            (a, w, phi)
        })
        .collect();
    let coord = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let mut values = Vec::with_capacity(dims.0 * dims.1 * dims.2);
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let p = [coord(x, dims.0), coord(y, dims.1), coord(z, dims.2)];
                let v = waves
                    .iter()
                    .map(|(a, w, phi)| a * (2.0 * PI * (w[0] * p[0] + w[1] * p[1] + w[2] * p[2]) + phi).sin())
                    .sum();
                values.push(v);
            }
        }
    }
    ScalarImage::new(dims, values)
}

/// Adds independent uniform noise in `[0, max]` to every vertex.
pub fn add_noise(img: &mut ScalarImage, max: f64, seed: u64) {
    if max <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for v in &mut img.values {
        *v += rng.gen_range(0.0..=max);
    }
}

/// `n` points spread uniformly over the unit circle: evenly spaced angles
/// with a seeded common rotation and a seeded jitter of at most a quarter
/// of the spacing per point.
pub fn circle_points(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 2.0 * PI / n.max(1) as f64;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let points = (0..n)
        .map(|k| {
            let t = phase + step * (k as f64 + rng.gen_range(-0.25..=0.25));
            vec![t.cos(), t.sin()]
        })
        .collect();
    PointCloud { dim: 2, points }
}

/// Bounds for [`random_stream`].
#[derive(Debug, Clone, Copy)]
pub struct RandomStreamParams {
    /// Simplices use vertices `0..vertices`.
    pub vertices: u32,
    pub max_live: usize,
    /// Number of blocks, including the final teardown.
    pub max_blocks: usize,
    pub max_dim: usize,
    pub max_block_len: usize,
}

impl Default for RandomStreamParams {
    fn default() -> Self {
        RandomStreamParams { vertices: 5, max_live: 12, max_blocks: 30, max_dim: 3, max_block_len: 4 }
    }
}

#[derive(Debug, Clone)]
struct LiveCell {
    dim: usize,
    facets: Vec<(u64, i64)>,
    /// source and scale factor of a copied cell
    copy_of: Option<(u64, i64)>,
}

/// A random zigzag of small complexes. Cells are either simplices on a few
/// vertices (keyed by vertex bitmask) or copies of a live cell with its
/// boundary scaled by a small integer, under fresh keys; the copies glue
/// spheres, disks with repeated boundaries, and cells whose boundary
/// vanishes mod `p`. The stream starts and ends empty.
pub fn random_stream<R: Rng>(rng: &mut R, params: RandomStreamParams) -> Vec<BlockOp> {
    let mut live: BTreeMap<u64, LiveCell> = BTreeMap::new();
    let mut next_fresh: u64 = 1 << params.vertices;
    let mut blocks = Vec::new();
    let arrows = rng.gen_range(1..params.max_blocks.max(2));
    for _ in 0..arrows {
        let forward = live.is_empty() || (live.len() < params.max_live && rng.gen_bool(0.6));
        let len = rng.gen_range(0..=params.max_block_len);
        if forward {
            let mut cells = Vec::new();
            for _ in 0..len {
                if live.len() >= params.max_live {
                    break;
                }
                let spec = if rng.gen_bool(0.5) {
                    random_simplex(rng, &live, params).map(|s| (s, None))
                } else {
                    random_copy(rng, &live, &mut next_fresh, params)
                };
                if let Some((spec, copy_of)) = spec {
                    live.insert(spec.key, LiveCell { dim: spec.dim, facets: spec.facets.clone(), copy_of });
                    cells.push(spec);
                }
            }
            blocks.push(BlockOp::Forward { cells, scale: None });
        } else {
            let mut keys = Vec::new();
            for _ in 0..len {
                let maximal: Vec<u64> = live
                    .keys()
                    .copied()
                    .filter(|k| !live.values().any(|c| c.facets.iter().any(|(f, _)| f == k)))
                    .collect();
                if maximal.is_empty() {
                    break;
                }
                let k = maximal[rng.gen_range(0..maximal.len())];
                live.remove(&k);
                keys.push(k);
            }
            blocks.push(BlockOp::Backward { keys, scale: None });
        }
    }
    let mut rest: Vec<u64> = live.keys().copied().collect();
    rest.reverse();
    blocks.push(BlockOp::Backward { keys: rest, scale: None });
    blocks
}

fn mask_vertices(mask: u64) -> Vec<u32> {
    (0..64).filter(|i| mask & (1 << i) != 0).collect()
}

fn random_simplex<R: Rng>(rng: &mut R, live: &BTreeMap<u64, LiveCell>, params: RandomStreamParams) -> Option<CellSpec> {
    let candidates: Vec<u64> = (1u64..(1 << params.vertices))
        .filter(|&m| !live.contains_key(&m))
        .filter(|&m| (m.count_ones() as usize) <= params.max_dim + 1)
        .filter(|&m| mask_vertices(m).iter().all(|&v| m.count_ones() == 1 || live.contains_key(&(m & !(1 << v)))))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    // favour high dimensions; vertices would otherwise crowd out the rest
    let top = candidates.iter().map(|m| m.count_ones()).max().unwrap();
    let mut d = top;
    while d > 1 && !rng.gen_bool(0.6) {
        d -= 1;
    }
    if !candidates.iter().any(|m| m.count_ones() == d) {
        d = top;
    }
    let of_dim: Vec<u64> = candidates.into_iter().filter(|m| m.count_ones() == d).collect();
    let m = of_dim[rng.gen_range(0..of_dim.len())];
    let verts = mask_vertices(m);
    let facets = simplex_facets(&verts)
        .into_iter()
        .map(|(f, c)| (f.iter().fold(0u64, |acc, &v| acc | 1 << v), c))
        .collect();
    Some(CellSpec { key: m, dim: verts.len() - 1, facets })
}

/// Either a copy of a live cell with its boundary scaled by `c`, or a cap
/// on a live copy `ρ'` of `ρ`, whose boundary `ρ' - c·ρ` is a cycle.
fn random_copy<R: Rng>(
    rng: &mut R,
    live: &BTreeMap<u64, LiveCell>,
    next_fresh: &mut u64,
    params: RandomStreamParams,
) -> Option<(CellSpec, Option<(u64, i64)>)> {
    let key = *next_fresh;
    *next_fresh += 1;
    let caps: Vec<(u64, usize, u64, i64)> = live
        .iter()
        .filter_map(|(&k, c)| c.copy_of.map(|(src, a)| (k, c.dim, src, a)))
        .filter(|&(_, d, src, _)| d < params.max_dim && live.contains_key(&src))
        .collect();
    if !caps.is_empty() && rng.gen_bool(0.4) {
        let (k, d, src, a) = caps[rng.gen_range(0..caps.len())];
        return Some((CellSpec { key, dim: d + 1, facets: vec![(k, 1), (src, -a)] }, None));
    }
    let sources: Vec<(&u64, &LiveCell)> =
        live.iter().filter(|(_, c)| c.dim >= 1 && c.dim <= params.max_dim).collect();
    if sources.is_empty() || rng.gen_bool(0.1) {
        return Some((CellSpec { key, dim: 0, facets: Vec::new() }, None));
    }
    // uniform over dimensions first, so spheres of every dimension appear
    let dims: BTreeSet<usize> = sources.iter().map(|(_, c)| c.dim).collect();
    let d = *dims.iter().nth(rng.gen_range(0..dims.len())).unwrap();
    let of_dim: Vec<(u64, &LiveCell)> =
        sources.iter().filter(|(_, c)| c.dim == d).map(|(&k, c)| (k, *c)).collect();
    let (src_key, src) = of_dim[rng.gen_range(0..of_dim.len())];
    let c: i64 = [1, -1, 2, 3][rng.gen_range(0..4)];
    let facets = src.facets.iter().map(|&(f, a)| (f, a * c)).collect();
    Some((CellSpec { key, dim: src.dim, facets }, Some((src_key, c))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn furthest_point_examples() {
        assert_eq!(furthest_point_ordering(&line(&[0.0, 1.0, 2.0]), 0).unwrap(), (vec![0, 2, 1], vec![2.0, 1.0]));
        assert_eq!(furthest_point_ordering(&line(&[3.0]), 0).unwrap(), (vec![0], vec![]));
        assert_eq!(furthest_point_ordering(&line(&[0.0, 0.0]), 0).unwrap().1, vec![0.0]);
        assert_eq!(furthest_point_ordering(&line(&[]), 0), Err(GeneratorError::EmptyCloud));
    }

    #[test]
    fn rips_threshold_is_inclusive() {
        let pc = line(&[0.0, 1.0]);
        assert_eq!(rips_simplices(&pc, &[0, 1], 0.5, 2).len(), 2);
        assert_eq!(rips_simplices(&pc, &[0, 1], 1.0, 2).len(), 3);
        let tri = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cx = rips_complex(Field::default(), &tri, &[0, 1, 2], 2.0, 2).unwrap();
        assert_eq!(cx.count_by_dim(), &[3, 3, 1]);
        assert_eq!(rips_simplices(&tri, &[0, 1, 2], 2.0, 1).len(), 6);
    }

    #[test]
    fn rips_cliques_match_brute_force() {
        let pc = circle_points(12, 3);
        let all: Vec<usize> = (0..12).collect();
        let mut got = rips_simplices(&pc, &all, 0.9, 3);
        got.sort();
        let mut want = Vec::new();
        for m in 1u32..(1 << 12) {
            let v: Vec<u32> = (0..12).filter(|i| m & (1 << i) != 0).collect();
            if v.len() <= 4 && v.iter().all(|&a| v.iter().all(|&b| pc.dist2(a as usize, b as usize) <= 0.81)) {
                want.push(v);
            }
        }
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn two_point_rips_stream() {
        let pc = line(&[0.0, 1.0]);
        let blocks = oscillating_rips_stream(&pc, 0.5, 1.0, 2).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!(blocks[0].len(), 1);
        assert_eq!(blocks[1].len(), 2);
        assert_eq!(blocks[1].scale(), Some(1.0));
        let BlockOp::Backward { keys, scale } = &blocks[2] else { panic!() };
        assert_eq!((keys.len(), *scale), (1, Some(0.5)));
        assert_eq!(blocks[3].len(), 2);
        assert!(oscillating_rips_stream(&pc, 2.0, 1.0, 2).is_err());
    }

    #[test]
    fn equal_mu_nu_removes_diameter_band() {
        let pc = circle_points(20, 9);
        let mu = 2.5;
        let blocks = oscillating_rips_stream(&pc, mu, mu, 2).unwrap();
        let (order, eps) = furthest_point_ordering(&pc, 0).unwrap();
        // with μ = ν the down blocks are empty and the shrink happens in the
        // intersection block before each point insertion
        let mut b = 1;
        for i in 0..eps.len() {
            if i > 0 {
                let prev = rips_simplices(&pc, &order[..i + 1], mu * eps[i - 1], 2).len();
                let next = rips_simplices(&pc, &order[..i + 1], mu * eps[i], 2).len();
                if prev != next {
                    let BlockOp::Backward { keys, .. } = &blocks[b] else { panic!("block {b}") };
                    assert_eq!(keys.len(), prev - next);
                    b += 1;
                }
            }
            assert!(matches!(blocks[b], BlockOp::Forward { .. }));
            assert!(matches!(&blocks[b + 1], BlockOp::Backward { keys, .. } if keys.is_empty()));
            b += 2;
        }
        assert_eq!(b + 1, blocks.len());
    }

    #[test]
    fn levelset_example() {
        let img = ScalarImage::new((3, 1, 1), vec![0.0, 1.0, 0.0]).unwrap();
        let blocks = levelset_stream(&img, &[-0.5, 0.5, 1.5]).unwrap();
        let lens: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        // 2 end vertices, then middle vertex and both edges, then the two
        // end vertices and edges leave, then the middle vertex
        assert_eq!(lens, vec![2, 3, 4, 1]);
        assert_eq!(blocks[1].scale(), Some(0.5));
        assert_eq!(levelset_stream(&img, &[1.0, 0.0]), Err(GeneratorError::NonMonotoneLevels));
    }

    #[test]
    fn constant_image_stays_full() {
        let img = ScalarImage::new((2, 2, 1), vec![1.0; 4]).unwrap();
        let blocks = levelset_stream(&img, &[0.0, 2.0, 3.0]).unwrap();
        let lens: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        assert_eq!(lens, vec![9, 0, 9, 0]);
    }

    #[test]
    fn levels_cover_the_range() {
        let l = levels_from_epsilon(-0.3, 0.5, 0.2).unwrap();
        assert_eq!(l.len(), 6);
        assert!((l[0] + 0.4).abs() < 1e-12 && *l.last().unwrap() >= 0.5);
        assert_eq!(levels_from_epsilon(1.0, 1.0, 0.5).unwrap(), vec![1.0, 1.5]);
    }

    #[test]
    fn fourier_is_deterministic() {
        let a = fourier_image((4, 3, 2), 11, 5).unwrap();
        let b = fourier_image((4, 3, 2), 11, 5).unwrap();
        assert_eq!(a, b);
        assert!(fourier_image((3, 3, 3), 1, 0).unwrap().values.iter().all(|&v| v == 0.0));
        let big = ScalarImage { dims: (129, 129, 129), values: Vec::new() };
        assert_eq!(big.dims.0 * big.dims.1 * big.dims.2, 2_146_689);
    }

    #[test]
    fn noise_is_bounded() {
        let mut img = fourier_image((3, 3, 3), 1, 0).unwrap();
        add_noise(&mut img, 0.1, 4);
        assert!(img.values.iter().all(|&v| (0.0..=0.1).contains(&v)));
    }

    #[test]
    fn random_streams_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let blocks = random_stream(&mut rng, RandomStreamParams::default());
            assert!(blocks.len() <= 30);
            let mut live: BTreeMap<u64, usize> = BTreeMap::new();
            for b in &blocks {
                match b {
                    BlockOp::Forward { cells, .. } => {
                        for c in cells {
                            assert!(c.facets.iter().all(|(f, _)| live.get(f) == Some(&(c.dim - 1))));
                            assert!(live.insert(c.key, c.dim).is_none());
                        }
                    }
                    BlockOp::Backward { keys, .. } => {
                        for k in keys {
                            assert!(live.remove(k).is_some());
                        }
                    }
                }
                assert!(live.len() <= 12);
            }
            assert!(live.is_empty());
        }
    }
}
