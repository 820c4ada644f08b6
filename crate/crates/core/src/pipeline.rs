//! Drives a block stream through the Morse state and the zigzag kernel.

use std::fmt;

use thiserror::Error;

use crate::field::Field;
use crate::kernel::{KernelError, ZigzagKernel};
use crate::morse::{check_matching, complex_betti, is_acyclic_matching, morse_betti, morse_boundary};
use crate::stream::{AtomicOp, BlockOp, MorseState, MorseUpdate, StreamError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("block {block}: {source}")]
    Stream { block: usize, source: StreamError },
    #[error("block {block}: {source}")]
    Kernel { block: usize, source: KernelError },
    #[error("stream ends with {0} cells left; it must end at the empty complex")]
    NotEmptyAtEnd(usize),
    #[error("block {block}: validation failed: {message}")]
    Validation { block: usize, message: String },
}

/// A persistence interval over block indices, with optional filtration
/// values of its endpoint blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub dim: usize,
    pub birth: usize,
    pub death: usize,
    pub scale_birth: Option<f64>,
    pub scale_death: Option<f64>,
}

/// Multiset of intervals, kept sorted by `(dim, birth, death)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub intervals: Vec<Interval>,
}

impl PersistenceDiagram {
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| (a.dim, a.birth, a.death).cmp(&(b.dim, b.birth, b.death)));
        PersistenceDiagram { intervals }
    }

    /// `(dim, birth, death)` triples, sorted.
    pub fn triples(&self) -> Vec<(usize, usize, usize)> {
        self.intervals.iter().map(|i| (i.dim, i.birth, i.death)).collect()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Size statistics of a run: `N` cell insertions and removals in the input
/// filtration, `n` of them seen by the kernel as critical-cell events, and
/// the largest full and reduced complexes observed at block ends.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub total_ops: usize,
    pub critical_ops: usize,
    pub x_max: usize,
    pub a_max: usize,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={}, n={}, Xmax={}, Amax={}", self.total_ops, self.critical_ops, self.x_max, self.a_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub field: Field,
    /// Reduce every forward block by coreduction; otherwise all cells are
    /// critical.
    pub morse: bool,
    /// Run the invariant checks of [`Validator`] after every atomic step.
    pub validate: bool,
}

impl RunOptions {
    pub fn new(field: Field, morse: bool) -> Self {
        RunOptions { field, morse, validate: false }
    }
}

/// Hooks called by [`run_stream_observed`]. Returning an error aborts the run.
pub trait Observer {
    fn after_atomic(
        &mut self,
        _block: usize,
        _op: &AtomicOp,
        _update: &MorseUpdate,
        _state: &MorseState,
        _kernel: &ZigzagKernel,
    ) -> Result<(), String> {
        Ok(())
    }

    /// Called after a Morse pair `(tau, sigma)` is split in the kernel and
    /// before `sigma` is removed from it. `state` no longer contains
    /// `sigma`; its Morse boundary is in `update`.
    fn after_unpair(
        &mut self,
        _block: usize,
        _update: &MorseUpdate,
        _state: &MorseState,
        _kernel: &ZigzagKernel,
    ) -> Result<(), String> {
        Ok(())
    }

    fn after_block(&mut self, _block: usize, _state: &MorseState, _kernel: &ZigzagKernel) -> Result<(), String> {
        Ok(())
    }
}

/// Observer that does nothing.
pub struct NoChecks;

impl Observer for NoChecks {}

/// Exhaustive invariant checks after every atomic operation: the matching
/// is a valid acyclic Morse matching, the Morse complex and the full complex
/// have equal Betti numbers (both by direct rank computation, and equal to
/// the kernel's count of cycle columns), and the homology matrix satisfies
/// its defining conditions.
#[derive(Debug, Clone, Copy)]
pub struct Validator {
    pub matching: bool,
    pub betti: bool,
    pub kernel: bool,
    /// Number of atomic steps checked.
    pub steps: usize,
    /// Number of intermediate kernel states checked between a split and
    /// the following removal.
    pub unpair_checks: usize,
}

impl Default for Validator {
    fn default() -> Self {
        Validator { matching: true, betti: true, kernel: true, steps: 0, unpair_checks: 0 }
    }
}

impl Observer for Validator {
    fn after_atomic(
        &mut self,
        _block: usize,
        _op: &AtomicOp,
        _update: &MorseUpdate,
        state: &MorseState,
        kernel: &ZigzagKernel,
    ) -> Result<(), String> {
        let cx = state.complex();
        let m = state.matching();
        if self.matching {
            check_matching(cx, m)?;
            if !is_acyclic_matching(cx, m) {
                return Err("matching has a cycle".into());
            }
        }
        if self.betti {
            let bx = complex_betti(cx);
            let ba = morse_betti(cx, m).map_err(|e| e.to_string())?;
            if bx != ba {
                return Err(format!("Betti numbers differ: complex {bx:?}, Morse complex {ba:?}"));
            }
            if kernel.betti() != ba {
                return Err(format!("kernel holds {:?} cycles, Morse complex has Betti {ba:?}", kernel.betti()));
            }
        }
        if self.kernel {
            kernel.check_invariants(|id| morse_boundary(cx, m, id).expect("rows are critical"))?;
        }
        self.steps += 1;
        Ok(())
    }

    fn after_unpair(
        &mut self,
        _block: usize,
        update: &MorseUpdate,
        state: &MorseState,
        kernel: &ZigzagKernel,
    ) -> Result<(), String> {
        let MorseUpdate::Unpair { sigma, boundary_sigma, .. } = update else {
            return Ok(());
        };
        if self.kernel {
            let (cx, m) = (state.complex(), state.matching());
            // sigma is maximal, so no other Morse boundary involves it
            kernel.check_invariants(|id| {
                if id == *sigma {
                    boundary_sigma.clone()
                } else {
                    morse_boundary(cx, m, id).expect("rows are critical")
                }
            })?;
        }
        self.unpair_checks += 1;
        Ok(())
    }
}

/// Result of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagram: PersistenceDiagram,
    pub metrics: Metrics,
}

/// Computes the persistence diagram of a stream that starts and ends at the
/// empty complex.
pub fn run_stream(blocks: &[BlockOp], opts: RunOptions) -> Result<RunOutput, PipelineError> {
    if opts.validate {
        let mut v = Validator::default();
        run_stream_observed(blocks, opts, &mut v)
    } else {
        run_stream_observed(blocks, opts, &mut NoChecks)
    }
}

/// [`run_stream`] with caller-supplied hooks.
pub fn run_stream_observed<O: Observer + ?Sized>(
    blocks: &[BlockOp],
    opts: RunOptions,
    observer: &mut O,
) -> Result<RunOutput, PipelineError> {
    let mut state = MorseState::new(opts.field, opts.validate);
    let mut kernel = ZigzagKernel::new(opts.field);
    let mut metrics = Metrics::default();
    for (i, block) in blocks.iter().enumerate() {
        let b = i + 1;
        let serr = |source| PipelineError::Stream { block: b, source };
        let kerr = |source| PipelineError::Kernel { block: b, source };
        let ops = match block {
            BlockOp::Forward { cells, .. } => state.forward_ops(cells, opts.morse).map_err(serr)?,
            BlockOp::Backward { keys, .. } => state.backward_ops(keys).map_err(serr)?,
        };
        for op in &ops {
            metrics.total_ops += op.cell_count();
            if op.is_critical_event() {
                metrics.critical_ops += 1;
            }
            let update = state.apply_atomic(op).map_err(serr)?;
            match &update {
                MorseUpdate::Nothing => {}
                MorseUpdate::Insert { sigma, dim, boundary } => {
                    kernel.forward_insert(*sigma, *dim, boundary, b).map_err(kerr)?;
                }
                MorseUpdate::Remove { sigma } => {
                    kernel.backward_remove(*sigma, b).map_err(kerr)?;
                }
                MorseUpdate::Unpair { tau, sigma, boundary_sigma, coboundary_tau, incidence } => {
                    kernel
                        .unpair_update(*tau, *sigma, boundary_sigma, coboundary_tau, *incidence)
                        .map_err(kerr)?;
                    observer
                        .after_unpair(b, &update, &state, &kernel)
                        .map_err(|message| PipelineError::Validation { block: b, message })?;
                    kernel.backward_remove(*sigma, b).map_err(kerr)?;
                }
            }
            observer
                .after_atomic(b, op, &update, &state, &kernel)
                .map_err(|message| PipelineError::Validation { block: b, message })?;
        }
        metrics.x_max = metrics.x_max.max(state.num_cells());
        metrics.a_max = metrics.a_max.max(state.num_critical());
        observer
            .after_block(b, &state, &kernel)
            .map_err(|message| PipelineError::Validation { block: b, message })?;
    }
    if state.num_cells() != 0 {
        return Err(PipelineError::NotEmptyAtEnd(state.num_cells()));
    }
    let scales: Vec<Option<f64>> = blocks.iter().map(|b| b.scale()).collect();
    let intervals = kernel
        .take_intervals()
        .into_iter()
        .map(|iv| Interval {
            dim: iv.dim,
            birth: iv.birth,
            death: iv.death,
            scale_birth: scales[iv.birth - 1],
            scale_death: scales[iv.death - 1],
        })
        .collect();
    Ok(RunOutput { diagram: PersistenceDiagram::from_intervals(intervals), metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::CellSpec;

    fn spec(key: u64, dim: usize, facets: &[(u64, i64)]) -> CellSpec {
        CellSpec { key, dim, facets: facets.to_vec() }
    }

    fn circle() -> Vec<CellSpec> {
        vec![
            spec(1, 0, &[]),
            spec(2, 0, &[]),
            spec(3, 0, &[]),
            spec(12, 1, &[(1, -1), (2, 1)]),
            spec(13, 1, &[(1, -1), (3, 1)]),
            spec(23, 1, &[(2, -1), (3, 1)]),
        ]
    }

    fn opts(morse: bool) -> RunOptions {
        RunOptions { field: Field::new(2).unwrap(), morse, validate: true }
    }

    #[test]
    fn empty_stream() {
        let out = run_stream(&[], opts(true)).unwrap();
        assert!(out.diagram.is_empty());
        assert_eq!(out.metrics, Metrics::default());
    }

    #[test]
    fn single_vertex() {
        let blocks = vec![
            BlockOp::Forward { cells: vec![spec(7, 0, &[])], scale: None },
            BlockOp::Backward { keys: vec![7], scale: None },
        ];
        let out = run_stream(&blocks, opts(true)).unwrap();
        assert_eq!(out.diagram.triples(), vec![(0, 1, 1)]);
    }

    #[test]
    fn circle_in_and_out() {
        let blocks = vec![
            BlockOp::Forward { cells: circle(), scale: Some(0.5) },
            BlockOp::Backward { keys: vec![1, 2, 3, 12, 13, 23], scale: Some(0.25) },
        ];
        for morse in [true, false] {
            let out = run_stream(&blocks, opts(morse)).unwrap();
            assert_eq!(out.diagram.triples(), vec![(0, 1, 1), (1, 1, 1)]);
            assert_eq!(out.diagram.intervals[0].scale_birth, Some(0.5));
            assert_eq!(out.diagram.intervals[0].scale_death, Some(0.5));
        }
    }

    #[test]
    fn stream_must_end_empty() {
        let blocks = vec![BlockOp::Forward { cells: vec![spec(7, 0, &[])], scale: None }];
        assert_eq!(run_stream(&blocks, opts(true)).unwrap_err(), PipelineError::NotEmptyAtEnd(1));
    }

    #[test]
    fn disk_punctured_then_closed() {
        let mut disk = circle();
        disk.push(spec(123, 2, &[(23, 1), (13, -1), (12, 1)]));
        let keys: Vec<u64> = circle().iter().map(|c| c.key).collect();
        let blocks = vec![
            BlockOp::Forward { cells: disk.clone(), scale: None },
            BlockOp::Backward { keys: vec![123], scale: None },
            BlockOp::Forward { cells: vec![disk[6].clone()], scale: None },
            BlockOp::Backward { keys: keys.iter().copied().chain([123]).collect(), scale: None },
        ];
        for p in [2, 3, 5] {
            for morse in [true, false] {
                let o = RunOptions { field: Field::new(p).unwrap(), morse, validate: true };
                let out = run_stream(&blocks, o).unwrap();
                assert_eq!(out.diagram.triples(), vec![(0, 1, 3), (1, 2, 2)], "p={p} morse={morse}");
            }
        }
    }
}
