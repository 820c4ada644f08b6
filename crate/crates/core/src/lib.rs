//! Streaming zigzag persistent homology with on-the-fly discrete Morse
//! reduction.

pub mod betti;
pub mod chain;
pub mod cli;
pub mod complex;
pub mod field;
pub mod generators;
pub mod io;
pub mod kernel;
pub mod morse;
pub mod oracle;
pub mod pipeline;
pub mod stream;
