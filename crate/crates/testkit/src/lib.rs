//! Test support: brute-force oracles written independently of the engine,
//! and seeded generators for documents, mock scripts and traces.

pub mod gen;
pub mod oracle;
