//! Synthetic documents and a scripted model used by tests, benchmarks and
//! the fixture recorder.

pub mod docx;
pub mod model;
pub mod pdf;
