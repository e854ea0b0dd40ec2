//! Problem-file ingestion, command dispatch and result records for the
//! `torsion` CLI.

pub mod ops;
pub mod records;
pub mod schema;
pub mod verify;
