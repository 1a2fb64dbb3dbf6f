//! Ingestion and artifact serialization behind the `denspart` binary,
//! exposed as a library so integration tests read and write the exact
//! formats the binary does.

pub mod ingest;
pub mod jsonio;
