//! IO companion of `hivewatch-core`: the topology, rules, and trace file
//! formats, report JSON, and the pieces the CLI is built from.

pub mod formats;
