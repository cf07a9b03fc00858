//! Compiles and runs every Rust code block in the book as a doc-test, so
//! `cargo test` fails whenever the guide drifts from the library. One
//! module per chapter keeps failures attributable to a file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tables.md")]
pub mod tables {}

#[doc = include_str!("../../../book/src/matrices.md")]
pub mod matrices {}

#[doc = include_str!("../../../book/src/mechanism.md")]
pub mod mechanism {}

#[doc = include_str!("../../../book/src/guarantees.md")]
pub mod guarantees {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/reconstruction.md")]
pub mod reconstruction {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
