//! The user guide, embedded as documentation so that every code block in
//! it compiles and runs with `cargo test --doc`. The rendered book lives
//! in `book/` at the repository root (`mdbook build book`); these modules
//! exist only to keep the guide and the crate from drifting apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/profile.md")]
pub mod profile {}

#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}

#[doc = include_str!("../../../book/src/recovery.md")]
pub mod recovery {}

#[doc = include_str!("../../../book/src/energies.md")]
pub mod energies {}

#[doc = include_str!("../../../book/src/connectedness.md")]
pub mod connectedness {}

#[doc = include_str!("../../../book/src/flow.md")]
pub mod flow {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
