// mdbook cannot build listings that depend on a workspace crate, so each
// chapter is included here as the docs of an empty module and `cargo test
// --doc -p h4bp-book` runs every listing against the real library.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/model.md")]
pub mod model {}
#[doc = include_str!("src/equilibria.md")]
pub mod equilibria {}
#[doc = include_str!("src/regularization.md")]
pub mod regularization {}
#[doc = include_str!("src/propagation.md")]
pub mod propagation {}
#[doc = include_str!("src/periodic.md")]
pub mod periodic {}
#[doc = include_str!("src/continuation.md")]
pub mod continuation {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
