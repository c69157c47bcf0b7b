//! Tooling for function-calling training corpora.

pub mod augment;
pub mod fc_match;
pub mod ingest;
pub mod judge;
pub mod literal;
pub mod manifest;
pub mod mixture;
pub mod model;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod stats;
pub mod value;
pub mod verify;

// Book chapters, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/judge.md")]
    mod judge {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/rendering.md")]
    mod rendering {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
