//! Reinforcement learning with an arbiter that decides, at every step,
//! whether to explore, exploit a Q-learner or follow external action advice.

pub mod advice;
pub mod arbiter;
pub mod env;
pub mod harness;
mod error;
pub mod qlearn;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/advice.md")]
    mod advice {}
    #[doc = include_str!("../../../book/src/arbiter.md")]
    mod arbiter {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
