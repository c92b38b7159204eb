pub mod error;
pub mod game;
pub mod linalg;
pub mod markov;
pub mod payoff;
pub mod zd;
pub mod learn;
pub mod region;
pub mod parallel;
pub mod experiments;

pub use error::{Error, Result};
