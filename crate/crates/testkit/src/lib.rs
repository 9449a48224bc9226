//! Reference implementations used to cross-check the main crate.
//!
//! Everything in here is written for clarity over speed: dense vectors,
//! exhaustive enumeration, textbook formulas. None of it shares code with
//! the production crate, so agreement between the two is meaningful.

pub mod fixtures;
pub mod ndcg;
pub mod paths;
pub mod pearson;
pub mod reference;
pub mod stats;
pub mod transport;

pub use ndcg::{dcg, ndcg};
pub use paths::{best_path, PathQuery};
pub use pearson::pearson;
pub use reference::{forman_reference, hop_distances, lazy_measure, ollivier_reference, w1_reference};
pub use stats::{mean, population_std, quintile_gain};
pub use transport::{enumerate_transport, exact_transport, lp_transport};
