//! Mining concept disks from paper abstracts and recombining them into
//! research-idea titles, with the evaluation and coverage tooling around it.

pub mod corpus;
pub mod coverage;
pub mod disk;
pub mod extraction;
pub mod gateway;
pub mod jsonl;
pub mod machine;
pub mod metrics;
pub mod projection;
pub mod prompt;
pub mod registry;
pub mod rewriting;
pub mod rng;
pub mod text;

pub use disk::Disk;
