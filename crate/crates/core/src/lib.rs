pub mod corpus;
pub mod cli;
pub mod counting;
pub mod criteria;
pub mod embedding;
pub mod error;
pub mod expr;
pub mod io;
pub mod scalar;
pub mod measure;
pub mod profiles;
pub mod reproduce;
pub mod realization;
pub mod spec;
pub mod svg;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use spec::{validate, BlockRule, MoranSpec, RawSpec, SequenceRule, Word};
