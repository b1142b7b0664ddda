//! Skip-Gram word embeddings and the explicit representations derived from
//! them, PMI-family baselines, word-association evaluation and query-local
//! adaptation.

pub mod cli;
pub mod cooc;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod expsg;
pub mod local;
pub mod manifest;
pub mod matrix;
pub mod neighbors;
pub mod pmi;
pub mod sgns;
pub mod synthetic;

pub use cooc::CoocTable;
pub use corpus::{TokenStream, Vocabulary};
pub use error::{Error, Result};
pub use expsg::{expsg, prexpsg, rexpsg};
pub use matrix::{BuilderTag, ExplicitMatrix};
pub use neighbors::{neighbors, Representation};
pub use pmi::{pmi, ppmi, sppmi};
pub use sgns::{train, DenseEmbeddings, TrainConfig};
