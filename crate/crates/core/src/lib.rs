//! Discussion-turn specificity: corpus handling, lexical resources, text
//! processing, feature extraction, models and evaluation.

pub mod corpus;
pub mod lexicons;
pub mod textproc;
pub mod features;
pub mod ml;
pub mod eval;
pub mod neural;
pub mod pipeline;
