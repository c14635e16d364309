//! Linguistic alignment between authentic and generated social-media
//! replies, and a detector that tells them apart.

pub mod alignment;
pub mod clustering;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod encoders;
pub mod error;
pub mod features;
pub mod morphosyntax;
pub mod pipeline;
pub mod semantics;
pub mod stats;
pub mod textstats;

pub use error::{Error, Result};
