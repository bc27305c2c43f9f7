//! Blind human-rating service: hands out stories from a mixed pool of model
//! and human stories, records six Likert scores per rating, and aggregates
//! per-source means.

pub mod http;
pub mod service;

pub use service::*;
