//! Visual storytelling: an encoder LSTM summarizes five image embeddings
//! into a context vector and five position-specific decoder LSTMs each write
//! one segment of the story.

pub mod binio;
pub mod data;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod text;
pub mod training;
