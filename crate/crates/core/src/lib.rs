//! Video chaptering from timed transcripts.
//!
//! The pipeline turns speech transcripts and frame captions into a single
//! timestamped text, asks a text generator for `HH:MM:SS - Title` lines
//! (window by window for long videos), and merges the answers into a
//! [`ChapterSet`]. The [`metrics`] module scores predictions against
//! reference chapters and [`synth`] builds seeded test corpora.

pub mod error;
pub mod generate;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod select;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    format_timestamp, parse_timestamp, segments_of, Chapter, ChapterSet, Modality, Segment,
    TimedUtterance, Timestamp, VideoDocument,
};
