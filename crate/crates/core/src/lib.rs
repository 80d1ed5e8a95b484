pub mod classify;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod handid;
pub mod imaging;
pub mod ingest;
pub mod pipeline;
pub mod propose;
pub mod segmentation;
pub mod synth;
pub mod timeline;
pub mod types;

pub use config::{load_config, PipelineConfig};
pub use error::{Error, Result};
pub use types::{angle, BoundingBox, FrameImage, HandObservation, Laterality};
