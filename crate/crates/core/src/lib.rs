//! Crowd-flow segmentation from block motion-vector fields.

pub mod angle;
pub mod config;
pub mod crf;
pub mod error;
pub mod expansion;
pub mod fixtures;
pub mod maxflow;
pub mod metrics;
pub mod mvfield;
pub mod oracle;
pub mod pgm;
pub mod pipeline;
pub mod synth;

pub use config::RunSettings;
pub use crf::{CrfParams, CrfProblem, Label, LabelSet, Labeling, BACKGROUND};
pub use error::{Error, Result};
pub use expansion::{minimize, SolverReport};
pub use maxflow::{max_flow, FlowNetwork, MinCut};
pub use metrics::{jaccard, EvalRow, LabelMap, StageSeconds};
pub use mvfield::{Motion, MotionField};
pub use pipeline::{run, Flow, FlowResult, PipelineConfig};
pub use synth::SceneSpec;
