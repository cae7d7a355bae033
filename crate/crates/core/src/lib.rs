//! Conflict detection and root cause tracing for xApps sharing a RAN.
//!
//! Binary state rows over xApps, parameters and KPIs are turned into
//! conflict graphs, classified by a small graph convolutional network trained
//! with focal loss, and traced back to the xApps responsible.

pub mod cli;
pub mod conflict_sim;
pub mod error;
pub mod gap;
pub mod gsc;
pub mod metrics;
pub mod numerics;
pub mod rca;

pub use conflict_sim::{
    label_row, new_topology, synth_dataset, BinaryStateRow, ConflictLabel, Dataset, NodeRef, States, Topology,
};
pub use error::{Error, Result};
pub use gap::{predict, train, Checkpoint, FocalConfig, ModelParams, TrainConfig};
pub use gsc::{build_graph, ConflictGraph, EdgeKind};
pub use metrics::{ConfusionMatrix, Prf};
pub use rca::{analyze, RcaReport, RcaRow};
