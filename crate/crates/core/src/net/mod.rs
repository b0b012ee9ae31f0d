//! Encoder/decoder node grids for the three skip topologies, with the
//! segmentation head and the optional classification head.
//!
//! Node `(i, j)` sits at down-sampling level `i` and skip column `j`.
//! Column 0 is the encoder (row `L` is the center block); every node with
//! `j > 0` upsamples the node below-left of it and concatenates it with
//! same-row features chosen by the [`SkipMode`].

mod config;
mod graph;
mod topology;

pub use config::{ArchConfig, SkipMode};
pub use graph::{apply_encoder_transfer, is_encoder_param, Heads, NetOutput, NetworkGraph, Traced};
pub use topology::{
    count_parameters, node_output_shape, ClassifierSpec, ConvSpec, DenseSpec, NodeId, NodeInput,
    NodeSpec, Topology,
};
