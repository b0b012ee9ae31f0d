//! Shape-level plan of a network: which nodes exist, what feeds them and
//! which layers they hold. Building the plan allocates no weights, so
//! parameter counts at full scale are cheap.

use std::fmt;

use super::config::{ArchConfig, SkipMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub i: usize,
    pub j: usize,
}

impl NodeId {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{},{}", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeInput {
    /// Output of a node at the same resolution.
    Same(NodeId),
    /// Output of the node one row down, bilinearly upsampled 2x.
    Upsampled(NodeId),
    /// Output of the node one row up, max-pooled 2x2.
    Pooled(NodeId),
    /// The network input image.
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    /// Parameter prefix; the kernel is `{name}.kernel`, the bias `{name}.bias`.
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvSpec {
    fn new(name: String, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            name,
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSpec {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
}

impl DenseSpec {
    pub fn parameter_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// A grid node: its inputs (concatenated in order) and its convolution
/// stack, every convolution followed by ReLU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub inputs: Vec<NodeInput>,
    pub convs: Vec<ConvSpec>,
    pub out_channels: usize,
    pub spatial: usize,
}

/// Classification head fed by the center node `X^{L,0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierSpec {
    /// 1x1 channel reduction, no activation.
    pub reduce: ConvSpec,
    /// 3x3 conv + ReLU stages; `pool_after[k]` says whether stage `k` is
    /// followed by a 2x2 max-pool.
    pub stages: Vec<ConvSpec>,
    pub pool_after: Vec<bool>,
    /// Two hidden layers with ReLU and dropout, then the output layer
    /// feeding softmax.
    pub hidden: Vec<DenseSpec>,
    pub output: DenseSpec,
}

impl ClassifierSpec {
    pub fn parameter_count(&self) -> usize {
        self.reduce.parameter_count()
            + self
                .stages
                .iter()
                .map(ConvSpec::parameter_count)
                .sum::<usize>()
            + self
                .hidden
                .iter()
                .map(DenseSpec::parameter_count)
                .sum::<usize>()
            + self.output.parameter_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub config: ArchConfig,
    /// Nodes in an order where every input precedes its consumer.
    pub nodes: Vec<NodeSpec>,
    /// 1x1 conv + sigmoid reading `X^{0,L}`.
    pub seg_head: ConvSpec,
    pub classifier: Option<ClassifierSpec>,
}

/// Parameter prefix for node `(i, j)`.
pub(crate) fn node_prefix(config: &ArchConfig, id: NodeId) -> String {
    match (id.i, id.j) {
        (i, 0) if i == config.levels => "center".to_string(),
        (i, 0) => format!("enc{i}"),
        (i, j) => format!("x{i}_{j}"),
    }
}

fn node_exists(config: &ArchConfig, id: NodeId) -> bool {
    let l = config.levels;
    if id.i > l {
        return false;
    }
    match (id.j, config.skip_mode) {
        (0, _) => true,
        (_, SkipMode::Unet) => id.i + id.j == l,
        (_, _) => id.i + id.j <= l,
    }
}

impl Topology {
    pub fn new(config: &ArchConfig) -> Result<Self> {
        config.validate()?;
        let l = config.levels;
        let mut nodes = Vec::new();

        for i in 0..=l {
            let id = NodeId::new(i, 0);
            let prefix = node_prefix(config, id);
            let out = config.channels(i);
            let (input, mut in_ch) = if i == 0 {
                (NodeInput::Image, 1)
            } else {
                (
                    NodeInput::Pooled(NodeId::new(i - 1, 0)),
                    config.channels(i - 1),
                )
            };
            let mut convs = Vec::new();
            for k in 0..config.encoder_convs(i) {
                convs.push(ConvSpec::new(format!("{prefix}.conv{k}"), in_ch, out, 3));
                in_ch = out;
            }
            nodes.push(NodeSpec {
                id,
                inputs: vec![input],
                convs,
                out_channels: out,
                spatial: config.spatial(i),
            });
        }

        for j in 1..=l {
            for i in 0..=(l - j) {
                let id = NodeId::new(i, j);
                if !node_exists(config, id) {
                    continue;
                }
                let mut inputs: Vec<NodeInput> = match config.skip_mode {
                    SkipMode::Unet => vec![NodeInput::Same(NodeId::new(i, 0))],
                    SkipMode::UnetPlusPlus => {
                        (0..j).map(|k| NodeInput::Same(NodeId::new(i, k))).collect()
                    }
                    SkipMode::Streamlined => vec![NodeInput::Same(NodeId::new(i, j - 1))],
                };
                inputs.push(NodeInput::Upsampled(NodeId::new(i + 1, j - 1)));
                let out = config.channels(i);
                let in_ch: usize = inputs
                    .iter()
                    .map(|inp| match inp {
                        NodeInput::Same(n) | NodeInput::Upsampled(n) | NodeInput::Pooled(n) => {
                            config.channels(n.i)
                        }
                        NodeInput::Image => 1,
                    })
                    .sum();
                let prefix = node_prefix(config, id);
                nodes.push(NodeSpec {
                    id,
                    inputs,
                    convs: vec![
                        ConvSpec::new(format!("{prefix}.conv0"), in_ch, out, 3),
                        ConvSpec::new(format!("{prefix}.conv1"), out, out, 3),
                    ],
                    out_channels: out,
                    spatial: config.spatial(i),
                });
            }
        }

        let seg_head = ConvSpec::new("seg_head".into(), config.channels(0), 1, 1);
        let classifier = config.with_classifier.then(|| classifier_spec(config));
        Ok(Self {
            config: config.clone(),
            nodes,
            seg_head,
            classifier,
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node feeding the segmentation head, `X^{0,L}`.
    pub fn seg_source(&self) -> NodeId {
        NodeId::new(0, self.config.levels)
    }

    /// Node feeding the classifier, `X^{L,0}`.
    pub fn center(&self) -> NodeId {
        NodeId::new(self.config.levels, 0)
    }

    pub fn parameter_count(&self) -> usize {
        let nodes: usize = self
            .nodes
            .iter()
            .flat_map(|n| &n.convs)
            .map(ConvSpec::parameter_count)
            .sum();
        nodes
            + self.seg_head.parameter_count()
            + self
                .classifier
                .as_ref()
                .map_or(0, ClassifierSpec::parameter_count)
    }
}

fn classifier_spec(config: &ArchConfig) -> ClassifierSpec {
    let width = config.classifier_width;
    let mut spatial = config.spatial(config.levels);
    let reduce = ConvSpec::new(
        "cls.reduce".into(),
        config.channels(config.levels),
        width,
        1,
    );
    let mut stages = Vec::new();
    let mut pool_after = Vec::new();
    for k in 0..3 {
        stages.push(ConvSpec::new(format!("cls.conv{k}"), width, width, 3));
        // pool only while there is a 2x2 window left to pool
        let pool = spatial >= 2 && spatial.is_multiple_of(2);
        if pool {
            spatial /= 2;
        }
        pool_after.push(pool);
    }
    let mut features = width * spatial * spatial;
    let mut hidden = Vec::new();
    for (k, &g) in config.dense_widths.iter().enumerate() {
        hidden.push(DenseSpec {
            name: format!("cls.fc{k}"),
            inputs: features,
            outputs: g,
        });
        features = g;
    }
    ClassifierSpec {
        reduce,
        stages,
        pool_after,
        hidden,
        output: DenseSpec {
            name: "cls.out".into(),
            inputs: features,
            outputs: config.num_classes,
        },
    }
}

/// Exact number of scalar parameters of the network `config` describes.
pub fn count_parameters(config: &ArchConfig) -> Result<usize> {
    Ok(Topology::new(config)?.parameter_count())
}

/// `(channels, height, width)` of node `(i, j)`'s output.
pub fn node_output_shape(config: &ArchConfig, i: usize, j: usize) -> Result<(usize, usize, usize)> {
    config.validate()?;
    let id = NodeId::new(i, j);
    if !node_exists(config, id) {
        return Err(Error::InvalidArgument(format!(
            "node {id} does not exist in a {} network with {} levels",
            config.skip_mode, config.levels
        )));
    }
    let s = config.spatial(i);
    Ok((config.channels(i), s, s))
}
