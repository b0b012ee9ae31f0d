use std::collections::BTreeMap;

use super::config::ArchConfig;
use super::topology::{ConvSpec, DenseSpec, NodeId, NodeInput, Topology};
use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::ops::Mode;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::{init_he, ParamKind, ParamStore, Parameter, WeightMap};

/// Which heads a forward pass should evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heads {
    pub segmentation: bool,
    pub classification: bool,
}

impl Heads {
    pub const ALL: Heads = Heads {
        segmentation: true,
        classification: true,
    };
    pub const SEGMENTATION: Heads = Heads {
        segmentation: true,
        classification: false,
    };
    pub const CLASSIFICATION: Heads = Heads {
        segmentation: false,
        classification: true,
    };
}

/// Names under the encoder and center blocks, the part shared by transfer.
pub fn is_encoder_param(name: &str) -> bool {
    name.starts_with("center.")
        || name
            .strip_prefix("enc")
            .is_some_and(|rest| rest.starts_with(|c: char| c.is_ascii_digit()))
}

/// A built network: its plan plus initialized parameters.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    topology: Topology,
    params: ParamStore,
}

/// A recorded forward pass, ready for backpropagation.
#[derive(Debug)]
pub struct Traced {
    pub tape: Tape,
    pub seg_probs: Option<Var>,
    pub class_probs: Option<Var>,
    pub nodes: BTreeMap<NodeId, Var>,
    params: Vec<(String, Var)>,
}

/// Evaluated head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    /// `(N, 1, hw, hw)` foreground probabilities.
    pub seg_probs: Option<Tensor>,
    /// `(N, K)` class probabilities.
    pub class_probs: Option<Tensor>,
}

impl NetworkGraph {
    /// Builds the graph and He-initializes every parameter, drawing in
    /// parameter-name order.
    pub fn build(config: &ArchConfig, rng: &mut Rng) -> Result<Self> {
        let topology = Topology::new(config)?;
        let mut params = ParamStore::new();
        let mut add_conv = |c: &ConvSpec| -> Result<()> {
            params.insert(Parameter::new(
                format!("{}.kernel", c.name),
                ParamKind::ConvKernel,
                Tensor::zeros(&[c.out_channels, c.in_channels, c.kernel, c.kernel]),
            ))?;
            params.insert(Parameter::new(
                format!("{}.bias", c.name),
                ParamKind::Bias,
                Tensor::zeros(&[c.out_channels]),
            ))
        };
        for node in &topology.nodes {
            for c in &node.convs {
                add_conv(c)?;
            }
        }
        add_conv(&topology.seg_head)?;
        if let Some(cls) = &topology.classifier {
            add_conv(&cls.reduce)?;
            for c in &cls.stages {
                add_conv(c)?;
            }
            for d in cls.hidden.iter().chain(std::iter::once(&cls.output)) {
                params.insert(Parameter::new(
                    format!("{}.weight", d.name),
                    ParamKind::DenseWeight,
                    Tensor::zeros(&[d.inputs, d.outputs]),
                ))?;
                params.insert(Parameter::new(
                    format!("{}.bias", d.name),
                    ParamKind::Bias,
                    Tensor::zeros(&[d.outputs]),
                ))?;
            }
        }
        for p in params.iter_mut() {
            init_he(p, rng);
        }
        Ok(Self { topology, params })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.topology.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Exact number of scalar parameters.
    pub fn count_parameters(&self) -> usize {
        self.params.scalar_count()
    }

    /// Records a forward pass of `images (N, 1, hw, hw)` on a new tape.
    pub fn trace(
        &self,
        images: &Tensor,
        mode: Mode,
        rng: &mut Rng,
        heads: Heads,
    ) -> Result<Traced> {
        let hw = self.config().input_hw;
        if images.rank() != 4 || images.shape()[1..] != [1, hw, hw] {
            return Err(Error::shape(
                "forward",
                format!(
                    "expected (N, 1, {hw}, {hw}) images, got {:?}",
                    images.shape()
                ),
            ));
        }
        if heads.classification && self.topology.classifier.is_none() {
            return Err(Error::InvalidArgument(
                "classification requested from a network without a classifier".into(),
            ));
        }
        let mut t = Tracer {
            tape: Tape::new(),
            params: &self.params,
            leaves: BTreeMap::new(),
        };
        // Pixels in [0, 1] are centered to [-1, 1] before the first convolution.
        let image = t.tape.leaf(images.map(|v| 2.0 * v - 1.0));
        let mut nodes: BTreeMap<NodeId, Var> = BTreeMap::new();

        for spec in &self.topology.nodes {
            if spec.id.j > 0 && !heads.segmentation {
                continue;
            }
            let mut parts = Vec::with_capacity(spec.inputs.len());
            for input in &spec.inputs {
                let v = match *input {
                    NodeInput::Image => image,
                    NodeInput::Same(n) => nodes[&n],
                    NodeInput::Upsampled(n) => t.tape.upsample2x(nodes[&n])?,
                    NodeInput::Pooled(n) => t.tape.maxpool2d(nodes[&n])?,
                };
                parts.push(v);
            }
            let mut x = t.tape.concat(&parts)?;
            for c in &spec.convs {
                x = t.conv(x, c)?;
                x = t.tape.relu(x);
            }
            nodes.insert(spec.id, x);
        }

        let seg_probs = if heads.segmentation {
            let src = nodes[&self.topology.seg_source()];
            let logits = t.conv(src, &self.topology.seg_head)?;
            Some(t.tape.sigmoid(logits))
        } else {
            None
        };

        let class_probs = match (&self.topology.classifier, heads.classification) {
            (Some(cls), true) => {
                let mut x = t.conv(nodes[&self.topology.center()], &cls.reduce)?;
                for (c, &pool) in cls.stages.iter().zip(&cls.pool_after) {
                    x = t.conv(x, c)?;
                    x = t.tape.relu(x);
                    if pool {
                        x = t.tape.maxpool2d(x)?;
                    }
                }
                x = t.tape.flatten(x)?;
                for d in &cls.hidden {
                    x = t.dense(x, d)?;
                    x = t.tape.relu(x);
                    x = t.tape.dropout(x, self.config().dropout_rate, mode, rng)?;
                }
                let logits = t.dense(x, &cls.output)?;
                Some(t.tape.softmax(logits)?)
            }
            _ => None,
        };

        let params = t.leaves.into_iter().collect();
        Ok(Traced {
            tape: t.tape,
            seg_probs,
            class_probs,
            nodes,
            params,
        })
    }

    /// Forward pass returning the head outputs; in eval mode this is a pure
    /// function of the parameters and the input.
    pub fn forward(&self, images: &Tensor, mode: Mode, rng: &mut Rng) -> Result<NetOutput> {
        let heads = Heads {
            segmentation: true,
            classification: self.topology.classifier.is_some(),
        };
        self.forward_heads(images, mode, rng, heads)
    }

    pub fn forward_heads(
        &self,
        images: &Tensor,
        mode: Mode,
        rng: &mut Rng,
        heads: Heads,
    ) -> Result<NetOutput> {
        let mut traced = self.trace(images, mode, rng, heads)?;
        Ok(NetOutput {
            seg_probs: traced.seg_probs.map(|v| traced.tape.take_value(v)),
            class_probs: traced.class_probs.map(|v| traced.tape.take_value(v)),
        })
    }

    /// Outputs of every evaluated grid node, for inspection.
    pub fn node_outputs(&self, images: &Tensor, heads: Heads) -> Result<BTreeMap<NodeId, Tensor>> {
        let mut rng = Rng::new(0);
        let traced = self.trace(images, Mode::Eval, &mut rng, heads)?;
        Ok(traced
            .nodes
            .iter()
            .map(|(&id, &v)| (id, traced.tape.value(v).clone()))
            .collect())
    }

    /// Adds the parameter gradients held by a back-propagated tape into
    /// each parameter's `grad`.
    pub fn accumulate_grads(&mut self, traced: &Traced) {
        for (name, var) in &traced.params {
            if let (Some(g), Some(p)) = (traced.tape.grad(*var), self.params.get_mut(name)) {
                p.grad.add_assign(g);
            }
        }
    }

    pub fn weights(&self) -> WeightMap {
        self.params.to_weight_map()
    }

    pub fn encoder_weights(&self) -> WeightMap {
        self.params.weight_subset(is_encoder_param)
    }

    /// Replaces every parameter from a complete weight map.
    pub fn load_weights(&mut self, weights: &WeightMap) -> Result<()> {
        self.params.load_exact(weights)
    }
}

/// Overwrites the encoder and center parameters of `graph` with the
/// same-named entries of `weights`; everything else is left alone.
/// Returns the number of tensors written.
pub fn apply_encoder_transfer(graph: &mut NetworkGraph, weights: &WeightMap) -> Result<usize> {
    let applied = graph
        .params_mut()
        .apply_weights(weights, is_encoder_param)?;
    if applied == 0 {
        return Err(Error::InvalidArgument(
            "no encoder parameters matched; is this an encoder weight file for this architecture?"
                .into(),
        ));
    }
    Ok(applied)
}

struct Tracer<'a> {
    tape: Tape,
    params: &'a ParamStore,
    leaves: BTreeMap<String, Var>,
}

impl Tracer<'_> {
    fn param(&mut self, name: String) -> Result<Var> {
        if let Some(&v) = self.leaves.get(&name) {
            return Ok(v);
        }
        let value = self.params.value(&name)?.clone();
        let v = self.tape.leaf(value);
        self.leaves.insert(name, v);
        Ok(v)
    }

    fn conv(&mut self, x: Var, c: &ConvSpec) -> Result<Var> {
        let k = self.param(format!("{}.kernel", c.name))?;
        let b = self.param(format!("{}.bias", c.name))?;
        self.tape.conv2d(x, k, b, 1, c.padding())
    }

    fn dense(&mut self, x: Var, d: &DenseSpec) -> Result<Var> {
        let w = self.param(format!("{}.weight", d.name))?;
        let b = self.param(format!("{}.bias", d.name))?;
        self.tape.dense(x, w, b)
    }
}
