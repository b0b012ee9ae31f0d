//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and enough of
//! its inputs to run the backward kernel. Nodes are only ever appended, so
//! parents always precede children and a single reverse sweep visits each
//! node after all of its consumers.

use crate::error::{Error, Result};
use crate::ops::{self, DropoutMask, Mode};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        input: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu {
        input: Var,
    },
    Sigmoid {
        input: Var,
    },
    Softmax {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: DropoutMask,
    },
    Reshape {
        input: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Moves a value out of the tape, leaving an empty placeholder.
    pub fn take_value(&mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::zeros(&[1]))
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let y = ops::conv2d(
            self.value(input),
            self.value(kernel),
            self.value(bias),
            stride,
            pad,
        )?;
        Ok(self.push(
            y,
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            },
        ))
    }

    pub fn maxpool2d(&mut self, input: Var) -> Result<Var> {
        let pooled = ops::maxpool2d(self.value(input))?;
        Ok(self.push(
            pooled.output,
            Op::MaxPool {
                input,
                argmax: pooled.argmax,
            },
        ))
    }

    pub fn upsample2x(&mut self, input: Var) -> Result<Var> {
        let y = ops::upsample_bilinear2x(self.value(input))?;
        Ok(self.push(y, Op::Upsample { input }))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = ops::concat_channels(&values)?;
        Ok(self.push(
            y,
            Op::Concat {
                parts: parts.to_vec(),
            },
        ))
    }

    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let y = ops::dense(self.value(input), self.value(weight), self.value(bias))?;
        Ok(self.push(
            y,
            Op::Dense {
                input,
                weight,
                bias,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let y = ops::relu(self.value(input));
        self.push(y, Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let y = ops::sigmoid(self.value(input));
        self.push(y, Op::Sigmoid { input })
    }

    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let y = ops::softmax(self.value(input))?;
        Ok(self.push(y, Op::Softmax { input }))
    }

    pub fn dropout(&mut self, input: Var, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
        let (y, mask) = ops::dropout(self.value(input), rate, mode, rng)?;
        match mask {
            Some(mask) => Ok(self.push(y, Op::Dropout { input, mask })),
            None => Ok(input),
        }
    }

    /// `(N, ...) -> (N, F)`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let (n, f) = x.dims2();
        let y = x.clone().reshape(&[n, f])?;
        Ok(self.push(y, Op::Reshape { input }))
    }

    /// Gradient of the seeded scalar objective with respect to `v`, once
    /// [`Tape::backward`] has run. Only leaves keep their gradients.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Runs reverse accumulation. Each seed is `(output, dL/d output)`; seeds
    /// on several outputs add, which is how multi-head losses combine.
    pub fn backward(&mut self, seeds: Vec<(Var, Tensor)>) -> Result<()> {
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            if !g.same_shape(self.value(v)) {
                return Err(Error::shape(
                    "backward",
                    format!("seed {:?} for value {:?}", g.shape(), self.value(v).shape()),
                ));
            }
            accumulate(&mut self.grads[v.0], g);
        }
        for i in (0..self.nodes.len()).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let nodes = &self.nodes;
            let val = |v: Var| &nodes[v.0].value;
            let contributions: Vec<(Var, Tensor)> = match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    stride,
                    pad,
                } => {
                    let gr = ops::conv2d_backward(val(*input), val(*kernel), &g, *stride, *pad)?;
                    vec![(*input, gr.input), (*kernel, gr.kernel), (*bias, gr.bias)]
                }
                Op::MaxPool { input, argmax } => {
                    vec![(
                        *input,
                        ops::maxpool2d_backward(val(*input).shape(), argmax, &g)?,
                    )]
                }
                Op::Upsample { input } => {
                    vec![(
                        *input,
                        ops::upsample_bilinear2x_backward(val(*input).shape(), &g)?,
                    )]
                }
                Op::Concat { parts } => {
                    let channels: Vec<usize> = parts.iter().map(|&p| val(p).dims4()[1]).collect();
                    parts
                        .iter()
                        .copied()
                        .zip(ops::concat_channels_backward(&channels, &g)?)
                        .collect()
                }
                Op::Dense {
                    input,
                    weight,
                    bias,
                } => {
                    let gr = ops::dense_backward(val(*input), val(*weight), &g)?;
                    vec![(*input, gr.input), (*weight, gr.weight), (*bias, gr.bias)]
                }
                Op::Relu { input } => vec![(*input, ops::relu_backward(val(*input), &g))],
                Op::Sigmoid { input } => vec![(*input, ops::sigmoid_backward(&node.value, &g))],
                Op::Softmax { input } => vec![(*input, ops::softmax_backward(&node.value, &g))],
                Op::Dropout { input, mask } => vec![(*input, mask.apply(&g))],
                Op::Reshape { input } => vec![(*input, g.reshape(val(*input).shape())?)],
            };
            for (v, gv) in contributions {
                accumulate(&mut self.grads[v.0], gv);
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}
