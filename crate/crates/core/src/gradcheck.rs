//! Central finite differences, the reference every analytic gradient is
//! checked against.

use crate::autograd::{Tape, Var};
use crate::error::Result;
use crate::net::{ArchConfig, Heads, NetworkGraph, SkipMode};
use crate::ops::Mode;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::{bce_loss, categorical_ce_loss, LossOutput, ParamKind};

/// Magnitude below which the error in [`max_relative_error`] is measured
/// absolutely instead of relative to the gradient.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

/// `∂f/∂x_i ≈ (f(x + eps e_i) − f(x − eps e_i)) / 2 eps` for every element.
pub fn finite_diff_grad(mut f: impl FnMut(&Tensor) -> f64, input: &Tensor, eps: f64) -> Tensor {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut probe = input.clone();
    let mut grad = Tensor::zeros(input.shape());
    for i in 0..input.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, RELATIVE_ERROR_FLOOR)`.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

/// Result of checking one named tensor.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub elements: usize,
    pub max_relative_error: f64,
}

impl CheckResult {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

/// Checks the gradient of `Σ w ⊙ op(inputs)` with respect to every input.
///
/// `build` records the operation on a fresh tape given leaf handles for the
/// inputs; `weights` has the shape of the op's output and turns the output
/// into a scalar so that every output element contributes distinctly.
pub fn check_op(
    names: &[&str],
    inputs: &[Tensor],
    weights: &Tensor,
    eps: f64,
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<Vec<CheckResult>> {
    let objective = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(dot(tape.value(out), weights))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    tape.backward(vec![(out, weights.clone())])?;

    let mut results = Vec::with_capacity(inputs.len());
    for (k, name) in names.iter().enumerate() {
        let analytic = tape
            .grad(vars[k])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        let mut values = inputs.to_vec();
        let numeric = finite_diff_grad(
            |probe| {
                values[k] = probe.clone();
                objective(&values).expect("objective re-evaluation failed")
            },
            &inputs[k],
            eps,
        );
        results.push(CheckResult {
            name: name.to_string(),
            elements: inputs[k].numel(),
            max_relative_error: max_relative_error(&analytic, &numeric),
        });
    }
    Ok(results)
}

/// Tolerance for single operations.
pub const OP_TOLERANCE: f64 = 1e-5;
/// Tolerance for losses.
pub const LOSS_TOLERANCE: f64 = 1e-6;
/// Tolerance for the whole network.
pub const NETWORK_TOLERANCE: f64 = 1e-4;

/// One entry of [`run_suite`].
#[derive(Debug, Clone)]
pub struct SuiteCheck {
    pub result: CheckResult,
    pub tolerance: f64,
}

impl SuiteCheck {
    pub fn passed(&self) -> bool {
        self.result.passed(self.tolerance)
    }
}

/// Values spread out enough that max-pool winners and ReLU signs do not
/// change under a finite-difference step.
fn spaced(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    Tensor::from_fn(shape, |i| (idx[i] as f64 + 0.5) / n as f64 * 2.0 - 1.0)
}

fn normal(shape: &[usize], std: f64, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.normal(0.0, std))
}

fn tagged(results: Vec<CheckResult>, op: &str, tolerance: f64) -> Vec<SuiteCheck> {
    results
        .into_iter()
        .map(|mut result| {
            result.name = format!("{op}/{}", result.name);
            SuiteCheck { result, tolerance }
        })
        .collect()
}

fn loss_check(
    name: &str,
    input: &Tensor,
    f: impl Fn(&Tensor) -> Result<LossOutput>,
) -> Result<SuiteCheck> {
    let analytic = f(input)?.grad;
    let numeric = finite_diff_grad(
        |t| f(t).expect("loss re-evaluation failed").value,
        input,
        1e-6,
    );
    Ok(SuiteCheck {
        result: CheckResult {
            name: name.to_string(),
            elements: input.numel(),
            max_relative_error: max_relative_error(&analytic, &numeric),
        },
        tolerance: LOSS_TOLERANCE,
    })
}

/// Architecture used for the whole-network check.
pub fn tiny_network_config() -> ArchConfig {
    ArchConfig {
        levels: 2,
        base_width: 2,
        input_hw: 16,
        skip_mode: SkipMode::Streamlined,
        with_classifier: true,
        num_classes: 3,
        dropout_rate: 0.5,
        classifier_width: 4,
        dense_widths: [8, 6],
    }
}

/// Gradient of `BCE(seg) + CCE(class)` with respect to every parameter of
/// a network, one result per parameter tensor. Dropout runs in train mode
/// with the same mask for every evaluation.
pub fn check_network(config: &ArchConfig, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = Rng::new(seed);
    let mut graph = NetworkGraph::build(config, &mut rng)?;
    // Zero biases put pre-activations exactly on the ReLU kink wherever a
    // receptive field is all zeros; check at a generic point instead.
    for p in graph.params_mut().iter_mut() {
        if p.kind == ParamKind::Bias {
            p.value = Tensor::from_fn(p.value.shape(), |_| rng.normal(0.0, 0.1));
        }
    }
    let hw = config.input_hw;
    let n = 2;
    let images = Tensor::from_fn(&[n, 1, hw, hw], |_| rng.uniform());
    let target = Tensor::from_fn(&[n, 1, hw, hw], |_| (rng.uniform() > 0.5) as u8 as f64);
    let labels: Vec<usize> = (0..n).map(|i| i % config.num_classes.max(1)).collect();
    let dropout_seed = rng.next_u64();
    let heads = Heads {
        segmentation: true,
        classification: config.with_classifier,
    };

    let loss = |g: &NetworkGraph| -> Result<f64> {
        let out = g.forward_heads(&images, Mode::Train, &mut Rng::new(dropout_seed), heads)?;
        let mut total =
            bce_loss(out.seg_probs.as_ref().expect("segmentation head"), &target)?.value;
        if let Some(p) = &out.class_probs {
            total += categorical_ce_loss(p, &labels)?.value;
        }
        Ok(total)
    };

    let mut traced = graph.trace(&images, Mode::Train, &mut Rng::new(dropout_seed), heads)?;
    let mut seeds = Vec::new();
    if let Some(v) = traced.seg_probs {
        seeds.push((v, bce_loss(traced.tape.value(v), &target)?.grad));
    }
    if let Some(v) = traced.class_probs {
        seeds.push((v, categorical_ce_loss(traced.tape.value(v), &labels)?.grad));
    }
    traced.tape.backward(seeds)?;
    graph.params_mut().zero_grads();
    graph.accumulate_grads(&traced);
    drop(traced);

    let names: Vec<String> = graph.params().names().map(str::to_string).collect();
    let mut results = Vec::with_capacity(names.len());
    for name in names {
        let p = graph.params().get(&name).expect("listed parameter");
        let analytic = p.grad.clone();
        let value = p.value.clone();
        let mut probe_graph = graph.clone();
        let numeric = finite_diff_grad(
            |probe| {
                probe_graph
                    .params_mut()
                    .get_mut(&name)
                    .expect("listed parameter")
                    .value = probe.clone();
                loss(&probe_graph).expect("network re-evaluation failed")
            },
            &value,
            1e-6,
        );
        results.push(CheckResult {
            name,
            elements: value.numel(),
            max_relative_error: max_relative_error(&analytic, &numeric),
        });
    }
    Ok(results)
}

/// Every differentiable operation, both losses and the tiny streamlined
/// network, each against central differences.
pub fn run_suite(seed: u64) -> Result<Vec<SuiteCheck>> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::new();
    let eps = 1e-6;

    let x = normal(&[2, 3, 8, 8], 1.0, &mut rng);
    let k = normal(&[4, 3, 3, 3], 0.5, &mut rng);
    let b = normal(&[4], 0.5, &mut rng);
    let w = normal(&[2, 4, 8, 8], 1.0, &mut rng);
    out.extend(tagged(
        check_op(
            &["input", "kernel", "bias"],
            &[x.clone(), k.clone(), b.clone()],
            &w,
            eps,
            |t, v| t.conv2d(v[0], v[1], v[2], 1, 1),
        )?,
        "conv2d_3x3",
        OP_TOLERANCE,
    ));
    let k1 = normal(&[4, 3, 1, 1], 0.5, &mut rng);
    out.extend(tagged(
        check_op(
            &["input", "kernel", "bias"],
            &[x.clone(), k1, b.clone()],
            &w,
            eps,
            |t, v| t.conv2d(v[0], v[1], v[2], 1, 0),
        )?,
        "conv2d_1x1",
        OP_TOLERANCE,
    ));
    let relu_w = normal(&[2, 4, 8, 8], 1.0, &mut rng);
    out.extend(tagged(
        check_op(
            &["input", "kernel", "bias"],
            &[x, k, b],
            &relu_w,
            eps,
            |t, v| {
                let c = t.conv2d(v[0], v[1], v[2], 1, 1)?;
                Ok(t.relu(c))
            },
        )?,
        "conv2d_relu",
        OP_TOLERANCE,
    ));

    let xp = spaced(&[2, 3, 8, 8], &mut rng);
    let wp = normal(&[2, 3, 4, 4], 1.0, &mut rng);
    out.extend(tagged(
        check_op(&["input"], &[xp], &wp, eps, |t, v| t.maxpool2d(v[0]))?,
        "maxpool2d",
        OP_TOLERANCE,
    ));

    let xu = normal(&[2, 3, 4, 4], 1.0, &mut rng);
    let wu = normal(&[2, 3, 8, 8], 1.0, &mut rng);
    out.extend(tagged(
        check_op(&["input"], &[xu], &wu, eps, |t, v| t.upsample2x(v[0]))?,
        "upsample2x",
        OP_TOLERANCE,
    ));

    let a = normal(&[2, 2, 4, 4], 1.0, &mut rng);
    let c = normal(&[2, 3, 4, 4], 1.0, &mut rng);
    let wc = normal(&[2, 5, 4, 4], 1.0, &mut rng);
    out.extend(tagged(
        check_op(&["a", "b"], &[a, c], &wc, eps, |t, v| {
            t.concat(&[v[0], v[1]])
        })?,
        "concat",
        OP_TOLERANCE,
    ));

    let xd = normal(&[3, 5], 1.0, &mut rng);
    let wd = normal(&[5, 4], 1.0, &mut rng);
    let bd = normal(&[4], 1.0, &mut rng);
    let wo = normal(&[3, 4], 1.0, &mut rng);
    out.extend(tagged(
        check_op(
            &["input", "weight", "bias"],
            &[xd, wd, bd],
            &wo,
            eps,
            |t, v| t.dense(v[0], v[1], v[2]),
        )?,
        "dense",
        OP_TOLERANCE,
    ));

    let xa = spaced(&[3, 6], &mut rng);
    let wa = normal(&[3, 6], 1.0, &mut rng);
    out.extend(tagged(
        check_op(&["input"], std::slice::from_ref(&xa), &wa, eps, |t, v| {
            Ok(t.relu(v[0]))
        })?,
        "relu",
        OP_TOLERANCE,
    ));
    out.extend(tagged(
        check_op(&["input"], std::slice::from_ref(&xa), &wa, eps, |t, v| {
            Ok(t.sigmoid(v[0]))
        })?,
        "sigmoid",
        OP_TOLERANCE,
    ));
    out.extend(tagged(
        check_op(&["input"], &[xa], &wa, eps, |t, v| t.softmax(v[0]))?,
        "softmax",
        OP_TOLERANCE,
    ));

    let xdrop = normal(&[4, 8], 1.0, &mut rng);
    let wdrop = normal(&[4, 8], 1.0, &mut rng);
    let drop_seed = rng.next_u64();
    out.extend(tagged(
        check_op(&["input"], &[xdrop], &wdrop, eps, |t, v| {
            t.dropout(v[0], 0.5, Mode::Train, &mut Rng::new(drop_seed))
        })?,
        "dropout",
        OP_TOLERANCE,
    ));

    let pred = Tensor::from_fn(&[2, 1, 4, 4], |_| rng.uniform_range(0.05, 0.95));
    let target = Tensor::from_fn(&[2, 1, 4, 4], |_| (rng.uniform() > 0.5) as u8 as f64);
    out.push(loss_check("bce_loss/pred", &pred, |p| {
        bce_loss(p, &target)
    })?);

    let probs = {
        let raw = Tensor::from_fn(&[4, 3], |_| rng.uniform_range(0.1, 1.0));
        let (n, k) = raw.dims2();
        Tensor::from_fn(&[n, k], |i| {
            let row = &raw.data()[(i / k) * k..(i / k + 1) * k];
            raw.data()[i] / row.iter().sum::<f64>()
        })
    };
    let labels = [0usize, 2, 1, 2];
    out.push(loss_check("categorical_ce_loss/probs", &probs, |p| {
        categorical_ce_loss(p, &labels)
    })?);

    let logits = normal(&[4, 3], 1.0, &mut rng);
    out.push(loss_check("softmax_cce/logits", &logits, |z| {
        let mut tape = Tape::new();
        let v = tape.leaf(z.clone());
        let s = tape.softmax(v)?;
        let l = categorical_ce_loss(tape.value(s), &labels)?;
        tape.backward(vec![(s, l.grad.clone())])?;
        Ok(LossOutput {
            value: l.value,
            grad: tape
                .grad(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(z.shape())),
        })
    })?);

    for r in check_network(&tiny_network_config(), seed)? {
        out.push(SuiteCheck {
            result: CheckResult {
                name: format!("network/{}", r.name),
                ..r
            },
            tolerance: NETWORK_TOLERANCE,
        });
    }
    Ok(out)
}

pub(crate) fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}
