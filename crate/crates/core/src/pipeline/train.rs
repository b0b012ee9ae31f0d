//! Training and evaluation loops for the two networks.
//!
//! The pipeline network learns lung masks and the class label together
//! under `BCE(seg) + lambda * CCE(class)`. The infection network learns
//! infection masks under BCE alone. Encoder pretraining trains the
//! classification path only.
//!
//! A batch of `batch_size` samples is processed in micro-batches of
//! `micro_batch` samples whose loss gradients are scaled by their share of
//! the batch, so the accumulated gradient equals the full-batch gradient.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;

use super::postprocess::DEFAULT_TAU;
use crate::error::{Error, Result};
use crate::metrics::{dice, iou, write_curves, BinaryMask, ConfusionMatrix, CurveRow, PixelCounts};
use crate::net::{apply_encoder_transfer, ArchConfig, Heads, NetworkGraph};
use crate::ops::Mode;
use crate::rng::Rng;
use crate::synth::{load_dataset, Manifest, Sample, Split};
use crate::tensor::Tensor;
use crate::training::{
    adam_step, bce_loss, categorical_ce_loss, save_weights, AdamConfig, TrainConfig, WeightMap,
};

/// Which network a training run or evaluation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    /// Lung segmentation plus classification.
    Pipeline,
    /// Infection segmentation.
    Infection,
    /// Classification path only, used to pretrain the encoder.
    Classifier,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Pipeline => "pipeline",
            NetKind::Infection => "infection",
            NetKind::Classifier => "classifier",
        }
    }

    fn heads(self) -> Heads {
        match self {
            NetKind::Pipeline => Heads::ALL,
            NetKind::Infection => Heads::SEGMENTATION,
            NetKind::Classifier => Heads::CLASSIFICATION,
        }
    }

    fn segments(self) -> bool {
        self != NetKind::Classifier
    }

    fn classifies(self) -> bool {
        self != NetKind::Infection
    }

    /// Adjusts an architecture to what this network needs.
    pub fn arch(self, base: &ArchConfig) -> ArchConfig {
        base.clone().with_classifier(self.classifies())
    }
}

impl fmt::Display for NetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for NetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipeline" => Ok(NetKind::Pipeline),
            "infection" => Ok(NetKind::Infection),
            "classifier" => Ok(NetKind::Classifier),
            other => Err(Error::InvalidArgument(format!(
                "unknown network `{other}` (expected pipeline, infection or classifier)"
            ))),
        }
    }
}

/// Loop settings that do not change the optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    /// Samples per forward/backward pass inside one optimizer batch.
    pub micro_batch: usize,
    /// Threshold used for the mask metrics.
    pub tau: f64,
    /// Validation Dice whose first attainment is recorded.
    pub dice_target: f64,
    /// End training once the validation Dice reaches `dice_target`.
    pub stop_at_target: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            micro_batch: 8,
            tau: DEFAULT_TAU,
            dice_target: 0.85,
            stop_at_target: false,
        }
    }
}

/// Aggregate scores of one pass over a split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    /// Mean total loss per sample.
    pub loss: f64,
    pub seg_loss: f64,
    pub cls_loss: f64,
    /// Pixel counts pooled over the split.
    pub pixels: PixelCounts,
    /// Per-sample Dice averaged over the split (empty vs empty counts as 1).
    pub mean_dice: f64,
    pub mean_iou: f64,
    pub confusion: Option<ConfusionMatrix>,
}

impl Evaluation {
    fn iou_pooled(&self) -> f64 {
        let union = self.pixels.tp + self.pixels.fp + self.pixels.fn_;
        if union == 0 {
            1.0
        } else {
            self.pixels.tp as f64 / union as f64
        }
    }

    /// Class accuracy for classifying networks, pixel accuracy otherwise.
    pub fn accuracy(&self) -> f64 {
        match &self.confusion {
            Some(c) => c.report().overall_accuracy,
            None => {
                let total = self.pixels.total();
                if total == 0 {
                    0.0
                } else {
                    (self.pixels.tp + self.pixels.tn) as f64 / total as f64
                }
            }
        }
    }

    pub fn curve_row(&self, epoch: usize, split: &str) -> CurveRow {
        let (precision, recall) = match &self.confusion {
            Some(c) => {
                let r = c.report();
                (r.macro_precision, r.macro_sensitivity)
            }
            None => (self.pixels.precision(), self.pixels.recall()),
        };
        let has_pixels = self.pixels.total() > 0;
        CurveRow {
            epoch,
            split: split.to_string(),
            loss: self.loss,
            dice: if has_pixels { self.pixels.dice() } else { 0.0 },
            iou: if has_pixels { self.iou_pooled() } else { 0.0 },
            accuracy: self.accuracy(),
            precision,
            recall,
        }
    }
}

/// Everything recorded while training one network.
#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub kind: NetKind,
    pub rows: Vec<CurveRow>,
    pub train: Vec<Evaluation>,
    pub val: Vec<Evaluation>,
    /// Epochs completed when the validation Dice first reached the target.
    pub epochs_to_target: Option<usize>,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val.len()
    }
}

/// Network inputs and targets prepared from samples.
struct Prepared {
    images: Vec<Tensor>,
    targets: Vec<Tensor>,
    masks: Vec<BinaryMask>,
    labels: Vec<usize>,
}

impl Prepared {
    fn new(samples: &[Sample], kind: NetKind) -> Self {
        let mut p = Prepared {
            images: Vec::with_capacity(samples.len()),
            targets: Vec::with_capacity(samples.len()),
            masks: Vec::with_capacity(samples.len()),
            labels: Vec::with_capacity(samples.len()),
        };
        for s in samples {
            let mask = match kind {
                NetKind::Infection => &s.inf_mask,
                _ => &s.lung_mask,
            };
            p.images.push(s.image.to_tensor());
            p.targets.push(mask.to_tensor());
            p.masks.push(mask.clone());
            p.labels.push(s.label.id());
        }
        p
    }

    fn len(&self) -> usize {
        self.images.len()
    }
}

/// Running totals for an [`Evaluation`].
struct Accumulator {
    kind: NetKind,
    tau: f64,
    samples: usize,
    seg_loss: f64,
    cls_loss: f64,
    lambda: f64,
    pixels: PixelCounts,
    dice_sum: f64,
    iou_sum: f64,
    confusion: Option<ConfusionMatrix>,
}

impl Accumulator {
    fn new(kind: NetKind, tau: f64, lambda: f64, classes: usize) -> Self {
        Self {
            kind,
            tau,
            samples: 0,
            seg_loss: 0.0,
            cls_loss: 0.0,
            lambda,
            pixels: PixelCounts::default(),
            dice_sum: 0.0,
            iou_sum: 0.0,
            confusion: kind.classifies().then(|| ConfusionMatrix::new(classes)),
        }
    }

    /// Records one chunk; `seg_loss`/`cls_loss` are chunk means.
    fn add(
        &mut self,
        data: &Prepared,
        idx: &[usize],
        seg: Option<&Tensor>,
        cls: Option<&Tensor>,
        seg_loss: f64,
        cls_loss: f64,
    ) -> Result<()> {
        let m = idx.len();
        self.samples += m;
        self.seg_loss += seg_loss * m as f64;
        self.cls_loss += cls_loss * m as f64;
        if let Some(seg) = seg {
            let [_, _, h, w] = seg.dims4();
            let plane = h * w;
            for (s, &i) in idx.iter().enumerate() {
                let pred = BinaryMask::from_threshold(
                    w,
                    h,
                    &seg.data()[s * plane..(s + 1) * plane],
                    self.tau,
                )?;
                let truth = &data.masks[i];
                self.pixels.add(crate::metrics::pixel_counts(&pred, truth)?);
                self.dice_sum += dice(&pred, truth)?;
                self.iou_sum += iou(&pred, truth)?;
            }
        }
        if let (Some(cls), Some(conf)) = (cls, self.confusion.as_mut()) {
            let (_, k) = cls.dims2();
            for (s, &i) in idx.iter().enumerate() {
                let pred = super::argmax_class(&cls.data()[s * k..(s + 1) * k])?;
                conf.accumulate(data.labels[i], pred)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Evaluation {
        let n = self.samples.max(1) as f64;
        let seg_loss = self.seg_loss / n;
        let cls_loss = self.cls_loss / n;
        let segments = self.kind.segments();
        Evaluation {
            samples: self.samples,
            loss: seg_loss + self.lambda * cls_loss,
            seg_loss,
            cls_loss,
            pixels: self.pixels,
            mean_dice: if segments { self.dice_sum / n } else { 0.0 },
            mean_iou: if segments { self.iou_sum / n } else { 0.0 },
            confusion: self.confusion,
        }
    }
}

fn stack_indexed(parts: &[Tensor], idx: &[usize]) -> Result<Tensor> {
    let refs: Vec<&Tensor> = idx.iter().map(|&i| &parts[i]).collect();
    Tensor::stack(&refs)
}

fn check_compatible(graph: &NetworkGraph, kind: NetKind) -> Result<()> {
    if kind.classifies() && !graph.config().with_classifier {
        return Err(Error::Config(format!(
            "the {kind} network needs with_classifier = true"
        )));
    }
    Ok(())
}

/// Scores `samples` with an eval-mode forward pass.
pub fn evaluate(
    graph: &NetworkGraph,
    kind: NetKind,
    samples: &[Sample],
    opts: &TrainOptions,
    lambda: f64,
) -> Result<Evaluation> {
    check_compatible(graph, kind)?;
    let data = Prepared::new(samples, kind);
    evaluate_prepared(graph, kind, &data, opts, lambda)
}

fn evaluate_prepared(
    graph: &NetworkGraph,
    kind: NetKind,
    data: &Prepared,
    opts: &TrainOptions,
    lambda: f64,
) -> Result<Evaluation> {
    let mut acc = Accumulator::new(kind, opts.tau, lambda, graph.config().num_classes);
    let order: Vec<usize> = (0..data.len()).collect();
    let mut rng = Rng::new(0);
    for idx in order.chunks(opts.micro_batch.max(1)) {
        let images = stack_indexed(&data.images, idx)?;
        let out = graph.forward_heads(&images, Mode::Eval, &mut rng, kind.heads())?;
        let seg_loss = match &out.seg_probs {
            Some(p) => bce_loss(p, &stack_indexed(&data.targets, idx)?)?.value,
            None => 0.0,
        };
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
        let cls_loss = match &out.class_probs {
            Some(p) => categorical_ce_loss(p, &labels)?.value,
            None => 0.0,
        };
        acc.add(
            data,
            idx,
            out.seg_probs.as_ref(),
            out.class_probs.as_ref(),
            seg_loss,
            cls_loss,
        )?;
    }
    Ok(acc.finish())
}

/// Trains `graph` in place, returning per-epoch curves.
///
/// Epochs are numbered from 0. Each epoch emits one `train` row (scores
/// gathered during the epoch's updates) and one `val` row (eval-mode pass
/// after the epoch).
pub fn train_network(
    graph: &mut NetworkGraph,
    kind: NetKind,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainHistory> {
    cfg.validate()?;
    check_compatible(graph, kind)?;
    if train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if opts.micro_batch == 0 {
        return Err(Error::Config("micro_batch must be >= 1".into()));
    }
    if graph.config().dropout_rate != cfg.dropout_rate {
        return Err(Error::Config(format!(
            "architecture dropout {} differs from training dropout {}",
            graph.config().dropout_rate,
            cfg.dropout_rate
        )));
    }
    let lambda = if kind == NetKind::Pipeline {
        cfg.loss_mix_lambda
    } else {
        1.0
    };
    let train_data = Prepared::new(train, kind);
    let val_data = Prepared::new(val, kind);
    let adam = AdamConfig::new(cfg.learning_rate);
    let mut root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.fork();
    let mut dropout_rng = root.fork();

    let mut history = TrainHistory {
        kind,
        rows: Vec::new(),
        train: Vec::new(),
        val: Vec::new(),
        epochs_to_target: None,
    };
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut acc = Accumulator::new(kind, opts.tau, lambda, graph.config().num_classes);
        for batch in order.chunks(cfg.batch_size) {
            graph.params_mut().zero_grads();
            let share = 1.0 / batch.len() as f64;
            for idx in batch.chunks(opts.micro_batch) {
                let weight = idx.len() as f64 * share;
                let images = stack_indexed(&train_data.images, idx)?;
                let mut traced =
                    graph.trace(&images, Mode::Train, &mut dropout_rng, kind.heads())?;
                let mut seeds = Vec::with_capacity(2);
                let mut seg_loss = 0.0;
                let mut cls_loss = 0.0;
                if let Some(v) = traced.seg_probs {
                    let target = stack_indexed(&train_data.targets, idx)?;
                    let l = bce_loss(traced.tape.value(v), &target)?;
                    seg_loss = l.value;
                    seeds.push((v, l.scaled(weight).grad));
                }
                if let Some(v) = traced.class_probs {
                    let labels: Vec<usize> = idx.iter().map(|&i| train_data.labels[i]).collect();
                    let l = categorical_ce_loss(traced.tape.value(v), &labels)?;
                    cls_loss = l.value;
                    seeds.push((v, l.scaled(weight * lambda).grad));
                }
                acc.add(
                    &train_data,
                    idx,
                    traced.seg_probs.map(|v| traced.tape.value(v)),
                    traced.class_probs.map(|v| traced.tape.value(v)),
                    seg_loss,
                    cls_loss,
                )?;
                traced.tape.backward(seeds)?;
                graph.accumulate_grads(&traced);
            }
            adam_step(graph.params_mut(), &adam)?;
        }
        let train_eval = acc.finish();
        if !train_eval.loss.is_finite() {
            return Err(Error::Degenerate(format!(
                "{kind} training loss diverged at epoch {epoch}"
            )));
        }
        let val_eval = evaluate_prepared(graph, kind, &val_data, opts, lambda)?;
        history.rows.push(train_eval.curve_row(epoch, "train"));
        history.rows.push(val_eval.curve_row(epoch, "val"));
        info!(
            "{kind} epoch {epoch}: train {} | val {}",
            summary(kind, &train_eval),
            summary(kind, &val_eval)
        );
        let reached =
            kind.segments() && !val.is_empty() && val_eval.pixels.dice() >= opts.dice_target;
        history.train.push(train_eval);
        history.val.push(val_eval);
        if reached && history.epochs_to_target.is_none() {
            history.epochs_to_target = Some(epoch + 1);
            if opts.stop_at_target {
                break;
            }
        }
    }
    Ok(history)
}

fn summary(kind: NetKind, e: &Evaluation) -> String {
    let mut s = format!("loss {:.4}", e.loss);
    if kind.segments() {
        s += &format!(" dice {:.4}", e.pixels.dice());
    }
    if kind.classifies() {
        s += &format!(" acc {:.4}", e.accuracy());
    }
    s
}

/// Output locations of one trained network.
#[derive(Debug, Clone)]
pub struct TrainedNet {
    pub graph: NetworkGraph,
    pub history: TrainHistory,
    pub weights_path: PathBuf,
    pub curves_path: PathBuf,
}

/// Builds, optionally encoder-initializes, trains and saves one network.
///
/// Writes `<kind>.ilnw` and `<kind>_curves.csv` into `out_dir`.
pub fn train_and_save(
    kind: NetKind,
    arch: &ArchConfig,
    manifest: &Manifest,
    cfg: &TrainConfig,
    opts: &TrainOptions,
    init_encoder: Option<&WeightMap>,
    out_dir: &Path,
) -> Result<TrainedNet> {
    let train = load_dataset(manifest, Split::Train)?;
    let val = load_dataset(manifest, Split::Val)?;
    let mut arch = kind.arch(arch);
    arch.dropout_rate = cfg.dropout_rate;
    arch.validate()?;
    let mut graph = NetworkGraph::build(&arch, &mut Rng::new(cfg.seed))?;
    if let Some(w) = init_encoder {
        let n = apply_encoder_transfer(&mut graph, w)?;
        info!("{kind}: initialized {n} encoder tensors from transfer weights");
    }
    let history = train_network(&mut graph, kind, &train, &val, cfg, opts)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let weights_path = out_dir.join(format!("{kind}.ilnw"));
    let curves_path = out_dir.join(format!("{kind}_curves.csv"));
    let weights = match kind {
        NetKind::Classifier => graph.encoder_weights(),
        _ => graph.weights(),
    };
    save_weights(&weights, &weights_path)?;
    write_curves(&history.rows, &curves_path)?;
    Ok(TrainedNet {
        graph,
        history,
        weights_path,
        curves_path,
    })
}

/// The pipeline network and the infection network trained on one dataset.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub pipeline: TrainedNet,
    pub infection: TrainedNet,
}

/// Architecture and training settings for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPlan {
    pub arch: ArchConfig,
    pub train: TrainConfig,
}

/// Trains both networks; `init_encoder` seeds the encoder of each.
pub fn train_pipeline(
    pipeline: &NetPlan,
    infection: &NetPlan,
    manifest: &Manifest,
    opts: &TrainOptions,
    init_encoder: Option<&WeightMap>,
    out_dir: &Path,
) -> Result<PipelineRun> {
    let pipeline = train_and_save(
        NetKind::Pipeline,
        &pipeline.arch,
        manifest,
        &pipeline.train,
        opts,
        init_encoder,
        out_dir,
    )?;
    let infection = train_and_save(
        NetKind::Infection,
        &infection.arch,
        manifest,
        &infection.train,
        opts,
        init_encoder,
        out_dir,
    )?;
    Ok(PipelineRun {
        pipeline,
        infection,
    })
}

/// Classification-only training whose encoder weights seed later runs.
/// Writes `classifier.ilnw` (encoder and center tensors only).
pub fn pretrain_encoder(
    arch: &ArchConfig,
    manifest: &Manifest,
    cfg: &TrainConfig,
    opts: &TrainOptions,
    out_dir: &Path,
) -> Result<TrainedNet> {
    train_and_save(
        NetKind::Classifier,
        arch,
        manifest,
        cfg,
        opts,
        None,
        out_dir,
    )
}
