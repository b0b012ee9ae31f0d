//! Final output generation: class, severity, exactness and overlay.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::contour::extract_contours;
use super::overlay::render_overlay;
use super::postprocess::{
    argmax_class, infection_exactness, out_of_lung_pixels, severity, threshold_mask,
};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::metrics::BinaryMask;
use crate::net::{ArchConfig, Heads, NetworkGraph};
use crate::ops::Mode;
use crate::rng::Rng;
use crate::synth::Label;
use crate::training::load_weights;

/// Summary of one image. Serialized as JSON with the field names below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionReport {
    pub label: usize,
    pub label_name: String,
    /// Predicted infection as a percentage of predicted lung; absent when
    /// the predicted lung is empty (see `severity_error`).
    pub perc: Option<f64>,
    /// Same ratio on the reference masks, when supplied.
    pub actual_perc: Option<f64>,
    /// IoU of predicted and reference infection, when supplied.
    pub infection_iou: Option<f64>,
    pub overlay_path: String,
    pub class_probs: Vec<f64>,
    /// Predicted infection pixels outside the predicted lung. They are
    /// included in `perc`.
    pub out_of_lung_pixels: usize,
    pub severity_error: Option<String>,
}

impl InfectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Reference masks for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub lung: BinaryMask,
    pub infection: BinaryMask,
}

/// Thresholded network outputs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub lung: BinaryMask,
    pub infection: BinaryMask,
    pub class_probs: Vec<f64>,
}

impl Prediction {
    /// Uses reference masks as if they had been predicted, with a one-hot
    /// class vector.
    pub fn from_ground_truth(gt: &GroundTruth, label: Label) -> Self {
        let mut class_probs = vec![0.0; Label::ALL.len()];
        class_probs[label.id()] = 1.0;
        Self {
            lung: gt.lung.clone(),
            infection: gt.infection.clone(),
            class_probs,
        }
    }
}

/// Both trained networks, ready for inference.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub pipeline: NetworkGraph,
    pub infection: NetworkGraph,
    pub tau: f64,
}

impl Predictor {
    pub fn new(pipeline: NetworkGraph, infection: NetworkGraph, tau: f64) -> Result<Self> {
        if !pipeline.config().with_classifier {
            return Err(Error::Config("pipeline network has no classifier".into()));
        }
        if pipeline.config().input_hw != infection.config().input_hw {
            return Err(Error::Config(
                "pipeline and infection networks take different input sizes".into(),
            ));
        }
        Ok(Self {
            pipeline,
            infection,
            tau,
        })
    }

    /// Builds both graphs from `arch` and fills them from weight files.
    pub fn load(
        arch: &ArchConfig,
        pipeline_weights: &Path,
        infection_weights: &Path,
        tau: f64,
    ) -> Result<Self> {
        let mut rng = Rng::new(0);
        let mut pipeline = NetworkGraph::build(&arch.clone().with_classifier(true), &mut rng)?;
        pipeline.load_weights(&load_weights(pipeline_weights)?)?;
        let mut infection = NetworkGraph::build(&arch.clone().with_classifier(false), &mut rng)?;
        infection.load_weights(&load_weights(infection_weights)?)?;
        Self::new(pipeline, infection, tau)
    }

    pub fn predict(&self, image: &GrayImage) -> Result<Prediction> {
        let hw = self.pipeline.config().input_hw;
        if image.width != hw || image.height != hw {
            return Err(Error::shape(
                "predict",
                format!(
                    "image is {}x{}, networks expect {hw}x{hw}",
                    image.width, image.height
                ),
            ));
        }
        let x = image.to_tensor();
        let mut rng = Rng::new(0);
        let out = self
            .pipeline
            .forward_heads(&x, Mode::Eval, &mut rng, Heads::ALL)?;
        let inf = self
            .infection
            .forward_heads(&x, Mode::Eval, &mut rng, Heads::SEGMENTATION)?;
        let lung_probs = out.seg_probs.expect("segmentation head requested");
        let inf_probs = inf.seg_probs.expect("segmentation head requested");
        Ok(Prediction {
            lung: threshold_mask(&lung_probs, self.tau)?,
            infection: threshold_mask(&inf_probs, self.tau)?,
            class_probs: out.class_probs.expect("classifier requested").into_data(),
        })
    }
}

/// Assembles the report for a prediction and writes the overlay.
pub fn report_from_prediction(
    image: &GrayImage,
    pred: &Prediction,
    truth: Option<&GroundTruth>,
    overlay_path: &Path,
) -> Result<InfectionReport> {
    let label = argmax_class(&pred.class_probs)?;
    let label_name = Label::from_id(label)
        .map(|l| l.name().to_string())
        .unwrap_or_else(|_| label.to_string());
    let (perc, severity_error) = match severity(&pred.infection, &pred.lung) {
        Ok(p) => (Some(p), None),
        Err(Error::Degenerate(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let (actual_perc, infection_iou) = match truth {
        Some(gt) => (
            Some(severity(&gt.infection, &gt.lung)?),
            Some(infection_exactness(&pred.infection, &gt.infection)?),
        ),
        None => (None, None),
    };
    let out_of_lung = out_of_lung_pixels(&pred.infection, &pred.lung)?;
    render_overlay(
        image,
        &extract_contours(&pred.lung),
        &extract_contours(&pred.infection),
        overlay_path,
    )?;
    Ok(InfectionReport {
        label,
        label_name,
        perc,
        actual_perc,
        infection_iou,
        overlay_path: overlay_path.display().to_string(),
        class_probs: pred.class_probs.clone(),
        out_of_lung_pixels: out_of_lung,
        severity_error,
    })
}

/// Runs both networks on `image` and reports on the result.
pub fn generate_report(
    predictor: &Predictor,
    image: &GrayImage,
    truth: Option<&GroundTruth>,
    overlay_path: impl Into<PathBuf>,
) -> Result<InfectionReport> {
    let pred = predictor.predict(image)?;
    report_from_prediction(image, &pred, truth, &overlay_path.into())
}
