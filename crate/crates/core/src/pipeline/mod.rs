//! Training both networks and turning their outputs into reports.

mod contour;
mod overlay;
mod postprocess;
mod report;
mod train;

pub use contour::{extract_contours, Contour};
pub use overlay::{overlay_image, render_overlay, INFECTION_COLOR, LUNG_COLOR};
pub use postprocess::{
    argmax_class, infection_exactness, out_of_lung_pixels, severity, threshold_mask, DEFAULT_TAU,
};
pub use report::{
    generate_report, report_from_prediction, GroundTruth, InfectionReport, Prediction, Predictor,
};
pub use train::{
    evaluate, pretrain_encoder, train_and_save, train_network, train_pipeline, Evaluation, NetKind,
    NetPlan, PipelineRun, TrainHistory, TrainOptions, TrainedNet,
};
