mod common;

use common::small_arch;
use lungnet::metrics::{iou, BinaryMask};
use lungnet::pipeline::{
    extract_contours, infection_exactness, report_from_prediction, severity, threshold_mask,
    train_and_save, GroundTruth, NetKind, Prediction, TrainOptions,
};
use lungnet::synth::{generate_dataset, load_dataset, Label, Split};
use lungnet::training::TrainConfig;
use lungnet::{Rng, Tensor};
use proptest::prelude::*;

fn random_mask(rng: &mut Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.uniform() < density)
}

proptest! {
    #[test]
    fn threshold_is_monotone_in_tau(vals in proptest::collection::vec(0.0f64..1.0, 64), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let p = Tensor::from_vec(&[1, 1, 8, 8], vals.clone()).unwrap();
        let a = threshold_mask(&p, lo).unwrap();
        let b = threshold_mask(&p, hi).unwrap();
        prop_assert!(b.is_subset_of(&a));
        for (k, &v) in vals.iter().enumerate() {
            prop_assert_eq!(a.get(k % 8, k / 8), v > lo);
        }
    }

    #[test]
    fn severity_is_scale_invariant(seed in any::<u64>(), factor in 1usize..4) {
        let mut rng = Rng::new(seed);
        let lung = random_mask(&mut rng, 12, 12, 0.7);
        prop_assume!(!lung.is_empty());
        let inf = random_mask(&mut rng, 12, 12, 0.3).and(&lung);
        let s = severity(&inf, &lung).unwrap();
        let want = 100.0 * inf.count() as f64 / lung.count() as f64;
        prop_assert!((s - want).abs() < 1e-12);
        prop_assert!((0.0..=100.0).contains(&s));
        let up = severity(&inf.upscale(factor), &lung.upscale(factor)).unwrap();
        prop_assert!((up - s).abs() < 1e-12);
    }

    #[test]
    fn exactness_is_iou(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = random_mask(&mut rng, 10, 10, 0.4);
        let b = random_mask(&mut rng, 10, 10, 0.4);
        prop_assert_eq!(infection_exactness(&a, &b).unwrap().to_bits(), iou(&a, &b).unwrap().to_bits());
    }

    #[test]
    fn contours_are_closed_adjacent_boundaries(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_mask(&mut rng, 12, 12, 0.45);
        for c in extract_contours(&m) {
            prop_assert_eq!(c.points.first(), c.points.last());
            for w in c.points.windows(2) {
                let (dx, dy) = (w[0].0.abs_diff(w[1].0), w[0].1.abs_diff(w[1].1));
                prop_assert!(dx <= 1 && dy <= 1);
            }
            for &(x, y) in c.pixels() {
                prop_assert!(m.get(x, y));
                let (x, y) = (x as isize, y as isize);
                let interior = [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().all(|(dx, dy)| m.get_signed(x + dx, y + dy));
                prop_assert!(!interior, "({x},{y}) is interior");
            }
        }
    }
}

#[test]
fn threshold_boundary_values() {
    let p = Tensor::from_vec(&[1, 1, 1, 3], vec![0.59, 0.60, 0.61]).unwrap();
    let m = threshold_mask(&p, 0.6).unwrap();
    assert_eq!(m.bits(), &[0, 0, 1]);
}

#[test]
fn one_contour_per_component() {
    let m = BinaryMask::from_fn(20, 20, |x, y| {
        (x < 5 && y < 5) || (x > 10 && y > 10) || (x == 15 && y == 2)
    });
    assert_eq!(extract_contours(&m).len(), 3);
    assert!(extract_contours(&BinaryMask::empty(5, 5)).is_empty());
}

#[test]
fn ground_truth_reports_are_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(5, 3, 32, dir.path()).unwrap();
    for (k, s) in load_dataset(&m, Split::Train)
        .unwrap()
        .into_iter()
        .enumerate()
    {
        let gt = GroundTruth {
            lung: s.lung_mask.clone(),
            infection: s.inf_mask.clone(),
        };
        let pred = Prediction::from_ground_truth(&gt, s.label);
        let r = report_from_prediction(
            &s.image,
            &pred,
            Some(&gt),
            &dir.path().join(format!("{k}.ppm")),
        )
        .unwrap();
        assert_eq!(r.perc, r.actual_perc);
        assert_eq!(r.infection_iou, Some(1.0));
        assert_eq!(r.label, s.label.id());
        assert_eq!(r.out_of_lung_pixels, 0);
        if s.label == Label::Normal {
            assert_eq!(r.perc, Some(0.0));
        }
    }
}

fn one_epoch(
    kind: NetKind,
    out: &std::path::Path,
    data: &std::path::Path,
) -> lungnet::pipeline::TrainedNet {
    let m = generate_dataset(6, 5, 32, data).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        ..Default::default()
    };
    train_and_save(
        kind,
        &small_arch(),
        &m,
        &cfg,
        &TrainOptions::default(),
        None,
        out,
    )
    .unwrap()
}

#[test]
fn one_epoch_bookkeeping() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [NetKind::Pipeline, NetKind::Infection] {
        let r = one_epoch(kind, &dir.path().join("out"), &dir.path().join("data"));
        assert_eq!(r.history.rows.len(), 2);
        assert_eq!(
            (r.history.rows[0].epoch, r.history.rows[0].split.as_str()),
            (0, "train")
        );
        assert_eq!(
            (r.history.rows[1].epoch, r.history.rows[1].split.as_str()),
            (0, "val")
        );
        let csv = std::fs::read_to_string(&r.curves_path).unwrap();
        assert_eq!(csv.lines().count(), 3, "{csv}");
        assert!(r.weights_path.exists());
        assert_eq!(r.graph.config().with_classifier, kind == NetKind::Pipeline);
    }
}

#[test]
fn untrained_class_loss_is_near_ln3() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(6, 5, 32, dir.path()).unwrap();
    let val = load_dataset(&m, Split::Val).unwrap();
    let g = lungnet::net::NetworkGraph::build(&small_arch(), &mut Rng::new(1)).unwrap();
    let e = lungnet::pipeline::evaluate(&g, NetKind::Pipeline, &val, &TrainOptions::default(), 1.0)
        .unwrap();
    assert!(
        (e.cls_loss - 3f64.ln()).abs() < 0.3,
        "cls loss {}",
        e.cls_loss
    );
}

#[test]
fn reruns_are_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = one_epoch(
        NetKind::Pipeline,
        &a.path().join("out"),
        &a.path().join("data"),
    );
    let rb = one_epoch(
        NetKind::Pipeline,
        &b.path().join("out"),
        &b.path().join("data"),
    );
    assert_eq!(
        std::fs::read(&ra.curves_path).unwrap(),
        std::fs::read(&rb.curves_path).unwrap()
    );
    assert_eq!(
        std::fs::read(&ra.weights_path).unwrap(),
        std::fs::read(&rb.weights_path).unwrap()
    );
}
