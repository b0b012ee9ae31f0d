mod common;

use common::tiny_arch;
use lungnet::net::{is_encoder_param, NetworkGraph};
use lungnet::ops::Mode;
use lungnet::training::{init_he, load_weights, save_weights, ParamKind, Parameter, WeightMap};
use lungnet::{Error, Rng, Tensor};
use proptest::prelude::*;

#[test]
fn round_trip_preserves_forward_bitwise() {
    let g = NetworkGraph::build(&tiny_arch(), &mut Rng::new(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ilnw");
    save_weights(&g.weights(), &path).unwrap();
    let mut h = NetworkGraph::build(&tiny_arch(), &mut Rng::new(99)).unwrap();
    h.load_weights(&load_weights(&path).unwrap()).unwrap();
    let x = Tensor::from_fn(&[3, 1, 16, 16], |i| ((i * 37) % 101) as f64 / 101.0);
    let a = g.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
    let b = h.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn file_layout_is_little_endian() {
    let mut w = WeightMap::new();
    w.insert("b".into(), Tensor::from_vec(&[2], vec![1.5, -2.0]).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.ilnw");
    save_weights(&w, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let mut want = b"ILNW".to_vec();
    want.extend(1u32.to_le_bytes());
    want.extend(1u32.to_le_bytes());
    want.extend(1u16.to_le_bytes());
    want.push(b'b');
    want.push(1);
    want.extend(2u32.to_le_bytes());
    want.extend(1.5f64.to_le_bytes());
    want.extend((-2.0f64).to_le_bytes());
    assert_eq!(bytes, want);
}

#[test]
fn corrupted_magic_loads_nothing() {
    let g = NetworkGraph::build(&tiny_arch(), &mut Rng::new(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ilnw");
    save_weights(&g.weights(), &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    match load_weights(&path) {
        Err(Error::WeightFormat { offset: 0, .. }) => {}
        other => panic!("expected magic error, got {other:?}"),
    }
    let mut h = NetworkGraph::build(&tiny_arch(), &mut Rng::new(4)).unwrap();
    let before = h.weights();
    assert!(load_weights(&path)
        .and_then(|w| h.load_weights(&w))
        .is_err());
    assert_eq!(h.weights(), before);
}

#[test]
fn truncation_is_rejected_at_every_length() {
    let g = NetworkGraph::build(&tiny_arch(), &mut Rng::new(3)).unwrap();
    let bytes = lungnet::training::weights::encode(&g.encoder_weights()).unwrap();
    for cut in (0..bytes.len()).step_by(97) {
        assert!(
            lungnet::training::weights::decode(&bytes[..cut]).is_err(),
            "cut {cut}"
        );
    }
}

#[test]
fn encoder_subset_is_a_prefix_namespace() {
    let g = NetworkGraph::build(&tiny_arch(), &mut Rng::new(3)).unwrap();
    let enc = g.encoder_weights();
    let all = g.weights();
    assert!(!enc.is_empty() && enc.len() < all.len());
    for (name, t) in &all {
        assert_eq!(enc.get(name), is_encoder_param(name).then_some(t));
    }
}

#[test]
fn he_init_statistics() {
    // 3x3 kernels over 64 input channels: fan-in 576, 11,520 draws.
    let mut p = Parameter::new("k", ParamKind::ConvKernel, Tensor::zeros(&[20, 64, 3, 3]));
    init_he(&mut p, &mut Rng::new(1));
    let d = p.value.data();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let want = (2.0f64 / 576.0).sqrt();
    assert!(mean.abs() < 0.1 * want, "mean {mean}");
    assert!((std / want - 1.0).abs() < 0.10, "std {std} vs {want}");
    let mut q = Parameter::new("k", ParamKind::ConvKernel, Tensor::zeros(&[20, 64, 3, 3]));
    init_he(&mut q, &mut Rng::new(1));
    assert_eq!(p.value, q.value);

    let mut b = Parameter::new("b", ParamKind::Bias, Tensor::full(&[5], 3.0));
    init_he(&mut b, &mut Rng::new(1));
    assert!(b.value.data().iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn arbitrary_maps_round_trip(entries in proptest::collection::btree_map(
        "[a-z][a-z0-9.]{0,12}",
        (proptest::collection::vec(1usize..4, 1..=4), any::<u64>()),
        0..6,
    )) {
        let mut w = WeightMap::new();
        for (name, (shape, seed)) in entries {
            let mut rng = Rng::new(seed);
            w.insert(name, Tensor::from_fn(&shape, |_| rng.normal(0.0, 1e3)));
        }
        let bytes = lungnet::training::weights::encode(&w).unwrap();
        prop_assert_eq!(lungnet::training::weights::decode(&bytes).unwrap(), w);
    }
}
