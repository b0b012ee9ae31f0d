use std::collections::BTreeMap;
use std::path::Path;

use lungnet::synth::{
    generate_dataset, generate_phantom, load_dataset, read_pgm, write_pgm, Label, Manifest, Split,
};
use lungnet::Rng;

fn dir_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["", "images", "lung", "infection"] {
        for entry in std::fs::read_dir(root.join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if p.is_file() {
                out.insert(
                    p.strip_prefix(root).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn hundred_per_class_gives_stratified_70_15_15() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(100, 42, 32, dir.path()).unwrap();
    assert_eq!(m.rows.len(), 300);
    for (split, want) in [(Split::Train, 210), (Split::Val, 45), (Split::Test, 45)] {
        let rows: Vec<_> = m.split_rows(split).collect();
        assert_eq!(rows.len(), want, "{split}");
        let mut per_class = [0usize; 3];
        for r in &rows {
            per_class[r.label] += 1;
        }
        let (lo, hi) = (
            per_class.iter().min().unwrap(),
            per_class.iter().max().unwrap(),
        );
        assert!(hi - lo <= 1, "{split}: {per_class:?}");
        assert_eq!(load_dataset(&m, split).unwrap().len(), want);
    }
    let reread = Manifest::read(dir.path()).unwrap();
    assert_eq!(reread.rows, m.rows);
}

#[test]
fn regeneration_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_dataset(6, 7, 32, a.path()).unwrap();
    generate_dataset(6, 7, 32, b.path()).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));

    let c = tempfile::tempdir().unwrap();
    generate_dataset(6, 8, 32, c.path()).unwrap();
    assert_ne!(dir_bytes(a.path()), dir_bytes(c.path()));
}

#[test]
fn loaded_samples_match_generated_masks() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(4, 1, 32, dir.path()).unwrap();
    for split in [Split::Train, Split::Val, Split::Test] {
        for (row, s) in m.split_rows(split).zip(load_dataset(&m, split).unwrap()) {
            assert_eq!(s.label.id(), row.label);
            s.validate().unwrap();
            if s.label == Label::Normal {
                assert!(s.inf_mask.is_empty());
            }
        }
    }
}

#[test]
fn tiny_dataset_has_an_empty_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(1, 0, 32, dir.path()).unwrap();
    assert!(load_dataset(&m, Split::Test).unwrap().is_empty());
    assert_eq!(load_dataset(&m, Split::Train).unwrap().len(), 3);
}

#[test]
fn missing_file_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(2, 0, 32, dir.path()).unwrap();
    let row = &m.rows[0];
    std::fs::remove_file(dir.path().join(&row.lung_path)).unwrap();
    let err = load_dataset(&m, row.split).unwrap_err().to_string();
    assert!(err.contains(&row.sample_id), "{err}");
}

#[test]
fn infection_outside_lung_is_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(2, 0, 32, dir.path()).unwrap();
    let row = m.rows.iter().find(|r| r.label == 0).unwrap();
    let lung = read_pgm(dir.path().join(&row.lung_path)).unwrap();
    let mut inf = read_pgm(dir.path().join(&row.inf_path)).unwrap().data;
    let outside = lung.data.iter().position(|&v| v < 128).unwrap();
    inf[outside] = 255;
    write_pgm(dir.path().join(&row.inf_path), 32, 32, &inf).unwrap();
    let err = m.load_row(row).unwrap_err().to_string();
    assert!(err.contains(&row.sample_id), "{err}");
}

#[test]
fn phantom_invariants_over_1000_draws() {
    let mut rng = Rng::new(11);
    for k in 0..1000 {
        let label = Label::ALL[k % 3];
        let s = generate_phantom(&mut rng, label, 32).unwrap();
        s.validate().unwrap();
        assert!(s.inf_mask.is_subset_of(&s.lung_mask));
        assert_eq!(s.label, label);
        assert!(s.image.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(generate_phantom(&mut rng, Label::Normal, 16).is_err());
}
