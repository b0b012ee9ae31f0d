use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "levels = 3\nbase_width = 2\ninput_hw = 32\nclassifier_width = 8\ndense1 = 16\ndense2 = 8\nepochs = 1\nbatch_size = 8\n";

fn lungnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lungnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn params_prints_three_ordered_counts() {
    let o = lungnet(&["params"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let count = |mode: &str| -> usize {
        out.lines()
            .find(|l| l.split_whitespace().next() == Some(mode))
            .and_then(|l| l.split_whitespace().nth(1))
            .unwrap_or_else(|| panic!("no {mode} line in {out}"))
            .parse()
            .unwrap()
    };
    assert!(count("streamlined") < count("unetpp"));
    assert!(count("unet") < count("unetpp"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(lungnet(&["params", "--bogus"]).status.code(), Some(1));
    assert_eq!(lungnet(&[]).status.code(), Some(1));
    assert_eq!(lungnet(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = lungnet(&[
        "eval",
        "--net",
        "pipeline",
        "--weights",
        p(&missing),
        "--data",
        p(&missing),
        "--report",
        p(&missing),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn gradcheck_passes() {
    let o = lungnet(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn synth_train_eval_infer_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();

    let o = lungnet(&[
        "--seed",
        "3",
        "synth",
        "--n",
        "4",
        "--hw",
        "32",
        "--out",
        p(&data),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("wrote 12 samples"));

    let enc = dir.path().join("enc.ilnw");
    let o = lungnet(&[
        "pretrain-encoder",
        "--data",
        p(&data),
        "--out-weights",
        p(&enc),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(enc.exists() && enc.with_extension("csv").exists());

    let out = dir.path().join("out");
    for net in ["pipeline", "infection"] {
        let o = lungnet(&[
            "train",
            "--net",
            net,
            "--data",
            p(&data),
            "--init-weights",
            p(&enc),
            "--out",
            p(&out),
            "--config",
            p(&cfg),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(
        lungnet(&[
            "train",
            "--net",
            "classifier",
            "--data",
            p(&data),
            "--out",
            p(&out)
        ])
        .status
        .code(),
        Some(2)
    );

    let report = dir.path().join("eval.csv");
    let o = lungnet(&[
        "eval",
        "--net",
        "pipeline",
        "--weights",
        p(&out.join("pipeline.ilnw")),
        "--data",
        p(&data),
        "--report",
        p(&report),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 2);

    let id = "covid_0000";
    let o = lungnet(&[
        "infer",
        "--image",
        p(&data.join(format!("images/{id}.pgm"))),
        "--pipeline-weights",
        p(&out.join("pipeline.ilnw")),
        "--infection-weights",
        p(&out.join("infection.ilnw")),
        "--gt-lung",
        p(&data.join(format!("lung/{id}.pgm"))),
        "--gt-inf",
        p(&data.join(format!("infection/{id}.pgm"))),
        "--out-dir",
        p(&dir.path().join("infer")),
        "--config",
        p(&cfg),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    for key in [
        "label:",
        "perc:",
        "actual_perc:",
        "infection_iou:",
        "overlay:",
    ] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
    let json = std::fs::read_dir(dir.path().join("infer"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .unwrap();
    let r = lungnet::pipeline::InfectionReport::from_json(&std::fs::read_to_string(json).unwrap())
        .unwrap();
    assert!(Path::new(&r.overlay_path).exists());
    assert!(r.actual_perc.is_some());
}
