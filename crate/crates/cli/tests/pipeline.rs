#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tractvar_core::formats::{read_palate, read_pellets, read_tv};
use tractvar_core::phones::Subtype;
use tractvar_core::ratings::{write_ratings, RatingRecord};
use tractvar_core::Channel;

const BASE: &str = r#"
seed = 3
out = "out"
orientation = "raw"

[synth]
training_pairs = 4
service_pool = 20

[synth.spec]
n_frames = 24
embedding_dim = 4

[model]
layers = 25
dim = 4
conv_channels = 2
gru1 = 4
gru2 = 3
dense = 4
outputs = 9
dropout = 0.0
bn_momentum = 0.1
bn_eps = 1e-5

[train]
max_epochs = 3
batch_size = 2

[paths]
pellets = "out/pellets.csv"
palate = "out/palate.csv"
observations = "out/corpus.csv"
tv = ["out/tv.csv"]
manifest = "out/training/manifest.csv"
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tractvar"));
    for k in [
        "VTV_CONFIG",
        "VTV_SEED",
        "VTV_TARGET",
        "VTV_OUT",
        "VTV_FORMAT",
    ] {
        c.env_remove(k);
    }
    c
}

fn run(cfg: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(cfg)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn err_json(o: &Output) -> Value {
    assert!(!o.status.success());
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

fn workspace(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pipeline.toml");
    std::fs::write(&cfg, format!("{BASE}{extra}")).unwrap();
    (dir, cfg)
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs the batch pipeline end to end in a fresh directory and returns
/// every file it wrote.
fn full_run() -> BTreeMap<String, Vec<u8>> {
    let (dir, cfg) = workspace("");
    for cmd in ["synth", "tv-compute", "normalize", "train"] {
        ok_json(&run(&cfg, &[cmd]));
    }
    // Infer needs the trained model.
    let infer_cfg = dir.path().join("infer.toml");
    std::fs::write(
        &infer_cfg,
        format!("{BASE}\n").replace(
            "[paths]\n",
            "[paths]\nmodel = \"out/model.vtvm\"\nembeddings = [\"out/training/emb_000.vtve\"]\n",
        ),
    )
    .unwrap();
    ok_json(&run(&infer_cfg, &["infer"]));
    for cmd in ["analyze-categorical", "analyze-gradient", "report"] {
        ok_json(&run(&cfg, &[cmd]));
    }
    files_under(&dir.path().join("out"))
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let a = full_run();
    let b = full_run();
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs between runs");
    }
    for name in [
        "pellets.csv",
        "tv.csv",
        "range.json",
        "model.vtvm",
        "history.csv",
        "contrasts_r.csv",
        "coefficients.csv",
        "report.md",
    ] {
        assert!(
            a.contains_key(name),
            "missing {name}: {:?}",
            a.keys().collect::<Vec<_>>()
        );
    }
    assert!(a.keys().any(|k| k.starts_with("inferred/")));
}

#[test]
fn tv_compute_matches_dense_oracle() {
    let (dir, cfg) = workspace("");
    ok_json(&run(&cfg, &["synth"]));
    let o = ok_json(&run(&cfg, &["tv-compute"]));
    assert_eq!(o["command"], "tv-compute");
    let out = dir.path().join("out");
    let frames = read_pellets(std::fs::File::open(out.join("pellets.csv")).unwrap()).unwrap();
    let trace = read_palate(std::fs::File::open(out.join("palate.csv")).unwrap()).unwrap();
    let pts: Vec<(f64, f64)> = trace.points().iter().map(|p| (p.x, p.y)).collect();
    let (m, _) = read_tv(std::fs::File::open(out.join("tv.csv")).unwrap()).unwrap();
    assert_eq!(m.len(), frames.len());
    for (t, f) in frames.iter().enumerate() {
        let (bd, bl) = common::oracle_tongue_body(f, &pts);
        let (td, tl) = common::oracle_tongue_tip(f, &pts);
        let get = |c| m.channel(c)[t];
        assert!(
            (get(Channel::Tbcd) - bd).abs() <= 1e-3,
            "frame {t}: TBCD {} vs {bd}",
            get(Channel::Tbcd)
        );
        assert!(
            (get(Channel::Tbcl) - bl).abs() <= 1e-3,
            "frame {t}: TBCL {} vs {bl}",
            get(Channel::Tbcl)
        );
        assert!((get(Channel::Ttcd) - td).abs() <= 1e-3, "frame {t}: TTCD");
        assert_eq!(get(Channel::Ttcl), tl);
        assert!((get(Channel::Lp) - f.ll.x).abs() < 1e-12);
    }
}

#[test]
fn articulatory_orientation_negates_degrees() {
    let (dir, cfg) = workspace("");
    ok_json(&run(&cfg, &["synth"]));
    ok_json(&run(&cfg, &["tv-compute"]));
    let (raw, _) = read_tv(std::fs::File::open(dir.path().join("out/tv.csv")).unwrap()).unwrap();
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("orientation = \"raw\"", "orientation = \"articulatory\"");
    std::fs::write(&cfg, text).unwrap();
    ok_json(&run(&cfg, &["tv-compute"]));
    let (art, _) = read_tv(std::fs::File::open(dir.path().join("out/tv.csv")).unwrap()).unwrap();
    for c in Channel::ORAL {
        let sign = if matches!(c, Channel::Ttcd | Channel::Tbcd) {
            -1.0
        } else {
            1.0
        };
        for (a, r) in art.channel(c).iter().zip(raw.channel(c)) {
            assert_eq!(*a, sign * r, "{c:?}");
        }
    }
}

#[test]
fn categorical_analysis_supports_every_expected_sign() {
    let (dir, cfg) = workspace("");
    ok_json(&run(&cfg, &["synth"]));
    for (t, env) in [("r", None), ("s", Some("s"))] {
        let mut c = bin();
        c.arg("--config").arg(&cfg).arg("analyze-categorical");
        if let Some(v) = env {
            c.env("VTV_TARGET", v);
        }
        ok_json(&c.output().unwrap());
        let text =
            std::fs::read_to_string(dir.path().join(format!("out/contrasts_{t}.csv"))).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let sup = header.iter().position(|h| *h == "supported").unwrap();
        let rows: Vec<&str> = lines.collect();
        assert!(!rows.is_empty());
        for r in rows {
            assert_eq!(r.split(',').nth(sup), Some("true"), "/{t}/ row {r}");
        }
    }
}

#[test]
fn consensus_and_extract_build_observations() {
    let (dir, cfg) = workspace("");
    ok_json(&run(&cfg, &["synth", "--seed", "3"]));
    let root = dir.path();
    // Two files: f1 rated correct by everyone, f2 a w-error by two of three.
    let rec = |r: &str, f: &str, s, st| RatingRecord::new(r, f, s, st);
    let ratings = vec![
        rec("a", "f1", 5, None),
        rec("b", "f1", 5, None),
        rec("c", "f1", 5, None),
        rec("a", "f2", 2, Some(Subtype::WError)),
        rec("b", "f2", 1, Some(Subtype::WError)),
        rec("c", "f2", 4, None),
    ];
    let mut buf = Vec::new();
    write_ratings(&mut buf, &ratings).unwrap();
    std::fs::write(root.join("ratings.csv"), buf).unwrap();
    let ccfg = root.join("cons.toml");
    std::fs::write(
        &ccfg,
        "out = \"cons\"\n[paths]\nratings = \"ratings.csv\"\n[thresholds]\nmin_count = 1\n",
    )
    .unwrap();
    ok_json(&run(&ccfg, &["consensus"]));
    let cons = std::fs::read_to_string(root.join("cons/consensus.csv")).unwrap();
    assert!(cons.contains("f1,correct_unanimous,,5.0,3"), "{cons}");
    assert!(cons.contains("f2,error_subtype,w-error,"), "{cons}");

    std::fs::create_dir_all(root.join("tvs")).unwrap();
    for f in ["f1", "f2"] {
        std::fs::copy(
            root.join("out/training/tv_000.csv"),
            root.join(format!("tvs/{f}.csv")),
        )
        .unwrap();
    }
    std::fs::write(
        root.join("align.csv"),
        "file_id,phone,start_s,end_s\nf1,r,0.01,0.05\nf2,r,0.02,0.08\nf2,w,0.10,0.12\n",
    )
    .unwrap();
    std::fs::write(
        root.join("files.csv"),
        "file_id,speaker_id,utterance_id\nf1,spk1,u1\nf2,spk1,u2\n",
    )
    .unwrap();
    let ecfg = root.join("extract.toml");
    std::fs::write(
        &ecfg,
        "out = \"obs\"\n[paths]\nalignment = \"align.csv\"\ntv_dir = \"tvs\"\nfiles = \"files.csv\"\nconsensus = \"cons/consensus.csv\"\n",
    )
    .unwrap();
    ok_json(&run(&ecfg, &["extract"]));
    let obs = std::fs::read_to_string(root.join("obs/observations.csv")).unwrap();
    let lines: Vec<&str> = obs.lines().collect();
    assert!(lines[0].starts_with("file_id,speaker_id,utterance_id,phone,LA"));
    assert_eq!(lines.len(), 4, "{obs}");
}

#[test]
fn errors_are_json_records_with_exit_codes() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let e = err_json(&o);
    assert_eq!(e["status"], "error");
    assert_eq!(e["kind"], "usage");

    let o = bin()
        .args(["--config", "/nonexistent/pipeline.toml", "synth"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(err_json(&o)["kind"], "missing_input");

    let (_dir, cfg) = workspace("");
    let o = run(&cfg, &["tv-compute"]);
    assert_eq!(o.status.code(), Some(3));
    let e = err_json(&o);
    assert_eq!(e["kind"], "missing_input");
    assert_eq!(e["command"], "tv-compute");
    assert!(e["path"].as_str().unwrap().ends_with("pellets.csv"));

    let (_dir, bad) = workspace("\n[thresholds]\nalpha = 2.0\n");
    let o = run(&bad, &["synth"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(err_json(&o)["kind"], "config");

    let (_dir, unknown) = workspace("\nbogus_key = 1\n");
    assert_eq!(run(&unknown, &["synth"]).status.code(), Some(2));
}

#[test]
fn environment_and_flags_override_the_file() {
    let (dir, cfg) = workspace("");
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("synth")
        .env("VTV_OUT", dir.path().join("env_out"))
        .output()
        .unwrap();
    ok_json(&o);
    assert!(dir.path().join("env_out/pellets.csv").exists());
    // A flag beats the environment.
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["synth", "--out"])
        .arg(dir.path().join("flag_out"))
        .env("VTV_OUT", dir.path().join("env_out2"))
        .output()
        .unwrap();
    ok_json(&o);
    assert!(dir.path().join("flag_out/pellets.csv").exists());
    assert!(!dir.path().join("env_out2").exists());
    // The seed flag changes the synthetic data.
    let o = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["synth", "--seed", "99", "--out"])
        .arg(dir.path().join("seed99"))
        .output()
        .unwrap();
    ok_json(&o);
    let a = std::fs::read(dir.path().join("flag_out/pellets.csv")).unwrap();
    let b = std::fs::read(dir.path().join("seed99/pellets.csv")).unwrap();
    assert_ne!(a, b);
}
