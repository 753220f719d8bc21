use std::path::Path;
use std::process::{Command, Output};

use nsc_core::surrogate::ParamVector;

fn nsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn nsc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = nsc(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(dir: &Path, args: &[&str], category: &str) {
    let out = nsc(dir, args);
    assert!(!out.status.success(), "{args:?} succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{category}]: ")), "{err}");
}

fn manifest_value(path: &Path, key: &str) -> Option<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

/// Five tiny affine programs and a small hypernetwork trained on them.
fn tiny_setup(dir: &Path) {
    ok(dir, &["corpus-synth", "--family", "affine", "--count", "5", "--seed", "3", "--io-rows", "256", "--out", "d.jsonl"]);
    ok(
        dir,
        &[
            "hypernet-train", "--data", "d.jsonl", "--out", "m.ckpt", "--epochs", "10", "--hidden", "16", "--feed-forward", "32",
            "--lr", "1e-3", "--input-batch", "64",
        ],
    );
}

#[test]
fn compile_emits_65_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_setup(d);
    std::fs::write(d.join("f.c"), "float f(float x){return 0.5f*x + 0.25f;}\n").unwrap();
    let stdout = ok(d, &["compile", "--model", "m.ckpt", "--source", "f.c", "--out", "p.vec"]);
    assert!(stdout.contains("params 65"));
    let p = ParamVector::load(d.join("p.vec")).unwrap();
    assert_eq!(p.len(), 65);
    assert!(p.values().iter().all(|v| v.is_finite()));
    let hash = manifest_value(&d.join("p.vec.manifest"), "artifact.p.vec").unwrap();
    assert!(hash.starts_with("sha256:"));
}

#[test]
fn corpus_synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["corpus-synth", "--family", "affine", "--count", "50", "--seed", "7", "--out", "a.jsonl"]);
    ok(d, &["corpus-synth", "--family", "affine", "--count", "50", "--seed", "7", "--out", "b.jsonl", "--jobs", "2"]);
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    let b = std::fs::read(d.join("b.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 50);
}

#[test]
fn smoke_plan_emits_csv_and_grouped_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_setup(d);
    std::fs::write(
        d.join("smoke.cfg"),
        "# smoke plan\ndata = d.jsonl\nout_dir = ev\nsizes = 0,0.1\ntrials = 3\nepochs = 60\ncpn = m.ckpt\nseed = 11\n",
    )
    .unwrap();
    ok(d, &["eval-data-efficiency", "--plan", "smoke.cfg"]);
    let csv = std::fs::read_to_string(d.join("ev/table.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("method,program,size,"));
    assert_eq!(lines.filter(|l| l.starts_with("CPN,")).count(), 10);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ev/summary.json")).unwrap()).unwrap();
    let cpn = &summary["methods"][0];
    assert_eq!(cpn["method"], "CPN");
    for group in ["overall", "by_program", "by_size"] {
        assert!(!cpn[group].is_null(), "missing {group}");
    }
    assert_eq!(cpn["by_program"].as_array().unwrap().len(), 5);
    assert_eq!(cpn["by_size"].as_array().unwrap().len(), 2);

    ok(d, &["eval-data-efficiency", "--plan", "smoke.cfg", "--out-dir", "ev2", "--jobs", "3"]);
    assert_eq!(csv, std::fs::read_to_string(d.join("ev2/table.csv")).unwrap());
    assert_eq!(manifest_value(&d.join("ev2/manifest.txt"), "config.jobs").as_deref(), Some("3"));

    ok(d, &["report", "--trials", "ev/trials.json", "--out-dir", "rep"]);
    assert_eq!(csv, std::fs::read_to_string(d.join("rep/table.csv")).unwrap());
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.cfg"), "count = 2\nseed = 4\nio_rows = 64\n").unwrap();
    ok(d, &["corpus-synth", "--config", "c.cfg", "--out", "a.jsonl"]);
    let m = d.join("a.jsonl.manifest");
    assert_eq!(manifest_value(&m, "config.seed").as_deref(), Some("4"));
    assert_eq!(manifest_value(&m, "config.count").as_deref(), Some("2"));
    assert_eq!(manifest_value(&m, "config.timeout-secs").as_deref(), Some("8"));
    ok(d, &["corpus-synth", "--config", "c.cfg", "--seed", "9", "--out", "b.jsonl"]);
    let m = d.join("b.jsonl.manifest");
    assert_eq!(manifest_value(&m, "config.seed").as_deref(), Some("9"));
    assert_eq!(manifest_value(&m, "config.count").as_deref(), Some("2"));
}

#[test]
fn manifest_command_regenerates_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["corpus-synth", "--family", "quadratic", "--count", "3", "--seed", "5", "--io-rows", "128", "--out", "a.jsonl"]);
    let m = d.join("a.jsonl.manifest");
    let hash = manifest_value(&m, "artifact.a.jsonl").unwrap();
    let command = manifest_value(&m, "command").unwrap();
    let args: Vec<&str> = command.split(' ').skip(1).collect();
    std::fs::remove_file(d.join("a.jsonl")).unwrap();
    ok(d, &args);
    assert_eq!(manifest_value(&m, "artifact.a.jsonl").unwrap(), hash);
}

#[test]
fn errors_are_single_line_categories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fails_with(d, &["compile", "--bogus"], "usage");
    fails_with(d, &["compile", "--model", "none.ckpt", "--source", "f.c", "--out", "p.vec"], "missing-file");
    fails_with(d, &["corpus-synth", "--config", "none.cfg", "--out", "a.jsonl"], "missing-file");
    std::fs::write(d.join("bad.vec"), b"NOPE0000000000000000").unwrap();
    std::fs::write(d.join("bad.ckpt"), b"NOPE0000000000000000").unwrap();
    std::fs::write(d.join("f.c"), "float f(float x){return x;}\n").unwrap();
    fails_with(d, &["compile", "--model", "bad.ckpt", "--source", "f.c", "--out", "p.vec"], "schema");
    std::fs::write(d.join("bad.jsonl"), "{\"id\": 1}\n").unwrap();
    fails_with(d, &["finetune", "--data", "bad.jsonl", "--program", "0", "--out", "p.vec"], "schema");
    ok(d, &["corpus-synth", "--count", "1", "--io-rows", "64", "--out", "d.jsonl"]);
    fails_with(d, &["finetune", "--data", "d.jsonl", "--program", "0", "--init", "bad.vec", "--out", "p.vec"], "schema");
    fails_with(d, &["finetune", "--data", "d.jsonl", "--program", "nope", "--out", "p.vec"], "data");
    let out = nsc(d, &["compile", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

fn assert_default(help: &str, flag: &str, value: &str) {
    let mut lines = help.lines().skip_while(|l| !l.trim_start().starts_with(&format!("--{flag} <")));
    let head = lines.next().unwrap_or_else(|| panic!("no --{flag} in help:\n{help}"));
    let block: Vec<&str> = std::iter::once(head)
        .chain(lines.take_while(|l| !l.trim_start().starts_with('-')))
        .collect();
    let block = block.join(" ");
    assert!(block.contains(&format!("[default: {value}]")), "--{flag} should default to {value}: {block}");
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: &[(&str, &[(&str, &str)])] = &[
        (
            "corpus-build",
            &[("max-tokens", "512"), ("max-arity", "9"), ("out-limit", "10"), ("timeout-secs", "8"), ("io-rows", "2048"), ("seed", "0")],
        ),
        ("corpus-synth", &[("family", "affine"), ("count", "50"), ("io-rows", "2048")]),
        (
            "hypernet-train",
            &[
                ("epochs", "1500"),
                ("lr", "0.00005"),
                ("program-batch", "32"),
                ("input-batch", "1024"),
                ("padding", "random"),
                ("layers", "2"),
                ("hidden", "128"),
                ("heads", "2"),
                ("feed-forward", "512"),
            ],
        ),
        (
            "baseline-train maml",
            &[("epochs", "5000"), ("meta-batch", "32"), ("inner-lr", "0.2"), ("outer-lr", "0.001"), ("inner-steps", "3"), ("padding", "zero")],
        ),
        ("baseline-train pretrain", &[("epochs", "1500"), ("lr", "0.00001"), ("padding", "random")]),
        ("finetune", &[("epochs", "5000"), ("lr", "0.01"), ("val-fraction", "0.2"), ("padding", "zero")]),
        ("eval-data-efficiency", &[("sizes", "0 0.001 0.01 0.1 1"), ("trials", "9"), ("epochs", "5000"), ("lr", "0.01")]),
        ("eval-training-time", &[("trials", "9"), ("epochs", "5000")]),
        ("quantize", &[("k", "10"), ("max-iters", "40"), ("tolerance", "0.00001"), ("distance", "exact")]),
        ("downcast-study", &[("kernels", "all"), ("seed", "0")]),
        ("report", &[("baseline", "RND")]),
    ];
    for (sub, flags) in cases {
        let mut args: Vec<&str> = sub.split(' ').collect();
        args.push("--help");
        let help = ok(d, &args);
        assert!(help.contains("--config <CONFIG>"), "{sub}");
        for (flag, value) in flags.iter() {
            assert_default(&help, flag, value);
        }
    }
    assert!(ok(d, &["compile", "--help"]).contains("--model <MODEL>"));
}

#[test]
fn quantize_and_downcast_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = nsc_core::quantize::Image::synthetic(24, 16, 2);
    img.save(d.join("in.ppm")).unwrap();
    ok(d, &["quantize", "--input", "in.ppm", "--out", "q.ppm", "--k", "3", "--report", "q.json"]);
    let q = nsc_core::quantize::Image::load(d.join("q.ppm")).unwrap();
    assert!(q.distinct_colors() <= 3);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("q.json")).unwrap()).unwrap();
    assert_eq!(rep["palette"].as_array().unwrap().len(), 3);
    fails_with(d, &["quantize", "--input", "in.ppm", "--out", "q.ppm", "--distance", "surrogate"], "usage");

    let csv = ok(d, &["downcast-study", "--kernels", "fft0,kmeans"]);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    let mse: f64 = rows[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!(mse > 0.0 && mse <= 1e-10, "{mse}");
}
