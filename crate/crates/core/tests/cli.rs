use std::path::Path;
use std::process::{Command, Output};

use psne_learn::io::{read_dataset, read_family, results_from_json};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psne-learn"))
        .args(args)
        .current_dir(dir)
        .env_remove("PSNE_LEARN_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn enumerate_sample_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["enumerate", "--n", "3", "--k", "1", "--out", "family.json"],
    );
    let family = read_family(&d.join("family.json")).unwrap();
    assert!(family.len() > 10);
    let idx = family
        .candidates()
        .iter()
        .position(|c| c.len() == 2)
        .unwrap();
    let idx_s = idx.to_string();
    ok(
        d,
        &[
            "sample",
            "--family",
            "family.json",
            "--psne",
            &idx_s,
            "--q",
            "0.9",
            "--m",
            "20000",
            "--seed",
            "4",
            "--out",
            "data.csv",
        ],
    );
    let data = read_dataset(&d.join("data.csv"), family.space()).unwrap();
    assert_eq!(data.len(), 20000);
    let out = ok(d, &["fit", "--family", "family.json", "--data", "data.csv"]);
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let psne: Vec<u64> = serde_json::from_value(fit["psne"].clone()).unwrap();
    assert_eq!(psne, family.candidates()[idx].indices());
    assert!((fit["q_hat"].as_f64().unwrap() - 0.9).abs() < 0.02);
}

#[test]
fn theory_prints_only_requested_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "theory", "--beta", "--r", "2", "--q", "0.75", "--joint", "4",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 1);
    assert!((obj["beta"].as_f64().unwrap() - 1.5f64.ln() / 32f64.ln()).abs() < 1e-12);

    let out = ok(
        dir.path(),
        &[
            "theory",
            "--m-sufficient",
            "--eps",
            "0.1",
            "--delta",
            "0.05",
            "--dh",
            "100",
            "--fano",
            "--m",
            "18",
            "--n",
            "6",
            "--k",
            "1",
            "--joint",
            "64",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m_sufficient"], 1798);
    assert!((v["fano_bound"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert!(v.get("beta").is_none());
}

#[test]
fn experiment_writes_table_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.cfg"),
        "# small fano run\nkind = fano\nn = 5\nk = 2\ntrials = 30\nm = 0, 10\nformat = json\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "experiment",
            "--config",
            "exp.cfg",
            "--seed",
            "8",
            "--out",
            "r.json",
        ],
    );
    let table = results_from_json(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(table.metadata.seed, 8);
    assert_eq!(table.rows.len(), 4);
    assert!(d.join("r.json.meta.json").exists());
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["enumerate", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(d, &["experiment", "--trials", "zero"]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(d, &["experiment", "--kind", "nope"]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(
            d,
            &[
                "enumerate",
                "--n",
                "6",
                "--k",
                "5",
                "--game-ceiling",
                "1000",
                "--out",
                "f.json"
            ]
        )
        .status
        .code(),
        Some(4)
    );
    assert_eq!(
        run(d, &["fit", "--family", "missing.json", "--data", "x.csv"])
            .status
            .code(),
        Some(5)
    );
    assert_eq!(
        run(
            d,
            &["theory", "--beta", "--r", "2", "--q", "0.1", "--joint", "4"]
        )
        .status
        .code(),
        Some(6)
    );
    std::fs::write(d.join("f.json"), b"{ not json").unwrap();
    assert_eq!(
        run(d, &["fit", "--family", "f.json", "--data", "x.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sample_from_game_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let game = serde_json::json!({
        "n": 2,
        "actions": [2, 2],
        "neighbors": { "1": [2], "2": [1] },
        "unary": { "1": [0.0, 0.0], "2": [0.0, 0.0] },
        "pairwise": { "1,2": [1.0, 0.0, 0.0, 1.0], "2,1": [1.0, 0.0, 0.0, 1.0] }
    });
    std::fs::write(d.join("g.json"), game.to_string()).unwrap();
    ok(
        d,
        &[
            "sample", "--game", "g.json", "--q", "0.8", "--m", "100", "--out", "s.csv",
        ],
    );
    let space = psne_learn::ActionSpace::binary(2).unwrap();
    let data = read_dataset(&d.join("s.csv"), &space).unwrap();
    assert_eq!(data.len(), 100);
}
