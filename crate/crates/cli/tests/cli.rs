use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrpriv"))
        .current_dir(configs())
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Exit status and error code of a failing run.
fn err(args: &[&str]) -> (i32, String) {
    let out = run(args);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let body: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(body["message"].is_string());
    (out.status.code().unwrap(), body["code"].as_str().unwrap().to_string())
}

const HEIGHT: &[&str] = &[
    "release",
    "--dataset",
    "school.csv",
    "--framework",
    "school_height.json",
    "--mechanism",
    "apmqm",
    "--epsilon",
    "1",
    "--seed",
    "11",
];
const PAIRS: &[&str] = &[
    "release",
    "--dataset",
    "pairs.csv",
    "--framework",
    "pairs_narrow.json",
    "--mechanism",
    "wasserstein",
    "--epsilon",
    "1",
    "--seed",
    "11",
];
const WELLNESS: &[&str] = &[
    "release",
    "--dataset",
    "wellness.csv",
    "--framework",
    "wellness.json",
    "--mechanism",
    "apgm",
    "--epsilon",
    "1",
    "--delta",
    "1e-5",
    "--seed",
    "11",
];
const WELLNESS_APPROX: &[&str] = &[
    "release",
    "--dataset",
    "wellness.csv",
    "--framework",
    "wellness.json",
    "--mechanism",
    "apgmng",
    "--epsilon",
    "1",
    "--delta",
    "1e-5",
    "--seed",
    "11",
    "--approximations",
    "wellness_approx.json",
];
const READINGS: &[&str] = &[
    "release",
    "--dataset",
    "readings.csv",
    "--framework",
    "readings.json",
    "--mechanism",
    "mqm-baseline",
    "--epsilon",
    "2",
    "--lipschitz",
    "1",
    "--seed",
    "11",
];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn height_count_is_exact() {
    let r = ok(HEIGHT);
    assert_eq!(r["mechanism"], "apmqm");
    assert_eq!(r["scale"], 0.0);
    assert_eq!(r["output"], 5.0);
}

#[test]
fn narrow_pairs_distance() {
    let r = ok(PAIRS);
    assert_eq!(r["W"], 1.0);
    assert_eq!(r["scale"], 1.0);
    assert_eq!(r["grid_step"], 0.05);
}

#[test]
fn reports_are_reproducible() {
    for args in [HEIGHT, PAIRS, WELLNESS, WELLNESS_APPROX, READINGS] {
        let a = run(args);
        let b = run(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
    let mut other = PAIRS.to_vec();
    let last = other.len() - 1;
    other[last] = "12";
    assert_ne!(ok(PAIRS)["output"], ok(&other)["output"]);
}

#[test]
fn report_fields() {
    let required: [(&[&str], &[&str]); 5] = [
        (WELLNESS, &["mechanism", "sensitivities", "sigma2", "c", "output", "seed"]),
        (WELLNESS_APPROX, &["mechanism", "sensitivities", "sigma2", "c", "output", "seed"]),
        (PAIRS, &["mechanism", "per_pair_distances", "W", "scale", "output", "seed"]),
        (HEIGHT, &["mechanism", "per_node", "scale", "output", "seed"]),
        (READINGS, &["mechanism", "per_node", "scale", "output", "seed", "lipschitz"]),
    ];
    for (args, fields) in required {
        let r = ok(args);
        for f in fields {
            assert!(!r[f].is_null(), "{f} missing from {}", r["mechanism"]);
        }
        assert!(r.get("noise").is_none());
        assert_eq!(r["seed"], 11);
    }
}

#[test]
fn noise_is_revealed_only_on_request() {
    let args = with(PAIRS, &["--reveal-noise"]);
    let r = ok(&strs(&args));
    let plain = ok(PAIRS);
    let noise = r["noise"].as_f64().unwrap();
    assert_ne!(noise, 0.0);
    assert_eq!(plain["output"], r["output"]);
    assert!((plain["output"].as_f64().unwrap() - noise - 2.0).abs() < 1e-12);
}

#[test]
fn quilt_inspection_lists_the_separator() {
    let r = ok(&[
        "inspect",
        "--dataset",
        "school.csv",
        "--framework",
        "school_height.json",
        "--mechanism",
        "apmqm",
        "--epsilon",
        "1",
    ]);
    let quilts = r["per_node"][0]["quilts"].as_array().unwrap();
    let found = quilts.iter().any(|q| {
        q["q"] == serde_json::json!(["g"])
            && q["n"] == serde_json::json!(["i", "s"])
            && q["r"] == serde_json::json!(["h", "w"])
    });
    assert!(found);
    assert_eq!(r["query_sensitivity"], 8.0);
}

#[test]
fn wasserstein_inspection_table() {
    let r = ok(&[
        "inspect",
        "--dataset",
        "pairs.csv",
        "--framework",
        "pairs_param.json",
        "--mechanism",
        "wasserstein",
        "--epsilon",
        "1",
    ]);
    assert_eq!(r["W"], 1.0);
    let row = |phi: f64| -> Vec<f64> {
        r["conditionals"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| (c["event"].as_str().unwrap().parse::<f64>().unwrap() - phi).abs() < 1e-9)
            .unwrap()["distribution"]["atoms"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a[1].as_f64().unwrap())
            .collect()
    };
    let table = [0.0983, 0.3091, 0.3643, 0.1908, 0.0375];
    let (high, low) = (row(0.8), row(0.2));
    for j in 0..5 {
        assert!((high[j] - table[j]).abs() < 1e-4);
        assert!((low[j] - table[4 - j]).abs() < 1e-4);
    }
}

#[test]
fn gaussian_inspection() {
    let r = ok(&[
        "inspect",
        "--dataset",
        "wellness.csv",
        "--framework",
        "wellness.json",
        "--mechanism",
        "apgm",
        "--epsilon",
        "1",
        "--delta",
        "1e-5",
        "--beta",
        "0.05",
    ]);
    let sigma2 = r["sigma2"].as_f64().unwrap();
    let alpha = r["accuracy"].as_f64().unwrap();
    assert!((alpha - sigma2.sqrt() * 1.959963984540054).abs() < 1e-9);
}

#[test]
fn certify_arithmetic() {
    let r = ok(&["certify", "--lambda", "0.1", "--eta", "0.01", "--epsilon", "1", "--delta", "1e-5"]);
    assert!((r["effective_epsilon"].as_f64().unwrap() - 1.2).abs() < 1e-15);
    let want = 0.1f64.exp() * 1e-5 + 0.01;
    assert!((r["effective_delta"].as_f64().unwrap() - want).abs() < 1e-15);
    assert_eq!(r["vacuous"], false);

    let wild = ok(&["certify", "--lambda", "30", "--eta", "0.01", "--epsilon", "1", "--delta", "1e-5"]);
    assert_eq!(wild["effective_delta"], 1.0);
    assert_eq!(wild["vacuous"], true);
}

#[test]
fn certify_estimates() {
    let base = [
        "certify",
        "--distribution",
        "binomial.json",
        "--approximation",
        "binomial_normal.json",
        "--eta",
        "0.05",
        "--epsilon",
        "1",
        "--delta",
        "1e-5",
    ];
    let coarse = ok(&[&base[..], &["--bins", "8"]].concat());
    assert!((coarse["lambda_eta"].as_f64().unwrap() - 0.1956160197620094).abs() < 1e-12);
    let fine = ok(&base);
    assert_eq!(fine["bins"], 64);
    assert!(fine["lambda_eta"].is_null());
    assert_eq!(fine["vacuous"], true);
}

#[test]
fn error_codes_and_statuses() {
    let no_delta: Vec<&str> = WELLNESS.iter().copied().filter(|a| *a != "--delta" && *a != "1e-5").collect();
    assert_eq!(err(&no_delta), (1, "invalid_config".into()));
    assert_eq!(err(&strs(&with(HEIGHT, &["--delta", "0.1"]))), (1, "invalid_config".into()));
    assert_eq!(err(&strs(&with(PAIRS, &["--max-quilt-size", "2"]))), (1, "invalid_config".into()));

    let missing: Vec<&str> = PAIRS.iter().map(|a| if *a == "pairs.csv" { "nope.csv" } else { a }).collect();
    assert_eq!(err(&missing), (2, "io".into()));

    let bad_mech: Vec<&str> = PAIRS.iter().map(|a| if *a == "wasserstein" { "laplace" } else { a }).collect();
    assert_eq!(err(&bad_mech).1, "usage");

    let zero_eps: Vec<&str> = PAIRS.iter().map(|a| if *a == "1" { "0" } else { a }).collect();
    assert_eq!(err(&zero_eps), (1, "invalid_parameter".into()));

    let wrong_class: Vec<&str> =
        HEIGHT.iter().map(|a| if *a == "apmqm" { "wasserstein" } else { a }).collect();
    assert_eq!(err(&wrong_class).0, 1);

    let dir = std::env::temp_dir().join(format!("attrpriv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let broken = dir.join("broken.json");
    std::fs::write(&broken, "{\"attributes\": [").unwrap();
    let args: Vec<&str> =
        PAIRS.iter().map(|a| if *a == "pairs_narrow.json" { broken.to_str().unwrap() } else { a }).collect();
    assert_eq!(err(&args), (1, "malformed_json".into()));
    std::fs::remove_dir_all(&dir).unwrap();
}
