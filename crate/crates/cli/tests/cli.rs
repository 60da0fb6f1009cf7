use std::path::Path;
use std::process::{Command, Output};

use diffdesc::descriptors::{Descriptor, DescriptorHeader};
use diffdesc::field::{GridSpec, ScalarField};
use diffdesc::matching::MatchResult;
use tempfile::TempDir;

fn diffdesc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffdesc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn edge(x: f64, y: f64) -> f64 {
    0.5 + 0.4
        * (0.6 * (x - 1.0) + 0.2 * y).tanh()
        * (-((x - 1.0).powi(2) + (y - 0.5).powi(2)) / 80.0).exp()
}

fn write_pgm(path: &Path, n: usize, f: impl Fn(f64, f64) -> f64) {
    let field = ScalarField::from_fn(GridSpec::centered(n, n, 1.0), |p| f(p.x, p.y)).unwrap();
    std::fs::write(path, field.to_pgm_p2(65535)).unwrap();
}

const SMALL_CONFIG: &str = r#"{
  "descriptor": {
    "sigma_d": 2.0,
    "grid": {"width": 8, "height": 8, "spacing": 1.7142857142857142, "origin": [-6.0, -6.0]}
  },
  "io": {"write_csv": true}
}"#;

#[test]
fn descriptor_writes_payload_header_and_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_pgm(&d.join("in.pgm"), 32, edge);
    std::fs::write(d.join("cfg.json"), SMALL_CONFIG).unwrap();
    let o = diffdesc(
        &[
            "descriptor",
            "--kind",
            "sift",
            "--config",
            "cfg.json",
            "in.pgm",
            "out.desc",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let header: DescriptorHeader =
        serde_json::from_str(&std::fs::read_to_string(d.join("out.desc.json")).unwrap()).unwrap();
    let payload = std::fs::read(d.join("out.desc")).unwrap();
    assert_eq!(payload.len(), 8 * 8 * 8 * 4);
    let desc = Descriptor::from_parts(header, &payload).unwrap();
    assert!(desc.values.iter().any(|v| *v > 0.0));
    assert!(d.join("out.desc.csv").exists());
    let echoed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("resolved_config.json")).unwrap())
            .unwrap();
    assert_eq!(echoed["descriptor"]["sigma_d"], 2.0);
    assert_eq!(echoed["descriptor"]["n_beta_bins"], 8);
}

#[test]
fn descriptor_unknown_kind_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    write_pgm(&tmp.path().join("in.pgm"), 16, edge);
    let o = diffdesc(
        &["descriptor", "--kind", "surf", "in.pgm", "out.desc"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("unknown descriptor kind"),
        "{}",
        stderr(&o)
    );
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn descriptor_nonpositive_sigma_r_names_field() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_pgm(&d.join("in.pgm"), 16, edge);
    std::fs::write(d.join("cfg.json"), r#"{"descriptor": {"sigma_r": 0.0}}"#).unwrap();
    let o = diffdesc(
        &[
            "descriptor",
            "--kind",
            "sift",
            "--config",
            "cfg.json",
            "in.pgm",
            "out.desc",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma_r"), "{}", stderr(&o));
    assert!(!d.join("out.desc").exists());
}

#[test]
fn unknown_config_field_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(
        tmp.path().join("cfg.json"),
        r#"{"homotopy": {"sigmas": [1, 0]}}"#,
    )
    .unwrap();
    let o = diffdesc(&["landscape", "--config", "cfg.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigmas"), "{}", stderr(&o));
}

fn match_fixture(d: &Path) {
    write_pgm(&d.join("image.pgm"), 40, |x, y| edge(x - 3.0, y + 2.0));
    std::fs::create_dir(d.join("templates")).unwrap();
    write_pgm(&d.join("templates").join("edge.pgm"), 24, edge);
    write_pgm(&d.join("templates").join("flat.pgm"), 24, |x, _| {
        0.5 + 0.001 * x
    });
    std::fs::write(
        d.join("candidates.json"),
        r#"[
  {"label": "identity", "transform": {"type": "similarity", "alpha": 0.0, "s": 0.0, "b": [0.0, 0.0]}},
  {"label": "shift", "transform": {"type": "similarity", "alpha": 0.0, "s": 0.0, "b": [3.0, -2.0]}}
]"#,
    )
    .unwrap();
    std::fs::write(d.join("cfg.json"), SMALL_CONFIG).unwrap();
}

#[test]
fn match_selects_planted_pair_with_both_scores() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    match_fixture(d);
    for score in ["correlation", "distance"] {
        let o = diffdesc(
            &[
                "match",
                "--kind",
                "sift",
                "--score",
                score,
                "--config",
                "cfg.json",
                "image.pgm",
                "templates",
                "candidates.json",
            ],
            d,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let r: MatchResult = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(r.labels, vec!["identity", "shift"]);
        assert_eq!((r.j_star, r.k_star), (1, 0), "{score}: {:?}", r.scores);
        assert!(stderr(&o).contains("candidate shift  template edge.pgm"));
    }
}

#[test]
fn match_accepts_entries_object_and_writes_out_dir() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    match_fixture(d);
    let list = std::fs::read_to_string(d.join("candidates.json")).unwrap();
    std::fs::write(d.join("set.json"), format!("{{\"entries\": {list}}}")).unwrap();
    let o = diffdesc(
        &[
            "match",
            "--kind",
            "sift",
            "--config",
            "cfg.json",
            "--out",
            "res",
            "image.pgm",
            "templates",
            "set.json",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("res/match.json").exists());
    assert!(d.join("res/resolved_config.json").exists());
}

#[test]
fn match_missing_candidates_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    match_fixture(d);
    let o = diffdesc(
        &[
            "match",
            "--kind",
            "sift",
            "image.pgm",
            "templates",
            "nope.json",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.json"));
}

#[test]
fn match_empty_template_dir_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    match_fixture(d);
    std::fs::create_dir(d.join("empty")).unwrap();
    let o = diffdesc(
        &[
            "match",
            "--kind",
            "sift",
            "image.pgm",
            "empty",
            "candidates.json",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no .pgm templates"));
}

fn final_point(out: &str) -> (f64, f64) {
    let line = out
        .lines()
        .find(|l| l.starts_with("final "))
        .expect("final line");
    let get = |key: &str| -> f64 {
        line.split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    (get("c1="), get("theta="))
}

#[test]
fn toy_diffuse_default_reaches_global_minimum() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = diffdesc(&["toy-diffuse", "--out", "run"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let (c1, theta) = final_point(&stdout(&o));
    assert!(
        (c1 - 1.0).abs() < 0.05 && (theta - 0.25).abs() < 0.02,
        "{c1} {theta}"
    );
    let traj = std::fs::read_to_string(d.join("run/trajectory.csv")).unwrap();
    assert!(traj.starts_with("stage,sigma,c1,theta,cost\n"));
    assert_eq!(traj.lines().count(), 1 + 9);
    let landscapes = std::fs::read_dir(d.join("run")).unwrap().filter(|e| {
        e.as_ref()
            .unwrap()
            .file_name()
            .to_string_lossy()
            .starts_with("landscape_stage")
    });
    assert_eq!(landscapes.count(), 9);
    assert!(d.join("run/landscape_stage8_sigma0.csv").exists());
    assert!(d.join("run/resolved_config.json").exists());
}

#[test]
fn toy_diffuse_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let a = diffdesc(&["toy-diffuse", "--out", "a", "--schedule", "1,0.25,0"], d);
    let b = diffdesc(&["toy-diffuse", "--out", "b", "--schedule", "1,0.25,0"], d);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    for name in [
        "trajectory.csv",
        "landscape_stage1_sigma0.25.csv",
        "resolved_config.json",
    ] {
        assert_eq!(
            std::fs::read(d.join("a").join(name)).unwrap(),
            std::fs::read(d.join("b").join(name)).unwrap()
        );
    }
}

#[test]
fn toy_diffuse_zero_schedule_is_plain_descent() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = diffdesc(&["toy-diffuse", "--out", "run", "--schedule", "0"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let (c1, theta) = final_point(&stdout(&o));
    assert!(c1.abs() < 0.1 && theta.abs() < 0.15, "{c1} {theta}");
    let traj = std::fs::read_to_string(d.join("run/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2);
}

#[test]
fn toy_diffuse_bad_schedule_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = diffdesc(&["toy-diffuse", "--schedule", "0.5,1,0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn toy_diffuse_landscape_only_writes_single_csv() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = diffdesc(
        &[
            "toy-diffuse",
            "--out",
            "run",
            "--landscape-only",
            "--sigma",
            "1.0",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csvs: Vec<_> = std::fs::read_dir(d.join("run"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs, vec!["landscape_sigma1.csv".to_string()]);
    let text = std::fs::read_to_string(d.join("run/landscape_sigma1.csv")).unwrap();
    assert!(text.starts_with("c1,theta,value\n"));
    assert_eq!(text.lines().count(), 1 + 81 * 201);
}

#[test]
fn landscape_command_raw() {
    let tmp = TempDir::new().unwrap();
    let o = diffdesc(&["landscape", "--out", "ls"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("ls/landscape_sigma0.csv").exists());
}

#[test]
fn verify_identities_default_passes() {
    let tmp = TempDir::new().unwrap();
    let o = diffdesc(
        &[
            "verify-identities",
            "--seed",
            "42",
            "--count",
            "100",
            "--out",
            "v",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("identity,params,closed_form,oracle,rel_err\n"));
    assert_eq!(out.lines().count(), 1 + 6 * 100);
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("v/identities.csv")).unwrap(),
        out
    );
}

#[test]
fn verify_identities_single_draw_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = diffdesc(
        &["verify-identities", "--seed", "7", "--count", "1"],
        tmp.path(),
    );
    let b = diffdesc(
        &["verify-identities", "--seed", "7", "--count", "1"],
        tmp.path(),
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 1 + 6);
}

#[test]
fn verify_identities_zero_count_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = diffdesc(&["verify-identities", "--count", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
