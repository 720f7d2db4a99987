use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use objnav::eval::EvalReport;
use objnav::render::parse_polyline;
use objnav::util::sha256_hex;
use objnav::Episode;

fn objnav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_objnav"))
        .args(args)
        .current_dir(dir)
        .env_remove("OBJNAV_JOBS")
        .output()
        .expect("spawn objnav")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = objnav(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const PIPELINE: &[&[&str]] = &[
    &["gen-house", "--seed", "11", "--count", "3", "--out-dir", "houses"],
    &["gen-episodes", "--seed", "5", "--houses-dir", "houses", "--n", "6", "--split", "test", "--out", "episodes.jsonl"],
    &["build-traces", "--seed", "0", "--houses-dir", "houses", "--episodes", "episodes.jsonl", "--out", "traces.jsonl"],
    &["postprocess", "--seed", "3", "--traces", "traces.jsonl", "--out", "post.jsonl", "--report", "hist.json"],
    &["gen-descriptions", "--seed", "9", "--n", "12", "--out", "desc.jsonl"],
    &["train-bc", "--seed", "2", "--episodes", "episodes.jsonl", "--epochs", "20", "--out", "params.json", "--loss-csv", "loss.csv"],
    &["eval", "--seed", "1", "--houses-dir", "houses", "--episodes", "episodes.jsonl", "--agent", "oracle", "--out", "oracle.json", "--csv", "oracle.csv"],
    &["eval", "--seed", "1", "--houses-dir", "houses", "--episodes", "episodes.jsonl", "--agent", "random", "--out", "random.json"],
    &["eval", "--seed", "1", "--houses-dir", "houses", "--episodes", "episodes.jsonl", "--agent", "policy", "--params", "params.json", "--out", "policy.json"],
    &["stats", "--houses-dir", "houses", "--episodes", "episodes.jsonl", "--out", "stats.json"],
];

/// Runs the pipeline in `dir` and hashes every produced file and stdout.
fn run_pipeline(dir: &Path, jobs: &str) -> Vec<(String, String)> {
    let mut digests = Vec::new();
    for (i, args) in PIPELINE.iter().enumerate() {
        let mut full = vec!["--jobs", jobs];
        full.extend_from_slice(args);
        let stdout = ok(dir, &full);
        digests.push((format!("stdout-{i}"), sha256_hex(stdout.as_bytes())));
    }
    let mut files: Vec<_> = walk(dir);
    files.sort();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap().display().to_string();
        digests.push((rel, sha256_hex(&fs::read(&f).unwrap())));
    }
    digests
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn pipeline_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path(), "1");
    let second = run_pipeline(b.path(), "4");
    assert_eq!(first, second);
    assert!(first.len() > PIPELINE.len() + 10);

    let report: EvalReport = serde_json::from_str(&fs::read_to_string(a.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report.overall.episodes, 18);
    assert_eq!(report.overall.sr, 1.0);
    assert_eq!(report.overall.spl, 1.0);
    assert_eq!(report.overall.sel, 1.0);
    assert_eq!(report.splits["test"].sr, 1.0);
    let csv = fs::read_to_string(a.path().join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
    let loss = fs::read_to_string(a.path().join("loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,loss\n0,1.386294361119"));
    assert_eq!(loss.lines().count(), 22);
}

#[test]
fn missing_seed_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let out = objnav(d.path(), &["gen-house", "--out-dir", "h"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert!(v["auto_seed"].is_u64());
}

fn expect_code(dir: &Path, args: &[&str], code: i32, kind: &str) {
    let out = objnav(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(v["error"], kind);
    assert_eq!(v["code"], code);
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    expect_code(p, &["gen-house", "--bogus"], 2, "usage");
    expect_code(p, &["eval", "--house", "nope.json", "--episodes", "e.jsonl", "--agent", "oracle"], 3, "missing_input");
    fs::write(p.join("bad.json"), "{\"id\": 3}").unwrap();
    expect_code(p, &["stats", "--house", "bad.json"], 4, "schema");
    fs::write(p.join("bad.jsonl"), "{}\n").unwrap();
    expect_code(p, &["postprocess", "--seed", "1", "--traces", "bad.jsonl", "--out", "o.jsonl"], 4, "schema");
    fs::write(p.join("empty.jsonl"), "").unwrap();
    expect_code(p, &["postprocess", "--seed", "1", "--traces", "empty.jsonl", "--keep-rate", "1.5", "--out", "o.jsonl"], 2, "usage");
    expect_code(p, &["eval", "--house", "bad.json", "--episodes", "empty.jsonl", "--agent", "policy"], 2, "usage");
}

#[test]
fn render_overlays_match_episode() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-house", "--seed", "21", "--out-dir", "houses"]);
    ok(p, &["gen-episodes", "--seed", "2", "--houses-dir", "houses", "--n", "2", "--out", "eps.jsonl"]);
    ok(p, &["eval", "--houses-dir", "houses", "--episodes", "eps.jsonl", "--agent", "greedy", "--out", "greedy.json"]);
    let house_file = walk(&p.join("houses")).pop().unwrap();
    let house = objnav::load_house(&house_file).unwrap();
    let eps: Vec<Episode> = objnav::util::read_jsonl(fs::File::open(p.join("eps.jsonl")).map(std::io::BufReader::new).unwrap()).unwrap();
    let house_arg = house_file.display().to_string();
    let svg = ok(p, &["render", "--house", &house_arg, "--episodes", "eps.jsonl", "--episode-id", &eps[0].id, "--report", "greedy.json", "--format", "svg"]);
    assert!(svg.starts_with("<svg"));
    let demo = parse_polyline(&svg, "demonstration", house.grid().height()).unwrap();
    assert_eq!(demo, eps[0].path.cells);
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(p.join("greedy.json")).unwrap()).unwrap();
    let agent = parse_polyline(&svg, "agent-0", house.grid().height()).unwrap();
    assert_eq!(agent, report.episodes[0].trajectory.cells());
    let again = ok(p, &["render", "--house", &house_arg, "--episodes", "eps.jsonl", "--episode-id", &eps[0].id, "--report", "greedy.json", "--format", "svg"]);
    assert_eq!(svg, again);

    let ascii = ok(p, &["render", "--house", &house_arg, "--episodes", "eps.jsonl", "--episode-id", &eps[0].id]);
    assert_eq!(ascii.lines().filter(|l| l.contains('S')).count(), 1);
    assert_eq!(ascii.lines().count() as u32, house.grid().height());
    expect_code(p, &["render", "--house", &house_arg, "--no-demo", "--no-agent", "--no-target", "--no-start"], 2, "usage");
}
