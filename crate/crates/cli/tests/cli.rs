use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn benchlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_benchlens"))
        .args(args)
        .env_remove("BENCHLENS_OUT")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON in {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn derive_reproduces_stockfish_ipc() {
    let tmp = tempfile::tempdir().unwrap();
    let store = root().join("fixtures/table1/store.csv");
    let out = benchlens(&["derive", "--store", p(&store), "--out", p(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "ipc").unwrap();
    let row = csv.lines().find(|l| l.contains("706.stockfish_r")).unwrap();
    let ipc: f64 = row.split(',').nth(col).unwrap().parse().unwrap();
    assert_eq!(format!("{ipc:.3}"), "3.625");
}

#[test]
fn subset_picks_one_medoid_per_planted_group() {
    let tmp = tempfile::tempdir().unwrap();
    let config = root().join("fixtures/demo/benchlens.toml");
    let out = benchlens(&["subset", "--config", p(&config), "--suite", "int_rate", "--out", p(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = std::fs::read_to_string(tmp.path().join("subset.md")).unwrap();
    assert!(md.contains("701.g0w1_r, 706.g1w6_r, 708.g2w8_r, 711.g3w11_r"), "{md}");
    assert!(tmp.path().join("subset.csv").exists());
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = benchlens(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let store = root().join("fixtures/demo/store.csv");
    let scores = root().join("fixtures/demo/scores.csv");
    // no cut and no subset size
    let out = benchlens(&["subset", "--store", p(&store), "--scores", p(&scores), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["stage"], "subset");

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "stroe = \"x.csv\"\n").unwrap();
    let out = benchlens(&["derive", "--config", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = benchlens(&["derive", "--store", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["stage"], "derive");
    assert!(err["error"].is_string() && err["message"].is_string());
}

#[test]
fn budget_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = root().join("fixtures/demo/benchlens.toml");
    let out = benchlens(&["subset", "--config", p(&config), "--suite", "int_rate", "--budget", "3", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "BudgetExceeded");
}

#[test]
fn ingest_raw_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = root().join("fixtures/raw");
    let maps = raw.join("counter_maps.toml");
    let out = benchlens(&["ingest", "--raw", p(&raw), "--counter-maps", p(&maps), "--out", p(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let store = std::fs::read_to_string(tmp.path().join("store.csv")).unwrap();
    for w in ["700.alpha_r", "701.beta_r", "702.gamma_r"] {
        assert!(store.contains(&format!("int_rate,{w},CPU-A,instructions,")), "{w}");
    }
    let md = std::fs::read_to_string(tmp.path().join("ingest.md")).unwrap();
    assert!(md.contains("| CPU-A | dram_bytes | uncore_imc/cas_count_read/ | lines x 64 B |"), "{md}");
    // the ingested store feeds the next stage
    let out = benchlens(&["derive", "--store", p(&tmp.path().join("store.csv")), "--out", p(tmp.path())]);
    assert!(out.status.success());
}

#[test]
fn format_flag_filters_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let store = root().join("fixtures/table1/store.csv");
    let out = benchlens(&["derive", "--store", p(&store), "--format", "md", "--out", p(tmp.path())]);
    assert!(out.status.success());
    assert!(!tmp.path().join("metrics.csv").exists());
    assert!(tmp.path().join("summary.md").exists());
}

#[test]
fn out_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let store = root().join("fixtures/table1/store.csv");
    let env_out = tmp.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_benchlens"))
        .args(["derive", "--store", p(&store)])
        .env("BENCHLENS_OUT", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_out.join("metrics.csv").exists());

    // the flag wins over the environment
    let flag_out = tmp.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_benchlens"))
        .args(["derive", "--store", p(&store), "--out", p(&flag_out)])
        .env("BENCHLENS_OUT", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(flag_out.join("metrics.csv").exists());
}

#[test]
fn proxy_blend_and_search() {
    let tmp = tempfile::tempdir().unwrap();
    let config = root().join("fixtures/demo/benchlens.toml");
    let out = benchlens(&["proxy", "--config", p(&config), "--out", p(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let blend = std::fs::read_to_string(tmp.path().join("proxy/blend.md")).unwrap();
    assert!(blend.contains("13.70%"), "{blend}");
    let search = std::fs::read_to_string(tmp.path().join("proxy/search.md")).unwrap();
    assert!(search.contains("| 1 | 709.cactus_r + 749.fotonik3d_r |"), "{search}");
}

#[test]
fn compare_writes_all_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let config = root().join("fixtures/demo/benchlens.toml");
    let out = benchlens(&["compare", "--config", p(&config), "--out", p(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for ext in ["csv", "md", "svg"] {
        assert!(tmp.path().join(format!("compare/int_rate_vs_int_rate_old.{ext}")).exists(), "{ext}");
    }
}
