use std::path::{Path, PathBuf};
use std::process::Command;

use lrfhss_core::channel::to_hex;
use lrfhss_core::DataRate;
use lrfhss_harness::config::ExperimentConfig;
use lrfhss_harness::synth::single_packet_trace;
use lrfhss_harness::trace_io::write_trace;

fn lrfhss(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lrfhss")).args(args).output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_LOOPBACK: &str = "dr_mix = \"dr8\"\ntrials = 2\nduration_s = 3.0\npayload_bytes = [8, 9]\n";

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn loopback_writes_tables_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_LOOPBACK);
    let out = dir.path().join("out");
    let (code, text) = lrfhss(&["loopback", "--config", path(&cfg), "--seed", "5", "--out", path(&out)]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS loopback: 4/4"), "{text}");
    let csv = std::fs::read_to_string(out.join("loopback.csv")).unwrap();
    assert!(csv.starts_with("# loopback v1\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("checks.json").exists());
}

#[test]
fn same_seed_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "dr_mix = \"both\"\nduration_s = 3.0\ntrials = 2\nload_kbps = [0.5, 1.5]\nvariants = [\"as_is\", \"no_sic\"]\n",
    );
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let (code, text) = lrfhss(&["capacity", "--config", path(&cfg), "--seed", seed, "--out", path(&out)]);
        assert_eq!(code, 0, "{text}");
        ["capacity.csv", "collision.csv", "headers.csv"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let a = run("9", "a");
    assert_eq!(a, run("9", "b"));
    assert_ne!(a[0], run("10", "c")[0]);
}

#[test]
fn unmet_expectation_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "dr_mix = \"dr8\"\nduration_s = 3.0\nload_kbps = [0.5]\n[expect]\nmin_capacity_kbps = 1000.0\n",
    );
    let out = dir.path().join("out");
    let (code, text) = lrfhss(&["capacity", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL capacity"), "{text}");
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "trials = 0\n");
    let (code, text) = lrfhss(&["loopback", "--config", path(&cfg)]);
    assert_eq!(code, 2, "{text}");
    let cfg = write_config(dir.path(), "d.toml", "experiment = \"decode\"\n");
    let (code, _) = lrfhss(&["decode", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code, 2);
    let (code, _) = lrfhss(&["loopback", "--config", path(&cfg), "--channel", "mars"]);
    assert_ne!(code, 0);
}

#[test]
fn decode_reads_a_stored_trace() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ExperimentConfig {
        duration_s: 3.0,
        ..ExperimentConfig::default()
    };
    let (trace, truth) = single_packet_trace(&gen, DataRate::Dr9, 0.0, 77).unwrap();
    let iq = dir.path().join("t.iq");
    write_trace(&iq, &trace, Some(&truth)).unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[expect]\nmin_prr = 1.0\n");
    let out = dir.path().join("out");
    let (code, text) = lrfhss(&["decode", "--config", path(&cfg), "--trace", path(&iq), "--out", path(&out)]);
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(out.join("packets.csv")).unwrap();
    assert!(csv.contains(&to_hex(&truth.packets[0].payload())), "{csv}");
}

#[test]
fn channel_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_LOOPBACK);
    let out = dir.path().join("out");
    let (code, text) = lrfhss(&[
        "loopback", "--config", path(&cfg), "--channel", "los", "--no-caed", "--out", path(&out),
    ]);
    assert_eq!(code, 0, "{text}");
}
