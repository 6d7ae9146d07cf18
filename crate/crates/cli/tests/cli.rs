use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use sha2::{Digest, Sha256};

fn tokstore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokstore"))
        .args(args)
        .env_remove("TOKSTORE_SERVER")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = tokstore(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(kv: &HashMap<String, String>, key: &str) -> f64 {
    kv[key].parse().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn gen(dir: &Path, dist: &str, n: &str, seed: &str) {
    ok(&[
        "gen-synthetic", "--dist", dist, "--n-images", n, "--seed", seed,
        "--tokens-out", &path(dir, "tokens.bin"),
        "--codebook-out", &path(dir, "codebook.bin"),
        "--labels-out", &path(dir, "labels.bin"),
    ]);
}

fn pack(dir: &Path, out: &str) -> HashMap<String, String> {
    ok(&[
        "pack",
        "--tokens", &path(dir, "tokens.bin"),
        "--codebook", &path(dir, "codebook.bin"),
        "--labels", &path(dir, "labels.bin"),
        "--out", &path(dir, out),
    ])
}

fn sha(p: &str) -> Vec<u8> {
    Sha256::digest(std::fs::read(p).unwrap()).to_vec()
}

#[test]
fn uniform_pack_lands_between_entropy_and_escape() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "uniform", "500", "1");
    let kv = pack(dir.path(), "u.stok");
    assert_eq!(num(&kv, "n_records"), 500.0);
    let huffman = num(&kv, "bytes_per_record_huffman");
    assert!((1102.0..=1380.0).contains(&huffman), "{huffman}");
    assert_eq!(num(&kv, "bytes_per_record_uint16"), 2048.0);
    assert_eq!(num(&kv, "index_bytes"), 8.0 * 501.0);
    for key in ["total_bytes", "bytes_per_record_escape", "bytes_per_record_optimal", "entropy_bits"] {
        assert!(kv.contains_key(key), "missing {key}");
    }
}

#[test]
fn unpack_inverts_pack_and_repack_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "zipf", "200", "2");
    pack(dir.path(), "a.stok");
    ok(&[
        "unpack",
        "--archive", &path(dir.path(), "a.stok"),
        "--tokens-out", &path(dir.path(), "t2.bin"),
        "--labels-out", &path(dir.path(), "l2.bin"),
        "--codebook-out", &path(dir.path(), "c2.bin"),
    ]);
    assert_eq!(sha(&path(dir.path(), "t2.bin")), sha(&path(dir.path(), "tokens.bin")));
    assert_eq!(sha(&path(dir.path(), "l2.bin")), sha(&path(dir.path(), "labels.bin")));
    assert_eq!(sha(&path(dir.path(), "c2.bin")), sha(&path(dir.path(), "codebook.bin")));
    ok(&[
        "pack",
        "--tokens", &path(dir.path(), "t2.bin"),
        "--codebook", &path(dir.path(), "c2.bin"),
        "--labels", &path(dir.path(), "l2.bin"),
        "--out", &path(dir.path(), "b.stok"),
    ]);
    assert_eq!(sha(&path(dir.path(), "a.stok")), sha(&path(dir.path(), "b.stok")));
}

#[test]
fn empty_corpus_packs_to_valid_archive() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "uniform", "0", "0");
    let kv = pack(dir.path(), "empty.stok");
    assert_eq!(num(&kv, "n_records"), 0.0);
    let kv = ok(&["stats", "--archive", &path(dir.path(), "empty.stok")]);
    assert_eq!(num(&kv, "index_bytes"), 8.0);
}

#[test]
fn zipf_generation_is_reproducible_and_orders_sizes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen(a.path(), "zipf", "300", "9");
    gen(b.path(), "zipf", "300", "9");
    assert_eq!(sha(&path(a.path(), "tokens.bin")), sha(&path(b.path(), "tokens.bin")));
    pack(a.path(), "z.stok");
    let kv = ok(&["stats", "--archive", &path(a.path(), "z.stok")]);
    let huffman = num(&kv, "bytes_per_record_huffman");
    let escape = num(&kv, "bytes_per_record_escape");
    let uint16 = num(&kv, "bytes_per_record_uint16");
    assert!(huffman < escape && escape < uint16, "{huffman} {escape} {uint16}");
}

#[test]
fn dump_batch_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "zipf", "64", "3");
    pack(dir.path(), "d.stok");
    let run = |out: &str, workers: &str| {
        ok(&[
            "dump-batch",
            "--archive", &path(dir.path(), "d.stok"),
            "--out-dir", &path(dir.path(), out),
            "--seed", "7", "--batch-size", "16", "--count", "4",
            "--workers", workers,
        ])
    };
    let one = run("w1", "1");
    run("w8", "8");
    assert_eq!(num(&one, "batches"), 4.0);
    for b in 0..4 {
        for kind in ["tensor", "labels"] {
            let name = format!("batch_e0_b{b}.{kind}.bin");
            assert_eq!(
                sha(&path(&dir.path().join("w1"), &name)),
                sha(&path(&dir.path().join("w8"), &name)),
                "{name}"
            );
        }
    }
}

#[test]
fn bench_reports_latency() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "uniform", "300", "4");
    pack(dir.path(), "b.stok");
    let kv = ok(&["bench", "--archive", &path(dir.path(), "b.stok"), "--sequential", "300", "--random-reads", "50"]);
    assert_eq!(num(&kv, "sequential_records"), 300.0);
    assert!(num(&kv, "seconds_per_100_records") > 0.0);
    assert_eq!(num(&kv, "random_reads"), 50.0);
}

#[test]
fn failures_map_to_category_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.stok");
    std::fs::write(&bad, b"definitely not an archive").unwrap();
    assert_eq!(tokstore(&["stats", "--archive", &bad]).status.code(), Some(5));

    std::fs::write(path(dir.path(), "tokens.bin"), [1u8, 2, 3]).unwrap();
    std::fs::write(path(dir.path(), "codebook.bin"), [0u8; 8]).unwrap();
    let out = tokstore(&[
        "pack",
        "--tokens", &path(dir.path(), "tokens.bin"),
        "--codebook", &path(dir.path(), "codebook.bin"),
        "--out", &path(dir.path(), "x.stok"),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format"));

    let out = tokstore(&["stats", "--archive", &bad, "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let out = tokstore(&["dump-batch", "--archive", &bad, "--out-dir", &bad, "--batch-size", "0"]);
    assert_eq!(out.status.code(), Some(4));

    let out = tokstore(&["--server", "http://127.0.0.1:1", "stats", "--archive", &bad]);
    assert_eq!(out.status.code(), Some(12));
}

#[test]
fn commands_work_against_a_running_service() {
    let dir = tempfile::tempdir().unwrap();
    let mut server = Command::new(env!("CARGO_BIN_EXE_tokstore"))
        .args(["serve", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening=").unwrap().to_string();

    let remote = |args: &[&str]| {
        let mut full = vec!["--server", url.as_str()];
        full.extend_from_slice(args);
        ok(&full)
    };
    remote(&[
        "gen-synthetic", "--n-images", "20", "--classes", "0",
        "--tokens-out", &path(dir.path(), "tokens.bin"),
        "--codebook-out", &path(dir.path(), "codebook.bin"),
    ]);
    let kv = remote(&[
        "pack",
        "--tokens", &path(dir.path(), "tokens.bin"),
        "--codebook", &path(dir.path(), "codebook.bin"),
        "--out", &path(dir.path(), "r.stok"),
    ]);
    server.kill().unwrap();
    server.wait().unwrap();
    assert_eq!(num(&kv, "n_records"), 20.0);
}
