//! Exit codes, error reporting, and CLI/library parity.

use std::path::Path;
use std::process::{Command, Output};

fn nlx(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlx"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn gen_small(dir: &Path, seed: u64) {
    let out = nlx(
        &[
            "gen",
            "--pages",
            "4",
            "--words-per-page",
            "30",
            "--seed",
            &seed.to_string(),
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn empty_tokens_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.tsv"), "").unwrap();
    let out = nlx(
        &["index", "--tokens", "empty.tsv", "--out", "x.nlx"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no candidates"));
}

#[test]
fn malformed_lines_exit_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let bad = "page_id\tword_id\ttext\tx0\ty0\tx1\ty1\tconfidence\n\
               p001\t0\tgut\t10\t10\t50\t30\t90\n\
               p001\t1\tkaputt\t90\t10\t20\t30\t90\n";
    std::fs::write(dir.path().join("bad.tsv"), bad).unwrap();
    let out = nlx(
        &["index", "--tokens", "bad.tsv", "--out", "x.nlx"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("report written to"));
    let report = std::fs::read_to_string(dir.path().join("x.errors.txt")).unwrap();
    assert!(report.contains("line 3"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), 3);
    let out = nlx(
        &[
            "index",
            "--tokens",
            "tokens.tsv",
            "--out",
            "no_such_dir/x.nlx",
            "--levels",
            "1,2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn index_then_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), 5);
    let out = nlx(
        &[
            "index",
            "--tokens",
            "tokens.tsv",
            "--out",
            "idx.nlx",
            "--levels",
            "1,2",
            "--k",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let loaded = nlx_core::corpus::IndexFile::load(&dir.path().join("idx.nlx")).unwrap();
    assert!(loaded.index.len() > 50);

    // Query a token we know is in the vocabulary: rank 1, cosine 1.
    let token = loaded.index.vocab()[3].clone();
    let out = nlx(
        &[
            "query", "--index", "idx.nlx", "--query", &token, "--metric", "cosine", "--top", "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let line = stdout(&out);
    let record: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(record["token"], serde_json::json!(token));
    assert!((record["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    // Un-encodable query: exit 2.
    let out = nlx(
        &["query", "--index", "idx.nlx", "--query", "###", "--metric", "cosine"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);

    // top larger than the vocabulary returns the whole vocabulary.
    let out = nlx(
        &[
            "query", "--index", "idx.nlx", "--query", &token, "--metric", "csls", "--top",
            "100000",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let rankable = (0..loaded.index.len())
        .filter(|&j| loaded.index.is_ranked(j))
        .count();
    assert_eq!(stdout(&out).lines().count(), rankable);
}

#[test]
fn query_matches_library_results() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), 11);
    let out = nlx(
        &[
            "index",
            "--tokens",
            "tokens.tsv",
            "--out",
            "idx.nlx",
            "--levels",
            "1,2,4",
            "--k",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let file = nlx_core::corpus::IndexFile::load(&dir.path().join("idx.nlx")).unwrap();

    for metric in ["cosine", "csls"] {
        for query in ["Kirche", "Regierung", "gut", "Zeitung"] {
            let out = nlx(
                &[
                    "query", "--index", "idx.nlx", "--query", query, "--metric", metric,
                    "--top", "7",
                ],
                dir.path(),
            );
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            let hits = nlx_core::ranking::search(
                query,
                &file.index,
                Some(&file.model),
                &file.config,
                metric.parse().unwrap(),
                7,
            )
            .unwrap();
            let expected: Vec<String> =
                hits.iter().map(|h| h.to_record(metric)).collect();
            let got: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
            assert_eq!(got, expected, "{metric} {query}");
        }
    }
}

#[test]
fn train_reports_identity_and_rejects_dangling() {
    let dir = tempfile::tempdir().unwrap();
    // Clean channel: OCR text equals gold text, so the two views are
    // identical and every canonical correlation is 1.
    let out = nlx(
        &[
            "gen",
            "--pages",
            "2",
            "--words-per-page",
            "30",
            "--seed",
            "13",
            "--noise-profile",
            "clean",
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = nlx(
        &[
            "train",
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
            "--out",
            "model.nlxm",
            "--levels",
            "1,2",
            "--lambda",
            "1e-6",
            "--p",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let correlations = text
        .lines()
        .find(|l| l.starts_with("canonical correlations"))
        .expect("summary printed");
    let first: f64 = correlations
        .split('[')
        .nth(1)
        .unwrap()
        .split([',', ']'])
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(first > 0.999, "identity data: {correlations}");

    // Model files are byte-stable across repeat runs.
    let first = std::fs::read(dir.path().join("model.nlxm")).unwrap();
    let out = nlx(
        &[
            "train",
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
            "--out",
            "model2.nlxm",
            "--levels",
            "1,2",
            "--lambda",
            "1e-6",
            "--p",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let second = std::fs::read(dir.path().join("model2.nlxm")).unwrap();
    assert_eq!(first, second);

    // Dangling alignment reference: exit 2 listing the offender.
    let mut align = std::fs::read_to_string(dir.path().join("align.tsv")).unwrap();
    align.push_str("p999\t7\tgeist\tgeist\n");
    std::fs::write(dir.path().join("align.tsv"), align).unwrap();
    let out = nlx(
        &[
            "train",
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
            "--out",
            "model3.nlxm",
            "--levels",
            "1,2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("p999"));
}

#[test]
fn threads_env_var_mirrors_flag() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), 23);
    let out = nlx(
        &[
            "index", "--tokens", "tokens.tsv", "--out", "a.nlx", "--levels", "1,2", "--k", "5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_nlx"))
        .env("NLX_THREADS", "3")
        .args(["index", "--tokens", "tokens.tsv", "--out", "b.nlx", "--levels", "1,2", "--k", "5"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        std::fs::read(dir.path().join("a.nlx")).unwrap(),
        std::fs::read(dir.path().join("b.nlx")).unwrap()
    );
}

#[test]
fn eval_rejects_empty_methods_and_bad_metric() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), 17);
    let out = nlx(
        &[
            "eval",
            "--tokens",
            "tokens.tsv",
            "--alignments",
            "align.tsv",
            "--methods",
            "sonar",
            "--folds",
            "2",
            "--levels",
            "1,2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown method"));

    let out = nlx(
        &["query", "--index", "missing.nlx", "--query", "x"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}
