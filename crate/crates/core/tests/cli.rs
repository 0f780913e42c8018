//! End-to-end checks of the `nmt` binary: exit codes, output files and
//! manifest reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bitext_nmt::nn::Checkpoint;
use bitext_nmt::text::EOS;

fn nmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmt")).args(args).output().expect("run nmt")
}

fn s(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

const SRC: &str = "Le chat dort.\nIl pleut beaucoup aujourd'hui.\nOui.\nNous allons au marché demain matin.\n";
const TGT: &str = "Muus mi dafa nelaw.\nTaw bi dafa bari tey.\nWaaw.\nDinanu dem marse ba ellëg suba.\n";

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = nmt(&["align", "a", "b", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(nmt(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = nmt(&["evaluate", s(&missing), s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_alignment_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "a.fr", SRC);
    let tgt = write(dir.path(), "a.wo", TGT);
    let out = dir.path().join("out");
    let res = nmt(&["align", s(&src), s(&tgt), "--max-cells", "3", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cells"));
}

#[test]
fn aligning_a_file_with_itself_pairs_every_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "a.fr", SRC);
    let out = dir.path().join("out");
    let res = nmt(&["align", s(&src), s(&src), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read_to_string(out.join("aligned.src")).unwrap(), SRC);
    assert_eq!(fs::read_to_string(out.join("aligned.tgt")).unwrap(), SRC);
    let ladder = fs::read_to_string(out.join("ladder.tsv")).unwrap();
    let beads: Vec<&str> = ladder.lines().collect();
    assert_eq!(beads.len(), 4);
    assert!(beads.iter().all(|l| l.starts_with("1-1\t")), "{ladder}");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn evaluating_references_against_themselves_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let refs = write(dir.path(), "ref.wo", &TGT.replace("Waaw.", "Waaw, noo ko wax."));
    let res = nmt(&["evaluate", s(&refs), s(&refs), "--model", "oracle"]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "oracle");
    assert_eq!(row[1], "-");
    assert!(row[2..6].iter().all(|v| v.parse::<f64>().unwrap() == 100.0), "{stdout}");
}

#[test]
fn split_partitions_the_bitext() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "a.fr", SRC);
    let tgt = write(dir.path(), "a.wo", TGT);
    let out = dir.path().join("split");
    let res = nmt(&["split", s(&src), s(&tgt), "--fraction", "3/4", "--seed", "9", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let read = |name: &str| fs::read_to_string(out.join(name)).unwrap();
    assert_eq!(read("train.src").lines().count(), 3);
    assert_eq!(read("valid.src").lines().count(), 1);
    let mut lines: Vec<String> = read("train.src").lines().chain(read("valid.src").lines()).map(String::from).collect();
    lines.sort();
    let mut original: Vec<String> = SRC.lines().map(String::from).collect();
    original.sort();
    assert_eq!(lines, original);
    let src_lines: Vec<&str> = SRC.lines().collect();
    let tgt_lines: Vec<&str> = TGT.lines().collect();
    for (a, b) in read("train.src").lines().zip(read("train.tgt").lines()) {
        let i = src_lines.iter().position(|l| *l == a).unwrap();
        assert_eq!(tgt_lines[i], b);
    }
}

#[test]
fn bad_fraction_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "a.fr", SRC);
    let tgt = write(dir.path(), "a.wo", TGT);
    let out = dir.path().join("split");
    let res = nmt(&["split", s(&src), s(&tgt), "--fraction", "5/4", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
}

fn tiny_training(dir: &Path) -> PathBuf {
    let src = write(dir, "t.fr", &SRC.repeat(3));
    let tgt = write(dir, "t.wo", &TGT.repeat(3));
    let out = dir.join("model");
    let res = nmt(&[
        "train",
        s(&src),
        s(&tgt),
        "--embed-dim",
        "8",
        "--hidden-dim",
        "8",
        "--max-epochs",
        "2",
        "--patience",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn translation_stops_immediately_when_end_of_sentence_dominates() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_training(dir.path());
    let path = model.join("model.ckpt");
    let mut ckpt = Checkpoint::load(&path).unwrap();
    ckpt.params.output_w.fill(0.0);
    ckpt.params.output_b.fill(0.0);
    ckpt.params.output_b[EOS] = 10.0;
    ckpt.save(&path).unwrap();

    let input = write(dir.path(), "in.fr", SRC);
    let res = nmt(&["translate", s(&path), s(&input)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(String::from_utf8(res.stdout).unwrap(), "\n\n\n\n");
}

#[test]
fn rerun_reproduces_training_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_training(dir.path());
    let again = dir.path().join("again");
    let res = nmt(&["rerun", s(&model.join("manifest.json")), "--out", s(&again)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["model.ckpt", "train_log.tsv", "src.vocab", "tgt.vocab"] {
        assert_eq!(fs::read(model.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn file_outputs_get_a_sidecar_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let refs = write(dir.path(), "ref.wo", TGT);
    let report = dir.path().join("bleu.tsv");
    let res = nmt(&["evaluate", s(&refs), s(&refs), "--out", s(&report)]);
    assert_eq!(res.status.code(), Some(0));
    let manifest = dir.path().join("bleu.tsv.manifest.json");
    let again = dir.path().join("again.tsv");
    assert_eq!(nmt(&["rerun", s(&manifest), "--out", s(&again)]).status.code(), Some(0));
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}
