#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stackparse::synth::{generate, Grammar};
use stackparse::treebank::{write_conllu, Sentence};

pub fn stackparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackparse")).args(args).output().expect("binary runs")
}

/// Runs the binary and panics with its stderr on failure.
pub fn ok(args: &[&str]) -> String {
    let out = stackparse(args);
    assert!(
        out.status.success(),
        "stackparse {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn fail(args: &[&str]) -> String {
    let out = stackparse(args);
    assert!(!out.status.success(), "stackparse {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

pub fn write_treebank(path: &Path, sentences: &[Sentence]) {
    std::fs::write(path, write_conllu(sentences).unwrap()).unwrap();
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Desk-scale settings shared by the pipeline runs.
pub const DESK: &str = "preset = desk\nepochs = 8\n";

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn text(&self, name: &str, text: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    pub fn treebank(&self, name: &str, sentences: &[Sentence]) -> PathBuf {
        let path = self.path(name);
        write_treebank(&path, sentences);
        path
    }

    /// Source and target splits written as CoNLL-U, plus a raw corpus.
    pub fn synthetic(&self, n_source: usize, n_target: usize, seed: u64) {
        let source = generate(&Grammar::source(), n_source, seed);
        let target = generate(&Grammar::target(), n_target + 20, seed + 1);
        let dev = n_source / 5;
        self.treebank("source-train.conllu", &source[dev..]);
        self.treebank("source-dev.conllu", &source[..dev]);
        self.treebank("target-train.conllu", &target[20..]);
        self.treebank("target-dev.conllu", &target[..10]);
        self.treebank("target-test.conllu", &target[10..20]);
        let mut raw = String::new();
        for s in generate(&Grammar::target(), 40, seed + 2).iter().chain(&source) {
            raw.push_str(&s.forms().join(" "));
            raw.push('\n');
        }
        self.text("raw.txt", &raw);
        let mut reference = String::new();
        for s in &source {
            reference.push_str(&s.forms().join(" "));
            reference.push('\n');
        }
        self.text("reference.txt", &reference);
        self.text("lexicon.txt", "lah\nleh\nlor\nmeh\n");
    }
}
