mod common;

use common::{fail, ok, p, Fixture, DESK};
use stackparse::synth::{generate, Grammar};
use stackparse::treebank::parse_conllu;

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let fx = Fixture::new();
    let gold = fx.treebank("gold.conllu", &generate(&Grammar::target(), 5, 1));
    let out = ok(&["eval", "--gold", p(&gold), "--pred", p(&gold), "--out", p(&fx.path("r.tsv"))]);
    assert!(out.contains("UAS 100.00  LAS 100.00  POS 100.00"), "{out}");
    let tsv = std::fs::read_to_string(fx.path("r.tsv")).unwrap();
    assert!(tsv.lines().nth(1).unwrap().ends_with("\t100.00\t100.00\t100.00"), "{tsv}");
    let iaa = ok(&["iaa", "--a", p(&gold), "--b", p(&gold)]);
    assert_eq!(iaa.trim(), "POS 100.00  UAS 100.00  LAS 100.00");
}

#[test]
fn eval_reports_misaligned_sentence() {
    let fx = Fixture::new();
    let data = generate(&Grammar::source(), 3, 2);
    let gold = fx.treebank("gold.conllu", &data);
    let pred = fx.treebank("pred.conllu", &data[..2]);
    let err = fail(&["eval", "--gold", p(&gold), "--pred", p(&pred)]);
    assert!(err.contains("sentence"), "{err}");
}

#[test]
fn validate_flags_broken_trees() {
    let fx = Fixture::new();
    let good = fx.treebank("good.conllu", &generate(&Grammar::source(), 4, 3));
    assert!(ok(&["validate", "--input", p(&good)]).contains("4 sentences ok"));
    let cyclic = fx.text(
        "bad.conllu",
        "1\ta\t_\tDET\t_\t_\t2\tdet\t_\t_\n2\tb\t_\tNOUN\t_\t_\t1\tnsubj\t_\t_\n3\tc\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n",
    );
    let err = fail(&["validate", "--input", p(&cyclic)]);
    assert!(err.contains("1 errors"), "{err}");
    let odd = fx.text("odd.conllu", "1\ta\t_\tWORD\t_\t_\t0\troot\t_\t_\n\n");
    fail(&["validate", "--input", p(&odd)]);
    assert!(ok(&["validate", "--input", p(&odd), "--inventory", p(&odd)]).contains("ok"));
}

#[test]
fn bad_inputs_are_named_in_diagnostics() {
    let fx = Fixture::new();
    fx.synthetic(20, 10, 4);
    let train = fx.path("source-train.conllu");
    let cfg = fx.text("bad.cfg", "preset = desk\nhiden = 3\n");
    let err = fail(&["train-tagger", "--train", p(&train), "--config", p(&cfg), "--out", p(&fx.path("m"))]);
    assert!(err.contains("unknown config key `hiden`"), "{err}");

    let cfg = fx.text("range.cfg", "dropout = 2\n");
    let err = fail(&["train-parser", "--train", p(&train), "--config", p(&cfg), "--out", p(&fx.path("m"))]);
    assert!(err.contains("dropout"), "{err}");

    let err = fail(&["train-tagger", "--train", p(&fx.path("nope.conllu")), "--out", p(&fx.path("m"))]);
    assert!(err.contains("nope.conllu"), "{err}");

    let err = fail(&["tag", "--model", p(&fx.path("absent")), "--input", p(&train), "--out", p(&fx.path("x"))]);
    assert!(err.contains("not a model directory"), "{err}");
}

#[test]
fn parse_reproduces_training_dev_report() {
    let fx = Fixture::new();
    fx.synthetic(40, 10, 5);
    let cfg = fx.text("desk.cfg", DESK);
    let model = fx.path("parser");
    let dev = fx.path("source-dev.conllu");
    let out = ok(&[
        "train-parser",
        "--train",
        p(&fx.path("source-train.conllu")),
        "--dev",
        p(&dev),
        "--config",
        p(&cfg),
        "--seed",
        "3",
        "--out",
        p(&model),
    ]);
    let reported: &str = out.split("score ").nth(1).unwrap().split(' ').next().unwrap();
    for f in ["model.kind", "run.txt", "config.txt", "best_epoch.txt", "params.bin"] {
        assert!(model.join(f).exists(), "missing {f}");
    }
    let run = std::fs::read_to_string(model.join("run.txt")).unwrap();
    assert!(run.contains("seed = 3") && run.contains("hidden = 32"), "{run}");

    let parsed = fx.path("parsed.conllu");
    ok(&["parse", "--model", p(&model), "--input", p(&dev), "--out", p(&parsed)]);
    let eval = ok(&["eval", "--gold", p(&dev), "--pred", p(&parsed), "--include-punct", "true"]);
    assert!(eval.contains(&format!("UAS {reported}")), "train said {reported}, eval said {eval}");

    // Reloading gives the same parse.
    let again = fx.path("again.conllu");
    ok(&["parse", "--model", p(&model), "--input", p(&dev), "--out", p(&again)]);
    assert_eq!(std::fs::read(&parsed).unwrap(), std::fs::read(&again).unwrap());
    let mst = fx.path("mst.conllu");
    ok(&["parse", "--model", p(&model), "--input", p(&dev), "--out", p(&mst), "--decoder", "mst"]);
    let trees = parse_conllu(&std::fs::read_to_string(&mst).unwrap()).unwrap();
    assert!(trees.iter().all(|s| s.heads().iter().filter(|&&h| h == 0).count() == 1));

    let err = fail(&["tag", "--model", p(&model), "--input", p(&dev), "--out", p(&fx.path("t"))]);
    assert!(err.contains("not a tagger"), "{err}");
}

#[test]
fn jackknife_and_crossfold() {
    let fx = Fixture::new();
    fx.synthetic(15, 6, 6);
    let cfg = fx.text("desk.cfg", "preset = desk\nepochs = 2\n");
    let train = fx.path("source-train.conllu");
    let out = fx.path("jk.conllu");
    let msg = ok(&["jackknife", "--train", p(&train), "--k", "3", "--config", p(&cfg), "--out", p(&out)]);
    assert!(msg.contains("3-fold jackknife"), "{msg}");
    let gold = parse_conllu(&std::fs::read_to_string(&train).unwrap()).unwrap();
    let jk = parse_conllu(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(gold.len(), jk.len());
    for (g, j) in gold.iter().zip(&jk) {
        assert_eq!(g.forms(), j.forms());
        assert_eq!(g.heads(), j.heads());
    }

    let report = fx.path("cv.tsv");
    let msg = ok(&["crossfold", "--treebank", p(&train), "--k", "3", "--config", p(&cfg), "--out", p(&report)]);
    assert!(msg.contains("mean"), "{msg}");
    let tsv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(tsv.lines().count(), 5, "{tsv}");
    fail(&["crossfold", "--treebank", p(&train), "--k", "1", "--config", p(&cfg)]);
}

#[test]
fn language_model_ranking_and_lexicon() {
    let fx = Fixture::new();
    fx.synthetic(30, 5, 7);
    let lm = fx.path("ref.lm");
    let msg = ok(&["lm-train", "--corpus", p(&fx.path("reference.txt")), "--order", "3", "--out", p(&lm)]);
    assert!(msg.contains("3-gram"), "{msg}");
    let ranked = fx.path("ranked.tsv");
    ok(&[
        "lm-rank",
        "--model",
        p(&lm),
        "--input",
        p(&fx.path("raw.txt")),
        "--lexicon",
        p(&fx.path("lexicon.txt")),
        "--out",
        p(&ranked),
    ]);
    let rows: Vec<Vec<String>> = std::fs::read_to_string(&ranked)
        .unwrap()
        .lines()
        .map(|l| l.split('\t').map(String::from).collect())
        .collect();
    assert!(!rows.is_empty());
    let scores: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows.iter().all(|r| (5..=50).contains(&r[3].parse::<usize>().unwrap())));
    // Target-grammar sentences diverge from the reference and rise to the top.
    let reference = std::fs::read_to_string(fx.path("reference.txt")).unwrap();
    let seen: std::collections::HashSet<&str> = reference.lines().collect();
    let novel = rows[..20].iter().filter(|r| !seen.contains(r[5].as_str())).count();
    assert!(novel >= 15, "{novel} of the top 20 are target sentences");
    assert!(rows.iter().any(|r| r[4] != "_"));

    let cfg = fx.text("lm.cfg", "min_length = 1\nmax_length = 4\nraw_length = true\n");
    ok(&["lm-rank", "--model", p(&lm), "--input", p(&fx.path("raw.txt")), "--config", p(&cfg), "--out", p(&ranked)]);
    for row in std::fs::read_to_string(&ranked).unwrap().lines() {
        let f: Vec<&str> = row.split('\t').collect();
        let (norm, total, len): (f64, f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!(len <= 4.0 && (norm - total / len).abs() < 1e-5, "{row}");
    }
    let cfg = fx.text("bad.cfg", "hidden = 4\n");
    fail(&["lm-rank", "--model", p(&lm), "--input", p(&fx.path("raw.txt")), "--config", p(&cfg), "--out", p(&ranked)]);

    let hits = fx.path("hits.tsv");
    let msg = ok(&["lexicon-match", "--input", p(&fx.path("raw.txt")), "--lexicon", p(&fx.path("lexicon.txt")), "--out", p(&hits)]);
    assert!(msg.contains("sentences contain lexicon terms"), "{msg}");
    let text = std::fs::read_to_string(&hits).unwrap();
    assert!(text.lines().any(|l| l.starts_with("lah\t") || l.starts_with("leh\t")), "{text}");
    fail(&["lm-rank", "--model", p(&fx.path("raw.txt")), "--input", p(&fx.path("raw.txt")), "--out", p(&ranked)]);
}
