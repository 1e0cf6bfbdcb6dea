use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stackparse::config::Configurable;
use stackparse::eval::{self, round2};
use stackparse::langmodel::{self, NgramLM, Normalization};
use stackparse::parser::{train_parser, Decoder, ParserConfig, ParserModel};
use stackparse::persist::{read_text, write_atomic};
use stackparse::stacking::{
    train_stacked_parser, train_stacked_tagger, StackedParser, StackedParserConfig, StackedTagger,
    StackedTaggerConfig,
};
use stackparse::tagger::{train_tagger, TaggerConfig, TaggerModel};
use stackparse::train::TrainReport;
use stackparse::treebank::{self, LabelInventory, Sentence};
use stackparse::vocab::Embeddings;

mod run_config;

use run_config::RunConfig;

const KIND: &str = "model.kind";
const RUN: &str = "run.txt";

#[derive(Parser)]
#[command(name = "stackparse", version, about = "Tagging, parsing and neural stacking for low-resource treebanks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` config key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Training {
    #[command(flatten)]
    common: Common,
    /// Training treebank (CoNLL-U).
    #[arg(long)]
    train: PathBuf,
    /// Development treebank used to pick the best epoch.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Pretrained word vectors, one `word v1 v2 ...` line each.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Model directory to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a base POS tagger.
    TrainTagger(Training),
    /// Train a base dependency parser.
    TrainParser {
        #[command(flatten)]
        t: Training,
        /// greedy or mst.
        #[arg(long)]
        decoder: Option<Decoder>,
    },
    /// Train a tagger stacked on a base tagger.
    TrainStackedTagger {
        #[command(flatten)]
        t: Training,
        /// Directory of the trained base model.
        #[arg(long)]
        base_model: PathBuf,
    },
    /// Train a parser stacked on a base parser.
    TrainStackedParser {
        #[command(flatten)]
        t: Training,
        /// Directory of the trained base model.
        #[arg(long)]
        base_model: PathBuf,
        /// greedy or mst.
        #[arg(long)]
        decoder: Option<Decoder>,
    },
    /// Replace the POS tags of a treebank with predicted ones.
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict heads and labels, keeping the input tags.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// greedy or mst.
        #[arg(long)]
        decoder: Option<Decoder>,
    },
    /// Score predictions against gold annotation.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        include_punct: Option<bool>,
        /// Break scores down by sentence category.
        #[arg(long)]
        categories: bool,
        /// Count each sentence under its first category only.
        #[arg(long)]
        primary_only: bool,
        /// Tab-separated report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement between two annotations of the same sentences.
    Iaa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Tag a treebank with k-fold jackknifing.
    Jackknife {
        #[command(flatten)]
        t: Training,
        #[arg(long)]
        k: Option<usize>,
    },
    /// k-fold cross-validation of a parser, stacked when a base model is given.
    Crossfold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long)]
        base_model: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        include_punct: Option<bool>,
        /// greedy or mst.
        #[arg(long)]
        decoder: Option<Decoder>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an n-gram language model on a tokenized corpus.
    LmTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank sentences by length-normalized log-likelihood, lowest first.
    LmRank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the lexicon terms found in each sentence.
    LexiconMatch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a treebank for structural and inventory errors.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Take the label inventory from this treebank instead of UD.
        #[arg(long)]
        inventory: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_treebank(path: &Path) -> Result<Vec<Sentence>> {
    let text = read_text(path).with_context(|| format!("reading {}", path.display()))?;
    treebank::parse_conllu(&text).with_context(|| format!("treebank {}", path.display()))
}

fn write_treebank(path: &Path, sentences: &[Sentence]) -> Result<()> {
    write_atomic(path, treebank::write_conllu(sentences)?.as_bytes())?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<String> {
    read_text(path).with_context(|| format!("reading {}", path.display()))
}

fn embeddings(path: Option<&Path>) -> Result<Option<Embeddings>> {
    path.map(|p| Embeddings::parse(&read_lines(p)?).with_context(|| format!("embeddings {}", p.display())))
        .transpose()
}

fn dev_set(path: Option<&Path>) -> Result<Vec<Sentence>> {
    path.map_or(Ok(vec![]), read_treebank)
}

fn config_for(common: &Common, decoder: Option<Decoder>, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut overrides = vec![
        ("seed", common.seed.map(|s| s.to_string())),
        ("decoder", decoder.map(|d| d.to_string())),
    ];
    overrides.extend(extra.iter().cloned());
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn tagger_config(rc: &RunConfig) -> Result<TaggerConfig> {
    rc.model(if rc.desk()? { TaggerConfig::desk() } else { TaggerConfig::default() })
}

fn parser_config(rc: &RunConfig) -> Result<ParserConfig> {
    rc.model(if rc.desk()? { ParserConfig::desk() } else { ParserConfig::default() })
}

fn model_kind(dir: &Path) -> Result<String> {
    let path = dir.join(KIND);
    Ok(std::fs::read_to_string(&path)
        .with_context(|| format!("{} is not a model directory", dir.display()))?
        .trim()
        .to_string())
}

/// Marks the directory with its model kind and snapshots the run.
fn finish_model(dir: &Path, kind: &str, rc: &RunConfig, model_config: &str, report: &TrainReport) -> Result<()> {
    write_atomic(&dir.join(KIND), format!("{kind}\n").as_bytes())?;
    let mut run = rc.to_text();
    run.push_str("# effective model settings\n");
    run.push_str(model_config);
    write_atomic(&dir.join(RUN), run.as_bytes())?;
    println!(
        "{kind}: best epoch {} score {:.2} -> {}",
        report.best_epoch,
        round2(report.best_score),
        dir.display()
    );
    Ok(())
}

enum AnyTagger {
    Base(TaggerModel),
    Stacked(Box<StackedTagger>),
}

impl AnyTagger {
    fn load(dir: &Path) -> Result<Self> {
        Ok(match model_kind(dir)?.as_str() {
            "tagger" => AnyTagger::Base(TaggerModel::load(dir)?),
            "stacked-tagger" => AnyTagger::Stacked(Box::new(StackedTagger::load(dir)?)),
            k => bail!("{} holds a {k} model, not a tagger", dir.display()),
        })
    }

    fn tag_all(&self, sentences: &[Sentence]) -> Vec<Sentence> {
        match self {
            AnyTagger::Base(m) => m.tag_all(sentences),
            AnyTagger::Stacked(m) => m.tag_all(sentences),
        }
    }
}

enum AnyParser {
    Base(ParserModel),
    Stacked(Box<StackedParser>),
}

impl AnyParser {
    fn load(dir: &Path) -> Result<Self> {
        Ok(match model_kind(dir)?.as_str() {
            "parser" => AnyParser::Base(ParserModel::load(dir)?),
            "stacked-parser" => AnyParser::Stacked(Box::new(StackedParser::load(dir)?)),
            k => bail!("{} holds a {k} model, not a parser", dir.display()),
        })
    }

    fn decoder(&self) -> Decoder {
        match self {
            AnyParser::Base(m) => m.config.decoder,
            AnyParser::Stacked(m) => m.config.target.decoder,
        }
    }

    fn parse_all(&self, sentences: &[Sentence], decoder: Decoder) -> Vec<Sentence> {
        match self {
            AnyParser::Base(m) => m.parse_all(sentences, decoder),
            AnyParser::Stacked(m) => m.parse_all(sentences, decoder),
        }
    }
}

fn base_tagger(dir: &Path) -> Result<TaggerModel> {
    match model_kind(dir)?.as_str() {
        "tagger" => Ok(TaggerModel::load(dir)?),
        k => bail!("base model {} is a {k}, expected a tagger", dir.display()),
    }
}

fn base_parser(dir: &Path) -> Result<ParserModel> {
    match model_kind(dir)?.as_str() {
        "parser" => Ok(ParserModel::load(dir)?),
        k => bail!("base model {} is a {k}, expected a parser", dir.display()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainTagger(t) => {
            let rc = config_for(&t.common, None, &[])?;
            let config = tagger_config(&rc)?;
            let emb = embeddings(t.embeddings.as_deref())?;
            let (model, report) = train_tagger(&read_treebank(&t.train)?, &dev_set(t.dev.as_deref())?, &config, emb.as_ref())?;
            model.save(&t.out, Some(&report))?;
            finish_model(&t.out, "tagger", &rc, &config.to_text(), &report)
        }
        Command::TrainParser { t, decoder } => {
            let rc = config_for(&t.common, decoder, &[])?;
            let config = parser_config(&rc)?;
            let emb = embeddings(t.embeddings.as_deref())?;
            let (model, report) = train_parser(&read_treebank(&t.train)?, &dev_set(t.dev.as_deref())?, &config, emb.as_ref())?;
            model.save(&t.out, Some(&report))?;
            finish_model(&t.out, "parser", &rc, &config.to_text(), &report)
        }
        Command::TrainStackedTagger { t, base_model } => {
            let rc = config_for(&t.common, None, &[])?;
            let config = rc.model(if rc.desk()? {
                StackedTaggerConfig::desk()
            } else {
                StackedTaggerConfig::default()
            })?;
            let base = base_tagger(&base_model)?;
            let emb = embeddings(t.embeddings.as_deref())?;
            let train = read_treebank(&t.train)?;
            let (model, report) = train_stacked_tagger(&base, &train, &dev_set(t.dev.as_deref())?, &config, emb.as_ref())?;
            model.save(&t.out, Some(&report))?;
            finish_model(&t.out, "stacked-tagger", &rc, &config.to_text(), &report)
        }
        Command::TrainStackedParser { t, base_model, decoder } => {
            let rc = config_for(&t.common, decoder, &[])?;
            let config = rc.model(if rc.desk()? {
                StackedParserConfig::desk()
            } else {
                StackedParserConfig::default()
            })?;
            let base = base_parser(&base_model)?;
            let emb = embeddings(t.embeddings.as_deref())?;
            let train = read_treebank(&t.train)?;
            let (model, report) = train_stacked_parser(&base, &train, &dev_set(t.dev.as_deref())?, &config, emb.as_ref())?;
            model.save(&t.out, Some(&report))?;
            finish_model(&t.out, "stacked-parser", &rc, &config.to_text(), &report)
        }
        Command::Tag { model, input, out } => {
            let tagger = AnyTagger::load(&model)?;
            let tagged = tagger.tag_all(&read_treebank(&input)?);
            write_treebank(&out, &tagged)?;
            println!("tagged {} sentences -> {}", tagged.len(), out.display());
            Ok(())
        }
        Command::Parse {
            model,
            input,
            out,
            decoder,
        } => {
            let parser = AnyParser::load(&model)?;
            let decoder = decoder.unwrap_or(parser.decoder());
            let parsed = parser.parse_all(&read_treebank(&input)?, decoder);
            write_treebank(&out, &parsed)?;
            println!("parsed {} sentences ({decoder}) -> {}", parsed.len(), out.display());
            Ok(())
        }
        Command::Eval {
            gold,
            pred,
            include_punct,
            categories,
            primary_only,
            out,
        } => {
            let (gold, pred) = (read_treebank(&gold)?, read_treebank(&pred)?);
            let punct = include_punct.unwrap_or(false);
            let total = eval::attachment_scores(&gold, &pred, punct)?;
            let mut rows = vec![("all".to_string(), total)];
            if categories {
                rows.extend(eval::per_category_scores(&gold, &pred, punct, primary_only)?);
            }
            let mut tsv = String::from("subset\ttokens\tuas\tlas\tpos\n");
            for (name, r) in &rows {
                println!("{name:<24} {r}");
                tsv.push_str(&format!(
                    "{name}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
                    r.tokens,
                    round2(r.uas()),
                    round2(r.las()),
                    round2(r.tag_accuracy())
                ));
            }
            if let Some(out) = out {
                write_atomic(&out, tsv.as_bytes())?;
            }
            Ok(())
        }
        Command::Iaa { a, b } => {
            let (pos, uas, las) = eval::inter_annotator_agreement(&read_treebank(&a)?, &read_treebank(&b)?)?;
            println!(
                "POS {:.2}  UAS {:.2}  LAS {:.2}",
                round2(pos),
                round2(uas),
                round2(las)
            );
            Ok(())
        }
        Command::Jackknife { t, k } => {
            let rc = config_for(&t.common, None, &[("k", k.map(|k| k.to_string()))])?;
            let config = tagger_config(&rc)?;
            let k = rc.get("k", 10usize)?;
            let emb = embeddings(t.embeddings.as_deref())?;
            let treebank = read_treebank(&t.train)?;
            let jk = eval::jackknife_tags(&treebank, k, config.train.seed, |train, held| {
                let (m, _) = train_tagger(train, &[], &config, emb.as_ref())?;
                Ok(held.iter().map(|s| m.tag(s).tags).collect())
            })?;
            write_treebank(&t.out, &jk.sentences)?;
            println!(
                "{k}-fold jackknife tagging accuracy {:.2} -> {}",
                round2(jk.accuracy()),
                t.out.display()
            );
            Ok(())
        }
        Command::Crossfold {
            common,
            treebank,
            base_model,
            embeddings: emb_path,
            k,
            include_punct,
            decoder,
            out,
        } => {
            let rc = config_for(
                &common,
                decoder,
                &[
                    ("k", k.map(|k| k.to_string())),
                    ("include_punct", include_punct.map(|b| b.to_string())),
                ],
            )?;
            let k = rc.get("k", 5usize)?;
            let punct = rc.flag("include_punct", false)?;
            let dev_fraction = rc.get("dev_fraction", 0.1)?;
            let emb = embeddings(emb_path.as_deref())?;
            let data = read_treebank(&treebank)?;
            let report = match &base_model {
                None => {
                    let config = parser_config(&rc)?;
                    eval::cross_fold_validate(&data, k, dev_fraction, config.train.seed, punct, |train, dev, test| {
                        let (m, _) = train_parser(train, dev, &config, emb.as_ref())?;
                        Ok(m.parse_all(test, config.decoder))
                    })?
                }
                Some(dir) => {
                    let base = base_parser(dir)?;
                    let config = rc.model(if rc.desk()? {
                        StackedParserConfig::desk()
                    } else {
                        StackedParserConfig::default()
                    })?;
                    let seed = config.target.train.seed;
                    eval::cross_fold_validate(&data, k, dev_fraction, seed, punct, |train, dev, test| {
                        let (m, _) = train_stacked_parser(&base, train, dev, &config, emb.as_ref())?;
                        Ok(m.parse_all(test, config.target.decoder))
                    })?
                }
            };
            let mut tsv = String::from("fold\ttokens\tuas\tlas\n");
            for (i, r) in report.folds.iter().enumerate() {
                println!("fold {}  {r}", i + 1);
                tsv.push_str(&format!("{}\t{}\t{:.2}\t{:.2}\n", i + 1, r.tokens, round2(r.uas()), round2(r.las())));
            }
            println!(
                "mean   UAS {:.2}  LAS {:.2}",
                round2(report.mean_uas),
                round2(report.mean_las)
            );
            tsv.push_str(&format!(
                "mean\t\t{:.2}\t{:.2}\n",
                round2(report.mean_uas),
                round2(report.mean_las)
            ));
            if let Some(out) = out {
                write_atomic(&out, tsv.as_bytes())?;
            }
            Ok(())
        }
        Command::LmTrain {
            common,
            corpus,
            order,
            out,
        } => {
            let rc = config_for(&common, None, &[("order", order.map(|o| o.to_string()))])?;
            rc.run_only()?;
            let order = rc.get("order", 5usize)?;
            let prune = rc.flag("prune_singletons", false)?;
            let corpus = langmodel::read_corpus(&read_lines(&corpus)?);
            let lm = NgramLM::train(&corpus, order, prune)?;
            write_atomic(&out, lm.to_text().as_bytes())?;
            println!(
                "{order}-gram model on {} sentences, training perplexity {:.3} -> {}",
                corpus.len(),
                lm.perplexity(&corpus),
                out.display()
            );
            Ok(())
        }
        Command::LmRank {
            common,
            model,
            input,
            lexicon,
            out,
        } => {
            let rc = config_for(&common, None, &[])?;
            rc.run_only()?;
            let lm = NgramLM::from_text(&read_lines(&model)?).with_context(|| format!("language model {}", model.display()))?;
            let bounds = (rc.get("min_length", 5usize)?, rc.get("max_length", 50usize)?);
            let norm = if rc.flag("raw_length", false)? {
                Normalization::Tokens
            } else {
                Normalization::WithEnd
            };
            let terms = match lexicon {
                Some(p) => read_lexicon(&p)?,
                None => vec![],
            };
            let sentences = langmodel::read_corpus(&read_lines(&input)?);
            let ranked = langmodel::rank_by_divergence(&lm, &sentences, bounds, norm, &terms);
            let mut text = String::new();
            for (i, r) in ranked.iter().enumerate() {
                text.push_str(&r.to_row(i + 1));
                text.push('\n');
            }
            write_atomic(&out, text.as_bytes())?;
            println!(
                "ranked {} of {} sentences (lengths {}..={}) -> {}",
                ranked.len(),
                sentences.len(),
                bounds.0,
                bounds.1,
                out.display()
            );
            Ok(())
        }
        Command::LexiconMatch { input, lexicon, out } => {
            let sentences = langmodel::read_corpus(&read_lines(&input)?);
            let hits = langmodel::match_lexicon(&sentences, &read_lexicon(&lexicon)?);
            let mut text = String::new();
            let mut matched = 0;
            for (s, h) in sentences.iter().zip(&hits) {
                if !h.is_empty() {
                    matched += 1;
                }
                let h = if h.is_empty() { "_".to_string() } else { h.join(",") };
                text.push_str(&format!("{h}\t{}\n", s.join(" ")));
            }
            write_atomic(&out, text.as_bytes())?;
            println!("{matched} of {} sentences contain lexicon terms", sentences.len());
            Ok(())
        }
        Command::Validate { input, inventory } => {
            let data = read_treebank(&input)?;
            let inv = match inventory {
                Some(p) => LabelInventory::from_treebank(&read_treebank(&p)?),
                None => LabelInventory::universal(),
            };
            let mut errors = 0;
            for (i, s) in data.iter().enumerate() {
                for v in treebank::validate(s, &inv) {
                    if !v.is_warning() {
                        errors += 1;
                    }
                    println!("sentence {}: {v}", i + 1);
                }
            }
            if errors > 0 {
                bail!("{errors} errors in {}", input.display());
            }
            println!("{} sentences ok", data.len());
            Ok(())
        }
    }
}

fn read_lexicon(path: &Path) -> Result<Vec<String>> {
    Ok(read_lines(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}
