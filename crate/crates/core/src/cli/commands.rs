use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::manifest::RunManifest;
use super::{AlignArgs, CliError, Command, EvaluateArgs, RerunArgs, SplitArgs, StatsArgs, TrainArgs, TranslateArgs};
use crate::align::{align_ladder, extract_pairs, AlignerConfig, Dictionary};
use crate::corpus::{
    compute_stats, filter_by_length, load_bitext, read_lines, save_bitext, split_train_valid, ParallelCorpus,
    SplitSpec, TrainFraction,
};
use crate::eval::{evaluate_corpus, BleuReport};
use crate::nn::{greedy_decode, Checkpoint, ModelConfig, Parameters};
use crate::text::{EncodedPair, Tokenizer, Vocabulary};
use crate::train::{train_with, TrainError, TrainOutcome, TrainingConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SRC_VOCAB_FILE: &str = "src.vocab";
pub const TGT_VOCAB_FILE: &str = "tgt.vocab";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `report.tsv` -> `report.tsv.manifest.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Writes `text` to `out`, or to stdout when `out` is `None`. A manifest is
/// written next to file outputs.
fn emit(text: &str, out: Option<&Path>, command: Command, resolved: serde_json::Value) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_file(path, text)?;
            let mut manifest = RunManifest::new(command);
            manifest.resolved = resolved;
            manifest.outputs.push(path.to_path_buf());
            manifest.write(&sidecar(path))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn cmd_align(args: &AlignArgs) -> Result<(), CliError> {
    let src = read_lines(&args.src)?;
    let tgt = read_lines(&args.tgt)?;
    let dictionary = match &args.dict {
        Some(path) => Some(Dictionary::from_tsv(&read_text(path)?)?),
        None => None,
    };
    let cfg = AlignerConfig {
        mean_length_ratio: args.mean_length_ratio,
        length_variance: args.length_variance,
        dict_weight: args.dict_weight,
        dictionary,
        max_cells: args.max_cells,
        ..AlignerConfig::default()
    };
    let ladder = align_ladder(&src, &tgt, &cfg)?;
    let pairs = extract_pairs(&ladder, &src, &tgt, args.only_1_1)?;

    create_dir(&args.out)?;
    let ladder_path = args.out.join("ladder.tsv");
    let (pairs_src, pairs_tgt) = (args.out.join("aligned.src"), args.out.join("aligned.tgt"));
    write_file(&ladder_path, ladder.to_tsv())?;
    save_bitext(&pairs, &pairs_src, &pairs_tgt)?;
    log::info!("aligned {} x {} sentences into {} beads", src.len(), tgt.len(), ladder.beads.len());

    let mut manifest = RunManifest::new(Command::Align(args.clone()));
    manifest.resolved = json!({ "beads": ladder.beads.len(), "pairs": pairs.len() });
    manifest.outputs = vec![ladder_path, pairs_src, pairs_tgt];
    manifest.write(&args.out.join(MANIFEST_FILE))
}

pub fn cmd_stats(args: &StatsArgs) -> Result<(), CliError> {
    let corpus = load_bitext(&args.src, &args.tgt, args.domain.as_deref())?.corpus;
    let tokenizer = Tokenizer { lowercase: args.lowercase, ..Tokenizer::default() };
    let stats = compute_stats(&corpus, (&args.src_lang, &args.tgt_lang), &tokenizer);
    emit(&stats.to_tsv(), args.out.as_deref(), Command::Stats(args.clone()), serde_json::Value::Null)
}

pub fn cmd_split(args: &SplitArgs) -> Result<(), CliError> {
    let train_fraction: TrainFraction = args.train_fraction.parse()?;
    let corpus = load_bitext(&args.src, &args.tgt, None)?.corpus;
    let (train, valid) = split_train_valid(&corpus, &SplitSpec { seed: args.seed, train_fraction })?;

    create_dir(&args.out)?;
    let names = ["train.src", "train.tgt", "valid.src", "valid.tgt"].map(|n| args.out.join(n));
    save_bitext(&train, &names[0], &names[1])?;
    save_bitext(&valid, &names[2], &names[3])?;

    let mut manifest = RunManifest::new(Command::Split(args.clone()));
    manifest.resolved = json!({ "train_pairs": train.len(), "valid_pairs": valid.len() });
    manifest.outputs = names.to_vec();
    manifest.write(&args.out.join(MANIFEST_FILE))
}

fn tokenize_sides(corpus: &ParallelCorpus, tokenizer: &Tokenizer) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    corpus
        .pairs
        .iter()
        .map(|p| (tokenizer.tokenize(&p.source), tokenizer.tokenize(&p.target)))
        .unzip()
}

fn encode_pairs(sides: &(Vec<Vec<String>>, Vec<Vec<String>>), src: &Vocabulary, tgt: &Vocabulary) -> Vec<EncodedPair> {
    sides.0.iter().zip(&sides.1).map(|(s, t)| EncodedPair::new(src.encode(s), tgt.encode(t))).collect()
}

pub fn resolve_model_config(args: &TrainArgs, src_vocab_size: usize, tgt_vocab_size: usize) -> ModelConfig {
    ModelConfig {
        embed_dim: args.embed_dim,
        hidden_dim: args.hidden_dim,
        bidirectional: args.bidirectional,
        attention: args.attention,
        dropout_rate: args.dropout_rate,
        src_vocab_size,
        tgt_vocab_size,
        max_decode_len: args.max_decode_len,
    }
}

pub fn resolve_training_config(args: &TrainArgs) -> TrainingConfig {
    TrainingConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        max_grad_norm: args.max_grad_norm,
        weight_decay: args.weight_decay,
        beta1: args.beta1,
        beta2: args.beta2,
        epsilon: args.epsilon,
        seed: args.seed,
    }
}

fn best_checkpoint_name(epoch: usize, accuracy: f64) -> String {
    format!("best-epoch{epoch:03}-acc{accuracy:.4}.ckpt")
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let train_fraction: TrainFraction = args.train_fraction.parse()?;
    let tokenizer = Tokenizer { lowercase: args.lowercase, ..Tokenizer::default() };
    let loaded = filter_by_length(&load_bitext(&args.train_src, &args.train_tgt, None)?.corpus, args.max_len, &tokenizer);
    let (train_corpus, valid_corpus) = match (&args.valid_src, &args.valid_tgt) {
        (Some(vs), Some(vt)) => (loaded, filter_by_length(&load_bitext(vs, vt, None)?.corpus, args.max_len, &tokenizer)),
        _ => split_train_valid(&loaded, &SplitSpec { seed: args.seed, train_fraction })?,
    };
    if train_corpus.is_empty() || valid_corpus.is_empty() {
        return Err(CliError::Data("no training or validation pairs left after length filtering".into()));
    }

    let train_sides = tokenize_sides(&train_corpus, &tokenizer);
    let valid_sides = tokenize_sides(&valid_corpus, &tokenizer);
    let src_vocab = Vocabulary::build(train_sides.0.iter().map(Vec::as_slice), args.min_freq);
    let tgt_vocab = Vocabulary::build(train_sides.1.iter().map(Vec::as_slice), args.min_freq);
    let train_pairs = encode_pairs(&train_sides, &src_vocab, &tgt_vocab);
    let valid_pairs = encode_pairs(&valid_sides, &src_vocab, &tgt_vocab);

    let model = resolve_model_config(args, src_vocab.len(), tgt_vocab.len());
    let training = resolve_training_config(args);
    model.validate()?;
    training.validate()?;

    let out = &args.out;
    create_dir(out)?;
    write_file(&out.join(SRC_VOCAB_FILE), src_vocab.to_tsv())?;
    write_file(&out.join(TGT_VOCAB_FILE), tgt_vocab.to_tsv())?;

    let mut manifest = RunManifest::new(Command::Train(args.clone()));
    manifest.resolved = json!({
        "model": model,
        "training": training,
        "variant": model.variant_name(),
        "train_pairs": train_pairs.len(),
        "valid_pairs": valid_pairs.len(),
    });
    manifest.outputs = vec![out.join(SRC_VOCAB_FILE), out.join(TGT_VOCAB_FILE)];
    manifest.write(&out.join(MANIFEST_FILE))?;

    let checkpoint = |params: &Parameters, epoch: usize, accuracy: f64| {
        Checkpoint::new(model.clone(), args.seed, params.clone())
            .with_metadata("variant", model.variant_name())
            .with_metadata("src_vocab", SRC_VOCAB_FILE)
            .with_metadata("tgt_vocab", TGT_VOCAB_FILE)
            .with_metadata("lowercase", args.lowercase)
            .with_metadata("epoch", epoch)
            .with_metadata("valid_accuracy", format!("{accuracy:.6}"))
    };

    let mut best_file: Option<PathBuf> = None;
    let result = train_with(
        &model,
        Parameters::init(&model, args.seed),
        &train_pairs,
        &valid_pairs,
        &training,
        |record, improved, params| {
            if !improved {
                return Ok(());
            }
            let path = out.join(best_checkpoint_name(record.epoch, record.valid_token_accuracy));
            checkpoint(params, record.epoch, record.valid_token_accuracy)
                .save(&path)
                .map_err(|e| TrainError::Callback(e.to_string()))?;
            if let Some(old) = best_file.replace(path) {
                fs::remove_file(&old).map_err(|e| TrainError::Callback(format!("{}: {e}", old.display())))?;
            }
            Ok(())
        },
    );

    let (outcome, failure) = match result {
        Ok(outcome) => (outcome, None),
        Err(TrainError::NonFinite { what, best }) => {
            let msg = format!("non-finite value detected in {what}");
            (*best, Some(CliError::Numeric(msg)))
        }
        Err(e) => return Err(e.into()),
    };
    let TrainOutcome { params, report } = outcome;
    write_file(&out.join(TRAIN_LOG_FILE), report.to_tsv())?;
    manifest.outputs.push(out.join(TRAIN_LOG_FILE));
    if let Some(best) = report.best() {
        checkpoint(&params, best.epoch, best.valid_token_accuracy).save(&out.join(CHECKPOINT_FILE))?;
        manifest.outputs.push(out.join(CHECKPOINT_FILE));
        log::info!("best epoch {} with validation accuracy {:.4}", best.epoch, best.valid_token_accuracy);
    }
    manifest.outputs.extend(best_file);
    manifest.write(&out.join(MANIFEST_FILE))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Checkpoint, vocabularies and tokenizer needed to translate.
pub struct Translator {
    pub checkpoint: Checkpoint,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub tokenizer: Tokenizer,
}

impl Translator {
    /// Loads a checkpoint and the vocabularies named in its metadata,
    /// resolved against the checkpoint's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let checkpoint = Checkpoint::load(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let vocab = |key: &str, default: &str| -> Result<Vocabulary, CliError> {
            let name = checkpoint.metadata.get(key).map(String::as_str).unwrap_or(default);
            Ok(Vocabulary::from_tsv(&read_text(&dir.join(name))?)?)
        };
        let src_vocab = vocab("src_vocab", SRC_VOCAB_FILE)?;
        let tgt_vocab = vocab("tgt_vocab", TGT_VOCAB_FILE)?;
        if src_vocab.len() != checkpoint.config.src_vocab_size || tgt_vocab.len() != checkpoint.config.tgt_vocab_size {
            return Err(CliError::Data("vocabulary sizes do not match the checkpoint".into()));
        }
        let lowercase = checkpoint.metadata.get("lowercase").is_some_and(|v| v == "true");
        Ok(Self { checkpoint, src_vocab, tgt_vocab, tokenizer: Tokenizer { lowercase, ..Tokenizer::default() } })
    }

    pub fn translate(&self, sentence: &str) -> Result<String, CliError> {
        let ids = self.src_vocab.encode(&self.tokenizer.tokenize(sentence));
        let out = greedy_decode(&self.checkpoint.params, &self.checkpoint.config, &ids)?;
        Ok(self.tgt_vocab.decode(&out)?.join(" "))
    }
}

pub fn cmd_translate(args: &TranslateArgs) -> Result<(), CliError> {
    let translator = Translator::load(&args.checkpoint)?;
    let mut text = String::new();
    for line in read_lines(&args.input)? {
        text.push_str(&translator.translate(&line)?);
        text.push('\n');
    }
    emit(&text, args.out.as_deref(), Command::Translate(args.clone()), serde_json::Value::Null)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let tokenizer = Tokenizer { lowercase: args.lowercase, ..Tokenizer::default() };
    let tokenize = |lines: Vec<String>| lines.iter().map(|l| tokenizer.tokenize(l)).collect::<Vec<_>>();
    let hyps = tokenize(read_lines(&args.hyp)?);
    let refs = tokenize(read_lines(&args.reference)?);
    let mut report: BleuReport = evaluate_corpus(&hyps, &refs)?;
    if let Some(acc) = args.accuracy {
        if !(0.0..=1.0).contains(&acc) {
            return Err(CliError::Usage(format!("accuracy {acc} outside [0, 1]")));
        }
        report = report.with_accuracy(acc);
    }
    let text = format!("{}\n{}\n", BleuReport::HEADER, report.to_row(&args.model));
    emit(&text, args.out.as_deref(), Command::Evaluate(args.clone()), serde_json::Value::Null)
}

pub fn cmd_rerun(args: &RerunArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    let mut command = manifest.command;
    if let Some(out) = &args.out {
        match &mut command {
            Command::Align(a) => a.out = out.clone(),
            Command::Split(a) => a.out = out.clone(),
            Command::Train(a) => a.out = out.clone(),
            Command::Stats(a) => a.out = Some(out.clone()),
            Command::Translate(a) => a.out = Some(out.clone()),
            Command::Evaluate(a) => a.out = Some(out.clone()),
            Command::Rerun(_) => {}
        }
    }
    if matches!(command, Command::Rerun(_)) {
        return Err(CliError::Usage("a manifest cannot record a rerun".into()));
    }
    super::run(&command)
}
