use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use urgency::config::PipelineConfig;
use urgency::dataset::{read_messages, write_jsonl, Corpus, DatasetRole, LabeledDataset};
use urgency::embedding::{train_subword_skipgram, write_text_vectors, EmbeddingModel};
use urgency::eval::{
    compute_metrics, run_rq1_with_embeddings, run_rq2_with_embeddings, stratified_split, ConfusionCounts,
    EvalReport, TrialResult,
};
use urgency::model::{
    fit_ensemble, load_embedding_file, load_ensemble, save_ensemble, transfer_train_with_embedding,
    EnsembleModel, FeatureSet, Featurizer,
};
use urgency::preprocess::{Label, Message};
use urgency::seed::{derive_seed, STREAM_INNER_SPLIT};
use urgency::synth::{synth_corpus, synth_pretrained, SynthConfig};
use urgency_service::{AppState, SessionDefaults, SessionStore};

use crate::{
    ActiveCommand, Cli, Command, EvaluateRq1Args, EvaluateRq2Args, PredictArgs, PreprocessArgs, ServeArgs,
    SynthArgs, TrainArgs, TrainEmbeddingsArgs, TransferTrainArgs,
};

const LOCAL_FILE: &str = "local.uemb";
const MODEL_FILE: &str = "model.json";

pub fn run(cli: Cli) -> Result<()> {
    // config errors surface before any work starts
    let cfg = PipelineConfig::resolve(cli.global.config.as_deref(), cli.global.seed).context("loading config")?;
    match cli.command {
        Command::Preprocess(a) => preprocess(&cfg, a),
        Command::TrainEmbeddings(a) => train_embeddings(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::TransferTrain(a) => transfer(&cfg, a),
        Command::Predict(a) => predict(a),
        Command::EvaluateRq1(a) => evaluate_rq1(&cfg, a),
        Command::EvaluateRq2(a) => evaluate_rq2(&cfg, a),
        Command::Active {
            command: ActiveCommand::Serve(a),
        } => serve(&cfg, a),
        Command::SynthCorpus(a) => synth(&cfg, a),
        Command::Config => {
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn messages(path: &Path) -> Result<Vec<Message>> {
    read_messages(path).with_context(|| format!("reading {}", path.display()))
}

fn labeled(cfg: &PipelineConfig, path: &Path, role: DatasetRole) -> Result<LabeledDataset> {
    LabeledDataset::new(messages(path)?, &cfg.tokenizer(), role).with_context(|| format!("loading {}", path.display()))
}

fn corpus(cfg: &PipelineConfig, paths: &[PathBuf]) -> Result<Corpus> {
    let tok = cfg.tokenizer();
    let mut out = Corpus::default();
    for p in paths {
        out.messages.extend(messages(p)?.iter().map(|m| tok.tokenize(m)));
    }
    Ok(out)
}

fn embedding(path: &Path) -> Result<Arc<EmbeddingModel>> {
    load_embedding_file(path)
        .map(Arc::new)
        .with_context(|| format!("loading embedding {}", path.display()))
}

fn train_local(cfg: &PipelineConfig, text: &Corpus) -> Result<Arc<EmbeddingModel>> {
    tracing::info!(messages = text.len(), tokens = text.token_count(), "training local embedding");
    let model = train_subword_skipgram(text, &cfg.skipgram()).context("training local embedding")?;
    Ok(Arc::new(model))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct TokenizedRow<'a> {
    id: &'a str,
    tokens: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

fn preprocess(cfg: &PipelineConfig, a: PreprocessArgs) -> Result<()> {
    let tok = cfg.tokenizer();
    let mut w = output(a.output.as_deref())?;
    for m in messages(&a.input)? {
        let row = TokenizedRow {
            id: &m.id,
            tokens: tok.tokenize(&m).tokens,
            label: m.label,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn train_embeddings(cfg: &PipelineConfig, a: TrainEmbeddingsArgs) -> Result<()> {
    let model = train_local(cfg, &corpus(cfg, &a.corpora)?)?;
    model.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(p) = &a.text_output {
        let mut w = output(Some(p))?;
        write_text_vectors(&model, &mut w)?;
        w.flush()?;
    }
    tracing::info!(words = model.vocab_len(), dim = model.dim(), "embedding written");
    Ok(())
}

/// Loads `--local` or trains on `text`, writing the trained model into
/// `out_dir`. Returns the model and the file it lives in.
fn local_embedding(
    cfg: &PipelineConfig,
    given: Option<&Path>,
    text: impl FnOnce() -> Result<Corpus>,
    out_dir: &Path,
) -> Result<(Arc<EmbeddingModel>, PathBuf)> {
    if let Some(p) = given {
        return Ok((embedding(p)?, p.to_path_buf()));
    }
    let model = train_local(cfg, &text()?)?;
    let path = out_dir.join(LOCAL_FILE);
    model.save(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok((model, path))
}

fn train(cfg: &PipelineConfig, a: TrainArgs) -> Result<()> {
    let data = labeled(cfg, &a.labeled, DatasetRole::Train)?;
    let mut sets: Vec<FeatureSet> = a.features.iter().map(|&f| f.into()).collect();
    if sets.is_empty() {
        sets.push(FeatureSet::LocalEmbedding);
        sets.push(FeatureSet::Manual);
        if a.embeddings.wiki.is_some() {
            sets.push(FeatureSet::WikiEmbedding);
        }
    }
    sets.sort_unstable();
    sets.dedup();
    if sets.contains(&FeatureSet::WikiEmbedding) && a.embeddings.wiki.is_none() {
        bail!("the wiki member needs --wiki");
    }
    create_dir(&a.out_dir)?;
    let wiki = a.embeddings.wiki.as_deref().map(embedding).transpose()?;
    let local = if sets.contains(&FeatureSet::LocalEmbedding) {
        let text = || {
            let mut c = corpus(cfg, &a.embeddings.corpora)?;
            c.extend_from(&data);
            Ok(c)
        };
        Some(local_embedding(cfg, a.embeddings.local.as_deref(), text, &a.out_dir)?)
    } else {
        None
    };
    let featurizer = Featurizer {
        local: local.as_ref().map(|(m, _)| m.clone()),
        wiki,
        ..cfg.featurizer()
    };
    let (train, mut validation) = stratified_split(
        &data,
        cfg.evaluation.inner_train_fraction,
        derive_seed(cfg.seed, STREAM_INNER_SPLIT),
    )?;
    validation.role = DatasetRole::Validation;
    let model = fit_ensemble(&train, &validation, &featurizer, &sets, &cfg.fit_options())?;
    let model_path = a.out_dir.join(MODEL_FILE);
    save_ensemble(
        &model,
        &model_path,
        local.as_ref().map(|(_, p)| p.as_path()),
        a.embeddings.wiki.as_deref(),
    )?;

    let pairs = validation
        .items()
        .iter()
        .map(|it| (model.classify(&it.message), it.label));
    let confusion = ConfusionCounts::from_pairs(pairs);
    let result = TrialResult {
        trial: 0,
        seed: cfg.seed,
        system: "ensemble".into(),
        confusion,
        metrics: compute_metrics(&confusion)?,
        weights: model.weights().to_vec(),
        threshold: model.threshold(),
        train_size: train.len(),
    };
    let report = EvalReport::assemble("validation", &["ensemble".to_string()], None, vec![result])?;
    report.write_json(a.out_dir.join("validation.json"))?;
    print!("{}", report.to_table());
    tracing::info!(path = %model_path.display(), "model written");
    Ok(())
}

fn transfer(cfg: &PipelineConfig, a: TransferTrainArgs) -> Result<()> {
    let target = labeled(cfg, &a.target, DatasetRole::Train)?;
    let source = labeled(cfg, &a.source_labeled, DatasetRole::Train)?;
    create_dir(&a.out_dir)?;
    let text = || {
        let mut c = corpus(cfg, &a.source_corpora)?;
        c.extend_from(&source);
        Ok(c)
    };
    let (local, local_path) = local_embedding(cfg, a.local.as_deref(), text, &a.out_dir)?;
    let featurizer = Featurizer {
        local: Some(local),
        wiki: a.wiki.as_deref().map(embedding).transpose()?,
        ..cfg.featurizer()
    };
    let outcome = transfer_train_with_embedding(
        &target,
        &source,
        &featurizer,
        cfg.transfer.upsampling,
        &cfg.transfer_fit_options(),
    )?;
    let model_path = a.out_dir.join(MODEL_FILE);
    save_ensemble(&outcome.ensemble, &model_path, Some(&local_path), a.wiki.as_deref())?;
    println!(
        "trained on {} rows ({} urgent): {} x {} target + {} source",
        outcome.train_size,
        outcome.train_urgent,
        cfg.transfer.upsampling,
        target.len(),
        source.len()
    );
    tracing::info!(path = %model_path.display(), "model written");
    Ok(())
}

/// One scored message as written by `predict`.
#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    score: f64,
    verdict: urgency_service::Verdict,
}

fn predict(a: PredictArgs) -> Result<()> {
    let model: EnsembleModel = load_ensemble(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let msgs = match &a.input {
        Some(p) => messages(p)?,
        None if !a.text.is_empty() => a
            .text
            .iter()
            .enumerate()
            .map(|(i, t)| Message::new((i + 1).to_string(), t.clone()))
            .collect(),
        None => bail!("give --input or at least one --text"),
    };
    let mut w = output(a.output.as_deref())?;
    for m in &msgs {
        let score = model.score(m);
        let row = Prediction {
            id: &m.id,
            score,
            verdict: model.verdict(score).into(),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn finish_report(report: &EvalReport, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        report.write_json(p).with_context(|| format!("writing {}", p.display()))?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn evaluate_rq1(cfg: &PipelineConfig, a: EvaluateRq1Args) -> Result<()> {
    let data = labeled(cfg, &a.labeled, DatasetRole::Train)?;
    let wiki = embedding(&a.wiki)?;
    let mut text = corpus(cfg, &a.corpora)?;
    text.extend_from(&data);
    let local = train_local(cfg, &text)?;
    let report = run_rq1_with_embeddings(&data, local, wiki, &cfg.experiment())?;
    finish_report(&report, a.output.as_deref())
}

fn evaluate_rq2(cfg: &PipelineConfig, a: EvaluateRq2Args) -> Result<()> {
    let source = labeled(cfg, &a.source_labeled, DatasetRole::Train)?;
    let target = labeled(cfg, &a.target_labeled, DatasetRole::Train)?;
    let wiki = embedding(&a.wiki)?;
    let mut text = corpus(cfg, &a.source_corpora)?;
    text.extend_from(&source);
    let local = train_local(cfg, &text)?;
    let report = run_rq2_with_embeddings(&source, &target, local, wiki, &cfg.experiment())?;
    finish_report(&report, a.output.as_deref())
}

fn serve(cfg: &PipelineConfig, a: ServeArgs) -> Result<()> {
    let model = a
        .model
        .as_deref()
        .map(|p| load_ensemble(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let featurizer = match &model {
        Some(m) => m.featurizer.clone(),
        None => Featurizer {
            local: a.local.as_deref().map(embedding).transpose()?,
            wiki: a.wiki.as_deref().map(embedding).transpose()?,
            ..cfg.featurizer()
        },
    };
    let pool = a.pool.as_deref().map(messages).transpose()?.map(Arc::new);
    let defaults = SessionDefaults {
        featurizer,
        config: cfg.session(),
        pool,
    };
    let persisted = a.sessions_dir.is_some();
    let sessions = match &a.sessions_dir {
        Some(dir) => SessionStore::open(dir, defaults)?,
        None => SessionStore::in_memory(defaults),
    };
    let state = Arc::new(AppState::new(model, sessions, persisted));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        urgency_service::serve(listener, state).await?;
        Ok(())
    })
}

fn synth(cfg: &PipelineConfig, a: SynthArgs) -> Result<()> {
    let sc = SynthConfig {
        unlabeled: a.unlabeled,
        labeled: a.labeled,
        keyword_prob: a.keyword_prob,
        digit_prob: a.digit_prob,
        topic: a.topic.into(),
        id_prefix: a.id_prefix,
        ..SynthConfig::default()
    };
    if !(0.0..=1.0).contains(&sc.keyword_prob) || !(0.0..=1.0).contains(&sc.digit_prob) {
        bail!("probabilities must be in [0, 1]");
    }
    if a.wiki_dim == 0 {
        bail!("--wiki-dim must be at least 1");
    }
    create_dir(&a.out_dir)?;
    let c = synth_corpus(&sc, cfg.seed);
    write_jsonl(a.out_dir.join("unlabeled.jsonl"), &c.unlabeled)?;
    write_jsonl(a.out_dir.join("labeled.jsonl"), &c.labeled)?;
    let wiki = synth_pretrained(a.wiki_dim, cfg.seed);
    let mut w = output(Some(&a.out_dir.join("wiki.vec")))?;
    write_text_vectors(&wiki, &mut w)?;
    w.flush()?;
    println!(
        "{} unlabeled, {} labeled, {} wiki words",
        c.unlabeled.len(),
        c.labeled.len(),
        wiki.vocab_len()
    );
    Ok(())
}
