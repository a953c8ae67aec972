//! Stage driver. Stages always run in the order
//! clean, transliterate, oversample, featurize, stack (pooled, language-wise,
//! pseudo, ensemble), thresholds, report; `diagnose` and `plot` follow when
//! requested.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use abuse_core::corpus::{
    base_id, clean_text, compose_model_text, load_corpus_with, merge_oversample, synthesize_corpus,
    synthesize_embeddings, write_corpus, TransliteratorSet,
};
use abuse_core::evalx::{
    apply_thresholds, noise_probe, pca_scatter_export, tune_thresholds, MetricReport, ThresholdMap,
};
use abuse_core::features::{
    apply_pca, assemble_features, fit_pca, fit_tfidf, load_embeddings, metadata_matrix,
    write_embeddings, EmbeddingMatrix,
};
use abuse_core::pipeline::{
    make_folds, run_stacked, FoldAssignment, StackInputs, StackOutcome, StackToggles,
};
use abuse_core::{CommentRecord, Corpus, FeatureMatrix, LanguageTag, Split};
use anyhow::{anyhow, bail, Context};

use crate::config::RunConfig;

pub const PARTIAL_MARKER: &str = ".partial";
pub const RUN_REPORT: &str = "run_report.txt";
pub const OOF_FILE: &str = "oof_predictions.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const METRICS_FILE: &str = "metrics.txt";
pub const NOISE_FILE: &str = "noise_report.txt";
pub const SCATTER_FILE: &str = "scatter.tsv";
pub const INGESTED_FILE: &str = "ingested.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Load, clean, transliterate and oversample; write the model texts.
    Ingest,
    /// Full training run; writes test predictions when a test corpus is set.
    Train,
    /// Training run that requires a test corpus.
    Predict,
    /// Training run followed by the label-noise probe.
    Diagnose,
    /// Scatter export of the train embeddings.
    Plot,
    /// Write a synthetic corpus (and embeddings) into the output directory.
    Synth,
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source:#}")]
pub struct RunError {
    pub stage: String,
    pub source: anyhow::Error,
}

fn at<T>(stage: &str, r: anyhow::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError {
        stage: stage.to_owned(),
        source,
    })
}

/// Stage names and wall times of a finished run.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub stages: Vec<(String, Duration)>,
}

impl RunSummary {
    fn time<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce() -> anyhow::Result<T>,
    ) -> Result<T, RunError> {
        let t = Instant::now();
        let out = at(stage, f())?;
        self.stages.push((stage.to_owned(), t.elapsed()));
        Ok(out)
    }
}

/// Runs `command`, keeping a `.partial` marker in the output directory
/// until every stage has finished.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let out = cfg.output_dir.clone();
    at(
        "setup",
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())),
    )?;
    let marker = out.join(PARTIAL_MARKER);
    at(
        "setup",
        fs::write(&marker, b"").context("writing the partial marker"),
    )?;
    let mut summary = RunSummary::default();
    match command {
        Command::Synth => synth(cfg, &mut summary)?,
        Command::Plot => plot_only(cfg, &mut summary)?,
        Command::Ingest => {
            let data = ingest(cfg, &mut summary)?;
            summary.time("report", || write_ingested(cfg, &data))?;
        }
        Command::Train | Command::Predict | Command::Diagnose => {
            if command == Command::Predict && cfg.test_path.is_none() {
                return Err(RunError {
                    stage: "ingest".into(),
                    source: anyhow!("predict needs test_path"),
                });
            }
            train(cfg, command == Command::Diagnose, &mut summary)?;
        }
    }
    at(
        "report",
        fs::remove_file(&marker).context("removing the partial marker"),
    )?;
    Ok(summary)
}

struct Ingested {
    train: Corpus,
    test: Option<Corpus>,
    /// Row of the loaded train file behind each train row.
    source_row: Vec<usize>,
    /// The train corpus as loaded, before oversampling.
    original: Corpus,
}

fn existing(path: &Path) -> anyhow::Result<&Path> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    Ok(path)
}

fn train_path(cfg: &RunConfig) -> anyhow::Result<&Path> {
    existing(
        cfg.train_path
            .as_deref()
            .ok_or_else(|| anyhow!("train_path is not set"))?,
    )
}

fn ingest(cfg: &RunConfig, summary: &mut RunSummary) -> Result<Ingested, RunError> {
    let (original, test) = summary.time("ingest", || {
        let registry = cfg.registry()?;
        let train = load_corpus_with(train_path(cfg)?, Split::Train, &registry)?;
        let test = match &cfg.test_path {
            Some(p) => Some(load_corpus_with(existing(p)?, Split::Test, &registry)?),
            None => None,
        };
        for p in [
            &cfg.train_embeddings,
            &cfg.test_embeddings,
            &cfg.diagnose.flip_set_path,
        ]
        .into_iter()
        .flatten()
        {
            existing(p)?;
        }
        Ok((train, test))
    })?;
    let s = &cfg.stages;
    let translit = s.transliterate.then(TransliteratorSet::shipped);
    let clean = |c: &Corpus, on: bool| {
        c.map_texts(|r| {
            (
                if on {
                    clean_text(&r.raw_text)
                } else {
                    r.raw_text.clone()
                },
                String::new(),
            )
        })
    };
    let translit_pass = |c: &Corpus| {
        c.map_texts(|r| {
            let t = match &translit {
                Some(set) => set.transliterate(&r.language, &r.clean_text),
                None => r.clean_text.clone(),
            };
            (r.clean_text.clone(), t)
        })
    };
    let train = summary.time("clean", || Ok(clean(&original, s.clean)))?;
    let test = test.map(|t| clean(&t, s.clean));
    let train = summary.time("transliterate", || Ok(translit_pass(&train)))?;
    let test = test.map(|t| translit_pass(&t));
    let n = original.len();
    let (train, source_row) = if s.oversample {
        summary.time("oversample", || {
            let merged = merge_oversample(&translit_pass(&clean(&original, false)), &train)?;
            Ok((merged, (0..n).chain(0..n).collect()))
        })?
    } else {
        (train, (0..n).collect())
    };
    Ok(Ingested {
        train,
        test,
        source_row,
        original,
    })
}

fn write_ingested(cfg: &RunConfig, data: &Ingested) -> anyhow::Result<()> {
    let texts = model_texts(&data.train, cfg.text.max_len)?;
    let records = data
        .train
        .records()
        .iter()
        .zip(texts)
        .map(|(r, t)| CommentRecord {
            raw_text: t,
            ..r.clone()
        })
        .collect();
    let mut buf = Vec::new();
    write_corpus(&Corpus::new(records, Split::Train)?, &mut buf)?;
    fs::write(cfg.output_dir.join(INGESTED_FILE), buf)?;
    Ok(())
}

fn model_texts(corpus: &Corpus, max_len: usize) -> anyhow::Result<Vec<String>> {
    Ok(corpus
        .records()
        .iter()
        .map(|r| compose_model_text(r, max_len))
        .collect::<Result<_, _>>()?)
}

struct Featurized {
    train: FeatureMatrix,
    test: Option<FeatureMatrix>,
    /// Train embeddings in loaded-file row order, when configured.
    embeddings: Option<EmbeddingMatrix>,
}

fn expand_rows(e: &EmbeddingMatrix, rows: &[usize]) -> anyhow::Result<EmbeddingMatrix> {
    let values = rows
        .iter()
        .flat_map(|&r| e.row(r).iter().copied())
        .collect();
    Ok(EmbeddingMatrix::new(rows.len(), e.dim(), values)?)
}

fn featurize(cfg: &RunConfig, data: &Ingested) -> anyhow::Result<Featurized> {
    let s = &cfg.stages;
    let mut train_parts = Vec::new();
    let mut test_parts = Vec::new();
    if s.tfidf {
        let texts = model_texts(&data.train, cfg.text.max_len)?;
        let vocab = fit_tfidf(&texts, cfg.tfidf.max_features)?;
        train_parts.push(vocab.transform(&texts, cfg.execution));
        if let Some(test) = &data.test {
            test_parts.push(vocab.transform(&model_texts(test, cfg.text.max_len)?, cfg.execution));
        }
    }
    let mut embeddings = None;
    if let Some(path) = &cfg.train_embeddings {
        let train_e = load_embeddings(path, data.original.len())?;
        let test_e = match (&data.test, &cfg.test_embeddings) {
            (Some(t), Some(p)) => Some(load_embeddings(p, t.len())?),
            _ => None,
        };
        if let Some(t) = &test_e {
            if t.dim() != train_e.dim() {
                bail!(
                    "train embeddings have width {}, test embeddings {}",
                    train_e.dim(),
                    t.dim()
                );
            }
        }
        if s.pca {
            let model = fit_pca(&train_e, cfg.pca.components)?;
            train_parts.push(apply_pca(
                &model,
                &expand_rows(&train_e, &data.source_row)?,
            )?);
            if let Some(t) = &test_e {
                test_parts.push(apply_pca(&model, t)?);
            }
        } else {
            train_parts.push(expand_rows(&train_e, &data.source_row)?.to_features());
            if let Some(t) = &test_e {
                test_parts.push(t.to_features());
            }
        }
        embeddings = Some(train_e);
    }
    if s.metadata {
        train_parts.push(metadata_matrix(&data.train, cfg.metadata.transform));
        if let Some(t) = &data.test {
            test_parts.push(metadata_matrix(t, cfg.metadata.transform));
        }
    }
    let train = assemble_features(&train_parts)?;
    let test = match &data.test {
        Some(_) => Some(assemble_features(&test_parts)?),
        None => None,
    };
    Ok(Featurized {
        train,
        test,
        embeddings,
    })
}

/// Folds stratified on the loaded corpus; oversampled copies of a record
/// share its fold so neither copy can score the other.
fn folds_for(cfg: &RunConfig, data: &Ingested) -> anyhow::Result<FoldAssignment> {
    let base = make_folds(&data.original, cfg.pipeline.k, cfg.seed)?;
    let fold_of = data.source_row.iter().map(|&r| base.fold_of(r)).collect();
    Ok(FoldAssignment::new(fold_of, cfg.pipeline.k)?)
}

fn planted_rows(cfg: &RunConfig, corpus: &Corpus) -> anyhow::Result<Option<BTreeSet<usize>>> {
    let Some(path) = &cfg.diagnose.flip_set_path else {
        return Ok(None);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ids: HashSet<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    Ok(Some(
        corpus
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| ids.contains(base_id(&r.id)))
            .map(|(i, _)| i)
            .collect(),
    ))
}

fn train(cfg: &RunConfig, force_diagnose: bool, summary: &mut RunSummary) -> Result<(), RunError> {
    let data = ingest(cfg, summary)?;
    let feats = summary.time("featurize", || featurize(cfg, &data))?;
    let y_bool = at("stack", data.train.labels().map_err(Into::into))?;
    let y: Vec<f64> = y_bool.iter().map(|&b| b as u8 as f64).collect();
    let langs = data.train.languages();
    let test_langs = data.test.as_ref().map(Corpus::languages);
    let folds = at("stack", folds_for(cfg, &data))?;

    let mut pcfg = cfg.pipeline.clone();
    pcfg.gbdt.seed = cfg.seed;
    pcfg.gbdt.execution = cfg.execution;
    let toggles = StackToggles {
        language_wise: cfg.stages.language_wise,
        pseudo: cfg.stages.pseudo,
        ensemble: cfg.stages.ensemble,
    };
    let test = feats.test.as_ref().zip(test_langs.as_deref());
    let inputs = StackInputs {
        features: &feats.train,
        labels: &y,
        languages: &langs,
        folds: &folds,
        test,
    };
    let t = Instant::now();
    let outcome = run_stacked(&inputs, toggles, &pcfg).map_err(|e| RunError {
        stage: e.stage.to_owned(),
        source: e.source.into(),
    })?;
    summary.stages.push(("stack".into(), t.elapsed()));

    let final_oof = &outcome.final_stage().oof;
    let thresholds = if cfg.stages.thresholds {
        summary.time("thresholds", || {
            let map = tune_thresholds(
                &final_oof.probs,
                &y_bool,
                &langs,
                cfg.thresholds.grid_step,
                cfg.thresholds.min_count,
            )?;
            fs::write(
                cfg.output_dir.join(THRESHOLDS_FILE),
                serde_json::to_string_pretty(&map)? + "\n",
            )?;
            Ok(map)
        })?
    } else {
        ThresholdMap::default()
    };

    summary.time("report", || {
        write_outputs(cfg, &data, &outcome, &y_bool, &langs, &thresholds)?;
        fs::write(
            cfg.output_dir.join(RUN_REPORT),
            run_report(cfg, &data, &feats, &outcome),
        )?;
        Ok(())
    })?;

    if force_diagnose || cfg.stages.diagnose {
        summary.time("diagnose", || {
            let planted = planted_rows(cfg, &data.train)?;
            let report = noise_probe(
                &data.train,
                &feats.train,
                final_oof,
                &thresholds,
                &pcfg.gbdt,
                planted.as_ref(),
            )?;
            fs::write(cfg.output_dir.join(NOISE_FILE), report.to_string())?;
            Ok(())
        })?;
    }
    if cfg.stages.scatter {
        let e = feats
            .embeddings
            .as_ref()
            .expect("validated: scatter needs embeddings");
        summary.time("plot", || scatter(cfg, e, &data.original))?;
    }
    Ok(())
}

fn scatter(cfg: &RunConfig, e: &EmbeddingMatrix, original: &Corpus) -> anyhow::Result<()> {
    let labels = original.labels()?;
    let flagged = planted_rows(cfg, original)?.map(|p| {
        (0..original.len())
            .map(|i| p.contains(&i))
            .collect::<Vec<_>>()
    });
    pca_scatter_export(
        e,
        &labels,
        flagged.as_deref(),
        &cfg.output_dir.join(SCATTER_FILE),
    )?;
    Ok(())
}

fn plot_only(cfg: &RunConfig, summary: &mut RunSummary) -> Result<(), RunError> {
    summary.time("plot", || {
        let path = cfg
            .train_embeddings
            .as_deref()
            .ok_or_else(|| anyhow!("plot needs train_embeddings"))?;
        let corpus = load_corpus_with(train_path(cfg)?, Split::Train, &cfg.registry()?)?;
        let e = load_embeddings(existing(path)?, corpus.len())?;
        scatter(cfg, &e, &corpus)
    })
}

fn csv_line(out: &mut String, id: &str, value: impl std::fmt::Display) {
    // ids may hold commas or quotes
    if id.contains([',', '"', '\n', '\r']) {
        let _ = writeln!(out, "\"{}\",{value}", id.replace('"', "\"\""));
    } else {
        let _ = writeln!(out, "{id},{value}");
    }
}

fn probability_file(ids: impl Iterator<Item = String>, probs: &[f64]) -> String {
    let mut out = String::from("id,probability\n");
    for (id, p) in ids.zip(probs) {
        csv_line(&mut out, &id, p);
    }
    out
}

fn write_outputs(
    cfg: &RunConfig,
    data: &Ingested,
    outcome: &StackOutcome,
    y: &[bool],
    langs: &[LanguageTag],
    thresholds: &ThresholdMap,
) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    let last = outcome.final_stage();
    let ids = || data.train.records().iter().map(|r| r.id.clone());
    fs::write(dir.join(OOF_FILE), probability_file(ids(), &last.oof.probs))?;

    let pred = apply_thresholds(&last.oof.probs, langs, thresholds);
    let report = MetricReport::compute(y, &pred)?;
    let mut metrics = format!(
        "stage={}\naveraging={:?}\n",
        last.name, cfg.pipeline.f1_averaging
    )
    .to_lowercase();
    metrics.push_str(&report.to_string());
    fs::write(dir.join(METRICS_FILE), metrics)?;

    if let (Some(test), Some(probs)) = (&data.test, &last.test) {
        let test_ids = || test.records().iter().map(|r| r.id.clone());
        fs::write(
            dir.join(PREDICTIONS_FILE),
            probability_file(test_ids(), probs),
        )?;
        if cfg.stages.thresholds {
            let labels = apply_thresholds(probs, &test.languages(), thresholds);
            let mut out = String::from("id,label\n");
            for (id, l) in test_ids().zip(labels) {
                csv_line(&mut out, &id, l as u8);
            }
            fs::write(dir.join(LABELS_FILE), out)?;
        }
    }
    Ok(())
}

fn run_report(
    cfg: &RunConfig,
    data: &Ingested,
    feats: &Featurized,
    outcome: &StackOutcome,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed={}", cfg.seed);
    let _ = writeln!(out, "train_rows={}", data.train.len());
    let _ = writeln!(
        out,
        "test_rows={}",
        data.test.as_ref().map_or(0, Corpus::len)
    );
    let _ = writeln!(out, "feature_width={}", feats.train.width());
    let _ = writeln!(out, "folds={}", cfg.pipeline.k);
    let fallback: Vec<&str> = outcome.fallback.iter().map(LanguageTag::as_str).collect();
    let _ = writeln!(out, "fallback={}", fallback.join(","));
    for s in &outcome.stages {
        let _ = writeln!(
            out,
            "stage={} oof_f1={:.6} wall_ms={}",
            s.name,
            s.f1,
            s.wall.as_millis()
        );
    }
    if let Some(trace) = &outcome.pseudo_trace {
        for step in trace {
            let _ = writeln!(
                out,
                "pseudo_iteration={} oof_f1={:.6} width={}",
                step.iteration, step.f1, step.width
            );
        }
    }
    if let Some(w) = &outcome.ensemble_weights {
        let parts: Vec<String> = w
            .weights
            .iter()
            .map(|(m, v)| format!("{m}:{v:.6}"))
            .collect();
        let _ = writeln!(out, "ensemble_weights={}", parts.join(","));
    }
    let _ = writeln!(out, "final_stage={}", outcome.final_stage().name);
    out
}

fn synth(cfg: &RunConfig, summary: &mut RunSummary) -> Result<(), RunError> {
    summary.time("synth", || {
        let dir = &cfg.output_dir;
        let sc = &cfg.synth;
        let gen = synthesize_corpus(&abuse_core::corpus::SynthConfig {
            seed: cfg.seed,
            ..sc.corpus.clone()
        })?;
        let mut buf = Vec::new();
        write_corpus(&gen.corpus, &mut buf)?;
        fs::write(dir.join("train.csv"), buf)?;
        let flips: String = gen
            .flipped_ids()
            .iter()
            .map(|id| format!("{id}\n"))
            .collect();
        fs::write(dir.join("flips.txt"), flips)?;
        if sc.embedding_dim > 0 {
            let e = synthesize_embeddings(
                &gen.true_labels,
                sc.embedding_dim,
                sc.embedding_separation,
                cfg.seed,
            );
            fs::write(dir.join("train.emb"), write_embeddings(&e))?;
        }
        if sc.test_n > 0 {
            let test_cfg = abuse_core::corpus::SynthConfig {
                n: sc.test_n,
                noise_rate: 0.0,
                seed: cfg.seed.wrapping_add(1),
                split: Split::Test,
                id_prefix: format!("{}t", sc.corpus.id_prefix),
                ..sc.corpus.clone()
            };
            let test = synthesize_corpus(&test_cfg)?;
            let unlabeled = Corpus::new(
                test.corpus
                    .records()
                    .iter()
                    .map(|r| CommentRecord {
                        label: None,
                        ..r.clone()
                    })
                    .collect(),
                Split::Test,
            )?;
            let mut buf = Vec::new();
            write_corpus(&unlabeled, &mut buf)?;
            fs::write(dir.join("test.csv"), buf)?;
            let mut truth = String::from("id,label\n");
            for r in test.corpus.records() {
                csv_line(&mut truth, &r.id, r.label.map_or(0, u8::from));
            }
            fs::write(dir.join("test_truth.csv"), truth)?;
            if sc.embedding_dim > 0 {
                let e = synthesize_embeddings(
                    &test.true_labels,
                    sc.embedding_dim,
                    sc.embedding_separation,
                    cfg.seed,
                );
                fs::write(dir.join("test.emb"), write_embeddings(&e))?;
            }
        }
        Ok(())
    })
}

/// Applies command-line overrides on top of a parsed config.
pub fn apply_overrides(cfg: &mut RunConfig, output_dir: Option<PathBuf>, seed: Option<u64>) {
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
}
