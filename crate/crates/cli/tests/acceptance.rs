//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every tolerance and budget is pinned
//! below.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use abuse_core::corpus::{
    compose_model_text, prepare_corpus, synthesize_corpus, SynthConfig, TransliteratorSet,
};
use abuse_core::evalx::{
    f1_score, noise_probe, tune_thresholds, unit_grid, Averaging, MetricReport, ThresholdMap,
};
use abuse_core::features::{
    apply_pca, assemble_features, fit_pca, fit_tfidf, metadata_matrix, EmbeddingMatrix,
    MetadataTransform,
};
use abuse_core::gbdt::{fit_gbdt, fit_gbdt_traced, gradient_hessian, logistic_loss};
use abuse_core::pipeline::{
    make_folds, run_stacked, train_oof, train_oof_language_wise, PipelineConfig, StackInputs,
    StackToggles,
};
use abuse_core::{BlockKind, Corpus, Execution, FeatureMatrix, GbdtParams, LanguageTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEAKAGE_BUDGET: Duration = Duration::from_secs(120);
const NUMERICS_BUDGET: Duration = Duration::from_secs(60);
const FLIP_BUDGET: Duration = Duration::from_secs(60);
const NOISE_BUDGET: Duration = Duration::from_secs(300);

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;
const FD_POINTS: usize = 1000;
const SYMMETRY_TOL: f64 = 1e-12;
const FLIP_F1_TOL: f64 = 1e-9;
const NOISE_BRACKET: f64 = 0.06;
const NOISE_MIN_RECALL: f64 = 0.5;
const NOISE_RATES: [f64; 3] = [0.05, 0.10, 0.15];
const ORDERING_SEEDS: u64 = 5;
const ORDERING_MAJORITY: usize = 4;
const TFIDF_TOL: f64 = 1e-9;
const PCA_AXIS_TOL: f64 = 1e-6;
const PCA_EIGEN_TOL: f64 = 1e-6;

type Check = Result<String, String>;
/// Name, optional runtime budget and the check itself.
type Criterion = (&'static str, Option<Duration>, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn features(corpus: &Corpus, max_features: usize, metadata: bool) -> FeatureMatrix {
    let texts: Vec<String> = corpus
        .records()
        .iter()
        .map(|r| compose_model_text(r, 150).unwrap())
        .collect();
    let mut parts = vec![fit_tfidf(&texts, max_features)
        .unwrap()
        .transform(&texts, Execution::Parallel)];
    if metadata {
        parts.push(metadata_matrix(corpus, MetadataTransform::Log1p));
    }
    assemble_features(&parts).unwrap()
}

fn prepared(cfg: &SynthConfig) -> (Corpus, Vec<usize>) {
    let s = synthesize_corpus(cfg).unwrap();
    (
        prepare_corpus(&s.corpus, true, Some(&TransliteratorSet::shipped())),
        s.flipped,
    )
}

fn as_f64(y: &[bool]) -> Vec<f64> {
    y.iter().map(|&b| b as u8 as f64).collect()
}

fn no_leakage() -> Check {
    let cfg = SynthConfig {
        n: 2000,
        noise_rate: 0.1,
        seed: 21,
        ..Default::default()
    };
    let (corpus, _) = prepared(&cfg);
    let x = features(&corpus, 100, true);
    let langs = corpus.languages();
    let folds = make_folds(&corpus, 5, 21).unwrap();
    let y = as_f64(&corpus.labels().unwrap());
    let gbdt = GbdtParams {
        num_trees: 30,
        max_leaves: 15,
        ..Default::default()
    };
    // 350 sends the two smallest languages to the pooled fallback
    let pcfg = PipelineConfig {
        k: 5,
        min_language_samples: 350,
        pseudo_max_iters: 2,
        gbdt,
        ..Default::default()
    };
    let run = |labels: &[f64]| {
        let inputs = StackInputs {
            features: &x,
            labels,
            languages: &langs,
            folds: &folds,
            test: None,
        };
        run_stacked(&inputs, StackToggles::default(), &pcfg).unwrap()
    };
    let base = run(&y);
    let j = 2;
    let mut perturbed = y.clone();
    for r in folds.rows_in(j) {
        perturbed[r] = 1.0 - perturbed[r];
    }
    let other = run(&perturbed);
    ensure(base.stages.len() == 4 && other.stages.len() == 4, || {
        "expected four stages".into()
    })?;
    let rows = folds.rows_in(j);
    for (a, b) in base.stages.iter().zip(&other.stages) {
        let moved = rows
            .iter()
            .filter(|&&r| a.oof.probs[r] != b.oof.probs[r])
            .count();
        ensure(moved == 0, || {
            format!("stage {}: {moved} fold-{j} probabilities changed", a.name)
        })?;
        let (fa, fb) = (
            a.oof.foldwise.as_ref().unwrap(),
            b.oof.foldwise.as_ref().unwrap(),
        );
        ensure(fa[j] == fb[j], || {
            format!("stage {}: fold-{j} stacking inputs changed", a.name)
        })?;
    }
    let names: Vec<&str> = base.stages.iter().map(|s| s.name.as_str()).collect();
    Ok(format!(
        "n=2000 k=5 fold {j} flipped ({} rows); stages {} unchanged",
        rows.len(),
        names.join(",")
    ))
}

fn random_data(n: usize, d: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..n)
        .map(|i| {
            let row = &values[i * d..(i + 1) * d];
            let z = row[0] - row[1] * row[2] + rng.random_range(-0.4..0.4);
            (z > 0.0) as u8 as f64
        })
        .collect();
    (
        FeatureMatrix::single_block(BlockKind::Tfidf, n, d, values).unwrap(),
        y,
    )
}

fn gbdt_numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..FD_POINTS {
        let f: f64 = rng.random_range(-10.0..10.0);
        let pos = rng.random_bool(0.5);
        let (g, h) = gradient_hessian(f, pos);
        let fd_g =
            (logistic_loss(f + FD_STEP, pos) - logistic_loss(f - FD_STEP, pos)) / (2.0 * FD_STEP);
        let fd_h = (gradient_hessian(f + FD_STEP, pos).0 - gradient_hessian(f - FD_STEP, pos).0)
            / (2.0 * FD_STEP);
        worst = worst.max((g - fd_g).abs()).max((h - fd_h).abs());
    }
    ensure(worst <= FD_TOL, || {
        format!("finite-difference error {worst:e}")
    })?;
    for seed in 0..3 {
        let (x, y) = random_data(600, 10, 100 + seed);
        let (_, trace) = fit_gbdt_traced(&x, &y, &GbdtParams::default()).unwrap();
        let rises = trace.train_loss.windows(2).filter(|w| w[1] > w[0]).count();
        ensure(rises == 0, || {
            format!("dataset {seed}: training loss rose {rises} times")
        })?;
    }
    let (x, y) = random_data(500, 20, 7);
    let flipped: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let params = GbdtParams::default();
    let p = fit_gbdt(&x, &y, &params).unwrap().predict(&x).unwrap();
    let q = fit_gbdt(&x, &flipped, &params)
        .unwrap()
        .predict(&x)
        .unwrap();
    let gap = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (a + b - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(gap <= SYMMETRY_TOL, || format!("flip symmetry gap {gap:e}"))?;
    Ok(format!(
        "max fd error {worst:.1e}; loss monotone on 3 datasets; 500x20 symmetry gap {gap:.1e}"
    ))
}

fn label_flip() -> Check {
    let (train, _) = prepared(&SynthConfig {
        n: 1500,
        noise_rate: 0.1,
        seed: 31,
        ..Default::default()
    });
    let (held, _) = prepared(&SynthConfig {
        n: 500,
        noise_rate: 0.0,
        seed: 32,
        id_prefix: "h".into(),
        ..Default::default()
    });
    let texts = |c: &Corpus| -> Vec<String> {
        c.records()
            .iter()
            .map(|r| compose_model_text(r, 150).unwrap())
            .collect()
    };
    let vocab = fit_tfidf(&texts(&train), 300).unwrap();
    let build = |c: &Corpus| {
        let t = vocab.transform(&texts(c), Execution::Parallel);
        assemble_features(&[t, metadata_matrix(c, MetadataTransform::Log1p)]).unwrap()
    };
    let (xt, xh) = (build(&train), build(&held));
    let y = train.labels().unwrap();
    let y_flip: Vec<bool> = y.iter().map(|b| !b).collect();
    let params = GbdtParams::default();
    let m = fit_gbdt(&xt, &as_f64(&y), &params).unwrap();
    let m_flip = fit_gbdt(&xt, &as_f64(&y_flip), &params).unwrap();
    let cut = |p: Vec<f64>| -> Vec<bool> { p.into_iter().map(|v| v >= 0.5).collect() };
    let (pt, pt_flip) = (
        cut(m.predict(&xt).unwrap()),
        cut(m_flip.predict(&xt).unwrap()),
    );
    // macro F1 is symmetric in the two classes; positive-class F1 is not
    let f1 = f1_score(&y, &pt, Averaging::Macro).unwrap();
    let f1_flip = f1_score(&y_flip, &pt_flip, Averaging::Macro).unwrap();
    ensure((f1 - f1_flip).abs() <= FLIP_F1_TOL, || {
        format!("train F1 {f1} vs flipped {f1_flip}")
    })?;
    let (ph, ph_flip) = (
        cut(m.predict(&xh).unwrap()),
        cut(m_flip.predict(&xh).unwrap()),
    );
    let same = ph.iter().zip(&ph_flip).filter(|(a, b)| a == b).count();
    ensure(same == 0, || {
        format!("{same} held-out predictions agree between the two fits")
    })?;
    Ok(format!(
        "train macro F1 {f1:.6} = flipped {f1_flip:.6}; {} held-out labels complementary",
        ph.len()
    ))
}

/// Hand-counted positive-class F1 at every grid point; the highest
/// threshold wins ties.
fn brute_force_threshold(p: &[f64], y: &[bool], steps: usize) -> f64 {
    let mut best = (-1.0, 0.0);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&pi, &yi) in p.iter().zip(y) {
            match (pi >= t, yi) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let d = 2 * tp + fp + fn_;
        let f1 = if d == 0 {
            0.0
        } else {
            (2 * tp) as f64 / d as f64
        };
        if f1 >= best.0 {
            best = (f1, t);
        }
    }
    best.1
}

fn thresholds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let codes = ["hi", "ta", "te", "ml"];
    let n = 2000;
    let langs: Vec<LanguageTag> = (0..n)
        .map(|i| LanguageTag::new(codes[i % 4]).unwrap())
        .collect();
    let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    // language-dependent calibration so per-language optima differ
    let probs: Vec<f64> = (0..n)
        .map(|i| {
            let shift = 0.08 * (i % 4) as f64;
            let base: f64 = if y[i] {
                rng.random_range(0.25..1.0)
            } else {
                rng.random_range(0.0..0.75)
            };
            (base * 0.8 + shift).clamp(0.0, 1.0)
        })
        .collect();
    let step = 0.01;
    let steps = 100;
    assert_eq!(unit_grid(step).unwrap().len(), steps + 1);
    let map = tune_thresholds(&probs, &y, &langs, step, 1).unwrap();
    let global = brute_force_threshold(&probs, &y, steps);
    ensure(map.global_threshold == global, || {
        format!("global {} vs oracle {global}", map.global_threshold)
    })?;
    let mut detail = Vec::new();
    for code in codes {
        let tag = LanguageTag::new(code).unwrap();
        let rows: Vec<usize> = (0..n).filter(|&i| langs[i] == tag).collect();
        let p: Vec<f64> = rows.iter().map(|&i| probs[i]).collect();
        let t: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
        let oracle = brute_force_threshold(&p, &t, steps);
        let got = map.threshold_for(&tag);
        ensure(got == oracle, || {
            format!("{code}: {got} vs oracle {oracle}")
        })?;
        let f1_at = |th: f64| {
            MetricReport::compute(&t, &p.iter().map(|&v| v >= th).collect::<Vec<_>>())
                .unwrap()
                .f1
        };
        ensure(f1_at(got) >= f1_at(0.5), || {
            format!("{code}: tuned F1 below the 0.5 F1")
        })?;
        detail.push(format!("{code}={got:.2}"));
    }
    // F1 is 2/3 at both 0.0 (tp=2, fp=2) and 0.5 (tp=1, fn=1), 0 at 1.0
    let hi = vec![LanguageTag::new("hi").unwrap(); 4];
    let tie = tune_thresholds(
        &[0.8, 0.3, 0.2, 0.1],
        &[true, true, false, false],
        &hi,
        0.5,
        1,
    )
    .unwrap();
    let ok =
        tie.global_threshold == 0.5 && tie.threshold_for(&LanguageTag::new("hi").unwrap()) == 0.5;
    ensure(ok, || format!("two-way tie resolved to {:?}", tie))?;
    Ok(format!(
        "matches exhaustive grid (global={global:.2}, {}); tie -> 0.5",
        detail.join(" ")
    ))
}

fn noise() -> Check {
    let mut lines = Vec::new();
    for (i, &rate) in NOISE_RATES.iter().enumerate() {
        let seed = 50 + i as u64;
        let (corpus, flipped) = prepared(&SynthConfig {
            n: 5000,
            noise_rate: rate,
            seed,
            ..Default::default()
        });
        let x = features(&corpus, 500, true);
        let y = corpus.labels().unwrap();
        let folds = make_folds(&corpus, 5, seed).unwrap();
        let params = GbdtParams {
            num_trees: 50,
            ..Default::default()
        };
        let oof = train_oof(&x, &as_f64(&y), &folds, &params, None)
            .unwrap()
            .oof;
        let planted: BTreeSet<usize> = flipped.into_iter().collect();
        let report = noise_probe(
            &corpus,
            &x,
            &oof,
            &ThresholdMap::default(),
            &params,
            Some(&planted),
        )
        .unwrap();
        let frac = report.misclassified_fraction;
        let recall = report.flip_recall.unwrap();
        ensure((frac - rate).abs() <= NOISE_BRACKET, || {
            format!("rate {rate}: misclassified fraction {frac}")
        })?;
        ensure(recall > NOISE_MIN_RECALL, || {
            format!("rate {rate}: planted-flip recall {recall}")
        })?;
        lines.push(format!("{rate:.2}->{frac:.3} (recall {recall:.3})"));
    }
    Ok(lines.join(", "))
}

fn oof_f1(x: &FeatureMatrix, y: &[bool], probs: &[f64]) -> f64 {
    assert_eq!(x.n_rows(), probs.len());
    f1_score(
        y,
        &probs.iter().map(|&p| p >= 0.5).collect::<Vec<_>>(),
        Averaging::Positive,
    )
    .unwrap()
}

fn ordering() -> Check {
    let params = GbdtParams {
        num_trees: 50,
        ..Default::default()
    };
    let (mut meta_wins, mut lang_wins) = (0, 0);
    let mut deltas = Vec::new();
    for seed in 0..ORDERING_SEEDS {
        // words miss some abusive records, so report counts carry signal
        let cfg = SynthConfig {
            n: 1500,
            noise_rate: 0.05,
            seed: 60 + seed,
            lexicon_coverage: 0.6,
            ..Default::default()
        };
        let (corpus, _) = prepared(&cfg);
        let y = corpus.labels().unwrap();
        let folds = make_folds(&corpus, 5, seed).unwrap();
        let plain = features(&corpus, 500, false);
        let with_meta = features(&corpus, 500, true);
        let f_plain = oof_f1(
            &plain,
            &y,
            &train_oof(&plain, &as_f64(&y), &folds, &params, None)
                .unwrap()
                .oof
                .probs,
        );
        let f_meta = oof_f1(
            &with_meta,
            &y,
            &train_oof(&with_meta, &as_f64(&y), &folds, &params, None)
                .unwrap()
                .oof
                .probs,
        );
        meta_wins += (f_meta >= f_plain) as usize;

        let cfg = SynthConfig {
            n: 1500,
            noise_rate: 0.05,
            seed: 70 + seed,
            conflicting_lexicons: true,
            ..Default::default()
        };
        let (corpus, _) = prepared(&cfg);
        let y = corpus.labels().unwrap();
        let folds = make_folds(&corpus, 5, seed).unwrap();
        let x = features(&corpus, 500, false);
        let pooled = oof_f1(
            &x,
            &y,
            &train_oof(&x, &as_f64(&y), &folds, &params, None)
                .unwrap()
                .oof
                .probs,
        );
        let (lw, _) = train_oof_language_wise(
            &corpus.languages(),
            &x,
            &as_f64(&y),
            &folds,
            &params,
            50,
            None,
        )
        .unwrap();
        let lw = oof_f1(&x, &y, &lw.oof.probs);
        lang_wins += (lw >= pooled) as usize;
        deltas.push(format!("{:+.3}/{:+.3}", f_meta - f_plain, lw - pooled));
    }
    ensure(meta_wins >= ORDERING_MAJORITY, || {
        format!("metadata helped in {meta_wins}/{ORDERING_SEEDS} seeds")
    })?;
    ensure(lang_wins >= ORDERING_MAJORITY, || {
        format!("language-wise helped in {lang_wins}/{ORDERING_SEEDS} seeds")
    })?;
    Ok(format!(
        "metadata {meta_wins}/{ORDERING_SEEDS}, language-wise {lang_wins}/{ORDERING_SEEDS} (deltas meta/lang: {})",
        deltas.join(" ")
    ))
}

fn cli(args: &[&str], config: &Path, threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_abuse-pipeline"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("ABUSE_PIPELINE_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = d.join("synth.json");
    std::fs::write(
        &synth,
        format!(
            r#"{{"output_dir": {:?}, "seed": 5, "synth": {{"corpus": {{"n": 600}}, "test_n": 150}}}}"#,
            d.join("data")
        ),
    )
    .unwrap();
    cli(&["synth"], &synth, "1")?;
    let mut outputs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let cfg = d.join(format!("{run}.json"));
        let body = format!(
            r#"{{"train_path": {:?}, "test_path": {:?}, "output_dir": {:?}, "seed": 9,
                "tfidf": {{"max_features": 150}},
                "pipeline": {{"k": 3, "min_language_samples": 100, "pseudo_max_iters": 2, "gbdt": {{"num_trees": 25}}}}}}"#,
            d.join("data/train.csv"),
            d.join("data/test.csv"),
            d.join(run)
        );
        std::fs::write(&cfg, body).unwrap();
        cli(&["predict"], &cfg, threads)?;
        outputs.push(d.join(run));
    }
    let mut sizes = Vec::new();
    for file in ["predictions.csv", "labels.csv", "oof_predictions.csv"] {
        let a = std::fs::read(outputs[0].join(file)).map_err(|e| format!("{file}: {e}"))?;
        let b = std::fs::read(outputs[1].join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(a == b, || format!("{file} differs between runs"))?;
        sizes.push(format!("{file} {}B", a.len()));
    }
    Ok(format!(
        "1 vs 3 threads byte-identical: {}",
        sizes.join(", ")
    ))
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix;
/// eigenvectors are returned as columns of `v`.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (pk, qk) = (*x, *y);
                    *x = c * pk - s * qk;
                    *y = s * pk + c * qk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i][i]).collect(), v)
}

fn tfidf_pca() -> Check {
    let texts = vec!["a b".to_string(), "a".to_string()];
    let vocab = fit_tfidf(&texts, 10).unwrap();
    let (a, b) = (vocab.index_of("a").unwrap(), vocab.index_of("b").unwrap());
    let idf = |df: f64| (3.0 / (1.0 + df)).ln() + 1.0;
    let m = vocab.transform(&["a a b".to_string()], Execution::Sequential);
    let (ra, rb) = (2.0 * idf(2.0), idf(1.0));
    let norm = (ra * ra + rb * rb).sqrt();
    let err = [
        (vocab.idf(a), idf(2.0)),
        (vocab.idf(b), idf(1.0)),
        (m.get(0, a), ra / norm),
        (m.get(0, b), rb / norm),
    ]
    .iter()
    .map(|(x, y)| (x - y).abs())
    .fold(0.0, f64::max);
    ensure(err <= TFIDF_TOL, || format!("tf-idf error {err:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_val, mut worst_axis): (f64, f64) = (0.0, 0.0);
    for d in 2..=6 {
        let n = 50;
        let values: Vec<f64> = (0..n * d)
            .map(|i| rng.random_range(-1.0..1.0) * (1.0 + (i % d) as f64))
            .collect();
        let x = EmbeddingMatrix::new(n, d, values).unwrap();
        let mean: Vec<f64> = (0..d)
            .map(|j| (0..n).map(|i| x.row(i)[j]).sum::<f64>() / n as f64)
            .collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|p| {
                (0..d)
                    .map(|q| {
                        (0..n)
                            .map(|i| (x.row(i)[p] - mean[p]) * (x.row(i)[q] - mean[q]))
                            .sum::<f64>()
                            / n as f64
                    })
                    .collect()
            })
            .collect();
        let (vals, vecs) = jacobi(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
        let model = fit_pca(&x, d).unwrap();
        for (c, &idx) in order.iter().enumerate() {
            worst_val = worst_val.max((model.explained_variance[c] - vals[idx]).abs());
            let dot: f64 = (0..d).map(|r| model.components[c][r] * vecs[r][idx]).sum();
            worst_axis = worst_axis.max((dot.abs() - 1.0).abs());
        }
        apply_pca(&model, &x).unwrap();
    }
    ensure(worst_val <= PCA_EIGEN_TOL, || {
        format!("eigenvalue error {worst_val:e}")
    })?;
    ensure(worst_axis <= PCA_AXIS_TOL, || {
        format!("axis error {worst_axis:e}")
    })?;
    Ok(format!("tf-idf error {err:.1e}; PCA dim 2..6 eigenvalue error {worst_val:.1e}, axis error {worst_axis:.1e}"))
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 8] = [
        ("no-leakage", Some(LEAKAGE_BUDGET), no_leakage),
        ("gbdt-numerics", Some(NUMERICS_BUDGET), gbdt_numerics),
        ("label-flip", Some(FLIP_BUDGET), label_flip),
        ("threshold-tuning", None, thresholds),
        ("noise-probe", Some(NOISE_BUDGET), noise),
        ("pipeline-ordering", None, ordering),
        ("determinism", None, determinism),
        ("tfidf-pca-oracles", None, tfidf_pca),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let wall = t.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if wall > b => Err(format!("took {wall:.1?}, budget {b:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{wall:.1?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{wall:.1?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
