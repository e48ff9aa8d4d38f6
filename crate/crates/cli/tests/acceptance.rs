//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emopool::aggregate::{
    aggregate_fft_mean, build_video_descriptor, shuffle_frames, AggregationConfig, Aggregator,
};
use emopool::ensemble::{
    class_weights_from_counts, combine_streams, predict, run_ensemble, softmax, EnsembleConfig,
    ScoreMode,
};
use emopool::ingest::{load_manifest, write_manifest};
use emopool::normalize::{rootsift, NormalizationConfig};
use emopool::svm::{
    cross_validate_c, dual_objective_of, fit_stream_model, primal_objective, train_binary_traced,
    CvConfig, LinearSvmModel, SvmTrainConfig,
};
use emopool::synth::{
    generate, margin_suite, oracle_dft, oracle_fft_mean, oracle_svm_subgradient, write_dataset,
    SplitCounts, SynthConfig, SynthDataset,
};
use emopool::{
    EmotionLabel, FrameFeatureSequence, ScoreMatrix, Split, StreamData, VideoDescriptor,
};

const CHALLENGE_TEST_COUNTS: [u64; 7] = [98, 40, 70, 144, 193, 80, 28];
const CHALLENGE_WEIGHTS_2DP: [&str; 7] = ["0.15", "0.10", "0.13", "0.19", "0.21", "0.14", "0.08"];

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("class weights from counts", c1_weights),
        ("descriptor dimensions", c2_dimensions),
        ("rootsift unit norm", c3_rootsift),
        ("permutation invariance", c4_permutation),
        ("DFT pooling vs direct DFT", c5_dft),
        ("dual coordinate descent", c6_solver),
        ("end-to-end synthetic accuracy", c7_end_to_end),
        ("ensembling and class weighting", c8_ensemble),
        ("round trip and determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps this file independent of the distributions crate
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn random_sequence(
    rng: &mut ChaCha8Rng,
    id: &str,
    frames: usize,
    dim: usize,
) -> FrameFeatureSequence {
    let data: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..dim).map(|_| gaussian(rng) * 3.0 + 0.5).collect())
        .collect();
    FrameFeatureSequence::from_frames(id, data).unwrap()
}

fn c1_weights() -> Result<String, String> {
    let start = Instant::now();
    let w = class_weights_from_counts(&CHALLENGE_TEST_COUNTS).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let roots: Vec<f64> = CHALLENGE_TEST_COUNTS
        .iter()
        .map(|&n| (n as f64).sqrt())
        .collect();
    let total: f64 = roots.iter().sum();
    for (c, (&got, root)) in w.as_array().iter().zip(&roots).enumerate() {
        let want = root / total;
        ensure((got - want).abs() <= 1e-12, || {
            format!("class {c}: {got} vs {want}")
        })?;
        let rounded = format!("{got:.2}");
        ensure(rounded == CHALLENGE_WEIGHTS_2DP[c], || {
            format!(
                "class {c} rounds to {rounded}, expected {}",
                CHALLENGE_WEIGHTS_2DP[c]
            )
        })?;
    }
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!(
        "rounded weights {}, computed in {elapsed:?}",
        CHALLENGE_WEIGHTS_2DP.join(" ")
    ))
}

fn c2_dimensions() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases = [
        (
            AggregationConfig::new(vec![Aggregator::Mean, Aggregator::Std], false).unwrap(),
            4096,
            8192,
        ),
        (AggregationConfig::stat_star(), 1024, 3072),
        (AggregationConfig::stat_star_fft(), 1024, 4096),
    ];
    let mut seen = vec![];
    for (cfg, d, want) in cases {
        let seq = random_sequence(&mut rng, "v", 5, d);
        let got = build_video_descriptor(&seq, &cfg)
            .map_err(|e| e.to_string())?
            .dim();
        ensure(got == want && cfg.output_dim(d) == want, || {
            format!("d={d}: got {got}, want {want}")
        })?;
        seen.push(format!("{d}->{got}"));
    }
    Ok(seen.join(", "))
}

fn c3_rootsift() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vectors: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let d = rng.random_range(1..=8192);
            let scale = 10f64.powf(rng.random_range(-6.0..6.0));
            let mut v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng) * scale).collect();
            if v.iter().all(|&x| x == 0.0) {
                v[0] = scale;
            }
            v
        })
        .collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for v in &vectors {
        let r = rootsift(v);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max | |r|_2 - 1 | = {worst:e}"))?;
    ensure(rootsift(&[0.0; 17]).iter().all(|&x| x == 0.0), || {
        "zero vector not mapped to zero".into()
    })?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "max deviation {worst:.1e} over 1000 vectors in {elapsed:?}"
    ))
}

fn c4_permutation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stat = AggregationConfig::stat();
    for v in 0..100 {
        let frames = rng.random_range(2..=40);
        let dim = rng.random_range(1..=16);
        let seq = random_sequence(&mut rng, &format!("v{v}"), frames, dim);
        let base = build_video_descriptor(&seq, &stat).unwrap();
        for _ in 0..10 {
            let shuffled = shuffle_frames(&seq, rng.random());
            let d = build_video_descriptor(&shuffled, &stat).unwrap();
            let same = base
                .features
                .iter()
                .zip(&d.features)
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || {
                format!("video {v}: STAT descriptor changed under a frame shuffle")
            })?;
        }
    }
    // same multiset of frames, different order: fft block must differ
    let fft = AggregationConfig::new(vec![Aggregator::Fft], false).unwrap();
    let a =
        FrameFeatureSequence::from_frames("a", vec![vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]])
            .unwrap();
    let b =
        FrameFeatureSequence::from_frames("b", vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]])
            .unwrap();
    let fa = build_video_descriptor(&a, &fft).unwrap().features[0];
    let fb = build_video_descriptor(&b, &fft).unwrap().features[0];
    ensure(fa != fb, || {
        format!("fft block identical under permutation ({fa})")
    })?;
    Ok(format!(
        "1000 shuffles bit-identical; crafted fft block {fa:.6} vs {fb:.6}"
    ))
}

fn c5_dft() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_fft, mut worst_parseval) = (0.0f64, 0.0f64);
    for v in 0..1000 {
        let frames = rng.random_range(1..=64);
        let dim = rng.random_range(1..=4);
        let seq = random_sequence(&mut rng, &format!("v{v}"), frames, dim);
        let fast = aggregate_fft_mean(&seq);
        let rows: Vec<Vec<f64>> = (0..frames).map(|t| seq.frame(t).to_vec()).collect();
        let slow = oracle_fft_mean(&rows);
        for (f, s) in fast.iter().zip(&slow) {
            worst_fft = worst_fft.max((f - s).abs() / s.abs());
        }
        for j in 0..dim {
            let col = seq.column(j);
            let time: f64 = col.iter().map(|x| x * x).sum();
            let freq: f64 =
                oracle_dft(&col).iter().map(|c| c.norm_sqr()).sum::<f64>() / frames as f64;
            worst_parseval = worst_parseval.max((time - freq).abs() / time);
        }
    }
    ensure(worst_fft <= 1e-9, || {
        format!("fft pooling relative error {worst_fft:e}")
    })?;
    ensure(worst_parseval <= 1e-9, || {
        format!("Parseval relative error {worst_parseval:e}")
    })?;
    Ok(format!(
        "max relative error {worst_fft:.1e}, Parseval {worst_parseval:.1e}"
    ))
}

fn c6_solver() -> Result<String, String> {
    let start = Instant::now();
    let (x, y, _) = margin_suite(200, 10, 6);
    let c = 1.0;
    // near hard-margin problems need more than the default epoch budget
    let cfg = SvmTrainConfig {
        c,
        max_epochs: 20_000,
        ..SvmTrainConfig::default()
    };
    let (sol, trace) = train_binary_traced(&x, &y, &cfg).map_err(|e| e.to_string())?;
    ensure(sol.converged, || {
        format!("no convergence in {} epochs", sol.epochs)
    })?;

    let correct = x
        .iter()
        .zip(&y)
        .filter(|(xi, yi)| emopool::svm::decision_value(&sol.weights, xi) * *yi > 0.0)
        .count();
    ensure(correct * 100 >= 99 * x.len(), || {
        format!("training accuracy {correct}/200")
    })?;

    for pair in trace.windows(2) {
        let (a, b) = (pair[0].dual_objective, pair[1].dual_objective);
        // allow for rounding in the incremental objective
        ensure(b >= a - 1e-12 * (1.0 + a.abs()), || {
            format!("dual decreased from {a} to {b}")
        })?;
    }
    ensure(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)), || {
        "dual variable outside [0, C]".into()
    })?;
    ensure(
        trace.iter().all(|s| s.alpha_min >= 0.0 && s.alpha_max <= c),
        || "epoch trace left [0, C]".into(),
    )?;

    let primal = primal_objective(&x, &y, &sol.weights, c);
    let dual = dual_objective_of(&x, &y, &sol.alpha, true);
    let gap = primal - dual;
    ensure(gap <= 1e-2 * (1.0 + primal.abs()), || {
        format!("duality gap {gap:e} at primal {primal}")
    })?;

    let w_ref = oracle_svm_subgradient(&x, &y, c, true, 100_000, 6);
    let p_ref = primal_objective(&x, &y, &w_ref, c);
    let rel = (primal - p_ref).abs() / p_ref.abs();
    ensure(rel <= 1e-2, || {
        format!("primal {primal} vs subgradient oracle {p_ref} ({rel:.2e} relative)")
    })?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "acc {correct}/200, {} epochs, gap {gap:.1e}, primal {primal:.6} vs oracle {p_ref:.6}, {:?}",
        sol.epochs,
        start.elapsed()
    ))
}

/// Descriptors and labels of one stream for the samples of one split.
fn stream_rows(
    ds: &SynthDataset,
    stream: &str,
    split: Split,
    agg: &AggregationConfig,
) -> (Vec<String>, Vec<VideoDescriptor>, Vec<EmotionLabel>) {
    let mut ids = vec![];
    let mut descs = vec![];
    let mut labels = vec![];
    for s in ds.split(split) {
        let StreamData::Frames(seq) = &s.streams[stream] else {
            panic!("{stream} is not a frame stream")
        };
        ids.push(s.video_id.clone());
        descs.push(build_video_descriptor(seq, agg).unwrap());
        labels.push(s.label.unwrap());
    }
    (ids, descs, labels)
}

fn features(descs: &[VideoDescriptor]) -> Vec<Vec<f64>> {
    descs.iter().map(|d| d.features.clone()).collect()
}

fn accuracy(preds: &[EmotionLabel], truth: &[EmotionLabel]) -> f64 {
    preds.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// CV-selected model for one stream, trained on the train split.
fn fit_with_cv(ds: &SynthDataset, stream: &str, seed: u64) -> LinearSvmModel {
    let agg = AggregationConfig::stat_star();
    let (ids, descs, labels) = stream_rows(ds, stream, Split::Train, &agg);
    let x = features(&descs);
    let base = SvmTrainConfig {
        seed,
        ..SvmTrainConfig::default()
    };
    let cv = CvConfig {
        seed,
        ..CvConfig::default()
    };
    let report = cross_validate_c(
        &ids,
        &x,
        &labels,
        NormalizationConfig::default(),
        &base,
        &cv,
    )
    .unwrap();
    fit_stream_model(
        &x,
        &labels,
        NormalizationConfig::default(),
        &base.with_c(report.best_c),
    )
    .unwrap()
}

fn score_split(
    ds: &SynthDataset,
    model: &LinearSvmModel,
    stream: &str,
    split: Split,
) -> (ScoreMatrix, Vec<EmotionLabel>) {
    let (_, descs, labels) = stream_rows(ds, stream, split, &AggregationConfig::stat_star());
    (model.score_descriptors(&descs).unwrap(), labels)
}

fn c7_end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let cfg = SynthConfig {
        dim: 32,
        class_separation: 10.0,
        within_video_sigma: 1.0,
        frame_sigma: 1.0,
        counts: SplitCounts {
            train: [10; 7],
            val: [5; 7],
            test: [0; 7],
        },
        seed: 7,
        ..SynthConfig::default()
    };
    let run = || {
        let ds = generate(&cfg).unwrap();
        let model = fit_with_cv(&ds, "visual", 7);
        score_split(&ds, &model, "visual", Split::Val)
    };
    let (scores, truth) = run();
    let acc = accuracy(&predict(&scores), &truth);
    ensure(acc >= 0.9, || format!("val accuracy {acc:.4}"))?;
    let (again, _) = run();
    let same = scores
        .rows()
        .iter()
        .flatten()
        .zip(again.rows().iter().flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || {
        "rerun with the same seed changed the scores".into()
    })?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "val accuracy {:.2}% on {} videos, deterministic, {:?}",
        100.0 * acc,
        truth.len(),
        start.elapsed()
    ))
}

fn c8_ensemble() -> Result<String, String> {
    // part 1: three noisy streams, softmax averaging
    let cfg = SynthConfig {
        dim: 16,
        class_separation: 3.0,
        within_video_sigma: 1.0,
        frame_sigma: 1.0,
        counts: SplitCounts {
            train: [20; 7],
            val: [20; 7],
            test: [0; 7],
        },
        streams: vec!["s1".into(), "s2".into(), "s3".into()],
        seed: 8,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let mut per_stream = vec![];
    let mut truth = vec![];
    for name in &cfg.streams {
        let model = fit_with_cv(&ds, name, 8);
        let (scores, labels) = score_split(&ds, &model, name, Split::Val);
        per_stream.push(scores);
        truth = labels;
    }
    let singles: Vec<f64> = per_stream
        .iter()
        .map(|s| accuracy(&predict(s), &truth))
        .collect();
    let combined = combine_streams(&per_stream, &EnsembleConfig::default()).unwrap();
    let ens_acc = accuracy(&predict(&combined), &truth);
    let best_single = singles.iter().cloned().fold(0.0, f64::max);
    ensure(ens_acc >= best_single - 0.01, || {
        format!("ensemble {ens_acc:.4} vs best single {best_single:.4}")
    })?;

    // part 2: test split drawn with the challenge's class counts, ambiguous classes
    let cfg = SynthConfig {
        dim: 16,
        class_separation: 2.0,
        within_video_sigma: 1.0,
        frame_sigma: 1.0,
        counts: SplitCounts {
            train: [40; 7],
            val: [0; 7],
            test: CHALLENGE_TEST_COUNTS.map(|n| n as usize),
        },
        seed: 18,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let model = fit_with_cv(&ds, "visual", 18);
    let (raw, truth) = score_split(&ds, &model, "visual", Split::Test);
    let weights = class_weights_from_counts(&CHALLENGE_TEST_COUNTS).unwrap();
    let streams = std::slice::from_ref(&raw);
    let (_, lib_u) = run_ensemble(streams, &EnsembleConfig::default()).unwrap();
    let weighted_cfg = EnsembleConfig {
        score_mode: ScoreMode::Softmax,
        class_weights: Some(weights),
    };
    let (_, lib_w) = run_ensemble(streams, &weighted_cfg).unwrap();

    // recompute every row by hand: softmax, scale by the class weight, argmax
    let argmax = |row: &[f64; 7]| {
        let mut best = 0;
        for c in 1..7 {
            if row[c] > row[best] {
                best = c;
            }
        }
        EmotionLabel::ALL[best]
    };
    let (mut hits_u, mut hits_w) = (0, 0);
    for (i, row) in raw.rows().iter().enumerate() {
        let p = softmax(row);
        let mut pw = p;
        for (c, v) in pw.iter_mut().enumerate() {
            *v *= weights.as_array()[c];
        }
        let (u, w) = (argmax(&p), argmax(&pw));
        ensure(u == lib_u[i] && w == lib_w[i], || {
            format!("row {i}: library disagrees with recomputation")
        })?;
        hits_u += usize::from(u == truth[i]);
        hits_w += usize::from(w == truth[i]);
    }
    ensure(hits_w >= hits_u, || {
        format!("weighted {hits_w} < unweighted {hits_u} of {}", truth.len())
    })?;
    Ok(format!(
        "singles {:?} -> ensemble {:.4}; test weighted {hits_w}/{n} vs unweighted {hits_u}/{n}",
        singles
            .iter()
            .map(|a| format!("{a:.4}"))
            .collect::<Vec<_>>(),
        ens_acc,
        n = truth.len()
    ))
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn c9_determinism() -> Result<String, String> {
    // synth -> ingest, compared bit for bit
    let cfg = SynthConfig {
        variants: 3,
        variant_sigma: 0.3,
        audio_dim: Some(8),
        counts: SplitCounts {
            train: [3; 7],
            val: [2; 7],
            test: [1; 7],
        },
        seed: 9,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).unwrap();
    let tmp = tempfile::TempDir::new().unwrap();
    let written = write_dataset(&ds, tmp.path(), true).unwrap();
    let manifest = load_manifest(&tmp.path().join("manifest.jsonl")).map_err(|e| e.to_string())?;
    ensure(manifest.entries == written.entries, || {
        "manifest entries differ after reload".into()
    })?;
    let mut values = 0usize;
    for (entry, sample) in manifest.entries.iter().zip(&ds.samples) {
        let loaded = manifest.load_sample(entry).map_err(|e| e.to_string())?;
        for (name, data) in &sample.streams {
            let (a, b): (&[f64], &[f64]) = match (data, &loaded.streams[name]) {
                (StreamData::Frames(x), StreamData::Frames(y)) => {
                    ensure(
                        (x.num_frames(), x.num_variants(), x.dim())
                            == (y.num_frames(), y.num_variants(), y.dim()),
                        || format!("{}: shape changed", sample.video_id),
                    )?;
                    (x.as_slice(), y.as_slice())
                }
                (StreamData::Vector(x), StreamData::Vector(y)) => (x, y),
                _ => return Err(format!("{}: stream kind changed", sample.video_id)),
            };
            ensure(
                a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.to_bits() == q.to_bits()),
                || format!("{} {name}: values changed", sample.video_id),
            )?;
            values += a.len();
        }
        ensure(
            loaded.label == sample.label && loaded.split == sample.split,
            || "label or split changed".into(),
        )?;
    }
    let rewritten = tmp.path().join("again.jsonl");
    write_manifest(&rewritten, &manifest).unwrap();
    ensure(
        fs::read(&rewritten).unwrap() == fs::read(tmp.path().join("manifest.jsonl")).unwrap(),
        || "manifest text changed on rewrite".into(),
    )?;

    // every command, twice, in the same directory
    let work = tempfile::TempDir::new().unwrap();
    let w = work.path();
    let s = |p: &str| w.join(p).to_str().unwrap().to_string();
    fs::write(
        w.join("synth.json"),
        r#"{"dim": 8, "frames_min": 2, "frames_max": 6, "streams": ["face", "scene"], "audio_dim": 4,
            "counts": {"train": [5,5,5,5,5,5,5], "val": [3,3,3,3,3,3,3], "test": [2,2,2,2,2,2,2]}}"#,
    )
    .unwrap();
    fs::write(w.join("pipeline.json"), r#"{"streams": {"face": {}, "scene": {"aggregators": ["mean", "fft"]}, "audio": {}}, "cv": {"folds": 3}}"#).unwrap();
    let manifest = s("data/manifest.jsonl");
    let mut script: Vec<Vec<String>> = vec![
        vec![
            "synth",
            "--config",
            &s("synth.json"),
            "--out",
            &s("data"),
            "--seed",
            "11",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            "aggregate",
            "--manifest",
            &manifest,
            "--config",
            &s("pipeline.json"),
            "--out",
            &s("desc"),
            "--seed",
            "11",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    ];
    for stream in ["face", "scene", "audio"] {
        let common = [
            "--manifest",
            &manifest,
            "--descriptors",
            &s("desc"),
            "--stream",
            stream,
        ];
        let mut cv: Vec<String> = ["cv"]
            .iter()
            .chain(&common)
            .map(|x| x.to_string())
            .collect();
        cv.extend(
            [
                "--config",
                &s("pipeline.json"),
                "--seed",
                "11",
                "--out",
                &s(&format!("cv_{stream}.json")),
            ]
            .map(String::from),
        );
        let mut train: Vec<String> = ["train"]
            .iter()
            .chain(&common)
            .map(|x| x.to_string())
            .collect();
        train.extend(
            [
                "--config",
                &s("pipeline.json"),
                "--seed",
                "11",
                "--splits",
                "train,val",
                "--out",
                &s(&format!("model_{stream}.json")),
            ]
            .map(String::from),
        );
        let mut pred: Vec<String> = ["predict"]
            .iter()
            .chain(&common)
            .map(|x| x.to_string())
            .collect();
        pred.extend(
            [
                "--model",
                &s(&format!("model_{stream}.json")),
                "--splits",
                "test",
                "--out",
                &s(&format!("scores_{stream}.csv")),
                "--predictions",
                &s(&format!("pred_{stream}.csv")),
            ]
            .map(String::from),
        );
        script.extend([cv, train, pred]);
    }
    script.push(
        [
            "weigh",
            "--counts",
            "98,40,70,144,193,80,28",
            "--out",
            &s("weights.csv"),
        ]
        .map(String::from)
        .to_vec(),
    );
    script.push(
        [
            "ensemble",
            "--scores",
            &s("scores_face.csv"),
            "--scores",
            &s("scores_scene.csv"),
            "--scores",
            &s("scores_audio.csv"),
            "--weights",
            &s("weights.csv"),
            "--weights-kind",
            "weights",
            "--out",
            &s("final.csv"),
            "--scores-out",
            &s("final_scores.csv"),
        ]
        .map(String::from)
        .to_vec(),
    );
    script.push(
        [
            "evaluate",
            "--manifest",
            &manifest,
            "--predictions",
            &s("final.csv"),
            "--json",
            &s("report.json"),
        ]
        .map(String::from)
        .to_vec(),
    );

    let run_all = || -> Result<Vec<String>, String> {
        let mut stdout = vec![];
        for args in &script {
            let out = Command::new(env!("CARGO_BIN_EXE_emopool"))
                .args(args)
                .output()
                .unwrap();
            if !out.status.success() {
                return Err(format!(
                    "{} failed: {}",
                    args[0],
                    String::from_utf8_lossy(&out.stderr).trim()
                ));
            }
            stdout.push(String::from_utf8(out.stdout).unwrap());
        }
        Ok(stdout)
    };
    let first_out = run_all()?;
    let first = snapshot(w);
    let second_out = run_all()?;
    let second = snapshot(w);
    ensure(first_out == second_out, || {
        "stdout differs between runs".into()
    })?;
    ensure(first.len() == second.len(), || "different file sets".into())?;
    for (path, bytes) in &first {
        ensure(second.get(path) == Some(bytes), || {
            format!("{} differs between runs", path.display())
        })?;
    }
    Ok(format!(
        "{} videos / {values} values round-tripped; {} commands x2 -> {} files byte-identical",
        ds.samples.len(),
        script.len(),
        first.len()
    ))
}
