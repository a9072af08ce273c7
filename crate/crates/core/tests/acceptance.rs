//! Acceptance criteria 1-9. Each test prints one PASS/FAIL line to stderr
//! (bypassing output capture) and then fails if the criterion failed.

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bubble_audit::annotation::{cohens_kappa, AgreementMatrix, LabelStore, ResolutionPolicy, ResolvedLabels};
use bubble_audit::classifier::evaluation::EvaluationReport;
use bubble_audit::classifier::features::Featurizer;
use bubble_audit::classifier::network::{softmax_rows, DropoutMasks, Mlp};
use bubble_audit::classifier::{
    apply_threshold, cross_validate, train, ClassSetup, TrainConfig, DECISION_THRESHOLD, HIDDEN_LAYERS,
    PROMOTING_CLASS,
};
use bubble_audit::domain::{map_code_to_stance, CodeMapping, Minutes, SnapshotKind, Stance, VideoId};
use bubble_audit::metrics::{diff_to_linear, normalized_score, serp_ms, ScoreSeries, ScoredList};
use bubble_audit::platform::{generate_catalog, Catalog, CatalogConfig, PersonalizationConfig, Session};
use bubble_audit::stats::{
    bonferroni, evaluate_hypotheses, mann_whitney_u, EvaluationConfig, Hypothesis, Modality, PMethod, Verdict,
};
use bubble_audit::workflow::{execute_study, simulate_study, PersonalizationSpec, StudyConfig, StudyRun};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let outcome = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(r) => r,
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d.as_str()),
        Err(e) => ("FAIL", e.as_str()),
    };
    let line = format!("criterion {n} [{name}]: {status} ({detail}; {:.2?})\n", start.elapsed());
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    if let Err(e) = outcome {
        panic!("criterion {n} failed: {e}");
    }
}

fn stance_of(v: i8) -> Stance {
    match v {
        1 => Stance::Promoting,
        -1 => Stance::Debunking,
        _ => Stance::Neutral,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn criterion_1_metric_exactness() {
    criterion(1, "metric exactness", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.random_range(1..=30usize);
            let raw: Vec<i8> = (0..n).map(|_| rng.random_range(-1..=1i8)).collect();
            let list: ScoredList = raw.iter().map(|&v| stance_of(v)).collect();

            let mut ns_oracle = 0.0;
            for &v in &raw {
                ns_oracle += v as f64;
            }
            ns_oracle /= n as f64;
            let ns = normalized_score(&list).map_err(|e| e.to_string())?;
            ensure!(close(ns, ns_oracle), "NS {ns} vs oracle {ns_oracle} on {raw:?}");

            let (mut num, mut den) = (0.0, 0.0);
            for (pos, &v) in raw.iter().enumerate() {
                let weight = (n - pos) as f64;
                num += v as f64 * weight;
                den += weight;
            }
            let serp = serp_ms(&list).map_err(|e| e.to_string())?;
            ensure!(close(serp, num / den), "SERP-MS {serp} vs oracle {} on {raw:?}", num / den);
        }
        for _ in 0..1000 {
            let len = rng.random_range(2..=90u32);
            let offset = rng.random_range(0..5u32);
            let values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let series =
                ScoreSeries::new(values.iter().enumerate().map(|(i, v)| (offset + i as u32, *v)).collect()).unwrap();
            let s = rng.random_range(0..len - 1);
            let e = rng.random_range(s + 1..len);
            let (ys, ye) = (values[s as usize], values[e as usize]);
            let mut oracle = 0.0;
            for i in s..=e {
                let line = ys + (ye - ys) * (i - s) as f64 / (e - s) as f64;
                oracle += values[i as usize] - line;
            }
            let got = diff_to_linear(&series, offset + s, offset + e).map_err(|err| err.to_string())?;
            ensure!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "DTL {got} vs oracle {oracle}");
        }
        let worked = serp_ms(&ScoredList::new(vec![Stance::Promoting, Stance::Neutral, Stance::Debunking])).unwrap();
        ensure!(worked == 1.0 / 3.0, "SERP-MS([1,0,-1]) = {worked}");
        let series = ScoreSeries::new(vec![(0, 0.0), (1, -1.0), (2, -1.0)]).unwrap();
        let worked = diff_to_linear(&series, 0, 2).unwrap();
        ensure!(worked == -0.5, "DIFF-TO-LINEAR([0,-1,-1]) = {worked}");
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
        Ok("3000 oracle cases, worked values exact".into())
    });
}

#[test]
fn criterion_2_code_mapping() {
    criterion(2, "code mapping", || {
        let expected = |code: i64| match code {
            -1 | 2 | 9 | 10 => Some(CodeMapping::Stance(Stance::Debunking)),
            1 | 4 => Some(CodeMapping::Stance(Stance::Promoting)),
            0 | 3 | 5 => Some(CodeMapping::Stance(Stance::Neutral)),
            6..=8 => Some(CodeMapping::Discarded),
            _ => None,
        };
        let mut admissible = 0;
        for code in -1000..=1000i64 {
            let got = map_code_to_stance(code).ok();
            ensure!(got == expected(code), "code {code}: {got:?}");
            admissible += got.is_some() as u32;
        }
        ensure!(admissible == 12, "{admissible} admissible codes");
        for code in [i64::MIN, i64::MAX, -2, 11] {
            ensure!(map_code_to_stance(code).is_err(), "code {code} accepted");
        }
        Ok("12 codes mapped, everything else rejected".into())
    });
}

/// Mann-Whitney oracle by pair counting and full enumeration of group splits.
fn enumeration_p(a: &[f64], b: &[f64]) -> (f64, f64) {
    let u_of = |x: &[f64], y: &[f64]| x.iter().map(|xi| y.iter().filter(|yj| xi > *yj).count()).sum::<usize>();
    let observed = u_of(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, total) = (a.len(), pooled.len());
    let (mut le, mut ge, mut splits) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let x: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
        let y: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
        let u = u_of(&x, &y);
        splits += 1;
        le += (u <= observed) as u64;
        ge += (u >= observed) as u64;
    }
    let p = (2 * le.min(ge)) as f64 / splits as f64;
    (observed as f64, p.min(1.0))
}

#[test]
fn criterion_3_mann_whitney() {
    criterion(3, "Mann-Whitney U", || {
        let mut configurations = 0;
        for total in 2..=8usize {
            for n in 1..total {
                for mask in 0u32..(1 << total) {
                    if mask.count_ones() as usize != n {
                        continue;
                    }
                    let a: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i as f64).collect();
                    let b: Vec<f64> = (0..total).filter(|i| mask >> i & 1 == 0).map(|i| i as f64).collect();
                    let (u, p) = enumeration_p(&a, &b);
                    let got = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                    ensure!(got.method == PMethod::Exact, "{a:?} vs {b:?} not exact");
                    ensure!(got.u == u && got.p_value == p, "{a:?} vs {b:?}: U {} p {} vs {u} {p}", got.u, got.p_value);
                    configurations += 1;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..8) as f64).collect();
            let b: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0..8) as f64).collect();
            let (ab, ba) = (mann_whitney_u(&a, &b).unwrap(), mann_whitney_u(&b, &a).unwrap());
            let nm = (a.len() * b.len()) as f64;
            ensure!(ab.u + ba.u == nm, "U(a,b)+U(b,a) = {} != {nm}", ab.u + ba.u);
        }
        let corrected = bonferroni(Ratio::new(5, 100), 5).map_err(|e| e.to_string())?;
        ensure!(corrected == Ratio::new(1, 100), "Bonferroni(0.05, 5) = {corrected}");
        Ok(format!("{configurations} tie-free configurations, 1000 symmetry pairs"))
    });
}

fn study(master: u64, preset: &str) -> StudyRun {
    let config = StudyConfig { seed: master, personalization: PersonalizationSpec::preset(preset), ..Default::default() };
    simulate_study(&config).expect("study runs")
}

fn truth(catalog: &Catalog) -> ResolvedLabels {
    LabelStore::new(catalog.truth_labels()).unwrap().resolve_all(&ResolutionPolicy::default())
}

fn strict_config() -> EvaluationConfig {
    EvaluationConfig { alpha: Ratio::new(1, 100), ..Default::default() }
}

const PAIRWISE: [Hypothesis; 3] = [Hypothesis::H2_0, Hypothesis::H2_1, Hypothesis::H2_2];

#[test]
fn criterion_4_null_control() {
    criterion(4, "inert null control", || {
        let start = Instant::now();
        let mut tested = 0;
        for master in 101..=105u64 {
            let run = study(master, "inert");
            ensure!(run.failed() == 0, "seed {master}: {} failed runs", run.failed());
            ensure!(run.outcomes.len() == 50, "seed {master}: {} runs", run.outcomes.len());
            let ev = evaluate_hypotheses(&run.records(), &truth(&run.catalog), &strict_config())
                .map_err(|e| e.to_string())?;
            for v in ev.verdicts.iter().filter(|v| PAIRWISE.contains(&v.hypothesis)) {
                tested += 1;
                ensure!(
                    v.verdict != Verdict::Supported,
                    "seed {master}: {} {:?} {} supported (p={:?})",
                    v.hypothesis,
                    v.topic,
                    v.modality,
                    v.p_value
                );
            }
        }
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
        Ok(format!("0 of {tested} pairwise verdicts supported over 5 seeds"))
    });
}

#[test]
fn criterion_5_bubble_dynamics() {
    criterion(5, "contextual bubble dynamics", || {
        let start = Instant::now();
        let mut negative_phase2 = 0;
        let mut drops = Vec::new();
        for master in 101..=105u64 {
            let run = study(master, "contextual");
            ensure!(run.failed() == 0, "seed {master}: {} failed runs", run.failed());
            let ev = evaluate_hypotheses(&run.records(), &truth(&run.catalog), &strict_config())
                .map_err(|e| e.to_string())?;
            for modality in [Modality::Recommendations, Modality::Home] {
                for h in PAIRWISE {
                    let v = ev.find(h, None, modality)[0];
                    ensure!(
                        v.verdict == Verdict::Supported,
                        "seed {master}: {h} {modality} {} (means {:.3} -> {:.3}, p={:?})",
                        v.verdict.name(),
                        v.mean_a,
                        v.mean_b,
                        v.p_value
                    );
                }
            }
            for v in ev.verdicts.iter().filter(|v| v.hypothesis == Hypothesis::H2_0 && v.modality == Modality::Search) {
                ensure!(v.verdict != Verdict::Supported, "seed {master}: search H2.0 supported for {:?}", v.topic);
            }
            let dtl = ev
                .find(Hypothesis::H2_3, None, Modality::Recommendations)
                .into_iter()
                .find(|v| v.comparison == "phase2")
                .ok_or("no phase-2 DIFF-TO-LINEAR")?;
            negative_phase2 += (dtl.statistic < 0.0) as u32;
            for modality in [Modality::Recommendations, Modality::Home] {
                let series = &ev.overall_series[&modality];
                let at = |i: u32| series.iter().find(|p| p.watch_index == i).map(|p| p.mean);
                let (Some(before), Some(after)) = (at(40), at(41)) else {
                    return Err(format!("seed {master}: {modality} series lacks index 40 or 41"));
                };
                ensure!(after < before, "seed {master}: {modality} NS {before:.4} at 40 -> {after:.4} at 41");
                drops.push(before - after);
            }
        }
        ensure!(negative_phase2 >= 4, "phase-2 DIFF-TO-LINEAR negative in {negative_phase2} of 5 seeds");
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
        let smallest = drops.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(format!("phase-2 DTL negative in {negative_phase2}/5 seeds, smallest 40->41 drop {smallest:.3}"))
    });
}

#[test]
fn criterion_6_scenario_arithmetic() {
    criterion(6, "scenario arithmetic", || {
        let run = study(7, "inert");
        let records = run.records();
        ensure!(records.len() == 50, "{} records", records.len());
        let (mut watches, mut searches) = (0, 0);
        for r in &records {
            let counts = (
                r.watch_sequence.len(),
                r.snapshots_of(SnapshotKind::Recommendation).count(),
                r.snapshots_of(SnapshotKind::Home).count(),
                r.snapshots_of(SnapshotKind::Search).count(),
            );
            ensure!(counts == (80, 80, 81, 205), "run {}: (watch, rec, home, search) = {counts:?}", r.run_id);
            watches += counts.0;
            searches += counts.3;
        }
        ensure!((watches, searches) == (4000, 10250), "study totals {watches} watches, {searches} searches");
        Ok("80/80/81/205 per run, 4000 watches and 10250 searches per study".into())
    });
}

/// Three-class corpus whose classes use disjoint vocabularies.
fn separable_corpus(per_class: usize, seed: u64) -> Vec<(bubble_audit::classifier::features::FeatureVector, Stance)> {
    let featurizer = Featurizer::default();
    let vocab = |prefix: &str| (0..20).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let classes = [
        (Stance::Promoting, vocab("hoax")),
        (Stance::Neutral, vocab("report")),
        (Stance::Debunking, vocab("science")),
    ];
    let filler = vocab("filler");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::new();
    for (stance, words) in &classes {
        for _ in 0..per_class {
            let mut draw = |own: usize, shared: usize| {
                let mut tokens: Vec<&str> = (0..own).map(|_| words[rng.random_range(0..words.len())].as_str()).collect();
                tokens.extend((0..shared).map(|_| filler[rng.random_range(0..filler.len())].as_str()));
                tokens.join(" ")
            };
            let title = draw(5, 3);
            let transcript = draw(25, 15);
            let comments = vec![draw(4, 2), draw(4, 2)];
            let fv = featurizer.encode(&[title.as_str()], &transcript, &comments).unwrap();
            corpus.push((fv, *stance));
        }
    }
    corpus
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn criterion_7_classifier_properties() {
    criterion(7, "classifier properties", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let width = rng.random_range(2..=5usize);
            let scale = [1.0, 50.0, 1000.0][rng.random_range(0..3)];
            let logits = Array2::from_shape_simple_fn((1, width), || rng.random_range(-scale..=scale));
            let p = softmax_rows(&logits);
            let sum: f64 = p.iter().sum();
            ensure!((sum - 1.0).abs() < 1e-12 && p.iter().all(|v| (0.0..=1.0).contains(v)), "softmax off simplex: {p:?}");
        }

        let width = Featurizer::default().width();
        let mut sizes = vec![width];
        sizes.extend_from_slice(&HIDDEN_LAYERS);
        sizes.push(3);
        let mut net = Mlp::new(&sizes, &mut rng);
        let x = Array2::from_shape_simple_fn((6, width), || rng.random_range(0.0..0.2));
        let targets = [0, 1, 2, 2, 1, 0];
        let masks = DropoutMasks::sample(&net, 6, 0.5, &mut rng);
        let mut worst: f64 = 0.0;
        for masks in [None, Some(&masks)] {
            let (_, g) = net.loss_and_gradients(x.view(), &targets, masks);
            let analytic = g.flatten();
            let count = net.parameter_count();
            let eps = 1e-6;
            for _ in 0..400 {
                let i = rng.random_range(0..count);
                let orig = *net.parameter_mut(i);
                *net.parameter_mut(i) = orig + eps;
                let up = net.loss(x.view(), &targets, masks);
                *net.parameter_mut(i) = orig - eps;
                let down = net.loss(x.view(), &targets, masks);
                *net.parameter_mut(i) = orig;
                let numeric = (up - down) / (2.0 * eps);
                let err = relative_error(analytic[i], numeric);
                ensure!(err <= 1e-4, "parameter {i}: analytic {} vs numeric {numeric}", analytic[i]);
                worst = worst.max(err);
            }
        }

        let corpus = separable_corpus(200, 70);
        let config = TrainConfig::default();
        let report = cross_validate(&corpus, ClassSetup::ThreeClass, Featurizer::default(), 5, 71, &config)
            .map_err(|e| e.to_string())?;
        ensure!(report.accuracy >= 0.95, "5-fold accuracy {}", report.accuracy);

        let names = ClassSetup::ThreeClass.class_names();
        let mut actual = vec![0usize; 405];
        actual.extend(std::iter::repeat_n(2usize, 758));
        actual.extend(std::iter::repeat_n(1usize, 1459));
        let majority = EvaluationReport::from_predictions(names, &actual, &vec![1; actual.len()], 1);
        ensure!(majority.accuracy == 1459.0 / 2622.0, "majority accuracy {}", majority.accuracy);

        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let (class, confidence) = apply_threshold(&probs, DECISION_THRESHOLD);
            ensure!(class != PROMOTING_CLASS || confidence >= 0.7, "promoting at {confidence}");
        }
        let model = train(&corpus, ClassSetup::ThreeClass, Featurizer::default(), 72, &config).map_err(|e| e.to_string())?;
        let vectors: Vec<_> = corpus.iter().map(|(v, _)| v.clone()).collect();
        for p in model.predict_batch(&vectors).map_err(|e| e.to_string())? {
            ensure!(p.stance != Stance::Promoting || p.confidence >= 0.7, "promoting prediction at {}", p.confidence);
        }
        Ok(format!("accuracy {:.4}, worst gradient relative error {worst:.2e}", report.accuracy))
    });
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        out.push((rel, std::fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

enum Op {
    Search(String),
    Watch(VideoId),
    Home,
}

fn random_ops(catalog: &Catalog, rng: &mut ChaCha8Rng, len: usize) -> Vec<Op> {
    (0..len)
        .map(|_| match rng.random_range(0..3) {
            0 => {
                let topic = &catalog.topics()[rng.random_range(0..catalog.topics().len())];
                Op::Search(topic.queries[rng.random_range(0..topic.queries.len())].clone())
            }
            1 => Op::Watch(catalog.videos()[rng.random_range(0..catalog.len())].video_id.clone()),
            _ => Op::Home,
        })
        .collect()
}

fn apply(session: &mut Session, ops: &[Op]) -> Vec<Vec<VideoId>> {
    ops.iter()
        .flat_map(|op| match op {
            Op::Search(q) => vec![session.search(q, 20).unwrap()],
            Op::Watch(v) => {
                let (recs, home) = session.watch(v, Minutes::whole(5), 20).unwrap();
                vec![recs, home]
            }
            Op::Home => vec![session.home(20)],
        })
        .collect()
}

#[test]
fn criterion_8_determinism_and_reset() {
    criterion(8, "determinism and reset", || {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let config = StudyConfig { seed: 808, ..Default::default() };
        execute_study(&StudyConfig { workers: 1, ..config.clone() }, a.path()).map_err(|e| e.to_string())?;
        execute_study(&StudyConfig { workers: 6, ..config }, b.path()).map_err(|e| e.to_string())?;
        let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
        ensure!(fa.len() == 54, "{} files written", fa.len());
        for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
            ensure!(na == nb && ba == bb, "{na} differs between identical seeds");
        }

        let mut cfg = CatalogConfig { seed: 8, general_videos: 60, ..Default::default() };
        cfg.topics.truncate(3);
        let catalog = Arc::new(generate_catalog(&cfg).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for case in 0..100u64 {
            let prefix_len = rng.random_range(0..25);
            let (prefix, ops) = (random_ops(&catalog, &mut rng, prefix_len), random_ops(&catalog, &mut rng, 20));
            let mut fresh = Session::new(catalog.clone(), PersonalizationConfig::contextual(), "s", case);
            let mut used = Session::new(catalog.clone(), PersonalizationConfig::contextual(), "s", case);
            apply(&mut used, &prefix);
            used.reset_history();
            ensure!(used.history_len() == 0, "case {case}: history survives reset");
            ensure!(apply(&mut fresh, &ops) == apply(&mut used, &ops), "case {case}: reset session diverges");
        }
        Ok("54 identical files, 100 reset sequences equivalent".into())
    });
}

#[test]
fn criterion_9_cohens_kappa() {
    criterion(9, "Cohen's kappa", || {
        let perfect = AgreementMatrix::new(
            vec!["-1".into(), "0".into(), "1".into()],
            vec![vec![7, 0, 0], vec![0, 3, 0], vec![0, 0, 11]],
        )
        .unwrap();
        let k = cohens_kappa(&perfect).map_err(|e| e.to_string())?;
        ensure!(k == 1.0, "perfect agreement gives {k}");
        let hand = AgreementMatrix::from_pairs(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        let k = cohens_kappa(&hand).map_err(|e| e.to_string())?;
        ensure!(k == 0.0, "hand example gives {k}");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        let k = cohens_kappa(&AgreementMatrix::from_pairs(&a, &b).unwrap()).map_err(|e| e.to_string())?;
        ensure!(k.abs() < 0.05, "independent annotators give {k}");
        Ok(format!("random-label kappa {k:.4}"))
    });
}
