//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dgn_core::corpus::{
    generate_synthetic_corpus, Corpus, FeatureMap, Instance, LabelMap, Split, SyntheticSpec,
};
use dgn_core::graph::build_graph;
use dgn_core::iodp::{
    build_prototype, cooccurrence_prob, count, posterior, CooccurrenceMode, Dispersion, DispersionMetric,
    Posterior, Prototype,
};
use dgn_core::model::{evaluate, train, AblationMode, DgnModel, TrainConfig};
use dgn_core::nn::{gcn_forward, propagate, Matrix};
use dgn_core::oracle::fixtures::{random_label_corpus, random_prototype, random_tiny_case, toy_corpus};
use dgn_core::oracle::{compare, fd_gradient, naive_prototype};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

const MODES: [CooccurrenceMode; 2] = [CooccurrenceMode::NonIndependent, CooccurrenceMode::Independent];
const CORPORA: u64 = 60;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn metrics() -> Vec<DispersionMetric> {
    Dispersion::ALL
        .into_iter()
        .flat_map(|kind| [false, true].map(|passivate| DispersionMetric { kind, passivate }))
        .collect()
}

fn corpora() -> impl Iterator<Item = Corpus> {
    (0..CORPORA).map(|seed| random_label_corpus(seed, 5, 8, 20))
}

fn iodp_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for corpus in corpora() {
        for mode in MODES {
            for metric in metrics() {
                let fast = build_prototype(&corpus, mode, metric).map_err(|e| e.to_string())?;
                let slow = naive_prototype(&corpus, mode, metric).map_err(|e| e.to_string())?;
                worst = worst.max(compare(fast.omega().as_slice(), slow.omega().as_slice()).max_abs);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-12, "max abs deviation {worst:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "{CORPORA} corpora x 2 modes x 6 metrics, max |Δ| = {worst:e}, {elapsed:.2?}"
    ))
}

fn posterior_normalization() -> Check {
    let (mut pairs, mut worst) = (0usize, 0.0f64);
    for corpus in corpora() {
        let counts = count(&corpus).map_err(|e| e.to_string())?;
        let l = corpus.num_objects();
        for mode in MODES {
            for i in 0..l {
                for j in 0..l {
                    let lik: Vec<f64> = (0..corpus.num_classes())
                        .map(|c| cooccurrence_prob(&counts, mode, i, j, c))
                        .collect();
                    if let Posterior::Distribution(p) = posterior(&lik).map_err(|e| e.to_string())? {
                        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
                        pairs += 1;
                    }
                }
            }
        }
    }
    ensure!(pairs > 0, "no pair had evidence");
    ensure!(worst <= 1e-12, "posterior sum off by {worst:e}");
    Ok(format!("{pairs} pairs with evidence, max |Σ−1| = {worst:e}"))
}

fn relabel(corpus: &Corpus, scene: &[usize], object: &[usize]) -> Corpus {
    let instances = corpus
        .instances()
        .iter()
        .map(|inst| {
            let lm = &inst.label_map;
            let labels = lm.labels().iter().map(|&l| object[l as usize] as u16).collect();
            Instance {
                scene_id: scene[inst.scene_id],
                label_map: LabelMap::new(lm.width(), lm.height(), lm.num_objects(), labels).unwrap(),
                feature_map: None,
            }
        })
        .collect();
    Corpus::new(
        corpus.num_classes(),
        corpus.num_objects(),
        instances,
        Split::Train,
    )
    .unwrap()
}

fn omega_structure() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(304);
    let mut worst_asym = 0.0f64;
    for corpus in corpora() {
        let (c, l) = (corpus.num_classes(), corpus.num_objects());
        let bound = ((c - 1) as f64).powf(0.25) + 1e-12;
        for mode in MODES {
            for metric in metrics() {
                let p = build_prototype(&corpus, mode, metric).map_err(|e| e.to_string())?;
                for i in 0..l {
                    for j in 0..l {
                        worst_asym = worst_asym.max((p.get(i, j) - p.get(j, i)).abs());
                        ensure!(p.get(i, j) >= 0.0, "negative Ω[{i}][{j}]");
                        if metric == DispersionMetric::default() {
                            ensure!(
                                p.get(i, j) <= bound,
                                "Ω[{i}][{j}] = {} above {bound}",
                                p.get(i, j)
                            );
                        }
                    }
                }
            }
        }
        let mut pi: Vec<usize> = (0..l).collect();
        pi.shuffle(&mut rng);
        let mut sigma: Vec<usize> = (0..c).collect();
        sigma.shuffle(&mut rng);
        let ids_c: Vec<usize> = (0..c).collect();
        let ids_l: Vec<usize> = (0..l).collect();
        let by_object = relabel(&corpus, &ids_c, &pi);
        let by_scene = relabel(&corpus, &sigma, &ids_l);
        let (k, ko, ks) = (
            count(&corpus).unwrap(),
            count(&by_object).unwrap(),
            count(&by_scene).unwrap(),
        );
        for s in 0..c {
            ensure!(
                k.scene_total(s) == ks.scene_total(sigma[s]),
                "scene totals not permuted"
            );
            for i in 0..l {
                for j in 0..l {
                    ensure!(
                        k.pair_count(s, i, j) == ko.pair_count(s, pi[i], pi[j]),
                        "pair counts not permuted"
                    );
                    ensure!(
                        k.pair_count(s, i, j) == ks.pair_count(sigma[s], i, j),
                        "pair counts moved with scenes"
                    );
                }
            }
        }
        for mode in MODES {
            let metric = DispersionMetric::default();
            let p = build_prototype(&corpus, mode, metric).unwrap();
            let po = build_prototype(&by_object, mode, metric).unwrap();
            let ps = build_prototype(&by_scene, mode, metric).unwrap();
            for i in 0..l {
                for j in 0..l {
                    ensure!(p.get(i, j) == po.get(pi[i], pi[j]), "object relabeling changed Ω");
                }
            }
            let drift = compare(p.omega().as_slice(), ps.omega().as_slice()).max_abs;
            ensure!(drift <= 1e-12, "scene relabeling moved Ω by {drift:e}");
        }
    }
    ensure!(worst_asym <= 1e-12, "asymmetry {worst_asym:e}");
    Ok(format!(
        "{CORPORA} corpora, max asymmetry {worst_asym:e}, permutations exact on counts"
    ))
}

fn toy_exactness() -> Check {
    for mode in MODES {
        let p =
            build_prototype(&toy_corpus(), mode, DispersionMetric::default()).map_err(|e| e.to_string())?;
        let got = (p.get(0, 1), p.get(1, 1), p.get(0, 2));
        ensure!(got == (1.0, 0.0, 0.0), "{mode}: (Ω01, Ω11, Ω02) = {got:?}");
    }
    Ok("Ω[0][1] = 1, Ω[1][1] = 0, Ω[0][2] = 0 in both modes".into())
}

fn graph_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(304);
    let (mut worst_row, mut worst_uniform) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let (w, h, c, l) = (
            rng.random_range(1..=5),
            rng.random_range(1..=5),
            rng.random_range(1..=4),
            rng.random_range(1..=6usize),
        );
        let values = (0..w * h * c).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<u16> = (0..w * h).map(|_| rng.random_range(0..l) as u16).collect();
        let fm = FeatureMap::new(w, h, c, values).unwrap();
        let lm = LabelMap::new(w, h, l, labels.clone()).unwrap();
        let proto = random_prototype(rng.random(), l, 3);
        let g = build_graph(&fm, &lm, &proto).map_err(|e| e.to_string())?;
        for i in 0..w * h {
            worst_row = worst_row.max((g.adjacency.row(i).iter().sum::<f64>() - 1.0).abs());
            for j in 0..w * h {
                let expected = proto.omega()[(labels[i] as usize, labels[j] as usize)];
                ensure!(
                    g.raw[(i, j)] == expected,
                    "case {case}: A0[{i}][{j}] is not the Ω gather"
                );
            }
        }
        let uniform = Prototype::new(
            Matrix::from_vec(l, l, vec![0.5; l * l]).unwrap(),
            CooccurrenceMode::Independent,
            DispersionMetric::default(),
            3,
        )
        .unwrap();
        let gu = build_graph(&fm, &lm, &uniform).unwrap();
        let v = &gu.nodes.features;
        let out = propagate(&gu.adjacency, v).unwrap();
        let mean = v.column_means();
        for i in 0..v.rows() {
            for j in 0..v.cols() {
                worst_uniform = worst_uniform.max((out[(i, j)] - (v[(i, j)] + mean[j]) / 2.0).abs());
            }
        }
    }
    ensure!(worst_row <= 1e-12, "row sum off by {worst_row:e}");
    ensure!(
        worst_uniform <= 1e-12,
        "uniform propagation off by {worst_uniform:e}"
    );
    Ok(format!(
        "100 graphs, max |rowsum−1| = {worst_row:e}, uniform-Ω error {worst_uniform:e}"
    ))
}

/// Relative errors are taken against `max(|analytic|, |numeric|, 1e-2)`:
/// below that scale central differences at h = 1e-6 only resolve round-off.
fn gradient_check() -> Check {
    let start = Instant::now();
    let (mut models, mut worst) = (0usize, 0.0f64);
    for seed in 0..10 {
        for mode in [
            AblationMode::Baseline,
            AblationMode::TrainEvalIodp,
            AblationMode::Full,
        ] {
            for lambda in [0.0, 0.25, 1.0] {
                let case = random_tiny_case(seed, mode, lambda).map_err(|e| e.to_string())?;
                let analytic = case
                    .model
                    .loss_and_gradients(&case.input, case.target)
                    .map_err(|e| e.to_string())?
                    .flatten();
                let mut probe = case.model.clone();
                let numeric = fd_gradient(
                    |p| {
                        probe.set_parameters(p).unwrap();
                        let out = probe.forward(&case.input, true).unwrap();
                        probe.loss(&out, case.target).unwrap().total
                    },
                    &case.model.parameters(),
                    1e-6,
                )
                .map_err(|e| e.to_string())?;
                for (a, n) in analytic.iter().zip(&numeric) {
                    worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-2));
                }
                models += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-6, "relative error {worst:e}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{models} models, max rel err {worst:e}, {elapsed:.2?}"))
}

fn gcn_numerics() -> Check {
    let a = Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]);
    let v = Matrix::from_rows(&[[1.0], [0.0]]);
    let w = Matrix::from_rows(&[[1.0]]);
    let (pre, act) = gcn_forward(&a, &v, &w).map_err(|e| e.to_string())?;
    ensure!(
        pre.as_slice() == [0.75, 0.5],
        "pre-activation {:?}",
        pre.as_slice()
    );
    // the reference values carry six decimals
    let rounded: Vec<String> = act.as_slice().iter().map(|v| format!("{v:.6}")).collect();
    ensure!(rounded == ["0.679179", "0.622459"], "V* = {:?}", act.as_slice());
    let exact = [1.0 / (1.0 + (-0.75f64).exp()), 1.0 / (1.0 + (-0.5f64).exp())];
    let err_exact = compare(act.as_slice(), &exact).max_abs;
    ensure!(err_exact <= 1e-9, "V* off the closed form by {err_exact:e}");
    Ok(format!(
        "pre [0.75, 0.5], V* = [{:.6}, {:.6}]",
        act.as_slice()[0],
        act.as_slice()[1]
    ))
}

fn dgn(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dgn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dgn {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    files
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    dgn(&["gen", "--seed", "304", "--out", &p("a")])?;
    dgn(&["gen", "--seed", "304", "--out", &p("b")])?;
    let (ta, tb) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    ensure!(
        ta.len() == 2 + 2 * 840,
        "unexpected corpus file count {}",
        ta.len()
    );
    ensure!(ta == tb, "generated corpora differ");
    let manifest = p("a/train.manifest");
    dgn(&["iodp", "--manifest", &manifest, "--out", &p("proto.dgnp")])?;
    for run in ["1", "2"] {
        dgn(&[
            "train",
            "--manifest",
            &manifest,
            "--prototype",
            &p("proto.dgnp"),
            "--checkpoint",
            &p(&format!("m{run}.dgnm")),
            "--trace",
            &p(&format!("t{run}.csv")),
        ])?;
    }
    let read = |name: &str| std::fs::read(tmp.path().join(name)).unwrap();
    ensure!(read("m1.dgnm") == read("m2.dgnm"), "checkpoints differ");
    ensure!(read("t1.csv") == read("t2.csv"), "traces differ");
    Ok(format!(
        "{} corpus files and default-flag training reproduced byte for byte",
        ta.len()
    ))
}

fn ablation_trend() -> Check {
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in [304, 305, 306] {
        let spec = SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        };
        let (train_set, test_set) = generate_synthetic_corpus(&spec).map_err(|e| e.to_string())?;
        let proto = build_prototype(
            &train_set,
            CooccurrenceMode::Independent,
            DispersionMetric::default(),
        )
        .map_err(|e| e.to_string())?;
        let config = |mode| TrainConfig {
            mode,
            learning_rate: 0.05,
            seed,
            ..TrainConfig::default()
        };
        let (base, _) =
            train(&train_set, None, &config(AblationMode::Baseline), None).map_err(|e| e.to_string())?;
        let (full, _) =
            train(&train_set, Some(&proto), &config(AblationMode::Full), None).map_err(|e| e.to_string())?;
        let b = evaluate(&base, &test_set, None)
            .map_err(|e| e.to_string())?
            .accuracy
            * 100.0;
        let plug = base.to_eval_only().map_err(|e| e.to_string())?;
        let e = evaluate(&plug, &test_set, Some(&proto))
            .map_err(|e| e.to_string())?
            .accuracy
            * 100.0;
        let f = evaluate(&full, &test_set, Some(&proto))
            .map_err(|e| e.to_string())?
            .accuracy
            * 100.0;
        lines.push(format!("seed {seed}: {b:.2} / {e:.2} / {f:.2}"));
        ensure!(
            (60.0..=90.0).contains(&b),
            "seed {seed}: baseline {b:.2}% outside 60-90%"
        );
        ensure!(
            e >= b - 0.5,
            "seed {seed}: eval-only {e:.2}% below baseline {b:.2}%"
        );
        ensure!(
            b <= e && e <= f,
            "seed {seed}: ordering broken ({b:.2}, {e:.2}, {f:.2})"
        );
        ensure!(f - b >= 5.0, "seed {seed}: full gains only {:.2} points", f - b);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "baseline / eval-only / full: {}; {elapsed:.1?}",
        lines.join("; ")
    ))
}

fn lambda_and_plug_in() -> Check {
    let spec = SyntheticSpec {
        train_per_class: 20,
        test_per_class: 5,
        cells: 4,
        ..SyntheticSpec::default()
    };
    let (train_set, _) = generate_synthetic_corpus(&spec).map_err(|e| e.to_string())?;
    let proto = build_prototype(
        &train_set,
        CooccurrenceMode::Independent,
        DispersionMetric::default(),
    )
    .unwrap();
    let config = TrainConfig {
        lambda: 0.0,
        epochs: 5,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let (model, _) = train(&train_set, Some(&proto), &config, None).map_err(|e| e.to_string())?;
    let init = DgnModel::init(
        AblationMode::Full,
        spec.channels,
        spec.channels,
        7,
        0.0,
        config.seed,
    )
    .unwrap();
    ensure!(model.aux_head() == init.aux_head(), "aux head moved under λ = 0");
    ensure!(model.main_head() != init.main_head(), "main head did not train");
    let base = DgnModel::init(AblationMode::Baseline, spec.channels, spec.channels, 7, 0.25, 1).unwrap();
    let plug = base.to_eval_only().map_err(|e| e.to_string())?;
    let (nb, np) = (base.trainable_parameter_count(), plug.trainable_parameter_count());
    ensure!(
        nb == np && base.parameters() == plug.parameters(),
        "plug-in changed parameters ({nb} vs {np})"
    );
    Ok(format!(
        "aux head untouched at λ = 0; baseline and eval-only both carry {nb} parameters"
    ))
}

fn round_trips() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSpec {
        train_per_class: 3,
        test_per_class: 1,
        ..SyntheticSpec::default()
    };
    let (train_set, _) = generate_synthetic_corpus(&spec).map_err(|e| e.to_string())?;
    let inst = &train_set.instances()[0];
    let proto = build_prototype(
        &train_set,
        CooccurrenceMode::NonIndependent,
        DispersionMetric::default(),
    )
    .unwrap();
    let mut checked = Vec::new();
    let mut check = |name: &str, save: &dyn Fn(&Path), reload: &dyn Fn(&Path, &Path)| -> Result<(), String> {
        let (first, second) = (
            tmp.path().join(format!("1.{name}")),
            tmp.path().join(format!("2.{name}")),
        );
        save(&first);
        reload(&first, &second);
        ensure!(
            std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap(),
            ".{name} bytes changed"
        );
        checked.push(name.to_string());
        Ok(())
    };
    check("dgnl", &|p| inst.label_map.save(p).unwrap(), &|a, b| {
        LabelMap::load(a).unwrap().save(b).unwrap()
    })?;
    let fm = inst.feature_map.clone().unwrap();
    check("dgnf", &|p| fm.save(p).unwrap(), &|a, b| {
        FeatureMap::load(a).unwrap().save(b).unwrap()
    })?;
    check("dgnp", &|p| proto.save(p).unwrap(), &|a, b| {
        Prototype::load(a).unwrap().save(b).unwrap()
    })?;
    for mode in [
        AblationMode::Baseline,
        AblationMode::TrainEvalIodp,
        AblationMode::Full,
    ] {
        let model = DgnModel::init(mode, 16, 5, 7, 0.25, 9).unwrap();
        check("dgnm", &|p| model.save(p).unwrap(), &|a, b| {
            DgnModel::load(a).unwrap().save(b).unwrap()
        })?;
    }
    Ok(format!("byte-identical re-saves: {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("iodp oracle equivalence", iodp_oracle_equivalence),
        ("posterior normalization", posterior_normalization),
        ("omega structure", omega_structure),
        ("toy corpus exactness", toy_exactness),
        ("graph suite", graph_suite),
        ("gradient check", gradient_check),
        ("gcn numerics", gcn_numerics),
        ("determinism", determinism),
        ("ablation trend", ablation_trend),
        ("lambda and plug-and-play", lambda_and_plug_in),
        ("format round-trips", round_trips),
    ];
    let mut failures = 0;
    for (idx, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", idx + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", idx + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
