//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use objlane::em_fit::{fit, EmConfig};
use objlane::geometry::{BezierCurve, LaneGraph, RegionOfInterest, Vec2};
use objlane::io::{write_json, GraphFile, LogitsFile, FORMAT_VERSION};
use objlane::losses::{clustering_loss, clustering_loss_grad, LogitMatrix, OUTLIER_WEIGHT};
use objlane::matching::{hungarian, match_graphs};
use objlane::matrix::Matrix;
use objlane::membership::{membership_accuracy, target_membership, true_membership, MembershipMatrix};
use objlane::metrics::{connectivity_f, evaluate};
use objlane::objects::DetectionBox;
use objlane::pipeline::{build_labels, descend_curves, DescentConfig};
use objlane::scenegen::{generate_scene, layout, perturb_graph, Pattern, Scene, SceneSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

/// Minimum total over all injective assignments of the smaller side.
fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    fn go(cost: &[Vec<f64>], r: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64, transpose: bool) {
        let (n_outer, n_inner) = if transpose {
            (cost[0].len(), cost.len())
        } else {
            (cost.len(), cost[0].len())
        };
        if r == n_outer {
            *best = best.min(acc);
            return;
        }
        for c in 0..n_inner {
            if !used[c] {
                used[c] = true;
                let v = if transpose { cost[c][r] } else { cost[r][c] };
                go(cost, r + 1, used, acc + v, best, transpose);
                used[c] = false;
            }
        }
    }
    let transpose = rows > cols;
    let mut best = f64::INFINITY;
    let inner = if transpose { rows } else { cols };
    go(cost, 0, &mut vec![false; inner], 0.0, &mut best, transpose);
    best
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut solved = 0.0;
    for i in 0..200 {
        let rows = rng.random_range(1..=7);
        let cols = rng.random_range(1..=7);
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(0..100) as f64).collect())
            .collect();
        let t = Instant::now();
        let a = hungarian(&Matrix::from_rows(&cost, cols).unwrap()).map_err(|e| e.to_string())?;
        solved += t.elapsed().as_secs_f64();
        let expected = brute_force_assignment(&cost);
        ensure(a.total == expected, || {
            format!("matrix {i} ({rows}x{cols}): {} vs {expected}", a.total)
        })?;
        ensure(a.pairs().len() == rows.min(cols), || {
            format!("matrix {i}: wrong pair count")
        })?;
    }
    let total = start.elapsed();
    ensure(total < Duration::from_secs(5), || format!("took {}", secs(total)))?;
    Ok(format!(
        "200 matrices match exhaustive search, solver {solved:.4} s, total {}",
        secs(total)
    ))
}

fn random_curve(rng: &mut ChaCha8Rng) -> BezierCurve {
    loop {
        let mut p = || Vec2::new(rng.random_range(-25.0..25.0), rng.random_range(1.0..50.0));
        if let Ok(c) = BezierCurve::new(p(), p(), p()) {
            return c;
        }
    }
}

fn dense_distance(curve: &BezierCurve, q: Vec2, samples: usize) -> f64 {
    (0..samples)
        .map(|i| curve.eval(i as f64 / (samples - 1) as f64).distance(q))
        .fold(f64::INFINITY, f64::min)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases: Vec<(BezierCurve, Vec2)> = (0..1000)
        .map(|_| {
            let c = random_curve(&mut rng);
            let q = Vec2::new(rng.random_range(-30.0..30.0), rng.random_range(-4.0..55.0));
            (c, q)
        })
        .collect();
    let t = Instant::now();
    let got: Vec<f64> = cases.iter().map(|(c, q)| c.distance_to(*q)).collect();
    let elapsed = t.elapsed();
    let mut worst = 0.0f64;
    for (i, ((c, q), d)) in cases.iter().zip(&got).enumerate() {
        let oracle = dense_distance(c, *q, 100_000);
        let err = (d - oracle).abs();
        worst = worst.max(err);
        ensure(err <= 1e-4, || format!("pair {i}: {d} vs oracle {oracle}"))?;
    }
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {}", secs(elapsed))
    })?;
    Ok(format!(
        "1000 pairs, worst gap {worst:.2e} m, solver {}",
        secs(elapsed)
    ))
}

fn criterion_3() -> Outcome {
    let uniform = LogitMatrix::zeros(1, 5);
    let on = MembershipMatrix::one_hot(&[2], 5).unwrap();
    let off = MembershipMatrix::one_hot(&[4], 5).unwrap();
    let l_on = clustering_loss(&uniform, &on, OUTLIER_WEIGHT).unwrap();
    let l_off = clustering_loss(&uniform, &off, OUTLIER_WEIGHT).unwrap();
    let ln5 = 5f64.ln();
    ensure((l_on - ln5).abs() <= 1e-9, || {
        format!("lane target: {l_on} vs ln 5")
    })?;
    ensure((l_off - 0.1 * ln5).abs() <= 1e-9, || {
        format!("outlier target: {l_off} vs 0.1 ln 5")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let n = rng.random_range(1..=8);
        let cols = rng.random_range(2..=7);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..cols).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..cols)).collect();
        let target = MembershipMatrix::one_hot(&labels, cols).unwrap();
        let logits = LogitMatrix::new(Matrix::from_rows(&rows, cols).unwrap()).unwrap();
        let grad = clustering_loss_grad(&logits, &target, OUTLIER_WEIGHT).unwrap();
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for r in 0..n {
            for c in 0..cols {
                let bumped = |s: f64| {
                    let mut m = rows.clone();
                    m[r][c] += s;
                    let l = LogitMatrix::new(Matrix::from_rows(&m, cols).unwrap()).unwrap();
                    clustering_loss(&l, &target, OUTLIER_WEIGHT).unwrap()
                };
                let fd = (bumped(h) - bumped(-h)) / (2.0 * h);
                diff += (fd - grad[(r, c)]).powi(2);
                scale += fd.powi(2).max(grad[(r, c)].powi(2));
            }
        }
        let rel = diff.sqrt() / scale.sqrt().max(1e-12);
        worst = worst.max(rel);
        ensure(rel < 1e-5, || {
            format!("instance {inst}: relative gradient error {rel:.2e}")
        })?;
    }
    Ok(format!(
        "ln 5 and 0.1 ln 5 exact to 1e-9, worst gradient error {worst:.1e} over 100 instances"
    ))
}

/// Shorter BEV edge of the bottom face, straight from the corners.
fn oracle_short_side(b: &DetectionBox) -> f64 {
    let c = b.corners();
    let len = |i: usize, j: usize| ((c[i].x - c[j].x).powi(2) + (c[i].z - c[j].z).powi(2)).sqrt();
    len(0, 1).min(len(1, 2))
}

/// Dense sampling followed by a finer pass around the best sample.
fn oracle_distance(curve: &BezierCurve, q: Vec2) -> f64 {
    let n = 2000;
    let at = |t: f64| curve.eval(t.clamp(0.0, 1.0)).distance(q);
    let (best, _) = (0..=n)
        .map(|i| (i, at(i as f64 / n as f64)))
        .fold(
            (0, f64::INFINITY),
            |acc, (i, d)| if d < acc.1 { (i, d) } else { acc },
        );
    let lo = (best as f64 - 1.0) / n as f64;
    (0..=2000)
        .map(|i| at(lo + 2.0 * i as f64 / (n as f64 * 2000.0)))
        .fold(f64::INFINITY, f64::min)
}

fn oracle_membership(graph: &LaneGraph, objects: &[DetectionBox]) -> Vec<usize> {
    objects
        .iter()
        .map(|b| {
            let w = oracle_short_side(b);
            let c = Vec2::new(b.center().x, b.center().z);
            let mut best = (graph.len(), f64::INFINITY);
            for (i, curve) in graph.curves().iter().enumerate() {
                let d = oracle_distance(curve, c);
                if d < best.1 {
                    best = (i, d);
                }
            }
            if best.1 < w {
                best.0
            } else {
                graph.len()
            }
        })
        .collect()
}

fn varied_scene(seed: u64) -> Scene {
    let patterns = [Pattern::Parallel, Pattern::Fork, Pattern::Merge, Pattern::Mixed];
    let spec = SceneSpec {
        pattern: patterns[seed as usize % 4],
        n_lanes: 2 + (seed as usize % 4),
        lateral_noise_sigma: [0.0, 0.2, 0.5][seed as usize % 3],
        n_outliers: (seed as usize * 7) % 9,
        bend: if seed.is_multiple_of(5) { 2.0 } else { 0.0 },
        seed,
        ..SceneSpec::default()
    };
    generate_scene(&spec).expect("varied scene spec is feasible")
}

fn criterion_4() -> Outcome {
    let mut objects = 0;
    for seed in 0..50 {
        let s = varied_scene(seed);
        let z = true_membership(&s.gt_graph, &s.objects).map_err(|e| e.to_string())?;
        let oracle =
            MembershipMatrix::one_hot(&oracle_membership(&s.gt_graph, &s.objects), s.gt_graph.len() + 1)
                .unwrap();
        ensure(z == oracle, || {
            format!("scene {seed}: membership differs from the dense oracle")
        })?;
        objects += s.objects.len();
    }
    Ok(format!("50 scenes, {objects} objects, identical one-hot rows"))
}

fn criterion_5() -> Outcome {
    let roi = RegionOfInterest::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let s = varied_scene(100 + seed);
        let same =
            build_labels(&s.gt_graph, &s.gt_graph, &s.objects, None, 1.0, &roi).map_err(|e| e.to_string())?;
        ensure(same.z_bar == same.z_star, || {
            format!("scene {seed}: est = gt changes the labels")
        })?;

        let pred = perturb_graph(&s.gt_graph, 0.01, 0.2, seed, &roi).map_err(|e| e.to_string())?;
        let base =
            build_labels(&pred, &s.gt_graph, &s.objects, None, 1.0, &roi).map_err(|e| e.to_string())?;
        let mut order: Vec<usize> = (0..pred.len()).collect();
        order.shuffle(&mut rng);
        let permuted = pred.permuted(&order).unwrap();
        let moved =
            build_labels(&permuted, &s.gt_graph, &s.objects, None, 1.0, &roi).map_err(|e| e.to_string())?;
        let mut cols = order.clone();
        cols.push(pred.len());
        let expected = base.z_bar.as_matrix().select_columns(&cols);
        ensure(moved.z_bar.as_matrix() == &expected, || {
            format!("scene {seed}: columns did not follow {order:?}")
        })?;
    }
    Ok("20 scenes: columns follow every permutation, est = gt reproduces the truth".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut accs = Vec::new();
    for seed in 0..20 {
        let s = generate_scene(&SceneSpec {
            n_lanes: 3,
            lane_gap: 3.5,
            objects_per_lane: 20,
            lateral_noise_sigma: 0.2,
            seed,
            ..SceneSpec::default()
        })
        .unwrap();
        let points: Vec<Vec2> = s.objects.iter().map(|b| b.bev_center()).collect();
        let state = fit(&points, &EmConfig::new(3, 1.0).with_seed(seed)).map_err(|e| e.to_string())?;
        for (i, w) in state.trace.windows(2).enumerate() {
            ensure(w[1] - w[0] >= -1e-6, || {
                format!("seed {seed}: log-likelihood fell at iteration {}", i + 1)
            })?;
        }
        let fitted = LaneGraph::from_curves(state.curves.clone());
        let m = match_graphs(&fitted, &s.gt_graph, &s.roi).unwrap();
        let target = target_membership(&s.gen_membership, &m, 3).unwrap();
        let acc = membership_accuracy(&state.responsibilities.hardened(), &target).unwrap();
        ensure(acc >= 0.90, || format!("seed {seed}: accuracy {acc:.3}"))?;
        accs.push(acc);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {}", secs(elapsed))
    })?;
    let min = accs.iter().copied().fold(1.0, f64::min);
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    Ok(format!(
        "20 seeds, accuracy min {min:.3} mean {mean:.3}, monotone, {}",
        secs(elapsed)
    ))
}

fn criterion_7() -> Outcome {
    // objects sit on the lane, so both loss terms share the true curve as minimizer
    let s = generate_scene(&SceneSpec {
        n_lanes: 1,
        lateral_noise_sigma: 0.0,
        n_outliers: 3,
        ..SceneSpec::default()
    })
    .unwrap();
    let roi = s.roi;
    let shift = Vec2::new(0.05 * roi.width(), 0.0);
    let pred = s
        .gt_graph
        .with_curves(s.gt_graph.curves().iter().map(|c| c.translated(shift)).collect())
        .unwrap();
    let cfg = DescentConfig {
        lr: 1e-3,
        steps: 500,
        ..DescentConfig::default()
    };
    let d = descend_curves(&pred, &s.gt_graph, &s.objects, None, &cfg, &roi).map_err(|e| e.to_string())?;
    let first = d.trace[0].lane_graph_loss;
    let hit = d.trace.iter().position(|t| t.lane_graph_loss < 0.01 * first);
    ensure(hit.is_some(), || {
        format!(
            "lane loss {first:.3e} -> {:.3e}",
            d.trace.last().unwrap().lane_graph_loss
        )
    })?;
    for (i, w) in d.trace.windows(2).enumerate() {
        ensure(w[1].objective <= w[0].objective + 1e-6, || {
            format!("objective rose at step {}", i + 1)
        })?;
    }
    Ok(format!(
        "lane loss {first:.3e} below 1% after {} steps (alpha {}), monotone",
        hit.unwrap(),
        cfg.alpha
    ))
}

fn criterion_8() -> Outcome {
    let roi = RegionOfInterest::default();
    for pattern in [Pattern::Parallel, Pattern::Fork, Pattern::Merge, Pattern::Mixed] {
        let g = layout(&SceneSpec {
            pattern,
            n_lanes: 4,
            ..SceneSpec::default()
        })
        .unwrap();
        let r = evaluate(&g, &g, &roi).map_err(|e| e.to_string())?;
        ensure(r.m_f == 1.0 && r.detect == 1.0 && r.c_f == 1.0, || {
            format!("{pattern:?}: {r:?}")
        })?;
    }
    let fork = layout(&SceneSpec {
        pattern: Pattern::Fork,
        n_lanes: 3,
        ..SceneSpec::default()
    })
    .unwrap();
    let missing = LaneGraph::with_edges(fork.curves().to_vec(), &[(0, 2)], None).unwrap();
    let m = match_graphs(&missing, &fork, &roi).unwrap();
    let cf = connectivity_f(&missing, &fork, &m).map_err(|e| e.to_string())?;
    ensure(cf == 2.0 / 3.0, || format!("fork with a missing edge: C-F {cf}"))?;
    Ok("est = gt scores 1.0 on four layouts, fork missing one edge gives C-F 2/3".into())
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_objlane"))
        .args(args)
        .current_dir(dir)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || {
        format!("`objlane {}` exited with {status}", args.join(" "))
    })
}

fn cli_session(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::fs::write(
        dir.join("spec.json"),
        r#"{"n_lanes": 3, "n_outliers": 4, "pattern": "mixed"}"#,
    )
    .map_err(|e| e.to_string())?;
    run_cli(
        dir,
        &[
            "generate",
            "--spec",
            "spec.json",
            "--seed",
            "17",
            "--out",
            "scene.json",
        ],
    )?;
    let scene = objlane::io::read_scene(&dir.join("scene.json")).map_err(|e| e.to_string())?;
    let pred = perturb_graph(&scene.graph, 0.01, 0.0, 3, &scene.roi).map_err(|e| e.to_string())?;
    write_json(&dir.join("pred.json"), &GraphFile::new(&pred, Some(scene.roi))).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let logits = LogitsFile {
        version: FORMAT_VERSION.into(),
        logits: (0..scene.objects.len())
            .map(|_| (0..=pred.len()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
    };
    write_json(&dir.join("logits.json"), &logits).map_err(|e| e.to_string())?;

    run_cli(
        dir,
        &["assign", "--scene", "scene.json", "--out", "membership.json"],
    )?;
    run_cli(
        dir,
        &[
            "labels",
            "--scene",
            "scene.json",
            "--pred",
            "pred.json",
            "--logits",
            "logits.json",
            "--alpha",
            "0.5",
            "--out",
            "bundle.json",
        ],
    )?;
    run_cli(
        dir,
        &[
            "descend",
            "--scene",
            "scene.json",
            "--pred",
            "pred.json",
            "--lr",
            "0.001",
            "--steps",
            "50",
            "--out",
            "descent.json",
        ],
    )?;
    run_cli(
        dir,
        &[
            "em-fit",
            "--scene",
            "scene.json",
            "--k",
            "3",
            "--sigma",
            "1.0",
            "--seed",
            "4",
            "--out",
            "fit.json",
            "--trace",
            "trace.csv",
        ],
    )?;
    run_cli(
        dir,
        &[
            "eval",
            "--pred",
            "fit.json",
            "--gt",
            "scene.json",
            "--out",
            "report.json",
        ],
    )?;
    run_cli(
        dir,
        &[
            "match",
            "--pred",
            "pred.json",
            "--gt",
            "scene.json",
            "--out",
            "match.json",
        ],
    )?;

    let names = [
        "scene.json",
        "membership.json",
        "bundle.json",
        "descent.json",
        "fit.json",
        "trace.csv",
        "report.json",
        "match.json",
    ];
    names
        .iter()
        .map(|n| {
            std::fs::read(dir.join(n))
                .map(|b| (n.to_string(), b))
                .map_err(|e| format!("{n}: {e}"))
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = cli_session(a.path())?;
    let second = cli_session(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "all 7 subcommands, {} output files byte-identical across two runs",
        first.len()
    ))
}

fn criterion_10() -> Outcome {
    Ok(
        "statement: benchmark M-F / Detect / C-F / mAP numbers need a trained neural model on \
        NuScenes and Argoverse and are out of scope here; criteria 1-9 check invariants and \
        oracles instead"
            .into(),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("hungarian exactness", criterion_1),
        ("closest-point oracle", criterion_2),
        ("clustering loss analytics", criterion_3),
        ("membership oracle", criterion_4),
        ("target-membership equivariance", criterion_5),
        ("EM recovery", criterion_6),
        ("descent convergence", criterion_7),
        ("metrics sanity", criterion_8),
        ("CLI determinism", criterion_9),
        ("non-reproducibility statement", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {why}", i + 1);
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
