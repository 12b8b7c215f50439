//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::VecDeque;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use celledge::correction::correct_polygon;
use celledge::dataset::{cut_patches, split_dataset, PatchSpec};
use celledge::eval::{default_thresholds, match_edges_with, pr_curve, summarize, EvalOptions, ImageCurve, MatchMode, SoftEdgeMap};
use celledge::geometry::Point2;
use celledge::gradient::GradientField;
use celledge::pipeline::{correct_image, process_pair, run_correct, ImagePair, TIMING_FILE};
use celledge::raster::{rasterize_loop, EdgeMap};
use celledge::refit::{fit_weights, local_linear_fit, plan_groups, FitGroup, FitMode};
use celledge::synthetic::{write_fixture, Ellipse, Scene, SceneParams};
use celledge::{Image, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const C1_MIN_REDUCTION: f64 = 0.5;
const C1_STRONG_RADIUS: f64 = 1.5;
const C1_STRONG_FRACTION: f64 = 0.9;
const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_LAMBDA_FACTOR: f64 = 50.0;
const C3_INSTANCES: usize = 1000;
const C3_TOLERANCE: f64 = 1e-6;
const C4_INSTANCES: usize = 2000;
const C5_SCORE_TOLERANCE: f64 = 1e-9;
const C5_DATASETS: usize = 50;
const C5_MATCH_FIXTURES: usize = 300;
const C7_REFERENCE_SECONDS: f64 = 2.7;
const C7_SLACK: f64 = 2.0;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn synthetic_fixtures() -> Vec<(Scene, Image, celledge::Annotations)> {
    (0..20)
        .map(|seed| {
            let scene = Scene::random(&SceneParams::default(), seed);
            let img = scene.render();
            let set = scene.annotations("fixture.png", (6.0, 10.0), 4.0, 1000 + seed).unwrap();
            (scene, img, set)
        })
        .collect()
}

fn c1_synthetic_recovery() -> Outcome {
    let config = PipelineConfig::default();
    let (mut before, mut after, mut n) = (0.0, 0.0, 0usize);
    let (mut strong, mut strong_ok) = (0usize, 0usize);
    let mut elapsed = Duration::ZERO;
    for (scene, img, set) in synthetic_fixtures() {
        let t = Instant::now();
        let out = correct_image(&img, &set, &config).unwrap();
        elapsed += t.elapsed();
        for poly in &out.polygons {
            let truth = scene.truth(&poly.id).unwrap();
            let fin = poly.final_positions().expect("smooth mode keeps point order");
            for ((orig, end), c) in poly.original.iter().zip(&fin).zip(&poly.corrections) {
                let d = truth.distance(*end);
                before += truth.distance(*orig);
                after += d;
                n += 1;
                if c.contrast > 0.0 {
                    strong += 1;
                    strong_ok += usize::from(d <= C1_STRONG_RADIUS);
                }
            }
        }
    }
    let (before, after) = (before / n as f64, after / n as f64);
    let reduction = 1.0 - after / before;
    let frac = strong_ok as f64 / strong.max(1) as f64;
    outcome(
        reduction >= C1_MIN_REDUCTION && frac >= C1_STRONG_FRACTION && elapsed < C1_BUDGET,
        format!(
            "mean distance {before:.3} -> {after:.3} px ({:.1}% reduction, need >= {:.0}%); {strong_ok}/{strong} strong points within {C1_STRONG_RADIUS} px ({:.1}%, need >= {:.0}%); {n} points in {:.2}s (budget {}s)",
            100.0 * reduction,
            100.0 * C1_MIN_REDUCTION,
            100.0 * frac,
            100.0 * C1_STRONG_FRACTION,
            elapsed.as_secs_f64(),
            C1_BUDGET.as_secs()
        ),
    )
}

fn c2_weak_edge_preservation() -> Outcome {
    let config = PipelineConfig::default();
    let mut params = config.correction_params();
    params.lambda_t *= C2_LAMBDA_FACTOR;
    let (mut polys, mut points, mut changed) = (0, 0, 0);
    for (_, img, set) in synthetic_fixtures() {
        let field = GradientField::from_image(&img, config.sigma).unwrap();
        for poly in &set.polygons {
            let out = correct_polygon(poly, &field, &params);
            polys += 1;
            points += poly.points.len();
            changed += out.points.iter().zip(&poly.points).filter(|(a, b)| a != b).count();
            changed += usize::from(out.points.len() != poly.points.len());
        }
    }
    outcome(
        changed == 0,
        format!("lambda_t = {}: {changed} of {points} points in {polys} polygons differ from the input", params.lambda_t),
    )
}

/// Minimizes the weighted squared error by nested ternary search, without
/// normal equations. The search runs on `y = c0 + c1 (x - x0)` so the two
/// coordinates are well separated, then maps back to `y = b0 + b1 x`.
fn brute_force_wls(xs: &[f64], ys: &[f64], w: &[f64], x0: f64) -> (f64, f64) {
    let sse = |c0: f64, c1: f64| -> f64 {
        xs.iter()
            .zip(ys)
            .zip(w)
            .map(|((&x, &y), &w)| {
                let r = y - c0 - c1 * (x - x0);
                w * r * r
            })
            .sum()
    };
    let ternary = |mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64| {
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    };
    let best_c0 = |c1: f64| ternary(-1e3, 1e3, &|c0| sse(c0, c1));
    let c1 = ternary(-1e2, 1e2, &|c1| sse(best_c0(c1), c1));
    (best_c0(c1) - c1 * x0, c1)
}

/// Normalized Gaussian weights with the stitch boost, written out directly.
fn oracle_weights(xs: &[f64], x: f64, h: f64, stitch: Option<(usize, usize)>) -> Vec<f64> {
    let mut w: Vec<f64> = xs
        .iter()
        .map(|&xj| (-0.5 * ((x - xj) / h).powi(2)).exp() / (h * (2.0 * std::f64::consts::PI).sqrt()))
        .collect();
    if let Some((a, b)) = stitch {
        let m = w.iter().cloned().fold(0.0, f64::max);
        w[a] = 1.5 * m;
        w[b] = 1.5 * m;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn c3_fit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_beta: f64 = 0.0;
    let mut worst_weight: f64 = 0.0;
    for _ in 0..C3_INSTANCES {
        let n = 2 * rng.random_range(1..=12) + 1;
        let span = rng.random_range(4.0..30.0);
        let mut xs: Vec<f64> = (0..n).map(|k| span * k as f64 / (n - 1) as f64 + rng.random_range(-0.3..0.3)).collect();
        xs.sort_by(f64::total_cmp);
        let curvature = rng.random_range(-0.05..0.05);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| curvature * (x - span / 2.0).powi(2) + rng.random_range(-1.5..1.5))
            .collect();
        let stitch = rng.random_bool(0.5).then(|| {
            let f = rng.random_range(0..n / 2);
            (f, n - 1 - f)
        });
        let mut group = FitGroup {
            xs: xs.clone(),
            ys: ys.clone(),
            group_size: n,
            stitch,
            bandwidth: rng.random_range(1.0..40.0),
        };
        // Refit bandwidths never drop below floor(step n_g) / 6, i.e. half the spacing.
        let spacing = span / (n - 1) as f64;
        if rng.random_bool(0.3) {
            group.bandwidth = rng.random_range(0.5 * spacing..2.0 * spacing);
        }
        let x = rng.random_range(xs[0]..xs[n - 1]);
        let w = oracle_weights(&xs, x, group.bandwidth, stitch);
        let got_w = fit_weights(&group, x);
        worst_weight = w.iter().zip(&got_w).map(|(a, b)| (a - b).abs()).fold(worst_weight, f64::max);
        let (b0, b1) = local_linear_fit(&group, x);
        let (o0, o1) = brute_force_wls(&xs, &ys, &w, x);
        worst_beta = worst_beta.max((b0 - o0).abs()).max((b1 - o1).abs());
    }
    outcome(
        worst_beta <= C3_TOLERANCE && worst_weight <= C3_TOLERANCE,
        format!("{C3_INSTANCES} fits: max |beta - oracle| = {worst_beta:.2e}, max weight error {worst_weight:.2e} (tol {C3_TOLERANCE:e})"),
    )
}

fn c4_grouping_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = Vec::new();
    for _ in 0..C4_INSTANCES {
        let n_g = 2 * rng.random_range(1..=25) + 1;
        let n_i = rng.random_range(10.max(n_g)..=5000);
        let r_f = (n_g - 1) / 2;
        let smooth = plan_groups(n_i, n_g, FitMode::SmoothClosed).unwrap();
        if smooth.space != 1 || smooth.groups != n_i || smooth.repeated != 0 || 2 * smooth.overlap_halves != 4 * r_f - 2 {
            bad.push(format!("smooth n_I={n_i} n_g={n_g}: {smooth:?}"));
        }
        let halves = rng.random_range(1..2 * r_f);
        let p = plan_groups(n_i, n_g, FitMode::Stitched { overlap_halves: halves }).unwrap();
        let space = 2 * r_f - halves;
        let ok = p.radius == r_f
            && p.space == space
            && p.groups == n_i.div_ceil(space)
            && p.repeated == space * p.groups - n_i
            && (p.overlap() - halves as f64 / 2.0).abs() == 0.0
            && p.repeated < space
            && (0..p.groups).map(|k| p.group_start(k)).next_back() == Some((p.groups - 1) * space);
        if !ok {
            bad.push(format!("stitched n_I={n_i} n_g={n_g} n_d={}: {p:?}", halves as f64 / 2.0));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{C4_INSTANCES} random plans per mode, {} violations{}",
            bad.len(),
            bad.first().map(|b| format!("; first: {b}")).unwrap_or_default()
        ),
    )
}

fn random_loop_map(rng: &mut ChaCha8Rng, w: u32, h: u32) -> EdgeMap {
    let mut map = EdgeMap::new(w, h);
    for _ in 0..rng.random_range(1..=3) {
        let r = rng.random_range(5.0..f64::from(w.min(h)) / 3.0);
        let c = Point2::new(rng.random_range(r..f64::from(w) - r), rng.random_range(r..f64::from(h) - r));
        let e = Ellipse::new(c, r, r * rng.random_range(0.6..1.0), rng.random_range(0.0..3.0));
        let pts: Vec<_> = (0..40).map(|k| e.point_at(std::f64::consts::TAU * k as f64 / 40.0)).collect();
        map.union_with(&rasterize_loop(&pts, (w, h))).unwrap();
    }
    map
}

/// Detector-like soft map: each edge pixel is kept with an image-wide
/// probability, jittered by at most one pixel and given a random strength,
/// plus weak clutter.
fn detector_prediction(rng: &mut ChaCha8Rng, gt: &EdgeMap) -> SoftEdgeMap {
    let (w, h) = (gt.width(), gt.height());
    let mut v = vec![0.0; (w * h) as usize];
    let keep = rng.random_range(0.6..1.0);
    for (x, y) in gt.pixels() {
        if rng.random_bool(keep) {
            let sx = (x as i64 + rng.random_range(-1..=1i64)).clamp(0, w as i64 - 1) as u32;
            let sy = (y as i64 + rng.random_range(-1..=1i64)).clamp(0, h as i64 - 1) as u32;
            v[(sy * w + sx) as usize] = rng.random_range(0.3..1.0);
        }
    }
    let clutter = rng.random_range(0.0..0.03);
    for x in v.iter_mut().filter(|x| **x == 0.0) {
        if rng.random_bool(clutter) {
            *x = rng.random_range(0.0..0.6);
        }
    }
    SoftEdgeMap::new(w, h, v).unwrap()
}

/// Stress map: the whole edge set shifted by up to two pixels per axis,
/// which can push it past the matching tolerance.
fn shifted_prediction(rng: &mut ChaCha8Rng, gt: &EdgeMap) -> SoftEdgeMap {
    let (w, h) = (gt.width(), gt.height());
    let mut v = vec![0.0; (w * h) as usize];
    let (dx, dy) = (rng.random_range(-2..=2i64), rng.random_range(-2..=2i64));
    for (x, y) in gt.pixels() {
        if rng.random_bool(0.8) {
            let (sx, sy) = (x as i64 + dx, y as i64 + dy);
            if sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 {
                v[(sy as u32 * w + sx as u32) as usize] = rng.random_range(0.2..1.0);
            }
        }
    }
    for _ in 0..rng.random_range(0..(w * h / 20)) {
        let i = rng.random_range(0..v.len());
        v[i] = rng.random_range(0.0..0.7);
    }
    SoftEdgeMap::new(w, h, v).unwrap()
}

fn scores(images: &[(SoftEdgeMap, EdgeMap)], tol: f64) -> (f64, f64, f64) {
    let th = default_thresholds(33);
    let opts = EvalOptions {
        tolerance: tol,
        mode: MatchMode::Augmented,
    };
    let curves = images
        .iter()
        .enumerate()
        .map(|(i, (p, g))| ImageCurve {
            name: format!("img{i}"),
            points: pr_curve(p, g, &th, &opts).unwrap(),
        })
        .collect();
    let s = summarize(curves).unwrap();
    (s.ods, s.ois, s.ap)
}

/// Maximum bipartite matching by BFS augmenting paths on an explicit graph.
fn max_matching_oracle(pred: &EdgeMap, gt: &EdgeMap, tol: f64) -> usize {
    let ps: Vec<(u32, u32)> = pred.pixels().collect();
    let gs: Vec<(u32, u32)> = gt.pixels().collect();
    let adj: Vec<Vec<usize>> = ps
        .iter()
        .map(|&(px, py)| {
            gs.iter()
                .enumerate()
                .filter(|(_, &(gx, gy))| {
                    let (dx, dy) = (f64::from(px) - f64::from(gx), f64::from(py) - f64::from(gy));
                    dx * dx + dy * dy <= tol * tol
                })
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut match_g = vec![usize::MAX; gs.len()];
    let mut match_p = vec![usize::MAX; ps.len()];
    let mut total = 0;
    for root in 0..ps.len() {
        let mut parent_g = vec![usize::MAX; gs.len()];
        let mut seen_p = vec![false; ps.len()];
        let mut queue = VecDeque::from([root]);
        seen_p[root] = true;
        let mut end = None;
        'bfs: while let Some(p) = queue.pop_front() {
            for &g in &adj[p] {
                if parent_g[g] != usize::MAX {
                    continue;
                }
                parent_g[g] = p;
                if match_g[g] == usize::MAX {
                    end = Some(g);
                    break 'bfs;
                }
                let q = match_g[g];
                if !seen_p[q] {
                    seen_p[q] = true;
                    queue.push_back(q);
                }
            }
        }
        if let Some(mut g) = end {
            loop {
                let p = parent_g[g];
                let prev = match_p[p];
                match_p[p] = g;
                match_g[g] = p;
                if prev == usize::MAX {
                    break;
                }
                g = prev;
            }
            total += 1;
        }
    }
    total
}

fn c5_evaluator_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut notes = Vec::new();

    let mut worst_self: f64 = 0.0;
    for k in 0..40 {
        let (w, h) = (rng.random_range(8..48), rng.random_range(8..48));
        let map = if k % 4 == 0 {
            let bits = (0..w * h).map(|_| rng.random_bool(0.3)).collect();
            EdgeMap::from_bits(w, h, bits).unwrap()
        } else if k == 1 {
            EdgeMap::new(w, h)
        } else {
            random_loop_map(&mut rng, w.max(24), h.max(24))
        };
        let (ods, ois, ap) = scores(&[(SoftEdgeMap::from_edges(&map), map.clone())], 1.5);
        worst_self = worst_self.max((1.0 - ods).abs()).max((1.0 - ois).abs()).max((1.0 - ap).abs());
    }
    let self_ok = worst_self <= C5_SCORE_TOLERANCE;
    notes.push(format!("self-eval max |1 - score| = {worst_self:.1e}"));

    let mut ois_gap = |make: fn(&mut ChaCha8Rng, &EdgeMap) -> SoftEdgeMap| {
        let (mut violations, mut worst) = (0, 0.0f64);
        for _ in 0..C5_DATASETS {
            let ds: Vec<(SoftEdgeMap, EdgeMap)> = (0..2)
                .map(|_| {
                    let gt = random_loop_map(&mut rng, 64, 48);
                    (make(&mut rng, &gt), gt)
                })
                .collect();
            let (ods, ois, _) = scores(&ds, 1.5);
            if ois + 1e-12 < ods {
                violations += 1;
                worst = worst.max(ods - ois);
            }
        }
        (violations, worst)
    };
    let (ois_violations, _) = ois_gap(detector_prediction);
    let (stress_violations, stress_worst) = ois_gap(shifted_prediction);
    notes.push(format!(
        "OIS >= ODS on {}/{C5_DATASETS} detector-like datasets (shifted stress sets: {}/{C5_DATASETS}, worst deficit {stress_worst:.4}, informational)",
        C5_DATASETS - ois_violations,
        C5_DATASETS - stress_violations
    ));

    let (mut fixtures, mut aug_ok, mut greedy_ok) = (0, 0, 0);
    for k in 0..C5_MATCH_FIXTURES {
        let (w, h) = (rng.random_range(4..=30), rng.random_range(4..=30));
        let density = rng.random_range(0.02..0.3);
        let mk = |rng: &mut ChaCha8Rng| EdgeMap::from_bits(w, h, (0..w * h).map(|_| rng.random_bool(density)).collect()).unwrap();
        let (pred, gt) = if k % 3 == 0 {
            let gt = random_loop_map(&mut rng, w.max(16), h.max(16));
            (mk(&mut rng), gt)
        } else {
            (mk(&mut rng), mk(&mut rng))
        };
        let gt = if gt.width() == w && gt.height() == h { gt } else { mk(&mut rng) };
        let tol = rng.random_range(1.0..3.0);
        let optimum = max_matching_oracle(&pred, &gt, tol);
        fixtures += 1;
        aug_ok += usize::from(match_edges_with(&pred, &gt, tol, MatchMode::Augmented).unwrap().tp == optimum);
        greedy_ok += usize::from(match_edges_with(&pred, &gt, tol, MatchMode::Greedy).unwrap().tp == optimum);
    }
    notes.push(format!(
        "default matcher tp = optimum on {aug_ok}/{fixtures} fixtures <= 30x30 (pure greedy: {greedy_ok}/{fixtures})"
    ));
    outcome(self_ok && ois_violations == 0 && aug_ok == fixtures, notes.join("; "))
}

fn c6_dataset_arithmetic() -> Outcome {
    let img = Image::from_fn(2048, 1536, |x, y| f64::from((x ^ y) & 255));
    let mut edges = EdgeMap::new(2048, 1536);
    for i in 0..1536 {
        edges.set(i, i);
    }
    let spec = PatchSpec::standard();
    let patches = cut_patches(&img, &edges, &spec).unwrap();
    let sized = patches.iter().all(|p| (p.image.width(), p.image.height(), p.label.width(), p.label.height()) == (512, 384, 512, 384));
    let split = split_dataset(686, 0).unwrap();
    let sizes = (split.train.len(), split.val.len(), split.test.len());
    outcome(
        patches.len() == 49 && sized && sizes == (411, 68, 207),
        format!("{} patches of 512x384 (need 49); split of 686 = {}/{}/{} (need 411/68/207)", patches.len(), sizes.0, sizes.1, sizes.2),
    )
}

fn c7_performance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_fixture(dir.path(), "large", &SceneParams::large(25), 7, 4.0).unwrap();
    let pair = ImagePair {
        stem: "large".into(),
        image: dir.path().join("large.png"),
        annotation: dir.path().join("large.json"),
    };
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    let mut config = PipelineConfig { workers: 1, ..PipelineConfig::default() };
    let t = Instant::now();
    let report = process_pair(&pair, &out, &config).unwrap();
    let single = t.elapsed().as_secs_f64();
    let budget = C7_REFERENCE_SECONDS * C7_SLACK;

    // Throughput with 8 workers on 8 copies, reported only.
    let batch = dir.path().join("batch");
    fs::create_dir(&batch).unwrap();
    for k in 0..8 {
        fs::copy(&pair.image, batch.join(format!("img{k}.png"))).unwrap();
        fs::copy(&pair.annotation, batch.join(format!("img{k}.json"))).unwrap();
    }
    config.workers = 8;
    let (_, timing) = run_correct(&batch, &dir.path().join("batch_out"), &config).unwrap();
    outcome(
        single <= budget && report.polygons == scene.cells.len(),
        format!(
            "2048x1536 with {} polygons: {single:.3}s single-threaded (budget {budget:.1}s = {C7_SLACK} x {C7_REFERENCE_SECONDS}s); 8 images on 8 workers in {:.3}s ({:.3}s per image, informational)",
            report.polygons,
            timing.total_seconds,
            timing.total_seconds / 8.0
        ),
    )
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != TIMING_FILE)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for k in 0..6 {
        write_fixture(&corpus, &format!("fixture_{k}"), &SceneParams::default(), 100 + k, 4.0).unwrap();
    }
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_celledge"))
            .args(["--workers", workers, "correct", "--in"])
            .arg(&corpus)
            .arg("--out")
            .arg(&out)
            .env_remove("CELLEDGE_CONFIG")
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "correct run failed: {status}");
        read_tree(&out)
    };
    let a = run("run_a", "1");
    let b = run("run_b", "4");
    let c = run("run_c", "4");
    let bytes: usize = a.iter().map(|(_, d)| d.len()).sum();
    outcome(
        !a.is_empty() && a == b && b == c,
        format!(
            "3 runs (1, 4, 4 workers) over 6 fixtures: {} files, {bytes} bytes, identical = {} ({TIMING_FILE} holds wall times and is excluded)",
            a.len(),
            a == b && b == c
        ),
    )
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 8] = [
        ("1 synthetic recovery", c1_synthetic_recovery),
        ("2 weak-edge preservation", c2_weak_edge_preservation),
        ("3 fit-oracle equivalence", c3_fit_oracle),
        ("4 grouping identities", c4_grouping_identities),
        ("5 evaluator sanity", c5_evaluator_sanity),
        ("6 dataset arithmetic", c6_dataset_arithmetic),
        ("7 performance reference", c7_performance),
        ("8 determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let result = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!("[{}] {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
