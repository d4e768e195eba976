//! Acceptance suite: one PASS/FAIL line per criterion. Failures are reported
//! but only fail the process when `KANLAB_ACCEPTANCE_STRICT` is set.
//!
//! Experiments run through the same path as `kanlab run`: preset config,
//! `run_experiment` into a fresh directory, then the JSON bundle is read
//! back and checked.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kanlab_core::forgetting::{union_overlap, BinAxis, BranchMask, LabError, LayerSupport, SupportProfile};
use kanlab_core::matrix::Matrix;
use kanlab_core::network::{KanInit, KanNetwork};
use kanlab_core::spline::KnotGrid;
use kanlab_core::tasks::{
    decode_carry, decode_digit, encode_carry, encode_digit, parse_idx_images, parse_idx_labels, reassemble_binary,
    unroll_binary,
};
use kanlab_core::training::{adamw_step, AdamwState, TrainConfig};
use kanlab_runner::emit::{load_bundle, BUNDLE_FILE, MANIFEST_FILE};
use kanlab_runner::{load_config, run_experiment, ExperimentConfig, ExperimentResult, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    scratch: tempfile::TempDir,
    opts: RunOptions,
    results: Vec<(usize, &'static str, bool)>,
}

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.toml"));
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

impl Suite {
    fn run(&self, cfg: &ExperimentConfig, tag: &str) -> Result<(PathBuf, ExperimentResult), String> {
        let dir = self.scratch.path().join(tag);
        run_experiment(cfg, &self.opts, &dir).map_err(|e| e.to_string())?;
        let bundle = load_bundle(&dir.join(BUNDLE_FILE)).map_err(|e| e.to_string())?;
        Ok((dir, bundle.result))
    }

    fn check(&mut self, id: usize, name: &'static str, limit_secs: Option<f64>, f: impl FnOnce(&Suite) -> Outcome) {
        let t0 = Instant::now();
        let mut o = f(self);
        let secs = t0.elapsed().as_secs_f64();
        if let Some(limit) = limit_secs {
            if secs >= limit {
                o.pass = false;
                o.detail.push_str(&format!("; runtime {secs:.1}s over the {limit:.0}s budget"));
            }
        }
        println!(
            "criterion {id:>2} [{}] {name}: {} ({secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        self.results.push((id, name, o.pass));
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", items.join(", "))
}

fn binary_retention(s: &Suite) -> Outcome {
    let cfg = preset("binary-add");
    let (_, res) = match s.run(&cfg, "c1-binary") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Sequence { runs, .. } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let r = &runs[0];
    let max_f = r.forgetting.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let drops = r.first_task_drop_decades();
    let later_drop_ok = drops[1..].iter().all(|d| *d >= 2.0);
    outcome(
        max_f < 1e-4 && later_drop_ok,
        format!(
            "seed {}: max F = {max_f:.2e} (< 1e-4), F = {}; task-1 training lowers tasks 2-5 by {} decades (need ≥ 2)",
            r.seed,
            fmt_sci(&r.forgetting),
            fmt_list(&drops[1..])
        ),
    )
}

/// Not gated: how often the task-1 drop holds over ten seeds.
fn binary_seed_sweep(s: &Suite) {
    let mut cfg = preset("binary-add");
    cfg.seeds = Some((0..10).collect());
    match s.run(&cfg, "c1-seed-sweep") {
        Ok((_, ExperimentResult::Sequence { runs, .. })) => {
            let ok_f = runs.iter().filter(|r| r.forgetting.iter().all(|f| *f < 1e-4)).count();
            let ok_drop = runs
                .iter()
                .filter(|r| r.first_task_drop_decades()[1..].iter().all(|d| *d >= 2.0))
                .count();
            let worst: Vec<f64> = (1..5)
                .map(|i| runs.iter().map(|r| r.first_task_drop_decades()[i]).fold(f64::INFINITY, f64::min))
                .collect();
            println!(
                "     info: binary seeds 0-9: max F < 1e-4 in {ok_f}/10, all four drops ≥ 2 decades in {ok_drop}/10, \
                 smallest drop per task 2-5 {}",
                fmt_list(&worst)
            );
        }
        Ok(_) => println!("     info: binary seed sweep returned an unexpected shape"),
        Err(e) => println!("     info: binary seed sweep failed: {e}"),
    }
}

fn decimal_trend(s: &Suite) -> Outcome {
    let cfg = preset("decimal-add");
    let (_, res) = match s.run(&cfg, "c2-decimal") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Sequence { grids, .. } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let totals: Vec<f64> = grids.iter().map(|g| g.mean_total_forgetting).collect();
    let mut inversions = 0;
    let mut too_large = false;
    for w in totals.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if w[1] > 1.10 * w[0] {
                too_large = true;
            }
        }
    }
    let f1_f4: Vec<bool> = grids.iter().map(|g| g.mean_forgetting[0] >= g.mean_forgetting[3]).collect();
    let pass = inversions <= 1 && !too_large && f1_f4.iter().all(|b| *b);
    let gs: Vec<usize> = grids.iter().map(|g| g.grid).collect();
    outcome(
        pass,
        format!(
            "grids {gs:?}: mean ΣF = {} ({inversions} inversion(s), none over 10%: {}); F_1 ≥ F_4 per grid {:?}",
            fmt_list(&totals),
            !too_large,
            f1_f4
        ),
    )
}

/// Published F_i and F_i/Δ per (grid, pair), shown for reference only.
const T1_REFERENCE: [(usize, [(f64, f64); 4]); 3] = [
    (10, [(0.46, 0.74), (0.45, 0.73), (0.52, 0.77), (0.44, 0.72)]),
    (15, [(0.45, 0.74), (0.40, 0.67), (0.46, 0.74), (0.42, 0.68)]),
    (20, [(0.32, 0.61), (0.34, 0.64), (0.32, 0.63), (0.32, 0.64)]),
];

fn theorem1(s: &Suite) -> Outcome {
    let (_, res) = match s.run(&preset("theorem1"), "c3-theorem1") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::PairRatios { report, cv, .. } = &res else {
        return outcome(false, "unexpected result shape");
    };
    for (grid, refs) in T1_REFERENCE {
        let rows: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.grid == Some(grid))
            .zip(refs)
            .map(|(r, (rf, rr))| {
                format!(
                    "({},{}) F {:.3} Δ {:.4} ratio {} | ref F {rf} ratio {rr}",
                    r.task_i,
                    r.partners[0],
                    r.forgetting,
                    r.denominator,
                    r.ratio.map_or("null".into(), |v| format!("{v:.3}"))
                )
            })
            .collect();
        println!("     grid {grid}: {}", rows.join("; "));
    }
    let pass = cv.iter().all(|c| c.cv.is_some_and(|v| v <= 0.20));
    let cvs: Vec<String> = cv
        .iter()
        .map(|c| format!("grid {} {}", c.grid, c.cv.map_or("n/a".into(), |v| format!("{v:.3}"))))
        .collect();
    outcome(pass, format!("ratio CV (need ≤ 0.20 per grid): {}", cvs.join(", ")))
}

fn theorem2(s: &Suite) -> (Outcome, Option<ExperimentResult>) {
    let (_, res) = match s.run(&preset("theorem2"), "c4-theorem2") {
        Ok(r) => r,
        Err(e) => return (outcome(false, e), None),
    };
    let ExperimentResult::CumulativeRatios { report, cv, .. } = &res else {
        return (outcome(false, "unexpected result shape"), None);
    };
    for grid in [10, 15, 20] {
        let rows: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.grid == Some(grid))
            .map(|r| {
                format!(
                    "i={} F {:.3} Σμ {:.4} ratio {}",
                    r.task_i,
                    r.forgetting,
                    r.denominator,
                    r.ratio.map_or("null".into(), |v| format!("{v:.3}"))
                )
            })
            .collect();
        println!("     grid {grid}: {}", rows.join("; "));
    }
    let by_grid: BTreeMap<usize, Option<f64>> = cv.iter().map(|c| (c.grid, c.cv)).collect();
    let each_ok = cv.iter().all(|c| c.cv.is_some_and(|v| v <= 0.20));
    let trend_ok = match (by_grid.get(&10).copied().flatten(), by_grid.get(&20).copied().flatten()) {
        (Some(a), Some(b)) => b <= a + 0.05,
        _ => false,
    };
    let cvs: Vec<String> = cv
        .iter()
        .map(|c| format!("grid {} {}", c.grid, c.cv.map_or("n/a".into(), |v| format!("{v:.3}"))))
        .collect();
    (
        outcome(
            each_ok && trend_ok,
            format!(
                "ratio CV (need ≤ 0.20 each and grid 20 ≤ grid 10 + 0.05): {}",
                cvs.join(", ")
            ),
        ),
        Some(res),
    )
}

fn random_profiles(rng: &mut ChaCha8Rng, tasks: usize) -> Vec<SupportProfile> {
    let layers = [(2usize, 3usize, 60usize), (3, 2, 40)];
    let axes: Vec<BinAxis> = layers
        .iter()
        .map(|&(_, _, bins)| BinAxis::new(-1.5, 1.5, bins).unwrap())
        .collect();
    (1..=tasks)
        .map(|t| {
            // Each task gets its own density so overlaps range from sparse to dense.
            let p: f64 = rng.random_range(0.05..0.9);
            SupportProfile {
                task_index: t,
                threshold: 1e-2,
                layers: layers
                    .iter()
                    .zip(&axes)
                    .map(|(&(i, o, bins), axis)| LayerSupport {
                        axis: *axis,
                        in_dim: i,
                        out_dim: o,
                        masks: (0..i * o)
                            .map(|_| BranchMask((0..bins).map(|_| rng.random::<f64>() < p).collect()))
                            .collect(),
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Recomputes the bound from the masks alone, in floating point.
fn union_bound_holds(profiles: &[SupportProfile], i: usize) -> Result<(usize, usize), LabError> {
    let u = union_overlap(profiles, i)?;
    let base = &profiles[i];
    let mut checked = 0;
    let mut violations = 0;
    let deltas: Vec<f64> = profiles[i + 1..]
        .iter()
        .map(|p| {
            base.layers
                .iter()
                .zip(&p.layers)
                .flat_map(|(a, b)| a.masks.iter().zip(&b.masks).map(|(x, y)| x.and_count(y) as f64 * a.axis.width()))
                .fold(0.0, f64::max)
        })
        .collect();
    let delta_sum: f64 = deltas.iter().sum();
    for (l, layer) in base.layers.iter().enumerate() {
        for (b, own) in layer.masks.iter().enumerate() {
            let union = (0..layer.axis.bins)
                .filter(|&k| own.0[k] && profiles[i + 1..].iter().any(|p| p.layers[l].masks[b].0[k]))
                .count() as f64
                * layer.axis.width();
            let own_measure = own.count() as f64 * layer.axis.width();
            checked += 1;
            let tol = 1e-12 * (1.0 + delta_sum);
            if union > delta_sum.min(own_measure) + tol || !u.per_branch[l][b].holds {
                violations += 1;
            }
        }
    }
    Ok((checked, violations))
}

fn union_bound(theorem2_result: Option<&ExperimentResult>) -> Outcome {
    let (measured_checked, measured_bad) = match theorem2_result {
        Some(ExperimentResult::CumulativeRatios { runs, .. }) => {
            let rows: Vec<_> = runs.iter().flat_map(|r| &r.unions).collect();
            let bad = rows
                .iter()
                .filter(|u| !u.holds || u.union_measure > u.delta_sum.min(u.own_measure) + 1e-12)
                .count();
            (rows.len(), bad)
        }
        _ => return outcome(false, "no measured runs available (theorem2 run failed)"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut synth_checked = 0;
    let mut synth_bad = 0;
    let mut errors = 0;
    for _ in 0..100 {
        let tasks = rng.random_range(2..=6);
        let profiles = random_profiles(&mut rng, tasks);
        for i in 0..tasks - 1 {
            match union_bound_holds(&profiles, i) {
                Ok((c, v)) => {
                    synth_checked += c;
                    synth_bad += v;
                }
                Err(_) => errors += 1,
            }
        }
    }
    outcome(
        measured_bad == 0 && synth_bad == 0 && errors == 0,
        format!(
            "measured runs: {measured_bad} violations in {measured_checked} branch checks; 100 random profile sets: \
             {synth_bad} violations, {errors} errors in {synth_checked} branch checks"
        ),
    )
}

fn corollary1(s: &Suite) -> Outcome {
    let (_, res) = match s.run(&preset("corollary1-mc"), "c6-corollary1") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Overlap { cells } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let within = cells.iter().filter(|c| c.z_score.abs() <= 3.0).count();
    let zs: Vec<f64> = cells.iter().map(|c| c.z_score).collect();
    let n = cells.first().map_or(0, |c| c.estimate.trials);
    outcome(
        cells.len() == 9 && within >= 8 && n == 100_000,
        format!("{within}/{} cells within 3 standard errors at N = {n}; z = {}", cells.len(), fmt_list(&zs)),
    )
}

fn dimension(s: &Suite) -> Outcome {
    let (_, res) = match s.run(&preset("dimension-mc"), "c7-dimension") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Dimension { fits } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let want = [(1.0, 1.0), (2.0, 3.0), (3.0, 3.0)];
    let mut pass = fits.len() == want.len();
    let mut parts = Vec::new();
    for (f, w) in fits.iter().zip(want) {
        let ok = (f.d_i, f.d_j) == w && (f.study.fit.slope - (w.0 + w.1)).abs() <= 0.3;
        pass &= ok;
        parts.push(format!(
            "({}, {}) slope {:.3} ± {:.3} vs {}",
            f.d_i,
            f.d_j,
            f.study.fit.slope,
            f.study.fit.slope_stderr,
            w.0 + w.1
        ));
    }
    let sweep = fits.first().map(|f| f.study.sweep.clone()).unwrap_or_default();
    outcome(pass, format!("r in {sweep:?}: {}", parts.join("; ")))
}

fn fragmentation(s: &Suite) -> Outcome {
    let (_, res) = match s.run(&preset("fragmentation-mc"), "c8-fragmentation") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Fragmentation { fits } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let mut pass = !fits.is_empty();
    let mut parts = Vec::new();
    for d in [1.0, 2.0] {
        match fits.iter().find(|f| f.d_i == d) {
            Some(f) => {
                let slope = f.study.over_k_i.fit.slope;
                pass &= (slope + d).abs() <= 0.3;
                parts.push(format!("d_i {d}: slope {slope:.3} vs {}", -d));
            }
            None => {
                pass = false;
                parts.push(format!("d_i {d}: missing"));
            }
        }
    }
    let ks = fits.first().map(|f| f.study.over_k_i.sweep.clone()).unwrap_or_default();
    outcome(pass, format!("k_i in {ks:?}: {}", parts.join("; ")))
}

fn mnist(s: &Suite) -> Outcome {
    let mut cfg = preset("theorem3");
    let mut m = cfg.mnist();
    m.data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    cfg.mnist = Some(m);
    let (_, res) = match s.run(&cfg, "c9-theorem3") {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let ExperimentResult::Images { report: Some(report), cv, runs } = &res else {
        return outcome(false, "unexpected result shape");
    };
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "Q{} S{} d {:.2} F_1 {:.3} ratio {}",
                r.quantize_levels.unwrap_or(0),
                r.pixels.unwrap_or(0),
                r.denominator,
                r.forgetting,
                r.ratio.map_or("null".into(), |v| format!("{v:.4}"))
            )
        })
        .collect();
    println!("     {}", rows.join("; "));
    let per_task = runs.first().map_or(0, |r| r.accuracies.len());
    let seeds: std::collections::BTreeSet<u64> = runs.iter().map(|r| r.seed).collect();
    outcome(
        cv.is_some_and(|v| v <= 0.25) && report.rows.len() == 7 && seeds.len() == 3,
        format!(
            "{} configs × {} seeds, {per_task} tasks, 200 samples/task: CV of log10(F_1)/d = {} (need ≤ 0.25)",
            report.rows.len(),
            seeds.len(),
            cv.map_or("n/a".into(), |v| format!("{v:.3}"))
        ),
    )
}

fn idx_images(count: u32, h: u32, w: u32) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [2051u32, count, h, w] {
        b.extend(v.to_be_bytes());
    }
    b.extend((0..count * h * w).map(|i| (i % 251) as u8));
    b
}

fn kernels() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    // Partition of unity on the grid range.
    let mut worst_pu: f64 = 0.0;
    for (g, k) in [(5, 3), (10, 3), (20, 3), (7, 2), (3, 1)] {
        let grid = KnotGrid::symmetric(g, k).unwrap();
        for _ in 0..2000 {
            let x: f64 = rng.random_range(-1.0..=1.0);
            worst_pu = worst_pu.max((grid.eval_basis(x).unwrap().sum() - 1.0).abs());
        }
    }
    pass &= worst_pu < 1e-12;
    notes.push(format!("partition of unity max error {worst_pu:.1e}"));

    // Parameter gradient against central differences.
    let init = KanInit {
        noise_scale: 1.0,
        ..KanInit::default()
    };
    let net = KanNetwork::init(&[2, 3, 2], &init, 77).unwrap();
    let batch = Matrix::from_vec(4, 2, (0..8).map(|_| rng.random_range(-0.9..0.9)).collect());
    let weights = Matrix::from_vec(4, 2, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
    let analytic = net.backward(&net.forward(&batch).unwrap(), &weights).unwrap().flatten();
    let objective = |n: &KanNetwork| -> f64 {
        let out = n.predict(&batch).unwrap();
        out.as_slice().iter().zip(weights.as_slice()).map(|(a, b)| a * b).sum()
    };
    let params = net.params();
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    let mut probe = net.clone();
    for _ in 0..20 {
        let k = rng.random_range(0..params.len());
        let mut p = params.clone();
        p[k] += h;
        probe.set_params(&p);
        let up = objective(&probe);
        p[k] -= 2.0 * h;
        probe.set_params(&p);
        let down = objective(&probe);
        let fd = (up - down) / (2.0 * h);
        // Coordinates with vanishing gradient are compared on an absolute 1e-4 scale.
        let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(1e-4);
        worst_fd = worst_fd.max(rel);
    }
    pass &= worst_fd < 1e-5;
    notes.push(format!("gradient vs finite difference max rel error {worst_fd:.1e} on 20 coordinates"));

    // AdamW first step: m̂ = g, v̂ = g², so Δθ = −lr·g/(|g| + ε) after decay.
    let cfg = TrainConfig::default();
    let p0: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
    let g: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut p = p0.clone();
    let mut st = AdamwState::new(p.len());
    adamw_step(&mut st, &mut p, &g, &cfg).unwrap();
    let adam_err = (0..p.len())
        .map(|k| {
            let want = p0[k] * (1.0 - cfg.learning_rate * cfg.weight_decay)
                - cfg.learning_rate * g[k] / (g[k].abs() + cfg.epsilon);
            (p[k] - want).abs()
        })
        .fold(0.0, f64::max);
    pass &= adam_err <= 1e-12;
    notes.push(format!("AdamW first step max error {adam_err:.1e}"));

    // Encodings.
    let digits_ok = (0..10u8).all(|d| decode_digit(encode_digit(d)) == d);
    let carry_ok = [false, true].iter().all(|c| decode_carry(encode_carry(*c)) == *c);
    let binary_ok = (0..16u8).all(|a| {
        (0..16u8).all(|b| {
            let rows = unroll_binary(a, b);
            let bits: Vec<f64> = rows.iter().map(|(_, y)| y[0]).collect();
            reassemble_binary(&bits, rows.last().unwrap().1[1]) == a as u32 + b as u32
        })
    });
    let ckpt_ok = KanNetwork::from_checkpoint(&net.to_checkpoint(77))
        .map(|(n, _)| n.params().iter().zip(&params).all(|(a, b)| a.to_bits() == b.to_bits()))
        .unwrap_or(false);
    let enc_ok = digits_ok && carry_ok && binary_ok && ckpt_ok;
    pass &= enc_ok;
    notes.push(format!(
        "round-trips digits {digits_ok}, carry {carry_ok}, binary {binary_ok}, checkpoint {ckpt_ok}"
    ));

    // IDX headers.
    let good = idx_images(3, 2, 2);
    let mut bad_magic = good.clone();
    bad_magic[3] = 0x02;
    let mut bad_count = good.clone();
    bad_count[7] = 9;
    let truncated = good[..10].to_vec();
    let mut labels = Vec::new();
    labels.extend(2049u32.to_be_bytes());
    labels.extend(3u32.to_be_bytes());
    labels.extend([1u8, 2, 3]);
    let mut bad_labels = labels.clone();
    bad_labels[2] = 0x09;
    let idx_ok = parse_idx_images(&good, "good").is_ok()
        && parse_idx_images(&bad_magic, "magic").is_err()
        && parse_idx_images(&bad_count, "count").is_err()
        && parse_idx_images(&truncated, "short").is_err()
        && parse_idx_images(&labels, "labels as images").is_err()
        && parse_idx_labels(&labels, "labels").is_ok()
        && parse_idx_labels(&bad_labels, "bad labels").is_err();
    pass &= idx_ok;
    notes.push(format!("IDX corrupted headers rejected {idx_ok}"));

    outcome(pass, notes.join("; "))
}

fn payloads(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(s: &Suite) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, first) in [
        ("binary-add", "c1-binary"),
        ("theorem1", "c3-theorem1"),
        ("corollary1-mc", "c6-corollary1"),
    ] {
        let a = s.scratch.path().join(first);
        let b_tag = format!("c11-{name}");
        if let Err(e) = s.run(&preset(name), &b_tag) {
            pass = false;
            parts.push(format!("{name}: rerun failed: {e}"));
            continue;
        }
        let pa = payloads(&a);
        let pb = payloads(&s.scratch.path().join(&b_tag));
        let csvs = pa.keys().filter(|k| k.ends_with(".csv")).count();
        let same = !pa.is_empty() && pa == pb;
        pass &= same && csvs > 0;
        parts.push(format!(
            "{name}: {} files ({csvs} CSV) {}",
            pa.len(),
            if same { "identical" } else { "differ" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut suite = Suite {
        scratch: tempfile::tempdir().expect("scratch dir"),
        opts: RunOptions {
            workers,
            seed_offset: 0,
        },
        results: Vec::new(),
    };
    println!("acceptance suite ({workers} worker(s))");
    suite.check(1, "binary-addition retention", Some(60.0), binary_retention);
    binary_seed_sweep(&suite);
    suite.check(2, "decimal grid-size trend", Some(300.0), decimal_trend);
    suite.check(3, "pairwise ratio constancy", None, theorem1);
    let mut t2 = None;
    suite.check(4, "cumulative ratio constancy", None, |s| {
        let (o, r) = theorem2(s);
        t2 = r;
        o
    });
    suite.check(5, "union bound", None, |_| union_bound(t2.as_ref()));
    suite.check(6, "interval overlap Monte Carlo", None, corollary1);
    suite.check(7, "dimension exponent recovery", Some(60.0), dimension);
    suite.check(8, "fragmentation exponents", Some(60.0), fragmentation);
    suite.check(9, "MNIST intrinsic-dimension constancy", Some(1800.0), mnist);
    suite.check(10, "numerical kernels", None, |_| kernels());
    suite.check(11, "determinism", None, determinism);

    let passed = suite.results.iter().filter(|r| r.2).count();
    let failed: Vec<String> = suite
        .results
        .iter()
        .filter(|r| !r.2)
        .map(|r| format!("{} ({})", r.0, r.1))
        .collect();
    println!("acceptance: {passed}/{} criteria passed", suite.results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        if std::env::var_os("KANLAB_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
