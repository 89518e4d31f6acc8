//! Acceptance criteria, one line of output each.
//!
//! Runs as a plain binary (`harness = false`) so the PASS/FAIL lines always
//! show up in `cargo test` output.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pnm_cli::{bench_mask, cmd_eval, evaluate_files, save_mask, EvalArgs, PnmFlags};
use pnm_core::io::{decode_weight_map, write_weight_map};
use pnm_core::synthetic::boundary_pixels;
use pnm_core::{
    accumulate, compute_pnm_fast, compute_pnm_naive, compute_weights, error_rate_bins, fixture,
    miou, pnm_iou, transform_weights, trivial_split_mask, zigzag_mask, BorderPolicy, Error,
    Fixture, LabelMask, PnmConfig, PnmCount, PnmMap, Transform, WeightMap, ZigzagSpec,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SIZE: usize = 1024;
const MIOU_TOL: f64 = 0.003;
const ZIGZAG_RUNTIME: Duration = Duration::from_secs(2);
const EQUIVALENCE_RUNTIME: Duration = Duration::from_secs(30);
const REDUCTION_TOL: f64 = 1e-12;
const FAST_BUDGET: Duration = Duration::from_millis(250);
const MIN_SPEEDUP: f64 = 20.0;

/// PNM IoU (d = 35, log transform) of the trivial split segmenter on zigzag
/// images 1..=5 at 1024×1024, from an independent numpy implementation
/// (tests/oracle/zigzag_oracle.py: summed-area-table counts, direct weighted
/// sums). Weights are rounded to f32 there as they are here.
const PINNED_PNM_IOU: [f64; 5] = [
    0.593213574082,
    0.587238041707,
    0.575502685273,
    0.553821249604,
    0.515526239988,
];
const PINNED_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn zigzag(n: u32) -> LabelMask {
    zigzag_mask(&ZigzagSpec::new(n, SIZE, SIZE).unwrap()).unwrap()
}

/// Writes the five zigzag ground truths and the trivial prediction as PNGs.
fn write_zigzag_pairs(dir: &Path) {
    save_mask(
        &trivial_split_mask(SIZE, SIZE, 0, 1).unwrap(),
        &dir.join("pred.png"),
    )
    .unwrap();
    for n in 1..=5 {
        save_mask(&zigzag(n), &dir.join(format!("gt{n}.png"))).unwrap();
    }
}

fn zigzag_scores(dir: &Path) -> Result<(Vec<(f64, f64)>, Duration), String> {
    let flags = PnmFlags::default();
    let start = Instant::now();
    let scores = (1..=5)
        .map(|n| {
            let eval = evaluate_files(
                &dir.join("pred.png"),
                &dir.join(format!("gt{n}.png")),
                &flags,
            )
            .map_err(|e| e.to_string())?;
            Ok((eval.miou.mean, eval.pnm_iou.mean))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok((scores, start.elapsed()))
}

fn ac1_miou_invariance(dir: &Path) -> Outcome {
    let (scores, elapsed) = zigzag_scores(dir)?;
    for (n, (m, _)) in scores.iter().enumerate() {
        check(
            (m - 0.6).abs() <= MIOU_TOL,
            format!("n={} miou={m:.6}", n + 1),
        )?;
    }
    check(
        elapsed < ZIGZAG_RUNTIME,
        format!("took {elapsed:?}, budget {ZIGZAG_RUNTIME:?}"),
    )?;

    // the CSV written by the eval command carries the same summary
    let out = dir.join("eval3.csv");
    cmd_eval(&EvalArgs {
        pred: dir.join("pred.png"),
        gt: dir.join("gt3.png"),
        flags: PnmFlags::default(),
        output: Some(out.clone()),
    })
    .map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let summary = csv.lines().last().unwrap_or_default();
    check(
        summary.starts_with("mean,,,0.600000,,,"),
        format!("summary row {summary:?}"),
    )?;
    let ms: Vec<String> = scores.iter().map(|s| format!("{:.6}", s.0)).collect();
    Ok(format!("miou = [{}] in {elapsed:.2?}", ms.join(", ")))
}

/// Direct weighted IoU sums over the naive kernel's counts.
fn oracle_pnm_iou(pred: &LabelMask, gt: &LabelMask) -> f64 {
    let pnm = compute_pnm_naive(gt, &PnmConfig::default()).unwrap();
    let mut inter = [0.0f64; 2];
    let mut union = [0.0f64; 2];
    for (i, (&y, &t)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        let rho = (1.0 - pnm.value(i).ln()) as f32 as f64;
        for k in 0..2u16 {
            let (yk, tk) = (y == k, t == k);
            if yk && tk {
                inter[k as usize] += rho;
            }
            if yk || tk {
                union[k as usize] += rho;
            }
        }
    }
    (inter[0] / union[0] + inter[1] / union[1]) / 2.0
}

fn ac2_pnm_iou_decreases(dir: &Path) -> Outcome {
    let (scores, _) = zigzag_scores(dir)?;
    let pnm: Vec<f64> = scores.iter().map(|s| s.1).collect();
    for (n, (got, want)) in pnm.iter().zip(PINNED_PNM_IOU).enumerate() {
        check(
            (got - want).abs() <= PINNED_TOL,
            format!("n={} pnm_iou={got:.12} pinned {want:.12}", n + 1),
        )?;
    }
    check(
        pnm.windows(2).all(|w| w[1] < w[0]),
        format!("not strictly decreasing: {pnm:?}"),
    )?;
    check(pnm[0] < scores[0].0, "PNM IoU(1) is not below mIoU")?;

    let pred = trivial_split_mask(SIZE, SIZE, 0, 1).unwrap();
    let oracle: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=5)
            .map(|n| {
                let pred = &pred;
                s.spawn(move || oracle_pnm_iou(pred, &zigzag(n)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (n, (got, want)) in pnm.iter().zip(&oracle).enumerate() {
        check(
            (got - want).abs() <= PINNED_TOL,
            format!("n={} differs from naive oracle {want:.12}", n + 1),
        )?;
    }
    let shown: Vec<String> = pnm.iter().map(|v| format!("{v:.6}")).collect();
    Ok(format!("pnm_iou = [{}]", shown.join(", ")))
}

fn ac3_kernel_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let start = Instant::now();
    for case in 0..200 {
        let w = rng.gen_range(1..=257);
        let h = rng.gen_range(1..=131);
        let classes = rng.gen_range(1..=19u16);
        let labels = (0..w * h)
            .map(|_| {
                if rng.gen_bool(0.05) {
                    255
                } else {
                    rng.gen_range(0..classes)
                }
            })
            .collect();
        let mask = LabelMask::new(w, h, labels, Some(255)).unwrap();
        let d = [1u16, 3, 5, 35][rng.gen_range(0..4)];
        let config = PnmConfig::with_scale(d).unwrap();
        let naive = compute_pnm_naive(&mask, &config).unwrap();
        let fast = compute_pnm_fast(&mask, &config).unwrap();
        check(
            naive.counts() == fast.counts(),
            format!("case {case}: {w}x{h} K={classes} d={d} differs"),
        )?;
    }
    let elapsed = start.elapsed();
    check(
        elapsed < EQUIVALENCE_RUNTIME,
        format!("took {elapsed:?}, budget {EQUIVALENCE_RUNTIME:?}"),
    )?;
    Ok(format!("200 masks identical in {elapsed:.2?}"))
}

fn ac4_reduction() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let unit_scale = PnmConfig::with_scale(1).unwrap();
    let mut worst = 0.0f64;
    for case in 0..50 {
        let w = rng.gen_range(1..=64);
        let h = rng.gen_range(1..=64);
        let k = rng.gen_range(1..=6u16);
        let mut labels = || -> Vec<u16> {
            (0..w * h)
                .map(|_| {
                    if rng.gen_bool(0.05) {
                        255
                    } else {
                        rng.gen_range(0..k)
                    }
                })
                .collect()
        };
        let gt = LabelMask::new(w, h, labels(), Some(255)).unwrap();
        let pred = LabelMask::new(w, h, labels(), Some(255)).unwrap();
        let weights = compute_weights(&gt, &unit_scale).unwrap();
        let m = miou(&accumulate(&pred, &gt, None).unwrap());
        let p = pnm_iou(&accumulate(&pred, &gt, Some(&weights)).unwrap());
        match (m, p) {
            (Ok(m), Ok(p)) => {
                let diff = (m.mean - p.mean).abs();
                worst = worst.max(diff);
                check(diff <= REDUCTION_TOL, format!("case {case}: diff {diff:e}"))?;
            }
            (Err(Error::EmptyUnion), Err(Error::EmptyUnion)) => {}
            other => return Err(format!("case {case}: {other:?}")),
        }
    }
    Ok(format!("max |pnm_iou - miou| = {worst:e}"))
}

fn ac5_transform_ranges() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    for case in 0..500 {
        let n = rng.gen_range(1..=256);
        let counts: Vec<PnmCount> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.05) {
                    return PnmCount::EXCLUDED;
                }
                let total = rng.gen_range(1..=35 * 35);
                let same = if rng.gen_bool(0.2) {
                    total
                } else {
                    rng.gen_range(1..=total)
                };
                PnmCount { same, total }
            })
            .collect();
        let pnm = PnmMap::from_counts(n, 1, 35, BorderPolicy::ClipNormalized, counts).unwrap();
        let log = transform_weights(&pnm, Transform::Log).unwrap();
        let lin = transform_weights(&pnm, Transform::LinearComplement).unwrap();
        let rec = transform_weights(&pnm, Transform::Reciprocal).unwrap();
        for i in 0..n {
            check(
                log.weight(i) >= 1.0 && rec.weight(i) >= 1.0,
                format!("case {case} pixel {i}: weight below 1"),
            )?;
            check(
                (1.0..=2.0).contains(&lin.weight(i)),
                format!("case {case} pixel {i}: linear weight {}", lin.weight(i)),
            )?;
            if pnm.value(i) == 1.0 {
                check(
                    log.weight(i) == 1.0 && lin.weight(i) == 1.0 && rec.weight(i) == 1.0,
                    format!("case {case} pixel {i}: p = 1 not mapped to 1"),
                )?;
            }
        }
    }
    Ok("500 random maps".into())
}

fn mean_where(w: &WeightMap, select: impl Fn(usize) -> bool) -> f64 {
    let picked: Vec<f64> = (0..w.len())
        .filter(|&i| select(i))
        .map(|i| w.weight(i) as f64)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}

fn ac6_discriminative() -> Outcome {
    let config = PnmConfig::default();
    let d = config.d as usize;

    // P2: disk of radius 3d
    let radius = 3.0 * d as f64;
    let size = 2 * (3 * d + d);
    let disk = fixture(Fixture::Disk { radius }, size, size).unwrap();
    let w = compute_weights(&disk, &config).unwrap();
    let c = size / 2;
    check(
        w.weight(c * size + c) == 1.0,
        "P2: disk centre weight is not 1",
    )?;
    let reach = (d / 2) as f64;
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 + 0.5 - c as f64, y as f64 + 0.5 - c as f64);
            if ((dx * dx + dy * dy).sqrt() - radius).abs() <= reach {
                check(
                    w.weight(y * size + x) > 1.0,
                    format!("P2: ({x},{y}) near the boundary has weight 1"),
                )?;
            }
        }
    }

    // P1: squares of side 3 and 31
    let (sw, sh) = (200, 100);
    let squares = fixture(
        Fixture::TwoSquares {
            small: 3,
            large: 31,
        },
        sw,
        sh,
    )
    .unwrap();
    let w = compute_weights(&squares, &config).unwrap();
    let fg = |i: usize| squares.labels()[i] == 1;
    let small = mean_where(&w, |i| fg(i) && i % sw < sw / 2);
    let large = mean_where(&w, |i| fg(i) && i % sw >= sw / 2);
    check(small > large, format!("P1: small {small} <= large {large}"))?;

    // P4: 3-pixel stripe
    let stripe = fixture(Fixture::Stripe { thickness: 3 }, 120, 120).unwrap();
    let w = compute_weights(&stripe, &config).unwrap();
    let edge = boundary_pixels(&stripe);
    let inside = mean_where(&w, |i| stripe.labels()[i] == 1);
    let beside = mean_where(&w, |i| stripe.labels()[i] == 0 && edge[i]);
    check(
        inside > beside,
        format!("P4: stripe {inside} <= background {beside}"),
    )?;

    // P3: mean boundary weight grows with zigzag sharpness
    let mut boundary_means = Vec::new();
    for n in 1..=5 {
        let gt = zigzag(n);
        let w = compute_weights(&gt, &config).unwrap();
        let edge = boundary_pixels(&gt);
        boundary_means.push(mean_where(&w, |i| edge[i]));
    }
    check(
        boundary_means.windows(2).all(|p| p[1] > p[0]),
        format!("P3: boundary means {boundary_means:?}"),
    )?;
    Ok(format!(
        "P1 {small:.3}>{large:.3}, P4 {inside:.3}>{beside:.3}, P3 {:.3}..{:.3}",
        boundary_means[0], boundary_means[4]
    ))
}

/// Flips every pixel within Chebyshev distance `reach` of the other class.
fn flip_near_boundary(gt: &LabelMask, reach: usize) -> LabelMask {
    let (w, h) = (gt.width(), gt.height());
    LabelMask::from_fn(w, h, None, |x, y| {
        let l = gt.get(x, y);
        let near = (y.saturating_sub(reach)..(y + reach + 1).min(h)).any(|yy| {
            (x.saturating_sub(reach)..(x + reach + 1).min(w)).any(|xx| gt.get(xx, yy) != l)
        });
        if near {
            1 - l
        } else {
            l
        }
    })
    .unwrap()
}

fn ac7_error_rate_bins(dir: &Path) -> Outcome {
    let gt = zigzag(3);
    let pred = flip_near_boundary(&gt, 2);
    save_mask(&pred, &dir.join("flip3.png")).map_err(|e| e.to_string())?;
    let report = pnm_cli::cmd_bins(&pnm_cli::BinsArgs {
        pred: dir.join("flip3.png"),
        gt: dir.join("gt3.png"),
        flags: PnmFlags::default(),
        edges: None,
        output: Some(dir.join("bins3.csv")),
    })
    .map_err(|e| e.to_string())?;

    // the library path on the in-memory masks agrees with the command
    let w = compute_weights(&gt, &PnmConfig::default()).unwrap();
    let direct = error_rate_bins(&pred, &gt, &w, &pnm_core::default_bin_edges()).unwrap();
    check(direct == report, "command and library reports differ")?;

    let rates = report.defined_rates();
    let listing: Vec<String> = report
        .bins
        .iter()
        .filter_map(|b| {
            b.error_rate()
                .map(|r| format!("[{}:{:.1}%]", b.lower, r * 100.0))
        })
        .collect();
    check(
        rates.windows(2).all(|p| p[1] >= p[0]),
        format!("error rates not monotone: {}", listing.join(" ")),
    )?;
    check(
        rates.last().is_some_and(|&r| r > 0.0),
        "no errors in the top bin",
    )?;
    let shown: Vec<String> = rates.iter().map(|r| format!("{:.2}", r * 100.0)).collect();
    Ok(format!("error rate % by bin = [{}]", shown.join(", ")))
}

fn ac8_performance() -> Outcome {
    let config = PnmConfig::default();
    let mask = bench_mask(2048, 1024, 19, 8);
    // warm-up, then best of three
    let _ = compute_pnm_fast(&mask, &config).unwrap();
    let mut fast_time = Duration::MAX;
    let mut fast = None;
    for _ in 0..3 {
        let start = Instant::now();
        let map = compute_pnm_fast(&mask, &config).unwrap();
        fast_time = fast_time.min(start.elapsed());
        fast = Some(map);
    }
    let start = Instant::now();
    let naive = compute_pnm_naive(&mask, &config).unwrap();
    let naive_time = start.elapsed();
    check(
        fast.unwrap().counts() == naive.counts(),
        "fast and naive counts differ",
    )?;
    let speedup = naive_time.as_secs_f64() / fast_time.as_secs_f64();
    check(
        fast_time < FAST_BUDGET,
        format!("fast kernel took {fast_time:?}, budget {FAST_BUDGET:?}"),
    )?;
    check(
        speedup >= MIN_SPEEDUP,
        format!("speedup {speedup:.1}x below {MIN_SPEEDUP}x"),
    )?;
    Ok(format!(
        "fast {fast_time:.2?}, naive {naive_time:.2?}, speedup {speedup:.1}x, identical"
    ))
}

fn ac9_round_trips() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    for case in 0..100 {
        let w = rng.gen_range(1..=64);
        let h = rng.gen_range(1..=64);
        let n = w * h;
        let weights: Vec<f32> = (0..n).map(|_| rng.gen_range(1.0f32..50.0)).collect();
        let excluded: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let d = 2 * rng.gen_range(0..40u16) + 1;
        let transform = Transform::ALL[rng.gen_range(0..3)];
        let border = if rng.gen_bool(0.5) {
            BorderPolicy::Reflect
        } else {
            BorderPolicy::ClipNormalized
        };
        let config = PnmConfig::new(d, transform, border).unwrap();
        let map = WeightMap::new(w, h, weights, excluded, config).unwrap();
        let mut buf = Vec::new();
        write_weight_map(&map, &mut buf).map_err(|e| e.to_string())?;
        let back = decode_weight_map(&buf).map_err(|e| e.to_string())?;
        let bits = |m: &WeightMap| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        check(
            back == map && bits(&back) == bits(&map),
            format!("case {case}: round trip differs"),
        )?;
    }

    let map = WeightMap::uniform(3, 2).unwrap();
    let mut good = Vec::new();
    write_weight_map(&map, &mut good).unwrap();
    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"XXXX");
    check(
        matches!(decode_weight_map(&bad_magic), Err(Error::BadMagic { .. })),
        "bad magic not detected",
    )?;
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    check(
        matches!(
            decode_weight_map(&bad_version),
            Err(Error::UnsupportedVersion(9))
        ),
        "bad version not detected",
    )?;
    check(
        matches!(
            decode_weight_map(&good[..good.len() - 3]),
            Err(Error::Truncated { .. })
        ),
        "truncation not detected",
    )?;
    Ok("100 maps bit-identical; magic, version, truncation rejected".into())
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    write_zigzag_pairs(dir.path());

    let criteria: Vec<Criterion> = vec![
        (
            "AC1 zigzag mIoU = 0.600 +- 0.003",
            Box::new(|| ac1_miou_invariance(dir.path())),
        ),
        (
            "AC2 PNM IoU strictly decreasing",
            Box::new(|| ac2_pnm_iou_decreases(dir.path())),
        ),
        (
            "AC3 fast kernel == naive kernel",
            Box::new(ac3_kernel_equivalence),
        ),
        ("AC4 d=1 PNM IoU == mIoU", Box::new(ac4_reduction)),
        ("AC5 transform ranges", Box::new(ac5_transform_ranges)),
        (
            "AC6 discriminative properties",
            Box::new(ac6_discriminative),
        ),
        (
            "AC7 error rate by weight bin",
            Box::new(|| ac7_error_rate_bins(dir.path())),
        ),
        ("AC8 fast kernel performance", Box::new(ac8_performance)),
        ("AC9 weight map format", Box::new(ac9_round_trips)),
    ];

    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
