//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p cpcapp-cli --test acceptance`. The process exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cpcapp::bench::run_bench;
use cpcapp::datagen::{
    four_class_covariances, four_class_q, gen_four_class, gen_haystack, gen_splice_set, gen_textured_digits,
    oracle_four_class_filters, Kind, SyntheticSpec, FOUR_CLASS_DIM,
};
use cpcapp::factor::{denoise, glrt_statistic, recover_w, FactorModel};
use cpcapp::image::Image;
use cpcapp::linalg::{dot, max_principal_angle, norm2, sym_eig, Matrix};
use cpcapp::reducers::{default_alpha_grid, fit_cpca, fit_cpcapp, fit_pca, transform};
use cpcapp::rng::Rng;
use cpcapp::splicing::{
    binarize_and_score, edge_mask, f1_score, localize, mcc_score, random_scorer_f1,
    train_splice, ConfusionCounts, ProbabilityMap, SpliceConfig,
};
use cpcapp::stats::{build_covariance_pair, CovariancePair, DataMatrix};
use rayon::prelude::*;

/// Outcome of one criterion: pass flag plus the measured quantities.
type Outcome = (bool, String);

type Criterion = (&'static str, fn() -> Outcome);

fn abs_cos(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm2(a) * norm2(b))).abs()
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let (ok, msg) = f();
    let dt = t.elapsed();
    match limit {
        Some(l) => (ok && dt < l, format!("{msg}; {:.2}s (limit {}s)", dt.as_secs_f64(), l.as_secs())),
        None => (ok, format!("{msg}; {:.2}s", dt.as_secs_f64())),
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

// 1. Four-class filters against the closed form.
fn four_class_oracle() -> Outcome {
    timed(secs(5), || {
        let oracle = oracle_four_class_filters();
        let worst = |n: usize| {
            let spec = SyntheticSpec::new(Kind::FourClass, 1).with_counts(n, n);
            let (fg, bg) = gen_four_class(&spec).unwrap();
            let bank = fit_cpcapp(&build_covariance_pair(&bg, &fg.data).unwrap(), 2).unwrap();
            (0..2)
                .map(|i| abs_cos(&bank.filter(i), &oracle.column(i)))
                .fold(f64::INFINITY, f64::min)
        };
        let (small, large) = (worst(400), worst(10_000));
        (
            small >= 0.95 && large >= 0.99,
            format!("min |cos| {small:.4} at N=400 (>= 0.95), {large:.4} at N=10^4 (>= 0.99)"),
        )
    })
}

// 2. Analytic eigenvalues of Q.
fn analytic_eigenvalues() -> Outcome {
    timed(None, || {
        let e = sym_eig(&four_class_q()).unwrap();
        let (l1, l2) = (e.values[0], e.values[1]);
        (
            (l1 - 30.33).abs() <= 0.01 && (l2 - 23.50).abs() <= 0.01,
            format!("top eigenvalues {l1:.4}, {l2:.4} (want 30.33, 23.50 within 0.01)"),
        )
    })
}

fn haystack_data() -> (cpcapp::datagen::Haystack, DataMatrix, DataMatrix) {
    let spec = SyntheticSpec::new(Kind::Haystack, 5);
    let h = gen_haystack(&spec).unwrap();
    let (fg, bg) = h.sample(spec.n_fg, spec.n_bg, spec.seed).unwrap();
    (h, fg, bg)
}

// 3. Example 1 (haystack).
fn example_one() -> Outcome {
    timed(secs(1), || {
        let (h, fg, bg) = haystack_data();
        let pair = build_covariance_pair(&bg, &fg).unwrap();
        let pp = abs_cos(&fit_cpcapp(&pair, 1).unwrap().filter(0), &h.c);
        let pca = abs_cos(&fit_pca(&fg, 1).unwrap().filter(0), &h.a);
        let cpca = abs_cos(&fit_cpca(&pair, 1, h.beta / h.gamma).unwrap().filter(0), &h.c);
        (
            pp >= 0.99 && pca >= 0.99 && cpca >= 0.99,
            format!("|cos| cpca++/c {pp:.5}, pca/a {pca:.5}, cpca(beta/gamma)/c {cpca:.5} (all >= 0.99)"),
        )
    })
}

// 4. PCA fails on the four-class foreground.
fn pca_negative_control() -> Outcome {
    timed(None, || {
        let (fg, _) = gen_four_class(&SyntheticSpec::new(Kind::FourClass, 1)).unwrap();
        let bank = fit_pca(&fg.data, 2).unwrap();
        let block: f64 = (0..2)
            .map(|j| (20..FOUR_CLASS_DIM).map(|i| bank.f[(i, j)].powi(2)).sum::<f64>())
            .sum::<f64>()
            / 2.0;
        let y = transform(&bank, &fg.data).unwrap().y;
        let mut centroids = [[0.0f64; 2]; 4];
        let mut counts = [0usize; 4];
        for (j, &l) in fg.labels.iter().enumerate() {
            counts[l - 1] += 1;
            for d in 0..2 {
                centroids[l - 1][d] += y[(d, j)];
            }
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        let within = (fg
            .labels
            .iter()
            .enumerate()
            .map(|(j, &l)| (0..2).map(|d| (y[(d, j)] - centroids[l - 1][d]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / fg.labels.len() as f64)
            .sqrt();
        let mut between = 0.0f64;
        for a in 0..4 {
            for b in a + 1..4 {
                let d = (0..2).map(|k| (centroids[a][k] - centroids[b][k]).powi(2)).sum::<f64>();
                between = between.max(d.sqrt());
            }
        }
        // Population spectrum of R_f: shows which directions PCA must pick.
        let pop = sym_eig(&four_class_covariances().1).unwrap().values;
        (
            block >= 0.8 && between < within,
            format!(
                "h3 mass {block:.4} (>= 0.8); max centroid distance {between:.3} < within-class std {within:.3}; \
                 population R_f top eigenvalues {:.2}, {:.2}, {:.2} (h3 variance is 10)",
                pop[0], pop[1], pop[2]
            ),
        )
    })
}

// 5. cPCA at alpha = 0 is PCA.
fn cpca_alpha_zero() -> Outcome {
    timed(None, || {
        let (fg, bg) = gen_four_class(&SyntheticSpec::new(Kind::FourClass, 2)).unwrap();
        let pair = build_covariance_pair(&bg, &fg.data).unwrap();
        let mut worst = 0.0f64;
        for k in [1, 2, 3] {
            let a = fit_cpca(&pair, k, 0.0).unwrap();
            let b = fit_pca(&fg.data, k).unwrap();
            worst = worst.max(max_principal_angle(&a.f, &b.f).unwrap());
        }
        (worst < 1e-6, format!("max principal angle {worst:.2e} (< 1e-6), K = 1..3"))
    })
}

// 6. Decomposition counts and wall-clock speedup.
fn efficiency() -> Outcome {
    timed(secs(30), || {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let spec = SyntheticSpec::new(Kind::FourClass, 1);
        let grid = default_alpha_grid();
        let r = pool
            .install(|| run_bench(&spec, &["cpca", "cpca++"], &grid, 2, 7))
            .unwrap();
        let n_cpca = r.entry(cpcapp::reducers::Method::Cpca).unwrap().decompositions;
        let n_pp = r.entry(cpcapp::reducers::Method::CpcaPlusPlus).unwrap().decompositions;
        let speedup = r.speedup().unwrap();
        (
            n_cpca == 41 && n_pp == 1 && speedup >= 10.0,
            format!("eigendecompositions cpca {n_cpca} vs cpca++ {n_pp} (41 vs 1); speedup {speedup:.1}x (>= 10x, one thread)"),
        )
    })
}

fn random_spd(rng: &mut Rng, m: usize) -> Matrix {
    let a = Matrix::from_fn(m, m, |_, _| rng.gaussian());
    let mut s = a.matmul(&a.transpose()).unwrap().add_diag(m as f64);
    s.symmetrize();
    s
}

fn random_psd(rng: &mut Rng, m: usize, rank: usize) -> Matrix {
    let a = Matrix::from_fn(m, rank, |_, _| rng.gaussian());
    let mut s = a.matmul(&a.transpose()).unwrap();
    s.symmetrize();
    s
}

fn pair_of(r_b: Matrix, r_f: Matrix) -> CovariancePair {
    let m = r_b.rows();
    CovariancePair { r_b, r_f, loading: 0.0, n_b: 1, n_f: 1, mean_b: vec![0.0; m], mean_f: vec![0.0; m] }
}

// 7. Biorthogonality and idempotence.
fn factorization() -> Outcome {
    timed(None, || {
        let mut rng = Rng::new(7);
        let (mut worst_bi, mut worst_idem) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let m = 2 + rng.below(49);
            let rank = 1 + rng.below(m);
            let k = 1 + rng.below(rank.min(6));
            let pair = pair_of(random_spd(&mut rng, m), random_psd(&mut rng, m, rank));
            let model = recover_w(&pair, &fit_cpcapp(&pair, k).unwrap()).unwrap();
            let bi = model.f.tr_matmul(&model.w).unwrap().sub(&Matrix::identity(k)).unwrap().max_abs();
            let p = model.projector();
            let idem = p.matmul(&p).unwrap().sub(&p).unwrap().frobenius_norm() / p.frobenius_norm();
            worst_bi = worst_bi.max(bi);
            worst_idem = worst_idem.max(idem);
        }
        (
            worst_bi <= 1e-7 && worst_idem <= 1e-6,
            format!("max |F^T W - I| {worst_bi:.2e} (<= 1e-7); max relative |P^2 - P| {worst_idem:.2e} (<= 1e-6); 100 instances, M <= 50"),
        )
    })
}

// 8. GLRT sanity.
fn glrt() -> Outcome {
    timed(None, || {
        let (_, fg, bg) = haystack_data();
        let pair = build_covariance_pair(&bg, &fg).unwrap();
        let (zf, zb) = (fg.center(), bg.center());
        let mut rng = Rng::new(8);
        let mut ok = true;
        let mut detail = Vec::new();
        for k in [1, 2] {
            let w = recover_w(&pair, &fit_cpcapp(&pair, k).unwrap()).unwrap().w;
            let best = glrt_statistic(&zf, &zb, &w).unwrap();
            let mut rival = 0.0f64;
            for _ in 0..100 {
                let r = Matrix::from_fn(w.rows(), k, |_, _| rng.gaussian());
                rival = rival.max(glrt_statistic(&zf, &zb, &r).unwrap());
            }
            ok &= best >= rival;
            detail.push(format!("K={k}: optimal {best:.4} vs best random {rival:.4}"));
        }
        let z = DataMatrix::new(Matrix::from_fn(6, 80, |_, _| rng.gaussian())).unwrap().center();
        let w = Matrix::from_fn(6, 3, |_, _| rng.gaussian());
        let same = glrt_statistic(&z, &z, &w).unwrap();
        let rel = (same / 8.0 - 1.0).abs();
        ok &= rel <= 1e-6;
        detail.push(format!("identical statistics {same:.9} vs 2^3 (rel err {rel:.1e})"));
        (ok, detail.join("; "))
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut s, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        s += (x - ma) * (y - mb);
        sa += (x - ma).powi(2);
        sb += (y - mb).powi(2);
    }
    s / (sa * sb).sqrt()
}

/// Mean reconstruction-vs-clean correlation over the first `images`
/// foreground samples, for cPCA++ and PCA with K = 3.
fn denoise_seed(seed: u64, n: usize, images: usize) -> (f64, f64) {
    let spec = SyntheticSpec::new(Kind::TexturedDigits, seed).with_counts(n, n);
    let (fg, bg, clean) = gen_textured_digits(&spec).unwrap();
    let pair = build_covariance_pair(&bg, &fg.data).unwrap();
    let cpp = recover_w(&pair, &fit_cpcapp(&pair, 3).unwrap()).unwrap();
    let pca = fit_pca(&fg.data, 3).unwrap();
    let pca = FactorModel { w: pca.f.clone(), f: pca.f, lambda_diag: pca.eigenvalues };
    let mean = fg.data.column_mean();
    let recon = |model: &FactorModel, z: &[f64]| -> Vec<f64> {
        let centered: Vec<f64> = z.iter().zip(&mean).map(|(v, m)| v - m).collect();
        denoise(model, &centered).unwrap().iter().zip(&mean).map(|(v, m)| v + m).collect()
    };
    let (mut a, mut b) = (0.0, 0.0);
    for j in 0..images {
        let (z, c) = (fg.data.sample(j), clean.sample(j));
        a += correlation(&recon(&cpp, &z), &c);
        b += correlation(&recon(&pca, &z), &c);
    }
    (a / images as f64, b / images as f64)
}

// 9. Textured-digit denoising.
fn denoising() -> Outcome {
    timed(None, || {
        let per_seed: Vec<(f64, f64)> = (0..50u64).into_par_iter().map(|s| denoise_seed(s, 500, 20)).collect();
        let n = per_seed.len() as f64;
        let cpp = per_seed.iter().map(|p| p.0).sum::<f64>() / n;
        let pca = per_seed.iter().map(|p| p.1).sum::<f64>() / n;
        (
            cpp - pca >= 0.1,
            format!("mean correlation cpca++ {cpp:.4} vs pca {pca:.4}, margin {:.4} (>= 0.1); 50 seeds, 500/500 samples", cpp - pca),
        )
    })
}

// 10. Splicing end to end.
fn splicing() -> Outcome {
    timed(secs(120), || {
        let params = Default::default();
        let train = gen_splice_set(1, 20, &params).unwrap();
        let test = gen_splice_set(1001, 5, &params).unwrap();
        let cfg = SpliceConfig { fg_range: (0.1, 0.9), ..SpliceConfig::default() };
        let pairs: Vec<(Image, Image)> =
            train.iter().map(|s| (s.probe.clone(), s.surface_mask.clone())).collect();
        let bank = train_splice(&pairs, &cfg).unwrap();
        let (mut f1, mut mcc, mut base) = (0.0, 0.0, 0.0);
        for s in &test {
            let map = localize(&bank, &s.probe, &cfg).unwrap();
            let c = binarize_and_score(&map, &s.edge_truth, cfg.threshold).unwrap();
            f1 += f1_score(&c) / test.len() as f64;
            mcc += mcc_score(&c) / test.len() as f64;
            base += random_scorer_f1(&edge_mask(&s.probe).unwrap(), &s.edge_truth).unwrap()
                / test.len() as f64;
        }
        (
            f1 >= 2.0 * base && mcc > 0.0,
            format!(
                "mean F1 {f1:.4} vs random baseline {base:.4} ({:.2}x, >= 2x); mean MCC {mcc:.4} (> 0); n=8 stride=4 K=6 fg_range=(0.1,0.9)",
                f1 / base
            ),
        )
    })
}

fn brute_force_counts(pred: &[bool], truth: &[bool]) -> [u64; 4] {
    let mut c = [0u64; 4];
    for (&p, &t) in pred.iter().zip(truth) {
        let slot = match (p, t) {
            (true, true) => 0,
            (false, false) => 1,
            (true, false) => 2,
            (false, true) => 3,
        };
        c[slot] += 1;
    }
    c
}

// 11. Metrics against per-pixel oracles.
fn metrics() -> Outcome {
    timed(None, || {
        let mut rng = Rng::new(11);
        let mut mismatches = 0;
        for _ in 0..1000 {
            let (w, h) = (1 + rng.below(12), 1 + rng.below(12));
            let p_on = rng.uniform();
            let values: Vec<f64> = (0..w * h).map(|_| if rng.uniform() < p_on { rng.uniform() } else { 0.0 }).collect();
            let t_on = rng.uniform();
            let truth: Vec<u8> = (0..w * h).map(|_| if rng.uniform() < t_on { 255 } else { 0 }).collect();
            let map = ProbabilityMap::new(w, h, values.clone()).unwrap();
            let truth_img = Image::gray(w, h, truth.clone()).unwrap();
            let c = binarize_and_score(&map, &truth_img, 0.5).unwrap();
            let pred: Vec<bool> = values.iter().map(|&v| v >= 0.5).collect();
            let tb: Vec<bool> = truth.iter().map(|&t| t != 0).collect();
            let [tp, tn, fp, fneg] = brute_force_counts(&pred, &tb);
            let f1_oracle = if 2 * tp + fneg + fp == 0 { 0.0 } else { (2 * tp) as f64 / (2 * tp + fneg + fp) as f64 };
            let marg = [tp + fp, tp + fneg, tn + fp, tn + fneg];
            let mcc_oracle = if marg.contains(&0) {
                0.0
            } else {
                let num = tp as f64 * tn as f64 - fp as f64 * fneg as f64;
                num / marg.iter().map(|&v| v as f64).product::<f64>().sqrt()
            };
            if c != ConfusionCounts::new(tp, tn, fp, fneg)
                || f1_score(&c) != f1_oracle
                || mcc_score(&c) != mcc_oracle
            {
                mismatches += 1;
            }
        }
        let degenerate = f1_score(&ConfusionCounts::new(0, 7, 0, 0)) == 0.0
            && mcc_score(&ConfusionCounts::new(0, 7, 0, 0)) == 0.0
            && mcc_score(&ConfusionCounts::new(5, 0, 0, 0)) == 0.0;
        (
            mismatches == 0 && degenerate,
            format!("{mismatches} mismatches in 1000 random tallies; degenerate denominators give 0: {degenerate}"),
        )
    })
}

fn cli(dir: &Path, threads: &str, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_cpcapp"))
        .current_dir(dir)
        .env("CPCAPP_THREADS", threads)
        .args(args)
        .output()
        .expect("spawn cpcapp");
    assert!(out.status.success(), "cpcapp {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Every pipeline of the CLI (except timing) in `dir`; returns captured stdout.
fn run_pipelines(dir: &Path, threads: &str) -> Vec<u8> {
    let mut stdout = Vec::new();
    let mut run = |args: &[&str]| stdout.extend(cli(dir, threads, args));
    run(&["generate", "four-class", "--seed", "7", "--out", "fc"]);
    run(&["fit", "--fg", "fc/fg.csv", "--bg", "fc/bg.csv", "--method", "cpca++", "-k", "2", "--out", "pp.model"]);
    run(&["fit", "--fg", "fc/fg.csv", "--method", "pca", "-k", "2", "--out", "pca.model"]);
    run(&["fit", "--fg", "fc/fg.csv", "--bg", "fc/bg.csv", "--method", "cpca", "-k", "2", "--alpha-grid", "log:0.01:10:5", "--out", "grid.model"]);
    run(&["transform", "--model", "pp.model", "--in", "fc/fg.csv", "--out", "y.csv"]);
    run(&["score", "--model", "pp.model", "--in", "fc/fg.csv", "--out", "w.csv"]);
    run(&["generate", "haystack", "--seed", "7", "--n-fg", "500", "--n-bg", "500", "--out", "hs"]);
    run(&["generate", "textured-digits", "--seed", "7", "--n-fg", "300", "--n-bg", "300", "--out", "td"]);
    run(&["fit", "--fg", "td/fg.csv", "--bg", "td/bg.csv", "--method", "cpca++", "-k", "3", "--out", "td.model"]);
    run(&["denoise", "--model", "td.model", "--in", "td/digit_000.pgm", "--out", "den.pgm", "-k", "3", "--offset", "128", "--gain", "16"]);
    run(&["generate", "spliced-image", "--seed", "7", "--count", "6", "--out", "train"]);
    run(&["generate", "spliced-image", "--seed", "8", "--count", "1", "--out", "test"]);
    run(&["train-splice", "--train-dir", "train", "--out", "splice.model"]);
    run(&["localize", "--model", "splice.model", "--image", "test/probe_000.ppm", "--out", "map.pgm"]);
    run(&["eval", "--pred", "map.pgm", "--truth", "test/edge_000.pgm"]);
    stdout
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// 12. Byte-identical CLI reruns.
fn determinism() -> Outcome {
    timed(None, || {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let out_a = run_pipelines(a.path(), "1");
        let out_b = run_pipelines(b.path(), "4");
        let (fa, fb) = (files(a.path()), files(b.path()));
        let differing: Vec<&str> = fa
            .iter()
            .zip(&fb)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.as_str())
            .collect();
        let ok = fa.len() == fb.len() && differing.is_empty() && out_a == out_b && !fa.is_empty();
        (
            ok,
            format!(
                "{} files compared across runs with 1 and 4 threads, {} differ; stdout identical: {}",
                fa.len(),
                differing.len(),
                out_a == out_b
            ),
        )
    })
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("four-class filters match the closed form", four_class_oracle),
        ("analytic eigenvalues of Q", analytic_eigenvalues),
        ("Example 1 haystack recovery", example_one),
        ("PCA negative control", pca_negative_control),
        ("cPCA at alpha = 0 equals PCA", cpca_alpha_zero),
        ("one decomposition and >= 10x speedup", efficiency),
        ("factorization biorthogonality and idempotence", factorization),
        ("GLRT sanity", glrt),
        ("textured-digit denoising margin", denoising),
        ("splicing end to end", splicing),
        ("F1 and MCC against per-pixel oracles", metrics),
        ("CLI determinism", determinism),
    ];
    // Panics are reported on the criterion's own line.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, msg) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {why}"))
        });
        failed += usize::from(!ok);
        println!("{} {:>2} {name}: {msg}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
