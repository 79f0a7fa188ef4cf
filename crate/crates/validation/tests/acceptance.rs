//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use occulab::{CommandKind, ExperimentConfig, Options};
use occulab_core::checks::{check_cov_bounds, check_lnd, check_lower_inequality, check_taylor_bound};
use occulab_core::constants::{c_fd, gamma_identity_check, norm1_residual};
use occulab_core::fbm::{fgn_autocovariance, CholeskySampler, CirculantSampler, FbmSpec};
use occulab_core::functions::TestFunction;
use occulab_core::limitlab::{non_increasing_within, run_fdd, run_first_order, run_second_order, run_zprocess};
use occulab_core::occupation::OccupationConfig;
use occulab_core::stats::Estimate;
use occulab_validation::Criterion;

const SEED: u64 = 20_240_601;

fn two_sample_z(a: &[f64], b: &[f64]) -> f64 {
    let (ea, eb) = (Estimate::of_mean(a), Estimate::of_mean(b));
    (ea.estimate - eb.estimate) / (ea.se.powi(2) + eb.se.powi(2)).sqrt()
}

fn acov(x: &[f64], k: usize) -> f64 {
    x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (x.len() - k) as f64
}

fn sampler_correctness() -> Criterion {
    let mut c = Criterion::new(1);
    for (label, h) in [("1/4", 0.25), ("1/3", 1.0 / 3.0), ("1/2", 0.5)] {
        let spec = FbmSpec::new(h, 1, 1.0, 1024).unwrap();
        let sampler = CirculantSampler::new(spec).unwrap();
        let per: Vec<[f64; 9]> = (0..5000)
            .map(|r| {
                let x = &sampler.increments(SEED, r)[0];
                std::array::from_fn(|k| acov(x, k))
            })
            .collect();
        let worst = (0..=8)
            .map(|k| {
                let e = Estimate::of_mean(&per.iter().map(|v| v[k]).collect::<Vec<_>>());
                (e.estimate - fgn_autocovariance(k as u64, h).unwrap()).abs() / e.se
            })
            .fold(0.0, f64::max);
        c.check(format!("acov H={label}"), worst <= 4.0, format!("max |z| {worst:.2} <= 4"));

        let spec = FbmSpec::new(h, 1, 1.0, 256).unwrap();
        let circ = CirculantSampler::new(spec).unwrap();
        let chol = CholeskySampler::new(spec).unwrap();
        let (mut a2, mut a4, mut a1, mut b2, mut b4, mut b1) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        for r in 0..5000 {
            let (p, q) = (circ.sample(SEED + 1, r), chol.sample(SEED + 2, r));
            let (x, y) = (p.point(256)[0], q.point(256)[0]);
            a2.push(x * x);
            a4.push(x.powi(4));
            b2.push(y * y);
            b4.push(y.powi(4));
            a1.push(acov(&circ.increments(SEED + 3, r)[0], 1));
            b1.push(acov(&chol.increments(SEED + 4, r)[0], 1));
        }
        let worst = [two_sample_z(&a2, &b2), two_sample_z(&a4, &b4), two_sample_z(&a1, &b1)]
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max);
        c.check(format!("circulant vs cholesky H={label}"), worst <= 4.0, format!("max |z| {worst:.2} <= 4"));
    }
    c
}

fn constants() -> Criterion {
    let mut c = Criterion::new(2);
    let mut worst = 0.0f64;
    for sigma in [1.5, 2.0, 4.0] {
        let f = TestFunction::gaussian_difference(2, sigma).unwrap();
        let exact = 4.0 * ((1.0 + sigma * sigma) / (2.0 * sigma)).ln();
        worst = worst.max((c_fd(&f).unwrap().c_fd_squared / exact - 1.0).abs());
    }
    c.check("closed form", worst <= 1e-6, format!("max rel err {worst:.1e} <= 1e-6"));
    let gamma = (1..=6).map(|d| gamma_identity_check(d).unwrap()).fold(0.0, f64::max);
    c.check("gamma identity d=1..6", gamma <= 1e-10, format!("max {gamma:.1e} <= 1e-10"));
    for sigma in [2.0, 4.0] {
        let r = norm1_residual(&TestFunction::gaussian_difference(2, sigma).unwrap()).unwrap();
        c.check(format!("norm1 sigma={sigma}"), r <= 1e-3, format!("residual {r:.4} <= 1e-3"));
    }
    c
}

fn inequality_sweeps() -> Criterion {
    let mut c = Criterion::new(3);
    let cov = check_cov_bounds(1_000_000, SEED).unwrap();
    c.check("cov bounds 1e6", cov.passed(), format!("{} violations", cov.violations));
    let taylor = check_taylor_bound(200, 50).unwrap();
    c.check("taylor 200x200x50", taylor.passed(), format!("{} violations", taylor.violations));
    for (hurst, dim) in [(0.5, 2), (1.0 / 3.0, 3)] {
        for n_points in 2..=4 {
            let r = check_lnd(n_points, hurst, dim, 100_000, SEED).unwrap();
            let (lo, hi) = (r.extra["min_ratio"], r.extra["max_ratio"]);
            let ok = r.passed() && lo > 0.0 && hi <= n_points as f64;
            c.check(format!("lnd d={dim} n={n_points}"), ok, format!("ratio in [{lo:.3}, {hi:.3}]"));
        }
    }
    let lower = check_lower_inequality(41, &[1, 2]).unwrap();
    c.check("lower inequality", lower.passed(), format!("{} violations", lower.violations));
    c
}

fn second_order(number: u32, dim: usize, n_list: &[f64], var_band: (f64, f64), kurtosis: bool) -> Criterion {
    let mut c = Criterion::new(number);
    let f = TestFunction::gaussian_difference(dim, 2.0).unwrap();
    let mut ks = Vec::new();
    let mut top = None;
    for &n in n_list {
        let rep = run_second_order(&OccupationConfig::new(f, n, 1.0).unwrap(), 4000, SEED).unwrap();
        ks.push(rep.summary.ks_distance);
        top = Some(rep);
    }
    let rep = top.expect("nonempty n list");
    let n = rep.n;
    for order in [1, 3] {
        let m = rep.summary.moment(order);
        let z = m.estimate / m.se;
        c.check(format!("moment {order} n={n}"), z.abs() <= 3.0, format!("{:.4} +- {:.4}, |z| {:.1} <= 3", m.estimate, m.se, z.abs()));
    }
    let ratio = rep.variance_ratio();
    let (lo, hi) = var_band;
    c.check("Var/C^2 t", (lo..=hi).contains(&ratio), format!("{ratio:.3} in [{lo}, {hi}]"));
    if kurtosis {
        let k = rep.summary.excess_kurtosis;
        let margin = (k.estimate - 1.0) / k.se;
        c.check("excess kurtosis", margin >= 2.0, format!("{:.2} +- {:.2}, margin {margin:.1} SE >= 2", k.estimate, k.se));
    }
    if ks.len() > 1 {
        let shown: Vec<String> = ks.iter().map(|e| format!("{:.3}", e.estimate)).collect();
        c.check("KS trend", non_increasing_within(&ks, 2.0), format!("{} non-increasing within 2 SE", shown.join(" > ")));
    }
    c
}

fn first_order() -> Criterion {
    let mut c = Criterion::new(6);
    let f = TestFunction::plain_gaussian(2).unwrap();
    for t in [1.0, 2.0] {
        let run = |n: f64| run_first_order(&OccupationConfig::new(f, n, t).unwrap(), 4000, SEED).unwrap();
        let (coarse, fine) = (run(6.0), run(12.0));
        let ratio = fine.mean.estimate / fine.target_mean;
        c.check(format!("mean t={t}"), (ratio - 1.0).abs() <= 0.15, format!("ratio {ratio:.3} within 15%"));
        let (k6, k12) = (coarse.summary.ks_distance.estimate, fine.summary.ks_distance.estimate);
        c.check(format!("KS t={t}"), k12 < k6, format!("{k12:.3} < {k6:.3}"));
    }
    c
}

fn limit_process() -> Criterion {
    let mut c = Criterion::new(7);
    for t in [0.5, 1.0, 2.0] {
        let z = run_zprocess(t, 1_000_000, 2000, SEED).unwrap();
        let ratio = z.mean.estimate / t;
        c.check(format!("mean t={t}"), (ratio - 1.0).abs() <= 0.05, format!("ratio {ratio:.3} within 5%"));
        let ks = z.ks_distance.estimate;
        c.check(format!("KS t={t}"), ks < 0.05, format!("{ks:.3} < 0.05"));
    }
    c
}

fn fdd_structure() -> Criterion {
    let mut c = Criterion::new(8);
    let f = TestFunction::gaussian_difference(2, 2.0).unwrap();
    let rep = run_fdd(&OccupationConfig::new(f, 8.0, 2.0).unwrap(), &[(0.0, 1.0), (1.0, 2.0)], 4000, SEED).unwrap();
    let cov = rep.cross_covariance[0][1];
    let z = cov.estimate / cov.se;
    c.check("cross covariance", z.abs() <= 4.0, format!("{:.4} +- {:.4}, |z| {:.1} <= 4", cov.estimate, cov.se, z.abs()));
    let ratio = rep.variance_ratio(0, 1);
    c.check("variance ratio", (0.6..=1.4).contains(&ratio), format!("{ratio:.3} in [0.6, 1.4]"));
    c
}

fn results_csv(kind: CommandKind, workers: usize, opts: &Options) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let opts = Options { workers: Some(workers), output_dir: Some(dir.path().to_path_buf()), ..opts.clone() };
    let cfg = ExperimentConfig::resolve(kind, opts).unwrap();
    occulab::execute(&cfg).unwrap();
    std::fs::read(dir.path().join("results.csv")).unwrap()
}

fn reproducibility() -> Criterion {
    let mut c = Criterion::new(9);
    let base = Options { seed: Some(SEED), replicas: Some(300), ..Options::default() };
    let runs = [
        (CommandKind::SimulateFbm, Options { replicas: Some(20), ..base.clone() }),
        (CommandKind::LimitLaw, Options { n_list: Some(vec![4.0, 6.0]), ..base.clone() }),
        (CommandKind::FirstOrder, Options { n_list: Some(vec![4.0, 6.0]), ..base.clone() }),
        (CommandKind::Fdd, Options { n_list: Some(vec![5.0]), ..base.clone() }),
        (CommandKind::Zprocess, Options { walk_steps: Some(10_000), ..base.clone() }),
    ];
    for (kind, opts) in runs {
        let one = results_csv(kind, 1, &opts);
        let eight = results_csv(kind, 8, &opts);
        let again = results_csv(kind, 8, &opts);
        let same = one == eight && eight == again && !one.is_empty();
        c.check(kind.name(), same, format!("{} bytes, workers 1 vs 8", one.len()));
    }
    c
}

fn main() -> ExitCode {
    let suite: Vec<(&str, Box<dyn Fn() -> Criterion>)> = vec![
        ("sampler", Box::new(sampler_correctness)),
        ("constants", Box::new(constants)),
        ("sweeps", Box::new(inequality_sweeps)),
        ("second order d=2", Box::new(|| second_order(4, 2, &[6.0, 9.0, 12.0], (0.6, 1.4), true))),
        ("second order d=3", Box::new(|| second_order(5, 3, &[10.0], (0.5, 1.5), false))),
        ("first order", Box::new(first_order)),
        ("limit process", Box::new(limit_process)),
        ("fdd", Box::new(fdd_structure)),
        ("reproducibility", Box::new(reproducibility)),
    ];
    let mut out = std::io::stdout();
    let mut passed = 0;
    for (label, run) in &suite {
        let start = Instant::now();
        let c = run();
        passed += usize::from(c.passed());
        let _ = writeln!(out, "{} ({label}, {:.1}s)", c.line(), start.elapsed().as_secs_f64());
        let _ = out.flush();
    }
    let _ = writeln!(out, "acceptance: {passed}/{} criteria passed", suite.len());
    if passed == suite.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
