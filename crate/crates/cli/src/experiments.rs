//! One function per subcommand, each producing result rows, acceptance
//! bands and a JSON detail blob.

use occulab_core::checks::{self, CheckReport};
use occulab_core::constants::{self, LimitConstant};
use occulab_core::fbm::{fgn_autocovariance, CholeskySampler, CirculantSampler, FbmSpec};
use occulab_core::functions::FunctionKind;
use occulab_core::limitlab::{self, non_increasing_within, MomentSummary};
use occulab_core::occupation::OccupationConfig;
use occulab_core::stats::Estimate;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CheckKind, CommandKind, ExperimentConfig, SamplerKind};
use crate::output::{Band, ResultRow};
use crate::CliError;

/// Largest lag of the simulated autocovariance table.
pub const MAX_LAG: u64 = 8;

#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub bands: Vec<Band>,
    pub details: Value,
    /// Additional output files (name, contents).
    pub extra_files: Vec<(String, Vec<u8>)>,
    /// Printed to stdout after the files are written.
    pub stdout: Option<String>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        CommandKind::SimulateFbm => simulate_fbm(cfg),
        CommandKind::Constants => constants(cfg),
        CommandKind::Verify => verify(cfg),
        CommandKind::LimitLaw => limit_law(cfg),
        CommandKind::FirstOrder => first_order(cfg),
        CommandKind::Fdd => fdd(cfg),
        CommandKind::Zprocess => zprocess(cfg),
    }
}

fn occupation_config(cfg: &ExperimentConfig, n: f64, t: f64) -> Result<OccupationConfig, CliError> {
    Ok(OccupationConfig::new(cfg.function, n, t)?.with_spacing(cfg.spacing)?.with_engine(cfg.engine)?)
}

fn largest(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn moment_rows(
    name: &str,
    cfg: &ExperimentConfig,
    n: f64,
    t: f64,
    summary: &MomentSummary,
    variance_target: f64,
    kurtosis_target: f64,
) -> Vec<ResultRow> {
    let base = |order: &str, e: f64| ResultRow::new(name, cfg.dim, cfg.hurst, order, e).at(Some(n), Some(t));
    let mut rows: Vec<ResultRow> = summary
        .moments
        .iter()
        .map(|m| base(&m.order.to_string(), m.estimate).se(m.se).target(m.target))
        .collect();
    rows.push(base("var", summary.variance.estimate).se(summary.variance.se).target(variance_target));
    rows.push(
        base("excess_kurtosis", summary.excess_kurtosis.estimate)
            .se(summary.excess_kurtosis.se)
            .target(kurtosis_target),
    );
    rows.push(base("ks", summary.ks_distance.estimate).se(summary.ks_distance.se).target(0.0));
    rows
}

fn simulate_fbm(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let spec = if cfg.critical {
        FbmSpec::critical(cfg.dim, cfg.spacing, cfg.steps)?
    } else {
        FbmSpec::new(cfg.hurst, cfg.dim, cfg.spacing, cfg.steps)?
    };
    enum Sampler {
        Circulant(CirculantSampler),
        Cholesky(CholeskySampler),
    }
    let sampler = match cfg.sampler {
        SamplerKind::Circulant => Sampler::Circulant(CirculantSampler::new(spec)?),
        SamplerKind::Cholesky => Sampler::Cholesky(CholeskySampler::new(spec)?),
    };
    let increments = |r: u64| match &sampler {
        Sampler::Circulant(s) => s.increments(cfg.seed, r),
        Sampler::Cholesky(s) => s.increments(cfg.seed, r),
    };
    let unit = spec.step.powf(2.0 * spec.hurst);
    let lags = (MAX_LAG as usize).min(spec.n_steps - 1);
    // per replica: lag-k autocovariance averaged over positions and coordinates
    let per_replica: Vec<Vec<f64>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let cols = increments(r);
            (0..=lags)
                .map(|k| {
                    let total: f64 = cols
                        .iter()
                        .map(|x| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (x.len() - k) as f64)
                        .sum();
                    total / cols.len() as f64 / unit
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    for k in 0..=lags {
        let values: Vec<f64> = per_replica.iter().map(|v| v[k]).collect();
        let target = fgn_autocovariance(k as u64, spec.hurst)?;
        let mut row = ResultRow::new(name, cfg.dim, spec.hurst, k.to_string(), occulab_core::stats::mean(&values));
        if values.len() >= 2 {
            let e = Estimate::of_mean(&values);
            row = row.se(e.se);
            // the SE itself is too noisy to test against with a handful of replicas
            if values.len() >= limitlab::MIN_REPLICAS {
                bands.push(Band::within_se(format!("acov_lag_{k}"), e.estimate, e.se, target, 4.0));
            }
        }
        rows.push(row.target(target));
    }
    let mut path_csv = Vec::new();
    let path = match &sampler {
        Sampler::Circulant(s) => s.sample(cfg.seed, 0),
        Sampler::Cholesky(s) => s.sample(cfg.seed, 0),
    };
    path.write_csv(&mut path_csv)?;
    Ok(Outcome {
        rows,
        bands,
        details: json!({ "spec": spec, "replicas": cfg.replicas }),
        extra_files: vec![("path.csv".to_string(), path_csv)],
        stdout: None,
    })
}

fn constants(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let f = &cfg.function;
    let c: LimitConstant = constants::c_fd(f)?;
    let row = |order: &str, e: f64| ResultRow::new(name, cfg.dim, cfg.hurst, order, e);
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut c_row = row("c_fd_squared", c.c_fd_squared).se(c.quadrature_error_estimate);
    if let FunctionKind::GaussianDifference { sigma } = f.kind {
        let closed = f.amplitude.powi(2) * 2.0 * cfg.dim as f64 * ((1.0 + sigma * sigma) / (2.0 * sigma)).ln();
        c_row = c_row.target(closed);
        let rel = if closed == 0.0 { c.c_fd_squared.abs() } else { (c.c_fd_squared - closed).abs() / closed };
        bands.push(Band::new("c_fd_closed_form", rel, "relative error <= 1e-6", rel <= 1e-6));
    }
    rows.push(c_row);
    let (bracket, norm1) = if cfg.dim == 2 {
        let b = constants::bracket(f)?;
        let r = constants::norm1_residual(f)?;
        rows.push(row("bracket", b.value).se(b.quadrature_error_estimate).target(c.c_fd_squared));
        rows.push(row("norm1_residual", r).target(0.0));
        bands.push(Band::new("norm1_residual", r, "<= 1e-3", r <= 1e-3));
        (Some(b.value), Some(r))
    } else {
        (None, None)
    };
    let gamma = constants::gamma_residuals(6)?;
    for (d, &r) in gamma.iter().enumerate() {
        rows.push(row(&format!("gamma_residual_d{}", d + 1), r).target(0.0));
        bands.push(Band::new(format!("gamma_identity_d{}", d + 1), r, "<= 1e-10", r <= 1e-10));
    }
    let printed = json!({
        "c_fd": c.c_fd,
        "c_fd_squared": c.c_fd_squared,
        "bracket": bracket,
        "norm1_residual": norm1,
        "gamma_residuals": gamma,
    });
    Ok(Outcome {
        rows,
        bands,
        details: json!({ "constant": c, "bracket": bracket, "norm1_residual": norm1, "gamma_residuals": gamma }),
        extra_files: Vec::new(),
        stdout: Some(serde_json::to_string_pretty(&printed)?),
    })
}

fn verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let wants = |k: CheckKind| cfg.check == CheckKind::All || cfg.check == k;
    let mut reports: Vec<CheckReport> = Vec::new();
    let mut bands = Vec::new();
    if wants(CheckKind::Cov) {
        reports.push(checks::check_cov_bounds(cfg.trials, cfg.seed)?);
    }
    if wants(CheckKind::Taylor) {
        reports.push(checks::check_taylor_bound(200, 50)?);
    }
    if wants(CheckKind::Lnd) {
        for points in 2..=4 {
            let rep = checks::check_lnd(points, cfg.hurst, cfg.dim, cfg.lnd_trials, cfg.seed)?;
            let (lo, hi) = (rep.extra["min_ratio"], rep.extra["max_ratio"]);
            bands.push(Band::new(format!("lnd_{points}_min_ratio"), lo, "> 0", lo > 0.0));
            bands.push(Band::new(format!("lnd_{points}_max_ratio"), hi, format!("<= {points}"), hi <= points as f64));
            reports.push(rep);
        }
    }
    if wants(CheckKind::Lower) {
        reports.push(checks::check_lower_inequality(41, &[1, 2])?);
    }
    let mut rows = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        let label = match rep.parameters.get("n_points") {
            Some(p) => format!("{}_{}", rep.check_name, p),
            None => rep.check_name.clone(),
        };
        rows.push(
            ResultRow::new(name, cfg.dim, cfg.hurst, format!("{label}_violations"), rep.violations as f64).target(0.0),
        );
        rows.push(ResultRow::new(name, cfg.dim, cfg.hurst, format!("{label}_worst_margin"), rep.worst_margin));
        for (key, value) in &rep.extra {
            rows.push(ResultRow::new(name, cfg.dim, cfg.hurst, format!("{label}_{key}"), *value));
        }
        bands.insert(
            i,
            Band::new(format!("{label}_violations"), rep.violations as f64, "== 0", rep.passed()),
        );
    }
    Ok(Outcome {
        rows,
        bands,
        details: serde_json::to_value(&reports)?,
        extra_files: Vec::new(),
        stdout: Some(serde_json::to_string_pretty(&reports)?),
    })
}

fn limit_law(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let n_top = largest(&cfg.n_list);
    let (var_lo, var_hi) = if cfg.dim == 2 { (0.6, 1.4) } else { (0.5, 1.5) };
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut reports = Vec::new();
    for &t in &cfg.t_list {
        let mut ks = Vec::new();
        for &n in &cfg.n_list {
            let rep = limitlab::run_second_order(&occupation_config(cfg, n, t)?, cfg.replicas, cfg.seed)?;
            let s = &rep.summary;
            let var_target = if rep.target.c_fd > 0.0 { t } else { 0.0 };
            rows.extend(moment_rows(name, cfg, n, t, s, var_target, 3.0));
            ks.push(s.ks_distance);
            if n == n_top {
                for order in [1, 3] {
                    let m = s.moment(order);
                    bands.push(Band::within_se(format!("moment_{order}_zero_n{n}_t{t}"), m.estimate, m.se, 0.0, 3.0));
                }
                bands.push(Band::range(format!("variance_ratio_n{n}_t{t}"), rep.variance_ratio(), var_lo, var_hi));
                if cfg.dim == 2 {
                    let k = s.excess_kurtosis;
                    let margin = (k.estimate - 1.0) / k.se;
                    bands.push(Band::new(format!("excess_kurtosis_n{n}_t{t}"), margin, "(k - 1)/se >= 2", margin >= 2.0));
                }
            }
            reports.push(rep);
        }
        if ks.len() >= 2 {
            let ok = non_increasing_within(&ks, 2.0);
            let last = ks.last().expect("nonempty").estimate;
            bands.push(Band::new(format!("ks_trend_t{t}"), last, "non-increasing in n within 2 SE", ok));
        }
    }
    Ok(Outcome { rows, bands, details: serde_json::to_value(&reports)?, ..Default::default() })
}

fn first_order(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let n_top = largest(&cfg.n_list);
    let n_bottom = cfg.n_list.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut reports = Vec::new();
    for &t in &cfg.t_list {
        let mut ks_by_n = Vec::new();
        for &n in &cfg.n_list {
            let rep = limitlab::run_first_order(&occupation_config(cfg, n, t)?, cfg.replicas, cfg.seed)?;
            let mu = rep.target_mean;
            rows.push(
                ResultRow::new(name, cfg.dim, cfg.hurst, "mean", rep.mean.estimate)
                    .at(Some(n), Some(t))
                    .se(rep.mean.se)
                    .target(mu),
            );
            rows.extend(moment_rows(name, cfg, n, t, &rep.summary, mu * mu, 6.0));
            if n == n_top {
                let ratio = if mu == 0.0 { rep.mean.estimate + 1.0 } else { rep.mean.estimate / mu };
                bands.push(Band::range(format!("mean_ratio_n{n}_t{t}"), ratio, 0.85, 1.15));
            }
            ks_by_n.push((n, rep.summary.ks_distance.estimate));
            reports.push(rep);
        }
        if n_top > n_bottom {
            let at = |target: f64| ks_by_n.iter().find(|(n, _)| *n == target).map(|p| p.1).expect("listed");
            let (hi, lo) = (at(n_top), at(n_bottom));
            bands.push(Band::new(format!("ks_improves_t{t}"), hi, format!("< {lo} (n = {n_bottom})"), hi < lo));
        }
    }
    Ok(Outcome { rows, bands, details: serde_json::to_value(&reports)?, ..Default::default() })
}

fn fdd(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let horizon = cfg.intervals.last().expect("validated nonempty").1;
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut reports = Vec::new();
    for &n in &cfg.n_list {
        let rep = limitlab::run_fdd(&occupation_config(cfg, n, horizon)?, &cfg.intervals, cfg.replicas, cfg.seed)?;
        for (i, iv) in rep.intervals.iter().enumerate() {
            let label = format!("interval_{i}");
            let var = iv.summary.variance;
            rows.push(
                ResultRow::new(name, cfg.dim, cfg.hurst, format!("{label}_var"), var.estimate)
                    .at(Some(n), Some(iv.b))
                    .se(var.se)
                    .target(iv.target_variance),
            );
            for order in [1, 3] {
                let m = iv.summary.moment(order);
                rows.push(
                    ResultRow::new(name, cfg.dim, cfg.hurst, format!("{label}_{order}"), m.estimate)
                        .at(Some(n), Some(iv.b))
                        .se(m.se)
                        .target(0.0),
                );
            }
        }
        let k = rep.intervals.len();
        for i in 0..k {
            for j in (i + 1)..k {
                let c = rep.cross_covariance[i][j];
                rows.push(
                    ResultRow::new(name, cfg.dim, cfg.hurst, format!("cross_cov_{i}_{j}"), c.estimate)
                        .at(Some(n), None)
                        .se(c.se)
                        .target(0.0),
                );
                bands.push(Band::within_se(format!("cross_cov_{i}_{j}_n{n}"), c.estimate, c.se, 0.0, 4.0));
            }
        }
        let len = |iv: &limitlab::IntervalSummary| iv.b - iv.a;
        for j in 1..k {
            let ratio = rep.variance_ratio(0, j) * len(&rep.intervals[0]) / len(&rep.intervals[j]);
            rows.push(
                ResultRow::new(name, cfg.dim, cfg.hurst, format!("variance_ratio_{j}_0"), ratio)
                    .at(Some(n), None)
                    .target(1.0),
            );
            bands.push(Band::range(format!("variance_ratio_{j}_0_n{n}"), ratio, 0.6, 1.4));
        }
        reports.push(rep);
    }
    Ok(Outcome { rows, bands, details: serde_json::to_value(&reports)?, ..Default::default() })
}

fn zprocess(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let name = cfg.command.name();
    let mut rows = Vec::new();
    let mut bands = Vec::new();
    let mut reports = Vec::new();
    for &t in &cfg.t_list {
        let z = limitlab::run_zprocess(t, cfg.walk_steps, cfg.replicas, cfg.seed)?;
        rows.push(ResultRow::new(name, 1, 0.5, "mean", z.mean.estimate).at(None, Some(t)).se(z.mean.se).target(t));
        rows.push(
            ResultRow::new(name, 1, 0.5, "ks", z.ks_distance.estimate)
                .at(None, Some(t))
                .se(z.ks_distance.se)
                .target(0.0),
        );
        bands.push(Band::range(format!("mean_ratio_t{t}"), z.mean.estimate / t, 0.95, 1.05));
        bands.push(Band::new(format!("ks_t{t}"), z.ks_distance.estimate, "< 0.05", z.ks_distance.estimate < 0.05));
        reports.push(z);
    }
    Ok(Outcome { rows, bands, details: serde_json::to_value(&reports)?, ..Default::default() })
}
