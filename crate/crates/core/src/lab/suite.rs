//! Full suite orchestration and the on-disk bundle.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    fidi_report, limit_model, marginal_run, mean_se, run_j1_vs_m1_contrast, run_karamata_check,
    run_slutsky_bound_check, sample_paths, sample_seed, selfnorm_report, ConvergenceReport,
    Verdict, ASSUMPTION_MIXING, DECOMPOSITION,
};
use crate::cadlag::fmt_f64;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::inference::{
    abs_quantile, anticluster_diagnostic, empirical_tail_process, extremal_index_blocks,
    hill_alpha, sign_switch_diagnostic, small_jump_diagnostic, BlockingScheme, DiagnosticRecord,
};
use crate::report::Record;

/// Extremal index and tail-index recovery plus the anticlustering,
/// sign-switch, tail-process and small-jump diagnostics.
pub fn run_tail_diagnostics(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let mut rep = ConvergenceReport::new("tail_inference");
    let lm = limit_model(cfg)?;
    let n = cfg.theta_n;
    let reps = cfg.theta_replicates.max(1);
    let scheme = BlockingScheme::from_kappa(n, cfg.kappa)?;
    let k_hill = ((1.0 - cfg.u_level) * n as f64).round().max(1.0) as usize;
    let samples: Result<Vec<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| Ok(cfg.model.sample(n, sample_seed(cfg, "theta", r))?.values))
        .collect();
    let samples = samples?;
    let est: Result<Vec<(f64, f64, f64)>> = samples
        .par_iter()
        .map(|data| {
            let thr = abs_quantile(data, cfg.u_level)?;
            Ok((extremal_index_blocks(data, &scheme, thr)?, hill_alpha(data, k_hill)?, thr))
        })
        .collect();
    let est = est?;
    for (r, (theta, alpha, thr)) in est.iter().enumerate() {
        let mut d = DiagnosticRecord::new(r, "extremal_index");
        d.theta_hat = Some(*theta);
        d.alpha_hat = Some(*alpha);
        d.an_hat = Some(*thr);
        rep.diagnostics.push(d.to_jsonl());
    }
    let thetas: Vec<f64> = est.iter().map(|e| e.0).collect();
    let alphas: Vec<f64> = est.iter().map(|e| e.1).collect();
    let (theta_mean, theta_se) = mean_se(&thetas);
    let (alpha_mean, alpha_se) = mean_se(&alphas);
    rep.rows.push(
        Record::new("tail_inference")
            .int("n", n as u64)
            .int("r_n", scheme.r as u64)
            .int("replicates", reps as u64)
            .num("u_level", cfg.u_level)
            .str("threshold_and_block_choice", "convention")
            .num("theta_mean", theta_mean)
            .num("theta_se", theta_se)
            .num("theta_model", lm.theta)
            .flag("theta_analytic", lm.analytic)
            .num("alpha_hat_mean", alpha_mean)
            .num("alpha_hat_se", alpha_se)
            .num("alpha_model", lm.alpha)
            .int("hill_k", k_hill as u64)
            .int("seed", cfg.seed)
            .str("seed_derivation", "derive(replicate(seed, r), \"theta\")"),
    );
    let key = "tolerances.theta_abs";
    if lm.analytic {
        let gap = (theta_mean - lm.theta).abs();
        rep.verdicts.push(Verdict::check(
            "extremal_index",
            gap <= cfg.tolerances.theta_abs,
            gap,
            cfg.tolerances.theta_abs,
            key,
            format!("|mean blocks estimate - {}| over {reps} replicates", fmt_f64(lm.theta)),
        ));
    } else {
        rep.verdicts.push(Verdict::skipped(
            "extremal_index",
            key,
            "no closed-form extremal index for this model",
        ));
    }

    let data = &samples[0];
    let thr = est[0].2;
    let m_grid: Vec<usize> = [1, 2, 5, 10, scheme.r]
        .into_iter()
        .filter(|&m| m <= scheme.r)
        .collect();
    for (m, prob) in anticluster_diagnostic(data, &scheme, thr, &m_grid)? {
        let mut d = DiagnosticRecord::new(0, "anticluster");
        d.m = Some(m);
        d.prob = Some(prob);
        rep.diagnostics.push(d.to_jsonl());
    }
    let sw = sign_switch_diagnostic(data, &scheme, thr);
    let mut d = DiagnosticRecord::new(0, "sign_switch");
    d.violations = Some(sw.violations);
    d.prob = Some(if sw.blocks_with_exceedances == 0 {
        0.0
    } else {
        sw.violations as f64 / sw.blocks_with_exceedances as f64
    });
    rep.diagnostics.push(d.to_jsonl());
    match empirical_tail_process(data, thr, 3) {
        Ok(lags) => {
            for l in lags {
                rep.rows.push(
                    Record::new("tail_process")
                        .int("replicate", 0)
                        .str("lag", &l.lag.to_string())
                        .int("count", l.count as u64)
                        .nums("quantiles", &l.quantiles)
                        .num("near_zero", l.near_zero),
                );
            }
        }
        Err(Error::InsufficientData(_)) => {}
        Err(e) => return Err(e),
    }
    let a_n = lm.a_n(n)?;
    for pt in small_jump_diagnostic(&samples, a_n, &cfg.slutsky_u, 1.0, lm.alpha >= 1.0)? {
        let mut d = DiagnosticRecord::new(0, "small_jump");
        d.u = Some(pt.u);
        d.delta = Some(1.0);
        d.prob = Some(pt.prob_first);
        d.an_hat = Some(a_n);
        rep.diagnostics.push(d.to_jsonl());
    }
    Ok(rep)
}

/// Everything one suite run produces.
#[derive(Debug, Clone)]
pub struct SuiteBundle {
    pub config: ExperimentConfig,
    pub reports: Vec<ConvergenceReport>,
}

fn failed(check: &str, verdict_names: &[&str], key: &str, err: &Error) -> ConvergenceReport {
    let mut rep = ConvergenceReport::new(check);
    for name in verdict_names {
        rep.verdicts.push(Verdict::error(name, key, err));
    }
    rep
}

/// Runs every check; a failing check is recorded and the suite continues.
pub fn run_full_suite(cfg: &ExperimentConfig) -> SuiteBundle {
    let mut reports = Vec::new();
    let start = Instant::now();
    match marginal_run(cfg) {
        Ok(run) => {
            let secs = start.elapsed().as_secs_f64();
            for (name, built) in [("fidi", fidi_report(cfg, &run)), ("selfnorm", selfnorm_report(cfg, &run))] {
                let mut rep = built.unwrap_or_else(|e| failed(name, &[name], "", &e));
                rep.runtime_secs = secs;
                reports.push(rep);
            }
        }
        Err(e) => {
            reports.push(failed("fidi", &["fidi_ks_l1", "fidi_ks_l2"], "tolerances.ks_fidi", &e));
            reports.push(failed("selfnorm", &["selfnorm_ks"], "tolerances.ks_selfnorm", &e));
        }
    }
    type Check = fn(&ExperimentConfig) -> Result<ConvergenceReport>;
    let checks: [(&str, &str, &str, Check); 4] = [
        ("contrast", "contrast_order", "tolerances.contrast_order_frac", run_j1_vs_m1_contrast),
        ("karamata", "karamata", "tolerances.karamata_rel", run_karamata_check),
        ("slutsky", "slutsky_bound", "tolerances.slutsky_se_mult", run_slutsky_bound_check),
        ("tail_inference", "extremal_index", "tolerances.theta_abs", run_tail_diagnostics),
    ];
    for (check, verdict, key, f) in checks {
        let start = Instant::now();
        let mut rep = f(cfg).unwrap_or_else(|e| failed(check, &[verdict], key, &e));
        rep.runtime_secs = start.elapsed().as_secs_f64();
        reports.push(rep);
    }
    let start = Instant::now();
    let mut paths = ConvergenceReport::new("paths");
    match limit_model(cfg).and_then(|lm| sample_paths(cfg, &lm)) {
        Ok(p) => paths.paths = p,
        Err(e) => paths.verdicts.push(Verdict::error("paths", "", &e)),
    }
    paths.runtime_secs = start.elapsed().as_secs_f64();
    reports.push(paths);
    SuiteBundle {
        config: cfg.clone(),
        reports,
    }
}

impl SuiteBundle {
    pub fn verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.reports.iter().flat_map(|r| r.verdicts.iter())
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts().filter(|v| v.status.is_failure()).collect()
    }

    pub fn manifest(&self) -> Record {
        Record::new("manifest")
            .str("config_hash", &self.config.hash())
            .int("seed", self.config.seed)
            .str("package", env!("CARGO_PKG_NAME"))
            .str("version", env!("CARGO_PKG_VERSION"))
            .str("model", self.config.model.name())
            .str("decomposition", DECOMPOSITION)
            .str("assumption_mixing", ASSUMPTION_MIXING)
    }

    /// One record per check row, diagnostic and verdict, after the manifest.
    pub fn report_jsonl(&self) -> String {
        let mut out = self.manifest().to_json();
        out.push('\n');
        for rep in &self.reports {
            for row in &rep.rows {
                out.push_str(&row.clone().str("check", &rep.check).to_json());
                out.push('\n');
            }
            for line in &rep.diagnostics {
                out.push_str("{\"record\":\"diagnostic\",");
                out.push_str(&line[1..]);
                out.push('\n');
            }
            for v in &rep.verdicts {
                out.push_str(&v.to_record().to_json());
                out.push('\n');
            }
        }
        out
    }

    /// Verdict table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config_hash {}", self.config.hash());
        let _ = writeln!(out, "seed {}", self.config.seed);
        let _ = writeln!(out, "{DECOMPOSITION}");
        let _ = writeln!(out, "Assumption: {ASSUMPTION_MIXING}.\n");
        let _ = writeln!(
            out,
            "{:<18} {:<8} {:>24} {:>24}  {:<36} detail",
            "check", "status", "value", "threshold", "tolerance"
        );
        for v in self.verdicts() {
            let _ = writeln!(
                out,
                "{:<18} {:<8} {:>24} {:>24}  {:<36} {}",
                v.name,
                v.status.tag(),
                fmt_f64(v.value),
                fmt_f64(v.threshold),
                v.tolerance,
                v.detail
            );
        }
        let failures = self.failures();
        let _ = writeln!(
            out,
            "\n{}",
            if failures.is_empty() {
                "all verdicts pass".to_string()
            } else {
                format!(
                    "failing: {}",
                    failures.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
                )
            }
        );
        out
    }

    /// Wall-clock seconds per check, kept apart from the data artifacts.
    pub fn runtime_json(&self) -> String {
        let items: Vec<String> = self
            .reports
            .iter()
            .map(|r| format!("\"{}\":{}", r.check, fmt_f64(r.runtime_secs)))
            .collect();
        format!("{{{}}}\n", items.join(","))
    }

    /// Writes `report.jsonl`, `summary.txt`, `manifest.json`, `config.toml`,
    /// `paths/*.csv` and `runtime.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let paths_dir = dir.join("paths");
        std::fs::create_dir_all(&paths_dir)?;
        std::fs::write(dir.join("report.jsonl"), self.report_jsonl())?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        std::fs::write(dir.join("manifest.json"), self.manifest().to_json() + "\n")?;
        std::fs::write(dir.join("config.toml"), self.config.echo())?;
        for rep in &self.reports {
            for (name, csv) in &rep.paths {
                std::fs::write(paths_dir.join(name), csv)?;
            }
        }
        std::fs::write(dir.join("runtime.json"), self.runtime_json())?;
        Ok(())
    }
}
