use std::fs;
use std::path::{Path, PathBuf};

use pimbs::dataset::save_csv;
use pimbs::experiment::{alpha_sweep, alpha_sweep_configs, config_label, curve_csv, parse_summary_csv, render_table, run_ablation, summary_csv, RunRecord, SummaryRow};
use pimbs::mlp::save_checkpoint;
use pimbs::trainer::{metrics_csv, train_one};
use pimbs::{AblationPlan, AblationReport, LossConfig, TrainOutcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Experiment;
use crate::error::CliError;

pub const THREADS_ENV: &str = "PIMBS_THREADS";

/// Upper bound on concurrent runs from `PIMBS_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// File-system friendly form of a configuration label:
/// `Basic+Const+PINN(a=1e-5)` becomes `Basic-Const-PINN_a1e-5`.
pub fn slug(config: &str, alpha: Option<f64>) -> String {
    let mut s = config.replace('+', "-");
    if let Some(a) = alpha {
        s.push_str(&format!("_a{a:e}"));
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn mkdir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Serialize)]
struct DataRecord {
    n_train: usize,
    seed: u64,
    train_rows: usize,
    eval_rows: usize,
    resamples: usize,
}

#[derive(Serialize)]
struct FailureRecord {
    config: String,
    n_train: usize,
    seed: u64,
    error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config: String,
    config_sha256: &'a str,
    kind: &'a str,
    full_scale: bool,
    hidden: usize,
    epochs: usize,
    eval_stride: usize,
    n_train: &'a [usize],
    seeds: &'a [u64],
    data_seed: u64,
    model_hash: Option<String>,
    configs: Vec<String>,
    data: Vec<DataRecord>,
    failures: Vec<FailureRecord>,
    wall_time_s: f64,
}

fn manifest<'a>(exp: &'a Experiment, command: &'a str, configs: &[LossConfig], start: std::time::Instant) -> Result<Manifest<'a>, CliError> {
    let mut data = Vec::new();
    for &n in &exp.n_train {
        for &seed in &exp.seeds {
            let (train, eval) = exp.source.prepare(n, seed)?;
            data.push(DataRecord { n_train: n, seed, train_rows: train.len(), eval_rows: eval.len(), resamples: train.resamples });
        }
    }
    Ok(Manifest {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        config: exp.config_path.display().to_string(),
        config_sha256: &exp.config_hash,
        kind: exp.kind.as_str(),
        full_scale: exp.full_scale,
        hidden: exp.base.hidden,
        epochs: exp.base.epochs,
        eval_stride: exp.base.eval_stride,
        n_train: &exp.n_train,
        seeds: &exp.seeds,
        data_seed: exp.data_seed,
        model_hash: exp.model.as_ref().map(|m| m.fingerprint()),
        configs: configs.iter().map(label).collect(),
        data,
        failures: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn save_manifest(exp: &Experiment, m: &Manifest) -> Result<PathBuf, CliError> {
    let path = exp.output.join(format!("manifest-{}.json", m.command));
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Usage(e.to_string()))?;
    write(&path, &(text + "\n"))?;
    Ok(path)
}

fn label(c: &LossConfig) -> String {
    config_label(c.name(), alpha_of(c))
}

fn alpha_of(c: &LossConfig) -> Option<f64> {
    c.use_pinn.then_some(c.alpha)
}

fn run_dir(root: &Path, c: &LossConfig, n: usize, seed: u64) -> PathBuf {
    root.join("runs").join(slug(c.name(), alpha_of(c))).join(format!("n{n}")).join(format!("seed{seed}"))
}

fn save_run(root: &Path, c: &LossConfig, n: usize, seed: u64, o: &TrainOutcome) -> Result<(), CliError> {
    let dir = run_dir(root, c, n, seed);
    write(&dir.join("metrics.csv"), &metrics_csv(&o.metrics))?;
    let best = serde_json::json!({
        "best_epoch": o.metrics.best_epoch,
        "l_best_eval": o.metrics.l_best_eval,
        "l_best_eval_x1e5": o.metrics.l_best_eval_display(),
    });
    write(&dir.join("best.json"), &format!("{best:#}\n"))?;
    save_checkpoint(&o.params, &dir.join("checkpoint.txt"))?;
    Ok(())
}

fn failure_error(failures: &[FailureRecord], allow: bool) -> Result<(), CliError> {
    if failures.is_empty() || allow {
        return Ok(());
    }
    let first = &failures[0];
    Err(CliError::Numeric(format!(
        "{} run(s) failed, first {} n={} seed={}: {} (pass --allow-failures to keep partial results)",
        failures.len(),
        first.config,
        first.n_train,
        first.seed,
        first.error
    )))
}

/// Writes the train and eval split of every `(n_train, seed)` pair.
pub fn generate(exp: &Experiment) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let root = exp.output.join("data");
    let pairs: Vec<(usize, u64)> = exp.n_train.iter().flat_map(|&n| exp.seeds.iter().map(move |&s| (n, s))).collect();
    for &(n, seed) in &pairs {
        let (train, eval) = exp.source.prepare(n, seed)?;
        let dir = root.join(format!("n{n}")).join(format!("seed{seed}"));
        mkdir(&dir)?;
        save_csv(&train, &dir.join("train.csv"))?;
        save_csv(&eval, &dir.join("eval.csv"))?;
        eprintln!("n={n} seed={seed}: {} train, {} eval, {} resampled", train.len(), eval.len(), train.resamples);
    }
    let m = manifest(exp, "generate", &[], start)?;
    let path = save_manifest(exp, &m)?;
    println!("wrote {} splits under {}; manifest {}", pairs.len(), root.display(), path.display());
    Ok(())
}

/// Trains every configured loss on every `(n_train, seed)` pair.
pub fn train(exp: &Experiment, allow_failures: bool) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let threads = thread_cap()?;
    let jobs: Vec<(usize, usize, u64)> = (0..exp.configs.len())
        .flat_map(|c| exp.n_train.iter().flat_map(move |&n| exp.seeds.iter().map(move |&s| (c, n, s))))
        .collect();
    let results: Vec<_> = in_pool(threads, || {
        jobs.par_iter()
            .map(|&(c, n, seed)| {
                let cfg = pimbs::TrainConfig { loss: exp.configs[c], ..exp.base.clone() };
                let out = exp.source.prepare(n, seed).and_then(|(tr, ev)| train_one(&cfg, &tr, &ev, seed));
                (c, n, seed, out)
            })
            .collect()
    });

    let mut failures = Vec::new();
    for (c, n, seed, out) in results {
        let config = &exp.configs[c];
        match out {
            Ok(o) => {
                save_run(&exp.output, config, n, seed, &o)?;
                println!(
                    "{} n={n} seed={seed}: best epoch {}, L_best_eval x1e5 = {:.4}",
                    label(config),
                    o.metrics.best_epoch,
                    o.metrics.l_best_eval_display()
                );
            }
            Err(e) => {
                eprintln!("{} n={n} seed={seed}: failed: {e}", label(config));
                failures.push(FailureRecord { config: label(config), n_train: n, seed, error: e.to_string() });
            }
        }
    }
    let mut m = manifest(exp, "train", &exp.configs, start)?;
    m.failures = failures;
    save_manifest(exp, &m)?;
    failure_error(&m.failures, allow_failures)
}

fn write_report(root: &Path, report: &AblationReport) -> Result<Vec<FailureRecord>, CliError> {
    mkdir(root)?;
    write(&root.join("summary.csv"), &summary_csv(&report.summary))?;
    for curve in &report.curves {
        let name = format!("{}_n{}.csv", slug(&curve.config, curve.alpha), curve.n_train);
        write(&root.join("curves").join(name), &curve_csv(curve))?;
    }
    let mut failures = Vec::new();
    for RunRecord { config, n_train, seed, outcome } in &report.runs {
        match outcome {
            Ok(o) => save_run(root, config, *n_train, *seed, o)?,
            Err(e) => failures.push(FailureRecord { config: label(config), n_train: *n_train, seed: *seed, error: e.clone() }),
        }
    }
    Ok(failures)
}

fn plan(exp: &Experiment) -> Result<AblationPlan, CliError> {
    Ok(AblationPlan {
        base: exp.base.clone(),
        configs: exp.configs.clone(),
        n_train: exp.n_train.clone(),
        seeds: exp.seeds.clone(),
        data: exp.source.clone(),
        threads: thread_cap()?,
    })
}

struct Finished<'a> {
    command: &'a str,
    configs: &'a [LossConfig],
    report: AblationReport,
    start: std::time::Instant,
}

fn finish(exp: &Experiment, done: Finished, allow: bool) -> Result<(), CliError> {
    let Finished { command, configs, report, start } = done;
    let root = exp.output.join(command);
    let failures = write_report(&root, &report)?;
    let mut m = manifest(exp, command, configs, start)?;
    m.failures = failures;
    save_manifest(exp, &m)?;
    print!("{}", render_table(&report.summary));
    println!("summary: {}", root.join("summary.csv").display());
    failure_error(&m.failures, allow)
}

pub fn ablation(exp: &Experiment, allow_failures: bool) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let report = run_ablation(&plan(exp)?)?;
    finish(exp, Finished { command: "ablation", configs: &exp.configs, report, start }, allow_failures)
}

pub fn sweep(exp: &Experiment, allow_failures: bool) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let report = alpha_sweep(&plan(exp)?, &exp.alphas)?;
    let configs = alpha_sweep_configs(&exp.alphas);
    finish(exp, Finished { command: "alpha-sweep", configs: &configs, report, start }, allow_failures)
}

/// Summary files directly below `dir` or one level down, sorted.
pub fn find_summaries(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let direct = dir.join("summary.csv");
    if direct.is_file() {
        found.push(direct);
    }
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path().join("summary.csv");
            if p.is_file() {
                found.push(p);
            }
        }
    }
    found.sort();
    found
}

/// Prints a table for every summary under `dir`.
pub fn report(dir: &Path) -> Result<(), CliError> {
    let files = find_summaries(dir);
    if files.is_empty() {
        return Err(CliError::Usage(format!("no summary.csv found under {}", dir.display())));
    }
    for (i, f) in files.iter().enumerate() {
        let text = fs::read_to_string(f).map_err(|e| CliError::io(f, e))?;
        let rows: Vec<SummaryRow> = parse_summary_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", f.display())))?;
        if i > 0 {
            println!();
        }
        println!("{}", f.display());
        print!("{}", render_table(&rows));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_avoid_shell_metacharacters() {
        assert_eq!(slug("Basic", None), "Basic");
        assert_eq!(slug("Basic+Const+PINN", Some(1e-5)), "Basic-Const-PINN_a1e-5");
        assert!(!slug("Basic+PINN", Some(2.5e-7)).contains(['+', '(', ')', '=']));
    }

    #[test]
    fn report_on_empty_directory_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(dir.path()), Err(CliError::Usage(_))));
    }
}
