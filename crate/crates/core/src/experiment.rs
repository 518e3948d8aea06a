//! Multi-seed loss ablations and α sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mlp::LossConfig;
use crate::scalar::Scalar;
use crate::trainer::{train_one, DataSource, TrainConfig, TrainOutcome};

#[derive(Debug, Clone)]
pub struct AblationPlan<T> {
    /// Shared training settings; `base.loss` is replaced per configuration.
    pub base: TrainConfig<T>,
    pub configs: Vec<LossConfig<T>>,
    pub n_train: Vec<usize>,
    pub seeds: Vec<u64>,
    pub data: DataSource<T>,
    /// Caps the number of concurrently running seeds; `None` uses rayon's default.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub config: LossConfig<T>,
    pub n_train: usize,
    pub seed: u64,
    pub outcome: std::result::Result<TrainOutcome<T>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config: String,
    /// `None` for configurations without the physics term.
    pub alpha: Option<f64>,
    pub n_train: usize,
    pub mean_x1e5: f64,
    pub std_x1e5: f64,
    pub n_seeds: usize,
    pub failures: usize,
}

/// Mean and sample standard deviation of `L_eval` across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub config: String,
    pub alpha: Option<f64>,
    pub n_train: usize,
    /// `(epoch, mean, std)`, raw values.
    pub points: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct AblationReport<T> {
    pub runs: Vec<RunRecord<T>>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<Curve>,
}

impl<T: Scalar> AblationReport<T> {
    /// Successful runs for one configuration and training-set size.
    pub fn outcomes<'a>(&'a self, config: &'a LossConfig<T>, n_train: usize) -> impl Iterator<Item = (u64, &'a TrainOutcome<T>)> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.config == *config && r.n_train == n_train)
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.seed, o)))
    }

    pub fn row(&self, config: &LossConfig<T>, n_train: usize) -> Option<&SummaryRow> {
        let alpha = config.use_pinn.then(|| config.alpha.as_f64());
        self.summary.iter().find(|r| r.config == config.name() && r.alpha == alpha && r.n_train == n_train)
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn dedup_seeds(seeds: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(seeds.len());
    for &s in seeds {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Trains every `(configuration, n_train, seed)` combination.
///
/// Within one `(n_train, seed)` pair all configurations see the same data
/// split and the same initial weights. Failed runs are recorded in the
/// report rather than aborting the experiment.
pub fn run_ablation<T: Scalar>(plan: &AblationPlan<T>) -> Result<AblationReport<T>> {
    let seeds = dedup_seeds(&plan.seeds);
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument("an ablation needs at least two distinct seeds".into()));
    }
    if plan.configs.is_empty() || plan.n_train.is_empty() {
        return Err(Error::InvalidArgument("an ablation needs at least one configuration and one n_train".into()));
    }
    for cfg in &plan.configs {
        cfg.validate()?;
    }
    plan.base.validate()?;
    if plan.base.kind != plan.data.kind() {
        return Err(Error::InvalidArgument("training map kind differs from the data kind".into()));
    }

    let mut data_keys = Vec::new();
    let mut jobs = Vec::new();
    for &n in &plan.n_train {
        for &s in &seeds {
            data_keys.push((n, s));
        }
        for c in 0..plan.configs.len() {
            jobs.extend(seeds.iter().map(|&s| (c, n, s)));
        }
    }

    let runs = in_pool(plan.threads, || {
        let prepared: BTreeMap<(usize, u64), Result<(Dataset<T>, Dataset<T>)>> =
            data_keys.par_iter().map(|&(n, s)| ((n, s), plan.data.prepare(n, s))).collect();
        jobs.par_iter()
            .map(|&(c, n, seed)| {
                let config = plan.configs[c];
                let outcome = match &prepared[&(n, seed)] {
                    Ok((train, eval)) => {
                        let cfg = TrainConfig { loss: config, ..plan.base.clone() };
                        train_one(&cfg, train, eval, seed).map_err(|e| e.to_string())
                    }
                    Err(e) => Err(format!("data preparation failed: {e}")),
                };
                RunRecord { config, n_train: n, seed, outcome }
            })
            .collect::<Vec<_>>()
    });

    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for &n in &plan.n_train {
        for cfg in &plan.configs {
            let group: Vec<&RunRecord<T>> = runs.iter().filter(|r| r.config == *cfg && r.n_train == n).collect();
            let ok: Vec<&TrainOutcome<T>> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let best: Vec<f64> = ok.iter().map(|o| o.metrics.l_best_eval_display().as_f64()).collect();
            let (mean, std) = mean_std(&best);
            let alpha = cfg.use_pinn.then(|| cfg.alpha.as_f64());
            summary.push(SummaryRow {
                config: cfg.name().to_string(),
                alpha,
                n_train: n,
                mean_x1e5: mean,
                std_x1e5: std,
                n_seeds: ok.len(),
                failures: group.len() - ok.len(),
            });
            let points = ok
                .first()
                .map(|o0| {
                    o0.metrics
                        .eval
                        .iter()
                        .enumerate()
                        .map(|(i, &(epoch, _))| {
                            let vals: Vec<f64> = ok.iter().map(|o| o.metrics.eval[i].1.as_f64()).collect();
                            let (m, s) = mean_std(&vals);
                            (epoch, m, s)
                        })
                        .collect()
                })
                .unwrap_or_default();
            curves.push(Curve { config: cfg.name().to_string(), alpha, n_train: n, points });
        }
    }
    Ok(AblationReport { runs, summary, curves })
}

/// The α-free baselines plus `Basic+Const+PINN` at each α.
pub fn alpha_sweep_configs<T: Scalar>(alphas: &[T]) -> Vec<LossConfig<T>> {
    let mut configs = vec![LossConfig::basic(), LossConfig::basic_const()];
    configs.extend(alphas.iter().map(|&a| LossConfig::basic_const_pinn(a)));
    configs
}

pub fn alpha_sweep<T: Scalar>(plan: &AblationPlan<T>, alphas: &[T]) -> Result<AblationReport<T>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha sweep needs at least one alpha".into()));
    }
    let swept = AblationPlan { configs: alpha_sweep_configs(alphas), ..plan.clone() };
    run_ablation(&swept)
}

fn alpha_text(alpha: Option<f64>) -> String {
    alpha.map(|a| format!("{a:e}")).unwrap_or_default()
}

/// `config,alpha,n_train,mean_lbest_eval_x1e5,std_lbest_eval_x1e5,n_seeds,failures`
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,alpha,n_train,mean_lbest_eval_x1e5,std_lbest_eval_x1e5,n_seeds,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.17e},{:.17e},{},{}",
            r.config,
            alpha_text(r.alpha),
            r.n_train,
            r.mean_x1e5,
            r.std_x1e5,
            r.n_seeds,
            r.failures
        );
    }
    out
}

pub fn parse_summary_csv(text: &str) -> std::result::Result<Vec<SummaryRow>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or("empty summary file")?;
    if header.trim() != "config,alpha,n_train,mean_lbest_eval_x1e5,std_lbest_eval_x1e5,n_seeds,failures" {
        return Err(format!("unexpected summary header {header:?}"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| format!("summary row {}: bad {what}", i + 1);
            if f.len() != 7 {
                return Err(bad("arity"));
            }
            Ok(SummaryRow {
                config: f[0].to_string(),
                alpha: if f[1].is_empty() { None } else { Some(f[1].parse().map_err(|_| bad("alpha"))?) },
                n_train: f[2].parse().map_err(|_| bad("n_train"))?,
                mean_x1e5: f[3].parse().map_err(|_| bad("mean"))?,
                std_x1e5: f[4].parse().map_err(|_| bad("std"))?,
                n_seeds: f[5].parse().map_err(|_| bad("n_seeds"))?,
                failures: f[6].parse().map_err(|_| bad("failures"))?,
            })
        })
        .collect()
}

/// `epoch,mean,std` for one curve, raw values.
pub fn curve_csv(curve: &Curve) -> String {
    let mut out = String::from("epoch,mean,std\n");
    for &(e, m, s) in &curve.points {
        let _ = writeln!(out, "{e},{m:.17e},{s:.17e}");
    }
    out
}

/// Label used in file names and report rows, e.g. `Basic+Const+PINN(a=1e-5)`.
pub fn config_label(config: &str, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("{config}(a={a:e})"),
        None => config.to_string(),
    }
}

/// Aligned text table with rows per configuration and a column per
/// `n_train`; the smallest mean in each column is marked with `*`.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut labels: Vec<String> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for r in rows {
        let l = config_label(&r.config, r.alpha);
        if !labels.contains(&l) {
            labels.push(l);
        }
        if !ns.contains(&r.n_train) {
            ns.push(r.n_train);
        }
    }
    ns.sort_unstable();
    let best: BTreeMap<usize, f64> = ns
        .iter()
        .map(|&n| {
            let m = rows.iter().filter(|r| r.n_train == n && r.mean_x1e5.is_finite()).map(|r| r.mean_x1e5).fold(f64::INFINITY, f64::min);
            (n, m)
        })
        .collect();
    let cell = |label: &str, n: usize| -> String {
        rows.iter()
            .find(|r| r.n_train == n && config_label(&r.config, r.alpha) == label)
            .map(|r| {
                let mark = if r.mean_x1e5 == best[&n] { "*" } else { " " };
                let fail = if r.failures > 0 { format!(" ({} failed)", r.failures) } else { String::new() };
                format!("{:.2} ± {:.2}{mark}{fail}", r.mean_x1e5, r.std_x1e5)
            })
            .unwrap_or_else(|| "-".to_string())
    };
    let headers: Vec<String> = ns.iter().map(|n| format!("N_train={n}")).collect();
    let label_w = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max("Method".len());
    let widths: Vec<usize> = ns
        .iter()
        .zip(&headers)
        .map(|(&n, h)| labels.iter().map(|l| cell(l, n).chars().count()).max().unwrap_or(0).max(h.chars().count()))
        .collect();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
    let mut out = String::new();
    let mut line = pad("Method", label_w);
    for (h, w) in headers.iter().zip(&widths) {
        line.push_str(" | ");
        line.push_str(&pad(h, *w));
    }
    let _ = writeln!(out, "{}", line.trim_end());
    let _ = writeln!(out, "{}", "-".repeat(line.trim_end().chars().count()));
    for l in &labels {
        let mut line = pad(l, label_w);
        for (&n, w) in ns.iter().zip(&widths) {
            line.push_str(" | ");
            line.push_str(&pad(&cell(l, n), *w));
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out.push_str("values are L_best_eval x 1e5 (mean ± sample std over seeds); * marks the best mean per column\n");
    out
}
