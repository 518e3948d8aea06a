//! Full-batch training with best-epoch model selection.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::adam::{adam_step, AdamHyper, AdamState};
use crate::arm::ArmModel;
use crate::dataset::{generate, mix_seed, split, Dataset, MapKind};
use crate::error::{Error, Result};
use crate::mlp::{default_input_scale, init_params, loss_basic, total_loss_and_grad, Batch, LossConfig, MlpDims, MlpParams, DEFAULT_TENSION_INPUT_SCALE};
use crate::scalar::Scalar;

/// Reported losses are the raw values times this factor.
pub const DISPLAY_SCALE: f64 = 1e5;

const INIT_STREAM: u64 = 0x1417;
const DATA_STREAM: u64 = 0xDA7A;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub kind: MapKind,
    pub hidden: usize,
    pub epochs: usize,
    /// Evaluation loss is recorded every `eval_stride` epochs.
    pub eval_stride: usize,
    pub loss: LossConfig<T>,
    pub adam: AdamHyper<T>,
    /// Fixed input multiplier applied to tensions in angle-tension-length mode.
    pub tension_input_scale: T,
}

impl<T: Scalar> TrainConfig<T> {
    /// Reduced-scale defaults: 100 hidden units, 5000 epochs.
    pub fn desk_scale(kind: MapKind, loss: LossConfig<T>) -> Self {
        Self {
            kind,
            hidden: 100,
            epochs: 5000,
            eval_stride: 10,
            loss,
            adam: AdamHyper::default(),
            tension_input_scale: T::lit(DEFAULT_TENSION_INPUT_SCALE),
        }
    }

    /// 1000 hidden units, 20000 epochs.
    pub fn full_scale(kind: MapKind, loss: LossConfig<T>) -> Self {
        Self { hidden: 1000, epochs: 20000, ..Self::desk_scale(kind, loss) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden width must be at least 1".into()));
        }
        if self.eval_stride == 0 {
            return Err(Error::InvalidArgument("eval_stride must be at least 1".into()));
        }
        if !(self.tension_input_scale > T::zero()) {
            return Err(Error::InvalidArgument("tension_input_scale must be positive".into()));
        }
        self.loss.validate()?;
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses<T> {
    pub l_basic: T,
    pub l_const: T,
    pub l_pinn: T,
    /// The optimized objective for the run's loss configuration.
    pub l_train: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics<T> {
    /// Training losses of every epoch, evaluated before that epoch's update.
    pub train: Vec<EpochLosses<T>>,
    /// `(epoch, L_eval)` every `eval_stride` epochs.
    pub eval: Vec<(usize, T)>,
    /// Epoch with the smallest training `L_basic`.
    pub best_epoch: usize,
    /// `L_eval` of the parameters at `best_epoch`, raw.
    pub l_best_eval: T,
    pub wall_time: Duration,
}

impl<T: Scalar> RunMetrics<T> {
    pub fn l_best_eval_display(&self) -> T {
        self.l_best_eval * T::lit(DISPLAY_SCALE)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters snapshotted at `metrics.best_epoch`.
    pub params: MlpParams<T>,
    pub metrics: RunMetrics<T>,
}

/// `L_basic` of `params` on a dataset.
pub fn evaluate<T: Scalar>(params: &MlpParams<T>, eval_set: &Dataset<T>) -> Result<T> {
    if eval_set.n_joints != params.dims.n_joints || eval_set.n_muscles != params.dims.n_muscles {
        return Err(Error::dim("evaluation set muscle count", params.dims.n_muscles, eval_set.n_muscles));
    }
    loss_basic(params, &Batch::from_dataset(eval_set, params.dims.kind))
}

/// Trains one network on `train`, tracking `L_eval` on `eval`.
pub fn train_one<T: Scalar>(config: &TrainConfig<T>, train: &Dataset<T>, eval: &Dataset<T>, seed: u64) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train.n_joints != eval.n_joints || train.n_muscles != eval.n_muscles {
        return Err(Error::InvalidArgument("training and evaluation data dimensions differ".into()));
    }
    let start = Instant::now();
    let dims = MlpDims::new(config.kind, train.n_joints, train.n_muscles, config.hidden);
    let mut params = init_params(dims, default_input_scale(&dims, config.tension_input_scale), mix_seed(seed, INIT_STREAM))?;
    let train_batch = Batch::from_dataset(train, config.kind);
    let eval_batch = Batch::from_dataset(eval, config.kind);
    let mut adam = AdamState::new(&params.weights);
    let mut history = Vec::with_capacity(config.epochs);
    let mut eval_curve = Vec::with_capacity(config.epochs.div_ceil(config.eval_stride));
    let mut best: Option<(T, usize, MlpParams<T>)> = None;

    for epoch in 0..config.epochs {
        let gb = total_loss_and_grad(&params, &train_batch, &config.loss)?;
        let finite = [gb.l_basic, gb.l_const, gb.l_pinn, gb.total].iter().all(|v| v.is_finite());
        if !finite || !gb.grad.all_finite() {
            return Err(Error::NonFinite {
                epoch,
                detail: format!("l_basic={} l_const={} l_pinn={} total={}", gb.l_basic, gb.l_const, gb.l_pinn, gb.total),
            });
        }
        history.push(EpochLosses { l_basic: gb.l_basic, l_const: gb.l_const, l_pinn: gb.l_pinn, l_train: gb.total });
        if best.as_ref().is_none_or(|(b, _, _)| gb.l_basic < *b) {
            best = Some((gb.l_basic, epoch, params.clone()));
        }
        if epoch % config.eval_stride == 0 {
            eval_curve.push((epoch, loss_basic(&params, &eval_batch)?));
        }
        adam_step(&mut params.weights, &gb.grad, &mut adam, &config.adam)?;
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    let l_best_eval = loss_basic(&best_params, &eval_batch)?;
    let metrics = RunMetrics { train: history, eval: eval_curve, best_epoch, l_best_eval, wall_time: start.elapsed() };
    Ok(TrainOutcome { params: best_params, metrics })
}

/// Per-run metrics table: `epoch,l_basic,l_const,l_pinn,l_train,l_eval`, one
/// row per recorded evaluation epoch, raw values.
pub fn metrics_csv<T: Scalar>(m: &RunMetrics<T>) -> String {
    let mut out = String::from("epoch,l_basic,l_const,l_pinn,l_train,l_eval\n");
    for &(epoch, l_eval) in &m.eval {
        let e = &m.train[epoch];
        let _ = writeln!(
            out,
            "{epoch},{},{},{},{},{}",
            e.l_basic.to_exact_string(),
            e.l_const.to_exact_string(),
            e.l_pinn.to_exact_string(),
            e.l_train.to_exact_string(),
            l_eval.to_exact_string()
        );
    }
    out
}

/// Where a run's training and evaluation data come from.
#[derive(Debug, Clone)]
pub enum DataSource<T> {
    /// Fresh simulator data per seed: `n_train + eval_size` samples drawn
    /// from a stream keyed by `(data_seed, run seed)` and then split.
    Simulated { model: ArmModel<T>, kind: MapKind, eval_size: usize, data_seed: u64 },
    /// A fixed dataset; each run shuffles it with its seed and holds out
    /// everything beyond `n_train` for evaluation.
    External(Dataset<T>),
}

impl<T: Scalar> DataSource<T> {
    pub fn kind(&self) -> MapKind {
        match self {
            DataSource::Simulated { kind, .. } => *kind,
            DataSource::External(d) => d.kind,
        }
    }

    /// Training and evaluation sets for one `(n_train, seed)` pair.
    pub fn prepare(&self, n_train: usize, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
        match self {
            DataSource::Simulated { model, kind, eval_size, data_seed } => {
                if *eval_size == 0 {
                    return Err(Error::InvalidArgument("eval_size must be at least 1".into()));
                }
                if n_train == 0 {
                    return Err(Error::InvalidArgument("n_train must be at least 1".into()));
                }
                let pool_seed = mix_seed(mix_seed(*data_seed, DATA_STREAM), seed);
                let pool = generate(model, *kind, n_train + eval_size, pool_seed)?;
                split(&pool, n_train, seed)
            }
            DataSource::External(d) => split(d, n_train, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_al;

    fn tiny(kind: MapKind, loss: LossConfig<f64>) -> TrainConfig<f64> {
        TrainConfig { hidden: 8, epochs: 50, eval_stride: 1, ..TrainConfig::desk_scale(kind, loss) }
    }

    fn data() -> (Dataset<f64>, Dataset<f64>) {
        let arm = ArmModel::default();
        split(&generate_al(&arm, 60, 3).unwrap(), 20, 1).unwrap()
    }

    #[test]
    fn single_epoch_run() {
        let (tr, ev) = data();
        let cfg = TrainConfig { epochs: 1, ..tiny(MapKind::Al, LossConfig::basic()) };
        let out = train_one(&cfg, &tr, &ev, 0).unwrap();
        assert_eq!(out.metrics.train.len(), 1);
        assert_eq!(out.metrics.eval.len(), 1);
        assert_eq!(out.metrics.best_epoch, 0);
    }

    #[test]
    fn zero_learning_rate_freezes_everything() {
        let (tr, ev) = data();
        let mut cfg = tiny(MapKind::Al, LossConfig::basic_const_pinn(1e-5));
        cfg.adam.lr = 0.0;
        let out = train_one(&cfg, &tr, &ev, 4).unwrap();
        let first = out.metrics.eval[0].1;
        assert!(out.metrics.eval.iter().all(|&(_, v)| v == first));
        assert_eq!(out.metrics.best_epoch, 0);
        assert_eq!(out.metrics.l_best_eval, first);
    }

    #[test]
    fn best_epoch_minimizes_training_basic() {
        let (tr, ev) = data();
        let out = train_one(&tiny(MapKind::Al, LossConfig::basic_const()), &tr, &ev, 2).unwrap();
        let m = &out.metrics;
        let best = m.train[m.best_epoch].l_basic;
        assert!(m.train.iter().all(|e| best <= e.l_basic));
        assert_eq!(evaluate(&out.params, &ev).unwrap(), m.l_best_eval);
    }

    #[test]
    fn metrics_rows_follow_stride() {
        let (tr, ev) = data();
        let cfg = TrainConfig { epochs: 23, eval_stride: 5, ..tiny(MapKind::Al, LossConfig::basic()) };
        let out = train_one(&cfg, &tr, &ev, 0).unwrap();
        let csv = metrics_csv(&out.metrics);
        assert_eq!(csv.lines().count(), 1 + 23usize.div_ceil(5));
        assert!(csv.starts_with("epoch,l_basic,l_const,l_pinn,l_train,l_eval\n0,"));
    }

    #[test]
    fn diverging_run_reports_non_finite() {
        let (tr, ev) = data();
        let mut cfg = tiny(MapKind::Al, LossConfig::basic());
        cfg.adam.lr = 1e300;
        cfg.epochs = 20;
        match train_one(&cfg, &tr, &ev, 0) {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected NonFinite, got {:?}", other.map(|o| o.metrics.l_best_eval)),
        }
    }

    #[test]
    fn evaluate_by_hand_and_on_zero_targets() {
        use crate::dataset::{Provenance, Sample};
        use crate::mlp::Weights;
        let d = MlpDims::new(MapKind::Al, 2, 4, 3);
        let mut p = MlpParams::<f64> { dims: d, input_scale: vec![1.0; 2], weights: Weights::zeros(&d) };
        let zero_set = Dataset::from_samples(
            vec![Sample { theta: vec![0.2, 0.1], f: vec![0.0; 4], l: vec![0.0; 4], tau: vec![0.0; 2] }],
            MapKind::Al,
            Provenance::External,
        )
        .unwrap();
        assert_eq!(evaluate(&p, &zero_set).unwrap(), 0.0);
        p.weights.b3 = vec![0.1, -0.2, 0.0, 0.4];
        // (0.01 + 0.04 + 0 + 0.16) / 4
        assert!((evaluate(&p, &zero_set).unwrap() - 0.0525).abs() < 1e-16);
    }

    #[test]
    fn simulated_source_is_seeded() {
        let src = DataSource::Simulated { model: ArmModel::<f64>::default(), kind: MapKind::Atl, eval_size: 30, data_seed: 5 };
        let (a_tr, a_ev) = src.prepare(7, 1).unwrap();
        let (b_tr, b_ev) = src.prepare(7, 1).unwrap();
        assert_eq!((a_tr.len(), a_ev.len()), (7, 30));
        assert_eq!(a_tr, b_tr);
        assert_eq!(a_ev, b_ev);
        let (c_tr, _) = src.prepare(7, 2).unwrap();
        assert_ne!(a_tr, c_tr);
    }
}
