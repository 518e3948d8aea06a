//! Simulator-driven data generation, train/eval splitting and CSV persistence.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`).
//! Uniform reals are formed directly from the top 53 bits of each `u64`
//! draw, and shuffles use a hand-written Fisher–Yates, so a seed produces the
//! same data regardless of `rand` version.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arm::{ArmModel, JointState, ARM_JOINTS};
use crate::error::{Error, Result};
use crate::qp::{solve_tension_qp, QpSpec};
use crate::scalar::{max_abs, Scalar};

/// Joint-angle sampling range, rad.
pub const THETA_RANGE: (f64, f64) = (-0.5, 0.5);
/// Per-sample minimum tension range used for angle-tension-length data, N.
pub const ATL_F_MIN_RANGE: (f64, f64) = (10.0, 300.0);
/// Redraw budget per sample when the tension QP is infeasible.
pub const MAX_RESAMPLES_PER_SAMPLE: usize = 1000;

pub type DataRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> DataRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw on `[lo, hi)` from 53 random bits.
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

/// Uniform index in `0..n` by 128-bit multiply-shift.
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_theta<T: Scalar>(rng: &mut impl RngCore) -> JointState<T> {
    let (lo, hi) = THETA_RANGE;
    let t0 = uniform(rng, lo, hi);
    let t1 = uniform(rng, lo, hi);
    JointState::new(T::lit(t0), T::lit(t1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MapKind {
    /// Angle → length.
    Al,
    /// Angle, tension → length.
    Atl,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Al => "al",
            MapKind::Atl => "atl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "al" => Some(MapKind::Al),
            "atl" => Some(MapKind::Atl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Simulator,
    External,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Simulator => "simulator",
            Provenance::External => "external",
        }
    }
}

/// One `(θ, f, l, τ)` observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub theta: Vec<T>,
    pub f: Vec<T>,
    pub l: Vec<T>,
    pub tau: Vec<T>,
}

impl<T: Scalar> Sample<T> {
    fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.f).chain(&self.l).chain(&self.tau).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<Sample<T>>,
    pub n_joints: usize,
    pub n_muscles: usize,
    pub kind: MapKind,
    pub seed: Option<u64>,
    pub provenance: Provenance,
    /// Fingerprint of the generating arm model, if any.
    pub model_hash: Option<String>,
    /// Number of infeasible QP draws that were redrawn.
    pub resamples: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Wraps samples after checking that dimensions agree and values are finite.
    pub fn from_samples(samples: Vec<Sample<T>>, kind: MapKind, provenance: Provenance) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidArgument("dataset is empty".into()))?;
        let (n, m) = (first.theta.len(), first.f.len());
        for (i, s) in samples.iter().enumerate() {
            if s.theta.len() != n || s.tau.len() != n {
                return Err(Error::InvalidArgument(format!("sample {i}: joint dimension differs from {n}")));
            }
            if s.f.len() != m || s.l.len() != m {
                return Err(Error::InvalidArgument(format!("sample {i}: muscle dimension differs from {m}")));
            }
            if !s.is_finite() {
                return Err(Error::InvalidArgument(format!("sample {i} has non-finite values")));
            }
        }
        Ok(Self { samples, n_joints: n, n_muscles: m, kind, seed: None, provenance, model_hash: None, resamples: 0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self { samples: idx.iter().map(|&i| self.samples[i].clone()).collect(), ..self.clone_meta() }
    }

    fn clone_meta(&self) -> Self {
        Self {
            samples: Vec::new(),
            n_joints: self.n_joints,
            n_muscles: self.n_muscles,
            kind: self.kind,
            seed: self.seed,
            provenance: self.provenance,
            model_hash: self.model_hash.clone(),
            resamples: self.resamples,
        }
    }
}

/// Tension of the zero pose under the angle-length pipeline (`f_min = 0`).
///
/// Measured lengths are taken relative to this state so that `l = 0` there.
pub fn reference_tension<T: Scalar>(model: &ArmModel<T>) -> Result<Vec<T>> {
    let q = JointState::zero();
    let tau = model.gravity_torque(&q);
    let spec = QpSpec::new(model.muscle_jacobian(&q), tau.to_vec(), T::zero());
    Ok(solve_tension_qp(&spec)?.f)
}

/// Runs the full pipeline `θ → τ → f → l` for one pose.
pub fn simulate_sample<T: Scalar>(model: &ArmModel<T>, q: &JointState<T>, f_min: T, f_ref: &[T]) -> Result<Sample<T>> {
    let tau = model.gravity_torque(q);
    let spec = QpSpec::new(model.muscle_jacobian(q), tau.to_vec(), f_min);
    let sol = solve_tension_qp(&spec)?;
    // clamp the ≤1e-9 slack so the spring inverse stays in its domain
    let f: Vec<T> = sol.f.iter().map(|&v| v.max(T::zero())).collect();
    let l = model.measured_length(q, &f, f_ref)?;
    Ok(Sample { theta: q.theta.to_vec(), f, l, tau: tau.to_vec() })
}

pub fn generate<T: Scalar>(model: &ArmModel<T>, kind: MapKind, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
    }
    let f_ref = reference_tension(model)?;
    let mut rng = seeded_rng(seed);
    let mut samples = Vec::with_capacity(n);
    let mut resamples = 0usize;
    while samples.len() < n {
        let mut attempts = 0usize;
        loop {
            let q = sample_theta::<T>(&mut rng);
            let f_min = match kind {
                MapKind::Al => T::zero(),
                MapKind::Atl => T::lit(uniform(&mut rng, ATL_F_MIN_RANGE.0, ATL_F_MIN_RANGE.1)),
            };
            match simulate_sample(model, &q, f_min, &f_ref) {
                Ok(s) => {
                    samples.push(s);
                    break;
                }
                Err(Error::Infeasible(msg)) => {
                    resamples += 1;
                    attempts += 1;
                    if attempts >= MAX_RESAMPLES_PER_SAMPLE {
                        return Err(Error::Infeasible(format!("gave up after {attempts} redraws: {msg}")));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Dataset {
        samples,
        n_joints: ARM_JOINTS,
        n_muscles: model.n_muscles(),
        kind,
        seed: Some(seed),
        provenance: Provenance::Simulator,
        model_hash: Some(model.fingerprint()),
        resamples,
    })
}

/// Angle-length data: `f_min = 0`, so tension and length are functions of θ.
pub fn generate_al<T: Scalar>(model: &ArmModel<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    generate(model, MapKind::Al, n, seed)
}

/// Angle-tension-length data: `f_min ~ U[10, 300]` N per sample.
pub fn generate_atl<T: Scalar>(model: &ArmModel<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    generate(model, MapKind::Atl, n, seed)
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed);
    for i in (1..n).rev() {
        let j = uniform_index(&mut rng, i + 1);
        idx.swap(i, j);
    }
    idx
}

/// Shuffles with `seed` and returns the first `n_train` samples as training
/// data and the rest for evaluation.
pub fn split<T: Scalar>(data: &Dataset<T>, n_train: usize, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if n_train == 0 || n_train >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "n_train must be in [1, {}), got {n_train}",
            data.len()
        )));
    }
    let idx = shuffled_indices(data.len(), seed);
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

/// Header row for the given dimensions.
pub fn csv_header(n_joints: usize, n_muscles: usize) -> String {
    let cols: Vec<String> = (0..n_joints)
        .map(|i| format!("theta_{i}"))
        .chain((0..n_muscles).map(|i| format!("f_{i}")))
        .chain((0..n_muscles).map(|i| format!("l_{i}")))
        .chain((0..n_joints).map(|i| format!("tau_{i}")))
        .collect();
    cols.join(",")
}

pub fn to_csv_string<T: Scalar>(data: &Dataset<T>) -> String {
    let mut out = String::new();
    if let Some(seed) = data.seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    let _ = writeln!(out, "# kind={}", data.kind.as_str());
    let _ = writeln!(out, "# provenance={}", data.provenance.as_str());
    if let Some(h) = &data.model_hash {
        let _ = writeln!(out, "# model_hash={h}");
    }
    let _ = writeln!(out, "# resamples={}", data.resamples);
    out.push_str(&csv_header(data.n_joints, data.n_muscles));
    out.push('\n');
    for s in &data.samples {
        let row: Vec<String> =
            s.theta.iter().chain(&s.f).chain(&s.l).chain(&s.tau).map(|v| v.to_exact_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(data)).map_err(|e| Error::io(path, e))
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let count = |prefix: &str| {
        cols.iter().filter(|c| c.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok())).count()
    };
    let (n, m) = (count("theta_"), count("f_"));
    (csv_header(n, m).split(',').eq(cols.iter().copied()) && n > 0 && m > 0).then_some((n, m))
}

/// Parses the CSV schema written by [`save_csv`]. Comment lines may carry
/// `key=value` metadata; files without a `kind` are treated as
/// angle-tension-length data.
pub fn parse_csv<T: Scalar>(text: &str, path: &Path) -> Result<Dataset<T>> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut kind = None;
    let mut seed = None;
    let mut provenance = Provenance::External;
    let mut model_hash = None;
    let mut resamples = 0usize;
    let mut dims = None;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "kind" => kind = Some(MapKind::parse(v).ok_or_else(|| err(lineno, format!("unknown kind {v:?}")))?),
                    "seed" => seed = v.parse().ok(),
                    "provenance" if v == "simulator" => provenance = Provenance::Simulator,
                    "model_hash" => model_hash = Some(v.to_string()),
                    "resamples" => resamples = v.parse().unwrap_or(0),
                    _ => {}
                }
            }
            continue;
        }
        let Some((n, m)) = dims else {
            dims = Some(parse_header(line).ok_or_else(|| {
                err(lineno, "missing or malformed header (expected theta_*, f_*, l_*, tau_* columns)".into())
            })?);
            continue;
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let width = 2 * n + 2 * m;
        if fields.len() != width {
            return Err(err(lineno, format!("expected {width} fields, found {}", fields.len())));
        }
        let mut values = Vec::with_capacity(width);
        for (col, field) in fields.iter().enumerate() {
            let v: T = field.parse().map_err(|_| err(lineno, format!("column {}: not a number: {field:?}", col + 1)))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
        let (theta, rest) = values.split_at(n);
        let (f, rest) = rest.split_at(m);
        let (l, tau) = rest.split_at(m);
        samples.push(Sample { theta: theta.to_vec(), f: f.to_vec(), l: l.to_vec(), tau: tau.to_vec() });
    }
    let Some((n, m)) = dims else {
        return Err(err(text.lines().count().max(1), "missing header".into()));
    };
    if samples.is_empty() {
        return Err(err(text.lines().count().max(1), "no data rows".into()));
    }
    Ok(Dataset {
        samples,
        n_joints: n,
        n_muscles: m,
        kind: kind.unwrap_or(MapKind::Atl),
        seed,
        provenance,
        model_hash,
        resamples,
    })
}

pub fn load_csv<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

/// Largest `‖τ + Gᵀ(θ) f‖∞` over the dataset for a two-joint simulator model.
pub fn max_torque_residual<T: Scalar>(model: &ArmModel<T>, data: &Dataset<T>) -> Result<T> {
    let mut worst = T::zero();
    for s in &data.samples {
        let q = JointState::from_slice(&s.theta)?;
        let spec = QpSpec::new(model.muscle_jacobian(&q), s.tau.clone(), T::zero());
        worst = worst.max(max_abs(&spec.torque_residual(&s.f)));
    }
    Ok(worst)
}
