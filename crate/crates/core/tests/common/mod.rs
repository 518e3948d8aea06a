//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use pimbs::dataset::{generate, seeded_rng, uniform, DataRng, MapKind};
use pimbs::mlp::{init_params, loss_basic, loss_const, loss_pinn, total_loss_and_grad, MlpDims};
use pimbs::{ArmModel, Batch, JointState, LossConfig, Matrix, MlpParams, QpSpec};

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖a − b‖∞ / ‖b‖∞`.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&diff) / max_abs(b).max(f64::MIN_POSITIVE)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (norm(a) * norm(b))
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b)
}

pub fn random_theta(rng: &mut DataRng) -> JointState {
    JointState::new(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5))
}

/// Central-difference Jacobian of a vector function of θ, `M × 2`.
pub fn fd_theta_jacobian(f: impl Fn(&JointState) -> Vec<f64>, q: &JointState, h: f64) -> Matrix {
    let m = f(q).len();
    let mut jac = Matrix::zeros(m, 2);
    for j in 0..2 {
        let mut qp = *q;
        let mut qm = *q;
        qp.theta[j] += h;
        qm.theta[j] -= h;
        let (lp, lm) = (f(&qp), f(&qm));
        for i in 0..m {
            jac[(i, j)] = (lp[i] - lm[i]) / (2.0 * h);
        }
    }
    jac
}

// ---------------------------------------------------------------------------
// QP oracle

/// Euclidean projection onto `{f : Gᵀf = −τ}` for a two-column `G`.
fn project_affine(g: &Matrix, tau: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(g.cols(), 2);
    let (c0, c1) = (g.column(0), g.column(1));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a, b, d) = (dot(&c0, &c0), dot(&c0, &c1), dot(&c1, &c1));
    let det = a * d - b * b;
    let r = [dot(&c0, f) + tau[0], dot(&c1, f) + tau[1]];
    let y = [(d * r[0] - b * r[1]) / det, (a * r[1] - b * r[0]) / det];
    f.iter().enumerate().map(|(i, &fi)| fi - c0[i] * y[0] - c1[i] * y[1]).collect()
}

/// Dykstra's alternating projection onto the affine set ∩ `[f_min, ∞)ᴹ`.
pub fn project_feasible(spec: &QpSpec, z: &[f64], iters: usize) -> Vec<f64> {
    let m = z.len();
    let mut x = z.to_vec();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    for _ in 0..iters {
        let ya: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = project_affine(&spec.g, &spec.tau, &ya);
        for i in 0..m {
            p[i] = ya[i] - y[i];
        }
        let xb: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let next: Vec<f64> = xb.iter().map(|&v| v.max(spec.f_min)).collect();
        for i in 0..m {
            q[i] = xb[i] - next[i];
        }
        // x may stall for a sweep while the corrections p, q still evolve, so
        // also require the two projections to agree
        let moved = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let gap = y.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if moved.max(gap) < 1e-14 * (1.0 + max_abs(&x)) {
            break;
        }
    }
    // land exactly on the affine set; the box slack this leaves is O(tolerance)
    project_affine(&spec.g, &spec.tau, &x)
}

/// Largest eigenvalue of a symmetric positive-definite matrix by power iteration.
fn spectral_radius(w: &Matrix) -> f64 {
    let mut v = vec![1.0; w.rows()];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let wv = w.mul_vec(&v);
        let n = norm(&wv);
        lambda = n / norm(&v);
        v = wv.iter().map(|x| x / n).collect();
    }
    lambda
}

/// Projected gradient descent on `fᵀWf` with step `1 / (2 λmax(W))`.
pub fn projected_gradient(spec: &QpSpec, max_outer: usize) -> Vec<f64> {
    let step = 1.0 / (2.0 * spectral_radius(&spec.w));
    let m = spec.g.rows();
    let mut f = project_feasible(spec, &vec![spec.f_min; m], 100_000);
    for _ in 0..max_outer {
        let grad = spec.w.mul_vec(&f);
        let z: Vec<f64> = f.iter().zip(&grad).map(|(a, g)| a - 2.0 * step * g).collect();
        let next = project_feasible(spec, &z, 100_000);
        let moved = max_abs(&next.iter().zip(&f).map(|(a, b)| a - b).collect::<Vec<_>>());
        f = next;
        if moved < 1e-13 * (1.0 + max_abs(&f)) {
            break;
        }
    }
    f
}

/// Gravity-compensation QP at a pose.
pub fn arm_qp(arm: &ArmModel, q: &JointState, f_min: f64) -> QpSpec {
    QpSpec::new(arm.muscle_jacobian(q), arm.gravity_torque(q).to_vec(), f_min)
}

// ---------------------------------------------------------------------------
// Network helpers

/// Glorot weights plus random biases, so that no parameter sits at a special value.
pub fn random_params(kind: MapKind, hidden: usize, seed: u64) -> MlpParams {
    let dims = MlpDims::new(kind, 2, 4, hidden);
    let scale = pimbs::mlp::default_input_scale(&dims, 0.01);
    let mut p = init_params(dims, scale, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0xB1A5);
    for b in [&mut p.weights.b1, &mut p.weights.b2, &mut p.weights.b3] {
        for v in b.iter_mut() {
            *v = uniform(&mut rng, -0.5, 0.5);
        }
    }
    p
}

pub fn random_input(kind: MapKind, rng: &mut DataRng) -> Vec<f64> {
    let mut x = vec![uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)];
    if kind == MapKind::Atl {
        x.extend((0..4).map(|_| uniform(rng, 0.0, 300.0)));
    }
    x
}

pub fn sim_batch(kind: MapKind, n: usize, seed: u64) -> Batch {
    let data = generate(&ArmModel::default(), kind, n, seed).unwrap();
    Batch::from_dataset(&data, kind)
}

/// Central finite differences of a scalar function of the flattened weights.
pub fn fd_param_gradient(params: &MlpParams, h: f64, indices: &[usize], loss: impl Fn(&MlpParams) -> f64) -> Vec<f64> {
    let mut p = params.clone();
    indices
        .iter()
        .map(|&k| {
            let orig = *p.weights.flat_mut(k);
            *p.weights.flat_mut(k) = orig + h;
            let up = loss(&p);
            *p.weights.flat_mut(k) = orig - h;
            let down = loss(&p);
            *p.weights.flat_mut(k) = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central finite differences of `forward` with respect to the θ inputs only.
pub fn fd_input_jacobian(params: &MlpParams, x: &[f64], h: f64) -> Matrix {
    let m = params.dims.n_muscles;
    let n = params.dims.n_joints;
    let mut jac = Matrix::zeros(m, n);
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let (yp, ym) = (params.forward(&xp).unwrap(), params.forward(&xm).unwrap());
        for i in 0..m {
            jac[(i, k)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    jac
}

/// Largest violation among the KKT conditions of a reported QP solution:
/// stationarity, torque equality, bounds, multiplier signs and complementarity.
pub fn kkt_violation(spec: &QpSpec, sol: &pimbs::QpSolution) -> f64 {
    let m = spec.g.rows();
    let mut mu = vec![0.0; m];
    for (&i, &v) in sol.active_set.iter().zip(&sol.dual_bound) {
        mu[i] = v;
    }
    let wf = spec.w.mul_vec(&sol.f);
    let g_lambda = spec.g.mul_vec(&sol.dual_eq);
    let stationarity: Vec<f64> = (0..m).map(|i| 2.0 * wf[i] + g_lambda[i] - mu[i]).collect();
    let equality = spec.torque_residual(&sol.f);
    let bound = sol.f.iter().map(|&f| (spec.f_min - f).max(0.0)).fold(0.0, f64::max);
    let sign = mu.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    let complementarity = (0..m).map(|i| (mu[i] * (sol.f[i] - spec.f_min)).abs()).fold(0.0, f64::max);
    [max_abs(&stationarity), max_abs(&equality), bound, sign, complementarity].into_iter().fold(0.0, f64::max)
}

/// Loss assembled from the public component functions, independent of the
/// fused gradient code.
pub fn reference_total(params: &MlpParams, batch: &Batch, cfg: &LossConfig) -> f64 {
    let mut total = loss_basic(params, batch).unwrap();
    if cfg.use_const {
        total += loss_const(params);
    }
    if cfg.use_pinn {
        total += cfg.alpha * loss_pinn(params, batch).unwrap();
    }
    total
}

/// Cosine similarity and relative norm error of the analytic gradient against
/// central differences (step `1e-4`) over the given flat parameter indices.
pub fn gradient_check(params: &MlpParams, batch: &Batch, cfg: &LossConfig, indices: &[usize]) -> (f64, f64) {
    let analytic = total_loss_and_grad(params, batch, cfg).unwrap().grad.flatten();
    let picked: Vec<f64> = indices.iter().map(|&k| analytic[k]).collect();
    let fd = fd_param_gradient(params, 1e-4, indices, |p| reference_total(p, batch, cfg));
    (cosine(&picked, &fd), rel_norm(&picked, &fd))
}

/// Relative error of `input_jacobian` against central differences (step `1e-5`).
pub fn input_jacobian_error(params: &MlpParams, x: &[f64]) -> f64 {
    let analytic = params.input_jacobian(x).unwrap();
    let fd = fd_input_jacobian(params, x, 1e-5);
    rel_inf(analytic.as_slice(), fd.as_slice())
}

/// Every loss configuration at the simulation weight and at a weight large
/// enough for the physics term to dominate.
pub fn all_loss_configs() -> Vec<LossConfig> {
    let mut out = vec![LossConfig::basic(), LossConfig::basic_const()];
    for alpha in [1e-5, 1.0] {
        out.push(LossConfig::basic_pinn(alpha));
        out.push(LossConfig::basic_const_pinn(alpha));
    }
    out
}

/// Rows shaped like robot recordings (5 joints, 10 muscles) drawn from a
/// smooth synthetic arm: random constant moment arms plus the spring term,
/// with tensions at least 10 N and torques consistent with `τ = −Gᵀf`.
pub fn robot_fixture_csv(rows: usize, seed: u64) -> String {
    let (n, m) = (5, 10);
    let mut rng = seeded_rng(seed);
    let arms: Vec<f64> = (0..m * n).map(|_| uniform(&mut rng, -0.04, 0.04)).collect();
    let mut out = pimbs::dataset::csv_header(n, m);
    out.push('\n');
    for _ in 0..rows {
        let theta: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -0.8, 0.8)).collect();
        let f: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 10.0, 200.0)).collect();
        let l: Vec<f64> = (0..m)
            .map(|i| (0..n).map(|j| arms[i * n + j] * theta[j]).sum::<f64>() + 0.01 * theta[i % n].powi(2) + f[i].ln_1p() / 1000.0)
            .collect();
        let tau: Vec<f64> = (0..n).map(|j| -(0..m).map(|i| arms[i * n + j] * f[i]).sum::<f64>()).collect();
        let row: Vec<String> = theta.iter().chain(&f).chain(&l).chain(&tau).map(|v| format!("{v:.17e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
