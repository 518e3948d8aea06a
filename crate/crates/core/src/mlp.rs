//! Body-schema network `h` and its loss terms.
//!
//! `h(x) = W3 · tanh(W2 · tanh(W1 · (s ⊙ x) + b1) + b2) + b3`, where `s` is a
//! fixed (untrained) per-input scale. The physics loss depends on the input
//! Jacobian `∂h/∂θ`, so its parameter gradient is second order. It is computed
//! in closed form: the θ-tangents of every layer are propagated forward
//! alongside the activations and then reverse-differentiated together with
//! the primal path (see [`total_loss_and_grad`]).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::{seeded_rng, uniform, Dataset, MapKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{axpy, dot, Scalar};

/// Default scale applied to tension inputs, 1/N.
pub const DEFAULT_TENSION_INPUT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpDims {
    /// Joint count `N`; the first `N` inputs are joint angles.
    pub n_joints: usize,
    /// Muscle count `M`, the output width.
    pub n_muscles: usize,
    pub hidden: usize,
    pub kind: MapKind,
}

impl MlpDims {
    pub fn new(kind: MapKind, n_joints: usize, n_muscles: usize, hidden: usize) -> Self {
        Self { n_joints, n_muscles, hidden, kind }
    }

    /// `N` for angle-length maps, `N + M` for angle-tension-length maps.
    pub fn n_in(&self) -> usize {
        match self.kind {
            MapKind::Al => self.n_joints,
            MapKind::Atl => self.n_joints + self.n_muscles,
        }
    }

    pub fn n_out(&self) -> usize {
        self.n_muscles
    }

    fn validate(&self) -> Result<()> {
        if self.n_joints == 0 || self.n_muscles == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!("network dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Trainable tensors of the network. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
    pub w3: Matrix<T>,
    pub b3: Vec<T>,
}

impl<T: Scalar> Weights<T> {
    pub fn zeros(dims: &MlpDims) -> Self {
        let (i, h, o) = (dims.n_in(), dims.hidden, dims.n_out());
        Self {
            w1: Matrix::zeros(h, i),
            b1: vec![T::zero(); h],
            w2: Matrix::zeros(h, h),
            b2: vec![T::zero(); h],
            w3: Matrix::zeros(o, h),
            b3: vec![T::zero(); o],
        }
    }

    pub fn buffers(&self) -> [&[T]; 6] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2, self.w3.as_slice(), &self.b3]
    }

    pub fn buffers_mut(&mut self) -> [&mut [T]; 6] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
            self.w3.as_mut_slice(),
            &mut self.b3,
        ]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.buffers().iter().zip(other.buffers().iter()).all(|(a, b)| a.len() == b.len())
            && self.w1.rows() == other.w1.rows()
            && self.w3.rows() == other.w3.rows()
    }

    pub fn all_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Total number of scalars.
    pub fn len(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation of all buffers in declaration order.
    pub fn flatten(&self) -> Vec<T> {
        self.buffers().iter().flat_map(|b| b.iter().copied()).collect()
    }

    /// Mutable reference to the `k`-th scalar in flattened order.
    pub fn flat_mut(&mut self, mut k: usize) -> &mut T {
        for buf in self.buffers_mut() {
            if k < buf.len() {
                return &mut buf[k];
            }
            k -= buf.len();
        }
        panic!("flat index out of range");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub dims: MlpDims,
    /// Fixed multiplier per input; not trained.
    pub input_scale: Vec<T>,
    pub weights: Weights<T>,
}

/// Unit scale on angles and `tension_scale` on tensions.
pub fn default_input_scale<T: Scalar>(dims: &MlpDims, tension_scale: T) -> Vec<T> {
    let mut s = vec![T::one(); dims.n_joints];
    if dims.kind == MapKind::Atl {
        s.extend(std::iter::repeat_n(tension_scale, dims.n_muscles));
    }
    s
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<T: Scalar>(dims: MlpDims, input_scale: Vec<T>, seed: u64) -> Result<MlpParams<T>> {
    dims.validate()?;
    if input_scale.len() != dims.n_in() {
        return Err(Error::dim("input scale", dims.n_in(), input_scale.len()));
    }
    let mut rng = seeded_rng(seed);
    let mut w = Weights::zeros(&dims);
    for m in [&mut w.w1, &mut w.w2, &mut w.w3] {
        let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
        for v in m.as_mut_slice() {
            *v = T::lit(uniform(&mut rng, -bound, bound));
        }
    }
    Ok(MlpParams { dims, input_scale, weights: w })
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
struct Trace<T> {
    u: Vec<T>,
    a1: Vec<T>,
    d1: Vec<T>,
    a2: Vec<T>,
    d2: Vec<T>,
    y: Vec<T>,
}

fn tanh_layer<T: Scalar>(w: &Matrix<T>, b: &[T], x: &[T]) -> (Vec<T>, Vec<T>) {
    let a: Vec<T> = (0..w.rows()).map(|i| (dot(w.row(i), x) + b[i]).tanh()).collect();
    let d = a.iter().map(|&v| T::one() - v * v).collect();
    (a, d)
}

impl<T: Scalar> MlpParams<T> {
    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dims.n_in() {
            return Err(Error::dim("network input", self.dims.n_in(), x.len()));
        }
        Ok(())
    }

    fn trace(&self, x: &[T]) -> Trace<T> {
        let w = &self.weights;
        let u: Vec<T> = x.iter().zip(&self.input_scale).map(|(a, b)| *a * *b).collect();
        let (a1, d1) = tanh_layer(&w.w1, &w.b1, &u);
        let (a2, d2) = tanh_layer(&w.w2, &w.b2, &a1);
        let y = (0..w.w3.rows()).map(|i| dot(w.w3.row(i), &a2) + w.b3[i]).collect();
        Trace { u, a1, d1, a2, d2, y }
    }

    /// Predicted relative muscle lengths.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self.trace(x).y)
    }

    /// `∂h/∂θ` at `x`, an `M × N` matrix. Tension inputs are held fixed.
    pub fn input_jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let t = self.trace(x);
        let w = &self.weights;
        let (n, m, h) = (self.dims.n_joints, self.dims.n_muscles, self.dims.hidden);
        let mut jac = Matrix::zeros(m, n);
        let mut e1 = vec![T::zero(); h];
        for k in 0..n {
            let s = self.input_scale[k];
            for i in 0..h {
                e1[i] = t.d1[i] * w.w1[(i, k)] * s;
            }
            let e2: Vec<T> = (0..h).map(|i| t.d2[i] * dot(w.w2.row(i), &e1)).collect();
            for r in 0..m {
                jac[(r, k)] = dot(w.w3.row(r), &e2);
            }
        }
        Ok(jac)
    }

    /// Network input for one sample: θ, followed by f for tension-aware maps.
    pub fn input_of(&self, theta: &[T], f: &[T]) -> Vec<T> {
        match self.dims.kind {
            MapKind::Al => theta.to_vec(),
            MapKind::Atl => theta.iter().chain(f).copied().collect(),
        }
    }

    /// The reference input `x = 0`.
    pub fn zero_input(&self) -> Vec<T> {
        vec![T::zero(); self.dims.n_in()]
    }
}

/// Flattened full batch of training or evaluation data.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub n_in: usize,
    pub n_joints: usize,
    pub n_muscles: usize,
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
    pub tensions: Vec<T>,
    pub torques: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_dataset(data: &Dataset<T>, kind: MapKind) -> Self {
        let (n, m) = (data.n_joints, data.n_muscles);
        let n_in = match kind {
            MapKind::Al => n,
            MapKind::Atl => n + m,
        };
        let mut b = Batch {
            n_in,
            n_joints: n,
            n_muscles: m,
            inputs: Vec::with_capacity(data.len() * n_in),
            targets: Vec::with_capacity(data.len() * m),
            tensions: Vec::with_capacity(data.len() * m),
            torques: Vec::with_capacity(data.len() * n),
        };
        for s in &data.samples {
            b.inputs.extend_from_slice(&s.theta);
            if kind == MapKind::Atl {
                b.inputs.extend_from_slice(&s.f);
            }
            b.targets.extend_from_slice(&s.l);
            b.tensions.extend_from_slice(&s.f);
            b.torques.extend_from_slice(&s.tau);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.n_muscles.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.n_in..(i + 1) * self.n_in]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.n_muscles..(i + 1) * self.n_muscles]
    }

    pub fn tension(&self, i: usize) -> &[T] {
        &self.tensions[i * self.n_muscles..(i + 1) * self.n_muscles]
    }

    pub fn torque(&self, i: usize) -> &[T] {
        &self.torques[i * self.n_joints..(i + 1) * self.n_joints]
    }

    fn check(&self, params: &MlpParams<T>) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let d = &params.dims;
        if self.n_in != d.n_in() {
            return Err(Error::dim("batch input width", d.n_in(), self.n_in));
        }
        if self.n_muscles != d.n_muscles {
            return Err(Error::dim("batch muscle count", d.n_muscles, self.n_muscles));
        }
        if self.n_joints != d.n_joints {
            return Err(Error::dim("batch joint count", d.n_joints, self.n_joints));
        }
        let b = self.len();
        if self.tensions.len() != b * self.n_muscles || self.torques.len() != b * self.n_joints {
            return Err(Error::InvalidArgument("batch lacks tension or torque data".into()));
        }
        Ok(())
    }
}

/// Which terms make up the training loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig<T> {
    pub use_const: bool,
    pub use_pinn: bool,
    /// Weight of the physics term.
    pub alpha: T,
}

impl<T: Scalar> LossConfig<T> {
    pub fn basic() -> Self {
        Self { use_const: false, use_pinn: false, alpha: T::zero() }
    }

    pub fn basic_const() -> Self {
        Self { use_const: true, use_pinn: false, alpha: T::zero() }
    }

    pub fn basic_pinn(alpha: T) -> Self {
        Self { use_const: false, use_pinn: true, alpha }
    }

    pub fn basic_const_pinn(alpha: T) -> Self {
        Self { use_const: true, use_pinn: true, alpha }
    }

    /// The four ablation configurations in canonical order.
    pub fn ablation_set(alpha: T) -> [Self; 4] {
        [Self::basic(), Self::basic_const(), Self::basic_pinn(alpha), Self::basic_const_pinn(alpha)]
    }

    pub fn name(&self) -> &'static str {
        match (self.use_const, self.use_pinn) {
            (false, false) => "Basic",
            (true, false) => "Basic+Const",
            (false, true) => "Basic+PINN",
            (true, true) => "Basic+Const+PINN",
        }
    }

    /// Parses a configuration name such as `basic+const+pinn` (case-insensitive).
    pub fn parse(name: &str, alpha: T) -> Option<Self> {
        let parts: Vec<String> = name.split('+').map(|p| p.trim().to_ascii_lowercase()).collect();
        if parts.first().map(String::as_str) != Some("basic") {
            return None;
        }
        let mut cfg = Self::basic();
        for p in &parts[1..] {
            match p.as_str() {
                "const" if !cfg.use_const && !cfg.use_pinn => cfg.use_const = true,
                "pinn" if !cfg.use_pinn => {
                    cfg.use_pinn = true;
                    cfg.alpha = alpha;
                }
                _ => return None,
            }
        }
        Some(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_pinn && !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive when the physics term is on, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Raw (unscaled) loss components and the gradient of `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle<T> {
    pub l_basic: T,
    pub l_const: T,
    pub l_pinn: T,
    pub total: T,
    pub grad: Weights<T>,
}

/// Mean squared length error over samples and muscles.
pub fn loss_basic<T: Scalar>(params: &MlpParams<T>, batch: &Batch<T>) -> Result<T> {
    batch.check(params)?;
    let mut sum = T::zero();
    for i in 0..batch.len() {
        let y = params.trace(batch.input(i)).y;
        sum += y.iter().zip(batch.target(i)).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>();
    }
    Ok(sum / T::lit((batch.len() * batch.n_muscles) as f64))
}

/// Mean over muscles of `h(0)²`.
pub fn loss_const<T: Scalar>(params: &MlpParams<T>) -> T {
    let y = params.trace(&params.zero_input()).y;
    y.iter().map(|v| *v * *v).sum::<T>() / T::lit(y.len() as f64)
}

/// Mean over samples and joints of `(G_predᵀ f + τ)²`.
pub fn loss_pinn<T: Scalar>(params: &MlpParams<T>, batch: &Batch<T>) -> Result<T> {
    batch.check(params)?;
    let mut sum = T::zero();
    for i in 0..batch.len() {
        let g = params.input_jacobian(batch.input(i))?;
        let gt_f = g.tr_mul_vec(batch.tension(i));
        sum += gt_f.iter().zip(batch.torque(i)).map(|(a, b)| (*a + *b) * (*a + *b)).sum::<T>();
    }
    Ok(sum / T::lit((batch.len() * batch.n_joints) as f64))
}

/// Scratch buffers reused across samples.
struct Workspace<T> {
    e1: Vec<Vec<T>>,
    t1: Vec<Vec<T>>,
    t2: Vec<Vec<T>>,
    e2: Vec<Vec<T>>,
    g3: Vec<T>,
    q: Vec<T>,
    p: Vec<T>,
    abar2: Vec<T>,
    abar1: Vec<T>,
    zbar2: Vec<T>,
    zbar1: Vec<T>,
    e1sum: Vec<T>,
    e2sum: Vec<T>,
    dbar1: Vec<T>,
    dbar2: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize, h: usize) -> Self {
        let v = || vec![T::zero(); h];
        Self {
            e1: vec![v(); n],
            t1: vec![v(); n],
            t2: vec![v(); n],
            e2: vec![v(); n],
            g3: v(),
            q: v(),
            p: v(),
            abar2: v(),
            abar1: v(),
            zbar2: v(),
            zbar1: v(),
            e1sum: v(),
            e2sum: v(),
            dbar1: v(),
            dbar2: v(),
        }
    }
}

/// Physics residual inputs for one sample.
struct PinnTerm<'a, T> {
    f: &'a [T],
    tau: &'a [T],
    /// Loss normalizer `1 / (B N)`.
    norm: T,
    alpha: T,
}

/// Accumulates the gradient contributions of one sample into `grad` and
/// returns `(Σ squared length error, Σ squared torque residual)`.
fn accumulate<T: Scalar>(
    params: &MlpParams<T>,
    x: &[T],
    target: Option<(&[T], T)>,
    pinn: Option<PinnTerm<'_, T>>,
    ws: &mut Workspace<T>,
    grad: &mut Weights<T>,
) -> (T, T) {
    let w = &params.weights;
    let (n, h, m) = (params.dims.n_joints, params.dims.hidden, params.dims.n_muscles);
    let two = T::lit(2.0);
    let tr = params.trace(x);

    ws.abar2.iter_mut().for_each(|v| *v = T::zero());
    ws.dbar1.iter_mut().for_each(|v| *v = T::zero());
    ws.dbar2.iter_mut().for_each(|v| *v = T::zero());

    // Length term: ȳ = (2 / (B M)) (y - l).
    let mut sq_err = T::zero();
    if let Some((l, norm)) = target {
        for r in 0..m {
            let e = tr.y[r] - l[r];
            sq_err += e * e;
            let ybar = two * norm * e;
            grad.b3[r] += ybar;
            axpy(ybar, &tr.a2, grad.w3.row_mut(r));
            axpy(ybar, w.w3.row(r), &mut ws.abar2);
        }
    }

    // Physics term. Tangents along θ_k:
    //   t1 = s_k W1[:,k], e1 = d1⊙t1, t2 = W2 e1, e2 = d2⊙t2, J[:,k] = W3 e2
    //   r_k = fᵀ J[:,k] + τ_k = g3·e2 + τ_k with g3 = W3ᵀ f.
    // With ρ_k = 2α r_k / (B N) the reverse sweep collapses to rank-one
    // updates in q = d2⊙g3 and p = W2ᵀ q.
    let mut sq_res = T::zero();
    if let Some(pt) = pinn {
        ws.g3.iter_mut().for_each(|v| *v = T::zero());
        for r in 0..m {
            axpy(pt.f[r], w.w3.row(r), &mut ws.g3);
        }
        ws.e1sum.iter_mut().for_each(|v| *v = T::zero());
        ws.e2sum.iter_mut().for_each(|v| *v = T::zero());
        let mut rho = vec![T::zero(); n];
        for k in 0..n {
            let s = params.input_scale[k];
            for i in 0..h {
                ws.t1[k][i] = w.w1[(i, k)] * s;
                ws.e1[k][i] = tr.d1[i] * ws.t1[k][i];
            }
            for i in 0..h {
                ws.t2[k][i] = dot(w.w2.row(i), &ws.e1[k]);
                ws.e2[k][i] = tr.d2[i] * ws.t2[k][i];
            }
            let r = dot(&ws.g3, &ws.e2[k]) + pt.tau[k];
            sq_res += r * r;
            rho[k] = two * pt.alpha * pt.norm * r;
            axpy(rho[k], &ws.e1[k], &mut ws.e1sum);
            axpy(rho[k], &ws.e2[k], &mut ws.e2sum);
            // d̄2 = g3 ⊙ Σ ρ_k t2_k (finished below), d̄1 = p ⊙ Σ ρ_k t1_k
            axpy(rho[k], &ws.t2[k], &mut ws.dbar2);
            axpy(rho[k], &ws.t1[k], &mut ws.dbar1);
        }
        // W̄3 += f ⊗ Σ ρ_k e2_k
        for r in 0..m {
            axpy(pt.f[r], &ws.e2sum, grad.w3.row_mut(r));
        }
        for i in 0..h {
            ws.q[i] = tr.d2[i] * ws.g3[i];
            ws.dbar2[i] *= ws.g3[i];
        }
        // W̄2 += q ⊗ Σ ρ_k e1_k
        for i in 0..h {
            axpy(ws.q[i], &ws.e1sum, grad.w2.row_mut(i));
        }
        ws.p.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..h {
            axpy(ws.q[i], w.w2.row(i), &mut ws.p);
        }
        // W̄1[:,k] += s_k ρ_k (d1 ⊙ p)
        let cols = grad.w1.cols();
        for i in 0..h {
            let dp = tr.d1[i] * ws.p[i];
            let row = grad.w1.row_mut(i);
            for k in 0..n {
                row[k] += params.input_scale[k] * rho[k] * dp;
            }
            debug_assert!(n <= cols);
            ws.dbar1[i] *= ws.p[i];
        }
    }

    // Primal reverse sweep, including the d = 1 - a² dependencies.
    for i in 0..h {
        ws.abar2[i] -= two * tr.a2[i] * ws.dbar2[i];
        ws.zbar2[i] = tr.d2[i] * ws.abar2[i];
    }
    ws.abar1.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..h {
        let zb = ws.zbar2[i];
        if zb != T::zero() {
            grad.b2[i] += zb;
            axpy(zb, &tr.a1, grad.w2.row_mut(i));
            axpy(zb, w.w2.row(i), &mut ws.abar1);
        }
    }
    for i in 0..h {
        ws.abar1[i] -= two * tr.a1[i] * ws.dbar1[i];
        ws.zbar1[i] = tr.d1[i] * ws.abar1[i];
    }
    for i in 0..h {
        let zb = ws.zbar1[i];
        if zb != T::zero() {
            grad.b1[i] += zb;
            axpy(zb, &tr.u, grad.w1.row_mut(i));
        }
    }
    (sq_err, sq_res)
}

/// Loss components of the configured training objective and the exact
/// gradient of `l_basic + [l_const] + [α l_pinn]` with respect to every weight.
pub fn total_loss_and_grad<T: Scalar>(params: &MlpParams<T>, batch: &Batch<T>, cfg: &LossConfig<T>) -> Result<GradBundle<T>> {
    batch.check(params)?;
    cfg.validate()?;
    let (n, m, h) = (params.dims.n_joints, params.dims.n_muscles, params.dims.hidden);
    let b = batch.len();
    let basic_norm = T::one() / T::lit((b * m) as f64);
    let pinn_norm = T::one() / T::lit((b * n) as f64);
    let mut ws = Workspace::new(n, h);
    let mut grad = Weights::zeros(&params.dims);
    let (mut sq_err, mut sq_res) = (T::zero(), T::zero());
    for i in 0..b {
        let pinn = cfg.use_pinn.then(|| PinnTerm {
            f: batch.tension(i),
            tau: batch.torque(i),
            norm: pinn_norm,
            alpha: cfg.alpha,
        });
        let (e, r) = accumulate(params, batch.input(i), Some((batch.target(i), basic_norm)), pinn, &mut ws, &mut grad);
        sq_err += e;
        sq_res += r;
    }
    let l_basic = sq_err * basic_norm;
    let l_pinn = if cfg.use_pinn { sq_res * pinn_norm } else { loss_pinn(params, batch)? };
    let l_const = if cfg.use_const {
        let zero = params.zero_input();
        let zeros = vec![T::zero(); m];
        let (e, _) = accumulate(params, &zero, Some((&zeros, T::one() / T::lit(m as f64))), None, &mut ws, &mut grad);
        e / T::lit(m as f64)
    } else {
        loss_const(params)
    };
    let mut total = l_basic;
    if cfg.use_const {
        total += l_const;
    }
    if cfg.use_pinn {
        total += cfg.alpha * l_pinn;
    }
    Ok(GradBundle { l_basic, l_const, l_pinn, total, grad })
}

const CHECKPOINT_MAGIC: &str = "pimbs-mlp v1";

/// Text checkpoint: a magic line, dimensions, the input scale and every
/// tensor as `name rows cols` followed by one whitespace-separated line per row.
/// Values use round-trip decimal so reload is exact.
pub fn checkpoint_to_string<T: Scalar>(params: &MlpParams<T>) -> String {
    let d = &params.dims;
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "kind {}", d.kind.as_str());
    let _ = writeln!(out, "dims {} {} {}", d.n_joints, d.n_muscles, d.hidden);
    let fmt = |v: &[T]| v.iter().map(|x| x.to_exact_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "input_scale 1 {}", params.input_scale.len());
    let _ = writeln!(out, "{}", fmt(&params.input_scale));
    let w = &params.weights;
    let mats = [("w1", &w.w1), ("w2", &w.w2), ("w3", &w.w3)];
    let vecs = [("b1", &w.b1), ("b2", &w.b2), ("b3", &w.b3)];
    for ((mn, m), (vn, v)) in mats.iter().zip(&vecs) {
        let _ = writeln!(out, "{mn} {} {}", m.rows(), m.cols());
        for r in 0..m.rows() {
            let _ = writeln!(out, "{}", fmt(m.row(r)));
        }
        let _ = writeln!(out, "{vn} 1 {}", v.len());
        let _ = writeln!(out, "{}", fmt(v));
    }
    out
}

pub fn checkpoint_from_str<T: Scalar>(text: &str, path: &Path) -> Result<MlpParams<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));
    let (ln, magic) = next("magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(err(ln, format!("expected {CHECKPOINT_MAGIC:?}")));
    }
    let (ln, kind_line) = next("kind")?;
    let kind = kind_line
        .strip_prefix("kind ")
        .and_then(MapKind::parse)
        .ok_or_else(|| err(ln, "malformed kind line".into()))?;
    let (ln, dims_line) = next("dims")?;
    let nums: Vec<usize> = dims_line
        .strip_prefix("dims ")
        .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    if nums.len() != 3 {
        return Err(err(ln, "malformed dims line".into()));
    }
    let dims = MlpDims::new(kind, nums[0], nums[1], nums[2]);
    dims.validate().map_err(|e| err(ln, e.to_string()))?;
    let mut read = |name: &str, rows: usize, cols: usize| -> Result<Vec<T>> {
        let (ln, head) = next(name)?;
        let expect = format!("{name} {rows} {cols}");
        if head != expect {
            return Err(err(ln, format!("expected {expect:?}, found {head:?}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = next(name)?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(tok.parse::<T>().map_err(|_| err(ln, format!("not a number: {tok:?}")))?);
            }
            if data.len() - before != cols {
                return Err(err(ln, format!("expected {cols} values")));
            }
        }
        Ok(data)
    };
    let (i, h, o) = (dims.n_in(), dims.hidden, dims.n_out());
    let input_scale = read("input_scale", 1, i)?;
    let w1 = Matrix::from_row_major(h, i, read("w1", h, i)?);
    let b1 = read("b1", 1, h)?;
    let w2 = Matrix::from_row_major(h, h, read("w2", h, h)?);
    let b2 = read("b2", 1, h)?;
    let w3 = Matrix::from_row_major(o, h, read("w3", o, h)?);
    let b3 = read("b3", 1, o)?;
    Ok(MlpParams { dims, input_scale, weights: Weights { w1, b1, w2, b2, w3, b3 } })
}

pub fn save_checkpoint<T: Scalar>(params: &MlpParams<T>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<MlpParams<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text, path)
}
