//! Tension distribution:
//!
//! ```text
//! minimize   fᵀ W f
//! subject to τ = -Gᵀ f,  f ≥ f_min
//! ```
//!
//! Small problems are solved exactly by enumerating every active set of the
//! lower bounds and keeping the KKT point that is both primal and dual
//! feasible. Strict convexity makes that point unique.

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, Matrix};
use crate::scalar::{dot, max_abs, Scalar};

/// Largest muscle count accepted by the enumeration solver.
pub const MAX_ENUMERATED_MUSCLES: usize = 20;

/// Absolute slack allowed on the lower bounds and on bound multiplier signs.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// [`FEASIBILITY_TOL`], widened to a few hundred ulps for types too coarse to
/// resolve it (f32). Exactly `FEASIBILITY_TOL` for f64.
pub fn feasibility_tol<T: Scalar>() -> T {
    T::lit(FEASIBILITY_TOL).max(T::epsilon() * T::lit(1024.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSpec<T> {
    /// Muscle Jacobian, `M × N`.
    pub g: Matrix<T>,
    /// Required joint torque, length `N`.
    pub tau: Vec<T>,
    /// Symmetric positive-definite weight, `M × M`.
    pub w: Matrix<T>,
    pub f_min: T,
}

impl<T: Scalar> QpSpec<T> {
    /// Identity-weighted instance.
    pub fn new(g: Matrix<T>, tau: Vec<T>, f_min: T) -> Self {
        let m = g.rows();
        Self { g, tau, w: Matrix::identity(m), f_min }
    }

    pub fn n_muscles(&self) -> usize {
        self.g.rows()
    }

    pub fn n_joints(&self) -> usize {
        self.g.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.n_muscles(), self.n_joints());
        if self.tau.len() != n {
            return Err(Error::dim("torque vector", n, self.tau.len()));
        }
        if self.w.rows() != m || self.w.cols() != m {
            return Err(Error::dim("weight matrix size", m, self.w.rows()));
        }
        if !self.w.is_positive_definite() {
            return Err(Error::InvalidArgument("weight matrix must be symmetric positive definite".into()));
        }
        if !(self.f_min >= T::zero()) {
            return Err(Error::InvalidArgument(format!("f_min must be non-negative, got {}", self.f_min)));
        }
        if !self.g.all_finite() || self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Jacobian or torque".into()));
        }
        Ok(())
    }

    pub fn objective(&self, f: &[T]) -> T {
        dot(f, &self.w.mul_vec(f))
    }

    /// `τ + Gᵀ f`, zero for any admissible tension.
    pub fn torque_residual(&self, f: &[T]) -> Vec<T> {
        let gt_f = self.g.tr_mul_vec(f);
        gt_f.iter().zip(&self.tau).map(|(a, b)| *a + *b).collect()
    }
}

/// Solution of one equality-constrained KKT subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCandidate<T> {
    pub f: Vec<T>,
    /// Multipliers of `Gᵀf + τ = 0`.
    pub dual_eq: Vec<T>,
    /// Multipliers of the active bounds, aligned with the active set.
    pub dual_bound: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub f: Vec<T>,
    /// Bounds in the KKT basis that certified the optimum, ascending. When
    /// constraints are degenerate further muscles may also sit at `f_min`.
    pub active_set: Vec<usize>,
    pub dual_eq: Vec<T>,
    pub dual_bound: Vec<T>,
    pub objective: T,
}

/// Solves the KKT system with the listed bounds held active.
///
/// With Lagrangian `fᵀWf + λᵀ(Gᵀf + τ) - μᵀ(f_A - f_min)` the system is
///
/// ```text
/// [ 2W    G  -E_A ] [f]   [    0     ]
/// [ Gᵀ    0   0   ] [λ] = [   -τ     ]
/// [-E_Aᵀ  0   0   ] [μ]   [-f_min·1  ]
/// ```
///
/// Returns `None` when the system is singular, e.g. an active set that
/// leaves the torque constraint unsatisfiable.
pub fn solve_kkt<T: Scalar>(spec: &QpSpec<T>, active: &[usize]) -> Option<KktCandidate<T>> {
    let (m, n, a) = (spec.n_muscles(), spec.n_joints(), active.len());
    let dim = m + n + a;
    let mut k = Matrix::zeros(dim, dim);
    let mut rhs = vec![T::zero(); dim];
    let two = T::lit(2.0);
    for i in 0..m {
        for j in 0..m {
            k[(i, j)] = two * spec.w[(i, j)];
        }
        for j in 0..n {
            k[(i, m + j)] = spec.g[(i, j)];
            k[(m + j, i)] = spec.g[(i, j)];
        }
    }
    for j in 0..n {
        rhs[m + j] = -spec.tau[j];
    }
    for (r, &idx) in active.iter().enumerate() {
        debug_assert!(idx < m);
        k[(idx, m + n + r)] = -T::one();
        k[(m + n + r, idx)] = -T::one();
        rhs[m + n + r] = -spec.f_min;
    }
    let x = solve_dense(&k, &rhs, T::lit(1e-12))?;
    Some(KktCandidate { f: x[..m].to_vec(), dual_eq: x[m..m + n].to_vec(), dual_bound: x[m + n..].to_vec() })
}

fn active_from_mask(mask: u32, m: usize) -> Vec<usize> {
    (0..m).filter(|i| mask & (1 << i) != 0).collect()
}

/// Every KKT candidate that passes primal and dual feasibility, in mask order.
pub fn feasible_candidates<T: Scalar>(spec: &QpSpec<T>) -> Result<Vec<(Vec<usize>, KktCandidate<T>)>> {
    spec.validate()?;
    let m = spec.n_muscles();
    if m > MAX_ENUMERATED_MUSCLES {
        return Err(Error::InvalidArgument(format!(
            "active-set enumeration supports at most {MAX_ENUMERATED_MUSCLES} muscles, got {m}"
        )));
    }
    let tol = feasibility_tol::<T>();
    let lower = spec.f_min - tol;
    let mut out = Vec::new();
    for mask in 0..(1u32 << m) {
        let active = active_from_mask(mask, m);
        let Some(cand) = solve_kkt(spec, &active) else { continue };
        let primal = cand.f.iter().all(|&fi| fi >= lower);
        let dual = cand.dual_bound.iter().all(|&mu| mu >= -tol);
        let finite = cand.f.iter().chain(&cand.dual_eq).all(|x| x.is_finite());
        if primal && dual && finite {
            out.push((active, cand));
        }
    }
    Ok(out)
}

/// Exact minimizer of the tension distribution problem.
pub fn solve_tension_qp<T: Scalar>(spec: &QpSpec<T>) -> Result<QpSolution<T>> {
    let candidates = feasible_candidates(spec)?;
    let best = candidates
        .into_iter()
        .map(|(active, c)| (spec.objective(&c.f), active, c))
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite objective"));
    let Some((objective, active_set, cand)) = best else {
        return Err(Error::Infeasible(format!(
            "no feasible active set for τ = {:?}, f_min = {}, G = {:?}",
            spec.tau,
            spec.f_min,
            spec.g.as_slice()
        )));
    };
    let tol = feasibility_tol::<T>();
    let residual = max_abs(&spec.torque_residual(&cand.f));
    if residual >= tol * (T::one() + max_abs(&spec.tau)) {
        return Err(Error::Infeasible(format!("torque residual {residual} exceeds tolerance")));
    }
    Ok(QpSolution { f: cand.f, active_set, dual_eq: cand.dual_eq, dual_bound: cand.dual_bound, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::{ArmModel, JointState};

    #[test]
    fn unconstrained_origin() {
        let arm = ArmModel::<f64>::default();
        let g = arm.muscle_jacobian(&JointState::new(0.1, 0.2));
        let spec = QpSpec::new(g, vec![0.0, 0.0], 0.0);
        let c = solve_kkt(&spec, &[]).unwrap();
        assert!(c.f.iter().chain(&c.dual_eq).all(|v| v.abs() < 1e-15));
        let sol = solve_tension_qp(&spec).unwrap();
        assert!(sol.f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scalar_lagrange_closed_form() {
        // G = (-r, r)ᵀ, τ = r c: f = (c/2, -c/2) before bounds.
        let (r, c) = (0.04f64, 30.0f64);
        let g = Matrix::from_rows(&[vec![-r], vec![r]]);
        let spec = QpSpec::new(g, vec![r * c], 0.0);
        let cand = solve_kkt(&spec, &[]).unwrap();
        assert!((cand.f[0] - c / 2.0).abs() < 1e-12);
        assert!((cand.f[1] + c / 2.0).abs() < 1e-12);
        // bounds then force f₁ = 0 and f₀ = c
        let sol = solve_tension_qp(&spec).unwrap();
        assert_eq!(sol.active_set, vec![1]);
        assert!((sol.f[0] - c).abs() < 1e-10 && sol.f[1].abs() < 1e-12);
    }

    #[test]
    fn zero_torque_with_floor_sits_on_every_bound() {
        // At θ = 0 the arm is symmetric, so f = 10·1 satisfies Gᵀf = 0. Four
        // bounds plus two equalities over four unknowns make the all-active
        // KKT matrix singular; the optimum is certified by a two-bound basis.
        let arm = ArmModel::<f64>::default();
        let g = arm.muscle_jacobian(&JointState::zero());
        let spec = QpSpec::new(g, vec![0.0, 0.0], 10.0);
        assert!(solve_kkt(&spec, &[0, 1, 2, 3]).is_none());
        let sol = solve_tension_qp(&spec).unwrap();
        assert!(sol.f.iter().all(|&v| (v - 10.0).abs() < 1e-12), "{:?}", sol.f);
        assert_eq!(sol.active_set.len(), 2);
        assert!(sol.dual_bound.iter().all(|&mu| mu >= -1e-9));
        for (active, cand) in feasible_candidates(&spec).unwrap() {
            assert!(cand.f.iter().all(|&v| (v - 10.0).abs() < 1e-10), "{active:?}");
        }
    }

    #[test]
    fn tolerance_depends_on_precision() {
        assert_eq!(feasibility_tol::<f64>(), FEASIBILITY_TOL);
        assert!(feasibility_tol::<f32>() > 1e-4);
    }

    #[test]
    fn infeasible_is_reported() {
        // one muscle cannot pull in the required direction
        let g = Matrix::from_rows(&[vec![0.05]]);
        let spec = QpSpec::new(g, vec![1.0], 0.0);
        assert!(matches!(solve_tension_qp(&spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rejects_invalid_specs() {
        let g = Matrix::from_rows(&[vec![0.05], vec![-0.05]]);
        let mut spec = QpSpec::new(g, vec![1.0], -1.0);
        assert!(spec.validate().is_err());
        spec.f_min = 0.0;
        spec.w = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(spec.validate().is_err());
        spec.w = Matrix::identity(2);
        spec.tau = vec![1.0, 2.0];
        assert!(matches!(spec.validate(), Err(Error::Dimension { .. })));
    }
}
