//! Planar two-link, four-muscle arm used to generate ground-truth data.
//!
//! Angles are counterclockwise-positive and `θ = 0` leaves both links hanging
//! along `-y` in a vertical plane. Each body carries its own frame: the base
//! frame is the world frame, link 1 rotates by `θ₀` about the origin and
//! link 2 rotates by `θ₀ + θ₁` about the elbow. In local coordinates a link
//! extends along its own `-y` axis. Muscles are straight wires between two
//! attachment points on adjacent bodies.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Number of joints of the simulated arm.
pub const ARM_JOINTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Body {
    Base,
    Link1,
    Link2,
}

impl Body {
    fn chain_index(self) -> usize {
        match self {
            Body::Base => 0,
            Body::Link1 => 1,
            Body::Link2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment<T> {
    pub body: Body,
    /// Point in the body's local frame, meters.
    pub point: [T; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Muscle<T> {
    pub origin: Attachment<T>,
    pub insertion: Attachment<T>,
}

impl<T: Scalar> Muscle<T> {
    /// Whether rotating `joint` changes the length of this muscle.
    pub fn spans(&self, joint: usize) -> bool {
        let (a, b) = (self.origin.body.chain_index(), self.insertion.body.chain_index());
        let (lo, hi) = (a.min(b), a.max(b));
        // joint j connects chain bodies j and j + 1
        lo <= joint && joint < hi
    }
}

/// Joint configuration of the simulated arm, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState<T> {
    pub theta: [T; ARM_JOINTS],
}

impl<T: Scalar> JointState<T> {
    pub fn new(theta0: T, theta1: T) -> Self {
        Self { theta: [theta0, theta1] }
    }

    pub fn zero() -> Self {
        Self { theta: [T::zero(); ARM_JOINTS] }
    }

    pub fn from_slice(theta: &[T]) -> Result<Self> {
        if theta.len() != ARM_JOINTS {
            return Err(Error::dim("joint state", ARM_JOINTS, theta.len()));
        }
        Ok(Self { theta: [theta[0], theta[1]] })
    }
}

/// World positions produced by forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct FkPoints<T> {
    pub joint2: [T; 2],
    pub link1_tip: [T; 2],
    pub link2_tip: [T; 2],
    /// `(origin, insertion)` world positions per muscle.
    pub attachments: Vec<([T; 2], [T; 2])>,
}

/// Geometric and inertial description of the arm plus the elastic coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel<T> {
    pub link_lengths: [T; 2],
    pub link_masses: [T; 2],
    /// Distance from each link's proximal joint to its center of mass.
    pub com_offsets: [T; 2],
    pub gravity: T,
    pub muscles: Vec<Muscle<T>>,
    /// Exponential spring coefficient `K` in `f = exp(K Δn) - 1`, 1/m.
    pub elastic_k: T,
}

fn att<T: Scalar>(body: Body, x: f64, y: f64) -> Attachment<T> {
    Attachment { body, point: [T::lit(x), T::lit(y)] }
}

impl<T: Scalar> Default for ArmModel<T> {
    fn default() -> Self {
        use Body::*;
        let m = |a, b| Muscle { origin: a, insertion: b };
        Self {
            link_lengths: [T::lit(0.3); 2],
            link_masses: [T::one(); 2],
            com_offsets: [T::lit(0.15); 2],
            gravity: T::lit(9.8),
            muscles: vec![
                m(att(Base, 0.05, 0.02), att(Link1, 0.02, -0.12)),
                m(att(Base, -0.05, 0.02), att(Link1, -0.02, -0.12)),
                m(att(Link1, 0.05, -0.25), att(Link2, 0.02, -0.10)),
                m(att(Link1, -0.05, -0.25), att(Link2, -0.02, -0.10)),
            ],
            elastic_k: T::lit(1000.0),
        }
    }
}

#[inline]
fn rotate<T: Scalar>(angle: T, p: [T; 2]) -> [T; 2] {
    let (s, c) = angle.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c]
}

#[inline]
fn sub<T: Scalar>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn add<T: Scalar>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

/// Velocity of a point rigidly rotating about `pivot` at unit angular rate.
#[inline]
fn perp_about<T: Scalar>(p: [T; 2], pivot: [T; 2]) -> [T; 2] {
    let r = sub(p, pivot);
    [-r[1], r[0]]
}

/// Evenly spaced `n × n` grid over `[lo, hi]²`.
pub fn joint_grid<T: Scalar>(n: usize, lo: T, hi: T) -> Vec<JointState<T>> {
    let step = |i: usize| lo + (hi - lo) * T::lit(i as f64) / T::lit((n - 1) as f64);
    (0..n).flat_map(|i| (0..n).map(move |j| JointState::new(step(i), step(j)))).collect()
}

impl<T: Scalar> ArmModel<T> {
    pub fn n_joints(&self) -> usize {
        ARM_JOINTS
    }

    /// First 128 bits of SHA-256 over the exact decimal text of every parameter, hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |v: T| {
            h.update(v.to_exact_string().as_bytes());
            h.update(b";");
        };
        self.link_lengths.iter().chain(&self.link_masses).chain(&self.com_offsets).for_each(|&v| put(v));
        put(self.gravity);
        put(self.elastic_k);
        for m in &self.muscles {
            for a in [&m.origin, &m.insertion] {
                put(T::lit(a.body.chain_index() as f64));
                put(a.point[0]);
                put(a.point[1]);
            }
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn n_muscles(&self) -> usize {
        self.muscles.len()
    }

    /// Checks the structural invariants, collision clearance and moment-arm
    /// adequacy on the 21×21 grid over `[-0.5, 0.5]²`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        for i in 0..2 {
            if !(self.link_lengths[i] > T::zero()) {
                return bad(format!("link_lengths[{i}] must be positive"));
            }
            if !(self.link_masses[i] > T::zero()) {
                return bad(format!("link_masses[{i}] must be positive"));
            }
            if !(self.com_offsets[i] > T::zero() && self.com_offsets[i] <= self.link_lengths[i]) {
                return bad(format!("com_offsets[{i}] must lie in (0, link_length]"));
            }
        }
        if !(self.elastic_k > T::zero()) {
            return bad("elastic_k must be positive".into());
        }
        if !self.gravity.is_finite() {
            return bad("gravity must be finite".into());
        }
        if self.muscles.is_empty() {
            return bad("at least one muscle is required".into());
        }
        for (i, m) in self.muscles.iter().enumerate() {
            let (a, b) = (m.origin.body.chain_index(), m.insertion.body.chain_index());
            if a.abs_diff(b) != 1 {
                return bad(format!("muscle {i} must connect adjacent bodies"));
            }
            let finite = m.origin.point.iter().chain(&m.insertion.point).all(|x| x.is_finite());
            if !finite {
                return bad(format!("muscle {i} has a non-finite attachment"));
            }
        }
        let grid = joint_grid(21, T::lit(-0.5), T::lit(0.5));
        let min_len = T::lit(1e-3);
        let min_arm = T::lit(1e-3);
        for q in &grid {
            if let Some(i) = self.muscle_lengths_geom(q).iter().position(|&l| !(l > min_len)) {
                return bad(format!("muscle {i} collapses below 1 mm at θ = {:?}", q.theta));
            }
            let g = self.muscle_jacobian(q);
            for j in 0..ARM_JOINTS {
                let pos = (0..g.rows()).any(|i| g[(i, j)] > min_arm);
                let neg = (0..g.rows()).any(|i| g[(i, j)] < -min_arm);
                if !(pos && neg) {
                    return bad(format!(
                        "joint {j} lacks an antagonist pair with moment arm > 1 mm/rad at θ = {:?}",
                        q.theta
                    ));
                }
            }
        }
        Ok(())
    }

    /// Elbow position.
    pub fn joint2(&self, q: &JointState<T>) -> [T; 2] {
        rotate(q.theta[0], [T::zero(), -self.link_lengths[0]])
    }

    fn world_point(&self, q: &JointState<T>, a: &Attachment<T>) -> [T; 2] {
        match a.body {
            Body::Base => a.point,
            Body::Link1 => rotate(q.theta[0], a.point),
            Body::Link2 => add(self.joint2(q), rotate(q.theta[0] + q.theta[1], a.point)),
        }
    }

    /// Derivative of an attachment's world position with respect to `θ_joint`.
    fn world_point_derivative(&self, q: &JointState<T>, a: &Attachment<T>, p: [T; 2], joint: usize) -> [T; 2] {
        let z = [T::zero(); 2];
        match (a.body, joint) {
            (Body::Base, _) => z,
            (Body::Link1, 0) | (Body::Link2, 0) => perp_about(p, z),
            (Body::Link2, 1) => perp_about(p, self.joint2(q)),
            _ => z,
        }
    }

    pub fn fk_points(&self, q: &JointState<T>) -> FkPoints<T> {
        let joint2 = self.joint2(q);
        let link2_tip = add(joint2, rotate(q.theta[0] + q.theta[1], [T::zero(), -self.link_lengths[1]]));
        let attachments = self
            .muscles
            .iter()
            .map(|m| (self.world_point(q, &m.origin), self.world_point(q, &m.insertion)))
            .collect();
        FkPoints { joint2, link1_tip: joint2, link2_tip, attachments }
    }

    /// Straight-line wire length of every muscle.
    pub fn muscle_lengths_geom(&self, q: &JointState<T>) -> Vec<T> {
        self.muscles
            .iter()
            .map(|m| {
                let d = sub(self.world_point(q, &m.insertion), self.world_point(q, &m.origin));
                d[0].hypot(d[1])
            })
            .collect()
    }

    /// Exact `∂l_geom/∂θ`, an `M × 2` matrix in m/rad.
    pub fn muscle_jacobian(&self, q: &JointState<T>) -> Matrix<T> {
        let mut g = Matrix::zeros(self.muscles.len(), ARM_JOINTS);
        for (i, m) in self.muscles.iter().enumerate() {
            let pa = self.world_point(q, &m.origin);
            let pb = self.world_point(q, &m.insertion);
            let d = sub(pb, pa);
            let len = d[0].hypot(d[1]);
            let u = [d[0] / len, d[1] / len];
            for j in 0..ARM_JOINTS {
                if !m.spans(j) {
                    continue;
                }
                let vb = self.world_point_derivative(q, &m.insertion, pb, j);
                let va = self.world_point_derivative(q, &m.origin, pa, j);
                let rel = sub(vb, va);
                g[(i, j)] = u[0] * rel[0] + u[1] * rel[1];
            }
        }
        g
    }

    /// Gravitational potential energy of both links, J.
    pub fn potential_energy(&self, q: &JointState<T>) -> T {
        let [l1, _] = self.link_lengths;
        let [m1, m2] = self.link_masses;
        let [c1, c2] = self.com_offsets;
        let (t1, t12) = (q.theta[0], q.theta[0] + q.theta[1]);
        let y1 = -c1 * t1.cos();
        let y2 = -l1 * t1.cos() - c2 * t12.cos();
        self.gravity * (m1 * y1 + m2 * y2)
    }

    /// Static holding torque `∂U/∂θ`, N·m.
    pub fn gravity_torque(&self, q: &JointState<T>) -> [T; ARM_JOINTS] {
        let [l1, _] = self.link_lengths;
        let [m1, m2] = self.link_masses;
        let [c1, c2] = self.com_offsets;
        let g = self.gravity;
        let s1 = q.theta[0].sin();
        let s12 = (q.theta[0] + q.theta[1]).sin();
        let tau2 = g * m2 * c2 * s12;
        let tau1 = g * (m1 * c1 + m2 * l1) * s1 + tau2;
        [tau1, tau2]
    }

    /// Spring stretch `Δn = ln(1 + f) / K` for a tension `f ≥ 0`.
    pub fn elastic_stretch(&self, f: T) -> Result<T> {
        if !(f >= T::zero()) {
            return Err(Error::Domain(format!("tension must be non-negative, got {f}")));
        }
        Ok(f.ln_1p() / self.elastic_k)
    }

    /// Spring tension `f = exp(K Δn) - 1` for a stretch `Δn ≥ 0`.
    pub fn elastic_tension(&self, dn: T) -> Result<T> {
        if !(dn >= T::zero()) {
            return Err(Error::Domain(format!("stretch must be non-negative, got {dn}")));
        }
        Ok((self.elastic_k * dn).exp_m1())
    }

    /// Relative measured muscle length:
    /// `(l_geom(θ) - l_geom(0)) + (Δn(f) - Δn(f_ref))`.
    pub fn measured_length(&self, q: &JointState<T>, f: &[T], f_ref: &[T]) -> Result<Vec<T>> {
        let m = self.muscles.len();
        if f.len() != m {
            return Err(Error::dim("tension vector", m, f.len()));
        }
        if f_ref.len() != m {
            return Err(Error::dim("reference tension vector", m, f_ref.len()));
        }
        let geom = self.muscle_lengths_geom(q);
        let geom0 = self.muscle_lengths_geom(&JointState::zero());
        (0..m)
            .map(|i| {
                let stretch = self.elastic_stretch(f[i])? - self.elastic_stretch(f_ref[i])?;
                Ok((geom[i] - geom0[i]) + stretch)
            })
            .collect()
    }
}
