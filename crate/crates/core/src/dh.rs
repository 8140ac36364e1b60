//! Modified Denavit-Hartenberg transforms shared by the leg and spine chains.

use nalgebra::{Matrix3, Matrix3xX, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One row of a modified D-H table: `a_prev` and `alpha_prev` belong to the
/// previous link, `theta` and `d` to this joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub theta: f64,
    pub d: f64,
    pub a_prev: f64,
    pub alpha_prev: f64,
}

impl JointRow {
    pub const fn revolute(a_prev: f64, alpha_prev: f64) -> Self {
        Self { theta: 0.0, d: 0.0, a_prev, alpha_prev }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.d.is_finite() && self.a_prev.is_finite() && self.alpha_prev.is_finite()
    }
}

/// Homogeneous rigid transform. Bottom row is always `[0, 0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform4(Matrix4<f64>);

impl Transform4 {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Builds a transform from a rotation block and a translation.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self(m)
    }

    pub fn translation_of(v: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), v)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c), Vector3::zeros())
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c), Vector3::zeros())
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0), Vector3::zeros())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }

    /// Rigid inverse `[Rᵀ, -Rᵀp]`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        Self::from_parts(rt, -(rt * self.translation()))
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rotation();
        (r.transpose() * r - Matrix3::identity()).abs().max()
    }

    pub fn max_abs_diff(&self, other: &Transform4) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

impl std::ops::Mul for Transform4 {
    type Output = Transform4;

    fn mul(self, rhs: Transform4) -> Transform4 {
        compose(&self, &rhs)
    }
}

/// Link transform `ⁿ⁻¹Tₙ` of the modified convention: rotate by `alpha_prev`
/// about x, translate `a_prev` along x, rotate `theta` about z, translate `d`
/// along z.
pub fn link_transform(row: &JointRow) -> Result<Transform4> {
    if !row.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite joint row {row:?}")));
    }
    let (st, ct) = row.theta.sin_cos();
    let (sa, ca) = row.alpha_prev.sin_cos();
    Ok(Transform4(Matrix4::new(
        ct,
        -st,
        0.0,
        row.a_prev,
        st * ca,
        ct * ca,
        -sa,
        -row.d * sa,
        st * sa,
        ct * sa,
        ca,
        row.d * ca,
        0.0,
        0.0,
        0.0,
        1.0,
    )))
}

pub fn compose(a: &Transform4, b: &Transform4) -> Transform4 {
    let mut m = a.0 * b.0;
    // keep the homogeneous row exact
    m[(3, 0)] = 0.0;
    m[(3, 1)] = 0.0;
    m[(3, 2)] = 0.0;
    m[(3, 3)] = 1.0;
    Transform4(m)
}

/// Serial chain of revolute joints with per-joint limits `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    rows: Vec<JointRow>,
    limits: Vec<(f64, f64)>,
}

impl KinematicChain {
    pub fn new(rows: Vec<JointRow>, limits: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("chain needs at least one row".into()));
        }
        if rows.len() != limits.len() {
            return Err(Error::Arity { expected: rows.len(), actual: limits.len() });
        }
        for (i, &(lo, hi)) in limits.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter(format!("joint {} limits [{lo}, {hi}] are inverted", i + 1)));
            }
        }
        if let Some(bad) = rows.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite row {bad:?}")));
        }
        Ok(Self { rows, limits })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[JointRow] {
        &self.rows
    }

    pub fn limits(&self) -> &[(f64, f64)] {
        &self.limits
    }

    /// Indices (0-based) of joints whose value lies outside its limits.
    pub fn limit_violations(&self, q: &[f64]) -> Vec<usize> {
        q.iter()
            .zip(&self.limits)
            .enumerate()
            .filter(|(_, (v, (lo, hi)))| **v < *lo || **v > *hi)
            .map(|(i, _)| i)
            .collect()
    }

    fn check_arity(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.rows.len() {
            return Err(Error::Arity { expected: self.rows.len(), actual: q.len() });
        }
        Ok(())
    }

    /// Base-relative frame of every joint, `⁰T₁ … ⁰Tₙ`.
    pub fn frames(&self, q: &[f64]) -> Result<Vec<Transform4>> {
        self.check_arity(q)?;
        let mut acc = Transform4::identity();
        let mut out = Vec::with_capacity(q.len());
        for (row, &theta) in self.rows.iter().zip(q) {
            acc = compose(&acc, &link_transform(&row.with_theta(theta))?);
            out.push(acc);
        }
        Ok(out)
    }
}

/// End frame of the chain for joint values `q`. Out-of-limit values are
/// logged, not rejected, so locked-joint scenarios can park a joint anywhere.
pub fn chain_fk(chain: &KinematicChain, q: &[f64]) -> Result<Transform4> {
    chain.check_arity(q)?;
    let violations = chain.limit_violations(q);
    if !violations.is_empty() {
        log::debug!("joints {violations:?} outside limits");
    }
    let mut acc = Transform4::identity();
    for (row, &theta) in chain.rows.iter().zip(q) {
        acc = compose(&acc, &link_transform(&row.with_theta(theta))?);
    }
    Ok(acc)
}

pub const JACOBIAN_STEP: f64 = 1e-6;

/// Position Jacobian by central differences with step [`JACOBIAN_STEP`].
pub fn jacobian_numeric(chain: &KinematicChain, q: &[f64]) -> Result<Matrix3xX<f64>> {
    chain.check_arity(q)?;
    let mut jac = Matrix3xX::zeros(q.len());
    let mut probe = q.to_vec();
    for i in 0..q.len() {
        probe[i] = q[i] + JACOBIAN_STEP;
        let plus = chain_fk(chain, &probe)?.translation();
        probe[i] = q[i] - JACOBIAN_STEP;
        let minus = chain_fk(chain, &probe)?.translation();
        probe[i] = q[i];
        jac.set_column(i, &((plus - minus) / (2.0 * JACOBIAN_STEP)));
    }
    Ok(jac)
}
