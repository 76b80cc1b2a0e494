//! Algebra of the axisymmetric ansatz: the augmentation `L`, the cubic potentials
//! `S` and `P`, the reconstructed Q-tensor, its eigenvalues, and the director.
//!
//! All Q-tensor quantities are unit-normalized: the physical prefactor `a/√2` is
//! dropped, so the spectrum is that of `a⁻¹ Q̂[u]`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix3, SymmetricEigen, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced 3-vector `(u₁, u₂, u₃)`.
pub type UVector = Vector3<f64>;
/// 5-vector in the `M₁…M₅` coordinate frame.
pub type WVector = Vector5<f64>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Default tolerance on eigenvalue gaps for degeneracy and phase decisions.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// `L[u] = (u₁cos2φ, u₁sin2φ, u₂, u₃cosφ, u₃sinφ)`.
pub fn augment(u: &UVector, phi: f64) -> WVector {
    let (s1, c1) = phi.sin_cos();
    let (s2, c2) = (2.0 * phi).sin_cos();
    WVector::new(u[0] * c2, u[0] * s2, u[1], u[2] * c1, u[2] * s1)
}

/// The cubic invariant `S[w]` (proportional to `tr Q³`).
pub fn eval_s(w: &WVector) -> f64 {
    let (w1, w2, w3, w4, w5) = (w[0], w[1], w[2], w[3], w[4]);
    -w3 * (w1 * w1 + w2 * w2)
        + SQRT3 * w2 * w4 * w5
        + 0.5 * w3 * (w4 * w4 + w5 * w5)
        + w3 * w3 * w3 / 3.0
        + 0.5 * SQRT3 * w1 * (w4 * w4 - w5 * w5)
}

/// `P(v) = S[L[v]]`, independent of the azimuth.
pub fn eval_p(v: &UVector) -> f64 {
    let (v1, v2, v3) = (v[0], v[1], v[2]);
    -v2 * v1 * v1 + 0.5 * SQRT3 * v1 * v3 * v3 + v2 * v2 * v2 / 3.0 + 0.5 * v2 * v3 * v3
}

/// Closed-form `∇P`.
pub fn grad_p(v: &UVector) -> UVector {
    let (v1, v2, v3) = (v[0], v[1], v[2]);
    UVector::new(-2.0 * v1 * v2 + 0.5 * SQRT3 * v3 * v3, -v1 * v1 + v2 * v2 + 0.5 * v3 * v3, SQRT3 * v1 * v3 + v2 * v3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub lam1: f64,
    pub lam2: f64,
    pub lam3: f64,
}

impl EigenTriple {
    pub fn sorted(&self) -> [f64; 3] {
        let mut v = [self.lam1, self.lam2, self.lam3];
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn trace(&self) -> f64 {
        self.lam1 + self.lam2 + self.lam3
    }
}

/// `√((u₁ - √3u₂)² + 4u₃²)`, the discriminant shared by λ₂, λ₃ and the director.
fn discriminant(u: &UVector) -> f64 {
    let d = u[0] - SQRT3 * u[1];
    (d * d + 4.0 * u[2] * u[2]).sqrt()
}

/// Eigenvalues determined by `u`. λ₁ belongs to `e_θ`; λ₂ ≤ λ₃ span the meridian plane.
pub fn eigenvalues(u: &UVector) -> EigenTriple {
    let m = u[0] + u[1] / SQRT3;
    let root = discriminant(u);
    EigenTriple { lam1: -0.5 * m, lam2: 0.25 * (m - root), lam3: 0.25 * (m + root) }
}

/// `b = (√3/2)u₁ + ½u₂`.
pub fn biaxiality_b(u: &UVector) -> f64 {
    0.5 * SQRT3 * u[0] + 0.5 * u[1]
}

/// `λ₃ - λ₂ = ½√((u₁ - √3u₂)² + 4u₃²)`.
pub fn gap32(u: &UVector) -> f64 {
    0.5 * discriminant(u)
}

/// `λ₃ - λ₁ = ½(√3 b + √(1 - b²))` for a unit `u`.
///
/// `|b|` may exceed 1 only by rounding; beyond `1 + 1e-9` the input was not unit.
pub fn gap31_from_b(b: f64) -> Result<f64> {
    if b.abs() > 1.0 + 1e-9 {
        return Err(Error::Inconsistent(format!("|b| = {} exceeds 1 for a unit field", b.abs())));
    }
    let b = b.clamp(-1.0, 1.0);
    Ok(0.5 * (SQRT3 * b + (1.0 - b * b).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Uniaxial,
    Biaxial,
    /// Two eigenvalues coincide and the pair contains the maximum: the director is
    /// undefined (disclination condition).
    DegenerateUniaxial,
}

pub fn classify_phase(u: &UVector, tol: f64) -> Phase {
    let e = eigenvalues(u);
    let [lo, mid, hi] = e.sorted();
    let lower_pair = mid - lo <= tol;
    let upper_pair = hi - mid <= tol;
    match (lower_pair, upper_pair) {
        (false, false) => Phase::Biaxial,
        (true, false) => Phase::Uniaxial,
        _ => Phase::DegenerateUniaxial,
    }
}

/// Director in the cylindrical frame `{e_ρ, e_θ, e_z}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectorSample {
    pub d_rho: f64,
    pub d_phi: f64,
    pub d_z: f64,
    pub degenerate: bool,
}

impl DirectorSample {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.d_rho, self.d_phi, self.d_z)
    }

    /// `|d - e_ρ|`.
    pub fn distance_to_e_rho(&self) -> f64 {
        (self.as_vector() - Vector3::x()).norm()
    }
}

/// Fix the nematic `±d` ambiguity: `d_ρ ≥ 0`, then `d_z ≥ 0`, then `d_φ ≥ 0`.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let key = if v[0] != 0.0 {
        v[0]
    } else if v[2] != 0.0 {
        v[2]
    } else {
        v[1]
    };
    if key < 0.0 {
        -v
    } else {
        v
    }
}

/// Unit eigenvector of the largest eigenvalue of `reconstruct_q(u, 0)`; at `φ = 0`
/// the Cartesian frame coincides with `{e_ρ, e_θ, e_z}`.
pub fn director_by_eigendecomposition(u: &UVector) -> Vector3<f64> {
    let eig = SymmetricEigen::new(reconstruct_q(u, 0.0));
    let k = eig.eigenvalues.imax();
    canonical_sign(eig.eigenvectors.column(k).into_owned().normalize())
}

/// Director determined by `u`.
///
/// The closed-form `n`-field is used whenever it is non-degenerate; when `|n| ≤ tol`
/// (e.g. `u = (0,1,0)`) the eigenvector of the reconstructed tensor is used instead.
/// When λ₁ exceeds λ₃ (possible only for `u₁ < 0`) the director is `e_θ`.
pub fn director(u: &UVector, tol: f64) -> DirectorSample {
    let e = eigenvalues(u);
    let [_, mid, hi] = e.sorted();
    let degenerate = hi - mid <= tol;
    if e.lam1 > e.lam3 + tol {
        return DirectorSample { d_rho: 0.0, d_phi: 1.0, d_z: 0.0, degenerate };
    }
    let root = discriminant(u);
    let d = if root > 0.0 {
        let n_rho = FRAC_1_SQRT_2 * (1.0 + (u[0] - SQRT3 * u[1]) / root);
        let n_z = 2.0_f64.sqrt() * u[2] / root;
        let norm = n_rho.hypot(n_z);
        if norm > tol {
            canonical_sign(Vector3::new(n_rho / norm, 0.0, n_z / norm))
        } else {
            director_by_eigendecomposition(u)
        }
    } else {
        director_by_eigendecomposition(u)
    };
    DirectorSample { d_rho: d[0], d_phi: d[1], d_z: d[2], degenerate }
}

fn basis() -> [Matrix3<f64>; 5] {
    let s2 = FRAC_1_SQRT_2;
    let s6 = 1.0 / 6.0_f64.sqrt();
    [
        Matrix3::new(0.0, 0.0, s2, 0.0, 0.0, 0.0, s2, 0.0, 0.0),
        Matrix3::new(0.0, s2, 0.0, s2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, s2, 0.0),
        Matrix3::new(-s6, 0.0, 0.0, 0.0, -s6, 0.0, 0.0, 0.0, 2.0 * s6),
        Matrix3::new(s2, 0.0, 0.0, 0.0, -s2, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// `(1/√2)[u₁(cos2φ M₅ + sin2φ M₂) + u₂M₄ + u₃(cosφ M₁ + sinφ M₃)]`.
pub fn reconstruct_q(u: &UVector, phi: f64) -> Matrix3<f64> {
    let [m1, m2, m3, m4, m5] = basis();
    let w = augment(u, phi);
    (m5 * w[0] + m2 * w[1] + m4 * w[2] + m1 * w[3] + m3 * w[4]) * FRAC_1_SQRT_2
}
