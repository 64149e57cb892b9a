//! Spin-1/2 primitives: Bloch vectors, density matrices, Hamiltonians and
//! the unitary Liouvillian in superoperator form.
//!
//! Conventions fixed here and relied on everywhere else:
//! * spin operator normalization `I = sigma / 2`, so a precession vector `v`
//!   enters the Hamiltonian as `H = (v_x sigma_x + v_y sigma_y + v_z sigma_z) / 2`
//!   and the Bloch vector obeys `ds/dt = v x s`;
//! * density matrices are vectorized row-major as
//!   `(rho_11, rho_12, rho_21, rho_22)`, under which
//!   `vec(H rho - rho H) = (H (x) 1 - 1 (x) H^T) vec(rho)` holds exactly;
//! * Bloch components are `s_x = rho_12 + rho_21`, `s_y = i(rho_12 - rho_21)`,
//!   `s_z = rho_11 - rho_22`, with weight `w = tr rho`.

use crate::error::{FluxError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub type C = Complex64;

/// Hermiticity drift beyond this tolerance is treated as an error rather
/// than silently symmetrized away.
pub const HERMITICITY_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

/// A real 3-vector, used both for precession vectors (rad/us) and Bloch
/// vectors (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const EX: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const EY: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const EZ: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, a: f64) -> Vec3 {
        Vec3::new(a * self.x, a * self.y, a * self.z)
    }

    /// Unit vector along `self`; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 {
            Some(self.scale(1.0 / n))
        } else {
            None
        }
    }

    /// Component parallel to the unit vector `n_hat`.
    pub fn parallel_to(self, n_hat: Vec3) -> Vec3 {
        n_hat.scale(self.dot(n_hat))
    }

    /// Component perpendicular to the unit vector `n_hat`.
    pub fn perpendicular_to(self, n_hat: Vec3) -> Vec3 {
        self - self.parallel_to(n_hat)
    }

    /// Some unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(self) -> Vec3 {
        let n = self.normalized().expect("any_orthogonal of zero vector");
        // Cross with the axis least aligned with n to avoid degeneracy.
        let probe = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::EX
        } else if n.y.abs() <= n.z.abs() {
            Vec3::EY
        } else {
            Vec3::EZ
        };
        n.cross(probe).normalized().expect("degenerate orthogonal probe")
    }

    /// Rotate `self` about `axis` by angle `|axis| * t` (axis-angle /
    /// Rodrigues form, exact for each segment of piecewise-constant
    /// precession).
    pub fn rotated_about(self, omega: Vec3, t: f64) -> Vec3 {
        let w = omega.norm();
        if w == 0.0 || t == 0.0 {
            return self;
        }
        let n = omega.scale(1.0 / w);
        let theta = w * t;
        let (s, cth) = theta.sin_cos();
        // Rodrigues: v cos + (n x v) sin + n (n.v)(1 - cos).
        self.scale(cth) + n.cross(self).scale(s) + n.scale(n.dot(self) * (1.0 - cth))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, a: f64) -> Vec3 {
        self.scale(a)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

// ---------------------------------------------------------------------------
// 2x2 matrices
// ---------------------------------------------------------------------------

/// A complex 2x2 matrix stored row-major; the workhorse for spin operators.
pub type M2 = [[C; 2]; 2];

pub fn m2_zero() -> M2 {
    [[C::default(); 2]; 2]
}

pub fn sigma_x() -> M2 {
    [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
}

pub fn sigma_y() -> M2 {
    [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
}

pub fn sigma_z() -> M2 {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// `H = (v . sigma) / 2`, the spin-1/2 Hamiltonian for precession vector `v`.
pub fn hamiltonian(v: Vec3) -> M2 {
    [
        [c(0.5 * v.z, 0.0), c(0.5 * v.x, -0.5 * v.y)],
        [c(0.5 * v.x, 0.5 * v.y), c(-0.5 * v.z, 0.0)],
    ]
}

/// `-i (H (x) 1 - 1 (x) H^T)` acting on row-major vectorized density
/// matrices: the generator of `d rho/dt = -i [H, rho]`.
///
/// Returned as a flat row-major 4x4 array.  Exactly linear in `v` entry by
/// entry (each entry is `+-i/2` times a single component of `v`), so
/// building it from a sum of vectors or summing two of these matrices give
/// bitwise identical results.
pub fn liouvillian(v: Vec3) -> [[C; 4]; 4] {
    let h = hamiltonian(v);
    let mut l = [[C::default(); 4]; 4];
    let mi = c(0.0, -1.0);
    // kron(H, I) row-major: block (a,b) of H times I.
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                l[2 * a + k][2 * b + k] += mi * h[a][b];
            }
        }
    }
    // kron(I, H^T): diagonal blocks of H^T.
    for k in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                l[2 * k + a][2 * k + b] -= mi * h[b][a];
            }
        }
    }
    l
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// A (possibly sub-normalized) 2x2 density matrix.  Hermiticity is enforced
/// on construction: the input is symmetrized and the drift must stay below
/// [`HERMITICITY_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: M2,
}

impl DensityMatrix {
    /// Build from raw entries, symmetrizing and checking the Hermiticity
    /// drift.  Positivity is *not* enforced here (propagation round-off may
    /// produce slightly negative eigenvalues; callers check with
    /// [`DensityMatrix::min_eigenvalue`]).
    pub fn new(m: M2) -> Result<Self> {
        let drift = (m[0][0].im.abs())
            .max(m[1][1].im.abs())
            .max((m[0][1] - m[1][0].conj()).norm() * 0.5);
        if !drift.is_finite() || drift > HERMITICITY_TOL {
            return Err(FluxError::InvalidModel(format!(
                "density matrix hermiticity drift {drift:.3e} exceeds {HERMITICITY_TOL:.1e}"
            )));
        }
        let off = (m[0][1] + m[1][0].conj()).scale(0.5);
        let sym = [
            [c(m[0][0].re, 0.0), off],
            [off.conj(), c(m[1][1].re, 0.0)],
        ];
        Ok(DensityMatrix { m: sym })
    }

    /// Weighted Bloch parameterization: `rho = (w 1 + s . sigma) / 2` where
    /// `w` is the trace (occupation weight) and `s` the *unnormalized*
    /// Bloch vector (its length is at most `w` for a physical state).
    pub fn from_bloch_weighted(s: Vec3, w: f64) -> Self {
        let m = [
            [c(0.5 * (w + s.z), 0.0), c(0.5 * s.x, -0.5 * s.y)],
            [c(0.5 * s.x, 0.5 * s.y), c(0.5 * (w - s.z), 0.0)],
        ];
        DensityMatrix { m }
    }

    /// Unit-trace state with Bloch vector `s`.
    pub fn from_bloch(s: Vec3) -> Self {
        Self::from_bloch_weighted(s, 1.0)
    }

    pub fn entries(&self) -> &M2 {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0].re + self.m[1][1].re
    }

    /// Bloch vector `(s_x, s_y, s_z)`; for a sub-normalized matrix this is
    /// the occupation-weighted polarization.
    pub fn bloch(&self) -> Vec3 {
        Vec3::new(
            (self.m[0][1] + self.m[1][0]).re,
            (c(0.0, 1.0) * (self.m[0][1] - self.m[1][0])).re,
            (self.m[0][0] - self.m[1][1]).re,
        )
    }

    /// Smaller eigenvalue of the Hermitian matrix (closed form).
    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let b2 = self.m[0][1].norm_sqr();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b2).sqrt();
        mid - rad
    }

    /// Vectorize row-major: `(rho_11, rho_12, rho_21, rho_22)`.
    pub fn vectorized(&self) -> [C; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    /// Inverse of [`DensityMatrix::vectorized`], with Hermiticity check.
    pub fn from_vectorized(v: [C; 4]) -> Result<Self> {
        Self::new([[v[0], v[1]], [v[2], v[3]]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bloch_roundtrip() {
        let s = Vec3::new(0.3, -0.5, 0.2);
        let rho = DensityMatrix::from_bloch(s);
        let b = rho.bloch();
        assert_abs_diff_eq!(b.x, s.x, epsilon = 1e-15);
        assert_abs_diff_eq!(b.y, s.y, epsilon = 1e-15);
        assert_abs_diff_eq!(b.z, s.z, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hermiticity_enforced() {
        let mut m = m2_zero();
        m[0][0] = c(0.5, 0.0);
        m[1][1] = c(0.5, 0.0);
        m[0][1] = c(0.2, 0.1);
        m[1][0] = c(0.2, -0.1);
        assert!(DensityMatrix::new(m).is_ok());
        m[1][0] = c(0.2, -0.1 + 1e-6);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn precession_direction_right_handed() {
        // ds/dt = omega x s: spin along +x under omega = w ez moves toward +y.
        let s0 = Vec3::EX;
        let w = 1.7;
        let dt = 1e-6;
        let s1 = s0.rotated_about(Vec3::EZ.scale(w), dt);
        assert!(s1.y > 0.0);
        assert_abs_diff_eq!(s1.y, w * dt, epsilon = 1e-10);
        // Full turn returns to start.
        let s_full = s0.rotated_about(Vec3::EZ.scale(w), 2.0 * std::f64::consts::PI / w);
        assert_abs_diff_eq!(s_full.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s_full.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn liouvillian_matches_commutator() {
        // Check L vec(rho) == vec(-i [H, rho]) entrywise on a random-ish case.
        let v = Vec3::new(0.4, -1.1, 0.8);
        let h = hamiltonian(v);
        let rho = DensityMatrix::from_bloch(Vec3::new(0.2, 0.1, -0.6));
        let r = rho.entries();
        let mut comm = m2_zero();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = C::default();
                for k in 0..2 {
                    acc += h[i][k] * r[k][j] - r[i][k] * h[k][j];
                }
                comm[i][j] = c(0.0, -1.0) * acc;
            }
        }
        let l = liouvillian(v);
        let rv = rho.vectorized();
        let want = [comm[0][0], comm[0][1], comm[1][0], comm[1][1]];
        for i in 0..4 {
            let mut got = C::default();
            for j in 0..4 {
                got += l[i][j] * rv[j];
            }
            assert!((got - want[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn liouvillian_exactly_linear() {
        // Entrywise exact linearity: L(u + v) == L(u) + L(v) bitwise.
        let u = Vec3::new(0.125, -0.75, 2.5);
        let v = Vec3::new(1.5, 0.0625, -0.25);
        let lu = liouvillian(u);
        let lv = liouvillian(v);
        let lsum = liouvillian(u + v);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(lsum[i][j], lu[i][j] + lv[i][j]);
            }
        }
    }

    #[test]
    fn min_eigenvalue_closed_form() {
        let rho = DensityMatrix::from_bloch(Vec3::new(0.6, 0.0, 0.8));
        // Pure state: eigenvalues {1, 0}.
        assert_abs_diff_eq!(rho.min_eigenvalue(), 0.0, epsilon = 1e-15);
        let mixed = DensityMatrix::from_bloch(Vec3::new(0.0, 0.0, 0.5));
        assert_abs_diff_eq!(mixed.min_eigenvalue(), 0.25, epsilon = 1e-15);
    }
}
