//! Dense complex linear algebra for the small generator matrices
//! (dimension 4N, typically 8..24): Kronecker products, LU solves, the
//! scaling-and-squaring matrix exponential, and an eigendecomposition
//! bridge.
//!
//! Everything except the eigendecomposition is hand-rolled so that results
//! are bitwise deterministic regardless of backend threading; matrices this
//! small gain nothing from a tuned BLAS.

use crate::error::{FluxError, Result};
use crate::quantum::{c, C};
use faer::prelude::Solve;
use faer::Mat;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    data: Vec<C>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![C::default(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C::default() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C]) -> Vec<C> {
        assert_eq!(self.n, v.len());
        let n = self.n;
        let mut out = vec![C::default(); n];
        for i in 0..n {
            let mut acc = C::default();
            for j in 0..n {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn scaled(&self, a: C) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|x| x * a).collect() }
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Maximum absolute column sum (the induced 1-norm).
    pub fn norm_one(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += self[(i, j)].norm();
            }
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Kronecker product, row-major blocks of `a` scaled entries times `b`.
    pub fn kron(a: &CMat, b: &CMat) -> CMat {
        let n = a.n * b.n;
        let mut out = CMat::zeros(n);
        for ia in 0..a.n {
            for ja in 0..a.n {
                let s = a[(ia, ja)];
                if s == C::default() {
                    continue;
                }
                for ib in 0..b.n {
                    for jb in 0..b.n {
                        out[(ia * b.n + ib, ja * b.n + jb)] = s * b[(ib, jb)];
                    }
                }
            }
        }
        out
    }

    /// LU factorization with partial pivoting.  Errors if the matrix is
    /// numerically singular.
    pub fn lu(&self) -> Result<Lu> {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].norm();
            for i in (k + 1)..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(FluxError::NumericalDegeneracy(format!(
                    "singular matrix in LU at column {k}"
                )));
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
            }
            let piv = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / piv;
                a[(i, k)] = f;
                if f != C::default() {
                    for j in (k + 1)..n {
                        let akj = a[(k, j)];
                        a[(i, j)] -= f * akj;
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    /// Matrix exponential by Pade(13) with scaling and squaring.
    pub fn expm(&self) -> Result<CMat> {
        // Coefficients of the degree-13 Pade approximant to exp.
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA_13: f64 = 5.371920351148152;
        let n = self.n;
        let nrm = self.norm_one();
        let s = if nrm > THETA_13 {
            (nrm / THETA_13).log2().ceil().max(0.0) as u32
        } else {
            0
        };
        let a = self.scaled(c(0.5f64.powi(s as i32), 0.0));
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let id = CMat::identity(n);
        // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
        let w1 = a6
            .scaled(c(B[13], 0.0))
            .add(&a4.scaled(c(B[11], 0.0)))
            .add(&a2.scaled(c(B[9], 0.0)));
        let w2 = a6
            .scaled(c(B[7], 0.0))
            .add(&a4.scaled(c(B[5], 0.0)))
            .add(&a2.scaled(c(B[3], 0.0)))
            .add(&id.scaled(c(B[1], 0.0)));
        let u = a.matmul(&a6.matmul(&w1).add(&w2));
        // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
        let z1 = a6
            .scaled(c(B[12], 0.0))
            .add(&a4.scaled(c(B[10], 0.0)))
            .add(&a2.scaled(c(B[8], 0.0)));
        let z2 = a6
            .scaled(c(B[6], 0.0))
            .add(&a4.scaled(c(B[4], 0.0)))
            .add(&a2.scaled(c(B[2], 0.0)))
            .add(&id.scaled(c(B[0], 0.0)));
        let v = a6.matmul(&z1).add(&z2);
        // exp(A/2^s) ~ (V - U)^-1 (V + U), then square s times.
        let denom = v.sub(&u);
        let numer = v.add(&u);
        let lu = denom.lu()?;
        let mut e = lu.solve_mat(&numer)?;
        for _ in 0..s {
            e = e.matmul(&e);
        }
        Ok(e)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.n + j]
    }
}

/// Partial-pivot LU factorization of a [`CMat`].
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn solve_vec(&self, b: &[C]) -> Result<Vec<C>> {
        let n = self.lu.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<C> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward substitution (unit lower triangle).
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            let d = self.lu[(i, i)];
            if d == C::default() {
                return Err(FluxError::NumericalDegeneracy(
                    "zero pivot in LU back-substitution".into(),
                ));
            }
            x[i] = acc / d;
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        let n = self.lu.n;
        assert_eq!(b.n, n);
        let mut out = CMat::zeros(n);
        let mut col = vec![C::default(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col)?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve_mat(&CMat::identity(self.lu.n))
    }
}

/// Eigendecomposition result: eigenvalues, right eigenvectors (columns of
/// `v`), and the 1-norm condition number of the eigenvector matrix, which
/// signals near-defective (Jordan-block) generators.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: Vec<C>,
    pub vectors: CMat,
    pub vectors_lu: Lu,
    pub cond_one: f64,
}

/// Full nonsymmetric eigendecomposition.
pub fn eig(m: &CMat) -> Result<Eig> {
    let n = m.n;
    let fm: Mat<C> = Mat::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm.eigen().map_err(|e| {
        FluxError::NumericalDegeneracy(format!("eigendecomposition failed: {e:?}"))
    })?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<C> = (0..n).map(|k| s[k]).collect();
    let vectors = CMat::from_fn(n, |i, k| u[(i, k)]);
    let vectors_lu = vectors.lu()?;
    let inv = vectors_lu.inverse()?;
    let cond_one = vectors.norm_one() * inv.norm_one();
    Ok(Eig { values, vectors, vectors_lu, cond_one })
}

impl Eig {
    /// Expansion coefficients of `s0` in the eigenbasis: solves `V c = s0`.
    pub fn coefficients(&self, s0: &[C]) -> Result<Vec<C>> {
        self.vectors_lu.solve_vec(s0)
    }

    /// Evolve `exp(Gt) s0 = V (c .* exp(lambda t))` given precomputed `c`.
    pub fn evolve(&self, coeffs: &[C], t: f64) -> Vec<C> {
        let n = self.values.len();
        let mut weighted = vec![C::default(); n];
        for k in 0..n {
            weighted[k] = coeffs[k] * (self.values[k] * t).exp();
        }
        self.vectors.matvec(&weighted)
    }
}

/// Faer-backed dense solve used where an explicit factorization object is
/// not worth keeping around.
pub fn solve_dense(a: &CMat, b: &[C]) -> Result<Vec<C>> {
    let n = a.n;
    let fa: Mat<C> = Mat::from_fn(n, n, |i, j| a[(i, j)]);
    let rhs: Mat<C> = Mat::from_fn(n, 1, |i, _| b[i]);
    let lu = fa.partial_piv_lu();
    let x = lu.solve(&rhs);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}
