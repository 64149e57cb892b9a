//! Exact joint dynamics of spin and fluctuator.
//!
//! The joint state is the list of conditional, sub-normalized density
//! matrices `rho_i` (one per fluctuator state); its row-major vectorization
//! stacks them into a length-4N complex vector.  The generator is the
//! `4N x 4N` block matrix with diagonal blocks `L_i - r_ii * 1` (unitary
//! Liouvillian minus exit rate) and off-diagonal blocks `r_ij * 1`
//! (transitions feed source-state density matrices into the destination).
//!
//! The primary solve path is one eigendecomposition reused across the whole
//! time grid; when the eigenvector matrix is ill-conditioned (near-defective
//! generator, e.g. at an exceptional point of the damping crossover) the
//! propagator falls back to scaling-and-squaring matrix exponentials.  The
//! first propagation through the eigenpath is cross-checked against one
//! matrix exponential; disagreement is a hard [`FluxError::NumericalDegeneracy`].

use crate::error::{FluxError, Result};
use crate::fluctuator::FluctuatorSpec;
use crate::linalg::{eig, CMat, Eig};
use crate::quantum::{c, liouvillian, C, DensityMatrix, Vec3};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Condition-number threshold on the eigenvector matrix above which the
/// eigenpath is abandoned in favor of matrix exponentials (and the mode
/// expansion is refused).  An exceptional point of a 2x2 coherence block
/// perturbs at sqrt(machine epsilon), putting a defective generator's
/// computed condition number near 7e7; the limit sits below that so
/// defective dynamics always take the backward-stable exponential path.
const EIG_COND_LIMIT: f64 = 1e7;

/// Allowed disagreement between the eigenpath and the exponential path at
/// the cross-check time, relative to the state norm.
const CROSS_CHECK_TOL: f64 = 1e-7;

/// Initial occupation of the fluctuator chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Occupation {
    /// All probability on state 0 (the optically polarized ground state).
    GroundOnly,
    /// The stationary distribution of the chain.
    Stationary,
    /// Explicit probability vector.
    Custom(Vec<f64>),
}

/// Joint state: one conditional density matrix per fluctuator state.
#[derive(Debug, Clone)]
pub struct JointState {
    pub rhos: Vec<DensityMatrix>,
    pub time: f64,
}

impl JointState {
    /// Total trace (must be 1 for a physical state).
    pub fn total_trace(&self) -> f64 {
        self.rhos.iter().map(|r| r.trace()).sum()
    }

    /// Classical occupation probabilities `(tr rho_1, ..., tr rho_N)`.
    pub fn populations(&self) -> Vec<f64> {
        self.rhos.iter().map(|r| r.trace()).collect()
    }

    /// Reduced spin density matrix `sum_i rho_i`.
    pub fn reduce(&self) -> DensityMatrix {
        let mut s = Vec3::ZERO;
        let mut w = 0.0;
        for r in &self.rhos {
            s = s + r.bloch();
            w += r.trace();
        }
        DensityMatrix::from_bloch_weighted(s, w)
    }

    /// Reduced Bloch vector `sum_i bloch(rho_i)`.
    pub fn reduced_bloch(&self) -> Vec3 {
        let mut s = Vec3::ZERO;
        for r in &self.rhos {
            s = s + r.bloch();
        }
        s
    }

    /// Flatten to the length-4N vector the generator acts on.
    pub fn to_vector(&self) -> Vec<C> {
        let mut v = Vec::with_capacity(4 * self.rhos.len());
        for r in &self.rhos {
            v.extend_from_slice(&r.vectorized());
        }
        v
    }

    /// Rebuild from a flat vector, enforcing Hermiticity per block.
    pub fn from_vector(v: &[C], time: f64) -> Result<Self> {
        if v.len() % 4 != 0 || v.is_empty() {
            return Err(FluxError::InvalidArgument(format!(
                "joint state vector length {} is not a positive multiple of 4",
                v.len()
            )));
        }
        let rhos = v
            .chunks_exact(4)
            .map(|ch| DensityMatrix::from_vectorized([ch[0], ch[1], ch[2], ch[3]]))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointState { rhos, time })
    }
}

/// One spectral mode of the generator.
#[derive(Debug, Clone)]
pub struct Mode {
    pub eigenvalue: C,
    /// Right eigenvector (length 4N).
    pub vector: Vec<C>,
    /// Expansion coefficient of the initial condition on this mode.
    pub overlap: C,
}

/// Spectral decomposition of the dynamics seen from one initial condition,
/// sorted by `|Re lambda|` ascending.
#[derive(Debug, Clone)]
pub struct SpectralModes {
    pub modes: Vec<Mode>,
}

struct SpectralCache {
    eig: Option<Eig>,
    cond_one: f64,
}

/// The `4N x 4N` joint generator with lazily cached factorizations.
pub struct Generator {
    pub n_states: usize,
    pub matrix: CMat,
    /// Occupation-averaged precession vector (zero if the chain is not
    /// ergodic); the quantization axis for decay analysis.
    pub average_axis: Vec3,
    /// Largest pairwise difference of conditional precession vectors,
    /// the fallback axis when the average vanishes.
    pub difference_axis: Vec3,
    spectral: OnceLock<SpectralCache>,
    cross_checked: OnceLock<std::result::Result<(), String>>,
}

impl Generator {
    fn spectral_cache(&self) -> &SpectralCache {
        self.spectral.get_or_init(|| match eig(&self.matrix) {
            Ok(e) => {
                let cond = e.cond_one;
                SpectralCache { eig: Some(e), cond_one: cond }
            }
            Err(_) => SpectralCache { eig: None, cond_one: f64::INFINITY },
        })
    }

    /// Eigendecomposition of the generator (regardless of conditioning);
    /// errors only if the eigensolver itself failed.
    pub fn eigensystem(&self) -> Result<&Eig> {
        self.spectral_cache().eig.as_ref().ok_or_else(|| {
            FluxError::NumericalDegeneracy("generator eigendecomposition failed".into())
        })
    }

    /// All eigenvalues (unsorted).
    pub fn eigenvalues(&self) -> Result<Vec<C>> {
        Ok(self.eigensystem()?.values.clone())
    }

    /// Propagate an initial joint state to every time in `times`.
    ///
    /// Times may be arbitrary non-negative values in any order; each result
    /// carries its own timestamp.  Hermiticity of every conditional block
    /// is re-checked on the way out, so round-off beyond tolerance
    /// surfaces as an error instead of being silently absorbed.
    pub fn propagate(&self, s0: &JointState, times: &[f64]) -> Result<Vec<JointState>> {
        if s0.rhos.len() != self.n_states {
            return Err(FluxError::InvalidArgument(format!(
                "initial state has {} blocks, generator expects {}",
                s0.rhos.len(),
                self.n_states
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(FluxError::InvalidArgument(
                "propagation times must be finite and non-negative".into(),
            ));
        }
        let v0 = s0.to_vector();
        let cache = self.spectral_cache();
        let use_eig = cache.eig.is_some() && cache.cond_one <= EIG_COND_LIMIT;
        if use_eig {
            let e = cache.eig.as_ref().unwrap();
            let coeffs = e.coefficients(&v0)?;
            self.cross_check(e, &coeffs, &v0, times)?;
            times
                .iter()
                .map(|&t| JointState::from_vector(&e.evolve(&coeffs, t), t))
                .collect()
        } else {
            self.propagate_expm(&v0, times)
        }
    }

    /// One-time consistency check of the eigenpath against a matrix
    /// exponential at a representative time.
    fn cross_check(&self, e: &Eig, coeffs: &[C], v0: &[C], times: &[f64]) -> Result<()> {
        let verdict = self.cross_checked.get_or_init(|| {
            let t = times
                .iter()
                .copied()
                .filter(|&t| t > 0.0)
                .fold(0.0f64, f64::max);
            if t == 0.0 {
                return Ok(());
            }
            // Compare at half the largest requested time.
            let tc = 0.5 * t;
            let via_eig = e.evolve(coeffs, tc);
            let em = match self.matrix.scaled(c(tc, 0.0)).expm() {
                Ok(m) => m,
                Err(err) => return Err(format!("exponential cross-check failed: {err}")),
            };
            let via_expm = em.matvec(v0);
            let scale = v0.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
            let dev = via_eig
                .iter()
                .zip(&via_expm)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / scale;
            if dev > CROSS_CHECK_TOL {
                Err(format!(
                    "eigendecomposition and matrix exponential disagree by {dev:.3e} \
                     (relative, tolerance {CROSS_CHECK_TOL:.1e})"
                ))
            } else {
                Ok(())
            }
        });
        verdict
            .clone()
            .map_err(FluxError::NumericalDegeneracy)
    }

    /// Exponential-path propagation: times are visited in sorted order and
    /// reached by stepping with cached per-step exponentials.
    fn propagate_expm(&self, v0: &[C], times: &[f64]) -> Result<Vec<JointState>> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
        let mut results: Vec<Option<JointState>> = vec![None; times.len()];
        let mut t_cur = 0.0;
        let mut v_cur = v0.to_vec();
        let mut step_cache: Vec<(u64, CMat)> = Vec::new();
        for idx in order {
            let t = times[idx];
            let dt = t - t_cur;
            if dt > 0.0 {
                let key = dt.to_bits();
                let em = match step_cache.iter().find(|(k, _)| *k == key) {
                    Some((_, m)) => m.clone(),
                    None => {
                        let m = self.matrix.scaled(c(dt, 0.0)).expm()?;
                        step_cache.push((key, m.clone()));
                        m
                    }
                };
                v_cur = em.matvec(&v_cur);
                t_cur = t;
            }
            results[idx] = Some(JointState::from_vector(&v_cur, t)?);
        }
        Ok(results.into_iter().map(|r| r.unwrap()).collect())
    }

    /// Like [`eigensystem`](Self::eigensystem), but errors with
    /// `NumericalDegeneracy` when the eigenbasis is too ill-conditioned for
    /// a mode expansion to be meaningful (a defective generator has no
    /// single-exponential decomposition at all).
    pub fn well_conditioned_eigensystem(&self) -> Result<&Eig> {
        let cond = self.spectral_cache().cond_one;
        if cond > EIG_COND_LIMIT {
            return Err(FluxError::NumericalDegeneracy(format!(
                "eigenbasis condition number {cond:.2e} exceeds {EIG_COND_LIMIT:.0e}; \
                 the generator is defective or nearly so"
            )));
        }
        self.eigensystem()
    }

    /// Spectral modes with overlaps for a given initial condition, sorted
    /// by `|Re lambda|` ascending.
    pub fn spectral_modes(&self, s0: &JointState) -> Result<SpectralModes> {
        let e = self.well_conditioned_eigensystem()?;
        let coeffs = e.coefficients(&s0.to_vector())?;
        let n = e.values.len();
        let mut modes: Vec<Mode> = (0..n)
            .map(|k| Mode {
                eigenvalue: e.values[k],
                vector: (0..n).map(|i| e.vectors[(i, k)]).collect(),
                overlap: coeffs[k],
            })
            .collect();
        modes.sort_by(|a, b| {
            a.eigenvalue
                .re
                .abs()
                .partial_cmp(&b.eigenvalue.re.abs())
                .unwrap()
                .then(a.eigenvalue.im.partial_cmp(&b.eigenvalue.im).unwrap())
        });
        Ok(SpectralModes { modes })
    }
}

/// Assemble the joint generator for a fluctuator spec.
pub fn build_generator(spec: &FluctuatorSpec) -> Result<Generator> {
    spec.validate()?;
    let n = spec.n_states;
    let dim = 4 * n;
    let mut m = CMat::zeros(dim);
    for i in 0..n {
        let l = liouvillian(spec.omegas[i]);
        let exit = spec.exit_rate(i);
        for a in 0..4 {
            for b in 0..4 {
                m[(4 * i + a, 4 * i + b)] = l[a][b];
            }
            m[(4 * i + a, 4 * i + a)] -= c(exit, 0.0);
        }
        for j in 0..n {
            if j != i && spec.rates[i][j] > 0.0 {
                for a in 0..4 {
                    m[(4 * i + a, 4 * j + a)] = c(spec.rates[i][j], 0.0);
                }
            }
        }
    }
    let average_axis = spec.average_precession().unwrap_or(Vec3::ZERO);
    let mut difference_axis = Vec3::ZERO;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = spec.omegas[i] - spec.omegas[j];
            if d.norm() > difference_axis.norm() {
                difference_axis = d;
            }
        }
    }
    Ok(Generator {
        n_states: n,
        matrix: m,
        average_axis,
        difference_axis,
        spectral: OnceLock::new(),
        cross_checked: OnceLock::new(),
    })
}

impl Occupation {
    /// Resolve to an explicit probability vector over the chain states.
    pub fn weights(&self, spec: &FluctuatorSpec) -> Result<Vec<f64>> {
        let n = spec.n_states;
        match self {
            Occupation::GroundOnly => {
                let mut p = vec![0.0; n];
                p[0] = 1.0;
                Ok(p)
            }
            Occupation::Stationary => Ok(spec.stationary_distribution()?.p),
            Occupation::Custom(p) => {
                if p.len() != n {
                    return Err(FluxError::InvalidArgument(format!(
                        "occupation vector length {} != {n}",
                        p.len()
                    )));
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(FluxError::InvalidArgument(
                        "occupation must be a probability vector".into(),
                    ));
                }
                Ok(p.clone())
            }
        }
    }
}

/// Build the initial joint state: spin Bloch vector `spin` in every
/// occupied fluctuator state, weighted by the occupation probabilities.
pub fn initial_joint_state(
    spec: &FluctuatorSpec,
    spin: Vec3,
    occupation: &Occupation,
) -> Result<JointState> {
    spec.validate()?;
    let p = occupation.weights(spec)?;
    let rhos = p
        .iter()
        .map(|&pi| DensityMatrix::from_bloch_weighted(spin.scale(pi), pi))
        .collect();
    Ok(JointState { rhos, time: 0.0 })
}

/// Solve the classical N-state rate equation `dp/dt = M p` exactly via the
/// joint machinery restricted to populations (used as an oracle for
/// population consistency).
pub fn classical_populations(
    spec: &FluctuatorSpec,
    p0: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let n = spec.n_states;
    if p0.len() != n {
        return Err(FluxError::InvalidArgument("occupation length mismatch".into()));
    }
    let m = spec.classical_generator();
    let cm = CMat::from_fn(n, |i, j| c(m[i][j], 0.0));
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let em = cm.scaled(c(t, 0.0)).expm()?;
        let v: Vec<C> = p0.iter().map(|&x| c(x, 0.0)).collect();
        let pt = em.matvec(&v);
        out.push(pt.into_iter().map(|x| x.re).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn symmetric_dephasing(r: f64, delta: f64) -> FluctuatorSpec {
        FluctuatorSpec::two_state(
            r,
            r,
            Vec3::EZ.scale(delta / 2.0),
            Vec3::EZ.scale(-delta / 2.0),
        )
    }

    /// Hand-derived coherence of the symmetric two-state pure-dephasing
    /// model, starting from the stationary occupation with spin along x:
    /// u(t) = rho12_a + rho12_b obeys u'' + 2 r u' + (delta/2)^2 u = 0 with
    /// u(0) = 1/2, u'(0) = 0 (each block contributes rho12 = 1/4 and the
    /// frequencies +-delta/2 cancel at t = 0).
    fn dephasing_coherence_oracle(r: f64, delta: f64, t: f64) -> f64 {
        let d = delta / 2.0;
        let disc = r * r - d * d;
        if disc.abs() < 1e-300 {
            // Critically damped (Jordan block).
            return (-r * t).exp() * (0.5 + 0.5 * r * t);
        }
        if disc > 0.0 {
            let s = disc.sqrt();
            let lp = -r + s;
            let lm = -r - s;
            // u = A e^{lp t} + B e^{lm t} with A + B = 1/2, A lp + B lm = 0.
            let a = -lm / (lp - lm) * 0.5;
            let b = 0.5 - a;
            a * (lp * t).exp() + b * (lm * t).exp()
        } else {
            let w = (-disc).sqrt();
            // u = e^{-rt} (cos wt + (r/w) sin wt) / 2.
            (-r * t).exp() * ((w * t).cos() + r / w * (w * t).sin()) * 0.5
        }
    }

    fn coherence_re(state: &JointState) -> f64 {
        state
            .rhos
            .iter()
            .map(|r| r.entries()[0][1].re)
            .sum()
    }

    #[test]
    fn n1_generator_is_pure_liouvillian() {
        let w = Vec3::new(0.0, 0.0, 2.0);
        let spec = FluctuatorSpec::single_state(w);
        let g = build_generator(&spec).unwrap();
        let l = liouvillian(w);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(g.matrix[(a, b)], l[a][b]);
            }
        }
        // Spin along x precesses to y at t = pi/(2w).
        let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::GroundOnly).unwrap();
        let t = std::f64::consts::FRAC_PI_2 / 2.0;
        let out = g.propagate(&s0, &[t]).unwrap();
        let b = out[0].reduced_bloch();
        assert_abs_diff_eq!(b.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_field_two_state_spectrum_is_classical() {
        // omega_a = omega_b = 0: spectrum = {0, -(r_ab + r_ba)} each
        // fourfold.
        let spec = FluctuatorSpec::two_state(1.5, 2.5, Vec3::ZERO, Vec3::ZERO);
        let g = build_generator(&spec).unwrap();
        let mut vals = g.eigenvalues().unwrap();
        vals.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for k in 0..4 {
            assert_abs_diff_eq!(vals[k].re, -4.0, epsilon = 1e-10);
            assert_abs_diff_eq!(vals[k].im, 0.0, epsilon = 1e-10);
        }
        for k in 4..8 {
            assert_abs_diff_eq!(vals[k].re, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(vals[k].im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn dephasing_matches_hand_oracle_across_crossover() {
        // The exact-solution oracle across fast, critical and slow damping.
        let r = 1.0;
        for &ratio in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let delta = 2.0 * r * ratio; // delta/2 = r * ratio
            let spec = symmetric_dephasing(r, delta);
            let g = build_generator(&spec).unwrap();
            let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::Stationary).unwrap();
            let horizon = 3.0 / r;
            let times: Vec<f64> = (0..40).map(|k| horizon * k as f64 / 39.0).collect();
            let states = g.propagate(&s0, &times).unwrap();
            for (st, &t) in states.iter().zip(&times) {
                let got = coherence_re(st);
                let want = dephasing_coherence_oracle(r, delta, t);
                assert!(
                    (got - want).abs() < 1e-8,
                    "ratio {ratio}, t {t}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn trace_preserved_and_populations_classical() {
        let spec = FluctuatorSpec {
            n_states: 3,
            rates: vec![
                vec![0.0, 3.0, 1.0],
                vec![2.0, 0.0, 0.5],
                vec![1.0, 4.0, 0.0],
            ],
            omegas: vec![
                Vec3::new(1.0, 0.2, -0.3),
                Vec3::new(-0.5, 2.0, 0.1),
                Vec3::new(0.0, -1.0, 1.5),
            ],
            labels: None,
        };
        let g = build_generator(&spec).unwrap();
        let s0 = initial_joint_state(&spec, Vec3::new(0.6, 0.0, 0.8), &Occupation::GroundOnly)
            .unwrap();
        let times: Vec<f64> = (0..25).map(|k| 0.12 * k as f64).collect();
        let states = g.propagate(&s0, &times).unwrap();
        let classical = classical_populations(&spec, &[1.0, 0.0, 0.0], &times).unwrap();
        for (st, pc) in states.iter().zip(&classical) {
            assert_abs_diff_eq!(st.total_trace(), 1.0, epsilon = 1e-9);
            let pops = st.populations();
            for i in 0..3 {
                assert_abs_diff_eq!(pops[i], pc[i], epsilon = 1e-9);
            }
            assert!(st.reduce().min_eigenvalue() > -1e-9);
        }
    }

    #[test]
    fn expm_fallback_matches_eigenpath_on_generic_spec() {
        let spec = FluctuatorSpec::two_state(
            2.0,
            1.0,
            Vec3::new(0.3, 0.0, 1.0),
            Vec3::new(-0.2, 0.5, -1.0),
        );
        let g = build_generator(&spec).unwrap();
        let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::Stationary).unwrap();
        let times = [0.0, 0.4, 1.3, 2.9];
        let via_eig = g.propagate(&s0, &times).unwrap();
        let via_expm = g.propagate_expm(&s0.to_vector(), &times).unwrap();
        for (a, b) in via_eig.iter().zip(&via_expm) {
            let ba = a.reduced_bloch();
            let bb = b.reduced_bloch();
            assert_abs_diff_eq!(ba.x, bb.x, epsilon = 1e-9);
            assert_abs_diff_eq!(ba.y, bb.y, epsilon = 1e-9);
            assert_abs_diff_eq!(ba.z, bb.z, epsilon = 1e-9);
        }
    }

    #[test]
    fn critically_damped_dephasing_still_solvable() {
        // At delta/2 = r the coherence block is a Jordan block; the
        // eigenvector matrix is singular and the exponential fallback must
        // carry the solve.  Oracle: u(t) = e^{-rt} (1 + rt) / 2.
        let r = 1.0;
        let spec = symmetric_dephasing(r, 2.0 * r);
        let g = build_generator(&spec).unwrap();
        let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::Stationary).unwrap();
        let times: Vec<f64> = (0..12).map(|k| 0.3 * k as f64).collect();
        let states = g.propagate(&s0, &times).unwrap();
        for (st, &t) in states.iter().zip(&times) {
            let want = (-r * t).exp() * (0.5 + 0.5 * r * t);
            assert!(
                (coherence_re(st) - want).abs() < 1e-8,
                "t {t}: {} vs {want}",
                coherence_re(st)
            );
        }
    }

    #[test]
    fn generator_spectrum_contraction_and_unique_zero() {
        // Generic (non-commuting) spec: all eigenvalues in the closed left
        // half plane and exactly one zero mode.
        let spec = FluctuatorSpec {
            n_states: 3,
            rates: vec![
                vec![0.0, 1.0, 0.7],
                vec![2.0, 0.0, 0.4],
                vec![0.3, 0.9, 0.0],
            ],
            omegas: vec![
                Vec3::new(0.9, -0.1, 0.4),
                Vec3::new(-0.6, 1.2, 0.0),
                Vec3::new(0.2, 0.3, -1.1),
            ],
            labels: None,
        };
        let g = build_generator(&spec).unwrap();
        let vals = g.eigenvalues().unwrap();
        let mut zero_count = 0;
        for v in &vals {
            assert!(v.re <= 1e-9, "eigenvalue {v} in right half plane");
            if v.norm() < 1e-9 {
                zero_count += 1;
            }
        }
        assert_eq!(zero_count, 1);
    }

    #[test]
    fn total_trace_row_annihilates_generator() {
        // The functional sum_i (rho_i,11 + rho_i,22) is conserved exactly:
        // the corresponding row combination of the generator vanishes.
        let spec = FluctuatorSpec {
            n_states: 3,
            rates: vec![
                vec![0.0, 5.0, 2.0],
                vec![1.0, 0.0, 3.0],
                vec![4.0, 0.5, 0.0],
            ],
            omegas: vec![Vec3::EX, Vec3::EY.scale(2.0), Vec3::EZ.scale(-1.0)],
            labels: None,
        };
        let g = build_generator(&spec).unwrap();
        let dim = 12;
        for col in 0..dim {
            let mut acc = C::default();
            for i in 0..3 {
                acc += g.matrix[(4 * i, col)] + g.matrix[(4 * i + 3, col)];
            }
            assert!(acc.norm() == 0.0, "trace row not exactly null at column {col}");
        }
    }

    #[test]
    fn spectral_modes_sorted_with_overlaps() {
        let spec = FluctuatorSpec::two_state(
            3.0,
            2.0,
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.4, 0.0, -0.8),
        );
        let g = build_generator(&spec).unwrap();
        let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::Stationary).unwrap();
        let modes = g.spectral_modes(&s0).unwrap();
        assert_eq!(modes.modes.len(), 8);
        for w in modes.modes.windows(2) {
            assert!(w[0].eigenvalue.re.abs() <= w[1].eigenvalue.re.abs() + 1e-12);
        }
        // Reconstruction: sum overlap_k * vector_k == s0.
        let v0 = s0.to_vector();
        for i in 0..8 {
            let mut acc = C::default();
            for m in &modes.modes {
                acc += m.overlap * m.vector[i];
            }
            assert!((acc - v0[i]).norm() < 1e-9);
        }
    }
}
