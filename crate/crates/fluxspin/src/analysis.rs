//! Observable extraction: decoherence rate and precession frequency from
//! generator spectra (exact) or Bloch-vector time series (mirroring the
//! experimental fitting procedure), plus the damping-crossover scan.

use crate::error::{FluxError, Result};
use crate::fluctuator::FluctuatorSpec;
use crate::propagator::{build_generator, initial_joint_state, Generator, JointState, Occupation};
use crate::quantum::{C, Vec3};
use serde::{Deserialize, Serialize};

/// How a [`DecayAnalysis`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Spectral,
    TimeDomainFit,
}

/// Extracted decay constants of the transverse spin signal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayAnalysis {
    /// Decay rate of the transverse (oscillating) Bloch component, 1/us.
    pub gamma_decay: f64,
    /// Observed precession frequency, rad/us.
    pub omega_observed: f64,
    pub method: Method,
    /// RMS fit residual (zero for spectral extraction).
    pub fit_residual: f64,
    /// Standard error of `gamma_decay` when the method provides one.
    pub confidence: Option<f64>,
}

/// Relative overlap below which a mode is considered to carry no signal.
const OVERLAP_FLOOR: f64 = 1e-6;

/// Fit-residual threshold (relative to amplitude) above which the
/// single-mode model is declared a poor description.
const POOR_FIT_THRESHOLD: f64 = 0.05;

/// Quantization axis for a generator: the average precession direction,
/// falling back to the largest conditional-frequency difference, then to z.
pub fn quantization_axis(g: &Generator) -> Vec3 {
    g.average_axis
        .normalized()
        .or_else(|| g.difference_axis.normalized())
        .unwrap_or(Vec3::EZ)
}

/// Transverse magnitude of a complex 3-vector relative to the real unit
/// axis `n_hat`.
fn transverse_norm(b: &[C; 3], n_hat: Vec3) -> f64 {
    let proj = b[0] * n_hat.x + b[1] * n_hat.y + b[2] * n_hat.z;
    let mut s = 0.0;
    for i in 0..3 {
        let comp = b[i] - proj * [n_hat.x, n_hat.y, n_hat.z][i];
        s += comp.norm_sqr();
    }
    s.sqrt()
}

/// Complex Bloch components of the reduced (summed-over-states) content of
/// a joint eigenvector.
fn reduced_bloch_complex(vector: &[C]) -> [C; 3] {
    let n = vector.len() / 4;
    let mut r12 = C::default();
    let mut r21 = C::default();
    let mut diag = C::default();
    for i in 0..n {
        r12 += vector[4 * i + 1];
        r21 += vector[4 * i + 2];
        diag += vector[4 * i] - vector[4 * i + 3];
    }
    let i_unit = C::new(0.0, 1.0);
    [r12 + r21, i_unit * (r12 - r21), diag]
}

/// Exact extraction from the generator spectrum.
///
/// Among eigenmodes carrying transverse signal (product of the initial
/// overlap magnitude and the transverse Bloch content of the mode), the
/// oscillating mode (`|Im lambda| > 0`) with the smallest `|Re lambda|` is
/// selected, ties broken by larger overlap weight.  If no oscillating mode
/// carries weight, the slowest decaying non-stationary weighted mode is
/// reported with zero frequency; if nothing carries weight the signal is
/// constant and the decay rate is zero.
pub fn extract_spectral(g: &Generator, s0: &JointState) -> Result<DecayAnalysis> {
    let e = g.well_conditioned_eigensystem()?;
    let coeffs = e.coefficients(&s0.to_vector())?;
    let dim = e.values.len();
    let scale = e.values.iter().map(|l| l.norm()).fold(0.0, f64::max).max(1e-300);
    let n_hat = quantization_axis(g);
    let mut weights = vec![0.0f64; dim];
    let mut vectors: Vec<[C; 3]> = Vec::with_capacity(dim);
    for k in 0..dim {
        let col: Vec<C> = (0..dim).map(|i| e.vectors[(i, k)]).collect();
        let b = reduced_bloch_complex(&col);
        vectors.push(b);
        weights[k] = coeffs[k].norm() * transverse_norm(&b, n_hat);
    }
    let wmax = weights.iter().fold(0.0f64, |a, &b| a.max(b));
    if wmax < 1e-12 {
        return Ok(DecayAnalysis {
            gamma_decay: 0.0,
            omega_observed: 0.0,
            method: Method::Spectral,
            fit_residual: 0.0,
            confidence: None,
        });
    }
    let substantial =
        |k: usize| weights[k] > OVERLAP_FLOOR * wmax;
    let mut best: Option<usize> = None;
    for k in 0..dim {
        if !substantial(k) || e.values[k].im.abs() <= 1e-9 * scale {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(cur) => {
                let (a, b) = (e.values[k].re.abs(), e.values[cur].re.abs());
                if a < b || (a == b && weights[k] > weights[cur]) {
                    Some(k)
                } else {
                    Some(cur)
                }
            }
        };
    }
    if let Some(k) = best {
        return Ok(DecayAnalysis {
            gamma_decay: -e.values[k].re,
            omega_observed: e.values[k].im.abs(),
            method: Method::Spectral,
            fit_residual: 0.0,
            confidence: None,
        });
    }
    // No oscillating mode: slowest decaying non-stationary weighted mode.
    let mut fallback: Option<usize> = None;
    for k in 0..dim {
        if !substantial(k) || e.values[k].re.abs() <= 1e-12 * scale {
            continue;
        }
        fallback = match fallback {
            None => Some(k),
            Some(cur) => {
                if e.values[k].re.abs() < e.values[cur].re.abs() {
                    Some(k)
                } else {
                    Some(cur)
                }
            }
        };
    }
    match fallback {
        Some(k) => Ok(DecayAnalysis {
            gamma_decay: -e.values[k].re,
            omega_observed: 0.0,
            method: Method::Spectral,
            fit_residual: 0.0,
            confidence: None,
        }),
        None => Ok(DecayAnalysis {
            gamma_decay: 0.0,
            omega_observed: 0.0,
            method: Method::Spectral,
            fit_residual: 0.0,
            confidence: None,
        }),
    }
}

// ---------------------------------------------------------------------------
// Time-domain fitting
// ---------------------------------------------------------------------------

/// Linear least squares of `f` against the separable basis
/// `{e^{-G t} cos(W t), e^{-G t} sin(W t), 1}`; returns coefficients and
/// the residual vector.
fn separable_solve(times: &[f64], f: &[f64], gamma: f64, omega: f64) -> ([f64; 3], Vec<f64>, f64) {
    let n = times.len();
    let mut basis = vec![[0.0f64; 3]; n];
    for k in 0..n {
        let e = (-gamma * times[k]).exp();
        let (s, c_) = (omega * times[k]).sin_cos();
        basis[k] = [e * c_, e * s, 1.0];
    }
    // Normal equations with a tiny ridge for degenerate columns (omega = 0
    // zeroes the sine column).
    let mut h = [[0.0f64; 3]; 3];
    let mut g = [0.0f64; 3];
    for k in 0..n {
        for a in 0..3 {
            g[a] += basis[k][a] * f[k];
            for b in 0..3 {
                h[a][b] += basis[k][a] * basis[k][b];
            }
        }
    }
    let ridge = 1e-12 * (h[0][0] + h[1][1] + h[2][2]).max(1e-300);
    for a in 0..3 {
        h[a][a] += ridge;
    }
    // 3x3 Gaussian elimination with partial pivoting.
    let mut m = h;
    let mut q = g;
    for col in 0..3 {
        let mut p = col;
        for r in (col + 1)..3 {
            if m[r][col].abs() > m[p][col].abs() {
                p = r;
            }
        }
        m.swap(col, p);
        q.swap(col, p);
        for r in (col + 1)..3 {
            let fac = m[r][col] / m[col][col];
            for cc in col..3 {
                m[r][cc] -= fac * m[col][cc];
            }
            q[r] -= fac * q[col];
        }
    }
    let mut coef = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = q[r];
        for cc in (r + 1)..3 {
            acc -= m[r][cc] * coef[cc];
        }
        coef[r] = acc / m[r][r];
    }
    let mut resid = vec![0.0f64; n];
    let mut cost = 0.0;
    for k in 0..n {
        let model = coef[0] * basis[k][0] + coef[1] * basis[k][1] + coef[2] * basis[k][2];
        resid[k] = model - f[k];
        cost += resid[k] * resid[k];
    }
    (coef, resid, 0.5 * cost)
}

fn fit_cost(times: &[f64], f: &[f64], p: [f64; 2]) -> f64 {
    let gamma = p[0].clamp(-600.0, 600.0).exp();
    separable_solve(times, f, gamma, p[1]).2
}

/// Levenberg-Marquardt on `(ln gamma, omega)` with the linear coefficients
/// solved exactly at every step.
fn lm_refine(times: &[f64], f: &[f64], p0: [f64; 2]) -> ([f64; 2], f64) {
    let mut p = p0;
    let mut cost = fit_cost(times, f, p);
    let mut mu = 1e-3;
    for _ in 0..60 {
        // Numerical gradient and Gauss-Newton Hessian of the cost in the
        // two nonlinear parameters.
        let mut grad = [0.0f64; 2];
        let mut hess = [[0.0f64; 2]; 2];
        let mut probes = [[0.0f64; 2]; 2];
        for i in 0..2 {
            let h = 1e-6 * p[i].abs().max(1e-3);
            let mut pp = p;
            pp[i] += h;
            let cp = fit_cost(times, f, pp);
            let mut pm = p;
            pm[i] -= h;
            let cm = fit_cost(times, f, pm);
            grad[i] = (cp - cm) / (2.0 * h);
            probes[i] = [cp, cm];
            hess[i][i] = ((cp - 2.0 * cost + cm) / (h * h)).max(1e-12);
        }
        // Off-diagonal curvature via one extra probe.
        {
            let h0 = 1e-6 * p[0].abs().max(1e-3);
            let h1 = 1e-6 * p[1].abs().max(1e-3);
            let mut pq = p;
            pq[0] += h0;
            pq[1] += h1;
            let cq = fit_cost(times, f, pq);
            let mixed = (cq - probes[0][0] - probes[1][0] + cost) / (h0 * h1);
            hess[0][1] = mixed;
            hess[1][0] = mixed;
        }
        if grad[0].hypot(grad[1]) < 1e-14 * (1.0 + cost) {
            break;
        }
        let mut improved = false;
        for _ in 0..12 {
            let a = [
                [hess[0][0] * (1.0 + mu), hess[0][1]],
                [hess[1][0], hess[1][1] * (1.0 + mu)],
            ];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let dx = [
                (-grad[0] * a[1][1] + grad[1] * a[0][1]) / det,
                (-grad[1] * a[0][0] + grad[0] * a[1][0]) / det,
            ];
            let cand = [p[0] + dx[0], p[1] + dx[1]];
            let c_new = fit_cost(times, f, cand);
            if c_new < cost {
                let delta = cost - c_new;
                p = cand;
                cost = c_new;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if delta < 1e-14 * (1.0 + cost) {
                    return (p, cost);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}

/// Discrete-spectrum peak of `f` over the grid, used to seed the
/// frequency search.
fn periodogram_peak(times: &[f64], f: &[f64]) -> f64 {
    let n = times.len();
    let span = times[n - 1] - times[0];
    if span <= 0.0 {
        return 0.0;
    }
    let mut dts: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dt_med = dts[dts.len() / 2].max(1e-12);
    let w_max = 0.9 * std::f64::consts::PI / dt_med;
    let mean: f64 = f.iter().sum::<f64>() / n as f64;
    let power = |w: f64| {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for k in 0..n {
            let (s, c_) = (w * times[k]).sin_cos();
            let v = f[k] - mean;
            re += v * c_;
            im -= v * s;
        }
        re * re + im * im
    };
    let scan = |lo: f64, hi: f64, m: usize| {
        let mut best = (lo, -1.0f64);
        for j in 0..=m {
            let w = lo + (hi - lo) * j as f64 / m as f64;
            let p = power(w);
            if p > best.1 {
                best = (w, p);
            }
        }
        best.0
    };
    // Coarse pass over the whole band, then zoom twice so the peak lands
    // within the fit's capture basin (local minima are ~2*pi/span apart).
    let mut w = scan(0.0, w_max, 256);
    let mut half = w_max / 256.0;
    for _ in 0..2 {
        w = scan((w - half).max(0.0), w + half, 64);
        half /= 32.0;
    }
    w
}

/// Core fit: returns the analysis unconditionally, recording the residual.
///
/// `seed` optionally supplies `(gamma, omega)` starting values (for example
/// from spectral extraction); otherwise the frequency is seeded from the
/// discrete spectrum peak and the rate from the envelope decay.
pub fn fit_time_domain_unchecked(
    times: &[f64],
    series: &[Vec3],
    quantization_axis: Vec3,
    seed: Option<(f64, f64)>,
) -> Result<DecayAnalysis> {
    let n = times.len();
    if n != series.len() || n < 8 {
        return Err(FluxError::InvalidArgument(format!(
            "need >= 8 aligned samples, got {} times / {} values",
            n,
            series.len()
        )));
    }
    let n_hat = quantization_axis.normalized();
    // Reference direction: initial transverse component.
    let trans = |s: Vec3| match n_hat {
        Some(nh) => s.perpendicular_to(nh),
        None => s,
    };
    let u0 = trans(series[0]);
    let f: Vec<f64> = match u0.normalized() {
        Some(u_hat) => series.iter().map(|&s| trans(s).dot(u_hat)).collect(),
        None => {
            // No transverse signal at all: nothing decays, nothing precesses.
            return Ok(DecayAnalysis {
                gamma_decay: 0.0,
                omega_observed: 0.0,
                method: Method::TimeDomainFit,
                fit_residual: 0.0,
                confidence: None,
            });
        }
    };
    let fmax = f.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let fmean: f64 = f.iter().sum::<f64>() / n as f64;
    let spread = f.iter().fold(0.0f64, |a, &b| a.max((b - fmean).abs()));
    if spread <= 1e-12 * fmax.max(1.0) {
        // Constant signal.
        return Ok(DecayAnalysis {
            gamma_decay: 0.0,
            omega_observed: 0.0,
            method: Method::TimeDomainFit,
            fit_residual: 0.0,
            confidence: None,
        });
    }
    let span = times[n - 1] - times[0];
    let (g_seed, w_seed) = match seed {
        Some((g, w)) => (g.max(1e-9), w.max(0.0)),
        None => {
            let w = periodogram_peak(times, &f);
            let third = n / 3;
            let rms = |sl: &[f64]| {
                (sl.iter().map(|x| x * x).sum::<f64>() / sl.len() as f64).sqrt().max(1e-12)
            };
            let early = rms(&f[..third.max(1)]);
            let late = rms(&f[n - third.max(1)..]);
            let g = ((early / late).ln() / (0.67 * span)).max(0.1 / span);
            (g, w)
        }
    };
    let starts: [(f64, f64); 3] = [(g_seed, w_seed), (g_seed, 0.8 * w_seed), (g_seed, 1.2 * w_seed)];
    let mut best: Option<([f64; 2], f64)> = None;
    for (g0, w0) in starts {
        let p0 = [g0.max(1e-12).ln(), w0];
        let (p, cost) = lm_refine(times, &f, p0);
        if best.map_or(true, |(_, bc)| cost < bc) {
            best = Some((p, cost));
        }
    }
    let (p, _) = best.unwrap();
    let gamma = p[0].clamp(-600.0, 600.0).exp();
    let omega = p[1].abs();
    let (coef, _resid, cost) = separable_solve(times, &f, gamma, p[1]);
    let rms = (2.0 * cost / n as f64).sqrt();
    let amplitude = coef[0].hypot(coef[1]);
    // Linearized standard error of gamma from the curvature in ln gamma.
    let confidence = {
        let h = 1e-4;
        let cp = fit_cost(times, &f, [p[0] + h, p[1]]);
        let cm = fit_cost(times, &f, [p[0] - h, p[1]]);
        let curv = (cp - 2.0 * cost + cm) / (h * h);
        if curv > 0.0 && n > 3 {
            let var_ln = (2.0 * cost / (n as f64 - 3.0)) / curv;
            Some(gamma * var_ln.sqrt())
        } else {
            None
        }
    };
    let residual_rel = if amplitude > 0.0 { rms / amplitude } else { 0.0 };
    Ok(DecayAnalysis {
        gamma_decay: gamma,
        omega_observed: omega,
        method: Method::TimeDomainFit,
        fit_residual: residual_rel,
        confidence,
    })
}

/// Time-domain fit of `A e^{-Gamma t} cos(omega t + phi) + C` to the
/// transverse Bloch component; errors with [`FluxError::PoorFit`] when the
/// residual exceeds 5% of the amplitude (multi-exponential decay outside
/// the single-mode regime), carrying the fitted values in the error.
pub fn fit_time_domain(
    times: &[f64],
    series: &[Vec3],
    quantization_axis: Vec3,
) -> Result<DecayAnalysis> {
    let analysis = fit_time_domain_unchecked(times, series, quantization_axis, None)?;
    if analysis.fit_residual > POOR_FIT_THRESHOLD {
        return Err(FluxError::PoorFit {
            residual: analysis.fit_residual,
            threshold: POOR_FIT_THRESHOLD,
            gamma: analysis.gamma_decay,
            omega: analysis.omega_observed,
        });
    }
    Ok(analysis)
}

// ---------------------------------------------------------------------------
// Crossover scan
// ---------------------------------------------------------------------------

/// Two-state template for the damping-crossover scan: conditional
/// frequencies `base +- (delta/2) direction`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverTemplate {
    pub r_ab: f64,
    pub r_ba: f64,
    pub base: Vec3,
    pub direction: Vec3,
}

impl CrossoverTemplate {
    /// Symmetric rates, zero base field, difference along z: the canonical
    /// pure-dephasing crossover.
    pub fn symmetric_parallel(r: f64) -> Self {
        CrossoverTemplate { r_ab: r, r_ba: r, base: Vec3::ZERO, direction: Vec3::EZ }
    }

    pub fn spec_for(&self, delta_omega: f64) -> Result<FluctuatorSpec> {
        let dir = self.direction.normalized().ok_or_else(|| {
            FluxError::InvalidArgument("crossover template direction must be nonzero".into())
        })?;
        Ok(FluctuatorSpec::two_state(
            self.r_ba,
            self.r_ab,
            self.base + dir.scale(delta_omega / 2.0),
            self.base - dir.scale(delta_omega / 2.0),
        ))
    }

    pub fn rate_scale(&self) -> f64 {
        self.r_ab + self.r_ba
    }
}

/// One scan point; `valid` is false when extraction failed there.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub delta_omega: f64,
    pub gamma_decay: f64,
    pub valid: bool,
}

/// Decoherence rate versus conditional-frequency difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverCurve {
    pub points: Vec<CrossoverPoint>,
    /// Total switching rate of the template, the normalization scale.
    pub rate_scale: f64,
}

/// Scan the decoherence rate across a grid of frequency differences.
///
/// The spin is prepared perpendicular to the quantization axis in the
/// stationary occupation; each point is extracted spectrally.  Extraction
/// failures mark the point invalid and the scan continues.
pub fn crossover_scan(template: &CrossoverTemplate, delta_grid: &[f64]) -> Result<CrossoverCurve> {
    if delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FluxError::InvalidArgument(
            "delta_omega grid must be strictly increasing".into(),
        ));
    }
    let mut points = Vec::with_capacity(delta_grid.len());
    for &d in delta_grid {
        let point = (|| -> Result<f64> {
            let spec = template.spec_for(d)?;
            let g = build_generator(&spec)?;
            let axis = quantization_axis(&g);
            let prep = axis.any_orthogonal();
            let s0 = initial_joint_state(&spec, prep, &Occupation::Stationary)?;
            Ok(extract_spectral(&g, &s0)?.gamma_decay)
        })();
        match point {
            Ok(gm) => points.push(CrossoverPoint { delta_omega: d, gamma_decay: gm, valid: true }),
            Err(_) => points.push(CrossoverPoint { delta_omega: d, gamma_decay: f64::NAN, valid: false }),
        }
    }
    Ok(CrossoverCurve { points, rate_scale: template.rate_scale() })
}

/// Log-spaced grid helper.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (ll, lh) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (ll + (lh - ll) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
