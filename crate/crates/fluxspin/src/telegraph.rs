//! Monte Carlo view of the same physics: explicit telegraph trajectories of
//! the environment state and piecewise-conditional Bloch precession,
//! cross-checkable against the master-equation propagator.

use crate::error::{FluxError, Result};
use crate::fluctuator::FluctuatorSpec;
use crate::propagator::Occupation;
use crate::quantum::Vec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One realization of the environment state process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(state index, dwell time)` segments covering `[0, duration]`.
    pub segments: Vec<(usize, f64)>,
    pub duration: f64,
    /// RNG stream index the trajectory was drawn from.
    pub stream: u64,
    /// True when a state with zero exit rate was entered before the end
    /// (only meaningful for multi-state models); the trajectory simply
    /// stays there, which is reported rather than treated as an error.
    pub absorbed: bool,
}

impl Trajectory {
    pub fn jump_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// Fraction of time spent in each state.
    pub fn occupancy(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for &(s, dwell) in &self.segments {
            occ[s] += dwell;
        }
        for o in occ.iter_mut() {
            *o /= self.duration;
        }
        occ
    }
}

/// Independent, reproducible RNG for trajectory `index` under one master
/// seed: one generator, one stream per trajectory.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Sample one continuous-time Markov chain realization of length
/// `duration` starting from `initial` via inverse-transform exponential
/// dwells.
pub fn sample_trajectory(
    spec: &FluctuatorSpec,
    initial: usize,
    duration: f64,
    stream: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    spec.validate()?;
    if initial >= spec.n_states {
        return Err(FluxError::InvalidArgument(format!(
            "initial state {} out of range for {} states",
            initial, spec.n_states
        )));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(FluxError::InvalidArgument("duration must be positive and finite".into()));
    }
    let mut segments = Vec::new();
    let mut state = initial;
    let mut t = 0.0;
    let mut absorbed = false;
    loop {
        let exit = spec.exit_rate(state);
        if exit <= 0.0 {
            absorbed = spec.n_states > 1;
            segments.push((state, duration - t));
            break;
        }
        let u: f64 = rng.gen();
        let dwell = -(1.0 - u).ln() / exit;
        if t + dwell >= duration {
            segments.push((state, duration - t));
            break;
        }
        segments.push((state, dwell));
        t += dwell;
        // Next state: inverse transform over the outgoing rates.
        let target = rng.gen::<f64>() * exit;
        let mut acc = 0.0;
        let mut next = state;
        for i in 0..spec.n_states {
            if i == state {
                continue;
            }
            acc += spec.rates[i][state];
            if target < acc {
                next = i;
                break;
            }
        }
        if next == state {
            // Floating-point dust at the top of the cumulative sum: take
            // the last state with a positive incoming rate.
            next = (0..spec.n_states)
                .rev()
                .find(|&i| i != state && spec.rates[i][state] > 0.0)
                .unwrap_or(state);
        }
        state = next;
    }
    Ok(Trajectory { segments, duration, stream, absorbed })
}

/// Evolve a Bloch vector along one trajectory, sampling it at `grid`
/// times (ascending, within `[0, duration]`).  Each dwell rotates the spin
/// about the conditional precession vector of the occupied state; grid
/// points interior to a dwell split it exactly.
pub fn evolve_bloch(
    spec: &FluctuatorSpec,
    traj: &Trajectory,
    initial_spin: Vec3,
    grid: &[f64],
) -> Result<Vec<Vec3>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FluxError::InvalidArgument("sample grid must be ascending".into()));
    }
    if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
        if first < 0.0 || last > traj.duration * (1.0 + 1e-12) + 1e-12 {
            return Err(FluxError::InvalidArgument(format!(
                "sample grid [{first}, {last}] outside trajectory span [0, {}]",
                traj.duration
            )));
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut spin = initial_spin;
    let mut seg_idx = 0usize;
    let mut seg_start = 0.0f64;
    // Time already consumed inside the current segment.
    let mut consumed = 0.0f64;
    for &tg in grid {
        loop {
            let (state, dwell) = match traj.segments.get(seg_idx) {
                Some(&s) => s,
                None => break,
            };
            let seg_end = seg_start + dwell;
            if tg <= seg_end || seg_idx == traj.segments.len() - 1 {
                let step = (tg - seg_start - consumed).max(0.0);
                spin = spin.rotated_about(spec.omegas[state], step);
                consumed += step;
                break;
            }
            // Finish this segment and move on.
            let step = dwell - consumed;
            if step > 0.0 {
                spin = spin.rotated_about(spec.omegas[state], step);
            }
            seg_start = seg_end;
            consumed = 0.0;
            seg_idx += 1;
        }
        out.push(spin);
    }
    Ok(out)
}

/// Ensemble-averaged Bloch trajectory with per-component standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<Vec3>,
    pub std_err: Vec<Vec3>,
    pub n_trajectories: usize,
    pub absorbed_count: usize,
}

/// Trajectories per reduction chunk.  Partial sums are formed per chunk
/// and combined in chunk order, so the result is bitwise identical for
/// any worker count.
const CHUNK: usize = 256;

struct Partial {
    sum: Vec<[f64; 3]>,
    sum_sq: Vec<[f64; 3]>,
    absorbed: usize,
}

/// Average `n_trajectories` Monte Carlo realizations of the spin signal.
///
/// Trajectory `k` draws from stream `k` of `master_seed` (initial state
/// first, then dwells), so any subset of trajectories is reproducible in
/// isolation.
pub fn ensemble_average(
    spec: &FluctuatorSpec,
    initial_spin: Vec3,
    occupation: &Occupation,
    grid: &[f64],
    n_trajectories: usize,
    master_seed: u64,
) -> Result<McEnsemble> {
    spec.validate()?;
    if n_trajectories < 2 {
        return Err(FluxError::InvalidArgument("need at least 2 trajectories".into()));
    }
    let duration = *grid.last().ok_or_else(|| {
        FluxError::InvalidArgument("sample grid must be non-empty".into())
    })?;
    if !(duration > 0.0) {
        return Err(FluxError::InvalidArgument("grid must end at a positive time".into()));
    }
    let weights = occupation.weights(spec)?;
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let n_grid = grid.len();
    let n_chunks = (n_trajectories + CHUNK - 1) / CHUNK;
    let partials: Vec<Result<Partial>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_trajectories);
            let mut p = Partial {
                sum: vec![[0.0; 3]; n_grid],
                sum_sq: vec![[0.0; 3]; n_grid],
                absorbed: 0,
            };
            for k in lo..hi {
                let mut rng = trajectory_rng(master_seed, k as u64);
                let initial = if spec.n_states == 1 {
                    0
                } else {
                    let u: f64 = rng.gen();
                    cum.iter().position(|&c| u < c).unwrap_or(spec.n_states - 1)
                };
                let traj = sample_trajectory(spec, initial, duration, k as u64, &mut rng)?;
                if traj.absorbed {
                    p.absorbed += 1;
                }
                let spins = evolve_bloch(spec, &traj, initial_spin, grid)?;
                for (g, s) in spins.iter().enumerate() {
                    let c = [s.x, s.y, s.z];
                    for a in 0..3 {
                        p.sum[g][a] += c[a];
                        p.sum_sq[g][a] += c[a] * c[a];
                    }
                }
            }
            Ok(p)
        })
        .collect();
    let mut sum = vec![[0.0f64; 3]; n_grid];
    let mut sum_sq = vec![[0.0f64; 3]; n_grid];
    let mut absorbed_count = 0usize;
    for p in partials {
        let p = p?;
        absorbed_count += p.absorbed;
        for g in 0..n_grid {
            for a in 0..3 {
                sum[g][a] += p.sum[g][a];
                sum_sq[g][a] += p.sum_sq[g][a];
            }
        }
    }
    let n = n_trajectories as f64;
    let mut mean = Vec::with_capacity(n_grid);
    let mut std_err = Vec::with_capacity(n_grid);
    for g in 0..n_grid {
        let m = [sum[g][0] / n, sum[g][1] / n, sum[g][2] / n];
        let mut se = [0.0f64; 3];
        for a in 0..3 {
            let var = ((sum_sq[g][a] - n * m[a] * m[a]) / (n - 1.0)).max(0.0);
            se[a] = (var / n).sqrt();
        }
        mean.push(Vec3::new(m[0], m[1], m[2]));
        std_err.push(Vec3::new(se[0], se[1], se[2]));
    }
    Ok(McEnsemble {
        times: grid.to_vec(),
        mean,
        std_err,
        n_trajectories,
        absorbed_count,
    })
}
