//! One function per CLI verb, each producing tabular, structured, and
//! optional plot output from the resolved configuration.

use crate::config::{
    lin_grid, vec3, CrossoverConfig, Fig2Config, McValidateConfig, SimulateConfig,
    SweetspotConfig,
};
use crate::plot::{line_plot, Axis, Series};
use fluxspin::analysis::{crossover_scan, log_grid, CrossoverTemplate};
use fluxspin::nv::{reproduce_fig2, sweet_spot, EnsembleSpec};
use fluxspin::propagator::{build_generator, initial_joint_state};
use fluxspin::telegraph::ensemble_average;
use fluxspin::{FluxError, Result};
use serde_json::json;

/// Everything a command run produces.
pub struct CommandOutput {
    pub csv: String,
    pub payload: serde_json::Value,
    pub plots: Vec<(String, String)>,
    pub points_total: usize,
    pub points_valid: usize,
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn cmd_simulate(sc: &SimulateConfig, want_plot: bool) -> Result<CommandOutput> {
    let spec = sc.spec.to_spec()?;
    if !(sc.t_max > 0.0) || sc.points < 2 {
        return Err(FluxError::InvalidArgument(
            "simulate needs t_max > 0 and points >= 2".into(),
        ));
    }
    let g = build_generator(&spec)?;
    let s0 = initial_joint_state(&spec, vec3(sc.spin), &sc.occupation)?;
    let times = lin_grid(sc.t_max, sc.points);
    let states = g.propagate(&s0, &times)?;
    let mut header: Vec<String> = vec!["t_us".into(), "sx".into(), "sy".into(), "sz".into()];
    for i in 1..=spec.n_states {
        header.push(format!("p_{i}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::with_capacity(times.len());
    let mut bloch_out = Vec::with_capacity(times.len());
    let mut pop_out = Vec::with_capacity(times.len());
    for (t, st) in times.iter().zip(&states) {
        let b = st.reduced_bloch();
        let p = st.populations();
        let mut row = vec![f(*t), f(b.x), f(b.y), f(b.z)];
        row.extend(p.iter().map(|&x| f(x)));
        rows.push(row);
        bloch_out.push([b.x, b.y, b.z]);
        pop_out.push(p);
    }
    let payload = json!({
        "times": times,
        "bloch": bloch_out,
        "populations": pop_out,
    });
    let mut plots = Vec::new();
    if want_plot {
        let r_max = (0..spec.n_states)
            .map(|j| spec.exit_rate(j))
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let x = Axis::new("time (us)", "time x r_max (dimensionless)", 1.0 / r_max, false);
        let y = Axis::new("Bloch component", "(dimensionless)", 1.0, false);
        let series: Vec<Series> = [("sx", 0usize), ("sy", 1), ("sz", 2)]
            .iter()
            .map(|&(name, idx)| Series {
                name: name.into(),
                points: times
                    .iter()
                    .zip(&bloch_out)
                    .map(|(&t, b)| (t, b[idx]))
                    .collect(),
                dashed: false,
            })
            .collect();
        plots.push((
            "simulate.svg".into(),
            line_plot("Reduced spin trajectory", &x, &y, &series),
        ));
    }
    Ok(CommandOutput {
        csv: csv_table(&header_refs, &rows),
        payload,
        plots,
        points_total: times.len(),
        points_valid: times.len(),
    })
}

pub fn cmd_crossover(cc: &CrossoverConfig, want_plot: bool) -> Result<CommandOutput> {
    if !(cc.r_ab > 0.0) || !(cc.r_ba > 0.0) {
        return Err(FluxError::InvalidModel("crossover rates must be positive".into()));
    }
    if cc.deltas_over_rtot.is_none()
        && (!(cc.delta_min_over_rtot > 0.0)
            || cc.delta_max_over_rtot <= cc.delta_min_over_rtot
            || cc.points < 2)
    {
        return Err(FluxError::InvalidArgument(
            "crossover grid needs 0 < delta_min < delta_max and points >= 2".into(),
        ));
    }
    let template = CrossoverTemplate {
        r_ab: cc.r_ab,
        r_ba: cc.r_ba,
        base: vec3(cc.base),
        direction: vec3(cc.direction),
    };
    let r_tot = template.rate_scale();
    let grid = match &cc.deltas_over_rtot {
        Some(ds) => {
            if ds.is_empty() || ds.iter().any(|&d| !(d > 0.0)) {
                return Err(FluxError::InvalidArgument(
                    "explicit crossover grid must be non-empty and positive".into(),
                ));
            }
            ds.iter().map(|&d| d * r_tot).collect()
        }
        None => log_grid(
            cc.delta_min_over_rtot * r_tot,
            cc.delta_max_over_rtot * r_tot,
            cc.points,
        ),
    };
    let curve = crossover_scan(&template, &grid)?;
    let header = [
        "delta_omega_rad_per_us",
        "delta_omega_over_rtot",
        "gamma_per_us",
        "gamma_over_rtot",
        "valid",
    ];
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            let gamma = if p.valid { f(p.gamma_decay) } else { String::new() };
            let gamma_norm = if p.valid { f(p.gamma_decay / r_tot) } else { String::new() };
            vec![
                f(p.delta_omega),
                f(p.delta_omega / r_tot),
                gamma,
                gamma_norm,
                p.valid.to_string(),
            ]
        })
        .collect();
    let valid = curve.points.iter().filter(|p| p.valid).count();
    let mut plots = Vec::new();
    if want_plot {
        let x = Axis::new(
            "delta_omega (rad/us)",
            "delta_omega / r_tot",
            r_tot,
            true,
        );
        let y = Axis::new("Gamma (1/us)", "Gamma / r_tot", r_tot, true);
        let series = vec![Series {
            name: "decoherence rate".into(),
            points: curve
                .points
                .iter()
                .filter(|p| p.valid)
                .map(|p| (p.delta_omega, p.gamma_decay))
                .collect(),
            dashed: false,
        }];
        plots.push((
            "crossover.svg".into(),
            line_plot("Motional-narrowing crossover", &x, &y, &series),
        ));
    }
    Ok(CommandOutput {
        csv: csv_table(&header, &rows),
        payload: serde_json::to_value(&curve).expect("serializable"),
        plots,
        points_total: curve.points.len(),
        points_valid: valid,
    })
}

pub fn cmd_fig2(fc: &Fig2Config, seed: u64, want_plot: bool) -> Result<CommandOutput> {
    let e = EnsembleSpec {
        n_states: fc.n_states,
        sigma_omega_ratio: fc.sigma_omega_ratio,
        gamma_rad: fc.gamma_rad,
        excitation_rate: fc.excitation_rate.unwrap_or(fc.gamma_rad),
        n_realizations: fc.n_realizations,
        master_seed: seed,
        occupation: fc.occupation.clone(),
        gamma0_offset: fc.gamma0_offset,
        gamma_dark: fc.gamma_dark,
        resample_per_point: fc.resample_per_point,
    };
    if !(fc.omega_min_over_gamma > 0.0)
        || fc.omega_max_over_gamma <= fc.omega_min_over_gamma
        || fc.points < 2
    {
        return Err(FluxError::InvalidArgument(
            "fig2 grid needs 0 < omega_min < omega_max and points >= 2".into(),
        ));
    }
    let grid = log_grid(
        fc.omega_min_over_gamma * e.gamma_rad,
        fc.omega_max_over_gamma * e.gamma_rad,
        fc.points,
    );
    let sweep = reproduce_fig2(&e, &grid)?;
    let g = e.gamma_rad;
    let header = [
        "omega_g_rad_per_us",
        "omega_g_over_gamma",
        "gamma_mean_per_us",
        "gamma_mean_over_gamma",
        "gamma_std_per_us",
        "gamma_std_over_gamma",
        "shift_mean_rad_per_us",
        "shift_mean_over_gamma",
        "shift_std_rad_per_us",
        "shift_std_over_gamma",
        "gamma_x_mean_per_us",
        "gamma_x_std_per_us",
        "gamma_z_mean_per_us",
        "gamma_z_std_per_us",
        "n_failed",
    ];
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                f(r.omega_g),
                f(r.omega_g / g),
                f(r.gamma_mean),
                f(r.gamma_mean / g),
                f(r.gamma_std),
                f(r.gamma_std / g),
                f(r.shift_mean),
                f(r.shift_mean / g),
                f(r.shift_std),
                f(r.shift_std / g),
                f(r.gamma_x_mean),
                f(r.gamma_x_std),
                f(r.gamma_z_mean),
                f(r.gamma_z_std),
                r.n_failed.to_string(),
            ]
        })
        .collect();
    let total = sweep.rows.len() * 2 * e.n_realizations;
    let failed: usize = sweep.rows.iter().map(|r| r.n_failed).sum();
    let mut plots = Vec::new();
    if want_plot {
        let x = Axis::new("omega_g (rad/us)", "omega_g / gamma", g, true);
        let y = Axis::new("Gamma (1/us)", "Gamma / gamma", g, true);
        let mean: Vec<(f64, f64)> =
            sweep.rows.iter().map(|r| (r.omega_g, r.gamma_mean)).collect();
        let upper: Vec<(f64, f64)> = sweep
            .rows
            .iter()
            .map(|r| (r.omega_g, r.gamma_mean + r.gamma_std))
            .collect();
        let lower: Vec<(f64, f64)> = sweep
            .rows
            .iter()
            .map(|r| (r.omega_g, (r.gamma_mean - r.gamma_std).max(1e-12)))
            .collect();
        let series = vec![
            Series { name: "mean rate".into(), points: mean, dashed: false },
            Series { name: "mean + std".into(), points: upper, dashed: true },
            Series { name: "mean - std".into(), points: lower, dashed: true },
        ];
        plots.push((
            "fig2.svg".into(),
            line_plot("Ensemble decoherence rate", &x, &y, &series),
        ));
        let xs = Axis::new("omega_g (rad/us)", "omega_g / gamma", g, true);
        let ys = Axis::new("frequency shift (rad/us)", "shift / gamma", g, false);
        let shift_series = vec![
            Series {
                name: "mean shift".into(),
                points: sweep.rows.iter().map(|r| (r.omega_g, r.shift_mean)).collect(),
                dashed: false,
            },
            Series {
                name: "shift + std".into(),
                points: sweep
                    .rows
                    .iter()
                    .map(|r| (r.omega_g, r.shift_mean + r.shift_std))
                    .collect(),
                dashed: true,
            },
            Series {
                name: "shift - std".into(),
                points: sweep
                    .rows
                    .iter()
                    .map(|r| (r.omega_g, r.shift_mean - r.shift_std))
                    .collect(),
                dashed: true,
            },
        ];
        plots.push((
            "fig2_shift.svg".into(),
            line_plot("Ensemble frequency shift", &xs, &ys, &shift_series),
        ));
    }
    Ok(CommandOutput {
        csv: csv_table(&header, &rows),
        payload: serde_json::to_value(&sweep).expect("serializable"),
        plots,
        points_total: total,
        points_valid: total - failed,
    })
}

pub fn cmd_mc_validate(mc: &McValidateConfig, seed: u64, want_plot: bool) -> Result<CommandOutput> {
    let spec = mc.spec.to_spec()?;
    if !(mc.t_max > 0.0) || mc.points < 2 || mc.n_trajectories < 2 {
        return Err(FluxError::InvalidArgument(
            "mc-validate needs t_max > 0, points >= 2, n_trajectories >= 2".into(),
        ));
    }
    let grid = lin_grid(mc.t_max, mc.points);
    let spin = vec3(mc.spin);
    let ens = ensemble_average(&spec, spin, &mc.occupation, &grid, mc.n_trajectories, seed)?;
    let g = build_generator(&spec)?;
    let s0 = initial_joint_state(&spec, spin, &mc.occupation)?;
    let states = g.propagate(&s0, &grid)?;
    let header = ["t_us", "pull_x", "pull_y", "pull_z", "max_pull"];
    let mut rows = Vec::with_capacity(grid.len());
    let mut per_time = Vec::with_capacity(grid.len());
    let mut max_pull = 0.0f64;
    for (k, (&t, st)) in grid.iter().zip(&states).enumerate() {
        let me = st.reduced_bloch();
        let diff = ens.mean[k] - me;
        let pull = |d: f64, se: f64| {
            if d == 0.0 {
                0.0
            } else {
                d.abs() / se.max(1e-12)
            }
        };
        let px = pull(diff.x, ens.std_err[k].x);
        let py = pull(diff.y, ens.std_err[k].y);
        let pz = pull(diff.z, ens.std_err[k].z);
        let pm = px.max(py).max(pz);
        max_pull = max_pull.max(pm);
        rows.push(vec![f(t), f(px), f(py), f(pz), f(pm)]);
        per_time.push(json!({"t": t, "pull": [px, py, pz]}));
    }
    let pass = max_pull <= mc.threshold_se;
    let payload = json!({
        "threshold_se": mc.threshold_se,
        "max_pull_se": max_pull,
        "pass": pass,
        "n_trajectories": ens.n_trajectories,
        "absorbed_trajectories": ens.absorbed_count,
        "per_time": per_time,
    });
    let mut plots = Vec::new();
    if want_plot {
        let r_max = (0..spec.n_states)
            .map(|j| spec.exit_rate(j))
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let x = Axis::new("time (us)", "time x r_max (dimensionless)", 1.0 / r_max, false);
        let y = Axis::new("Bloch component", "(dimensionless)", 1.0, false);
        let mut series = Vec::new();
        for (name, pick) in [
            ("sx exact", 0usize),
            ("sy exact", 1),
            ("sz exact", 2),
        ] {
            series.push(Series {
                name: name.into(),
                points: grid
                    .iter()
                    .zip(&states)
                    .map(|(&t, st)| {
                        let b = st.reduced_bloch();
                        (t, [b.x, b.y, b.z][pick])
                    })
                    .collect(),
                dashed: false,
            });
        }
        for (name, pick) in [
            ("sx sampled", 0usize),
            ("sy sampled", 1),
            ("sz sampled", 2),
        ] {
            series.push(Series {
                name: name.into(),
                points: grid
                    .iter()
                    .zip(&ens.mean)
                    .map(|(&t, b)| (t, [b.x, b.y, b.z][pick]))
                    .collect(),
                dashed: true,
            });
        }
        plots.push((
            "mc-validate.svg".into(),
            line_plot("Monte Carlo vs master equation", &x, &y, &series),
        ));
    }
    Ok(CommandOutput {
        csv: csv_table(&header, &rows),
        payload,
        plots,
        points_total: grid.len(),
        points_valid: grid.len(),
    })
}

pub fn cmd_sweetspot(sw: &SweetspotConfig) -> Result<CommandOutput> {
    let spec = sw.spec.to_spec()?;
    let ss = sweet_spot(&spec)?;
    let header = [
        "compensation_x",
        "compensation_y",
        "compensation_z",
        "uncompensated_gamma_per_us",
        "residual_gamma_per_us",
        "exact",
    ];
    let rows = vec![vec![
        f(ss.compensation.x),
        f(ss.compensation.y),
        f(ss.compensation.z),
        f(ss.uncompensated_gamma),
        f(ss.residual_gamma),
        ss.exact.to_string(),
    ]];
    Ok(CommandOutput {
        csv: csv_table(&header, &rows),
        payload: serde_json::to_value(&ss).expect("serializable"),
        plots: Vec::new(),
        points_total: 1,
        points_valid: 1,
    })
}
