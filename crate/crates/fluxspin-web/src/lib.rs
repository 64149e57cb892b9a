//! Browser bindings for the simulator: a small JSON-in / JSON-out surface
//! wrapped with `wasm-bindgen`, driving the interactive demo page in
//! `www/`.  Every function returns a JSON object; failures come back as
//! `{"error": "..."}` so the page can surface them without exception
//! plumbing.  The crate also builds natively, which is how its tests run.

use fluxspin::analysis::{crossover_scan, log_grid, CrossoverTemplate};
use fluxspin::nv::sweet_spot;
use fluxspin::propagator::{build_generator, initial_joint_state, Occupation};
use fluxspin::{FluctuatorSpec, Vec3};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Deserialize)]
struct TrajectoryRequest {
    rates: Vec<Vec<f64>>,
    omegas: Vec<[f64; 3]>,
    spin: [f64; 3],
    t_max: f64,
    points: usize,
}

#[derive(Serialize)]
struct TrajectoryResponse {
    times: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sz: Vec<f64>,
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

fn spec_from(rates: Vec<Vec<f64>>, omegas: Vec<[f64; 3]>) -> FluctuatorSpec {
    FluctuatorSpec {
        n_states: rates.len(),
        rates,
        omegas: omegas.into_iter().map(vec3).collect(),
        labels: None,
    }
}

/// Reduced Bloch trajectory for one fluctuator spec.
///
/// Request: `{rates, omegas, spin, t_max, points}`; response:
/// `{times, sx, sy, sz}`.
#[wasm_bindgen]
pub fn simulate_trajectory(request_json: &str) -> String {
    let req: TrajectoryRequest = match serde_json::from_str(request_json) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    if req.points < 2 || req.points > 5000 || !(req.t_max > 0.0) {
        return err_json("need 2..=5000 points and t_max > 0");
    }
    let spec = spec_from(req.rates, req.omegas);
    let run = || -> fluxspin::Result<TrajectoryResponse> {
        let g = build_generator(&spec)?;
        let s0 = initial_joint_state(&spec, vec3(req.spin), &Occupation::Stationary)?;
        let times: Vec<f64> =
            (0..req.points).map(|k| req.t_max * k as f64 / (req.points - 1) as f64).collect();
        let states = g.propagate(&s0, &times)?;
        let bloch: Vec<Vec3> = states.iter().map(|s| s.reduced_bloch()).collect();
        Ok(TrajectoryResponse {
            times,
            sx: bloch.iter().map(|b| b.x).collect(),
            sy: bloch.iter().map(|b| b.y).collect(),
            sz: bloch.iter().map(|b| b.z).collect(),
        })
    };
    match run() {
        Ok(resp) => serde_json::to_string(&resp).unwrap_or_else(err_json),
        Err(e) => err_json(e),
    }
}

/// Decoherence rate across the motional-narrowing crossover for the
/// symmetric two-state dephaser with switching rate `r` each way.
///
/// Response: `{r_tot, delta_omega: [...], gamma: [...]}`, with failed
/// points omitted.
#[wasm_bindgen]
pub fn crossover_curve(r: f64, points: usize) -> String {
    if !(r > 0.0) || points < 2 || points > 400 {
        return err_json("need r > 0 and 2..=400 points");
    }
    let template = CrossoverTemplate::symmetric_parallel(r);
    let r_tot = template.rate_scale();
    let grid = log_grid(0.01 * r_tot, 100.0 * r_tot, points);
    match crossover_scan(&template, &grid) {
        Ok(curve) => {
            let valid: Vec<_> = curve.points.iter().filter(|p| p.valid).collect();
            serde_json::json!({
                "r_tot": r_tot,
                "delta_omega": valid.iter().map(|p| p.delta_omega).collect::<Vec<_>>(),
                "gamma": valid.iter().map(|p| p.gamma_decay).collect::<Vec<_>>(),
            })
            .to_string()
        }
        Err(e) => err_json(e),
    }
}

/// Compensating field for a spec, with the rate before and after.
///
/// Request: `{rates, omegas}`; response:
/// `{compensation: [x,y,z], residual_gamma, uncompensated_gamma, exact}`.
#[wasm_bindgen]
pub fn compensation_report(request_json: &str) -> String {
    #[derive(Deserialize)]
    struct Req {
        rates: Vec<Vec<f64>>,
        omegas: Vec<[f64; 3]>,
    }
    let req: Req = match serde_json::from_str(request_json) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let spec = spec_from(req.rates, req.omegas);
    match sweet_spot(&spec) {
        Ok(ss) => serde_json::json!({
            "compensation": [ss.compensation.x, ss.compensation.y, ss.compensation.z],
            "residual_gamma": ss.residual_gamma,
            "uncompensated_gamma": ss.uncompensated_gamma,
            "exact": ss.exact,
        })
        .to_string(),
        Err(e) => err_json(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let req = r#"{
            "rates": [[0.0, 1.0], [0.8, 0.0]],
            "omegas": [[0.0, 0.0, 2.0], [0.3, 0.0, 1.5]],
            "spin": [1.0, 0.0, 0.0],
            "t_max": 3.0,
            "points": 50
        }"#;
        let resp: serde_json::Value = serde_json::from_str(&simulate_trajectory(req)).unwrap();
        assert!(resp.get("error").is_none(), "unexpected error: {resp}");
        assert_eq!(resp["times"].as_array().unwrap().len(), 50);
        assert_eq!(resp["sx"].as_array().unwrap().len(), 50);
        let sx0 = resp["sx"][0].as_f64().unwrap();
        assert!((sx0 - 1.0).abs() < 1e-9, "trajectory starts at the prepared spin");
        let last = resp["sx"][49].as_f64().unwrap();
        assert!(last.abs() < 1.0, "coherence should have decayed");
    }

    #[test]
    fn bad_trajectory_request_reports_error() {
        let resp: serde_json::Value =
            serde_json::from_str(&simulate_trajectory("{\"nope\": 1}")).unwrap();
        assert!(resp.get("error").is_some());
        let resp: serde_json::Value = serde_json::from_str(&simulate_trajectory(
            r#"{"rates": [[0.0]], "omegas": [[0,0,1]], "spin": [1,0,0], "t_max": -1.0, "points": 10}"#,
        ))
        .unwrap();
        assert!(resp.get("error").is_some());
    }

    #[test]
    fn crossover_curve_has_expected_shape() {
        let resp: serde_json::Value = serde_json::from_str(&crossover_curve(1.0, 30)).unwrap();
        assert!(resp.get("error").is_none(), "unexpected error: {resp}");
        let gamma: Vec<f64> = resp["gamma"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert!(gamma.len() >= 29);
        assert!(gamma.first().unwrap() < gamma.last().unwrap());
        let r_tot = resp["r_tot"].as_f64().unwrap();
        let plateau = gamma.last().unwrap() / (r_tot / 2.0);
        assert!((plateau - 1.0).abs() < 0.05, "tail should sit at the plateau");
    }

    #[test]
    fn compensation_report_round_trip() {
        let req = r#"{
            "rates": [[0.0, 50.0], [40.0, 0.0]],
            "omegas": [[0.0, 8.6, 0.0], [20.0, -5.0, 30.0]]
        }"#;
        let resp: serde_json::Value = serde_json::from_str(&compensation_report(req)).unwrap();
        assert!(resp.get("error").is_none(), "unexpected error: {resp}");
        assert_eq!(resp["exact"], true);
        let comp = resp["compensation"].as_array().unwrap();
        assert!((comp[0].as_f64().unwrap() - -20.0).abs() < 1e-9);
        assert!(resp["residual_gamma"].as_f64().unwrap() < 1e-6);
    }
}
