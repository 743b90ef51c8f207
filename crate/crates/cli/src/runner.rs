//! Scenario execution: binds a configuration to the solver pipelines and
//! writes the report files.

use std::path::Path;

use lamb_core::incoming::{construct_incoming, run_counterexample, CounterexampleKind};
use lamb_core::scattering::{
    extract_scattering, forward_solve, reconstruct_initial, ForwardRun, ScatteringData,
};
use lamb_core::spaces::validate_asymptotic_state;
use lamb_core::{AsymptoticState, Error as CoreError, IncomingSolution};
use serde::Serialize;

use crate::config::Config;
use crate::io;

/// Exit status conventions: 0 ok, 1 solver error, 2 configuration error.
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub subcommand: String,
    pub model: String,
    pub s_plus: Vec<f64>,
    pub grid_step: f64,
    pub t_max: f64,
    pub tolerances: crate::config::Tolerances,
    pub metrics: serde_json::Value,
    pub pass: Option<bool>,
    pub error: Option<ErrorReport>,
}

pub struct Outcome {
    pub exit: i32,
}

fn write_summary(dir: &Path, summary: &Summary) -> anyhow::Result<()> {
    io::write_json(&dir.join("summary.json"), summary)
}

fn base_summary(sub: &str, cfg: &Config) -> Summary {
    Summary {
        subcommand: sub.to_string(),
        model: cfg.model.name.clone(),
        s_plus: cfg.s_plus.clone(),
        grid_step: cfg.grid.h,
        t_max: cfg.grid.t_max,
        tolerances: cfg.tolerances.clone(),
        metrics: serde_json::Value::Null,
        pass: None,
        error: None,
    }
}

fn fail(
    dir: &Path,
    mut summary: Summary,
    err: &CoreError,
) -> anyhow::Result<Outcome> {
    summary.pass = Some(false);
    summary.error = Some(ErrorReport { code: err.code().to_string(), message: err.to_string() });
    write_summary(dir, &summary)?;
    Ok(Outcome { exit: EXIT_SOLVER })
}

#[derive(Serialize)]
struct IncomingMetrics {
    t_glue: f64,
    eps: f64,
    decay_constant: f64,
    picard_iterations: usize,
    contraction_ratio: Option<f64>,
    residual_l2: f64,
    terminal_gap: f64,
    energy_estimate_slack: f64,
    ydot_l2: f64,
    tail_eps_used: f64,
    y_at_zero: Vec<f64>,
}

fn incoming_metrics(sol: &IncomingSolution) -> IncomingMetrics {
    IncomingMetrics {
        t_glue: sol.t_glue,
        eps: sol.eps,
        decay_constant: sol.decay_constant,
        picard_iterations: sol.picard_iterations,
        contraction_ratio: sol.contraction_ratio,
        residual_l2: sol.residual_l2,
        terminal_gap: sol.terminal_gap,
        energy_estimate_slack: sol.apriori_slack,
        ydot_l2: sol.trajectory.l2_norm_ydot,
        tail_eps_used: sol.tail_eps_used,
        y_at_zero: sol.trajectory.y.node(0).to_vec(),
    }
}

fn write_incoming(dir: &Path, sol: &IncomingSolution) -> anyhow::Result<()> {
    io::write_columns_csv(
        &dir.join("incoming.csv"),
        "t",
        &[("y", &sol.trajectory.y), ("ydot", &sol.trajectory.ydot)],
    )?;
    io::write_json(&dir.join("report.json"), &incoming_metrics(sol))
}

#[derive(Serialize)]
struct ScatteringReport {
    s_plus: Vec<f64>,
    identity_residual: Vec<f64>,
    identity_residual_norm: f64,
    remainder_samples: Vec<RemainderSample>,
}

#[derive(Serialize)]
struct RemainderSample {
    t: f64,
    energy_norm: f64,
}

fn scattering_report(data: &ScatteringData) -> ScatteringReport {
    let verdict = validate_asymptotic_state(&data.psi_plus);
    ScatteringReport {
        s_plus: data.s_plus.s.clone(),
        identity_residual: verdict.residual,
        identity_residual_norm: verdict.residual_norm,
        remainder_samples: (0..data.remainder_curve.len())
            .map(|k| RemainderSample {
                t: data.remainder_curve.t(k),
                energy_norm: data.remainder_curve.node(k)[0],
            })
            .collect(),
    }
}

fn write_forward(dir: &Path, run: &ForwardRun, data: &ScatteringData) -> anyhow::Result<()> {
    io::write_columns_csv(
        &dir.join("forward.csv"),
        "t",
        &[("y", &run.y.y), ("ydot", &run.y.ydot), ("w_in", &run.w_in)],
    )?;
    io::write_columns_csv(
        &dir.join("profiles.csv"),
        "s",
        &[("f_plus_out", &run.f_plus_out), ("f_minus_out", &run.f_minus_out)],
    )?;
    io::write_json(&dir.join("scattering.json"), &scattering_report(data))?;
    io::write_asymptotic_state(dir, &data.psi_plus)
}

/// `construct`: incoming trajectory plus reconstructed initial data.
pub fn run_construct(cfg: &Config, dir: &Path) -> anyhow::Result<Outcome> {
    let mut summary = base_summary("construct", cfg);
    let model = cfg.force_model()?;
    let psi = cfg.asymptotic_state()?;
    let sol = match construct_incoming(
        &model,
        &cfg.s_plus,
        &psi,
        cfg.grid.t_max,
        &cfg.solver_config(),
    ) {
        Ok(sol) => sol,
        Err(e) => return fail(dir, summary, &e),
    };
    write_incoming(dir, &sol)?;
    let state = match reconstruct_initial(&model, &sol.trajectory, &psi, &cfg.s_plus) {
        Ok(st) => st,
        Err(e) => return fail(dir, summary, &e),
    };
    io::write_energy_state(dir, &state)?;
    summary.metrics = serde_json::to_value(incoming_metrics(&sol))?;
    summary.pass = Some(sol.residual_l2.is_finite());
    write_summary(dir, &summary)?;
    Ok(Outcome { exit: 0 })
}

/// `forward`: evolve initial data and extract the scattering data. The data
/// come from `initial_data` CSVs when configured, otherwise from the
/// construct pipeline so the scenario is self-contained.
pub fn run_forward(cfg: &Config, dir: &Path) -> anyhow::Result<Outcome> {
    let mut summary = base_summary("forward", cfg);
    let model = cfg.force_model()?;
    let state = if let Some(data_dir) = &cfg.initial_data {
        io::read_energy_state(data_dir)?
    } else {
        let psi = cfg.asymptotic_state()?;
        let sol = match construct_incoming(
            &model,
            &cfg.s_plus,
            &psi,
            cfg.grid.t_max,
            &cfg.solver_config(),
        ) {
            Ok(sol) => sol,
            Err(e) => return fail(dir, summary, &e),
        };
        match reconstruct_initial(&model, &sol.trajectory, &psi, &cfg.s_plus) {
            Ok(st) => st,
            Err(e) => return fail(dir, summary, &e),
        }
    };
    io::write_energy_state(dir, &state)?;
    let run = match forward_solve(&model, &state, cfg.grid.t_max) {
        Ok(run) => run,
        Err(e) => return fail(dir, summary, &e),
    };
    let data = match extract_scattering(&run) {
        Ok(d) => d,
        Err(e) => return fail(dir, summary, &e),
    };
    write_forward(dir, &run, &data)?;
    summary.metrics = serde_json::to_value(scattering_report(&data))?;
    summary.pass = Some(true);
    write_summary(dir, &summary)?;
    Ok(Outcome { exit: 0 })
}

#[derive(Serialize)]
struct RoundtripMetrics {
    incoming: IncomingMetrics,
    scattering: ScatteringReport,
    s_error: f64,
    psi_energy_error: f64,
    trace_sup_error: f64,
    s_tolerance: f64,
    psi_tolerance: f64,
}

/// `roundtrip`: construct, reconstruct, forward, extract, compare.
pub fn run_roundtrip(cfg: &Config, dir: &Path) -> anyhow::Result<Outcome> {
    let mut summary = base_summary("roundtrip", cfg);
    let model = cfg.force_model()?;
    let psi = cfg.asymptotic_state()?;
    let sol = match construct_incoming(
        &model,
        &cfg.s_plus,
        &psi,
        cfg.grid.t_max,
        &cfg.solver_config(),
    ) {
        Ok(sol) => sol,
        Err(e) => return fail(dir, summary, &e),
    };
    write_incoming(dir, &sol)?;
    let state = match reconstruct_initial(&model, &sol.trajectory, &psi, &cfg.s_plus) {
        Ok(st) => st,
        Err(e) => return fail(dir, summary, &e),
    };
    io::write_energy_state(dir, &state)?;
    let run = match forward_solve(&model, &state, cfg.grid.t_max) {
        Ok(run) => run,
        Err(e) => return fail(dir, summary, &e),
    };
    let data = match extract_scattering(&run) {
        Ok(d) => d,
        Err(e) => return fail(dir, summary, &e),
    };
    write_forward(dir, &run, &data)?;

    let s_error = data
        .s_plus
        .s
        .iter()
        .zip(&cfg.s_plus)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let psi_energy_error = psi_energy_error(&data.psi_plus, &psi);
    let trace_sup_error = {
        let a = &run.y.y;
        let b = &sol.trajectory.y;
        (0..a.len())
            .map(|k| {
                a.node(k)
                    .iter()
                    .zip(b.node(k))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    };
    let pass = s_error <= cfg.tolerances.roundtrip_s && psi_energy_error <= cfg.tolerances.roundtrip_psi;
    summary.metrics = serde_json::to_value(RoundtripMetrics {
        incoming: incoming_metrics(&sol),
        scattering: scattering_report(&data),
        s_error,
        psi_energy_error,
        trace_sup_error,
        s_tolerance: cfg.tolerances.roundtrip_s,
        psi_tolerance: cfg.tolerances.roundtrip_psi,
    })?;
    summary.pass = Some(pass);
    write_summary(dir, &summary)?;
    Ok(Outcome { exit: if pass { 0 } else { EXIT_SOLVER } })
}

/// Energy-norm distance between extracted and prescribed states on the
/// common window, plus stray mass of the extracted state outside it.
fn psi_energy_error(extracted: &AsymptoticState, prescribed: &AsymptoticState) -> f64 {
    let h = prescribed.psi0.h();
    let half = prescribed.window().min(extracted.window());
    let hn = (half / h).round() as usize;
    let ie = extracted.psi0.index_of(0.0).expect("window contains 0");
    let ip = prescribed.psi0.index_of(0.0).expect("window contains 0");
    let n = prescribed.dim();
    let mut d0p_sq = 0.0;
    let mut d1_sq = 0.0;
    let mut at_zero = 0.0;
    for k in 0..2 * hn {
        for kk in [k, k + 1] {
            let je = ie + kk - hn;
            let jp = ip + kk - hn;
            for i in 0..n {
                let a = extracted.psi0_prime().node(je)[i] - prescribed.psi0_prime().node(jp)[i];
                let b = extracted.psi1.node(je)[i] - prescribed.psi1.node(jp)[i];
                d0p_sq += 0.5 * h * a * a;
                d1_sq += 0.5 * h * b * b;
            }
        }
    }
    for i in 0..n {
        let d = extracted.psi0.node(ie)[i] - prescribed.psi0.node(ip)[i];
        at_zero += d * d;
    }
    let mut outside = 0.0;
    for k in 0..extracted.psi0.len() {
        if extracted.psi0.t(k).abs() <= half {
            continue;
        }
        for i in 0..n {
            let a = extracted.psi1.node(k)[i];
            let b = extracted.psi0_prime().node(k)[i];
            outside += h * (a * a + b * b);
        }
    }
    d0p_sq.sqrt() + at_zero.sqrt() + d1_sq.sqrt() + outside.sqrt()
}

#[derive(Serialize)]
struct CounterexampleMetrics {
    kind: String,
    y0: f64,
    exit_time: Option<f64>,
    log_fit_constant: f64,
    sup_norm: f64,
    tail_max: f64,
}

/// `counterexample`: the nonhyperbolic divergence runs.
pub fn run_counterexample_cmd(
    kind: CounterexampleKind,
    y0: f64,
    h: f64,
    t_max: f64,
    dir: &Path,
) -> anyhow::Result<Outcome> {
    let rep = run_counterexample(kind, y0, t_max, h);
    io::write_columns_csv(
        &dir.join("incoming.csv"),
        "t",
        &[("y", &rep.trajectory.y), ("ydot", &rep.trajectory.ydot)],
    )?;
    let y = &rep.trajectory.y;
    let tail_start = (0.9 * y.len() as f64) as usize;
    let tail_max =
        (tail_start..y.len()).map(|k| y.node_norm(k)).fold(0.0, f64::max);
    let metrics = CounterexampleMetrics {
        kind: kind.as_str().to_string(),
        y0,
        exit_time: rep.exit_time,
        log_fit_constant: rep.log_fit_constant,
        sup_norm: y.sup_norm(),
        tail_max,
    };
    let summary = Summary {
        subcommand: "counterexample".into(),
        model: kind.as_str().into(),
        s_plus: vec![0.0],
        grid_step: h,
        t_max,
        tolerances: crate::config::Tolerances::default(),
        metrics: serde_json::to_value(&metrics)?,
        pass: Some(true),
        error: None,
    };
    write_summary(dir, &summary)?;
    Ok(Outcome { exit: 0 })
}
