//! Forward evolution of the coupled string-oscillator system, scattering-data
//! extraction and initial-data reconstruction.
//!
//! The wave field is eliminated by the d'Alembert decomposition: on each
//! half-line the state splits into an outgoing and an incoming profile, the
//! trace `y(t) = u(0,t)` obeys the reduced equation
//! `y' = F(y)/2 + w_in(t)` driven by the incoming Riemann-invariant
//! derivatives, and the outgoing profiles follow from the trace identities.
//! Scattering data `(s_plus, psi_plus)` are read off the outgoing profiles;
//! the inverse construction produces finite-energy initial data whose forward
//! run realizes prescribed data.
//!
//! Throughout, grid data are piecewise linear with recorded jumps, and every
//! composite read `g(a +- x)` is taken one-sidedly: advancing the output
//! argument through a node approaches a mirrored argument from the other
//! side. This keeps box-type data sharp through the whole pipeline.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::model::ForceModel;
use crate::spaces::{build_S, AsymptoticState, EnergyState, StationaryState, Trajectory};

/// Distance tolerance of the settling detector at the window end.
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Acceptable residual of the inverse reduced equation when reconstructing.
pub const RECONSTRUCT_RESIDUAL_TOL: f64 = 1e-3;

/// Which one-sided limit of the assembled function a read produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Right,
    Left,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Right => Side::Left,
            Side::Left => Side::Right,
        }
    }
}

/// One-sided reads of symmetric-window grid data with limit extension.
struct SideRead<'a> {
    g: &'a GridFunction,
    i0: usize,
    plus: Option<&'a [f64]>,
    minus: Option<&'a [f64]>,
}

impl<'a> SideRead<'a> {
    fn new(g: &'a GridFunction, plus: Option<&'a [f64]>, minus: Option<&'a [f64]>) -> Self {
        let i0 = g.index_of(0.0).expect("window contains 0");
        Self { g, i0, plus, minus }
    }

    fn from_origin(g: &'a GridFunction) -> Self {
        assert!(g.index_of(0.0) == Some(0) || g.t0().abs() <= 1e-12 * g.h());
        Self { g, i0: 0, plus: None, minus: None }
    }

    fn outside(&self, k: isize, out: &mut [f64]) {
        match if k >= 0 { self.plus } else { self.minus } {
            Some(v) => out.copy_from_slice(v),
            None => out.fill(0.0),
        }
    }

    /// Value when the argument `k h` is approached from the given side.
    fn get(&self, k: isize, side: Side, out: &mut [f64]) {
        let idx = self.i0 as isize + k;
        match side {
            Side::Right => {
                if idx < 0 || idx as usize >= self.g.len() {
                    self.outside(k, out);
                } else {
                    out.copy_from_slice(self.g.node(idx as usize));
                }
            }
            Side::Left => {
                if idx <= 0 || idx as usize >= self.g.len() {
                    self.outside(k, out);
                } else {
                    out.copy_from_slice(self.g.left_at(idx as usize));
                }
            }
        }
    }
}

/// Builds a grid function from a one-sided evaluator: the node sample is the
/// right limit; a differing left limit is recorded as a jump.
fn assemble_one_sided(
    t0: f64,
    h: f64,
    len: usize,
    n: usize,
    mut eval: impl FnMut(usize, Side, &mut [f64]),
) -> GridFunction {
    let mut g = GridFunction::zeros(t0, h, len, n);
    let mut r = vec![0.0; n];
    let mut l = vec![0.0; n];
    for k in 0..len {
        eval(k, Side::Right, &mut r);
        g.node_mut(k).copy_from_slice(&r);
        if k > 0 && k < len - 1 {
            eval(k, Side::Left, &mut l);
            if l.iter().zip(&r).any(|(a, b)| a != b) {
                g.set_left(k, l.clone());
            }
        }
    }
    g
}

/// Incoming Riemann-invariant drive at the origin,
/// `w_in(t) = (u0'(t) + v0(t))/2 + (v0(-t) - u0'(-t))/2`.
pub fn incoming_wave(state: &EnergyState, t_max: f64) -> Result<GridFunction> {
    let l = state.window();
    if t_max > l + 1e-12 {
        return Err(Error::WindowExceeded { needed: t_max, available: l });
    }
    let h = state.u0.h();
    let n = state.dim();
    let len = (t_max / h).round() as usize + 1;
    let du = SideRead::new(state.u0_prime(), None, None);
    let v = SideRead::new(&state.v0, None, None);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    Ok(assemble_one_sided(0.0, h, len, n, |k, side, out| {
        let ki = k as isize;
        du.get(ki, side, &mut a);
        v.get(ki, side, &mut b);
        for i in 0..n {
            out[i] = 0.5 * (a[i] + b[i]);
        }
        // mirrored argument -t approaches from the other side
        v.get(-ki, side.flip(), &mut a);
        du.get(-ki, side.flip(), &mut b);
        for i in 0..n {
            out[i] += 0.5 * (a[i] - b[i]);
        }
    }))
}

/// Forward run of the coupled system with its d'Alembert profiles.
#[derive(Debug, Clone)]
pub struct ForwardRun {
    /// Oscillator trace `y(t) = u(0, t)` with `y'` from the reduced equation.
    pub y: Trajectory,
    /// Incoming drive at the origin on `[0, T_max]`.
    pub w_in: GridFunction,
    /// Outgoing profile derivative for `x > 0`, argument on `[-L, T_max]`.
    pub f_plus_out: GridFunction,
    /// Outgoing profile derivative for `x < 0`, argument on `[-L, T_max]`.
    pub f_minus_out: GridFunction,
    pub source: EnergyState,
    model: ForceModel,
    /// Incoming profile derivatives from the initial data, argument on `[0, L]`.
    q_prime: GridFunction,
    w_prime: GridFunction,
}

impl ForwardRun {
    pub fn model(&self) -> &ForceModel {
        &self.model
    }

    pub fn t_max(&self) -> f64 {
        self.y.y.t_end()
    }

    /// Incoming profile derivative from the right half-line initial data.
    pub fn q_prime(&self) -> &GridFunction {
        &self.q_prime
    }

    /// Incoming profile derivative from the left half-line initial data.
    pub fn w_prime(&self) -> &GridFunction {
        &self.w_prime
    }
}

/// Integrates the reduced equation `y' = F(y)/2 + w_in(t)` from
/// `y(0) = u0(0)` and recovers the outgoing profiles from the trace
/// identities: `p'(t) = y'(t) - q'(t)` for `t > 0` and the initial data
/// before that.
pub fn forward_solve(model: &ForceModel, state: &EnergyState, t_max: f64) -> Result<ForwardRun> {
    let n = model.dim();
    assert_eq!(state.dim(), n, "state dimension must match the model");
    let l = state.window();
    if t_max > l + 1e-12 {
        return Err(Error::WindowExceeded { needed: t_max, available: l });
    }
    let h = state.u0.h();
    let w_in = incoming_wave(state, t_max)?;
    let len = w_in.len();

    // RK4 march of the trace, drive read per cell
    let mut y_data = vec![0.0; len * n];
    let mut state_y = state.u0.value_at(0.0);
    y_data[..n].copy_from_slice(&state_y);
    let mut force = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let rhs = |yv: &[f64], drive: &[f64], out: &mut [f64], force: &mut Vec<f64>| {
        model.eval(yv, force);
        for i in 0..n {
            out[i] = 0.5 * force[i] + drive[i];
        }
    };
    for k in 0..len - 1 {
        let d_start = w_in.node(k);
        let d_end = w_in.left_at(k + 1);
        let d_mid: Vec<f64> = (0..n).map(|i| 0.5 * (d_start[i] + d_end[i])).collect();
        rhs(&state_y, d_start, &mut k1, &mut force);
        for i in 0..n {
            stage[i] = state_y[i] + 0.5 * h * k1[i];
        }
        rhs(&stage, &d_mid, &mut k2, &mut force);
        for i in 0..n {
            stage[i] = state_y[i] + 0.5 * h * k2[i];
        }
        rhs(&stage, &d_mid, &mut k3, &mut force);
        for i in 0..n {
            stage[i] = state_y[i] + h * k3[i];
        }
        rhs(&stage, d_end, &mut k4, &mut force);
        for i in 0..n {
            state_y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mag = state_y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !mag.is_finite() || mag > 1e6 {
            return Err(Error::BlowUp { t: w_in.t(k + 1) });
        }
        y_data[(k + 1) * n..(k + 2) * n].copy_from_slice(&state_y);
    }
    let y = GridFunction::new(0.0, h, n, y_data)?;

    // trace derivative from the equation, one-sided at drive jumps
    let mut ydot = GridFunction::zeros(0.0, h, len, n);
    for k in 0..len {
        model.eval(y.node(k), &mut force);
        let d = w_in.node(k);
        let dst = ydot.node_mut(k);
        for i in 0..n {
            dst[i] = 0.5 * force[i] + d[i];
        }
    }
    for k in w_in.jump_nodes().collect::<Vec<_>>() {
        model.eval(y.node(k), &mut force);
        let d = w_in.left_at(k);
        let lv: Vec<f64> = (0..n).map(|i| 0.5 * force[i] + d[i]).collect();
        ydot.set_left(k, lv);
    }

    // incoming profile derivatives from the initial data, argument s in [0, L]
    let s_len = (l / h).round() as usize + 1;
    let du = SideRead::new(state.u0_prime(), None, None);
    let v = SideRead::new(&state.v0, None, None);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    // q'(s) = (u0'(s) + v0(s))/2, direct argument
    let q_prime = assemble_one_sided(0.0, h, s_len, n, |k, side, out| {
        du.get(k as isize, side, &mut a);
        v.get(k as isize, side, &mut b);
        for i in 0..n {
            out[i] = 0.5 * (a[i] + b[i]);
        }
    });
    // w'(s) = (v0(-s) - u0'(-s))/2, mirrored argument
    let w_prime = assemble_one_sided(0.0, h, s_len, n, |k, side, out| {
        v.get(-(k as isize), side.flip(), &mut a);
        du.get(-(k as isize), side.flip(), &mut b);
        for i in 0..n {
            out[i] = 0.5 * (a[i] - b[i]);
        }
    });

    // outgoing profiles on [-L, T_max]: data part for s < 0, trace part after
    let out_len = ((l + t_max) / h).round() as usize + 1;
    let j0 = (l / h).round() as usize;
    let yd = SideRead::from_origin(&ydot);
    let qp = SideRead::from_origin(&q_prime);
    let wp = SideRead::from_origin(&w_prime);
    let f_plus_out = assemble_one_sided(-l, h, out_len, n, |j, side, out| {
        let s = j as isize - j0 as isize;
        let data_side = s < 0 || (s == 0 && side == Side::Left);
        if data_side {
            // p'(s) = (v0(-s) - u0'(-s))/2, mirrored argument
            v.get(-s, side.flip(), &mut a);
            du.get(-s, side.flip(), &mut b);
            for i in 0..n {
                out[i] = 0.5 * (a[i] - b[i]);
            }
        } else {
            yd.get(s, side, &mut a);
            qp.get(s, side, &mut b);
            for i in 0..n {
                out[i] = a[i] - b[i];
            }
        }
    });
    let f_minus_out = assemble_one_sided(-l, h, out_len, n, |j, side, out| {
        let s = j as isize - j0 as isize;
        let data_side = s < 0 || (s == 0 && side == Side::Left);
        if data_side {
            // r'(s) = (u0'(s) + v0(s))/2 read directly at x = s <= 0
            du.get(s, side, &mut a);
            v.get(s, side, &mut b);
            for i in 0..n {
                out[i] = 0.5 * (a[i] + b[i]);
            }
        } else {
            yd.get(s, side, &mut a);
            wp.get(s, side, &mut b);
            for i in 0..n {
                out[i] = a[i] - b[i];
            }
        }
    });

    Ok(ForwardRun {
        y: Trajectory::new(y, ydot)?,
        w_in,
        f_plus_out,
        f_minus_out,
        source: state.clone(),
        model: model.clone(),
        q_prime,
        w_prime,
    })
}

/// Free-wave evolution of an asymptotic state at a grid-aligned time:
/// position `(psi0(x-t) + psi0(x+t))/2 + 1/2 int_{x-t}^{x+t} psi1` and its
/// exact time derivative, on the window `[-x_half, x_half]`. Arguments past
/// the data window use the stored limits and zero density.
pub fn free_field_on(psi: &AsymptoticState, t: f64, x_half: f64) -> Result<EnergyState> {
    let h = psi.psi0.h();
    let steps = (t / h).round();
    if ((t / h) - steps).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!("time {t} must sit on the grid of step {h}")));
    }
    let m = steps as isize;
    let half_nodes = (x_half / h).round() as usize;
    if half_nodes == 0 {
        return Err(Error::WindowExceeded { needed: h, available: x_half });
    }
    let len = 2 * half_nodes + 1;
    let n = psi.dim();

    let cum = psi.psi1.cumulative_integral();
    let total = psi.psi1.integral();
    let i0 = psi.psi1.index_of(0.0).expect("window contains 0");
    let cum_at = |k: isize, out: &mut [f64]| {
        let idx = i0 as isize + k;
        if idx < 0 {
            out.fill(0.0);
        } else if idx >= cum.len() as isize {
            out.copy_from_slice(&total);
        } else {
            out.copy_from_slice(cum.node(idx as usize));
        }
    };

    let p0 = SideRead::new(&psi.psi0, Some(&psi.psi0_plus), Some(&psi.psi0_minus));
    let dp0 = SideRead::new(psi.psi0_prime(), None, None);
    let p1 = SideRead::new(&psi.psi1, None, None);

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];

    // position is continuous; node values suffice
    let mut pos = GridFunction::zeros(-x_half, h, len, n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for k in 0..len {
        let x = k as isize - half_nodes as isize;
        p0.get(x - m, Side::Right, &mut a);
        p0.get(x + m, Side::Right, &mut b);
        cum_at(x + m, &mut c);
        cum_at(x - m, &mut d);
        let dst = pos.node_mut(k);
        for i in 0..n {
            dst[i] = 0.5 * (a[i] + b[i]) + 0.5 * (c[i] - d[i]);
        }
    }

    // velocity (psi0'(x+t) - psi0'(x-t))/2 + (psi1(x+t) + psi1(x-t))/2;
    // both arguments advance with x, so sides carry through directly
    let vel = assemble_one_sided(-x_half, h, len, n, |k, side, out| {
        let x = k as isize - half_nodes as isize;
        dp0.get(x + m, side, &mut a);
        dp0.get(x - m, side, &mut b);
        for i in 0..n {
            out[i] = 0.5 * (a[i] - b[i]);
        }
        p1.get(x + m, side, &mut a);
        p1.get(x - m, side, &mut b);
        for i in 0..n {
            out[i] += 0.5 * (a[i] + b[i]);
        }
    });

    // spatial derivative (psi0'(x-t) + psi0'(x+t))/2 + (psi1(x+t) - psi1(x-t))/2
    let du = assemble_one_sided(-x_half, h, len, n, |k, side, out| {
        let x = k as isize - half_nodes as isize;
        dp0.get(x - m, side, &mut a);
        dp0.get(x + m, side, &mut b);
        for i in 0..n {
            out[i] = 0.5 * (a[i] + b[i]);
        }
        p1.get(x + m, side, &mut a);
        p1.get(x - m, side, &mut b);
        for i in 0..n {
            out[i] += 0.5 * (a[i] - b[i]);
        }
    });

    EnergyState::with_exact_derivative(
        pos,
        vel,
        psi.psi0_plus.clone(),
        psi.psi0_minus.clone(),
        du,
    )
}

/// Free-wave evolution on the largest window the data supports.
pub fn free_field(psi: &AsymptoticState, t: f64) -> Result<EnergyState> {
    let margin = psi.psi0.h();
    let x_half = psi.window() - t.abs() - margin;
    if x_half <= 0.0 {
        return Err(Error::WindowExceeded { needed: t.abs() + margin, available: psi.window() });
    }
    free_field_on(psi, t, x_half)
}

/// Scattering data of a forward run.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub s_plus: StationaryState,
    pub psi_plus: AsymptoticState,
    /// Sampled remainder norms `t -> ||r_+(t)||_E`.
    pub remainder_curve: GridFunction,
}

/// Reads the limit stationary state and the asymptotic state off the outgoing
/// profiles: `psi1(xi) = f_-'(xi) + f_+'(-xi)`,
/// `psi0'(xi) = f_-'(xi) - f_+'(-xi)`, with `psi0` integrated inward from its
/// right limit `u0(+inf) - s_plus`.
pub fn extract_scattering(run: &ForwardRun) -> Result<ScatteringData> {
    let y_end = run.y.y.node(run.y.y.len() - 1);
    let (zero, distance) = run.model.nearest_zero(y_end);
    if distance > CONVERGENCE_TOL {
        return Err(Error::NoConvergence { distance });
    }
    let s_plus = StationaryState::new(zero);

    let h = run.f_plus_out.h();
    let n = run.f_plus_out.dim();
    let t_max = run.t_max();
    let l = run.source.window();
    let x_half = t_max.min(l);
    let half_nodes = (x_half / h).round() as usize;
    let len = 2 * half_nodes + 1;

    let fp = SideRead::new(&run.f_plus_out, None, None);
    let fm = SideRead::new(&run.f_minus_out, None, None);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];

    let psi1 = assemble_one_sided(-x_half, h, len, n, |k, side, out| {
        let xi = k as isize - half_nodes as isize;
        fm.get(xi, side, &mut a);
        fp.get(-xi, side.flip(), &mut b);
        for i in 0..n {
            out[i] = a[i] + b[i];
        }
    });
    let psi0_prime = assemble_one_sided(-x_half, h, len, n, |k, side, out| {
        let xi = k as isize - half_nodes as isize;
        fm.get(xi, side, &mut a);
        fp.get(-xi, side.flip(), &mut b);
        for i in 0..n {
            out[i] = a[i] - b[i];
        }
    });

    // psi0 integrated from the right limit u0(+inf) - s_plus
    let psi0_plus: Vec<f64> =
        run.source.u0_plus.iter().zip(&s_plus.s).map(|(u, s)| u - s).collect();
    let cum = psi0_prime.cumulative_integral();
    let cum_end = cum.node(len - 1).to_vec();
    let mut psi0 = GridFunction::zeros(-x_half, h, len, n);
    for k in 0..len {
        let dst = psi0.node_mut(k);
        for i in 0..n {
            dst[i] = psi0_plus[i] - (cum_end[i] - cum.node(k)[i]);
        }
    }
    let psi0_minus = psi0.node(0).to_vec();

    let psi_plus =
        AsymptoticState::with_exact_derivative(psi0, psi1, psi0_plus, psi0_minus, psi0_prime)?;

    // remainder norms over a spread of times
    let samples = 9;
    let step = (0.75 * t_max / (samples - 1) as f64 / h).round().max(1.0) * h;
    let probe = ScatteringData {
        s_plus: s_plus.clone(),
        psi_plus: psi_plus.clone(),
        remainder_curve: GridFunction::zeros(0.0, 1.0, 2, 1),
    };
    let mut values = Vec::with_capacity(samples);
    for j in 0..samples {
        values.push(remainder_norm(run, &probe, j as f64 * step)?);
    }
    let remainder_curve = GridFunction::new(0.0, step, 1, values)?;

    Ok(ScatteringData { s_plus, psi_plus, remainder_curve })
}

/// Global energy norm of `Y(t) - S_+ - W(t) psi_+`, assembled from the
/// d'Alembert profiles on the light-cone-safe window `|x| <= L - t`.
pub fn remainder_norm(run: &ForwardRun, data: &ScatteringData, t: f64) -> Result<f64> {
    let h = run.f_plus_out.h();
    let steps = (t / h).round();
    if ((t / h) - steps).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!("time {t} must sit on the grid of step {h}")));
    }
    let n = run.f_plus_out.dim();
    let l = run.source.window();
    let half_nodes = ((l - t) / h).floor() as usize;
    if half_nodes < 2 {
        return Err(Error::WindowExceeded { needed: t + 2.0 * h, available: l });
    }
    let x_half = half_nodes as f64 * h;
    let len = 2 * half_nodes + 1;
    let m = steps as isize;

    // antiderivatives of the profile derivatives, normalized to vanish at 0
    let p_cum = run.f_plus_out.cumulative_integral();
    let r_cum = run.f_minus_out.cumulative_integral();
    let q_cum = run.q_prime.cumulative_integral();
    let w_cum = run.w_prime.cumulative_integral();
    let j0 = p_cum.index_of(0.0).expect("profile window contains 0");
    let shifted = |cum: &GridFunction, base: usize, k: isize, out: &mut [f64]| {
        let idx = (base as isize + k).clamp(0, cum.len() as isize - 1) as usize;
        let b = cum.node(base);
        let v = cum.node(idx);
        for i in 0..n {
            out[i] = v[i] - b[i];
        }
    };

    let y0 = run.y.y.node(0);
    let fp = SideRead::new(&run.f_plus_out, None, None);
    let fm = SideRead::new(&run.f_minus_out, None, None);
    let qp = SideRead::from_origin(&run.q_prime);
    let wp = SideRead::from_origin(&run.w_prime);

    // field at time t: u = y(0) + P(t-x) + Q(t+x) on x > 0 and the mirror on
    // x < 0; du/dt and du/dx come straight from the profile derivatives
    let mut u = GridFunction::zeros(-x_half, h, len, n);
    let mut udot = GridFunction::zeros(-x_half, h, len, n);
    let mut uprime = GridFunction::zeros(-x_half, h, len, n);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for k in 0..len {
        let x = k as isize - half_nodes as isize;
        if x >= 0 {
            shifted(&p_cum, j0, m - x, &mut a);
            shifted(&q_cum, 0, m + x, &mut b);
            for i in 0..n {
                u.node_mut(k)[i] = y0[i] + a[i] + b[i];
            }
            // t - x runs against x: the right limit in x reads the left one
            fp.get(m - x, Side::Left, &mut a);
            qp.get(m + x, Side::Right, &mut b);
            for i in 0..n {
                udot.node_mut(k)[i] = a[i] + b[i];
                uprime.node_mut(k)[i] = -a[i] + b[i];
            }
        } else {
            shifted(&r_cum, j0, m + x, &mut a);
            shifted(&w_cum, 0, m - x, &mut b);
            for i in 0..n {
                u.node_mut(k)[i] = y0[i] + a[i] + b[i];
            }
            fm.get(m + x, Side::Right, &mut a);
            wp.get(m - x, Side::Left, &mut b);
            for i in 0..n {
                udot.node_mut(k)[i] = a[i] + b[i];
                uprime.node_mut(k)[i] = a[i] - b[i];
            }
        }
    }

    let free = free_field_on(&data.psi_plus, t, x_half)?;
    let mut dv_sq = 0.0;
    let mut dup_sq = 0.0;
    for k in 0..len - 1 {
        for kk in [k, k + 1] {
            for i in 0..n {
                let dv = udot.node(kk)[i] - free.v0.node(kk)[i];
                let dup = uprime.node(kk)[i] - free.u0_prime().node(kk)[i];
                dv_sq += 0.5 * h * dv * dv;
                dup_sq += 0.5 * h * dup * dup;
            }
        }
    }
    let mut at_zero = 0.0;
    for i in 0..n {
        let d = u.node(half_nodes)[i] - data.s_plus.s[i] - free.u0.node(half_nodes)[i];
        at_zero += d * d;
    }
    Ok(dup_sq.sqrt() + at_zero.sqrt() + dv_sq.sqrt())
}

/// Builds finite-energy initial data whose forward run has trace `y` and
/// scattering data `(s_plus, psi)`: the outgoing profiles are matched to the
/// free-field profiles of `psi`, the incoming ones follow from the trace
/// identity, and `u0` is integrated outward from `u0(0) = y(0)`.
pub fn reconstruct_initial(
    model: &ForceModel,
    y: &Trajectory,
    psi: &AsymptoticState,
    s_plus: &[f64],
) -> Result<EnergyState> {
    let n = y.y.dim();
    assert_eq!(psi.dim(), n);
    let h = y.y.h();
    let t_max = y.y.t_end();

    // consistency: y must solve the inverse reduced equation for this psi
    let (_, sdot) = build_S(psi, t_max)?;
    let residual = crate::incoming::inverse_equation_residual(model, &y.y, &sdot);
    if residual > RECONSTRUCT_RESIDUAL_TOL {
        return Err(Error::InconsistentInput { residual });
    }

    let l_out = t_max + psi.window();
    let half_nodes = (l_out / h).round() as usize;
    let len = 2 * half_nodes + 1;

    let dp0 = SideRead::new(psi.psi0_prime(), None, None);
    let p1 = SideRead::new(&psi.psi1, None, None);
    let yd = SideRead::from_origin(&y.ydot);
    let yd_len = y.ydot.len() as isize;

    // free outgoing profile derivatives of psi:
    //   f_plus*(s) = (-psi0'(-s) + psi1(-s))/2 (mirrored argument)
    //   f_minus*(s) = (psi0'(s) + psi1(s))/2 (direct argument)
    let f_plus_star = |s: isize, side: Side, out: &mut [f64]| {
        let mut a = vec![0.0; n];
        dp0.get(-s, side.flip(), &mut a);
        p1.get(-s, side.flip(), out);
        for i in 0..n {
            out[i] = 0.5 * (-a[i] + out[i]);
        }
    };
    let f_minus_star = |s: isize, side: Side, out: &mut [f64]| {
        let mut a = vec![0.0; n];
        dp0.get(s, side, &mut a);
        p1.get(s, side, out);
        for i in 0..n {
            out[i] = 0.5 * (a[i] + out[i]);
        }
    };
    // trace derivative extended by zero past the trajectory window
    let ydot_at = |k: isize, side: Side, out: &mut [f64]| {
        if k < 0 || k >= yd_len {
            out.fill(0.0);
        } else {
            yd.get(k, side, out);
        }
    };

    // v0(x) = f*(-x) + y'(|x|) - f*(|x|) and
    // u0'(x) = sign(x) (-f*(-x) + y'(|x|) - f*(|x|)),
    // with f* = f_plus* for x > 0 and f_minus* for x < 0; at x = 0 the right
    // limit carries the positive-side branch, the left limit the negative one
    let mut v0 = GridFunction::zeros(-l_out, h, len, n);
    let mut u0p = GridFunction::zeros(-l_out, h, len, n);
    {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        let mut rv = vec![0.0; n];
        let mut ru = vec![0.0; n];
        let mut eval = |x: isize, side: Side, out_v: &mut [f64], out_u: &mut [f64]| {
            let positive_branch = x > 0 || (x == 0 && side == Side::Right);
            if positive_branch {
                // the argument -x runs against x, the argument x with it
                f_plus_star(-x, side.flip(), &mut c);
                ydot_at(x, side, &mut d);
                f_plus_star(x, side, &mut e);
                for i in 0..n {
                    out_v[i] = c[i] + d[i] - e[i];
                    out_u[i] = -c[i] + d[i] - e[i];
                }
            } else {
                // x <= 0: |x| = -x runs against x
                f_minus_star(x, side, &mut c);
                ydot_at(-x, side.flip(), &mut d);
                f_minus_star(-x, side.flip(), &mut e);
                for i in 0..n {
                    out_v[i] = c[i] + d[i] - e[i];
                    out_u[i] = c[i] - d[i] + e[i];
                }
            }
        };
        for k in 0..len {
            let x = k as isize - half_nodes as isize;
            eval(x, Side::Right, &mut rv, &mut ru);
            v0.node_mut(k).copy_from_slice(&rv);
            u0p.node_mut(k).copy_from_slice(&ru);
            if k > 0 && k < len - 1 {
                let mut lv = vec![0.0; n];
                let mut lu = vec![0.0; n];
                eval(x, Side::Left, &mut lv, &mut lu);
                if lv.iter().zip(&rv).any(|(p, q)| p != q) {
                    v0.set_left(k, lv);
                }
                if lu.iter().zip(&ru).any(|(p, q)| p != q) {
                    u0p.set_left(k, lu);
                }
            }
        }
    }

    // u0 integrated outward from u0(0) = y(0)
    let y0 = y.y.node(0);
    let cum = u0p.cumulative_integral();
    let base = cum.node(half_nodes).to_vec();
    let mut u0 = GridFunction::zeros(-l_out, h, len, n);
    for k in 0..len {
        let dst = u0.node_mut(k);
        for i in 0..n {
            dst[i] = y0[i] + cum.node(k)[i] - base[i];
        }
    }

    let u0_plus: Vec<f64> = s_plus.iter().zip(&psi.psi0_plus).map(|(s, p)| s + p).collect();
    let u0_minus: Vec<f64> = s_plus.iter().zip(&psi.psi0_minus).map(|(s, p)| s + p).collect();
    EnergyState::with_exact_derivative(u0, v0, u0_plus, u0_minus, u0p)
}
