//! Phase-space and asymptotic-state types with their energy norms, and the
//! construction of the drive `S(t)` from an asymptotic state.
//!
//! The phase space holds pairs `(u0, v0)` with spatial limits; its norm is
//! `||u0'||_L2 + |u0(0)| + ||v0||_L2`. Asymptotic states `(psi0, psi1)` are
//! admissible when the limits and the mass of `psi1` cancel:
//! `psi0(+inf) + psi0(-inf) + integral(psi1) = 0`.

use crate::error::{Error, Result};
use crate::grid::GridFunction;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_symmetric_window(g: &GridFunction) -> Result<()> {
    let skew = (g.t0() + g.t_end()).abs();
    if skew > 1e-9 * (1.0 + g.t_end().abs()) || g.index_of(0.0).is_none() {
        return Err(Error::GridMismatch(format!(
            "spatial window [{}, {}] must be symmetric with a node at 0",
            g.t0(),
            g.t_end()
        )));
    }
    Ok(())
}

/// A zero of the force; carrier for the constant stationary state `(s, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub s: Vec<f64>,
}

impl StationaryState {
    pub fn new(s: Vec<f64>) -> Self {
        Self { s }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }
}

/// Finite-energy initial datum `(u0, v0)` on a symmetric window, together
/// with its spatial limits.
///
/// `u0_prime` is kept alongside the samples: it is derived by central
/// differences at construction, or provided exactly when the state is built
/// analytically (initial-data reconstruction knows the one-sided values of
/// `u0'` and storing them keeps kinks sharp downstream).
#[derive(Debug, Clone)]
pub struct EnergyState {
    pub u0: GridFunction,
    pub v0: GridFunction,
    pub u0_plus: Vec<f64>,
    pub u0_minus: Vec<f64>,
    pub v0_mean: Vec<f64>,
    u0_prime: GridFunction,
}

impl EnergyState {
    /// Builds a state from samples; limits default to the end samples and the
    /// window integral of `v0`.
    pub fn new(u0: GridFunction, v0: GridFunction) -> Result<Self> {
        let u0_plus = u0.node(u0.len() - 1).to_vec();
        let u0_minus = u0.node(0).to_vec();
        Self::with_limits(u0, v0, u0_plus, u0_minus)
    }

    pub fn with_limits(
        u0: GridFunction,
        v0: GridFunction,
        u0_plus: Vec<f64>,
        u0_minus: Vec<f64>,
    ) -> Result<Self> {
        let u0_prime = u0.derivative();
        Self::assemble(u0, v0, u0_plus, u0_minus, u0_prime)
    }

    /// Same, with an exact derivative (kinks and jumps preserved).
    pub fn with_exact_derivative(
        u0: GridFunction,
        v0: GridFunction,
        u0_plus: Vec<f64>,
        u0_minus: Vec<f64>,
        u0_prime: GridFunction,
    ) -> Result<Self> {
        u0.compatible(&u0_prime)?;
        Self::assemble(u0, v0, u0_plus, u0_minus, u0_prime)
    }

    fn assemble(
        u0: GridFunction,
        v0: GridFunction,
        u0_plus: Vec<f64>,
        u0_minus: Vec<f64>,
        u0_prime: GridFunction,
    ) -> Result<Self> {
        u0.compatible(&v0)?;
        check_symmetric_window(&u0)?;
        if u0_plus.len() != u0.dim() || u0_minus.len() != u0.dim() {
            return Err(Error::GridMismatch("limit dimension mismatch".into()));
        }
        let v0_mean = v0.integral();
        Ok(Self { u0, v0, u0_plus, u0_minus, v0_mean, u0_prime })
    }

    pub fn u0_prime(&self) -> &GridFunction {
        &self.u0_prime
    }

    /// Half-width of the spatial window.
    pub fn window(&self) -> f64 {
        self.u0.t_end()
    }

    pub fn dim(&self) -> usize {
        self.u0.dim()
    }

    /// Global energy norm `||u0'||_L2 + |u0(0)| + ||v0||_L2`.
    pub fn energy_norm(&self) -> f64 {
        let at_zero = self.u0.value_at(0.0);
        self.u0_prime.l2_norm() + norm(&at_zero) + self.v0.l2_norm()
    }

    /// Largest deviation between the end samples and the stored limits; small
    /// values certify membership in the limit-respecting subspace.
    pub fn tail_defect(&self) -> f64 {
        let last = self.u0.len() - 1;
        let right: f64 = self
            .u0
            .node(last)
            .iter()
            .zip(&self.u0_plus)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let left: f64 = self
            .u0
            .node(0)
            .iter()
            .zip(&self.u0_minus)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        right.max(left)
    }
}

/// Global energy norm of a state (Def. of the phase-space norm).
pub fn energy_norm(state: &EnergyState) -> f64 {
    state.energy_norm()
}

/// Asymptotic free-wave state `(psi0, psi1)` with limits of `psi0`.
#[derive(Debug, Clone)]
pub struct AsymptoticState {
    pub psi0: GridFunction,
    pub psi1: GridFunction,
    pub psi0_plus: Vec<f64>,
    pub psi0_minus: Vec<f64>,
    psi0_prime: GridFunction,
}

impl AsymptoticState {
    pub fn new(
        psi0: GridFunction,
        psi1: GridFunction,
        psi0_plus: Vec<f64>,
        psi0_minus: Vec<f64>,
    ) -> Result<Self> {
        let psi0_prime = psi0.derivative();
        Self::assemble(psi0, psi1, psi0_plus, psi0_minus, psi0_prime)
    }

    pub fn with_exact_derivative(
        psi0: GridFunction,
        psi1: GridFunction,
        psi0_plus: Vec<f64>,
        psi0_minus: Vec<f64>,
        psi0_prime: GridFunction,
    ) -> Result<Self> {
        psi0.compatible(&psi0_prime)?;
        Self::assemble(psi0, psi1, psi0_plus, psi0_minus, psi0_prime)
    }

    fn assemble(
        psi0: GridFunction,
        psi1: GridFunction,
        psi0_plus: Vec<f64>,
        psi0_minus: Vec<f64>,
        psi0_prime: GridFunction,
    ) -> Result<Self> {
        psi0.compatible(&psi1)?;
        check_symmetric_window(&psi0)?;
        if psi0_plus.len() != psi0.dim() || psi0_minus.len() != psi0.dim() {
            return Err(Error::GridMismatch("limit dimension mismatch".into()));
        }
        Ok(Self { psi0, psi1, psi0_plus, psi0_minus, psi0_prime })
    }

    pub fn zero(half_width: f64, h: f64, n: usize) -> Self {
        let len = 2 * (half_width / h).round() as usize + 1;
        let g = GridFunction::zeros(-half_width, h, len, n);
        Self::new(g.clone(), g, vec![0.0; n], vec![0.0; n]).expect("zero state is valid")
    }

    pub fn psi0_prime(&self) -> &GridFunction {
        &self.psi0_prime
    }

    pub fn window(&self) -> f64 {
        self.psi0.t_end()
    }

    pub fn dim(&self) -> usize {
        self.psi0.dim()
    }

    /// Componentwise residual `psi0_plus + psi0_minus + integral(psi1)`.
    pub fn identity_residual(&self) -> Vec<f64> {
        let mass = self.psi1.integral();
        (0..self.dim())
            .map(|i| self.psi0_plus[i] + self.psi0_minus[i] + mass[i])
            .collect()
    }

    /// Energy norm of the pair, `||psi0'||_L2 + |psi0(0)| + ||psi1||_L2`.
    pub fn energy_norm(&self) -> f64 {
        let at_zero = self.psi0.value_at(0.0);
        self.psi0_prime.l2_norm() + norm(&at_zero) + self.psi1.l2_norm()
    }
}

/// Verdict of the admissibility test for an asymptotic state.
#[derive(Debug, Clone)]
pub struct Membership {
    pub member: bool,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub energy_norm: f64,
}

/// Checks the admissibility identity; the tolerance scales with the state,
/// `1e-6 * (1 + energy norm)`.
pub fn validate_asymptotic_state(psi: &AsymptoticState) -> Membership {
    let residual = psi.identity_residual();
    let residual_norm = norm(&residual);
    let energy = psi.energy_norm();
    let tolerance = 1e-6 * (1.0 + energy);
    Membership {
        member: residual_norm <= tolerance && energy.is_finite(),
        residual,
        residual_norm,
        tolerance,
        energy_norm: energy,
    }
}

/// Signed-index read of psi-type data: inside the window the node value,
/// outside the stored limit (for `psi0`) or zero (densities, derivatives).
struct MirrorRead<'a> {
    g: &'a GridFunction,
    i0: usize,
    plus: Option<&'a [f64]>,
    minus: Option<&'a [f64]>,
}

impl<'a> MirrorRead<'a> {
    fn new(g: &'a GridFunction, plus: Option<&'a [f64]>, minus: Option<&'a [f64]>) -> Self {
        let i0 = g.index_of(0.0).expect("window contains 0");
        Self { g, i0, plus, minus }
    }

    fn index(&self, k: isize) -> Option<usize> {
        let idx = self.i0 as isize + k;
        if idx < 0 || idx >= self.g.len() as isize {
            None
        } else {
            Some(idx as usize)
        }
    }

    fn right(&self, k: isize, out: &mut [f64]) {
        match self.index(k) {
            Some(i) => out.copy_from_slice(self.g.node(i)),
            None => self.fill_outside(k, out),
        }
    }

    fn left(&self, k: isize, out: &mut [f64]) {
        match self.index(k) {
            Some(i) if i > 0 => out.copy_from_slice(self.g.left_at(i)),
            Some(_) | None => self.fill_outside(k, out),
        }
    }

    fn fill_outside(&self, k: isize, out: &mut [f64]) {
        let lim = if k >= 0 { self.plus } else { self.minus };
        match lim {
            Some(v) => out.copy_from_slice(v),
            None => out.fill(0.0),
        }
    }
}

/// Builds `S(t) = (psi0(t) + psi0(-t))/2 + 1/2 int_{-t}^{t} psi1` and its
/// derivative on `[0, t_max]`, at the grid step of `psi`.
///
/// Evaluations past the data window use the stored limits of `psi0` and zero
/// density, so `t_max` may exceed the window; for admissible states `S`
/// becomes constant (and `Sdot` zero) there. Jumps of `psi1` carry over to
/// `Sdot` exactly.
#[allow(non_snake_case)]
pub fn build_S(psi: &AsymptoticState, t_max: f64) -> Result<(GridFunction, GridFunction)> {
    let h = psi.psi0.h();
    let n = psi.dim();
    let len = (t_max / h).round() as usize + 1;
    if len < 2 {
        return Err(Error::GridMismatch(format!("t_max {t_max} shorter than one step {h}")));
    }

    // cumulative mass of psi1 from the left window end
    let cum = psi.psi1.cumulative_integral();
    let total = psi.psi1.integral();
    let i0 = psi.psi1.index_of(0.0).expect("window contains 0");
    let cum_at = |k: isize| -> Vec<f64> {
        let idx = i0 as isize + k;
        if idx < 0 {
            vec![0.0; n]
        } else if idx >= cum.len() as isize {
            total.clone()
        } else {
            cum.node(idx as usize).to_vec()
        }
    };

    let psi0 = MirrorRead::new(&psi.psi0, Some(&psi.psi0_plus), Some(&psi.psi0_minus));
    let dpsi0 = MirrorRead::new(&psi.psi0_prime, None, None);
    let psi1 = MirrorRead::new(&psi.psi1, None, None);

    let mut s_data = vec![0.0; len * n];
    let mut sd = GridFunction::zeros(0.0, h, len, n);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    for k in 0..len {
        let ki = k as isize;
        // position part: node values suffice, S is continuous
        psi0.right(ki, &mut a);
        psi0.right(-ki, &mut b);
        let cp = cum_at(ki);
        let cm = cum_at(-ki);
        for i in 0..n {
            s_data[k * n + i] = 0.5 * (a[i] + b[i]) + 0.5 * (cp[i] - cm[i]);
        }

        // derivative: one-sided values so jumps of psi1 stay sharp.
        // Advancing t through a node reads psi(+t) from the right and
        // psi(-t) from the left.
        dpsi0.right(ki, &mut a);
        dpsi0.left(-ki, &mut b);
        psi1.right(ki, &mut c);
        psi1.left(-ki, &mut d);
        let right: Vec<f64> =
            (0..n).map(|i| 0.5 * (a[i] - b[i]) + 0.5 * (c[i] + d[i])).collect();
        sd.node_mut(k).copy_from_slice(&right);

        if k > 0 {
            dpsi0.left(ki, &mut a);
            dpsi0.right(-ki, &mut b);
            psi1.left(ki, &mut c);
            psi1.right(-ki, &mut d);
            let lft: Vec<f64> =
                (0..n).map(|i| 0.5 * (a[i] - b[i]) + 0.5 * (c[i] + d[i])).collect();
            if k < len - 1 {
                sd.set_left(k, lft);
            }
        }
    }

    let s = GridFunction::new(0.0, h, n, s_data)?;
    Ok((s, sd))
}

/// A trajectory `t -> y(t)` on `[0, T_max]` paired with its derivative; the
/// element type of the solution space `L2 ∩ C_b`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub y: GridFunction,
    pub ydot: GridFunction,
    pub l2_norm_ydot: f64,
}

impl Trajectory {
    pub fn new(y: GridFunction, ydot: GridFunction) -> Result<Self> {
        y.compatible(&ydot)?;
        let l2_norm_ydot = ydot.l2_norm();
        Ok(Self { y, ydot, l2_norm_ydot })
    }

    /// Derivative filled in by central differences.
    pub fn from_position(y: GridFunction) -> Self {
        let ydot = y.derivative();
        let l2_norm_ydot = ydot.l2_norm();
        Self { y, ydot, l2_norm_ydot }
    }

    /// Norm of the solution space: `||y||_L2 + ||y||_sup`.
    pub fn y_norm(&self) -> f64 {
        self.y.l2_norm() + self.y.sup_norm()
    }

    /// Max deviation between the stored derivative and central differences of
    /// the position, over interior nodes; O(h^2) for consistent pairs.
    pub fn derivative_defect(&self) -> f64 {
        let cd = self.y.derivative();
        let mut worst: f64 = 0.0;
        for k in 1..self.y.len() - 1 {
            let a = cd.node(k);
            let b = self.ydot.node_average(k);
            let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
        worst
    }
}

/// Y-norm of grid data: `||.||_L2 + ||.||_sup`.
pub fn y_norm(g: &GridFunction) -> f64 {
    g.l2_norm() + g.sup_norm()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use approx::assert_relative_eq;

    pub(crate) fn symmetric_grid(half: f64, h: f64, f: impl Fn(f64) -> f64) -> GridFunction {
        let len = 2 * (half / h).round() as usize + 1;
        GridFunction::sample_scalar(-half, h, len, f)
    }

    /// Closed box `[lo, hi]`, value `amp` inside, jump entries at the edges.
    pub(crate) fn sharp_box(half: f64, h: f64, lo: f64, hi: f64, amp: f64) -> GridFunction {
        let mut g = symmetric_grid(half, h, |x| if x >= lo && x < hi { amp } else { 0.0 });
        if let Some(k) = g.index_of(lo) {
            if k > 0 && k < g.len() - 1 {
                g.set_left(k, vec![0.0]);
            }
        }
        if let Some(k) = g.index_of(hi) {
            if k > 0 && k < g.len() - 1 {
                g.node_mut(k)[0] = 0.0;
                g.set_left(k, vec![amp]);
            }
        }
        g
    }

    #[test]
    fn energy_norm_of_zero_state_is_zero() {
        let z = symmetric_grid(2.0, 0.1, |_| 0.0);
        let st = EnergyState::new(z.clone(), z).unwrap();
        assert_eq!(st.energy_norm(), 0.0);
    }

    #[test]
    fn energy_norm_of_constant_is_its_magnitude() {
        let c = symmetric_grid(2.0, 0.1, |_| -3.5);
        let z = symmetric_grid(2.0, 0.1, |_| 0.0);
        let st = EnergyState::new(c, z).unwrap();
        assert_relative_eq!(st.energy_norm(), 3.5, max_relative = 1e-12);
    }

    #[test]
    fn energy_norm_of_hat_matches_hand_quadrature() {
        // u0 = max(0, 1 - |x|): ||u0'||_L2 = sqrt(2), |u0(0)| = 1
        let exact = 1.0 + 2.0_f64.sqrt();
        let h = 1e-3;
        let u0 = symmetric_grid(2.0, h, |x| (1.0 - x.abs()).max(0.0));
        let v0 = symmetric_grid(2.0, h, |_| 0.0);

        // sampled derivative: central differences smear the three kinks by O(h)
        let st = EnergyState::new(u0.clone(), v0.clone()).unwrap();
        assert!((st.energy_norm() - exact).abs() < 1e-2);

        // exact one-sided derivative: the hand value is reproduced
        let mut d = symmetric_grid(2.0, h, |x| {
            if (-1.0..0.0).contains(&x) {
                1.0
            } else if (0.0..1.0).contains(&x) {
                -1.0
            } else {
                0.0
            }
        });
        for (x, l, r) in [(-1.0, 0.0, 1.0), (0.0, 1.0, -1.0), (1.0, -1.0, 0.0)] {
            let k = d.index_of(x).unwrap();
            d.node_mut(k)[0] = r;
            d.set_left(k, vec![l]);
        }
        let st = EnergyState::with_exact_derivative(u0, v0, vec![0.0], vec![0.0], d).unwrap();
        assert_relative_eq!(st.energy_norm(), exact, max_relative = 1e-12);
    }

    #[test]
    fn energy_norm_is_homogeneous_and_subadditive() {
        let u = symmetric_grid(1.0, 0.05, |x| (-(x * x)).exp());
        let v = symmetric_grid(1.0, 0.05, |x| x.sin());
        let a = EnergyState::new(u.clone(), v.clone()).unwrap();
        let lam = -2.5_f64;
        let us = u.map_values(|s, d| d[0] = lam * s[0]);
        let vs = v.map_values(|s, d| d[0] = lam * s[0]);
        let b = EnergyState::new(us, vs).unwrap();
        assert_relative_eq!(b.energy_norm(), lam.abs() * a.energy_norm(), max_relative = 1e-12);

        let u2 = symmetric_grid(1.0, 0.05, |x| x.cos());
        let v2 = symmetric_grid(1.0, 0.05, |x| 0.3 * x);
        let c = EnergyState::new(u2.clone(), v2.clone()).unwrap();
        let sum = EnergyState::new(
            u.linear_combination(1.0, &u2, 1.0).unwrap(),
            v.linear_combination(1.0, &v2, 1.0).unwrap(),
        )
        .unwrap();
        assert!(sum.energy_norm() <= a.energy_norm() + c.energy_norm() + 1e-12);
    }

    #[test]
    fn identity_zero_state_is_member() {
        let psi = AsymptoticState::zero(2.0, 0.1, 1);
        let verdict = validate_asymptotic_state(&psi);
        assert!(verdict.member);
        assert_eq!(verdict.residual, vec![0.0]);
    }

    #[test]
    fn identity_constant_with_compensating_box_is_member() {
        let h = 1e-2;
        let psi0 = symmetric_grid(2.0, h, |_| 1.0);
        let psi1 = sharp_box(2.0, h, -1.0, 1.0, -1.0);
        let psi = AsymptoticState::new(psi0, psi1, vec![1.0], vec![1.0]).unwrap();
        let verdict = validate_asymptotic_state(&psi);
        assert!(verdict.member, "residual {:?}", verdict.residual);
        assert!(verdict.residual_norm <= 1e-12);
    }

    #[test]
    fn identity_constant_without_density_is_nonmember() {
        let h = 1e-2;
        let psi0 = symmetric_grid(2.0, h, |_| 1.0);
        let psi1 = symmetric_grid(2.0, h, |_| 0.0);
        let psi = AsymptoticState::new(psi0, psi1, vec![1.0], vec![1.0]).unwrap();
        let verdict = validate_asymptotic_state(&psi);
        assert!(!verdict.member);
        assert_relative_eq!(verdict.residual[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn build_s_of_zero_state_vanishes() {
        let psi = AsymptoticState::zero(2.0, 0.1, 1);
        let (s, sd) = build_S(&psi, 5.0).unwrap();
        assert_eq!(s.sup_norm(), 0.0);
        assert_eq!(sd.sup_norm(), 0.0);
    }

    #[test]
    fn build_s_of_box_state_is_the_exact_ramp() {
        let h = 1e-2;
        let psi0 = symmetric_grid(2.0, h, |_| 1.0);
        let psi1 = sharp_box(2.0, h, -1.0, 1.0, -1.0);
        let psi = AsymptoticState::new(psi0, psi1, vec![1.0], vec![1.0]).unwrap();
        let (s, sd) = build_S(&psi, 5.0).unwrap();
        for k in 0..s.len() {
            let t = s.t(k);
            let expect = if t <= 1.0 { 1.0 - t } else { 0.0 };
            assert!((s.node(k)[0] - expect).abs() <= 1e-13, "S({t}) = {}", s.node(k)[0]);
            let expect_d = if t < 1.0 { -1.0 } else { 0.0 };
            assert!((sd.node(k)[0] - expect_d).abs() <= 1e-13, "Sdot({t}) = {}", sd.node(k)[0]);
        }
        // the drive ends with an exact jump at t = 1
        let k1 = sd.index_of(1.0).unwrap();
        assert_eq!(sd.left_at(k1), &[-1.0]);
        assert_eq!(sd.node(k1), &[0.0]);
    }

    #[test]
    fn build_s_of_gaussian_is_the_symmetric_average() {
        let h = 1e-3;
        let psi0 = symmetric_grid(3.0, h, |x| (-(x * x)).exp());
        let psi1 = symmetric_grid(3.0, h, |_| 0.0);
        let psi = AsymptoticState::new(psi0, psi1, vec![0.0], vec![0.0]).unwrap();
        let (s, sd) = build_S(&psi, 2.0).unwrap();
        for k in 0..s.len() {
            let t = s.t(k);
            assert!((s.node(k)[0] - (-(t * t)).exp()).abs() <= 1e-12);
        }
        // derivative comes from central differences of psi0: O(h^2)
        let k = sd.index_of(0.5).unwrap();
        let exact = -2.0 * 0.5 * (-0.25_f64).exp();
        assert!((sd.node(k)[0] - exact).abs() <= 1e-6);
    }

    #[test]
    fn trajectory_derivative_defect_is_second_order() {
        let defect = |h: f64| {
            let len = (3.0 / h).round() as usize + 1;
            let y = GridFunction::sample_scalar(0.0, h, len, |t| (1.3 * t).sin());
            let ydot = GridFunction::sample_scalar(0.0, h, len, |t| 1.3 * (1.3 * t).cos());
            Trajectory::new(y, ydot).unwrap().derivative_defect()
        };
        let e1 = defect(2e-2);
        let e2 = defect(1e-2);
        assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }
}
