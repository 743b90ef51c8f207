//! Nonlinear oscillator force models.
//!
//! Each model carries its force `F`, analytic Jacobian, zero set and (where
//! one exists) the confining potential with `F = -grad V`. The flat-core and
//! quadratic-core models reproduce the nonhyperbolic counterexample forces on
//! `|y| <= 1` and are joined to `-(y - sign y)` outside for coercivity; only
//! the inner region matters for those runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spaces::StationaryState;

pub const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ForceModel {
    /// `F(y) = -diag(k) y`; hyperbolic at 0 iff every `k_i != 0`.
    Linear { k: Vec<f64> },
    /// `F(y) = -y^3 - y` in one dimension.
    Cubic1d,
    /// `F(y) = (y1 - y1^3, -y2)`: a saddle at the origin, sinks at `(+-1, 0)`.
    DoubleWell2d,
    /// `F = 0` on `|y| <= 1`, linear restoring join outside.
    FlatCore,
    /// `F = y^2` on `|y| <= 1`, linear restoring join outside.
    QuadraticCore,
    /// Scalar polynomial `F(y) = sum_k c_k y^k` with user-supplied zeros.
    Polynomial { coeffs: Vec<f64>, zeros: Vec<f64> },
}

impl ForceModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForceModel::Linear { .. } => "linear",
            ForceModel::Cubic1d => "cubic-1d",
            ForceModel::DoubleWell2d => "double-well-2d",
            ForceModel::FlatCore => "flat-core",
            ForceModel::QuadraticCore => "quadratic-core",
            ForceModel::Polynomial { .. } => "polynomial",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ForceModel::Linear { k } => k.len(),
            ForceModel::DoubleWell2d => 2,
            _ => 1,
        }
    }

    pub fn has_potential(&self) -> bool {
        true
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        match self {
            ForceModel::Linear { k } => {
                for i in 0..k.len() {
                    out[i] = -k[i] * y[i];
                }
            }
            ForceModel::Cubic1d => {
                out[0] = -y[0] * y[0] * y[0] - y[0];
            }
            ForceModel::DoubleWell2d => {
                out[0] = y[0] - y[0] * y[0] * y[0];
                out[1] = -y[1];
            }
            ForceModel::FlatCore => {
                let x = y[0];
                out[0] = if x.abs() <= 1.0 { 0.0 } else { -(x - x.signum()) };
            }
            ForceModel::QuadraticCore => {
                let x = y[0];
                out[0] = if x.abs() <= 1.0 { x * x } else { -(x - x.signum()) };
            }
            ForceModel::Polynomial { coeffs, .. } => {
                let x = y[0];
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                out[0] = acc;
            }
        }
    }

    pub fn eval_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(y, &mut out);
        out
    }

    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        match self {
            ForceModel::Linear { k } => {
                DMatrix::from_fn(k.len(), k.len(), |i, j| if i == j { -k[i] } else { 0.0 })
            }
            ForceModel::Cubic1d => DMatrix::from_element(1, 1, -3.0 * y[0] * y[0] - 1.0),
            ForceModel::DoubleWell2d => {
                DMatrix::from_row_slice(2, 2, &[1.0 - 3.0 * y[0] * y[0], 0.0, 0.0, -1.0])
            }
            ForceModel::FlatCore => {
                DMatrix::from_element(1, 1, if y[0].abs() <= 1.0 { 0.0 } else { -1.0 })
            }
            ForceModel::QuadraticCore => DMatrix::from_element(
                1,
                1,
                if y[0].abs() <= 1.0 { 2.0 * y[0] } else { -1.0 },
            ),
            ForceModel::Polynomial { coeffs, .. } => {
                let x = y[0];
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x + k as f64 * c;
                }
                DMatrix::from_element(1, 1, acc)
            }
        }
    }

    /// Confining potential with `F = -grad V`.
    pub fn potential(&self, y: &[f64]) -> f64 {
        match self {
            ForceModel::Linear { k } => {
                0.5 * k.iter().zip(y).map(|(ki, yi)| ki * yi * yi).sum::<f64>()
            }
            ForceModel::Cubic1d => 0.25 * y[0].powi(4) + 0.5 * y[0] * y[0],
            ForceModel::DoubleWell2d => {
                -0.5 * y[0] * y[0] + 0.25 * y[0].powi(4) + 0.5 * y[1] * y[1]
            }
            ForceModel::FlatCore => {
                let x = y[0].abs();
                if x <= 1.0 {
                    0.0
                } else {
                    0.5 * (x - 1.0) * (x - 1.0)
                }
            }
            ForceModel::QuadraticCore => {
                let x = y[0];
                if x.abs() <= 1.0 {
                    -x * x * x / 3.0
                } else if x > 1.0 {
                    0.5 * (x - 1.0) * (x - 1.0) - 1.0 / 3.0
                } else {
                    0.5 * (x + 1.0) * (x + 1.0) + 1.0 / 3.0
                }
            }
            ForceModel::Polynomial { coeffs, .. } => {
                // V = -int_0^y F
                let x = y[0];
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().rev() {
                    acc = acc * x + c / (k as f64 + 1.0);
                }
                -acc * x
            }
        }
    }

    pub fn zeros(&self) -> Vec<Vec<f64>> {
        match self {
            ForceModel::Linear { k } => vec![vec![0.0; k.len()]],
            ForceModel::Cubic1d => vec![vec![0.0]],
            ForceModel::DoubleWell2d => {
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]]
            }
            ForceModel::FlatCore | ForceModel::QuadraticCore => vec![vec![0.0]],
            ForceModel::Polynomial { zeros, .. } => zeros.iter().map(|z| vec![*z]).collect(),
        }
    }

    /// Zero of `F` closest to `y`, with the distance.
    pub fn nearest_zero(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for z in self.zeros() {
            let d = z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                best = Some((z, d));
            }
        }
        best.expect("every model lists at least one zero")
    }

    /// Validates that `s` is a zero of the force.
    pub fn check_stationary(&self, s: &[f64]) -> Result<StationaryState> {
        let f = self.eval_vec(s);
        let force_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if force_norm > STATIONARY_TOL {
            return Err(Error::NotStationary { force_norm });
        }
        Ok(StationaryState::new(s.to_vec()))
    }

    /// Half the distance from `s` to the nearest other zero (1.0 when `s` is
    /// the only zero); fixed-point iterates beyond this radius leave the
    /// region where the local decomposition is meaningful.
    pub fn validity_radius(&self, s: &[f64]) -> f64 {
        let mut nearest_other = f64::INFINITY;
        for z in self.zeros() {
            let d = z.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d > 1e-9 {
                nearest_other = nearest_other.min(d);
            }
        }
        if nearest_other.is_finite() {
            0.5 * nearest_other
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn all_models() -> Vec<ForceModel> {
        vec![
            ForceModel::Linear { k: vec![1.0] },
            ForceModel::Linear { k: vec![2.0, 0.5] },
            ForceModel::Cubic1d,
            ForceModel::DoubleWell2d,
            ForceModel::FlatCore,
            ForceModel::QuadraticCore,
            ForceModel::Polynomial { coeffs: vec![0.0, -1.0, 0.0, -1.0], zeros: vec![0.0] },
        ]
    }

    /// Points in the region where the model is smooth (the cores are only
    /// piecewise smooth at the seam |y| = 1).
    fn sample_point(model: &ForceModel, rng: &mut StdRng) -> Vec<f64> {
        match model {
            ForceModel::FlatCore | ForceModel::QuadraticCore => {
                if rng.random_bool(0.5) {
                    vec![rng.random_range(-0.9..0.9)]
                } else {
                    let mag = rng.random_range(1.1..2.0);
                    vec![if rng.random_bool(0.5) { mag } else { -mag }]
                }
            }
            _ => (0..model.dim()).map(|_| rng.random_range(-1.5..1.5)).collect(),
        }
    }

    #[test]
    fn listed_zeros_are_zeros() {
        for model in all_models() {
            for z in model.zeros() {
                let f = model.eval_vec(&z);
                let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm <= 1e-10, "{} at {z:?}: |F| = {norm}", model.name());
            }
        }
    }

    #[test]
    fn force_is_minus_gradient_of_potential() {
        let mut rng = StdRng::seed_from_u64(3);
        let h = 1e-6;
        for model in all_models() {
            for _ in 0..100 {
                let y = sample_point(&model, &mut rng);
                let f = model.eval_vec(&y);
                for i in 0..model.dim() {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[i] += h;
                    ym[i] -= h;
                    let grad = (model.potential(&yp) - model.potential(&ym)) / (2.0 * h);
                    let scale = 1.0_f64.max(f[i].abs());
                    assert!(
                        (f[i] + grad).abs() <= 1e-6 * scale,
                        "{} at {y:?}: F = {}, -dV = {}",
                        model.name(),
                        f[i],
                        -grad
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(5);
        let h = 1e-6;
        for model in all_models() {
            for _ in 0..50 {
                let y = sample_point(&model, &mut rng);
                let jac = model.jacobian(&y);
                for j in 0..model.dim() {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[j] += h;
                    ym[j] -= h;
                    let fp = model.eval_vec(&yp);
                    let fm = model.eval_vec(&ym);
                    for i in 0..model.dim() {
                        let fd = (fp[i] - fm[i]) / (2.0 * h);
                        assert!(
                            (jac[(i, j)] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                            "{} d{i}/d{j} at {y:?}",
                            model.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn potential_is_coercive_along_rays() {
        for model in all_models() {
            if matches!(model, ForceModel::Linear { ref k } if k.iter().any(|v| *v <= 0.0)) {
                continue;
            }
            let far: Vec<f64> = (0..model.dim()).map(|i| if i == 0 { 8.0 } else { 5.0 }).collect();
            let near = vec![0.1; model.dim()];
            assert!(model.potential(&far) > model.potential(&near) + 1.0, "{}", model.name());
        }
    }

    #[test]
    fn stationarity_check_accepts_zeros_and_rejects_others() {
        let model = ForceModel::DoubleWell2d;
        assert!(model.check_stationary(&[1.0, 0.0]).is_ok());
        assert!(matches!(
            model.check_stationary(&[0.5, 0.0]),
            Err(Error::NotStationary { .. })
        ));
    }

    #[test]
    fn validity_radius_uses_the_zero_spacing() {
        let model = ForceModel::DoubleWell2d;
        assert!((model.validity_radius(&[0.0, 0.0]) - 0.5).abs() < 1e-12);
        assert!((ForceModel::Cubic1d.validity_radius(&[0.0]) - 1.0).abs() < 1e-12);
    }
}
