//! The bounded-solution operator `R: f -> E * f` of the dichotomy.
//!
//! For a hyperbolic splitting of `B`, `y = Rf` is the unique bounded solution
//! of `y' = By + f`: the stable part integrates forward from the left, the
//! unstable part backward from the right. On each grid cell the forcing is
//! the linear interpolant of its one-sided node values and the convolution
//! with `e^{Bt}` is integrated exactly through phi-functions of `±hB`, so no
//! stiffness error enters however large `|B| h` is. Outside the window the
//! forcing is extended by zero.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::grid::GridFunction;
use crate::spectral::{matexp, HyperbolicSplit};

/// Cell propagators for one (splitting, step) pair. Building the kernel costs
/// a few small matrix exponentials; applying it is linear in the grid length,
/// so reuse the kernel across repeated applications at the same step.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    n: usize,
    h: f64,
    /// e^{Bh} P-  (stable step)
    es: Vec<f64>,
    /// h phi1(hB) P-
    g0s: Vec<f64>,
    /// h phi2(hB) P-
    g1s: Vec<f64>,
    /// e^{-Bh} P+  (unstable backward step)
    eu: Vec<f64>,
    /// h phi1(-hB) P+
    g0u: Vec<f64>,
    /// h (phi1 - phi2)(-hB) P+
    g1u: Vec<f64>,
    stable_rank: bool,
    unstable_rank: bool,
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    // row-major for cache-friendly matvec
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[inline]
fn matvec(n: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
}

#[inline]
fn matvec_add(n: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out[i] += acc;
    }
}

/// `e^{hM}`, `h phi1(hM)`, `h phi2(hM)` from one exponential of the augmented
/// block matrix `[[M, I, 0], [0, 0, I], [0, 0, 0]] h`.
fn phi_matrices(m: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut aug = DMatrix::<f64>::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(m * h));
    for i in 0..n {
        aug[(i, n + i)] = h;
        aug[(n + i, 2 * n + i)] = h;
    }
    let e = matexp(&aug);
    let exp = e.view((0, 0), (n, n)).into_owned();
    let hphi1 = e.view((0, n), (n, n)).into_owned();
    let h2phi2 = e.view((0, 2 * n), (n, n)).into_owned();
    (exp, hphi1, h2phi2 / h)
}

impl GreenKernel {
    pub fn new(split: &HyperbolicSplit, h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite());
        let n = split.dim();
        let b = split.b();
        let pm = split.p_minus();
        let pp = split.p_plus();

        let (ebh, hphi1, hphi2) = phi_matrices(b, h);
        let minus_b = -b;
        let (embh, hphi1m, hphi2m) = phi_matrices(&minus_b, h);

        GreenKernel {
            n,
            h,
            es: flatten(&(&ebh * pm)),
            g0s: flatten(&(&hphi1 * pm)),
            g1s: flatten(&(&hphi2 * pm)),
            eu: flatten(&(&embh * pp)),
            g0u: flatten(&(&hphi1m * pp)),
            g1u: flatten(&((&hphi1m - &hphi2m) * pp)),
            stable_rank: pm.iter().any(|v| v.abs() > 0.0),
            unstable_rank: pp.iter().any(|v| v.abs() > 0.0),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Applies `R` to a forcing on a uniform grid with the kernel's step.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        assert_eq!(f.dim(), self.n, "forcing dimension must match the splitting");
        assert!(
            (f.h() - self.h).abs() <= 1e-12 * self.h,
            "forcing step {} does not match kernel step {}",
            f.h(),
            self.h
        );
        let n = self.n;
        let len = f.len();
        let mut y = vec![0.0; len * n];
        let mut state = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut delta = vec![0.0; n];

        if self.stable_rank {
            // forward, zero at the left end
            state.fill(0.0);
            for k in 0..len - 1 {
                let a = f.node(k);
                let b = f.left_at(k + 1);
                for i in 0..n {
                    delta[i] = b[i] - a[i];
                }
                matvec(n, &self.es, &state, &mut next);
                matvec_add(n, &self.g0s, a, &mut next);
                matvec_add(n, &self.g1s, &delta, &mut next);
                state.copy_from_slice(&next);
                for i in 0..n {
                    y[(k + 1) * n + i] += state[i];
                }
            }
        }

        if self.unstable_rank {
            // backward, zero at the right end (zero extension of f)
            state.fill(0.0);
            for k in (0..len - 1).rev() {
                let a = f.node(k);
                let b = f.left_at(k + 1);
                for i in 0..n {
                    delta[i] = b[i] - a[i];
                }
                matvec(n, &self.eu, &state, &mut next);
                matvec_add(n, &self.g0u, a, &mut next);
                matvec_add(n, &self.g1u, &delta, &mut next);
                state.copy_from_slice(&next);
                for i in 0..n {
                    y[k * n + i] -= state[i];
                }
            }
        }

        GridFunction::new(f.t0(), self.h, n, y)
    }
}

/// One-shot application of the bounded-solution operator.
#[allow(non_snake_case)]
pub fn apply_R(split: &HyperbolicSplit, f: &GridFunction) -> Result<GridFunction> {
    GreenKernel::new(split, f.h()).apply(f)
}
