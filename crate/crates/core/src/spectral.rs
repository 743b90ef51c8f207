//! Hyperbolic spectral splitting and the dichotomy kernel.
//!
//! [`hyperbolic_split`] partitions the spectrum of a real matrix by the sign
//! of the real part and produces the spectral projectors onto the stable and
//! unstable invariant subspaces, read off an ordered real Schur form. The
//! projectors feed [`fundamental_solution`], the Green kernel
//! `E(t) = e^{Bt} P_-` for `t > 0` and `-e^{Bt} P_+` for `t < 0`, which decays
//! like `C e^{-eps |t|}` in both directions.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Minimal distance of the spectrum to the imaginary axis below which the
/// matrix is treated as nonhyperbolic.
pub const HYPERBOLIC_GAP_TOL: f64 = 1e-9;

/// Spectral splitting of a hyperbolic matrix.
#[derive(Debug, Clone)]
pub struct HyperbolicSplit {
    b: DMatrix<f64>,
    p_plus: DMatrix<f64>,
    p_minus: DMatrix<f64>,
    eigenvalues: Vec<Complex<f64>>,
    eps: f64,
    c: f64,
}

impl HyperbolicSplit {
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Projector onto the unstable invariant subspace (Re lambda > 0).
    pub fn p_plus(&self) -> &DMatrix<f64> {
        &self.p_plus
    }

    /// Projector onto the stable invariant subspace (Re lambda < 0).
    pub fn p_minus(&self) -> &DMatrix<f64> {
        &self.p_minus
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    /// Certified spectral gap: every eigenvalue satisfies |Re lambda| > eps.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Calibrated prefactor of the decay bound `|E(t)| <= C e^{-eps |t|}`.
    pub fn decay_constant(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Worst violation of the projector algebra: `P^2 = P`, `P+ + P- = I`,
    /// `P+ P- = 0` and commutation with `B`.
    pub fn projector_defect(&self) -> f64 {
        let n = self.dim();
        let id = DMatrix::<f64>::identity(n, n);
        let checks = [
            &self.p_minus * &self.p_minus - &self.p_minus,
            &self.p_plus * &self.p_plus - &self.p_plus,
            &self.p_plus + &self.p_minus - id,
            &self.p_plus * &self.p_minus,
            &self.b * &self.p_minus - &self.p_minus * &self.b,
        ];
        checks.iter().map(opnorm).fold(0.0, f64::max)
    }
}

/// Operator 2-norm.
pub fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values()[0]
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|v| v.abs()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Matrix exponential by Pade approximants with scaling and squaring.
pub fn matexp(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(m.nrows(), m.ncols(), "matexp needs a square matrix");
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let norm = one_norm(m);

    const THETA_3: f64 = 1.495585217958292e-2;
    const THETA_5: f64 = 2.53939833006323e-1;
    const THETA_7: f64 = 9.504178996162932e-1;
    const THETA_9: f64 = 2.097_847_961_257_068;
    const THETA_13: f64 = 5.371920351148152e0;

    let pade = |a: &DMatrix<f64>, b: &[f64]| -> (DMatrix<f64>, DMatrix<f64>) {
        // (u, v) with u odd and v even in a
        let a2 = a * a;
        match b.len() {
            4 => {
                let u = a * (&a2 * b[3] + &id * b[1]);
                let v = &a2 * b[2] + &id * b[0];
                (u, v)
            }
            6 => {
                let a4 = &a2 * &a2;
                let u = a * (&a4 * b[5] + &a2 * b[3] + &id * b[1]);
                let v = &a4 * b[4] + &a2 * b[2] + &id * b[0];
                (u, v)
            }
            8 => {
                let a4 = &a2 * &a2;
                let a6 = &a4 * &a2;
                let u = a * (&a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
                let v = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
                (u, v)
            }
            10 => {
                let a4 = &a2 * &a2;
                let a6 = &a4 * &a2;
                let a8 = &a6 * &a2;
                let u = a * (&a8 * b[9] + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
                let v = &a8 * b[8] + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
                (u, v)
            }
            14 => {
                let a4 = &a2 * &a2;
                let a6 = &a4 * &a2;
                let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
                let w2 = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
                let u = a * (&a6 * w1 + w2);
                let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
                let z2 = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
                let v = &a6 * z1 + z2;
                (u, v)
            }
            _ => unreachable!(),
        }
    };

    let solve = |u: DMatrix<f64>, v: DMatrix<f64>| -> DMatrix<f64> {
        let numer = &v + &u;
        let denom = &v - &u;
        denom.lu().solve(&numer).expect("Pade denominator is nonsingular")
    };

    const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
    const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    const B7: [f64; 8] =
        [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
    const B9: [f64; 10] = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];
    const B13: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    if norm <= THETA_3 {
        let (u, v) = pade(m, &B3);
        return solve(u, v);
    }
    if norm <= THETA_5 {
        let (u, v) = pade(m, &B5);
        return solve(u, v);
    }
    if norm <= THETA_7 {
        let (u, v) = pade(m, &B7);
        return solve(u, v);
    }
    if norm <= THETA_9 {
        let (u, v) = pade(m, &B9);
        return solve(u, v);
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = m * 2f64.powi(-(s as i32));
    let (u, v) = pade(&scaled, &B13);
    let mut r = solve(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Solves the Sylvester equation `A X - X B = C` for small dense blocks via
/// the Kronecker form.
fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let q = b.ncols();
    let iq = DMatrix::<f64>::identity(q, q);
    let ip = DMatrix::<f64>::identity(p, p);
    let lhs = iq.kronecker(a) - b.transpose().kronecker(&ip);
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let sol = lhs.lu().solve(&rhs).expect("Sylvester operator is nonsingular");
    DMatrix::from_column_slice(p, q, sol.as_slice())
}

/// Orthonormal completion: full orthogonal `U` with the leading columns
/// spanning the column space of `z` (Householder QR).
fn orthonormal_completion(z: &DMatrix<f64>) -> DMatrix<f64> {
    let m = z.nrows();
    let q = z.ncols();
    let mut work = z.clone();
    let mut u = DMatrix::<f64>::identity(m, m);
    for j in 0..q.min(m - 1) {
        let mut v = vec![0.0; m - j];
        for i in j..m {
            v[i - j] = work[(i, j)];
        }
        let alpha = -v[0].signum() * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha.abs() < 1e-300 {
            continue;
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        // work <- H work, u <- u H with H = I - 2 v v^T / |v|^2 on rows j..
        for col in 0..q {
            let dot: f64 = (j..m).map(|i| v[i - j] * work[(i, col)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..m {
                work[(i, col)] -= f * v[i - j];
            }
        }
        for row in 0..m {
            let dot: f64 = (j..m).map(|i| u[(row, i)] * v[i - j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..m {
                u[(row, i)] -= f * v[i - j];
            }
        }
    }
    u
}

/// Quasi-triangular block layout: start index and size (1 or 2) per block.
fn diagonal_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = one_norm(t).max(1.0);
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)].abs() > 1e-12 * scale {
            blocks.push((k, 2));
            k += 2;
        } else {
            blocks.push((k, 1));
            k += 1;
        }
    }
    blocks
}

fn block_real_part(t: &DMatrix<f64>, start: usize, size: usize) -> f64 {
    if size == 1 {
        t[(start, start)]
    } else {
        0.5 * (t[(start, start)] + t[(start + 1, start + 1)])
    }
}

/// Splits a 2x2 diagonal block with real eigenvalues into two 1x1 blocks by
/// a rotation, so that every remaining 2x2 block is a complex pair.
fn standardize(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>) {
    let n = t.nrows();
    let mut k = 0;
    while k + 1 < n {
        let sub = t[(k + 1, k)];
        if sub.abs() <= 1e-300 {
            k += 1;
            continue;
        }
        let (a, b, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
        let disc = (a - d) * (a - d) + 4.0 * b * c;
        if disc < 0.0 {
            k += 2;
            continue;
        }
        // real pair: rotate so the block becomes upper triangular
        let root = disc.sqrt();
        let lambda = if (a - d) >= 0.0 { 0.5 * (a + d + root) } else { 0.5 * (a + d - root) };
        let (mut vx, mut vy) = (b, lambda - a);
        if vx.abs() + vy.abs() < 1e-300 {
            vx = lambda - d;
            vy = c;
        }
        let r = (vx * vx + vy * vy).sqrt();
        let (cs, sn) = (vx / r, vy / r);
        // G^T T G with G = [[cs, -sn], [sn, cs]] acting on rows/cols k, k+1
        for col in 0..n {
            let (x, y) = (t[(k, col)], t[(k + 1, col)]);
            t[(k, col)] = cs * x + sn * y;
            t[(k + 1, col)] = -sn * x + cs * y;
        }
        for row in 0..n {
            let (x, y) = (t[(row, k)], t[(row, k + 1)]);
            t[(row, k)] = cs * x + sn * y;
            t[(row, k + 1)] = -sn * x + cs * y;
        }
        for row in 0..n {
            let (x, y) = (q[(row, k)], q[(row, k + 1)]);
            q[(row, k)] = cs * x + sn * y;
            q[(row, k + 1)] = -sn * x + cs * y;
        }
        t[(k + 1, k)] = 0.0;
        k += 1;
    }
}

/// Swaps the adjacent diagonal blocks at `(i, p)` and `(i+p, r)` by an
/// orthogonal similarity confined to the window.
fn swap_adjacent(t: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, p: usize, r: usize) {
    let n = t.nrows();
    let m = p + r;
    let a = t.view((i, i), (p, p)).into_owned();
    let b = t.view((i + p, i + p), (r, r)).into_owned();
    let c = t.view((i, i + p), (p, r)).into_owned();
    let x = solve_sylvester(&a, &b, &c);

    let mut z = DMatrix::<f64>::zeros(m, r);
    for row in 0..p {
        for col in 0..r {
            z[(row, col)] = -x[(row, col)];
        }
    }
    for col in 0..r {
        z[(p + col, col)] = 1.0;
    }
    let u = orthonormal_completion(&z);

    // window similarity
    let w = t.view((i, i), (m, m)).into_owned();
    let wt = u.transpose() * w * &u;
    t.view_mut((i, i), (m, m)).copy_from(&wt);
    // rows above and columns to the right of the window
    if i > 0 {
        let top = t.view((0, i), (i, m)).into_owned() * &u;
        t.view_mut((0, i), (i, m)).copy_from(&top);
    }
    if i + m < n {
        let right = u.transpose() * t.view((i, i + m), (m, n - i - m)).into_owned();
        t.view_mut((i, i + m), (m, n - i - m)).copy_from(&right);
    }
    let qcols = q.view((0, i), (n, m)).into_owned() * &u;
    q.view_mut((0, i), (n, m)).copy_from(&qcols);

    // enforce the quasi-triangular pattern in the window
    for row in r..m {
        for col in 0..r {
            t[(i + row, i + col)] = 0.0;
        }
    }
}

/// Real Schur form of `b` reordered so the stable block leads; returns
/// `(q, t, k)` with `b = q t q^T` and the leading `k x k` block carrying the
/// stable spectrum.
pub fn ordered_real_schur(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let schur = nalgebra::linalg::Schur::try_new(b.clone(), 1e-14, 100_000)
        .or_else(|| nalgebra::linalg::Schur::try_new(b.clone(), 1e-9, 100_000))
        .ok_or_else(|| Error::GridMismatch("Schur iteration failed to converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    standardize(&mut t, &mut q);

    loop {
        let blocks = diagonal_blocks(&t);
        let mut swapped = false;
        for w in blocks.windows(2) {
            let (i, p) = w[0];
            let (_, r) = w[1];
            let first_unstable = block_real_part(&t, i, p) > 0.0;
            let second_stable = block_real_part(&t, i + p, r) < 0.0;
            if first_unstable && second_stable {
                swap_adjacent(&mut t, &mut q, i, p, r);
                swapped = true;
                break;
            }
        }
        if !swapped {
            break;
        }
    }

    let k = diagonal_blocks(&t)
        .iter()
        .filter(|(s, sz)| block_real_part(&t, *s, *sz) < 0.0)
        .map(|(_, sz)| sz)
        .sum();
    Ok((q, t, k))
}

/// Partitions the spectrum of `b` by the sign of the real part and builds the
/// spectral projectors from the ordered real Schur form. `eps` is set to
/// `0.9 min |Re lambda|`; the decay prefactor `C` is calibrated by sampling
/// the kernel.
pub fn hyperbolic_split(b: &DMatrix<f64>) -> Result<HyperbolicSplit> {
    assert_eq!(b.nrows(), b.ncols(), "split needs a square matrix");
    assert!(b.iter().all(|v| v.is_finite()), "matrix entries must be finite");
    let n = b.nrows();
    let eigenvalues: Vec<Complex<f64>> = b.complex_eigenvalues().iter().copied().collect();
    let min_re_abs = eigenvalues.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    if min_re_abs <= HYPERBOLIC_GAP_TOL {
        return Err(Error::NotHyperbolic { min_re_abs });
    }
    let eps = 0.9 * min_re_abs;

    let (q, t, k) = ordered_real_schur(b)?;
    let p_minus = if k == 0 {
        DMatrix::<f64>::zeros(n, n)
    } else if k == n {
        DMatrix::<f64>::identity(n, n)
    } else {
        // T = [[T11, T12], [0, T22]]; solve T11 Y - Y T22 = -T12; the
        // projector onto the leading (stable) block is Q [[I, -Y],[0,0]] Q^T.
        let t11 = t.view((0, 0), (k, k)).into_owned();
        let t22 = t.view((k, k), (n - k, n - k)).into_owned();
        let t12 = t.view((0, k), (k, n - k)).into_owned();
        let y = solve_sylvester(&t11, &t22, &(-&t12));
        let mut pi = DMatrix::<f64>::zeros(n, n);
        for i in 0..k {
            pi[(i, i)] = 1.0;
        }
        pi.view_mut((0, k), (k, n - k)).copy_from(&(-&y));
        &q * pi * q.transpose()
    };
    let p_plus = DMatrix::<f64>::identity(n, n) - &p_minus;

    let mut split = HyperbolicSplit { b: b.clone(), p_plus, p_minus, eigenvalues, eps, c: 1.0 };
    split.c = calibrate_decay_constant(&split);
    Ok(split)
}

fn calibrate_decay_constant(split: &HyperbolicSplit) -> f64 {
    let eps = split.eps;
    let mut worst: f64 = 0.0;
    for k in 0..=40 {
        // log-spaced |t| from 1e-3/eps up to 50/eps, both signs
        let t = 1e-3 / eps * (50.0 / 1e-3_f64).powf(k as f64 / 40.0);
        for sign in [1.0, -1.0] {
            let e = fundamental_solution(split, sign * t);
            worst = worst.max(opnorm(&e) * (eps * t).exp());
        }
    }
    1.1 * worst.max(1e-12)
}

/// Green kernel of the dichotomy: `e^{Bt} P_-` for `t > 0`, `-e^{Bt} P_+` for
/// `t < 0`, and the one-sided value `P_-` at `t = 0`. Internally the
/// propagation is split and squared on the projected factor so large `|t|`
/// never inflates the complementary (growing) subspace.
pub fn fundamental_solution(split: &HyperbolicSplit, t: f64) -> DMatrix<f64> {
    if t >= 0.0 {
        projected_propagator(split.b(), split.p_minus(), t)
    } else {
        -projected_propagator(split.b(), split.p_plus(), t)
    }
}

fn projected_propagator(b: &DMatrix<f64>, p: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if opnorm(p) == 0.0 {
        return DMatrix::zeros(b.nrows(), b.ncols());
    }
    let norm = one_norm(b) * t.abs();
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let tau = t / 2f64.powi(k as i32);
    // e^{B tau} P decays on the projected subspace; squaring keeps it there
    let mut m = matexp(&(b * tau)) * p;
    for _ in 0..k {
        m = &m * &m;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn matexp_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(matexp(&z), DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn matexp_of_diagonal_exponentiates_entries() {
        let m = DMatrix::from_row_slice(2, 2, &[1.7, 0.0, 0.0, -0.3]);
        let e = matexp(&m);
        assert_relative_eq!(e[(0, 0)], 1.7_f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(e[(1, 1)], (-0.3_f64).exp(), max_relative = 1e-13);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn matexp_of_nilpotent_terminates() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matexp(&m);
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(max_abs_diff(&e, &expect) < 1e-15);
    }

    #[test]
    fn matexp_of_rotation_gives_cosine_sine() {
        let th = 2.3;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, th, -th, 0.0]);
        let e = matexp(&m);
        let expect = DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        assert!(max_abs_diff(&e, &expect) < 1e-13);
    }

    #[test]
    fn matexp_squaring_consistency_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..6);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let whole = matexp(&m);
            let half = matexp(&(&m * 0.5));
            let recomposed = &half * &half;
            let rel = opnorm(&(&whole - &recomposed)) / opnorm(&whole);
            assert!(rel < 1e-12, "relative defect {rel}");
        }
    }

    #[test]
    fn split_of_diagonal_is_trivial() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let s = hyperbolic_split(&b).unwrap();
        let pp = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let pm = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(s.p_plus(), &pp) < 1e-12);
        assert!(max_abs_diff(s.p_minus(), &pm) < 1e-12);
        assert_relative_eq!(s.eps(), 0.9, max_relative = 1e-12);
    }

    #[test]
    fn split_matches_resolvent_formula_on_nonnormal_matrix() {
        // eigenvalues 2 and -1; the spectral projectors have the closed forms
        // (B + I)/3 and (2I - B)/3
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 1.0]);
        let s = hyperbolic_split(&b).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        let pp = (&b + &id) / 3.0;
        let pm = (&id * 2.0 - &b) / 3.0;
        assert!(max_abs_diff(s.p_plus(), &pp) < 1e-10);
        assert!(max_abs_diff(s.p_minus(), &pm) < 1e-10);
        assert!(s.projector_defect() < 1e-10);
    }

    #[test]
    fn zero_eigenvalue_is_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        match hyperbolic_split(&b) {
            Err(Error::NotHyperbolic { .. }) => {}
            other => panic!("expected NotHyperbolic, got {other:?}"),
        }
    }

    #[test]
    fn fundamental_solution_restricts_the_flow() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let s = hyperbolic_split(&b).unwrap();
        let e1 = fundamental_solution(&s, 1.0);
        assert!((e1[(1, 1)] - (-1.0_f64).exp()).abs() < 1e-13);
        assert!(e1[(0, 0)].abs() < 1e-15);
        let em1 = fundamental_solution(&s, -1.0);
        assert!((em1[(0, 0)] + (-2.0_f64).exp()).abs() < 1e-13);
        assert!(em1[(1, 1)].abs() < 1e-15);
        // jump at zero equals the identity: E(0+) - E(0-) = P- + P+
        let jump = fundamental_solution(&s, 0.0) - fundamental_solution(&s, -1e-300);
        assert!(max_abs_diff(&jump, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn decay_bound_holds_on_a_fresh_sample_grid() {
        let b = DMatrix::from_row_slice(3, 3, &[-0.4, 1.0, 0.3, 0.0, 1.2, -0.5, 0.0, 0.0, -2.0]);
        let s = hyperbolic_split(&b).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for k in 0..200 {
            let t = if k < 100 {
                (k as f64 + 0.5) * 0.5 / s.eps()
            } else {
                rng.random_range(-50.0 / s.eps()..50.0 / s.eps())
            };
            let e = fundamental_solution(&s, t);
            let bound = s.decay_constant() * (-s.eps() * t.abs()).exp();
            assert!(
                opnorm(&e) <= bound * (1.0 + 1e-9),
                "bound violated at t = {t}: {} > {bound}",
                opnorm(&e)
            );
        }
    }

    #[test]
    fn kernel_satisfies_the_differential_equation() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 1.0]);
        let s = hyperbolic_split(&b).unwrap();
        let h = 1e-4;
        for &t in &[0.7, 2.0, -0.5, -3.0] {
            let dplus = fundamental_solution(&s, t + h);
            let dminus = fundamental_solution(&s, t - h);
            let cd = (&dplus - &dminus) / (2.0 * h);
            let rhs = &b * fundamental_solution(&s, t);
            assert!(opnorm(&(&cd - &rhs)) < 1e-6 * (1.0 + opnorm(&rhs)), "t = {t}");
        }
    }

    /// Matrix sign-function Newton iteration; an independent route to the
    /// projectors used to cross-check the Schur path.
    fn sign_projector_minus(b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = b.nrows();
        let mut s = b.clone();
        for _ in 0..100 {
            let det = s.determinant().abs();
            let mu = det.powf(-1.0 / n as f64);
            let inv = s.clone().try_inverse().expect("sign iterate invertible");
            let next = (&s * mu + inv / mu) * 0.5;
            if opnorm(&(&next - &s)) < 1e-14 * opnorm(&next) {
                s = next;
                break;
            }
            s = next;
        }
        (DMatrix::identity(n, n) - s) * 0.5
    }

    #[test]
    fn random_similarities_keep_the_projector_algebra() {
        let mut rng = StdRng::seed_from_u64(23);
        let mut tested = 0;
        while tested < 40 {
            let n = rng.random_range(2..7);
            let mut d = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let mag = rng.random_range(0.2..3.0);
                d[(i, i)] = if rng.random_bool(0.5) { mag } else { -mag };
            }
            let x = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let Some(xinv) = x.clone().try_inverse() else { continue };
            if opnorm(&x) * opnorm(&xinv) > 50.0 {
                continue;
            }
            let b = &x * &d * &xinv;
            let s = hyperbolic_split(&b).unwrap();
            assert!(s.projector_defect() < 1e-10, "defect {}", s.projector_defect());
            let oracle = sign_projector_minus(&b);
            assert!(
                max_abs_diff(s.p_minus(), &oracle) < 1e-8,
                "Schur and sign-function projectors disagree"
            );
            tested += 1;
        }
    }

    #[test]
    fn defective_matrices_are_handled() {
        // Jordan block with eigenvalue -1 plus an unstable direction
        let j = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5]);
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.0, 1.0, 0.4, 0.5, 0.0, 1.0]);
        let b = &x * &j * x.clone().try_inverse().unwrap();
        let s = hyperbolic_split(&b).unwrap();
        assert!(s.projector_defect() < 1e-9);
        let oracle = sign_projector_minus(&b);
        assert!(max_abs_diff(s.p_minus(), &oracle) < 1e-8);
    }

    #[test]
    fn complex_pairs_are_split_correctly() {
        // spiral sink plus a real source
        let b = DMatrix::from_row_slice(
            3,
            3,
            &[-0.5, 2.0, 0.3, -2.0, -0.5, 0.1, 0.0, 0.0, 1.5],
        );
        let s = hyperbolic_split(&b).unwrap();
        assert!(s.projector_defect() < 1e-10);
        // trace of a projector equals the dimension of its range
        let tr: f64 = (0..3).map(|i| s.p_minus()[(i, i)]).sum();
        assert_relative_eq!(tr, 2.0, max_relative = 1e-10);
    }
}
