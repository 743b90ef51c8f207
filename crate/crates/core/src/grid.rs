//! Uniformly sampled vector-valued functions of one real variable.
//!
//! A [`GridFunction`] stores node samples of an `R^n`-valued function on a
//! uniform grid together with an optional sparse table of left limits. The
//! table lets velocity-type data (box forcings, tail cutoffs) represent a
//! genuine jump at a node instead of smearing it over one cell: the function
//! is piecewise linear on each cell, running from the right limit at the left
//! node to the left limit at the right node. All quadrature below is cellwise
//! and therefore exact for that representation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    t0: f64,
    h: f64,
    n: usize,
    /// Node samples, node-major: `data[k*n..(k+1)*n]` is the value at node k.
    /// At a jump node this is the right limit.
    data: Vec<f64>,
    /// Left limits at interior jump nodes, keyed by node index.
    left: BTreeMap<usize, Vec<f64>>,
}

impl GridFunction {
    pub fn new(t0: f64, h: f64, n: usize, data: Vec<f64>) -> Result<Self> {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::GridMismatch(format!("step must be positive, got {h}")));
        }
        if n == 0 {
            return Err(Error::GridMismatch("dimension must be at least 1".into()));
        }
        if data.len() < 2 * n || !data.len().is_multiple_of(n) {
            return Err(Error::GridMismatch(format!(
                "need at least two nodes of dimension {n}, got {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::GridMismatch("samples must be finite".into()));
        }
        Ok(Self { t0, h, n, data, left: BTreeMap::new() })
    }

    /// Samples a scalar function at the nodes of `[t0, t0 + (len-1) h]`.
    pub fn sample_scalar(t0: f64, h: f64, len: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let data = (0..len).map(|k| f(t0 + k as f64 * h)).collect();
        Self::new(t0, h, 1, data).expect("sampled grid is valid")
    }

    /// Samples a vector function at the nodes.
    pub fn sample_vector(t0: f64, h: f64, len: usize, n: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(len * n);
        for k in 0..len {
            let v = f(t0 + k as f64 * h);
            assert_eq!(v.len(), n);
            data.extend_from_slice(&v);
        }
        Self::new(t0, h, n, data).expect("sampled grid is valid")
    }

    pub fn zeros(t0: f64, h: f64, len: usize, n: usize) -> Self {
        Self::new(t0, h, n, vec![0.0; len * n]).expect("zero grid is valid")
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.len() - 1) as f64 * self.h
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    /// Node sample (right limit at a jump node).
    pub fn node(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n..(k + 1) * self.n]
    }

    /// Left limit at node k; equals the sample unless a jump is recorded.
    pub fn left_at(&self, k: usize) -> &[f64] {
        match self.left.get(&k) {
            Some(v) => v,
            None => self.node(k),
        }
    }

    /// Records a jump at interior node k: `value` becomes the left limit,
    /// the stored sample stays the right limit.
    pub fn set_left(&mut self, k: usize, value: Vec<f64>) {
        assert!(k > 0 && k < self.len(), "jump nodes must be interior");
        assert_eq!(value.len(), self.n);
        let differs = value
            .iter()
            .zip(self.node(k))
            .any(|(a, b)| (a - b).abs() > 0.0);
        if differs {
            self.left.insert(k, value);
        } else {
            self.left.remove(&k);
        }
    }

    pub fn jump_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.left.keys().copied()
    }

    pub fn has_jumps(&self) -> bool {
        !self.left.is_empty()
    }

    /// Mean of left and right limits at node k (the quadrature value of a
    /// jump node).
    pub fn node_average(&self, k: usize) -> Vec<f64> {
        let r = self.node(k);
        let l = self.left_at(k);
        r.iter().zip(l).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Index of grid time `t`, if `t` lies on a node of this grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.h;
        let k = x.round();
        if (x - k).abs() <= ALIGN_TOL * (1.0 + x.abs()) && k >= 0.0 && (k as usize) < self.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn compatible(&self, other: &GridFunction) -> Result<()> {
        let same = (self.t0 - other.t0).abs() <= ALIGN_TOL * self.h
            && (self.h - other.h).abs() <= ALIGN_TOL * self.h
            && self.len() == other.len()
            && self.n == other.n;
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}] step {} n {} len {} vs [{}, {}] step {} n {} len {}",
                self.t0,
                self.t_end(),
                self.h,
                self.n,
                self.len(),
                other.t0,
                other.t_end(),
                other.h,
                other.n,
                other.len()
            )))
        }
    }

    /// Value at an arbitrary time, linear interpolation inside the window,
    /// clamped to the end samples outside. At a jump node the stored (right)
    /// sample is returned.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        self.eval_into_vec(t)
    }

    fn eval_into_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let x = (t - self.t0) / self.h;
        if x <= 0.0 {
            out.copy_from_slice(self.node(0));
            return;
        }
        let last = self.len() - 1;
        if x >= last as f64 {
            out.copy_from_slice(self.node(last));
            return;
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        if frac.abs() <= ALIGN_TOL {
            out.copy_from_slice(self.node(k));
            return;
        }
        let a = self.node(k);
        let b = self.left_at(k + 1);
        for i in 0..self.n {
            out[i] = a[i] + frac * (b[i] - a[i]);
        }
    }

    /// Euclidean norm of the value at node k.
    pub fn node_norm(&self, k: usize) -> f64 {
        self.node(k).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sup norm: max over nodes of the Euclidean norm (one-sided values at
    /// jump nodes included).
    pub fn sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.len() {
            m = m.max(self.node_norm(k));
        }
        for v in self.left.values() {
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            m = m.max(s);
        }
        m
    }

    /// Trapezoid L2 norm, cellwise so that one-sided values at jump nodes are
    /// honoured: `sum_cells h/2 (|f_k^+|^2 + |f_{k+1}^-|^2)`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq_from(0).sqrt()
    }

    /// Squared tail L2 norm over `[t_k, t_end]`.
    pub fn l2_norm_sq_from(&self, k0: usize) -> f64 {
        let mut acc = 0.0;
        for k in k0..self.len() - 1 {
            let a = self.node(k);
            let b = self.left_at(k + 1);
            let sa: f64 = a.iter().map(|v| v * v).sum();
            let sb: f64 = b.iter().map(|v| v * v).sum();
            acc += 0.5 * self.h * (sa + sb);
        }
        acc
    }

    /// Cellwise trapezoid integral over the whole window; exact for the
    /// piecewise-linear representation.
    pub fn integral(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for k in 0..self.len() - 1 {
            let a = self.node(k);
            let b = self.left_at(k + 1);
            for i in 0..self.n {
                acc[i] += 0.5 * self.h * (a[i] + b[i]);
            }
        }
        acc
    }

    /// Cumulative integral from the left end; continuous output.
    pub fn cumulative_integral(&self) -> GridFunction {
        let mut data = vec![0.0; self.data.len()];
        let mut acc = vec![0.0; self.n];
        for k in 0..self.len() - 1 {
            let a = self.node(k);
            let b = self.left_at(k + 1);
            for i in 0..self.n {
                acc[i] += 0.5 * self.h * (a[i] + b[i]);
                data[(k + 1) * self.n + i] = acc[i];
            }
        }
        GridFunction { t0: self.t0, h: self.h, n: self.n, data, left: BTreeMap::new() }
    }

    /// Central-difference derivative with second-order one-sided stencils at
    /// the window ends. Jump tables are not consulted; differentiate only
    /// continuous data.
    pub fn derivative(&self) -> GridFunction {
        let len = self.len();
        let n = self.n;
        let mut data = vec![0.0; self.data.len()];
        let inv2h = 1.0 / (2.0 * self.h);
        for k in 1..len - 1 {
            let a = self.node(k - 1);
            let b = self.node(k + 1);
            for i in 0..n {
                data[k * n + i] = (b[i] - a[i]) * inv2h;
            }
        }
        if len >= 3 {
            let (f0, f1, f2) = (self.node(0), self.node(1), self.node(2));
            let (g0, g1, g2) = (self.node(len - 1), self.node(len - 2), self.node(len - 3));
            for i in 0..n {
                data[i] = (-3.0 * f0[i] + 4.0 * f1[i] - f2[i]) * inv2h;
                data[(len - 1) * n + i] = (3.0 * g0[i] - 4.0 * g1[i] + g2[i]) * inv2h;
            }
        } else {
            for i in 0..n {
                let d = (self.node(1)[i] - self.node(0)[i]) / self.h;
                data[i] = d;
                data[n + i] = d;
            }
        }
        GridFunction { t0: self.t0, h: self.h, n, data, left: BTreeMap::new() }
    }

    /// Restriction to the node range `[k0, k1]` (inclusive).
    pub fn restrict(&self, k0: usize, k1: usize) -> GridFunction {
        assert!(k0 < k1 && k1 < self.len());
        let data = self.data[k0 * self.n..(k1 + 1) * self.n].to_vec();
        let mut out = GridFunction {
            t0: self.t(k0),
            h: self.h,
            n: self.n,
            data,
            left: BTreeMap::new(),
        };
        for (&k, v) in &self.left {
            // a jump at the new end node still bounds the last cell
            if k > k0 && k <= k1 {
                out.left.insert(k - k0, v.clone());
            }
        }
        out
    }

    /// Componentwise linear combination `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        self.compatible(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let mut left = BTreeMap::new();
        for k in self.left.keys().chain(other.left.keys()) {
            let a = self.left_at(*k);
            let b = other.left_at(*k);
            left.insert(*k, a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect());
        }
        Ok(GridFunction { t0: self.t0, h: self.h, n: self.n, data, left })
    }

    /// Applies a pointwise map to every stored value (node samples and left
    /// limits alike).
    pub fn map_values(&self, f: impl Fn(&[f64], &mut [f64])) -> GridFunction {
        let mut data = vec![0.0; self.data.len()];
        for k in 0..self.len() {
            let (src, dst) = (self.node(k), &mut data[k * self.n..(k + 1) * self.n]);
            f(src, dst);
        }
        let mut left = BTreeMap::new();
        for (&k, v) in &self.left {
            let mut dst = vec![0.0; self.n];
            f(v, &mut dst);
            left.insert(k, dst);
        }
        GridFunction { t0: self.t0, h: self.h, n: self.n, data, left }
    }

    /// Zeroes every value strictly before node k and records the cutoff jump
    /// at k; the cut is exact for the piecewise-linear representation.
    pub fn cutoff_before(&self, k: usize) -> GridFunction {
        let mut out = self.clone();
        if k == 0 {
            return out;
        }
        assert!(k < self.len());
        for j in 0..k {
            out.node_mut(j).fill(0.0);
        }
        let mut below: Vec<usize> = out.left.range(..k).map(|(j, _)| *j).collect();
        below.push(k);
        for j in below {
            out.left.remove(&j);
        }
        out.set_left(k, vec![0.0; self.n]);
        out
    }
}
