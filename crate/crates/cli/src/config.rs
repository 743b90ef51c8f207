//! Scenario configuration: model, stationary point, asymptotic-state
//! primitives, grid and tolerances.

use anyhow::{bail, Context};
use lamb_core::grid::GridFunction;
use lamb_core::model::ForceModel;
use lamb_core::spaces::AsymptoticState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub model: ModelConfig,
    pub s_plus: Vec<f64>,
    #[serde(default)]
    pub psi: PsiConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory holding `u0.csv` / `v0.csv` (+ optional `limits.json`);
    /// when set, forward runs evolve these data instead of reconstructing
    /// initial data from `psi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_data: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub n: usize,
    /// Zeros of the force; required for the polynomial model only.
    #[serde(default)]
    pub zeros: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PsiConfig {
    #[serde(default)]
    pub psi0: Vec<Primitive>,
    #[serde(default)]
    pub psi1: Vec<Primitive>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(default)]
    pub component: usize,
    pub kind: PrimitiveKind,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimitiveKind {
    /// Constant value; carries the spatial limits.
    Const,
    /// Sharp box over `[center - width/2, center + width/2)`; densities only.
    Box,
    /// Tent of the given total width peaking at `center`.
    Hat,
    /// `amplitude * exp(-((x - center)/width)^2)`.
    Gaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: f64,
    pub t_max: f64,
    /// Half-width of the asymptotic-state window.
    pub l0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    pub tail_eps: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub blowup_guard: f64,
    /// Roundtrip comparison budgets.
    pub roundtrip_s: f64,
    pub roundtrip_psi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let core = lamb_core::SolverConfig::default();
        Tolerances {
            tail_eps: core.tail_eps,
            picard_tol: core.picard_tol,
            picard_max_iter: core.picard_max_iter,
            blowup_guard: core.blowup_guard,
            roundtrip_s: 1e-4,
            roundtrip_psi: 1e-3,
        }
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let g = &self.grid;
        let sane = g.h.is_finite() && g.t_max.is_finite() && g.l0.is_finite();
        if !sane || g.h <= 0.0 || g.t_max <= g.h || g.l0 <= 0.0 {
            bail!("grid parameters must be positive and finite with t_max > h");
        }
        if self.s_plus.len() != self.model.n {
            bail!("s_plus has dimension {}, model expects {}", self.s_plus.len(), self.model.n);
        }
        for p in &self.psi.psi0 {
            if p.kind == PrimitiveKind::Box {
                bail!("psi0 must be continuous; use const, hat or gaussian primitives");
            }
            self.check_primitive(p)?;
        }
        for p in &self.psi.psi1 {
            if p.kind == PrimitiveKind::Const {
                bail!("psi1 primitives must have finite mass; const is not allowed");
            }
            self.check_primitive(p)?;
        }
        self.force_model()?;
        Ok(())
    }

    fn check_primitive(&self, p: &Primitive) -> anyhow::Result<()> {
        if p.component >= self.model.n {
            bail!("primitive component {} out of range for n = {}", p.component, self.model.n);
        }
        let l0 = self.grid.l0;
        let reach = match p.kind {
            PrimitiveKind::Const => 0.0,
            PrimitiveKind::Box | PrimitiveKind::Hat => p.center.abs() + p.width / 2.0,
            PrimitiveKind::Gaussian => p.center.abs() + 4.0 * p.width,
        };
        if p.kind != PrimitiveKind::Const && (!p.width.is_finite() || p.width <= 0.0) {
            bail!("primitive width must be positive");
        }
        if reach > l0 {
            bail!("primitive reaches {reach:.3}, outside the state window l0 = {l0}");
        }
        Ok(())
    }

    pub fn force_model(&self) -> anyhow::Result<ForceModel> {
        let m = &self.model;
        let model = match m.name.as_str() {
            "linear" => {
                let k = if m.params.is_empty() { vec![1.0; m.n] } else { m.params.clone() };
                if k.len() != m.n {
                    bail!("linear model needs {} coefficients, got {}", m.n, k.len());
                }
                ForceModel::Linear { k }
            }
            "cubic-1d" => ForceModel::Cubic1d,
            "double-well-2d" => ForceModel::DoubleWell2d,
            "flat-core" => ForceModel::FlatCore,
            "quadratic-core" => ForceModel::QuadraticCore,
            "polynomial" => {
                if m.zeros.is_empty() {
                    bail!("polynomial model requires its zeros to be listed");
                }
                ForceModel::Polynomial { coeffs: m.params.clone(), zeros: m.zeros.clone() }
            }
            other => bail!("unknown model {other:?}"),
        };
        if model.dim() != m.n {
            bail!("model {} has dimension {}, config says {}", m.name, model.dim(), m.n);
        }
        Ok(model)
    }

    /// Samples the configured primitives into an asymptotic state with exact
    /// one-sided values and analytic limits.
    pub fn asymptotic_state(&self) -> anyhow::Result<AsymptoticState> {
        let n = self.model.n;
        let h = self.grid.h;
        let l0 = snap(self.grid.l0, h);
        let len = 2 * (l0 / h).round() as usize + 1;

        let mut psi0 = GridFunction::zeros(-l0, h, len, n);
        let mut dpsi0 = GridFunction::zeros(-l0, h, len, n);
        let mut psi1 = GridFunction::zeros(-l0, h, len, n);
        for p in &self.psi.psi0 {
            add_primitive(&mut psi0, p, Part::Value);
            add_primitive(&mut dpsi0, p, Part::Derivative);
        }
        for p in &self.psi.psi1 {
            add_primitive(&mut psi1, p, Part::Value);
        }

        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for p in &self.psi.psi0 {
            if p.kind == PrimitiveKind::Const {
                plus[p.component] += p.amplitude;
                minus[p.component] += p.amplitude;
            }
        }
        Ok(AsymptoticState::with_exact_derivative(psi0, psi1, plus, minus, dpsi0)?)
    }

    pub fn solver_config(&self) -> lamb_core::SolverConfig {
        lamb_core::SolverConfig {
            tail_eps: self.tolerances.tail_eps,
            picard_tol: self.tolerances.picard_tol,
            picard_max_iter: self.tolerances.picard_max_iter,
            blowup_guard: self.tolerances.blowup_guard,
            ..lamb_core::SolverConfig::default()
        }
    }
}

fn snap(x: f64, h: f64) -> f64 {
    (x / h).round() * h
}

enum Part {
    Value,
    Derivative,
}

/// Adds a primitive to one component of a grid function. Node samples carry
/// right limits; a one-sided table keeps left limits exact at the nodes where
/// the primitive jumps, and existing jump entries stay consistent when
/// several primitives stack.
fn add_primitive(g: &mut GridFunction, p: &Primitive, part: Part) {
    let i = p.component;
    let half = p.width / 2.0;
    let (lo, hi) = (p.center - half, p.center + half);
    let smooth = |x: f64| -> f64 {
        match (&part, p.kind) {
            (Part::Value, PrimitiveKind::Const) => p.amplitude,
            (Part::Derivative, PrimitiveKind::Const) => 0.0,
            (Part::Value, PrimitiveKind::Hat) => {
                p.amplitude * (1.0 - (x - p.center).abs() / half).max(0.0)
            }
            (Part::Value, PrimitiveKind::Gaussian) => {
                let u = (x - p.center) / p.width;
                p.amplitude * (-u * u).exp()
            }
            (Part::Derivative, PrimitiveKind::Gaussian) => {
                let u = (x - p.center) / p.width;
                -2.0 * u / p.width * p.amplitude * (-u * u).exp()
            }
            _ => f64::NAN, // piecewise kinds handled below
        }
    };
    // right and left limits of this primitive's contribution
    let right = |x: f64| -> f64 {
        match (&part, p.kind) {
            (Part::Value, PrimitiveKind::Box) => {
                if x >= lo && x < hi {
                    p.amplitude
                } else {
                    0.0
                }
            }
            (Part::Derivative, PrimitiveKind::Box) => 0.0,
            (Part::Derivative, PrimitiveKind::Hat) => {
                if x >= lo && x < p.center {
                    p.amplitude / half
                } else if x >= p.center && x < hi {
                    -p.amplitude / half
                } else {
                    0.0
                }
            }
            _ => smooth(x),
        }
    };
    let left = |x: f64| -> f64 {
        match (&part, p.kind) {
            (Part::Value, PrimitiveKind::Box) => {
                if x > lo && x <= hi {
                    p.amplitude
                } else {
                    0.0
                }
            }
            (Part::Derivative, PrimitiveKind::Box) => 0.0,
            (Part::Derivative, PrimitiveKind::Hat) => {
                if x > lo && x <= p.center {
                    p.amplitude / half
                } else if x > p.center && x <= hi {
                    -p.amplitude / half
                } else {
                    0.0
                }
            }
            _ => smooth(x),
        }
    };

    let len = g.len();
    for k in 0..len {
        let x = g.t(k);
        if k > 0 && k < len - 1 {
            // extend the left limit before the sample changes under it
            let mut lv = g.left_at(k).to_vec();
            lv[i] += left(x);
            g.node_mut(k)[i] += right(x);
            g.set_left(k, lv);
        } else {
            g.node_mut(k)[i] += right(x);
        }
    }
}
