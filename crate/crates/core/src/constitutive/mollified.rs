//! Gaussian-mollified coefficient λ_ε(t) = (G_ε * D)'(t) / t.
//!
//! The dissipation splits into a quadratic `½(ν/k)s²` and pieces supported on
//! `|s| > ū`. Smoothing the quadratic yields `(ν/k)t` exactly, so only the
//! pieces beyond the threshold need quadrature. Both pieces scale with `ν/k`
//! and the GF piece scales with `cF (√k/μ)^m` as well, which means one profile
//! in `t` serves every cell:
//!
//! `λ_ε(t) = (ν/k) · (base(t) + cF (√k/μ)^m · gf(t))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CellLaw, DissipationVariant};
use crate::error::{Error, Result};

/// Ratio between consecutive table nodes beyond the transition band.
const TAIL_RATIO: f64 = 1.004;
const MIN_QUADRATURE_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    /// Mollifier standard deviation, in flux-magnitude units.
    pub epsilon: f64,
    /// Uniform table nodes covering `(0, ū + 2·truncation·ε]`.
    pub table_points: usize,
    /// Kernel half-width in multiples of `epsilon`.
    pub truncation: f64,
    pub variant: DissipationVariant,
    /// Trapezoid nodes across the full kernel window.
    pub quadrature_nodes: usize,
}

impl RegularizationConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            table_points: 512,
            truncation: 6.0,
            variant: DissipationVariant::LimitConsistent,
            quadrature_nodes: 512,
        }
    }

    /// `epsilon = relative · ū`.
    pub fn relative_to_threshold(relative: f64, ubar: f64) -> Self {
        Self::new(relative * ubar)
    }

    pub fn with_variant(mut self, variant: DissipationVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.table_points < 64 {
            return Err(Error::Domain(format!("table_points must be >= 64, got {}", self.table_points)));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::Domain(format!("truncation must be positive, got {}", self.truncation)));
        }
        if self.quadrature_nodes < MIN_QUADRATURE_NODES {
            return Err(Error::Domain(format!(
                "quadrature_nodes must be >= {MIN_QUADRATURE_NODES}, got {}",
                self.quadrature_nodes
            )));
        }
        Ok(())
    }
}

/// Cell-independent factors of λ_ε on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierProfile {
    pub ubar: f64,
    pub m: f64,
    pub reg: RegularizationConfig,
    pub t_grid: Vec<f64>,
    pub base: Vec<f64>,
    pub gf: Vec<f64>,
}

impl MollifierProfile {
    pub fn build(ubar: f64, m: f64, reg: &RegularizationConfig, t_max: f64) -> Result<Self> {
        reg.validate()?;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
        }
        if !(ubar >= 0.0 && ubar.is_finite()) {
            return Err(Error::Domain(format!("threshold must be nonnegative, got {ubar}")));
        }
        if !(m >= 1.0) {
            return Err(Error::Domain(format!("Forchheimer exponent must be >= 1, got {m}")));
        }
        let half_width = reg.truncation * reg.epsilon;
        if t_max <= ubar + half_width {
            return Err(Error::Domain(format!("t_max = {t_max} must exceed ū + truncation·ε = {}", ubar + half_width)));
        }

        let t_grid = table_grid(ubar, half_width, reg.table_points, t_max);
        let quad =
            Quadrature { ubar, eps: reg.epsilon, half_width, step: 2.0 * half_width / reg.quadrature_nodes as f64 };
        let mut base = Vec::with_capacity(t_grid.len());
        let mut gf = Vec::with_capacity(t_grid.len());
        for &t in &t_grid {
            let correction = match reg.variant {
                DissipationVariant::LimitConsistent => 0.0,
                DissipationVariant::PaperLiteral => quad.smoothed_derivative(t, 2.0) / t,
            };
            base.push(1.0 - correction);
            gf.push(quad.smoothed_derivative(t, m + 2.0) / t);
        }
        Ok(Self { ubar, m, reg: *reg, t_grid, base, gf })
    }

    pub fn t_max(&self) -> f64 {
        *self.t_grid.last().expect("profile grid is never empty")
    }

    /// λ_ε for a cell with Darcy coefficient `darcy` and GF prefactor `gf_prefactor`.
    pub fn coefficient(&self, darcy: f64, gf_prefactor: f64, t: f64) -> f64 {
        let at = |i: usize| darcy * (self.base[i] + gf_prefactor * self.gf[i]);
        interpolate(&self.t_grid, at, t, self.m)
    }

    pub fn table(&self, cell: &CellLaw) -> MollifiedLawTable {
        let darcy = cell.darcy();
        let a = cell.gf_prefactor(self.m);
        let lambda_eps = self.base.iter().zip(&self.gf).map(|(b, g)| darcy * (b + a * g)).collect();
        MollifiedLawTable {
            t_grid: self.t_grid.clone(),
            lambda_eps,
            provenance: TableProvenance {
                k: cell.k,
                cf: cell.cf,
                mu: cell.mu,
                nu: cell.nu,
                m: self.m,
                ubar: self.ubar,
                epsilon: self.reg.epsilon,
                variant: self.reg.variant,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableProvenance {
    pub k: f64,
    pub cf: f64,
    pub mu: f64,
    pub nu: f64,
    pub m: f64,
    pub ubar: f64,
    pub epsilon: f64,
    pub variant: DissipationVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifiedLawTable {
    pub t_grid: Vec<f64>,
    pub lambda_eps: Vec<f64>,
    pub provenance: TableProvenance,
}

impl MollifiedLawTable {
    /// Two-column `t,lambda_eps` dump.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,lambda_eps\n");
        for (t, l) in self.t_grid.iter().zip(&self.lambda_eps) {
            out.push_str(&format!("{t:e},{l:e}\n"));
        }
        out
    }
}

pub fn build_mollified_table(
    cell: &CellLaw,
    ubar: f64,
    m: f64,
    reg: &RegularizationConfig,
    t_max: f64,
) -> Result<MollifiedLawTable> {
    Ok(MollifierProfile::build(ubar, m, reg, t_max)?.table(cell))
}

pub fn mollified_coefficient(table: &MollifiedLawTable, t: f64) -> Result<f64> {
    if table.t_grid.is_empty() || table.t_grid.len() != table.lambda_eps.len() {
        return Err(Error::State("mollified table is empty or malformed".into()));
    }
    Ok(interpolate(&table.t_grid, |i| table.lambda_eps[i], t, table.provenance.m))
}

fn interpolate(grid: &[f64], value: impl Fn(usize) -> f64, t: f64, m: f64) -> f64 {
    let last = grid.len() - 1;
    if t <= grid[0] {
        return value(0);
    }
    if t >= grid[last] {
        return value(last) * (t / grid[last]).powf(m);
    }
    let i = grid.partition_point(|&x| x <= t);
    let (t0, t1) = (grid[i - 1], grid[i]);
    let w = (t - t0) / (t1 - t0);
    let (v0, v1) = (value(i - 1), value(i));
    v0 + w * (v1 - v0)
}

fn table_grid(ubar: f64, half_width: f64, points: usize, t_max: f64) -> Vec<f64> {
    let band_end = (ubar + 2.0 * half_width).min(t_max);
    let h = band_end / points as f64;
    let mut grid: Vec<f64> = (1..=points).map(|i| i as f64 * h).collect();
    let mut t = band_end;
    while t < t_max {
        t = (t * TAIL_RATIO).min(t_max);
        grid.push(t);
    }
    grid
}

struct Quadrature {
    ubar: f64,
    eps: f64,
    half_width: f64,
    step: f64,
}

impl Quadrature {
    /// `∫ G_ε'(t−s) P(s) ds` over `|s| > ū` inside the kernel window,
    /// with `P(s) = |s|^p / p`.
    fn smoothed_derivative(&self, t: f64, p: f64) -> f64 {
        let lo = t - self.half_width;
        let hi = t + self.half_width;
        let mut total = 0.0;
        if hi > self.ubar {
            total += self.piece(t, p, lo.max(self.ubar), hi);
        }
        if lo < -self.ubar {
            total += self.piece(t, p, lo, hi.min(-self.ubar));
        }
        total
    }

    /// Composite trapezoid with the leading Euler–Maclaurin endpoint correction.
    fn piece(&self, t: f64, p: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = ((b - a) / self.step).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let f = |s: f64| {
            let (_, g1, _) = gaussian(t - s, self.eps);
            g1 * s.abs().powf(p) / p
        };
        let df = |s: f64| {
            let (_, g1, g2) = gaussian(t - s, self.eps);
            let pw = s.abs().powf(p - 2.0);
            -g2 * pw * s * s / p + g1 * pw * s
        };
        let mut sum = 0.5 * (f(a) + f(b));
        for i in 1..n {
            sum += f(a + i as f64 * h);
        }
        h * sum - h * h / 12.0 * (df(b) - df(a))
    }
}

/// Gaussian density with its first two derivatives.
fn gaussian(x: f64, eps: f64) -> (f64, f64, f64) {
    let e2 = eps * eps;
    let g = (-0.5 * x * x / e2).exp() / (eps * (2.0 * PI).sqrt());
    (g, -x / e2 * g, (x * x / (e2 * e2) - 1.0 / e2) * g)
}
