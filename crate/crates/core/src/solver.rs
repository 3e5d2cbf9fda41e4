//! Cell-centred two-point flux discretization of
//! `div u = q`, `-grad p + f = Λ(|u|) u` and its Picard iteration.
//!
//! With constant `f` the momentum balance is `Λ u = -grad Φ` for the potential
//! `Φ = p - f·x`, so the linear systems are assembled in `Φ`. The potential is
//! shifted by the mean Dirichlet value before solving, which keeps large
//! hydrostatic offsets out of the unknowns.

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    flux_threshold, DissipationVariant, FluidProperties, MediumFields, MollifierProfile, RegularizationConfig,
};
use crate::error::{Error, Result};
use crate::grid::{cell_flux_magnitude, CellField, FaceField, StructuredGrid2D};
use crate::linalg::{conjugate_gradient, solve_banded, CsrMatrix};

/// Standard gravitational acceleration, m·s⁻².
pub const GRAVITY: f64 = 9.81;

const LINEAR_REL_TOL: f64 = 1e-10;

/// Boundary pressure `p(x, y) = value + gradient · (x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    pub value: f64,
    pub gradient: [f64; 2],
}

impl PressureProfile {
    pub fn constant(value: f64) -> Self {
        Self { value, gradient: [0.0, 0.0] }
    }

    /// Hydrostatic pressure `ρ g (H - y)` of a water column with surface at `y = H`.
    pub fn hydrostatic(rho: f64, surface: f64) -> Self {
        Self { value: rho * GRAVITY * surface, gradient: [0.0, -rho * GRAVITY] }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.value + self.gradient[0] * x[0] + self.gradient[1] * x[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// Normal mass flux, outward-positive.
    Neumann(f64),
    Dirichlet(PressureProfile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: Option<BoundaryCondition>,
    pub right: Option<BoundaryCondition>,
    pub bottom: Option<BoundaryCondition>,
    pub top: Option<BoundaryCondition>,
}

impl BoundarySpec {
    pub fn new(
        left: BoundaryCondition,
        right: BoundaryCondition,
        bottom: BoundaryCondition,
        top: BoundaryCondition,
    ) -> Self {
        Self { left: Some(left), right: Some(right), bottom: Some(bottom), top: Some(top) }
    }

    pub fn uniform(bc: BoundaryCondition) -> Self {
        Self::new(bc, bc, bc, bc)
    }

    pub fn side(&self, side: Side) -> Result<BoundaryCondition> {
        let bc = match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        };
        bc.ok_or_else(|| Error::BoundarySpec(format!("{side:?} boundary has no condition")))
    }

    pub fn has_dirichlet(&self) -> bool {
        [self.left, self.right, self.bottom, self.top]
            .iter()
            .any(|bc| matches!(bc, Some(BoundaryCondition::Dirichlet(_))))
    }
}

/// Constant body force density, Pa·m⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyForce {
    pub f: [f64; 2],
}

impl BodyForce {
    pub fn zero() -> Self {
        Self { f: [0.0, 0.0] }
    }

    /// Gravity `(0, -ρ g)` acting on water of density `rho`.
    pub fn gravity(rho: f64) -> Self {
        Self { f: [0.0, -rho * GRAVITY] }
    }

    fn potential_shift(&self, x: [f64; 2]) -> f64 {
        self.f[0] * x[0] + self.f[1] * x[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowRegime {
    Darcy,
    Forchheimer,
}

impl FlowRegime {
    /// Binary class code: 1 for GF, 0 for Darcy.
    pub fn code(self) -> u8 {
        match self {
            Self::Darcy => 0,
            Self::Forchheimer => 1,
        }
    }
}

struct BoundaryFace {
    side: Side,
    cell: usize,
    center: [f64; 2],
    area: f64,
    half: f64,
    horizontal: bool,
    face: usize,
    outward: f64,
}

fn boundary_faces(grid: &StructuredGrid2D) -> Vec<BoundaryFace> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut faces = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        for (side, i, fi, outward) in [(Side::Left, 0, 0, -1.0), (Side::Right, nx - 1, nx, 1.0)] {
            faces.push(BoundaryFace {
                side,
                cell: j * nx + i,
                center: grid.xface_center(fi, j),
                area: grid.dy,
                half: 0.5 * grid.dx,
                horizontal: true,
                face: grid.xface_index(fi, j),
                outward,
            });
        }
    }
    for i in 0..nx {
        for (side, j, fj, outward) in [(Side::Bottom, 0, 0, -1.0), (Side::Top, ny - 1, ny, 1.0)] {
            faces.push(BoundaryFace {
                side,
                cell: j * nx + i,
                center: grid.yface_center(i, fj),
                area: grid.dx,
                half: 0.5 * grid.dy,
                horizontal: false,
                face: grid.yface_index(i, fj),
                outward,
            });
        }
    }
    faces
}

/// Assembled SPD system in the shifted potential.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    grid: StructuredGrid2D,
    force: BodyForce,
    reference: f64,
}

impl LinearSystem {
    fn ordering(&self) -> (Vec<usize>, usize) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if ny < nx {
            let perm = (0..nx).flat_map(|i| (0..ny).map(move |j| j * nx + i)).collect();
            (perm, ny)
        } else {
            ((0..nx * ny).collect(), nx)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LinearSolverKind {
    /// Banded Cholesky along the shorter grid axis.
    #[default]
    Direct,
    ConjugateGradient,
}

fn check_mobility(grid: &StructuredGrid2D, lambda: &CellField) -> Result<()> {
    if !lambda.matches(grid) {
        return Err(Error::Shape("inverse mobility does not match the grid".into()));
    }
    if let Some(bad) = lambda.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Assembly(format!("inverse mobility must be positive and finite, got {bad}")));
    }
    Ok(())
}

pub fn assemble_linear_system(
    grid: &StructuredGrid2D,
    inverse_mobility: &CellField,
    bcs: &BoundarySpec,
    q: &CellField,
    force: &BodyForce,
) -> Result<LinearSystem> {
    check_mobility(grid, inverse_mobility)?;
    if !q.matches(grid) {
        return Err(Error::Shape("source field does not match the grid".into()));
    }
    let faces = boundary_faces(grid);
    let conditions: Vec<BoundaryCondition> = faces.iter().map(|f| bcs.side(f.side)).collect::<Result<_>>()?;

    let dirichlet: Vec<f64> = faces
        .iter()
        .zip(&conditions)
        .filter_map(|(f, bc)| match bc {
            BoundaryCondition::Dirichlet(p) => Some(p.eval(f.center) - force.potential_shift(f.center)),
            BoundaryCondition::Neumann(_) => None,
        })
        .collect();
    let reference = if dirichlet.is_empty() { 0.0 } else { dirichlet.iter().sum::<f64>() / dirichlet.len() as f64 };

    let (nx, ny, n) = (grid.nx, grid.ny, grid.num_cells());
    let lam = inverse_mobility.values();
    let volume = grid.cell_area();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); n];
    let mut rhs: Vec<f64> = q.iter().map(|q| q * volume).collect();

    let couple = |a: usize, b: usize, t: f64, rows: &mut Vec<Vec<(usize, f64)>>| {
        rows[a].push((a, t));
        rows[a].push((b, -t));
        rows[b].push((b, t));
        rows[b].push((a, -t));
    };
    for j in 0..ny {
        for i in 1..nx {
            let (a, b) = (j * nx + i - 1, j * nx + i);
            couple(a, b, grid.dy / ((lam[a] + lam[b]) * 0.5 * grid.dx), &mut rows);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let (a, b) = (j * nx - nx + i, j * nx + i);
            couple(a, b, grid.dx / ((lam[a] + lam[b]) * 0.5 * grid.dy), &mut rows);
        }
    }

    let mut neumann_total = 0.0;
    let mut neumann_scale = 0.0;
    for (f, bc) in faces.iter().zip(&conditions) {
        match bc {
            BoundaryCondition::Dirichlet(p) => {
                let t = f.area / (lam[f.cell] * f.half);
                let phi = p.eval(f.center) - force.potential_shift(f.center) - reference;
                rows[f.cell].push((f.cell, t));
                rhs[f.cell] += t * phi;
            }
            BoundaryCondition::Neumann(g) => {
                rhs[f.cell] -= g * f.area;
                neumann_total += g * f.area;
                neumann_scale += (g * f.area).abs();
            }
        }
    }

    if dirichlet.is_empty() {
        let source_total: f64 = q.iter().map(|q| q * volume).sum();
        let source_scale: f64 = q.iter().map(|q| (q * volume).abs()).sum();
        let scale = neumann_scale.max(source_scale);
        if (neumann_total - source_total).abs() > 1e-10 * scale {
            return Err(Error::BoundarySpec(format!(
                "pure Neumann problem is incompatible: boundary outflow {neumann_total:e} vs sources {source_total:e}"
            )));
        }
        // fix the free constant by pinning cell 0, keeping the matrix symmetric
        for row in rows.iter_mut().skip(1) {
            row.retain(|e| e.0 != 0);
        }
        rows[0] = vec![(0, 1.0)];
        rhs[0] = 0.0;
    }

    Ok(LinearSystem { matrix: CsrMatrix::from_rows(rows)?, rhs, grid: *grid, force: *force, reference })
}

fn solve_potential(system: &LinearSystem, kind: LinearSolverKind) -> Result<Vec<f64>> {
    match kind {
        LinearSolverKind::Direct => {
            let (perm, band) = system.ordering();
            solve_banded(&system.matrix, &system.rhs, perm, band, LINEAR_REL_TOL)
        }
        LinearSolverKind::ConjugateGradient => {
            let n = system.matrix.dim();
            conjugate_gradient(&system.matrix, &system.rhs, LINEAR_REL_TOL, 20 * n + 100)
        }
    }
}

fn pressure_from_potential(grid: &StructuredGrid2D, force: &BodyForce, reference: f64, phi: &[f64]) -> CellField {
    CellField::from_fn(grid, |i, j| phi[j * grid.nx + i] + reference + force.potential_shift(grid.cell_center(i, j)))
}

/// Solves the assembled system and returns cell pressures.
pub fn solve_linear(system: &LinearSystem, kind: LinearSolverKind) -> Result<CellField> {
    let phi = solve_potential(system, kind)?;
    Ok(pressure_from_potential(&system.grid, &system.force, system.reference, &phi))
}

fn fluxes_from_potential(
    grid: &StructuredGrid2D,
    lam: &[f64],
    bcs: &BoundarySpec,
    force: &BodyForce,
    phi: &[f64],
    reference: f64,
) -> Result<FaceField> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut flux = FaceField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let (a, b) = (j * nx + i - 1, j * nx + i);
            flux.xflux[grid.xface_index(i, j)] = (phi[a] - phi[b]) / ((lam[a] + lam[b]) * 0.5 * grid.dx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let (a, b) = (j * nx - nx + i, j * nx + i);
            flux.yflux[grid.yface_index(i, j)] = (phi[a] - phi[b]) / ((lam[a] + lam[b]) * 0.5 * grid.dy);
        }
    }
    for f in boundary_faces(grid) {
        let normal = match bcs.side(f.side)? {
            BoundaryCondition::Neumann(g) => g,
            BoundaryCondition::Dirichlet(p) => {
                let phi_b = p.eval(f.center) - force.potential_shift(f.center) - reference;
                (phi[f.cell] - phi_b) / (lam[f.cell] * f.half)
            }
        };
        let value = if f.outward > 0.0 { normal } else { -normal };
        if f.horizontal {
            flux.xflux[f.face] = value;
        } else {
            flux.yflux[f.face] = value;
        }
    }
    Ok(flux)
}

/// Face fluxes (x-faces positive in +x, y-faces positive in +y) from cell pressures.
pub fn reconstruct_fluxes(
    pressures: &CellField,
    inverse_mobility: &CellField,
    bcs: &BoundarySpec,
    force: &BodyForce,
    grid: &StructuredGrid2D,
) -> Result<FaceField> {
    check_mobility(grid, inverse_mobility)?;
    if !pressures.matches(grid) {
        return Err(Error::Shape("pressure field does not match the grid".into()));
    }
    let phi: Vec<f64> = (0..grid.num_cells())
        .map(|c| {
            let (i, j) = grid.cell_coords(c);
            pressures[c] - force.potential_shift(grid.cell_center(i, j))
        })
        .collect();
    fluxes_from_potential(grid, inverse_mobility.values(), bcs, force, &phi, 0.0)
}

pub fn classify_cells(magnitude: &CellField, ubar: f64) -> Vec<FlowRegime> {
    magnitude.iter().map(|&t| if t > ubar { FlowRegime::Forchheimer } else { FlowRegime::Darcy }).collect()
}

/// Everything needed for one flow solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowProblem {
    pub grid: StructuredGrid2D,
    pub medium: MediumFields,
    pub fluid: FluidProperties,
    pub bcs: BoundarySpec,
    /// Mass source per unit volume, kg·m⁻³·s⁻¹.
    pub q: CellField,
    pub force: BodyForce,
}

impl FlowProblem {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.fluid.validate()?;
        if !self.medium.k.matches(&self.grid) || !self.q.matches(&self.grid) {
            return Err(Error::Shape("problem fields do not match the grid".into()));
        }
        if !self.force.f.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("body force must be finite".into()));
        }
        Ok(())
    }

    pub fn darcy_coefficients(&self) -> CellField {
        let nu = self.fluid.nu;
        self.medium.k.map(|k| nu / k)
    }
}

/// Mollifier width rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothing {
    /// `ε = factor · ū`.
    RelativeToThreshold(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub smoothing: Smoothing,
    pub table_points: usize,
    pub truncation: f64,
    pub quadrature_nodes: usize,
    pub variant: DissipationVariant,
    pub tol: f64,
    pub max_iter: usize,
    /// Under-relaxation weight in (0, 1].
    pub relaxation: f64,
    pub linear_solver: LinearSolverKind,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let reg = RegularizationConfig::new(1.0);
        Self {
            smoothing: Smoothing::RelativeToThreshold(0.1),
            table_points: reg.table_points,
            truncation: reg.truncation,
            quadrature_nodes: reg.quadrature_nodes,
            variant: reg.variant,
            tol: 1e-6,
            max_iter: 200,
            relaxation: 1.0,
            linear_solver: LinearSolverKind::Direct,
        }
    }
}

impl PicardConfig {
    pub fn regularization(&self, ubar: f64) -> Result<RegularizationConfig> {
        let epsilon = match self.smoothing {
            Smoothing::RelativeToThreshold(r) => r * ubar,
            Smoothing::Absolute(e) => e,
        };
        let reg = RegularizationConfig {
            epsilon,
            table_points: self.table_points,
            truncation: self.truncation,
            variant: self.variant,
            quadrature_nodes: self.quadrature_nodes,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config(format!("relaxation must lie in (0,1], got {}", self.relaxation)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub pressure: CellField,
    pub flux: FaceField,
    pub magnitude: CellField,
    pub labels: Vec<FlowRegime>,
    pub ubar: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max relative cell-magnitude change per Picard step.
    pub residual_history: Vec<f64>,
}

impl FlowSolution {
    pub fn gf_fraction(&self) -> f64 {
        let gf = self.labels.iter().filter(|l| **l == FlowRegime::Forchheimer).count();
        gf as f64 / self.labels.len() as f64
    }
}

struct LinearState {
    phi: Vec<f64>,
    reference: f64,
    flux: FaceField,
}

fn linear_step(problem: &FlowProblem, lambda: &CellField, kind: LinearSolverKind) -> Result<LinearState> {
    let system = assemble_linear_system(&problem.grid, lambda, &problem.bcs, &problem.q, &problem.force)?;
    let phi = solve_potential(&system, kind)?;
    let flux =
        fluxes_from_potential(&problem.grid, lambda.values(), &problem.bcs, &problem.force, &phi, system.reference)?;
    Ok(LinearState { phi, reference: system.reference, flux })
}

/// One linear solve with the Darcy coefficient `ν/k`.
pub fn darcy_solve(problem: &FlowProblem, kind: LinearSolverKind) -> Result<(CellField, FaceField)> {
    problem.validate()?;
    let state = linear_step(problem, &problem.darcy_coefficients(), kind)?;
    let pressure = pressure_from_potential(&problem.grid, &problem.force, state.reference, &state.phi);
    Ok((pressure, state.flux))
}

fn relative_change(old: &CellField, new: &CellField, floor: f64) -> f64 {
    old.iter()
        .zip(new.iter())
        .map(|(&a, &b)| {
            let diff = (b - a).abs();
            let scale = a.abs().max(b.abs());
            if scale < floor {
                diff
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}

fn diverging(history: &[f64]) -> bool {
    const WINDOW: usize = 10;
    if history.len() <= WINDOW {
        return false;
    }
    let tail = &history[history.len() - WINDOW - 1..];
    tail.windows(2).all(|w| w[1] > w[0]) && tail[WINDOW] >= 10.0 * tail[0]
}

/// Explicit fixed-point iteration for the regularized law, started from Darcy.
pub fn picard_solve(problem: &FlowProblem, cfg: &PicardConfig) -> Result<FlowSolution> {
    problem.validate()?;
    cfg.validate()?;
    let grid = &problem.grid;
    let m = problem.medium.m;
    let ubar = flux_threshold(&problem.medium, &problem.fluid)?;
    let reg = cfg.regularization(ubar)?;

    let darcy = problem.darcy_coefficients();
    let mut state = linear_step(problem, &darcy, cfg.linear_solver)?;
    let mut magnitude = cell_flux_magnitude(&state.flux, grid)?;

    let t_max = (ubar + 2.0 * reg.truncation * reg.epsilon).max(4.0 * magnitude.max());
    let profile = MollifierProfile::build(ubar, m, &reg, t_max)?;
    let prefactor: Vec<f64> =
        (0..grid.num_cells()).map(|c| problem.medium.cell(c, &problem.fluid).gf_prefactor(m)).collect();

    let floor = 1e-14 * ubar;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let lambda = CellField::from_vec(
            grid,
            (0..grid.num_cells()).map(|c| profile.coefficient(darcy[c], prefactor[c], magnitude[c])).collect(),
        )?;
        let mut next = linear_step(problem, &lambda, cfg.linear_solver)?;
        if cfg.relaxation < 1.0 {
            let w = cfg.relaxation;
            let blend = |new: &mut [f64], old: &[f64]| {
                new.iter_mut().zip(old).for_each(|(n, o)| *n = w * *n + (1.0 - w) * o);
            };
            let old_phi: Vec<f64> = state.phi.iter().map(|p| p + state.reference - next.reference).collect();
            blend(&mut next.phi, &old_phi);
            blend(&mut next.flux.xflux, &state.flux.xflux);
            blend(&mut next.flux.yflux, &state.flux.yflux);
        }
        let next_magnitude = cell_flux_magnitude(&next.flux, grid)?;
        let change = relative_change(&magnitude, &next_magnitude, floor);
        history.push(change);
        state = next;
        magnitude = next_magnitude;
        if !change.is_finite() || !magnitude.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence("non-finite flux in Picard iteration".into()));
        }
        if change <= cfg.tol {
            converged = true;
            break;
        }
        if diverging(&history) {
            return Err(Error::Divergence(format!(
                "Picard increments grew from {:e} to {change:e} over 10 iterations",
                history[history.len() - 11]
            )));
        }
    }

    let labels = classify_cells(&magnitude, ubar);
    Ok(FlowSolution {
        pressure: pressure_from_potential(grid, &problem.force, state.reference, &state.phi),
        flux: state.flux,
        magnitude,
        labels,
        ubar,
        iterations: history.len(),
        converged,
        residual_history: history,
    })
}

/// Per-cell `div u - q`, kg·m⁻³·s⁻¹.
pub fn mass_residual(flux: &FaceField, q: &CellField, grid: &StructuredGrid2D) -> Result<CellField> {
    flux.check(grid)?;
    if !q.matches(grid) {
        return Err(Error::Shape("source field does not match the grid".into()));
    }
    Ok(CellField::from_fn(grid, |i, j| {
        let div = (flux.xflux[grid.xface_index(i + 1, j)] - flux.xflux[grid.xface_index(i, j)]) / grid.dx
            + (flux.yflux[grid.yface_index(i, j + 1)] - flux.yflux[grid.yface_index(i, j)]) / grid.dy;
        div - q.get(i, j)
    }))
}

/// Labels as a plain PGM (P2) image: 0 = GF, 255 = Darcy, top grid row first.
pub fn labels_to_pgm(labels: &[FlowRegime], grid: &StructuredGrid2D) -> Result<String> {
    if labels.len() != grid.num_cells() {
        return Err(Error::Shape(format!("{} labels for {} cells", labels.len(), grid.num_cells())));
    }
    let mut out = format!("P2\n{} {}\n255\n", grid.nx, grid.ny);
    for j in (0..grid.ny).rev() {
        let row: Vec<&str> = (0..grid.nx)
            .map(|i| match labels[j * grid.nx + i] {
                FlowRegime::Forchheimer => "0",
                FlowRegime::Darcy => "255",
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dirichlet(p: f64) -> BoundaryCondition {
        BoundaryCondition::Dirichlet(PressureProfile::constant(p))
    }

    const NOFLOW: BoundaryCondition = BoundaryCondition::Neumann(0.0);

    fn column(nx: usize, ny: usize, u0: f64, k: f64) -> FlowProblem {
        let grid = StructuredGrid2D::covering(nx, ny, 1.0, 1.0).unwrap();
        let fluid = FluidProperties::water();
        FlowProblem {
            medium: MediumFields {
                k: CellField::constant(&grid, k),
                phi: CellField::constant(&grid, 0.35),
                cf: CellField::constant(&grid, 0.5),
                m: 1.0,
                delta: 0.1,
            },
            fluid,
            bcs: BoundarySpec::new(
                NOFLOW,
                NOFLOW,
                BoundaryCondition::Dirichlet(PressureProfile::hydrostatic(fluid.rho, 1.0)),
                BoundaryCondition::Neumann(-u0),
            ),
            q: CellField::zeros(&grid),
            force: BodyForce::gravity(fluid.rho),
            grid,
        }
    }

    #[test]
    fn two_cell_dirichlet_is_linear_interpolant() {
        let grid = StructuredGrid2D::new(2, 1, 1.0, 1.0).unwrap();
        let lam = CellField::constant(&grid, 3.0);
        let bcs = BoundarySpec::new(dirichlet(1.0), dirichlet(0.0), NOFLOW, NOFLOW);
        let sys = assemble_linear_system(&grid, &lam, &bcs, &CellField::zeros(&grid), &BodyForce::zero()).unwrap();
        let p = solve_linear(&sys, LinearSolverKind::Direct).unwrap();
        // boundary values sit on the faces x = 0 and x = 2, cell centres at 0.5 and 1.5
        assert!((p[0] - 0.75).abs() < 1e-14);
        assert!((p[1] - 0.25).abs() < 1e-14);
        let pcg = solve_linear(&sys, LinearSolverKind::ConjugateGradient).unwrap();
        assert!((pcg[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn matrix_structure() {
        let grid = StructuredGrid2D::new(5, 4, 0.3, 0.2).unwrap();
        let lam = CellField::from_fn(&grid, |i, j| 1.0 + (i * j) as f64);
        let bcs = BoundarySpec::new(dirichlet(2.0), NOFLOW, dirichlet(1.0), BoundaryCondition::Neumann(0.1));
        let sys =
            assemble_linear_system(&grid, &lam, &bcs, &CellField::zeros(&grid), &BodyForce::gravity(1000.0)).unwrap();
        assert!(sys.matrix.is_symmetric(1e-14));
        for r in 0..sys.matrix.dim() {
            for (c, v) in sys.matrix.row(r) {
                if c != r {
                    assert!(v <= 0.0);
                }
            }
        }
    }

    #[test]
    fn neumann_compatibility() {
        let grid = StructuredGrid2D::new(3, 3, 1.0, 1.0).unwrap();
        let lam = CellField::constant(&grid, 1.0);
        let out = BoundarySpec::uniform(BoundaryCondition::Neumann(1.0));
        let q0 = CellField::zeros(&grid);
        assert!(matches!(
            assemble_linear_system(&grid, &lam, &out, &q0, &BodyForce::zero()),
            Err(Error::BoundarySpec(_))
        ));
        // 12 boundary faces of unit area drain what 9 cells produce
        let q = CellField::constant(&grid, 12.0 / 9.0);
        let sys = assemble_linear_system(&grid, &lam, &out, &q, &BodyForce::zero()).unwrap();
        let p = solve_linear(&sys, LinearSolverKind::Direct).unwrap();
        let flux = reconstruct_fluxes(&p, &lam, &out, &BodyForce::zero(), &grid).unwrap();
        let res = mass_residual(&flux, &q, &grid).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn missing_side_and_bad_mobility() {
        let grid = StructuredGrid2D::new(2, 2, 1.0, 1.0).unwrap();
        let mut bcs = BoundarySpec::uniform(dirichlet(0.0));
        bcs.top = None;
        let q = CellField::zeros(&grid);
        let lam = CellField::constant(&grid, 1.0);
        assert!(matches!(
            assemble_linear_system(&grid, &lam, &bcs, &q, &BodyForce::zero()),
            Err(Error::BoundarySpec(_))
        ));
        let bad = CellField::constant(&grid, 0.0);
        assert!(matches!(
            assemble_linear_system(&grid, &bad, &BoundarySpec::uniform(dirichlet(0.0)), &q, &BodyForce::zero()),
            Err(Error::Assembly(_))
        ));
    }

    #[test]
    fn flux_reconstruction_examples() {
        let grid = StructuredGrid2D::new(6, 3, 0.5, 1.0).unwrap();
        let lam = CellField::constant(&grid, 2.0);
        let bcs = BoundarySpec::uniform(dirichlet(5.0));
        let p = CellField::constant(&grid, 5.0);
        let flux = reconstruct_fluxes(&p, &lam, &bcs, &BodyForce::zero(), &grid).unwrap();
        assert!(flux.xflux.iter().chain(&flux.yflux).all(|u| *u == 0.0));

        // linear drop from 3 to 0 over 3 m: u = (3/3)/Λ = 0.5
        let bcs = BoundarySpec::new(dirichlet(3.0), dirichlet(0.0), NOFLOW, BoundaryCondition::Neumann(0.0));
        let p = CellField::from_fn(&grid, |i, _| 3.0 - grid.cell_center(i, 0)[0]);
        let flux = reconstruct_fluxes(&p, &lam, &bcs, &BodyForce::zero(), &grid).unwrap();
        assert!(flux.xflux.iter().all(|u| (u - 0.5).abs() < 1e-14));

        let g = 0.123456789;
        let bcs = BoundarySpec::new(dirichlet(1.0), NOFLOW, NOFLOW, BoundaryCondition::Neumann(g));
        let flux = reconstruct_fluxes(&p, &lam, &bcs, &BodyForce::zero(), &grid).unwrap();
        for i in 0..grid.nx {
            assert_eq!(flux.yflux[grid.yface_index(i, grid.ny)], g);
        }
    }

    #[test]
    fn darcy_regime_column() {
        let problem = column(4, 20, 1.0, 1e-9);
        let sol = picard_solve(&problem, &PicardConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.labels.iter().all(|l| *l == FlowRegime::Darcy));
        assert!(sol.flux.yflux.iter().all(|u| (u + 1.0).abs() <= 1e-10));
        assert!(sol.flux.xflux.iter().all(|u| u.abs() <= 1e-10));
        let res = mass_residual(&sol.flux, &problem.q, &problem.grid).unwrap();
        assert!(res.iter().all(|r| r.abs() <= 1e-10));
    }

    #[test]
    fn near_unit_tolerance_reduces_to_darcy() {
        let mut problem = column(5, 8, 3.0, 1e-9);
        problem.medium.delta = 0.999999;
        let sol = picard_solve(&problem, &PicardConfig::default()).unwrap();
        assert!(sol.converged && sol.iterations <= 2);
        assert!(sol.labels.iter().all(|l| *l == FlowRegime::Darcy));
        let (p, flux) = darcy_solve(&problem, LinearSolverKind::Direct).unwrap();
        for (a, b) in sol.pressure.iter().zip(p.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        for (a, b) in sol.flux.yflux.iter().zip(&flux.yflux) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn fast_column_is_all_forchheimer() {
        let problem = column(3, 12, 60.0, 1e-9);
        let sol = picard_solve(&problem, &PicardConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.labels.iter().all(|l| *l == FlowRegime::Forchheimer));
        let tail = &sol.residual_history[sol.residual_history.len().saturating_sub(5)..];
        assert!(tail.windows(2).all(|w| w[1] <= 2.0 * w[0]));
    }

    #[test]
    fn relaxation_reaches_same_state() {
        let problem = column(3, 12, 60.0, 1e-9);
        let plain = picard_solve(&problem, &PicardConfig::default()).unwrap();
        let damped = picard_solve(&problem, &PicardConfig { relaxation: 0.7, ..Default::default() }).unwrap();
        assert!(damped.converged);
        for (a, b) in plain.magnitude.iter().zip(damped.magnitude.iter()) {
            assert!((a - b).abs() <= 1e-5 * a);
        }
    }

    #[test]
    fn classify_examples() {
        let grid = StructuredGrid2D::new(3, 1, 1.0, 1.0).unwrap();
        let mags = CellField::from_vec(&grid, vec![0.5, 2.0, 1.0]).unwrap();
        assert_eq!(classify_cells(&mags, 1.0), vec![FlowRegime::Darcy, FlowRegime::Forchheimer, FlowRegime::Darcy]);
        assert!(classify_cells(&CellField::zeros(&grid), 0.0).iter().all(|l| *l == FlowRegime::Darcy));
    }

    #[test]
    fn residual_locality() {
        let grid = StructuredGrid2D::new(4, 3, 1.0, 1.0).unwrap();
        let q = CellField::zeros(&grid);
        let mut flux = FaceField::uniform(&grid, 1.0, -2.0);
        let base = mass_residual(&flux, &q, &grid).unwrap();
        assert!(base.iter().all(|r| *r == 0.0));
        flux.xflux[grid.xface_index(2, 1)] += 1.0;
        let res = mass_residual(&flux, &q, &grid).unwrap();
        let changed: Vec<usize> = (0..grid.num_cells()).filter(|&c| res[c] != 0.0).collect();
        assert_eq!(changed, vec![grid.cell_index(1, 1).unwrap(), grid.cell_index(2, 1).unwrap()]);
    }

    #[test]
    fn pgm_layout() {
        let grid = StructuredGrid2D::new(2, 2, 1.0, 1.0).unwrap();
        let labels = [FlowRegime::Forchheimer, FlowRegime::Darcy, FlowRegime::Darcy, FlowRegime::Darcy];
        assert_eq!(labels_to_pgm(&labels, &grid).unwrap(), "P2\n2 2\n255\n255 255\n0 255\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn linear_solves_conserve_mass(
            seed in proptest::collection::vec(0.1f64..10.0, 35),
            top in -5.0f64..5.0, pleft in 0.0f64..100.0, q0 in -1.0f64..1.0,
        ) {
            let grid = StructuredGrid2D::new(7, 5, 0.2, 0.3).unwrap();
            let lam = CellField::from_vec(&grid, seed).unwrap();
            let q = CellField::from_fn(&grid, |i, j| if (i + j) % 3 == 0 { q0 } else { 0.0 });
            let bcs = BoundarySpec::new(dirichlet(pleft), NOFLOW, dirichlet(0.0), BoundaryCondition::Neumann(top));
            let force = BodyForce::gravity(1000.0);
            let sys = assemble_linear_system(&grid, &lam, &bcs, &q, &force).unwrap();
            let p = solve_linear(&sys, LinearSolverKind::Direct).unwrap();
            let flux = reconstruct_fluxes(&p, &lam, &bcs, &force, &grid).unwrap();
            let res = mass_residual(&flux, &q, &grid).unwrap();
            let scale = flux.xflux.iter().chain(&flux.yflux).fold(0.0f64, |a, b| a.max(b.abs())) / 0.2 + q0.abs();
            prop_assert!(res.iter().all(|r| r.abs() <= 1e-8 * scale.max(1e-300)));
        }

        #[test]
        fn stored_labels_match_magnitudes(u0 in 0.5f64..40.0) {
            let problem = column(2, 6, u0, 1e-9);
            let cfg = PicardConfig { table_points: 64, quadrature_nodes: 256, ..Default::default() };
            let sol = picard_solve(&problem, &cfg).unwrap();
            prop_assert_eq!(classify_cells(&sol.magnitude, sol.ubar), sol.labels);
        }
    }
}
