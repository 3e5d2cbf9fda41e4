//! The two benchmark configurations: a landfill cross-section with highly
//! permeable channels, and a horizontal reservoir layer with one injector and
//! four producers.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constitutive::{kozeny_carman, FluidProperties, MediumFields, KC_PHI_REF};
use crate::error::{Error, Result};
use crate::grid::{CellField, StructuredGrid2D};
use crate::solver::{BodyForce, BoundaryCondition, BoundarySpec, FlowProblem, PressureProfile, GRAVITY};

/// Channel geometry files are written for a square mesh of this many cells per side.
pub const CHANNEL_REFERENCE_CELLS: f64 = 50.0;

const CHANNELS_2: &str = include_str!("../data/channels_2.txt");
const CHANNELS_7: &str = include_str!("../data/channels_7.txt");

pub const SPE10_NX: usize = 60;
pub const SPE10_NY: usize = 220;
pub const SPE10_DX: f64 = 6.096;
pub const SPE10_DY: f64 = 3.048;
pub const SPE10_THICKNESS: f64 = 0.6096;
pub const SPE10_DEPTH: f64 = 21.336;

/// A straight strip of cells around the segment `(x0,y0)-(x1,y1)`, in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStrip {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub width: f64,
}

impl ChannelStrip {
    fn distance(&self, px: f64, py: f64) -> f64 {
        let (dx, dy) = (self.x1 - self.x0, self.y1 - self.y0);
        let len2 = dx * dx + dy * dy;
        let s = if len2 == 0.0 { 0.0 } else { (((px - self.x0) * dx + (py - self.y0) * dy) / len2).clamp(0.0, 1.0) };
        (px - self.x0 - s * dx).hypot(py - self.y0 - s * dy)
    }

    /// Cells whose centre lies within half the width of the segment.
    pub fn mask(&self, grid: &StructuredGrid2D) -> Vec<bool> {
        let half = 0.5 * self.width + 1e-9;
        (0..grid.num_cells())
            .map(|c| {
                let (i, j) = grid.cell_coords(c);
                self.distance(i as f64 + 0.5, j as f64 + 0.5) <= half
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    pub strips: Vec<ChannelStrip>,
}

impl ChannelGeometry {
    /// Parses `x0 y0 x1 y1 width` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut strips = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("geometry line {}: {e}", n + 1)))?;
            if vals.len() != 5 {
                return Err(Error::Format(format!("geometry line {}: expected 5 values, got {}", n + 1, vals.len())));
            }
            if !(vals[4] > 0.0) {
                return Err(Error::Format(format!("geometry line {}: width must be positive", n + 1)));
            }
            strips.push(ChannelStrip { x0: vals[0], y0: vals[1], x1: vals[2], y1: vals[3], width: vals[4] });
        }
        Ok(Self { strips })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Maps reference-mesh coordinates onto `grid`; widths scale with the finer axis and stay ≥ 1 cell.
    pub fn scaled_to(&self, grid: &StructuredGrid2D) -> Self {
        let sx = grid.nx as f64 / CHANNEL_REFERENCE_CELLS;
        let sy = grid.ny as f64 / CHANNEL_REFERENCE_CELLS;
        let sw = sx.min(sy);
        let strips = self
            .strips
            .iter()
            .map(|s| ChannelStrip {
                x0: s.x0 * sx,
                y0: s.y0 * sy,
                x1: s.x1 * sx,
                y1: s.y1 * sy,
                width: (s.width * sw).round().max(1.0),
            })
            .collect();
        Self { strips }
    }

    pub fn validate(&self, grid: &StructuredGrid2D) -> Result<()> {
        let (w, h) = (grid.nx as f64, grid.ny as f64);
        for s in &self.strips {
            let inside = |x: f64, y: f64| (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
            if !inside(s.x0, s.y0) || !inside(s.x1, s.y1) {
                return Err(Error::Config(format!("channel {s:?} leaves the {}x{} grid", grid.nx, grid.ny)));
            }
        }
        Ok(())
    }

    pub fn masks(&self, grid: &StructuredGrid2D) -> Vec<Vec<bool>> {
        self.strips.iter().map(|s| s.mask(grid)).collect()
    }
}

/// Shipped layout for 2 or 7 channels, scaled to `grid`.
pub fn default_channel_geometry(n_channels: usize, grid: &StructuredGrid2D) -> Result<ChannelGeometry> {
    let text = match n_channels {
        2 => CHANNELS_2,
        7 => CHANNELS_7,
        n => return Err(Error::Config(format!("no default layout for {n} channels (use 2 or 7)"))),
    };
    Ok(ChannelGeometry::parse(text)?.scaled_to(grid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandfillConfig {
    pub n_channels: usize,
    pub channel_porosities: Vec<f64>,
    /// Influx through the top boundary, kg·m⁻²·s⁻¹.
    pub u0: f64,
    pub background_phi: f64,
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub fluid: FluidProperties,
    pub cf: f64,
    pub m: f64,
    pub delta: f64,
    /// Overrides the shipped layout; given in reference-mesh cell units.
    pub geometry: Option<ChannelGeometry>,
}

impl Default for LandfillConfig {
    fn default() -> Self {
        Self {
            n_channels: 2,
            channel_porosities: vec![0.9528, 0.9719],
            u0: 0.01224,
            background_phi: KC_PHI_REF,
            nx: 50,
            ny: 50,
            width: 1.0,
            height: 1.0,
            fluid: FluidProperties::water(),
            cf: 0.8091,
            m: 2.225,
            delta: 0.08302,
            geometry: None,
        }
    }
}

pub fn build_landfill(cfg: &LandfillConfig) -> Result<FlowProblem> {
    if cfg.channel_porosities.len() != cfg.n_channels {
        return Err(Error::Config(format!(
            "{} channel porosities given for {} channels",
            cfg.channel_porosities.len(),
            cfg.n_channels
        )));
    }
    let grid = StructuredGrid2D::covering(cfg.nx, cfg.ny, cfg.width, cfg.height)?;
    let geometry = match &cfg.geometry {
        Some(g) => g.scaled_to(&grid),
        None => default_channel_geometry(cfg.n_channels, &grid)?,
    };
    if geometry.strips.len() != cfg.n_channels {
        return Err(Error::Config(format!(
            "geometry has {} strips for {} channels",
            geometry.strips.len(),
            cfg.n_channels
        )));
    }
    geometry.validate(&grid)?;

    let mut phi = vec![cfg.background_phi; grid.num_cells()];
    for (mask, &p) in geometry.masks(&grid).iter().zip(&cfg.channel_porosities) {
        for (cell, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            phi[cell] = if phi[cell] == cfg.background_phi { p } else { phi[cell].max(p) };
        }
    }
    let k = phi.iter().map(|&p| kozeny_carman(p)).collect::<Result<Vec<f64>>>()?;
    let medium = MediumFields {
        k: CellField::from_vec(&grid, k)?,
        phi: CellField::from_vec(&grid, phi)?,
        cf: CellField::constant(&grid, cfg.cf),
        m: cfg.m,
        delta: cfg.delta,
    };
    let noflow = BoundaryCondition::Neumann(0.0);
    let problem = FlowProblem {
        bcs: BoundarySpec::new(
            noflow,
            noflow,
            BoundaryCondition::Dirichlet(PressureProfile::hydrostatic(cfg.fluid.rho, cfg.height)),
            BoundaryCondition::Neumann(-cfg.u0),
        ),
        q: CellField::zeros(&grid),
        force: BodyForce::gravity(cfg.fluid.rho),
        medium,
        fluid: cfg.fluid,
        grid,
    };
    problem.validate()?;
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PermeabilitySource {
    /// Whitespace-separated 60×220 field, m²; coarsened by block geometric means on smaller meshes.
    File(PathBuf),
    Synthetic {
        seed: u64,
        log_mean: f64,
        log_std: f64,
    },
}

impl Default for PermeabilitySource {
    fn default() -> Self {
        Self::Synthetic { seed: 35, log_mean: (2e-13f64).ln(), log_std: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spe10Config {
    /// Injection rate, kg·s⁻¹.
    pub q_rate: f64,
    pub permeability: PermeabilitySource,
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub thickness: f64,
    pub depth: f64,
    pub fluid: FluidProperties,
    pub cf: f64,
    pub m: f64,
    pub delta: f64,
}

impl Default for Spe10Config {
    fn default() -> Self {
        Self {
            q_rate: 92.975,
            permeability: PermeabilitySource::default(),
            nx: SPE10_NX,
            ny: SPE10_NY,
            width: SPE10_NX as f64 * SPE10_DX,
            height: SPE10_NY as f64 * SPE10_DY,
            thickness: SPE10_THICKNESS,
            depth: SPE10_DEPTH,
            fluid: FluidProperties::water(),
            cf: 0.45635,
            m: 1.0,
            delta: 0.054017,
        }
    }
}

impl Spe10Config {
    pub fn center_cell(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }

    pub fn permeability_field(&self, grid: &StructuredGrid2D) -> Result<CellField> {
        match &self.permeability {
            PermeabilitySource::Synthetic { seed, log_mean, log_std } => {
                synthetic_permeability(grid, *seed, *log_mean, *log_std)
            }
            PermeabilitySource::File(path) => {
                let full = load_spe10_permeability(path)?;
                if grid.nx == SPE10_NX && grid.ny == SPE10_NY {
                    Ok(full)
                } else {
                    coarsen_geometric(&full, grid)
                }
            }
        }
    }
}

pub fn build_spe10(cfg: &Spe10Config) -> Result<FlowProblem> {
    let grid = StructuredGrid2D::covering(cfg.nx, cfg.ny, cfg.width, cfg.height)?;
    if !(cfg.thickness > 0.0) {
        return Err(Error::Config(format!("layer thickness must be positive, got {}", cfg.thickness)));
    }
    let k = cfg.permeability_field(&grid)?;
    let volume = grid.cell_area() * cfg.thickness;
    let mut q = CellField::zeros(&grid);
    let (ci, cj) = cfg.center_cell();
    q[grid.cell_index(ci, cj)?] += cfg.q_rate / volume;
    for (i, j) in [(0, 0), (cfg.nx - 1, 0), (0, cfg.ny - 1), (cfg.nx - 1, cfg.ny - 1)] {
        q[grid.cell_index(i, j)?] -= 0.25 * cfg.q_rate / volume;
    }
    let medium = MediumFields {
        phi: CellField::constant(&grid, 0.2),
        cf: CellField::constant(&grid, cfg.cf),
        k,
        m: cfg.m,
        delta: cfg.delta,
    };
    let pressure = cfg.fluid.rho * GRAVITY * cfg.depth;
    let problem = FlowProblem {
        bcs: BoundarySpec::uniform(BoundaryCondition::Dirichlet(PressureProfile::constant(pressure))),
        q,
        force: BodyForce::zero(),
        medium,
        fluid: cfg.fluid,
        grid,
    };
    problem.validate()?;
    Ok(problem)
}

/// Reads an `nx·ny` row-major field of positive permeabilities.
pub fn load_permeability(path: impl AsRef<Path>, nx: usize, ny: usize) -> Result<CellField> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("bad permeability value {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if values.len() != nx * ny {
        return Err(Error::Format(format!("expected {} permeability values, found {}", nx * ny, values.len())));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Data(format!("permeability must be positive, found {bad}")));
    }
    CellField::from_vec(&StructuredGrid2D::new(nx, ny, 1.0, 1.0)?, values)
}

pub fn load_spe10_permeability(path: impl AsRef<Path>) -> Result<CellField> {
    load_permeability(path, SPE10_NX, SPE10_NY)
}

/// Block geometric mean of a fine field onto `grid`; dimensions must divide evenly.
pub fn coarsen_geometric(fine: &CellField, grid: &StructuredGrid2D) -> Result<CellField> {
    let (fx, fy) = fine.dims();
    if fx % grid.nx != 0 || fy % grid.ny != 0 {
        return Err(Error::Config(format!("cannot coarsen a {fx}x{fy} field onto {}x{} cells", grid.nx, grid.ny)));
    }
    let (bx, by) = (fx / grid.nx, fy / grid.ny);
    Ok(CellField::from_fn(grid, |i, j| {
        let mut s = 0.0;
        for jj in j * by..(j + 1) * by {
            for ii in i * bx..(i + 1) * bx {
                s += fine.get(ii, jj).ln();
            }
        }
        (s / (bx * by) as f64).exp()
    }))
}

/// Lognormal field smoothed once by a 3×3 box filter in log space.
pub fn synthetic_permeability(grid: &StructuredGrid2D, seed: u64, log_mean: f64, log_std: f64) -> Result<CellField> {
    if !(log_std >= 0.0) {
        return Err(Error::Domain(format!("log_std must be nonnegative, got {log_std}")));
    }
    if log_std == 0.0 {
        return Ok(CellField::constant(grid, log_mean.exp()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..grid.num_cells())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_mean + log_std * z
        })
        .collect();
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    Ok(CellField::from_fn(grid, |i, j| {
        let (mut s, mut n) = (0.0, 0.0);
        for dj in -1..=1 {
            for di in -1..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if (0..nx).contains(&a) && (0..ny).contains(&b) {
                    s += raw[(b * nx + a) as usize];
                    n += 1.0;
                }
            }
        }
        (s / n).exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{picard_solve, PicardConfig};
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn two_channel_layout() {
        let cfg = LandfillConfig::default();
        let p = build_landfill(&cfg).unwrap();
        let geom = default_channel_geometry(2, &p.grid).unwrap();
        assert_eq!(geom.strips.len(), 2);
        for (mask, &phi) in geom.masks(&p.grid).iter().zip(&cfg.channel_porosities) {
            assert_eq!(mask.iter().filter(|m| **m).count(), 2 * p.grid.ny);
            for j in 0..p.grid.ny {
                assert_eq!((0..p.grid.nx).filter(|&i| mask[j * p.grid.nx + i]).count(), 2);
            }
            let k = kozeny_carman(phi).unwrap();
            for (c, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
                assert_eq!(p.medium.k[c], k);
            }
        }
        let background = p.medium.phi.iter().position(|&v| v == 0.35).unwrap();
        assert_eq!(p.medium.k[background], 1.01e-9);
    }

    fn intersections(geom: &ChannelGeometry, grid: &StructuredGrid2D) -> usize {
        let masks = geom.masks(grid);
        let mut n = 0;
        for a in 0..masks.len() {
            for b in a + 1..masks.len() {
                if masks[a].iter().zip(&masks[b]).any(|(x, y)| *x && *y) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn seven_channel_network() {
        for n in [50, 20] {
            let grid = StructuredGrid2D::covering(n, n, 1.0, 1.0).unwrap();
            let geom = default_channel_geometry(7, &grid).unwrap();
            assert_eq!(geom.strips.len(), 7);
            assert!(intersections(&geom, &grid) >= 2);
            let union = (0..grid.num_cells()).filter(|&c| geom.masks(&grid).iter().any(|m| m[c])).count();
            assert!(union > 0 && 2 * union < grid.num_cells());
        }
        assert!(matches!(
            default_channel_geometry(3, &StructuredGrid2D::covering(5, 5, 1.0, 1.0).unwrap()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn channels_dominate_background() {
        let cfg = LandfillConfig {
            n_channels: 7,
            channel_porosities: vec![0.9234, 0.9485, 0.9184, 0.9315, 0.9739, 0.9766, 0.9539],
            ..Default::default()
        };
        let p = build_landfill(&cfg).unwrap();
        let bg = p.medium.phi.iter().zip(p.medium.k.iter()).filter(|(f, _)| **f == 0.35).map(|(_, k)| *k);
        let ch = p.medium.phi.iter().zip(p.medium.k.iter()).filter(|(f, _)| **f != 0.35).map(|(_, k)| *k);
        assert!(ch.fold(f64::INFINITY, f64::min) > bg.fold(0.0, f64::max));
    }

    #[test]
    fn porosity_count_mismatch() {
        let cfg = LandfillConfig { channel_porosities: vec![0.95], ..Default::default() };
        assert!(matches!(build_landfill(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_influx_is_hydrostatic() {
        let cfg = LandfillConfig { u0: 0.0, nx: 10, ny: 10, ..Default::default() };
        let p = build_landfill(&cfg).unwrap();
        let sol = picard_solve(&p, &PicardConfig::default()).unwrap();
        for c in 0..p.grid.num_cells() {
            let (i, j) = p.grid.cell_coords(c);
            let y = p.grid.cell_center(i, j)[1];
            let hydro = cfg.fluid.rho * GRAVITY * (cfg.height - y);
            assert!((sol.pressure[c] - hydro).abs() <= 1e-9 * hydro);
        }
        assert!(sol.magnitude.iter().all(|u| u.abs() < 1e-12));
    }

    #[test]
    fn hydrostatic_profile_slope() {
        let p = PressureProfile::hydrostatic(1000.0, 1.0);
        for y in [0.0, 0.25, 0.9] {
            let slope = (p.eval([0.0, y]) - p.eval([0.0, y + 0.1])) / 0.1;
            assert!((slope - 1000.0 * GRAVITY).abs() <= 1e-12 * 1000.0 * GRAVITY * 10.0);
        }
    }

    #[test]
    fn spe10_wells_balance() {
        let cfg = Spe10Config::default();
        assert_eq!(cfg.center_cell(), (30, 110));
        let p = build_spe10(&cfg).unwrap();
        assert_eq!(p.grid.num_cells(), 13200);
        let total: f64 = p.q.iter().sum::<f64>() * p.grid.cell_area() * cfg.thickness;
        assert!(total.abs() <= 1e-12 * cfg.q_rate);
        let inj = p.q[p.grid.cell_index(30, 110).unwrap()] * p.grid.cell_area() * cfg.thickness;
        assert!((inj - cfg.q_rate).abs() <= 1e-12 * cfg.q_rate);
        assert!(p.force.f == [0.0, 0.0]);
    }

    #[test]
    fn permeability_file_rules() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, vals: &[f64]| {
            let path = dir.path().join(name);
            let mut f = std::fs::File::create(&path).unwrap();
            for v in vals {
                writeln!(f, "{v:e}").unwrap();
            }
            path
        };
        let ok = write("ok.txt", &vec![1e-13; 13200]);
        let field = load_spe10_permeability(&ok).unwrap();
        assert!(field.iter().all(|&k| k == 1e-13));
        let short = write("short.txt", &vec![1e-13; 13199]);
        assert!(matches!(load_spe10_permeability(&short), Err(Error::Format(_))));
        let mut zero = vec![1e-13; 13200];
        zero[17] = 0.0;
        let zero = write("zero.txt", &zero);
        assert!(matches!(load_spe10_permeability(&zero), Err(Error::Data(_))));

        let cfg = Spe10Config { permeability: PermeabilitySource::File(ok), nx: 12, ny: 44, ..Default::default() };
        let p = build_spe10(&cfg).unwrap();
        assert!(p.medium.k.iter().all(|&k| (k - 1e-13).abs() < 1e-25));
    }

    #[test]
    fn synthetic_field_rules() {
        let grid = StructuredGrid2D::new(60, 220, 1.0, 1.0).unwrap();
        let c = synthetic_permeability(&grid, 1, (1e-13f64).ln(), 0.0).unwrap();
        assert!(c.iter().all(|&k| k == (1e-13f64).ln().exp()));
        let a = synthetic_permeability(&grid, 9, -30.0, 2.0).unwrap();
        let b = synthetic_permeability(&grid, 9, -30.0, 2.0).unwrap();
        assert_eq!(a, b);
        for seed in 0..5 {
            let f = synthetic_permeability(&grid, seed, -30.0, 2.0).unwrap();
            let mean = f.iter().map(|k| k.ln()).sum::<f64>() / 13200.0;
            assert!((mean + 30.0).abs() <= 4.0 * 2.0 / 13200f64.sqrt());
        }
    }

    #[test]
    fn geometry_parsing() {
        let g = ChannelGeometry::parse("# c\n1 2 3 4 1\n\n5 6 7 8 2 # tail\n").unwrap();
        assert_eq!(g.strips.len(), 2);
        assert!(matches!(ChannelGeometry::parse("1 2 3"), Err(Error::Format(_))));
        let grid = StructuredGrid2D::new(10, 10, 1.0, 1.0).unwrap();
        let out = ChannelGeometry::parse("0 0 11 0 1").unwrap();
        assert!(out.validate(&grid).is_err());
    }

    proptest! {
        #[test]
        fn spe10_sources_sum_to_zero(q in 10.0f64..300.0, nx in 3usize..20, ny in 3usize..30) {
            let cfg = Spe10Config { q_rate: q, nx, ny, ..Default::default() };
            let p = build_spe10(&cfg).unwrap();
            let total: f64 = p.q.iter().sum();
            prop_assert!(total.abs() <= 1e-12 * q / (p.grid.cell_area() * cfg.thickness));
        }
    }
}
