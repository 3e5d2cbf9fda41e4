//! Pointwise physics: seepage laws, the a-priori flux threshold, the local
//! Darcy-vs-Forchheimer error, dimensionless numbers, the dissipation density
//! and the Gaussian-mollified coefficient used by the regularized model.
//!
//! The generalized Forchheimer (GF) law reads
//! `-grad p + f = (1 + cF (sqrt(k)/mu)^m |u|^m) (nu/k) u`; Darcy's law drops the
//! bracketed nonlinear term. All coefficients returned here multiply `u` and
//! carry the units of `nu/k` (Pa·m⁻¹ per kg·m⁻²·s⁻¹).

mod mollified;

pub use mollified::{
    build_mollified_table, mollified_coefficient, MollifiedLawTable, MollifierProfile, RegularizationConfig,
    TableProvenance,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellField;

/// Reference porosity for the Kozeny–Carman map.
pub const KC_PHI_REF: f64 = 0.35;
/// Reference permeability for the Kozeny–Carman map, m².
pub const KC_K_REF: f64 = 1.01e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProperties {
    /// Dynamic viscosity, Pa·s.
    pub mu: f64,
    /// Kinematic viscosity, m²·s⁻¹.
    pub nu: f64,
    /// Density, kg·m⁻³.
    pub rho: f64,
}

impl FluidProperties {
    /// Builds the property set from `mu` and `rho`, deriving `nu = mu / rho`.
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        let fluid = Self { mu, nu: mu / rho, rho };
        fluid.validate()?;
        Ok(fluid)
    }

    pub fn water() -> Self {
        Self { mu: 1e-3, nu: 1e-6, rho: 1000.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.nu > 0.0 && self.rho > 0.0) {
            return Err(Error::Domain(format!("fluid properties must be positive: {self:?}")));
        }
        let nu = self.mu / self.rho;
        if ((self.nu - nu) / nu).abs() > 1e-12 {
            return Err(Error::Domain(format!("inconsistent fluid: nu={} but mu/rho={}", self.nu, nu)));
        }
        Ok(())
    }
}

/// Per-cell medium description plus the scalar law parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumFields {
    /// Permeability, m².
    pub k: CellField,
    /// Porosity in (0, 1).
    pub phi: CellField,
    /// Forchheimer coefficient (dimensionless).
    pub cf: CellField,
    /// Forchheimer exponent, ≥ 1.
    pub m: f64,
    /// Error tolerance in [0, 1).
    pub delta: f64,
}

impl MediumFields {
    pub fn validate(&self) -> Result<()> {
        if self.k.dims() != self.phi.dims() || self.k.dims() != self.cf.dims() {
            return Err(Error::Shape("medium fields have different dimensions".into()));
        }
        if let Some(bad) = self.k.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("permeability must be positive and finite, got {bad}")));
        }
        if let Some(bad) = self.cf.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("Forchheimer coefficient must be positive, got {bad}")));
        }
        if let Some(bad) = self.phi.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::Domain(format!("porosity must lie in (0,1), got {bad}")));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::Domain(format!("Forchheimer exponent must be >= 1, got {}", self.m)));
        }
        check_delta(self.delta)
    }

    pub fn cell(&self, index: usize, fluid: &FluidProperties) -> CellLaw {
        CellLaw { k: self.k[index], cf: self.cf[index], mu: fluid.mu, nu: fluid.nu }
    }
}

/// The constants that enter the seepage law at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellLaw {
    pub k: f64,
    pub cf: f64,
    pub mu: f64,
    pub nu: f64,
}

impl CellLaw {
    /// Darcy coefficient `nu / k`.
    pub fn darcy(&self) -> f64 {
        self.nu / self.k
    }

    /// `sqrt(k) / mu`, the factor turning a flux magnitude into a Reynolds number.
    pub fn reynolds_scale(&self) -> f64 {
        self.k.sqrt() / self.mu
    }

    /// `cF (sqrt(k)/mu)^m`: the GF term equals this times `t^m`.
    pub fn gf_prefactor(&self, m: f64) -> f64 {
        self.cf * self.reynolds_scale().powf(m)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("error tolerance must lie in [0,1), got {delta}")));
    }
    Ok(())
}

pub fn reynolds(t: f64, k: f64, mu: f64) -> f64 {
    k.sqrt() / mu * t
}

/// `m`-th Forchheimer number `cF^(1/m) Re`.
pub fn forchheimer_number(t: f64, k: f64, mu: f64, cf: f64, m: f64) -> f64 {
    cf.powf(1.0 / m) * reynolds(t, k, mu)
}

/// Relative force discrepancy between the Darcy and GF laws at flux magnitude `t`.
pub fn local_error(t: f64, cell: &CellLaw, m: f64) -> f64 {
    let x = cell.cf * (cell.reynolds_scale() * t).powf(m);
    x / (1.0 + x)
}

/// Flux magnitude at which [`local_error`] reaches `delta` in one cell.
pub fn cell_threshold(cell: &CellLaw, delta: f64, m: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((delta / (1.0 - delta)).powf(1.0 / m) * cell.mu / (cell.cf.powf(1.0 / m) * cell.k.sqrt()))
}

/// A-priori flux threshold ū: the smallest per-cell threshold over the medium.
pub fn flux_threshold(medium: &MediumFields, fluid: &FluidProperties) -> Result<f64> {
    flux_threshold_with(medium, fluid, medium.delta, medium.m)
}

pub fn flux_threshold_with(medium: &MediumFields, fluid: &FluidProperties, delta: f64, m: f64) -> Result<f64> {
    check_delta(delta)?;
    let scale = medium
        .k
        .iter()
        .zip(medium.cf.iter())
        .map(|(&k, &cf)| fluid.mu / (cf.powf(1.0 / m) * k.sqrt()))
        .fold(f64::INFINITY, f64::min);
    Ok((delta / (1.0 - delta)).powf(1.0 / m) * scale)
}

/// Coefficient of the discontinuous adaptive law; undefined on `t == ubar`.
pub fn adaptive_coefficient(t: f64, cell: &CellLaw, ubar: f64, m: f64) -> Result<f64> {
    if t == ubar {
        return Err(Error::Transition { t, ubar });
    }
    let darcy = cell.darcy();
    if t < ubar {
        Ok(darcy)
    } else {
        Ok((1.0 + cell.cf * (cell.reynolds_scale() * t).powf(m)) * darcy)
    }
}

/// Which dissipation density the regularization smooths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DissipationVariant {
    /// Integrand exactly as written: on the GF branch only the nonlinear term survives.
    PaperLiteral,
    /// Keeps the linear term on the GF branch so its derivative over `t` is the adaptive law.
    #[default]
    LimitConsistent,
}

impl std::str::FromStr for DissipationVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" | "literal" => Ok(Self::PaperLiteral),
            "limit-consistent" | "consistent" => Ok(Self::LimitConsistent),
            other => Err(Error::Config(format!("unknown dissipation variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for DissipationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PaperLiteral => "paper-literal",
            Self::LimitConsistent => "limit-consistent",
        })
    }
}

/// Dissipation energy density at flux magnitude `t`.
pub fn dissipation_density(t: f64, cell: &CellLaw, ubar: f64, m: f64, variant: DissipationVariant) -> f64 {
    let darcy = cell.darcy();
    let quad = 0.5 * darcy * t * t;
    if t < ubar {
        return quad;
    }
    if t == ubar {
        // transition set: take the Darcy value
        return quad;
    }
    let gf = cell.gf_prefactor(m) * darcy * t.powf(m + 2.0) / (m + 2.0);
    match variant {
        DissipationVariant::PaperLiteral => gf,
        DissipationVariant::LimitConsistent => quad + gf,
    }
}

/// Kozeny–Carman porosity-to-permeability map with the default reference pair.
pub fn kozeny_carman(phi: f64) -> Result<f64> {
    kozeny_carman_with(phi, KC_PHI_REF, KC_K_REF)
}

pub fn kozeny_carman_with(phi: f64, phi_ref: f64, k_ref: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Domain(format!("porosity must lie in (0,1), got {phi}")));
    }
    let num = phi.powi(3) * (1.0 - phi_ref).powi(2);
    let den = phi_ref.powi(3) * (1.0 - phi).powi(2);
    Ok(k_ref * (num / den))
}
