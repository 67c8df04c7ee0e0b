//! Dimensionless parameter set and physical-to-dimensionless conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characteristic physical scales of the wave motion (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScales {
    /// Characteristic water depth (m).
    pub depth: f64,
    /// Order of the free surface amplitude (m). May be zero (flat surface).
    pub a_surf: f64,
    /// Order of the bottom topography amplitude (m). May be zero (flat bottom).
    pub a_bott: f64,
    /// Characteristic horizontal scale, longitudinal direction (m).
    pub lx: f64,
    /// Characteristic horizontal scale, transverse direction (m).
    pub ly: f64,
    /// Gravity (m/s^2).
    pub gravity: f64,
    /// Density (kg/m^3).
    pub density: f64,
    /// Surface tension coefficient (N/m).
    pub surface_tension: f64,
}

impl PhysicalScales {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("depth", self.depth),
            ("lx", self.lx),
            ("ly", self.ly),
            ("gravity", self.gravity),
            ("density", self.density),
            ("surface_tension", self.surface_tension),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "physical scale {name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("a_surf", self.a_surf), ("a_bott", self.a_bott)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "physical amplitude {name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if self.a_surf > self.depth {
            return Err(Error::InvalidInput(format!(
                "surface amplitude a_surf = {} exceeds depth H0 = {}",
                self.a_surf, self.depth
            )));
        }
        if self.a_bott >= self.depth {
            return Err(Error::InvalidInput(format!(
                "bottom amplitude a_bott = {} must be strictly below depth H0 = {}",
                self.a_bott, self.depth
            )));
        }
        Ok(())
    }
}

/// Capillary regime classification relative to the 1/Bo = O(mu) assumption
/// under which the long-time estimates hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapillaryRegime {
    /// 1/(Bo*mu) <= 10: the regime the long-time estimates are proved in.
    Theorem,
    /// Capillarity is weaker (or absent) relative to shallowness.
    OffTheorem,
}

impl std::fmt::Display for CapillaryRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CapillaryRegime::Theorem => write!(f, "theorem"),
            CapillaryRegime::OffTheorem => write!(f, "off-theorem"),
        }
    }
}

/// The five dimensionless parameters of the problem.
///
/// `epsilon` measures nonlinearity, `mu` shallowness, `beta` topography,
/// `gamma` transversality and `bond` the Bond number; capillary effects enter
/// the equations with strength 1/Bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub epsilon: f64,
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Bond number. `f64::INFINITY` switches surface tension off.
    pub bond: f64,
    /// Horizontal dimension, 1 or 2.
    pub dim: usize,
}

impl DimensionlessParams {
    pub fn new(epsilon: f64, mu: f64, beta: f64, gamma: f64, bond: f64, dim: usize) -> Result<Self> {
        let p = DimensionlessParams {
            epsilon,
            mu,
            beta,
            gamma,
            bond,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    /// d=1 convenience constructor with gamma = 1.
    pub fn new_1d(epsilon: f64, mu: f64, beta: f64, bond: f64) -> Result<Self> {
        Self::new(epsilon, mu, beta, 1.0, bond, 1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRegime(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !self.mu.is_finite() || !(self.mu > 0.0) {
            return Err(Error::OutOfRegime(format!(
                "mu must be strictly positive, got {}",
                self.mu
            )));
        }
        if self.bond.is_nan() || !(self.bond > 0.0) {
            return Err(Error::OutOfRegime(format!(
                "bond must be strictly positive (or +inf for no surface tension), got {}",
                self.bond
            )));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Capillary coefficient 1/Bo appearing in the equations (0 when Bo = inf).
    pub fn inv_bond(&self) -> f64 {
        if self.bond.is_infinite() {
            0.0
        } else {
            1.0 / self.bond
        }
    }

    /// The product Bo*mu the existence-time constants depend on.
    pub fn bond_mu(&self) -> f64 {
        self.bond * self.mu
    }

    /// eps*sqrt(mu), the amplitude scale inside the curvature operator.
    pub fn eps_sqrt_mu(&self) -> f64 {
        self.epsilon * self.mu.sqrt()
    }

    pub fn regime(&self) -> CapillaryRegime {
        if 1.0 / self.bond_mu() <= 10.0 {
            CapillaryRegime::Theorem
        } else {
            CapillaryRegime::OffTheorem
        }
    }

    /// Reconstruct a set of physical scales producing these parameters, given a
    /// reference depth. Gravity/density are pinned to canonical values.
    pub fn to_physical(&self, depth: f64) -> PhysicalScales {
        let lx = depth / self.mu.sqrt();
        let gravity = 9.81;
        let density = 1000.0;
        PhysicalScales {
            depth,
            a_surf: self.epsilon * depth,
            a_bott: self.beta * depth,
            lx,
            ly: lx / self.gamma,
            gravity,
            density,
            surface_tension: density * gravity * lx * lx / self.bond,
        }
    }
}

/// Form the dimensionless parameter set from physical scales.
pub fn nondimensionalize(scales: &PhysicalScales) -> Result<DimensionlessParams> {
    scales.validate()?;
    let epsilon = scales.a_surf / scales.depth;
    let mu = (scales.depth / scales.lx).powi(2);
    let beta = scales.a_bott / scales.depth;
    let gamma = scales.lx / scales.ly;
    let bond = scales.density * scales.gravity * scales.lx * scales.lx / scales.surface_tension;
    if gamma > 1.0 {
        return Err(Error::OutOfRegime(format!(
            "gamma = Lx/Ly = {gamma} must lie in [0, 1]; transverse scale must not be shorter than longitudinal"
        )));
    }
    // A distinct transverse scale marks a d=2 configuration; the caller may
    // still override `dim` (d=2 with Lx = Ly is legitimate).
    let dim = if scales.ly != scales.lx { 2 } else { 1 };
    DimensionlessParams::new(epsilon, mu, beta, gamma, bond, dim)
}
