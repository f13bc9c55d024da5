//! Isotropic Saint-Venant-Kirchhoff material.

use serde::{Deserialize, Serialize};

use crate::FeError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl Material {
    pub fn new(young_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self, FeError> {
        let m = Self { young_modulus, poisson_ratio, density };
        m.validate()?;
        Ok(m)
    }

    /// Polycrystalline silicon in μm, μs, μN units (E = 167 GPa, ν = 0.22, ρ = 2330 kg/m³).
    pub fn polysilicon() -> Self {
        Self { young_modulus: 167e3, poisson_ratio: 0.22, density: 2.33e-3 }
    }

    pub fn validate(&self) -> Result<(), FeError> {
        let ok = self.young_modulus > 0.0
            && self.poisson_ratio > -1.0
            && self.poisson_ratio < 0.5
            && self.density > 0.0
            && self.young_modulus.is_finite()
            && self.density.is_finite();
        if ok {
            Ok(())
        } else {
            Err(FeError::Material(format!("{self:?}")))
        }
    }

    /// Lamé constants `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young_modulus, self.poisson_ratio);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_constants() {
        assert!(Material::new(1.0, 0.5, 1.0).is_err());
        assert!(Material::new(-1.0, 0.3, 1.0).is_err());
        assert!(Material::new(1.0, 0.3, 0.0).is_err());
        assert!(Material::new(1.0, 0.3, 1.0).is_ok());
    }
}
