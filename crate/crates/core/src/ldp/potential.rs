use serde::{Deserialize, Serialize};

use super::quadrature::adaptive_simpson;
use super::LdpError;

/// Gradient-noise variance as a function of the objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceProfile {
    /// `σ²(z) = variance`
    Constant { variance: f64 },
    /// `σ²(z) = offset + slope · z`
    Affine { offset: f64, slope: f64 },
    /// `σ²(z) = scale · (z − shift)^exponent`, defined for `z > shift`
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        shift: f64,
    },
}

impl VarianceProfile {
    pub fn variance(&self, z: f64) -> f64 {
        match *self {
            VarianceProfile::Constant { variance } => variance,
            VarianceProfile::Affine { offset, slope } => offset + slope * z,
            VarianceProfile::Power {
                scale,
                exponent,
                shift,
            } => {
                if z > shift {
                    scale * (z - shift).powf(exponent)
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// `Φ(hi) − Φ(lo)` for `Φ = 2 ∫ dz / σ²(z)`.
    pub fn potential_difference(&self, lo: f64, hi: f64) -> Result<f64, LdpError> {
        potential_transform(|z| self.variance(z), lo, hi)
    }
}

/// `2 ∫_{lo}^{hi} dz / σ²(z)`: the cost of climbing from objective level
/// `lo` to `hi` under value-dependent Gaussian noise.
pub fn potential_transform<F>(variance: F, lo: f64, hi: f64) -> Result<f64, LdpError>
where
    F: Fn(f64) -> f64,
{
    const PROBES: usize = 64;
    for k in 0..=PROBES {
        let z = lo + (hi - lo) * k as f64 / PROBES as f64;
        let v = variance(z);
        if !(v > 0.0) {
            return Err(LdpError::NonPositiveVariance {
                level: z,
                variance: v,
            });
        }
    }
    Ok(2.0 * adaptive_simpson(|z| 1.0 / variance(z), lo, hi, 1e-8)?)
}
