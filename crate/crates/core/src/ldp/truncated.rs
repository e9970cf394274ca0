use super::noise::{dot, LocalState, NoiseModel, TruncatedGaussian};
use super::LdpError;

/// `ε(σ², R) = 2^{d+3} (d+1) exp(−R² / (16σ²))`.
pub fn error_factor(variance: f64, radius: f64, dim: usize) -> f64 {
    2f64.powi(dim as i32 + 3) * (dim as f64 + 1.0) * (-radius * radius / (16.0 * variance)).exp()
}

/// Smallest radius for which the sandwich bounds are certified:
/// `4σ √((d+3) ln 2 + ln(d+1))`.
pub fn radius_threshold(variance: f64, dim: usize) -> f64 {
    let d = dim as f64;
    4.0 * variance.sqrt() * ((d + 3.0) * std::f64::consts::LN_2 + (d + 1.0).ln()).sqrt()
}

/// Quadratured `H`, `L` at zero drift next to their Gaussian sandwiches.
#[derive(Debug, Clone)]
pub struct TruncationCertificate {
    pub epsilon: f64,
    pub hamiltonian: f64,
    pub gaussian_hamiltonian: f64,
    pub lagrangian: f64,
    pub gaussian_lagrangian: f64,
    pub hamiltonian_within: bool,
    pub lagrangian_within: bool,
}

impl TruncationCertificate {
    pub fn holds(&self) -> bool {
        self.hamiltonian_within && self.lagrangian_within
    }
}

pub fn certify_truncated_gaussian(
    noise: &TruncatedGaussian,
    p: &[f64],
    v: &[f64],
) -> Result<TruncationCertificate, LdpError> {
    let (var, r, d) = (noise.variance(), noise.radius(), noise.dim());
    let threshold = radius_threshold(var, d);
    if r < threshold {
        return Err(LdpError::PreconditionViolated(format!(
            "radius {r} is below 4σ√((d+3)ln2 + ln(d+1)) = {threshold}"
        )));
    }
    let p_max = r / (2.0 * var);
    if dot(p, p).sqrt() > p_max {
        return Err(LdpError::PreconditionViolated(format!(
            "‖p‖ exceeds R/(2σ²) = {p_max}"
        )));
    }
    if dot(v, v).sqrt() > r / 4.0 {
        return Err(LdpError::PreconditionViolated(format!(
            "‖v‖ exceeds R/4 = {}",
            r / 4.0
        )));
    }
    let eps = error_factor(var, r, d);
    let zero = vec![0.0; d];
    let at = LocalState {
        value: 0.0,
        grad: &zero,
    };
    let h = noise.hamiltonian(&at, p)?;
    let l = noise.lagrangian(&at, v)?;
    let gh = 0.5 * var * dot(p, p);
    let gl = dot(v, v) / (2.0 * var);
    // slack for quadrature rounding
    let slack = |x: f64| 1e-12 * (1.0 + x.abs());
    Ok(TruncationCertificate {
        epsilon: eps,
        hamiltonian: h,
        gaussian_hamiltonian: gh,
        lagrangian: l,
        gaussian_lagrangian: gl,
        hamiltonian_within: (h - gh).abs() <= eps * gh + slack(gh),
        lagrangian_within: (l - gl).abs() <= 2.0 * eps * gl + slack(gl),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_factor_at_reference_point() {
        let eps = error_factor(1.0, 16.0, 2);
        assert!((eps - 96.0 * (-16.0f64).exp()).abs() < 1e-18);
        assert!((eps - 1.08e-5).abs() < 1e-7);
    }

    #[test]
    fn sandwich_holds_at_unit_direction() {
        let tg = TruncatedGaussian::new(1.0, 16.0, 2).unwrap();
        let c = certify_truncated_gaussian(&tg, &[1.0, 0.0], &[1.0, 0.5]).unwrap();
        assert!(c.holds(), "{c:?}");
    }

    #[test]
    fn zero_momentum_is_exact() {
        let tg = TruncatedGaussian::new(1.0, 16.0, 2).unwrap();
        let c = certify_truncated_gaussian(&tg, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(c.hamiltonian, 0.0);
        assert_eq!(c.lagrangian, 0.0);
    }

    #[test]
    fn small_radius_is_rejected() {
        let tg = TruncatedGaussian::new(1.0, 5.0, 2).unwrap();
        assert!(matches!(
            certify_truncated_gaussian(&tg, &[0.1, 0.0], &[0.1, 0.0]),
            Err(LdpError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn heavy_truncation_shrinks_the_cgf() {
        // a tight ball visibly reduces the CGF below the Gaussian value
        let tg = TruncatedGaussian::new(1.0, 1.0, 1).unwrap();
        let k = tg.centered_cgf(&[1.0]);
        assert!(k < 0.5 * 0.9 && k > 0.0, "{k}");
    }
}
