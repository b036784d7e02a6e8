use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv};

use crate::{Error, Result};

/// Even, decaying weight `p(t)` applied to evolution times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoolingFunction {
    /// `p(t) = exp(-a^2 t^2)`.
    Gaussian { a: f64 },
    /// `p(t) = (beta/pi) / (beta^2 + t^2)`.
    Lorentzian { beta: f64 },
}

impl CoolingFunction {
    /// Any finite `a > 0` is accepted here; run configurations additionally
    /// require `a < 1`.
    pub fn gaussian(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!("gaussian parameter a = {a} must be > 0")));
        }
        Ok(Self::Gaussian { a })
    }

    pub fn lorentzian(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("lorentzian width beta = {beta} must be > 0")));
        }
        Ok(Self::Lorentzian { beta })
    }

    /// `a` or `beta`.
    pub fn width(&self) -> f64 {
        match *self {
            Self::Gaussian { a } => a,
            Self::Lorentzian { beta } => beta,
        }
    }

    pub fn weight(&self, t: f64) -> f64 {
        match *self {
            Self::Gaussian { a } => (-(a * t) * (a * t)).exp(),
            Self::Lorentzian { beta } => beta / std::f64::consts::PI / (beta * beta + t * t),
        }
    }

    /// `Z = integral of p over [-T, T]`.
    pub fn normalization(&self, t_max: f64) -> f64 {
        match *self {
            Self::Gaussian { a } => std::f64::consts::PI.sqrt() / a * erf(a * t_max),
            Self::Lorentzian { beta } => 2.0 / std::f64::consts::PI * (t_max / beta).atan(),
        }
    }

    /// `|t|` at cumulative fraction `u` of the half density on `[0, T]`.
    pub fn inverse_half_cdf(&self, u: f64, t_max: f64) -> f64 {
        let t = match *self {
            Self::Gaussian { a } => erf_inv(u * erf(a * t_max)) / a,
            Self::Lorentzian { beta } => beta * (u * (t_max / beta).atan()).tan(),
        };
        t.clamp(0.0, t_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_shape() {
        let p = CoolingFunction::gaussian(0.3).unwrap();
        assert_eq!(p.weight(0.0), 1.0);
        let mut prev = 1.0;
        for k in 1..50 {
            let t = k as f64 * 0.4;
            assert_eq!(p.weight(t), p.weight(-t));
            assert!(p.weight(t) < prev);
            prev = p.weight(t);
        }
        assert!(CoolingFunction::gaussian(0.0).is_err());
        assert!(CoolingFunction::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn normalizations_match_quadrature() {
        for p in [
            CoolingFunction::gaussian(0.2).unwrap(),
            CoolingFunction::lorentzian(0.7).unwrap(),
        ] {
            let t_max = 9.0;
            let n = 200_000;
            let h = 2.0 * t_max / n as f64;
            let mut s = 0.5 * (p.weight(-t_max) + p.weight(t_max));
            for k in 1..n {
                s += p.weight(-t_max + k as f64 * h);
            }
            assert!((s * h - p.normalization(t_max)).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_cdf_round_trip() {
        for p in [
            CoolingFunction::gaussian(0.05).unwrap(),
            CoolingFunction::lorentzian(2.0).unwrap(),
        ] {
            let t_max = 40.0;
            for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
                let t = p.inverse_half_cdf(u, t_max);
                let frac = p.normalization(t) / p.normalization(t_max);
                assert!((frac - u).abs() < 1e-10, "u {u} frac {frac}");
            }
            assert!(p.inverse_half_cdf(1.0, t_max) <= t_max);
        }
    }
}
