//! Balanced double-well potentials and their derived nonlinearity `f = -W'`.

use serde::{Deserialize, Serialize};

/// Even double well with minima at ±1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Nonlinearity {
    /// `W(s) = (1 - s²)² / 4`, so `f(s) = s - s³`.
    AllenCahn,
    /// `W(s) = λ (1 - s²)² / 4`.
    ScaledAllenCahn { lambda: f64 },
    /// `W(s) = (1 - s²)⁴ / 4`: wells with zero curvature, used to exercise error paths.
    Degenerate,
}

impl Nonlinearity {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "allen-cahn" => Some(Nonlinearity::AllenCahn),
            "degenerate" => Some(Nonlinearity::Degenerate),
            _ => name
                .strip_prefix("scaled-allen-cahn:")
                .and_then(|l| l.parse().ok())
                .map(|lambda| Nonlinearity::ScaledAllenCahn { lambda }),
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            Nonlinearity::ScaledAllenCahn { lambda } => *lambda,
            _ => 1.0,
        }
    }

    pub fn potential(&self, s: f64) -> f64 {
        let q = 1.0 - s * s;
        match self {
            Nonlinearity::Degenerate => 0.25 * q.powi(4),
            _ => 0.25 * self.lambda() * q * q,
        }
    }

    /// `W(1 - e)`, evaluated without cancellation for small `e`.
    pub fn potential_gap(&self, e: f64) -> f64 {
        let q = e * (2.0 - e);
        match self {
            Nonlinearity::Degenerate => 0.25 * q.powi(4),
            _ => 0.25 * self.lambda() * q * q,
        }
    }

    /// `f = -W'`.
    pub fn f(&self, s: f64) -> f64 {
        let q = 1.0 - s * s;
        match self {
            Nonlinearity::Degenerate => 2.0 * s * q.powi(3),
            _ => self.lambda() * s * q,
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        let q = 1.0 - s * s;
        match self {
            Nonlinearity::Degenerate => 2.0 * q.powi(3) - 12.0 * s * s * q * q,
            _ => self.lambda() * (1.0 - 3.0 * s * s),
        }
    }

    pub fn d2f(&self, s: f64) -> f64 {
        let q = 1.0 - s * s;
        match self {
            Nonlinearity::Degenerate => -36.0 * s * q * q + 48.0 * s.powi(3) * q,
            _ => -6.0 * self.lambda() * s,
        }
    }

    /// Well curvature `W''(±1) = -f'(±1)`; this is the `σ` of the energy estimates.
    pub fn well_curvature(&self) -> f64 {
        -self.df(1.0)
    }

    /// Exponential decay rate of the heteroclinic tails, `sqrt(W''(1))`.
    pub fn decay_rate(&self) -> f64 {
        self.well_curvature().max(0.0).sqrt()
    }

    pub fn sigma(&self) -> f64 {
        self.well_curvature()
    }

    /// Checks the standing assumptions on sampled points; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for &s in &[-1.0, 1.0] {
            if self.potential(s).abs() > 1e-15 || self.f(s).abs() > 1e-15 {
                return Err(format!("W or W' does not vanish at {s}"));
            }
        }
        for i in 0..=400 {
            let s = -2.0 + i as f64 * 0.01;
            if (s.abs() - 1.0).abs() > 1e-12 && self.potential(s) <= 0.0 {
                return Err(format!("W({s}) is not positive"));
            }
            if (self.potential(s) - self.potential(-s)).abs() > 1e-15 * (1.0 + self.potential(s)) {
                return Err(format!("W is not even at {s}"));
            }
        }
        if self.well_curvature() <= 0.0 {
            return Err("wells are degenerate: f'(±1) = 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allen_cahn_constants() {
        let nl = Nonlinearity::AllenCahn;
        assert_eq!(nl.well_curvature(), 2.0);
        assert!((nl.decay_rate() - 2f64.sqrt()).abs() < 1e-15);
        assert!(nl.validate().is_ok());
        assert!(Nonlinearity::Degenerate.validate().is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for nl in [
            Nonlinearity::AllenCahn,
            Nonlinearity::ScaledAllenCahn { lambda: 2.5 },
            Nonlinearity::Degenerate,
        ] {
            for i in 0..20 {
                let s = -1.3 + 0.13 * i as f64;
                let h = 1e-5;
                let fd = -(nl.potential(s + h) - nl.potential(s - h)) / (2.0 * h);
                assert!((fd - nl.f(s)).abs() < 1e-8 * (1.0 + nl.f(s).abs()));
                let fd = (nl.f(s + h) - nl.f(s - h)) / (2.0 * h);
                assert!((fd - nl.df(s)).abs() < 1e-8 * (1.0 + nl.df(s).abs()));
                let fd = (nl.df(s + h) - nl.df(s - h)) / (2.0 * h);
                assert!((fd - nl.d2f(s)).abs() < 1e-7 * (1.0 + nl.d2f(s).abs()));
                let e = 1.0 - s;
                assert!((nl.potential_gap(e) - nl.potential(s)).abs() < 1e-14);
            }
        }
    }
}
