//! Flat `key = value` run configuration.

use interface_lab::nonlinearity::Nonlinearity;
use interface_lab::wave::{check_guards, fit_step};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Plane,
    Cylinder,
    Circle,
}

impl Shape {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "plane" => Some(Shape::Plane),
            "cylinder" => Some(Shape::Cylinder),
            "circle" => Some(Shape::Circle),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Shape::Plane => "plane",
            Shape::Cylinder => "cylinder",
            Shape::Circle => "circle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub well: String,
    pub shape: Shape,
    pub r0: f64,
    pub v: f64,
    pub t: f64,
    pub t1: f64,
    pub nt: usize,
    pub ntheta: usize,
    pub eps: Vec<f64>,
    pub k: usize,
    pub dx_per_eps: f64,
    pub courant: f64,
    pub chart_nz: usize,
    pub glue_fraction: f64,
    pub c_gamma: f64,
    pub energy_t_end: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            well: "allen-cahn".into(),
            shape: Shape::Circle,
            r0: 1.0,
            v: 0.4,
            t: 0.8,
            t1: 0.6,
            nt: 161,
            ntheta: 8,
            eps: vec![0.1, 0.05],
            k: 2,
            dx_per_eps: 16.0,
            courant: 0.5,
            chart_nz: 41,
            glue_fraction: 0.45,
            c_gamma: 10.0,
            energy_t_end: 1.0,
            output_dir: PathBuf::from("run"),
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| bad(format!("{key}: cannot parse `{v}`")))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim())))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if seen.insert(k.clone(), v).is_some() {
                return Err(bad(format!("line {}: `{k}` given twice", n + 1)));
            }
        }
        let mut cfg = RunConfig::default();
        for (k, v) in &seen {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "well" => self.well = v.to_string(),
            "surface.shape" => {
                self.shape = Shape::parse(v)
                    .ok_or_else(|| bad(format!("surface.shape: `{v}` is not plane, cylinder or circle")))?
            }
            "surface.r0" => self.r0 = num(key, v)?,
            "surface.v" => self.v = num(key, v)?,
            "surface.t" => self.t = num(key, v)?,
            "surface.t1" => self.t1 = num(key, v)?,
            "surface.nt" => self.nt = num(key, v)?,
            "surface.ntheta" => self.ntheta = num(key, v)?,
            "eps" => {
                self.eps = v
                    .split(',')
                    .map(|s| num::<f64>(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "ansatz.k" => self.k = num(key, v)?,
            "grid.dx_per_eps" => self.dx_per_eps = num(key, v)?,
            "grid.courant" => self.courant = num(key, v)?,
            "chart.nz" => self.chart_nz = num(key, v)?,
            "chart.glue_fraction" => self.glue_fraction = num(key, v)?,
            "energy.c_gamma" => self.c_gamma = num(key, v)?,
            "energy.t_end" => self.energy_t_end = num(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = num(key, v)?,
            _ => return Err(bad(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, ConfigError> {
        let nl = Nonlinearity::from_name(&self.well).ok_or_else(|| {
            bad(format!(
                "well: `{}` is not allen-cahn, degenerate or scaled-allen-cahn:<lambda>",
                self.well
            ))
        })?;
        nl.validate().map_err(|e| bad(format!("well: {e}")))?;
        Ok(nl)
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let nl = self.nonlinearity()?;
        let pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} = {x} must be positive and finite")))
            }
        };
        pos("surface.r0", self.r0)?;
        pos("surface.t", self.t)?;
        pos("surface.t1", self.t1)?;
        if !(self.v.abs() < 1.0) {
            return Err(bad(format!("surface.v = {} must satisfy |v| < 1", self.v)));
        }
        if self.t1 > self.t {
            return Err(bad(format!(
                "surface.t1 = {} must not exceed surface.t = {}",
                self.t1, self.t
            )));
        }
        if self.shape == Shape::Circle {
            let limit = 0.8 * PI * self.r0 / 2.0;
            if self.t > limit * (1.0 + 1e-12) {
                return Err(bad(format!(
                    "surface.t = {} is too close to the collapse time; use at most {limit}",
                    self.t
                )));
            }
        }
        if self.nt < 7 {
            return Err(bad(format!("surface.nt = {} must be at least 7", self.nt)));
        }
        if self.ntheta < 5 {
            return Err(bad(format!("surface.ntheta = {} must be at least 5", self.ntheta)));
        }
        if self.eps.is_empty() {
            return Err(bad("eps: give at least one value"));
        }
        for &e in &self.eps {
            if !(e.is_finite() && e > 0.0 && e < 1.0) {
                return Err(bad(format!("eps = {e} must lie in (0, 1)")));
            }
        }
        if self.k > 4 {
            return Err(bad(format!("ansatz.k = {} must be at most 4", self.k)));
        }
        if !(self.dx_per_eps.is_finite() && self.dx_per_eps >= 8.0) {
            return Err(bad(format!("grid.dx_per_eps = {} must be at least 8", self.dx_per_eps)));
        }
        if !(self.courant > 0.0 && self.courant <= 0.5) {
            return Err(bad(format!("grid.courant = {} must lie in (0, 0.5]", self.courant)));
        }
        for &e in &self.eps {
            let dx = e / self.dx_per_eps;
            let (dt, _) = fit_step(self.t, self.courant * dx);
            check_guards(&nl, e, dx, dt).map_err(|err| bad(format!("eps = {e}: {err}")))?;
        }
        if self.chart_nz < 5 {
            return Err(bad(format!("chart.nz = {} must be at least 5", self.chart_nz)));
        }
        if !(self.glue_fraction > 0.0 && self.glue_fraction < 0.5) {
            return Err(bad(format!(
                "chart.glue_fraction = {} must lie in (0, 0.5)",
                self.glue_fraction
            )));
        }
        if !(self.c_gamma.is_finite() && self.c_gamma >= 0.0) {
            return Err(bad(format!("energy.c_gamma = {} must be nonnegative", self.c_gamma)));
        }
        pos("energy.t_end", self.energy_t_end)?;
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` gives back the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let eps: Vec<String> = self.eps.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "well = {}", self.well);
        let _ = writeln!(s, "surface.shape = {}", self.shape.name());
        let _ = writeln!(s, "surface.r0 = {}", self.r0);
        let _ = writeln!(s, "surface.v = {}", self.v);
        let _ = writeln!(s, "surface.t = {}", self.t);
        let _ = writeln!(s, "surface.t1 = {}", self.t1);
        let _ = writeln!(s, "surface.nt = {}", self.nt);
        let _ = writeln!(s, "surface.ntheta = {}", self.ntheta);
        let _ = writeln!(s, "eps = {}", eps.join(", "));
        let _ = writeln!(s, "ansatz.k = {}", self.k);
        let _ = writeln!(s, "grid.dx_per_eps = {}", self.dx_per_eps);
        let _ = writeln!(s, "grid.courant = {}", self.courant);
        let _ = writeln!(s, "chart.nz = {}", self.chart_nz);
        let _ = writeln!(s, "chart.glue_fraction = {}", self.glue_fraction);
        let _ = writeln!(s, "energy.c_gamma = {}", self.c_gamma);
        let _ = writeln!(s, "energy.t_end = {}", self.energy_t_end);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn comments_and_spacing() {
        let c = RunConfig::parse("# header\n  eps= 0.2 ,0.1 # two values\nsurface.shape=plane\n\n").unwrap();
        assert_eq!(c.eps, vec![0.2, 0.1]);
        assert_eq!(c.shape, Shape::Plane);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("eps = 0.1\neps = 0.2").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("ansatz.k = two").is_err());
        assert!(RunConfig::parse("just words").is_err());
        for text in [
            "eps = -0.1",
            "eps = 0",
            "surface.v = 1",
            "surface.t = 1.3",
            "grid.dx_per_eps = 4",
            "well = quartic",
            "chart.glue_fraction = 0.5",
        ] {
            let c = RunConfig::parse(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn stiffness_guard_is_applied() {
        let c = RunConfig::parse("well = scaled-allen-cahn:400\ngrid.courant = 0.5").unwrap();
        assert!(c.validate().is_err());
    }
}
