//! Weighted energy of linearized runs about a planar interface: the `γ / φ̄⊥` split, `E(s)`,
//! its coercivity, the fitted Grönwall constant and slice Sobolev norms. Chart-side checks of the
//! tensor `a^{αβ}` and of `b^n` live at the bottom.

use crate::fermi::FermiChart;
use crate::nonlinearity::Nonlinearity;
use crate::numerics::{cutoff, cutoff_deriv, DiffOp};
use crate::profile::{HeteroclinicProfile, ProfileError};
use crate::wave::{check_guards, fit_step, Grid, LinearizedSolver, Mode, WaveError};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_C_GAMMA: f64 = 10.0;
pub const GRONWALL_CAP: f64 = 1e3;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("bad planar frame: {0}")]
    Frame(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Radii of the planar frame. The chart of a static plane is the lab frame, so `r₁`, `r₂` are free;
/// they only have to respect `4 r_glue ≤ r₂ < r₁` and `2 r₁ < half_width`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PlanarFrameParams {
    pub half_width: f64,
    pub r1: f64,
    pub r2: f64,
    pub glue_radius: f64,
}

impl Default for PlanarFrameParams {
    fn default() -> Self {
        PlanarFrameParams {
            half_width: 4.0,
            r1: 1.5,
            r2: 1.0,
            glue_radius: 0.25,
        }
    }
}

impl PlanarFrameParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let ok = self.glue_radius > 0.0
            && 4.0 * self.glue_radius <= self.r2 * (1.0 + 1e-12)
            && self.r2 < self.r1
            && 2.0 * self.r1 < self.half_width;
        if ok {
            Ok(())
        } else {
            Err(EnergyError::Frame(format!("{self:?}")))
        }
    }
}

/// Glued static kink `u* = χ₀ w(x/ε) + (1 - χ₀) sgn x`, `χ₀ = η(x / r_glue)`.
pub struct PlanarBackground {
    pub nl: Nonlinearity,
    pub eps: f64,
    pub glue_radius: f64,
    profile: HeteroclinicProfile,
}

impl PlanarBackground {
    pub fn new(nl: Nonlinearity, eps: f64, glue_radius: f64) -> Result<Self, EnergyError> {
        let profile = HeteroclinicProfile::build(nl, 14.0, 8193)?;
        Ok(PlanarBackground {
            nl,
            eps,
            glue_radius,
            profile,
        })
    }

    pub fn u(&self, x: f64) -> f64 {
        let chi = cutoff(x / self.glue_radius);
        let lim = if x < 0.0 { -1.0 } else { 1.0 };
        if chi == 0.0 {
            return lim;
        }
        chi * self.profile.eval(x / self.eps).0 + (1.0 - chi) * lim
    }

    /// `(∂_z w_ε, ∂_z² w_ε)` with `w_ε = w(z/ε)`.
    pub fn dw(&self, z: f64) -> (f64, f64) {
        let (_, wp, wpp) = self.profile.eval(z / self.eps);
        (wp / self.eps, wpp / (self.eps * self.eps))
    }
}

/// Static data of a slice `Σ_s`: weights, cutoffs, background and the tensor `a^{αβ}`.
#[derive(Clone, Debug)]
pub struct EnergyFrame {
    pub s: f64,
    pub eps: f64,
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    pub dx: f64,
    /// `σ = -f'(±1)`.
    pub sigma: f64,
    pub chi_nr: Vec<f64>,
    pub chi_far: Vec<f64>,
    pub chi1: Vec<f64>,
    pub dchi1: Vec<f64>,
    /// `ω⁰` on the (zero-dimensional) `Γ⁰`.
    pub omega0: f64,
    pub a00: Vec<f64>,
    pub a11: Vec<f64>,
    pub dwe: Vec<f64>,
    pub ddwe: Vec<f64>,
    /// `f'(u*_ε)`.
    pub fprime: Vec<f64>,
    /// Discrete `Ξ = ε ∫ (∂_z w_ε)² dz` on the slice grid.
    pub xi: f64,
}

impl EnergyFrame {
    pub fn planar(grid: &Grid, bg: &PlanarBackground, p: &PlanarFrameParams, s: f64) -> Result<Self, EnergyError> {
        p.validate()?;
        if grid.mode != Mode::Planar {
            return Err(EnergyError::Frame("planar frame needs a planar grid".into()));
        }
        let x = grid.nodes();
        let weights = grid.weights();
        let n = x.len();
        let mut f = EnergyFrame {
            s,
            eps: bg.eps,
            weights,
            dx: grid.dx,
            sigma: bg.nl.sigma(),
            chi_nr: Vec::with_capacity(n),
            chi_far: Vec::with_capacity(n),
            chi1: Vec::with_capacity(n),
            dchi1: Vec::with_capacity(n),
            omega0: 1.0,
            a00: vec![1.0; n],
            a11: vec![1.0; n],
            dwe: Vec::with_capacity(n),
            ddwe: Vec::with_capacity(n),
            fprime: Vec::with_capacity(n),
            xi: 0.0,
            x: Vec::new(),
        };
        for &z in &x {
            let nr = cutoff(z.abs() / p.r1);
            f.chi_nr.push(nr);
            f.chi_far.push(1.0 - nr);
            let s1 = 2.0 * z / p.r2;
            f.chi1.push(cutoff(s1));
            f.dchi1.push(cutoff_deriv(s1) * 2.0 / p.r2);
            let (d1, d2) = bg.dw(z);
            f.dwe.push(d1);
            f.ddwe.push(d2);
            f.fprime.push(bg.nl.df(bg.u(z)));
        }
        f.x = x;
        f.xi = bg.eps * f.integrate(&f.dwe.iter().map(|d| d * d).collect::<Vec<_>>());
        Ok(f)
    }

    pub fn integrate(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    fn dz(&self, v: &[f64]) -> Vec<f64> {
        DiffOp::new(v.len(), self.dx, 1, 4).apply(v)
    }

    /// `φ̄ = χ₁ φ = φ̄⊥ + γ ∂_z w_ε`.
    pub fn decompose(&self, phi: &[f64]) -> ModeSplit {
        let phibar: Vec<f64> = phi.iter().zip(&self.chi1).map(|(p, c)| p * c).collect();
        let proj = self.integrate(&phibar.iter().zip(&self.dwe).map(|(a, b)| a * b).collect::<Vec<_>>());
        let gamma = self.eps * proj / self.xi;
        let perp: Vec<f64> = phibar.iter().zip(&self.dwe).map(|(p, d)| p - gamma * d).collect();
        let ortho = self.integrate(&perp.iter().zip(&self.dwe).map(|(a, b)| a * b).collect::<Vec<_>>());
        let bar2 = self.integrate(&phibar.iter().map(|v| v * v).collect::<Vec<_>>());
        let perp2 = self.integrate(&perp.iter().map(|v| v * v).collect::<Vec<_>>());
        let split = bar2 - perp2 - self.xi / self.eps * gamma * gamma;
        let norm = bar2.sqrt();
        ModeSplit {
            phibar,
            gamma,
            perp,
            xi: self.xi,
            orthogonality: ortho,
            orthogonality_rel: if norm > 0.0 { ortho.abs() / norm } else { 0.0 },
            split_defect_rel: if bar2 > 0.0 { split.abs() / bar2 } else { 0.0 },
        }
    }

    /// `E(s)` and its addends for `(φ, ∂_t φ)` on this slice, with `c_gamma` the constant of the γ-term.
    pub fn energy(&self, phi: &[f64], phi_t: &[f64], c_gamma: f64) -> EnergyParts {
        let eps2 = self.eps * self.eps;
        let phi_x = self.dz(phi);
        let split = self.decompose(phi);
        let split_t = self.decompose(phi_t);
        let n = phi.len();
        let mut e_nr = vec![0.0; n];
        let mut e_far = vec![0.0; n];
        let mut outer = vec![0.0; n];
        let perp_x: Vec<f64> = (0..n)
            .map(|i| self.dchi1[i] * phi[i] + self.chi1[i] * phi_x[i] - split.gamma * self.ddwe[i])
            .collect();
        let mut inner = vec![0.0; n];
        for i in 0..n {
            let (p, pt, px) = (phi[i], phi_t[i], phi_x[i]);
            let dens = 0.5 * (self.a00[i] * pt * pt + self.a11[i] * px * px) - self.fprime[i] * p * p / (2.0 * eps2);
            e_nr[i] = self.omega0 * dens * self.chi_nr[i];
            e_far[i] = 0.5 * (pt * pt + px * px + self.sigma * p * p / eps2) * self.chi_far[i];
            let c2 = self.chi1[i] * self.chi1[i];
            outer[i] = (1.0 - c2) * (pt * pt + px * px + p * p / eps2);
            let q = split.perp[i];
            inner[i] = split_t.perp[i].powi(2) + perp_x[i].powi(2) + q * q / eps2;
        }
        let e_nr = self.integrate(&e_nr);
        let e_far = self.integrate(&e_far);
        let g2 = split.gamma * split.gamma * self.omega0;
        let gamma_term = c_gamma / self.eps * g2;
        let total = e_nr + e_far + gamma_term;
        let coercivity_rhs = g2 / self.eps + self.integrate(&outer) + self.integrate(&inner);
        EnergyParts {
            s: self.s,
            total,
            e_nr,
            e_far,
            gamma_term,
            coercivity_rhs,
            coercivity: if coercivity_rhs > 0.0 {
                total / coercivity_rhs
            } else {
                f64::INFINITY
            },
            split,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModeSplit {
    pub phibar: Vec<f64>,
    pub gamma: f64,
    pub perp: Vec<f64>,
    pub xi: f64,
    /// `∫ φ̄⊥ ∂_z w_ε dz`.
    pub orthogonality: f64,
    /// `|∫ φ̄⊥ ∂_z w_ε| / ‖φ̄‖`.
    pub orthogonality_rel: f64,
    /// `|∫φ̄² - ∫(φ̄⊥)² - (Ξ/ε)γ²| / ∫φ̄²`.
    pub split_defect_rel: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyParts {
    pub s: f64,
    pub total: f64,
    pub e_nr: f64,
    pub e_far: f64,
    pub gamma_term: f64,
    /// `(1/ε)∫γ² + ∫(1-χ₁²)(|Dφ|² + φ²/ε²) + ∫(|Dφ̄⊥|² + (φ̄⊥)²/ε²)`.
    pub coercivity_rhs: f64,
    /// `E / coercivity_rhs`.
    pub coercivity: f64,
    pub split: ModeSplit,
}

#[derive(Clone, Debug, Serialize)]
pub struct GronwallReport {
    /// Smallest admissible `C`, `None` when none is found below the cap.
    pub constant: Option<f64>,
    pub cap: f64,
    pub violation: bool,
    pub samples: usize,
}

/// `C ∫₀ˢ e^{C(s-σ)} g(σ) dσ + e^{Cs} E(0)` at every sample, trapezoid in σ.
fn gronwall_rhs(s: &[f64], e0: f64, forcing: &[f64], c: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    for k in 0..s.len() {
        if k > 0 {
            let h = s[k] - s[k - 1];
            // the running integral is carried with the exponential factor of the current time
            acc = acc * (c * h).exp() + 0.5 * h * (forcing[k] + forcing[k - 1] * (c * h).exp());
        }
        let free = if e0 == 0.0 { 0.0 } else { (c * s[k]).exp() * e0 };
        out.push(free + c * acc);
    }
    out
}

/// Smallest `C ∈ [0, cap]` with `E(s) ≤ e^{Cs}E(0) + C ∫₀ˢ e^{C(s-σ)} g(σ) dσ` at every sample,
/// where `g(σ) = ∫ η² ω_σ`.
pub fn gronwall_check(s: &[f64], energy: &[f64], forcing: &[f64], cap: f64) -> GronwallReport {
    let holds = |c: f64| {
        let rhs = gronwall_rhs(s, energy[0], forcing, c);
        energy.iter().zip(&rhs).all(|(e, r)| *e <= r * (1.0 + 1e-12) + 1e-300)
    };
    let report = |constant, violation| GronwallReport {
        constant,
        cap,
        violation,
        samples: s.len(),
    };
    if s.is_empty() || holds(0.0) {
        return report(Some(0.0), false);
    }
    if !holds(cap) {
        return report(None, true);
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    report(Some(hi), false)
}

/// Cumulative `‖v‖_{H^j}` for `j = 0..=jmax` with spatial derivatives only.
pub fn sobolev_norms(frame: &EnergyFrame, v: &[f64], jmax: usize) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let d = if j == 0 {
            v.to_vec()
        } else {
            DiffOp::new(v.len(), frame.dx, j, 4).apply(v)
        };
        acc += frame.integrate(&d.iter().map(|a| a * a).collect::<Vec<_>>());
        out.push(acc.sqrt());
    }
    out
}

/// Compact forcing `η(t, x) = A η((x - x₀)/ℓ)`, constant in time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BumpSource {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Default for BumpSource {
    fn default() -> Self {
        BumpSource {
            amplitude: 1.0,
            center: 0.3,
            width: 0.2,
        }
    }
}

impl BumpSource {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * cutoff((x - self.center) / self.width)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRow {
    pub s: f64,
    pub e: f64,
    pub e_nr: f64,
    pub e_far: f64,
    pub gamma_term: f64,
    pub gamma: f64,
    pub coercivity: f64,
    pub orthogonality_rel: f64,
    pub split_defect_rel: f64,
    /// `∫ η² ω_s`.
    pub forcing: f64,
}

/// `ε^{2m+1} ‖φ‖_{L∞H^{m+1}} / ‖η‖_{L∞H^m}` with zero data.
#[derive(Clone, Debug, Serialize)]
pub struct SobolevBound {
    pub m: usize,
    pub phi_norm: f64,
    pub eta_norm: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanarEnergyRun {
    pub eps: f64,
    pub dx: f64,
    pub dt: f64,
    pub c_gamma: f64,
    pub rows: Vec<EnergyRow>,
    pub gronwall: GronwallReport,
    /// Same fit with the γ-term removed from `E`.
    pub gronwall_without_gamma: GronwallReport,
    pub max_orthogonality_rel: f64,
    pub max_split_defect_rel: f64,
    pub min_coercivity: f64,
    /// `max_s |P(s) - P(0) + ∫₀ˢ∫ η φ_t| / max_s |P|`, `P = E^nr + E^far`.
    pub energy_identity_defect: f64,
    pub sobolev: Vec<SobolevBound>,
    /// `‖φ‖_{L∞H^j}` for `j = 0..=3`.
    pub phi_linf_h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PlanarEnergyConfig {
    pub eps: f64,
    pub dx_per_eps: f64,
    pub t_end: f64,
    pub c_gamma: f64,
    pub frame: PlanarFrameParams,
    pub source: BumpSource,
}

impl PlanarEnergyConfig {
    pub fn new(eps: f64) -> Self {
        PlanarEnergyConfig {
            eps,
            dx_per_eps: 8.0,
            t_end: 1.0,
            c_gamma: DEFAULT_C_GAMMA,
            frame: PlanarFrameParams::default(),
            source: BumpSource::default(),
        }
    }
}

/// Linearized run about the glued static kink with zero data and a bump source, with the
/// diagnostics evaluated at every time level.
pub fn planar_energy_run(nl: Nonlinearity, cfg: &PlanarEnergyConfig) -> Result<PlanarEnergyRun, EnergyError> {
    let eps = cfg.eps;
    let p = &cfg.frame;
    let bg = PlanarBackground::new(nl, eps, p.glue_radius)?;
    let dx = eps / cfg.dx_per_eps;
    let grid = Grid::new(Mode::Planar, -p.half_width, p.half_width, dx)?;
    let (dt, steps) = fit_step(cfg.t_end, 0.5 * dx);
    check_guards(&nl, eps, dx, dt)?;
    let frame = EnergyFrame::planar(&grid, &bg, p, 0.0)?;
    let n = grid.n;
    let src = cfg.source;
    let eta: Vec<f64> = frame.x.iter().map(|&x| src.eval(x)).collect();
    let forcing = frame.integrate(&eta.iter().map(|v| v * v).collect::<Vec<_>>());
    let eta_h = sobolev_norms(&frame, &eta, 2);
    let mut solver = LinearizedSolver::new(
        nl,
        grid,
        eps,
        dt,
        vec![0.0; n],
        &vec![0.0; n],
        |_, x| bg.u(x),
        |_, x| src.eval(x),
    )?;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut phys = Vec::with_capacity(steps + 1);
    let mut work = Vec::with_capacity(steps + 1);
    let mut phi_h = [0.0f64; 4];
    let mut min_c = f64::INFINITY;
    for _ in 0..=steps {
        let prev = solver.state.u_prev.clone();
        let cur = solver.state.u.clone();
        let t = solver.state.t;
        solver.step();
        let phi_t: Vec<f64> = solver
            .state
            .u
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b) / (2.0 * dt))
            .collect();
        let mut fr = frame.clone();
        fr.s = t;
        let parts = fr.energy(&cur, &phi_t, cfg.c_gamma);
        let h = sobolev_norms(&fr, &cur, 3);
        for (a, b) in phi_h.iter_mut().zip(&h) {
            *a = a.max(*b);
        }
        if parts.coercivity_rhs > 0.0 {
            min_c = min_c.min(parts.coercivity);
        }
        phys.push(parts.e_nr + parts.e_far);
        work.push(fr.integrate(&eta.iter().zip(&phi_t).map(|(a, b)| a * b).collect::<Vec<_>>()));
        rows.push(EnergyRow {
            s: t,
            e: parts.total,
            e_nr: parts.e_nr,
            e_far: parts.e_far,
            gamma_term: parts.gamma_term,
            gamma: parts.split.gamma,
            coercivity: parts.coercivity,
            orthogonality_rel: parts.split.orthogonality_rel,
            split_defect_rel: parts.split.split_defect_rel,
            forcing,
        });
    }
    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.e).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.forcing).collect();
    let gronwall = gronwall_check(&s, &e, &g, GRONWALL_CAP);
    let gronwall_without_gamma = gronwall_check(&s, &phys, &g, GRONWALL_CAP);
    let mut worked = 0.0;
    let mut defect = 0.0f64;
    let scale = phys.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 1..phys.len() {
        worked += 0.5 * (s[k] - s[k - 1]) * (work[k] + work[k - 1]);
        defect = defect.max((phys[k] - phys[0] + worked).abs() / scale);
    }
    let sobolev = [0usize, 2]
        .iter()
        .map(|&m| {
            let (pn, en) = (phi_h[m + 1], eta_h[m]);
            SobolevBound {
                m,
                phi_norm: pn,
                eta_norm: en,
                constant: eps.powi(2 * m as i32 + 1) * pn / en,
            }
        })
        .collect();
    Ok(PlanarEnergyRun {
        eps,
        dx,
        dt,
        c_gamma: cfg.c_gamma,
        max_orthogonality_rel: rows.iter().fold(0.0, |a, r| a.max(r.orthogonality_rel)),
        max_split_defect_rel: rows.iter().fold(0.0, |a, r| a.max(r.split_defect_rel)),
        min_coercivity: min_c,
        rows,
        gronwall,
        gronwall_without_gamma,
        energy_identity_defect: defect,
        sobolev,
        phi_linf_h: phi_h.to_vec(),
    })
}

/// `a^{αβ}` from an inverse metric: `a^{00} = -g^{00}`, `a^{0i} = 0`, `a^{ij} = g^{ij}`.
pub fn a_tensor(ginv: &Matrix3<f64>) -> Matrix3<f64> {
    let mut a = *ginv;
    a[(0, 0)] = -ginv[(0, 0)];
    for i in 1..3 {
        a[(0, i)] = 0.0;
        a[(i, 0)] = 0.0;
    }
    a
}

/// `|-g^{0β}ξ₀ξ_β + ½g^{αβ}ξ_αξ_β - ½a^{αβ}ξ_αξ_β|`.
pub fn tensor_identity_defect(ginv: &Matrix3<f64>, xi: &Vector3<f64>) -> f64 {
    let lhs = -xi[0] * (ginv.row(0) * xi)[0] + 0.5 * (xi.transpose() * ginv * xi)[0];
    let rhs = 0.5 * (xi.transpose() * a_tensor(ginv) * xi)[0];
    (lhs - rhs).abs()
}

/// `b^n = ∂_z ln √|det g|` of the Fermi chart, by a centered difference of step `h`.
pub fn b_normal(chart: &FermiChart, t: f64, j: usize, z: f64, h: f64) -> f64 {
    let lg = |z: f64| 0.5 * chart.metric(t, j, z).determinant().abs().ln();
    (lg(z + h) - lg(z - h)) / (2.0 * h)
}

/// `max |b^n| / |z|` over `t`-rows, all `θ_j` and `0 < |z| ≤ z_max`.
pub fn b_normal_constant(chart: &FermiChart, times: &[f64], z_max: f64, nz: usize) -> f64 {
    let th = chart.surface.ntheta;
    let mut c = 0.0f64;
    for &t in times {
        for j in 0..th {
            for q in 1..=nz {
                for sign in [-1.0, 1.0] {
                    let z = sign * z_max * q as f64 / nz as f64;
                    c = c.max(b_normal(chart, t, j, z, 1e-4 * z_max).abs() / z.abs());
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const NL: Nonlinearity = Nonlinearity::AllenCahn;

    fn frame(eps: f64) -> EnergyFrame {
        let p = PlanarFrameParams::default();
        let bg = PlanarBackground::new(NL, eps, p.glue_radius).unwrap();
        let g = Grid::new(Mode::Planar, -p.half_width, p.half_width, eps / 8.0).unwrap();
        EnergyFrame::planar(&g, &bg, &p, 0.0).unwrap()
    }

    #[test]
    fn frame_cutoffs_and_tensor() {
        let f = frame(0.1);
        for (i, &z) in f.x.iter().enumerate() {
            if z.abs() <= 1.5 {
                assert_eq!(f.chi_nr[i], 1.0);
            }
            if z.abs() >= 3.0 {
                assert_eq!(f.chi_nr[i], 0.0);
            }
            if z.abs() <= 0.5 {
                assert_eq!(f.chi1[i], 1.0);
            }
            if z.abs() >= 1.0 {
                assert_eq!(f.chi1[i], 0.0);
            }
            assert!(f.a00[i] > 0.0 && f.a11[i] > 0.0);
            if z.abs() >= 0.5 {
                assert_eq!(f.fprime[i], -f.sigma);
            }
        }
        for w in f.x.windows(2).zip(f.chi_nr.windows(2)) {
            if w.0[0] >= 0.0 {
                assert!(w.1[1] <= w.1[0]);
            }
        }
        let xi_exact = 2.0 * 2f64.sqrt() / 3.0;
        assert!((f.xi - xi_exact).abs() < 1e-6, "{}", f.xi);
    }

    #[test]
    fn translation_mode_has_unit_gamma() {
        let f = frame(0.05);
        let split = f.decompose(&f.dwe);
        assert!((split.gamma - 1.0).abs() < 1e-10, "{}", split.gamma);
        assert!(split.perp.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn far_supported_field_has_only_far_energy() {
        let f = frame(0.1);
        let phi: Vec<f64> = f.x.iter().map(|&x| cutoff((x - 3.5) / 0.2)).collect();
        let pt: Vec<f64> = phi.iter().map(|v| 0.3 * v).collect();
        let split = f.decompose(&phi);
        assert_eq!(split.gamma, 0.0);
        assert!(split.perp.iter().all(|v| *v == 0.0));
        let e = f.energy(&phi, &pt, DEFAULT_C_GAMMA);
        assert_eq!(e.e_nr, 0.0);
        assert_eq!(e.total, e.e_far);
        let px = DiffOp::new(phi.len(), f.dx, 1, 4).apply(&phi);
        let dens: Vec<f64> = (0..phi.len())
            .map(|i| 0.5 * (pt[i] * pt[i] + px[i] * px[i] + 200.0 * phi[i] * phi[i]))
            .collect();
        assert!((e.e_far - f.integrate(&dens)).abs() < 1e-12 * e.e_far);
    }

    #[test]
    fn zero_field_zero_energy() {
        let f = frame(0.1);
        let z = vec![0.0; f.x.len()];
        let e = f.energy(&z, &z, DEFAULT_C_GAMMA);
        assert_eq!((e.total, e.e_nr, e.e_far, e.gamma_term), (0.0, 0.0, 0.0, 0.0));
        assert!(sobolev_norms(&f, &z, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_split_is_exact() {
        let f = frame(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let phi: Vec<f64> =
                f.x.iter()
                    .zip(&f.dwe)
                    .map(|(&x, d)| c[0] + c[1] * x + c[2] * (5.0 * x).sin() + c[3] * d)
                    .collect();
            let s = f.decompose(&phi);
            for i in 0..phi.len() {
                let back = s.perp[i] + s.gamma * f.dwe[i];
                assert!((back - f.chi1[i] * phi[i]).abs() < 1e-12);
            }
            assert!(s.orthogonality_rel < 1e-12 && s.split_defect_rel < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn gronwall_fit() {
        let s: Vec<f64> = (0..101).map(|k| k as f64 * 0.01).collect();
        let zero = vec![0.0; s.len()];
        assert_eq!(gronwall_check(&s, &zero, &zero, GRONWALL_CAP).constant, Some(0.0));
        // E = e^{2s} with no forcing needs exactly C = 2
        let e: Vec<f64> = s.iter().map(|t| (2.0 * t).exp()).collect();
        let c = gronwall_check(&s, &e, &zero, GRONWALL_CAP).constant.unwrap();
        assert!((c - 2.0).abs() < 1e-8, "{c}");
        let blow: Vec<f64> = s.iter().map(|t| (2000.0 * t).exp()).collect();
        assert!(gronwall_check(&s, &blow, &zero, GRONWALL_CAP).violation);
    }

    #[test]
    fn sobolev_norms_are_monotone() {
        let f = frame(0.1);
        let v: Vec<f64> = f.x.iter().map(|&x| (-x * x).exp()).collect();
        let h = sobolev_norms(&f, &v, 3);
        assert!(h.windows(2).all(|w| w[0] <= w[1]));
        let l2 = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((h[0] - l2).abs() < 1e-6);
    }

    #[test]
    fn bad_frame_is_rejected() {
        let p = PlanarFrameParams {
            r2: 2.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn normal_convection_is_linear_in_z() {
        let surf = crate::geometry::TimelikeSurface::radial_minimal(1.0, 0.8, 81, 16).unwrap();
        let chart = FermiChart::new(&surf);
        for i in [0, 40, 70] {
            let t = surf.t(i);
            let ag = surf.samples[i * 16].a_gamma();
            let slope = b_normal(&chart, t, 3, 1e-3, 1e-5) / 1e-3;
            assert!((slope.abs() - ag).abs() < 1e-2 * ag, "{slope} {ag}");
        }
        let c = b_normal_constant(&chart, &[0.0, 0.4, 0.7], 0.05, 8);
        assert!(c.is_finite() && c < 20.0, "{c}");
    }

    #[test]
    fn tensor_identity_on_modified_chart() {
        let surf = crate::geometry::TimelikeSurface::radial_minimal(1.0, 1.0, 101, 16).unwrap();
        let chart = crate::fermi::ModifiedFermiChart::build(&surf, 0.8, 41).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let y0 = rng.random_range(0.0..0.8);
            let z = rng.random_range(-0.9..0.9) * chart.delta1;
            let pt = chart.point(y0, rng.random_range(0..16), z).unwrap();
            let ginv = pt.metric.try_inverse().unwrap();
            let a = a_tensor(&ginv);
            assert!(a[(0, 0)] > 0.0);
            assert!(a.fixed_view::<2, 2>(1, 1).symmetric_eigenvalues().min() > 0.0);
            let xi = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            assert!(tensor_identity_defect(&ginv, &xi) < 1e-12 * (1.0 + ginv.abs().max()));
        }
    }
}
