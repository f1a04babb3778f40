//! Local approximation `u = v(y, z/ε - h(y))`, `v = w + φ`, built order by order, and its
//! gluing to the limit phase `𝕀 = sign z`.
//!
//! Fields on the surface grid use index `q = i * ntheta + j`; fields on the `(y, ζ)` grid use
//! `q * nz + m` with `ζ_m = -R + m Δζ`.

use crate::geometry::{GeometryError, SurfaceKind, TimelikeSurface};
use crate::jacobi::{JacobiError, JacobiProblem};
use crate::nonlinearity::Nonlinearity;
use crate::numerics::{
    cell_integrals, cutoff, cutoff_deriv, cutoff_deriv2, hermite_eval, linear_fit, DiffOp, PeriodicDiff,
};
use crate::profile::{HeteroclinicProfile, ProfileError};
use serde::Serialize;
use thiserror::Error;

pub const ZETA_STEP: f64 = 0.05;
pub const ZETA_CAP: f64 = 14.0;

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("ε = {0} must be positive")]
    BadEps(f64),
    #[error("ζ window of half-width {0} is too small")]
    EmptyWindow(f64),
    #[error("projected residual keeps a component {0:e} along w'")]
    Orthogonality(f64),
    #[error("gluing radius {r} violates 2r < δ = {delta} or leaves the ζ window")]
    GlueRadius { r: f64, delta: f64 },
    #[error("initial data requires a radial surface")]
    NotRadial,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `S(v, h)` on the `(y, ζ)` grid. Nodes with `|ε(ζ + h)| >= δ` are set to zero and counted.
#[derive(Clone, Debug)]
pub struct Residual {
    pub values: Vec<f64>,
    pub truncated: usize,
}

impl Residual {
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Bookkeeping of one induction step.
#[derive(Clone, Debug, Serialize)]
pub struct InductionStep {
    pub order: usize,
    /// `max_y |∫ S(v^k, h^k) w' dζ|`.
    pub projection_before: f64,
    /// `max_y |∫ ℰ w' dζ|` after the Jacobi correction.
    pub projection_defect: f64,
    pub max_source: f64,
    pub max_dh: f64,
    pub max_envelope_growth: f64,
}

/// Sup norms used for the `h = O(ε)`, `φ = O(ε²(1+|ζ|)e^{-|ζ|})` invariants.
#[derive(Clone, Debug, Serialize)]
pub struct AnsatzBounds {
    pub h_sup: f64,
    pub phi_sup: f64,
    /// `sup |φ| e^{|ζ|} / (ε² (1 + |ζ|))`.
    pub phi_envelope: f64,
}

#[derive(Clone, Debug)]
pub struct AnsatzOrderK<'a> {
    pub order: usize,
    pub eps: f64,
    pub half_width: f64,
    pub nz: usize,
    pub surface: &'a TimelikeSurface,
    pub jacobi: JacobiProblem,
    /// Heteroclinic tabulated on the ζ nodes of the window.
    pub profile: HeteroclinicProfile,
    pub h: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_z: Vec<f64>,
    pub phi_zz: Vec<f64>,
}

/// Fourth-order stencils in `t` and `θ` for fields with `nz` values per surface node.
struct SurfaceStencils {
    nt: usize,
    nth: usize,
    t1: DiffOp,
    t2: DiffOp,
    th1: PeriodicDiff,
    th2: PeriodicDiff,
}

impl SurfaceStencils {
    fn new(s: &TimelikeSurface) -> Self {
        SurfaceStencils {
            nt: s.nt,
            nth: s.ntheta,
            t1: DiffOp::new(s.nt, s.dt, 1, 4),
            t2: DiffOp::new(s.nt, s.dt, 2, 4),
            th1: PeriodicDiff::new(s.ntheta, s.dtheta, 1, 4),
            th2: PeriodicDiff::new(s.ntheta, s.dtheta, 2, 4),
        }
    }

    /// `(∂_t, ∂_θ)` at `(i, j, m)`.
    fn grad(&self, f: &[f64], nz: usize, i: usize, j: usize, m: usize) -> [f64; 2] {
        let st = self.nth * nz;
        [
            self.t1.at_strided(f, i, j * nz + m, st),
            self.th1.at_strided(f, j, i * st + m, nz),
        ]
    }

    /// `(∂_tt, ∂_tθ, ∂_θθ)` at `(i, j, m)`.
    fn hess(&self, f: &[f64], nz: usize, i: usize, j: usize, m: usize) -> [f64; 3] {
        let st = self.nth * nz;
        let (start, wts) = self.t1.stencil(i);
        let mixed: f64 = wts
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.th1.at_strided(f, j, (start + k) * st + m, nz))
            .sum();
        [
            self.t2.at_strided(f, i, j * nz + m, st),
            mixed,
            self.th2.at_strided(f, j, i * st + m, nz),
        ]
    }

    fn len(&self) -> usize {
        self.nt * self.nth
    }
}

fn quad(a: &[f64; 2], g: &nalgebra::Matrix2<f64>, b: &[f64; 2]) -> f64 {
    let mut s = 0.0;
    for p in 0..2 {
        for r in 0..2 {
            s += g[(p, r)] * a[p] * b[r];
        }
    }
    s
}

fn box_of(grad: &[f64; 2], hess: &[f64; 3], g: &nalgebra::Matrix2<f64>, b: &nalgebra::Vector2<f64>) -> f64 {
    g[(0, 0)] * hess[0] + 2.0 * g[(0, 1)] * hess[1] + g[(1, 1)] * hess[2] + b[0] * grad[0] + b[1] * grad[1]
}

/// Half-width of the ζ window, `min(δ/(2ε), 14)` rounded down to the grid.
pub fn window_half_width(delta: f64, eps: f64) -> f64 {
    ((0.5 * delta / eps).min(ZETA_CAP) / ZETA_STEP + 1e-9).floor() * ZETA_STEP
}

impl<'a> AnsatzOrderK<'a> {
    /// `h⁰ = 0`, `φ⁰ = -ε² a_Γ(y) 𝒯[ζ w']`.
    pub fn order_zero(surface: &'a TimelikeSurface, nl: Nonlinearity, eps: f64) -> Result<Self, AnsatzError> {
        if !(eps > 0.0) {
            return Err(AnsatzError::BadEps(eps));
        }
        let r = window_half_width(surface.delta, eps);
        if r < 4.0 * ZETA_STEP {
            return Err(AnsatzError::EmptyWindow(r));
        }
        let nz = (2.0 * r / ZETA_STEP).round() as usize + 1;
        let profile = HeteroclinicProfile::on_grid(nl, -r, ZETA_STEP, nz)?;
        let jacobi = JacobiProblem::assemble(surface)?;
        let q: Vec<f64> = (0..nz).map(|m| profile.zeta[m] * profile.wp[m]).collect();
        let base = profile.apply_t_orthogonal(&q, r, 1)?;
        let ny = surface.samples.len();
        let mut phi = vec![0.0; ny * nz];
        let mut phi_z = vec![0.0; ny * nz];
        let mut phi_zz = vec![0.0; ny * nz];
        for (y, s) in surface.samples.iter().enumerate() {
            let c = -eps * eps * s.a_gamma();
            for m in 0..nz {
                let p = base.p[m];
                phi[y * nz + m] = c * p;
                phi_z[y * nz + m] = c * base.dp[m];
                phi_zz[y * nz + m] = c * (-nl.df(profile.w[m]) * p - q[m]);
            }
        }
        Ok(AnsatzOrderK {
            order: 0,
            eps,
            half_width: r,
            nz,
            surface,
            jacobi,
            profile,
            h: vec![0.0; ny],
            phi,
            phi_z,
            phi_zz,
        })
    }

    /// Order `k` by `k` induction steps from order zero.
    pub fn build(
        surface: &'a TimelikeSurface,
        nl: Nonlinearity,
        eps: f64,
        k: usize,
    ) -> Result<(Self, Vec<InductionStep>), AnsatzError> {
        let mut a = Self::order_zero(surface, nl, eps)?;
        let mut steps = Vec::new();
        for _ in 0..k {
            let (next, step) = a.induct()?;
            a = next;
            steps.push(step);
        }
        Ok((a, steps))
    }

    pub fn zeta(&self, m: usize) -> f64 {
        self.profile.zeta[m]
    }

    pub fn residual(&self) -> Residual {
        self.residual_of(&self.h, &self.phi, &self.phi_z, &self.phi_zz)
    }

    /// `S(w + φ, h)` for arbitrary fields on this grid, with `φ_ζ`, `φ_ζζ` supplied.
    pub fn residual_of(&self, h: &[f64], phi: &[f64], phi_z: &[f64], phi_zz: &[f64]) -> Residual {
        let st = SurfaceStencils::new(self.surface);
        let (nz, eps, delta) = (self.nz, self.eps, self.surface.delta);
        let nl = self.profile.nl;
        let mut values = vec![0.0; st.len() * nz];
        let mut truncated = 0;
        for i in 0..st.nt {
            for j in 0..st.nth {
                let q = i * st.nth + j;
                let gh = st.grad(h, 1, i, j, 0);
                let hh = st.hess(h, 1, i, j, 0);
                for m in 0..nz {
                    let k = q * nz + m;
                    let z = eps * (self.zeta(m) + h[q]);
                    if z.abs() >= delta {
                        truncated += 1;
                        continue;
                    }
                    let c = self.surface.tube_coefficients(q, z);
                    let (w, wp, wpp) = (self.profile.w[m], self.profile.wp[m], self.profile.wpp[m]);
                    let vz = wp + phi_z[k];
                    let vzz = wpp + phi_zz[k];
                    let gp = st.grad(phi, nz, i, j, m);
                    let hp = st.hess(phi, nz, i, j, m);
                    let gpz = st.grad(phi_z, nz, i, j, m);
                    let e2 = eps * eps;
                    values[k] = phi_zz[k] + (nl.f(w + phi[k]) - nl.f(w)) + e2 * box_of(&gp, &hp, &c.ginv, &c.b)
                        - e2 * box_of(&gh, &hh, &c.ginv, &c.b) * vz
                        - eps * c.mean_curvature * vz
                        + e2 * quad(&gh, &c.ginv, &gh) * vzz
                        - 2.0 * e2 * quad(&gpz, &c.ginv, &gh);
                }
            }
        }
        Residual { values, truncated }
    }

    fn cell_quadrature(&self, row: &[f64]) -> f64 {
        cell_integrals(row, ZETA_STEP).iter().sum()
    }

    /// `∫ F(y, ζ) w'(ζ) dζ` per surface node.
    pub fn projection(&self, field: &[f64]) -> Vec<f64> {
        let nz = self.nz;
        let wp = &self.profile.wp;
        field
            .chunks(nz)
            .map(|row| {
                let qw: Vec<f64> = row.iter().zip(wp).map(|(a, b)| a * b).collect();
                self.cell_quadrature(&qw)
            })
            .collect()
    }

    /// Discrete `Ξ_R = ∫_{-R}^{R} w'²`, the same quadrature as [`Self::projection`].
    pub fn xi_window(&self) -> f64 {
        let sq: Vec<f64> = self.profile.wp.iter().map(|v| v * v).collect();
        self.cell_quadrature(&sq)
    }

    /// One step: `J_Γ h̃ = ∫ S w' / (ε² Ξ_R)`, `ℰ = S - ε² (J_Γ h̃) w'`, `φ̃ = 𝒯[ℰ]`.
    pub fn induct(&self) -> Result<(AnsatzOrderK<'a>, InductionStep), AnsatzError> {
        let res = self.residual();
        let proj = self.projection(&res.values);
        let xi = self.xi_window();
        let e2 = self.eps * self.eps;
        let source: Vec<f64> = proj.iter().map(|p| p / (e2 * xi)).collect();
        let sol = self.jacobi.solve(&source)?;
        let nz = self.nz;
        let nl = self.profile.nl;
        let mut next = self.clone();
        next.order += 1;
        for (h, d) in next.h.iter_mut().zip(&sol.h) {
            *h += d;
        }
        let mut defect = 0.0f64;
        let mut growth = 0.0f64;
        for (q, g) in source.iter().enumerate() {
            let row: Vec<f64> = (0..nz)
                .map(|m| res.values[q * nz + m] - e2 * g * self.profile.wp[m])
                .collect();
            let out = self
                .profile
                .apply_t_orthogonal(&row, self.half_width, (self.order + 2) as u32)?;
            defect = defect.max(out.orthogonality.abs());
            growth = growth.max(out.envelope_growth);
            for m in 0..nz {
                let k = q * nz + m;
                next.phi[k] += out.p[m];
                next.phi_z[k] += out.dp[m];
                next.phi_zz[k] += -nl.df(self.profile.w[m]) * out.p[m] - row[m];
            }
        }
        let before = proj.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        if defect > 1e-8 * before + 1e-15 {
            return Err(AnsatzError::Orthogonality(defect));
        }
        let step = InductionStep {
            order: self.order,
            projection_before: before,
            projection_defect: defect,
            max_source: source.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            max_dh: sol.h.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            max_envelope_growth: growth,
        };
        Ok((next, step))
    }

    pub fn bounds(&self) -> AnsatzBounds {
        let nz = self.nz;
        let mut env = 0.0f64;
        for (k, p) in self.phi.iter().enumerate() {
            let z = self.zeta(k % nz).abs();
            env = env.max(p.abs() * z.exp() / (self.eps * self.eps * (1.0 + z)));
        }
        AnsatzBounds {
            h_sup: self.h.iter().fold(0.0, |a, v| a.max(v.abs())),
            phi_sup: self.phi.iter().fold(0.0, |a, v| a.max(v.abs())),
            phi_envelope: env,
        }
    }

    /// Copy on the wider window `|ζ| <= r_ext`, with `φ` continued past `±R` by the exponential
    /// tail `φ(y, ±R) e^{-a(|ζ| - R)}`, `a = √W''(1)`.
    pub fn extended(&self, r_ext: f64) -> Result<AnsatzOrderK<'a>, AnsatzError> {
        let pad = ((r_ext - self.half_width) / ZETA_STEP - 1e-9).ceil().max(0.0) as usize;
        if pad == 0 {
            return Ok(self.clone());
        }
        let r = self.half_width + pad as f64 * ZETA_STEP;
        let nz = self.nz + 2 * pad;
        let nl = self.profile.nl;
        let profile = HeteroclinicProfile::on_grid(nl, -r, ZETA_STEP, nz)?;
        let a = nl.decay_rate();
        let ny = self.h.len();
        let mut phi = vec![0.0; ny * nz];
        let mut phi_z = vec![0.0; ny * nz];
        let mut phi_zz = vec![0.0; ny * nz];
        for q in 0..ny {
            let (src, dst) = (q * self.nz, q * nz);
            phi[dst + pad..dst + pad + self.nz].copy_from_slice(&self.phi[src..src + self.nz]);
            phi_z[dst + pad..dst + pad + self.nz].copy_from_slice(&self.phi_z[src..src + self.nz]);
            phi_zz[dst + pad..dst + pad + self.nz].copy_from_slice(&self.phi_zz[src..src + self.nz]);
            let ends = [(self.phi[src], -1.0), (self.phi[src + self.nz - 1], 1.0)];
            for (side, (edge, sign)) in ends.into_iter().enumerate() {
                for d in 1..=pad {
                    let e = edge * (-a * d as f64 * ZETA_STEP).exp();
                    let m = if side == 0 { pad - d } else { pad + self.nz - 1 + d };
                    phi[dst + m] = e;
                    phi_z[dst + m] = -sign * a * e;
                    phi_zz[dst + m] = a * a * e;
                }
            }
        }
        Ok(AnsatzOrderK {
            half_width: r,
            nz,
            profile,
            phi,
            phi_z,
            phi_zz,
            ..self.clone()
        })
    }

    /// `(φ, φ_ζ)` at surface node `q` and arbitrary `ζ`, zero outside the window.
    pub fn phi_at(&self, q: usize, zeta: f64) -> (f64, f64) {
        if zeta.abs() > self.half_width {
            return (0.0, 0.0);
        }
        let nz = self.nz;
        let row = &self.phi[q * nz..(q + 1) * nz];
        let drow = &self.phi_z[q * nz..(q + 1) * nz];
        hermite_eval(-self.half_width, ZETA_STEP, row, drow, zeta)
    }
}

/// Sup residual per `(k, ε)` and the fitted slope of `log sup` against `log ε` per `k`.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub k: usize,
    pub eps: f64,
    pub sup_residual: f64,
    pub truncated: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub k: usize,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualScan {
    pub rows: Vec<ScanRow>,
    pub fits: Vec<SlopeFit>,
}

pub fn residual_scan(
    surface: &TimelikeSurface,
    nl: Nonlinearity,
    ks: &[usize],
    eps_list: &[f64],
) -> Result<ResidualScan, AnsatzError> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut a = AnsatzOrderK::order_zero(surface, nl, eps)?;
        for k in 0..=kmax {
            if ks.contains(&k) {
                let r = a.residual();
                rows.push(ScanRow {
                    k,
                    eps,
                    sup_residual: r.sup(),
                    truncated: r.truncated,
                });
            }
            if k < kmax {
                a = a.induct()?.0;
            }
        }
    }
    let fits = ks
        .iter()
        .map(|&k| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| (r.eps.ln(), r.sup_residual.max(f64::MIN_POSITIVE).ln()))
                .unzip();
            let (slope, intercept) = linear_fit(&x, &y);
            SlopeFit { k, slope, intercept }
        })
        .collect();
    Ok(ResidualScan { rows, fits })
}

/// `u*_ε = χ₀ (w + φ) + (1 - χ₀) 𝕀` with `χ₀ = η(|z|/r)`.
pub struct GlobalApproximation<'a> {
    /// The ansatz continued over the whole band `|z| < 2r`.
    pub ansatz: AnsatzOrderK<'a>,
    pub r: f64,
    /// Wide table of `w` for off-grid evaluation.
    wide: HeteroclinicProfile,
}

/// Sup of `|S(u*_ε)|` on the nodes of the transition band `r < |z| < 2r`.
#[derive(Clone, Debug, Serialize)]
pub struct BandResidual {
    pub sup: f64,
    pub nodes: usize,
}

impl<'a> GlobalApproximation<'a> {
    /// Requires `0 < 2r < δ`. Beyond the ζ window `φ` follows its exponential tail.
    pub fn glue(ansatz: &AnsatzOrderK<'a>, r: f64) -> Result<Self, AnsatzError> {
        let delta = ansatz.surface.delta;
        if !(r > 0.0) || 2.0 * r >= delta {
            return Err(AnsatzError::GlueRadius { r, delta });
        }
        let hmax = ansatz.h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ansatz = ansatz.extended(2.0 * r / ansatz.eps + hmax + 2.0 * ZETA_STEP)?;
        let reach = ansatz.half_width.max(ZETA_CAP);
        let wide = HeteroclinicProfile::build(ansatz.profile.nl, reach, (reach * 300.0) as usize)?;
        Ok(GlobalApproximation { ansatz, r, wide })
    }

    pub fn limit_phase(z: f64) -> f64 {
        if z < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// `u*_ε` at surface node `q` and Fermi coordinate `z`.
    pub fn eval(&self, q: usize, z: f64) -> f64 {
        let chi = cutoff(z / self.r);
        let lim = Self::limit_phase(z);
        if chi == 0.0 {
            return lim;
        }
        let zeta = z / self.ansatz.eps - self.ansatz.h[q];
        let (w, _, _) = self.wide.eval(zeta);
        let (p, _) = self.ansatz.phi_at(q, zeta);
        chi * (w + p) + (1.0 - chi) * lim
    }

    /// `(u*, ∂_t u*)` at `t = 0` on a radial grid, for the collapsing circle.
    /// At `t = 0`, `Ṙ = 0`, so `z = ρ - R₀`, `∂_t z = 0` and `∂_t y₀ = 1/(1 - z/R₀)`.
    pub fn radial_initial_data(&self, radii: &[f64]) -> Result<(Vec<f64>, Vec<f64>), AnsatzError> {
        let s = self.ansatz.surface;
        let r0 = match s.kind {
            SurfaceKind::RadialMinimal { r0 } => r0,
            _ => return Err(AnsatzError::NotRadial),
        };
        let a = &self.ansatz;
        let nz = a.nz;
        let dt = DiffOp::new(s.nt, s.dt, 1, 4);
        let st = s.ntheta * nz;
        let phi_t: Vec<f64> = (0..nz).map(|m| dt.at_strided(&a.phi, 0, m, st)).collect();
        let phi_zt: Vec<f64> = (0..nz).map(|m| dt.at_strided(&a.phi_z, 0, m, st)).collect();
        let h_t = dt.at_strided(&a.h, 0, 0, s.ntheta);
        let mut u0 = Vec::with_capacity(radii.len());
        let mut u1 = Vec::with_capacity(radii.len());
        for &rho in radii {
            let z = rho - r0;
            u0.push(self.eval(0, z));
            let chi = cutoff(z / self.r);
            if chi == 0.0 {
                u1.push(0.0);
                continue;
            }
            let zeta = z / a.eps - a.h[0];
            let (pt, _) = if zeta.abs() <= a.half_width {
                hermite_eval(-a.half_width, ZETA_STEP, &phi_t, &phi_zt, zeta)
            } else {
                (0.0, 0.0)
            };
            let (_, wp, _) = self.wide.eval(zeta);
            let (_, pz) = a.phi_at(0, zeta);
            u1.push(chi * (pt - h_t * (wp + pz)) / (1.0 - z / r0));
        }
        Ok((u0, u1))
    }

    /// `S(u*) = χ(S_v - f(v)) + f(u*) + ε²(χ'' - Hχ')(v - 𝕀) + 2εχ' v_ζ` on the band nodes.
    pub fn band_residual(&self) -> BandResidual {
        let a = &self.ansatz;
        let res = a.residual();
        let nl = a.profile.nl;
        let (nz, eps) = (a.nz, a.eps);
        let mut sup = 0.0f64;
        let mut nodes = 0;
        for q in 0..a.h.len() {
            for m in 0..nz {
                let k = q * nz + m;
                let z = eps * (a.zeta(m) + a.h[q]);
                let s = z.abs() / self.r;
                if !(1.0..2.0).contains(&s) {
                    continue;
                }
                let chi = cutoff(z / self.r);
                let d1 = cutoff_deriv(z / self.r) / self.r;
                let d2 = cutoff_deriv2(z / self.r) / (self.r * self.r);
                let lim = Self::limit_phase(z);
                let v = a.profile.w[m] + a.phi[k];
                let vz = a.profile.wp[m] + a.phi_z[k];
                let hz = a.surface.tube_coefficients(q, z).mean_curvature;
                let u = chi * v + (1.0 - chi) * lim;
                let val = chi * (res.values[k] - nl.f(v))
                    + nl.f(u)
                    + eps * eps * (d2 - hz * d1) * (v - lim)
                    + 2.0 * eps * d1 * vz;
                sup = sup.max(val.abs());
                nodes += 1;
            }
        }
        BandResidual { sup, nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const NL: Nonlinearity = Nonlinearity::AllenCahn;

    fn circle() -> TimelikeSurface {
        TimelikeSurface::radial_minimal(1.0, 0.8, 201, 8).unwrap()
    }

    #[test]
    fn window_rounds_down() {
        assert!((window_half_width(0.279, 0.16) - 0.85).abs() < 1e-12);
        assert_eq!(window_half_width(1.0, 0.01), ZETA_CAP);
    }

    #[test]
    fn plane_residual_vanishes_and_induction_is_fixed() {
        let s = TimelikeSurface::boosted_plane(0.4, 1.0, 41, 8, 1.0).unwrap();
        let a = AnsatzOrderK::order_zero(&s, NL, 0.1).unwrap();
        assert!(a.phi.iter().all(|v| v.abs() < 1e-14));
        assert!(a.residual().sup() < 1e-8);
        let (b, _) = a.induct().unwrap();
        assert!(b.h.iter().all(|v| v.abs() < 1e-12));
        assert!(b.phi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bare_profile_residual_on_circle() {
        let s = circle();
        let eps = 0.05;
        let a = AnsatzOrderK::order_zero(&s, NL, eps).unwrap();
        let zeros = vec![0.0; a.phi.len()];
        let res = a.residual_of(&a.h, &zeros, &zeros, &zeros);
        let nz = a.nz;
        let mut worst = 0.0f64;
        for q in [0, 8 * 100, 8 * 200 + 5] {
            let smp = &s.samples[q];
            for m in 0..nz {
                let zeta = a.zeta(m);
                let z = eps * zeta;
                let expect = -eps * eps * (smp.a_gamma() + z * smp.b_gamma(z)) * zeta * a.profile.wp[m];
                worst = worst.max((res.values[q * nz + m] - expect).abs());
            }
        }
        assert!(worst < 1e-14, "{worst}");
    }

    #[test]
    fn order_zero_matches_closed_form() {
        let s = circle();
        let eps = 0.08;
        let a = AnsatzOrderK::order_zero(&s, NL, eps).unwrap();
        let p = &a.profile;
        let q: Vec<f64> = (0..a.nz).map(|m| p.zeta[m] * p.wp[m]).collect();
        let t = p.apply_t_orthogonal(&q, a.half_width, 1).unwrap();
        let y = 8 * 120 + 3;
        let ag = s.samples[y].a_gamma();
        for m in 0..a.nz {
            assert!((a.phi[y * a.nz + m] + eps * eps * ag * t.p[m]).abs() < 1e-15);
        }
        let sum: f64 = q.iter().zip(&p.wp).map(|(a, b)| a * b).sum();
        assert!(sum.abs() < 1e-13);
    }

    #[test]
    fn quadratic_remainder_of_residual() {
        let s = circle();
        let a = AnsatzOrderK::order_zero(&s, NL, 0.08).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = a.phi.len();
        let modes: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bump = |k: usize| {
            let zeta = a.zeta(k % a.nz);
            let t = s.t(k / a.nz / s.ntheta);
            let g = (-zeta * zeta).exp();
            let c = modes[0] + modes[1] * t + modes[2] * t * t;
            (c * g, c * -2.0 * zeta * g, c * (4.0 * zeta * zeta - 2.0) * g)
        };
        let base = a.residual();
        let lin = |amp: f64| {
            let mut p = a.phi.clone();
            let mut pz = a.phi_z.clone();
            let mut pzz = a.phi_zz.clone();
            for k in 0..n {
                let (v, d, dd) = bump(k);
                p[k] += amp * v;
                pz[k] += amp * d;
                pzz[k] += amp * dd;
            }
            let r = a.residual_of(&a.h, &p, &pz, &pzz);
            r.values
                .iter()
                .zip(&base.values)
                .map(|(x, y)| x - y)
                .collect::<Vec<f64>>()
        };
        // the nonlinear remainder of S(v + sφ) - S(v) - s·DS[φ] is quadratic in s
        let d1 = lin(1e-4);
        let d2 = lin(2e-4);
        let rem: f64 = d1.iter().zip(&d2).map(|(a, b)| (b - 2.0 * a).abs()).fold(0.0, f64::max);
        assert!(rem < 1e-7 * 4.0 && rem > 0.0, "{rem}");
    }

    #[test]
    fn induction_reduces_projection() {
        let s = circle();
        let eps = 0.01;
        let a = AnsatzOrderK::order_zero(&s, NL, eps).unwrap();
        let before = a.projection(&a.residual().values);
        let (b, step) = a.induct().unwrap();
        assert!(step.projection_defect <= 1e-8 * step.projection_before);
        let after = b.projection(&b.residual().values);
        for (x, y) in before.iter().zip(&after) {
            assert!(y.abs() <= eps * x.abs(), "{y} {x}");
        }
        assert!(b.h[0] == 0.0 && b.h.iter().any(|v| *v != 0.0));
        assert!(b.residual().sup() < a.residual().sup());
        let bounds = b.bounds();
        assert!(bounds.h_sup < eps && bounds.phi_envelope < 10.0, "{bounds:?}");
    }

    #[test]
    fn glued_field_limits() {
        let s = circle();
        let a = AnsatzOrderK::order_zero(&s, NL, 0.05).unwrap();
        let r = 0.2 * s.delta;
        let g = GlobalApproximation::glue(&a, r).unwrap();
        assert_eq!(g.eval(0, 3.0 * r), 1.0);
        assert_eq!(g.eval(0, -3.0 * r), -1.0);
        assert!(g.eval(17, 0.0).abs() < 0.05);
        assert!(GlobalApproximation::glue(&a, 0.5 * s.delta).is_err());
        assert!(g.ansatz.half_width >= 2.0 * r / 0.05);
        let (u0, u1) = g.radial_initial_data(&[0.5, 1.0, 1.5]).unwrap();
        assert_eq!((u0[0], u0[2]), (-1.0, 1.0));
        assert!(u0[1].abs() < 1e-12 && u1[1].abs() < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let z = rng.random_range(-3.0 * r..3.0 * r);
            assert!(g.eval(rng.random_range(0..a.h.len()), z).abs() <= 1.0 + 0.01);
        }
    }

    #[test]
    fn extension_keeps_window_and_decays() {
        let s = circle();
        let (a, _) = AnsatzOrderK::build(&s, NL, 0.05, 1).unwrap();
        let e = a.extended(a.half_width + 1.0).unwrap();
        assert_eq!(e.nz, a.nz + 40);
        let rate = 2f64.sqrt();
        for q in [0, 8 * 150 + 2] {
            for m in 0..a.nz {
                assert_eq!(e.phi[q * e.nz + m + 20], a.phi[q * a.nz + m]);
                assert!((e.profile.zeta[m + 20] - a.zeta(m)).abs() < 1e-12);
            }
            let edge = a.phi[q * a.nz + a.nz - 1];
            let far = e.phi[q * e.nz + e.nz - 1];
            assert!((far - edge * (-rate).exp()).abs() <= 1e-12 * edge.abs());
            assert!((e.phi_zz[q * e.nz] - 2.0 * e.phi[q * e.nz]).abs() <= 1e-12 * e.phi[q * e.nz].abs());
        }
        assert!(e.residual().truncated == 0);
    }
}
