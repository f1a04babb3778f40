//! Fermi coordinates `(y, z) ↦ Y(y) + zν(y)` about a sampled surface and the
//! modified chart whose time coordinate is lab time away from the surface.

use crate::geometry::{minkowski, SurfaceSample, TimelikeSurface};
use crate::numerics::{bracketed_root, smoothstep5, smoothstep5_integral, DiffOp};
use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2, Vector3};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FermiError {
    #[error("no root for eta0 in [0, T] at (y0 = {y0}, z = {z}); delta1 too large for this surface")]
    NoRoot { y0: f64, z: f64 },
    #[error("modified metric lost its signature at (y0 = {y0}, z = {z}) even after shrinking r1 to {r1}")]
    Signature { y0: f64, z: f64, r1: f64 },
    #[error("chart domain is empty: T1 = {t1}, delta1 = {delta1}")]
    EmptyDomain { t1: f64, delta1: f64 },
}

/// Relative width of the smoothing bands of `chi_blend`.
pub const BLEND_BAND: f64 = 0.02;

/// `r₂ = r₁²/(1 + r₁)`.
pub fn inner_radius(r1: f64) -> f64 {
    r1 * r1 / (1.0 + r1)
}

/// Regularized blending profile. Away from the smoothing bands it is 1 on `|z| <= r₂`,
/// `r₁(r₁/|z| - 1)` on `r₂ <= |z| <= r₁` and 0 beyond `r₁`; it is exactly 1 on
/// `|z| <= r₂(1 - s_m)` and exactly 0 on `|z| >= r₁(1 + s_m)`.
pub fn chi_blend(z: f64, r1: f64) -> f64 {
    chi_blend_with_deriv(z, r1).0
}

/// `(χ, dχ/dz)`.
///
/// The profile is built from `u(z) = z(1 - χ)`, whose slope `u' = 1 - χ - zχ'` is
/// `0`, `1 + r₁`, `1` on the three pieces. Smoothing `u'` symmetrically about the two
/// kinks keeps `0 <= u' <= 1 + r₁` and leaves `u` unchanged outside the bands.
pub fn chi_blend_with_deriv(z: f64, r1: f64) -> (f64, f64) {
    let a = z.abs();
    let sign = if z < 0.0 { -1.0 } else { 1.0 };
    let r2 = inner_radius(r1);
    let (lo0, lo1) = (r2 * (1.0 - BLEND_BAND), r2 * (1.0 + BLEND_BAND));
    let (hi0, hi1) = (r1 * (1.0 - BLEND_BAND), r1 * (1.0 + BLEND_BAND));
    if a <= lo0 {
        return (1.0, 0.0);
    }
    if a >= hi1 {
        return (0.0, 0.0);
    }
    let k = 1.0 + r1;
    let (u, du) = if a < lo1 {
        let w = lo1 - lo0;
        let x = (a - lo0) / w;
        (k * w * smoothstep5_integral(x), k * smoothstep5(x))
    } else if a <= hi0 {
        (k * a - r1 * r1, k)
    } else {
        let w = hi1 - hi0;
        let x = (a - hi0) / w;
        (
            k * a - r1 * r1 - r1 * w * smoothstep5_integral(x),
            k - r1 * smoothstep5(x),
        )
    };
    let chi = 1.0 - u / a;
    let dchi = u / (a * a) - du / a;
    (chi, sign * dchi)
}

/// Fermi chart over a sampled surface; samples are interpolated in `t` by cubic Hermite.
pub struct FermiChart<'a> {
    pub surface: &'a TimelikeSurface,
    nu0: Vec<f64>,
    nu0_t: Vec<f64>,
    nu0_th: Vec<f64>,
    nu0_th_t: Vec<f64>,
}

/// Modified-chart data at one point.
#[derive(Clone, Debug)]
pub struct ModifiedPoint {
    pub eta0: f64,
    pub y0: f64,
    /// `(∂y₀/∂𝚢₀, ∂y₀/∂𝚢_θ, ∂y₀/∂𝚣)`.
    pub dy0: [f64; 3],
    /// `(∂η₀/∂𝚢₀, ∂η₀/∂𝚢_θ, ∂η₀/∂𝚣)`.
    pub deta0: [f64; 3],
    /// Fermi metric at `(y₀, θ, 𝚣)`.
    pub fermi: Matrix3<f64>,
    /// Modified metric `𝚐`.
    pub metric: Matrix3<f64>,
    /// Lab time of the point.
    pub lab_time: f64,
}

impl<'a> FermiChart<'a> {
    pub fn new(surface: &'a TimelikeSurface) -> Self {
        let (nt, nth) = (surface.nt, surface.ntheta);
        let nu0: Vec<f64> = surface.samples.iter().map(|s| s.nu[0]).collect();
        let nu0_t: Vec<f64> = surface.samples.iter().map(|s| s.dnu(0)[0]).collect();
        let nu0_th: Vec<f64> = surface.samples.iter().map(|s| s.dnu(1)[0]).collect();
        let d = DiffOp::new(nt, surface.dt, 1, 4);
        let nu0_th_t = (0..nt * nth)
            .map(|q| d.at_strided(&nu0_th, q / nth, q % nth, nth))
            .collect();
        FermiChart {
            surface,
            nu0,
            nu0_t,
            nu0_th,
            nu0_th_t,
        }
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let s = self.surface;
        let mut u = t / s.dt;
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        let i = (u.floor().max(0.0) as usize).min(s.nt - 2);
        (i, u - i as f64)
    }

    /// Cubic Hermite in `t` of a per-sample scalar at column `j`; returns (value, ∂_t).
    fn herm(&self, f: &[f64], df: &[f64], j: usize, t: f64) -> (f64, f64) {
        let (i, u) = self.locate(t);
        let nth = self.surface.ntheta;
        let h = self.surface.dt;
        let (p0, p1) = (f[i * nth + j], f[(i + 1) * nth + j]);
        let (m0, m1) = (df[i * nth + j] * h, df[(i + 1) * nth + j] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let v =
            (2.0 * u3 - 3.0 * u2 + 1.0) * p0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * p1 + (u3 - u2) * m1;
        let d = (6.0 * u2 - 6.0 * u) * p0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * p1
            + (3.0 * u2 - 2.0 * u) * m1;
        (v, d / h)
    }

    /// `ν⁰(t, θ_j)` and its `t`-derivative.
    pub fn nu0(&self, t: f64, j: usize) -> (f64, f64) {
        self.herm(&self.nu0, &self.nu0_t, j, t)
    }

    fn matrix_at(&self, t: f64, j: usize, pick: impl Fn(usize) -> (Matrix2<f64>, Matrix2<f64>)) -> Matrix2<f64> {
        let (i, u) = self.locate(t);
        let nth = self.surface.ntheta;
        let h = self.surface.dt;
        let (a0, da0) = pick(i * nth + j);
        let (a1, da1) = pick((i + 1) * nth + j);
        let u2 = u * u;
        let u3 = u2 * u;
        a0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + da0 * ((u3 - 2.0 * u2 + u) * h)
            + a1 * (-2.0 * u3 + 3.0 * u2)
            + da1 * ((u3 - u2) * h)
    }

    /// Surface data `(g⁰, S)` at an arbitrary time on column `j`.
    pub fn surface_data(&self, t: f64, j: usize) -> SurfaceSample {
        let s = self.surface;
        let g0 = self.matrix_at(t, j, |q| (s.samples[q].g0, s.dg0[q][0]));
        let k = self.matrix_at(t, j, |q| (s.samples[q].k, s.dk[q][0]));
        let inv = g0.try_inverse().unwrap_or_else(Matrix2::zeros);
        let base = s.sample(0, j);
        SurfaceSample {
            g0,
            k,
            shape: inv * k,
            ..base.clone()
        }
    }

    /// Fermi metric in `(t, θ, z)` at an arbitrary time.
    pub fn metric(&self, t: f64, j: usize, z: f64) -> Matrix3<f64> {
        let g = self.surface_data(t, j).tube_metric(z);
        Matrix3::new(g[(0, 0)], g[(0, 1)], 0.0, g[(1, 0)], g[(1, 1)], 0.0, 0.0, 0.0, 1.0)
    }

    /// Physical point `Y(t, θ_j) + zν(t, θ_j)` (time component exact, space by Hermite in `t`).
    pub fn point(&self, t: f64, j: usize, z: f64) -> Vector3<f64> {
        let s = self.surface;
        let mut out = Vector3::zeros();
        for c in 0..3 {
            let y: Vec<f64> = (0..s.nt).map(|i| s.sample(i, j).y[c]).collect();
            let yt: Vec<f64> = (0..s.nt).map(|i| s.sample(i, j).y_t[c]).collect();
            let nu: Vec<f64> = (0..s.nt).map(|i| s.sample(i, j).nu[c]).collect();
            let nut: Vec<f64> = (0..s.nt).map(|i| s.sample(i, j).dnu(0)[c]).collect();
            let yv = crate::numerics::hermite_eval(0.0, s.dt, &y, &yt, t).0;
            let nv = crate::numerics::hermite_eval(0.0, s.dt, &nu, &nut, t).0;
            out[c] = yv + z * nv;
        }
        out[0] = t + z * self.nu0(t, j).0;
        out
    }

    /// Solves `η + 𝚣 ν⁰(η, θ_j) = 𝚢₀` for `η ∈ [0, T]`.
    pub fn solve_eta0(&self, y0: f64, j: usize, z: f64) -> Result<f64, FermiError> {
        if z == 0.0 {
            return Ok(y0);
        }
        let f = |eta: f64| eta + z * self.nu0(eta, j).0 - y0;
        if f(y0) == 0.0 {
            return Ok(y0);
        }
        let bound = self.nu0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let reach = 1.5 * z.abs() * bound + 1e-12;
        let a = (y0 - reach).max(0.0);
        let b = (y0 + reach).min(self.surface.t_max);
        bracketed_root(f, a, b, 1e-13, 200).ok_or(FermiError::NoRoot { y0, z })
    }

    /// Derivatives of `η₀` by the implicit function theorem.
    pub fn eta0_derivs(&self, eta: f64, j: usize, z: f64) -> [f64; 3] {
        let (n0, n0t) = self.nu0(eta, j);
        let (n0th, _) = self.herm(&self.nu0_th, &self.nu0_th_t, j, eta);
        let fe = 1.0 + z * n0t;
        [1.0 / fe, -z * n0th / fe, -n0 / fe]
    }
}

/// Modified Fermi chart on `[0, T₁] × Γ⁰ × (-δ₁, δ₁)`.
pub struct ModifiedFermiChart<'a> {
    pub fermi: FermiChart<'a>,
    pub t1: f64,
    pub delta1: f64,
    pub r1: f64,
    pub r2: f64,
    /// Number of halvings of `r₁` that were needed.
    pub shrinks: u32,
    /// Measured `c = min (1 + (∂_z η₀)² g₀₀(η₀))`.
    pub c_gnn: f64,
}

/// Invariant checks of the modified chart over its sample set.
#[derive(Clone, Debug, Serialize)]
pub struct ModifiedReport {
    pub r1: f64,
    pub r2: f64,
    pub delta1: f64,
    pub t1: f64,
    pub shrinks: u32,
    pub c_gnn: f64,
    pub points: usize,
    /// Max entrywise difference between `𝚐` and the Fermi metric at the same point,
    /// over the region `|z| <= r₂(1 - s_m)` where the blend is exactly 1.
    pub inner_mismatch: f64,
    /// Max difference between the interpolated Fermi metric and the sampled one at nodes.
    pub fermi_interp_defect: f64,
    /// Max `|t - 𝚢₀|` over `|z| >= r₁(1 + s_m)`.
    pub outer_time_defect: f64,
    pub max_g00: f64,
    pub min_spatial_eig: f64,
    pub min_gnn_over_c: f64,
    pub block_inverse_defect: f64,
    pub max_inverse_g00: f64,
    pub min_inverse_spatial_eig: f64,
    pub max_eta_root_defect: f64,
    /// Fitted `C` in `|η₀ - 𝚢₀| <= C|𝚣|` and `|∂_θ η₀| <= C|𝚣|`.
    pub eta_shift_constant: f64,
    pub eta_angle_constant: f64,
}

impl ModifiedReport {
    pub fn passes(&self) -> bool {
        self.inner_mismatch == 0.0
            && self.fermi_interp_defect <= 1e-12
            && self.outer_time_defect <= 1e-11
            && self.max_g00 < 0.0
            && self.min_spatial_eig > 0.0
            && self.min_gnn_over_c >= 0.5
            && self.block_inverse_defect <= 1e-10
            && self.max_inverse_g00 < 0.0
            && self.min_inverse_spatial_eig > 0.0
    }
}

/// Inverse of a symmetric 3×3 matrix from the block formula with `a = m₀₀`.
pub fn block_inverse(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let a = m[(0, 0)];
    let b = RowVector2::new(m[(0, 1)], m[(0, 2)]);
    let bb = Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)]);
    let binv = bb.try_inverse()?;
    let schur_a = a - (b * binv * b.transpose())[(0, 0)];
    let schur_b = (bb - b.transpose() * b / a).try_inverse()?;
    let top = 1.0 / schur_a;
    let off = -(b / a) * schur_b;
    let mut out = Matrix3::zeros();
    out[(0, 0)] = top;
    for c in 0..2 {
        out[(0, c + 1)] = off[c];
        out[(c + 1, 0)] = off[c];
        for d in 0..2 {
            out[(c + 1, d + 1)] = schur_b[(c, d)];
        }
    }
    Some(out)
}

fn sym2_min_eig(a: f64, b: f64, d: f64) -> f64 {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    m - r
}

impl<'a> ModifiedFermiChart<'a> {
    /// Builds the chart with `δ₁ = min(0.9δ, 0.9 (T - T₁)/max|ν⁰|)` and `r₁ = δ₁/4`,
    /// halving `r₁` up to four times until the signature checks pass.
    pub fn build(surface: &'a TimelikeSurface, t1: f64, nz: usize) -> Result<Self, FermiError> {
        let max_nu0 = surface.samples.iter().map(|s| s.nu[0].abs()).fold(0.0, f64::max);
        let mut delta1 = 0.9 * surface.delta;
        if max_nu0 > 0.0 {
            delta1 = delta1.min(0.9 * (surface.t_max - t1) / max_nu0);
        }
        if !(t1 > 0.0 && t1 <= surface.t_max && delta1 > 0.0) {
            return Err(FermiError::EmptyDomain { t1, delta1 });
        }
        let mut r1 = delta1 / 4.0;
        let mut last_err = None;
        for shrinks in 0..=4 {
            let mut chart = ModifiedFermiChart {
                fermi: FermiChart::new(surface),
                t1,
                delta1,
                r1,
                r2: inner_radius(r1),
                shrinks,
                c_gnn: 0.0,
            };
            chart.c_gnn = chart.measure_c(nz)?;
            let rep = chart.report(nz)?;
            if rep.max_g00 < 0.0 && rep.min_spatial_eig > 0.0 && rep.min_gnn_over_c >= 0.5 {
                return Ok(chart);
            }
            last_err = Some(FermiError::Signature { y0: t1, z: r1, r1 });
            r1 *= 0.5;
        }
        Err(last_err.unwrap())
    }

    fn time_rows(&self) -> Vec<usize> {
        let s = self.fermi.surface;
        (0..s.nt).filter(|&i| s.t(i) <= self.t1 + 1e-12).collect()
    }

    /// Sample offsets in `(-δ₁, δ₁)`, refined near `±r₂` and `±r₁`.
    pub fn z_samples(&self, nz: usize) -> Vec<f64> {
        let mut zs: Vec<f64> = (0..nz)
            .map(|q| self.delta1 * 0.999 * (2.0 * q as f64 / (nz - 1) as f64 - 1.0))
            .collect();
        for &r in &[self.r2, self.r1] {
            for k in -4..=4 {
                let z = r * (1.0 + 0.01 * k as f64);
                if z < self.delta1 {
                    zs.push(z);
                    zs.push(-z);
                }
            }
        }
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zs
    }

    fn measure_c(&self, nz: usize) -> Result<f64, FermiError> {
        let mut c = f64::INFINITY;
        for i in self.time_rows() {
            for j in 0..self.fermi.surface.ntheta {
                for z in self.z_samples(nz) {
                    let y0 = self.fermi.surface.t(i);
                    let eta = self.fermi.solve_eta0(y0, j, z)?;
                    let d = self.fermi.eta0_derivs(eta, j, z);
                    let g00 = self.fermi.metric(eta, j, z)[(0, 0)];
                    c = c.min(1.0 + d[2] * d[2] * g00);
                }
            }
        }
        Ok(c)
    }

    /// `y₀(𝚢, 𝚣) = χ 𝚢₀ + (1 - χ) η₀` and the modified metric at `(𝚢₀, θ_j, 𝚣)`.
    pub fn point(&self, y0: f64, j: usize, z: f64) -> Result<ModifiedPoint, FermiError> {
        let (chi, dchi) = chi_blend_with_deriv(z, self.r1);
        let eta = self.fermi.solve_eta0(y0, j, z)?;
        let de = self.fermi.eta0_derivs(eta, j, z);
        let t = chi * y0 + (1.0 - chi) * eta;
        let dy0 = [
            chi + (1.0 - chi) * de[0],
            (1.0 - chi) * de[1],
            dchi * (y0 - eta) + (1.0 - chi) * de[2],
        ];
        let g = self.fermi.metric(t, j, z);
        let mut dpsi = Matrix3::identity();
        for c in 0..3 {
            dpsi[(0, c)] = dy0[c];
        }
        let metric = dpsi.transpose() * g * dpsi;
        let lab_time = t + z * self.fermi.nu0(t, j).0;
        Ok(ModifiedPoint {
            eta0: eta,
            y0: t,
            dy0,
            deta0: de,
            fermi: g,
            metric,
            lab_time,
        })
    }

    pub fn report(&self, nz: usize) -> Result<ModifiedReport, FermiError> {
        let s = self.fermi.surface;
        let mut rep = ModifiedReport {
            r1: self.r1,
            r2: self.r2,
            delta1: self.delta1,
            t1: self.t1,
            shrinks: self.shrinks,
            c_gnn: self.c_gnn,
            points: 0,
            inner_mismatch: 0.0,
            fermi_interp_defect: 0.0,
            outer_time_defect: 0.0,
            max_g00: f64::NEG_INFINITY,
            min_spatial_eig: f64::INFINITY,
            min_gnn_over_c: f64::INFINITY,
            block_inverse_defect: 0.0,
            max_inverse_g00: f64::NEG_INFINITY,
            min_inverse_spatial_eig: f64::INFINITY,
            max_eta_root_defect: 0.0,
            eta_shift_constant: 0.0,
            eta_angle_constant: 0.0,
        };
        for i in self.time_rows() {
            let y0 = s.t(i);
            for j in 0..s.ntheta {
                for z in self.z_samples(nz) {
                    let p = self.point(y0, j, z)?;
                    rep.points += 1;
                    let m = &p.metric;
                    if z.abs() <= self.r2 * (1.0 - BLEND_BAND) {
                        rep.inner_mismatch = rep.inner_mismatch.max((m - p.fermi).abs().max());
                        if let Ok(fermi) = s.fermi_metric(i, j, z) {
                            rep.fermi_interp_defect = rep.fermi_interp_defect.max((p.fermi - fermi).abs().max());
                        }
                    }
                    if z.abs() >= self.r1 * (1.0 + BLEND_BAND) {
                        rep.outer_time_defect = rep.outer_time_defect.max((p.lab_time - y0).abs());
                    }
                    let root = p.eta0 + z * self.fermi.nu0(p.eta0, j).0 - y0;
                    rep.max_eta_root_defect = rep.max_eta_root_defect.max(root.abs());
                    if z != 0.0 {
                        rep.eta_shift_constant = rep.eta_shift_constant.max((p.eta0 - y0).abs() / z.abs());
                        rep.eta_angle_constant = rep.eta_angle_constant.max(p.deta0[1].abs() / z.abs());
                    }
                    rep.max_g00 = rep.max_g00.max(m[(0, 0)]);
                    rep.min_spatial_eig = rep.min_spatial_eig.min(sym2_min_eig(m[(1, 1)], m[(1, 2)], m[(2, 2)]));
                    let band = self.r2 * (1.0 - BLEND_BAND)..=self.r1 * (1.0 + BLEND_BAND);
                    if band.contains(&z.abs()) && self.c_gnn > 0.0 {
                        rep.min_gnn_over_c = rep.min_gnn_over_c.min(m[(2, 2)] / self.c_gnn);
                    }
                    match block_inverse(m) {
                        Some(inv) => {
                            let defect = (m * inv - Matrix3::identity()).abs().max();
                            rep.block_inverse_defect = rep.block_inverse_defect.max(defect);
                            rep.max_inverse_g00 = rep.max_inverse_g00.max(inv[(0, 0)]);
                            rep.min_inverse_spatial_eig =
                                rep.min_inverse_spatial_eig
                                    .min(sym2_min_eig(inv[(1, 1)], inv[(1, 2)], inv[(2, 2)]));
                        }
                        None => rep.block_inverse_defect = f64::INFINITY,
                    }
                }
            }
        }
        if rep.min_gnn_over_c == f64::INFINITY {
            rep.min_gnn_over_c = 1.0;
        }
        Ok(rep)
    }
}

/// Smallest ratio `|Φ(p) - Φ(q)| / |p - q|` over pairs of coarse tube samples on a common
/// time row; positive values indicate the tube map is injective on the sample set.
pub fn injectivity_margin(chart: &FermiChart, rows: usize, nz: usize) -> f64 {
    let s = chart.surface;
    let mut best = f64::INFINITY;
    let stride = (s.nt / rows.max(1)).max(1);
    for i in (0..s.nt).step_by(stride) {
        let t = s.t(i);
        let mut pts: Vec<(Vector2<f64>, Vector3<f64>)> = Vec::new();
        for j in 0..s.ntheta {
            for q in 0..nz {
                let z = s.delta * 0.95 * (2.0 * q as f64 / (nz - 1).max(1) as f64 - 1.0);
                let param = Vector2::new(j as f64 * s.dtheta, z);
                pts.push((param, chart.point(t, j, z)));
            }
        }
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let mut dth = (pts[a].0[0] - pts[b].0[0]).abs();
                dth = dth.min(s.period - dth);
                let dp = (dth * dth + (pts[a].0[1] - pts[b].0[1]).powi(2)).sqrt();
                let dx = (pts[a].1 - pts[b].1).norm();
                best = best.min(dx / dp);
            }
        }
    }
    best
}

/// `⟨X, X⟩` for `X = ∂_z Φ₀` along the curve of constant lab time, used as an oracle for `c`.
pub fn lab_slice_tangent_norm(chart: &FermiChart, y0: f64, j: usize, z: f64, h: f64) -> Result<f64, FermiError> {
    let a = chart.solve_eta0(y0, j, z - h)?;
    let b = chart.solve_eta0(y0, j, z + h)?;
    let x = (chart.point(b, j, z + h) - chart.point(a, j, z - h)) / (2.0 * h);
    Ok(minkowski(&x, &x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_blend_shape() {
        let r1 = 0.1;
        let r2 = inner_radius(r1);
        assert_eq!(chi_blend(0.0, r1), 1.0);
        assert_eq!(chi_blend(r2 * (1.0 - BLEND_BAND), r1), 1.0);
        assert_eq!(chi_blend(r1 * (1.0 + BLEND_BAND), r1), 0.0);
        // the blend leaves the piecewise profile untouched outside the bands
        let z = 0.5 * (r2 + r1);
        assert!((chi_blend(z, r1) - r1 * (r1 / z - 1.0)).abs() < 1e-15);
        // 1 - χ - zχ' stays within [0, 1 + r₁]
        for k in 0..=4000 {
            let z = r2 * 0.9 + (r1 * 1.1 - r2 * 0.9) * k as f64 / 4000.0;
            let (c, d) = chi_blend_with_deriv(z, r1);
            let slope = 1.0 - c - z * d;
            assert!(slope >= -1e-12 && slope <= 1.0 + r1 + 1e-12);
        }
        assert_eq!(chi_blend(r1 + 0.3, r1), 0.0);
        let mid = (r1 * r2).sqrt();
        assert!((chi_blend(mid, r1) - r1 * (r1 / mid - 1.0)).abs() < 0.05);
        assert_eq!(chi_blend(-0.07, r1), chi_blend(0.07, r1));
        let mut prev = 1.0;
        for k in 0..=2000 {
            let z = r2 * 0.9 + (r1 * 1.1 - r2 * 0.9) * k as f64 / 2000.0;
            let (v, d) = chi_blend_with_deriv(z, r1);
            assert!(v <= prev + 1e-15 && d <= 1e-12);
            let h = 1e-7;
            let fd = (chi_blend(z + h, r1) - chi_blend(z - h, r1)) / (2.0 * h);
            assert!((fd - d).abs() < 1e-4 * (1.0 + d.abs()), "{z} {fd} {d}");
            prev = v;
        }
    }

    #[test]
    fn eta0_plane_closed_form() {
        let v = 0.4;
        let s = TimelikeSurface::boosted_plane(v, 1.0, 21, 4, 1.0).unwrap();
        let f = FermiChart::new(&s);
        let gamma = 1.0 / (1.0f64 - v * v).sqrt();
        for &(y0, z) in &[(0.5, 0.1), (0.3, -0.2), (0.7, 0.25)] {
            let eta = f.solve_eta0(y0, 1, z).unwrap();
            assert!((eta - (y0 - z * gamma * v)).abs() < 1e-12);
        }
        assert_eq!(f.solve_eta0(0.4, 2, 0.0).unwrap(), 0.4);
    }

    #[test]
    fn eta0_vanishes_on_initial_slice() {
        let s = TimelikeSurface::radial_minimal(1.0, 1.0, 101, 8).unwrap();
        let f = FermiChart::new(&s);
        for z in [-0.15, 0.05, 0.15] {
            assert_eq!(f.solve_eta0(0.0, 3, z).unwrap(), 0.0);
            let eta = f.solve_eta0(0.5, 3, z).unwrap();
            assert!((eta + z * f.nu0(eta, 3).0 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_modified_chart() {
        let s = TimelikeSurface::radial_minimal(1.0, 1.0, 41, 8).unwrap();
        let m = ModifiedFermiChart::build(&s, 0.8, 41).unwrap();
        let rep = m.report(41).unwrap();
        assert!(rep.passes(), "{rep:?}");
        // c agrees with <X,X> on the constant-time curve
        let x = lab_slice_tangent_norm(&m.fermi, 0.6, 2, 0.05, 1e-5).unwrap();
        let eta = m.fermi.solve_eta0(0.6, 2, 0.05).unwrap();
        let d = m.fermi.eta0_derivs(eta, 2, 0.05);
        let g00 = m.fermi.metric(eta, 2, 0.05)[(0, 0)];
        assert!((x - (1.0 + d[2] * d[2] * g00)).abs() < 1e-6);
        assert!(injectivity_margin(&m.fermi, 4, 5) > 0.0);
    }

    #[test]
    fn plane_modified_metric_is_translation_invariant() {
        let s = TimelikeSurface::boosted_plane(0.0, 1.0, 21, 4, 1.0).unwrap();
        let m = ModifiedFermiChart::build(&s, 0.8, 21).unwrap();
        let a = m.point(0.3, 0, 0.1).unwrap().metric;
        let b = m.point(0.6, 2, 0.1).unwrap().metric;
        assert!((a - b).abs().max() < 1e-14);
        assert!(m.report(21).unwrap().passes());
    }

    #[test]
    fn block_inverse_matches_direct() {
        let m = Matrix3::new(-0.8, 0.1, 0.05, 0.1, 1.3, 0.2, 0.05, 0.2, 0.9);
        let inv = block_inverse(&m).unwrap();
        assert!((m * inv - Matrix3::identity()).abs().max() < 1e-14);
    }
}
