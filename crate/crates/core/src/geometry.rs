//! Timelike surfaces in `ℝ^{1+2}`: Minkowski normals, the metric of the normal
//! tube, mean curvature of the parallel surfaces, and the radially symmetric
//! minimal surface.

use crate::numerics::{spectral_derivative, DiffOp};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("surface is not timelike at sample ({0}, {1})")]
    NotTimelike(usize, usize),
    #[error("|z| = {z} is outside the tube of half-width {delta}")]
    OutOfTube { z: f64, delta: f64 },
    #[error("surface is not minimal: |H| = {0} at z = 0")]
    NotMinimal(f64),
    #[error("T = {t} is too close to collapse (limit {limit})")]
    TooCloseToCollapse { t: f64, limit: f64 },
    #[error("invalid sampling: {0}")]
    BadGrid(String),
    #[error("flow left the sampled patch")]
    FlowEscaped,
}

/// `⟨a, b⟩ = -a₀b₀ + a₁b₁ + a₂b₂`.
pub fn minkowski(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The matrix `J = diag(-1, 1, 1)`.
pub fn j_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SurfaceKind {
    /// `x₁ = v t`, parametrized by `(t, y')` with `y'` periodic of the given length.
    BoostedPlane { v: f64, period: f64 },
    /// `|x| = R₀` for all times; not minimal.
    StaticCylinder { r0: f64 },
    /// `|x| = R(t)` with `R̈ = -(1 - Ṙ²)/R`, `R(0) = R₀`, `Ṙ(0) = 0`.
    RadialMinimal { r0: f64 },
}

/// Geometry at one sample `(t_i, θ_j)`.
#[derive(Clone, Debug)]
pub struct SurfaceSample {
    pub y: Vector3<f64>,
    pub y_t: Vector3<f64>,
    pub y_th: Vector3<f64>,
    pub y_tt: Vector3<f64>,
    pub y_tth: Vector3<f64>,
    pub y_thth: Vector3<f64>,
    pub nu: Vector3<f64>,
    /// Induced metric `g⁰_ab = ⟨∂_aY, ∂_bY⟩`, index 0 = t, 1 = θ.
    pub g0: Matrix2<f64>,
    /// Second fundamental form `k_ab = ⟨ν, ∂_a∂_bY⟩`.
    pub k: Matrix2<f64>,
    /// Shape operator `S = (g⁰)^{-1} k`, so that `∂_aν = -S^c_a ∂_cY`.
    pub shape: Matrix2<f64>,
}

impl SurfaceSample {
    /// `∂_aν` for a = 0 (t) and 1 (θ).
    pub fn dnu(&self, a: usize) -> Vector3<f64> {
        -(self.shape[(0, a)] * self.y_t + self.shape[(1, a)] * self.y_th)
    }

    /// `g(z) = g⁰ (I - zS)²` on the tangential block.
    pub fn tube_metric(&self, z: f64) -> Matrix2<f64> {
        let m = Matrix2::identity() - self.shape * z;
        self.g0 * m * m
    }

    /// Mean curvature of the parallel surface at distance `z`: `tr(S (I - zS)^{-1})`.
    pub fn mean_curvature(&self, z: f64) -> f64 {
        let m = Matrix2::identity() - self.shape * z;
        match m.try_inverse() {
            Some(inv) => (self.shape * inv).trace(),
            None => f64::INFINITY,
        }
    }

    /// `a_Γ = ∂_z H|_{z=0} = tr S²`.
    pub fn a_gamma(&self) -> f64 {
        (self.shape * self.shape).trace()
    }

    /// `b_Γ(z) = (H(z) - H(0) - z a_Γ)/z² = tr(S³ (I - zS)^{-1})`.
    pub fn b_gamma(&self, z: f64) -> f64 {
        let m = Matrix2::identity() - self.shape * z;
        match m.try_inverse() {
            Some(inv) => (self.shape * self.shape * self.shape * inv).trace(),
            None => f64::INFINITY,
        }
    }

    /// Largest `|λ|` over eigenvalues of the shape operator.
    pub fn spectral_radius(&self) -> f64 {
        let tr = self.shape.trace();
        let det = self.shape.determinant();
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            0.5 * tr.abs() + disc.sqrt()
        } else {
            det.abs().sqrt()
        }
    }
}

/// Sampled timelike surface on a uniform `(t, θ)` grid, `θ` periodic.
#[derive(Clone, Debug)]
pub struct TimelikeSurface {
    pub kind: SurfaceKind,
    pub nt: usize,
    pub ntheta: usize,
    pub t_max: f64,
    pub dt: f64,
    pub period: f64,
    pub dtheta: f64,
    pub samples: Vec<SurfaceSample>,
    /// `∂_t g⁰` and `∂_θ g⁰` per sample.
    pub dg0: Vec<[Matrix2<f64>; 2]>,
    /// `∂_t k` and `∂_θ k` per sample.
    pub dk: Vec<[Matrix2<f64>; 2]>,
    /// `R(t)` and `Ṙ(t)` for the circular kinds.
    pub radius: Vec<f64>,
    pub radius_dot: Vec<f64>,
    /// Tube half-width.
    pub delta: f64,
    pub minimal: bool,
    /// Sup difference of `R` between the ODE step and its half (zero for analytic kinds).
    pub ode_error: f64,
}

/// Coefficients of `□_{Γ_z} = g^{ab}∂_a∂_b + B^b∂_b` and the mean curvature `H(z)`.
#[derive(Clone, Copy, Debug)]
pub struct TubeCoefficients {
    pub ginv: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub mean_curvature: f64,
}

/// Invariant checks over all samples.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub max_normal_defect: f64,
    pub max_tangency_defect: f64,
    pub min_abs_det_g: f64,
    pub max_mean_curvature: f64,
    pub delta: f64,
}

/// Classical fourth-order Runge–Kutta for `R̈ = -(1 - Ṙ²)/R`; returns `(R, Ṙ)` at every step.
fn radial_rk4(r0: f64, h: f64, steps: usize) -> Vec<(f64, f64)> {
    let rhs = |r: f64, p: f64| (p, -(1.0 - p * p) / r);
    let mut out = Vec::with_capacity(steps + 1);
    let (mut r, mut p) = (r0, 0.0);
    out.push((r, p));
    for _ in 0..steps {
        let k1 = rhs(r, p);
        let k2 = rhs(r + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
        let k3 = rhs(r + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
        let k4 = rhs(r + h * k3.0, p + h * k3.1);
        r += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push((r, p));
    }
    out
}

impl TimelikeSurface {
    pub fn boosted_plane(v: f64, t_max: f64, nt: usize, ntheta: usize, delta: f64) -> Result<Self, GeometryError> {
        if v.abs() >= 1.0 {
            return Err(GeometryError::NotTimelike(0, 0));
        }
        let period = 2.0 * PI;
        let kind = SurfaceKind::BoostedPlane { v, period };
        let rows = vec![(0.0, 0.0); nt];
        Self::assemble(kind, t_max, nt, ntheta, 1, &rows, Some(delta), 0.0)
    }

    pub fn static_cylinder(r0: f64, t_max: f64, nt: usize, ntheta: usize) -> Result<Self, GeometryError> {
        let rows = vec![(r0, 0.0); nt];
        Self::assemble(
            SurfaceKind::StaticCylinder { r0 },
            t_max,
            nt,
            ntheta,
            1,
            &rows,
            None,
            0.0,
        )
    }

    /// Integrates the radial minimal-surface ODE with step `h <= T/2048` and samples `nt × ntheta` points.
    pub fn radial_minimal(r0: f64, t_max: f64, nt: usize, ntheta: usize) -> Result<Self, GeometryError> {
        let limit = 0.5 * PI * r0 * 0.8;
        if !(t_max > 0.0 && t_max <= limit * (1.0 + 1e-12)) {
            return Err(GeometryError::TooCloseToCollapse { t: t_max, limit });
        }
        if nt < 7 {
            return Err(GeometryError::BadGrid(format!(
                "need at least 7 time samples, got {nt}"
            )));
        }
        let intervals = nt - 1;
        let stride = 2048usize.div_ceil(intervals);
        let steps = intervals * stride;
        let h = t_max / steps as f64;
        let fine = radial_rk4(r0, h, steps);
        let half = radial_rk4(r0, 0.5 * h, 2 * steps);
        let ode_error = (0..=steps)
            .map(|i| (fine[i].0 - half[2 * i].0).abs())
            .fold(0.0, f64::max);
        if fine.iter().any(|(r, p)| *r <= 0.0 || p.abs() >= 1.0) {
            return Err(GeometryError::TooCloseToCollapse { t: t_max, limit });
        }
        Self::assemble(
            SurfaceKind::RadialMinimal { r0 },
            t_max,
            nt,
            ntheta,
            stride,
            &fine,
            None,
            ode_error,
        )
    }

    /// `dense` holds `(R, Ṙ)` on `(nt - 1) * stride + 1` equally spaced times.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: SurfaceKind,
        t_max: f64,
        nt: usize,
        ntheta: usize,
        stride: usize,
        dense: &[(f64, f64)],
        delta: Option<f64>,
        ode_error: f64,
    ) -> Result<Self, GeometryError> {
        if nt < 7 || ntheta < 4 {
            return Err(GeometryError::BadGrid(format!(
                "need nt >= 7 and ntheta >= 4 (got {nt}, {ntheta})"
            )));
        }
        let period = match kind {
            SurfaceKind::BoostedPlane { period, .. } => period,
            _ => 2.0 * PI,
        };
        let nd = dense.len();
        let hd = t_max / (nd - 1) as f64;
        let dt = t_max / (nt - 1) as f64;
        let dtheta = period / ntheta as f64;
        // Y, ∂_tY, ∂_t²Y from the trajectory; R̈ comes from the ODE itself rather than differencing
        let embed = |id: usize, th: f64| -> [Vector3<f64>; 3] {
            let t = id as f64 * hd;
            match kind {
                SurfaceKind::BoostedPlane { v, .. } => {
                    [Vector3::new(t, v * t, th), Vector3::new(1.0, v, 0.0), Vector3::zeros()]
                }
                _ => {
                    let (r, p) = dense[id];
                    let acc = match kind {
                        SurfaceKind::RadialMinimal { .. } => -(1.0 - p * p) / r,
                        _ => 0.0,
                    };
                    let (c, s) = (th.cos(), th.sin());
                    [
                        Vector3::new(t, r * c, r * s),
                        Vector3::new(1.0, p * c, p * s),
                        Vector3::new(0.0, acc * c, acc * s),
                    ]
                }
            }
        };
        // the periodic part of Y in θ is Y - winding·θ
        let winding = match kind {
            SurfaceKind::BoostedPlane { .. } => Vector3::new(0.0, 0.0, 1.0),
            _ => Vector3::zeros(),
        };
        let mut samples = Vec::with_capacity(nt * ntheta);
        for i in 0..nt {
            let id = i * stride;
            let mut y = vec![Vector3::zeros(); ntheta];
            let mut yt = vec![Vector3::zeros(); ntheta];
            let mut ytt = vec![Vector3::zeros(); ntheta];
            for j in 0..ntheta {
                [y[j], yt[j], ytt[j]] = embed(id, j as f64 * dtheta);
            }
            let mut yth = vec![Vector3::zeros(); ntheta];
            let mut ythth = vec![Vector3::zeros(); ntheta];
            let mut ytth = vec![Vector3::zeros(); ntheta];
            for c in 0..3 {
                let per: Vec<f64> = (0..ntheta).map(|j| y[j][c] - winding[c] * j as f64 * dtheta).collect();
                let a = spectral_derivative(&per, period, 1);
                let b = spectral_derivative(&per, period, 2);
                let tr: Vec<f64> = yt.iter().map(|v| v[c]).collect();
                let e = spectral_derivative(&tr, period, 1);
                for j in 0..ntheta {
                    yth[j][c] = a[j] + winding[c];
                    ythth[j][c] = b[j];
                    ytth[j][c] = e[j];
                }
            }
            for j in 0..ntheta {
                let nu = Self::normal_from(&kind, &y[j], &yt[j], &yth[j]).ok_or(GeometryError::NotTimelike(i, j))?;
                let g0 = Matrix2::new(
                    minkowski(&yt[j], &yt[j]),
                    minkowski(&yt[j], &yth[j]),
                    minkowski(&yth[j], &yt[j]),
                    minkowski(&yth[j], &yth[j]),
                );
                let k02 = minkowski(&nu, &ytth[j]);
                let k = Matrix2::new(minkowski(&nu, &ytt[j]), k02, k02, minkowski(&nu, &ythth[j]));
                let inv = g0.try_inverse().ok_or(GeometryError::NotTimelike(i, j))?;
                if g0.determinant() >= 0.0 {
                    return Err(GeometryError::NotTimelike(i, j));
                }
                samples.push(SurfaceSample {
                    y: y[j],
                    y_t: yt[j],
                    y_th: yth[j],
                    y_tt: ytt[j],
                    y_tth: ytth[j],
                    y_thth: ythth[j],
                    nu,
                    g0,
                    k,
                    shape: inv * k,
                });
            }
        }
        let radius: Vec<f64> = (0..nt).map(|i| dense[i * stride].0).collect();
        let radius_dot: Vec<f64> = (0..nt).map(|i| dense[i * stride].1).collect();
        let (radius, radius_dot) = match kind {
            SurfaceKind::BoostedPlane { .. } => (vec![], vec![]),
            _ => (radius, radius_dot),
        };
        let mut surf = TimelikeSurface {
            kind,
            nt,
            ntheta,
            t_max,
            dt,
            period,
            dtheta,
            samples,
            dg0: vec![],
            dk: vec![],
            radius,
            radius_dot,
            delta: 0.0,
            minimal: !matches!(kind, SurfaceKind::StaticCylinder { .. }),
            ode_error,
        };
        surf.dg0 = surf.derivative_field(|s| s.g0);
        surf.dk = surf.derivative_field(|s| s.k);
        surf.delta = match delta {
            Some(d) => d,
            None => {
                let min_r = surf.radius.iter().cloned().fold(f64::INFINITY, f64::min);
                let focal = surf.focal_distance();
                (0.4 * min_r).min(0.9 * focal)
            }
        };
        Ok(surf)
    }

    /// Unit normal with orientation toward the unbounded side.
    fn normal_from(
        kind: &SurfaceKind,
        y: &Vector3<f64>,
        yt: &Vector3<f64>,
        yth: &Vector3<f64>,
    ) -> Option<Vector3<f64>> {
        let bar = yt.cross(yth);
        let nu = j_matrix() * bar;
        let norm2 = minkowski(&nu, &nu);
        if norm2 <= 0.0 {
            return None;
        }
        let mut nu = nu / norm2.sqrt();
        let outward = match kind {
            SurfaceKind::BoostedPlane { .. } => nu[1],
            _ => nu[1] * y[1] + nu[2] * y[2],
        };
        if outward < 0.0 {
            nu = -nu;
        }
        Some(nu)
    }

    fn derivative_field<F: Fn(&SurfaceSample) -> Matrix2<f64>>(&self, f: F) -> Vec<[Matrix2<f64>; 2]> {
        let (nt, nth) = (self.nt, self.ntheta);
        let vals: Vec<Matrix2<f64>> = self.samples.iter().map(&f).collect();
        let dt = DiffOp::new(nt, self.dt, 1, 4);
        let mut out = vec![[Matrix2::zeros(); 2]; nt * nth];
        for r in 0..2 {
            for c in 0..2 {
                let flat: Vec<f64> = vals.iter().map(|m| m[(r, c)]).collect();
                for i in 0..nt {
                    let row = &flat[i * nth..(i + 1) * nth];
                    let d = spectral_derivative(row, self.period, 1);
                    for j in 0..nth {
                        out[i * nth + j][0][(r, c)] = dt.at_strided(&flat, i, j, nth);
                        out[i * nth + j][1][(r, c)] = d[j];
                    }
                }
            }
        }
        out
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    pub fn sample(&self, i: usize, j: usize) -> &SurfaceSample {
        &self.samples[self.idx(i, j)]
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    pub fn normal(&self, i: usize, j: usize) -> Vector3<f64> {
        self.sample(i, j).nu
    }

    fn check_tube(&self, z: f64) -> Result<(), GeometryError> {
        if z.abs() >= self.delta {
            return Err(GeometryError::OutOfTube { z, delta: self.delta });
        }
        Ok(())
    }

    /// Tangential block of the Fermi metric at distance `z`.
    pub fn metric_tube(&self, i: usize, j: usize, z: f64) -> Result<Matrix2<f64>, GeometryError> {
        self.check_tube(z)?;
        Ok(self.sample(i, j).tube_metric(z))
    }

    /// Full Fermi metric in `(t, θ, z)`: `g_an = 0`, `g_nn = 1`.
    pub fn fermi_metric(&self, i: usize, j: usize, z: f64) -> Result<Matrix3<f64>, GeometryError> {
        let g = self.metric_tube(i, j, z)?;
        Ok(Matrix3::new(
            g[(0, 0)],
            g[(0, 1)],
            0.0,
            g[(1, 0)],
            g[(1, 1)],
            0.0,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn mean_curvature(&self, i: usize, j: usize, z: f64) -> Result<f64, GeometryError> {
        self.check_tube(z)?;
        Ok(self.sample(i, j).mean_curvature(z))
    }

    /// Sup of `|H(·, 0)|` over all samples.
    pub fn max_mean_curvature(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.mean_curvature(0.0).abs())
            .fold(0.0, f64::max)
    }

    /// `a_Γ` at every sample; refuses non-minimal surfaces.
    pub fn curvature_expansion(&self, tol_h: f64) -> Result<Vec<f64>, GeometryError> {
        let h = self.max_mean_curvature();
        if h > tol_h {
            return Err(GeometryError::NotMinimal(h));
        }
        Ok(self.samples.iter().map(|s| s.a_gamma()).collect())
    }

    /// Smallest focal distance `1/ρ(S)` over the samples.
    pub fn focal_distance(&self) -> f64 {
        let rho = self.samples.iter().map(|s| s.spectral_radius()).fold(0.0, f64::max);
        if rho > 0.0 {
            1.0 / rho
        } else {
            f64::INFINITY
        }
    }

    pub fn invariant_report(&self) -> InvariantReport {
        let mut rep = InvariantReport {
            max_normal_defect: 0.0,
            max_tangency_defect: 0.0,
            min_abs_det_g: f64::INFINITY,
            max_mean_curvature: self.max_mean_curvature(),
            delta: self.delta,
        };
        for s in &self.samples {
            rep.max_normal_defect = rep.max_normal_defect.max((minkowski(&s.nu, &s.nu) - 1.0).abs());
            let tang = minkowski(&s.nu, &s.y_t).abs().max(minkowski(&s.nu, &s.y_th).abs());
            rep.max_tangency_defect = rep.max_tangency_defect.max(tang);
            for q in 0..=8 {
                let z = self.delta * (q as f64 / 4.0 - 1.0) * 0.999;
                rep.min_abs_det_g = rep.min_abs_det_g.min(s.tube_metric(z).determinant().abs());
            }
        }
        rep
    }

    /// `g^{ab}(z)`, `B^b(z)` and `H(z)` at sample `q`, from the chain rule applied to
    /// `g(z) = g⁰(I - zS)²` using the stored derivatives of `g⁰` and `k`.
    pub fn tube_coefficients(&self, q: usize, z: f64) -> TubeCoefficients {
        let s = &self.samples[q];
        let g0inv = s.g0.try_inverse().unwrap_or_else(Matrix2::zeros);
        let p = Matrix2::identity() - s.shape * z;
        let pinv = p.try_inverse().unwrap_or_else(Matrix2::zeros);
        let pinv2 = pinv * pinv;
        let d = p.determinant().abs();
        let root0 = s.g0.determinant().abs().sqrt();
        let ginv = pinv2 * g0inv;
        let mut div = Vector2::zeros();
        for a in 0..2 {
            let dg0 = self.dg0[q][a];
            let dk = self.dk[q][a];
            let ds = g0inv * (dk - dg0 * s.shape);
            let dp = -ds * z;
            let droot0 = 0.5 * root0 * (g0inv * dg0).trace();
            let dd = d * (pinv * dp).trace();
            let dpinv = -pinv * dp * pinv;
            let dpinv2 = dpinv * pinv + pinv * dpinv;
            let dg0inv = -g0inv * dg0 * g0inv;
            let dm = ginv * (droot0 * d + root0 * dd) + (dpinv2 * g0inv + pinv2 * dg0inv) * (root0 * d);
            for b in 0..2 {
                div[b] += dm[(a, b)];
            }
        }
        TubeCoefficients {
            ginv,
            b: div / (root0 * d),
            mean_curvature: (s.shape * pinv).trace(),
        }
    }

    /// Per sample at fixed `z`: `(g^{ab}(z), √|g(z)|, B^b(z))` with
    /// `B^b = |g|^{-1/2} ∂_a(|g|^{1/2} g^{ab})`, so that `□_{Γ_z} h = g^{ab}h_{ab} + B^b h_b`.
    pub fn tube_operator(&self, z: f64) -> Vec<(Matrix2<f64>, f64, Vector2<f64>)> {
        let (nt, nth) = (self.nt, self.ntheta);
        let base: Vec<(Matrix2<f64>, f64)> = self
            .samples
            .iter()
            .map(|s| {
                let g = s.tube_metric(z);
                let inv = g.try_inverse().unwrap_or_else(Matrix2::zeros);
                (inv, g.determinant().abs().sqrt())
            })
            .collect();
        let flux = |a: usize, b: usize| -> Vec<f64> { base.iter().map(|(m, r)| r * m[(a, b)]).collect() };
        let dt = DiffOp::new(nt, self.dt, 1, 4);
        let mut div = vec![Vector2::zeros(); nt * nth];
        for b in 0..2 {
            let ft = flux(0, b);
            let fth = flux(1, b);
            for i in 0..nt {
                let dth = spectral_derivative(&fth[i * nth..(i + 1) * nth], self.period, 1);
                for j in 0..nth {
                    div[i * nth + j][b] = dt.at_strided(&ft, i, j, nth) + dth[j];
                }
            }
        }
        base.into_iter().zip(div).map(|((inv, r), d)| (inv, r, d / r)).collect()
    }

    /// Canonical chart from the flow `dθ/dt = -g⁰_{tθ}/g⁰_{θθ}` of `E = ∂_t - (g⁰_{tθ}/g⁰_{θθ}) ∂_θ`.
    pub fn canonical_coordinates(&self) -> Result<CanonicalChart, GeometryError> {
        let (nt, nth) = (self.nt, self.ntheta);
        let ratio: Vec<f64> = self.samples.iter().map(|s| -s.g0[(0, 1)] / s.g0[(1, 1)]).collect();
        let speed = |t: f64, th: f64| -> f64 {
            let s = (t / self.dt).clamp(0.0, (nt - 1) as f64);
            let i = (s.floor() as usize).min(nt - 2);
            let a = s - i as f64;
            let u = (th / self.dtheta).rem_euclid(nth as f64);
            let j = (u.floor() as usize) % nth;
            let b = u - u.floor();
            let j1 = (j + 1) % nth;
            let r = |ii: usize, jj: usize| ratio[ii * nth + jj];
            (1.0 - a) * ((1.0 - b) * r(i, j) + b * r(i, j1)) + a * ((1.0 - b) * r(i + 1, j) + b * r(i + 1, j1))
        };
        let substeps = 8;
        let h = self.dt / substeps as f64;
        let mut theta = vec![0.0; nt * nth];
        for j in 0..nth {
            let mut th = self.theta(j);
            theta[j] = th;
            let mut t = 0.0;
            for i in 1..nt {
                for _ in 0..substeps {
                    let k1 = speed(t, th);
                    let k2 = speed(t + 0.5 * h, th + 0.5 * h * k1);
                    let k3 = speed(t + 0.5 * h, th + 0.5 * h * k2);
                    let k4 = speed(t + h, th + h * k3);
                    th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    t += h;
                }
                if !th.is_finite() || (th - self.theta(j)).abs() > self.period {
                    return Err(GeometryError::FlowEscaped);
                }
                theta[i * nth + j] = th;
            }
        }
        // metric in (t, θ₀): E = ∂_t + ratio ∂_θ and ∂_{θ₀} = (∂θ/∂θ₀) ∂_θ
        let mut g00 = vec![0.0; nt * nth];
        let mut g0a = vec![0.0; nt * nth];
        let mut gaa = vec![0.0; nt * nth];
        let mut positions = vec![Vector3::zeros(); nt * nth];
        for i in 0..nt {
            let row: Vec<f64> = (0..nth).map(|j| theta[i * nth + j] - self.theta(j)).collect();
            let dth0 = spectral_derivative(&row, self.period, 1);
            for j in 0..nth {
                let q = i * nth + j;
                // nearest sample in θ for the frame; exact when the flow is trivial
                let jj = ((theta[q] / self.dtheta).round() as isize).rem_euclid(nth as isize) as usize;
                let s = self.sample(i, jj);
                let e = s.y_t + ratio[i * nth + jj] * s.y_th;
                let d0 = (1.0 + dth0[j]) * s.y_th;
                g00[q] = minkowski(&e, &e);
                g0a[q] = minkowski(&e, &d0);
                gaa[q] = minkowski(&d0, &d0);
                positions[q] = s.y + (theta[q] - self.theta(jj)) * s.y_th;
            }
        }
        Ok(CanonicalChart {
            nt,
            ntheta: nth,
            theta,
            positions,
            g00,
            g0a,
            gaa,
        })
    }
}

/// Canonical coordinates `(t, θ₀)` obtained by flowing the initial section along `E`.
#[derive(Clone, Debug)]
pub struct CanonicalChart {
    pub nt: usize,
    pub ntheta: usize,
    /// `θ(t; θ₀)` per sample.
    pub theta: Vec<f64>,
    /// Flow points `X(t; θ₀)`.
    pub positions: Vec<Vector3<f64>>,
    pub g00: Vec<f64>,
    pub g0a: Vec<f64>,
    pub gaa: Vec<f64>,
}

impl CanonicalChart {
    pub fn max_cross_term(&self) -> f64 {
        self.g0a.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `(max g⁰₀₀, min ḡ⁰)`; the chart is valid when the first is negative and the second positive.
    pub fn signature_margins(&self) -> (f64, f64) {
        let g00 = self.g00.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gaa = self.gaa.iter().cloned().fold(f64::INFINITY, f64::min);
        (g00, gaa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_normals() {
        let s = TimelikeSurface::boosted_plane(0.0, 1.0, 9, 8, 1.0).unwrap();
        assert!((s.normal(3, 2) - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        let v = 0.6;
        let s = TimelikeSurface::boosted_plane(v, 1.0, 9, 8, 1.0).unwrap();
        let g = 1.0 / (1.0f64 - v * v).sqrt();
        let nu = s.normal(4, 1);
        assert!((nu - Vector3::new(g * v, g, 0.0)).norm() < 1e-12);
        assert!((minkowski(&nu, &nu) - 1.0).abs() < 1e-12);
        let m0 = s.metric_tube(2, 3, 0.0).unwrap();
        let m1 = s.metric_tube(2, 3, 0.7).unwrap();
        assert!((m0 - m1).norm() < 1e-12);
        for z in [-0.9, 0.0, 0.5] {
            assert!(s.mean_curvature(1, 1, z).unwrap().abs() < 1e-10);
        }
        assert!(s.curvature_expansion(1e-8).unwrap().iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn cylinder_geometry() {
        let r0 = 1.5;
        let s = TimelikeSurface::static_cylinder(r0, 1.0, 9, 16).unwrap();
        for j in 0..16 {
            let th = s.theta(j);
            assert!((s.normal(2, j) - Vector3::new(0.0, th.cos(), th.sin())).norm() < 1e-12);
        }
        let z = 0.2;
        let g = s.metric_tube(3, 5, z).unwrap();
        assert!((g[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((g[(1, 1)] - (r0 + z).powi(2)).abs() < 1e-10);
        assert!((s.mean_curvature(3, 5, 0.0).unwrap() + 1.0 / r0).abs() < 1e-10);
        assert!(s.curvature_expansion(1e-6).is_err());
        let f = s.fermi_metric(0, 0, 0.1).unwrap();
        assert_eq!(f[(2, 2)], 1.0);
        assert_eq!(f[(0, 2)], 0.0);
    }

    #[test]
    fn collapsing_circle() {
        let s = TimelikeSurface::radial_minimal(1.0, 0.8, 161, 16).unwrap();
        assert!(s.ode_error < 1e-12);
        let i = (0.5 / s.dt).round() as usize;
        assert!((s.radius[i] - 0.5f64.cos()).abs() < 1e-8);
        assert!(s.radius_dot.iter().all(|p| p.abs() < 1.0));
        assert!(s.max_mean_curvature() < 1e-7, "{}", s.max_mean_curvature());
        let a = s.curvature_expansion(1e-6).unwrap();
        // at t = 0 both principal curvatures have modulus 1/R₀
        assert!((a[0] - 2.0).abs() < 1e-4);
        let row: Vec<f64> = (0..16).map(|j| a[s.idx(40, j)]).collect();
        let spread = row.iter().map(|v| (v - row[0]).abs()).fold(0.0, f64::max);
        assert!(spread < 1e-10, "{spread}");
        // analytic a_Γ = 2 (1 - Ṙ²)^{-2} R^{-2}... compare with the tube-family derivative
        let si = s.sample(100, 3);
        let hz = 1e-4;
        let fd = (si.mean_curvature(hz) - si.mean_curvature(-hz)) / (2.0 * hz);
        assert!((fd - si.a_gamma()).abs() < 1e-6);
        let rep = s.invariant_report();
        assert!(rep.max_normal_defect < 1e-10 && rep.max_tangency_defect < 1e-10);
        assert!(rep.min_abs_det_g > 0.0);
        assert!(TimelikeSurface::radial_minimal(1.0, 1.3, 65, 8).is_err());
    }

    #[test]
    fn circle_canonical_chart() {
        let s = TimelikeSurface::radial_minimal(1.0, 0.8, 81, 16).unwrap();
        let c = s.canonical_coordinates().unwrap();
        assert!(c.max_cross_term() < 1e-8);
        let (g00, gaa) = c.signature_margins();
        assert!(g00 < 0.0 && gaa > 0.0);
        for i in [0, 30, 80] {
            let q = i * 16 + 5;
            let pd = s.radius_dot[i];
            assert!((c.g00[q] + (1.0 - pd * pd)).abs() < 1e-8);
            assert!((c.theta[q] - s.theta(5)).abs() < 1e-12);
        }
    }

    #[test]
    fn tube_coefficients_match_differenced_operator() {
        let s = TimelikeSurface::radial_minimal(1.0, 0.8, 201, 8).unwrap();
        for z in [-0.2, 0.0, 0.15] {
            let ops = s.tube_operator(z);
            for q in [0, 8 * 50 + 3, 8 * 200 + 1] {
                let c = s.tube_coefficients(q, z);
                assert!((c.ginv - ops[q].0).abs().max() < 1e-12);
                assert!(
                    (c.b - ops[q].2).norm() < 1e-5 * (1.0 + c.b.norm()),
                    "{} {}",
                    c.b,
                    ops[q].2
                );
                assert!((c.mean_curvature - s.samples[q].mean_curvature(z)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tube_operator_of_plane_is_flat() {
        let s = TimelikeSurface::boosted_plane(0.3, 1.0, 11, 8, 1.0).unwrap();
        for (_, _, b) in s.tube_operator(0.4) {
            assert!(b.norm() < 1e-10);
        }
    }
}
