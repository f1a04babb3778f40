//! The Jacobi operator `J_Γ h = □_Γ h + a_Γ h` on a sampled surface, reduced to
//! `-h_tt + a_θθ h_θθ + b₀ h_t + b_θ h_θ + ā h = Q` in canonical coordinates and
//! solved by leapfrog with zero initial data.

use crate::geometry::TimelikeSurface;
use crate::numerics::PeriodicDiff;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JacobiError {
    #[error("a_θθ = {0} is not positive: surface not timelike on the grid")]
    NotPositive(f64),
    #[error("chart is not canonical: |g⁰_tθ| = {0}")]
    NotCanonical(f64),
    #[error("Courant number {courant} exceeds 0.5; need dt <= {required}")]
    Cfl { courant: f64, required: f64 },
    #[error("source has {got} samples, grid has {expected}")]
    Length { got: usize, expected: usize },
}

/// Coefficients of the reduced equation on the surface grid (index `i * ntheta + j`).
#[derive(Clone, Debug)]
pub struct JacobiProblem {
    pub nt: usize,
    pub ntheta: usize,
    pub dt: f64,
    pub dtheta: f64,
    pub a_thth: Vec<f64>,
    pub b0: Vec<f64>,
    pub b_th: Vec<f64>,
    pub a_bar: Vec<f64>,
    /// `-g⁰₀₀`, the factor relating `Q` to the source of `J_Γ h = q`.
    pub scale: Vec<f64>,
    /// `g⁰₀₀ a_Γ`, kept for the sign check.
    pub g00_a: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct JacobiSolution {
    pub h: Vec<f64>,
    /// `½ ∫ (h_t² + a_θθ h_θ²) dθ` per time level.
    pub energy: Vec<f64>,
}

impl JacobiProblem {
    pub fn assemble(surface: &TimelikeSurface) -> Result<Self, JacobiError> {
        let ops = surface.tube_operator(0.0);
        let n = surface.samples.len();
        let mut p = JacobiProblem {
            nt: surface.nt,
            ntheta: surface.ntheta,
            dt: surface.dt,
            dtheta: surface.dtheta,
            a_thth: Vec::with_capacity(n),
            b0: Vec::with_capacity(n),
            b_th: Vec::with_capacity(n),
            a_bar: Vec::with_capacity(n),
            scale: Vec::with_capacity(n),
            g00_a: Vec::with_capacity(n),
        };
        for (s, (inv, _, b)) in surface.samples.iter().zip(ops) {
            let cross = s.g0[(0, 1)].abs();
            if cross > 1e-8 * s.g0.abs().max() {
                return Err(JacobiError::NotCanonical(cross));
            }
            let m = -s.g0[(0, 0)];
            let a = m * inv[(1, 1)];
            if a <= 0.0 {
                return Err(JacobiError::NotPositive(a));
            }
            let ag = s.a_gamma();
            p.a_thth.push(a);
            p.b0.push(m * b[0]);
            p.b_th.push(m * b[1]);
            p.a_bar.push(m * ag);
            p.scale.push(m);
            p.g00_a.push(-m * ag);
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.nt * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn courant(&self) -> f64 {
        let amax = self.a_thth.iter().cloned().fold(0.0, f64::max);
        self.dt * amax.sqrt() / self.dtheta
    }

    /// Applies the reduced operator `-∂_t² + a ∂_θ² + b₀ ∂_t + b_θ ∂_θ + ā` to an analytic field
    /// given with its derivatives `(h, h_t, h_tt, h_θ, h_θθ)` at every sample.
    pub fn apply_reduced(&self, derivs: &[[f64; 5]]) -> Vec<f64> {
        (0..self.len())
            .map(|q| {
                let [h, ht, htt, hth, hthth] = derivs[q];
                -htt + self.a_thth[q] * hthth + self.b0[q] * ht + self.b_th[q] * hth + self.a_bar[q] * h
            })
            .collect()
    }

    /// Solves `J_Γ h = q` with `h = ∂_t h = 0` at `t = 0`.
    pub fn solve(&self, q: &[f64]) -> Result<JacobiSolution, JacobiError> {
        let big_q: Vec<f64> = q.iter().zip(&self.scale).map(|(a, m)| a * m).collect();
        self.solve_reduced(&big_q)
    }

    /// Solves the reduced equation directly for a given `Q`.
    pub fn solve_reduced(&self, big_q: &[f64]) -> Result<JacobiSolution, JacobiError> {
        if big_q.len() != self.len() {
            return Err(JacobiError::Length {
                got: big_q.len(),
                expected: self.len(),
            });
        }
        let courant = self.courant();
        if courant > 0.5 {
            let amax = self.a_thth.iter().cloned().fold(0.0, f64::max);
            return Err(JacobiError::Cfl {
                courant,
                required: 0.5 * self.dtheta / amax.sqrt(),
            });
        }
        let (nt, nth, dt) = (self.nt, self.ntheta, self.dt);
        let d1 = PeriodicDiff::new(nth, self.dtheta, 1, 2);
        let d2 = PeriodicDiff::new(nth, self.dtheta, 2, 2);
        let mut h = vec![0.0; nt * nth];
        for j in 0..nth {
            h[nth + j] = -0.5 * dt * dt * big_q[j];
        }
        for n in 1..nt - 1 {
            for j in 0..nth {
                let q = n * nth + j;
                let lap = self.a_thth[q] * d2.at_strided(&h, j, n * nth, 1)
                    + self.b_th[q] * d1.at_strided(&h, j, n * nth, 1)
                    + self.a_bar[q] * h[q];
                let c = 0.5 * self.b0[q] * dt;
                h[q + nth] = (2.0 * h[q] - (1.0 + c) * h[q - nth] + dt * dt * (lap - big_q[q])) / (1.0 - c);
            }
        }
        let energy = (0..nt)
            .map(|n| {
                let mut e = 0.0;
                for j in 0..nth {
                    let q = n * nth + j;
                    let ht = if n == 0 {
                        0.0
                    } else if n == nt - 1 {
                        (h[q] - h[q - nth]) / dt
                    } else {
                        (h[q + nth] - h[q - nth]) / (2.0 * dt)
                    };
                    let hth = d1.at_strided(&h, j, n * nth, 1);
                    e += 0.5 * (ht * ht + self.a_thth[q] * hth * hth) * self.dtheta;
                }
                e
            })
            .collect();
        Ok(JacobiSolution { h, energy })
    }
}

/// One level of the manufactured-solution study.
#[derive(Clone, Debug, Serialize)]
pub struct ManufacturedLevel {
    pub nt: usize,
    pub ntheta: usize,
    pub dt: f64,
    pub error: f64,
}

/// Convergence study with `h* = sin(2θ) t²` on the collapsing circle.
#[derive(Clone, Debug, Serialize)]
pub struct ManufacturedStudy {
    pub levels: Vec<ManufacturedLevel>,
    /// `log₂(e_m / e_{m+1})` for consecutive levels.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log dt`.
    pub fitted_order: f64,
}

/// Source `Q = L h*` of the manufactured solution, from the sampled coefficients.
pub fn manufactured_source(p: &JacobiProblem) -> (Vec<f64>, Vec<f64>) {
    let mut derivs = Vec::with_capacity(p.len());
    let mut exact = Vec::with_capacity(p.len());
    for i in 0..p.nt {
        let t = i as f64 * p.dt;
        for j in 0..p.ntheta {
            let th = j as f64 * p.dtheta;
            let (s, c) = ((2.0 * th).sin(), (2.0 * th).cos());
            derivs.push([s * t * t, 2.0 * s * t, 2.0 * s, 2.0 * c * t * t, -4.0 * s * t * t]);
            exact.push(s * t * t);
        }
    }
    (p.apply_reduced(&derivs), exact)
}

pub fn manufactured_study(
    r0: f64,
    t_max: f64,
    refinements: usize,
) -> Result<ManufacturedStudy, Box<dyn std::error::Error>> {
    let mut levels = Vec::new();
    for m in 0..=refinements {
        let ntheta = 32 << m;
        let nt = (16 << m) + 1;
        let surf = TimelikeSurface::radial_minimal(r0, t_max, nt, ntheta)?;
        let p = JacobiProblem::assemble(&surf)?;
        let (q, exact) = manufactured_source(&p);
        let sol = p.solve_reduced(&q)?;
        let error = sol.h.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        levels.push(ManufacturedLevel {
            nt,
            ntheta,
            dt: p.dt,
            error,
        });
    }
    let orders = levels.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect();
    let x: Vec<f64> = levels.iter().map(|l| l.dt).collect();
    let y: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let fitted_order = crate::numerics::loglog_slope(&x, &y);
    Ok(ManufacturedStudy {
        levels,
        orders,
        fitted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(nt: usize, nth: usize) -> TimelikeSurface {
        TimelikeSurface::radial_minimal(1.0, 0.8, nt, nth).unwrap()
    }

    #[test]
    fn circle_coefficients() {
        let s = circle(41, 16);
        let p = JacobiProblem::assemble(&s).unwrap();
        for i in [0, 20, 40] {
            let (r, rd) = (s.radius[i], s.radius_dot[i]);
            for j in 0..16 {
                let q = i * 16 + j;
                assert!((p.a_thth[q] - (1.0 - rd * rd) / (r * r)).abs() < 1e-10);
                assert!((p.a_thth[q] - p.a_thth[i * 16]).abs() < 1e-12);
            }
        }
        assert!(p.g00_a[0] < 0.0 && p.a_bar[0] > 0.0);
        assert!((p.g00_a[0] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn plane_coefficients_constant() {
        let s = TimelikeSurface::boosted_plane(0.4, 1.0, 11, 8, 1.0).unwrap();
        let p = JacobiProblem::assemble(&s).unwrap();
        assert!(p.a_thth.iter().all(|a| (a - p.a_thth[0]).abs() < 1e-12));
        assert!(p.a_bar.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn zero_source_zero_solution() {
        let p = JacobiProblem::assemble(&circle(33, 32)).unwrap();
        let sol = p.solve(&vec![0.0; p.len()]).unwrap();
        assert!(sol.h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn symmetric_source_symmetric_solution() {
        let p = JacobiProblem::assemble(&circle(33, 32)).unwrap();
        let q: Vec<f64> = (0..p.len()).map(|k| (1.0 + (k / 32) as f64 * 0.1).sin()).collect();
        let sol = p.solve(&q).unwrap();
        for n in 0..33 {
            let row = &sol.h[n * 32..(n + 1) * 32];
            assert!(row.iter().all(|v| (v - row[0]).abs() <= 1e-13 * (1.0 + row[0].abs())));
        }
    }

    #[test]
    fn cfl_is_enforced() {
        let p = JacobiProblem::assemble(&circle(9, 128)).unwrap();
        assert!(matches!(p.solve(&vec![1.0; p.len()]), Err(JacobiError::Cfl { .. })));
    }

    #[test]
    fn manufactured_second_order() {
        let st = manufactured_study(1.0, 0.8, 2).unwrap();
        assert!(st.orders.iter().all(|o| *o > 1.8), "{st:?}");
    }
}
