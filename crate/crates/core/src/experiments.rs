//! End-to-end runs that combine the ansatz with the wave solver.

use crate::ansatz::{AnsatzOrderK, GlobalApproximation};
use crate::geometry::TimelikeSurface;
use crate::nonlinearity::Nonlinearity;
use crate::wave::{far_field_rate, fit_step, run_nonlinear, Grid, NonlinearSolver, RunOutput};
use serde::Serialize;

/// Surface grid used for the circle ansatz.
pub const CIRCLE_NT: usize = 801;
pub const CIRCLE_NTHETA: usize = 8;

/// Radial grid resolution `ε / Δx` for the circle runs.
pub const RADIAL_DX_PER_EPS: f64 = 16.0;

/// Courant ratio `dt/dx` of the radial runs.
pub const RADIAL_COURANT: f64 = 0.5;

/// Default gluing radius as a fraction of the tube half-width.
pub const GLUE_FRACTION: f64 = 0.45;

/// Setup of a radial run from the glued ansatz of the collapsing circle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadialParams {
    pub k: usize,
    pub r0: f64,
    pub t1: f64,
    /// `ε / Δx`.
    pub dx_per_eps: f64,
    pub courant: f64,
    /// Gluing radius over `δ`; must lie in `(0, 1/2)`.
    pub glue_fraction: f64,
    pub snap_every: f64,
    pub nt: usize,
    pub ntheta: usize,
}

impl RadialParams {
    pub fn new(k: usize, r0: f64, t1: f64) -> Self {
        RadialParams {
            k,
            r0,
            t1,
            dx_per_eps: RADIAL_DX_PER_EPS,
            courant: RADIAL_COURANT,
            glue_fraction: GLUE_FRACTION,
            snap_every: t1 / 16.0,
            nt: CIRCLE_NT,
            ntheta: CIRCLE_NTHETA,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialSummary {
    pub eps: f64,
    pub k: usize,
    pub dx: f64,
    pub dt: f64,
    pub glue_radius: f64,
    /// `max_t |R_num(t) - R₀ cos(t/R₀)|`.
    pub max_deviation: f64,
    pub breakdown: bool,
    pub far_field_rate: Option<f64>,
    pub energy_drift: f64,
}

pub struct RadialRun {
    pub summary: RadialSummary,
    pub output: RunOutput,
}

/// Evolves the glued order-`k` ansatz of the collapsing circle of radius `r0` up to `t1` on a
/// radial grid with `dx = ε / dx_per_eps`, `r_max = r0 + 1.5`.
pub fn radial_ansatz_run(
    nl: Nonlinearity,
    eps: f64,
    p: &RadialParams,
) -> Result<RadialRun, Box<dyn std::error::Error>> {
    let RadialParams {
        k, r0, t1, dx_per_eps, ..
    } = *p;
    let surface = TimelikeSurface::radial_minimal(r0, t1, p.nt, p.ntheta)?;
    let (ansatz, _) = AnsatzOrderK::build(&surface, nl, eps, k)?;
    let glue_radius = p.glue_fraction * surface.delta;
    let glued = GlobalApproximation::glue(&ansatz, glue_radius)?;
    let dx = eps / dx_per_eps;
    let grid = Grid::radial(r0 + 1.5, dx)?;
    let (u0, u1) = glued.radial_initial_data(&grid.nodes())?;
    let (dt, steps) = fit_step(t1, p.courant * dx);
    let stride = ((p.snap_every / dt).round() as usize).max(1);
    let solver = NonlinearSolver::new(nl, grid, eps, dt, u0, &u1)?;
    let output = run_nonlinear(solver, steps, stride, 1, &|t| r0 * (t / r0).cos())?;
    let last = output.snapshots.last().ok_or("no snapshots")?;
    let far = output
        .track
        .points
        .last()
        .and_then(|p| p.crossings.first().copied())
        .and_then(|iface| far_field_rate(&last.x, &last.u, iface, eps, 2.0 * eps, 10.0 * eps));
    let summary = RadialSummary {
        eps,
        k,
        dx,
        dt,
        glue_radius,
        max_deviation: output.track.max_deviation,
        breakdown: output.track.breakdown,
        far_field_rate: far,
        energy_drift: output.energy_drift(),
    };
    Ok(RadialRun { summary, output })
}

/// Radial runs over several ε with the log-log slope of the interface deviation.
#[derive(Clone, Debug, Serialize)]
pub struct RadialStudy {
    pub runs: Vec<RadialSummary>,
    pub deviation_slope: f64,
}

pub fn radial_study(
    nl: Nonlinearity,
    eps_list: &[f64],
    p: &RadialParams,
) -> Result<RadialStudy, Box<dyn std::error::Error>> {
    let mut runs = Vec::new();
    for &eps in eps_list {
        runs.push(radial_ansatz_run(nl, eps, p)?.summary);
    }
    let x: Vec<f64> = runs.iter().map(|r| r.eps).collect();
    let y: Vec<f64> = runs.iter().map(|r| r.max_deviation.max(f64::MIN_POSITIVE)).collect();
    let deviation_slope = crate::numerics::loglog_slope(&x, &y);
    Ok(RadialStudy { runs, deviation_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_run_tracks_the_collapsing_circle() {
        let p = RadialParams {
            dx_per_eps: 8.0,
            snap_every: 0.1,
            ..RadialParams::new(0, 1.0, 0.4)
        };
        let run = radial_ansatz_run(Nonlinearity::AllenCahn, 0.05, &p).unwrap();
        let s = &run.summary;
        assert!(!s.breakdown);
        assert!(s.max_deviation < 1e-3, "{s:?}");
        assert!(s.far_field_rate.is_some_and(|a| a > 0.0));
        let last = run.output.track.points.last().unwrap();
        assert!((last.t - 0.4).abs() < 1e-9);
    }
}
