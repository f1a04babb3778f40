//! Leapfrog solvers for `ε²(-u_tt + Δu) + f(u) = 0` and for the linearized equation
//! `□φ + ε⁻² f'(U) φ = η`, on a planar interval or a radial grid `u(r, t)` in two space dimensions.

use crate::nonlinearity::Nonlinearity;
use crate::numerics::linear_fit;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Planar,
    Radial,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("dt = {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("dt = {dt} exceeds the stiffness limit {limit}")]
    Stiff { dt: f64, limit: f64 },
    #[error("dx = {dx} does not resolve the layer (need dx <= ε/8 = {limit})")]
    Unresolved { dx: f64, limit: f64 },
    #[error("|u| = {value} exceeds the sentinel at t = {t}")]
    Sentinel { t: f64, value: f64 },
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("data has {got} values, grid has {expected}")]
    Length { got: usize, expected: usize },
}

/// Uniform nodes `x0 + i dx`. Radial grids use a Neumann closure at `x0` and clamp the far end;
/// planar grids clamp both ends.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub mode: Mode,
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(mode: Mode, x_min: f64, x_max: f64, dx: f64) -> Result<Self, WaveError> {
        if !(dx > 0.0) || !(x_max > x_min) {
            return Err(WaveError::Grid(format!("[{x_min}, {x_max}] with dx = {dx}")));
        }
        if mode == Mode::Radial && x_min <= 0.0 {
            return Err(WaveError::Grid("radial grid must start at r_min > 0".into()));
        }
        let n = ((x_max - x_min) / dx).round() as usize + 1;
        if n < 5 {
            return Err(WaveError::Grid(format!("only {n} nodes")));
        }
        Ok(Grid { mode, x0: x_min, dx, n })
    }

    /// Radial grid with `r_min = 10 dx`.
    pub fn radial(r_max: f64, dx: f64) -> Result<Self, WaveError> {
        Self::new(Mode::Radial, 10.0 * dx, r_max, dx)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weights, including the `r` factor of the radial measure.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let end = if i == 0 || i == self.n - 1 { 0.5 } else { 1.0 };
                let r = if self.mode == Mode::Radial { self.x(i) } else { 1.0 };
                end * r * self.dx
            })
            .collect()
    }

    /// Fourth-order `∂²u` (planar) or `u_rr + u_r / r` (radial) at a free node `i`. Radial grids
    /// reflect evenly about `r_min`, which closes the Neumann condition there.
    #[inline]
    fn laplacian(&self, u: &[f64], i: usize) -> f64 {
        let h = self.dx;
        let at = |k: isize| u[k.unsigned_abs()];
        let k = i as isize;
        let (m2, m1, c, p1, p2) = (at(k - 2), at(k - 1), u[i], at(k + 1), at(k + 2));
        let urr = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
        match self.mode {
            Mode::Planar => urr,
            Mode::Radial if i == 0 => urr,
            Mode::Radial => urr + (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h * self.x(i)),
        }
    }

    /// Free nodes; the two outermost nodes of every clamped end are held fixed.
    fn free(&self) -> std::ops::Range<usize> {
        match self.mode {
            Mode::Planar => 2..self.n - 2,
            Mode::Radial => 0..self.n - 2,
        }
    }
}

/// Two time levels of a leapfrog run: `u` at `t` and `u_prev` at `t - dt`.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub grid: Grid,
    pub eps: f64,
    pub dt: f64,
    pub t: f64,
    pub steps: usize,
    pub u: Vec<f64>,
    pub u_prev: Vec<f64>,
}

/// Largest `|f'|` on `[-1, 1]`.
pub fn max_abs_df(nl: &Nonlinearity) -> f64 {
    (0..=200)
        .map(|k| nl.df(-1.0 + 0.01 * k as f64).abs())
        .fold(0.0, f64::max)
}

/// Checks `dt <= dx/2`, `dt <= 0.2 ε / sqrt(max|f'|)` and `dx <= ε/8`.
pub fn check_guards(nl: &Nonlinearity, eps: f64, dx: f64, dt: f64) -> Result<(), WaveError> {
    let slack = 1.0 + 1e-12;
    if dx > eps / 8.0 * slack {
        return Err(WaveError::Unresolved { dx, limit: eps / 8.0 });
    }
    if dt > 0.5 * dx * slack {
        return Err(WaveError::Cfl { dt, limit: 0.5 * dx });
    }
    let stiff = 0.2 * eps / max_abs_df(nl).sqrt();
    if dt > stiff * slack {
        return Err(WaveError::Stiff { dt, limit: stiff });
    }
    Ok(())
}

/// Largest step not above `dt_max` that divides `t_end` evenly.
pub fn fit_step(t_end: f64, dt_max: f64) -> (f64, usize) {
    let n = (t_end / dt_max - 1e-9).ceil().max(1.0) as usize;
    (t_end / n as f64, n)
}

impl FieldState {
    /// Starts from `u(0) = u0`, `u_t(0) = u1` with the Taylor step
    /// `u¹ = u⁰ + dt u1 + ½dt² a(u⁰)`, stored as a virtual level `u⁻¹`.
    pub fn new<A: Fn(usize, f64, f64) -> f64>(
        grid: Grid,
        eps: f64,
        dt: f64,
        u0: Vec<f64>,
        u1: &[f64],
        accel: A,
    ) -> Result<Self, WaveError> {
        if u0.len() != grid.n || u1.len() != grid.n {
            return Err(WaveError::Length {
                got: u0.len().min(u1.len()),
                expected: grid.n,
            });
        }
        let mut st = FieldState {
            grid,
            eps,
            dt,
            t: 0.0,
            steps: 0,
            u_prev: u0.clone(),
            u: u0,
        };
        for i in st.grid.free() {
            let a = st.grid.laplacian(&st.u, i) + accel(i, 0.0, st.u[i]);
            st.u_prev[i] = st.u[i] - dt * u1[i] + 0.5 * dt * dt * a;
        }
        Ok(st)
    }

    /// One leapfrog step of `u_tt = Δu + accel(i, t, u)`, ends held fixed.
    pub fn step<A: Fn(usize, f64, f64) -> f64>(&mut self, accel: A) {
        let dt2 = self.dt * self.dt;
        let mut next = self.u.clone();
        for i in self.grid.free() {
            let a = self.grid.laplacian(&self.u, i) + accel(i, self.t, self.u[i]);
            next[i] = 2.0 * self.u[i] - self.u_prev[i] + dt2 * a;
        }
        self.u_prev = std::mem::replace(&mut self.u, next);
        self.steps += 1;
        self.t = self.steps as f64 * self.dt;
    }

    /// `max |u|`, NaN if any value is NaN.
    pub fn sup(&self) -> f64 {
        self.u.iter().fold(0.0, |a: f64, v| {
            if v.is_nan() || a.is_nan() {
                f64::NAN
            } else {
                a.max(v.abs())
            }
        })
    }
}

/// Nonlinear solver for `u_tt = Δu + f(u)/ε²`.
pub struct NonlinearSolver {
    pub nl: Nonlinearity,
    pub state: FieldState,
}

impl NonlinearSolver {
    pub fn new(nl: Nonlinearity, grid: Grid, eps: f64, dt: f64, u0: Vec<f64>, u1: &[f64]) -> Result<Self, WaveError> {
        if !(eps > 0.0) {
            return Err(WaveError::Grid(format!("ε = {eps} must be positive")));
        }
        check_guards(&nl, eps, grid.dx, dt)?;
        let inv = 1.0 / (eps * eps);
        let state = FieldState::new(grid, eps, dt, u0, u1, |_, _, u| nl.f(u) * inv)?;
        Ok(NonlinearSolver { nl, state })
    }

    pub fn step(&mut self) -> Result<(), WaveError> {
        let nl = self.nl;
        let inv = 1.0 / (self.state.eps * self.state.eps);
        self.state.step(|_, _, u| nl.f(u) * inv);
        let s = self.state.sup();
        if !(s <= 1.1) {
            return Err(WaveError::Sentinel {
                t: self.state.t,
                value: s,
            });
        }
        Ok(())
    }

    /// Discrete energy `∫ ε²(u_t² + |∇u|²)/2 + W(u)` at the half level between `u_prev` and `u`.
    pub fn energy(&self) -> f64 {
        let st = &self.state;
        let g = &st.grid;
        let e2 = st.eps * st.eps;
        let wts = g.weights();
        let mut e = 0.0;
        for i in 0..g.n {
            let ut = (st.u[i] - st.u_prev[i]) / st.dt;
            let pot = 0.5 * (self.nl.potential(st.u[i]) + self.nl.potential(st.u_prev[i]));
            e += wts[i] * (0.5 * e2 * ut * ut + pot);
        }
        // gradient on cell midpoints, product of the two levels
        for i in 0..g.n - 1 {
            let a = (st.u[i + 1] - st.u[i]) / g.dx;
            let b = (st.u_prev[i + 1] - st.u_prev[i]) / g.dx;
            let r = if g.mode == Mode::Radial {
                g.x(i) + 0.5 * g.dx
            } else {
                1.0
            };
            e += 0.5 * e2 * a * b * r * g.dx;
        }
        e
    }
}

/// Solver for `φ_tt = Δφ + f'(U(t, x)) φ / ε² - η(t, x)`.
pub struct LinearizedSolver<U, E> {
    pub nl: Nonlinearity,
    pub background: U,
    pub source: E,
    pub state: FieldState,
}

impl<U: Fn(f64, f64) -> f64, E: Fn(f64, f64) -> f64> LinearizedSolver<U, E> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nl: Nonlinearity,
        grid: Grid,
        eps: f64,
        dt: f64,
        phi0: Vec<f64>,
        phi1: &[f64],
        background: U,
        source: E,
    ) -> Result<Self, WaveError> {
        check_guards(&nl, eps, grid.dx, dt)?;
        let inv = 1.0 / (eps * eps);
        let xs = grid.nodes();
        let state = FieldState::new(grid, eps, dt, phi0, phi1, |i, t, p| {
            nl.df(background(t, xs[i])) * p * inv - source(t, xs[i])
        })?;
        Ok(LinearizedSolver {
            nl,
            background,
            source,
            state,
        })
    }

    pub fn step(&mut self) {
        let inv = 1.0 / (self.state.eps * self.state.eps);
        let xs = self.state.grid.nodes();
        let (nl, bg, src) = (&self.nl, &self.background, &self.source);
        self.state.step(|i, t, p| nl.df(bg(t, xs[i])) * p * inv - src(t, xs[i]));
    }
}

/// Stored time level: `u` and the centered `u_t`.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub eps: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"ILSNAP01";

impl Snapshot {
    /// Header: magic, `rows` and `cols` as u64, `t` and `ε` as f64; then the rows `x, u, u_t`
    /// as little-endian f64, row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&3u64.to_le_bytes())?;
        w.write_all(&(self.x.len() as u64).to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        for row in [&self.x, &self.u, &self.ut] {
            for v in row.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a snapshot file"));
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let rows = u64::from_le_bytes(next(&mut r)?) as usize;
        let cols = u64::from_le_bytes(next(&mut r)?) as usize;
        let t = f64::from_le_bytes(next(&mut r)?);
        let eps = f64::from_le_bytes(next(&mut r)?);
        if rows != 3 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("expected 3 rows, found {rows}"),
            ));
        }
        let mut data: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(cols)).collect();
        for row in data.iter_mut() {
            for _ in 0..cols {
                row.push(f64::from_le_bytes(next(&mut r)?));
            }
        }
        let ut = data.pop().unwrap_or_default();
        let u = data.pop().unwrap_or_default();
        let x = data.pop().unwrap_or_default();
        Ok(Snapshot { t, eps, x, u, ut })
    }
}

/// Zero crossings of `u` by linear interpolation between sign changes.
pub fn zero_crossings(x: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..u.len().saturating_sub(1) {
        let (a, b) = (u[i], u[i + 1]);
        if a == 0.0 {
            out.push(x[i]);
        } else if a * b < 0.0 {
            out.push(x[i] + (x[i + 1] - x[i]) * a / (a - b));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub crossings: Vec<f64>,
    pub reference: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceTrack {
    pub points: Vec<TrackPoint>,
    /// Set when a level has a crossing count different from the expected one.
    pub breakdown: bool,
    /// `max_t |x_num(t) - x_ref(t)|` over levels with one crossing and a reference.
    pub max_deviation: f64,
}

impl InterfaceTrack {
    pub fn new() -> Self {
        InterfaceTrack {
            points: Vec::new(),
            breakdown: false,
            max_deviation: 0.0,
        }
    }

    pub fn record(&mut self, t: f64, x: &[f64], u: &[f64], expected: usize, reference: Option<f64>) {
        let crossings = zero_crossings(x, u);
        if crossings.len() != expected {
            self.breakdown = true;
        }
        if let (1, Some(r)) = (crossings.len(), reference) {
            self.max_deviation = self.max_deviation.max((crossings[0] - r).abs());
        }
        self.points.push(TrackPoint {
            t,
            crossings,
            reference,
        });
    }
}

impl Default for InterfaceTrack {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of a nonlinear run.
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub track: InterfaceTrack,
    /// `(t, E)` at every snapshot.
    pub energy: Vec<(f64, f64)>,
    pub final_state: FieldState,
}

impl RunOutput {
    /// `max |E - E₀| / |E₀|` over the recorded levels.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().map(|e| e.1).unwrap_or(0.0);
        self.energy.iter().map(|e| (e.1 - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Runs to `steps` steps, tracking the interface at every level and storing a snapshot every
/// `snap_stride` steps (and at the end).
pub fn run_nonlinear(
    mut solver: NonlinearSolver,
    steps: usize,
    snap_stride: usize,
    expected_crossings: usize,
    reference: &dyn Fn(f64) -> f64,
) -> Result<RunOutput, WaveError> {
    let x = solver.state.grid.nodes();
    let mut track = InterfaceTrack::new();
    let mut snapshots = Vec::new();
    let mut energy = Vec::new();
    let stride = snap_stride.max(1);
    track.record(0.0, &x, &solver.state.u, expected_crossings, Some(reference(0.0)));
    for n in 0..steps {
        let snap_here = n % stride == 0;
        let keep = if snap_here {
            Some((solver.state.u.clone(), solver.state.u_prev.clone(), solver.state.t))
        } else {
            None
        };
        solver.step()?;
        if let Some((u, prev, t)) = keep {
            let ut = solver
                .state
                .u
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b) / (2.0 * solver.state.dt))
                .collect();
            snapshots.push(Snapshot {
                t,
                eps: solver.state.eps,
                x: x.clone(),
                u,
                ut,
            });
            energy.push((t, solver.energy()));
        }
        let t = solver.state.t;
        track.record(t, &x, &solver.state.u, expected_crossings, Some(reference(t)));
    }
    let st = &solver.state;
    let ut = st.u.iter().zip(&st.u_prev).map(|(a, b)| (a - b) / st.dt).collect();
    snapshots.push(Snapshot {
        t: st.t,
        eps: st.eps,
        x: x.clone(),
        u: st.u.clone(),
        ut,
    });
    energy.push((st.t, solver.energy()));
    Ok(RunOutput {
        snapshots,
        track,
        energy,
        final_state: solver.state,
    })
}

/// Boosted kink `w(γ(x - vt)/ε)` and its time derivative, from a tabulated profile.
pub fn boosted_kink(profile: &crate::profile::HeteroclinicProfile, v: f64, eps: f64, x: f64, t: f64) -> (f64, f64) {
    let gamma = 1.0 / (1.0 - v * v).sqrt();
    let (w, wp, _) = profile.eval(gamma * (x - v * t) / eps);
    (w, -gamma * v * wp / eps)
}

/// One resolution of the planar kink study.
#[derive(Clone, Debug, Serialize)]
pub struct KinkLevel {
    pub dx: f64,
    pub dt: f64,
    pub sup_error: f64,
    pub crossing: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KinkStudy {
    pub eps: f64,
    pub v: f64,
    pub t_end: f64,
    pub levels: Vec<KinkLevel>,
    pub fitted_order: f64,
}

/// Propagates the exact boosted kink on `[-2, 2]` at `dx = ε / m` for each `m`, Courant ratio 1/2.
pub fn planar_kink_study(
    nl: Nonlinearity,
    eps: f64,
    v: f64,
    t_end: f64,
    dx_per_eps: &[usize],
) -> Result<KinkStudy, Box<dyn std::error::Error>> {
    let profile = crate::profile::HeteroclinicProfile::build(nl, 14.0, 8193)?;
    let mut levels = Vec::new();
    for &m in dx_per_eps {
        let dx = eps / m as f64;
        let grid = Grid::new(Mode::Planar, -2.0, 2.0, dx)?;
        let (dt, steps) = fit_step(t_end, 0.5 * dx);
        let x = grid.nodes();
        let (u0, u1): (Vec<f64>, Vec<f64>) = x.iter().map(|&xi| boosted_kink(&profile, v, eps, xi, 0.0)).unzip();
        let solver = NonlinearSolver::new(nl, grid, eps, dt, u0, &u1)?;
        let out = run_nonlinear(solver, steps, steps, 1, &|t| v * t)?;
        let st = &out.final_state;
        let sup_error = x
            .iter()
            .zip(&st.u)
            .map(|(&xi, u)| (u - boosted_kink(&profile, v, eps, xi, st.t).0).abs())
            .fold(0.0, f64::max);
        let crossing = out
            .track
            .points
            .last()
            .and_then(|p| p.crossings.first().copied())
            .unwrap_or(f64::NAN);
        levels.push(KinkLevel {
            dx,
            dt,
            sup_error,
            crossing,
            energy_drift: out.energy_drift(),
        });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = levels.iter().map(|l| (l.dx.ln(), l.sup_error.ln())).unzip();
    let fitted_order = if levels.len() > 1 {
        linear_fit(&lx, &ly).0
    } else {
        f64::NAN
    };
    Ok(KinkStudy {
        eps,
        v,
        t_end,
        levels,
        fitted_order,
    })
}

/// Fitted rate `a` in `|u - 𝕀| ≈ C e^{-a d/ε}` over nodes whose distance `d` to the interface
/// lies in `[d_min, d_max]` and whose deviation is above round-off.
pub fn far_field_rate(x: &[f64], u: &[f64], interface: f64, eps: f64, d_min: f64, d_max: f64) -> Option<f64> {
    let (mut s, mut l) = (Vec::new(), Vec::new());
    for (xi, ui) in x.iter().zip(u) {
        let d = (xi - interface).abs();
        let lim = if *xi > interface { 1.0 } else { -1.0 };
        let dev = (ui - lim).abs();
        if d >= d_min && d <= d_max && dev > 1e-13 {
            s.push(d / eps);
            l.push(dev.ln());
        }
    }
    if s.len() < 3 {
        return None;
    }
    Some(-linear_fit(&s, &l).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::HeteroclinicProfile;

    const NL: Nonlinearity = Nonlinearity::AllenCahn;

    #[test]
    fn constant_state_is_stationary() {
        let g = Grid::new(Mode::Planar, -1.0, 1.0, 0.01).unwrap();
        let n = g.n;
        let mut s = NonlinearSolver::new(NL, g, 0.1, 0.005, vec![1.0; n], &vec![0.0; n]).unwrap();
        for _ in 0..100 {
            s.step().unwrap();
        }
        assert!(s.state.u.iter().all(|v| *v == 1.0));
        let g = Grid::radial(2.0, 0.01).unwrap();
        let n = g.n;
        let mut s = NonlinearSolver::new(NL, g, 0.1, 0.005, vec![1.0; n], &vec![0.0; n]).unwrap();
        s.step().unwrap();
        assert!(s.state.u.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn guards_refuse_bad_steps() {
        let g = Grid::new(Mode::Planar, -1.0, 1.0, 0.01).unwrap();
        let n = g.n;
        let bad = |dt: f64, eps: f64| NonlinearSolver::new(NL, g.clone(), eps, dt, vec![1.0; n], &vec![0.0; n]).err();
        assert!(matches!(bad(0.006, 0.1), Some(WaveError::Cfl { .. })));
        assert!(matches!(bad(0.005, 0.05), Some(WaveError::Unresolved { .. })));
        // with dx <= ε/8 and dt <= dx/2 only a stiff well can trip the f' guard
        let stiff = Nonlinearity::ScaledAllenCahn { lambda: 20.0 };
        let g = Grid::new(Mode::Planar, -1.0, 1.0, 0.001).unwrap();
        let n = g.n;
        assert!(matches!(
            NonlinearSolver::new(stiff, g, 0.008, 0.0005, vec![1.0; n], &vec![0.0; n]),
            Err(WaveError::Stiff { .. })
        ));
    }

    #[test]
    fn kink_translates_with_second_order_error() {
        let st = planar_kink_study(NL, 0.1, 0.4, 0.5, &[8, 16]).unwrap();
        let l = &st.levels;
        assert!(l[1].sup_error < l[0].sup_error / 3.0, "{st:?}");
        assert!((l[1].crossing - 0.2).abs() < l[1].dx);
        assert!(l.iter().all(|e| e.energy_drift < 0.01));
    }

    #[test]
    fn crossings_and_breakdown() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = x.iter().map(|v| v - 0.45).collect();
        let c = zero_crossings(&x, &u);
        assert_eq!(c.len(), 1);
        assert!((c[0] - 0.45).abs() < 1e-12);
        let mut t = InterfaceTrack::new();
        t.record(0.0, &x, &[1.0; 11], 0, None);
        assert!(!t.breakdown && t.points[0].crossings.is_empty());
        t.record(0.1, &x, &[1.0; 11], 1, None);
        assert!(t.breakdown);
    }

    #[test]
    fn snapshot_round_trip() {
        let s = Snapshot {
            t: 0.25,
            eps: 0.05,
            x: vec![0.0, 1.0],
            u: vec![-1.0, 1.0],
            ut: vec![0.5, -0.5],
        };
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 48);
        let r = Snapshot::read_from(&buf[..]).unwrap();
        assert_eq!((r.t, r.eps, r.x, r.u, r.ut), (s.t, s.eps, s.x, s.u, s.ut));
        assert!(Snapshot::read_from(&b"nonsense-and-more"[..]).is_err());
    }

    #[test]
    fn linearized_zero_data_stays_zero() {
        let g = Grid::new(Mode::Planar, -1.0, 1.0, 0.0125).unwrap();
        let n = g.n;
        let mut s = LinearizedSolver::new(
            NL,
            g,
            0.1,
            0.00625,
            vec![0.0; n],
            &vec![0.0; n],
            |_, x| (x / 0.1).tanh(),
            |_, _| 0.0,
        )
        .unwrap();
        for _ in 0..50 {
            s.step();
        }
        assert!(s.state.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn translation_mode_grows_slowly() {
        let eps = 0.1;
        let p = HeteroclinicProfile::build(NL, 14.0, 8193).unwrap();
        let g = Grid::new(Mode::Planar, -2.0, 2.0, eps / 16.0).unwrap();
        let x = g.nodes();
        let phi0: Vec<f64> = x.iter().map(|&xi| p.eval(xi / eps).1).collect();
        let n = g.n;
        let (dt, steps) = fit_step(1.0, 0.5 * g.dx);
        let pc = p.clone();
        let mut s = LinearizedSolver::new(
            NL,
            g,
            eps,
            dt,
            phi0.clone(),
            &vec![0.0; n],
            move |_, x| pc.eval(x / eps).0,
            |_, _| 0.0,
        )
        .unwrap();
        let s0 = phi0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0f64;
        for _ in 0..steps {
            s.step();
            let r = s.state.sup() / s0;
            worst = worst.max((r - 1.0) / s.state.t);
        }
        assert!(worst < 0.5, "{worst}");
    }
}
