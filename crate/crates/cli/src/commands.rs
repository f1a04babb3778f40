use crate::artifacts::{Cell, RunDir, Table};
use crate::config::{ConfigError, RunConfig, Shape};
use anyhow::{anyhow, Result};
use interface_lab::acceptance::{run_criterion, AcceptanceOptions, CRITERIA};
use interface_lab::ansatz::{residual_scan, AnsatzOrderK, GlobalApproximation};
use interface_lab::energy::{planar_energy_run, PlanarEnergyConfig, PlanarEnergyRun, GRONWALL_CAP};
use interface_lab::experiments::{radial_ansatz_run, RadialParams};
use interface_lab::fermi::ModifiedFermiChart;
use interface_lab::geometry::TimelikeSurface;
use interface_lab::jacobi::manufactured_study;
use interface_lab::nonlinearity::Nonlinearity;
use interface_lab::profile::HeteroclinicProfile;
use interface_lab::wave::{boosted_kink, fit_step, run_nonlinear, Grid, Mode, NonlinearSolver, RunOutput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

/// Tube half-width assigned to the plane, which has no focal points.
const PLANE_DELTA: f64 = 1.0;

/// Outcome of a subcommand that ran to completion.
pub enum Outcome {
    Pass,
    /// A gated invariant failed; the message names it.
    Gate(String),
}

impl Outcome {
    fn gate(ok: bool, what: impl FnOnce() -> String) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Gate(what())
        }
    }
}

pub fn thread_pool() -> Result<rayon::ThreadPool, ConfigError> {
    let n = match std::env::var("INTERFACE_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(ConfigError(format!(
                    "INTERFACE_LAB_THREADS = `{v}` must be a positive integer"
                )))
            }
        },
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))
}

/// One job per ε on the pool, results in input order.
fn fan_out<T: Send>(eps: &[f64], job: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let pool = thread_pool().map_err(|e| anyhow!(e.0))?;
    pool.install(|| eps.par_iter().map(|&e| job(e)).collect())
}

fn surface(cfg: &RunConfig) -> Result<TimelikeSurface> {
    Ok(match cfg.shape {
        Shape::Plane => TimelikeSurface::boosted_plane(cfg.v, cfg.t, cfg.nt, cfg.ntheta, PLANE_DELTA)?,
        Shape::Cylinder => TimelikeSurface::static_cylinder(cfg.r0, cfg.t, cfg.nt, cfg.ntheta)?,
        Shape::Circle => TimelikeSurface::radial_minimal(cfg.r0, cfg.t, cfg.nt, cfg.ntheta)?,
    })
}

fn start(cfg: &RunConfig) -> Result<RunDir> {
    let dir = RunDir::create(&cfg.output_dir)?;
    dir.write_bytes("config.txt", cfg.to_text().as_bytes())?;
    Ok(dir)
}

#[derive(Serialize)]
struct ProfileSummary {
    well: Nonlinearity,
    nodes: usize,
    half_width: f64,
    ode_residual: f64,
    xi: f64,
    sigma: f64,
    decay_rate: f64,
    closed_form_error: Option<f64>,
    translation_form: f64,
    min_coercivity: f64,
    seed: u64,
}

pub fn profile(cfg: &RunConfig, nl: Nonlinearity) -> Result<Outcome> {
    let p = HeteroclinicProfile::build(nl, 12.0, 4096)?;
    let dir = start(cfg)?;
    let mut t = Table::new(&["zeta", "w", "w_z", "w_zz"]);
    for j in 0..p.len() {
        t.row(&[Cell::F(p.zeta[j]), Cell::F(p.w[j]), Cell::F(p.wp[j]), Cell::F(p.wpp[j])]);
    }
    dir.write_table("profile.csv", &t)?;
    let closed_form_error = match nl {
        Nonlinearity::AllenCahn => Some(
            p.zeta
                .iter()
                .zip(&p.w)
                .map(|(z, w)| (w - (z / 2f64.sqrt()).tanh()).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let min_coercivity = p
        .coercivity_trials(&mut rng, 100)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let s = ProfileSummary {
        well: nl,
        nodes: p.len(),
        half_width: p.extent(),
        ode_residual: p.ode_residual(),
        xi: p.xi(),
        sigma: nl.sigma(),
        decay_rate: p.decay_rate,
        closed_form_error,
        translation_form: p.quadratic_form(&p.wp),
        min_coercivity,
        seed: cfg.seed,
    };
    dir.write_json("profile.json", &s)?;
    dir.write_manifest()?;
    let ok =
        s.closed_form_error.is_none_or(|e| e <= 1e-8) && s.translation_form.abs() <= 1e-8 && s.min_coercivity > 0.0;
    Ok(Outcome::gate(ok, || {
        format!(
            "profile checks failed: {:?}, Q(w') = {:e}, c = {}",
            s.closed_form_error, s.translation_form, s.min_coercivity
        )
    }))
}

#[derive(Serialize)]
struct SurfaceSummary {
    shape: &'static str,
    minimal: bool,
    delta: f64,
    ode_error: f64,
    max_normal_defect: f64,
    max_tangency_defect: f64,
    min_abs_det_g: f64,
    max_mean_curvature: f64,
    focal_distance: f64,
}

pub fn surface_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let s = surface(cfg)?;
    let dir = start(cfg)?;
    let mut t = Table::new(&["t", "theta", "x0", "x1", "x2", "nu0", "nu1", "nu2", "H", "a_gamma"]);
    for i in 0..s.nt {
        for j in 0..s.ntheta {
            let p = s.sample(i, j);
            t.row(&[
                Cell::F(s.t(i)),
                Cell::F(s.theta(j)),
                Cell::F(p.y[0]),
                Cell::F(p.y[1]),
                Cell::F(p.y[2]),
                Cell::F(p.nu[0]),
                Cell::F(p.nu[1]),
                Cell::F(p.nu[2]),
                Cell::F(p.mean_curvature(0.0)),
                Cell::F(p.a_gamma()),
            ]);
        }
    }
    dir.write_table("surface.csv", &t)?;
    let r = s.invariant_report();
    let summary = SurfaceSummary {
        shape: match cfg.shape {
            Shape::Plane => "plane",
            Shape::Cylinder => "cylinder",
            Shape::Circle => "circle",
        },
        minimal: s.minimal,
        delta: s.delta,
        ode_error: s.ode_error,
        max_normal_defect: r.max_normal_defect,
        max_tangency_defect: r.max_tangency_defect,
        min_abs_det_g: r.min_abs_det_g,
        max_mean_curvature: r.max_mean_curvature,
        focal_distance: s.focal_distance(),
    };
    dir.write_json("surface.json", &summary)?;
    dir.write_manifest()?;
    let ok =
        r.max_normal_defect <= 1e-10 && r.max_tangency_defect <= 1e-10 && (!s.minimal || r.max_mean_curvature <= 1e-4);
    Ok(Outcome::gate(ok, || {
        format!(
            "surface invariants failed: normal {:e}, tangency {:e}, |H| {:e}",
            r.max_normal_defect, r.max_tangency_defect, r.max_mean_curvature
        )
    }))
}

#[derive(Serialize)]
struct FermiSummary {
    max_cross_term: f64,
    canonical_max_g00: f64,
    canonical_min_gaa: f64,
    passes: bool,
    report: interface_lab::fermi::ModifiedReport,
}

pub fn fermi_check(cfg: &RunConfig) -> Result<Outcome> {
    let s = surface(cfg)?;
    let canon = s.canonical_coordinates()?;
    let chart = ModifiedFermiChart::build(&s, cfg.t1, cfg.chart_nz)?;
    let report = chart.report(cfg.chart_nz)?;
    let (g00, gaa) = canon.signature_margins();
    let summary = FermiSummary {
        max_cross_term: canon.max_cross_term(),
        canonical_max_g00: g00,
        canonical_min_gaa: gaa,
        passes: report.passes() && canon.max_cross_term() <= 1e-8 && g00 < 0.0 && gaa > 0.0,
        report,
    };
    let dir = start(cfg)?;
    dir.write_json("fermi.json", &summary)?;
    dir.write_manifest()?;
    Ok(Outcome::gate(summary.passes, || {
        "chart invariants failed, see fermi.json".into()
    }))
}

pub fn jacobi(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.shape != Shape::Circle {
        return Err(anyhow!(ConfigError(
            "jacobi runs the manufactured study on the collapsing circle; set surface.shape = circle".into()
        )));
    }
    let st = manufactured_study(cfg.r0, cfg.t, 3).map_err(|e| anyhow!("{e}"))?;
    let dir = start(cfg)?;
    let mut t = Table::new(&["nt", "ntheta", "dt", "error"]);
    for l in &st.levels {
        t.row(&[
            Cell::I(l.nt as u64),
            Cell::I(l.ntheta as u64),
            Cell::F(l.dt),
            Cell::F(l.error),
        ]);
    }
    dir.write_table("jacobi.csv", &t)?;
    dir.write_json("jacobi.json", &st)?;
    dir.write_manifest()?;
    let min = st.orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Outcome::gate(min >= 1.9, || {
        format!("convergence order {min} below 1.9")
    }))
}

#[derive(Serialize)]
struct AnsatzSummary {
    eps: f64,
    k: usize,
    half_width: f64,
    residual_sup: f64,
    residual_truncated: usize,
    bounds: interface_lab::ansatz::AnsatzBounds,
    steps: Vec<interface_lab::ansatz::InductionStep>,
    glue_radius: f64,
    band_residual: f64,
}

pub fn ansatz(cfg: &RunConfig, nl: Nonlinearity) -> Result<Outcome> {
    let s = surface(cfg)?;
    let built = fan_out(&cfg.eps, |eps| {
        let (a, steps) = AnsatzOrderK::build(&s, nl, eps, cfg.k)?;
        let glue_radius = cfg.glue_fraction * s.delta;
        let band = GlobalApproximation::glue(&a, glue_radius)?.band_residual();
        let r = a.residual();
        let summary = AnsatzSummary {
            eps,
            k: cfg.k,
            half_width: a.half_width,
            residual_sup: r.sup(),
            residual_truncated: r.truncated,
            bounds: a.bounds(),
            steps,
            glue_radius,
            band_residual: band.sup,
        };
        let mut t = Table::new(&["t", "theta", "h"]);
        for i in 0..s.nt {
            for j in 0..s.ntheta {
                t.row(&[Cell::F(s.t(i)), Cell::F(s.theta(j)), Cell::F(a.h[s.idx(i, j)])]);
            }
        }
        Ok((summary, t))
    })?;
    let dir = start(cfg)?;
    let mut summaries = Vec::new();
    for (summary, t) in built {
        dir.write_table(&format!("eps-{}/h.csv", summary.eps), &t)?;
        summaries.push(summary);
    }
    dir.write_json("ansatz.json", &summaries)?;
    dir.write_manifest()?;
    let ok = summaries
        .iter()
        .all(|s| s.residual_sup.is_finite() && s.band_residual.is_finite());
    Ok(Outcome::gate(ok, || "non-finite residual, see ansatz.json".into()))
}

pub fn residual_scan_cmd(cfg: &RunConfig, nl: Nonlinearity) -> Result<Outcome> {
    let s = surface(cfg)?;
    let ks: Vec<usize> = (0..=cfg.k).collect();
    let scan = residual_scan(&s, nl, &ks, &cfg.eps)?;
    let dir = start(cfg)?;
    let mut t = Table::new(&["k", "eps", "sup_residual", "truncated"]);
    for r in &scan.rows {
        t.row(&[
            Cell::I(r.k as u64),
            Cell::F(r.eps),
            Cell::F(r.sup_residual),
            Cell::I(r.truncated as u64),
        ]);
    }
    dir.write_table("scan.csv", &t)?;
    let mut f = Table::new(&["k", "slope", "intercept", "required", "pass"]);
    let mut failed = Vec::new();
    for fit in &scan.fits {
        let required = fit.k as f64 + 2.7;
        let pass = fit.slope >= required;
        if !pass {
            failed.push(format!("k={} slope {:.3} < {required}", fit.k, fit.slope));
        }
        f.row(&[
            Cell::I(fit.k as u64),
            Cell::F(fit.slope),
            Cell::F(fit.intercept),
            Cell::F(required),
            Cell::B(pass),
        ]);
    }
    dir.write_table("slopes.csv", &f)?;
    dir.write_manifest()?;
    let gate = if cfg.eps.len() < 2 { Vec::new() } else { failed };
    Ok(Outcome::gate(gate.is_empty(), || gate.join(", ")))
}

#[derive(Serialize)]
struct SimulationSummary {
    eps: f64,
    dx: f64,
    dt: f64,
    max_deviation: f64,
    breakdown: bool,
    far_field_rate: Option<f64>,
    energy_drift: f64,
    snapshots: usize,
}

fn write_simulation(dir: &RunDir, eps: f64, out: &RunOutput) -> Result<()> {
    for (n, snap) in out.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        snap.write_to(&mut buf)?;
        dir.write_bytes(&format!("eps-{eps}/snap-{n:04}.bin"), &buf)?;
    }
    let mut t = Table::new(&["t", "crossings", "interface", "reference"]);
    for p in &out.track.points {
        let first = p.crossings.first().copied().unwrap_or(f64::NAN);
        t.row(&[
            Cell::F(p.t),
            Cell::I(p.crossings.len() as u64),
            Cell::F(first),
            Cell::F(p.reference.unwrap_or(f64::NAN)),
        ]);
    }
    dir.write_table(&format!("eps-{eps}/track.csv"), &t)?;
    let mut e = Table::new(&["t", "energy"]);
    for &(t, v) in &out.energy {
        e.row(&[Cell::F(t), Cell::F(v)]);
    }
    dir.write_table(&format!("eps-{eps}/conserved.csv"), &e)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, nl: Nonlinearity) -> Result<Outcome> {
    let runs = match cfg.shape {
        Shape::Circle => fan_out(&cfg.eps, |eps| {
            let p = RadialParams {
                k: cfg.k,
                r0: cfg.r0,
                t1: cfg.t,
                dx_per_eps: cfg.dx_per_eps,
                courant: cfg.courant,
                glue_fraction: cfg.glue_fraction,
                snap_every: cfg.t / 16.0,
                nt: cfg.nt,
                ntheta: cfg.ntheta,
            };
            let run = radial_ansatz_run(nl, eps, &p).map_err(|e| anyhow!("eps = {eps}: {e}"))?;
            let s = run.summary;
            let summary = SimulationSummary {
                eps,
                dx: s.dx,
                dt: s.dt,
                max_deviation: s.max_deviation,
                breakdown: s.breakdown,
                far_field_rate: s.far_field_rate,
                energy_drift: s.energy_drift,
                snapshots: run.output.snapshots.len(),
            };
            Ok((summary, run.output))
        })?,
        Shape::Plane => {
            let profile = HeteroclinicProfile::build(nl, 14.0, 8193)?;
            fan_out(&cfg.eps, |eps| {
                let dx = eps / cfg.dx_per_eps;
                let grid = Grid::new(Mode::Planar, -2.0, 2.0, dx)?;
                let (dt, steps) = fit_step(cfg.t, cfg.courant * dx);
                let x = grid.nodes();
                let (u0, u1): (Vec<f64>, Vec<f64>) =
                    x.iter().map(|&xi| boosted_kink(&profile, cfg.v, eps, xi, 0.0)).unzip();
                let solver = NonlinearSolver::new(nl, grid, eps, dt, u0, &u1)?;
                let v = cfg.v;
                let out = run_nonlinear(solver, steps, (steps / 16).max(1), 1, &|t| v * t)?;
                let st = &out.final_state;
                let far = out
                    .track
                    .points
                    .last()
                    .and_then(|p| p.crossings.first().copied())
                    .and_then(|iface| {
                        interface_lab::wave::far_field_rate(&x, &st.u, iface, eps, 2.0 * eps, 10.0 * eps)
                    });
                let summary = SimulationSummary {
                    eps,
                    dx,
                    dt,
                    max_deviation: out.track.max_deviation,
                    breakdown: out.track.breakdown,
                    far_field_rate: far,
                    energy_drift: out.energy_drift(),
                    snapshots: out.snapshots.len(),
                };
                Ok((summary, out))
            })?
        }
        Shape::Cylinder => {
            return Err(anyhow!(ConfigError(
                "simulate needs a minimal surface; the static cylinder is not one".into()
            )));
        }
    };
    let dir = start(cfg)?;
    let mut summaries = Vec::new();
    for (summary, out) in runs {
        write_simulation(&dir, summary.eps, &out)?;
        summaries.push(summary);
    }
    dir.write_json("simulate.json", &summaries)?;
    dir.write_manifest()?;
    let broken: Vec<String> = summaries
        .iter()
        .filter(|s| s.breakdown)
        .map(|s| format!("eps = {}", s.eps))
        .collect();
    Ok(Outcome::gate(broken.is_empty(), || {
        format!("interface breakdown at {}", broken.join(", "))
    }))
}

#[derive(Serialize)]
struct EnergySummary {
    eps: f64,
    dx: f64,
    dt: f64,
    c_gamma: f64,
    gronwall_constant: Option<f64>,
    gronwall_constant_without_gamma: Option<f64>,
    max_orthogonality_rel: f64,
    max_split_defect_rel: f64,
    min_coercivity: f64,
    energy_identity_defect: f64,
    sobolev: Vec<interface_lab::energy::SobolevBound>,
}

impl From<&PlanarEnergyRun> for EnergySummary {
    fn from(r: &PlanarEnergyRun) -> Self {
        EnergySummary {
            eps: r.eps,
            dx: r.dx,
            dt: r.dt,
            c_gamma: r.c_gamma,
            gronwall_constant: r.gronwall.constant,
            gronwall_constant_without_gamma: r.gronwall_without_gamma.constant,
            max_orthogonality_rel: r.max_orthogonality_rel,
            max_split_defect_rel: r.max_split_defect_rel,
            min_coercivity: r.min_coercivity,
            energy_identity_defect: r.energy_identity_defect,
            sobolev: r.sobolev.clone(),
        }
    }
}

/// Reads the configuration stored in `run` and writes the energy table to `out`.
pub fn energy_check(run: &Path, c_gamma: Option<f64>, out: Option<&Path>) -> Result<Outcome> {
    let text = std::fs::read_to_string(run.join("config.txt"))
        .map_err(|e| anyhow!(ConfigError(format!("{}: {e}", run.join("config.txt").display()))))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| anyhow!(e))?;
    if let Some(c) = c_gamma {
        cfg.c_gamma = c;
    }
    cfg.validate().map_err(|e| anyhow!(e))?;
    let nl = cfg.nonlinearity().map_err(|e| anyhow!(e))?;
    let runs = fan_out(&cfg.eps, |eps| {
        let ec = PlanarEnergyConfig {
            dx_per_eps: cfg.dx_per_eps,
            t_end: cfg.energy_t_end,
            c_gamma: cfg.c_gamma,
            ..PlanarEnergyConfig::new(eps)
        };
        Ok(planar_energy_run(nl, &ec)?)
    })?;
    let mut t = Table::new(&[
        "eps",
        "s",
        "E",
        "E_nr",
        "E_far",
        "gamma_term",
        "coercivity",
        "gronwall_C",
    ]);
    for r in &runs {
        let c = r.gronwall.constant.unwrap_or(f64::INFINITY);
        for row in &r.rows {
            t.row(&[
                Cell::F(r.eps),
                Cell::F(row.s),
                Cell::F(row.e),
                Cell::F(row.e_nr),
                Cell::F(row.e_far),
                Cell::F(row.gamma_term),
                Cell::F(row.coercivity),
                Cell::F(c),
            ]);
        }
    }
    let dir = RunDir::create(run)?;
    let csv = out.map(Path::to_path_buf).unwrap_or_else(|| run.join("energy.csv"));
    if let Some(parent) = csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&csv, t.render())?;
    let summaries: Vec<EnergySummary> = runs.iter().map(EnergySummary::from).collect();
    dir.write_json("energy.json", &summaries)?;
    dir.write_manifest()?;
    let mut failed = Vec::new();
    for s in &summaries {
        if s.max_orthogonality_rel > 1e-10 {
            failed.push(format!("eps = {}: orthogonality {:e}", s.eps, s.max_orthogonality_rel));
        }
        if s.max_split_defect_rel > 1e-8 {
            failed.push(format!("eps = {}: split defect {:e}", s.eps, s.max_split_defect_rel));
        }
        if !(s.min_coercivity > 0.0) {
            failed.push(format!("eps = {}: coercivity {}", s.eps, s.min_coercivity));
        }
        if s.gronwall_constant.is_none() {
            failed.push(format!("eps = {}: no Grönwall constant below {GRONWALL_CAP}", s.eps));
        }
    }
    Ok(Outcome::gate(failed.is_empty(), || failed.join("; ")))
}

pub fn acceptance(quick: bool, only: &[u8]) -> Result<Outcome> {
    let opts = AcceptanceOptions { quick };
    let ids: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        only.to_vec()
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(anyhow!(ConfigError(format!("unknown criterion {bad}"))));
    }
    let clock = Instant::now();
    let mut failed = Vec::new();
    for &id in &ids {
        let o = run_criterion(id, opts).ok_or_else(|| anyhow!("unknown criterion {id}"))?;
        println!("{o}");
        if !o.pass {
            failed.push(id.to_string());
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        ids.len() - failed.len(),
        ids.len(),
        clock.elapsed().as_secs_f64()
    );
    Ok(Outcome::gate(failed.is_empty(), || {
        format!("failed criteria: {}", failed.join(", "))
    }))
}
