//! The one-dimensional heteroclinic `w`, the inverse `𝒯` of the linearized
//! operator `p ↦ -(p'' + f'(w) p)`, and the quadratic form `Q`.

use crate::nonlinearity::Nonlinearity;
use crate::numerics::{cell_integrals, gauss_legendre, trapezoid, DiffOp};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid nonlinearity: {0}")]
    BadWell(String),
    #[error("profile grid too small: need R_prof >= 8 and N >= 512 (got R_prof = {r}, N = {n})")]
    GridTooSmall { r: f64, n: usize },
    #[error("profile inversion failed to converge at zeta = {0}")]
    NoConvergence(f64),
    #[error("input length {got} does not match the {expected} nodes of the window")]
    LengthMismatch { got: usize, expected: usize },
    #[error("window half-width {0} exceeds the tabulated profile")]
    WindowTooLarge(f64),
    #[error("w' underflows at the window edge (|zeta| = {0}); choose a smaller R")]
    Underflow(f64),
}

/// Tabulated heteroclinic on a uniform grid `zeta_j = x0 + j h`.
#[derive(Clone, Debug)]
pub struct HeteroclinicProfile {
    pub nl: Nonlinearity,
    pub x0: f64,
    pub h: f64,
    pub zeta: Vec<f64>,
    pub w: Vec<f64>,
    pub wp: Vec<f64>,
    pub wpp: Vec<f64>,
    gap: Vec<f64>,
    pub decay_rate: f64,
    tail_c: f64,
}

/// Result of applying `𝒯`.
#[derive(Clone, Debug)]
pub struct TOutput {
    pub p: Vec<f64>,
    /// `p'` from the closed form, consistent with `p` node by node.
    pub dp: Vec<f64>,
    /// `∫ q w'` over the window.
    pub orthogonality: f64,
    /// Fitted `C` in `|p| <= C (1 + |ζ|^{m+1}) e^{-a|ζ|}` over the inner half of the window.
    pub envelope_constant: f64,
    /// Ratio of the outer-half to inner-half envelope constants.
    pub envelope_growth: f64,
    /// Set when the solution leaves the decay envelope (typically because `∫ q w' ≠ 0`).
    pub envelope_flagged: bool,
}

/// Accuracy of the profile inversion.
const INVERSION_TOL: f64 = 1e-15;

/// The primitive `G(σ) = ∫₀^w ds / sqrt(2W(s))` in the variable `σ = -ln(1 - w)`.
struct Primitive<'a> {
    nl: &'a Nonlinearity,
    gx: Vec<f64>,
    gw: Vec<f64>,
}

impl<'a> Primitive<'a> {
    fn new(nl: &'a Nonlinearity) -> Self {
        let (gx, gw) = gauss_legendre(12);
        Primitive { nl, gx, gw }
    }

    /// Integrand in `σ`: `(1 - w) / sqrt(2 W(w))`, bounded by `1 / sqrt(W''(1))` at infinity.
    fn density(&self, sigma: f64) -> f64 {
        let e = (-sigma).exp();
        e / (2.0 * self.nl.potential_gap(e)).sqrt()
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let panels = (((b - a).abs() / 0.25).ceil() as usize).max(1);
        let step = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * step;
            let mid = lo + 0.5 * step;
            total += self
                .gx
                .iter()
                .zip(&self.gw)
                .map(|(x, wt)| wt * self.density(mid + 0.5 * step * x))
                .sum::<f64>()
                * 0.5
                * step;
        }
        total
    }
}

impl HeteroclinicProfile {
    /// Tabulates on `n` nodes spanning `[-r_prof, r_prof]`.
    pub fn build(nl: Nonlinearity, r_prof: f64, n: usize) -> Result<Self, ProfileError> {
        if r_prof < 8.0 || n < 512 {
            return Err(ProfileError::GridTooSmall { r: r_prof, n });
        }
        let h = 2.0 * r_prof / (n - 1) as f64;
        Self::on_grid(nl, -r_prof, h, n)
    }

    /// Tabulates on the arbitrary uniform grid `x0 + j h`, `j < n`.
    pub fn on_grid(nl: Nonlinearity, x0: f64, h: f64, n: usize) -> Result<Self, ProfileError> {
        nl.validate().map_err(ProfileError::BadWell)?;
        let zeta: Vec<f64> = (0..n).map(|j| x0 + j as f64 * h).collect();
        let prim = Primitive::new(&nl);
        let rate = nl.decay_rate();
        // process nodes by increasing |ζ| so every solve starts near the previous root
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| zeta[a].abs().partial_cmp(&zeta[b].abs()).unwrap());
        let mut sigma_of = vec![0.0; n];
        let (mut s_prev, mut g_prev) = (0.0, 0.0);
        for &j in &order {
            let target = zeta[j].abs();
            if target == 0.0 {
                sigma_of[j] = 0.0;
                continue;
            }
            let mut s = if s_prev > 0.0 {
                s_prev + rate * (target - g_prev)
            } else {
                rate * target
            };
            let mut converged = false;
            for _ in 0..60 {
                let g = g_prev + prim.integral(s_prev, s);
                let step = (g - target) / prim.density(s);
                let mut next = s - step;
                if next <= 0.0 {
                    next = 0.5 * s;
                }
                s = next;
                if step.abs() <= INVERSION_TOL * s.max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged || !s.is_finite() {
                return Err(ProfileError::NoConvergence(zeta[j]));
            }
            g_prev += prim.integral(s_prev, s);
            s_prev = s;
            sigma_of[j] = s;
        }
        let mut w = vec![0.0; n];
        let mut wp = vec![0.0; n];
        let mut wpp = vec![0.0; n];
        let mut gap = vec![1.0; n];
        for j in 0..n {
            let e = (-sigma_of[j]).exp();
            let sign = if zeta[j] > 0.0 {
                1.0
            } else if zeta[j] < 0.0 {
                -1.0
            } else {
                0.0
            };
            gap[j] = e;
            w[j] = sign * (1.0 - e);
            wp[j] = (2.0 * nl.potential_gap(e)).sqrt();
            wpp[j] = -nl.f(w[j]);
        }
        let edge = if zeta[0].abs() > zeta[n - 1].abs() { 0 } else { n - 1 };
        let tail_c = gap[edge] * (rate * zeta[edge].abs()).exp();
        Ok(HeteroclinicProfile {
            nl,
            x0,
            h,
            zeta,
            w,
            wp,
            wpp,
            gap,
            decay_rate: rate,
            tail_c,
        })
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Distance of `|w|` from 1 at each node, free of cancellation.
    pub fn gap(&self) -> &[f64] {
        &self.gap
    }

    /// Largest `|ζ|` covered by the table.
    pub fn extent(&self) -> f64 {
        self.zeta[0].abs().min(self.zeta[self.len() - 1].abs())
    }

    /// `(w, w', w'')` anywhere: quintic Hermite inside the table, exponential tail rule outside.
    pub fn eval(&self, zeta: f64) -> (f64, f64, f64) {
        let n = self.len();
        let s = (zeta - self.x0) / self.h;
        if s < 0.0 || s > (n - 1) as f64 {
            let e = self.tail_c * (-self.decay_rate * zeta.abs()).exp();
            let sign = zeta.signum();
            let r = self.decay_rate;
            return (sign * (1.0 - e), r * e, -sign * r * r * e);
        }
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let h = self.h;
        let nl = &self.nl;
        // third derivative w''' = -f'(w) w' gives the slope of w''
        let wppp = |j: usize| -nl.df(self.w[j]) * self.wp[j];
        let q = |v: [f64; 6]| quintic_hermite(t, v[0], v[1] * h, v[2] * h * h, v[3], v[4] * h, v[5] * h * h);
        let (d0, d1) = (self.wp[i], self.wp[i + 1]);
        let (c0, c1) = (self.wpp[i], self.wpp[i + 1]);
        let v = q([self.w[i], d0, c0, self.w[i + 1], d1, c1]);
        let wp = q([d0, c0, wppp(i), d1, c1, wppp(i + 1)]);
        (v, wp, -self.nl.f(v))
    }

    /// Index range `[start, start + len)` of the nodes with `|ζ| <= r`.
    pub fn window(&self, r: f64) -> (usize, usize) {
        let tol = 1e-9 * self.h;
        let start = self.zeta.iter().position(|z| *z >= -r - tol).unwrap_or(self.len());
        let end = self
            .zeta
            .iter()
            .rposition(|z| *z <= r + tol)
            .map(|e| e + 1)
            .unwrap_or(0);
        (start, end.saturating_sub(start))
    }

    /// Sup over nodes of `|D²w + f(w)|`, with `D²` a sixth-order difference of the tabulated values.
    pub fn ode_residual(&self) -> f64 {
        let d2 = DiffOp::new(self.len(), self.h, 2, 6).apply(&self.w);
        d2.iter()
            .zip(&self.w)
            .map(|(a, w)| (a + self.nl.f(*w)).abs())
            .fold(0.0, f64::max)
    }

    /// `Ξ = ∫ w'²` by the trapezoid rule.
    pub fn xi(&self) -> f64 {
        let sq: Vec<f64> = self.wp.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.h)
    }

    /// `p = 𝒯[q]` on the window `|ζ| <= r`: the solution of `p'' + f'(w) p + q = 0`
    /// with `p = p' = 0` at `ζ = -r`, written as
    /// `p(ζ) = -w'(ζ) ∫_{-r}^{ζ} w'(s)^{-2} ∫_{-r}^{s} q w' dτ ds`.
    /// `m` is the polynomial degree in the decay hypothesis on `q` used by the envelope check.
    pub fn apply_t(&self, q: &[f64], r: f64, m: u32) -> Result<TOutput, ProfileError> {
        if r > self.extent() + 1e-9 * self.h {
            return Err(ProfileError::WindowTooLarge(r));
        }
        let (start, len) = self.window(r);
        if q.len() != len {
            return Err(ProfileError::LengthMismatch {
                got: q.len(),
                expected: len,
            });
        }
        let wp = &self.wp[start..start + len];
        let edge = wp[0].min(wp[len - 1]);
        if edge * edge < 1e-280 {
            return Err(ProfileError::Underflow(r));
        }
        let qw: Vec<f64> = q.iter().zip(wp).map(|(a, b)| a * b).collect();
        let cells = cell_integrals(&qw, self.h);
        let total: f64 = cells.iter().sum();
        // accumulate from the nearer end to keep the tail free of cancellation
        let zeta = &self.zeta[start..start + len];
        let mut inner = vec![0.0; len];
        let mut acc = 0.0;
        for j in 1..len {
            acc += cells[j - 1];
            inner[j] = acc;
        }
        let mut acc = 0.0;
        for j in (0..len).rev() {
            if zeta[j] <= 0.0 {
                break;
            }
            inner[j] = total - acc;
            if j > 0 {
                acc += cells[j - 1];
            }
        }
        let k: Vec<f64> = inner.iter().zip(wp).map(|(i, w)| i / (w * w)).collect();
        let kc = cell_integrals(&k, self.h);
        let wpp = &self.wpp[start..start + len];
        let mut p = vec![0.0; len];
        let mut dp = vec![0.0; len];
        let mut acc = 0.0;
        for j in 0..len {
            if j > 0 {
                acc += kc[j - 1];
            }
            p[j] = -wp[j] * acc;
            dp[j] = -wpp[j] * acc - inner[j] / wp[j];
        }
        let (c_max, growth) = self.envelope(zeta, &p, r, m);
        Ok(TOutput {
            p,
            dp,
            orthogonality: total,
            envelope_constant: c_max,
            envelope_growth: growth,
            envelope_flagged: growth > 10.0,
        })
    }

    /// `𝒯[q]` with its `w'` component removed, so that `∫ p w' = 0` on the window.
    /// The anchored formula carries a kernel multiple of `w'` that grows like `r²`.
    pub fn apply_t_orthogonal(&self, q: &[f64], r: f64, m: u32) -> Result<TOutput, ProfileError> {
        let mut out = self.apply_t(q, r, m)?;
        let (start, len) = self.window(r);
        let wp = &self.wp[start..start + len];
        let wpp = &self.wpp[start..start + len];
        let pw: Vec<f64> = out.p.iter().zip(wp).map(|(a, b)| a * b).collect();
        let ww: Vec<f64> = wp.iter().map(|b| b * b).collect();
        let c = cell_integrals(&pw, self.h).iter().sum::<f64>() / cell_integrals(&ww, self.h).iter().sum::<f64>();
        for j in 0..len {
            out.p[j] -= c * wp[j];
            out.dp[j] -= c * wpp[j];
        }
        let (c_max, growth) = self.envelope(&self.zeta[start..start + len], &out.p, r, m);
        out.envelope_constant = c_max;
        out.envelope_growth = growth;
        out.envelope_flagged = growth > 10.0;
        Ok(out)
    }

    /// Sup of `|p| e^{a|ζ|} / (1 + |ζ|^{m+1})` overall, and the ratio of its outer to inner half.
    fn envelope(&self, zeta: &[f64], p: &[f64], r: f64, m: u32) -> (f64, f64) {
        let env = |j: usize| {
            let z = zeta[j].abs();
            p[j].abs() * (self.decay_rate * z).exp() / (1.0 + z.powi(m as i32 + 1))
        };
        let (mut c_in, mut c_out) = (0.0f64, 0.0f64);
        for j in 0..p.len() {
            if zeta[j].abs() <= 0.5 * r {
                c_in = c_in.max(env(j));
            } else {
                c_out = c_out.max(env(j));
            }
        }
        let growth = if c_in > 0.0 {
            c_out / c_in
        } else if c_out > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (c_in.max(c_out), growth)
    }

    /// Sup of `|D²p + f'(w) p + q|` on the window of half-width `r`.
    pub fn t_residual(&self, p: &[f64], q: &[f64], r: f64) -> f64 {
        let (start, len) = self.window(r);
        let d2 = DiffOp::new(len, self.h, 2, 6).apply(p);
        (0..len)
            .map(|j| (d2[j] + self.nl.df(self.w[start + j]) * p[j] + q[j]).abs())
            .fold(0.0, f64::max)
    }

    /// `Q(ψ) = ∫ |ψ'|² - f'(w) ψ²` over the whole table.
    pub fn quadratic_form(&self, psi: &[f64]) -> f64 {
        let d = DiffOp::new(self.len(), self.h, 1, 6).apply(psi);
        let dens: Vec<f64> = (0..self.len())
            .map(|j| d[j] * d[j] - self.nl.df(self.w[j]) * psi[j] * psi[j])
            .collect();
        trapezoid(&dens, self.h)
    }

    /// `‖ψ'‖² + ‖ψ‖²`.
    pub fn h1_norm_sq(&self, psi: &[f64]) -> f64 {
        let d = DiffOp::new(self.len(), self.h, 1, 6).apply(psi);
        let dens: Vec<f64> = (0..self.len()).map(|j| d[j] * d[j] + psi[j] * psi[j]).collect();
        trapezoid(&dens, self.h)
    }

    /// Removes the `w'` component of `psi` in the discrete `L²` inner product.
    pub fn project_out_translation(&self, psi: &mut [f64]) {
        let num: Vec<f64> = psi.iter().zip(&self.wp).map(|(a, b)| a * b).collect();
        let coef = trapezoid(&num, self.h) / self.xi();
        for (p, w) in psi.iter_mut().zip(&self.wp) {
            *p -= coef * w;
        }
    }

    /// Random smooth function supported in `|ζ| < support`, built from a few Fourier modes.
    pub fn random_bump<R: Rng>(&self, rng: &mut R, support: f64, modes: usize) -> Vec<f64> {
        let coeffs: Vec<(f64, f64)> = (0..modes)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        self.zeta
            .iter()
            .map(|&z| {
                let x = z / support;
                if x.abs() >= 1.0 {
                    return 0.0;
                }
                let envelope = (1.0 - x * x).powi(4);
                let series: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let arg = std::f64::consts::PI * (k as f64 + 1.0) * x;
                        (a * arg.sin() + b * arg.cos()) / (k as f64 + 1.0)
                    })
                    .sum();
                envelope * series
            })
            .collect()
    }

    /// Empirical coercivity constants `Q(ψ) / (‖ψ'‖² + ‖ψ‖²)` over random `ψ ⟂ w'`.
    pub fn coercivity_trials<R: Rng>(&self, rng: &mut R, trials: usize) -> Vec<f64> {
        let support = 0.8 * self.extent();
        (0..trials)
            .map(|_| {
                let mut psi = self.random_bump(rng, support, 12);
                self.project_out_translation(&mut psi);
                self.quadratic_form(&psi) / self.h1_norm_sq(&psi)
            })
            .collect()
    }
}

/// Quintic Hermite interpolant on [0, 1] from end values, slopes and second derivatives.
fn quintic_hermite(t: f64, p0: f64, m0: f64, a0: f64, p1: f64, m1: f64, a1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 0.5 * t3 - t4 + 0.5 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    h0 * p0 + h1 * m0 + h2 * a0 + h3 * a1 + h4 * m1 + h5 * p1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ac() -> HeteroclinicProfile {
        HeteroclinicProfile::build(Nonlinearity::AllenCahn, 12.0, 4096).unwrap()
    }

    #[test]
    fn matches_closed_form() {
        let p = ac();
        let err = p
            .zeta
            .iter()
            .zip(&p.w)
            .map(|(z, w)| (w - (z / 2f64.sqrt()).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let (w1, _, _) = p.eval(1.0);
        assert!((w1 - (1.0 / 2f64.sqrt()).tanh()).abs() < 1e-12);
        let (w10, _, _) = p.eval(10.0);
        assert!((w10 - 1.0).abs() <= 2.0 * (-2f64.sqrt() * 10.0).exp());
    }

    #[test]
    fn tail_rule_continues_the_table() {
        let p = ac();
        for &z in &[12.5, 15.0, -13.0] {
            let (w, wp, _) = p.eval(z);
            let exact = (z / 2f64.sqrt()).tanh();
            assert!((w - exact).abs() < 1e-12 * (1.0 + (2f64.sqrt() * z.abs()).exp().recip() * 1e12));
            assert!(wp > 0.0);
        }
    }

    #[test]
    fn eval_interpolates_between_nodes() {
        let p = ac();
        for i in 0..50 {
            let z = -11.0 + 0.4371 * i as f64;
            let (w, wp, _) = p.eval(z);
            let c = (z / 2f64.sqrt()).cosh();
            assert!((w - (z / 2f64.sqrt()).tanh()).abs() < 1e-11);
            assert!((wp - 1.0 / (2f64.sqrt() * c * c)).abs() < 1e-10);
        }
    }

    #[test]
    fn xi_closed_form() {
        assert!((ac().xi() - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-8);
    }

    #[test]
    fn ode_residual_small() {
        assert!(ac().ode_residual() < 1e-8);
    }

    #[test]
    fn scaled_well_decays_faster() {
        let p = HeteroclinicProfile::build(Nonlinearity::ScaledAllenCahn { lambda: 4.0 }, 12.0, 2048).unwrap();
        // λ = 4 rescales ζ by 2
        let err = p
            .zeta
            .iter()
            .zip(&p.w)
            .map(|(z, w)| (w - (2.0 * z / 2f64.sqrt()).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn degenerate_well_is_rejected() {
        assert!(matches!(
            HeteroclinicProfile::build(Nonlinearity::Degenerate, 12.0, 1024),
            Err(ProfileError::BadWell(_))
        ));
    }

    #[test]
    fn t_inverts_linearized_operator() {
        let p = ac();
        let (s, len) = p.window(10.0);
        let q: Vec<f64> = (s..s + len).map(|j| p.zeta[j] * p.wp[j]).collect();
        let out = p.apply_t(&q, 10.0, 1).unwrap();
        let res = p.t_residual(&out.p, &q, 10.0);
        assert!(res < 1e-6, "{res} {}", out.orthogonality);
        assert!(out.orthogonality.abs() < 1e-14);
        assert!(!out.envelope_flagged);
        let d1 = DiffOp::new(len, p.h, 1, 6).apply(&out.p);
        let slope = d1.iter().zip(&out.dp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(slope < 1e-6, "{slope}");
        let orth = p.apply_t_orthogonal(&q, 10.0, 1).unwrap();
        assert!(p.t_residual(&orth.p, &q, 10.0) < 1e-6);
        let mid = len / 2;
        assert!(out.p[mid].abs() > 10.0 * orth.p[mid].abs());
        let odd = (0..len)
            .map(|j| (orth.p[j] + orth.p[len - 1 - j]).abs())
            .fold(0.0, f64::max);
        assert!(odd < 1e-9, "{odd}");
        let zero = p.apply_t(&vec![0.0; len], 10.0, 0).unwrap();
        assert!(zero.p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn t_flags_non_orthogonal_source() {
        let p = ac();
        let (s, len) = p.window(10.0);
        let q: Vec<f64> = p.wp[s..s + len].to_vec();
        let out = p.apply_t(&q, 10.0, 0).unwrap();
        assert!((out.orthogonality - p.xi()).abs() < 1e-6);
        assert!(out.envelope_flagged);
    }

    #[test]
    fn quadratic_form_identities() {
        let p = ac();
        assert!(p.quadratic_form(&p.wp).abs() < 1e-8);
        let rho: Vec<f64> = p.zeta.iter().map(|z| z.sin() * (-z * z).exp()).collect();
        let rho_p: Vec<f64> = p
            .zeta
            .iter()
            .map(|z| (z.cos() - 2.0 * z * z.sin()) * (-z * z).exp())
            .collect();
        let psi: Vec<f64> = rho.iter().zip(&p.wp).map(|(a, b)| a * b).collect();
        let rhs: Vec<f64> = rho_p.iter().zip(&p.wp).map(|(a, b)| a * a * b * b).collect();
        let rhs = trapezoid(&rhs, p.h);
        assert!((p.quadratic_form(&psi) - rhs).abs() < 1e-6 * rhs);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(p.coercivity_trials(&mut rng, 10).iter().all(|c| *c > 0.0));
    }
}
