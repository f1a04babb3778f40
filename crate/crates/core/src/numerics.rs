//! Small numerical kernels shared by every module: finite-difference
//! stencils on uniform grids, quadrature, interpolation and fits.

/// Fornberg's algorithm: weights of the `m`-th derivative at `x0` using `nodes`.
pub fn fd_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative operator on a uniform, non-periodic grid. Interior nodes use
/// centered stencils; nodes near the ends use shifted stencils of the same width.
#[derive(Clone, Debug)]
pub struct DiffOp {
    n: usize,
    width: usize,
    starts: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl DiffOp {
    /// `deriv`-th derivative with formal accuracy `order` (even) on `n` nodes of spacing `h`.
    pub fn new(n: usize, h: f64, deriv: usize, order: usize) -> Self {
        let width = if deriv == 0 {
            1
        } else {
            2 * ((deriv + order - 1) / 2) + 1
        };
        let width = width.min(n);
        // one-sided stencils need deriv + order nodes for the same accuracy
        let edge_width = (deriv + order).max(width).min(n);
        let half = width / 2;
        let mut starts = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let (start, w) = if i >= half && i + half < n {
                (i - half, width)
            } else if i < half {
                (0, edge_width)
            } else {
                (n - edge_width, edge_width)
            };
            let nodes: Vec<f64> = (start..start + w).map(|j| (j as f64 - i as f64) * h).collect();
            starts.push(start);
            weights.push(fd_weights(0.0, &nodes, deriv));
        }
        DiffOp {
            n,
            width,
            starts,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn stencil_width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn at(&self, values: &[f64], i: usize) -> f64 {
        self.at_strided(values, i, 0, 1)
    }

    /// Derivative at logical index `i` of data stored at `offset + j * stride`.
    #[inline]
    pub fn at_strided(&self, values: &[f64], i: usize, offset: usize, stride: usize) -> f64 {
        let s = self.starts[i];
        self.weights[i]
            .iter()
            .enumerate()
            .map(|(k, w)| w * values[offset + (s + k) * stride])
            .sum()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n);
        (0..self.n).map(|i| self.at(values, i)).collect()
    }

    /// Stencil (start index, weights) used at node `i`.
    pub fn stencil(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.weights[i])
    }
}

/// Centered periodic finite differences.
#[derive(Clone, Debug)]
pub struct PeriodicDiff {
    n: usize,
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

impl PeriodicDiff {
    pub fn new(n: usize, h: f64, deriv: usize, order: usize) -> Self {
        let half = ((order + deriv - 1) / 2) as isize;
        let offsets: Vec<isize> = (-half..=half).collect();
        let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64 * h).collect();
        let weights = fd_weights(0.0, &nodes, deriv);
        PeriodicDiff { n, offsets, weights }
    }

    #[inline]
    pub fn at_strided(&self, values: &[f64], i: usize, offset: usize, stride: usize) -> f64 {
        let n = self.n as isize;
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&o, w)| {
                let j = ((i as isize + o) % n + n) % n;
                w * values[offset + j as usize * stride]
            })
            .sum()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.at_strided(values, i, 0, 1)).collect()
    }
}

/// Fourier differentiation of periodic samples (`order` = 1 or 2).
pub fn spectral_derivative(values: &[f64], period: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let nf = n as f64;
    let kmax = n / 2;
    let mut out = vec![0.0; n];
    for k in 0..=kmax {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / nf;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        if k == 0 || (n.is_multiple_of(2) && k == kmax && order % 2 == 1) {
            continue;
        }
        let omega = 2.0 * std::f64::consts::PI * k as f64 / period;
        // multiply by (i omega)^order
        let (fr, fi) = match order % 4 {
            1 => (0.0, omega),
            2 => (-omega * omega, 0.0),
            3 => (0.0, -omega.powi(3)),
            _ => (omega.powi(4), 0.0),
        };
        let dr = re * fr - im * fi;
        let di = re * fi + im * fr;
        let weight = if n.is_multiple_of(2) && k == kmax { 1.0 } else { 2.0 };
        for (j, o) in out.iter_mut().enumerate() {
            let ang = 2.0 * std::f64::consts::PI * (k * j) as f64 / nf;
            *o += weight * (dr * ang.cos() - di * ang.sin()) / nf;
        }
    }
    out
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Per-cell integrals of the local degree-5 interpolant, so that
/// `sum(cells[..j])` approximates the integral from node 0 to node j with sixth-order accuracy.
pub fn cell_integrals(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let width = 6.min(n);
    let (gx, gw) = gauss_legendre(4);
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; width];
    let mut out = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let mut start = j as isize - (width as isize / 2 - 1);
        start = start.clamp(0, (n - width) as isize);
        let start = start as usize;
        let shift = j - start;
        let w = cache[shift].get_or_insert_with(|| {
            let nodes: Vec<f64> = (0..width).map(|k| k as f64 - shift as f64).collect();
            (0..width)
                .map(|k| {
                    gx.iter()
                        .zip(&gw)
                        .map(|(&x, &wt)| {
                            let s = 0.5 * (x + 1.0);
                            0.5 * wt * lagrange_basis(&nodes, k, s)
                        })
                        .sum::<f64>()
                })
                .collect()
        });
        out.push(h * w.iter().enumerate().map(|(k, wk)| wk * values[start + k]).sum::<f64>());
    }
    out
}

fn lagrange_basis(nodes: &[f64], k: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, &xi)| (x - xi) / (nodes[k] - xi))
        .product()
}

/// Running integral from the first node, sixth-order accurate.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let cells = cell_integrals(values, h);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for c in cells {
        acc += c;
        out.push(acc);
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Quintic smoothstep on [0, 1]; C² with vanishing first and second derivatives at the ends.
pub fn smoothstep5(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

pub fn smoothstep5_deriv(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

pub fn smoothstep5_deriv2(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
}

/// `∫₀ˣ smoothstep5`, with `x` clamped to [0, 1] (so the value at 1 is 1/2).
pub fn smoothstep5_integral(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t.powi(4) * (t * (t - 3.0) + 2.5)
}

/// Smooth cutoff: 1 on [0, 1], 0 on [2, ∞), quintic transition in between.
pub fn cutoff(s: f64) -> f64 {
    1.0 - smoothstep5(s.abs() - 1.0)
}

pub fn cutoff_deriv(s: f64) -> f64 {
    -smoothstep5_deriv(s.abs() - 1.0) * s.signum()
}

pub fn cutoff_deriv2(s: f64) -> f64 {
    -smoothstep5_deriv2(s.abs() - 1.0)
}

/// Least-squares line through (x, y); returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Cubic Hermite interpolation on a uniform grid with node values and derivatives.
/// Evaluates at `x` (extrapolating from the end intervals); returns (value, derivative).
pub fn hermite_eval(x0: f64, h: f64, values: &[f64], derivs: &[f64], x: f64) -> (f64, f64) {
    let n = values.len();
    if n == 1 {
        return (values[0] + derivs[0] * (x - x0), derivs[0]);
    }
    let s = (x - x0) / h;
    let i = (s.floor() as isize).clamp(0, n as isize - 2) as usize;
    let t = s - i as f64;
    let (p0, p1) = (values[i], values[i + 1]);
    let (m0, m1) = (derivs[i] * h, derivs[i + 1] * h);
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
    let d = (6.0 * t2 - 6.0 * t) * p0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * p1
        + (3.0 * t2 - 2.0 * t) * m1;
    (v, d / h)
}

/// Linear interpolation on a uniform grid, clamped to the ends.
pub fn lerp_uniform(x0: f64, h: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let t = s - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// Safeguarded bracketed root finder: bisection interleaved with secant steps.
pub fn bracketed_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for it in 0..max_iter {
        let mut x = if it % 3 == 2 {
            0.5 * (a + b)
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() <= tol {
            return Some(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (b - a).abs() < 1e-300 {
            return Some(x);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_recovers_classic_stencils() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14);
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        assert!((w[0] - 1.0 / 12.0).abs() < 1e-14 && (w[1] + 8.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn diffop_orders() {
        for &(deriv, order) in &[(1usize, 4usize), (2, 4), (1, 6), (2, 6), (2, 8)] {
            let mut errs = Vec::new();
            for &n in &[21usize, 41] {
                let h = 2.0 / (n - 1) as f64;
                let x: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * h).collect();
                let f: Vec<f64> = x.iter().map(|v| (2.6 * v).sin()).collect();
                let d = DiffOp::new(n, h, deriv, order).apply(&f);
                let exact = |v: f64| {
                    if deriv == 1 {
                        2.6 * (2.6 * v).cos()
                    } else {
                        -6.76 * (2.6 * v).sin()
                    }
                };
                errs.push(
                    x.iter()
                        .zip(&d)
                        .map(|(v, dv)| (dv - exact(*v)).abs())
                        .fold(0.0, f64::max),
                );
            }
            let rate = (errs[0] / errs[1]).log2();
            assert!(rate > order as f64 - 1.0, "deriv {deriv} order {order}: rate {rate}");
        }
    }

    #[test]
    fn cumulative_integral_is_high_order() {
        let n = 101;
        let h = 3.0 / (n - 1) as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
        let c = cumulative_integral(&f, h);
        for (i, ci) in c.iter().enumerate() {
            let exact = (i as f64 * h).exp() - 1.0;
            assert!((ci - exact).abs() < 1e-9 * exact.max(1.0));
        }
    }

    #[test]
    fn spectral_derivative_exact_for_trig() {
        let n = 8;
        let p = 2.0 * std::f64::consts::PI;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * p / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|v| v.cos() + 0.5 * (2.0 * v).sin()).collect();
        let d1 = spectral_derivative(&f, p, 1);
        let d2 = spectral_derivative(&f, p, 2);
        for i in 0..n {
            assert!((d1[i] - (-x[i].sin() + (2.0 * x[i]).cos())).abs() < 1e-13);
            assert!((d2[i] - (-x[i].cos() - 2.0 * (2.0 * x[i]).sin())).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn root_finder_converges() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
