//! Small numerical kernels shared by the modules: Gauss-Legendre rules,
//! closed-form power-law shell integrals, smooth cutoffs and a log-log fit.

use std::sync::OnceLock;

/// `x^e`, taking the `powi` path when the exponent is a small integer.
///
/// The Saint-Venant case has integer exponents everywhere and the solver
/// evaluates these powers several times per cell per stage.
#[inline]
pub fn pw(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Eight-point Gauss-Legendre integral of `f` over `[lo, hi]`.
pub fn gl_integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (nodes, weights) = gl8();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    nodes
        .iter()
        .zip(weights)
        .map(|(z, w)| w * f(mid + half * z))
        .sum::<f64>()
        * half
}

/// Composite Gauss-Legendre integral with panels refined geometrically
/// toward `hi`, where integrands of the form `(hi - r)^p` lose smoothness.
pub fn integrate_graded(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    const UNIFORM: usize = 32;
    const LEVELS: usize = 40;
    let len = hi - lo;
    let split = hi - len / UNIFORM as f64;
    let mut total = 0.0;
    let h = (split - lo) / (UNIFORM - 1) as f64;
    for k in 0..UNIFORM - 1 {
        let a = lo + k as f64 * h;
        total += gl_integrate(&f, a, a + h);
    }
    let mut left = split;
    let mut width = hi - split;
    for _ in 0..LEVELS {
        width *= 0.5;
        let right = hi - width;
        total += gl_integrate(&f, left, right);
        left = right;
    }
    total + gl_integrate(&f, left, hi)
}

/// `∫_{s_lo}^{s_hi} s^p (a - s)^n ds` in closed form via the binomial
/// expansion of `(a - s)^n`. Requires `p + k + 1 != 0` for `k = 0..=n`
/// whenever `s_lo == 0`.
pub fn power_shell_integral(a: f64, p: f64, n: u32, s_lo: f64, s_hi: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=n {
        let e = p + k as f64 + 1.0;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let coef = binom * sign * a.powi((n - k) as i32);
        let anti = |s: f64| if s == 0.0 { 0.0 } else { s.powf(e) / e };
        total += coef * (anti(s_hi) - anti(s_lo));
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    total
}

/// Quintic smoothstep: 0 for `t <= 0`, 1 for `t >= 1`, C² in between.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Observed convergence order from `(h, error)` pairs: the least-squares
/// slope of `ln error` against `ln h`.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> f64 {
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.abs().max(f64::MIN_POSITIVE).ln()).collect();
    ls_slope(&lx, &ly)
}

/// Trapezoid rule over a (possibly non-uniform) sample sequence.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}
