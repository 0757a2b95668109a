//! Special functions and quadrature rules.

use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};
use std::collections::HashMap;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Exponentially scaled modified Bessel function `e^{-x} I_0(x)` for `x >= 0`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        // Σ (x²/4)^k / (k!)², summed with the exponential folded in at the end
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // e^{-x} I_0(x) ~ (2πx)^{-1/2} Σ ((2k-1)!!)² / (k! 8^k x^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let a = (2 * k - 1) as f64;
            term *= a * a / (8.0 * k as f64 * x);
            sum += term;
            if term.abs() < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("quadrature cache").get(&n) {
        return hit.clone();
    }
    let rule = compute_gauss_legendre(n);
    cache
        .lock()
        .expect("quadrature cache")
        .insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b f` with an `n`-point Gauss–Legendre rule on each of `panels` equal panels.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Composite Gauss–Legendre over consecutive breakpoints.
pub fn integrate_breaks(f: impl Fn(f64) -> f64, breaks: &[f64], n: usize) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate_gl(&f, w[0], w[1], n, 1))
        .sum()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) on `[a, b]` to absolute tolerance `abs_tol`
/// or relative tolerance `rel_tol`, whichever is looser.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    pieces.push((a, b, v, e));
    for _ in 0..2000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    pieces.iter().map(|p| p.2).sum()
}

/// Nodes and weights for `∫₀ᵗ f(τ) (t−τ)^{−1/2} dτ` via `τ = t sin²θ`, which turns
/// the integral into `2√t ∫₀^{π/2} f(t sin²θ) sin θ dθ` with a smooth integrand.
pub fn singular_time_nodes(t: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.25 * PI;
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let theta = half * (1.0 + xi);
            let s = theta.sin();
            (t * s * s, 2.0 * t.sqrt() * s * half * wi)
        })
        .collect()
}

/// `∫₀ᵗ f(τ) (t−τ)^{−1/2} dτ` with an `n`-point rule after the sine substitution.
pub fn singular_time_integral(f: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
    singular_time_nodes(t, n).into_iter().map(|(tau, w)| w * f(tau)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn singular_rule_handles_both_endpoints() {
        // ∫₀ᵗ (t−τ)^{−1/2} dτ = 2√t and ∫₀ᵗ √τ (t−τ)^{−1/2} dτ = πt/2
        let t = 3e-3;
        assert_relative_eq!(singular_time_integral(|_| 1.0, t, 16), 2.0 * t.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(singular_time_integral(|s| s.sqrt(), t, 16), PI * t / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(s, 2.0 / 19.0, max_relative = 1e-13);
        let (x, w) = gauss_legendre(64);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn i0e_matches_both_branches() {
        // I0(1) = 1.2660658777520082
        assert_relative_eq!(i0e(1.0), 1.266_065_877_752_008_2 * (-1.0f64).exp(), max_relative = 1e-14);
        let below = i0e(30.0);
        let above = i0e(30.000_000_1);
        assert_relative_eq!(below, above, max_relative = 1e-8);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate_adaptive(|x| (-x * x / 1e-4).exp(), -1.0, 1.0, 1e-14, 1e-12);
        assert_relative_eq!(v, (PI * 1e-4).sqrt(), max_relative = 1e-10);
    }
}
