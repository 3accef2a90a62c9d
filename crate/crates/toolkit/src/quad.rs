//! Quadrature engine shared by the potential and radial-solver modules.
//!
//! Improper integrals over (0, inf) are handled by the substitution t = e^s:
//! Gauss-Legendre panels in s, split at the measure's knot radii, marching
//! toward -inf with unit panels and toward +inf with dyadically growing
//! panels until the relative panel contribution drops below the tolerance.

/// Relative tolerance for panel truncation (see the module-level scheme).
pub const PANEL_RTOL: f64 = 1e-10;

/// Panels are cut so no single Gauss-Legendre rule spans more than this in s.
const MAX_PANEL_WIDTH: f64 = 0.5;

/// ln of the smallest radius worth visiting before underflow.
const S_FLOOR: f64 = -690.0;

const GL_N: usize = 16;

/// 16-point Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
fn gl16() -> &'static ([f64; GL_N], [f64; GL_N]) {
    use std::sync::OnceLock;
    static RULE: OnceLock<([f64; GL_N], [f64; GL_N])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_N;
        let mut nodes = [0.0; GL_N];
        let mut weights = [0.0; GL_N];
        for i in 0..n {
            // Chebyshev initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_{n-1}(x).
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// The raw 16-point rule on [-1, 1], for callers that build their own nodes.
pub fn gl_rule() -> (&'static [f64; 16], &'static [f64; 16]) {
    let (n, w) = gl16();
    (n, w)
}

/// Gauss-Legendre integral of `g` over [a, b].
pub fn gauss_panel(g: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl16();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..GL_N {
        acc += weights[i] * g(mid + half * nodes[i]);
    }
    acc * half
}

/// Integral of `g(s)` over [lo, hi], with the panel decomposition split at the
/// given breakpoints (sorted or not; values outside [lo, hi] are ignored) and
/// capped at `MAX_PANEL_WIDTH`. The decomposition is a deterministic function
/// of (lo, hi, breaks), so monotonicity of `g` in a parameter carries over to
/// the computed value exactly.
pub fn integrate_core(g: &impl Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&s| s > lo && s < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        for j in 0..pieces {
            acc += gauss_panel(g, a + j as f64 * step, a + (j + 1) as f64 * step);
        }
    }
    acc
}

/// Integral of `g(s)` over (-inf, hi]: unit panels marching left until two
/// consecutive panels contribute below `PANEL_RTOL` relative to the total.
pub fn integrate_left_tail(g: &impl Fn(f64) -> f64, hi: f64) -> f64 {
    let mut total = 0.0;
    let mut small_streak = 0;
    let mut b = hi;
    while b > S_FLOOR {
        let a = b - 1.0;
        let panel = gauss_panel(g, a, b);
        total += panel;
        if panel.abs() <= PANEL_RTOL * total.abs().max(f64::MIN_POSITIVE) {
            small_streak += 1;
            if small_streak >= 2 {
                break;
            }
        } else {
            small_streak = 0;
        }
        b = a;
    }
    total
}

/// Integral of `g(s)` over [lo, +inf): dyadically growing panels marching
/// right. The caller must have established convergence analytically.
pub fn integrate_right_tail(g: &impl Fn(f64) -> f64, lo: f64) -> f64 {
    let mut total = 0.0;
    let mut a = lo;
    let mut width = 1.0;
    // Widths 1, 1, 2, 4, ... reach s ~ 1e12 within ~45 panels.
    for _ in 0..64 {
        let b = a + width;
        // Sub-split wide panels so the rule stays accurate.
        let pieces = if width > 8.0 { 4 } else { 1 };
        let step = width / pieces as f64;
        let mut panel = 0.0;
        for j in 0..pieces {
            panel += gauss_panel(g, a + j as f64 * step, a + (j + 1) as f64 * step);
        }
        total += panel;
        if panel.abs() <= PANEL_RTOL * total.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        a = b;
        width *= 2.0;
    }
    total
}

/// Full improper integral of `g(s)` over the real line, split at `s_lo`/`s_hi`
/// with knot breakpoints inside the core.
pub fn integrate_full(g: &impl Fn(f64) -> f64, s_lo: f64, s_hi: f64, breaks: &[f64]) -> f64 {
    integrate_left_tail(g, s_lo) + integrate_core(g, s_lo, s_hi, breaks) + integrate_right_tail(g, s_hi)
}

/// Surface area of the unit (n-1)-sphere in R^n: 2 pi^{n/2} / Gamma(n/2).
pub fn sphere_surface(n: u32) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half(n)
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: u32) -> f64 {
    sphere_surface(n) / n as f64
}

/// Gamma(n/2) for integer n >= 1, by the half-integer closed forms.
fn gamma_half(n: u32) -> f64 {
    if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Gamma(k + 1/2) = (2k)! / (4^k k!) sqrt(pi)
        let k = (n - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..k {
            v *= i as f64 + 0.5;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        // GL16 integrates degree-31 polynomials exactly.
        let val = gauss_panel(&|x: f64| x.powi(21) + 3.0 * x * x, 0.0, 1.0);
        assert!((val - (1.0 / 22.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn improper_integral_of_exponential_kernels() {
        // int over s of e^{s} ds on (-inf, 0] = 1.
        // Truncation stops at PANEL_RTOL relative, so expect ~1e-10 accuracy.
        let left = integrate_left_tail(&|s: f64| s.exp(), 0.0);
        assert!((left - 1.0).abs() < 1e-9);
        // int over s of e^{-s} ds on [0, inf) = 1.
        let right = integrate_right_tail(&|s: f64| (-s).exp(), 0.0);
        assert!((right - 1.0).abs() < 1e-12);
        // Slow log-power decay: int_1^inf s^{-2} ds = 1 in s-space.
        let slow = integrate_right_tail(&|s: f64| s.powi(-2), 1.0);
        assert!((slow - 1.0).abs() < 1e-9, "got {slow}");
    }

    #[test]
    fn sphere_constants() {
        assert!((sphere_surface(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_surface(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_surface(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
        assert!((ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
    }
}
