//! Nonlinear potentials of measures: the Wolff potential W_{1,p}, the Riesz
//! potential I_1, the finiteness classifier for entire solvability, and the
//! intrinsic potential K_{p,q} built from lower bounds on the localized
//! embedding constant kappa(B).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, ToolkitError};
use crate::measure::{GridMeasure, Measure, RadialMeasure, Tail};
use crate::quad;

/// A potential value; divergence is an explicit marker, never an overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PotentialValue {
    Finite(f64),
    Infinite,
}

impl PotentialValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PotentialValue::Finite(v) => Some(v),
            PotentialValue::Infinite => None,
        }
    }

    pub fn unwrap_finite(self) -> f64 {
        self.finite().expect("potential diverges")
    }
}

/// A nonnegative radial function on a log-spaced mesh with a power tail.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    /// value(r) ~ value(r_M) (r/r_M)^{tail_exponent} beyond the mesh.
    pub tail_exponent: f64,
    pub dim: u32,
    pub label: String,
    /// Off-center ball masses in dimensions other than 2 and 3 use sandwich
    /// midpoint bounds; profiles built that way carry this flag.
    pub approximate: bool,
}

impl RadialProfile {
    pub fn new(
        radii: Vec<f64>,
        values: Vec<f64>,
        tail_exponent: f64,
        dim: u32,
        label: impl Into<String>,
    ) -> Result<Self> {
        if radii.len() != values.len() || radii.is_empty() {
            return Err(ToolkitError::Invariant(
                "profile mesh and values must be nonempty and equal length".into(),
            ));
        }
        if !radii.windows(2).all(|w| w[0] < w[1]) || radii[0] <= 0.0 {
            return Err(ToolkitError::Invariant(
                "profile mesh must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(ToolkitError::Invariant(
                "profile values must be finite and nonnegative".into(),
            ));
        }
        Ok(RadialProfile {
            radii,
            values,
            tail_exponent,
            dim,
            label: label.into(),
            approximate: false,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Interpolated evaluation: log-log inside the mesh, flat below it, power
    /// tail beyond it.
    pub fn value_at(&self, r: f64) -> f64 {
        let m = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r >= self.radii[m - 1] {
            let v = self.values[m - 1];
            if v == 0.0 {
                return 0.0;
            }
            return v * (r / self.radii[m - 1]).powf(self.tail_exponent);
        }
        let i = match self
            .radii
            .binary_search_by(|rr| rr.partial_cmp(&r).unwrap())
        {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            let g = (v1 / v0).ln() / (r1 / r0).ln();
            v0 * (r / r0).powf(g)
        } else {
            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        }
    }

    /// Pointwise power map: c * value^e, keeping the mesh.
    pub fn map_power(&self, c: f64, e: f64, label: impl Into<String>) -> Result<RadialProfile> {
        let values = self.values.iter().map(|v| c * v.powf(e)).collect();
        let mut p = RadialProfile::new(
            self.radii.clone(),
            values,
            self.tail_exponent * e,
            self.dim,
            label,
        )?;
        p.approximate = self.approximate;
        Ok(p)
    }
}

/// Log-spaced mesh helper: `count` radii from `lo` to `hi` inclusive.
pub fn log_mesh(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Outcome of the entire-solvability test for a radial measure.
#[derive(Debug, Clone, Serialize)]
pub struct FinitenessReport {
    pub verdict: Verdict,
    pub tail_integral: PotentialValue,
    /// Contribution of [1, r_last] vs the analytic tail.
    pub core_part: f64,
    pub tail_part: PotentialValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Finite,
    Infinite,
}

/// Exponent pair of a potential integral int ( M(t) / t^e )^{1/m} dt/t.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    e: f64,
    m: f64,
}

impl Kernel {
    fn wolff(p: f64, n: u32) -> Kernel {
        Kernel { e: n as f64 - p, m: p - 1.0 }
    }

    fn riesz(n: u32) -> Kernel {
        Kernel { e: n as f64 - 1.0, m: 1.0 }
    }

    /// Does the integral converge at infinity for the given mass tail?
    fn tail_converges(&self, tail: Tail) -> bool {
        if tail.a == 0.0 {
            return true;
        }
        if tail.b > self.e {
            return false;
        }
        if tail.b == self.e && tail.c <= self.m {
            return false;
        }
        true
    }
}

fn check_p_range(p: f64, n: u32) -> Result<()> {
    if !(p > 1.0 && p < n as f64) {
        return Err(ToolkitError::Domain(format!(
            "exponent p must lie in (1, n) = (1, {n}), got {p}"
        )));
    }
    Ok(())
}

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// sigma(B(x, t)) for a radial measure, |x| = d.
///
/// Exact spherical-cap intersection in dimensions 2 and 3; sandwich-bound
/// midpoint (M(t-d) + M(t+d)) / 2 otherwise.
pub fn mass_off_center(m: &RadialMeasure, d: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if d == 0.0 {
        return m.mass(t);
    }
    let n = m.dim();
    let base = if t > d { m.mass(t - d) } else { 0.0 };
    let lo = (t - d).abs();
    let hi = t + d;
    if n != 2 && n != 3 {
        return 0.5 * (base + m.mass(hi));
    }
    // Fraction of the sphere of radius r (centered at 0) inside B(x, t).
    let frac = move |r: f64| -> f64 {
        let cos = ((d * d + r * r - t * t) / (2.0 * d * r)).clamp(-1.0, 1.0);
        if n == 3 {
            0.5 * (1.0 - cos)
        } else {
            cos.acos() / std::f64::consts::PI
        }
    };
    let lo_eff = lo.max(hi * 1e-14);
    let g = |s: f64| {
        let r = s.exp();
        frac(r) * m.radial_density(r) * r
    };
    let breaks: Vec<f64> = m
        .breakpoints()
        .filter(|&r| r > lo_eff && r < hi)
        .map(|r| r.ln())
        .collect();
    let shell = quad::integrate_core(&g, lo_eff.ln(), hi.ln(), &breaks);
    base + shell.max(0.0)
}

/// Potential integral for a radial measure evaluated at distance d from the
/// origin. Assumes convergence at infinity was already established.
fn potential_radial(m: &RadialMeasure, k: Kernel, d: f64) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    let g = |s: f64| {
        let t = s.exp();
        let mass = mass_off_center(m, d, t);
        if mass <= 0.0 {
            0.0
        } else {
            (mass * t.powf(-k.e)).powf(1.0 / k.m)
        }
    };
    let r_last = m.r_last();
    let onset = if d > r_last { d - r_last } else { 0.0 };
    let s_hi = (d + r_last).max(r_last).ln() + 1.0;
    let s_lo = if onset > 0.0 {
        onset.ln()
    } else {
        let r_first = m.knots()[0].0;
        r_first.min(r_last).ln() - 2.0
    };
    let mut breaks: Vec<f64> = Vec::new();
    for r in m.breakpoints() {
        if d > 0.0 {
            let a = (d - r).abs();
            if a > 0.0 {
                breaks.push(a.ln());
            }
            breaks.push((d + r).ln());
        } else {
            breaks.push(r.ln());
        }
    }
    quad::integrate_full(&g, s_lo, s_hi.max(s_lo + 1.0), &breaks)
}

/// Potential integral for a grid measure at point x: the cumulative mass in
/// B(x, t) is a step function of t, integrated in closed form per step, with
/// a density-scaling near field below half a cell width.
fn potential_grid(gm: &GridMeasure, k: Kernel, x: [f64; 3]) -> f64 {
    let n = gm.dim();
    let h = gm.spacing();
    let vol = gm.cell_volume();
    let half = 0.5 * h;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let mut near_density = 0.0;
    for (idx, &dens) in gm.density().iter().enumerate() {
        if dens == 0.0 {
            continue;
        }
        let c = gm.center(idx);
        let dist = norm3([c[0] - x[0], c[1] - x[1], c[2] - x[2]]);
        if dist < half {
            near_density += dens;
            continue;
        }
        steps.push((dist, dens * vol));
    }
    steps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let beta = k.e / k.m;
    let mut total = 0.0;
    // Near field: mass grows like dens * v_n * t^n below half a spacing.
    if near_density > 0.0 {
        let vn = quad::ball_volume(n);
        let expo = (n as f64 - k.e) / k.m;
        total += (near_density * vn).powf(1.0 / k.m) * half.powf(expo) / expo;
        // The near mass then rides along as a constant from t = h/2 on.
        steps.insert(0, (half, near_density * vol));
    }
    let mut cum = 0.0;
    for i in 0..steps.len() {
        let t0 = steps[i].0;
        cum += steps[i].1;
        let t1 = if i + 1 < steps.len() { steps[i + 1].0 } else { f64::INFINITY };
        let upper = if t1.is_finite() { t1.powf(-beta) } else { 0.0 };
        total += cum.powf(1.0 / k.m) * (t0.powf(-beta) - upper) / beta;
    }
    total
}

/// The Wolff potential W_{1,p} sigma (x).
pub fn wolff_potential(m: &Measure, p: f64, n: u32, x: [f64; 3]) -> Result<PotentialValue> {
    check_p_range(p, n)?;
    if m.dim() != n {
        return Err(ToolkitError::Domain("dimension mismatch".into()));
    }
    let k = Kernel::wolff(p, n);
    match m {
        Measure::Radial(rm) => {
            if !k.tail_converges(rm.tail()) {
                return Ok(PotentialValue::Infinite);
            }
            Ok(PotentialValue::Finite(potential_radial(rm, k, norm3(x))))
        }
        Measure::Grid(gm) => Ok(PotentialValue::Finite(potential_grid(gm, k, x))),
    }
}

/// The Riesz potential I_1 sigma (x) = int sigma(B(x,t)) t^{1-n} dt/t.
pub fn riesz_i1(m: &Measure, n: u32, x: [f64; 3]) -> Result<PotentialValue> {
    if n < 2 || m.dim() != n {
        return Err(ToolkitError::Domain("riesz_i1 requires n >= 2 matching the measure".into()));
    }
    let k = Kernel::riesz(n);
    match m {
        Measure::Radial(rm) => {
            if !k.tail_converges(rm.tail()) {
                return Ok(PotentialValue::Infinite);
            }
            Ok(PotentialValue::Finite(potential_radial(rm, k, norm3(x))))
        }
        Measure::Grid(gm) => Ok(PotentialValue::Finite(potential_grid(gm, k, x))),
    }
}

/// W_{1,p} sigma at radius r from the origin, for radial sigma.
pub fn wolff_at_radius(m: &RadialMeasure, p: f64, n: u32, r: f64) -> Result<f64> {
    check_p_range(p, n)?;
    let k = Kernel::wolff(p, n);
    if !k.tail_converges(m.tail()) {
        return Err(ToolkitError::Infinite(
            "Wolff potential diverges; see check_finiteness".into(),
        ));
    }
    Ok(potential_radial(m, k, r))
}

/// Wolff potential on a radial mesh.
pub fn wolff_radial_profile(
    m: &RadialMeasure,
    p: f64,
    n: u32,
    mesh: &[f64],
) -> Result<RadialProfile> {
    check_p_range(p, n)?;
    let k = Kernel::wolff(p, n);
    if !k.tail_converges(m.tail()) {
        return Err(ToolkitError::Infinite(
            "Wolff potential diverges; see check_finiteness".into(),
        ));
    }
    let values: Vec<f64> = mesh
        .par_iter()
        .map(|&r| potential_radial(m, k, r))
        .collect();
    let tail_exp = (m.tail().b - n as f64 + p) / (p - 1.0);
    let mut prof = RadialProfile::new(mesh.to_vec(), values, tail_exp, n, "wolff")?;
    prof.approximate = n != 2 && n != 3;
    Ok(prof)
}

/// Decide the finiteness condition int_1^inf (sigma(B_rho)/rho^{n-p})^{1/(p-1)} drho/rho.
pub fn check_finiteness(m: &RadialMeasure, p: f64, n: u32) -> Result<FinitenessReport> {
    check_p_range(p, n)?;
    let k = Kernel::wolff(p, n);
    let g = |s: f64| {
        let t = s.exp();
        let mass = m.mass(t);
        if mass <= 0.0 {
            0.0
        } else {
            (mass * t.powf(-k.e)).powf(1.0 / k.m)
        }
    };
    let cut = m.r_last().max(1.0);
    let breaks: Vec<f64> = m
        .breakpoints()
        .filter(|&r| r > 1.0 && r < cut)
        .map(|r| r.ln())
        .collect();
    let core = quad::integrate_core(&g, 0.0, cut.ln(), &breaks);
    if !k.tail_converges(m.tail()) {
        return Ok(FinitenessReport {
            verdict: Verdict::Infinite,
            tail_integral: PotentialValue::Infinite,
            core_part: core,
            tail_part: PotentialValue::Infinite,
        });
    }
    let tail = quad::integrate_right_tail(&g, cut.ln());
    Ok(FinitenessReport {
        verdict: Verdict::Finite,
        tail_integral: PotentialValue::Finite(core + tail),
        core_part: core,
        tail_part: PotentialValue::Finite(tail),
    })
}

/// Bisection tolerance (on radius) for sublevel-set boundaries.
const SUBLEVEL_RTOL: f64 = 1e-9;

/// Restriction of a radial measure to B_k(0) intersect {W_{1,p}sigma < k}.
/// The Wolff potential of a radial measure is radial and continuous, so the
/// sublevel set is a union of shells; boundaries are located by bisection.
/// Points with W = k carry no mass (the cumulative function has no jumps),
/// so the strict inequality costs nothing.
pub fn restrict_to_wolff_sublevel(
    m: &RadialMeasure,
    k: f64,
    p: f64,
    n: u32,
) -> Result<RadialMeasure> {
    if !(k > 0.0) {
        return Err(ToolkitError::Domain(format!("sublevel k must be positive, got {k}")));
    }
    if m.is_zero() {
        return m.restrict_to_ball(k);
    }
    if check_finiteness(m, p, n)?.verdict == Verdict::Infinite {
        // W is identically infinite: the sublevel set is empty.
        return RadialMeasure::new(
            vec![(m.knots()[0].0, 0.0)],
            crate::measure::Tail { a: 0.0, b: 0.0, c: 0.0 },
            m.dim(),
        );
    }
    let w_at = |r: f64| wolff_at_radius(m, p, n, r).unwrap_or(f64::INFINITY);
    // Scan a dense mesh covering the support and the truncation radius.
    let r_lo = (m.knots()[0].0 / 100.0).min(k / 100.0);
    let r_hi = (m.r_last() * 10.0).max(k);
    let mut scan = log_mesh(r_lo, r_hi, 257);
    scan.insert(0, 0.0);
    let vals: Vec<f64> = scan.par_iter().map(|&r| w_at(r)).collect();
    if vals.iter().all(|v| *v < k) {
        // Sublevel covers everything: the two restrictions agree exactly.
        return m.restrict_to_ball(k);
    }
    // Included shells within [0, k] from the sign pattern of W - k.
    let mut boundaries = Vec::new();
    for i in 0..scan.len() - 1 {
        let (a, b) = (scan[i], scan[i + 1]);
        if (vals[i] < k) != (vals[i + 1] < k) {
            let (mut lo, mut hi) = (a.max(r_lo / 2.0), b);
            while hi - lo > SUBLEVEL_RTOL * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if (w_at(mid) < k) == (vals[i] < k) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            boundaries.push(0.5 * (lo + hi));
        }
    }
    let mut shells: Vec<(f64, f64)> = Vec::new();
    let mut inside = vals[0] < k;
    let mut start = 0.0;
    for &b in &boundaries {
        if inside {
            shells.push((start, b));
        } else {
            start = b;
        }
        inside = !inside;
    }
    if inside {
        shells.push((start, f64::INFINITY));
    }
    // Intersect with B_k and assemble the restricted cumulative function on a
    // refined knot set.
    let mut radii: Vec<f64> = m.knots().iter().map(|k| k.0).collect();
    for (a, b) in &shells {
        radii.push(*a);
        let hi = b.min(k);
        if hi > *a {
            radii.push(hi);
            // Extra knots keep the interpolated cumulative close to the truth
            // inside partially included stretches.
            let (la, lb) = (a.max(r_lo).ln(), hi.ln());
            for j in 1..16 {
                radii.push((la + (lb - la) * j as f64 / 16.0).exp());
            }
        }
    }
    radii.push(k);
    radii.retain(|r| *r > 0.0 && r.is_finite() && *r <= k.min(m.r_last().max(k)));
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let included_mass = |r: f64| -> f64 {
        let mut acc = 0.0;
        for (a, b) in &shells {
            let hi = b.min(k).min(r);
            if hi > *a {
                acc += m.mass(hi) - m.mass(*a);
            }
        }
        acc.max(0.0)
    };
    let mut knots: Vec<(f64, f64)> = radii.iter().map(|&r| (r, included_mass(r))).collect();
    let mut prev = 0.0;
    for kn in knots.iter_mut() {
        if kn.1 < prev {
            kn.1 = prev;
        }
        prev = kn.1;
    }
    let total = knots.last().map(|k| k.1).unwrap_or(0.0);
    RadialMeasure::new(knots, crate::measure::Tail { a: total, b: 0.0, c: 0.0 }, m.dim())
}

// ---------------------------------------------------------------------------
// kappa(B) lower bounds and the intrinsic potential
// ---------------------------------------------------------------------------

/// A certified lower bound for the localized embedding constant kappa(B),
/// obtained from finitely many test measures.
#[derive(Debug, Clone, Serialize)]
pub struct KappaEstimate {
    pub center: [f64; 3],
    pub radius: f64,
    pub lower_bound: f64,
    pub witness: String,
}

#[derive(Debug, Clone)]
struct CloudNode {
    pos: [f64; 3],
    w: f64,
    res: f64,
}

/// Deterministic quadrature cloud for sigma restricted to B(center, radius).
/// Radial measures are supported in dimensions 2 and 3 only.
fn sigma_cloud(
    sigma: &Measure,
    center: [f64; 3],
    radius: f64,
    radial_sub: usize,
    angular: usize,
) -> Result<Vec<CloudNode>> {
    match sigma {
        Measure::Grid(gm) => {
            let r2 = radius * radius;
            let vol = gm.cell_volume();
            let mut out = Vec::new();
            for (idx, &d) in gm.density().iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let c = gm.center(idx);
                let dx = [c[0] - center[0], c[1] - center[1], c[2] - center[2]];
                if dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2] <= r2 {
                    out.push(CloudNode { pos: c, w: d * vol, res: gm.spacing() });
                }
            }
            Ok(out)
        }
        Measure::Radial(rm) => {
            let n = rm.dim();
            if n != 2 && n != 3 {
                return Err(ToolkitError::Domain(
                    "kappa estimation for radial measures requires n in {2, 3}".into(),
                ));
            }
            let d = norm3(center);
            let r_lo = (d - radius).max(0.0);
            let r_hi = if rm.tail().is_constant() {
                (d + radius).min(rm.r_last())
            } else {
                d + radius
            };
            if r_hi <= r_lo {
                return Ok(Vec::new());
            }
            // Radial pieces split at knots and capped in log ratio. The inner
            // 1e-4 relative cutoff discards a vanishing sliver of mass, which
            // only lowers the resulting kappa bound.
            let mut cuts: Vec<f64> = vec![r_lo.max(r_hi * 1e-4), r_hi];
            for r in rm.breakpoints() {
                if r > cuts[0] && r < r_hi {
                    cuts.push(r);
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup();
            let mut pieces = Vec::new();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let chunks = ((b / a).ln() / 0.5).ceil().max(1.0) as usize;
                let chunks = chunks.min(radial_sub.max(1));
                for j in 0..chunks {
                    let la = a.ln() + (b / a).ln() * j as f64 / chunks as f64;
                    let lb = a.ln() + (b / a).ln() * (j + 1) as f64 / chunks as f64;
                    pieces.push((la.exp(), lb.exp()));
                }
            }
            let (gn, gw) = quad::gl_rule();
            let r2 = radius * radius;
            let mut out = Vec::new();
            for (a, b) in pieces {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                for i in 0..16 {
                    let r = mid + half * gn[i];
                    let wr = gw[i] * half * rm.radial_density(r);
                    if wr <= 0.0 {
                        continue;
                    }
                    if n == 3 {
                        for it in 0..angular {
                            // Midpoint rule in cos(theta).
                            let ct = -1.0 + 2.0 * (it as f64 + 0.5) / angular as f64;
                            let st = (1.0 - ct * ct).max(0.0).sqrt();
                            for ip in 0..angular {
                                let phi =
                                    2.0 * std::f64::consts::PI * (ip as f64 + 0.5) / angular as f64;
                                let pos =
                                    [r * st * phi.cos(), r * st * phi.sin(), r * ct];
                                let dx = [
                                    pos[0] - center[0],
                                    pos[1] - center[1],
                                    pos[2] - center[2],
                                ];
                                if dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2] <= r2 {
                                    out.push(CloudNode {
                                        pos,
                                        w: wr / (angular * angular) as f64,
                                        res: (b - a).max(r * 2.0 / angular as f64),
                                    });
                                }
                            }
                        }
                    } else {
                        let na = angular * angular;
                        for ia in 0..na {
                            let phi = 2.0 * std::f64::consts::PI * (ia as f64 + 0.5) / na as f64;
                            let pos = [r * phi.cos(), r * phi.sin(), 0.0];
                            let dx = [pos[0] - center[0], pos[1] - center[1], 0.0];
                            if dx[0] * dx[0] + dx[1] * dx[1] <= r2 {
                                out.push(CloudNode {
                                    pos,
                                    w: wr / na as f64,
                                    res: (b - a).max(r * 2.0 / na as f64),
                                });
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Closed-form Wolff potential of a unit Dirac mass at distance `dist`.
fn wolff_dirac(dist: f64, p: f64, nf: f64) -> f64 {
    (p - 1.0) / (nf - p) * dist.powf((p - nf) / (p - 1.0))
}

/// Wolff potential of a weighted point cloud at x, by the step-function
/// closed form. Distances are floored at half the node resolution, which can
/// only lower the value (the estimate stays a lower bound).
fn wolff_of_cloud(cloud: &[CloudNode], x: [f64; 3], k: Kernel) -> f64 {
    let mut steps: Vec<(f64, f64)> = cloud
        .iter()
        .map(|nd| {
            let dx = [nd.pos[0] - x[0], nd.pos[1] - x[1], nd.pos[2] - x[2]];
            (norm3(dx).max(0.5 * nd.res), nd.w)
        })
        .collect();
    steps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let beta = k.e / k.m;
    let mut total = 0.0;
    let mut cum = 0.0;
    for i in 0..steps.len() {
        cum += steps[i].1;
        let t0 = steps[i].0;
        let upper = if i + 1 < steps.len() {
            steps[i + 1].0.powf(-beta)
        } else {
            0.0
        };
        total += cum.powf(1.0 / k.m) * (t0.powf(-beta) - upper) / beta;
    }
    total
}

/// Lower bound for kappa(B) from Dirac test measures at the sample points and
/// the normalized restriction of sigma to B itself.
pub fn kappa_lower_bound(
    sigma: &Measure,
    center: [f64; 3],
    radius: f64,
    p: f64,
    q: f64,
    samples: &[[f64; 3]],
) -> Result<KappaEstimate> {
    let n = sigma.dim();
    check_p_range(p, n)?;
    if !(q > 0.0 && q < p - 1.0) {
        return Err(ToolkitError::Domain(format!(
            "kappa requires 0 < q < p - 1, got q = {q}"
        )));
    }
    if samples.is_empty() {
        return Err(ToolkitError::Domain("sample point list is empty".into()));
    }
    let cloud = sigma_cloud(sigma, center, radius, 24, 20)?;
    if cloud.is_empty() {
        return Ok(KappaEstimate {
            center,
            radius,
            lower_bound: 0.0,
            witness: "sigma vanishes on the ball".into(),
        });
    }
    let nf = n as f64;
    let mut best = 0.0;
    let mut witness = String::new();
    for y in samples {
        let sum: f64 = cloud
            .par_iter()
            .map(|nd| {
                let dx = [nd.pos[0] - y[0], nd.pos[1] - y[1], nd.pos[2] - y[2]];
                let dist = norm3(dx).max(0.5 * nd.res);
                nd.w * wolff_dirac(dist, p, nf).powf(q)
            })
            .sum();
        let val = sum.powf(1.0 / q); // ||delta_y|| = 1
        if val > best {
            best = val;
            witness = format!("dirac at ({:.6}, {:.6}, {:.6})", y[0], y[1], y[2]);
        }
    }
    // Normalized sigma_B as a test measure, on coarser companion clouds (its
    // potential is smooth, so medium resolution suffices for the outer
    // integral and low resolution for the test measure itself).
    let outer = sigma_cloud(sigma, center, radius, 10, 10)?;
    let mu_cloud_raw = sigma_cloud(sigma, center, radius, 6, 6)?;
    let mu_total: f64 = mu_cloud_raw.iter().map(|nd| nd.w).sum();
    if mu_total > 0.0 {
        let mu_cloud: Vec<CloudNode> = mu_cloud_raw
            .into_iter()
            .map(|nd| CloudNode { w: nd.w / mu_total, ..nd })
            .collect();
        let k = Kernel::wolff(p, n);
        let sum: f64 = outer
            .par_iter()
            .map(|nd| nd.w * wolff_of_cloud(&mu_cloud, nd.pos, k).powf(q))
            .sum();
        let val = sum.powf(1.0 / q); // normalized: ||mu|| = 1
        if val > best {
            best = val;
            witness = "sigma_B itself".into();
        }
    }
    Ok(KappaEstimate { center, radius, lower_bound: best, witness })
}

/// Result of the intrinsic potential estimate at one point.
#[derive(Debug, Clone, Serialize)]
pub struct IntrinsicEstimate {
    /// Lower-bound estimate of K_{p,q} sigma (x); Infinite when the kappa
    /// growth along the mesh tail already forces divergence.
    pub value: PotentialValue,
    /// kappa lower bounds per mesh radius, for inspection.
    pub kappa_per_t: Vec<f64>,
}

/// Lower-bound estimate of the intrinsic potential
/// K_{p,q} sigma (x) = int ( kappa(B(x,t))^{q(p-1)/(p-1-q)} / t^{n-p} )^{1/(p-1)} dt/t.
///
/// kappa(B) is replaced on every ball by `kappa_lower_bound` with samples at
/// the ball center and the 2n axis points at half-radius.
pub fn intrinsic_potential(
    sigma: &RadialMeasure,
    p: f64,
    q: f64,
    x: [f64; 3],
    t_mesh: &[f64],
) -> Result<IntrinsicEstimate> {
    let n = sigma.dim();
    check_p_range(p, n)?;
    if !(q > 0.0 && q < p - 1.0) {
        return Err(ToolkitError::Domain(format!(
            "intrinsic potential requires 0 < q < p - 1, got q = {q}"
        )));
    }
    if t_mesh.len() < 4 || !t_mesh.windows(2).all(|w| w[0] < w[1]) || t_mesh[0] <= 0.0 {
        return Err(ToolkitError::Domain(
            "t mesh must be increasing, positive, and have at least 4 points".into(),
        ));
    }
    let meas = Measure::Radial(sigma.clone());
    let mut kappas = Vec::with_capacity(t_mesh.len());
    for &t in t_mesh {
        let mut samples = vec![x];
        for k in 0..n as usize {
            let mut a = x;
            let mut b = x;
            a[k] += t / 2.0;
            b[k] -= t / 2.0;
            samples.push(a);
            samples.push(b);
        }
        kappas.push(kappa_lower_bound(&meas, x, t, p, q, &samples)?.lower_bound);
    }
    let nf = n as f64;
    let expo = q * (p - 1.0) / (p - 1.0 - q);
    let integrand = |kap: f64, t: f64| -> f64 {
        if kap <= 0.0 {
            0.0
        } else {
            (kap.powf(expo) * t.powf(p - nf)).powf(1.0 / (p - 1.0))
        }
    };
    // Trapezoid in s = ln t over the mesh.
    let mut acc = 0.0;
    for i in 0..t_mesh.len() - 1 {
        let ds = (t_mesh[i + 1] / t_mesh[i]).ln();
        acc += 0.5 * ds * (integrand(kappas[i], t_mesh[i]) + integrand(kappas[i + 1], t_mesh[i + 1]));
    }
    // Tail growth of the kappa estimates over the last quarter of the mesh.
    let m = t_mesh.len();
    let i0 = 3 * m / 4;
    let slope = if kappas[m - 1] > 0.0 && kappas[i0] > 0.0 {
        (kappas[m - 1] / kappas[i0]).ln() / (t_mesh[m - 1] / t_mesh[i0]).ln()
    } else {
        0.0
    };
    if slope * expo >= nf - p {
        return Ok(IntrinsicEstimate { value: PotentialValue::Infinite, kappa_per_t: kappas });
    }
    // Analytic tail with kappa frozen at its last estimate.
    let klast = kappas[m - 1];
    if klast > 0.0 {
        let gam = (nf - p - slope * expo) / (p - 1.0);
        acc += integrand(klast, t_mesh[m - 1]) / gam;
    }
    Ok(IntrinsicEstimate { value: PotentialValue::Finite(acc), kappa_per_t: kappas })
}
