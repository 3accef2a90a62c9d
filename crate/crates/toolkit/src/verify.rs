//! Verification harness: bilateral Wolff-ratio reports, weak Lorentz norms,
//! reachability classification, and the uniqueness battery.

use serde::Serialize;

use crate::error::{Result, ToolkitError};
use crate::grid::GridField;
use crate::measure::{Measure, RadialMeasure};
use crate::potentials::{self, RadialProfile};
use crate::quad;
use crate::radial::{self, Start, SublinearProblem};

/// Envelope of u / W_{1,p}sigma over an evaluation mesh.
#[derive(Debug, Clone, Serialize)]
pub struct BilateralReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// max(max_ratio, 1/min_ratio) — the empirical two-sided constant.
    pub k_empirical: f64,
    pub evaluation_set: String,
    /// False when every mesh point was excluded (e.g. sigma = 0).
    pub conclusive: bool,
}

const BILATERAL_FLOOR: f64 = 1e-14;

/// Evaluates u and the Wolff potential on the profile's mesh and reports the
/// ratio extremes, skipping points where both are below 1e-14.
pub fn bilateral_ratio_report(
    u: &RadialProfile,
    sigma: &RadialMeasure,
    p: f64,
    n: u32,
) -> Result<BilateralReport> {
    let w = potentials::wolff_radial_profile(sigma, p, n, u.radii())?;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut used = 0usize;
    for (uv, wv) in u.values().iter().zip(w.values()) {
        if *uv < BILATERAL_FLOOR && *wv < BILATERAL_FLOOR {
            continue;
        }
        let ratio = uv / wv;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        used += 1;
    }
    let evaluation_set = format!(
        "{} of {} mesh radii in [{:.3e}, {:.3e}]",
        used,
        u.radii().len(),
        u.radii()[0],
        u.radii()[u.radii().len() - 1]
    );
    if used == 0 {
        return Ok(BilateralReport {
            min_ratio: 0.0,
            max_ratio: 0.0,
            k_empirical: f64::INFINITY,
            evaluation_set,
            conclusive: false,
        });
    }
    Ok(BilateralReport {
        min_ratio,
        max_ratio,
        k_empirical: max_ratio.max(1.0 / min_ratio),
        evaluation_set,
        conclusive: true,
    })
}

/// sup_t t * lambda(t)^{1/gamma} for volume-weighted magnitude samples, where
/// lambda(t) is the total volume at magnitude > t. The sup over each interval
/// of constant lambda is attained just below a sample value, so evaluating at
/// the jump points is exact (a fortiori covering any log t-mesh).
pub fn weak_lorentz_norm_weighted(samples: &[(f64, f64)], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(ToolkitError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let mut pos: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(g, v)| *g > 0.0 && *v > 0.0)
        .cloned()
        .collect();
    pos.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut volume = 0.0;
    let mut best: f64 = 0.0;
    // lambda(g_k^-) includes the volume at magnitude >= g_k.
    for (g, v) in pos {
        volume += v;
        best = best.max(g * volume.powf(1.0 / gamma));
    }
    Ok(best)
}

/// Weak Lorentz norm of a grid field's gradient magnitudes (cell volume h^n).
pub fn weak_lorentz_norm(field: &GridField, gamma: f64) -> Result<f64> {
    let hn = field.geom().cell_volume();
    let samples: Vec<(f64, f64)> =
        field.gradient_magnitude().into_iter().map(|g| (g, hn)).collect();
    weak_lorentz_norm_weighted(&samples, gamma)
}

/// Annulus-weighted gradient samples of a radial profile: one slope per mesh
/// interval, weighted by the annulus volume.
pub fn radial_gradient_samples(u: &RadialProfile) -> Vec<(f64, f64)> {
    let n = u.dim;
    let vn = quad::ball_volume(n);
    u.radii()
        .windows(2)
        .zip(u.values().windows(2))
        .map(|(r, v)| {
            let slope = ((v[1] - v[0]) / (r[1] - r[0])).abs();
            let vol = vn * (r[1].powf(n as f64) - r[0].powf(n as f64));
            (slope, vol)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict3 {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionI {
    pub gamma_minimal: f64,
    pub gamma_p: f64,
    pub norm_at_gamma_minimal: f64,
    pub norm_at_p: f64,
    pub verdict: Verdict3,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionII {
    /// Min/max of the solution over the outermost decade of radii (proxy for
    /// liminf/limsup at infinity; a finite mesh cannot witness a limit).
    pub outer_min: f64,
    pub outer_max: f64,
    pub verdict: Verdict3,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionIII {
    /// None when the measure has infinite total mass.
    pub total_mass: Option<f64>,
    pub verdict: Verdict3,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReachabilityReport {
    pub condition_i: ConditionI,
    pub condition_ii: ConditionII,
    pub condition_iii: ConditionIII,
    /// The conditions that hold numerically, e.g. ["i", "iii"].
    pub overall: Vec<String>,
}

/// The solution object being classified.
pub enum Solution<'a> {
    Radial(&'a RadialProfile),
    Grid(&'a GridField),
}

const DECAY_TOL: f64 = 1e-6;

/// Checks the three sufficient conditions for the solution to coincide with
/// the minimal one: (i) gradient in weak-L^gamma at gamma = (p-1)n/(n-1) and
/// gamma = p; (ii) decay at infinity; (iii) finite total mass.
pub fn reachability_classifier(
    u: Solution<'_>,
    sigma: &Measure,
    p: f64,
    n: u32,
) -> Result<ReachabilityReport> {
    let gamma_minimal = (p - 1.0) * n as f64 / (n as f64 - 1.0);
    let gamma_p = p;
    let (norm_min, norm_p, cond_i_verdict, cond_ii) = match &u {
        Solution::Radial(prof) => {
            let samples = radial_gradient_samples(prof);
            let norm_min = weak_lorentz_norm_weighted(&samples, gamma_minimal)?;
            let norm_p = weak_lorentz_norm_weighted(&samples, gamma_p)?;
            // Global membership of |Du| ~ r^{tau-1} in weak-L^gamma needs
            // gamma >= n/(1 - tau); the desk-scale norm is finite regardless.
            let tau = prof.tail_exponent;
            let verdict = if prof.is_zero() {
                Verdict3::Holds
            } else if tau >= 1.0 {
                Verdict3::Fails
            } else if gamma_minimal >= n as f64 / (1.0 - tau) - 1e-12 {
                Verdict3::Holds
            } else {
                Verdict3::Fails
            };
            // Condition (ii) from the same tail analysis plus the measured
            // outermost decade.
            let radii = prof.radii();
            let hi = radii[radii.len() - 1];
            let lo = hi / 10.0;
            let outer: Vec<f64> = radii
                .iter()
                .zip(prof.values())
                .filter(|(r, _)| **r >= lo)
                .map(|(_, v)| *v)
                .collect();
            let outer_min = outer.iter().cloned().fold(f64::INFINITY, f64::min);
            let outer_max = outer.iter().cloned().fold(0.0, f64::max);
            let max = prof.max_value();
            let ii = if max == 0.0 || outer_max <= DECAY_TOL * max {
                Verdict3::Holds
            } else if prof.tail_exponent < 0.0 {
                // Measured values still large but the tail provably decays.
                Verdict3::Holds
            } else {
                Verdict3::Fails
            };
            (
                norm_min,
                norm_p,
                verdict,
                ConditionII { outer_min, outer_max, verdict: ii },
            )
        }
        Solution::Grid(field) => {
            let norm_min = weak_lorentz_norm(field, gamma_minimal)?;
            let norm_p = weak_lorentz_norm(field, gamma_p)?;
            // A bounded grid cannot witness global weak-norm membership or
            // behavior at infinity; the boundary is clamped to zero anyway.
            let active_vals: Vec<f64> = field
                .values()
                .iter()
                .zip(field.active())
                .filter(|(_, a)| **a)
                .map(|(v, _)| *v)
                .collect();
            let outer_min = 0.0;
            let outer_max = active_vals.iter().cloned().fold(0.0, f64::max);
            (
                norm_min,
                norm_p,
                Verdict3::Inconclusive,
                ConditionII { outer_min, outer_max, verdict: Verdict3::Inconclusive },
            )
        }
    };
    let condition_iii = match sigma {
        Measure::Radial(m) => {
            if m.total_mass_is_finite() {
                ConditionIII {
                    total_mass: Some(m.mass(f64::INFINITY)),
                    verdict: Verdict3::Holds,
                }
            } else {
                ConditionIII { total_mass: None, verdict: Verdict3::Fails }
            }
        }
        Measure::Grid(g) => {
            ConditionIII { total_mass: Some(g.total_mass()), verdict: Verdict3::Holds }
        }
    };
    let condition_i = ConditionI {
        gamma_minimal,
        gamma_p,
        norm_at_gamma_minimal: norm_min,
        norm_at_p: norm_p,
        verdict: cond_i_verdict,
    };
    let mut overall = Vec::new();
    for (name, v) in [
        ("i", condition_i.verdict),
        ("ii", cond_ii.verdict),
        ("iii", condition_iii.verdict),
    ] {
        if v == Verdict3::Holds {
            overall.push(name.to_string());
        }
    }
    Ok(ReachabilityReport { condition_i, condition_ii: cond_ii, condition_iii, overall })
}

/// One row of the per-C0 geometric rate table.
#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub c0: f64,
    pub j: usize,
    pub ln_rho: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryEntry {
    pub c0: f64,
    pub iterations: usize,
    /// Iteration count predicted by the recursion x_{j+1} = x_j q/(p-1).
    pub predicted: usize,
    /// Sup-relative distance of the descending limit from the ascending one.
    pub agreement: f64,
    pub rows: Vec<RateRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessSummary {
    pub ascending_iterations: usize,
    pub entries: Vec<BatteryEntry>,
}

pub const BATTERY_AGREEMENT_TOL: f64 = 1e-5;

/// Smallest j with (q/(p-1))^j ln C0 < tol, plus one for the j = 0 row.
pub fn predicted_iterations(c0: f64, q: f64, p: f64, tol: f64) -> usize {
    let x0 = c0.ln();
    if x0 < tol {
        return 1;
    }
    let rate = q / (p - 1.0);
    ((tol / x0).ln() / rate.ln()).ceil() as usize + 1
}

/// Runs the descending contraction experiment for each C0 and checks that
/// every descending limit agrees with the ascending fixed point.
pub fn uniqueness_battery(
    prob: &SublinearProblem,
    mesh: &[f64],
    c0_list: &[f64],
) -> Result<UniquenessSummary> {
    // The ascending scheme: from zero when mu drives the problem, from the
    // Wolff seed when mu = 0 (the zero iterate is a fixed point there).
    let start = if prob.mu.is_zero() { Start::WolffSeed { c0: 1.0 } } else { Start::Zero };
    let (u, trace) = radial::sublinear_fixed_point_radial(prob, mesh, start)?;
    let mut entries = Vec::with_capacity(c0_list.len());
    for &c0 in c0_list {
        let res = radial::contraction_experiment(prob, mesh, c0, &u)?;
        let agreement = res
            .final_profile
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / u.max_value().max(1e-300);
        if agreement > BATTERY_AGREEMENT_TOL {
            return Err(ToolkitError::ContractionBound(format!(
                "descending limit for C0 = {c0} deviates from the ascending one by {agreement}"
            )));
        }
        let rows = res
            .trace
            .rows
            .iter()
            .map(|r| RateRow {
                c0,
                j: r.j,
                ln_rho: r.sup_ratio.ln(),
                bound: (prob.q / (prob.p - 1.0)).powi(r.j as i32) * c0.ln(),
            })
            .collect();
        entries.push(BatteryEntry {
            c0,
            iterations: res.trace.iterations,
            predicted: predicted_iterations(c0, prob.q, prob.p, radial::CONTRACTION_SLACK),
            agreement,
            rows,
        });
    }
    Ok(UniquenessSummary { ascending_iterations: trace.iterations, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{self, Domain, GridGeom, SolveConfig};
    use crate::measure::{OperatorSpec, Tail};
    use crate::potentials::log_mesh;

    const PI: f64 = std::f64::consts::PI;

    fn unit_mass_ball() -> RadialMeasure {
        RadialMeasure::new(vec![(1.0, 1.0)], Tail { a: 1.0, b: 0.0, c: 0.0 }, 3).unwrap()
    }

    #[test]
    fn bilateral_center_ratio_and_envelope() {
        let m = unit_mass_ball();
        let mesh = log_mesh(1e-3, 1e3, 121);
        for p in [1.5, 2.0, 2.5] {
            let u = radial::solve_entire_radial(&m, p, 3, &mesh).unwrap();
            let rep = bilateral_ratio_report(&u, &m, p, 3).unwrap();
            assert!(rep.conclusive);
            assert!(rep.min_ratio > 0.0 && rep.min_ratio <= rep.max_ratio);
            assert!(rep.k_empirical >= 1.0);
            // The ratio at the innermost radius approaches the center value
            // s_{n-1}^{-1/(p-1)}.
            let expected = (4.0 * PI as f64).powf(-1.0 / (p - 1.0));
            assert!(
                rep.min_ratio <= expected * 1.001 && expected * 0.999 <= rep.max_ratio,
                "p={p}: envelope [{}, {}] should cover {expected}",
                rep.min_ratio,
                rep.max_ratio
            );
        }
        // Zero measure: inconclusive.
        let z = RadialMeasure::new(vec![(1.0, 0.0)], Tail { a: 0.0, b: 0.0, c: 0.0 }, 3).unwrap();
        let u = radial::solve_entire_radial(&z, 2.0, 3, &mesh).unwrap();
        let rep = bilateral_ratio_report(&u, &z, 2.0, 3).unwrap();
        assert!(!rep.conclusive);
    }

    #[test]
    fn bilateral_stable_under_refinement() {
        let m = unit_mass_ball();
        let coarse = log_mesh(1e-3, 1e3, 61);
        let fine = log_mesh(1e-3, 1e3, 121);
        let uc = radial::solve_entire_radial(&m, 2.0, 3, &coarse).unwrap();
        let uf = radial::solve_entire_radial(&m, 2.0, 3, &fine).unwrap();
        let rc = bilateral_ratio_report(&uc, &m, 2.0, 3).unwrap();
        let rf = bilateral_ratio_report(&uf, &m, 2.0, 3).unwrap();
        assert!((rc.k_empirical - rf.k_empirical).abs() / rf.k_empirical < 0.01);
        assert!(rf.k_empirical <= 8.0 * PI);
    }

    #[test]
    fn weak_lorentz_single_level_and_monotone() {
        // One cell at magnitude g: norm = g h^{n/gamma}.
        let h = 0.1f64;
        let gamma = 1.5;
        let norm = weak_lorentz_norm_weighted(&[(3.0, h.powi(3))], gamma).unwrap();
        assert!((norm - 3.0 * h.powf(3.0 / gamma)).abs() < 1e-14);
        // Zero samples.
        assert_eq!(weak_lorentz_norm_weighted(&[], gamma).unwrap(), 0.0);
        // Monotone under pointwise domination.
        let lo: Vec<(f64, f64)> = (1..50).map(|i| (i as f64, 0.01)).collect();
        let hi: Vec<(f64, f64)> = (1..50).map(|i| (i as f64 * 1.5, 0.01)).collect();
        let nl = weak_lorentz_norm_weighted(&lo, gamma).unwrap();
        let nh = weak_lorentz_norm_weighted(&hi, gamma).unwrap();
        assert!(nl <= nh);
    }

    #[test]
    fn weak_lorentz_of_green_gradient_is_stable() {
        // |Du| ~ r^{-2} for the Newtonian potential lies in weak-L^{3/2};
        // the analytic distribution gives t lambda(t)^{2/3} = const.
        let m = unit_mass_ball();
        let gamma = 1.5;
        let mut norms = Vec::new();
        for count in [161usize, 321] {
            let mesh = log_mesh(1e-2, 1e2, count);
            let u = radial::solve_entire_radial(&m, 2.0, 3, &mesh).unwrap();
            let samples = radial_gradient_samples(&u);
            norms.push(weak_lorentz_norm_weighted(&samples, gamma).unwrap());
        }
        assert!((norms[0] - norms[1]).abs() / norms[1] < 0.05, "norms {norms:?}");
        // Analytic check: |Du| = 1/(4 pi r^2) outside the ball, so
        // lambda(t) = (4/3) pi r(t)^3 with r(t) = (4 pi t)^{-1/2} and
        // t lambda^{2/3} = (4 pi / 3)^{2/3} / (4 pi).
        let expect = (4.0 * PI / 3.0f64).powf(2.0 / 3.0) / (4.0 * PI);
        assert!(
            (norms[1] - expect).abs() / expect < 0.05,
            "norm {} vs analytic {expect}",
            norms[1]
        );
    }

    #[test]
    fn classifier_on_the_radial_suite() {
        let m = unit_mass_ball();
        let mesh = log_mesh(1e-2, 1e3, 81);
        let u = radial::solve_entire_radial(&m, 2.0, 3, &mesh).unwrap();
        let rep =
            reachability_classifier(Solution::Radial(&u), &Measure::Radial(m.clone()), 2.0, 3)
                .unwrap();
        assert_eq!(rep.condition_i.verdict, Verdict3::Holds);
        assert_eq!(rep.condition_ii.verdict, Verdict3::Holds);
        assert_eq!(rep.condition_iii.verdict, Verdict3::Holds);
        assert_eq!(rep.overall, vec!["i", "ii", "iii"]);

        // Infinite-mass measure with finite Wolff integral: (iii) fails.
        let r0 = (2.0f64).exp();
        let slow = RadialMeasure::new(
            vec![(r0, r0.powf(0.5))],
            Tail { a: 1.0, b: 0.5, c: 0.0 },
            3,
        )
        .unwrap();
        let us = radial::solve_entire_radial(&slow, 2.0, 3, &mesh).unwrap();
        let rep =
            reachability_classifier(Solution::Radial(&us), &Measure::Radial(slow), 2.0, 3)
                .unwrap();
        assert_eq!(rep.condition_iii.verdict, Verdict3::Fails);
        // Tail exponent (b - n + p)/(p - 1) = -0.5 < 0: still decays.
        assert_eq!(rep.condition_ii.verdict, Verdict3::Holds);
    }

    #[test]
    fn classifier_on_a_grid_solution_is_inconclusive_but_finite() {
        let m = unit_mass_ball();
        let sigma = grid::rasterize_radial(&m, 17, 0.25, 1).unwrap();
        let op = OperatorSpec::p_laplace(2.0).unwrap();
        let cfg = SolveConfig {
            epsilon_schedule: vec![1e-6],
            max_inner_iterations: 4000,
            inner_tolerance: 1e-7,
            domain: Domain::Ball { radius: 1.8 },
        };
        let u = grid::solve_dirichlet_grid(&sigma, &op, &cfg).unwrap();
        let rep =
            reachability_classifier(Solution::Grid(&u), &Measure::Grid(sigma), 2.0, 3).unwrap();
        assert_eq!(rep.condition_i.verdict, Verdict3::Inconclusive);
        assert_eq!(rep.condition_ii.verdict, Verdict3::Inconclusive);
        assert_eq!(rep.condition_iii.verdict, Verdict3::Holds);
        assert!(rep.condition_i.norm_at_gamma_minimal.is_finite());
        assert!(rep.condition_i.norm_at_p.is_finite());
        let _ = GridGeom::new(17, 0.25, 3).unwrap();
    }

    #[test]
    fn battery_rates_and_agreement() {
        let mesh = log_mesh(1e-2, 1e3, 61);
        let zero =
            RadialMeasure::new(vec![(1.0, 0.0)], Tail { a: 0.0, b: 0.0, c: 0.0 }, 3).unwrap();
        let prob = SublinearProblem::new(unit_mass_ball(), zero, 2.0, 0.5).unwrap();
        let summary = uniqueness_battery(&prob, &mesh, &[1.0, 2.0, 10.0, 100.0]).unwrap();
        for e in &summary.entries {
            assert!(e.agreement <= BATTERY_AGREEMENT_TOL);
            assert!(
                (e.iterations as i64 - e.predicted as i64).abs() <= 2,
                "C0 = {}: {} iterations, {} predicted",
                e.c0,
                e.iterations,
                e.predicted
            );
            for r in &e.rows {
                assert!(r.ln_rho <= r.bound + radial::CONTRACTION_SLACK);
            }
        }
        // q/(p-1) = 1/2: C0 = 100 needs about log2(ln 100 / 1e-6) ~ 22 steps.
        let last = summary.entries.last().unwrap();
        assert!(last.iterations >= 20 && last.iterations <= 25, "{}", last.iterations);
    }

    #[test]
    fn battery_slow_contraction_rate() {
        // q = 0.9 (p - 1): the rate is 0.9 per iteration.
        let mesh = log_mesh(1e-2, 1e3, 41);
        let zero =
            RadialMeasure::new(vec![(1.0, 0.0)], Tail { a: 0.0, b: 0.0, c: 0.0 }, 3).unwrap();
        let prob = SublinearProblem::new(unit_mass_ball(), zero, 2.0, 0.9).unwrap();
        let summary = uniqueness_battery(&prob, &mesh, &[10.0]).unwrap();
        let rows = &summary.entries[0].rows;
        for w in rows.windows(2) {
            if w[0].ln_rho > 1e-3 {
                let rate = w[1].ln_rho / w[0].ln_rho;
                assert!((rate - 0.9).abs() < 0.02, "rate {rate}");
            }
        }
    }
}
