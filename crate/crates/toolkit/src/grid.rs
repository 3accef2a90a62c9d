//! Dirichlet solves on uniform grids by regularized p-energy minimization,
//! the minimal-solution ladder, the sublinear grid scheme, and p-capacity.
//!
//! The discrete energy is J_eps(u) = sum_c w_c (|grad_h u|_c^2 + eps^2)^{p/2} / p h^n
//! - sum_c u_c nu_c h^n with forward differences and zero ghost cells; the
//! outermost cell layer is always clamped to zero, so the Dirichlet condition
//! is imposed on an inner rim. Minimization is exact per-cell coordinate
//! descent (closed form for p = 2, safeguarded Newton otherwise), swept in
//! red-black order, continued through a decreasing eps schedule.

use rayon::prelude::*;

use crate::error::{Result, ToolkitError};
use crate::measure::{GridMeasure, Measure, OperatorSpec, RadialMeasure};
use crate::potentials;
use crate::quad;

/// Geometry of a uniform cell grid over [-L, L]^n, cell centers at
/// -L + (i + 1/2) h, x-fastest linear indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeom {
    pub side: usize,
    pub h: f64,
    pub dim: u32,
}

impl GridGeom {
    pub fn new(side: usize, h: f64, dim: u32) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(ToolkitError::Domain(format!("grid dimension must be 2 or 3, got {dim}")));
        }
        if side < 3 || !(h > 0.0) {
            return Err(ToolkitError::Domain("grid needs side >= 3 and positive spacing".into()));
        }
        Ok(GridGeom { side, h, dim })
    }

    pub fn of_measure(m: &GridMeasure) -> GridGeom {
        GridGeom { side: m.side(), h: m.spacing(), dim: m.dim() }
    }

    pub fn cell_count(&self) -> usize {
        self.side.pow(self.dim)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.h * self.side as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.side;
        let j = (idx / self.side) % self.side;
        let k = if self.dim == 3 { idx / (self.side * self.side) } else { 0 };
        [i, j, k]
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.side * (c[1] + if self.dim == 3 { self.side * c[2] } else { 0 })
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let l = self.half_width();
        let c = self.coords(idx);
        let coord = |i: usize| -l + (i as f64 + 0.5) * self.h;
        [coord(c[0]), coord(c[1]), if self.dim == 3 { coord(c[2]) } else { 0.0 }]
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.center(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Indices of cells whose centers lie in the closed ball B(0, r).
    pub fn cells_in_ball(&self, r: f64) -> Vec<usize> {
        (0..self.cell_count()).filter(|&i| self.radius(i) <= r).collect()
    }

    /// Cells meeting B(0, r) up to the half-spacing envelope: the staircase
    /// set with centers within r + h/2, whose surface tracks the sphere with
    /// O(h) bias in either direction (the center rule under-covers by ~h/2).
    pub fn cells_covering_ball(&self, r: f64) -> Vec<usize> {
        self.cells_in_ball(r + 0.5 * self.h)
    }

    /// True if the coordinates touch the outermost cell layer.
    fn on_rim(&self, c: [usize; 3]) -> bool {
        let last = self.side - 1;
        let mut rim = c[0] == 0 || c[0] == last || c[1] == 0 || c[1] == last;
        if self.dim == 3 {
            rim |= c[2] == 0 || c[2] == last;
        }
        rim
    }
}

/// Computational domain of a Dirichlet solve; must fit inside the grid box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Box { half_width: f64 },
    Ball { radius: f64 },
}

impl Domain {
    fn contains(&self, x: [f64; 3]) -> bool {
        match self {
            Domain::Box { half_width } => {
                x[0].abs() < *half_width && x[1].abs() < *half_width && x[2].abs() < *half_width
            }
            Domain::Ball { radius } => {
                (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() < *radius
            }
        }
    }
}

/// Regularization schedule and inner-solver controls.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Strictly decreasing, final value <= 1e-6.
    pub epsilon_schedule: Vec<f64>,
    pub max_inner_iterations: usize,
    /// First-order optimality residual (density scale) at the final epsilon.
    pub inner_tolerance: f64,
    pub domain: Domain,
}

impl SolveConfig {
    pub fn new(
        epsilon_schedule: Vec<f64>,
        max_inner_iterations: usize,
        inner_tolerance: f64,
        domain: Domain,
    ) -> Result<Self> {
        let cfg = SolveConfig { epsilon_schedule, max_inner_iterations, inner_tolerance, domain };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults suited to the desk-scale problems in the test suite.
    pub fn ball(radius: f64) -> Self {
        SolveConfig {
            epsilon_schedule: vec![1e-2, 1e-4, 1e-6],
            max_inner_iterations: 20_000,
            inner_tolerance: 1e-7,
            domain: Domain::Ball { radius },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eps = &self.epsilon_schedule;
        if eps.is_empty()
            || eps.iter().any(|e| !(*e > 0.0))
            || !eps.windows(2).all(|w| w[0] > w[1])
        {
            return Err(ToolkitError::Domain(
                "epsilon schedule must be nonempty, positive, strictly decreasing".into(),
            ));
        }
        if *eps.last().unwrap() > 1e-6 {
            return Err(ToolkitError::Domain("final epsilon must be <= 1e-6".into()));
        }
        if !(self.inner_tolerance > 0.0) || self.max_inner_iterations == 0 {
            return Err(ToolkitError::Domain("inner tolerance/iterations must be positive".into()));
        }
        let r = match self.domain {
            Domain::Box { half_width } => half_width,
            Domain::Ball { radius } => radius,
        };
        if !(r > 0.0) {
            return Err(ToolkitError::Domain("domain size must be positive".into()));
        }
        Ok(())
    }
}

/// Nonnegative grid function vanishing outside the computational domain.
#[derive(Debug, Clone)]
pub struct GridField {
    geom: GridGeom,
    values: Vec<f64>,
    active: Vec<bool>,
    pub label: String,
}

impl GridField {
    pub fn zero(geom: GridGeom, domain: Domain, label: impl Into<String>) -> GridField {
        let active = active_mask(&geom, domain);
        let values = vec![0.0; geom.cell_count()];
        GridField { geom, values, active, label: label.into() }
    }

    pub fn geom(&self) -> &GridGeom {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.geom == other.geom
    }

    /// Index of the cell whose center is nearest to x.
    pub fn nearest_cell(&self, x: [f64; 3]) -> usize {
        let l = self.geom.half_width();
        let clamp = |v: f64| -> usize {
            let i = ((v + l) / self.geom.h - 0.5).round();
            (i.max(0.0) as usize).min(self.geom.side - 1)
        };
        let c = [clamp(x[0]), clamp(x[1]), if self.geom.dim == 3 { clamp(x[2]) } else { 0 }];
        self.geom.index(c)
    }

    /// Value at the cell whose center is nearest to x.
    pub fn value_near(&self, x: [f64; 3]) -> f64 {
        self.values[self.nearest_cell(x)]
    }

    /// Forward-difference gradient magnitudes (ghost zeros outside the array).
    pub fn gradient_magnitude(&self) -> Vec<f64> {
        let geom = &self.geom;
        (0..geom.cell_count())
            .map(|i| gradient_sq(geom, &self.values, i).sqrt())
            .collect()
    }
}

fn active_mask(geom: &GridGeom, domain: Domain) -> Vec<bool> {
    (0..geom.cell_count())
        .map(|i| !geom.on_rim(geom.coords(i)) && domain.contains(geom.center(i)))
        .collect()
}

/// |grad_h u|^2 at a cell: forward differences, missing neighbors read 0.
fn gradient_sq(geom: &GridGeom, values: &[f64], idx: usize) -> f64 {
    let c = geom.coords(idx);
    let u = values[idx];
    let mut acc = 0.0;
    for d in 0..geom.dim as usize {
        let nb = if c[d] + 1 < geom.side {
            let mut cc = c;
            cc[d] += 1;
            values[geom.index(cc)]
        } else {
            0.0
        };
        let diff = (nb - u) / geom.h;
        acc += diff * diff;
    }
    acc
}

/// Residual/energy history of a continued solve.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub epsilons: Vec<f64>,
    /// Energies recorded after every sweep, one run per epsilon.
    pub energies: Vec<Vec<f64>>,
    /// Final first-order residual per epsilon (density scale).
    pub residuals: Vec<f64>,
}

struct Problem<'a> {
    geom: GridGeom,
    p: f64,
    op: &'a OperatorSpec,
    /// Source density per cell (may be all zeros for capacity solves).
    nu: Vec<f64>,
    active: Vec<bool>,
    /// Cells constrained to u >= 1 (capacity obstacle), handled by projection.
    floor: Vec<bool>,
}

impl Problem<'_> {
    fn energy(&self, values: &[f64], eps: f64) -> f64 {
        let geom = &self.geom;
        let hn = geom.cell_volume();
        let e2 = eps * eps;
        let half = self.p / 2.0;
        (0..geom.cell_count())
            .into_par_iter()
            .map(|i| {
                let g2 = gradient_sq(geom, values, i);
                self.op.weight_at(i) * (g2 + e2).powf(half) / self.p * hn
                    - values[i] * self.nu[i] * hn
            })
            .sum()
    }

    /// d J / d u_i divided by h^n (density scale), for active cells.
    fn residual_at(&self, values: &[f64], eps: f64, idx: usize) -> f64 {
        let geom = &self.geom;
        let c = geom.coords(idx);
        let u = values[idx];
        let e2 = eps * eps;
        let s = self.p / 2.0 - 1.0;
        let h2 = geom.h * geom.h;
        let mut acc = 0.0;
        // Own-cell gradient: every forward component contains -u_i.
        let own = gradient_sq(geom, values, idx);
        let own_fac = self.op.weight_at(idx) * (own + e2).powf(s);
        for d in 0..geom.dim as usize {
            let mut cc = c;
            cc[d] += 1;
            let nb = if cc[d] < geom.side { values[geom.index(cc)] } else { 0.0 };
            acc += own_fac * (u - nb);
            // Backward neighbor's gradient has one component containing u_i.
            if c[d] > 0 {
                let mut cb = c;
                cb[d] -= 1;
                let bi = geom.index(cb);
                let bg = gradient_sq(geom, values, bi);
                acc += self.op.weight_at(bi) * (bg + e2).powf(s) * (u - values[bi]);
            }
        }
        acc / h2 - self.nu[idx]
    }

    fn max_residual(&self, values: &[f64], eps: f64, cells: &[usize]) -> f64 {
        cells
            .par_iter()
            .filter(|&&i| !self.floor[i])
            .map(|&i| self.residual_at(values, eps, i).abs())
            .reduce(|| 0.0, f64::max)
    }
}

/// Exact coordinate minimizer for p = 2 (ignoring the eps^2 constant).
fn update_p2(prob: &Problem<'_>, values: &[f64], idx: usize) -> f64 {
    let geom = &prob.geom;
    let c = geom.coords(idx);
    let wi = prob.op.weight_at(idx);
    let mut num = prob.nu[idx] * geom.h * geom.h;
    let mut den = 0.0;
    for d in 0..geom.dim as usize {
        let mut cf = c;
        cf[d] += 1;
        let fwd = if cf[d] < geom.side { values[geom.index(cf)] } else { 0.0 };
        num += wi * fwd;
        den += wi;
        let (wb, bwd) = if c[d] > 0 {
            let mut cb = c;
            cb[d] -= 1;
            let bi = geom.index(cb);
            (prob.op.weight_at(bi), values[bi])
        } else {
            (wi, 0.0)
        };
        num += wb * bwd;
        den += wb;
    }
    num / den
}

/// Exact 1D minimization for general p: safeguarded Newton on the convex
/// per-cell derivative.
fn update_general(prob: &Problem<'_>, values: &[f64], idx: usize, eps: f64) -> f64 {
    let geom = &prob.geom;
    let c = geom.coords(idx);
    let n = geom.dim as usize;
    let h2 = geom.h * geom.h;
    let e2 = eps * eps;
    let s = prob.p / 2.0 - 1.0;
    let wi = prob.op.weight_at(idx);
    // Forward neighbor values; backward (weight, value, fixed part of the
    // backward cell's squared gradient).
    let mut fwd = [0.0f64; 3];
    let mut bwd = [(0.0f64, 0.0f64, 0.0f64); 3];
    for d in 0..n {
        let mut cf = c;
        cf[d] += 1;
        fwd[d] = if cf[d] < geom.side { values[geom.index(cf)] } else { 0.0 };
        if c[d] > 0 {
            let mut cb = c;
            cb[d] -= 1;
            let bi = geom.index(cb);
            let ub = values[bi];
            let mut other = 0.0;
            let cbc = geom.coords(bi);
            for a in 0..n {
                if a == d {
                    continue;
                }
                let mut ca = cbc;
                ca[a] += 1;
                let na = if ca[a] < geom.side { values[geom.index(ca)] } else { 0.0 };
                other += (na - ub) * (na - ub);
            }
            bwd[d] = (prob.op.weight_at(bi), ub, other);
        } else {
            bwd[d] = (wi, 0.0, 0.0);
        }
    }
    let rhs = prob.nu[idx] * h2;
    // f(x) = h^2 * (dJ/du_i)/h^n; strictly increasing by convexity.
    let f_df = |x: f64| -> (f64, f64) {
        let mut a_sq = 0.0;
        let mut a_sum = 0.0;
        for d in 0..n {
            let diff = x - fwd[d];
            a_sq += diff * diff;
            a_sum += diff;
        }
        let own = (a_sq / h2 + e2).powf(s);
        let own_d = if s == 0.0 { 0.0 } else { s * (a_sq / h2 + e2).powf(s - 1.0) };
        let mut f = wi * own * a_sum;
        let mut df = wi * (own * n as f64 + own_d * 2.0 * a_sum * a_sum / h2);
        for d in 0..n {
            let (wb, ub, other) = bwd[d];
            let diff = x - ub;
            let b = ((diff * diff + other) / h2 + e2).powf(s);
            f += wb * b * diff;
            let b_d = if s == 0.0 {
                0.0
            } else {
                s * ((diff * diff + other) / h2 + e2).powf(s - 1.0)
            };
            df += wb * (b + b_d * 2.0 * diff * diff / h2);
        }
        (f - rhs, df)
    };
    // Bracket a sign change around the neighbor hull, then Newton/bisection.
    let mut lo = fwd.iter().take(n).chain(bwd.iter().take(n).map(|b| &b.1)).cloned().fold(0.0, f64::min);
    let mut hi = fwd.iter().take(n).chain(bwd.iter().take(n).map(|b| &b.1)).cloned().fold(0.0, f64::max);
    let scale = (hi - lo).abs().max(1.0);
    let mut step = scale;
    while f_df(hi).0 < 0.0 {
        hi += step;
        step *= 2.0;
        if step > 1e30 {
            break;
        }
    }
    step = scale;
    while f_df(lo).0 > 0.0 {
        lo -= step;
        step *= 2.0;
        if step > 1e30 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..60 {
        let (f, df) = f_df(x);
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = if df > 0.0 { x - f / df } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

fn minimize(prob: &Problem<'_>, cfg: &SolveConfig, warm: Vec<f64>) -> Result<(Vec<f64>, SolveTrace)> {
    let geom = &prob.geom;
    let mut values = warm;
    // Red-black ordering by coordinate parity; deterministic sweep order.
    let mut colors: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in 0..geom.cell_count() {
        if prob.active[i] {
            let c = geom.coords(i);
            colors[(c[0] + c[1] + c[2]) % 2].push(i);
        }
    }
    let actives: Vec<usize> = colors[0].iter().chain(colors[1].iter()).cloned().collect();
    // Seed the obstacle cells so the iterate starts feasible.
    for i in &actives {
        if prob.floor[*i] && values[*i] < 1.0 {
            values[*i] = 1.0;
        }
    }
    let p2 = prob.p == 2.0;
    // Over-relaxation keeps the per-cell energy decrease for omega < 2.
    let omega = if p2 { 2.0 / (1.0 + (std::f64::consts::PI / geom.side as f64).sin()) } else { 1.0 };
    let scale = prob.nu.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut trace = SolveTrace { epsilons: Vec::new(), energies: Vec::new(), residuals: Vec::new() };
    for (step, &eps) in cfg.epsilon_schedule.iter().enumerate() {
        let last_eps = step + 1 == cfg.epsilon_schedule.len();
        let mut energies = Vec::new();
        let mut res = f64::INFINITY;
        let mut history = Vec::new();
        let mut done = false;
        for sweep in 0..cfg.max_inner_iterations {
            for color in &colors {
                for &i in color {
                    let target = if p2 {
                        update_p2(prob, &values, i)
                    } else {
                        update_general(prob, &values, i, eps)
                    };
                    let mut v = values[i] + omega * (target - values[i]);
                    if prob.floor[i] && v < 1.0 {
                        v = 1.0;
                    }
                    values[i] = v;
                }
            }
            energies.push(prob.energy(&values, eps));
            if sweep % 4 == 3 || sweep + 1 == cfg.max_inner_iterations {
                res = prob.max_residual(&values, eps, &actives);
                history.push(res);
                if res <= cfg.inner_tolerance * scale {
                    done = true;
                    break;
                }
            }
        }
        trace.epsilons.push(eps);
        trace.energies.push(energies);
        trace.residuals.push(res);
        if last_eps && !done {
            return Err(ToolkitError::NoConvergence(format!(
                "grid solve residual {res} above tolerance after {} sweeps; history tail {:?}",
                cfg.max_inner_iterations,
                &history[history.len().saturating_sub(5)..]
            )));
        }
    }
    Ok((values, trace))
}

fn check_setup(nu: &GridMeasure, op: &OperatorSpec, cfg: &SolveConfig) -> Result<(GridGeom, Vec<bool>)> {
    cfg.validate()?;
    let geom = GridGeom::of_measure(nu);
    op.check_dim(geom.dim)?;
    let active = active_mask(&geom, cfg.domain);
    for i in 0..geom.cell_count() {
        if !active[i] && nu.density()[i] != 0.0 {
            return Err(ToolkitError::Domain(
                "source density must vanish outside the computational domain".into(),
            ));
        }
    }
    Ok((geom, active))
}

/// Minimizer of the regularized p-Dirichlet energy with source nu, zero
/// boundary values, continued through the epsilon schedule.
pub fn solve_dirichlet_grid(nu: &GridMeasure, op: &OperatorSpec, cfg: &SolveConfig) -> Result<GridField> {
    solve_dirichlet_grid_traced(nu, op, cfg).map(|(f, _)| f)
}

pub fn solve_dirichlet_grid_traced(
    nu: &GridMeasure,
    op: &OperatorSpec,
    cfg: &SolveConfig,
) -> Result<(GridField, SolveTrace)> {
    let (geom, active) = check_setup(nu, op, cfg)?;
    let prob = Problem {
        geom: geom.clone(),
        p: op.p,
        op,
        nu: nu.density().to_vec(),
        floor: vec![false; geom.cell_count()],
        active: active.clone(),
    };
    let warm = vec![0.0; geom.cell_count()];
    let (mut values, trace) = minimize(&prob, cfg, warm)?;
    // Clamp the rounding dust: the true minimizer is nonnegative.
    for v in values.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    if values.iter().any(|v| *v < 0.0) {
        return Err(ToolkitError::Invariant("solution field went negative".into()));
    }
    Ok((GridField { geom, values, active, label: "dirichlet grid solution".into() }, trace))
}

/// Report on the pointwise ordering of two fields.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CompareReport {
    pub max_violation: f64,
    pub violating_cell_fraction: f64,
}

/// Reports max(u - v) and the fraction of cells with u - v > tol.
pub fn compare_fields(u: &GridField, v: &GridField, tol: f64) -> Result<CompareReport> {
    if !u.same_grid(v) {
        return Err(ToolkitError::Domain("fields live on different grids".into()));
    }
    let mut max_violation = 0.0f64;
    let mut violating = 0usize;
    for (a, b) in u.values.iter().zip(&v.values) {
        let d = a - b;
        max_violation = max_violation.max(d);
        if d > tol {
            violating += 1;
        }
    }
    Ok(CompareReport {
        max_violation,
        violating_cell_fraction: violating as f64 / u.values.len() as f64,
    })
}

/// Discretization slack for order-type assertions on a grid of spacing h.
pub fn delta_h(h: f64) -> f64 {
    10.0 * h
}

/// Ladder outcome: the fields and the measured monotonicity defects.
#[derive(Debug, Clone)]
pub struct LadderReport {
    pub fields: Vec<GridField>,
    /// max(u_k - u_{k+1}) for consecutive ladder elements.
    pub max_decrease: Vec<f64>,
    pub delta_h: f64,
}

/// Minimal-solution ladder: for each k, restrict sigma to
/// B_k intersect {W < k} (W the grid Wolff potential of sigma), solve the
/// Dirichlet problem on B(0, k), extend by zero.
pub fn minimal_solution_grid(
    sigma: &GridMeasure,
    op: &OperatorSpec,
    k_list: &[f64],
    cfg: &SolveConfig,
) -> Result<LadderReport> {
    cfg.validate()?;
    let geom = GridGeom::of_measure(sigma);
    op.check_dim(geom.dim)?;
    if k_list.is_empty() || !k_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(ToolkitError::Domain("k list must be nonempty and increasing".into()));
    }
    let margin = geom.half_width() - geom.h;
    if *k_list.last().unwrap() > margin {
        return Err(ToolkitError::Domain(format!(
            "largest ball radius {} exceeds the grid interior {margin}",
            k_list.last().unwrap()
        )));
    }
    // Grid Wolff potential of sigma at the support cells only: the truncation
    // {W < k} only matters where the density is positive.
    let support: Vec<usize> =
        (0..geom.cell_count()).filter(|&i| sigma.density()[i] > 0.0).collect();
    let msig = Measure::Grid(sigma.clone());
    let wolff: Vec<(usize, f64)> = support
        .par_iter()
        .map(|&i| {
            let w = potentials::wolff_potential(&msig, op.p, geom.dim, geom.center(i))?
                .unwrap_finite();
            Ok((i, w))
        })
        .collect::<Result<_>>()?;
    let mut fields = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let mut density = vec![0.0; geom.cell_count()];
        for &(i, w) in &wolff {
            if w < k && geom.radius(i) <= k {
                density[i] = sigma.density()[i];
            }
        }
        let sigma_k = GridMeasure::new(density, geom.side, geom.h, geom.dim)?;
        let cfg_k = SolveConfig { domain: Domain::Ball { radius: k }, ..cfg.clone() };
        fields.push(solve_dirichlet_grid(&sigma_k, op, &cfg_k)?);
    }
    let max_decrease = fields
        .windows(2)
        .map(|w| {
            w[0].values
                .iter()
                .zip(&w[1].values)
                .map(|(a, b)| a - b)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(LadderReport { fields, max_decrease, delta_h: delta_h(geom.h) })
}

pub use crate::radial::{IterationTrace, TraceRow, FP_MAX_ITER, FP_TOL};

/// Sublinear grid scheme u_0 = 0, u_{j+1} = solve(sigma u_j^q + mu).
pub fn sublinear_minimal_grid(
    sigma: &GridMeasure,
    mu: &GridMeasure,
    q: f64,
    op: &OperatorSpec,
    cfg: &SolveConfig,
) -> Result<(GridField, IterationTrace)> {
    cfg.validate()?;
    let geom = GridGeom::of_measure(sigma);
    op.check_dim(geom.dim)?;
    if GridGeom::of_measure(mu) != geom {
        return Err(ToolkitError::Domain("sigma and mu live on different grids".into()));
    }
    if !(q > 0.0 && q < op.p - 1.0) {
        return Err(ToolkitError::Domain(format!(
            "sub-natural growth requires 0 < q < p - 1, got q = {q}, p = {}",
            op.p
        )));
    }
    let mut u = GridField::zero(geom.clone(), cfg.domain, "sublinear iterate");
    let mut rows = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for j in 0..FP_MAX_ITER {
        let density: Vec<f64> = sigma
            .density()
            .iter()
            .zip(&u.values)
            .zip(mu.density())
            .map(|((s, uv), m)| s * uv.powf(q) + m)
            .collect();
        let rhs = GridMeasure::new(density, geom.side, geom.h, geom.dim)?;
        let next = solve_dirichlet_grid(&rhs, op, cfg)?;
        let sup = next.max_value();
        if sup > 1e12 {
            return Err(ToolkitError::Divergence(format!(
                "iterate sup-norm {sup} exceeded the blow-up guard at step {j}"
            )));
        }
        let scale = sup.max(1e-300);
        let change = next
            .values
            .iter()
            .zip(&u.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        let slack = delta_h(geom.h) * 1e-6 + 1e-13 * scale;
        let monotone = next.values.iter().zip(&u.values).all(|(a, b)| *a >= *b - slack);
        rows.push(TraceRow { j, sup_value: sup, sup_ratio: change, monotone });
        iterations = j + 1;
        u = next;
        if change < FP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ToolkitError::NoConvergence(format!(
            "sublinear grid scheme not converged after {FP_MAX_ITER} iterations"
        )));
    }
    u.label = "sublinear grid solution".into();
    Ok((u, IterationTrace { rows, converged, iterations }))
}

/// p-capacity of a cell set: minimizes the regularized p-energy over fields
/// >= 1 on the cells and 0 on the boundary; returns sum w |grad u|^p h^n.
pub fn p_capacity(
    k_cells: &[usize],
    geom: &GridGeom,
    op: &OperatorSpec,
    cfg: &SolveConfig,
) -> Result<f64> {
    cfg.validate()?;
    op.check_dim(geom.dim)?;
    if k_cells.is_empty() {
        return Ok(0.0);
    }
    let active = active_mask(geom, cfg.domain);
    let mut floor = vec![false; geom.cell_count()];
    for &i in k_cells {
        if i >= geom.cell_count() {
            return Err(ToolkitError::Domain(format!("cell index {i} out of range")));
        }
        if !active[i] {
            return Err(ToolkitError::Domain(
                "obstacle cells must lie strictly inside the domain".into(),
            ));
        }
        floor[i] = true;
    }
    let prob = Problem {
        geom: geom.clone(),
        p: op.p,
        op,
        nu: vec![0.0; geom.cell_count()],
        active,
        floor,
    };
    let (values, _) = minimize(&prob, cfg, vec![0.0; geom.cell_count()])?;
    let hn = geom.cell_volume();
    let energy = (0..geom.cell_count())
        .into_par_iter()
        .map(|i| op.weight_at(i) * gradient_sq(geom, &values, i).powf(op.p / 2.0) * hn)
        .sum();
    Ok(energy)
}

/// Samples a radial measure onto a grid by averaging its volumetric density
/// over `sub`^n points per cell.
pub fn rasterize_radial(
    m: &RadialMeasure,
    side: usize,
    h: f64,
    sub: usize,
) -> Result<GridMeasure> {
    let n = m.dim();
    let geom = GridGeom::new(side, h, n)?;
    if sub == 0 {
        return Err(ToolkitError::Domain("need at least one sample per axis".into()));
    }
    let surf = quad::sphere_surface(n);
    let vol_density = |r: f64| {
        let r = r.max(1e-12);
        m.radial_density(r) / (surf * r.powf((n - 1) as f64))
    };
    let offsets: Vec<f64> =
        (0..sub).map(|i| ((i as f64 + 0.5) / sub as f64 - 0.5) * h).collect();
    let density: Vec<f64> = (0..geom.cell_count())
        .into_par_iter()
        .map(|i| {
            let c = geom.center(i);
            let mut acc = 0.0;
            let mut count = 0usize;
            for &dx in &offsets {
                for &dy in &offsets {
                    if n == 3 {
                        for &dz in &offsets {
                            acc += vol_density(
                                ((c[0] + dx).powi(2) + (c[1] + dy).powi(2) + (c[2] + dz).powi(2))
                                    .sqrt(),
                            );
                            count += 1;
                        }
                    } else {
                        acc += vol_density(((c[0] + dx).powi(2) + (c[1] + dy).powi(2)).sqrt());
                        count += 1;
                    }
                }
            }
            acc / count as f64
        })
        .collect();
    GridMeasure::new(density, side, h, n)
}
