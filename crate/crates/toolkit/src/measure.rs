//! Measures driving the solvers: radial cumulative-mass functions with
//! analytic power-log tails, and nonnegative grid densities.
//!
//! Only density-type data is admitted (no atoms): every measure here is
//! absolutely continuous with respect to the p-capacity by construction.

use crate::error::{Result, ToolkitError};

/// Relative tolerance for the knot/tail continuity invariant.
const TAIL_MATCH_RTOL: f64 = 1e-12;

/// Analytic tail of a radial cumulative mass function:
/// `sigma(B(0,rho)) = a * rho^b * (ln rho)^(-c)` for `rho >= r_last`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Tail {
    pub fn eval(&self, rho: f64) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        let mut v = self.a * rho.powf(self.b);
        if self.c != 0.0 {
            v *= rho.ln().powf(-self.c);
        }
        v
    }

    /// d/drho of the tail mass.
    pub fn density(&self, rho: f64) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        let lr = rho.ln();
        let mut v = self.a * self.b * rho.powf(self.b - 1.0);
        if self.c != 0.0 {
            v = self.a * rho.powf(self.b - 1.0) * lr.powf(-self.c - 1.0) * (self.b * lr - self.c);
        }
        v.max(0.0)
    }

    /// True when no mass accumulates beyond the matching radius.
    pub fn is_constant(&self) -> bool {
        self.a == 0.0 || (self.b == 0.0 && self.c == 0.0)
    }
}

/// Nonnegative radial measure given by its cumulative mass at finitely many
/// knot radii plus an analytic tail.
#[derive(Debug, Clone)]
pub struct RadialMeasure {
    knots: Vec<(f64, f64)>,
    tail: Tail,
    dim: u32,
}

impl RadialMeasure {
    pub fn new(knots: Vec<(f64, f64)>, tail: Tail, dim: u32) -> Result<Self> {
        if dim < 2 {
            return Err(ToolkitError::Invariant(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        if knots.is_empty() {
            return Err(ToolkitError::Invariant("knot list is empty".into()));
        }
        let mut prev_r = 0.0;
        let mut prev_m = 0.0;
        for &(r, m) in &knots {
            if !(r.is_finite() && r > prev_r) {
                return Err(ToolkitError::Invariant(format!(
                    "knot radii must be strictly increasing and positive, got r={r}"
                )));
            }
            if !(m.is_finite() && m >= prev_m) {
                return Err(ToolkitError::Invariant(format!(
                    "cumulative mass must be nonnegative and nondecreasing, got m={m} after {prev_m}"
                )));
            }
            prev_r = r;
            prev_m = m;
        }
        if !(tail.b >= 0.0) {
            return Err(ToolkitError::Invariant(format!(
                "tail exponent b must be >= 0, got {}",
                tail.b
            )));
        }
        let (r_last, m_last) = *knots.last().unwrap();
        if tail.c != 0.0 && r_last <= 1.0 {
            return Err(ToolkitError::Invariant(
                "log-power tail (c != 0) requires the last knot radius to exceed 1".into(),
            ));
        }
        let t_last = tail.eval(r_last);
        let scale = m_last.abs().max(t_last.abs()).max(1e-300);
        if (t_last - m_last).abs() > TAIL_MATCH_RTOL * scale {
            return Err(ToolkitError::Invariant(format!(
                "tail value {t_last} at r_last={r_last} does not match last knot mass {m_last}"
            )));
        }
        // The tail itself must be nondecreasing on [r_last, inf).
        if tail.a > 0.0 && !tail.is_constant() && tail.b * r_last.ln() < tail.c {
            return Err(ToolkitError::Invariant(
                "tail is decreasing at r_last; not a valid cumulative mass".into(),
            ));
        }
        Ok(RadialMeasure { knots, tail, dim })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn r_last(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    pub fn total_mass_is_finite(&self) -> bool {
        self.tail.is_constant()
    }

    /// Radius beyond which no further mass accumulates, when one exists.
    pub fn support_radius(&self) -> Option<f64> {
        if self.tail.is_constant() {
            // Mass may already be constant before r_last; keep it simple.
            Some(self.r_last())
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tail.a == 0.0 && self.knots.iter().all(|&(_, m)| m == 0.0)
    }

    /// Cumulative mass sigma(B(0,r)).
    ///
    /// Below the first knot the mass extends as m_1 (r/r_1)^n, the scaling of a
    /// bounded density near the origin. Between knots interpolation is linear in
    /// log-log coordinates (exact for pure power masses), falling back to linear
    /// in r when a knot mass vanishes.
    pub fn mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (r_first, m_first) = self.knots[0];
        if r <= r_first {
            return m_first * (r / r_first).powi(self.dim as i32);
        }
        let (r_lk, m_lk) = *self.knots.last().unwrap();
        if r >= r_lk {
            // Guard against rounding in the tail/knot match.
            return self.tail.eval(r).max(m_lk);
        }
        let i = match self
            .knots
            .binary_search_by(|&(kr, _)| kr.partial_cmp(&r).unwrap())
        {
            Ok(i) => return self.knots[i].1,
            Err(i) => i - 1,
        };
        let (r0, m0) = self.knots[i];
        let (r1, m1) = self.knots[i + 1];
        if m0 > 0.0 && m1 > 0.0 {
            let gamma = (m1 / m0).ln() / (r1 / r0).ln();
            m0 * (r / r0).powf(gamma)
        } else {
            m0 + (m1 - m0) * (r - r0) / (r1 - r0)
        }
    }

    /// Radial density dM/dr of the cumulative mass at r (piecewise analytic).
    pub fn radial_density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (r_first, m_first) = self.knots[0];
        let n = self.dim as f64;
        if r <= r_first {
            return m_first * n * r.powf(n - 1.0) / r_first.powf(n);
        }
        if r >= self.r_last() {
            return self.tail.density(r);
        }
        let i = match self
            .knots
            .binary_search_by(|&(kr, _)| kr.partial_cmp(&r).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let i = i.min(self.knots.len() - 2);
        let (r0, m0) = self.knots[i];
        let (r1, m1) = self.knots[i + 1];
        if m0 > 0.0 && m1 > 0.0 {
            let gamma = (m1 / m0).ln() / (r1 / r0).ln();
            m0 * gamma * (r / r0).powf(gamma) / r
        } else {
            (m1 - m0) / (r1 - r0)
        }
    }

    /// Breakpoints of the piecewise-analytic mass function inside (0, inf):
    /// every knot radius. Useful for splitting quadrature panels.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|&(r, _)| r)
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(ToolkitError::Domain(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let knots = self.knots.iter().map(|&(r, m)| (r, lambda * m)).collect();
        let tail = Tail {
            a: lambda * self.tail.a,
            ..self.tail
        };
        RadialMeasure::new(knots, tail, self.dim)
    }

    /// Restriction to the ball B(0,R): mass saturates at sigma(B(0,R)).
    pub fn restrict_to_ball(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(ToolkitError::Domain(format!(
                "restriction radius must be positive, got {radius}"
            )));
        }
        if radius.is_infinite() || radius >= self.r_last() && self.tail.is_constant() {
            return Ok(self.clone());
        }
        let cap = self.mass(radius);
        let mut knots: Vec<(f64, f64)> = self
            .knots
            .iter()
            .copied()
            .filter(|&(r, _)| r < radius)
            .collect();
        knots.push((radius, cap));
        RadialMeasure::new(knots, Tail { a: cap, b: 0.0, c: 0.0 }, self.dim)
    }

    /// Sum of two radial measures. Tails must be summable: both constant, or
    /// sharing the same (b, c) exponents.
    pub fn add(&self, other: &RadialMeasure) -> Result<Self> {
        if self.dim != other.dim {
            return Err(ToolkitError::Domain("dimension mismatch in measure sum".into()));
        }
        let tail = if self.tail.is_constant() && other.tail.is_constant() {
            Tail { a: self.tail.a + other.tail.a, b: 0.0, c: 0.0 }
        } else if self.tail.b == other.tail.b && self.tail.c == other.tail.c {
            Tail { a: self.tail.a + other.tail.a, ..self.tail }
        } else if self.tail.is_constant() {
            // A compact part plus a growing tail cannot be expressed in the
            // single power-log form unless the compact part is zero.
            return Err(ToolkitError::Domain(
                "cannot sum measures with incompatible tails".into(),
            ));
        } else {
            return Err(ToolkitError::Domain(
                "cannot sum measures with incompatible tails".into(),
            ));
        };
        let mut radii: Vec<f64> = self
            .knots
            .iter()
            .chain(other.knots.iter())
            .map(|&(r, _)| r)
            .collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        let knots = radii
            .into_iter()
            .map(|r| (r, self.mass(r) + other.mass(r)))
            .collect();
        RadialMeasure::new(knots, tail, self.dim)
    }
}

/// Nonnegative density samples on a uniform Cartesian grid over `[-L, L]^n`.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    density: Vec<f64>,
    side: usize,
    h: f64,
    dim: u32,
}

impl GridMeasure {
    pub fn new(density: Vec<f64>, side: usize, h: f64, dim: u32) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(ToolkitError::Invariant(format!(
                "grid dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ToolkitError::Invariant(format!("spacing must be positive, got {h}")));
        }
        if side < 2 {
            return Err(ToolkitError::Invariant("grid side must be at least 2".into()));
        }
        let expect = side.pow(dim);
        if density.len() != expect {
            return Err(ToolkitError::Invariant(format!(
                "density has {} samples, expected {}^{} = {}",
                density.len(),
                side,
                dim,
                expect
            )));
        }
        for &d in &density {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(ToolkitError::Invariant(format!(
                    "density samples must be finite and nonnegative, got {d}"
                )));
            }
        }
        Ok(GridMeasure { density, side, h, dim })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.side as f64 * self.h / 2.0
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_volume()
    }

    /// Center coordinates of the cell with flat index `idx` (x fastest).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let l = self.half_width();
        let s = self.side;
        let i = idx % s;
        let j = (idx / s) % s;
        let k = if self.dim == 3 { idx / (s * s) } else { 0 };
        [
            -l + (i as f64 + 0.5) * self.h,
            -l + (j as f64 + 0.5) * self.h,
            if self.dim == 3 { -l + (k as f64 + 0.5) * self.h } else { 0.0 },
        ]
    }

    pub fn mass_in_ball(&self, radius: f64) -> Result<f64> {
        if radius > self.half_width() {
            return Err(ToolkitError::Domain(format!(
                "ball of radius {radius} exceeds grid box of half-width {}",
                self.half_width()
            )));
        }
        let r2 = radius * radius;
        let mut sum = 0.0;
        for (idx, &d) in self.density.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let c = self.center(idx);
            if c[0] * c[0] + c[1] * c[1] + c[2] * c[2] <= r2 {
                sum += d;
            }
        }
        Ok(sum * self.cell_volume())
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(ToolkitError::Domain(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let density = self.density.iter().map(|d| d * lambda).collect();
        GridMeasure::new(density, self.side, self.h, self.dim)
    }

    pub fn restrict_to_ball(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(ToolkitError::Domain(format!(
                "restriction radius must be positive, got {radius}"
            )));
        }
        let r2 = radius * radius;
        let density = self
            .density
            .iter()
            .enumerate()
            .map(|(idx, &d)| {
                let c = self.center(idx);
                if c[0] * c[0] + c[1] * c[1] + c[2] * c[2] <= r2 {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        GridMeasure::new(density, self.side, self.h, self.dim)
    }
}

/// Either representation of a measure.
#[derive(Debug, Clone)]
pub enum Measure {
    Radial(RadialMeasure),
    Grid(GridMeasure),
}

impl Measure {
    pub fn dim(&self) -> u32 {
        match self {
            Measure::Radial(m) => m.dim(),
            Measure::Grid(m) => m.dim(),
        }
    }

    /// sigma(B(0, radius)).
    pub fn ball_mass(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(ToolkitError::Domain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        match self {
            Measure::Radial(m) => Ok(m.mass(radius)),
            Measure::Grid(m) => m.mass_in_ball(radius),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Result<Measure> {
        Ok(match self {
            Measure::Radial(m) => Measure::Radial(m.scaled(lambda)?),
            Measure::Grid(m) => Measure::Grid(m.scaled(lambda)?),
        })
    }

    pub fn restrict_to_ball(&self, radius: f64) -> Result<Measure> {
        Ok(match self {
            Measure::Radial(m) => Measure::Radial(m.restrict_to_ball(radius)?),
            Measure::Grid(m) => Measure::Grid(m.restrict_to_ball(radius)?),
        })
    }
}

/// Spatial weight of the operator A(x, xi) = w(x) |xi|^{p-2} xi.
#[derive(Debug, Clone)]
pub enum Weight {
    One,
    Grid(Vec<f64>),
}

/// The operator model: exponent p, weight w, and structural constants.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub p: f64,
    pub weight: Weight,
    pub alpha: f64,
    pub beta: f64,
}

impl OperatorSpec {
    pub fn p_laplace(p: f64) -> Result<Self> {
        OperatorSpec::new(p, Weight::One, 1.0, 1.0)
    }

    pub fn new(p: f64, weight: Weight, alpha: f64, beta: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(ToolkitError::Invariant(format!("exponent p must exceed 1, got {p}")));
        }
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(ToolkitError::Invariant(format!(
                "structural constants must satisfy 0 < alpha <= beta, got ({alpha}, {beta})"
            )));
        }
        if let Weight::Grid(w) = &weight {
            for &v in w {
                if !(v >= alpha && v <= beta) {
                    return Err(ToolkitError::Invariant(format!(
                        "weight sample {v} outside [alpha, beta] = [{alpha}, {beta}]"
                    )));
                }
            }
        }
        Ok(OperatorSpec { p, weight, alpha, beta })
    }

    /// Validate p against the dimension of the data (the theory needs p < n).
    pub fn check_dim(&self, n: u32) -> Result<()> {
        if self.p >= n as f64 {
            return Err(ToolkitError::Domain(format!(
                "exponent p = {} must be below the dimension n = {n}",
                self.p
            )));
        }
        Ok(())
    }

    pub fn weight_at(&self, idx: usize) -> f64 {
        match &self.weight {
            Weight::One => 1.0,
            Weight::Grid(w) => w[idx],
        }
    }

    pub fn is_unweighted(&self) -> bool {
        matches!(self.weight, Weight::One)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_PI_3: f64 = 4.188790204786391; // 4*pi/3

    pub fn unit_ball_lebesgue() -> RadialMeasure {
        RadialMeasure::new(
            vec![(1.0, FOUR_PI_3)],
            Tail { a: FOUR_PI_3, b: 0.0, c: 0.0 },
            3,
        )
        .unwrap()
    }

    #[test]
    fn ball_mass_scales_cubically_below_first_knot() {
        let m = unit_ball_lebesgue();
        // Oracle: direct cell count on a fine grid.
        let h = 0.004;
        let mut count = 0u64;
        let steps = (0.5f64 / h).ceil() as i64 + 1;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let x = (i as f64 + 0.5) * h;
                    let y = (j as f64 + 0.5) * h;
                    let z = (k as f64 + 0.5) * h;
                    if x * x + y * y + z * z <= 0.25 {
                        count += 1;
                    }
                }
            }
        }
        let oracle = count as f64 * h * h * h;
        let got = m.mass(0.5);
        assert!((got - FOUR_PI_3 * 0.125).abs() < 1e-12);
        assert!((got - oracle).abs() / oracle < 5e-3, "grid oracle {oracle} vs {got}");
    }

    #[test]
    fn zero_measure_is_zero_everywhere() {
        let m = RadialMeasure::new(vec![(1.0, 0.0)], Tail { a: 0.0, b: 0.0, c: 0.0 }, 3).unwrap();
        assert_eq!(m.mass(2.0), 0.0);
        assert!(m.is_zero());
    }

    #[test]
    fn power_interpolation_is_exact_for_pure_powers() {
        let m = RadialMeasure::new(
            vec![(0.5, FOUR_PI_3 * 0.125), (1.0, FOUR_PI_3)],
            Tail { a: FOUR_PI_3, b: 0.0, c: 0.0 },
            3,
        )
        .unwrap();
        for r in [0.55, 0.7, 0.93] {
            assert!((m.mass(r) - FOUR_PI_3 * r.powi(3)).abs() < 1e-13);
        }
    }

    #[test]
    fn decreasing_mass_rejected() {
        let err = RadialMeasure::new(
            vec![(1.0, 2.0), (2.0, 1.0)],
            Tail { a: 1.0, b: 0.0, c: 0.0 },
            3,
        )
        .unwrap_err();
        assert!(matches!(err, ToolkitError::Invariant(_)));
    }

    #[test]
    fn tail_mismatch_rejected() {
        let err = RadialMeasure::new(
            vec![(1.0, 2.0)],
            Tail { a: 1.0, b: 0.0, c: 0.0 },
            3,
        )
        .unwrap_err();
        assert!(matches!(err, ToolkitError::Invariant(_)));
    }

    #[test]
    fn restrict_saturates_mass() {
        let m = Measure::Radial(unit_ball_lebesgue());
        let r = m.restrict_to_ball(0.5).unwrap();
        let expect = FOUR_PI_3 * 0.125;
        for radius in [0.5, 0.75, 1.0, 3.0] {
            assert!((r.ball_mass(radius).unwrap() - expect).abs() < 1e-12);
        }
        // Infinite sentinel leaves the measure unchanged.
        let id = m.restrict_to_ball(f64::INFINITY).unwrap();
        assert_eq!(id.ball_mass(0.3).unwrap(), m.ball_mass(0.3).unwrap());
    }

    #[test]
    fn scale_is_linear_in_mass() {
        let m = Measure::Radial(unit_ball_lebesgue());
        let s = m.scaled(2.0).unwrap();
        for r in [0.2, 0.5, 1.0, 4.0] {
            assert_eq!(s.ball_mass(r).unwrap(), 2.0 * m.ball_mass(r).unwrap());
        }
        assert!(m.scaled(0.0).is_err());
    }

    #[test]
    fn grid_measure_mass_and_domain_check() {
        let side = 20;
        let h = 0.1;
        let density = vec![0.0; side * side];
        let g = GridMeasure::new(density, side, h, 2).unwrap();
        assert_eq!(g.total_mass(), 0.0);
        assert_eq!(g.mass_in_ball(0.7).unwrap(), 0.0);
        assert!(g.mass_in_ball(5.0).is_err());
    }

    #[test]
    fn negative_density_rejected() {
        let err = GridMeasure::new(vec![-1.0; 4], 2, 0.1, 2).unwrap_err();
        assert!(matches!(err, ToolkitError::Invariant(_)));
    }
}
