//! Task documents, measure spec documents, and the batch dispatcher.
//!
//! Both document kinds are UTF-8 key-value text: one `key = value` pair per
//! line, `#` comments and blank lines ignored. Outputs are CSV/JSON files
//! with deterministic names `<task>.<label>.csv|json`; every file carries the
//! toolkit version and the SHA-256 of the input document.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Result, ToolkitError};
use crate::grid::{self, Domain, GridField, GridGeom, SolveConfig};
use crate::measure::{GridMeasure, Measure, OperatorSpec, RadialMeasure, Tail};
use crate::potentials::{self, RadialProfile};
use crate::radial::{self, Start, SublinearProblem};
use crate::verify;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the task document's output directory.
pub const OUTPUT_DIR_ENV: &str = "TOOLKIT_OUTPUT_DIR";

fn parse_err(key: &str, message: impl Into<String>) -> ToolkitError {
    ToolkitError::Parse { key: key.into(), message: message.into() }
}

/// Parses `key = value` lines; rejects duplicates and junk lines.
pub fn parse_key_values(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(
                &format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(parse_err(&format!("line {}", lineno + 1), "empty key"));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(parse_err(&key, "duplicate key"));
        }
    }
    Ok(map)
}

fn get_f64(map: &HashMap<String, String>, key: &str) -> Result<f64> {
    let raw = map.get(key).ok_or_else(|| parse_err(key, "missing required key"))?;
    raw.parse::<f64>().map_err(|e| parse_err(key, format!("not a number: {e}")))
}

fn get_f64_or(map: &HashMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw.parse::<f64>().map_err(|e| parse_err(key, format!("not a number: {e}"))),
    }
}

fn get_list(map: &HashMap<String, String>, key: &str) -> Result<Vec<f64>> {
    let raw = map.get(key).ok_or_else(|| parse_err(key, "missing required key"))?;
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err(key, format!("bad entry: {e}"))))
        .collect()
}

/// Row-major CSV of decimal floats; the grid side is inferred from the count.
pub fn parse_grid_csv(text: &str, n: u32) -> Result<(Vec<f64>, usize)> {
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for cell in line.split(',') {
            let v = cell.trim().parse::<f64>().map_err(|e| {
                parse_err("density_file", format!("line {}: bad float: {e}", lineno + 1))
            })?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(parse_err("density_file", "no data rows"));
    }
    let side = (values.len() as f64).powf(1.0 / n as f64).round() as usize;
    if side < 1 || side.pow(n) != values.len() {
        return Err(parse_err(
            "density_file",
            format!("{} cells is not a perfect {n}-th power", values.len()),
        ));
    }
    Ok((values, side))
}

const MEASURE_KEYS: &[&str] =
    &["kind", "n", "knots", "tail", "density_file", "spacing", "box_half_width"];

/// Parses a measure spec document. `density_file` paths resolve relative to
/// `base_dir`; pass None to forbid file references (pure-text parsing).
pub fn parse_measure_spec(text: &str, base_dir: Option<&Path>) -> Result<Measure> {
    let map = parse_key_values(text)?;
    for key in map.keys() {
        if !MEASURE_KEYS.contains(&key.as_str()) {
            return Err(parse_err(key, "unknown key in measure document"));
        }
    }
    let kind = map.get("kind").ok_or_else(|| parse_err("kind", "missing required key"))?;
    let n = get_f64(&map, "n")?;
    if n.fract() != 0.0 || !(2.0..=16.0).contains(&n) {
        return Err(parse_err("n", format!("dimension must be a small integer, got {n}")));
    }
    let n = n as u32;
    match kind.as_str() {
        "radial" => {
            let raw = map.get("knots").ok_or_else(|| parse_err("knots", "missing required key"))?;
            let mut knots = Vec::new();
            for part in raw.split(';') {
                let Some((r, m)) = part.split_once(',') else {
                    return Err(parse_err("knots", format!("expected `r,m`, got `{part}`")));
                };
                let r = r.trim().parse::<f64>().map_err(|e| parse_err("knots", e.to_string()))?;
                let m = m.trim().parse::<f64>().map_err(|e| parse_err("knots", e.to_string()))?;
                knots.push((r, m));
            }
            let tail = get_list(&map, "tail")?;
            if tail.len() != 3 {
                return Err(parse_err("tail", "expected `a,b,c`"));
            }
            let tail = Tail { a: tail[0], b: tail[1], c: tail[2] };
            Ok(Measure::Radial(RadialMeasure::new(knots, tail, n)?))
        }
        "grid" => {
            if !(n == 2 || n == 3) {
                return Err(parse_err("n", "grid measures need n in {2, 3}"));
            }
            let spacing = get_f64(&map, "spacing")?;
            let file = map
                .get("density_file")
                .ok_or_else(|| parse_err("density_file", "missing required key"))?;
            let base = base_dir
                .ok_or_else(|| parse_err("density_file", "file references not allowed here"))?;
            let text = fs::read_to_string(base.join(file))?;
            let (density, side) = parse_grid_csv(&text, n)?;
            let gm = GridMeasure::new(density, side, spacing, n)?;
            if let Some(raw) = map.get("box_half_width") {
                let l: f64 =
                    raw.parse().map_err(|e| parse_err("box_half_width", format!("{e}")))?;
                if (l - gm.half_width()).abs() > 1e-9 * l.abs().max(1.0) {
                    return Err(parse_err(
                        "box_half_width",
                        format!("inconsistent with side * spacing / 2 = {}", gm.half_width()),
                    ));
                }
            }
            Ok(Measure::Grid(gm))
        }
        other => Err(parse_err("kind", format!("unknown kind `{other}`"))),
    }
}

pub const TASKS: &[&str] = &[
    "wolff",
    "finiteness",
    "solve-radial",
    "sublinear-radial",
    "contraction",
    "solve-grid",
    "minimal-ladder",
    "sublinear-grid",
    "capacity",
    "verify-bilateral",
    "verify-uniqueness",
    "classify",
];

/// A parsed (but not yet validated against module preconditions) task.
#[derive(Debug)]
pub struct TaskDocument {
    pub task: String,
    pub params: HashMap<String, String>,
    pub base_dir: PathBuf,
    pub input_sha256: String,
}

impl TaskDocument {
    /// Pure-text parse; the base directory anchors referenced paths.
    pub fn parse(text: &str, base_dir: PathBuf) -> Result<TaskDocument> {
        let params = parse_key_values(text)?;
        let task = params
            .get("task")
            .ok_or_else(|| parse_err("task", "missing required key"))?
            .clone();
        if !TASKS.contains(&task.as_str()) {
            return Err(parse_err("task", format!("unknown task `{task}`")));
        }
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let input_sha256 = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Ok(TaskDocument { task, params, base_dir, input_sha256 })
    }

    pub fn load(path: &Path) -> Result<TaskDocument> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        TaskDocument::parse(&text, base)
    }

    fn measure(&self, key: &str) -> Result<Measure> {
        let rel = self
            .params
            .get(key)
            .ok_or_else(|| parse_err(key, "missing measure reference"))?;
        let path = self.base_dir.join(rel);
        let text = fs::read_to_string(&path)
            .map_err(|e| parse_err(key, format!("cannot read {}: {e}", path.display())))?;
        parse_measure_spec(&text, path.parent())
    }

    fn radial(&self, key: &str) -> Result<RadialMeasure> {
        match self.measure(key)? {
            Measure::Radial(m) => Ok(m),
            Measure::Grid(_) => Err(parse_err(key, "expected a radial measure")),
        }
    }

    fn grid(&self, key: &str) -> Result<GridMeasure> {
        match self.measure(key)? {
            Measure::Grid(m) => Ok(m),
            Measure::Radial(_) => Err(parse_err(key, "expected a grid measure")),
        }
    }

    /// `sigma` with `measure` accepted as an alias.
    fn sigma_key(&self) -> &'static str {
        if self.params.contains_key("sigma") { "sigma" } else { "measure" }
    }

    fn mesh(&self) -> Result<Vec<f64>> {
        let spec = match self.params.get("mesh") {
            None => return Ok(potentials::log_mesh(1e-2, 1e2, 81)),
            Some(s) => s,
        };
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err("mesh", "expected `lo,hi,count`"));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|e| parse_err("mesh", format!("{e}")))?;
        let hi: f64 = parts[1].trim().parse().map_err(|e| parse_err("mesh", format!("{e}")))?;
        let count: usize =
            parts[2].trim().parse().map_err(|e| parse_err("mesh", format!("{e}")))?;
        if !(lo > 0.0 && hi > lo && count >= 2) {
            return Err(parse_err("mesh", "need 0 < lo < hi and count >= 2"));
        }
        Ok(potentials::log_mesh(lo, hi, count))
    }

    fn solve_config(&self, domain: Domain) -> Result<SolveConfig> {
        let mut cfg = SolveConfig {
            epsilon_schedule: vec![1e-2, 1e-4, 1e-6],
            max_inner_iterations: 20_000,
            inner_tolerance: 1e-7,
            domain,
        };
        if let Some(raw) = self.params.get("epsilons") {
            cfg.epsilon_schedule = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err("epsilons", format!("{e}"))))
                .collect::<Result<_>>()?;
        }
        if let Some(raw) = self.params.get("max_iterations") {
            cfg.max_inner_iterations =
                raw.parse().map_err(|e| parse_err("max_iterations", format!("{e}")))?;
        }
        cfg.inner_tolerance = get_f64_or(&self.params, "inner_tolerance", cfg.inner_tolerance)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn domain(&self) -> Result<Domain> {
        if let Some(_) = self.params.get("domain_half_width") {
            Ok(Domain::Box { half_width: get_f64(&self.params, "domain_half_width")? })
        } else {
            Ok(Domain::Ball { radius: get_f64(&self.params, "domain_radius")? })
        }
    }

    fn output_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            return PathBuf::from(dir);
        }
        let rel = self.params.get("output").map(String::as_str).unwrap_or(".");
        self.base_dir.join(rel)
    }
}

fn zero_like(m: &RadialMeasure) -> RadialMeasure {
    RadialMeasure::new(vec![(m.knots()[0].0, 0.0)], Tail { a: 0.0, b: 0.0, c: 0.0 }, m.dim())
        .unwrap()
}

// ---------------------------------------------------------------------------
// Output rendering
// ---------------------------------------------------------------------------

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Outputs<'a> {
    doc: &'a TaskDocument,
    files: Vec<(String, String)>,
}

impl<'a> Outputs<'a> {
    fn new(doc: &'a TaskDocument) -> Outputs<'a> {
        Outputs { doc, files: Vec::new() }
    }

    fn meta_line(&self) -> String {
        format!("# toolkit {VERSION} input_sha256={}", self.doc.input_sha256)
    }

    fn csv(&mut self, label: &str, header: &str, rows: Vec<String>) {
        let mut body = format!("{}\n# {header}\n", self.meta_line());
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.files.push((format!("{}.{label}.csv", self.doc.task), body));
    }

    fn json<T: Serialize>(&mut self, label: &str, report: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'b, T: Serialize> {
            toolkit_version: &'static str,
            input_sha256: &'b str,
            report: &'b T,
        }
        let body = serde_json::to_string_pretty(&Envelope {
            toolkit_version: VERSION,
            input_sha256: &self.doc.input_sha256,
            report,
        })
        .map_err(|e| ToolkitError::Invariant(format!("serialization failed: {e}")))?;
        self.files
            .push((format!("{}.{label}.json", self.doc.task), body + "\n"));
        Ok(())
    }

    fn profile_csv(&mut self, label: &str, prof: &RadialProfile) {
        let rows = prof
            .radii()
            .iter()
            .zip(prof.values())
            .map(|(r, v)| format!("{},{}", fmt17(*r), fmt17(*v)))
            .collect();
        self.csv(label, &format!("columns=r,value label={}", prof.label), rows);
    }

    fn field_csv(&mut self, label: &str, field: &GridField) {
        let g = field.geom();
        let header = format!(
            "n={} h={} L={} label={}",
            g.dim,
            fmt17(g.h),
            fmt17(g.half_width()),
            field.label
        );
        let rows = field
            .values()
            .chunks(g.side)
            .map(|row| row.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","))
            .collect();
        self.csv(label, &header, rows);
    }

    fn write(self) -> Result<Vec<PathBuf>> {
        let dir = self.doc.output_dir();
        fs::create_dir_all(&dir)?;
        let mut written = Vec::new();
        for (name, body) in self.files {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CapacityReport {
    p: f64,
    obstacle_radius: f64,
    capacity: f64,
}

#[derive(Serialize)]
struct LadderSummary {
    k_list: Vec<f64>,
    max_decrease: Vec<f64>,
    delta_h: f64,
}

/// Runs the task and writes its artifact files; returns the written paths.
pub fn run_task(doc: &TaskDocument) -> Result<Vec<PathBuf>> {
    let mut out = Outputs::new(doc);
    match doc.task.as_str() {
        "wolff" => {
            let p = get_f64(&doc.params, "p")?;
            let mesh = doc.mesh()?;
            match doc.measure(doc.sigma_key())? {
                Measure::Radial(m) => {
                    let prof = potentials::wolff_radial_profile(&m, p, m.dim(), &mesh)?;
                    out.profile_csv("profile", &prof);
                }
                Measure::Grid(m) => {
                    // Radial samples along the +x axis, clipped to the box.
                    let half = m.half_width();
                    let meas = Measure::Grid(m.clone());
                    let rows = mesh
                        .iter()
                        .filter(|r| **r <= half)
                        .map(|&r| {
                            let v = potentials::wolff_potential(&meas, p, m.dim(), [r, 0.0, 0.0])?
                                .unwrap_finite();
                            Ok(format!("{},{}", fmt17(r), fmt17(v)))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    out.csv("profile", "columns=r,value label=wolff x-axis", rows);
                }
            }
        }
        "finiteness" => {
            let p = get_f64(&doc.params, "p")?;
            let m = doc.radial(doc.sigma_key())?;
            let rep = potentials::check_finiteness(&m, p, m.dim())?;
            out.json("report", &rep)?;
        }
        "solve-radial" => {
            let p = get_f64(&doc.params, "p")?;
            let m = doc.radial(doc.sigma_key())?;
            let mesh = doc.mesh()?;
            let prof = radial::solve_entire_radial(&m, p, m.dim(), &mesh)?;
            out.profile_csv("profile", &prof);
        }
        "sublinear-radial" => {
            let p = get_f64(&doc.params, "p")?;
            let q = get_f64(&doc.params, "q")?;
            let sigma = doc.radial(doc.sigma_key())?;
            let mu = if doc.params.contains_key("mu") {
                doc.radial("mu")?
            } else {
                zero_like(&sigma)
            };
            let prob = SublinearProblem::new(sigma, mu, p, q)?;
            let mesh = doc.mesh()?;
            let start = match doc.params.get("start").map(String::as_str) {
                None | Some("zero") => Start::Zero,
                Some("wolff-seed") => {
                    Start::WolffSeed { c0: get_f64_or(&doc.params, "seed_c0", 1.0)? }
                }
                Some(other) => {
                    return Err(parse_err("start", format!("unknown start `{other}`")))
                }
            };
            let (u, trace) = radial::sublinear_fixed_point_radial(&prob, &mesh, start)?;
            out.profile_csv("profile", &u);
            out.json("trace", &trace)?;
        }
        "contraction" => {
            let p = get_f64(&doc.params, "p")?;
            let q = get_f64(&doc.params, "q")?;
            let c0 = get_f64_or(&doc.params, "c0", 10.0)?;
            let sigma = doc.radial(doc.sigma_key())?;
            let mu = if doc.params.contains_key("mu") {
                doc.radial("mu")?
            } else {
                zero_like(&sigma)
            };
            let start = if mu.is_zero() { Start::WolffSeed { c0: 1.0 } } else { Start::Zero };
            let prob = SublinearProblem::new(sigma, mu, p, q)?;
            let mesh = doc.mesh()?;
            let (u, _) = radial::sublinear_fixed_point_radial(&prob, &mesh, start)?;
            let res = radial::contraction_experiment(&prob, &mesh, c0, &u)?;
            let rows = res
                .trace
                .rows
                .iter()
                .map(|r| {
                    format!("{},{},{}", r.j, fmt17(r.sup_value), fmt17(r.sup_ratio))
                })
                .collect();
            out.csv("rates", "columns=j,sup_value,rho", rows);
            out.json("trace", &res.trace)?;
        }
        "solve-grid" => {
            let p = get_f64(&doc.params, "p")?;
            let nu = doc.grid(doc.sigma_key())?;
            let op = OperatorSpec::p_laplace(p)?;
            let cfg = doc.solve_config(doc.domain()?)?;
            let u = grid::solve_dirichlet_grid(&nu, &op, &cfg)?;
            out.field_csv("field", &u);
        }
        "minimal-ladder" => {
            let p = get_f64(&doc.params, "p")?;
            let sigma = doc.grid(doc.sigma_key())?;
            let k_list = get_list(&doc.params, "k_list")?;
            let op = OperatorSpec::p_laplace(p)?;
            // The per-k domain is set inside the ladder; the config domain is
            // only a placeholder validated against the largest ball.
            let cfg =
                doc.solve_config(Domain::Ball { radius: *k_list.last().unwrap_or(&1.0) })?;
            let rep = grid::minimal_solution_grid(&sigma, &op, &k_list, &cfg)?;
            for (i, field) in rep.fields.iter().enumerate() {
                out.field_csv(&format!("k{i}"), field);
            }
            out.json(
                "report",
                &LadderSummary {
                    k_list,
                    max_decrease: rep.max_decrease.clone(),
                    delta_h: rep.delta_h,
                },
            )?;
        }
        "sublinear-grid" => {
            let p = get_f64(&doc.params, "p")?;
            let q = get_f64(&doc.params, "q")?;
            let sigma = doc.grid(doc.sigma_key())?;
            let mu = if doc.params.contains_key("mu") {
                doc.grid("mu")?
            } else {
                GridMeasure::new(
                    vec![0.0; sigma.density().len()],
                    sigma.side(),
                    sigma.spacing(),
                    sigma.dim(),
                )?
            };
            let op = OperatorSpec::p_laplace(p)?;
            let cfg = doc.solve_config(doc.domain()?)?;
            let (u, trace) = grid::sublinear_minimal_grid(&sigma, &mu, q, &op, &cfg)?;
            out.field_csv("field", &u);
            out.json("trace", &trace)?;
        }
        "capacity" => {
            let p = get_f64(&doc.params, "p")?;
            let n = get_f64(&doc.params, "n")? as u32;
            let side = get_f64(&doc.params, "side")? as usize;
            let spacing = get_f64(&doc.params, "spacing")?;
            let obstacle = get_f64(&doc.params, "obstacle_radius")?;
            let geom = GridGeom::new(side, spacing, n)?;
            let op = OperatorSpec::p_laplace(p)?;
            let cfg = doc.solve_config(doc.domain()?)?;
            let cells = geom.cells_covering_ball(obstacle);
            let capacity = grid::p_capacity(&cells, &geom, &op, &cfg)?;
            out.json("report", &CapacityReport { p, obstacle_radius: obstacle, capacity })?;
        }
        "verify-bilateral" => {
            let p = get_f64(&doc.params, "p")?;
            let m = doc.radial(doc.sigma_key())?;
            let mesh = doc.mesh()?;
            let u = radial::solve_entire_radial(&m, p, m.dim(), &mesh)?;
            let rep = verify::bilateral_ratio_report(&u, &m, p, m.dim())?;
            out.json("report", &rep)?;
        }
        "verify-uniqueness" => {
            let p = get_f64(&doc.params, "p")?;
            let q = get_f64(&doc.params, "q")?;
            let c0_list = get_list(&doc.params, "c0_list")?;
            let sigma = doc.radial(doc.sigma_key())?;
            let mu = if doc.params.contains_key("mu") {
                doc.radial("mu")?
            } else {
                zero_like(&sigma)
            };
            let prob = SublinearProblem::new(sigma, mu, p, q)?;
            let mesh = doc.mesh()?;
            let summary = verify::uniqueness_battery(&prob, &mesh, &c0_list)?;
            let rows = summary
                .entries
                .iter()
                .flat_map(|e| {
                    e.rows.iter().map(|r| {
                        format!("{},{},{},{}", fmt17(r.c0), r.j, fmt17(r.ln_rho), fmt17(r.bound))
                    })
                })
                .collect();
            out.csv("rates", "columns=C0,j,ln_rho,bound", rows);
            out.json("report", &summary)?;
        }
        "classify" => {
            let p = get_f64(&doc.params, "p")?;
            let m = doc.radial(doc.sigma_key())?;
            let mesh = doc.mesh()?;
            let u = radial::solve_entire_radial(&m, p, m.dim(), &mesh)?;
            let rep = verify::reachability_classifier(
                verify::Solution::Radial(&u),
                &Measure::Radial(m.clone()),
                p,
                m.dim(),
            )?;
            out.json("report", &rep)?;
        }
        other => return Err(parse_err("task", format!("unknown task `{other}`"))),
    }
    out.write()
}

/// Writes `<task>.error.json` describing a numerical failure.
pub fn write_error_file(doc: &TaskDocument, err: &ToolkitError) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct ErrorReport<'a> {
        toolkit_version: &'static str,
        input_sha256: &'a str,
        task: &'a str,
        error: String,
        exit_status: i32,
    }
    let dir = doc.output_dir();
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.error.json", doc.task));
    let body = serde_json::to_string_pretty(&ErrorReport {
        toolkit_version: VERSION,
        input_sha256: &doc.input_sha256,
        task: &doc.task,
        error: err.to_string(),
        exit_status: err.exit_status(),
    })
    .map_err(|e| ToolkitError::Invariant(format!("serialization failed: {e}")))?;
    fs::write(&path, body + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_doc_round_trips_the_unit_ball() {
        let text = "kind = radial\nn = 3\nknots = 1,4.1887902047863905\n\
                    tail = 4.1887902047863905,0,0\n";
        let m = parse_measure_spec(text, None).unwrap();
        let got = m.ball_mass(0.5).unwrap();
        let expect = 4.1887902047863905f64 * 0.125;
        assert!((got - expect).abs() < 1e-12);
        // Zero measure.
        let z = parse_measure_spec("kind = radial\nn = 3\nknots = 1,0\ntail = 0,0,0\n", None)
            .unwrap();
        assert_eq!(z.ball_mass(2.0).unwrap(), 0.0);
    }

    #[test]
    fn measure_doc_errors_name_the_key() {
        let bad = [
            ("kind = radial\nn = 3\ntail = 0,0,0\n", "knots"),
            ("kind = radial\nn = 3\nknots = 1,1;0.5,2\ntail = 2,0,0\n", "knot"),
            ("kind = nope\nn = 3\n", "kind"),
            ("kind = radial\nn = 3\nknots = 1,1\ntail = 1,0\n", "tail"),
            ("kind = radial\nn = 3\nknots = 1,1\ntail = 1,0,0\nbogus = 1\n", "bogus"),
            ("kind = radial\nn = x\nknots = 1,1\ntail = 1,0,0\n", "n"),
        ];
        for (text, want) in bad {
            let err = parse_measure_spec(text, None).unwrap_err().to_string();
            assert!(err.contains(want), "`{text}` -> `{err}` (wanted `{want}`)");
        }
    }

    #[test]
    fn grid_csv_zero_measure() {
        let text = "0,0,0\n0,0,0\n0,0,0\n";
        let (vals, side) = parse_grid_csv(text, 2).unwrap();
        assert_eq!(side, 3);
        assert!(vals.iter().all(|v| *v == 0.0));
        // Count must be a perfect power.
        assert!(parse_grid_csv("0,0,0,0,0", 2).is_err());
        assert!(parse_grid_csv("", 2).is_err());
        assert!(parse_grid_csv("0,zzz\n0,0", 2).is_err());
    }

    #[test]
    fn task_doc_rejects_unknown_tasks() {
        let err = TaskDocument::parse("task = juggle\n", PathBuf::from("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("task"));
        assert!(TaskDocument::parse("p = 2\n", PathBuf::from(".")).is_err());
        let doc = TaskDocument::parse("task = wolff\np = 2\n", PathBuf::from(".")).unwrap();
        assert_eq!(doc.task, "wolff");
        assert_eq!(doc.input_sha256.len(), 64);
    }

    #[test]
    fn key_value_parser_rejects_junk() {
        assert!(parse_key_values("a = 1\nb = 2\n# comment\n\n").is_ok());
        assert!(parse_key_values("a = 1\na = 2\n").is_err());
        assert!(parse_key_values("just words\n").is_err());
        assert!(parse_key_values("= 3\n").is_err());
    }
}
