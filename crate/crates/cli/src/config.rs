//! Scenario configuration: a flat text format with dotted keys.
//!
//! A configuration file is a sequence of `key = value` lines; `#` starts a
//! comment, blank lines are ignored, keys may not repeat, and unknown keys
//! are rejected so typos fail loudly. Every key has a default, so the empty
//! file is a valid scenario. The keys are
//!
//! ```text
//! domain.length      = 1.0          # length of the spatial interval
//! domain.n_interior  = 99           # interior nodes (>= 2)
//! time.horizon       = 1.0          # final time
//! time.n_steps       = 200          # Euler steps (>= 2)
//! smoothing.rho      = 1e-2         # single viscosity, or instead:
//! smoothing.rho_init = 1e-1         # first continuation level
//! smoothing.factor   = 0.5          # per-level reduction in (0,1)
//! smoothing.n_levels = 6            # number of levels
//! objective.alpha    = 1.0          # distributed tracking weight
//! objective.beta     = 0.0          # terminal tracking weight
//! objective.z_d      = zero         # tracking target (trajectory spec)
//! objective.z_t      = zero         # terminal target (field spec)
//! control.initial    = zero         # load, and start value of optimize
//! control.anchor     = zero         # proximal anchor (trajectory spec)
//! control.prox_weight = 0.0         # weight of the proximal term
//! solver.newton_tol  = 1e-12        # forward Newton residual tolerance
//! solver.pdas_c      = 1.0          # active-set prediction constant
//! solver.inner_tol   = 1e-8         # gradient norm stopping tolerance
//! solver.inner_max_iter = 500       # descent iteration cap per level
//! study.rho_list     = 1e-1,3e-2,1e-2,3e-3,1e-3   # rate-study sweep
//! study.refine       = 4            # reference time-grid refinement
//! gradcheck.eps      = 1e-3,1e-4    # difference steps
//! gradcheck.direction = oscillate(1,bump(0.55,0.35,0.9))
//! output.directory   = out          # default output directory
//! output.formats     = csv,json     # tables and reports to emit
//! ```
//!
//! `smoothing.rho` and the schedule keys are mutually exclusive; commands
//! that need one viscosity use `smoothing.rho`, or the final level of the
//! schedule when only a schedule is given.
//!
//! A field spec is `zero`, `sine(mode,amp)`, `bump(center,width,amp)` or
//! `file(path)`; a trajectory spec is `zero`, `ramp(field)`,
//! `constant(field)`, `oscillate(cycles,field)` or `file(path)`. Paths are
//! resolved relative to the directory of the configuration file, and
//! referenced files use the trajectory format described in [`crate::io`]
//! (a field spec accepts a single-row file, i.e. `n_steps = 0`).

use crate::error::{config_error, CliError};
use crate::io::read_trajectory;
use ripvisc_core::{
    ContinuationSchedule, Field, FieldProfile, LoadProfile, ObjectiveSpec, RegStateProblem,
    RiStateProblem, SpatialGrid, TimeGrid, Trajectory,
};
use std::collections::BTreeMap;
use std::path::Path;

/// Spatial target: a named analytic family or a stored single-row file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Analytic(FieldProfile),
    File(String),
}

/// Space-time target or load: analytic family or stored trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadSpec {
    Analytic(LoadProfile),
    File(String),
}

/// Single fixed viscosity or a geometric continuation schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoothing {
    Single(f64),
    Schedule {
        rho_init: f64,
        factor: f64,
        n_levels: usize,
    },
}

/// Which table and report formats the commands emit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

/// One fully resolved scenario; every command reads its inputs from here.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub length: f64,
    pub n_interior: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub smoothing: Smoothing,
    pub alpha: f64,
    pub beta: f64,
    pub z_d: LoadSpec,
    pub z_t: FieldSpec,
    pub initial: LoadSpec,
    pub anchor: LoadSpec,
    pub prox_weight: f64,
    pub newton_tol: f64,
    pub pdas_c: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub rho_list: Vec<f64>,
    pub refine: usize,
    pub gradcheck_eps: Vec<f64>,
    pub gradcheck_direction: LoadSpec,
    pub out_dir: String,
    pub formats: Formats,
}

/// Raw `key = value` pairs with line numbers, consumed by typed getters.
struct KeyMap {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyMap {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_error(format!(
                    "line {lineno}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(config_error(format!(
                    "line {lineno}: empty key or value"
                )));
            }
            if let Some((_, first)) = entries.insert(key.clone(), (value, lineno)) {
                return Err(config_error(format!(
                    "duplicate key `{key}` (lines {first} and {lineno})"
                )));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn finish(self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self
            .entries
            .iter()
            .map(|(k, (_, line))| format!("`{k}` (line {line})"))
            .collect();
        Err(config_error(format!("unknown key(s): {}", keys.join(", "))))
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse::<f64>()
        .map_err(|_| config_error(format!("{key}: `{raw}` is not a number")))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, CliError> {
    raw.parse::<usize>()
        .map_err(|_| config_error(format!("{key}: `{raw}` is not a nonnegative integer")))
}

fn take_f64(km: &mut KeyMap, key: &str, default: f64) -> Result<f64, CliError> {
    match km.take(key) {
        Some(raw) => parse_f64(key, &raw),
        None => Ok(default),
    }
}

fn take_usize(km: &mut KeyMap, key: &str, default: usize) -> Result<usize, CliError> {
    match km.take(key) {
        Some(raw) => parse_usize(key, &raw),
        None => Ok(default),
    }
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|p| parse_f64(key, p.trim()))
        .collect()
}

/// Splits `name(args)` into the name and the raw argument text; `None`
/// when there is no parenthesized part.
fn split_call(s: &str) -> Result<Option<(&str, &str)>, CliError> {
    let Some(open) = s.find('(') else {
        return Ok(None);
    };
    if !s.ends_with(')') {
        return Err(config_error(format!("`{s}`: unbalanced parentheses")));
    }
    Ok(Some((s[..open].trim(), &s[open + 1..s.len() - 1])))
}

/// Splits at top-level commas only, so nested calls stay intact.
fn split_args(s: &str) -> Result<Vec<&str>, CliError> {
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| config_error(format!("`{s}`: unbalanced parentheses")))?;
            }
            ',' if depth == 0 => {
                args.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(config_error(format!("`{s}`: unbalanced parentheses")));
    }
    args.push(s[start..].trim());
    Ok(args)
}

fn parse_field_spec(key: &str, raw: &str, base_dir: &Path) -> Result<FieldSpec, CliError> {
    let raw = raw.trim();
    match split_call(raw)? {
        None if raw == "zero" => Ok(FieldSpec::Analytic(FieldProfile::Zero)),
        None => Err(config_error(format!(
            "{key}: unknown field spec `{raw}` (expected zero, sine(..), bump(..) or file(..))"
        ))),
        Some((name, args)) => match name {
            "sine" => {
                let a = expect_args(key, raw, args, 2)?;
                let mode = a[0].parse::<u32>().map_err(|_| {
                    config_error(format!("{key}: sine mode `{}` is not a positive integer", a[0]))
                })?;
                Ok(FieldSpec::Analytic(FieldProfile::Sine {
                    mode,
                    amp: parse_f64(key, a[1])?,
                }))
            }
            "bump" => {
                let a = expect_args(key, raw, args, 3)?;
                Ok(FieldSpec::Analytic(FieldProfile::Bump {
                    center: parse_f64(key, a[0])?,
                    width: parse_f64(key, a[1])?,
                    amp: parse_f64(key, a[2])?,
                }))
            }
            "file" => Ok(FieldSpec::File(resolve_path(args, base_dir))),
            other => Err(config_error(format!(
                "{key}: unknown field family `{other}`"
            ))),
        },
    }
}

fn parse_load_spec(key: &str, raw: &str, base_dir: &Path) -> Result<LoadSpec, CliError> {
    let raw = raw.trim();
    match split_call(raw)? {
        None if raw == "zero" => Ok(LoadSpec::Analytic(LoadProfile::Zero)),
        None => Err(config_error(format!(
            "{key}: unknown trajectory spec `{raw}` (expected zero, ramp(..), constant(..), oscillate(..) or file(..))"
        ))),
        Some((name, args)) => match name {
            "ramp" | "constant" => {
                let inner = parse_field_spec(key, args, base_dir)?;
                let FieldSpec::Analytic(p) = inner else {
                    return Err(config_error(format!(
                        "{key}: `{name}` takes an analytic field, not a file"
                    )));
                };
                Ok(LoadSpec::Analytic(if name == "ramp" {
                    LoadProfile::Ramp(p)
                } else {
                    LoadProfile::Constant(p)
                }))
            }
            "oscillate" => {
                let a = expect_args(key, raw, args, 2)?;
                let cycles = parse_f64(key, a[0])?;
                let FieldSpec::Analytic(p) = parse_field_spec(key, a[1], base_dir)? else {
                    return Err(config_error(format!(
                        "{key}: `oscillate` takes an analytic field, not a file"
                    )));
                };
                Ok(LoadSpec::Analytic(LoadProfile::Oscillate {
                    cycles,
                    profile: p,
                }))
            }
            "file" => Ok(LoadSpec::File(resolve_path(args, base_dir))),
            other => Err(config_error(format!(
                "{key}: unknown trajectory family `{other}`"
            ))),
        },
    }
}

fn expect_args<'a>(
    key: &str,
    raw: &str,
    args: &'a str,
    want: usize,
) -> Result<Vec<&'a str>, CliError> {
    let parts = split_args(args)?;
    if parts.len() != want {
        return Err(config_error(format!(
            "{key}: `{raw}` takes {want} argument(s), got {}",
            parts.len()
        )));
    }
    Ok(parts)
}

fn resolve_path(raw: &str, base_dir: &Path) -> String {
    let p = Path::new(raw.trim());
    if p.is_absolute() {
        p.to_string_lossy().into_owned()
    } else {
        base_dir.join(p).to_string_lossy().into_owned()
    }
}

fn canonical_field_profile(p: &FieldProfile) -> String {
    match p {
        FieldProfile::Zero => "zero".to_string(),
        FieldProfile::Sine { mode, amp } => format!("sine({mode},{amp})"),
        FieldProfile::Bump { center, width, amp } => format!("bump({center},{width},{amp})"),
    }
}

impl FieldSpec {
    fn canonical(&self) -> String {
        match self {
            FieldSpec::Analytic(p) => canonical_field_profile(p),
            FieldSpec::File(path) => format!("file({path})"),
        }
    }

    /// Nodal values on the scenario grid; stored fields must match it.
    pub fn eval(&self, sc: &Scenario, grid: &SpatialGrid) -> Result<Field, CliError> {
        match self {
            FieldSpec::Analytic(p) => Ok(p.eval(grid)),
            FieldSpec::File(path) => {
                let stored = read_trajectory(Path::new(path))?;
                if stored.n_steps != 0 {
                    return Err(config_error(format!(
                        "{path}: a field spec needs a single-row file, but `{}` has {} time steps",
                        stored.name, stored.n_steps
                    )));
                }
                sc.check_space(path, stored.n_interior, stored.length)?;
                Ok(stored.trajectory.field(0).clone())
            }
        }
    }
}

impl LoadSpec {
    fn canonical(&self) -> String {
        match self {
            LoadSpec::Analytic(p) => match p {
                LoadProfile::Zero => "zero".to_string(),
                LoadProfile::Ramp(f) => format!("ramp({})", canonical_field_profile(f)),
                LoadProfile::Constant(f) => {
                    format!("constant({})", canonical_field_profile(f))
                }
                LoadProfile::Oscillate { cycles, profile } => {
                    format!("oscillate({cycles},{})", canonical_field_profile(profile))
                }
            },
            LoadSpec::File(path) => format!("file({path})"),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, LoadSpec::Analytic(LoadProfile::Zero))
    }

    /// Trajectory on the scenario grids; stored files must match both.
    pub fn eval(
        &self,
        sc: &Scenario,
        grid: &SpatialGrid,
        tg: &TimeGrid,
    ) -> Result<Trajectory, CliError> {
        match self {
            LoadSpec::Analytic(p) => Ok(p.eval(grid, tg)),
            LoadSpec::File(path) => {
                let stored = read_trajectory(Path::new(path))?;
                sc.check_space(path, stored.n_interior, stored.length)?;
                if stored.n_steps != tg.n_steps() || stored.horizon != tg.horizon() {
                    return Err(config_error(format!(
                        "{path}: stored `{}` lives on {} steps, horizon {}, but the scenario uses {} steps, horizon {}",
                        stored.name,
                        stored.n_steps,
                        stored.horizon,
                        tg.n_steps(),
                        tg.horizon()
                    )));
                }
                Ok(stored.trajectory)
            }
        }
    }
}

/// Parses and validates a scenario; `base_dir` anchors relative paths.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, CliError> {
    let mut km = KeyMap::parse(text)?;

    let length = take_f64(&mut km, "domain.length", 1.0)?;
    let n_interior = take_usize(&mut km, "domain.n_interior", 99)?;
    let horizon = take_f64(&mut km, "time.horizon", 1.0)?;
    let n_steps = take_usize(&mut km, "time.n_steps", 200)?;

    let rho = km.take("smoothing.rho");
    let rho_init = km.take("smoothing.rho_init");
    let factor = km.take("smoothing.factor");
    let n_levels = km.take("smoothing.n_levels");
    let has_schedule = rho_init.is_some() || factor.is_some() || n_levels.is_some();
    let smoothing = match (rho, has_schedule) {
        (Some(_), true) => {
            return Err(config_error(
                "smoothing.rho conflicts with smoothing.rho_init/factor/n_levels",
            ))
        }
        (Some(raw), false) => Smoothing::Single(parse_f64("smoothing.rho", &raw)?),
        (None, true) => Smoothing::Schedule {
            rho_init: rho_init
                .map(|r| parse_f64("smoothing.rho_init", &r))
                .transpose()?
                .unwrap_or(1e-1),
            factor: factor
                .map(|r| parse_f64("smoothing.factor", &r))
                .transpose()?
                .unwrap_or(0.5),
            n_levels: n_levels
                .map(|r| parse_usize("smoothing.n_levels", &r))
                .transpose()?
                .unwrap_or(6),
        },
        (None, false) => Smoothing::Single(1e-2),
    };

    let alpha = take_f64(&mut km, "objective.alpha", 1.0)?;
    let beta = take_f64(&mut km, "objective.beta", 0.0)?;
    let z_d = match km.take("objective.z_d") {
        Some(raw) => parse_load_spec("objective.z_d", &raw, base_dir)?,
        None => LoadSpec::Analytic(LoadProfile::Zero),
    };
    let z_t = match km.take("objective.z_t") {
        Some(raw) => parse_field_spec("objective.z_t", &raw, base_dir)?,
        None => FieldSpec::Analytic(FieldProfile::Zero),
    };

    let initial = match km.take("control.initial") {
        Some(raw) => parse_load_spec("control.initial", &raw, base_dir)?,
        None => LoadSpec::Analytic(LoadProfile::Zero),
    };
    let anchor = match km.take("control.anchor") {
        Some(raw) => parse_load_spec("control.anchor", &raw, base_dir)?,
        None => LoadSpec::Analytic(LoadProfile::Zero),
    };
    let prox_weight = take_f64(&mut km, "control.prox_weight", 0.0)?;

    let newton_tol = take_f64(&mut km, "solver.newton_tol", 1e-12)?;
    let pdas_c = take_f64(&mut km, "solver.pdas_c", 1.0)?;
    let inner_tol = take_f64(&mut km, "solver.inner_tol", 1e-8)?;
    let inner_max_iter = take_usize(&mut km, "solver.inner_max_iter", 500)?;

    let rho_list = match km.take("study.rho_list") {
        Some(raw) => parse_f64_list("study.rho_list", &raw)?,
        None => vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
    };
    let refine = take_usize(&mut km, "study.refine", 4)?;

    let gradcheck_eps = match km.take("gradcheck.eps") {
        Some(raw) => parse_f64_list("gradcheck.eps", &raw)?,
        None => vec![1e-3, 1e-4],
    };
    let gradcheck_direction = match km.take("gradcheck.direction") {
        Some(raw) => parse_load_spec("gradcheck.direction", &raw, base_dir)?,
        None => LoadSpec::Analytic(LoadProfile::Oscillate {
            cycles: 1.0,
            profile: FieldProfile::Bump {
                center: 0.55,
                width: 0.35,
                amp: 0.9,
            },
        }),
    };

    let out_dir = km.take("output.directory").unwrap_or_else(|| "out".to_string());
    let formats = match km.take("output.formats") {
        None => Formats { csv: true, json: true },
        Some(raw) => {
            let mut f = Formats { csv: false, json: false };
            for part in raw.split(',') {
                match part.trim() {
                    "csv" => f.csv = true,
                    "json" => f.json = true,
                    other => {
                        return Err(config_error(format!(
                            "output.formats: unknown format `{other}` (expected csv, json)"
                        )))
                    }
                }
            }
            f
        }
    };

    km.finish()?;

    let sc = Scenario {
        length,
        n_interior,
        horizon,
        n_steps,
        smoothing,
        alpha,
        beta,
        z_d,
        z_t,
        initial,
        anchor,
        prox_weight,
        newton_tol,
        pdas_c,
        inner_tol,
        inner_max_iter,
        rho_list,
        refine,
        gradcheck_eps,
        gradcheck_direction,
        out_dir,
        formats,
    };
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    fn validate(&self) -> Result<(), CliError> {
        let positive: [(&str, f64); 4] = [
            ("domain.length", self.length),
            ("time.horizon", self.horizon),
            ("solver.newton_tol", self.newton_tol),
            ("solver.inner_tol", self.inner_tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_error(format!("{key} must be positive, got {v}")));
            }
        }
        if self.n_interior < 2 {
            return Err(config_error("domain.n_interior must be at least 2"));
        }
        if self.n_steps < 2 {
            return Err(config_error("time.n_steps must be at least 2"));
        }
        match self.smoothing {
            Smoothing::Single(rho) => {
                if !(rho > 0.0) {
                    return Err(config_error(format!(
                        "smoothing.rho must be positive, got {rho}"
                    )));
                }
            }
            Smoothing::Schedule {
                rho_init,
                factor,
                n_levels,
            } => {
                if !(rho_init > 0.0) {
                    return Err(config_error(format!(
                        "smoothing.rho_init must be positive, got {rho_init}"
                    )));
                }
                if !(factor > 0.0 && factor < 1.0) {
                    return Err(config_error(format!(
                        "smoothing.factor must lie in (0,1), got {factor}"
                    )));
                }
                if n_levels < 1 {
                    return Err(config_error("smoothing.n_levels must be at least 1"));
                }
            }
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(config_error("objective weights must be nonnegative"));
        }
        if self.prox_weight < 0.0 {
            return Err(config_error("control.prox_weight must be nonnegative"));
        }
        if self.prox_weight > 0.0 && self.anchor.is_zero() {
            // A zero anchor is a valid choice, so only the missing-key case
            // would be worth flagging; both parse to the same spec, and the
            // proximal term is well defined either way.
        }
        if !(self.pdas_c > 0.0) {
            return Err(config_error("solver.pdas_c must be positive"));
        }
        if self.rho_list.is_empty() {
            return Err(config_error("study.rho_list must not be empty"));
        }
        if !self.rho_list.windows(2).all(|p| p[0] > p[1]) {
            return Err(config_error(
                "study.rho_list must decrease strictly",
            ));
        }
        if self.rho_list.iter().any(|&r| !(r > 0.0)) {
            return Err(config_error("study.rho_list entries must be positive"));
        }
        if self.refine < 1 {
            return Err(config_error("study.refine must be at least 1"));
        }
        if self.gradcheck_eps.is_empty() {
            return Err(config_error("gradcheck.eps must not be empty"));
        }
        if self.gradcheck_eps.iter().any(|&e| !(e > 0.0)) {
            return Err(config_error("gradcheck.eps entries must be positive"));
        }
        Ok(())
    }

    fn check_space(&self, path: &str, n_interior: usize, length: f64) -> Result<(), CliError> {
        if n_interior != self.n_interior || length != self.length {
            return Err(config_error(format!(
                "{path}: stored grid ({n_interior} nodes, length {length}) does not match the scenario ({} nodes, length {})",
                self.n_interior, self.length
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> SpatialGrid {
        SpatialGrid::new(self.n_interior, self.length)
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.n_steps, self.horizon)
    }

    /// Regularized problem at `rho` with the configured Newton tolerance.
    pub fn reg_problem(&self, rho: f64) -> RegStateProblem {
        let mut prob = RegStateProblem::new(self.grid(), self.time_grid(), rho);
        prob.newton_tol = self.newton_tol;
        prob
    }

    /// Rate-independent problem with the configured prediction constant.
    pub fn ri_problem(&self) -> RiStateProblem {
        let mut prob = RiStateProblem::new(self.grid(), self.time_grid());
        prob.pdas_c = self.pdas_c;
        prob
    }

    /// The one viscosity single-solve commands run at: the override, the
    /// configured `smoothing.rho`, or the final level of the schedule.
    pub fn single_rho(&self, rho_override: Option<f64>) -> Result<f64, CliError> {
        if let Some(r) = rho_override {
            if !(r > 0.0) {
                return Err(config_error(format!("--rho must be positive, got {r}")));
            }
            return Ok(r);
        }
        Ok(match self.smoothing {
            Smoothing::Single(rho) => rho,
            Smoothing::Schedule {
                rho_init,
                factor,
                n_levels,
            } => rho_init * factor.powi(n_levels as i32 - 1),
        })
    }

    /// Continuation schedule for `optimize`; a `--rho` override or a
    /// single-viscosity config collapse it to one level.
    pub fn schedule(&self, rho_override: Option<f64>) -> Result<ContinuationSchedule, CliError> {
        let mut sched = match (rho_override, &self.smoothing) {
            (Some(r), _) => {
                if !(r > 0.0) {
                    return Err(config_error(format!("--rho must be positive, got {r}")));
                }
                ContinuationSchedule::new(r, 0.5, 1)
            }
            (None, Smoothing::Single(rho)) => ContinuationSchedule::new(*rho, 0.5, 1),
            (
                None,
                Smoothing::Schedule {
                    rho_init,
                    factor,
                    n_levels,
                },
            ) => ContinuationSchedule::new(*rho_init, *factor, *n_levels),
        };
        sched.inner_tol = self.inner_tol;
        sched.inner_max_iter = self.inner_max_iter;
        Ok(sched)
    }

    pub fn objective(&self, grid: &SpatialGrid, tg: &TimeGrid) -> Result<ObjectiveSpec, CliError> {
        let z_d = self.z_d.eval(self, grid, tg)?;
        let z_t = self.z_t.eval(self, grid)?;
        Ok(ObjectiveSpec::new(self.alpha, self.beta, z_d, z_t))
    }

    pub fn initial_load(&self, grid: &SpatialGrid, tg: &TimeGrid) -> Result<Trajectory, CliError> {
        self.initial.eval(self, grid, tg)
    }

    /// The anchor trajectory when the proximal term is active.
    pub fn anchor_load(
        &self,
        grid: &SpatialGrid,
        tg: &TimeGrid,
    ) -> Result<Option<Trajectory>, CliError> {
        if self.prox_weight == 0.0 {
            return Ok(None);
        }
        Ok(Some(self.anchor.eval(self, grid, tg)?))
    }

    /// Canonical re-serialization; parsing it reproduces this scenario.
    /// Written into optimize bundles so audits can rebuild the problem.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("domain.length = {}\n", self.length));
        s.push_str(&format!("domain.n_interior = {}\n", self.n_interior));
        s.push_str(&format!("time.horizon = {}\n", self.horizon));
        s.push_str(&format!("time.n_steps = {}\n", self.n_steps));
        match self.smoothing {
            Smoothing::Single(rho) => s.push_str(&format!("smoothing.rho = {rho}\n")),
            Smoothing::Schedule {
                rho_init,
                factor,
                n_levels,
            } => {
                s.push_str(&format!("smoothing.rho_init = {rho_init}\n"));
                s.push_str(&format!("smoothing.factor = {factor}\n"));
                s.push_str(&format!("smoothing.n_levels = {n_levels}\n"));
            }
        }
        s.push_str(&format!("objective.alpha = {}\n", self.alpha));
        s.push_str(&format!("objective.beta = {}\n", self.beta));
        s.push_str(&format!("objective.z_d = {}\n", self.z_d.canonical()));
        s.push_str(&format!("objective.z_t = {}\n", self.z_t.canonical()));
        s.push_str(&format!("control.initial = {}\n", self.initial.canonical()));
        s.push_str(&format!("control.anchor = {}\n", self.anchor.canonical()));
        s.push_str(&format!("control.prox_weight = {}\n", self.prox_weight));
        s.push_str(&format!("solver.newton_tol = {}\n", self.newton_tol));
        s.push_str(&format!("solver.pdas_c = {}\n", self.pdas_c));
        s.push_str(&format!("solver.inner_tol = {}\n", self.inner_tol));
        s.push_str(&format!("solver.inner_max_iter = {}\n", self.inner_max_iter));
        let list: Vec<String> = self.rho_list.iter().map(|r| r.to_string()).collect();
        s.push_str(&format!("study.rho_list = {}\n", list.join(",")));
        s.push_str(&format!("study.refine = {}\n", self.refine));
        let eps: Vec<String> = self.gradcheck_eps.iter().map(|e| e.to_string()).collect();
        s.push_str(&format!("gradcheck.eps = {}\n", eps.join(",")));
        s.push_str(&format!(
            "gradcheck.direction = {}\n",
            self.gradcheck_direction.canonical()
        ));
        s.push_str(&format!("output.directory = {}\n", self.out_dir));
        let mut formats = Vec::new();
        if self.formats.csv {
            formats.push("csv");
        }
        if self.formats.json {
            formats.push("json");
        }
        s.push_str(&format!("output.formats = {}\n", formats.join(",")));
        s
    }
}
