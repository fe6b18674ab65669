//! Densities on the line and the position ↔ volume coordinate change.
//!
//! A density may be written either in the position coordinate `x` or in the
//! volume coordinate `V = ∫₀ˣ f`. Everything downstream works in volume
//! coordinates, where log-convexity of `f` becomes ordinary convexity and
//! `f′(V) = (log f)′(x(V))`.
//!
//! For positional formulas the map `x ↦ V` is tabulated once, lazily, on
//! knots adapted to the growth of `f`. Inversions start from a cubic Hermite
//! guess on that table and are polished by safeguarded Newton steps against
//! the exact segment integral.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, DensityExpr};
use crate::extended::ExtendedReal;
use crate::quad::{integrate, integrate_panel, QuadOptions};
use crate::settings::DensitySettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    Position,
    Volume,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordinate::Position => "position",
            Coordinate::Volume => "volume",
        })
    }
}

/// The contents of a density definition file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityDefinition {
    pub coordinate: Coordinate,
    pub f: String,
    #[serde(rename = "L")]
    pub analytic_l: Option<ExtendedReal>,
    #[serde(rename = "M")]
    pub analytic_m: Option<ExtendedReal>,
}

impl DensityDefinition {
    /// Parses `key = value` lines; `#` starts a comment. Keys: `coordinate`
    /// (`position` or `volume`, default `volume`), `f`, and optional `L`, `M`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut coordinate = None;
        let mut f = None;
        let mut analytic_l = None;
        let mut analytic_m = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Definition(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let duplicate = || Error::Definition(format!("line {}: duplicate key `{key}`", lineno + 1));
            match key {
                "coordinate" => {
                    let c = match value {
                        "position" => Coordinate::Position,
                        "volume" => Coordinate::Volume,
                        other => {
                            return Err(Error::Definition(format!(
                                "line {}: coordinate must be `position` or `volume`, got `{other}`",
                                lineno + 1
                            )))
                        }
                    };
                    if coordinate.replace(c).is_some() {
                        return Err(duplicate());
                    }
                }
                "f" => {
                    if f.replace(value.to_string()).is_some() {
                        return Err(duplicate());
                    }
                }
                "L" => {
                    if analytic_l.replace(value.parse::<ExtendedReal>()?).is_some() {
                        return Err(duplicate());
                    }
                }
                "M" => {
                    if analytic_m.replace(value.parse::<ExtendedReal>()?).is_some() {
                        return Err(duplicate());
                    }
                }
                other => {
                    return Err(Error::Definition(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(Self {
            coordinate: coordinate.unwrap_or(Coordinate::Volume),
            f: f.ok_or_else(|| Error::Definition("missing `f = <expression>`".into()))?,
            analytic_l,
            analytic_m,
        })
    }
}

/// A symmetric, strictly log-convex, C¹ density (once validated).
#[derive(Debug, Clone)]
pub struct DensityModel {
    expr: DensityExpr,
    coordinate: Coordinate,
    analytic_l: Option<ExtendedReal>,
    analytic_m: Option<ExtendedReal>,
    settings: DensitySettings,
    transform: OnceLock<Result<VolumeTransform>>,
}

impl DensityModel {
    pub fn new(expr: DensityExpr, coordinate: Coordinate) -> Self {
        Self {
            expr,
            coordinate,
            analytic_l: None,
            analytic_m: None,
            settings: DensitySettings::default(),
            transform: OnceLock::new(),
        }
    }

    /// Shorthand for `new(parse(formula)?, coordinate)`.
    pub fn parse(formula: &str, coordinate: Coordinate) -> Result<Self> {
        Ok(Self::new(expr::parse(formula)?, coordinate))
    }

    pub fn from_definition(def: &DensityDefinition) -> Result<Self> {
        let mut model = Self::parse(&def.f, def.coordinate)?;
        model.analytic_l = def.analytic_l;
        model.analytic_m = def.analytic_m;
        Ok(model)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_definition(&DensityDefinition::parse(&text)?)
    }

    pub fn with_settings(mut self, settings: DensitySettings) -> Self {
        self.settings = settings;
        self.transform = OnceLock::new();
        self
    }

    pub fn with_analytic_l(mut self, l: Option<ExtendedReal>) -> Self {
        self.analytic_l = l;
        self
    }

    pub fn with_analytic_m(mut self, m: Option<ExtendedReal>) -> Self {
        self.analytic_m = m;
        self
    }

    pub fn expr(&self) -> &DensityExpr {
        &self.expr
    }

    pub fn coordinate(&self) -> Coordinate {
        self.coordinate
    }

    pub fn analytic_l(&self) -> Option<ExtendedReal> {
        self.analytic_l
    }

    pub fn analytic_m(&self) -> Option<ExtendedReal> {
        self.analytic_m
    }

    pub fn settings(&self) -> &DensitySettings {
        &self.settings
    }

    pub fn definition(&self) -> DensityDefinition {
        DensityDefinition {
            coordinate: self.coordinate,
            f: self.expr.source().to_string(),
            analytic_l: self.analytic_l,
            analytic_m: self.analytic_m,
        }
    }

    fn require_position(&self) -> Result<()> {
        match self.coordinate {
            Coordinate::Position => Ok(()),
            Coordinate::Volume => Err(Error::InvalidArgument(
                "the density is already written in the volume coordinate".into(),
            )),
        }
    }

    fn transform(&self) -> Result<&VolumeTransform> {
        self.transform
            .get_or_init(|| VolumeTransform::build(&self.expr, &self.settings))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `V(x) = ∫₀ˣ f`.
    pub fn volume_of_position(&self, x: f64) -> Result<f64> {
        self.require_position()?;
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("position {x} is not finite")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let t = self.transform()?;
        let v = t.volume_at(&self.expr, x.abs(), &self.settings)?;
        Ok(v.copysign(x))
    }

    /// Inverse of [`volume_of_position`](Self::volume_of_position).
    pub fn position_of_volume(&self, v: f64) -> Result<f64> {
        self.require_position()?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("volume {v} is not finite")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let t = self.transform()?;
        let x = t.position_at(&self.expr, v.abs(), &self.settings)?;
        Ok(x.copysign(v))
    }

    /// `f` as a function of the volume coordinate.
    pub fn density(&self, v: f64) -> Result<f64> {
        match self.coordinate {
            Coordinate::Volume => self.expr.eval(v),
            Coordinate::Position => self.expr.eval(self.position_of_volume(v)?),
        }
    }

    /// `f′(V)`; for positional formulas this is `(log f)′(x(V))`.
    pub fn slope(&self, v: f64) -> Result<f64> {
        Ok(self.density_and_slope(v)?.1)
    }

    pub fn density_and_slope(&self, v: f64) -> Result<(f64, f64)> {
        match self.coordinate {
            Coordinate::Volume => {
                let d = self.expr.eval_dual_with(v, self.settings.kink_atol)?;
                Ok((d.primal, d.tangent))
            }
            Coordinate::Position => {
                let x = self.position_of_volume(v)?;
                let d = self.expr.eval_dual_with(x, self.settings.kink_atol)?;
                Ok((d.primal, d.tangent / d.primal))
            }
        }
    }

    /// The validation grid `{0} ∪ ±unit·2^k`, sorted ascending. It stops
    /// short of the first magnitude where `f` or `f′` leaves the f64 range
    /// (or the coordinate transform), since nothing can be checked there.
    pub fn validation_grid(&self) -> Vec<f64> {
        let s = &self.settings;
        let representable = |v: f64| match self.density_and_slope(v) {
            Ok((f, d)) => f.is_finite() && d.is_finite(),
            Err(Error::NonFinite { .. } | Error::UnboundedInverse { .. }) => false,
            Err(_) => true,
        };
        let mut grid: Vec<f64> = (s.grid_min_exp..=s.grid_max_exp)
            .map(|k| s.grid_unit * 2f64.powi(k))
            .take_while(|&v| representable(v) && representable(-v))
            .collect();
        let negatives: Vec<f64> = grid.iter().rev().map(|v| -v).collect();
        grid.insert(0, 0.0);
        let mut all = negatives;
        all.extend(grid);
        all
    }

    /// Checks the standing hypotheses on the validation grid. Failures are
    /// data in the report, never errors.
    pub fn validate(&self) -> ValidationReport {
        let grid = self.validation_grid();
        let s = &self.settings;
        let mut checks = Vec::new();

        let mut positivity = CheckResult::pass("positivity");
        for &v in &grid {
            match self.density(v) {
                Ok(f) if f > 0.0 => {}
                Ok(f) => {
                    positivity = CheckResult::fail("positivity", v, format!("f = {f}"));
                    break;
                }
                Err(e) => {
                    positivity = CheckResult::fail("positivity", v, e.to_string());
                    break;
                }
            }
        }
        checks.push(positivity);

        let mut symmetry = CheckResult::pass("symmetry");
        for &v in grid.iter().filter(|v| **v > 0.0) {
            match self.mirror_pair(v) {
                Ok((a, b)) if (a - b).abs() <= s.symmetry_rtol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) => {}
                Ok((a, b)) => {
                    symmetry = CheckResult::fail("symmetry", v, format!("f(-p) = {a}, f(p) = {b}"));
                    break;
                }
                Err(e) => {
                    symmetry = CheckResult::fail("symmetry", v, e.to_string());
                    break;
                }
            }
        }
        checks.push(symmetry);

        let mut smooth = CheckResult::pass("c1");
        let mut slopes = Vec::with_capacity(grid.len());
        for &v in &grid {
            match self.slope(v) {
                Ok(d) => slopes.push(d),
                Err(e) => {
                    smooth = CheckResult::fail("c1", v, e.to_string());
                    break;
                }
            }
        }
        let smooth_ok = smooth.passed;
        checks.push(smooth);

        if smooth_ok {
            checks.push(strict_increase("strict_convexity", &grid, &slopes, s.saturation_rtol));
        } else {
            checks.push(CheckResult {
                name: "strict_convexity".into(),
                passed: false,
                witness: None,
                detail: Some("slopes unavailable (see c1)".into()),
            });
        }

        let zero_slope = match self.slope(0.0) {
            Ok(d) if d.abs() <= s.slope_at_zero_atol => CheckResult::pass("slope_at_zero"),
            Ok(d) => CheckResult::fail("slope_at_zero", 0.0, format!("f'(0) = {d}")),
            Err(e) => CheckResult::fail("slope_at_zero", 0.0, e.to_string()),
        };
        checks.push(zero_slope);

        ValidationReport { checks }
    }

    /// `(f(−p), f(p))` in the formula's own coordinate, at the point matching
    /// volume `v`.
    fn mirror_pair(&self, v: f64) -> Result<(f64, f64)> {
        let p = match self.coordinate {
            Coordinate::Volume => v,
            Coordinate::Position => self.position_of_volume(v)?,
        };
        Ok((self.expr.eval(-p)?, self.expr.eval(p)?))
    }
}

/// Slopes must increase strictly across the grid. A run of equal slopes is
/// tolerated only at either end of the grid, and only when the neighbouring
/// increment is already below `saturation_rtol` (the slope has converged to
/// its limit within double precision).
fn strict_increase(name: &str, grid: &[f64], slopes: &[f64], saturation_rtol: f64) -> CheckResult {
    let n = slopes.len();
    let increments: Vec<f64> = slopes.windows(2).map(|w| w[1] - w[0]).collect();
    let tiny = |i: usize| increments[i] > 0.0 && increments[i] <= saturation_rtol * (1.0 + slopes[i].abs());
    let first_pos = increments.iter().position(|d| *d > 0.0);
    let last_pos = increments.iter().rposition(|d| *d > 0.0);
    for (i, &d) in increments.iter().enumerate() {
        if d > 0.0 {
            continue;
        }
        let witness = grid[i + 1];
        if d < 0.0 {
            return CheckResult::fail(name, witness, format!("f' decreases: {} -> {}", slopes[i], slopes[i + 1]));
        }
        let leading = first_pos.is_some_and(|p| i < p && tiny(p));
        let trailing = last_pos.is_some_and(|p| i > p && tiny(p));
        if !(leading || trailing) {
            return CheckResult::fail(name, witness, format!("f' constant at {} (linear piece)", slopes[i]));
        }
    }
    if n >= 2 && first_pos.is_none() {
        return CheckResult::fail(name, grid[0], "f' constant on the whole grid".into());
    }
    CheckResult::pass(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Volume-coordinate grid point where the check failed.
    pub witness: Option<f64>,
    pub detail: Option<String>,
}

impl CheckResult {
    fn pass(name: &str) -> Self {
        Self {
            name: name.into(),
            passed: true,
            witness: None,
            detail: None,
        }
    }

    fn fail(name: &str, witness: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            witness: Some(witness),
            detail: Some(detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tabulated `x ↦ V(x)` for `x ≥ 0`.
#[derive(Debug, Clone)]
struct VolumeTransform {
    xs: Vec<f64>,
    vs: Vec<f64>,
    fs: Vec<f64>,
}

impl VolumeTransform {
    fn build(expr: &DensityExpr, s: &DensitySettings) -> Result<Self> {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: s.quad_rtol,
            max_panels: 2000,
        };
        let f0 = expr.eval(0.0)?;
        if !(f0 > 0.0) {
            return Err(Error::ModelViolation(format!("f(0) = {f0} is not positive")));
        }
        let mut t = Self {
            xs: vec![0.0],
            vs: vec![0.0],
            fs: vec![f0],
        };
        let eval_pos = |x: f64| -> Result<f64> {
            let f = expr.eval(x)?;
            if f > 0.0 {
                Ok(f)
            } else {
                Err(Error::ModelViolation(format!("f({x}) = {f} is not positive")))
            }
        };
        loop {
            let x = *t.xs.last().unwrap();
            let v = *t.vs.last().unwrap();
            if v >= s.volume_cap || x >= s.position_cap {
                break;
            }
            let d = expr.eval_dual_with(x, s.kink_atol)?;
            let log_slope = (d.tangent / d.primal).abs();
            let mut h = (0.5 * x).max(0.25).min(0.5 / log_slope.max(1e-300));
            if x + h > s.position_cap {
                h = s.position_cap - x;
            }
            let mut step = None;
            for _ in 0..60 {
                let x_next = x + h;
                let attempt = eval_pos(x_next).and_then(|f_next| {
                    let seg = integrate(eval_pos, x, x_next, &[], opts)?;
                    Ok((f_next, seg.value))
                });
                match attempt {
                    Ok((f_next, seg)) if (v + seg).is_finite() => {
                        step = Some((x_next, v + seg, f_next));
                        break;
                    }
                    Ok(_) | Err(Error::NonFinite { .. }) => h *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            match step {
                Some((x_next, v_next, f_next)) => {
                    t.xs.push(x_next);
                    t.vs.push(v_next);
                    t.fs.push(f_next);
                }
                // f overflows just past x: the table ends here.
                None => break,
            }
        }
        Ok(t)
    }

    fn segment(&self, xs_or_vs: &[f64], value: f64) -> usize {
        let i = xs_or_vs.partition_point(|p| *p <= value);
        i.saturating_sub(1).min(xs_or_vs.len() - 2)
    }

    fn volume_at(&self, expr: &DensityExpr, x: f64, s: &DensitySettings) -> Result<f64> {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: s.quad_rtol,
            max_panels: 4000,
        };
        let f = |t: f64| expr.eval(t);
        let x_end = *self.xs.last().unwrap();
        if self.xs.len() < 2 || x > x_end {
            let mut breaks: Vec<f64> = self.xs.clone();
            breaks.retain(|b| *b < x);
            return Ok(integrate(f, 0.0, x, &breaks, opts)?.value);
        }
        let i = self.segment(&self.xs, x);
        let tail = integrate(f, self.xs[i], x, &[], opts)?;
        Ok(self.vs[i] + tail.value)
    }

    fn position_at(&self, expr: &DensityExpr, v: f64, s: &DensitySettings) -> Result<f64> {
        let v_end = *self.vs.last().unwrap();
        if self.xs.len() < 2 || v > v_end {
            return Err(Error::UnboundedInverse {
                volume: v,
                position_cap: *self.xs.last().unwrap(),
            });
        }
        let i = self.segment(&self.vs, v);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (v0, v1) = (self.vs[i], self.vs[i + 1]);
        let dv = v1 - v0;
        let t = (v - v0) / dv;
        // Cubic Hermite in V with dx/dV = 1/f.
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        let mut x = h00 * x0 + h10 * dv / self.fs[i] + h01 * x1 + h11 * dv / self.fs[i + 1];
        let (mut lo, mut hi) = (x0, x1);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: s.quad_rtol,
            max_panels: 200,
        };
        // Segments are short enough that one panel usually suffices.
        let piece = |a: f64, b: f64| -> Result<f64> {
            let p = integrate_panel(|t| expr.eval(t), a, b)?;
            if p.error <= s.quad_rtol * p.value.abs() {
                Ok(p.value)
            } else {
                Ok(integrate(|t| expr.eval(t), a, b, &[], opts)?.value)
            }
        };
        let target_tol = s.inverse_rtol * v;
        for _ in 0..100 {
            // Integrate from whichever knot is closer.
            let residual = if x - x0 <= x1 - x {
                v0 + piece(x0, x)? - v
            } else {
                v1 - piece(x, x1)? - v
            };
            if residual.abs() <= target_tol * 1e-2 {
                return Ok(x);
            }
            if residual > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let correction = residual / expr.eval(x)?;
            let mut next = x - correction;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            } else if correction.abs() <= 1e-7 * (x1 - x0) {
                // Quadratic convergence leaves an error of order
                // correction²/(x1 − x0), far below the target.
                return Ok(next);
            }
            if next == x || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }
}
