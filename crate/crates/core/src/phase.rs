//! Phase-diagram sweeps, full analysis reports and their CSV/SVG renderings.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubbles::{blowup_time, classify, tie_curve, BlowupTime, BubbleAnalysis, Minimizer, Regime, TieSample};
use crate::density::{DensityDefinition, DensityModel, ValidationReport};
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::limits::AsymptoticProfile;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRow {
    pub v1: f64,
    pub v2: f64,
    pub mu: f64,
    pub p2: f64,
    pub p3: f64,
    pub verdict: Minimizer,
}

impl From<BubbleAnalysis> for PhaseRow {
    fn from(a: BubbleAnalysis) -> Self {
        Self {
            v1: a.v1,
            v2: a.v2,
            mu: a.mu,
            p2: a.p2,
            p3: a.p3,
            verdict: a.verdict,
        }
    }
}

/// Classifies every grid point `(v1_max·i/grid, v2_max·j/grid)`, `1 ≤ i, j ≤ grid`,
/// with `V₁ ≤ V₂`. Rows come back sorted by `(V₁, V₂)`.
pub fn phase_sweep(
    model: &DensityModel,
    v1_max: f64,
    v2_max: f64,
    grid: usize,
    v0: Option<ExtendedReal>,
    settings: &Settings,
) -> Result<Vec<PhaseRow>> {
    if !(v1_max > 0.0 && v2_max > 0.0 && v1_max.is_finite() && v2_max.is_finite()) || grid < 2 {
        return Err(Error::InvalidArgument(format!(
            "need positive extents and grid >= 2, got v1_max = {v1_max}, v2_max = {v2_max}, grid = {grid}"
        )));
    }
    let at = |extent: f64, i: usize| extent * i as f64 / grid as f64;
    let rows: Vec<Vec<PhaseRow>> = (1..=grid)
        .into_par_iter()
        .map(|i| {
            let v1 = at(v1_max, i);
            (1..=grid)
                .map(|j| at(v2_max, j))
                .filter(|&v2| v2 >= v1)
                .map(|v2| classify(model, v1, v2, v0, settings).map(PhaseRow::from))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_phase_csv<W: Write>(rows: &[PhaseRow], mut out: W) -> Result<()> {
    writeln!(out, "v1,v2,mu,p2,p3,verdict")?;
    for r in rows {
        writeln!(out, "{:?},{:?},{:?},{:?},{:?},{}", r.v1, r.v2, r.mu, r.p2, r.p3, r.verdict)?;
    }
    Ok(())
}

pub fn write_tie_csv<W: Write>(samples: &[TieSample], mut out: W) -> Result<()> {
    writeln!(out, "v1,lambda,mu_at_tie")?;
    for s in samples {
        writeln!(out, "{:?},{:?},{:?}", s.v1, s.lambda, s.mu_at_tie)?;
    }
    Ok(())
}

/// Static SVG of the phase grid (one cell per row) with the tie curve drawn
/// on top when given.
pub fn render_svg(rows: &[PhaseRow], tie: &[TieSample], v1_max: f64, v2_max: f64, title: &str) -> String {
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    let sx = |v1: f64| PAD + v1 / v1_max * W;
    let sy = |v2: f64| PAD + H - v2 / v2_max * H;
    // Grid values are extent·i/n, so each cell spans one grid step below
    // its coordinates.
    let distinct = |key: fn(&PhaseRow) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(key).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len().max(1) as f64
    };
    let cell_w = W / distinct(|r| r.v1);
    let cell_h = H / distinct(|r| r.v2);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        W + 2.0 * PAD,
        H + 2.0 * PAD,
        W + 2.0 * PAD,
        H + 2.0 * PAD
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r##"<rect x="{PAD}" y="{PAD}" width="{W}" height="{H}" fill="#ffffff" stroke="#000000"/>"##);
    for r in rows {
        let fill = match r.verdict {
            Minimizer::Double => "#9ecae1",
            Minimizer::Triple => "#fdae6b",
            Minimizer::Tie => "#636363",
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            sx(r.v1) - cell_w,
            sy(r.v2),
            cell_w,
            cell_h
        );
    }
    let points: Vec<String> = tie
        .iter()
        .filter(|s| s.v1 <= v1_max && s.lambda <= v2_max)
        .map(|s| format!("{:.2},{:.2}", sx(s.v1), sy(s.lambda)))
        .collect();
    if points.len() >= 2 {
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            points.join(" ")
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">V1 (0 to {v1_max})</text>"#,
        PAD + W / 2.0,
        H + 2.0 * PAD - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.0}" transform="rotate(-90 14 {:.0})" text-anchor="middle">V2 (0 to {v2_max})</text>"#,
        PAD + H / 2.0,
        PAD + H / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Ok,
    ValidationFailed,
    Inconclusive { message: String },
}

/// Everything `analyze` reports, in output order. Later stages are absent
/// when an earlier one stopped the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub density: DensityDefinition,
    pub status: Status,
    pub validation_passed: bool,
    pub validation: ValidationReport,
    pub limits: Option<AsymptoticProfile>,
    pub blowup: Option<BlowupTime>,
    pub tie_samples: Vec<TieSample>,
    pub probes: Vec<BubbleAnalysis>,
}

/// Validation, limits, blowup time, a short tie-curve ladder and a few
/// classifications. Validation failures and inconclusive limits are recorded
/// in `status` rather than returned as errors.
pub fn analyze(model: &DensityModel, settings: &Settings, tie_samples: usize) -> Result<AnalysisReport> {
    let validation = model.validate();
    let mut report = AnalysisReport {
        density: model.definition(),
        status: Status::Ok,
        validation_passed: validation.passed(),
        validation,
        limits: None,
        blowup: None,
        tie_samples: Vec::new(),
        probes: Vec::new(),
    };
    if !report.validation_passed {
        report.status = Status::ValidationFailed;
        return Ok(report);
    }
    let profile = AsymptoticProfile::estimate(model, &settings.limits)?;
    let blowup = blowup_time(model, &profile, settings);
    report.limits = Some(profile);
    let blowup = match blowup {
        Ok(b) => b,
        Err(Error::Inconclusive(message)) => {
            report.status = Status::Inconclusive { message };
            return Ok(report);
        }
        Err(e) => return Err(e),
    };

    let scale = match blowup.regime {
        Regime::FiniteBlowup => blowup.v0.to_f64(),
        _ => 1.0,
    };
    if tie_samples > 0 && blowup.regime != Regime::AlwaysDouble {
        let (lo, hi) = match blowup.regime {
            Regime::FiniteBlowup => (scale * 2f64.powi(-4), scale),
            _ => (0.25, 4.0),
        };
        report.tie_samples = tie_curve(model, &blowup, lo, hi, tie_samples, settings)?.samples;
    }
    let v1 = 0.5 * scale;
    report.probes = [v1, 4.0 * v1, 64.0 * v1]
        .iter()
        .map(|&v2| classify(model, v1, v2, Some(blowup.v0), settings))
        .collect::<Result<_>>()?;
    report.blowup = Some(blowup);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Coordinate;
    use crate::limits::{LimitEstimate, Verdict};

    fn sqrt_model() -> DensityModel {
        DensityModel::parse("sqrt(V^2+1)-1/2", Coordinate::Volume)
            .unwrap()
            .with_analytic_l(Some(ExtendedReal::Finite(1.0)))
            .with_analytic_m(Some(ExtendedReal::Finite(0.5)))
    }

    fn exact(model: &DensityModel) -> AsymptoticProfile {
        let e = |value: Option<ExtendedReal>| LimitEstimate {
            value: value.unwrap(),
            verdict: Verdict::Analytic,
            trace: Vec::new(),
        };
        AsymptoticProfile {
            l: e(model.analytic_l()),
            m: e(model.analytic_m()),
        }
    }

    #[test]
    fn sweep_is_sorted_and_upper_triangular() {
        let m = sqrt_model();
        let st = Settings::default();
        let rows = phase_sweep(&m, 1.0, 40.0, 8, None, &st).unwrap();
        assert!(rows.iter().all(|r| r.v1 <= r.v2));
        for w in rows.windows(2) {
            assert!((w[0].v1, w[0].v2) < (w[1].v1, w[1].v2));
        }
    }

    #[test]
    fn triple_cells_lie_above_the_tie_curve() {
        let m = sqrt_model();
        let st = Settings::default();
        let b = blowup_time(&m, &exact(&m), &st).unwrap();
        let v0 = b.v0.to_f64();
        let rows = phase_sweep(&m, 0.6, 60.0, 12, Some(b.v0), &st).unwrap();
        assert!(rows.iter().any(|r| r.verdict == Minimizer::Triple));
        for r in rows.iter().filter(|r| r.verdict == Minimizer::Triple) {
            assert!(r.v1 < v0);
            let lambda = crate::bubbles::tie_volume(&m, &b, r.v1, &st).unwrap().lambda;
            assert!(r.v2 > lambda);
        }
    }

    #[test]
    fn csv_rows_reclassify_identically() {
        let m = sqrt_model();
        let st = Settings::default();
        let rows = phase_sweep(&m, 0.5, 30.0, 5, None, &st).unwrap();
        let mut buf = Vec::new();
        write_phase_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("v1,v2,mu,p2,p3,verdict"));
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            let (v1, v2): (f64, f64) = (cols[0].parse().unwrap(), cols[1].parse().unwrap());
            let again = classify(&m, v1, v2, None, &st).unwrap();
            assert_eq!(again.verdict.to_string(), cols[5]);
            assert_eq!(format!("{:?}", again.mu), cols[2]);
        }
    }

    #[test]
    fn svg_contains_cells_and_curve() {
        let rows = vec![
            PhaseRow { v1: 0.5, v2: 1.0, mu: 1.0, p2: 2.0, p3: 3.0, verdict: Minimizer::Double },
            PhaseRow { v1: 1.0, v2: 1.0, mu: -1.0, p2: 2.0, p3: 1.0, verdict: Minimizer::Triple },
        ];
        let tie = vec![
            TieSample { v1: 0.1, lambda: 0.3, mu_at_tie: 0.0 },
            TieSample { v1: 0.4, lambda: 0.9, mu_at_tie: 0.0 },
        ];
        let svg = render_svg(&rows, &tie, 1.0, 1.0, "a<b");
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn analysis_of_three_regimes() {
        let st = Settings::default();
        let r = analyze(&sqrt_model(), &st, 6).unwrap();
        assert_eq!(r.status, Status::Ok);
        let b = r.blowup.unwrap();
        assert_eq!(b.regime, Regime::FiniteBlowup);
        assert_eq!(r.tie_samples.len(), 6);
        assert_eq!(r.probes[0].verdict, Minimizer::Double);

        let abs_exp = DensityModel::parse("abs(V)+exp(-abs(V))", Coordinate::Volume).unwrap();
        let r = analyze(&abs_exp, &st, 6).unwrap();
        assert_eq!(r.blowup.unwrap().regime, Regime::AlwaysDouble);
        assert!(r.tie_samples.is_empty());

        let bad = DensityModel::parse("1 + abs(V)", Coordinate::Volume).unwrap();
        let r = analyze(&bad, &st, 6).unwrap();
        assert_eq!(r.status, Status::ValidationFailed);
        assert!(r.limits.is_none());
    }
}
