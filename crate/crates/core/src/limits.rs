//! Asymptotic slope `L = lim f′(V)` and doubling defect
//! `M = lim f(2V) − 2f(V)` as `V → ∞`.
//!
//! Both sequences are monotone under the standing hypotheses, so they are
//! sampled along `V = 2^k` and the last sample is a one-sided estimate.
//! Three verdicts are possible: convergence (a window of tiny increments),
//! divergence (a sample above the threshold, or increments that decay too
//! slowly to be summable by Raabe's test), or an honest inconclusive.
//!
//! Sampling at `V = 2^k` condenses the sequence, so increments `Δ_k` of a
//! convergent limit must be summable in `k`. Raabe's statistic
//! `R_k = k (Δ_k / Δ_{k+1} − 1)` stays below 1 for non-summable increments
//! (`Δ_k ~ k^{-p}` with `p ≤ 1` gives `R_k → p`), and grows without bound
//! for geometric decay.
//!
//! `g(V) = f(2V) − 2f(V)` suffers catastrophic cancellation when evaluated
//! directly at large `V`, so it is computed through the identity
//!
//! ```text
//! g(V) = ∫₀^V (c − f′) − ∫_V^{2V} (c − f′) − f(0)     (any constant c)
//! ```
//!
//! with `c = f′(2V)`, which keeps both integrands small and non-negative.

use std::io::Write;

use serde::Serialize;

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::quad::{integrate, QuadOptions};
use crate::settings::LimitSettings;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// The last `window` increments were all below `tolerance`.
    Converged { tolerance: f64 },
    /// A sample crossed the divergence threshold.
    ExceededThreshold { threshold: f64 },
    /// Raabe's statistic stayed at or below `raabe_max` over the detection
    /// window.
    SlowGrowth { raabe_max: f64 },
    /// Value supplied in the density definition.
    Analytic,
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_conclusive(&self) -> bool {
        !matches!(self, Verdict::Inconclusive { .. })
    }

    pub fn declared_infinite(&self) -> bool {
        matches!(self, Verdict::ExceededThreshold { .. } | Verdict::SlowGrowth { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub k: u32,
    #[serde(rename = "V")]
    pub v: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    /// The estimate; for an inconclusive verdict, the last sample (a lower
    /// bound, since the sequences are increasing).
    pub value: ExtendedReal,
    pub verdict: Verdict,
    pub trace: Vec<TracePoint>,
}

impl LimitEstimate {
    fn analytic(value: ExtendedReal) -> Self {
        Self {
            value,
            verdict: Verdict::Analytic,
            trace: Vec::new(),
        }
    }

    /// The value when the verdict is conclusive.
    pub fn conclusive(&self, name: &str) -> Result<ExtendedReal> {
        match &self.verdict {
            Verdict::Inconclusive { reason } => Err(Error::Inconclusive(format!(
                "{name}: {reason}; supply `{name} = <value|inf>` in the density file if known"
            ))),
            _ => Ok(self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticProfile {
    #[serde(rename = "L")]
    pub l: LimitEstimate,
    #[serde(rename = "M")]
    pub m: LimitEstimate,
}

impl AsymptoticProfile {
    /// Estimates both limits and checks that `L = ∞` forces `M = ∞`.
    pub fn estimate(model: &DensityModel, s: &LimitSettings) -> Result<Self> {
        let l = estimate_l(model, s)?;
        let m = estimate_m(model, s)?;
        if l.value.is_pos_inf() && l.verdict.is_conclusive() && m.verdict.is_conclusive() && !m.value.is_pos_inf() {
            return Err(Error::ModelViolation(format!(
                "L = inf but M = {} (an unbounded slope forces an unbounded doubling defect)",
                m.value
            )));
        }
        Ok(Self { l, m })
    }

    pub fn l(&self) -> Result<ExtendedReal> {
        self.l.conclusive("L")
    }

    pub fn m(&self) -> Result<ExtendedReal> {
        self.m.conclusive("M")
    }

    /// Finite `(L, M)`-style values as used by the large-volume formulas.
    pub fn finite_l(&self) -> Result<f64> {
        self.l()?
            .as_finite()
            .ok_or_else(|| Error::Undefined("L is infinite".into()))
    }
}

pub fn estimate_l(model: &DensityModel, s: &LimitSettings) -> Result<LimitEstimate> {
    if let Some(l) = model.analytic_l() {
        return Ok(LimitEstimate::analytic(l));
    }
    let est = sample_sequence(s, |v| model.slope(v))?;
    if let Some(first) = est.trace.first() {
        if !(first.value > 0.0) {
            return Err(Error::ModelViolation(format!(
                "f'(1) = {} is not positive",
                first.value
            )));
        }
    }
    Ok(est)
}

pub fn estimate_m(model: &DensityModel, s: &LimitSettings) -> Result<LimitEstimate> {
    if let Some(m) = model.analytic_m() {
        return Ok(LimitEstimate::analytic(m));
    }
    let f0 = model.density(0.0)?;
    sample_sequence(s, |v| doubling_defect(model, v, f0, s.quad_rtol))
}

/// `g(V) = f(2V) − 2f(V)` for `V > 0`, evaluated without cancellation.
///
/// Each sample of `c − f′(t)` carries an absolute rounding error of order
/// `ε·|c|`, so over `[0, 2V]` the integrals cannot be certified below
/// `ε·|c|·V`; that floor is added to the quadrature tolerance.
pub fn doubling_defect(model: &DensityModel, v: f64, f0: f64, quad_rtol: f64) -> Result<f64> {
    let c = model.slope(2.0 * v)?;
    let noise_floor = 8.0 * f64::EPSILON * c.abs().max(1.0) * v;
    let opts = QuadOptions {
        abs_tol: quad_rtol * (1.0 + f0.abs()) + noise_floor,
        rel_tol: quad_rtol,
        max_panels: 4000,
    };
    let gap = |t: f64| Ok(c - model.slope(t)?);
    let mut breaks = Vec::new();
    let mut b = 1.0;
    while b < v {
        breaks.push(b);
        b *= 2.0;
    }
    let near = integrate(gap, 0.0, v, &breaks, opts)?;
    let far = integrate(gap, v, 2.0 * v, &[], opts)?;
    Ok(near.value - far.value - f0)
}

fn sample_sequence<F>(s: &LimitSettings, mut sample: F) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut stopped = None;
    for k in 0..=s.k_max {
        let v = 2f64.powi(k as i32);
        let value = match sample(v) {
            Ok(value) => value,
            // Out of representable range before a verdict: report what we have.
            Err(e @ (Error::UnboundedInverse { .. } | Error::NonFinite { .. } | Error::Quadrature { .. })) if !trace.is_empty() => {
                stopped = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        trace.push(TracePoint { k, v, value });
        if let Some((value, verdict)) = judge(&trace, s) {
            return Ok(LimitEstimate { value, verdict, trace });
        }
    }
    let last = trace.last().map(|p| p.value).unwrap_or(f64::NAN);
    let reason = match stopped {
        Some(e) => format!("sampling stopped at k = {}: {e}", trace.len()),
        None => format!("neither criterion met by k = {}", s.k_max),
    };
    Ok(LimitEstimate {
        value: ExtendedReal::from_f64(last)?,
        verdict: Verdict::Inconclusive { reason },
        trace,
    })
}

fn judge(trace: &[TracePoint], s: &LimitSettings) -> Option<(ExtendedReal, Verdict)> {
    let last = trace.last()?;
    if last.value > s.divergence_threshold {
        return Some((
            ExtendedReal::PosInf,
            Verdict::ExceededThreshold {
                threshold: s.divergence_threshold,
            },
        ));
    }
    let increments: Vec<f64> = trace.windows(2).map(|w| w[1].value - w[0].value).collect();
    let tol = s.converge_rtol * (1.0 + last.value.abs());
    if increments.len() >= s.converge_window {
        let window = &increments[increments.len() - s.converge_window..];
        if window.iter().all(|d| d.abs() < tol) {
            let worst = window.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            return Some((
                ExtendedReal::Finite(last.value),
                Verdict::Converged { tolerance: worst },
            ));
        }
    }
    let w = s.slow_divergence_window;
    if last.k >= s.slow_divergence_min_k && w >= 2 && increments.len() >= w {
        let window = &increments[increments.len() - w..];
        let first_k = (increments.len() - w) as f64;
        let growing = window.iter().all(|d| *d > tol)
            && window.windows(2).enumerate().all(|(j, p)| {
                let k = first_k + j as f64 + 1.0;
                k * (p[0] / p[1] - 1.0) <= s.slow_divergence_raabe
            });
        if growing {
            return Some((
                ExtendedReal::PosInf,
                Verdict::SlowGrowth {
                    raabe_max: s.slow_divergence_raabe,
                },
            ));
        }
    }
    None
}

/// Writes a trace as CSV with header `k,V,value`.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], mut out: W) -> Result<()> {
    writeln!(out, "k,V,value")?;
    for p in trace {
        writeln!(out, "{},{:?},{:?}", p.k, p.v, p.value)?;
    }
    Ok(())
}
