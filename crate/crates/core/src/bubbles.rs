//! Double versus triple intervals: perimeters, the gap `μ = P₃ − P₂`, its
//! large-`V₂` limit `μ_ℓ`, the blowup time `V₀` and the tie function `λ`.
//!
//! All volumes are in the volume coordinate. The double interval is
//! `[Ṽ, Ṽ+V₁] ∪ [Ṽ+V₁, Ṽ+V₁+V₂]`; the triple interval puts `V₁` in the
//! middle, centred at 0, with `V₂/2` on each side.

use rayon::prelude::*;
use serde::Serialize;

use crate::density::DensityModel;
use crate::equilibrium::{solve_equilibrium, solve_v_star};
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::limits::AsymptoticProfile;
use crate::roots::{bisect_increasing, expand_until};
use crate::settings::{Settings, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Minimizer {
    Double,
    Triple,
    Tie,
}

impl std::fmt::Display for Minimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Minimizer::Double => "Double",
            Minimizer::Triple => "Triple",
            Minimizer::Tie => "Tie",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `V₀ = 0`: the double interval always wins.
    AlwaysDouble,
    FiniteBlowup,
    /// `V₀ = ∞`: a tie exists for every `V₁`.
    NoBlowup,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::AlwaysDouble => "AlwaysDouble",
            Regime::FiniteBlowup => "FiniteBlowup",
            Regime::NoBlowup => "NoBlowup",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleAnalysis {
    #[serde(rename = "V1")]
    pub v1: f64,
    #[serde(rename = "V2")]
    pub v2: f64,
    pub v_tilde: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    #[serde(rename = "P3")]
    pub p3: f64,
    pub mu: f64,
    pub verdict: Minimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupTime {
    #[serde(rename = "V0")]
    pub v0: ExtendedReal,
    /// Final bisection bracket with `μ_ℓ(lo) < 0 ≤ μ_ℓ(hi)`; only for a
    /// finite positive `V₀`.
    #[serde(rename = "V0_bracket")]
    pub bracket: Option<(f64, f64)>,
    /// `μ_ℓ` at the two bracket ends.
    pub mu_limit_at_bracket: Option<(f64, f64)>,
    /// `lim μ_ℓ(V₁)` as `V₁ → 0`, when `M` is finite.
    pub mu_limit_at_zero: Option<f64>,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TieSample {
    pub v1: f64,
    pub lambda: f64,
    pub mu_at_tie: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieCurve {
    #[serde(flatten)]
    pub blowup: BlowupTime,
    pub samples: Vec<TieSample>,
    pub warnings: Vec<String>,
}

/// `P₂` and the `Ṽ` it was evaluated at.
pub fn perimeter_double(model: &DensityModel, v1: f64, v2: f64, s: &SolverSettings) -> Result<(f64, f64)> {
    let eq = solve_equilibrium(model, v1, v2, s)?;
    let t = eq.v_tilde;
    let p2 = model.density(t)? + model.density(t + v1)? + model.density(t + v1 + v2)?;
    Ok((p2, t))
}

pub fn perimeter_triple(model: &DensityModel, v1: f64, v2: f64) -> Result<f64> {
    if !(v1 > 0.0 && v2 >= v1 && v2.is_finite()) {
        return Err(Error::InvalidArgument(format!("volumes must satisfy 0 < V1 <= V2, got V1 = {v1}, V2 = {v2}")));
    }
    Ok(2.0 * model.density(0.5 * v1)? + 2.0 * model.density(0.5 * (v1 + v2))?)
}

pub fn mu(model: &DensityModel, v1: f64, v2: f64, s: &SolverSettings) -> Result<f64> {
    Ok(perimeter_triple(model, v1, v2)? - perimeter_double(model, v1, v2, s)?.0)
}

/// `V ≥ 0` with `f′(V) = target`, for `0 ≤ target < L`.
pub fn slope_inverse(model: &DensityModel, target: f64, s: &SolverSettings) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let hi = expand_until(|v| Ok(model.slope(v)? >= target), 1.0, s.max_doublings)?;
    let b = bisect_increasing(|v| Ok(model.slope(v)? - target), 0.0, hi, s.bisect_rtol, None)?;
    Ok(b.midpoint())
}

/// `L` and `M` as needed by the large-volume formulas. `M = ∞` short-circuits
/// (it does not need `L`); a finite `M` requires a finite, conclusive `L`.
fn finite_limits(profile: &AsymptoticProfile) -> Result<Option<(f64, f64)>> {
    let m = profile.m()?;
    if m.is_pos_inf() {
        return Ok(None);
    }
    let Some(m) = m.as_finite() else {
        return Err(Error::ModelViolation(format!("M = {m} is impossible for a convex density")));
    };
    let l = profile.l()?;
    let Some(l) = l.as_finite() else {
        return Err(Error::ModelViolation(format!("L = {l} with finite M = {m}")));
    };
    Ok(Some((l, m)))
}

/// `μ_ℓ(V₁) = lim_{V₂→∞} μ(V₁, V₂)`; `−∞` when `M = ∞`.
pub fn mu_limit(model: &DensityModel, profile: &AsymptoticProfile, v1: f64, s: &SolverSettings) -> Result<ExtendedReal> {
    if profile.l()?.is_pos_inf() && !profile.m()?.is_pos_inf() {
        return Err(Error::Undefined("mu_limit requires a finite L".into()));
    }
    match finite_limits(profile)? {
        None => Ok(ExtendedReal::NegInf),
        Some((l, m)) => Ok(ExtendedReal::Finite(mu_limit_finite(model, l, m, v1, s)?)),
    }
}

fn mu_limit_finite(model: &DensityModel, l: f64, m: f64, v1: f64, s: &SolverSettings) -> Result<f64> {
    let vs = solve_v_star(model, ExtendedReal::Finite(l), v1, s)?.v_star;
    Ok(2.0 * model.density(0.5 * v1)? - model.density(vs)? - model.density(vs + v1)? - vs * l - m)
}

/// `lim_{V₁→0} μ_ℓ(V₁) = 2f(0) − 2f(V) + V·L − M` with `V = (f′)⁻¹(L/2)`.
fn mu_limit_near_zero(model: &DensityModel, l: f64, m: f64, s: &SolverSettings) -> Result<f64> {
    let v = slope_inverse(model, 0.5 * l, s)?;
    Ok(2.0 * model.density(0.0)? - 2.0 * model.density(v)? + v * l - m)
}

/// Locates `V₀ = inf{V₁ : μ_ℓ(V₁) ≥ 0}`.
pub fn blowup_time(model: &DensityModel, profile: &AsymptoticProfile, settings: &Settings) -> Result<BlowupTime> {
    let s = &settings.solver;
    let Some((l, m)) = finite_limits(profile)? else {
        return Ok(BlowupTime {
            v0: ExtendedReal::PosInf,
            bracket: None,
            mu_limit_at_bracket: None,
            mu_limit_at_zero: None,
            regime: Regime::NoBlowup,
        });
    };
    let s0 = mu_limit_near_zero(model, l, m, s)?;
    if s0 >= 0.0 {
        return Ok(BlowupTime {
            v0: ExtendedReal::Finite(0.0),
            bracket: None,
            mu_limit_at_bracket: None,
            mu_limit_at_zero: Some(s0),
            regime: Regime::AlwaysDouble,
        });
    }
    let mu_l = |v1: f64| -> Result<f64> {
        if v1 == 0.0 {
            Ok(s0)
        } else {
            mu_limit_finite(model, l, m, v1, s)
        }
    };
    let mut lo = 0.0;
    let mut hi = 2f64.powi(-20);
    let mut doublings = 0;
    while mu_l(hi)? < 0.0 {
        doublings += 1;
        if doublings > s.max_doublings {
            return Err(Error::CapExceeded(format!("mu_limit still negative at V1 = {hi}")));
        }
        lo = hi;
        hi *= 2.0;
    }
    let b = bisect_increasing(mu_l, lo, hi, 0.0, Some(settings.bubbles.blowup_bracket_width))?;
    Ok(BlowupTime {
        v0: ExtendedReal::Finite(b.midpoint()),
        bracket: Some((b.lo, b.hi)),
        mu_limit_at_bracket: Some((mu_l(b.lo)?, mu_l(b.hi)?)),
        mu_limit_at_zero: Some(s0),
        regime: Regime::FiniteBlowup,
    })
}

/// `λ(V₁)`: the `V₂ > V₁` with `μ(V₁, V₂) = 0`.
pub fn tie_volume(model: &DensityModel, blowup: &BlowupTime, v1: f64, settings: &Settings) -> Result<TieSample> {
    let s = &settings.solver;
    if !(v1 > 0.0 && v1.is_finite()) {
        return Err(Error::InvalidArgument(format!("V1 must be positive, got {v1}")));
    }
    if ExtendedReal::Finite(v1) >= blowup.v0 {
        return Err(Error::NoTie {
            v1,
            v0: blowup.v0.to_string(),
        });
    }
    let neg_mu = |v2: f64| -> Result<f64> { Ok(-mu(model, v1, v2, s)?) };
    let cap = 2f64.powi(settings.bubbles.lambda_cap_exp);
    let mut lo = v1;
    let mut hi = 2.0 * v1;
    while neg_mu(hi)? < 0.0 {
        if hi >= cap {
            return Err(Error::CapExceeded(format!(
                "no sign change of mu(V1 = {v1}, V2) up to V2 = {cap}"
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    let b = bisect_increasing(neg_mu, lo, hi, s.bisect_rtol, None)?;
    let lambda = b.midpoint();
    Ok(TieSample {
        v1,
        lambda,
        mu_at_tie: mu(model, v1, lambda, s)?,
    })
}

/// Largest `V₁` the tie curve is sampled at when `V₀` is finite.
pub fn tie_curve_ceiling(v0: f64) -> f64 {
    (1.0 - 2f64.powi(-10)) * v0
}

/// Samples `λ` on `[v1_min, v1_max]`. With a finite `V₀` the upper end is
/// clamped below `V₀` and the samples are geometric in `V₀ − V₁`.
pub fn tie_curve(
    model: &DensityModel,
    blowup: &BlowupTime,
    v1_min: f64,
    v1_max: f64,
    samples: usize,
    settings: &Settings,
) -> Result<TieCurve> {
    if blowup.regime == Regime::AlwaysDouble {
        return Err(Error::NoTieCurve { v0: blowup.v0.to_string() });
    }
    if !(v1_min > 0.0 && v1_max > v1_min && v1_max.is_finite()) || samples == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < v1_min < v1_max and at least one sample, got [{v1_min}, {v1_max}] with {samples}"
        )));
    }
    let mut warnings = Vec::new();
    let points: Vec<f64> = match blowup.v0.as_finite() {
        Some(v0) => {
            let ceiling = tie_curve_ceiling(v0);
            let mut top = v1_max;
            if top > ceiling {
                warnings.push(format!("v1_max = {v1_max} clamped to {ceiling} below V0 = {v0}"));
                top = ceiling;
            }
            if v1_min >= top {
                return Err(Error::InvalidArgument(format!(
                    "v1_min = {v1_min} is not below the clamped upper end {top}"
                )));
            }
            let (d0, d1) = (v0 - v1_min, v0 - top);
            spaced(samples, |t| v0 - d0 * (d1 / d0).powf(t))
        }
        None => spaced(samples, |t| v1_min + (v1_max - v1_min) * t),
    };
    let samples = points
        .par_iter()
        .map(|&v1| tie_volume(model, blowup, v1, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(TieCurve {
        blowup: blowup.clone(),
        samples,
        warnings,
    })
}

fn spaced(n: usize, at: impl Fn(f64) -> f64) -> Vec<f64> {
    if n == 1 {
        return vec![at(0.0)];
    }
    (0..n).map(|i| at(i as f64 / (n - 1) as f64)).collect()
}

/// Decides the minimizer at `(V₁, V₂)`. `v0`, when known, resolves ties at
/// `V₁ ≥ V₀` in favour of the double interval.
pub fn classify(model: &DensityModel, v1: f64, v2: f64, v0: Option<ExtendedReal>, settings: &Settings) -> Result<BubbleAnalysis> {
    let (p2, v_tilde) = perimeter_double(model, v1, v2, &settings.solver)?;
    let p3 = perimeter_triple(model, v1, v2)?;
    let mu = p3 - p2;
    let band = settings.bubbles.tie_rtol * (1.0 + p2.abs());
    let mut verdict = if mu > band {
        Minimizer::Double
    } else if mu < -band {
        Minimizer::Triple
    } else {
        Minimizer::Tie
    };
    if verdict == Minimizer::Tie && v0.is_some_and(|v0| ExtendedReal::Finite(v1) >= v0) {
        verdict = Minimizer::Double;
    }
    Ok(BubbleAnalysis {
        v1,
        v2,
        v_tilde,
        p2,
        p3,
        mu,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Coordinate;
    use crate::limits::{LimitEstimate, Verdict};
    use proptest::prelude::*;

    fn model(f: &str) -> DensityModel {
        DensityModel::parse(f, Coordinate::Volume).unwrap()
    }

    fn exact_profile(l: ExtendedReal, m: ExtendedReal) -> AsymptoticProfile {
        let e = |value| LimitEstimate {
            value,
            verdict: Verdict::Analytic,
            trace: Vec::new(),
        };
        AsymptoticProfile { l: e(l), m: e(m) }
    }

    fn sqrt_setup() -> (DensityModel, AsymptoticProfile, Settings) {
        (
            model("sqrt(V^2+1)-1/2"),
            exact_profile(ExtendedReal::Finite(1.0), ExtendedReal::Finite(0.5)),
            Settings::default(),
        )
    }

    #[test]
    fn perimeters_at_equal_volumes() {
        let (m, _, st) = sqrt_setup();
        let (p2, t) = perimeter_double(&m, 1.0, 1.0, &st.solver).unwrap();
        assert!((p2 - (2.0 * 2f64.sqrt() - 0.5)).abs() < 1e-12);
        assert!((t + 1.0).abs() < 1e-12);
        let p3 = perimeter_triple(&m, 1.0, 1.0).unwrap();
        assert!((p3 - 3.064_495_102_245_979_8).abs() < 1e-12);
        assert!((mu(&m, 1.0, 1.0, &st.solver).unwrap() - 0.736_067_977_499_789_7).abs() < 1e-12);
    }

    #[test]
    fn mu_decreases_in_v2() {
        let st = Settings::default();
        for f in ["sqrt(V^2+1)-1/2", "abs(V)+exp(-abs(V))", "V^2+1", "(exp(V)+exp(-V))/2"] {
            let m = model(f);
            assert!(mu(&m, 1.0, 4.0, &st.solver).unwrap() < mu(&m, 1.0, 2.0, &st.solver).unwrap(), "{f}");
        }
    }

    #[test]
    fn mu_limit_small_volume_values() {
        let (m, p, st) = sqrt_setup();
        let near = mu_limit(&m, &p, 1e-9, &st.solver).unwrap().to_f64();
        assert!((near - (1.5 - 3f64.sqrt())).abs() < 1e-7, "{near}");
        let abs_exp = model("abs(V)+exp(-abs(V))");
        let p1 = exact_profile(ExtendedReal::Finite(1.0), ExtendedReal::Finite(0.0));
        let near = mu_limit(&abs_exp, &p1, 1e-9, &st.solver).unwrap().to_f64();
        assert!((near - (1.0 - 2f64.ln())).abs() < 1e-7, "{near}");
    }

    #[test]
    fn mu_limit_is_minus_infinity_for_unbounded_defect() {
        let m = model("V*atan(V) - log(V^2+1)/2 + 1");
        let p = exact_profile(ExtendedReal::Finite(std::f64::consts::FRAC_PI_2), ExtendedReal::PosInf);
        let st = Settings::default();
        assert_eq!(mu_limit(&m, &p, 1.0, &st.solver).unwrap(), ExtendedReal::NegInf);
    }

    #[test]
    fn mu_limit_needs_finite_slope() {
        let m = model("V^2+1");
        let p = exact_profile(ExtendedReal::PosInf, ExtendedReal::Finite(1.0));
        assert!(mu_limit(&m, &p, 1.0, &SolverSettings::default()).is_err());
    }

    #[test]
    fn mu_approaches_its_limit_from_above() {
        let (m, p, st) = sqrt_setup();
        let lim = mu_limit(&m, &p, 1.0, &st.solver).unwrap().to_f64();
        let mut prev = f64::INFINITY;
        for k in [4, 8, 12, 16, 20] {
            let v = mu(&m, 1.0, 2f64.powi(k), &st.solver).unwrap();
            assert!(v < prev && v > lim);
            prev = v;
        }
        assert!(prev - lim < 1e-3);
    }

    #[test]
    fn three_regimes() {
        let st = Settings::default();
        let abs_exp = model("abs(V)+exp(-abs(V))");
        let b = blowup_time(&abs_exp, &exact_profile(ExtendedReal::Finite(1.0), ExtendedReal::Finite(0.0)), &st).unwrap();
        assert_eq!(b.regime, Regime::AlwaysDouble);
        assert_eq!(b.v0, ExtendedReal::Finite(0.0));

        let (m, p, _) = sqrt_setup();
        let b = blowup_time(&m, &p, &st).unwrap();
        assert_eq!(b.regime, Regime::FiniteBlowup);
        let (lo, hi) = b.bracket.unwrap();
        assert!(hi - lo <= 1e-10);
        // Frozen from a 30-digit bisection with exact L = 1, M = 1/2.
        assert!((b.v0.to_f64() - 0.431_506_734_512_658_06).abs() < 1e-9);
        let (at_lo, at_hi) = b.mu_limit_at_bracket.unwrap();
        assert!(at_lo < 0.0 && at_hi >= 0.0);

        let atan = model("V*atan(V) - log(V^2+1)/2 + 1");
        let b = blowup_time(&atan, &exact_profile(ExtendedReal::Finite(1.0), ExtendedReal::PosInf), &st).unwrap();
        assert_eq!(b.regime, Regime::NoBlowup);
        assert!(b.v0.is_pos_inf());
    }

    #[test]
    fn tie_at_half_blowup_matches_scan() {
        let (m, p, st) = sqrt_setup();
        let b = blowup_time(&m, &p, &st).unwrap();
        let v1 = 0.5 * b.v0.to_f64();
        let t = tie_volume(&m, &b, v1, &st).unwrap();
        assert!(t.lambda > v1);
        assert!(t.mu_at_tie.abs() < 1e-9);
        // Independent oracle: scan μ on a grid of step 1e-3, then bisect the
        // crossing cell with plain f64 arithmetic.
        let mut v2 = v1;
        while mu(&m, v1, v2 + 1e-3, &st.solver).unwrap() > 0.0 {
            v2 += 1e-3;
        }
        let (mut a, mut c) = (v2, v2 + 1e-3);
        for _ in 0..60 {
            let mid = 0.5 * (a + c);
            if mu(&m, v1, mid, &st.solver).unwrap() > 0.0 {
                a = mid
            } else {
                c = mid
            }
        }
        assert!((t.lambda - a).abs() < 1e-8 * (1.0 + a), "{} vs {a}", t.lambda);
        // Frozen from a 30-digit solve with exact L, M.
        assert!((t.lambda - 11.919_545_498_862_243).abs() < 1e-6);
    }

    #[test]
    fn no_tie_without_blowup_room() {
        let st = Settings::default();
        let abs_exp = model("abs(V)+exp(-abs(V))");
        let b = blowup_time(&abs_exp, &exact_profile(ExtendedReal::Finite(1.0), ExtendedReal::Finite(0.0)), &st).unwrap();
        assert!(matches!(tie_volume(&abs_exp, &b, 1.0, &st), Err(Error::NoTie { .. })));
        let e = tie_curve(&abs_exp, &b, 0.1, 1.0, 4, &st).unwrap_err();
        assert_eq!(e.to_string(), "no tie curve: V0=0");
    }

    #[test]
    fn tie_curve_grows_toward_blowup() {
        let (m, p, st) = sqrt_setup();
        let b = blowup_time(&m, &p, &st).unwrap();
        let v0 = b.v0.to_f64();
        let c = tie_curve(&m, &b, 0.01, 10.0, 12, &st).unwrap();
        assert_eq!(c.warnings.len(), 1);
        for w in c.samples.windows(2) {
            assert!(w[1].v1 > w[0].v1 && w[1].lambda > w[0].lambda);
        }
        let last = c.samples.last().unwrap();
        assert!((last.v1 - tie_curve_ceiling(v0)).abs() < 1e-12);
        assert!(last.lambda > 10.0 * c.samples[0].lambda);
    }

    #[test]
    fn classification_examples() {
        let (m, p, st) = sqrt_setup();
        let b = blowup_time(&m, &p, &st).unwrap();
        let v1 = 0.5 * b.v0.to_f64();
        let t = tie_volume(&m, &b, v1, &st).unwrap();
        assert_eq!(classify(&m, 1.0, 1.0, Some(b.v0), &st).unwrap().verdict, Minimizer::Double);
        assert_eq!(classify(&m, v1, 2.0 * t.lambda, Some(b.v0), &st).unwrap().verdict, Minimizer::Triple);
        assert_eq!(classify(&m, v1, t.lambda, Some(b.v0), &st).unwrap().verdict, Minimizer::Tie);
        let abs_exp = model("abs(V)+exp(-abs(V))");
        assert_eq!(classify(&abs_exp, 1.0, 100.0, None, &st).unwrap().verdict, Minimizer::Double);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn equal_volume_gap_closed_form(v in 0.001f64..40.0) {
            let m = model("sqrt(V^2+1)-1/2");
            let st = SolverSettings::default();
            let expected = 2.0 * m.density(0.5 * v).unwrap() - m.density(0.0).unwrap();
            let got = mu(&m, v, v, &st).unwrap();
            prop_assert!((got - expected).abs() < 1e-10);
            prop_assert!(got > 0.0);
        }

        #[test]
        fn mu_monotone_in_both_volumes(v1 in 0.05f64..5.0, extra in 0.0f64..20.0, bump in 0.01f64..2.0) {
            let m = model("abs(V)+exp(-abs(V))");
            let st = SolverSettings::default();
            let v2 = v1 + extra + bump;
            let base = mu(&m, v1, v2, &st).unwrap();
            prop_assert!(mu(&m, v1, v2 + bump, &st).unwrap() < base);
            prop_assert!(mu(&m, (v1 + bump).min(v2), v2, &st).unwrap() > base);
        }

        #[test]
        fn mu_limit_nondecreasing(v1 in 0.01f64..10.0, bump in 0.01f64..2.0) {
            let (m, p, st) = sqrt_setup();
            let a = mu_limit(&m, &p, v1, &st.solver).unwrap().to_f64();
            let b = mu_limit(&m, &p, v1 + bump, &st.solver).unwrap().to_f64();
            prop_assert!(b >= a);
        }
    }
}
