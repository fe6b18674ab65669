//! Brute-force minimization of weighted perimeter over configurations of
//! finitely many intervals, as an independent check on the double/triple
//! dichotomy.
//!
//! A pattern fixes the left-to-right order of region pieces and whether
//! neighbouring pieces touch or are separated by an empty gap. Its free
//! parameters are the left offset, all but the last piece length of each
//! region (the last is fixed by the volume constraint) and the gap lengths.
//! Every boundary position is affine in those parameters, so the perimeter is
//! a convex function of them and a grid-refining coordinate descent suffices.
//!
//! Patterns are visited in order of a lower bound: each boundary point
//! separates two of {R1, R2, empty}, so the perimeter is half the sum of the
//! perimeters of R1, R2 and their union. A set of volume `V` made of `m`
//! intervals has perimeter at least `2f(V/2) + 2(m−1)f(0)`, which bounds the
//! pattern's optimum from below. Patterns whose bound exceeds the best value
//! found so far are skipped.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubbles::{perimeter_double, perimeter_triple};
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::settings::{OracleSettings, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    Empty,
    Region1,
    Region2,
}

impl Label {
    fn short(self) -> &'static str {
        match self {
            Label::Empty => "_",
            Label::Region1 => "R1",
            Label::Region2 => "R2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Join {
    Touch,
    Gap,
}

/// Ordered region pieces and the joins between neighbours.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pattern {
    pub pieces: Vec<Label>,
    pub joins: Vec<Join>,
}

impl Pattern {
    fn count(&self, label: Label) -> usize {
        self.pieces.iter().filter(|&&p| p == label).count()
    }

    fn components(&self) -> usize {
        1 + self.joins.iter().filter(|&&j| j == Join::Gap).count()
    }

    fn reversed(&self) -> Pattern {
        Pattern {
            pieces: self.pieces.iter().rev().copied().collect(),
            joins: self.joins.iter().rev().copied().collect(),
        }
    }

    /// Number of boundary points before collapsing.
    pub fn boundary_count(&self) -> usize {
        2 + self.joins.iter().map(|j| if *j == Join::Touch { 1 } else { 2 }).sum::<usize>()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                f.write_str(if self.joins[i - 1] == Join::Touch { "|" } else { " _ " })?;
            }
            f.write_str(p.short())?;
        }
        Ok(())
    }
}

/// All patterns with between 1 and `k` pieces per region, one per
/// reflection pair.
pub fn enumerate_patterns(k: usize) -> Vec<Pattern> {
    let mut out = Vec::new();
    for n1 in 1..=k {
        for n2 in 1..=k {
            let mut pieces = Vec::with_capacity(n1 + n2);
            orders(n1, n2, &mut pieces, &mut |pieces| {
                let n = pieces.len();
                let choices: Vec<bool> = (0..n - 1).map(|i| pieces[i] != pieces[i + 1]).collect();
                let free = choices.iter().filter(|&&c| c).count();
                for mask in 0..(1u32 << free) {
                    let mut bit = 0;
                    let joins = choices
                        .iter()
                        .map(|&can_touch| {
                            if !can_touch {
                                return Join::Gap;
                            }
                            let touch = mask >> bit & 1 == 1;
                            bit += 1;
                            if touch {
                                Join::Touch
                            } else {
                                Join::Gap
                            }
                        })
                        .collect();
                    let p = Pattern {
                        pieces: pieces.to_vec(),
                        joins,
                    };
                    if p <= p.reversed() {
                        out.push(p);
                    }
                }
            });
        }
    }
    out
}

fn orders(n1: usize, n2: usize, acc: &mut Vec<Label>, emit: &mut dyn FnMut(&[Label])) {
    if n1 == 0 && n2 == 0 {
        emit(acc);
        return;
    }
    for (label, left) in [(Label::Region1, n1), (Label::Region2, n2)] {
        if left > 0 {
            acc.push(label);
            if label == Label::Region1 {
                orders(n1 - 1, n2, acc, emit);
            } else {
                orders(n1, n2 - 1, acc, emit);
            }
            acc.pop();
        }
    }
}

/// Sorted boundary points and the labels of the bounded gaps between them
/// (`labels.len() == boundaries.len() − 1`); everything outside is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalConfiguration {
    pub boundaries: Vec<f64>,
    pub labels: Vec<Label>,
}

impl IntervalConfiguration {
    pub fn volume(&self, label: Label) -> f64 {
        self.labels
            .iter()
            .zip(self.boundaries.windows(2))
            .filter(|(l, _)| **l == label)
            .map(|(_, w)| w[1] - w[0])
            .sum()
    }

    pub fn perimeter(&self, model: &DensityModel) -> Result<f64> {
        self.boundaries.iter().map(|&b| model.density(b)).sum()
    }

    /// Mirror image through the origin.
    pub fn reflected(&self) -> Self {
        Self {
            boundaries: self.boundaries.iter().rev().map(|b| -b).collect(),
            labels: self.labels.iter().rev().copied().collect(),
        }
    }

    /// Drops gaps narrower than `width`, merges equal neighbours and trims
    /// empty ends.
    pub fn collapsed(&self, width: f64) -> Self {
        let mut boundaries = vec![self.boundaries[0]];
        let mut labels: Vec<Label> = Vec::new();
        for (i, &label) in self.labels.iter().enumerate() {
            let right = self.boundaries[i + 1];
            if right - boundaries[boundaries.len() - 1] <= width && i + 1 < self.labels.len() {
                continue;
            }
            if labels.last() == Some(&label) {
                *boundaries.last_mut().unwrap() = right;
            } else {
                labels.push(label);
                boundaries.push(right);
            }
        }
        while labels.first() == Some(&Label::Empty) {
            labels.remove(0);
            boundaries.remove(0);
        }
        while labels.last() == Some(&Label::Empty) {
            labels.pop();
            boundaries.pop();
        }
        Self { boundaries, labels }
    }

    pub fn topology(&self) -> Topology {
        use Label::*;
        match self.labels.as_slice() {
            [Region1, Region2] | [Region2, Region1] => Topology::Double,
            [Region2, Region1, Region2] => Topology::Triple,
            _ => Topology::Other,
        }
    }

    pub fn describe(&self) -> String {
        self.labels.iter().map(|l| l.short()).collect::<Vec<_>>().join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Topology {
    Double,
    Triple,
    Other,
}

/// Free parameters of one pattern: `[offset, lengths.., gaps..]`.
struct Layout<'a> {
    pattern: &'a Pattern,
    v1: f64,
    v2: f64,
    /// For each piece, its parameter index, or `None` for the substituted
    /// last piece of its region.
    length_slot: Vec<Option<usize>>,
    gap_slot: Vec<Option<usize>>,
    dim: usize,
}

impl<'a> Layout<'a> {
    fn new(pattern: &'a Pattern, v1: f64, v2: f64) -> Self {
        let mut dim = 1;
        let mut length_slot = Vec::new();
        for (i, &p) in pattern.pieces.iter().enumerate() {
            let is_last = !pattern.pieces[i + 1..].contains(&p);
            if is_last {
                length_slot.push(None);
            } else {
                length_slot.push(Some(dim));
                dim += 1;
            }
        }
        let mut gap_slot = Vec::new();
        for &j in &pattern.joins {
            if j == Join::Gap {
                gap_slot.push(Some(dim));
                dim += 1;
            } else {
                gap_slot.push(None);
            }
        }
        Self {
            pattern,
            v1,
            v2,
            length_slot,
            gap_slot,
            dim,
        }
    }

    fn volume_of(&self, label: Label) -> f64 {
        if label == Label::Region1 {
            self.v1
        } else {
            self.v2
        }
    }

    fn lengths(&self, x: &[f64]) -> Vec<f64> {
        let mut used = [0.0; 2];
        let idx = |l: Label| usize::from(l == Label::Region2);
        let mut out: Vec<f64> = self
            .length_slot
            .iter()
            .zip(&self.pattern.pieces)
            .map(|(slot, &p)| match slot {
                Some(s) => {
                    used[idx(p)] += x[*s];
                    x[*s]
                }
                None => 0.0,
            })
            .collect();
        for (i, slot) in self.length_slot.iter().enumerate() {
            if slot.is_none() {
                let p = self.pattern.pieces[i];
                out[i] = (self.volume_of(p) - used[idx(p)]).max(0.0);
            }
        }
        out
    }

    fn initial(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        x[0] = -0.5 * (self.v1 + self.v2);
        for (slot, &p) in self.length_slot.iter().zip(&self.pattern.pieces) {
            if let Some(s) = slot {
                x[*s] = self.volume_of(p) / self.pattern.count(p) as f64;
            }
        }
        x
    }

    /// Feasible range of coordinate `i` with the others held fixed.
    fn range(&self, x: &[f64], i: usize) -> (f64, f64) {
        if i == 0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        if let Some(piece) = self.length_slot.iter().position(|s| *s == Some(i)) {
            let label = self.pattern.pieces[piece];
            let others: f64 = self
                .length_slot
                .iter()
                .zip(&self.pattern.pieces)
                .filter(|(s, &p)| p == label && s.is_some() && **s != Some(i))
                .map(|(s, _)| x[s.unwrap()])
                .sum();
            return (0.0, (self.volume_of(label) - others).max(0.0));
        }
        (0.0, f64::INFINITY)
    }

    fn configuration(&self, x: &[f64]) -> IntervalConfiguration {
        let lengths = self.lengths(x);
        let mut pos = x[0];
        let mut boundaries = vec![pos];
        let mut labels = Vec::new();
        for (i, &p) in self.pattern.pieces.iter().enumerate() {
            pos += lengths[i];
            boundaries.push(pos);
            labels.push(p);
            if let Some(Some(g)) = self.gap_slot.get(i) {
                pos += x[*g];
                boundaries.push(pos);
                labels.push(Label::Empty);
            }
        }
        IntervalConfiguration { boundaries, labels }
    }

    /// Perimeter without collapsing: touching pieces share one boundary, a
    /// gap contributes both of its ends even at zero width.
    ///
    /// Coordinate moves leave most boundaries bit-identical, so densities
    /// are memoized per pattern.
    fn objective(&self, model: &DensityModel, x: &[f64], memo: &mut HashMap<u64, f64>) -> Result<f64> {
        let mut total = 0.0;
        for b in self.configuration(x).boundaries {
            total += match memo.get(&b.to_bits()) {
                Some(&f) => f,
                None => {
                    let f = model.density(b)?;
                    memo.insert(b.to_bits(), f);
                    f
                }
            };
        }
        Ok(total)
    }
}

struct PatternResult {
    value: f64,
    config: IntervalConfiguration,
}

fn minimize_pattern(
    model: &DensityModel,
    layout: &Layout,
    s: &OracleSettings,
    deadline: Instant,
) -> Result<(PatternResult, bool)> {
    let mut x = layout.initial();
    let mut memo = HashMap::new();
    let mut best = layout.objective(model, &x, &mut memo)?;
    let mut step = 0.5 * (layout.v1 + layout.v2);
    let mut timed_out = false;
    'levels: for _ in 0..=s.levels {
        loop {
            let mut improved = false;
            for i in 0..layout.dim {
                let (lo, hi) = layout.range(&x, i);
                for dir in [1.0, -1.0] {
                    loop {
                        let old = x[i];
                        let trial = (old + dir * step).clamp(lo, hi);
                        if trial == old {
                            break;
                        }
                        x[i] = trial;
                        let value = layout.objective(model, &x, &mut memo)?;
                        if value < best {
                            best = value;
                            improved = true;
                        } else {
                            x[i] = old;
                            break;
                        }
                    }
                }
            }
            if Instant::now() > deadline {
                timed_out = true;
                break 'levels;
            }
            if !improved {
                break;
            }
        }
        step /= s.refine_factor;
    }
    Ok((
        PatternResult {
            value: best,
            config: layout.configuration(&x),
        },
        timed_out,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    #[serde(rename = "V1")]
    pub v1: f64,
    #[serde(rename = "V2")]
    pub v2: f64,
    pub max_intervals_per_region: usize,
    /// Best configuration with zero-width gaps collapsed.
    pub best: IntervalConfiguration,
    pub best_pattern: String,
    pub topology: Topology,
    pub perimeter: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    #[serde(rename = "P3")]
    pub p3: f64,
    pub formula_min: f64,
    pub difference: f64,
    pub agreement: bool,
    pub patterns_total: usize,
    pub patterns_searched: usize,
    pub budget_exhausted: bool,
    pub elapsed_secs: f64,
}

/// Relative agreement tolerance between the oracle and `min(P₂, P₃)`.
pub const AGREEMENT_RTOL: f64 = 1e-6;

pub fn brute_force_minimize(
    model: &DensityModel,
    v1: f64,
    v2: f64,
    max_intervals_per_region: usize,
    settings: &OracleSettings,
    solver: &SolverSettings,
) -> Result<OracleReport> {
    if !(1..=3).contains(&max_intervals_per_region) {
        return Err(Error::InvalidArgument(format!(
            "max_intervals_per_region must be 1, 2 or 3, got {max_intervals_per_region}"
        )));
    }
    if !(v1 > 0.0 && v2 >= v1 && v2.is_finite()) {
        return Err(Error::InvalidArgument(format!("volumes must satisfy 0 < V1 <= V2, got V1 = {v1}, V2 = {v2}")));
    }
    let start = Instant::now();
    let deadline = start + std::time::Duration::from_secs_f64(settings.budget_secs);
    let f0 = model.density(0.0)?;
    let base = model.density(0.5 * v1)? + model.density(0.5 * v2)? + model.density(0.5 * (v1 + v2))?;

    let mut patterns: Vec<(f64, Pattern)> = enumerate_patterns(max_intervals_per_region)
        .into_iter()
        .map(|p| {
            let extra = p.count(Label::Region1) + p.count(Label::Region2) + p.components() - 3;
            (base + extra as f64 * f0, p)
        })
        .collect();
    patterns.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.boundary_count().cmp(&b.1.boundary_count())));
    let patterns_total = patterns.len();

    let mut best: Option<(PatternResult, &Pattern)> = None;
    let mut searched = 0;
    let mut budget_exhausted = false;
    let chunk = rayon::current_num_threads().max(1) * 4;
    let mut next = 0;
    while next < patterns.len() {
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0.value);
        if patterns[next].0 > incumbent {
            break;
        }
        let end = (next + chunk).min(patterns.len());
        let batch: Vec<&(f64, Pattern)> = patterns[next..end].iter().filter(|(lb, _)| *lb <= incumbent).collect();
        let results = batch
            .par_iter()
            .map(|(_, p)| minimize_pattern(model, &Layout::new(p, v1, v2), settings, deadline).map(|r| (r, p)))
            .collect::<Result<Vec<_>>>()?;
        searched += results.len();
        for ((r, timed_out), p) in results {
            budget_exhausted |= timed_out;
            if best.as_ref().is_none_or(|b| r.value < b.0.value) {
                best = Some((r, p));
            }
        }
        next = end;
        if budget_exhausted {
            break;
        }
    }
    let (result, pattern) = best.ok_or_else(|| Error::CapExceeded("no pattern was searched".into()))?;

    let (p2, _) = perimeter_double(model, v1, v2, solver)?;
    let p3 = perimeter_triple(model, v1, v2)?;
    let formula_min = p2.min(p3);
    let difference = result.value - formula_min;
    let best = result.config.collapsed(1e-12 * (1.0 + v1 + v2));
    Ok(OracleReport {
        v1,
        v2,
        max_intervals_per_region,
        topology: best.topology(),
        perimeter: result.value,
        best,
        best_pattern: pattern.to_string(),
        p2,
        p3,
        formula_min,
        difference,
        agreement: difference.abs() <= AGREEMENT_RTOL * (1.0 + formula_min),
        patterns_total,
        patterns_searched: searched,
        budget_exhausted,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
