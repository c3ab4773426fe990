//! Multi-granularity linguistic partitions, triangular memberships, label
//! similarity, and quantified-proposition evaluation.
//!
//! Every variable lives on a closed universe `[min, max]`. A granularity `i`
//! partitions the universe into `i` uniformly spaced triangular labels forming
//! a strong partition (memberships sum to 1 at every interior point). Edge
//! labels are clipped triangles with their centers at the universe endpoints;
//! the granularity-1 label covers the whole universe with membership 1.

use std::fmt;

use thiserror::Error;

/// Number of grid points used by [`similarity`] unless a caller overrides it.
pub const DEFAULT_SIMILARITY_GRID: usize = 101;

/// Relative width used to widen degenerate (zero-support) masks.
pub const DEFAULT_MASK_EPSILON_FRAC: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("invalid universe: min {min} must be below max {max}")]
    InvalidUniverse { min: f64, max: f64 },
    #[error("label index {index} outside granularity {granularity}")]
    InvalidLabelIndex { index: u32, granularity: u32 },
    #[error("quantifier percentage {0} outside [10, 100]")]
    InvalidQuantifier(f64),
    #[error("sector label covers no beams")]
    EmptySector,
    #[error("mask bounds are not ordered: ({left}, {center}, {right})")]
    InvalidMask { left: f64, center: f64, right: f64 },
}

/// Which variable a universe (and everything defined on it) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Distance,
    Beam,
    Velocity,
    LinVel,
    AngVel,
    Quantifier,
}

impl VarKind {
    pub fn name(self) -> &'static str {
        match self {
            VarKind::Distance => "distance",
            VarKind::Beam => "beam",
            VarKind::Velocity => "velocity",
            VarKind::LinVel => "vlin",
            VarKind::AngVel => "vang",
            VarKind::Quantifier => "quantifier",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "distance" => VarKind::Distance,
            "beam" => VarKind::Beam,
            "velocity" => VarKind::Velocity,
            "vlin" => VarKind::LinVel,
            "vang" => VarKind::AngVel,
            "quantifier" => VarKind::Quantifier,
            _ => return None,
        })
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed universe of discourse for one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableUniverse {
    pub kind: VarKind,
    pub min: f64,
    pub max: f64,
}

impl VariableUniverse {
    pub fn new(kind: VarKind, min: f64, max: f64) -> Result<Self, FuzzyError> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(FuzzyError::InvalidUniverse { min, max });
        }
        Ok(Self { kind, min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

/// Anything with a membership function and a (closed) support interval.
pub trait MembershipFn {
    fn membership(&self, x: f64) -> f64;
    /// Support interval `(lo, hi)`, clipped to the universe.
    fn support(&self) -> (f64, f64);

    fn support_width(&self) -> f64 {
        let (lo, hi) = self.support();
        (hi - lo).max(0.0)
    }
}

/// Label `j` of the uniform partition of granularity `i` on a universe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinguisticLabel {
    pub universe: VariableUniverse,
    pub granularity: u32,
    pub index: u32,
}

impl LinguisticLabel {
    pub fn new(universe: VariableUniverse, granularity: u32, index: u32) -> Result<Self, FuzzyError> {
        if granularity == 0 || index == 0 || index > granularity {
            return Err(FuzzyError::InvalidLabelIndex { index, granularity });
        }
        Ok(Self { universe, granularity, index })
    }

    pub fn center(&self) -> f64 {
        if self.granularity == 1 {
            (self.universe.min + self.universe.max) / 2.0
        } else {
            self.universe.min
                + (self.index as f64 - 1.0) * self.universe.width() / (self.granularity as f64 - 1.0)
        }
    }

    /// Half-width of the triangle; the full universe for granularity 1.
    pub fn half_width(&self) -> f64 {
        if self.granularity == 1 {
            self.universe.width()
        } else {
            self.universe.width() / (self.granularity as f64 - 1.0)
        }
    }

    /// All labels of one granularity, in index order.
    pub fn partition(universe: VariableUniverse, granularity: u32) -> Vec<LinguisticLabel> {
        (1..=granularity)
            .map(|j| LinguisticLabel { universe, granularity, index: j })
            .collect()
    }

    /// The partition label with the largest membership for `x`.
    pub fn argmax(universe: VariableUniverse, granularity: u32, x: f64) -> LinguisticLabel {
        let x = universe.clamp(x);
        if granularity == 1 {
            return LinguisticLabel { universe, granularity, index: 1 };
        }
        let spacing = universe.width() / (granularity as f64 - 1.0);
        let j = ((x - universe.min) / spacing).round() as u32 + 1;
        LinguisticLabel { universe, granularity, index: j.clamp(1, granularity) }
    }
}

impl MembershipFn for LinguisticLabel {
    fn membership(&self, x: f64) -> f64 {
        if self.granularity == 1 {
            return 1.0;
        }
        let x = self.universe.clamp(x);
        (1.0 - (x - self.center()).abs() / self.half_width()).max(0.0)
    }

    fn support(&self) -> (f64, f64) {
        if self.granularity == 1 {
            return (self.universe.min, self.universe.max);
        }
        let c = self.center();
        let hw = self.half_width();
        (self.universe.clamp(c - hw), self.universe.clamp(c + hw))
    }
}

/// Triangle described by the points where membership reaches 0.5 on each side
/// and 1 at the center. The base therefore extends past `left`/`right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularMask {
    pub universe: VariableUniverse,
    pub left: f64,
    pub center: f64,
    pub right: f64,
}

impl TriangularMask {
    pub fn new(universe: VariableUniverse, left: f64, center: f64, right: f64) -> Result<Self, FuzzyError> {
        if !(left <= center && center <= right) {
            return Err(FuzzyError::InvalidMask { left, center, right });
        }
        Ok(Self { universe, left, center, right })
    }

    /// Widens a zero-width side so the mask has positive support.
    pub fn widened(mut self, epsilon_frac: f64) -> Self {
        let eps = epsilon_frac * self.universe.width();
        if self.center - self.left <= 0.0 {
            self.left = self.center - eps / 2.0;
        }
        if self.right - self.center <= 0.0 {
            self.right = self.center + eps / 2.0;
        }
        self
    }

    fn base_left(&self) -> f64 {
        self.center - 2.0 * (self.center - self.left)
    }

    fn base_right(&self) -> f64 {
        self.center + 2.0 * (self.right - self.center)
    }
}

impl MembershipFn for TriangularMask {
    fn membership(&self, x: f64) -> f64 {
        let x = self.universe.clamp(x);
        if x < self.center {
            let span = self.center - self.base_left();
            if span <= 0.0 {
                return if x >= self.center { 1.0 } else { 0.0 };
            }
            ((x - self.base_left()) / span).clamp(0.0, 1.0)
        } else {
            let span = self.base_right() - self.center;
            if span <= 0.0 {
                return if x <= self.center { 1.0 } else { 0.0 };
            }
            ((self.base_right() - x) / span).clamp(0.0, 1.0)
        }
    }

    fn support(&self) -> (f64, f64) {
        (
            self.universe.clamp(self.base_left()),
            self.universe.clamp(self.base_right()),
        )
    }
}

/// "At least q percent" proportional quantifier, `q` in `[10, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantifierLabel {
    pub q_percent: f64,
}

impl QuantifierLabel {
    pub fn new(q_percent: f64) -> Result<Self, FuzzyError> {
        if !(10.0..=100.0).contains(&q_percent) {
            return Err(FuzzyError::InvalidQuantifier(q_percent));
        }
        Ok(Self { q_percent })
    }

    /// Clamps into the quantifier universe instead of failing.
    pub fn clamped(q_percent: f64) -> Self {
        Self { q_percent: q_percent.clamp(10.0, 100.0) }
    }

    /// Ramp from zero reaching 1 once the proportion hits `q` percent.
    pub fn fulfillment(&self, proportion: f64) -> f64 {
        (100.0 * proportion / self.q_percent).clamp(0.0, 1.0)
    }
}

/// Similarity of two membership functions: `1 - mean |mu_a - mu_b|` over a
/// uniform grid on the support of their union. When the supports are disjoint
/// the grid is spread over both intervals proportionally to their lengths (the
/// gap between them carries no grid points). Degenerate joint support gives 0.
pub fn similarity<A: MembershipFn + ?Sized, B: MembershipFn + ?Sized>(
    a: &A,
    b: &B,
    grid_points: usize,
) -> f64 {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let segments: [(f64, f64); 2] = if ahi >= blo && bhi >= alo {
        let lo = alo.min(blo);
        let hi = ahi.max(bhi);
        [(lo, hi), (hi, hi)]
    } else if ahi < blo {
        [(alo, ahi), (blo, bhi)]
    } else {
        [(blo, bhi), (alo, ahi)]
    };
    let len0 = segments[0].1 - segments[0].0;
    let len1 = segments[1].1 - segments[1].0;
    let total = len0 + len1;
    if !(total > 0.0) || grid_points < 2 {
        return 0.0;
    }
    let n = grid_points;
    let mut acc = 0.0;
    for i in 0..n {
        let t = total * i as f64 / (n as f64 - 1.0);
        let x = if t <= len0 {
            segments[0].0 + t
        } else {
            segments[1].0 + (t - len0)
        };
        acc += (a.membership(x) - b.membership(x)).abs();
    }
    1.0 - acc / n as f64
}

/// Whether the supports of two membership functions overlap with positive
/// measure.
pub fn supports_overlap<A: MembershipFn + ?Sized, B: MembershipFn + ?Sized>(a: &A, b: &B) -> bool {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    ahi.min(bhi) > alo.max(blo)
}

/// Hard ceiling on the granularity scan in [`mask_to_label`]. Labels finer
/// than this are narrower than any practical sensor resolution; the cap keeps
/// the scan finite even for masks widened from zero support.
pub const MAX_MASK_GRANULARITY: u32 = 2048;

/// Most similar partition label with support no wider than the mask's.
///
/// Equivalent to exhaustively scanning every label of every granularity up to
/// `1 + 2·width/support(mask)`, keeping the most similar among those whose
/// support does not exceed the mask's (first encountered wins ties, iterating
/// granularities then indexes in ascending order). Within one granularity the
/// scan only evaluates labels near the mask plus one representative on each
/// side: labels whose support is disjoint from the mask's all share the same
/// similarity (it depends only on the interval lengths), so the lowest-index
/// one stands for the rest without changing the argmax. Degenerate masks are
/// widened first so the scan terminates.
pub fn mask_to_label(mask: &TriangularMask, grid_points: usize) -> LinguisticLabel {
    let mask = mask.widened(DEFAULT_MASK_EPSILON_FRAC);
    let s = mask.support_width();
    let width = mask.universe.width();
    let i_max = (((1.0 + 2.0 * width / s).ceil() + 1.0) as u64)
        .min(MAX_MASK_GRANULARITY as u64) as u32;
    // When the cap truncates the scan (near-degenerate masks), relax the
    // width bound just enough for the finest edge labels to qualify.
    let s = s.max(width / (i_max as f64 - 1.0));
    let (mlo, mhi) = mask.support();
    let mut best: Option<(LinguisticLabel, f64)> = None;
    let consider = |label: LinguisticLabel, best: &mut Option<(LinguisticLabel, f64)>| {
        if label.support_width() <= s {
            let sim = similarity(&mask, &label, grid_points);
            if best.map_or(true, |(_, bs)| sim > bs) {
                *best = Some((label, sim));
            }
        }
    };
    for i in 1..=i_max {
        if i <= 2 {
            for label in LinguisticLabel::partition(mask.universe, i) {
                consider(label, &mut best);
            }
            continue;
        }
        let spacing = width / (i as f64 - 1.0);
        // Interior labels near the mask (padded by one spacing to be safe).
        let lo_j = (((mlo - spacing - mask.universe.min) / spacing - 1.0).floor() as i64).max(2);
        let hi_j = (((mhi + spacing - mask.universe.min) / spacing + 2.0).ceil() as i64)
            .min(i as i64 - 1);
        let mut indexes: Vec<u32> = Vec::with_capacity((hi_j - lo_j + 6).max(0) as usize);
        indexes.push(1);
        if lo_j > 2 {
            indexes.push(2); // representative of the left disjoint labels
        }
        for j in lo_j..=hi_j {
            indexes.push(j as u32);
        }
        if hi_j >= 2 && hi_j < i as i64 - 1 {
            indexes.push(hi_j as u32 + 1); // representative of the right disjoint labels
        }
        indexes.push(i);
        indexes.dedup();
        for j in indexes {
            consider(LinguisticLabel { universe: mask.universe, granularity: i, index: j }, &mut best);
        }
    }
    // The bound guarantees at least the edge labels of the last granularity
    // qualify.
    best.expect("granularity bound always yields a candidate label").0
}

/// Proportion of a sector's (fuzzy) beam mass whose distance satisfies `f_d`.
pub fn proportion(
    scan: &[f64],
    f_d: &LinguisticLabel,
    f_b: &LinguisticLabel,
) -> Result<f64, FuzzyError> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (h, &d) in scan.iter().enumerate() {
        let mu_b = f_b.membership(h as f64);
        if mu_b > 0.0 {
            num += f_d.membership(d).min(mu_b);
            den += mu_b;
        }
    }
    if den == 0.0 {
        return Err(FuzzyError::EmptySector);
    }
    Ok(num / den)
}
