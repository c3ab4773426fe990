//! Evolutionary learning of quantified fuzzy rules from examples.
//!
//! The algorithm is iterative rule learning: each epoch runs a small
//! steady-state evolutionary search whose individuals are single rules, the
//! best rule is appended to the knowledge base, and the examples it covers
//! accurately are removed. [`engine`] holds the epoch loop, [`ops`] the
//! genetic operators, and this module the configuration, the fitness
//! arithmetic, and population initialization from raw examples.

pub mod engine;
pub mod ops;

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{write_file, DatasetError, TrainingExample};
use crate::fuzzy::{
    mask_to_label, proportion, LinguisticLabel, QuantifierLabel, TriangularMask,
    DEFAULT_SIMILARITY_GRID,
};
use crate::kb_io::{LineTokens, ParseError};
use crate::model::{
    Consequent, KbKind, QFRule, RuleConsequent, SectorProposition, Universes, VelocityProposition,
    VANG_GRANULARITY, VLIN_GRANULARITY,
};

pub use engine::{train, EpochLog, Individual, Scores, Task};

/// All tunables of the learner. Field names double as the keys of the
/// key-value config file format.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Meaningful error: scale of the match-probability exponential.
    pub me: f64,
    /// Minimum degree of fulfillment for an example to count as covered.
    pub dof_min: f64,
    /// Weight of confidence (vs. support) in the fitness.
    pub alpha_f: f64,
    /// Probability of crossover (vs. mutation) per iteration.
    pub p_cross: f64,
    /// Population cap.
    pub pop_max: usize,
    /// Minimum iterations before the stagnation check applies.
    pub it_min: u32,
    /// Consecutive stagnant iterations that end an epoch.
    pub it_check: u32,
    /// Hard iteration cap per epoch.
    pub it_max: u32,
    /// Segmentation threshold: max standard deviation of normalized distances
    /// within one beam group.
    pub sigma_bd: f64,
    /// Separation between adjacent velocity labels as a fraction of the
    /// velocity range; fixes the velocity-proposition granularity.
    pub sigma_v: f64,
    /// Minimum admissible match probability for accurate coverage.
    pub p_min: f64,
    /// Grid size for label similarity computations.
    pub similarity_grid: usize,
    /// Merge may exceed the finest input granularity by at most this much.
    pub merge_extra_granularity: u32,
    /// Floor on initialization mask half-widths, as a fraction of the
    /// universe width (keeps masks from degenerating on constant signals).
    pub mask_min_frac: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            me: 0.02,
            dof_min: 0.001,
            alpha_f: 0.99,
            p_cross: 0.8,
            pop_max: 70,
            it_min: 50,
            it_check: 10,
            it_max: 100,
            sigma_bd: 0.01,
            sigma_v: 0.1,
            p_min: 0.17,
            similarity_grid: DEFAULT_SIMILARITY_GRID,
            merge_extra_granularity: 20,
            mask_min_frac: 0.005,
        }
    }
}

impl LearnerConfig {
    /// Granularity of the measured-velocity proposition: adjacent label
    /// centers sit `sigma_v` of the range apart.
    pub fn velocity_granularity(&self) -> u32 {
        (1.0 + 1.0 / self.sigma_v).round() as u32
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "me = {}", self.me);
        let _ = writeln!(out, "dof_min = {}", self.dof_min);
        let _ = writeln!(out, "alpha_f = {}", self.alpha_f);
        let _ = writeln!(out, "p_cross = {}", self.p_cross);
        let _ = writeln!(out, "pop_max = {}", self.pop_max);
        let _ = writeln!(out, "it_min = {}", self.it_min);
        let _ = writeln!(out, "it_check = {}", self.it_check);
        let _ = writeln!(out, "it_max = {}", self.it_max);
        let _ = writeln!(out, "sigma_bd = {}", self.sigma_bd);
        let _ = writeln!(out, "sigma_v = {}", self.sigma_v);
        let _ = writeln!(out, "p_min = {}", self.p_min);
        let _ = writeln!(out, "similarity_grid = {}", self.similarity_grid);
        let _ = writeln!(out, "merge_extra_granularity = {}", self.merge_extra_granularity);
        let _ = writeln!(out, "mask_min_frac = {}", self.mask_min_frac);
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = LineTokens::new(line_no, raw);
            let (kcol, key) = toks.expect("a config key")?;
            toks.expect_keyword("=")?;
            match key {
                "me" => cfg.me = toks.expect_f64("me")?,
                "dof_min" => cfg.dof_min = toks.expect_f64("dof_min")?,
                "alpha_f" => cfg.alpha_f = toks.expect_f64("alpha_f")?,
                "p_cross" => cfg.p_cross = toks.expect_f64("p_cross")?,
                "pop_max" => cfg.pop_max = toks.expect_usize("pop_max")?,
                "it_min" => cfg.it_min = toks.expect_u32("it_min")?,
                "it_check" => cfg.it_check = toks.expect_u32("it_check")?,
                "it_max" => cfg.it_max = toks.expect_u32("it_max")?,
                "sigma_bd" => cfg.sigma_bd = toks.expect_f64("sigma_bd")?,
                "sigma_v" => cfg.sigma_v = toks.expect_f64("sigma_v")?,
                "p_min" => cfg.p_min = toks.expect_f64("p_min")?,
                "similarity_grid" => cfg.similarity_grid = toks.expect_usize("similarity_grid")?,
                "merge_extra_granularity" => {
                    cfg.merge_extra_granularity = toks.expect_u32("merge_extra_granularity")?
                }
                "mask_min_frac" => cfg.mask_min_frac = toks.expect_f64("mask_min_frac")?,
                other => return Err(toks.error(kcol, other, "unknown config key")),
            }
            toks.expect_end()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        write_file(path, &self.serialize())
    }
}

/// Squared output error of a control consequent against an example, each
/// output normalized by its range.
pub fn consequent_error(c: &Consequent, e: &TrainingExample, universes: &Universes) -> f64 {
    output_error(c.vlin.center(), c.vang.center(), e, universes)
}

/// Squared normalized error of crisp outputs against an example's outputs.
pub fn output_error(vlin: f64, vang: f64, e: &TrainingExample, universes: &Universes) -> f64 {
    let dl = (e.vlin - vlin) / universes.vlin.width();
    let da = (e.vang - vang) / universes.vang.width();
    dl * dl + da * da
}

/// Probability that the consequent matches the example: `exp(-error / ME)`.
pub fn match_probability(c: &Consequent, e: &TrainingExample, universes: &Universes, me: f64) -> f64 {
    (-consequent_error(c, e, universes) / me).exp()
}

/// Mating closeness of two control consequents: 1 minus the mean squared
/// normalized distance between their output values.
pub fn p_close(a: &Consequent, b: &Consequent, universes: &Universes) -> f64 {
    let dl = (a.vlin.center() - b.vlin.center()) / universes.vlin.width();
    let da = (a.vang.center() - b.vang.center()) / universes.vang.width();
    (1.0 - (dl * dl + da * da) / 2.0).max(0.0)
}

/// Greedy left-to-right segmentation of a scan into maximal runs of beams
/// whose normalized distances deviate at most `sigma_bd`. Returns inclusive
/// `(first, last)` beam index ranges.
pub fn segment_scan(distances: &[f64], universes: &Universes, sigma_bd: f64) -> Vec<(usize, usize)> {
    let width = universes.distance.width();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < distances.len() {
        let mut end = start;
        // Running mean/sum-of-squares over the normalized distances.
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0.0;
        while end < distances.len() {
            let d = (distances[end] - universes.distance.min) / width;
            let next_sum = sum + d;
            let next_sq = sum_sq + d * d;
            let next_n = n + 1.0;
            let mean = next_sum / next_n;
            let var = (next_sq / next_n - mean * mean).max(0.0);
            if var.sqrt() > sigma_bd && end > start {
                break;
            }
            sum = next_sum;
            sum_sq = next_sq;
            n = next_n;
            end += 1;
        }
        groups.push((start, end - 1));
        start = end;
    }
    groups
}

/// Builds the antecedent of the most specific rule describing one scan: one
/// quantified sector proposition per beam group plus a velocity proposition.
pub fn init_antecedent(
    distances: &[f64],
    velocity: f64,
    universes: &Universes,
    cfg: &LearnerConfig,
) -> (Vec<SectorProposition>, VelocityProposition) {
    let mut sectors = Vec::new();
    for (first, last) in segment_scan(distances, universes, cfg.sigma_bd) {
        let group = &distances[first..=last];
        let n = group.len() as f64;
        let mean = group.iter().sum::<f64>() / n;
        let var = group.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        let sigma_d = var.sqrt().max(cfg.mask_min_frac * universes.distance.width());

        let b_center = (first + last) as f64 / 2.0;
        let mut b_left = first as f64;
        let mut b_right = last as f64;
        if b_right - b_left < 1.0 {
            // Single-beam group: give the mask one beam of width.
            b_left = b_center - 0.5;
            b_right = b_center + 0.5;
        }
        let mask_b = TriangularMask::new(universes.beam, b_left, b_center, b_right)
            .expect("group bounds are ordered");
        let f_b = mask_to_label(&mask_b, cfg.similarity_grid);

        let mask_d =
            TriangularMask::new(universes.distance, mean - sigma_d, mean, mean + sigma_d)
                .expect("sigma is non-negative");
        let f_d = mask_to_label(&mask_d, cfg.similarity_grid);

        let p = proportion(distances, &f_d, &f_b).unwrap_or(0.0);
        let q = QuantifierLabel::clamped(100.0 * p);
        sectors.push(SectorProposition { f_d, f_b, q });
    }
    let f_v = LinguisticLabel::argmax(universes.velocity, cfg.velocity_granularity(), velocity);
    (sectors, VelocityProposition { f_v })
}

/// Learning task over expert control examples.
pub struct RegressionTask<'a> {
    pub universes: Universes,
    pub examples: &'a [TrainingExample],
}

impl<'a> RegressionTask<'a> {
    pub fn new(universes: Universes, examples: &'a [TrainingExample]) -> Self {
        Self { universes, examples }
    }

    fn consequent(rule: &QFRule) -> &Consequent {
        rule.control_consequent().expect("regression task rules carry control consequents")
    }
}

impl Task for RegressionTask<'_> {
    fn universes(&self) -> &Universes {
        &self.universes
    }

    fn kb_kind(&self) -> KbKind {
        KbKind::Regression
    }

    fn n_examples(&self) -> usize {
        self.examples.len()
    }

    fn seed_eligible(&self, _idx: usize) -> bool {
        true
    }

    fn init_rule(&self, idx: usize, cfg: &LearnerConfig) -> QFRule {
        let e = &self.examples[idx];
        let (sectors, velocity) = init_antecedent(&e.distances, e.velocity, &self.universes, cfg);
        let consequent = argmax_consequent(e, &self.universes);
        QFRule { sectors, velocity: Some(velocity), consequent: RuleConsequent::Control(consequent) }
    }

    fn evaluate(&self, rule: &QFRule, uncovered: &[usize], cfg: &LearnerConfig) -> Scores {
        let c = Self::consequent(rule);
        // Confidence judges the rule against every example it fires on,
        // including ones earlier rules already cover: a rule that outputs
        // the wrong command wherever it fires is a bad rule even if those
        // inputs are spoken for. Support and the covered list only count
        // still-uncovered examples, which is what this iteration must win.
        let mut in_uncovered = vec![false; self.examples.len()];
        for &i in uncovered {
            in_uncovered[i] = true;
        }
        let mut sum_dof = 0.0;
        let mut rho_all = 0.0;
        let mut rho_uncovered = 0.0;
        let mut covered = Vec::new();
        for (i, e) in self.examples.iter().enumerate() {
            let dof = rule.dof(&e.distances, e.velocity).unwrap_or(0.0);
            if dof <= 0.0 {
                continue;
            }
            sum_dof += dof;
            let p = match_probability(c, e, &self.universes, cfg.me);
            if dof > cfg.dof_min && p > cfg.p_min {
                rho_all += dof;
                if in_uncovered[i] {
                    rho_uncovered += dof;
                    covered.push(i);
                }
            }
        }
        let confidence = if sum_dof > 0.0 { rho_all / sum_dof } else { 0.0 };
        let support =
            if uncovered.is_empty() { 0.0 } else { rho_uncovered / uncovered.len() as f64 };
        let fitness = cfg.alpha_f * confidence + (1.0 - cfg.alpha_f) * support;
        Scores { fitness, confidence, support, covered }
    }

    fn example_dof(&self, rule: &QFRule, idx: usize) -> f64 {
        let e = &self.examples[idx];
        rule.dof(&e.distances, e.velocity).unwrap_or(0.0)
    }

    fn mate_weight(&self, first: &Individual, other: &Individual) -> f64 {
        p_close(Self::consequent(&first.rule), Self::consequent(&other.rule), &self.universes)
    }

    fn mutate(
        &self,
        ind: &Individual,
        _population: &[Individual],
        uncovered: &[usize],
        cfg: &LearnerConfig,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> QFRule {
        use rand::Rng;
        let c = Self::consequent(&ind.rule);
        let generalize = rng.gen::<f64>() < ind.scores.confidence.clamp(0.0, 1.0);
        let (candidates, weights): (Vec<usize>, Vec<f64>) = if generalize {
            uncovered
                .iter()
                .copied()
                .filter(|&i| self.example_dof(&ind.rule, i) < cfg.dof_min)
                .map(|i| (i, match_probability(c, &self.examples[i], &self.universes, cfg.me)))
                .unzip()
        } else {
            uncovered
                .iter()
                .copied()
                .filter(|&i| self.example_dof(&ind.rule, i) > cfg.dof_min)
                .map(|i| {
                    (i, 1.0 - match_probability(c, &self.examples[i], &self.universes, cfg.me))
                })
                .unzip()
        };
        let Some(sel) = ops::weighted_choice(&candidates, &weights, rng) else {
            return ind.rule.clone();
        };
        let target = &self.examples[sel];
        let mut rule = ind.rule.clone();
        if generalize {
            ops::generalize_rule(&mut rule, &target.distances, target.velocity, cfg, rng);
        } else {
            ops::specialize_rule(&mut rule, &target.distances, target.velocity, cfg, rng);
        }
        // Consequent drift toward the selected example's outputs.
        let consequent_target = if generalize {
            sel
        } else {
            // Any example currently covered works as the anchor.
            *candidates
                .get(rng.gen_range(0..candidates.len()))
                .expect("specialization candidates are non-empty here")
        };
        let t = &self.examples[consequent_target];
        let c = Self::consequent(&rule).clone();
        let beta_lin =
            LinguisticLabel::argmax(self.universes.vlin, VLIN_GRANULARITY, t.vlin).index;
        let beta_ang =
            LinguisticLabel::argmax(self.universes.vang, VANG_GRANULARITY, t.vang).index;
        let new_lin = ops::mutate_index_toward(c.vlin.index, beta_lin, rng);
        let new_ang = ops::mutate_index_toward(c.vang.index, beta_ang, rng);
        rule.consequent = RuleConsequent::Control(
            Consequent::from_indices(&self.universes, new_lin, new_ang)
                .expect("indexes stay inside the output partitions"),
        );
        rule
    }
}

/// Output labels with the largest membership for the example's outputs.
pub fn argmax_consequent(e: &TrainingExample, universes: &Universes) -> Consequent {
    Consequent {
        vlin: LinguisticLabel::argmax(universes.vlin, VLIN_GRANULARITY, e.vlin),
        vang: LinguisticLabel::argmax(universes.vang, VANG_GRANULARITY, e.vang),
    }
}
