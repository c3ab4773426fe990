//! Post-hoc rule-subset selection: prefix candidates ranked by rule fitness,
//! an error-plus-coverage score, and an iterated local search over rule
//! subsets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::learn::output_error;
use crate::model::{KnowledgeBase, ModelError};

/// Penalty added per example a rule subset leaves uncovered: four times the
/// worst possible single-example squared error (both outputs off by a full
/// range), so dropping coverage never pays.
pub const UNCOVERED_PENALTY: f64 = 8.0;

/// Which rules of a knowledge base a candidate subset keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMask {
    pub bits: Vec<bool>,
}

impl RuleMask {
    pub fn n_selected(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn apply(&self, kb: &KnowledgeBase) -> KnowledgeBase {
        let mut out = KnowledgeBase::new(kb.universes, kb.kind);
        for (rule, &keep) in kb.rules.iter().zip(&self.bits) {
            if keep {
                out.rules.push(rule.clone());
            }
        }
        out
    }
}

/// Rule order sorted by decreasing fitness (stable on ties).
fn fitness_ranking(kb: &KnowledgeBase) -> Vec<usize> {
    let mut order: Vec<usize> = (0..kb.rules.len()).collect();
    order.sort_by(|&a, &b| {
        kb.rules[b]
            .fitness
            .partial_cmp(&kb.rules[a].fitness)
            .expect("rule fitness is finite")
    });
    order
}

/// Masks selecting the top-1, top-2, ..., all rules by fitness.
pub fn prefix_candidates(kb: &KnowledgeBase) -> Vec<RuleMask> {
    let order = fitness_ranking(kb);
    let mut masks = Vec::with_capacity(order.len());
    let mut bits = vec![false; order.len()];
    for &r in &order {
        bits[r] = true;
        masks.push(RuleMask { bits: bits.clone() });
    }
    masks
}

/// Mean squared normalized output error over the dataset, counting
/// [`UNCOVERED_PENALTY`] for every example the subset leaves uncovered.
/// Lower is better.
pub fn score_mask(mask: &RuleMask, kb: &KnowledgeBase, dataset: &Dataset) -> f64 {
    let sub = mask.apply(kb);
    let mut total = 0.0;
    for e in &dataset.examples {
        match sub.infer(&e.distances, e.velocity) {
            Ok((vlin, vang)) => total += output_error(vlin, vang, e, &kb.universes),
            Err(ModelError::UncoveredInput) | Err(ModelError::EmptyKnowledgeBase) => {
                total += UNCOVERED_PENALTY
            }
            Err(e) => panic!("scoring a malformed knowledge base: {e}"),
        }
    }
    if dataset.examples.is_empty() {
        0.0
    } else {
        total / dataset.examples.len() as f64
    }
}

/// `(score, rule count)` ordering: lower score wins; equal scores prefer the
/// smaller subset.
fn better(candidate: (f64, usize), incumbent: (f64, usize)) -> bool {
    candidate.0 < incumbent.0 || (candidate.0 == incumbent.0 && candidate.1 < incumbent.1)
}

fn local_search(
    mask: &mut RuleMask,
    score: &mut (f64, usize),
    kb: &KnowledgeBase,
    dataset: &Dataset,
    radius: usize,
) {
    loop {
        let mut best_move: Option<(Vec<usize>, (f64, usize))> = None;
        for flips in neighborhood(mask.bits.len(), radius) {
            let mut neighbor = mask.clone();
            for &i in &flips {
                neighbor.bits[i] = !neighbor.bits[i];
            }
            if neighbor.n_selected() == 0 {
                continue;
            }
            let s = (score_mask(&neighbor, kb, dataset), neighbor.n_selected());
            if better(s, *score) && best_move.as_ref().map_or(true, |(_, bs)| better(s, *bs)) {
                best_move = Some((flips, s));
            }
        }
        match best_move {
            Some((flips, s)) => {
                for i in flips {
                    mask.bits[i] = !mask.bits[i];
                }
                *score = s;
            }
            None => break,
        }
    }
}

/// All flip sets of size 1..=radius (radius is 1 in practice, so this is just
/// the single-bit flips).
fn neighborhood(len: usize, radius: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..len).map(|i| vec![i]).collect();
    if radius >= 2 {
        for i in 0..len {
            for j in i + 1..len {
                out.push(vec![i, j]);
            }
        }
    }
    out
}

/// Iterated local search over rule subsets. Starts from the best prefix
/// candidate, walks single-flip improvements to a local optimum, then
/// perturbs (flipping `radius + 1` random bits) and searches again, keeping
/// the best subset seen. Deterministic for a fixed generator state.
pub fn ils_select(
    kb: &KnowledgeBase,
    dataset: &Dataset,
    radius: usize,
    max_restarts: usize,
    rng: &mut ChaCha8Rng,
) -> KnowledgeBase {
    if kb.rules.len() <= 1 {
        return kb.clone();
    }
    let mut best_mask = None;
    let mut best_score = (f64::INFINITY, usize::MAX);
    for mask in prefix_candidates(kb) {
        let s = (score_mask(&mask, kb, dataset), mask.n_selected());
        if better(s, best_score) {
            best_score = s;
            best_mask = Some(mask);
        }
    }
    let mut best_mask = best_mask.expect("knowledge base has rules");
    local_search(&mut best_mask, &mut best_score, kb, dataset, radius);

    let mut incumbent = best_mask.clone();
    let mut incumbent_score = best_score;
    for _ in 0..max_restarts {
        let mut perturbed = incumbent.clone();
        loop {
            for _ in 0..radius + 1 {
                let i = rng.gen_range(0..perturbed.bits.len());
                perturbed.bits[i] = !perturbed.bits[i];
            }
            if perturbed.n_selected() > 0 {
                break;
            }
            perturbed = incumbent.clone();
        }
        let mut score = (score_mask(&perturbed, kb, dataset), perturbed.n_selected());
        local_search(&mut perturbed, &mut score, kb, dataset, radius);
        if better(score, incumbent_score) {
            incumbent = perturbed;
            incumbent_score = score;
        }
        if better(incumbent_score, best_score) {
            best_mask = incumbent.clone();
            best_score = incumbent_score;
        }
    }
    best_mask.apply(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TrainingExample;
    use crate::fuzzy::{LinguisticLabel, QuantifierLabel};
    use crate::model::{
        Consequent, KbKind, QFRule, RuleConsequent, ScoredRule, SectorProposition, Universes,
    };
    use rand::SeedableRng;

    fn rule(u: &Universes, f_d_idx: u32, vlin_idx: u32, fitness: f64) -> ScoredRule {
        ScoredRule {
            rule: QFRule {
                sectors: vec![SectorProposition {
                    f_d: LinguisticLabel::new(u.distance, 5, f_d_idx).unwrap(),
                    f_b: LinguisticLabel::new(u.beam, 1, 1).unwrap(),
                    q: QuantifierLabel::new(50.0).unwrap(),
                }],
                velocity: None,
                consequent: RuleConsequent::Control(
                    Consequent::from_indices(u, vlin_idx, 10).unwrap(),
                ),
            },
            fitness,
        }
    }

    fn flat_example(d: f64, vlin: f64) -> TrainingExample {
        TrainingExample { distances: vec![d; 16], velocity: 0.0, vlin, vang: 0.0 }
    }

    #[test]
    fn prefix_masks_follow_fitness_ranking() {
        let u = Universes::with_beams(16);
        let mut kb = KnowledgeBase::new(u, KbKind::Regression);
        kb.rules.push(rule(&u, 1, 1, 0.2));
        kb.rules.push(rule(&u, 3, 5, 0.9));
        kb.rules.push(rule(&u, 5, 9, 0.5));
        let masks = prefix_candidates(&kb);
        assert_eq!(masks.len(), 3);
        assert_eq!(masks[0].bits, vec![false, true, false]);
        assert_eq!(masks[1].bits, vec![false, true, true]);
        assert_eq!(masks[2].bits, vec![true, true, true]);
    }

    #[test]
    fn empty_coverage_scores_the_penalty() {
        let u = Universes::with_beams(16);
        let mut kb = KnowledgeBase::new(u, KbKind::Regression);
        // Fires only on high distances; the dataset is all low distances.
        kb.rules.push(rule(&u, 5, 5, 0.5));
        let mut ds = Dataset::new(u);
        ds.examples.push(flat_example(0.0, 0.25));
        let mask = RuleMask { bits: vec![true] };
        assert_eq!(score_mask(&mask, &kb, &ds), UNCOVERED_PENALTY);
    }

    #[test]
    fn never_firing_rule_is_dropped() {
        let u = Universes::with_beams(16);
        let mut kb = KnowledgeBase::new(u, KbKind::Regression);
        kb.rules.push(rule(&u, 1, 5, 0.9)); // fires on the data
        kb.rules.push(rule(&u, 5, 9, 0.8)); // never fires
        let mut ds = Dataset::new(u);
        ds.examples.push(flat_example(0.0, 0.25));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let selected = ils_select(&kb, &ds, 1, 2, &mut rng);
        assert_eq!(selected.rules.len(), 1);
        assert_eq!(selected.rules[0], kb.rules[0]);
    }

    #[test]
    fn selection_never_beats_full_kb_score() {
        use rand::Rng;
        let u = Universes::with_beams(16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let mut kb = KnowledgeBase::new(u, KbKind::Regression);
            let n_rules = rng.gen_range(1..6);
            for _ in 0..n_rules {
                kb.rules.push(rule(
                    &u,
                    rng.gen_range(1..=5),
                    rng.gen_range(1..=9),
                    rng.gen(),
                ));
            }
            let mut ds = Dataset::new(u);
            for _ in 0..10 {
                ds.examples.push(flat_example(rng.gen_range(0.0..1.5), rng.gen_range(0.0..0.5)));
            }
            let full = RuleMask { bits: vec![true; kb.rules.len()] };
            let full_score = score_mask(&full, &kb, &ds);
            let mut search_rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let selected = ils_select(&kb, &ds, 1, 2, &mut search_rng);
            let sel_mask = RuleMask {
                bits: kb.rules.iter().map(|r| selected.rules.contains(r)).collect(),
            };
            let sel_score = score_mask(&sel_mask, &kb, &ds);
            assert!(sel_score <= full_score, "trial {trial}: {sel_score} > {full_score}");
        }
    }

    #[test]
    fn single_rule_kb_is_unchanged() {
        let u = Universes::with_beams(16);
        let mut kb = KnowledgeBase::new(u, KbKind::Regression);
        kb.rules.push(rule(&u, 1, 5, 0.9));
        let ds = Dataset::new(u);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert_eq!(ils_select(&kb, &ds, 1, 2, &mut rng), kb);
    }
}
