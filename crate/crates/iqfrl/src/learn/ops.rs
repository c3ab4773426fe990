//! Genetic operators on quantified fuzzy rules: label moves, crossover, and
//! the antecedent generalization/specialization machinery shared by the
//! control and classification learners.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::fuzzy::{similarity, supports_overlap, LinguisticLabel, MembershipFn, QuantifierLabel};
use crate::model::{QFRule, SectorProposition, Universes, VelocityProposition};

use super::LearnerConfig;

/// Smallest quantifier step: one percent point.
pub const QUANTIFIER_STEP: f64 = 1.0;

/// Safety cap on refinement loops that fail to push the membership down.
const MAX_MOVE_STEPS: usize = 256;

/// Draws one item with probability proportional to its weight; uniform when
/// every weight is zero; `None` for an empty candidate list.
pub fn weighted_choice<T: Copy>(items: &[T], weights: &[f64], rng: &mut ChaCha8Rng) -> Option<T> {
    if items.is_empty() {
        return None;
    }
    debug_assert_eq!(items.len(), weights.len());
    match WeightedIndex::new(weights.iter().map(|w| w.max(0.0))) {
        Ok(dist) => Some(items[dist.sample(rng)]),
        Err(_) => Some(items[rng.gen_range(0..items.len())]),
    }
}

/// The most similar label of a given granularity (lowest index wins ties).
pub fn most_similar_label(
    reference: &LinguisticLabel,
    granularity: u32,
    grid: usize,
) -> LinguisticLabel {
    let mut best: Option<(LinguisticLabel, f64)> = None;
    for label in LinguisticLabel::partition(reference.universe, granularity) {
        let sim = similarity(reference, &label, grid);
        if best.map_or(true, |(_, bs)| sim > bs) {
            best = Some((label, sim));
        }
    }
    best.expect("granularity >= 1 always yields labels").0
}

/// One coarsening step: the most similar label one granularity down.
pub fn coarsen_label(label: &LinguisticLabel, grid: usize) -> Option<LinguisticLabel> {
    if label.granularity <= 1 {
        return None;
    }
    Some(most_similar_label(label, label.granularity - 1, grid))
}

/// One refinement step: the most similar label one granularity up.
pub fn refine_label(label: &LinguisticLabel, grid: usize) -> LinguisticLabel {
    most_similar_label(label, label.granularity + 1, grid)
}

/// Merges two labels into the most specific label that still covers both:
/// the highest granularity (bounded by the finest input plus
/// `extra_granularity`) owning a label whose support contains the union of
/// the input supports; within that granularity, the one most similar to both
/// inputs (by the minimum of the two similarities).
pub fn merge_labels(
    a: &LinguisticLabel,
    b: &LinguisticLabel,
    extra_granularity: u32,
    grid: usize,
) -> LinguisticLabel {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let ulo = alo.min(blo);
    let uhi = ahi.max(bhi);
    let tol = 1e-9 * a.universe.width();
    let cap = a.granularity.max(b.granularity) + extra_granularity;
    for g in (1..=cap).rev() {
        let mut best: Option<(LinguisticLabel, f64)> = None;
        for label in LinguisticLabel::partition(a.universe, g) {
            let (llo, lhi) = label.support();
            if llo <= ulo + tol && lhi >= uhi - tol {
                let sim = similarity(a, &label, grid).min(similarity(b, &label, grid));
                if best.map_or(true, |(_, bs)| sim > bs) {
                    best = Some((label, sim));
                }
            }
        }
        if let Some((label, _)) = best {
            return label;
        }
    }
    unreachable!("the granularity-1 label covers the whole universe")
}

/// Picks, per parent, the sector proposition whose beam label is most similar
/// to the reference label (lowest index wins ties).
fn closest_sector(rule: &QFRule, reference: &LinguisticLabel, grid: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in rule.sectors.iter().enumerate() {
        let sim = similarity(&s.f_b, reference, grid);
        if sim > best.1 {
            best = (i, sim);
        }
    }
    best.0
}

/// Produces one offspring: a copy of `first` with a single antecedent slot
/// recombined against `second`. Slots follow the finest beam granularity
/// present in either parent, plus one slot for the velocity proposition.
pub fn crossover(
    first: &QFRule,
    second: &QFRule,
    universes: &Universes,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) -> QFRule {
    let g_b_max = first
        .sectors
        .iter()
        .chain(second.sectors.iter())
        .map(|s| s.f_b.granularity)
        .max()
        .expect("rules always have at least one sector");
    let n_a = g_b_max + 1;
    let mut off = first.clone();
    loop {
        let m = rng.gen_range(1..=n_a);
        if m == n_a {
            match (&first.velocity, &second.velocity) {
                (None, None) => continue, // neither parent has this antecedent
                (None, Some(v)) => off.velocity = Some(*v),
                (Some(_), None) => off.velocity = None,
                (Some(va), Some(vb)) => {
                    let disjoint = !supports_overlap(&va.f_v, &vb.f_v);
                    if disjoint || va.f_v == vb.f_v {
                        off.velocity = None;
                    } else {
                        off.velocity = Some(VelocityProposition {
                            f_v: merge_labels(
                                &va.f_v,
                                &vb.f_v,
                                cfg.merge_extra_granularity,
                                cfg.similarity_grid,
                            ),
                        });
                    }
                }
            }
        } else {
            let reference = LinguisticLabel::new(universes.beam, g_b_max, m)
                .expect("m stays within the finest granularity");
            let ia = closest_sector(first, &reference, cfg.similarity_grid);
            let ib = closest_sector(second, &reference, cfg.similarity_grid);
            let sa = first.sectors[ia];
            let sb = second.sectors[ib];
            let disjoint = !supports_overlap(&sa.f_b, &sb.f_b)
                || !supports_overlap(&sa.f_d, &sb.f_d);
            let identical = sa.f_b == sb.f_b && sa.f_d == sb.f_d;
            if disjoint || identical {
                // Delete, unless it would leave the rule without sectors.
                if off.sectors.len() > 1 {
                    off.sectors.remove(ia);
                }
            } else {
                off.sectors[ia] = SectorProposition {
                    f_d: merge_labels(
                        &sa.f_d,
                        &sb.f_d,
                        cfg.merge_extra_granularity,
                        cfg.similarity_grid,
                    ),
                    f_b: merge_labels(
                        &sa.f_b,
                        &sb.f_b,
                        cfg.merge_extra_granularity,
                        cfg.similarity_grid,
                    ),
                    q: QuantifierLabel::clamped(sa.q.q_percent.min(sb.q.q_percent)),
                };
            }
        }
        return off;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Component {
    Fd,
    Fb,
    Q,
}

fn sector_mu(s: &SectorProposition, scan: &[f64]) -> f64 {
    s.dof(scan).unwrap_or(0.0)
}

fn apply_sector_move(s: &SectorProposition, comp: Component, widen: bool, grid: usize) -> Option<SectorProposition> {
    let mut next = *s;
    match comp {
        Component::Fd => {
            next.f_d = if widen {
                coarsen_label(&s.f_d, grid)?
            } else {
                refine_label(&s.f_d, grid)
            }
        }
        Component::Fb => {
            next.f_b = if widen {
                coarsen_label(&s.f_b, grid)?
            } else {
                refine_label(&s.f_b, grid)
            }
        }
        Component::Q => {
            let q = s.q.q_percent;
            let stepped = if widen { q - QUANTIFIER_STEP } else { q + QUANTIFIER_STEP };
            if (10.0..=100.0).contains(&stepped) {
                next.q = QuantifierLabel::clamped(stepped);
            } else {
                return None;
            }
        }
    }
    Some(next)
}

/// Widens one sector proposition until the target scan satisfies it
/// (membership at least `dof_min`), moving a single component chosen with
/// probability proportional to the membership each candidate first step would
/// reach. Steps that would lower the membership are rejected, so the
/// membership on the target never drops below its starting value.
fn generalize_sector(
    s: &mut SectorProposition,
    scan: &[f64],
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    let candidates: Vec<(Component, SectorProposition)> = [Component::Fd, Component::Fb, Component::Q]
        .into_iter()
        .filter_map(|c| apply_sector_move(s, c, true, cfg.similarity_grid).map(|p| (c, p)))
        .collect();
    if candidates.is_empty() {
        return;
    }
    let weights: Vec<f64> = candidates.iter().map(|(_, p)| sector_mu(p, scan)).collect();
    let idx: Vec<usize> = (0..candidates.len()).collect();
    let Some(pick) = weighted_choice(&idx, &weights, rng) else { return };
    let comp = candidates[pick].0;
    let mut mu = sector_mu(s, scan);
    for _ in 0..MAX_MOVE_STEPS {
        if mu >= cfg.dof_min {
            break;
        }
        let Some(next) = apply_sector_move(s, comp, true, cfg.similarity_grid) else { break };
        let next_mu = sector_mu(&next, scan);
        if next_mu < mu {
            break; // widening stalled; keep the best reached so far
        }
        *s = next;
        mu = next_mu;
    }
}

/// Narrows one sector proposition until the target scan stops satisfying it
/// (membership below `dof_min`); the component is chosen with probability
/// proportional to how far each candidate first step pushes the membership
/// down. Steps that would raise the membership are rejected.
fn specialize_sector(
    s: &mut SectorProposition,
    scan: &[f64],
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    let candidates: Vec<(Component, SectorProposition)> = [Component::Fd, Component::Fb, Component::Q]
        .into_iter()
        .filter_map(|c| apply_sector_move(s, c, false, cfg.similarity_grid).map(|p| (c, p)))
        .collect();
    if candidates.is_empty() {
        return;
    }
    let weights: Vec<f64> = candidates
        .iter()
        .map(|(_, p)| (1.0 - sector_mu(p, scan)).max(0.0))
        .collect();
    let idx: Vec<usize> = (0..candidates.len()).collect();
    let Some(pick) = weighted_choice(&idx, &weights, rng) else { return };
    let comp = candidates[pick].0;
    let mut mu = sector_mu(s, scan);
    for _ in 0..MAX_MOVE_STEPS {
        if mu < cfg.dof_min {
            break;
        }
        let Some(next) = apply_sector_move(s, comp, false, cfg.similarity_grid) else { break };
        let next_mu = sector_mu(&next, scan);
        if next_mu > mu {
            break;
        }
        *s = next;
        mu = next_mu;
    }
}

fn generalize_velocity(
    v: &mut VelocityProposition,
    velocity: f64,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    let _ = rng;
    let mut mu = v.dof(velocity);
    for _ in 0..MAX_MOVE_STEPS {
        if mu >= cfg.dof_min {
            break;
        }
        let Some(next) = coarsen_label(&v.f_v, cfg.similarity_grid) else { break };
        let next_mu = next.membership(velocity);
        if next_mu < mu {
            break;
        }
        v.f_v = next;
        mu = next_mu;
    }
}

fn specialize_velocity(
    v: &mut VelocityProposition,
    velocity: f64,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    let _ = rng;
    let mut mu = v.dof(velocity);
    for _ in 0..MAX_MOVE_STEPS {
        if mu < cfg.dof_min {
            break;
        }
        let next = refine_label(&v.f_v, cfg.similarity_grid);
        let next_mu = next.membership(velocity);
        if next_mu > mu {
            break;
        }
        v.f_v = next;
        mu = next_mu;
    }
}

/// Generalization phase: widen every proposition the target example fails.
pub fn generalize_rule(
    rule: &mut QFRule,
    scan: &[f64],
    velocity: f64,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    for s in rule.sectors.iter_mut() {
        if sector_mu(s, scan) < cfg.dof_min {
            generalize_sector(s, scan, cfg, rng);
        }
    }
    if let Some(v) = rule.velocity.as_mut() {
        if v.dof(velocity) < cfg.dof_min {
            generalize_velocity(v, velocity, cfg, rng);
        }
    }
}

/// Specialization phase: narrow one proposition, chosen uniformly.
pub fn specialize_rule(
    rule: &mut QFRule,
    scan: &[f64],
    velocity: f64,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) {
    let n = rule.sectors.len() + usize::from(rule.velocity.is_some());
    if n == 0 {
        return;
    }
    let k = rng.gen_range(0..n);
    if k < rule.sectors.len() {
        specialize_sector(&mut rule.sectors[k], scan, cfg, rng);
    } else if let Some(v) = rule.velocity.as_mut() {
        specialize_velocity(v, velocity, cfg, rng);
    }
}

/// Moves a consequent label index toward `beta`: the new index γ lies between
/// α and β (inclusive) with probability proportional to
/// `1 - |α−γ| / (|α−β| + 1)`.
pub fn mutate_index_toward(alpha: u32, beta: u32, rng: &mut ChaCha8Rng) -> u32 {
    if alpha == beta {
        return alpha;
    }
    let lo = alpha.min(beta);
    let hi = alpha.max(beta);
    let denom = (i64::from(hi) - i64::from(lo) + 1) as f64;
    let gammas: Vec<u32> = (lo..=hi).collect();
    let weights: Vec<f64> = gammas
        .iter()
        .map(|&g| 1.0 - (i64::from(alpha).abs_diff(i64::from(g)) as f64) / denom)
        .collect();
    weighted_choice(&gammas, &weights, rng).expect("candidate range is non-empty")
}
