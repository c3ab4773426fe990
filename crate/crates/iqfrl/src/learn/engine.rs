//! The iterative rule learning engine: one evolutionary epoch per rule.
//!
//! The engine is generic over a [`Task`], which supplies initialization,
//! fitness, mate weighting, and mutation; the control and classification
//! learners plug in here and share selection, crossover, replacement, and the
//! covering loop. All randomness flows through one caller-provided generator,
//! and evaluation is sequential, so runs are bit-reproducible per seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{KbKind, KnowledgeBase, QFRule, ScoredRule, Universes};

use super::ops;
use super::LearnerConfig;

/// Evaluation result of one rule over the currently uncovered examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub fitness: f64,
    pub confidence: f64,
    pub support: f64,
    /// Uncovered examples this rule covers accurately.
    pub covered: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub rule: QFRule,
    pub scores: Scores,
}

/// Per-epoch progress record, for training logs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub iterations: u32,
    pub best_fitness: f64,
    pub rules_total: usize,
    pub uncovered_remaining: usize,
}

/// A learning problem the engine can run: supplies examples, rule
/// initialization, fitness, and the task-specific operators.
pub trait Task {
    fn universes(&self) -> &Universes;
    fn kb_kind(&self) -> KbKind;
    fn n_examples(&self) -> usize;
    /// Whether an example may seed a new individual (classification excludes
    /// the default class).
    fn seed_eligible(&self, idx: usize) -> bool;
    fn init_rule(&self, idx: usize, cfg: &LearnerConfig) -> QFRule;
    fn evaluate(&self, rule: &QFRule, uncovered: &[usize], cfg: &LearnerConfig) -> Scores;
    fn example_dof(&self, rule: &QFRule, idx: usize) -> f64;
    fn mate_weight(&self, first: &Individual, other: &Individual) -> f64;
    fn mutate(
        &self,
        ind: &Individual,
        population: &[Individual],
        uncovered: &[usize],
        cfg: &LearnerConfig,
        rng: &mut ChaCha8Rng,
    ) -> QFRule;
}

fn sort_population(pop: &mut [Individual]) {
    // Stable sort: equal fitness keeps insertion order, so incumbents stay
    // ahead of newer offspring and runs are deterministic.
    pop.sort_by(|a, b| {
        b.scores
            .fitness
            .partial_cmp(&a.scores.fitness)
            .expect("fitness values are finite")
    });
}

/// Binary tournament: the fitter of two uniformly drawn individuals.
fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if pop[b].scores.fitness > pop[a].scores.fitness {
        b
    } else {
        a
    }
}

/// Mate selection: weight every other individual by the task's closeness.
fn pick_mate<T: Task>(task: &T, pop: &[Individual], first: usize, rng: &mut ChaCha8Rng) -> usize {
    let candidates: Vec<usize> = (0..pop.len()).filter(|&i| i != first).collect();
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&i| task.mate_weight(&pop[first], &pop[i]))
        .collect();
    ops::weighted_choice(&candidates, &weights, rng).expect("population has at least two members")
}

/// One evolutionary run producing the best individual for the current
/// uncovered set.
fn run_epoch<T: Task>(
    task: &T,
    seeds: &[usize],
    uncovered: &[usize],
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) -> (Individual, u32) {
    let chosen: Vec<usize> = if seeds.len() > cfg.pop_max {
        rand::seq::index::sample(rng, seeds.len(), cfg.pop_max)
            .iter()
            .map(|k| seeds[k])
            .collect()
    } else {
        seeds.to_vec()
    };
    let mut pop: Vec<Individual> = chosen
        .iter()
        .map(|&i| {
            let rule = task.init_rule(i, cfg);
            let scores = task.evaluate(&rule, uncovered, cfg);
            Individual { rule, scores }
        })
        .collect();
    sort_population(&mut pop);

    let mut best = pop[0].clone();
    let mut it = 0u32;
    let mut equal_ind = 0u32;
    loop {
        it += 1;
        let p1 = tournament(&pop, rng);
        let (r1, r2) = if pop.len() >= 2 && rng.gen::<f64>() < cfg.p_cross {
            let p2 = pick_mate(task, &pop, p1, rng);
            (
                ops::crossover(&pop[p1].rule, &pop[p2].rule, task.universes(), cfg, rng),
                ops::crossover(&pop[p2].rule, &pop[p1].rule, task.universes(), cfg, rng),
            )
        } else {
            let p2 = if pop.len() >= 2 { pick_mate(task, &pop, p1, rng) } else { p1 };
            (
                task.mutate(&pop[p1], &pop, uncovered, cfg, rng),
                task.mutate(&pop[p2], &pop, uncovered, cfg, rng),
            )
        };
        for rule in [r1, r2] {
            let scores = task.evaluate(&rule, uncovered, cfg);
            pop.push(Individual { rule, scores });
        }
        sort_population(&mut pop);
        pop.truncate(cfg.pop_max);

        if pop[0] == best {
            equal_ind += 1;
        } else {
            best = pop[0].clone();
            equal_ind = 0;
        }
        if (it >= cfg.it_min && equal_ind >= cfg.it_check) || it >= cfg.it_max {
            break;
        }
    }
    (best, it)
}

/// Runs epochs until every seed-eligible example is covered, appending one
/// rule per epoch. `log` receives one record per epoch.
pub fn train<T: Task>(
    task: &T,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
    mut log: impl FnMut(&EpochLog),
) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new(*task.universes(), task.kb_kind());
    let mut uncovered: Vec<usize> = (0..task.n_examples()).collect();
    let mut epoch = 0;
    loop {
        let seeds: Vec<usize> =
            uncovered.iter().copied().filter(|&i| task.seed_eligible(i)).collect();
        if seeds.is_empty() {
            break;
        }
        epoch += 1;
        let (best, iterations) = run_epoch(task, &seeds, &uncovered, cfg, rng);

        let mut remove = best.scores.covered.clone();
        if !remove.iter().any(|i| task.seed_eligible(*i)) {
            // Progress guarantee: always retire at least one seed-eligible
            // example, the one the best rule comes closest to covering.
            let forced = seeds
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    task.example_dof(&best.rule, a)
                        .partial_cmp(&task.example_dof(&best.rule, b))
                        .expect("degrees of fulfillment are finite")
                })
                .expect("seed set is non-empty");
            remove.push(forced);
        }
        kb.rules.push(ScoredRule { rule: best.rule, fitness: best.scores.fitness });
        uncovered.retain(|i| !remove.contains(i));
        log(&EpochLog {
            epoch,
            iterations,
            best_fitness: best.scores.fitness,
            rules_total: kb.rules.len(),
            uncovered_remaining: uncovered.len(),
        });
    }
    kb
}
