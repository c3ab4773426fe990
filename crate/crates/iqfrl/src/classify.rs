//! Classification variant of the learner: class consequents, tp/fp-based
//! fitness, class-aware mutation, and evaluation metrics (confusion matrix,
//! accuracy, Cohen's kappa).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ClassDataset;
use crate::learn::{init_antecedent, ops, Individual, LearnerConfig, Scores, Task};
use crate::model::{ClassConsequent, KbKind, KnowledgeBase, QFRule, RuleConsequent, Universes};

/// Raw counts behind the classification fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFitnessStats {
    /// Examples of the rule's class it covers.
    pub tp_count: usize,
    /// Examples of other classes it covers.
    pub fp_count: usize,
    /// Examples of the rule's class it misses.
    pub fn_count: usize,
    /// Total degree of fulfillment over the true positives.
    pub tpd: f64,
    /// Total degree of fulfillment over the false positives.
    pub fpd: f64,
}

impl ClassFitnessStats {
    /// `#tp + tpd/#tp`, or 0 with no true positives.
    pub fn tp(&self) -> f64 {
        if self.tp_count == 0 {
            0.0
        } else {
            self.tp_count as f64 + self.tpd / self.tp_count as f64
        }
    }

    /// `#fp + fpd/#fp`, or 0 with no false positives.
    pub fn fp(&self) -> f64 {
        if self.fp_count == 0 {
            0.0
        } else {
            self.fp_count as f64 + self.fpd / self.fp_count as f64
        }
    }

    /// `10^(-fp)`: full confidence only without false positives.
    pub fn confidence(&self) -> f64 {
        10f64.powf(-self.fp())
    }

    /// `tp / (tp + #fn)`: share of the class the rule reaches.
    pub fn support(&self) -> f64 {
        let tp = self.tp();
        if tp == 0.0 {
            return 0.0;
        }
        tp / (tp + self.fn_count as f64)
    }

    pub fn fitness(&self) -> f64 {
        self.confidence() * self.support()
    }
}

/// Learning task over labelled situation examples.
pub struct ClassificationTask<'a> {
    pub universes: Universes,
    pub dataset: &'a ClassDataset,
    pub default_class: u32,
}

impl<'a> ClassificationTask<'a> {
    pub fn new(universes: Universes, dataset: &'a ClassDataset, default_class: u32) -> Self {
        Self { universes, dataset, default_class }
    }

    fn class_of(rule: &QFRule) -> u32 {
        rule.class_consequent().expect("classification rules carry class consequents").class_id
    }

    /// Counts over a set of example indexes.
    pub fn stats(&self, rule: &QFRule, over: &[usize], cfg: &LearnerConfig) -> ClassFitnessStats {
        let class = Self::class_of(rule);
        let mut s = ClassFitnessStats { tp_count: 0, fp_count: 0, fn_count: 0, tpd: 0.0, fpd: 0.0 };
        let mut class_total = 0usize;
        for &i in over {
            let e = &self.dataset.examples[i];
            if e.class_id == class {
                class_total += 1;
            }
            let dof = rule.dof(&e.distances, e.velocity).unwrap_or(0.0);
            if dof > cfg.dof_min {
                if e.class_id == class {
                    s.tp_count += 1;
                    s.tpd += dof;
                } else {
                    s.fp_count += 1;
                    s.fpd += dof;
                }
            }
        }
        s.fn_count = class_total - s.tp_count;
        s
    }
}

impl Task for ClassificationTask<'_> {
    fn universes(&self) -> &Universes {
        &self.universes
    }

    fn kb_kind(&self) -> KbKind {
        KbKind::Classification {
            n_classes: self.dataset.n_classes,
            default_class: self.default_class,
        }
    }

    fn n_examples(&self) -> usize {
        self.dataset.examples.len()
    }

    fn seed_eligible(&self, idx: usize) -> bool {
        self.dataset.examples[idx].class_id != self.default_class
    }

    fn init_rule(&self, idx: usize, cfg: &LearnerConfig) -> QFRule {
        let e = &self.dataset.examples[idx];
        let (sectors, velocity) = init_antecedent(&e.distances, e.velocity, &self.universes, cfg);
        QFRule {
            sectors,
            velocity: Some(velocity),
            consequent: RuleConsequent::Class(ClassConsequent { class_id: e.class_id }),
        }
    }

    fn evaluate(&self, rule: &QFRule, uncovered: &[usize], cfg: &LearnerConfig) -> Scores {
        let class = Self::class_of(rule);
        // False positives are counted over the whole training set: firing on
        // another class's example is wrong even when that example is already
        // covered. Support still measures progress on uncovered ones.
        let all: Vec<usize> = (0..self.dataset.examples.len()).collect();
        let all_stats = self.stats(rule, &all, cfg);
        let unc_stats = self.stats(rule, uncovered, cfg);
        let stats = ClassFitnessStats {
            tp_count: unc_stats.tp_count,
            fp_count: all_stats.fp_count,
            fn_count: unc_stats.fn_count,
            tpd: unc_stats.tpd,
            fpd: all_stats.fpd,
        };
        let covered = uncovered
            .iter()
            .copied()
            .filter(|&i| {
                let e = &self.dataset.examples[i];
                e.class_id == class && rule.dof(&e.distances, e.velocity).unwrap_or(0.0) > cfg.dof_min
            })
            .collect();
        Scores {
            fitness: stats.fitness(),
            confidence: stats.confidence(),
            support: stats.support(),
            covered,
        }
    }

    fn example_dof(&self, rule: &QFRule, idx: usize) -> f64 {
        let e = &self.dataset.examples[idx];
        rule.dof(&e.distances, e.velocity).unwrap_or(0.0)
    }

    fn mate_weight(&self, first: &Individual, other: &Individual) -> f64 {
        if Self::class_of(&first.rule) == Self::class_of(&other.rule) {
            1.0
        } else {
            0.01
        }
    }

    fn mutate(
        &self,
        ind: &Individual,
        population: &[Individual],
        uncovered: &[usize],
        cfg: &LearnerConfig,
        rng: &mut ChaCha8Rng,
    ) -> QFRule {
        let generalize = rng.gen::<f64>() < ind.scores.confidence.clamp(0.0, 1.0);
        let (candidates, weights): (Vec<usize>, Vec<f64>) = if generalize {
            // Examples the whole population covers badly.
            uncovered
                .iter()
                .copied()
                .filter(|&i| self.example_dof(&ind.rule, i) < cfg.dof_min)
                .map(|i| {
                    let mut dof_sum = 0.0;
                    let mut weighted = 0.0;
                    for other in population {
                        let dof = self.example_dof(&other.rule, i);
                        dof_sum += dof;
                        weighted += dof * other.scores.confidence;
                    }
                    let w = if dof_sum > 0.0 { 1.0 - weighted / dof_sum } else { 1.0 };
                    (i, w.max(0.0))
                })
                .unzip()
        } else {
            uncovered
                .iter()
                .copied()
                .filter(|&i| self.example_dof(&ind.rule, i) > cfg.dof_min)
                .map(|i| (i, (1.0 - self.example_dof(&ind.rule, i)).max(0.0)))
                .unzip()
        };
        let Some(sel) = ops::weighted_choice(&candidates, &weights, rng) else {
            return ind.rule.clone();
        };
        let target = &self.dataset.examples[sel];
        let mut rule = ind.rule.clone();
        if generalize {
            ops::generalize_rule(&mut rule, &target.distances, target.velocity, cfg, rng);
        } else {
            ops::specialize_rule(&mut rule, &target.distances, target.velocity, cfg, rng);
        }
        // Consequent flip: classes weighted by the degree of fulfillment the
        // mutated rule reaches over each class's examples.
        let classes: Vec<u32> = (1..=self.dataset.n_classes).collect();
        let mut class_dof = vec![0.0f64; classes.len()];
        for &i in uncovered {
            let e = &self.dataset.examples[i];
            let dof = rule.dof(&e.distances, e.velocity).unwrap_or(0.0);
            class_dof[(e.class_id - 1) as usize] += dof;
        }
        if let Some(class_id) = ops::weighted_choice(&classes, &class_dof, rng) {
            rule.consequent = RuleConsequent::Class(ClassConsequent { class_id });
        }
        rule
    }
}

/// Confusion counts over a labelled dataset: `matrix[actual-1][predicted-1]`.
pub fn confusion_matrix(kb: &KnowledgeBase, dataset: &ClassDataset) -> Vec<Vec<f64>> {
    let n = dataset.n_classes as usize;
    let mut matrix = vec![vec![0.0; n]; n];
    for e in &dataset.examples {
        let predicted = kb
            .classify(&e.distances, e.velocity)
            .expect("classification knowledge base");
        matrix[(e.class_id - 1) as usize][(predicted - 1) as usize] += 1.0;
    }
    matrix
}

/// Accuracy and Cohen's kappa from a (count or percentage) confusion matrix.
/// Kappa is undefined (`None`) when the expected agreement is already 1, e.g.
/// for a single-class dataset.
pub fn accuracy_and_kappa(matrix: &[Vec<f64>]) -> (f64, Option<f64>) {
    let n = matrix.len();
    let total: f64 = matrix.iter().flatten().sum();
    if total <= 0.0 {
        return (0.0, None);
    }
    let mut trace = 0.0;
    let mut expected = 0.0;
    for i in 0..n {
        trace += matrix[i][i];
        let row: f64 = matrix[i].iter().sum();
        let col: f64 = matrix.iter().map(|r| r[i]).sum();
        expected += row * col;
    }
    let p_o = trace / total;
    let p_e = expected / (total * total);
    if (1.0 - p_e).abs() < 1e-12 {
        return (p_o, None);
    }
    (p_o, Some((p_o - p_e) / (1.0 - p_e)))
}

/// Confusion matrix plus the derived metrics for a knowledge base.
pub fn confusion_and_kappa(
    kb: &KnowledgeBase,
    dataset: &ClassDataset,
) -> (Vec<Vec<f64>>, f64, Option<f64>) {
    let matrix = confusion_matrix(kb, dataset);
    let (accuracy, kappa) = accuracy_and_kappa(&matrix);
    (matrix, accuracy, kappa)
}
