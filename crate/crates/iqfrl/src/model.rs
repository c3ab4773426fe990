//! Rule genotypes, knowledge bases, and inference.
//!
//! A rule antecedent is a non-empty list of sector propositions ("d(h) is F_d
//! in Q percent of F_b") plus an optional measured-velocity proposition. The
//! consequent is either a pair of output labels (control rules) or a class id
//! (classifier rules).

use std::f64::consts::FRAC_PI_4;

use thiserror::Error;

use crate::fuzzy::{
    FuzzyError, LinguisticLabel, MembershipFn, QuantifierLabel, VarKind, VariableUniverse,
};

/// Output label granularities are fixed, single-granularity partitions.
pub const VLIN_GRANULARITY: u32 = 9;
pub const VANG_GRANULARITY: u32 = 19;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("no rule fires for the input (uncovered input)")]
    UncoveredInput,
    #[error("rule is invalid: {0:?}")]
    InvalidRule(Vec<String>),
    #[error("knowledge base has no rules")]
    EmptyKnowledgeBase,
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// The universes every dataset, rule, and simulator run agree on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Universes {
    pub n_beams: usize,
    pub distance: VariableUniverse,
    pub beam: VariableUniverse,
    pub velocity: VariableUniverse,
    pub vlin: VariableUniverse,
    pub vang: VariableUniverse,
}

impl Universes {
    /// Universes for a robot with two back-to-back 180-degree scanners.
    pub fn standard() -> Self {
        Self::with_beams(722)
    }

    pub fn with_beams(n_beams: usize) -> Self {
        assert!(n_beams >= 2, "need at least two beams");
        Self {
            n_beams,
            distance: VariableUniverse::new(VarKind::Distance, 0.0, 1.5).unwrap(),
            beam: VariableUniverse::new(VarKind::Beam, 0.0, (n_beams - 1) as f64).unwrap(),
            velocity: VariableUniverse::new(VarKind::Velocity, 0.0, 0.5).unwrap(),
            vlin: VariableUniverse::new(VarKind::LinVel, 0.0, 0.5).unwrap(),
            vang: VariableUniverse::new(VarKind::AngVel, -FRAC_PI_4, FRAC_PI_4).unwrap(),
        }
    }

    pub fn universe(&self, kind: VarKind) -> Option<VariableUniverse> {
        Some(match kind {
            VarKind::Distance => self.distance,
            VarKind::Beam => self.beam,
            VarKind::Velocity => self.velocity,
            VarKind::LinVel => self.vlin,
            VarKind::AngVel => self.vang,
            VarKind::Quantifier => return None,
        })
    }
}

/// "d(h) is F_d in Q of F_b".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorProposition {
    pub f_d: LinguisticLabel,
    pub f_b: LinguisticLabel,
    pub q: QuantifierLabel,
}

impl SectorProposition {
    /// Degree of fulfillment of the quantified proposition for a scan.
    pub fn dof(&self, scan: &[f64]) -> Result<f64, FuzzyError> {
        let p = crate::fuzzy::proportion(scan, &self.f_d, &self.f_b)?;
        Ok(self.q.fulfillment(p))
    }
}

/// "velocity is F_v".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityProposition {
    pub f_v: LinguisticLabel,
}

impl VelocityProposition {
    pub fn dof(&self, velocity: f64) -> f64 {
        self.f_v.membership(velocity)
    }
}

/// Control consequent: one label per output variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consequent {
    pub vlin: LinguisticLabel,
    pub vang: LinguisticLabel,
}

impl Consequent {
    pub fn from_indices(universes: &Universes, vlin_index: u32, vang_index: u32) -> Result<Self, FuzzyError> {
        Ok(Self {
            vlin: LinguisticLabel::new(universes.vlin, VLIN_GRANULARITY, vlin_index)?,
            vang: LinguisticLabel::new(universes.vang, VANG_GRANULARITY, vang_index)?,
        })
    }

    pub fn centers(&self) -> (f64, f64) {
        (self.vlin.center(), self.vang.center())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassConsequent {
    pub class_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleConsequent {
    Control(Consequent),
    Class(ClassConsequent),
}

/// A grammar-valid quantified fuzzy rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QFRule {
    pub sectors: Vec<SectorProposition>,
    pub velocity: Option<VelocityProposition>,
    pub consequent: RuleConsequent,
}

impl QFRule {
    /// Checks derivability from the rule grammar; diagnostics list every
    /// violation found.
    pub fn validate(&self, universes: &Universes) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if self.sectors.is_empty() {
            problems.push("rule needs at least one sector proposition".to_string());
        }
        for (i, s) in self.sectors.iter().enumerate() {
            if s.f_d.universe.kind != VarKind::Distance {
                problems.push(format!("sector {i}: F_d is not on the distance universe"));
            }
            if s.f_b.universe.kind != VarKind::Beam {
                problems.push(format!("sector {i}: F_b is not on the beam universe"));
            }
            if s.f_d.index == 0 || s.f_d.index > s.f_d.granularity {
                problems.push(format!("sector {i}: F_d index out of range"));
            }
            if s.f_b.index == 0 || s.f_b.index > s.f_b.granularity {
                problems.push(format!("sector {i}: F_b index out of range"));
            }
            if !(10.0..=100.0).contains(&s.q.q_percent) {
                problems.push(format!("sector {i}: quantifier outside [10, 100]"));
            }
        }
        if let Some(v) = &self.velocity {
            if v.f_v.universe.kind != VarKind::Velocity {
                problems.push("velocity proposition is not on the velocity universe".to_string());
            }
            if v.f_v.index == 0 || v.f_v.index > v.f_v.granularity {
                problems.push("velocity label index out of range".to_string());
            }
        }
        match &self.consequent {
            RuleConsequent::Control(c) => {
                if c.vlin.granularity != VLIN_GRANULARITY || c.vlin.universe != universes.vlin {
                    problems.push("vlin consequent off the output partition".to_string());
                }
                if c.vang.granularity != VANG_GRANULARITY || c.vang.universe != universes.vang {
                    problems.push("vang consequent off the output partition".to_string());
                }
            }
            RuleConsequent::Class(c) => {
                if c.class_id == 0 {
                    problems.push("class id must be positive".to_string());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidRule(problems))
        }
    }

    /// Minimum t-norm over all antecedent propositions. A sector label whose
    /// support contains no beam constrains nothing satisfiable, so it
    /// contributes 0 rather than an error.
    pub fn dof(&self, scan: &[f64], velocity: f64) -> Result<f64, FuzzyError> {
        let mut min = 1.0f64;
        for s in &self.sectors {
            let dof = match s.dof(scan) {
                Ok(d) => d,
                Err(FuzzyError::EmptySector) => 0.0,
                Err(e) => return Err(e),
            };
            min = min.min(dof);
            if min == 0.0 {
                return Ok(0.0);
            }
        }
        if let Some(v) = &self.velocity {
            min = min.min(v.dof(velocity));
        }
        Ok(min)
    }

    pub fn control_consequent(&self) -> Option<&Consequent> {
        match &self.consequent {
            RuleConsequent::Control(c) => Some(c),
            RuleConsequent::Class(_) => None,
        }
    }

    pub fn class_consequent(&self) -> Option<&ClassConsequent> {
        match &self.consequent {
            RuleConsequent::Control(_) => None,
            RuleConsequent::Class(c) => Some(c),
        }
    }
}

/// Whether a knowledge base drives outputs or picks classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbKind {
    Regression,
    Classification { n_classes: u32, default_class: u32 },
}

/// A rule together with the fitness it ended its epoch with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRule {
    pub rule: QFRule,
    pub fitness: f64,
}

/// Ordered rule set plus the universes it was learned on.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub universes: Universes,
    pub kind: KbKind,
    pub rules: Vec<ScoredRule>,
}

impl KnowledgeBase {
    pub fn new(universes: Universes, kind: KbKind) -> Self {
        Self { universes, kind, rules: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for sr in &self.rules {
            sr.rule.validate(&self.universes)?;
            match (&self.kind, &sr.rule.consequent) {
                (KbKind::Regression, RuleConsequent::Control(_)) => {}
                (KbKind::Classification { n_classes, .. }, RuleConsequent::Class(c)) => {
                    if c.class_id > *n_classes {
                        return Err(ModelError::InvalidRule(vec![format!(
                            "class id {} exceeds class count {n_classes}",
                            c.class_id
                        )]));
                    }
                }
                _ => {
                    return Err(ModelError::InvalidRule(vec![
                        "rule consequent kind does not match the knowledge base".to_string(),
                    ]))
                }
            }
        }
        Ok(())
    }

    /// Weighted-average defuzzification over all firing rules.
    pub fn infer(&self, scan: &[f64], velocity: f64) -> Result<(f64, f64), ModelError> {
        let mut num_lin = 0.0;
        let mut num_ang = 0.0;
        let mut den = 0.0;
        for sr in &self.rules {
            let c = sr.rule.control_consequent().ok_or_else(|| {
                ModelError::InvalidRule(vec!["classifier rule in a control inference".to_string()])
            })?;
            let dof = sr.rule.dof(scan, velocity)?;
            if dof > 0.0 {
                let (lv, av) = c.centers();
                num_lin += dof * lv;
                num_ang += dof * av;
                den += dof;
            }
        }
        if den == 0.0 {
            return Err(ModelError::UncoveredInput);
        }
        Ok((num_lin / den, num_ang / den))
    }

    /// Class of the max-DOF rule; ties go to the earliest rule; the default
    /// class when nothing fires.
    pub fn classify(&self, scan: &[f64], velocity: f64) -> Result<u32, ModelError> {
        let default_class = match self.kind {
            KbKind::Classification { default_class, .. } => default_class,
            KbKind::Regression => {
                return Err(ModelError::InvalidRule(vec![
                    "classification over a regression knowledge base".to_string(),
                ]))
            }
        };
        let mut best: Option<(f64, u32)> = None;
        for sr in &self.rules {
            let class = sr
                .rule
                .class_consequent()
                .ok_or_else(|| {
                    ModelError::InvalidRule(vec!["control rule in a classifier".to_string()])
                })?
                .class_id;
            let dof = sr.rule.dof(scan, velocity)?;
            if dof > 0.0 && best.map_or(true, |(bd, _)| dof > bd) {
                best = Some((dof, class));
            }
        }
        Ok(best.map_or(default_class, |(_, c)| c))
    }
}
