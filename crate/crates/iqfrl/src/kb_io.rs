//! Line-oriented `.qfr` text format for knowledge bases.
//!
//! The format mirrors how learned rules read aloud: one block per rule,
//! sector propositions written as `d A 5 1 in 50 of b A 4 1` ("d(h) is
//! A_d^{5,1} in 50 percent of A_b^{4,1}"), plus a header carrying the
//! universes and the output partitions. Floats are printed with Rust's
//! shortest round-trip formatting, so serialize/parse is the identity.

use std::fmt::Write as _;

use thiserror::Error;

use crate::fuzzy::{LinguisticLabel, QuantifierLabel, VarKind, VariableUniverse};
use crate::model::{
    ClassConsequent, Consequent, KbKind, KnowledgeBase, QFRule, RuleConsequent, ScoredRule,
    SectorProposition, Universes, VelocityProposition,
};

pub const KB_MAGIC: &str = "iqfrl-kb";
pub const KB_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq)]
#[error("parse error at line {line}, column {col}: {message} (found {token:?})")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub token: String,
    pub message: String,
}

/// Cursor over the whitespace-separated tokens of one line, tracking columns.
pub(crate) struct LineTokens<'a> {
    line_no: usize,
    rest: &'a str,
    consumed: usize,
}

impl<'a> LineTokens<'a> {
    pub fn new(line_no: usize, line: &'a str) -> Self {
        Self { line_no, rest: line, consumed: 0 }
    }

    pub fn next(&mut self) -> Option<(usize, &'a str)> {
        let trimmed = self.rest.trim_start();
        let skipped = self.rest.len() - trimmed.len();
        let start = self.consumed + skipped;
        if trimmed.is_empty() {
            return None;
        }
        let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let tok = &trimmed[..end];
        self.rest = &trimmed[end..];
        self.consumed = start + end;
        Some((start + 1, tok))
    }

    pub fn expect(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        self.next().ok_or_else(|| ParseError {
            line: self.line_no,
            col: self.consumed + 1,
            token: "<end of line>".to_string(),
            message: format!("expected {what}"),
        })
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (col, tok) = self.expect(&format!("keyword '{kw}'"))?;
        if tok != kw {
            return Err(self.error(col, tok, &format!("expected keyword '{kw}'")));
        }
        Ok(())
    }

    pub fn expect_f64(&mut self, what: &str) -> Result<f64, ParseError> {
        let (col, tok) = self.expect(what)?;
        tok.parse::<f64>()
            .map_err(|_| self.error(col, tok, &format!("expected a number for {what}")))
    }

    pub fn expect_u32(&mut self, what: &str) -> Result<u32, ParseError> {
        let (col, tok) = self.expect(what)?;
        tok.parse::<u32>()
            .map_err(|_| self.error(col, tok, &format!("expected an integer for {what}")))
    }

    pub fn expect_usize(&mut self, what: &str) -> Result<usize, ParseError> {
        let (col, tok) = self.expect(what)?;
        tok.parse::<usize>()
            .map_err(|_| self.error(col, tok, &format!("expected an integer for {what}")))
    }

    pub fn expect_end(&mut self) -> Result<(), ParseError> {
        if let Some((col, tok)) = self.next() {
            return Err(self.error(col, tok, "unexpected trailing token"));
        }
        Ok(())
    }

    pub fn error(&self, col: usize, token: &str, message: &str) -> ParseError {
        ParseError {
            line: self.line_no,
            col,
            token: token.to_string(),
            message: message.to_string(),
        }
    }
}

/// Installs a parsed universe line into a [`Universes`] set, rejecting
/// universes that are fixed or inconsistent with the beam count.
pub(crate) fn set_universe(universes: &mut Universes, uv: VariableUniverse) -> Result<(), String> {
    match uv.kind {
        VarKind::Distance => universes.distance = uv,
        VarKind::Beam => {
            if uv.min != 0.0 || uv.max != (universes.n_beams - 1) as f64 {
                return Err("beam universe does not match the beam count".to_string());
            }
            universes.beam = uv;
        }
        VarKind::Velocity => universes.velocity = uv,
        VarKind::LinVel => universes.vlin = uv,
        VarKind::AngVel => universes.vang = uv,
        VarKind::Quantifier => return Err("the quantifier universe is fixed".to_string()),
    }
    Ok(())
}

fn write_label(out: &mut String, label: &LinguisticLabel) {
    let _ = write!(out, "A {} {}", label.granularity, label.index);
}

pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    let u = &kb.universes;
    let _ = writeln!(out, "{KB_MAGIC} {KB_VERSION}");
    let _ = writeln!(out, "beams {}", u.n_beams);
    for uv in [u.distance, u.beam, u.velocity, u.vlin, u.vang] {
        let _ = writeln!(out, "universe {} {} {}", uv.kind, uv.min, uv.max);
    }
    match kb.kind {
        KbKind::Regression => {
            let _ = writeln!(out, "mode regression");
        }
        KbKind::Classification { n_classes, default_class } => {
            let _ = writeln!(out, "mode classification classes {n_classes} default {default_class}");
        }
    }
    for sr in &kb.rules {
        let _ = writeln!(out, "rule fitness {}", sr.fitness);
        for s in &sr.rule.sectors {
            out.push_str("  d ");
            write_label(&mut out, &s.f_d);
            let _ = write!(out, " in {} of b ", s.q.q_percent);
            write_label(&mut out, &s.f_b);
            out.push('\n');
        }
        if let Some(v) = &sr.rule.velocity {
            out.push_str("  velocity ");
            write_label(&mut out, &v.f_v);
            out.push('\n');
        }
        match &sr.rule.consequent {
            RuleConsequent::Control(c) => {
                let _ = writeln!(out, "  then vlin {} vang {}", c.vlin.index, c.vang.index);
            }
            RuleConsequent::Class(c) => {
                let _ = writeln!(out, "  then class {}", c.class_id);
            }
        }
        out.push_str("end\n");
    }
    out
}

fn parse_label(
    toks: &mut LineTokens<'_>,
    universe: VariableUniverse,
) -> Result<LinguisticLabel, ParseError> {
    toks.expect_keyword("A")?;
    let granularity = toks.expect_u32("label granularity")?;
    let index = toks.expect_u32("label index")?;
    LinguisticLabel::new(universe, granularity, index).map_err(|e| ParseError {
        line: 0,
        col: 0,
        token: format!("A {granularity} {index}"),
        message: e.to_string(),
    })
}

struct HeaderState {
    n_beams: Option<usize>,
    universes: Vec<VariableUniverse>,
    kind: Option<KbKind>,
}

impl HeaderState {
    fn finish(self, line: usize) -> Result<(Universes, KbKind), ParseError> {
        let fail = |msg: &str| ParseError {
            line,
            col: 1,
            token: "<header>".to_string(),
            message: msg.to_string(),
        };
        let n_beams = self.n_beams.ok_or_else(|| fail("missing 'beams' line"))?;
        let mut universes = Universes::with_beams(n_beams);
        for uv in &self.universes {
            set_universe(&mut universes, *uv).map_err(|m| fail(&m))?;
        }
        let kind = self.kind.ok_or_else(|| fail("missing 'mode' line"))?;
        Ok((universes, kind))
    }
}

pub fn parse_kb(text: &str) -> Result<KnowledgeBase, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, first) = lines.next().ok_or_else(|| ParseError {
        line: 1,
        col: 1,
        token: "<empty>".to_string(),
        message: "empty document".to_string(),
    })?;
    let mut toks = LineTokens::new(line_no, first);
    toks.expect_keyword(KB_MAGIC)?;
    toks.expect_keyword(KB_VERSION)?;
    toks.expect_end()?;

    let mut header = HeaderState { n_beams: None, universes: Vec::new(), kind: None };
    let mut kb: Option<KnowledgeBase> = None;
    let mut current: Option<(f64, Vec<SectorProposition>, Option<VelocityProposition>, Option<RuleConsequent>)> =
        None;
    let mut last_line = line_no;

    for (line_no, raw) in lines {
        last_line = line_no;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut toks = LineTokens::new(line_no, line);
        let (col, word) = toks.expect("a directive")?;
        match word {
            "beams" => {
                header.n_beams = Some(toks.expect_usize("beam count")?);
                toks.expect_end()?;
            }
            "universe" => {
                let (kcol, kname) = toks.expect("universe name")?;
                let kind = VarKind::from_name(kname)
                    .ok_or_else(|| toks.error(kcol, kname, "unknown universe name"))?;
                let min = toks.expect_f64("universe minimum")?;
                let max = toks.expect_f64("universe maximum")?;
                toks.expect_end()?;
                let uv = VariableUniverse::new(kind, min, max)
                    .map_err(|e| toks.error(kcol, kname, &e.to_string()))?;
                header.universes.push(uv);
            }
            "mode" => {
                let (mcol, mode) = toks.expect("mode name")?;
                header.kind = Some(match mode {
                    "regression" => KbKind::Regression,
                    "classification" => {
                        toks.expect_keyword("classes")?;
                        let n_classes = toks.expect_u32("class count")?;
                        toks.expect_keyword("default")?;
                        let default_class = toks.expect_u32("default class")?;
                        KbKind::Classification { n_classes, default_class }
                    }
                    other => return Err(toks.error(mcol, other, "unknown mode")),
                });
                toks.expect_end()?;
            }
            "rule" => {
                if kb.is_none() {
                    let state = std::mem::replace(
                        &mut header,
                        HeaderState { n_beams: None, universes: Vec::new(), kind: None },
                    );
                    let (universes, kind) = state.finish(line_no)?;
                    kb = Some(KnowledgeBase::new(universes, kind));
                }
                if current.is_some() {
                    return Err(toks.error(col, word, "previous rule not closed with 'end'"));
                }
                toks.expect_keyword("fitness")?;
                let fitness = toks.expect_f64("rule fitness")?;
                toks.expect_end()?;
                current = Some((fitness, Vec::new(), None, None));
            }
            "d" => {
                let kb_ref = kb.as_ref().ok_or_else(|| toks.error(col, word, "proposition outside a rule"))?;
                let u = kb_ref.universes;
                let (_, sectors, _, _) = current
                    .as_mut()
                    .ok_or_else(|| toks.error(col, word, "proposition outside a rule"))?;
                let f_d = parse_label(&mut toks, u.distance).map_err(|e| relocate(e, line_no))?;
                toks.expect_keyword("in")?;
                let q_val = toks.expect_f64("quantifier percentage")?;
                let q = QuantifierLabel::new(q_val)
                    .map_err(|e| toks.error(col, &q_val.to_string(), &e.to_string()))?;
                toks.expect_keyword("of")?;
                toks.expect_keyword("b")?;
                let f_b = parse_label(&mut toks, u.beam).map_err(|e| relocate(e, line_no))?;
                toks.expect_end()?;
                sectors.push(SectorProposition { f_d, f_b, q });
            }
            "velocity" => {
                let kb_ref = kb.as_ref().ok_or_else(|| toks.error(col, word, "proposition outside a rule"))?;
                let u = kb_ref.universes;
                let (_, _, velocity, _) = current
                    .as_mut()
                    .ok_or_else(|| toks.error(col, word, "proposition outside a rule"))?;
                let f_v = parse_label(&mut toks, u.velocity).map_err(|e| relocate(e, line_no))?;
                toks.expect_end()?;
                if velocity.replace(VelocityProposition { f_v }).is_some() {
                    return Err(toks.error(col, word, "duplicate velocity proposition"));
                }
            }
            "then" => {
                let kb_ref = kb.as_ref().ok_or_else(|| toks.error(col, word, "consequent outside a rule"))?;
                let u = kb_ref.universes;
                let kind = kb_ref.kind;
                let (_, _, _, consequent) = current
                    .as_mut()
                    .ok_or_else(|| toks.error(col, word, "consequent outside a rule"))?;
                let (ccol, ctok) = toks.expect("consequent kind")?;
                let parsed = match (ctok, kind) {
                    ("vlin", KbKind::Regression) => {
                        let vlin_index = toks.expect_u32("vlin label index")?;
                        toks.expect_keyword("vang")?;
                        let vang_index = toks.expect_u32("vang label index")?;
                        let c = Consequent::from_indices(&u, vlin_index, vang_index)
                            .map_err(|e| toks.error(ccol, ctok, &e.to_string()))?;
                        RuleConsequent::Control(c)
                    }
                    ("class", KbKind::Classification { .. }) => {
                        let class_id = toks.expect_u32("class id")?;
                        RuleConsequent::Class(ClassConsequent { class_id })
                    }
                    _ => return Err(toks.error(ccol, ctok, "consequent does not match the mode")),
                };
                toks.expect_end()?;
                if consequent.replace(parsed).is_some() {
                    return Err(toks.error(col, word, "duplicate consequent"));
                }
            }
            "end" => {
                toks.expect_end()?;
                let (fitness, sectors, velocity, consequent) = current
                    .take()
                    .ok_or_else(|| toks.error(col, word, "'end' outside a rule"))?;
                let consequent =
                    consequent.ok_or_else(|| toks.error(col, word, "rule has no consequent"))?;
                let rule = QFRule { sectors, velocity, consequent };
                let kb_mut = kb.as_mut().expect("rule body requires a header");
                rule.validate(&kb_mut.universes)
                    .map_err(|e| toks.error(col, word, &e.to_string()))?;
                kb_mut.rules.push(ScoredRule { rule, fitness });
            }
            other => return Err(toks.error(col, other, "unknown directive")),
        }
    }

    if current.is_some() {
        return Err(ParseError {
            line: last_line,
            col: 1,
            token: "<end of file>".to_string(),
            message: "unterminated rule block".to_string(),
        });
    }
    match kb {
        Some(kb) => Ok(kb),
        // Header-only document: an empty knowledge base.
        None => {
            let (universes, kind) = header.finish(last_line)?;
            Ok(KnowledgeBase::new(universes, kind))
        }
    }
}

fn relocate(mut e: ParseError, line: usize) -> ParseError {
    if e.line == 0 {
        e.line = line;
        e.col = 1;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Universes;

    #[test]
    fn empty_kb_round_trips() {
        let kb = KnowledgeBase::new(Universes::with_beams(16), KbKind::Regression);
        let text = serialize_kb(&kb);
        let back = parse_kb(&text).unwrap();
        assert_eq!(kb, back);
    }

    #[test]
    fn quantified_rule_round_trips() {
        // "d(h) is A_d^{5,1} in 50 percent of A_b^{4,1}" with vlin A^1, vang A^19.
        let u = Universes::standard();
        let mut kb = KnowledgeBase::new(u, KbKind::Regression);
        kb.rules.push(ScoredRule {
            rule: QFRule {
                sectors: vec![SectorProposition {
                    f_d: LinguisticLabel::new(u.distance, 5, 1).unwrap(),
                    f_b: LinguisticLabel::new(u.beam, 4, 1).unwrap(),
                    q: QuantifierLabel::new(50.0).unwrap(),
                }],
                velocity: None,
                consequent: RuleConsequent::Control(Consequent::from_indices(&u, 1, 19).unwrap()),
            },
            fitness: 0.97,
        });
        let text = serialize_kb(&kb);
        assert!(text.contains("d A 5 1 in 50 of b A 4 1"));
        let back = parse_kb(&text).unwrap();
        assert_eq!(kb, back);
        assert_eq!(serialize_kb(&back), text);
    }

    #[test]
    fn classification_kb_round_trips() {
        let u = Universes::with_beams(16);
        let mut kb = KnowledgeBase::new(u, KbKind::Classification { n_classes: 3, default_class: 1 });
        kb.rules.push(ScoredRule {
            rule: QFRule {
                sectors: vec![SectorProposition {
                    f_d: LinguisticLabel::new(u.distance, 3, 2).unwrap(),
                    f_b: LinguisticLabel::new(u.beam, 2, 2).unwrap(),
                    q: QuantifierLabel::new(62.5).unwrap(),
                }],
                velocity: Some(VelocityProposition {
                    f_v: LinguisticLabel::new(u.velocity, 11, 4).unwrap(),
                }),
                consequent: RuleConsequent::Class(ClassConsequent { class_id: 2 }),
            },
            fitness: 0.5,
        });
        let back = parse_kb(&serialize_kb(&kb)).unwrap();
        assert_eq!(kb, back);
    }

    #[test]
    fn parse_error_carries_position() {
        let text = "iqfrl-kb v1\nbeams 16\nuniverse distance 0 1.5\nmode bogus\n";
        let err = parse_kb(text).unwrap_err();
        assert_eq!(err.line, 4);
        assert_eq!(err.token, "bogus");
        assert!(err.col > 1);
    }
}
