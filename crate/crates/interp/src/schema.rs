//! Declarative description of an algorithm: which subtasks must exist for
//! each digit, where in the sequence they may live, which tokens they read,
//! and how they are ordered relative to each other.

use std::collections::HashMap;
use std::path::Path;

use cascade_core::{Layout, Role};
use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{InterpError, Result};
use crate::subtask::{Subtask, SubtaskKind};

/// Digits a subtask is instantiated for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DigitSet {
    All,
    None,
    From(usize),
    List(Vec<usize>),
}

impl DigitSet {
    pub fn expand(&self, n_digits: usize) -> Vec<Option<usize>> {
        match self {
            DigitSet::All => (0..n_digits).map(Some).collect(),
            DigitSet::None => vec![None],
            DigitSet::From(s) => (*s..n_digits).map(Some).collect(),
            DigitSet::List(v) => v
                .iter()
                .filter(|&&k| k < n_digits)
                .map(|&k| Some(k))
                .collect(),
        }
    }
}

/// Which digits of the earlier subtask an ordering relates to digit `k` of
/// the later one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DigitRelation {
    /// `j < k`
    Lower,
    /// `j <= k`
    LowerOrEqual,
    /// `j = k`
    Same,
}

impl DigitRelation {
    fn digits(self, k: usize) -> std::ops::Range<usize> {
        match self {
            DigitRelation::Lower => 0..k,
            DigitRelation::LowerOrEqual => 0..k + 1,
            DigitRelation::Same => k..k + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskSpec {
    pub kind: SubtaskKind,
    pub digits: DigitSet,
    pub required: bool,
    /// Inclusive `[from, to]` position window as role templates.
    pub window: [String; 2],
    /// Tokens a candidate head must attend to, as role templates.
    #[serde(default)]
    pub sources: Vec<String>,
}

/// `later` nodes for digit `k` sit after (or at, when not strict) some
/// `earlier` node for each related digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ordering {
    pub later: SubtaskKind,
    pub earlier: SubtaskKind,
    pub digits: DigitRelation,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSchema {
    pub name: String,
    pub subtasks: Vec<SubtaskSpec>,
    #[serde(default)]
    pub orderings: Vec<Ordering>,
}

/// Evaluates a role template such as `D'{k}`, `pred:A{k+1}`, `A{n-1}`,
/// `OP`, `=` or `SIGN` to a token position. The `pred:` prefix selects the
/// position whose logits predict that token.
pub fn resolve_template(template: &str, layout: Layout, k: Option<usize>) -> Result<usize> {
    let bad = |why: &str| InterpError::Schema(format!("template {template:?}: {why}"));
    let (pred, body) = match template.strip_prefix("pred:") {
        Some(rest) => (true, rest),
        None => (false, template),
    };
    let n = layout.n_digits;
    let role = match body {
        "OP" => Role::Operator,
        "=" => Role::Equals,
        "SIGN" => Role::Sign,
        _ => {
            let (ctor, limit, expr): (fn(usize) -> Role, usize, &str) =
                if let Some(e) = body.strip_prefix("D'") {
                    (Role::DPrime, n, e)
                } else if let Some(e) = body.strip_prefix('D') {
                    (Role::D, n, e)
                } else if let Some(e) = body.strip_prefix('A') {
                    (Role::A, n + 1, e)
                } else {
                    return Err(bad("unknown role"));
                };
            let expr = expr
                .strip_prefix('{')
                .and_then(|e| e.strip_suffix('}'))
                .ok_or_else(|| bad("expected {index}"))?;
            let idx = eval_index(expr, n, k).ok_or_else(|| bad("index out of range"))?;
            if idx >= limit {
                return Err(bad("index out of range"));
            }
            ctor(idx)
        }
    };
    let pos = layout.position(role);
    if pred {
        pos.checked_sub(1)
            .ok_or_else(|| bad("no predicting position"))
    } else {
        Ok(pos)
    }
}

fn eval_index(expr: &str, n: usize, k: Option<usize>) -> Option<usize> {
    let term = |t: &str| -> Option<i64> {
        match t.trim() {
            "k" => k.map(|k| k as i64),
            "n" => Some(n as i64),
            s => s.parse().ok(),
        }
    };
    let value = if let Some((a, b)) = expr.split_once('+') {
        term(a)? + term(b)?
    } else if let Some((a, b)) = expr.split_once('-') {
        term(a)? - term(b)?
    } else {
        term(expr)?
    };
    usize::try_from(value).ok()
}

impl SubtaskSpec {
    pub fn instances(&self, n_digits: usize) -> Vec<Subtask> {
        self.digits
            .expand(n_digits)
            .into_iter()
            .map(|d| Subtask::new(self.kind, d))
            .collect()
    }

    pub fn window_for(&self, layout: Layout, k: Option<usize>) -> Result<(usize, usize)> {
        let from = resolve_template(&self.window[0], layout, k)?;
        let to = resolve_template(&self.window[1], layout, k)?;
        if from > to {
            return Err(InterpError::Schema(format!(
                "{}: empty window {from}..={to}",
                self.kind
            )));
        }
        Ok((from, to))
    }

    pub fn sources_for(&self, layout: Layout, k: Option<usize>) -> Result<Vec<Role>> {
        self.sources
            .iter()
            .map(|s| {
                let p = resolve_template(s, layout, k)?;
                layout
                    .role(p)
                    .ok_or_else(|| InterpError::Schema(format!("source {s} has no role")))
            })
            .collect()
    }
}

impl AlgorithmSchema {
    pub fn load(path: &Path) -> Result<Self> {
        let schema: AlgorithmSchema = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(schema)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn spec(&self, kind: SubtaskKind) -> Option<&SubtaskSpec> {
        self.subtasks.iter().find(|s| s.kind == kind)
    }

    pub fn instances(&self, n_digits: usize) -> Vec<(Subtask, &SubtaskSpec)> {
        self.subtasks
            .iter()
            .flat_map(|s| s.instances(n_digits).into_iter().map(move |i| (i, s)))
            .collect()
    }

    /// Ordering edges `(earlier, later, strict)` instantiated for `n` digits.
    pub fn ordering_edges(&self, n_digits: usize) -> Vec<(Subtask, Subtask, bool)> {
        let mut edges = Vec::new();
        for o in &self.orderings {
            let (Some(later), Some(earlier)) = (self.spec(o.later), self.spec(o.earlier)) else {
                continue;
            };
            let earlier_digits: Vec<Option<usize>> = earlier.digits.expand(n_digits);
            for l in later.instances(n_digits) {
                let Some(k) = l.digit else { continue };
                for j in o.digits.digits(k) {
                    if earlier_digits.contains(&Some(j)) {
                        edges.push((Subtask::new(o.earlier, Some(j)), l, o.strict));
                    }
                }
            }
        }
        edges
    }

    /// Checks that every kind is declared once, every template resolves for
    /// `n_digits` and the instantiated ordering graph is acyclic.
    pub fn validate(&self, n_digits: usize) -> Result<()> {
        let layout = Layout::new(n_digits);
        for (i, s) in self.subtasks.iter().enumerate() {
            if self.subtasks[..i].iter().any(|t| t.kind == s.kind) {
                return Err(InterpError::Schema(format!("{} declared twice", s.kind)));
            }
            if s.kind.per_digit() == (s.digits == DigitSet::None) {
                return Err(InterpError::Schema(format!("{}: wrong digit set", s.kind)));
            }
            for inst in s.instances(n_digits) {
                s.window_for(layout, inst.digit)?;
                s.sources_for(layout, inst.digit)?;
            }
        }
        for o in &self.orderings {
            for kind in [o.later, o.earlier] {
                if self.spec(kind).is_none() {
                    return Err(InterpError::Schema(format!(
                        "ordering names undeclared {kind}"
                    )));
                }
            }
        }
        let mut graph = DiGraph::<Subtask, ()>::new();
        let mut index = HashMap::new();
        for (inst, _) in self.instances(n_digits) {
            index.insert(inst, graph.add_node(inst));
        }
        for (e, l, _) in self.ordering_edges(n_digits) {
            graph.add_edge(index[&e], index[&l], ());
        }
        if is_cyclic_directed(&graph) {
            return Err(InterpError::Schema(
                "ordering constraints form a cycle".into(),
            ));
        }
        Ok(())
    }

    /// Base-add and carry tri-case for every digit, with the optional
    /// single-digit carry and cascade value.
    pub fn addition() -> Self {
        AlgorithmSchema {
            name: "addition".into(),
            subtasks: vec![
                digit_spec(SubtaskKind::SA, DigitSet::All, true, ["D'{k}", "pred:A{k}"]),
                digit_spec(SubtaskKind::ST, DigitSet::From(1), true, ["D'{k}", "SIGN"]),
                digit_spec(
                    SubtaskKind::SC,
                    DigitSet::All,
                    false,
                    ["D'{k}", "pred:A{k+1}"],
                ),
                SubtaskSpec {
                    kind: SubtaskKind::SV,
                    digits: DigitSet::All,
                    required: false,
                    window: ["=".into(), "pred:A{k+1}".into()],
                    sources: Vec::new(),
                },
            ],
            orderings: vec![
                ordering(
                    SubtaskKind::SA,
                    SubtaskKind::ST,
                    DigitRelation::Lower,
                    false,
                ),
                ordering(
                    SubtaskKind::SV,
                    SubtaskKind::ST,
                    DigitRelation::LowerOrEqual,
                    true,
                ),
            ],
        }
    }

    /// Addition plus positive- and negative-answer subtraction subtasks,
    /// operator detection and sign handling.
    pub fn mixed() -> Self {
        let mut schema = Self::addition();
        schema.name = "mixed".into();
        schema.subtasks.extend([
            digit_spec(SubtaskKind::MD, DigitSet::All, true, ["D'{k}", "pred:A{k}"]),
            digit_spec(SubtaskKind::MT, DigitSet::From(1), true, ["D'{k}", "SIGN"]),
            digit_spec(
                SubtaskKind::MB,
                DigitSet::All,
                false,
                ["D'{k}", "pred:A{k+1}"],
            ),
            digit_spec(SubtaskKind::ND, DigitSet::All, true, ["D'{k}", "pred:A{k}"]),
            digit_spec(
                SubtaskKind::NB,
                DigitSet::All,
                false,
                ["D'{k}", "pred:A{k+1}"],
            ),
            SubtaskSpec {
                kind: SubtaskKind::OPR,
                digits: DigitSet::None,
                required: false,
                window: ["OP".into(), "pred:A{0}".into()],
                sources: vec!["OP".into()],
            },
            SubtaskSpec {
                kind: SubtaskKind::SGN,
                digits: DigitSet::None,
                required: false,
                window: ["SIGN".into(), "pred:A{0}".into()],
                sources: vec!["SIGN".into()],
            },
        ]);
        schema.orderings.push(ordering(
            SubtaskKind::MD,
            SubtaskKind::MT,
            DigitRelation::Lower,
            false,
        ));
        schema
    }
}

fn digit_spec(
    kind: SubtaskKind,
    digits: DigitSet,
    required: bool,
    window: [&str; 2],
) -> SubtaskSpec {
    SubtaskSpec {
        kind,
        digits,
        required,
        window: window.map(String::from),
        sources: vec!["D{k}".into(), "D'{k}".into()],
    }
}

fn ordering(
    later: SubtaskKind,
    earlier: SubtaskKind,
    digits: DigitRelation,
    strict: bool,
) -> Ordering {
    Ordering {
        later,
        earlier,
        digits,
        strict,
    }
}
