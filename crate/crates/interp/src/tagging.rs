use std::collections::{BTreeMap, BTreeSet};

use cascade_core::{QuestionClass, Role};
use cascade_model::{NodeId, Transformer};
use serde::{Deserialize, Serialize};

use crate::ablation::UsefulNodes;
use crate::attention::{AttentionMeans, ATTENTION_THRESHOLD};
use crate::error::{InterpError, Result};
use crate::intervention::{interchange_rate_captured, InterchangeStats};
use crate::pca::pca_captured;
use crate::probe::{PairSet, ProbeSet};
use crate::run::NodeOutputs;
use crate::schema::{AlgorithmSchema, SubtaskSpec};
use crate::subtask::{StateType, Subtask, SubtaskKind};

/// Minimum mean attention on the source token for operator and sign
/// detection, which have no digit pair to single them out.
pub const FLAG_ATTENTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagConfig {
    pub pca_per_value: usize,
    pub n_pairs: usize,
    pub pca_threshold: f64,
    pub intervention_threshold: f64,
    /// Try sets of nodes at one position and layer when no single head
    /// passes.
    pub groups: bool,
    pub seed: u64,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            pca_per_value: 120,
            n_pairs: 200,
            pca_threshold: 0.9,
            intervention_threshold: 0.95,
            groups: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaEvidence {
    pub cluster_score: f64,
    pub evr: Vec<f64>,
    /// Score under the digit pair's three-way split, for binary kinds.
    pub tri_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEvidence {
    /// Mean attention on each required source token.
    pub attention: Vec<(Role, f64)>,
    pub window: (usize, usize),
    pub pca: Option<PcaEvidence>,
    pub intervention: Option<InterchangeStats>,
    /// Largest single-node ablation fail fraction over the relevant classes.
    pub fail_fraction: f64,
    /// The node also separates the tri-state split, so the binary reading
    /// is not the only one the evidence supports.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskTag {
    pub node: NodeId,
    /// Further nodes at the same position and layer that implement the
    /// subtask jointly with `node`.
    pub partners: Vec<NodeId>,
    pub kind: SubtaskKind,
    pub digit: Option<usize>,
    pub evidence: TagEvidence,
}

impl SubtaskTag {
    pub fn subtask(&self) -> Subtask {
        Subtask::new(self.kind, self.digit)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        std::iter::once(self.node)
            .chain(self.partners.iter().copied())
            .collect()
    }
}

/// Everything the search needs about one question class.
pub struct ClassEvidence<'a> {
    pub useful: &'a UsefulNodes,
    pub attention: &'a AttentionMeans,
}

struct Search<'a> {
    model: &'a Transformer,
    classes: &'a BTreeMap<QuestionClass, ClassEvidence<'a>>,
    cfg: &'a TagConfig,
}

impl Search<'_> {
    fn relevant(&self, kind: SubtaskKind) -> Vec<&ClassEvidence<'_>> {
        match kind.class() {
            Some(c) => self.classes.get(&c).into_iter().collect(),
            None => self.classes.values().collect(),
        }
    }

    fn fail_fraction(&self, kind: SubtaskKind, node: NodeId) -> f64 {
        self.relevant(kind)
            .iter()
            .map(|e| e.useful.fail_fraction(node))
            .fold(0.0, f64::max)
    }

    fn useful(&self, kind: SubtaskKind, node: NodeId) -> bool {
        self.relevant(kind).iter().any(|e| e.useful.is_useful(node))
    }

    /// Mean attention on `role`, averaged over the relevant classes.
    fn attention(&self, kind: SubtaskKind, nodes: &[NodeId], role: Role) -> f64 {
        let ev = self.relevant(kind);
        let total: f64 = ev
            .iter()
            .map(|e| {
                nodes
                    .iter()
                    .map(|&n| e.attention.weight(n, role).unwrap_or(0.0))
                    .fold(0.0, f64::max)
            })
            .sum();
        total / ev.len().max(1) as f64
    }

    fn attends(&self, kind: SubtaskKind, nodes: &[NodeId], sources: &[Role]) -> bool {
        let floor = if kind.per_digit() {
            ATTENTION_THRESHOLD
        } else {
            FLAG_ATTENTION
        };
        sources
            .iter()
            .all(|&r| self.attention(kind, nodes, r) > floor)
    }

    fn candidates(
        &self,
        kind: SubtaskKind,
        window: (usize, usize),
        sources: &[Role],
    ) -> Vec<NodeId> {
        let cfg = &self.model.config;
        let mut out = Vec::new();
        for p in window.0..=window.1.min(self.model.layout().seq_len() - 2) {
            for l in 0..cfg.n_layers {
                for h in 0..cfg.n_heads {
                    let node = NodeId::head(p, l, h);
                    if self.useful(kind, node) && self.attends(kind, &[node], sources) {
                        out.push(node);
                    }
                }
                let mlp = NodeId::mlp(p, l);
                if sources.is_empty() && self.useful(kind, mlp) {
                    out.push(mlp);
                }
            }
        }
        out
    }

    /// Node sets at one position and layer: useful heads attending some
    /// source, optionally with the layer's MLP, jointly covering every
    /// source. Smallest sets first.
    fn node_groups(
        &self,
        kind: SubtaskKind,
        window: (usize, usize),
        sources: &[Role],
    ) -> Vec<Vec<NodeId>> {
        let cfg = &self.model.config;
        let mut out = Vec::new();
        for p in window.0..=window.1.min(self.model.layout().seq_len() - 2) {
            for l in 0..cfg.n_layers {
                let heads: Vec<NodeId> = (0..cfg.n_heads)
                    .map(|h| NodeId::head(p, l, h))
                    .filter(|&n| {
                        self.useful(kind, n)
                            && sources
                                .iter()
                                .any(|&r| self.attention(kind, &[n], r) > ATTENTION_THRESHOLD)
                    })
                    .collect();
                let mlp = NodeId::mlp(p, l);
                let with_mlp: &[bool] = if self.useful(kind, mlp) {
                    &[false, true]
                } else {
                    &[false]
                };
                for mask in 1u32..(1 << heads.len()) {
                    let mut g: Vec<NodeId> = (0..heads.len())
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| heads[i])
                        .collect();
                    if !self.attends(kind, &g, sources) {
                        continue;
                    }
                    for &m in with_mlp {
                        if m {
                            g.push(mlp);
                        }
                        if g.len() > 1 {
                            out.push(g.clone());
                        }
                    }
                }
            }
        }
        out.sort_by_key(Vec::len);
        out
    }
}

/// Per-(kind, digit) probes and pairs, built once.
/// A question set with every node's output on it.
struct Captured<T> {
    set: T,
    outputs: NodeOutputs,
}

struct Probes {
    labeled: Option<Captured<ProbeSet>>,
    tri: Option<Captured<ProbeSet>>,
    pairs: Option<Captured<PairSet>>,
}

fn capture_probe(model: &Transformer, set: ProbeSet) -> Result<Captured<ProbeSet>> {
    let outputs = NodeOutputs::capture(model, &set.questions)?;
    Ok(Captured { set, outputs })
}

fn capture_pairs(model: &Transformer, set: PairSet) -> Result<Captured<PairSet>> {
    let donors: Vec<_> = set.pairs.iter().map(|(_, d)| d.clone()).collect();
    let outputs = NodeOutputs::capture(model, &donors)?;
    Ok(Captured { set, outputs })
}

fn build_probes(
    model: &Transformer,
    kind: SubtaskKind,
    k: Option<usize>,
    n: usize,
    cfg: &TagConfig,
) -> Result<Probes> {
    let Some(k) = k else {
        return Ok(Probes {
            labeled: None,
            tri: None,
            pairs: None,
        });
    };
    let labeled = match kind.state() {
        StateType::Tri | StateType::Binary => Some(capture_probe(
            model,
            ProbeSet::labeled(kind, k, n, cfg.pca_per_value, cfg.seed)?,
        )?),
        _ => None,
    };
    let tri = match kind.state() {
        StateType::Binary => Some(capture_probe(
            model,
            ProbeSet::tri_labeled(
                if kind == SubtaskKind::SV {
                    SubtaskKind::ST
                } else {
                    kind
                },
                k,
                n,
                cfg.pca_per_value,
                cfg.seed,
            )?,
        )?),
        _ => None,
    };
    let pairs = PairSet::informative(kind, k, n, cfg.n_pairs, cfg.seed)?;
    Ok(Probes {
        labeled,
        tri,
        pairs: if pairs.pairs.is_empty() {
            None
        } else {
            Some(capture_pairs(model, pairs)?)
        },
    })
}

fn evaluate(
    search: &Search<'_>,
    spec: &SubtaskSpec,
    k: Option<usize>,
    window: (usize, usize),
    sources: &[Role],
    probes: &Probes,
    nodes: &[NodeId],
) -> Result<Option<SubtaskTag>> {
    let cfg = search.cfg;
    let kind = spec.kind;
    let mut pca = None;
    let mut low_confidence = false;
    if let Some(probe) = &probes.labeled {
        let r = pca_captured(&probe.outputs, nodes, &probe.set)?;
        if r.degenerate || r.cluster_score < cfg.pca_threshold {
            return Ok(None);
        }
        let tri_score = match &probes.tri {
            Some(t) => Some(pca_captured(&t.outputs, nodes, &t.set)?.cluster_score),
            None => None,
        };
        low_confidence =
            kind == SubtaskKind::SV && tri_score.is_some_and(|s| s >= cfg.pca_threshold);
        pca = Some(PcaEvidence {
            cluster_score: r.cluster_score,
            evr: r.evr,
            tri_score,
        });
    }
    let intervention = match &probes.pairs {
        Some(pairs) => {
            let stats = interchange_rate_captured(search.model, nodes, &pairs.set, &pairs.outputs)?;
            if stats.rate < cfg.intervention_threshold {
                return Ok(None);
            }
            Some(stats)
        }
        None => None,
    };
    let attention = sources
        .iter()
        .map(|&r| (r, search.attention(kind, nodes, r)))
        .collect();
    Ok(Some(SubtaskTag {
        node: nodes[0],
        partners: nodes[1..].to_vec(),
        kind,
        digit: k,
        evidence: TagEvidence {
            attention,
            window,
            pca,
            intervention,
            fail_fraction: nodes
                .iter()
                .map(|&n| search.fail_fraction(kind, n))
                .fold(0.0, f64::max),
            low_confidence,
        },
    }))
}

/// Searches useful nodes for every subtask instance of `schema`. All
/// satisfying nodes are kept; instances with none are simply absent.
pub fn tag_subtasks(
    model: &Transformer,
    schema: &AlgorithmSchema,
    classes: &BTreeMap<QuestionClass, ClassEvidence<'_>>,
    cfg: &TagConfig,
) -> Result<Vec<SubtaskTag>> {
    let n = model.config.n_digits;
    schema.validate(n)?;
    let layout = model.layout();
    let search = Search {
        model,
        classes,
        cfg,
    };
    let mut tags = Vec::new();
    for (inst, spec) in schema.instances(n) {
        if search.relevant(spec.kind).is_empty() {
            continue;
        }
        let window = spec.window_for(layout, inst.digit)?;
        let sources = spec.sources_for(layout, inst.digit)?;
        let candidates = search.candidates(spec.kind, window, &sources);
        let groups = if cfg.groups && !sources.is_empty() && spec.kind.per_digit() {
            search.node_groups(spec.kind, window, &sources)
        } else {
            Vec::new()
        };
        if candidates.is_empty() && groups.is_empty() {
            continue;
        }
        let probes = match build_probes(model, spec.kind, inst.digit, n, cfg) {
            Ok(p) => p,
            // Values that cannot vary at this digit leave nothing to test.
            Err(InterpError::Probe(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut found = Vec::new();
        for node in candidates {
            if let Some(tag) = evaluate(
                &search,
                spec,
                inst.digit,
                window,
                &sources,
                &probes,
                &[node],
            )? {
                found.push(tag);
            }
        }
        if found.is_empty() {
            let mut passed: Vec<Vec<NodeId>> = Vec::new();
            for group in groups {
                // Supersets of a passing set add nothing.
                if passed.iter().any(|p| p.iter().all(|n| group.contains(n))) {
                    continue;
                }
                if let Some(tag) =
                    evaluate(&search, spec, inst.digit, window, &sources, &probes, &group)?
                {
                    passed.push(group);
                    found.push(tag);
                }
            }
        }
        tags.extend(found);
    }
    tags.sort_by(|a, b| (a.node, a.kind, a.digit).cmp(&(b.node, b.kind, b.digit)));
    Ok(tags)
}

/// Nodes carrying any tag, grouped by the question class of the subtask.
/// Operator and sign tags count for every class.
pub fn tagged_nodes_by_class(tags: &[SubtaskTag]) -> BTreeMap<QuestionClass, BTreeSet<NodeId>> {
    let mut out: BTreeMap<QuestionClass, BTreeSet<NodeId>> = BTreeMap::new();
    for t in tags {
        let classes: Vec<QuestionClass> = match t.kind.class() {
            Some(c) => vec![c],
            None => QuestionClass::ALL.to_vec(),
        };
        for c in classes {
            out.entry(c).or_default().extend(t.nodes());
        }
    }
    out
}
