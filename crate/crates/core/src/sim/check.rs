use std::collections::BTreeSet;
use std::fmt;

use crate::diff::{classify, ChangeClass, DiffResult};
use crate::format::serialize_graph;
use crate::graph::{direct_subtree, validate, LevelGraph, NodeId, PropertyValue};
use crate::merge::{
    merge3, Conflict, ConflictResolution, ConflictSignature, MergeOutcome, MergePolicy, Resolution,
};

use super::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Law {
    /// The merge succeeds and yields a valid level under every resolution.
    Validity,
    /// Prefer policies leave no conflict unresolved.
    Resolution,
    /// Same inputs, same bytes.
    Determinism,
    /// Exchanging the branches (and the preference) changes nothing.
    Symmetry,
    /// merge(O, A, A) = A without conflicts.
    Absorption,
    /// merge(O, A, O) = A and merge(O, O, B) = B without conflicts.
    OneSided,
    /// Edits with disjoint footprints all survive, conflict-free.
    EditPreservation,
    /// The conflict set matches the reference oracle.
    OracleAgreement,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::Validity => "validity",
            Law::Resolution => "resolution",
            Law::Determinism => "determinism",
            Law::Symmetry => "symmetry",
            Law::Absorption => "absorption",
            Law::OneSided => "one-sided",
            Law::EditPreservation => "edit-preservation",
            Law::OracleAgreement => "oracle-agreement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LawViolation {
    pub law: Law,
    pub detail: String,
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.law, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Verdict {
    pub seed: u64,
    pub violations: Vec<LawViolation>,
    /// Conflicts reported under manual resolution.
    pub conflicts: usize,
    pub removed_cycle_edges: usize,
    /// Whether the footprints were disjoint, so edit preservation applied.
    pub disjoint: bool,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// An independent specification of which conflicts a merge must report.
pub trait ConflictOracle {
    fn conflicts(&self, ancestor: &LevelGraph, a: &LevelGraph, b: &LevelGraph) -> BTreeSet<ConflictSignature>;
}

struct Checker {
    violations: Vec<LawViolation>,
}

impl Checker {
    fn fail(&mut self, law: Law, detail: impl Into<String>) {
        self.violations.push(LawViolation {
            law,
            detail: detail.into(),
        });
    }

    fn merge(
        &mut self,
        law: Law,
        anc: &LevelGraph,
        a: &LevelGraph,
        b: &LevelGraph,
        policy: &MergePolicy,
    ) -> Option<MergeOutcome> {
        match merge3(anc, a, b, policy) {
            Ok(out) => Some(out),
            Err(e) => {
                self.fail(law, format!("merge failed under {}: {e}", policy.resolution));
                None
            }
        }
    }
}

fn fingerprint(out: &MergeOutcome) -> String {
    format!(
        "{}{:?}{:?}{:?}{:?}{:?}{:?}",
        serialize_graph(&out.merged),
        out.conflicts,
        out.dropped,
        out.removed_cycle_edges,
        out.relinked,
        out.reconnected,
        out.scrubbed
    )
}

fn swapped_conflicts(conflicts: &[Conflict]) -> Vec<String> {
    let mut v: Vec<String> = conflicts
        .iter()
        .map(|c| {
            let resolution = match c.resolution {
                ConflictResolution::TookA => ConflictResolution::TookB,
                ConflictResolution::TookB => ConflictResolution::TookA,
                ConflictResolution::Unresolved => ConflictResolution::Unresolved,
            };
            format!("{:?}", Conflict { kind: c.kind.swapped(), resolution })
        })
        .collect();
    v.sort();
    v
}

fn sorted_debug(conflicts: &[Conflict]) -> Vec<String> {
    let mut v: Vec<String> = conflicts.iter().map(|c| format!("{c:?}")).collect();
    v.sort();
    v
}

/// Nodes whose final state a branch is responsible for.
fn footprint(anc: &LevelGraph, diff: &DiffResult) -> BTreeSet<NodeId> {
    let mut fp = diff.intrinsic_edits();
    for delta in diff.deltas.values() {
        for value in delta.property_sets.values() {
            if let PropertyValue::Node(target) = value {
                fp.insert(target.clone());
            }
        }
        fp.extend(delta.dependency_kind_changes.keys().cloned());
        if let Some(reparent) = &delta.reparent {
            fp.extend(reparent.from.iter().cloned());
            fp.extend(reparent.to.iter().cloned());
        }
    }
    for e in diff.added_edges.iter().chain(&diff.removed_edges) {
        fp.insert(e.parent.clone());
        fp.insert(e.child.clone());
    }
    for id in diff.nodes_in(ChangeClass::Deleted) {
        if let Ok(sub) = direct_subtree(anc, id) {
            fp.extend(sub);
        }
    }
    fp
}

fn same_state(x: &LevelGraph, y: &LevelGraph, id: &NodeId) -> bool {
    match (x.node(id), y.node(id)) {
        (None, None) => true,
        (Some(n), Some(m)) => n == m && x.parents(id) == y.parents(id),
        _ => false,
    }
}

/// Checks every merge law on `scenario`. The oracle, when given, is
/// compared against the manual-resolution conflict set.
pub fn check_scenario(scenario: &Scenario, oracle: Option<&dyn ConflictOracle>) -> Verdict {
    let mut verdict = Verdict {
        seed: scenario.seed,
        ..Verdict::default()
    };
    let mut c = Checker { violations: Vec::new() };
    let (a, b) = match scenario.versions() {
        Ok(v) => v,
        Err(e) => {
            c.fail(Law::Validity, format!("scenario does not apply: {e}"));
            verdict.violations = c.violations;
            return verdict;
        }
    };
    let anc = &scenario.base;

    let mut manual = None;
    for resolution in [Resolution::Manual, Resolution::PreferA, Resolution::PreferB] {
        let policy = MergePolicy {
            resolution,
            ..scenario.policy.clone()
        };
        let Some(out) = c.merge(Law::Validity, anc, &a, &b, &policy) else { continue };
        let report = validate(&out.merged);
        if !report.is_valid() {
            c.fail(Law::Validity, format!("invalid merge under {resolution}:\n{report}"));
        }
        if resolution != Resolution::Manual && out.has_unresolved() {
            c.fail(Law::Resolution, format!("unresolved conflicts under {resolution}"));
        }
        if let Some(again) = c.merge(Law::Determinism, anc, &a, &b, &policy) {
            if fingerprint(&out) != fingerprint(&again) {
                c.fail(Law::Determinism, format!("two runs differ under {resolution}"));
            }
        }
        if let Some(mirror) = c.merge(Law::Symmetry, anc, &b, &a, &policy.swapped()) {
            if mirror.merged != out.merged {
                c.fail(Law::Symmetry, format!("merged levels differ under {resolution}"));
            }
            if swapped_conflicts(&mirror.conflicts) != sorted_debug(&out.conflicts) {
                c.fail(Law::Symmetry, format!("conflicts differ under {resolution}"));
            }
        }
        for (x, label) in [(&a, "a"), (&b, "b")] {
            if let Some(same) = c.merge(Law::Absorption, anc, x, x, &policy) {
                if same.merged != *x || !same.conflicts.is_empty() {
                    c.fail(Law::Absorption, format!("merge of {label} with itself under {resolution}"));
                }
            }
        }
        for (one, two, want, label) in [(&a, anc, &a, "a"), (anc, &b, &b, "b")] {
            if let Some(out) = c.merge(Law::OneSided, anc, one, two, &policy) {
                if out.merged != *want || !out.conflicts.is_empty() {
                    c.fail(Law::OneSided, format!("only {label} edits, under {resolution}"));
                }
            }
        }
        if resolution == Resolution::Manual {
            manual = Some(out);
        }
    }

    if let Some(out) = &manual {
        verdict.conflicts = out.conflicts.len();
        verdict.removed_cycle_edges = out.removed_cycle_edges.len();
        if let (Ok(da), Ok(db)) = (classify(anc, &a), classify(anc, &b)) {
            let (fa, fb) = (footprint(anc, &da), footprint(anc, &db));
            verdict.disjoint = fa.is_disjoint(&fb);
            if verdict.disjoint && out.removed_cycle_edges.is_empty() {
                if !out.conflicts.is_empty() {
                    c.fail(
                        Law::EditPreservation,
                        format!("disjoint edits conflicted: {}", out.conflicts[0].signature()),
                    );
                }
                for (fp, x, label) in [(&fa, &a, "a"), (&fb, &b, "b")] {
                    for id in fp {
                        if !same_state(&out.merged, x, id) {
                            c.fail(Law::EditPreservation, format!("{label}'s edit of {id} was not kept"));
                        }
                    }
                }
            }
        }
        if let Some(oracle) = oracle {
            let expected = oracle.conflicts(anc, &a, &b);
            let actual: BTreeSet<ConflictSignature> = out.conflicts.iter().map(Conflict::signature).collect();
            if expected != actual {
                let show = |s: &BTreeSet<ConflictSignature>| {
                    s.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                };
                c.fail(
                    Law::OracleAgreement,
                    format!("oracle [{}], engine [{}]", show(&expected), show(&actual)),
                );
            }
        }
    }
    verdict.violations = c.violations;
    verdict
}
