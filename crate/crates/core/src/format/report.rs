//! The `.lvlreport` format: a line-oriented record of one merge.
//!
//! ```text
//! levelmerge-report 1
//! policy prefer-b
//! user name alice color "#d04040"
//! stat merged-nodes 12
//! conflict delete-modify resolution took-b deleting a deleted planet group planet touched planet
//! dropped a deletion node planet group planet
//! removed-cycle-edge b a indirect
//! relinked scene moon direct
//! reconnected scene probe indirect
//! scrubbed lamp target node:planet
//! ```
//!
//! Records after the keyword are `name value` pairs. A list repeats its name;
//! an absent value omits the pair. Property values are written `type:value`,
//! asset entries `tag:digest`, incoming edges `parent:dependency`.

use std::fmt::Write as _;
use std::time::Duration;

use crate::graph::{AssetEntry, AssetId, Dependency, Digest, Edge, NodeId, PropertyValue};
use crate::merge::{
    Branch, Conflict, ConflictKind, ConflictResolution, DroppedChange, DroppedEdit, MergeOutcome, MergeStats,
    Resolution, ScrubbedReference,
};

use super::{parse_value, quote, render_value, tokenize, ParseError, Token};

const HEADER: &str = "levelmerge-report";
const VERSION: u32 = 1;

/// Who produced a merge, for attribution in shared sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportEntry {
    pub name: String,
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeReport {
    pub policy: Resolution,
    pub user: Option<ReportEntry>,
    pub stats: MergeStats,
    pub conflicts: Vec<Conflict>,
    pub dropped: Vec<DroppedEdit>,
    pub removed_cycle_edges: Vec<Edge>,
    pub relinked: Vec<Edge>,
    pub reconnected: Vec<Edge>,
    pub scrubbed: Vec<ScrubbedReference>,
}

const STATS: [&str; 7] = [
    "ancestor-nodes",
    "ancestor-edges",
    "diff-a-edited",
    "diff-b-edited",
    "merged-nodes",
    "merged-edges",
    "wall-nanos",
];

fn stat_values(s: &MergeStats) -> [u128; 7] {
    [
        s.ancestor_nodes as u128,
        s.ancestor_edges as u128,
        s.diff_a_edited as u128,
        s.diff_b_edited as u128,
        s.merged_nodes as u128,
        s.merged_edges as u128,
        s.wall_time.as_nanos(),
    ]
}

fn value_token(v: &PropertyValue) -> String {
    let rendered = match v {
        PropertyValue::Text(t) => t.clone(),
        PropertyValue::Node(n) => n.to_string(),
        PropertyValue::Asset(a) => a.to_string(),
        other => render_value(other),
    };
    quote(&format!("{}:{rendered}", v.type_tag()))
}

fn entry_token(e: &AssetEntry) -> String {
    quote(&format!("{}:{}", e.type_tag, e.digest))
}

struct Line(String);

impl Line {
    fn new(keyword: &str) -> Self {
        Line(keyword.to_owned())
    }

    fn word(mut self, w: &str) -> Self {
        self.0.push(' ');
        self.0.push_str(w);
        self
    }

    fn field(self, name: &str, value: &str) -> Self {
        self.word(name).word(&quote(value))
    }

    fn raw(self, name: &str, token: String) -> Self {
        self.word(name).word(&token)
    }

    fn opt_value(self, name: &str, v: &Option<PropertyValue>) -> Self {
        match v {
            Some(v) => self.raw(name, value_token(v)),
            None => self,
        }
    }

    fn opt_entry(self, name: &str, e: &Option<AssetEntry>) -> Self {
        match e {
            Some(e) => self.raw(name, entry_token(e)),
            None => self,
        }
    }

    fn opt_node(self, name: &str, n: &Option<NodeId>) -> Self {
        match n {
            Some(n) => self.field(name, n.as_str()),
            None => self,
        }
    }

    fn nodes(self, name: &str, ids: &[NodeId]) -> Self {
        ids.iter().fold(self, |l, id| l.field(name, id.as_str()))
    }
}

fn edge_line(keyword: &str, e: &Edge) -> String {
    Line::new(keyword)
        .word(&quote(e.parent.as_str()))
        .word(&quote(e.child.as_str()))
        .word(e.dependency.as_str())
        .0
}

impl MergeReport {
    pub fn from_outcome(outcome: &MergeOutcome, policy: Resolution) -> Self {
        MergeReport {
            policy,
            user: None,
            stats: outcome.stats,
            conflicts: outcome.conflicts.clone(),
            dropped: outcome.dropped.clone(),
            removed_cycle_edges: outcome.removed_cycle_edges.clone(),
            relinked: outcome.relinked.clone(),
            reconnected: outcome.reconnected.clone(),
            scrubbed: outcome.scrubbed.clone(),
        }
    }

    pub fn with_user(mut self, name: impl Into<String>, color: Option<String>) -> Self {
        self.user = Some(ReportEntry {
            name: name.into(),
            color,
        });
        self
    }

    pub fn has_unresolved(&self) -> bool {
        self.conflicts
            .iter()
            .any(|c| c.resolution == ConflictResolution::Unresolved)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER} {VERSION}");
        let _ = writeln!(out, "policy {}", self.policy);
        if let Some(user) = &self.user {
            let mut line = Line::new("user").field("name", &user.name);
            if let Some(color) = &user.color {
                line = line.field("color", color);
            }
            let _ = writeln!(out, "{}", line.0);
        }
        for (name, value) in STATS.iter().zip(stat_values(&self.stats)) {
            let _ = writeln!(out, "stat {name} {value}");
        }
        for c in &self.conflicts {
            let line = Line::new("conflict")
                .word(c.kind.tag())
                .word("resolution")
                .word(c.resolution.as_str());
            let line = match &c.kind {
                ConflictKind::Property { node, key, ancestor, a, b } => line
                    .field("node", node.as_str())
                    .field("key", key)
                    .opt_value("ancestor", ancestor)
                    .opt_value("a", a)
                    .opt_value("b", b),
                ConflictKind::DeleteModify { deleting, deleted, group, touched } => line
                    .word("deleting")
                    .word(deleting.as_str())
                    .field("deleted", deleted.as_str())
                    .nodes("group", group)
                    .nodes("touched", touched),
                ConflictKind::Reparent { node, parent_a, parent_b } => line
                    .field("node", node.as_str())
                    .opt_node("parent-a", parent_a)
                    .opt_node("parent-b", parent_b),
                ConflictKind::AddAdd { node, key, a, b } => line
                    .field("node", node.as_str())
                    .field("key", key)
                    .opt_value("a", a)
                    .opt_value("b", b),
                ConflictKind::Asset { asset, ancestor, a, b } => line
                    .field("asset", asset.as_str())
                    .opt_entry("ancestor", ancestor)
                    .opt_entry("a", a)
                    .opt_entry("b", b),
            };
            let _ = writeln!(out, "{}", line.0);
        }
        for d in &self.dropped {
            let line = Line::new("dropped").word(d.branch.as_str());
            let line = match &d.change {
                DroppedChange::Property { node, key, value } => line
                    .word("property")
                    .field("node", node.as_str())
                    .field("key", key)
                    .opt_value("value", value),
                DroppedChange::Structure { node, parents } => parents.iter().fold(
                    line.word("structure").field("node", node.as_str()),
                    |l, (p, dep)| l.field("parent", &format!("{p}:{dep}")),
                ),
                DroppedChange::Deletion { node, group } => {
                    line.word("deletion").field("node", node.as_str()).nodes("group", group)
                }
                DroppedChange::Modification { deleted, nodes } => line
                    .word("modification")
                    .field("deleted", deleted.as_str())
                    .nodes("node", nodes),
                DroppedChange::Edge(e) => line
                    .word("edge")
                    .field("parent", e.parent.as_str())
                    .field("child", e.child.as_str())
                    .word("dependency")
                    .word(e.dependency.as_str()),
                DroppedChange::Asset { asset, entry, rejected } => {
                    let line = line.word("asset").field("asset", asset.as_str()).opt_entry("entry", entry);
                    match rejected {
                        Some(message) => line.field("rejected", message),
                        None => line,
                    }
                }
            };
            let _ = writeln!(out, "{}", line.0);
        }
        for e in &self.removed_cycle_edges {
            let _ = writeln!(out, "{}", edge_line("removed-cycle-edge", e));
        }
        for e in &self.relinked {
            let _ = writeln!(out, "{}", edge_line("relinked", e));
        }
        for e in &self.reconnected {
            let _ = writeln!(out, "{}", edge_line("reconnected", e));
        }
        for s in &self.scrubbed {
            let line = Line::new("scrubbed")
                .word(&quote(s.node.as_str()))
                .word(&quote(&s.key))
                .word(&value_token(&s.value));
            let _ = writeln!(out, "{}", line.0);
        }
        out
    }

    pub fn parse(text: &str) -> Result<MergeReport, ParseError> {
        let mut report = MergeReport {
            policy: Resolution::Manual,
            user: None,
            stats: MergeStats::default(),
            conflicts: Vec::new(),
            dropped: Vec::new(),
            removed_cycle_edges: Vec::new(),
            relinked: Vec::new(),
            reconnected: Vec::new(),
            scrubbed: Vec::new(),
        };
        let mut seen_header = false;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let tokens = tokenize(raw).map_err(|(column, message)| ParseError::new(line, column, message))?;
            let end_column = raw.chars().count() + 1;
            let mut r = Reader { line, tokens: &tokens, pos: 1, end_column };
            let keyword = tokens[0].text.as_str();
            if !seen_header {
                if keyword != HEADER {
                    return Err(ParseError::at(line, &tokens[0], format!("expected `{HEADER} {VERSION}` header")));
                }
                let v = r.next("version")?;
                if v.text != VERSION.to_string() {
                    return Err(ParseError::at(line, v, "unsupported report version"));
                }
                r.finish()?;
                seen_header = true;
                continue;
            }
            match keyword {
                "policy" => {
                    let t = r.next("policy")?;
                    report.policy = Resolution::parse(&t.text)
                        .ok_or_else(|| ParseError::at(line, t, format!("unknown policy `{}`", t.text)))?;
                    r.finish()?;
                }
                "user" => {
                    let f = r.fields()?;
                    report.user = Some(ReportEntry {
                        name: f.required("name")?.text.clone(),
                        color: f.optional("color").map(|t| t.text.clone()),
                    });
                }
                "stat" => {
                    let name = r.next("stat name")?;
                    let value = r.next("stat value")?;
                    r.finish()?;
                    let v: u128 = value
                        .text
                        .parse()
                        .map_err(|_| ParseError::at(line, value, "invalid number"))?;
                    let as_usize = || usize::try_from(v).map_err(|_| ParseError::at(line, value, "number too large"));
                    let s = &mut report.stats;
                    match name.text.as_str() {
                        "ancestor-nodes" => s.ancestor_nodes = as_usize()?,
                        "ancestor-edges" => s.ancestor_edges = as_usize()?,
                        "diff-a-edited" => s.diff_a_edited = as_usize()?,
                        "diff-b-edited" => s.diff_b_edited = as_usize()?,
                        "merged-nodes" => s.merged_nodes = as_usize()?,
                        "merged-edges" => s.merged_edges = as_usize()?,
                        "wall-nanos" => {
                            let nanos = u64::try_from(v).map_err(|_| ParseError::at(line, value, "number too large"))?;
                            s.wall_time = Duration::from_nanos(nanos);
                        }
                        other => return Err(ParseError::at(line, name, format!("unknown stat `{other}`"))),
                    }
                }
                "conflict" => report.conflicts.push(parse_conflict(&mut r)?),
                "dropped" => report.dropped.push(parse_dropped(&mut r)?),
                "removed-cycle-edge" => report.removed_cycle_edges.push(parse_edge(&mut r)?),
                "relinked" => report.relinked.push(parse_edge(&mut r)?),
                "reconnected" => report.reconnected.push(parse_edge(&mut r)?),
                "scrubbed" => {
                    let node = r.node()?;
                    let key = r.next("key")?.text.clone();
                    let value = r.value()?;
                    r.finish()?;
                    report.scrubbed.push(ScrubbedReference { node, key, value });
                }
                other => return Err(ParseError::at(line, &tokens[0], format!("unknown record `{other}`"))),
            }
        }
        if !seen_header {
            return Err(ParseError::new(1, 1, format!("missing `{HEADER}` header")));
        }
        Ok(report)
    }
}

struct Reader<'t> {
    line: usize,
    tokens: &'t [Token],
    pos: usize,
    end_column: usize,
}

struct Fields<'t> {
    line: usize,
    end_column: usize,
    pairs: Vec<(&'t Token, &'t Token)>,
}

impl<'t> Reader<'t> {
    fn next(&mut self, what: &str) -> Result<&'t Token, ParseError> {
        let token = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| ParseError::new(self.line, self.end_column, format!("expected {what}")))?;
        self.pos += 1;
        Ok(token)
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(ParseError::at(self.line, t, "unexpected trailing token")),
        }
    }

    fn node(&mut self) -> Result<NodeId, ParseError> {
        let line = self.line;
        let t = self.next("node id")?;
        NodeId::new(t.text.clone()).map_err(|_| ParseError::at(line, t, "empty node id"))
    }

    fn value(&mut self) -> Result<PropertyValue, ParseError> {
        let line = self.line;
        let t = self.next("value")?;
        value_from(line, t)
    }

    fn branch(&mut self) -> Result<Branch, ParseError> {
        let line = self.line;
        let t = self.next("branch")?;
        match t.text.as_str() {
            "a" => Ok(Branch::A),
            "b" => Ok(Branch::B),
            _ => Err(ParseError::at(line, t, "branch must be `a` or `b`")),
        }
    }

    fn fields(&mut self) -> Result<Fields<'t>, ParseError> {
        let mut pairs = Vec::new();
        while self.pos < self.tokens.len() {
            let name = self.next("field name")?;
            let value = self.next("field value")?;
            pairs.push((name, value));
        }
        Ok(Fields {
            line: self.line,
            end_column: self.end_column,
            pairs,
        })
    }
}

impl<'t> Fields<'t> {
    fn all(&self, name: &str) -> impl Iterator<Item = &'t Token> + '_ {
        let name = name.to_owned();
        self.pairs.iter().filter(move |(n, _)| n.text == name).map(|(_, v)| *v)
    }

    fn optional(&self, name: &str) -> Option<&'t Token> {
        self.all(name).next()
    }

    fn required(&self, name: &str) -> Result<&'t Token, ParseError> {
        self.optional(name)
            .ok_or_else(|| ParseError::new(self.line, self.end_column, format!("missing field `{name}`")))
    }

    fn node(&self, name: &str) -> Result<NodeId, ParseError> {
        let t = self.required(name)?;
        NodeId::new(t.text.clone()).map_err(|_| ParseError::at(self.line, t, "empty node id"))
    }

    fn opt_node(&self, name: &str) -> Result<Option<NodeId>, ParseError> {
        self.optional(name)
            .map(|t| NodeId::new(t.text.clone()).map_err(|_| ParseError::at(self.line, t, "empty node id")))
            .transpose()
    }

    fn nodes(&self, name: &str) -> Result<Vec<NodeId>, ParseError> {
        self.all(name)
            .map(|t| NodeId::new(t.text.clone()).map_err(|_| ParseError::at(self.line, t, "empty node id")))
            .collect()
    }

    fn value(&self, name: &str) -> Result<Option<PropertyValue>, ParseError> {
        self.optional(name).map(|t| value_from(self.line, t)).transpose()
    }

    fn entry(&self, name: &str) -> Result<Option<AssetEntry>, ParseError> {
        self.optional(name)
            .map(|t| {
                let (tag, digest) = t
                    .text
                    .rsplit_once(':')
                    .ok_or_else(|| ParseError::at(self.line, t, "expected `tag:digest`"))?;
                let digest = Digest::parse(digest).ok_or_else(|| ParseError::at(self.line, t, "invalid digest"))?;
                Ok(AssetEntry {
                    type_tag: tag.to_owned(),
                    digest,
                })
            })
            .transpose()
    }

    fn branch(&self, name: &str) -> Result<Branch, ParseError> {
        let t = self.required(name)?;
        match t.text.as_str() {
            "a" => Ok(Branch::A),
            "b" => Ok(Branch::B),
            _ => Err(ParseError::at(self.line, t, "branch must be `a` or `b`")),
        }
    }

    fn dependency(&self, token: &Token) -> Result<Dependency, ParseError> {
        Dependency::parse(&token.text).ok_or_else(|| ParseError::at(self.line, token, "unknown dependency"))
    }
}

fn value_from(line: usize, t: &Token) -> Result<PropertyValue, ParseError> {
    let (tag, rest) = t
        .text
        .split_once(':')
        .ok_or_else(|| ParseError::at(line, t, "expected `type:value`"))?;
    parse_value(tag, rest).map_err(|message| ParseError::at(line, t, message))
}

fn parse_edge(r: &mut Reader<'_>) -> Result<Edge, ParseError> {
    let parent = r.node()?;
    let child = r.node()?;
    let line = r.line;
    let t = r.next("dependency")?;
    let dependency = Dependency::parse(&t.text).ok_or_else(|| ParseError::at(line, t, "unknown dependency"))?;
    r.finish()?;
    Ok(Edge { parent, child, dependency })
}

fn parse_conflict(r: &mut Reader<'_>) -> Result<Conflict, ParseError> {
    let line = r.line;
    let tag = r.next("conflict kind")?;
    let f = r.fields()?;
    let res = f.required("resolution")?;
    let resolution =
        ConflictResolution::parse(&res.text).ok_or_else(|| ParseError::at(line, res, "unknown resolution"))?;
    let kind = match tag.text.as_str() {
        "property" => ConflictKind::Property {
            node: f.node("node")?,
            key: f.required("key")?.text.clone(),
            ancestor: f.value("ancestor")?,
            a: f.value("a")?,
            b: f.value("b")?,
        },
        "delete-modify" => ConflictKind::DeleteModify {
            deleting: f.branch("deleting")?,
            deleted: f.node("deleted")?,
            group: f.nodes("group")?,
            touched: f.nodes("touched")?,
        },
        "reparent" => ConflictKind::Reparent {
            node: f.node("node")?,
            parent_a: f.opt_node("parent-a")?,
            parent_b: f.opt_node("parent-b")?,
        },
        "add-add" => ConflictKind::AddAdd {
            node: f.node("node")?,
            key: f.required("key")?.text.clone(),
            a: f.value("a")?,
            b: f.value("b")?,
        },
        "asset" => {
            let t = f.required("asset")?;
            ConflictKind::Asset {
                asset: AssetId::new(t.text.clone()).map_err(|_| ParseError::at(line, t, "empty asset id"))?,
                ancestor: f.entry("ancestor")?,
                a: f.entry("a")?,
                b: f.entry("b")?,
            }
        }
        other => return Err(ParseError::at(line, tag, format!("unknown conflict kind `{other}`"))),
    };
    Ok(Conflict { kind, resolution })
}

fn parse_dropped(r: &mut Reader<'_>) -> Result<DroppedEdit, ParseError> {
    let line = r.line;
    let branch = r.branch()?;
    let kind = r.next("dropped kind")?;
    let f = r.fields()?;
    let change = match kind.text.as_str() {
        "property" => DroppedChange::Property {
            node: f.node("node")?,
            key: f.required("key")?.text.clone(),
            value: f.value("value")?,
        },
        "structure" => {
            let parents = f
                .all("parent")
                .map(|t| {
                    let (p, dep) = t
                        .text
                        .rsplit_once(':')
                        .ok_or_else(|| ParseError::at(line, t, "expected `parent:dependency`"))?;
                    let p = NodeId::new(p).map_err(|_| ParseError::at(line, t, "empty node id"))?;
                    let dep = Dependency::parse(dep).ok_or_else(|| ParseError::at(line, t, "unknown dependency"))?;
                    Ok((p, dep))
                })
                .collect::<Result<_, ParseError>>()?;
            DroppedChange::Structure {
                node: f.node("node")?,
                parents,
            }
        }
        "deletion" => DroppedChange::Deletion {
            node: f.node("node")?,
            group: f.nodes("group")?,
        },
        "modification" => DroppedChange::Modification {
            deleted: f.node("deleted")?,
            nodes: f.nodes("node")?,
        },
        "edge" => DroppedChange::Edge(Edge {
            parent: f.node("parent")?,
            child: f.node("child")?,
            dependency: f.dependency(f.required("dependency")?)?,
        }),
        "asset" => {
            let t = f.required("asset")?;
            DroppedChange::Asset {
                asset: AssetId::new(t.text.clone()).map_err(|_| ParseError::at(line, t, "empty asset id"))?,
                entry: f.entry("entry")?,
                rejected: f.optional("rejected").map(|t| t.text.clone()),
            }
        }
        other => return Err(ParseError::at(line, kind, format!("unknown dropped kind `{other}`"))),
    };
    Ok(DroppedEdit { branch, change })
}
