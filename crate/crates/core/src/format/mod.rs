//! The `.lvl` text format.
//!
//! ```text
//! level-format 1
//! root scene
//! node lamp Light
//! prop lamp intensity real 2.5
//! prop lamp label text "desk lamp"
//! node scene Scene
//! edge scene lamp direct
//! asset textures/wood.png texture 9f86d081884c7d659a2feaa0c55ad015a3bf4f1b2b0b822cd15d6c15b0f00a08
//! ```
//!
//! One statement per line. Tokens are bare (`[A-Za-z0-9_.:/@+-]+`) or
//! double-quoted with backslash escapes. Blank lines and lines starting with
//! `#` are ignored. Property types are `bool`, `int`, `real`, `text`,
//! `node` and `asset`.
//!
//! [`serialize`] emits the canonical form: header, root, nodes by id (each
//! followed by its properties by key), edges by `(parent, child)`, assets by
//! id. Statements may appear in any order on input.

mod lexer;
pub mod report;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::graph::{AssetEntry, AssetId, Dependency, Digest, LevelGraph, Node, NodeId, PropertyValue};

pub(crate) use lexer::{quote, tokenize, Token};

pub use report::{MergeReport, ReportEntry};

pub const FORMAT_VERSION: u32 = 1;
const HEADER: &str = "level-format";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn at(line: usize, token: &Token, message: impl Into<String>) -> Self {
        ParseError::new(line, token.column, message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelDocument {
    pub format_version: u32,
    pub graph: LevelGraph,
}

impl LevelDocument {
    pub fn new(graph: LevelGraph) -> Self {
        LevelDocument {
            format_version: FORMAT_VERSION,
            graph,
        }
    }
}

impl From<LevelGraph> for LevelDocument {
    fn from(graph: LevelGraph) -> Self {
        LevelDocument::new(graph)
    }
}

/// Renders a real in the shortest form that parses back to the same bits.
pub(crate) fn format_real(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn render_value(value: &PropertyValue) -> String {
    match value {
        PropertyValue::Bool(v) => v.to_string(),
        PropertyValue::Int(v) => v.to_string(),
        PropertyValue::Real(v) => format_real(*v),
        PropertyValue::Text(v) => quote(v),
        PropertyValue::Node(v) => quote(v.as_str()),
        PropertyValue::Asset(v) => quote(v.as_str()),
    }
}

/// Parses a value of the given type tag. The error is a message only; the
/// caller adds the position.
pub(crate) fn parse_value(type_tag: &str, text: &str) -> Result<PropertyValue, String> {
    let bad = || format!("invalid {type_tag} value `{text}`");
    Ok(match type_tag {
        "bool" => match text {
            "true" => PropertyValue::Bool(true),
            "false" => PropertyValue::Bool(false),
            _ => return Err(bad()),
        },
        "int" => PropertyValue::Int(text.parse().map_err(|_| bad())?),
        "real" => {
            let v: f64 = text.parse().map_err(|_| bad())?;
            if !v.is_finite() || text.contains(['i', 'I', 'n', 'N']) {
                return Err(format!("real value `{text}` is not finite"));
            }
            PropertyValue::Real(v)
        }
        "text" => PropertyValue::Text(text.to_owned()),
        "node" => PropertyValue::Node(NodeId::new(text).map_err(|_| bad())?),
        "asset" => PropertyValue::Asset(AssetId::new(text).map_err(|_| bad())?),
        other => return Err(format!("unknown property type `{other}`")),
    })
}

pub fn serialize(doc: &LevelDocument) -> String {
    let g = &doc.graph;
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER} {}", doc.format_version);
    let _ = writeln!(out, "root {}", quote(g.root().as_str()));
    for node in g.nodes() {
        let id = quote(node.id.as_str());
        let _ = writeln!(out, "node {id} {}", quote(&node.kind));
        for (key, value) in &node.properties {
            let _ = writeln!(out, "prop {id} {} {} {}", quote(key), value.type_tag(), render_value(value));
        }
    }
    for edge in g.edges() {
        let _ = writeln!(
            out,
            "edge {} {} {}",
            quote(edge.parent.as_str()),
            quote(edge.child.as_str()),
            edge.dependency
        );
    }
    for (id, entry) in g.assets() {
        let _ = writeln!(out, "asset {} {} {}", quote(id.as_str()), quote(&entry.type_tag), entry.digest);
    }
    out
}

pub fn serialize_graph(graph: &LevelGraph) -> String {
    serialize(&LevelDocument::new(graph.clone()))
}

/// Canonical form of a document text.
pub fn canonicalize(text: &str) -> Result<String, ParseError> {
    Ok(serialize(&parse(text)?))
}

pub fn parse_graph(text: &str) -> Result<LevelGraph, ParseError> {
    Ok(parse(text)?.graph)
}

struct Located<T> {
    line: usize,
    tokens: Vec<Token>,
    item: T,
}

/// Parses a document. Structural rules (unique ids, existing endpoints,
/// single-valued properties, one edge per pair, no self loops) are enforced
/// here; acyclicity, reachability and dangling references are left to
/// [`crate::graph::validate`].
pub fn parse(text: &str) -> Result<LevelDocument, ParseError> {
    let mut version = None;
    let mut root: Option<(usize, Token)> = None;
    let mut nodes: Vec<Located<()>> = Vec::new();
    let mut props: Vec<Located<()>> = Vec::new();
    let mut edges: Vec<Located<Dependency>> = Vec::new();
    let mut assets: Vec<Located<()>> = Vec::new();
    let mut last_line = 0;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        last_line = line;
        let trimmed = raw.trim_start_matches([' ', '\t']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = tokenize(raw).map_err(|(column, message)| ParseError::new(line, column, message))?;
        let keyword = tokens[0].text.as_str();
        if version.is_none() && keyword != HEADER {
            return Err(ParseError::at(line, &tokens[0], format!("expected `{HEADER} {FORMAT_VERSION}` header")));
        }
        let expect = |n: usize, shape: &str| -> Result<(), ParseError> {
            if tokens.len() == n {
                return Ok(());
            }
            let column = tokens.get(n).map_or(raw.chars().count() + 1, |t| t.column);
            Err(ParseError::new(line, column, format!("expected `{shape}`")))
        };
        match keyword {
            HEADER => {
                if version.is_some() {
                    return Err(ParseError::at(line, &tokens[0], "duplicate header"));
                }
                expect(2, "level-format <version>")?;
                let v: u32 = tokens[1]
                    .text
                    .parse()
                    .map_err(|_| ParseError::at(line, &tokens[1], "invalid format version"))?;
                if v != FORMAT_VERSION {
                    return Err(ParseError::at(line, &tokens[1], format!("unsupported format version {v}")));
                }
                version = Some(v);
            }
            "root" => {
                expect(2, "root <id>")?;
                if let Some((first, _)) = &root {
                    return Err(ParseError::at(line, &tokens[0], format!("duplicate root (first on line {first})")));
                }
                root = Some((line, tokens[1].clone()));
            }
            "node" => {
                expect(3, "node <id> <kind>")?;
                nodes.push(Located { line, tokens, item: () });
            }
            "prop" => {
                expect(5, "prop <node> <key> <type> <value>")?;
                props.push(Located { line, tokens, item: () });
            }
            "edge" => {
                expect(4, "edge <parent> <child> direct|indirect")?;
                let dep = Dependency::parse(&tokens[3].text).ok_or_else(|| {
                    ParseError::at(line, &tokens[3], format!("unknown dependency `{}`", tokens[3].text))
                })?;
                edges.push(Located { line, tokens, item: dep });
            }
            "asset" => {
                expect(4, "asset <id> <type> <digest>")?;
                assets.push(Located { line, tokens, item: () });
            }
            other => {
                return Err(ParseError::at(line, &tokens[0], format!("unknown statement `{other}`")));
            }
        }
    }

    let Some(format_version) = version else {
        return Err(ParseError::new(last_line.max(1), 1, "missing `level-format` header"));
    };
    let Some((root_line, root_token)) = root else {
        return Err(ParseError::new(last_line.max(1), 1, "missing `root` statement"));
    };

    let id = |line: usize, token: &Token| {
        NodeId::new(token.text.clone()).map_err(|_| ParseError::at(line, token, "empty node id"))
    };
    let mut declared: HashMap<NodeId, usize> = HashMap::new();
    let mut node_list = Vec::with_capacity(nodes.len());
    for n in &nodes {
        let node_id = id(n.line, &n.tokens[1])?;
        if let Some(first) = declared.insert(node_id.clone(), n.line) {
            return Err(ParseError::at(
                n.line,
                &n.tokens[1],
                format!("duplicate node id `{node_id}` (lines {first} and {})", n.line),
            ));
        }
        if n.tokens[2].text.is_empty() {
            return Err(ParseError::at(n.line, &n.tokens[2], "empty node kind"));
        }
        node_list.push(Node::new(node_id, n.tokens[2].text.clone()));
    }
    let root_id = id(root_line, &root_token)?;
    if !declared.contains_key(&root_id) {
        return Err(ParseError::at(root_line, &root_token, format!("root `{root_id}` is not a declared node")));
    }
    let known = |line: usize, token: &Token| -> Result<NodeId, ParseError> {
        let node_id = id(line, token)?;
        if declared.contains_key(&node_id) {
            Ok(node_id)
        } else {
            Err(ParseError::at(line, token, format!("unknown node `{node_id}`")))
        }
    };

    let mut by_id: BTreeMap<NodeId, Node> = node_list.into_iter().map(|n| (n.id.clone(), n)).collect();
    let mut prop_lines: HashMap<(NodeId, String), usize> = HashMap::new();
    for p in &props {
        let node_id = known(p.line, &p.tokens[1])?;
        let key = p.tokens[2].text.clone();
        if key.is_empty() {
            return Err(ParseError::at(p.line, &p.tokens[2], "empty property key"));
        }
        let value = parse_value(&p.tokens[3].text, &p.tokens[4].text).map_err(|message| {
            let token = if message.starts_with("unknown property type") { &p.tokens[3] } else { &p.tokens[4] };
            ParseError::at(p.line, token, message)
        })?;
        if let Some(first) = prop_lines.insert((node_id.clone(), key.clone()), p.line) {
            return Err(ParseError::at(
                p.line,
                &p.tokens[2],
                format!("duplicate property `{node_id}.{key}` (lines {first} and {})", p.line),
            ));
        }
        by_id.get_mut(&node_id).expect("declared").properties.insert(key, value);
    }

    let root_node = by_id.remove(&root_id).expect("declared");
    let mut graph = LevelGraph::new(root_node);
    for node in by_id.into_values() {
        graph.add_node(node).expect("ids are unique");
    }

    let mut edge_lines: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    for e in &edges {
        let parent = known(e.line, &e.tokens[1])?;
        let child = known(e.line, &e.tokens[2])?;
        if parent == child {
            return Err(ParseError::at(e.line, &e.tokens[2], format!("self loop on `{parent}`")));
        }
        if let Some(first) = edge_lines.insert((parent.clone(), child.clone()), e.line) {
            return Err(ParseError::at(
                e.line,
                &e.tokens[1],
                format!("duplicate edge `{parent}` -> `{child}` (lines {first} and {})", e.line),
            ));
        }
        graph.add_edge(&parent, &child, e.item).expect("checked above");
    }

    let mut asset_lines: HashMap<AssetId, usize> = HashMap::new();
    for a in &assets {
        let asset_id =
            AssetId::new(a.tokens[1].text.clone()).map_err(|_| ParseError::at(a.line, &a.tokens[1], "empty asset id"))?;
        if a.tokens[2].text.is_empty() {
            return Err(ParseError::at(a.line, &a.tokens[2], "empty asset type"));
        }
        let digest = Digest::parse(&a.tokens[3].text)
            .ok_or_else(|| ParseError::at(a.line, &a.tokens[3], "digest must be 64 lowercase hex characters"))?;
        if let Some(first) = asset_lines.insert(asset_id.clone(), a.line) {
            return Err(ParseError::at(
                a.line,
                &a.tokens[1],
                format!("duplicate asset `{asset_id}` (lines {first} and {})", a.line),
            ));
        }
        graph.insert_asset(
            asset_id,
            AssetEntry {
                type_tag: a.tokens[2].text.clone(),
                digest,
            },
        );
    }

    Ok(LevelDocument { format_version, graph })
}

impl fmt::Display for LevelDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}
