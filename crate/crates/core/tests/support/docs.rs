//! Random level documents for the format round-trip properties.

#![allow(dead_code)]

use proptest::prelude::*;

use levelmerge::format::{canonicalize, parse, serialize, LevelDocument};
use levelmerge::graph::{AssetEntry, AssetId, Digest};
use levelmerge::{Dependency, LevelGraph, Node, NodeId, PropertyValue};

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z][a-z0-9_]{0,6}",
        "[A-Za-z0-9_.:/@+-]{1,8}",
        // Needs quoting: spaces, quotes, backslashes, controls, non-ASCII.
        any::<String>().prop_filter("non-empty", |s| !s.is_empty()),
    ]
}

fn value(nodes: usize, assets: usize) -> impl Strategy<Value = (usize, u8, bool, i64, f64, String, usize)> {
    (
        0usize..6,
        any::<u8>(),
        any::<bool>(),
        any::<i64>(),
        prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(0.1), Just(-0.0), Just(1e300)],
        any::<String>(),
        0..nodes.max(1) * assets.max(1),
    )
}

/// A document with unique arbitrary ids, a spanning tree of direct edges,
/// extra indirect edges and a manifest the asset properties point into.
pub fn document() -> impl Strategy<Value = LevelGraph> {
    (1usize..10, 0usize..4)
        .prop_flat_map(|(n, m)| {
            (
                prop::collection::btree_set(token(), n..=n),
                prop::collection::btree_set(token(), m..=m),
                prop::collection::vec(token(), n),
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..n * 2),
                prop::collection::vec((any::<prop::sample::Index>(), token(), value(n, m)), 0..n * 3),
                prop::collection::vec(any::<[u8; 8]>(), m),
                prop::collection::vec(token(), m),
            )
        })
        .prop_map(|(ids, assets, kinds, parents, extra, props, blobs, tags)| {
            let ids: Vec<NodeId> = ids.into_iter().map(NodeId::from).collect();
            let assets: Vec<AssetId> = assets.into_iter().map(|a| AssetId::new(a).unwrap()).collect();
            let mut g = LevelGraph::new(Node::new(ids[0].clone(), kinds[0].clone()));
            for (i, id) in ids.iter().enumerate().skip(1) {
                g.add_node(Node::new(id.clone(), kinds[i].clone())).unwrap();
                let p = parents[i].index(i);
                g.add_edge(&ids[p], id, Dependency::Direct).unwrap();
            }
            for (x, y) in extra {
                if ids.len() < 2 {
                    break;
                }
                let (i, j) = (x.index(ids.len()), y.index(ids.len()));
                let (i, j) = (i.min(j), i.max(j));
                if i != j && j != 0 && g.edge(&ids[i], &ids[j]).is_none() {
                    g.add_edge(&ids[i], &ids[j], Dependency::Indirect).unwrap();
                }
            }
            for (k, asset) in assets.iter().enumerate() {
                let entry = AssetEntry { type_tag: tags[k].clone(), digest: Digest::of(&blobs[k]) };
                g.insert_asset(asset.clone(), entry);
            }
            for (at, key, (kind, byte, flag, int, real, text, pick)) in props {
                let node = ids[at.index(ids.len())].clone();
                let v = match kind {
                    0 => PropertyValue::Bool(flag),
                    1 => PropertyValue::Int(int),
                    2 => PropertyValue::Real(real),
                    3 => PropertyValue::Text(format!("{text}{}", byte as char)),
                    4 => PropertyValue::Node(ids[pick % ids.len()].clone()),
                    _ if !assets.is_empty() => PropertyValue::Asset(assets[pick % assets.len()].clone()),
                    _ => PropertyValue::Int(byte as i64),
                };
                g.set_property(&node, key, v).unwrap();
            }
            g
        })
}

/// parse(serialize(g)) = g, serialize is a fixed point of canonicalize,
/// and statement order does not matter.
pub fn round_trip(g: &LevelGraph) -> Result<(), String> {
    let text = serialize(&LevelDocument::new(g.clone()));
    let back = parse(&text).map_err(|e| format!("{e}\n{text}"))?;
    if back.graph != *g {
        return Err(format!("graph changed after a round trip:\n{text}"));
    }
    let canon = canonicalize(&text).map_err(|e| e.to_string())?;
    if canon != text || canonicalize(&canon).map_err(|e| e.to_string())? != canon {
        return Err(format!("canonicalize is not idempotent:\n{text}"));
    }
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    let reversed = lines.join("\n");
    if canonicalize(&reversed).map_err(|e| e.to_string())? != text {
        return Err(format!("statement order changed the document:\n{reversed}"));
    }
    Ok(())
}
