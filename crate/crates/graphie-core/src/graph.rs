//! Task graph construction.
//!
//! A [`TaskGraph`] is a typed directed multigraph over textual units.
//! Adjacency is stored as in-neighbor lists per edge type, which is
//! exactly the access pattern of the graph convolution: aggregate
//! everything pointing *into* a node, per type, then normalize by the
//! node's total incident-edge count.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::corpus::{Document, DocumentPayload, UnitKind};
use crate::error::{Error, Result};
use crate::rng::{Purpose, Stream};

/// Ordered edge type names per task; weight tensors index this order.
pub mod edge_types {
    pub const WORD: &[&str] = &["local-forward", "local-backward", "nonlocal-identical"];
    pub const EGO: &[&str] = &["follow-forward", "follow-backward"];
    pub const LAYOUT: &[&str] = &["left-to-right", "right-to-left", "up-to-down", "down-to-up"];
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskGraph {
    node_count: usize,
    node_kind: UnitKind,
    edge_type_names: Vec<String>,
    /// `in_neighbors[ty][v]` lists sources of type-`ty` edges into `v`,
    /// sorted; duplicates represent parallel edges.
    in_neighbors: Vec<Vec<Vec<usize>>>,
    /// Total incident in-edges per node, summed over types.
    degree: Vec<usize>,
}

impl TaskGraph {
    pub fn new(node_count: usize, node_kind: UnitKind, edge_type_names: &[&str]) -> Self {
        TaskGraph {
            node_count,
            node_kind,
            edge_type_names: edge_type_names.iter().map(|s| s.to_string()).collect(),
            in_neighbors: vec![vec![Vec::new(); node_count]; edge_type_names.len()],
            degree: vec![0; node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn node_kind(&self) -> UnitKind {
        self.node_kind
    }

    pub fn edge_type_names(&self) -> &[String] {
        &self.edge_type_names
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_type_names.len()
    }

    pub fn add_edge(&mut self, ty: usize, src: usize, dst: usize) -> Result<()> {
        if ty >= self.edge_type_names.len() {
            return Err(Error::Contract(format!("unknown edge type index {ty}")));
        }
        if src >= self.node_count || dst >= self.node_count {
            return Err(Error::Contract(format!(
                "edge {src}->{dst} out of bounds for {} nodes",
                self.node_count
            )));
        }
        self.in_neighbors[ty][dst].push(src);
        self.degree[dst] += 1;
        Ok(())
    }

    /// Sorts neighbor lists for deterministic iteration.
    fn normalize(&mut self) {
        for per_type in &mut self.in_neighbors {
            for list in per_type {
                list.sort_unstable();
            }
        }
    }

    pub fn in_neighbors(&self, ty: usize, node: usize) -> &[usize] {
        &self.in_neighbors[ty][node]
    }

    /// In-neighbor lists for one edge type, indexed by destination node.
    pub fn in_neighbor_rows(&self, ty: usize) -> Vec<Vec<usize>> {
        self.in_neighbors[ty].clone()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degree[node]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn edge_count_of_type(&self, ty: usize) -> usize {
        self.in_neighbors[ty].iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.edge_type_count())
            .map(|t| self.edge_count_of_type(t))
            .sum()
    }

    /// Edges as (type, src, dst), sorted by (type, src, dst).
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (ty, per_node) in self.in_neighbors.iter().enumerate() {
            for (dst, srcs) in per_node.iter().enumerate() {
                for &src in srcs {
                    out.push((ty, src, dst));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Same nodes and types with the adjacency of `ty` emptied;
    /// degrees are recomputed. Used by edge-type ablations.
    pub fn without_edge_type(&self, name: &str) -> Result<TaskGraph> {
        let ty = self
            .edge_type_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Contract(format!("unknown edge type '{name}'")))?;
        let mut g = self.clone();
        for list in &mut g.in_neighbors[ty] {
            list.clear();
        }
        g.degree = vec![0; g.node_count];
        for per_node in &g.in_neighbors {
            for (dst, srcs) in per_node.iter().enumerate() {
                g.degree[dst] += srcs.len();
            }
        }
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Word-level graph (textual task)
// ---------------------------------------------------------------------------

/// True when a surface participates in identical-mention linking:
/// not a stopword (matched lowercase) and contains at least one letter.
fn linkable(surface: &str, stopwords: &HashSet<String>) -> bool {
    surface.chars().any(char::is_alphabetic) && !stopwords.contains(&surface.to_lowercase())
}

/// Word nodes in reading order. Local forward/backward edges between
/// sentence neighbors; identical non-stopword surfaces form a clique
/// of nonlocal edges in both directions (case-sensitive matching).
pub fn build_word_graph(doc: &Document, stopwords: &HashSet<String>) -> Result<TaskGraph> {
    if doc.unit_kind != UnitKind::Word {
        return Err(Error::Contract(format!(
            "word graph over a {} document",
            doc.unit_kind
        )));
    }
    let node_count = doc.token_count();
    let mut g = TaskGraph::new(node_count, UnitKind::Word, edge_types::WORD);

    let mut offset = 0;
    let mut by_surface: std::collections::HashMap<&str, Vec<usize>> =
        std::collections::HashMap::new();
    for s in &doc.sentences {
        for t in 0..s.len() {
            if t + 1 < s.len() {
                g.add_edge(0, offset + t, offset + t + 1)?; // local-forward
                g.add_edge(1, offset + t + 1, offset + t)?; // local-backward
            }
            let surface = s.tokens[t].surface.as_str();
            if linkable(surface, stopwords) {
                by_surface.entry(surface).or_default().push(offset + t);
            }
        }
        offset += s.len();
    }

    let mut surfaces: Vec<&&str> = by_surface.keys().collect();
    surfaces.sort_unstable();
    for surf in surfaces {
        let occ = &by_surface[*surf];
        for &a in occ {
            for &b in occ {
                if a != b {
                    g.add_edge(2, a, b)?; // nonlocal-identical
                }
            }
        }
    }
    g.normalize();
    Ok(g)
}

// ---------------------------------------------------------------------------
// Ego network graph (social task)
// ---------------------------------------------------------------------------

/// User nodes; each raw followed-by link (a,b) yields a follow-forward
/// edge a->b and a follow-backward edge b->a.
pub fn build_ego_graph(doc: &Document) -> Result<TaskGraph> {
    let DocumentPayload::Ego(p) = &doc.payload else {
        return Err(Error::Contract(format!(
            "ego graph over document '{}' without ego payload",
            doc.doc_id
        )));
    };
    let mut g = TaskGraph::new(p.users.len(), UnitKind::Sentence, edge_types::EGO);
    for &(a, b) in &p.edges {
        g.add_edge(0, a, b)?; // follow-forward
        g.add_edge(1, b, a)?; // follow-backward
    }
    g.normalize();
    Ok(g)
}

// ---------------------------------------------------------------------------
// Layout graph (visual task)
// ---------------------------------------------------------------------------

struct Geo {
    page: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

fn overlap(lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64) -> f64 {
    (hi_a.min(hi_b) - lo_a.max(lo_b)).max(0.0)
}

/// Overlap of the two extents relative to the smaller one.
fn overlap_ratio(lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64) -> f64 {
    let o = overlap(lo_a, hi_a, lo_b, hi_b);
    let m = (hi_a - lo_a).min(hi_b - lo_b);
    o / m
}

/// Text-box nodes; per page, a box connects to its closest alignable
/// neighbor to the right (left-to-right plus the paired right-to-left
/// edge) and below (up-to-down plus down-to-up). Alignable means more
/// than 50% projected overlap relative to the smaller extent and
/// strict separation along the connection axis. Gap ties break toward
/// the lower box index. Boxes on different pages never connect.
pub fn build_layout_graph(doc: &Document) -> Result<TaskGraph> {
    let DocumentPayload::Layout(boxes) = &doc.payload else {
        return Err(Error::Contract(format!(
            "layout graph over document '{}' without layout payload",
            doc.doc_id
        )));
    };
    let geo: Vec<Geo> = boxes
        .iter()
        .map(|b| Geo {
            page: b.bbox.page,
            x0: b.bbox.x0,
            y0: b.bbox.y0,
            x1: b.bbox.x1,
            y1: b.bbox.y1,
        })
        .collect();

    let mut g = TaskGraph::new(boxes.len(), UnitKind::Sentence, edge_types::LAYOUT);
    for a in 0..geo.len() {
        // closest alignable box strictly to the right
        let mut best: Option<(f64, usize)> = None;
        for b in 0..geo.len() {
            if a == b || geo[a].page != geo[b].page {
                continue;
            }
            if geo[a].x1 <= geo[b].x0
                && overlap_ratio(geo[a].y0, geo[a].y1, geo[b].y0, geo[b].y1) > 0.5
            {
                let gap = geo[b].x0 - geo[a].x1;
                if best.is_none_or(|(bg, bi)| gap < bg || (gap == bg && b < bi)) {
                    best = Some((gap, b));
                }
            }
        }
        if let Some((_, b)) = best {
            g.add_edge(0, a, b)?; // left-to-right
            g.add_edge(1, b, a)?; // right-to-left
        }

        // closest alignable box strictly below
        let mut best: Option<(f64, usize)> = None;
        for b in 0..geo.len() {
            if a == b || geo[a].page != geo[b].page {
                continue;
            }
            if geo[a].y1 <= geo[b].y0
                && overlap_ratio(geo[a].x0, geo[a].x1, geo[b].x0, geo[b].x1) > 0.5
            {
                let gap = geo[b].y0 - geo[a].y1;
                if best.is_none_or(|(bg, bi)| gap < bg || (gap == bg && b < bi)) {
                    best = Some((gap, b));
                }
            }
        }
        if let Some((_, b)) = best {
            g.add_edge(2, a, b)?; // up-to-down
            g.add_edge(3, b, a)?; // down-to-up
        }
    }
    g.normalize();
    Ok(g)
}

// ---------------------------------------------------------------------------
// Random-graph ablation
// ---------------------------------------------------------------------------

/// Replaces the topology by a random graph with identical node count
/// and identical per-type edge counts: endpoints resampled uniformly
/// without self-loops or duplicate same-type edges, deterministically
/// from `seed`.
pub fn randomize_edges(graph: &TaskGraph, seed: u64) -> Result<TaskGraph> {
    let m = graph.node_count();
    let mut rng = Stream::new(seed, Purpose::GraphRandom);
    let mut g = TaskGraph::new(
        m,
        graph.node_kind(),
        &graph
            .edge_type_names()
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let max_pairs = m.saturating_mul(m.saturating_sub(1));
    for ty in 0..graph.edge_type_count() {
        let want = graph.edge_count_of_type(ty);
        if want > max_pairs {
            return Err(Error::Infeasible(format!(
                "{want} edges of type '{}' requested but only {max_pairs} ordered pairs exist among {m} nodes",
                graph.edge_type_names()[ty]
            )));
        }
        let mut chosen: HashSet<(usize, usize)> = HashSet::with_capacity(want);
        while chosen.len() < want {
            let src = rng.below(m);
            let dst = rng.below(m);
            if src == dst {
                continue;
            }
            if chosen.insert((src, dst)) {
                g.add_edge(ty, src, dst)?;
            }
        }
    }
    g.normalize();
    Ok(g)
}

// ---------------------------------------------------------------------------
// Baseline horizontal concatenation
// ---------------------------------------------------------------------------

/// Merges horizontally chained text boxes into single sentences for
/// the sequential baseline. Per page, boxes linked by left-to-right
/// edges form a group ordered left-to-right; merged sentences are
/// ordered top-to-bottom by y0 (ties by x0), pages in order.
pub fn concat_horizontal_rows(doc: &Document) -> Result<Document> {
    let DocumentPayload::Layout(boxes) = &doc.payload else {
        return Err(Error::Contract(format!(
            "horizontal concatenation over document '{}' without layout payload",
            doc.doc_id
        )));
    };
    let graph = build_layout_graph(doc)?;

    // Union-find over left-to-right pairs.
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (ty, src, dst) in graph.edges() {
        if ty == 0 {
            let (a, b) = (find(&mut parent, src), find(&mut parent, dst));
            if a != b {
                parent[a] = b;
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }

    // Order groups by (page, min y0, min x0); members left-to-right.
    let mut ordered: Vec<Vec<usize>> = groups.into_values().collect();
    for members in &mut ordered {
        members.sort_by(|&a, &b| {
            boxes[a]
                .bbox
                .x0
                .partial_cmp(&boxes[b].bbox.x0)
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    ordered.sort_by(|ga, gb| {
        let ka = group_key(ga, boxes);
        let kb = group_key(gb, boxes);
        ka.partial_cmp(&kb).unwrap()
    });

    let mut sentences = Vec::with_capacity(ordered.len());
    let mut payload = Vec::with_capacity(ordered.len());
    for members in ordered {
        let mut tokens = Vec::new();
        let mut tags: Option<Vec<usize>> = None;
        let all_tagged = members
            .iter()
            .all(|&i| doc.sentences[i].tags.is_some());
        if all_tagged {
            tags = Some(Vec::new());
        }
        for &i in &members {
            tokens.extend(doc.sentences[i].tokens.iter().cloned());
            if let (Some(acc), Some(t)) = (tags.as_mut(), doc.sentences[i].tags.as_ref()) {
                acc.extend(t.iter().copied());
            }
        }
        let first = &boxes[members[0]];
        let merged = LayoutMerge::union(members.iter().map(|&i| &boxes[i]));
        payload.push(crate::corpus::LayoutBox {
            box_id: format!("row:{}", first.box_id),
            bbox: merged,
            page_width: first.page_width,
            page_height: first.page_height,
        });
        sentences.push(crate::corpus::Sentence { tokens, tags });
    }

    let out = Document {
        doc_id: doc.doc_id.clone(),
        sentences,
        unit_kind: UnitKind::Sentence,
        payload: DocumentPayload::Layout(payload),
    };
    out.validate()?;
    Ok(out)
}

fn group_key(members: &[usize], boxes: &[crate::corpus::LayoutBox]) -> (usize, f64, f64) {
    let page = boxes[members[0]].bbox.page;
    let y = members
        .iter()
        .map(|&i| boxes[i].bbox.y0)
        .fold(f64::INFINITY, f64::min);
    let x = members
        .iter()
        .map(|&i| boxes[i].bbox.x0)
        .fold(f64::INFINITY, f64::min);
    (page, y, x)
}

struct LayoutMerge;

impl LayoutMerge {
    fn union<'a>(boxes: impl Iterator<Item = &'a crate::corpus::LayoutBox>) -> crate::corpus::BoundingBox {
        let mut it = boxes.peekable();
        let first = it.peek().expect("non-empty group");
        let mut out = first.bbox;
        for b in it {
            out.x0 = out.x0.min(b.bbox.x0);
            out.y0 = out.y0.min(b.bbox.y0);
            out.x1 = out.x1.max(b.bbox.x1);
            out.y1 = out.y1.max(b.bbox.y1);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Debug JSON export / import
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    #[serde(rename = "type")]
    ty: String,
    src: usize,
    dst: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: usize,
    kind: String,
    edges: Vec<EdgeJson>,
}

pub fn export_graph_json(graph: &TaskGraph) -> Result<String> {
    let edges = graph
        .edges()
        .into_iter()
        .map(|(ty, src, dst)| EdgeJson {
            ty: graph.edge_type_names()[ty].clone(),
            src,
            dst,
        })
        .collect();
    let j = GraphJson {
        nodes: graph.node_count(),
        kind: graph.node_kind().to_string(),
        edges,
    };
    Ok(serde_json::to_string_pretty(&j)?)
}

/// Re-ingests [`export_graph_json`] output. The ordered edge type list
/// comes from the task context, not the file.
pub fn import_graph_json(text: &str, edge_type_names: &[&str]) -> Result<TaskGraph> {
    let j: GraphJson = serde_json::from_str(text)?;
    let kind = match j.kind.as_str() {
        "word" => UnitKind::Word,
        "sentence" => UnitKind::Sentence,
        other => return Err(Error::Validation(format!("unknown node kind '{other}'"))),
    };
    let mut g = TaskGraph::new(j.nodes, kind, edge_type_names);
    for e in &j.edges {
        let ty = edge_type_names
            .iter()
            .position(|n| *n == e.ty)
            .ok_or_else(|| Error::Validation(format!("unknown edge type '{}'", e.ty)))?;
        g.add_edge(ty, e.src, e.dst)?;
    }
    g.normalize();
    Ok(g)
}
