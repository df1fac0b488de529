//! Text and GeoJSON serialization of [`RoadGraph`].
//!
//! Text format, one record per line:
//!
//! ```text
//! # comment
//! # origin <lon> <lat>
//! v <id> <lon> <lat>
//! e <id1> <id2> [support] [provenance]
//! ```
//!
//! All vertex lines precede edge lines. The `# origin` comment pins the
//! projection origin; without it the vertex centroid is used. Coordinates are
//! written with 7 decimals.

use serde_json::{json, Value};
use thiserror::Error;

use crate::geo::{LonLat, Projection};
use crate::graph::{EdgeMeta, GraphError, Provenance, RoadGraph, VertexId};

const ORIGIN_TAG: &str = "origin";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphParseError {
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate vertex id {id}")]
    DuplicateVertex { line: usize, id: u64 },
    #[error("line {line}: duplicate edge {a}-{b}")]
    DuplicateEdge { line: usize, a: u64, b: u64 },
    #[error("line {line}: edge references undefined vertex id {id}")]
    UndefinedVertex { line: usize, id: u64 },
    #[error("line {line}: self-loop on vertex {id}")]
    SelfLoop { line: usize, id: u64 },
    #[error("line {line}: vertex record after edge records")]
    VertexAfterEdge { line: usize },
    #[error("line {line}: invalid coordinate: {msg}")]
    InvalidCoordinate { line: usize, msg: String },
}

struct RawVertex {
    line: usize,
    id: u64,
    at: LonLat,
}

struct RawEdge {
    line: usize,
    a: u64,
    b: u64,
    meta: EdgeMeta,
}

fn malformed(line: usize, msg: impl Into<String>) -> GraphParseError {
    GraphParseError::Malformed {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, GraphParseError> {
    tok.parse()
        .map_err(|_| malformed(line, format!("bad {what} `{tok}`")))
}

/// Parses a graph using the file's `# origin` (or the vertex centroid) as projection.
pub fn read_graph(text: &str) -> Result<RoadGraph, GraphParseError> {
    parse(text, None)
}

/// Parses a graph into an explicitly chosen projection plane.
pub fn read_graph_with(text: &str, projection: Projection) -> Result<RoadGraph, GraphParseError> {
    parse(text, Some(projection))
}

fn parse(text: &str, forced: Option<Projection>) -> Result<RoadGraph, GraphParseError> {
    let mut origin: Option<LonLat> = None;
    let mut verts: Vec<RawVertex> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let toks: Vec<&str> = comment.split_whitespace().collect();
            if toks.len() == 3 && toks[0] == ORIGIN_TAG {
                let lon = parse_num(toks[1], line, "origin longitude")?;
                let lat = parse_num(toks[2], line, "origin latitude")?;
                origin = Some(LonLat::new(lon, lat).map_err(|e| {
                    GraphParseError::InvalidCoordinate {
                        line,
                        msg: e.to_string(),
                    }
                })?);
            }
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match toks[0] {
            "v" => {
                if !edges.is_empty() {
                    return Err(GraphParseError::VertexAfterEdge { line });
                }
                if toks.len() != 4 {
                    return Err(malformed(line, "vertex needs `v <id> <lon> <lat>`"));
                }
                let id = parse_num(toks[1], line, "vertex id")?;
                let lon = parse_num(toks[2], line, "longitude")?;
                let lat = parse_num(toks[3], line, "latitude")?;
                let at = LonLat::new(lon, lat).map_err(|e| GraphParseError::InvalidCoordinate {
                    line,
                    msg: e.to_string(),
                })?;
                verts.push(RawVertex { line, id, at });
            }
            "e" => {
                if !(3..=5).contains(&toks.len()) {
                    return Err(malformed(
                        line,
                        "edge needs `e <id1> <id2> [support] [provenance]`",
                    ));
                }
                let a = parse_num(toks[1], line, "vertex id")?;
                let b = parse_num(toks[2], line, "vertex id")?;
                let support = match toks.get(3) {
                    Some(t) => parse_num(t, line, "support")?,
                    None => 0,
                };
                let provenance = match toks.get(4) {
                    Some(t) => Provenance::parse(t)
                        .ok_or_else(|| malformed(line, format!("unknown provenance `{t}`")))?,
                    None => Provenance::BaseMap,
                };
                edges.push(RawEdge {
                    line,
                    a,
                    b,
                    meta: EdgeMeta::new(support, provenance),
                });
            }
            other => return Err(malformed(line, format!("unknown record type `{other}`"))),
        }
    }

    let projection = forced.unwrap_or_else(|| match origin {
        Some(o) => Projection::new(o),
        None => Projection::centroid_of(verts.iter().map(|v| &v.at)),
    });
    let mut g = RoadGraph::new(projection);
    for v in &verts {
        let pos = projection
            .project(v.at)
            .map_err(|e| GraphParseError::InvalidCoordinate {
                line: v.line,
                msg: e.to_string(),
            })?;
        g.insert_vertex(VertexId(v.id), pos).map_err(|e| match e {
            GraphError::DuplicateVertex(_) => GraphParseError::DuplicateVertex {
                line: v.line,
                id: v.id,
            },
            other => malformed(v.line, other.to_string()),
        })?;
    }
    for e in &edges {
        let line = e.line;
        match g.add_edge(VertexId(e.a), VertexId(e.b), e.meta) {
            Ok(true) => {}
            Ok(false) => {
                return Err(GraphParseError::DuplicateEdge {
                    line,
                    a: e.a,
                    b: e.b,
                })
            }
            Err(GraphError::MissingVertex(id)) => {
                return Err(GraphParseError::UndefinedVertex { line, id: id.0 })
            }
            Err(GraphError::SelfLoop(id)) => return Err(GraphParseError::SelfLoop { line, id: id.0 }),
            Err(other) => return Err(malformed(line, other.to_string())),
        }
    }
    Ok(g)
}

/// Canonical text rendering: origin header, vertices by id, edges by endpoint ids.
pub fn write_graph(g: &RoadGraph) -> String {
    let mut out = String::new();
    let o = g.projection().origin();
    out.push_str("# roadtrace graph\n");
    out.push_str(&format!("# {ORIGIN_TAG} {:.7} {:.7}\n", o.lon, o.lat));
    for (id, _) in g.vertices() {
        let ll = g.lonlat(id).expect("vertex exists");
        out.push_str(&format!("v {} {:.7} {:.7}\n", id.0, ll.lon, ll.lat));
    }
    for (k, m) in g.edges() {
        out.push_str(&format!(
            "e {} {} {} {}\n",
            k.a.0,
            k.b.0,
            m.support,
            m.provenance.as_str()
        ));
    }
    out
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

/// One GeoJSON `LineString` feature per edge.
pub fn edge_feature(g: &RoadGraph, a: VertexId, b: VertexId, properties: Value) -> Value {
    let pa = g.lonlat(a).expect("vertex exists");
    let pb = g.lonlat(b).expect("vertex exists");
    json!({
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": [[round7(pa.lon), round7(pa.lat)], [round7(pb.lon), round7(pb.lat)]],
        },
        "properties": properties,
    })
}

/// GeoJSON `FeatureCollection` with one `LineString` per edge.
pub fn to_geojson(g: &RoadGraph) -> Value {
    let features: Vec<Value> = g
        .edges()
        .map(|(k, m)| {
            edge_feature(
                g,
                k.a,
                k.b,
                json!({
                    "ids": [k.a.0, k.b.0],
                    "support": m.support,
                    "provenance": m.provenance.as_str(),
                }),
            )
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
