//! GPS trajectories: CSV parsing, outlier cleaning, and CSV output.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{LonLat, Projection, Xy};

pub const CSV_HEADER: [&str; 4] = ["traj_id", "timestamp", "lon", "lat"];

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("row {row}: {msg}")]
    MalformedRow { row: u64, msg: String },
    #[error("row {row}: invalid coordinate: {msg}")]
    InvalidCoordinate { row: u64, msg: String },
    #[error("bad header: expected `traj_id,timestamp,lon,lat`, found `{0}`")]
    BadHeader(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    /// Epoch seconds.
    pub t: f64,
    pub pos: Xy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, by: Xy) -> Trajectory {
        Trajectory {
            id: self.id.clone(),
            points: self
                .points
                .iter()
                .map(|p| TrajPoint {
                    t: p.t,
                    pos: p.pos + by,
                })
                .collect(),
        }
    }
}

/// Trajectories together with the projection their coordinates live in.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub projection: Projection,
    pub trajectories: Vec<Trajectory>,
}

struct Row {
    id: String,
    t: f64,
    at: LonLat,
}

fn read_rows(text: &str) -> Result<Vec<Row>, TrajError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != CSV_HEADER {
        return Err(TrajError::BadHeader(found.join(",")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TrajError::MalformedRow {
            row: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        let num = |i: usize, what: &str| -> Result<f64, TrajError> {
            let v: f64 = rec[i].parse().map_err(|_| TrajError::MalformedRow {
                row,
                msg: format!("bad {what} `{}`", &rec[i]),
            })?;
            if !v.is_finite() {
                return Err(TrajError::MalformedRow {
                    row,
                    msg: format!("non-finite {what}"),
                });
            }
            Ok(v)
        };
        let t = num(1, "timestamp")?;
        let lon = num(2, "lon")?;
        let lat = num(3, "lat")?;
        let at = LonLat::new(lon, lat).map_err(|e| TrajError::InvalidCoordinate {
            row,
            msg: e.to_string(),
        })?;
        rows.push(Row {
            id: rec[0].to_string(),
            t,
            at,
        });
    }
    Ok(rows)
}

fn group(rows: Vec<Row>, projection: &Projection) -> Vec<Trajectory> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<TrajPoint>> = HashMap::new();
    for r in rows {
        let pos = projection
            .project(r.at)
            .expect("validated coordinates are finite");
        let entry = groups.entry(r.id.clone()).or_insert_with(|| {
            order.push(r.id.clone());
            Vec::new()
        });
        entry.push(TrajPoint { t: r.t, pos });
    }
    order
        .into_iter()
        .map(|id| {
            let mut points = groups.remove(&id).unwrap();
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
            Trajectory { id, points }
        })
        .collect()
}

/// Parses `traj_id,timestamp,lon,lat` CSV, projecting about the point centroid.
///
/// One trajectory per distinct id, in order of first appearance, with points
/// sorted by timestamp.
pub fn parse_trajectories(text: &str) -> Result<TrajectorySet, TrajError> {
    let rows = read_rows(text)?;
    let projection = Projection::centroid_of(rows.iter().map(|r| &r.at));
    let trajectories = group(rows, &projection);
    Ok(TrajectorySet {
        projection,
        trajectories,
    })
}

/// Like [`parse_trajectories`] but projects into a given plane.
pub fn parse_trajectories_with(text: &str, projection: Projection) -> Result<Vec<Trajectory>, TrajError> {
    Ok(group(read_rows(text)?, &projection))
}

pub fn write_trajectories(trajs: &[Trajectory], projection: &Projection) -> String {
    let mut out = String::from("traj_id,timestamp,lon,lat\n");
    for tr in trajs {
        for p in &tr.points {
            let ll = projection.unproject(p.pos);
            out.push_str(&format!("{},{:.3},{:.7},{:.7}\n", tr.id, p.t, ll.lon, ll.lat));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    /// Split trajectories at time gaps longer than this (seconds).
    pub gap_s: f64,
    /// Drop points implying a speed above this (m/s).
    pub v_max: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            gap_s: 30.0,
            v_max: 40.0,
        }
    }
}

/// Splits at time gaps, drops points implying impossible speeds or repeated
/// timestamps, and discards pieces shorter than two points.
///
/// Split pieces after the first get the id suffix `#k`.
pub fn clean(trajs: &[Trajectory], cfg: &CleanConfig) -> Vec<Trajectory> {
    let mut out = Vec::new();
    for tr in trajs {
        let mut pieces: Vec<Vec<TrajPoint>> = Vec::new();
        let mut cur: Vec<TrajPoint> = Vec::new();
        for &p in &tr.points {
            let Some(last) = cur.last() else {
                cur.push(p);
                continue;
            };
            let dt = p.t - last.t;
            if dt > cfg.gap_s {
                pieces.push(std::mem::take(&mut cur));
                cur.push(p);
            } else if dt <= 0.0 || p.pos.dist(last.pos) / dt > cfg.v_max {
                continue;
            } else {
                cur.push(p);
            }
        }
        pieces.push(cur);
        for (k, piece) in pieces.into_iter().filter(|p| p.len() >= 2).enumerate() {
            let id = if k == 0 {
                tr.id.clone()
            } else {
                format!("{}#{k}", tr.id)
            };
            out.push(Trajectory { id, points: piece });
        }
    }
    out
}
