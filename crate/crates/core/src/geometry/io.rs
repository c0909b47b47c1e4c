//! Shape files: a JSON document with rings, or a CSV of `x,y` lines for a
//! single outer ring.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Polygon, PolygonSet, Ring, Role};

#[derive(Serialize, Deserialize)]
struct RingDoc {
    role: Role,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ShapeDoc {
    rings: Vec<RingDoc>,
}

impl PolygonSet {
    pub fn from_json_str(s: &str) -> Result<Self, GeometryError> {
        let doc: ShapeDoc = serde_json::from_str(s).map_err(|e| GeometryError::Parse(e.to_string()))?;
        let mut rings = Vec::with_capacity(doc.rings.len());
        for r in doc.rings {
            check_finite(&r.points)?;
            rings.push(Ring {
                polygon: Polygon::from_coords(&r.points),
                role: r.role,
            });
        }
        Ok(Self { rings })
    }

    pub fn to_json_string(&self) -> String {
        let doc = ShapeDoc {
            rings: self
                .rings
                .iter()
                .map(|r| RingDoc {
                    role: r.role,
                    points: r.polygon.vertices().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("shape serializes")
    }

    /// One outer ring from `x,y` lines. Blank lines, `#` comments and a
    /// non-numeric header line are skipped.
    pub fn from_csv_str(s: &str) -> Result<Self, GeometryError> {
        let mut pts = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = (fields.len() == 2)
                .then(|| Some([fields[0].parse::<f64>().ok()?, fields[1].parse::<f64>().ok()?]))
                .flatten();
            match parsed {
                Some(p) => pts.push(p),
                None if pts.is_empty() && lineno == 0 => continue,
                None => return Err(GeometryError::Parse(format!("line {}: expected `x,y`", lineno + 1))),
            }
        }
        check_finite(&pts)?;
        Ok(Self {
            rings: vec![Ring {
                polygon: Polygon::from_coords(&pts),
                role: Role::Outer,
            }],
        })
    }
}

fn check_finite(points: &[[f64; 2]]) -> Result<(), GeometryError> {
    if points.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::Parse("non-finite coordinate".into()))
    }
}

/// Reads JSON (content starting with `{`) or CSV.
pub fn read_shape(path: &Path) -> Result<PolygonSet, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        PolygonSet::from_json_str(&text)
    } else {
        PolygonSet::from_csv_str(&text)
    }
}

pub fn write_shape(path: &Path, set: &PolygonSet) -> Result<(), GeometryError> {
    std::fs::write(path, set.to_json_string())?;
    Ok(())
}
