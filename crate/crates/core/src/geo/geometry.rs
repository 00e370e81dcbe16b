use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::GeoError;

/// `[lon, lat]` with an optional altitude, as in RFC 7946.
pub type Position = Vec<f64>;

/// GeoJSON geometry object; only areal types are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
pub enum Geometry {
    Polygon(Vec<Vec<Position>>),
    MultiPolygon(Vec<Vec<Vec<Position>>>),
}

impl Geometry {
    /// Polygons as lists of rings (outer ring first).
    pub fn polygons(&self) -> Vec<&Vec<Vec<Position>>> {
        match self {
            Geometry::Polygon(p) => vec![p],
            Geometry::MultiPolygon(ps) => ps.iter().collect(),
        }
    }

    fn check(&self) -> Result<(), String> {
        for poly in self.polygons() {
            if poly.is_empty() {
                return Err("polygon without rings".into());
            }
            for ring in poly {
                if ring.len() < 4 {
                    return Err(format!("ring has {} positions, need at least 4", ring.len()));
                }
                if ring.iter().any(|p| p.len() < 2 || p.iter().any(|v| !v.is_finite())) {
                    return Err("position needs at least two finite coordinates".into());
                }
                if ring.first() != ring.last() {
                    return Err("ring is not closed".into());
                }
            }
        }
        Ok(())
    }
}

/// One region's boundary plus the feature's original properties.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGeometry {
    pub region_id: String,
    pub properties: Map<String, Value>,
    pub geometry: Geometry,
}

pub fn load_geometries(path: &Path, id_property: &str) -> Result<Vec<RegionGeometry>, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_geometries(&text, id_property)
}

/// Reads a FeatureCollection; the region id comes from the `id_property`
/// property (strings as-is, numbers in their JSON spelling).
pub fn parse_geometries(text: &str, id_property: &str) -> Result<Vec<RegionGeometry>, GeoError> {
    let root: Value = serde_json::from_str(text).map_err(|e| GeoError::Malformed(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeoError::Malformed("top-level object is not a FeatureCollection".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoError::Malformed("FeatureCollection has no features array".into()))?;

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(features.len());
    for (index, f) in features.iter().enumerate() {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(GeoError::Malformed(format!("entry {index} is not a Feature")));
        }
        let properties = match f.get("properties") {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        };
        let region_id = match properties.get(id_property) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                return Err(GeoError::MissingId {
                    index,
                    property: id_property.to_string(),
                })
            }
        };
        let bad = |message: String| GeoError::BadGeometry {
            index,
            id: region_id.clone(),
            message,
        };
        let raw = f.get("geometry").cloned().unwrap_or(Value::Null);
        let geometry: Geometry = serde_json::from_value(raw).map_err(|e| bad(e.to_string()))?;
        geometry.check().map_err(bad)?;
        if !seen.insert(region_id.clone()) {
            return Err(GeoError::DuplicateId(region_id));
        }
        out.push(RegionGeometry {
            region_id,
            properties,
            geometry,
        });
    }
    Ok(out)
}

pub(crate) fn feature(properties: Map<String, Value>, geometry: Option<&Geometry>) -> Value {
    let mut f = Map::new();
    f.insert("type".into(), Value::from("Feature"));
    f.insert("properties".into(), Value::Object(properties));
    f.insert(
        "geometry".into(),
        geometry.map_or(Value::Null, |g| serde_json::to_value(g).expect("geometry serializes")),
    );
    Value::Object(f)
}

pub(crate) fn collection(features: Vec<Value>) -> String {
    let mut root = Map::new();
    root.insert("type".into(), Value::from("FeatureCollection"));
    root.insert("features".into(), Value::Array(features));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("json serializes");
    s.push('\n');
    s
}

/// Writes geometries back out as a FeatureCollection.
pub fn emit_geojson(regions: &[RegionGeometry]) -> String {
    collection(
        regions
            .iter()
            .map(|r| feature(r.properties.clone(), Some(&r.geometry)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"GEOGID":"E1","name":"North"},
       "geometry":{"type":"Polygon","coordinates":[[[-6.3,53.3],[-6.2,53.3],[-6.2,53.4],[-6.3,53.3]]]}},
      {"type":"Feature","properties":{"GEOGID":"E2"},
       "geometry":{"type":"MultiPolygon","coordinates":[[[[-6.1,53.30000000000001],[-6.0,53.3],[-6.0,53.4],[-6.1,53.30000000000001]]]]}}
    ]}"#;

    #[test]
    fn two_features() {
        let g = parse_geometries(TWO, "GEOGID").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].region_id, "E1");
        assert_eq!(g[1].region_id, "E2");
        assert!(matches!(g[1].geometry, Geometry::MultiPolygon(_)));
    }

    #[test]
    fn round_trip_is_exact() {
        let g = parse_geometries(TWO, "GEOGID").unwrap();
        let once = emit_geojson(&g);
        let back = parse_geometries(&once, "GEOGID").unwrap();
        assert_eq!(back, g);
        assert_eq!(emit_geojson(&back), once);
        let Geometry::MultiPolygon(p) = &back[1].geometry else { panic!() };
        assert_eq!(p[0][0][0][1].to_bits(), 53.30000000000001f64.to_bits());
    }

    #[test]
    fn errors() {
        let missing = TWO.replace(r#""GEOGID":"E2""#, r#""other":"E2""#);
        match parse_geometries(&missing, "GEOGID") {
            Err(GeoError::MissingId { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        let dup = TWO.replace("\"E2\"", "\"E1\"");
        assert!(matches!(parse_geometries(&dup, "GEOGID"), Err(GeoError::DuplicateId(id)) if id == "E1"));
        let open = TWO.replace("[-6.3,53.3]]]}", "[-6.3,53.35]]]}");
        assert!(matches!(parse_geometries(&open, "GEOGID"), Err(GeoError::BadGeometry { index: 0, .. })));
        let point = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"GEOGID":7},"geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(matches!(parse_geometries(point, "GEOGID"), Err(GeoError::BadGeometry { .. })));
        assert!(matches!(parse_geometries("[1]", "GEOGID"), Err(GeoError::Malformed(_))));
        assert!(matches!(parse_geometries("{", "GEOGID"), Err(GeoError::Malformed(_))));
    }
}
