use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use super::cases::ClusterSummary;
use super::geometry::{collection, feature, RegionGeometry};
use super::GeoError;
use crate::artifact;
use crate::validity::ClusterAssignment;

/// Fill colours for clusters 1, 2, ... (wrapping after ten).
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#17becf",
];
pub const UNASSIGNED_COLOR: &str = "#d9d9d9";

const MAP_WIDTH: f64 = 800.0;
const MARGIN: f64 = 10.0;
const LEGEND_WIDTH: f64 = 240.0;

fn color(cluster: usize) -> &'static str {
    PALETTE[(cluster - 1) % PALETTE.len()]
}

/// Rendered outputs plus the regions that could not be joined.
#[derive(Debug, Clone, PartialEq)]
pub struct Choropleth {
    pub geojson: String,
    pub svg: String,
    /// Geometries with no cluster assignment (drawn as "unassigned").
    pub unassigned: Vec<String>,
    /// Assigned regions with no geometry (emitted with a null geometry).
    pub missing_geometry: Vec<String>,
}

impl Choropleth {
    pub fn write(&self, geojson_path: &Path, svg_path: &Path) -> Result<(), GeoError> {
        artifact::write_bytes(geojson_path, self.geojson.as_bytes())?;
        artifact::write_bytes(svg_path, self.svg.as_bytes())?;
        Ok(())
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Equirectangular projection scaled to the map width, with longitudes
/// shrunk by the cosine of the mid latitude.
struct Projection {
    min_lon: f64,
    max_lat: f64,
    kx: f64,
    scale: f64,
    height: f64,
}

impl Projection {
    fn fit(geoms: &[RegionGeometry]) -> Self {
        let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
        for g in geoms {
            for poly in g.geometry.polygons() {
                for p in poly.iter().flatten() {
                    min_lon = min_lon.min(p[0]);
                    max_lon = max_lon.max(p[0]);
                    min_lat = min_lat.min(p[1]);
                    max_lat = max_lat.max(p[1]);
                }
            }
        }
        if !min_lon.is_finite() {
            return Self {
                min_lon: 0.0,
                max_lat: 0.0,
                kx: 1.0,
                scale: 1.0,
                height: 2.0 * MARGIN,
            };
        }
        let kx = ((min_lat + max_lat) / 2.0).to_radians().cos().max(1e-6);
        let span_x = (max_lon - min_lon) * kx;
        let span_y = max_lat - min_lat;
        let span = span_x.max(span_y);
        let scale = if span > 0.0 { (MAP_WIDTH - 2.0 * MARGIN) / span } else { 1.0 };
        Self {
            min_lon,
            max_lat,
            kx,
            scale,
            height: span_y * scale + 2.0 * MARGIN,
        }
    }

    fn xy(&self, p: &[f64]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.min_lon) * self.kx * self.scale,
            MARGIN + (self.max_lat - p[1]) * self.scale,
        )
    }
}

fn path_data(g: &RegionGeometry, proj: &Projection) -> String {
    let mut d = String::new();
    for poly in g.geometry.polygons() {
        for ring in poly {
            // The closing position repeats the first; `Z` draws that edge.
            for (i, p) in ring[..ring.len() - 1].iter().enumerate() {
                let (x, y) = proj.xy(p);
                let _ = write!(d, "{}{x:.2} {y:.2} ", if i == 0 { "M" } else { "L" });
            }
            d.push_str("Z ");
        }
    }
    d.pop();
    d
}

/// Joins assignments, geometries and cluster totals into a GeoJSON
/// FeatureCollection and a standalone SVG map.
///
/// Each feature gains `cluster_id`, `cases`, `population` and `rate`; the
/// last three are the totals of the region's cluster. Geometries without an
/// assignment get null values and the "unassigned" class. Assigned regions
/// without geometry are still emitted, with a null geometry.
pub fn render_choropleth(
    assignment: &ClusterAssignment,
    geometries: &[RegionGeometry],
    summaries: &[ClusterSummary],
) -> Choropleth {
    let cluster_of: HashMap<&str, usize> = assignment
        .regions
        .iter()
        .map(|r| (r.region_id.as_str(), r.cluster))
        .collect();
    let summary: HashMap<usize, &ClusterSummary> =
        summaries.iter().map(|s| (s.cluster_id, s)).collect();
    let with_geometry: HashSet<&str> = geometries.iter().map(|g| g.region_id.as_str()).collect();

    let props = |base: &serde_json::Map<String, Value>, cluster: Option<usize>| {
        let mut p = base.clone();
        let s = cluster.and_then(|c| summary.get(&c));
        p.insert("cluster_id".into(), cluster.map_or(Value::Null, Value::from));
        p.insert("cases".into(), s.map_or(Value::Null, |s| Value::from(s.total_cases)));
        p.insert("population".into(), s.map_or(Value::Null, |s| Value::from(s.total_population)));
        p.insert("rate".into(), s.map_or(Value::Null, |s| Value::from(s.rate)));
        p
    };

    let mut features = Vec::new();
    let mut unassigned = Vec::new();
    for g in geometries {
        let c = cluster_of.get(g.region_id.as_str()).copied();
        if c.is_none() {
            unassigned.push(g.region_id.clone());
        }
        features.push(feature(props(&g.properties, c), Some(&g.geometry)));
    }
    let mut missing_geometry = Vec::new();
    for r in &assignment.regions {
        if !with_geometry.contains(r.region_id.as_str()) {
            missing_geometry.push(r.region_id.clone());
            let mut base = serde_json::Map::new();
            base.insert("region_id".into(), Value::from(r.region_id.clone()));
            features.push(feature(props(&base, Some(r.cluster)), None));
        }
    }
    if !unassigned.is_empty() {
        log::warn!("{} regions have geometry but no cluster: {unassigned:?}", unassigned.len());
    }
    if !missing_geometry.is_empty() {
        log::warn!("{} assigned regions have no geometry: {missing_geometry:?}", missing_geometry.len());
    }

    Choropleth {
        geojson: collection(features),
        svg: svg(geometries, &cluster_of, summaries, !unassigned.is_empty()),
        unassigned,
        missing_geometry,
    }
}

fn svg(
    geometries: &[RegionGeometry],
    cluster_of: &HashMap<&str, usize>,
    summaries: &[ClusterSummary],
    any_unassigned: bool,
) -> String {
    let proj = Projection::fit(geometries);
    let mut groups: BTreeMap<Option<usize>, Vec<&RegionGeometry>> = BTreeMap::new();
    for g in geometries {
        groups.entry(cluster_of.get(g.region_id.as_str()).copied()).or_default().push(g);
    }

    let legend_rows = summaries.len() + usize::from(any_unassigned);
    let height = proj.height.max(MARGIN * 2.0 + 24.0 * (legend_rows as f64 + 1.0));
    let width = MAP_WIDTH + LEGEND_WIDTH;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    // Unassigned regions (key `None`) sort first and so sit underneath.
    for (cluster, regions) in &groups {
        let (id, fill) = match cluster {
            Some(c) => (format!("cluster-{c}"), color(*c)),
            None => ("unassigned".to_string(), UNASSIGNED_COLOR),
        };
        let _ = writeln!(
            s,
            r##"<g id="{id}" fill="{fill}" stroke="#333333" stroke-width="0.5" fill-rule="evenodd">"##
        );
        for g in regions {
            let _ = writeln!(
                s,
                r#"<path d="{}"><title>{}</title></path>"#,
                path_data(g, &proj),
                xml_escape(&g.region_id)
            );
        }
        s.push_str("</g>\n");
    }

    let x0 = MAP_WIDTH + MARGIN;
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{x0:.0}" y="{:.0}" font-weight="bold">Cluster (cases / population)</text>"#, MARGIN + 12.0);
    let mut y = MARGIN + 24.0;
    for sm in summaries {
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.0}" y="{y:.0}" width="16" height="16" fill="{}" stroke="#333333"/><text x="{:.0}" y="{:.0}">{} ({}/{} = {})</text>"##,
            color(sm.cluster_id),
            x0 + 22.0,
            y + 13.0,
            sm.cluster_id,
            sm.total_cases,
            sm.total_population,
            sm.display_rate()
        );
        y += 24.0;
    }
    if any_unassigned {
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.0}" y="{y:.0}" width="16" height="16" fill="{UNASSIGNED_COLOR}" stroke="#333333"/><text x="{:.0}" y="{:.0}">unassigned</text>"##,
            x0 + 22.0,
            y + 13.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{aggregate_cases, parse_geometries, CaseRecord};
    use crate::validity::RegionAssignment;

    fn square(id: &str, x: f64) -> String {
        format!(
            r#"{{"type":"Feature","properties":{{"id":"{id}"}},"geometry":{{"type":"Polygon","coordinates":[[[{x},53.0],[{},53.0],[{},53.1],[{x},53.1],[{x},53.0]]]}}}}"#,
            x + 0.1,
            x + 0.1
        )
    }

    fn fixture() -> (ClusterAssignment, Vec<RegionGeometry>, Vec<ClusterSummary>) {
        let text = format!(
            r#"{{"type":"FeatureCollection","features":[{},{},{}]}}"#,
            square("a", -6.3),
            square("b", -6.2),
            square("c", -6.1)
        );
        let geoms = parse_geometries(&text, "id").unwrap();
        let assignment = ClusterAssignment {
            k: 2,
            regions: [("a", 1), ("b", 2), ("c", 1)]
                .iter()
                .map(|(id, c)| RegionAssignment {
                    region_id: id.to_string(),
                    bmu: 0,
                    cluster: *c,
                })
                .collect(),
        };
        let cases: Vec<CaseRecord> = [("a", 5, 100), ("b", 1, 300), ("c", 7, 50)]
            .iter()
            .map(|(id, c, p)| CaseRecord {
                region_id: id.to_string(),
                cases: *c,
                population: *p,
            })
            .collect();
        let summaries = aggregate_cases(&assignment, &cases).unwrap();
        (assignment, geoms, summaries)
    }

    #[test]
    fn features_carry_cluster_properties() {
        let (a, g, s) = fixture();
        let out = render_choropleth(&a, &g, &s);
        let v: Value = serde_json::from_str(&out.geojson).unwrap();
        let feats = v["features"].as_array().unwrap();
        assert_eq!(feats.len(), 3);
        for f in feats {
            let c = f["properties"]["cluster_id"].as_u64().unwrap() as usize;
            let sm = s.iter().find(|x| x.cluster_id == c).unwrap();
            assert_eq!(f["properties"]["rate"].as_f64().unwrap(), sm.rate);
        }
        assert_eq!(feats[0]["properties"]["cases"], 12);
        assert!(out.unassigned.is_empty() && out.missing_geometry.is_empty());
    }

    #[test]
    fn deterministic_svg() {
        let (a, g, s) = fixture();
        let one = render_choropleth(&a, &g, &s);
        let two = render_choropleth(&a, &g, &s);
        assert_eq!(one.svg, two.svg);
        assert_eq!(one.geojson, two.geojson);
        assert!(one.svg.contains(r##"<g id="cluster-1" fill="#4e79a7""##));
        assert!(one.svg.contains(r##"<g id="cluster-2" fill="#f28e2b""##));
        assert!(one.svg.contains("<g id=\"legend\""));
        assert_eq!(one.svg.matches("<path ").count(), 3);
    }

    #[test]
    fn unjoinable_regions_are_listed() {
        let (mut a, mut g, s) = fixture();
        a.regions.retain(|r| r.region_id != "c");
        g.retain(|x| x.region_id != "b");
        let out = render_choropleth(&a, &g, &s);
        assert_eq!(out.unassigned, vec!["c".to_string()]);
        assert_eq!(out.missing_geometry, vec!["b".to_string()]);
        assert!(out.svg.contains(r#"<g id="unassigned""#));
        let v: Value = serde_json::from_str(&out.geojson).unwrap();
        let feats = v["features"].as_array().unwrap();
        assert_eq!(feats.len(), 3);
        assert!(feats[1]["properties"]["cluster_id"].is_null());
        assert!(feats[2]["geometry"].is_null());
    }

    #[test]
    fn escapes_ids() {
        assert_eq!(xml_escape(r#"a<b>&"c""#), "a&lt;b&gt;&amp;&quot;c&quot;");
    }
}
