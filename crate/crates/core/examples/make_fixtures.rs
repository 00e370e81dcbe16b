//! Regenerates the committed test fixtures under `fixtures/`.
//!
//! ```text
//! cargo run --example make_fixtures
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use geosom::geo::{emit_geojson, Geometry, RegionGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Normal};
use serde_json::{json, Map, Value};

const BLOB_SPREAD: f64 = 20.0;

fn blobs(dir: &Path) {
    let mut crng = ChaCha8Rng::seed_from_u64(3);
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..5).map(|_| crng.random_range(-BLOB_SPREAD..BLOB_SPREAD)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = String::from("id,label,x1,x2,x3,x4,x5\n");
    for i in 0..300 {
        let c = i % 3;
        let _ = write!(out, "p{i:03},{c}");
        for j in 0..5 {
            let _ = write!(out, ",{}", centers[c][j] + noise.sample(&mut rng));
        }
        out.push('\n');
    }
    fs::write(dir.join("blobs3.csv"), out).unwrap();
}

struct Group {
    columns: &'static [&'static str],
}

const GROUPS: [Group; 9] = [
    Group {
        columns: &[
            "AGE_0_4", "AGE_5_9", "AGE_10_14", "AGE_15_19", "AGE_20_24", "AGE_25_34", "AGE_35_44",
            "AGE_45_54", "AGE_55_64", "AGE_65_74", "AGE_75_84", "AGE_85P",
        ],
    },
    Group {
        columns: &["SEX_M", "SEX_F"],
    },
    Group {
        columns: &["NAT_IRISH", "NAT_UK", "NAT_POLISH", "NAT_LITHUANIAN", "NAT_OTHER_EU", "NAT_REST"],
    },
    Group {
        columns: &["TEN_MORTGAGE", "TEN_OUTRIGHT", "TEN_RENT_PRIVATE", "TEN_RENT_COUNCIL", "TEN_RENT_OTHER"],
    },
    Group {
        columns: &["EDU_NONE", "EDU_PRIMARY", "EDU_LOWER_SEC", "EDU_UPPER_SEC", "EDU_TECH", "EDU_DEGREE", "EDU_POSTGRAD"],
    },
    Group {
        columns: &["ECON_EMPLOYED", "ECON_UNEMPLOYED", "ECON_STUDENT", "ECON_HOME", "ECON_RETIRED", "ECON_SICK"],
    },
    Group {
        columns: &["TRAV_FOOT", "TRAV_BIKE", "TRAV_BUS", "TRAV_TRAIN", "TRAV_DRIVER", "TRAV_PASSENGER", "TRAV_HOME"],
    },
    Group {
        columns: &["SC_PROF", "SC_MANAGERIAL", "SC_NONMANUAL", "SC_SKILLED", "SC_SEMISKILLED", "SC_UNSKILLED", "SC_OTHER"],
    },
    Group {
        columns: &["HEALTH_VERY_GOOD", "HEALTH_GOOD", "HEALTH_FAIR", "HEALTH_BAD", "HEALTH_VERY_BAD"],
    },
];

const GRID_COLS: usize = 12;
const GRID_ROWS: usize = 10;
const TYPES: usize = 4;
const CASE_RATES: [f64; TYPES] = [0.004, 0.007, 0.011, 0.018];

/// Splits `total` over categories with the given probabilities.
fn multinomial(total: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = total;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).unwrap().sample(rng);
        out.push(draw);
        left -= draw;
        mass -= p;
    }
    out
}

fn recipe() -> Value {
    let single = |c: &str| json!({"name": c, "sources": [c]});
    let mut features = vec![
        json!({"name": "AGE_0_14", "sources": ["AGE_0_4", "AGE_5_9", "AGE_10_14"]}),
        json!({"name": "AGE_15_24", "sources": ["AGE_15_19", "AGE_20_24"]}),
        single("AGE_25_34"),
        single("AGE_35_44"),
        single("AGE_45_54"),
        single("AGE_55_64"),
        json!({"name": "AGE_65P", "sources": ["AGE_65_74", "AGE_75_84", "AGE_85P"]}),
        single("AGE_0_4"),
        single("SEX_M"),
    ];
    for g in &GROUPS[2..] {
        features.extend(g.columns.iter().map(|c| single(c)));
    }
    features.push(json!({
        "name": "UNEMPLOYED_PER_EMPLOYED",
        "sources": ["ECON_UNEMPLOYED"],
        "denominator": {"column": "ECON_EMPLOYED"}
    }));
    assert_eq!(features.len(), 53);
    json!({"population_column": "POP_TOTAL", "features": features})
}

fn mini_census(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);

    // Category weights per latent area type.
    let profiles: Vec<Vec<Vec<f64>>> = (0..TYPES)
        .map(|_| {
            GROUPS
                .iter()
                .map(|g| g.columns.iter().map(|_| rng.random_range(0.3..3.0)).collect())
                .collect()
        })
        .collect();
    let jitter = LogNormal::new(0.0, 0.12).unwrap();

    let mut census = String::from("GEOGID,GEOGDESC,POP_TOTAL");
    for g in &GROUPS {
        for c in g.columns {
            census.push(',');
            census.push_str(c);
        }
    }
    census.push('\n');
    let mut cases = String::from("region_id,cases,population\n");
    let mut regions = Vec::new();

    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            let i = r * GRID_COLS + c;
            let id = format!("E{:05}", 2001 + i);
            // Quadrant blocks with occasional outliers.
            let mut t = usize::from(r >= GRID_ROWS / 2) * 2 + usize::from(c >= GRID_COLS / 2);
            if rng.random_bool(0.1) {
                t = rng.random_range(0..TYPES);
            }
            let population: u64 = rng.random_range(1500..5000);
            let _ = write!(census, "{id},Ward {},{population}", i + 1);
            for (gi, _) in GROUPS.iter().enumerate() {
                let w: Vec<f64> = profiles[t][gi].iter().map(|v| v * jitter.sample(&mut rng)).collect();
                let total: f64 = w.iter().sum();
                let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
                for n in multinomial(population, &probs, &mut rng) {
                    let _ = write!(census, ",{n}");
                }
            }
            census.push('\n');

            let rate = CASE_RATES[t] * jitter.sample(&mut rng);
            let k = Binomial::new(population, rate).unwrap().sample(&mut rng);
            let _ = writeln!(cases, "{id},{k},{population}");

            let (x0, y0) = (-6.40 + 0.025 * c as f64, 53.28 + 0.015 * r as f64);
            let (x1, y1) = (x0 + 0.025, y0 + 0.015);
            let ring = vec![vec![x0, y0], vec![x1, y0], vec![x1, y1], vec![x0, y1], vec![x0, y0]];
            let mut properties = Map::new();
            properties.insert("GEOGID".into(), Value::from(id.clone()));
            properties.insert("GEOGDESC".into(), Value::from(format!("Ward {}", i + 1)));
            regions.push(RegionGeometry {
                region_id: id,
                properties,
                geometry: Geometry::Polygon(vec![ring]),
            });
        }
    }

    fs::write(dir.join("census.csv"), census).unwrap();
    fs::write(dir.join("cases.csv"), cases).unwrap();
    fs::write(dir.join("regions.geojson"), emit_geojson(&regions)).unwrap();
    let pretty = |v: &Value| serde_json::to_string_pretty(v).unwrap() + "\n";
    fs::write(dir.join("recipe.json"), pretty(&recipe())).unwrap();
    let config = json!({
        "paths": {
            "census": "census.csv",
            "recipe": "recipe.json",
            "cases": "cases.csv",
            "geometries": "regions.geojson",
            "output_dir": "out"
        },
        "census": {"id_column": "GEOGID", "name_column": "GEOGDESC"},
        "geometry_id_property": "GEOGID",
        "dimred": {"kernel": "gaussian", "components": 5, "feature_count": 21, "hopkins_fraction": 0.1},
        "som": {"rows": 8, "cols": 8, "sigma0": 4.0, "theta0": 0.57, "iterations": 6000},
        "validity": {"k_min": 3, "k_max": 9},
        "include_outcome_features": true,
        "seed": 2020
    });
    fs::write(dir.join("config.json"), pretty(&config)).unwrap();
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&root).unwrap();
    blobs(&root);
    mini_census(&root.join("mini_census"));
    println!("fixtures written to {}", root.display());
}
