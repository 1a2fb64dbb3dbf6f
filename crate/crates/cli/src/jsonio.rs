//! Deterministic JSON artifacts.
//!
//! Writing is hand-rolled so the bytes are reproducible: object keys come
//! out sorted, floats are printed with 17 significant digits (lossless for
//! f64), and the layout never depends on map iteration order. Reading goes
//! through serde_json and a small extraction layer whose errors name the
//! field that was missing or mistyped.

use denspart::estimator::{EstimatorConfig, PiecewiseDensity};
use denspart::geometry::PartitionTree;
use denspart::sltree::{BranchDecomposition, SubLevelTree};
use denspart::spectral::{CommunityResult, Network};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonIoError {
    #[error("invalid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error: missing field `{0}`")]
    MissingField(String),
    #[error("schema error: field `{0}` is not {1}")]
    WrongType(String, &'static str),
    #[error("inconsistent partition file: {0}")]
    Inconsistent(String),
}

type Result<T> = std::result::Result<T, JsonIoError>;

/// JSON value with insertion-ordered object fields; the writer sorts keys.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn uint(v: usize) -> Json {
        Json::Int(v as i64)
    }

    pub fn floats(xs: &[f64]) -> Json {
        Json::Array(xs.iter().map(|&x| Json::Float(x)).collect())
    }

    pub fn uints(xs: &[usize]) -> Json {
        Json::Array(xs.iter().map(|&x| Json::uint(x)).collect())
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Json::Array(_) | Json::Object(_))
    }

    /// Renders the value with a trailing newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out, 0);
        out.push('\n');
        out
    }

    fn write_into(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(v) => out.push_str(&v.to_string()),
            Json::Float(x) => out.push_str(&format!("{x:.16e}")),
            Json::Str(s) => write_escaped(out, s),
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                } else if items.iter().all(Json::is_scalar) {
                    out.push('[');
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        item.write_into(out, indent);
                    }
                    out.push(']');
                } else {
                    out.push_str("[\n");
                    for (i, item) in items.iter().enumerate() {
                        pad(out, indent + 1);
                        item.write_into(out, indent + 1);
                        if i + 1 < items.len() {
                            out.push(',');
                        }
                        out.push('\n');
                    }
                    pad(out, indent);
                    out.push(']');
                }
            }
            Json::Object(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                let mut order: Vec<usize> = (0..fields.len()).collect();
                order.sort_by(|&a, &b| fields[a].0.cmp(&fields[b].0));
                out.push_str("{\n");
                for (i, &fi) in order.iter().enumerate() {
                    let (key, value) = &fields[fi];
                    pad(out, indent + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write_into(out, indent + 1);
                    if i + 1 < order.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, indent);
                out.push('}');
            }
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn get<'a>(obj: &'a Value, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| JsonIoError::MissingField(field.to_string()))
}

fn as_f64(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().ok_or(JsonIoError::WrongType(field.to_string(), "a number"))
}

fn as_usize(v: &Value, field: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or(JsonIoError::WrongType(field.to_string(), "a non-negative integer"))
}

fn as_array<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or(JsonIoError::WrongType(field.to_string(), "an array"))
}

fn f64_field(obj: &Value, field: &str) -> Result<f64> {
    as_f64(get(obj, field)?, field)
}

fn usize_field(obj: &Value, field: &str) -> Result<usize> {
    as_usize(get(obj, field)?, field)
}

fn f64_field_at(obj: &Value, key: &str, label: &str) -> Result<f64> {
    as_f64(obj.get(key).ok_or_else(|| JsonIoError::MissingField(label.to_string()))?, label)
}

fn usize_field_at(obj: &Value, key: &str, label: &str) -> Result<usize> {
    as_usize(obj.get(key).ok_or_else(|| JsonIoError::MissingField(label.to_string()))?, label)
}

fn f64_array_field(obj: &Value, key: &str, label: &str) -> Result<Vec<f64>> {
    as_array(
        obj.get(key).ok_or_else(|| JsonIoError::MissingField(label.to_string()))?,
        label,
    )?
    .iter()
    .map(|v| as_f64(v, label))
    .collect()
}

fn config_json(config: &EstimatorConfig) -> Json {
    Json::Object(vec![
        ("bins".into(), Json::uint(config.bins)),
        ("alpha".into(), Json::Float(config.alpha)),
        ("chi_significance".into(), Json::Float(config.chi_significance)),
        ("z_significance".into(), Json::Float(config.z_significance)),
        (
            "subsample".into(),
            config.subsample.map_or(Json::Null, Json::uint),
        ),
        ("max_depth".into(), Json::uint(config.max_depth)),
        ("seed".into(), Json::Int(config.seed as i64)),
    ])
}

fn config_from_json(obj: &Value) -> Result<EstimatorConfig> {
    let subsample = match get(obj, "subsample")? {
        Value::Null => None,
        v => Some(as_usize(v, "subsample")?),
    };
    Ok(EstimatorConfig {
        bins: usize_field(obj, "bins")?,
        alpha: f64_field(obj, "alpha")?,
        chi_significance: f64_field(obj, "chi_significance")?,
        z_significance: f64_field(obj, "z_significance")?,
        subsample,
        max_depth: usize_field(obj, "max_depth")?,
        seed: usize_field(obj, "seed")? as u64,
    })
}

/// Serializes an estimate so it can be rebuilt exactly: the domain box, the
/// split annotations in creation order, and per-leaf masses.
pub fn partition_json(pd: &PiecewiseDensity) -> Json {
    let tree = pd.tree();
    let root = tree.region(tree.root());
    let mut internal = Vec::new();
    let mut edges = Vec::new();
    let mut leaves = Vec::new();
    for node in tree.nodes() {
        let r = &node.region;
        if let (Some((left, right)), Some(split)) = (node.children, node.split) {
            internal.push(Json::Object(vec![
                ("id".into(), Json::uint(r.id)),
                ("dim".into(), Json::uint(split.dim)),
                ("at".into(), Json::Float(split.at)),
            ]));
            edges.push(Json::Array(vec![Json::uint(r.id), Json::uint(left)]));
            edges.push(Json::Array(vec![Json::uint(r.id), Json::uint(right)]));
        } else {
            leaves.push(Json::Object(vec![
                ("id".into(), Json::uint(r.id)),
                ("parent".into(), node.parent.map_or(Json::Null, Json::uint)),
                ("depth".into(), Json::uint(r.depth)),
                ("lower".into(), Json::floats(&r.lower)),
                ("upper".into(), Json::floats(&r.upper)),
                ("mass".into(), Json::Float(r.mass)),
                ("density".into(), Json::Float(r.density)),
            ]));
        }
    }
    Json::Object(vec![
        ("config".into(), config_json(pd.config())),
        (
            "domain".into(),
            Json::Object(vec![
                ("lower".into(), Json::floats(&root.lower)),
                ("upper".into(), Json::floats(&root.upper)),
            ]),
        ),
        ("internal".into(), Json::Array(internal)),
        ("edges".into(), Json::Array(edges)),
        ("leaves".into(), Json::Array(leaves)),
    ])
}

/// Rebuilds an estimate from [`partition_json`] output by replaying the
/// recorded splits in creation order and restoring leaf masses.
pub fn read_partition(text: &str) -> Result<PiecewiseDensity> {
    let doc: Value = serde_json::from_str(text)?;
    let config = config_from_json(get(&doc, "config")?)?;
    let domain = get(&doc, "domain")?;
    let lower = f64_array_field(domain, "lower", "domain.lower")?;
    let upper = f64_array_field(domain, "upper", "domain.upper")?;
    let mut tree = PartitionTree::new(lower, upper)
        .map_err(|e| JsonIoError::Inconsistent(e.to_string()))?;

    let mut splits = Vec::new();
    for entry in as_array(get(&doc, "internal")?, "internal")? {
        splits.push((
            usize_field_at(entry, "id", "internal.id")?,
            usize_field_at(entry, "dim", "internal.dim")?,
            f64_field_at(entry, "at", "internal.at")?,
        ));
    }
    splits.sort_by_key(|&(id, _, _)| id);
    for (id, dim, at) in splits {
        tree.split_leaf(id, dim, at)
            .map_err(|e| JsonIoError::Inconsistent(format!("replaying split of node {id}: {e}")))?;
    }
    for entry in as_array(get(&doc, "leaves")?, "leaves")? {
        let id = usize_field_at(entry, "id", "leaves.id")?;
        let mass = f64_field_at(entry, "mass", "leaves.mass")?;
        tree.set_leaf_mass(id, mass)
            .map_err(|e| JsonIoError::Inconsistent(format!("restoring mass of leaf {id}: {e}")))?;
    }
    PiecewiseDensity::from_tree(tree, config).map_err(|e| JsonIoError::Inconsistent(e.to_string()))
}

/// Serializes a sub-level tree with its branch decomposition. `trim` echoes
/// the number of trimmed levels when the tree came from a trimmed estimate.
pub fn sltree_json(t: &SubLevelTree, dec: &BranchDecomposition, trim: Option<usize>) -> Json {
    let mut ids: Vec<usize> = t.ids().collect();
    ids.sort_unstable();
    let parents: Vec<Json> = ids
        .iter()
        .map(|&id| {
            let p = t.parent(id).expect("listed id");
            Json::Array(vec![Json::uint(id), p.map_or(Json::Null, Json::uint)])
        })
        .collect();
    let colors: Vec<Json> = ids
        .iter()
        .map(|&id| {
            let c = t.color(id).expect("listed id");
            Json::Array(vec![Json::uint(id), Json::Float(c)])
        })
        .collect();
    let branches: Vec<Json> = dec
        .branches
        .iter()
        .map(|b| {
            Json::Object(vec![
                ("leaf".into(), Json::uint(b.leaf)),
                ("birth".into(), Json::Float(b.birth)),
                ("persistence".into(), Json::Float(b.persistence)),
                ("members".into(), Json::uints(&b.members)),
            ])
        })
        .collect();
    Json::Object(vec![
        ("root".into(), Json::uint(t.root())),
        ("parents".into(), Json::Array(parents)),
        ("colors".into(), Json::Array(colors)),
        ("branches".into(), Json::Array(branches)),
        ("unassigned".into(), Json::uints(&dec.unassigned)),
        ("snapshot_step".into(), Json::uint(dec.snapshot_step)),
        ("min_persistence".into(), Json::Float(dec.min_persistence)),
        ("trim".into(), trim.map_or(Json::Null, Json::uint)),
    ])
}

/// Serializes a community detection result: per-vertex assignment (`null`
/// marks transitional vertices), communities with cohesion, and each
/// transitional vertex's edge counts into the communities it bridges.
pub fn communities_json(res: &CommunityResult, net: &Network) -> Json {
    let assignment: Vec<Json> = res
        .assignment
        .iter()
        .map(|a| a.map_or(Json::Null, Json::uint))
        .collect();
    let communities: Vec<Json> = res
        .communities
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut fields = vec![
                ("id".into(), Json::uint(i)),
                ("cohesion".into(), Json::Float(c.cohesion)),
                ("vertices".into(), Json::uints(&c.vertices)),
            ];
            if net.labels().is_some() {
                let names: Vec<Json> = c
                    .vertices
                    .iter()
                    .map(|&v| Json::Str(net.label(v).unwrap_or_default().to_string()))
                    .collect();
                fields.push(("labels".into(), Json::Array(names)));
            }
            Json::Object(fields)
        })
        .collect();
    let transitional: Vec<Json> = res
        .transitional
        .iter()
        .map(|&v| {
            let mut counts = vec![0usize; res.communities.len()];
            for &u in net.neighbors(v) {
                if let Some(c) = res.assignment[u] {
                    counts[c] += 1;
                }
            }
            let cross: Vec<Json> = counts
                .iter()
                .enumerate()
                .filter(|&(_, &n)| n > 0)
                .map(|(c, &n)| Json::Array(vec![Json::uint(c), Json::uint(n)]))
                .collect();
            let mut fields = vec![
                ("vertex".into(), Json::uint(v)),
                ("cross_edges".into(), Json::Array(cross)),
            ];
            if let Some(name) = net.label(v) {
                fields.push(("label".into(), Json::Str(name.to_string())));
            }
            Json::Object(fields)
        })
        .collect();
    Json::Object(vec![
        ("assignment".into(), Json::Array(assignment)),
        ("communities".into(), Json::Array(communities)),
        ("transitional".into(), Json::Array(transitional)),
        ("eigenvalues".into(), Json::floats(&res.eigenvalues)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use denspart::estimator::{estimate_density, EstimatorConfig};
    use denspart::geometry::{unit_region, PointSet};

    #[test]
    fn writer_sorts_keys_and_pins_float_format() {
        let v = Json::Object(vec![
            ("zeta".into(), Json::Float(0.25)),
            ("alpha".into(), Json::Int(3)),
        ]);
        assert_eq!(v.render(), "{\n  \"alpha\": 3,\n  \"zeta\": 2.5000000000000000e-1\n}\n");
    }

    #[test]
    fn writer_escapes_strings() {
        let v = Json::Str("a\"b\\c\nd".into());
        assert_eq!(v.render(), "\"a\\\"b\\\\c\\nd\"\n");
    }

    #[test]
    fn scalar_arrays_render_inline() {
        let v = Json::floats(&[1.0, 0.5]);
        assert_eq!(v.render(), "[1.0000000000000000e0, 5.0000000000000000e-1]\n");
    }

    fn small_estimate() -> crate::jsonio::Result<PiecewiseDensity> {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = (i as f64 + 0.5) / 200.0;
                vec![t * t, ((i * 7) % 200) as f64 / 200.0]
            })
            .collect();
        let points = PointSet::from_rows(&rows, unit_region(2)).unwrap();
        let config = EstimatorConfig { max_depth: 6, ..EstimatorConfig::default() };
        Ok(estimate_density(&points, &config).unwrap())
    }

    #[test]
    fn partition_round_trip_is_byte_identical() {
        let pd = small_estimate().unwrap();
        let first = partition_json(&pd).render();
        let reread = read_partition(&first).unwrap();
        let second = partition_json(&reread).render();
        assert!(pd.tree().len() > 1, "estimate should have split at least once");
        assert_eq!(first, second);
    }

    #[test]
    fn read_partition_names_the_missing_field() {
        let err = read_partition("{\"config\": {\"bins\": 3}}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("schema error: missing field `"), "unexpected message: {msg}");
        let config_keys = ["alpha", "chi_significance", "z_significance", "subsample", "max_depth", "seed"];
        assert!(config_keys.iter().any(|k| msg.contains(k)), "unexpected message: {msg}");
    }

    #[test]
    fn read_partition_rejects_non_json() {
        assert!(matches!(read_partition("not json"), Err(JsonIoError::Parse(_))));
    }
}
