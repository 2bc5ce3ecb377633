//! Spec files (TOML), reports (JSON) and tables (CSV).
//!
//! A spec file holds one construction:
//!
//! ```toml
//! name = "cantor"
//! dimension = 1            # optional, default 1
//! diameter = "1"           # optional, default 1
//! placement = "endpoints"  # "uniform" | "endpoints" | { kind = "offsets", per_level = [["0", "2/3"]] }
//!
//! [branching]
//! kind = "constant"
//! value = 2
//!
//! [ratios]
//! kind = "constant"
//! value = "1/3"
//! ```
//!
//! Rule kinds: `constant {value}`, `periodic {values}`, `prefix {values, tail}`,
//! `block {k_m, t_m, in_block, off_block}` and `formula {value}` (an expression in `k`).
//! Values are integers, decimals or whitelisted expressions given as strings;
//! decimals are read exactly from their written form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::realization::Placement;
use crate::scalar::Scalar;
use crate::spec::{validate, BlockRule, MoranSpec, RawSpec, SequenceRule};

/// A spec file after parsing and validation.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub name: String,
    pub path: Option<PathBuf>,
    pub spec: MoranSpec,
    pub placement: Placement,
    /// Hex SHA-256 of the file bytes.
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("key `{key}`: {msg}"))
}

fn expr_of(v: &Value, key: &str) -> Result<Expr> {
    let src = match v {
        Value::Integer(i) => i.to_string(),
        // the shortest round-trip form is the written decimal
        Value::Float(f) => format!("{f}"),
        Value::String(s) => s.clone(),
        other => return Err(parse_err(key, format!("expected a number or an expression string, got {}", other.type_str()))),
    };
    Expr::parse(&src).map_err(|e| parse_err(key, e))
}

fn table<'a>(v: &'a Value, key: &str) -> Result<&'a toml::Table> {
    v.as_table().ok_or_else(|| parse_err(key, format!("expected a table, got {}", v.type_str())))
}

fn field<'a>(t: &'a toml::Table, key: &str, name: &str) -> Result<&'a Value> {
    t.get(name).ok_or_else(|| parse_err(&format!("{key}.{name}"), "missing"))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_err(key, format!("expected an array, got {}", v.type_str())))
}

fn rule_of(v: &Value, key: &str) -> Result<SequenceRule> {
    let t = table(v, key)?;
    let kind = field(t, key, "kind")?
        .as_str()
        .ok_or_else(|| parse_err(&format!("{key}.kind"), "expected a string"))?;
    let values = |name: &str| -> Result<Vec<Expr>> {
        let k = format!("{key}.{name}");
        array(field(t, key, name)?, &k)?
            .iter()
            .enumerate()
            .map(|(i, x)| expr_of(x, &format!("{k}[{i}]")))
            .collect()
    };
    let one = |name: &str| -> Result<Expr> { expr_of(field(t, key, name)?, &format!("{key}.{name}")) };
    Ok(match kind {
        "constant" => SequenceRule::Constant(one("value")?),
        "formula" => SequenceRule::Formula(one("value")?),
        "periodic" => SequenceRule::Periodic(values("values")?),
        "prefix" => SequenceRule::Prefix {
            values: values("values")?,
            tail: Box::new(rule_of(field(t, key, "tail")?, &format!("{key}.tail"))?),
        },
        "block" => SequenceRule::Block(BlockRule {
            k_m: one("k_m")?,
            t_m: one("t_m")?,
            in_block: one("in_block")?,
            off_block: one("off_block")?,
        }),
        other => return Err(parse_err(&format!("{key}.kind"), format!("unknown rule kind `{other}`"))),
    })
}

fn rational_of(v: &Value, key: &str) -> Result<BigRational> {
    match expr_of(v, key)?.eval(&[]).map_err(|e| parse_err(key, e))? {
        Scalar::Exact(q) => Ok(q),
        Scalar::Real(_) => Err(parse_err(key, "offsets must be rational")),
    }
}

fn placement_of(v: Option<&Value>) -> Result<Placement> {
    let Some(v) = v else { return Ok(Placement::Uniform) };
    match v {
        Value::String(s) => match s.as_str() {
            "uniform" => Ok(Placement::Uniform),
            "endpoints" => Ok(Placement::Endpoints),
            other => Err(parse_err("placement", format!("unknown placement `{other}`"))),
        },
        Value::Table(t) => {
            let kind = field(t, "placement", "kind")?.as_str().unwrap_or_default();
            if kind != "offsets" {
                return Err(parse_err("placement.kind", format!("unknown placement kind `{kind}`")));
            }
            let rows = array(field(t, "placement", "per_level")?, "placement.per_level")?;
            let mut out = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let k = format!("placement.per_level[{i}]");
                out.push(array(row, &k)?.iter().enumerate().map(|(j, x)| rational_of(x, &format!("{k}[{j}]"))).collect::<Result<_>>()?);
            }
            Ok(Placement::Offsets(out))
        }
        other => Err(parse_err("placement", format!("expected a string or a table, got {}", other.type_str()))),
    }
}

/// Parses and validates a spec document.
pub fn parse_spec(text: &str, fallback_name: &str) -> Result<LoadedSpec> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for key in doc.keys() {
        if !matches!(key.as_str(), "name" | "dimension" | "diameter" | "placement" | "branching" | "ratios") {
            return Err(parse_err(key, "unknown key"));
        }
    }
    let name = match doc.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(parse_err("name", "expected a string")),
        None => fallback_name.to_string(),
    };
    let dimension = match doc.get("dimension") {
        None => 1,
        Some(Value::Integer(d @ (1 | 2))) => *d as u8,
        Some(_) => return Err(parse_err("dimension", "expected 1 or 2")),
    };
    let diameter = match doc.get("diameter") {
        None => Scalar::one(),
        Some(v) => expr_of(v, "diameter")?.eval(&[]).map_err(|e| parse_err("diameter", e))?,
    };
    let branching = rule_of(doc.get("branching").ok_or_else(|| parse_err("branching", "missing"))?, "branching")?;
    let ratios = rule_of(doc.get("ratios").ok_or_else(|| parse_err("ratios", "missing"))?, "ratios")?;
    let placement = placement_of(doc.get("placement"))?;
    let spec = validate(RawSpec { dimension, diameter, branching, ratios })?;
    Ok(LoadedSpec { name, path: None, spec, placement, digest: sha256_hex(text.as_bytes()) })
}

pub fn load_spec(path: &Path) -> Result<LoadedSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    let mut loaded = parse_spec(&text, stem).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    loaded.path = Some(path.to_path_buf());
    Ok(loaded)
}

fn quote(e: &Expr) -> String {
    format!("\"{}\"", e.source())
}

fn rule_inline(r: &SequenceRule) -> String {
    let list = |vs: &[Expr]| vs.iter().map(quote).collect::<Vec<_>>().join(", ");
    match r {
        SequenceRule::Constant(e) => format!("{{ kind = \"constant\", value = {} }}", quote(e)),
        SequenceRule::Formula(e) => format!("{{ kind = \"formula\", value = {} }}", quote(e)),
        SequenceRule::Periodic(vs) => format!("{{ kind = \"periodic\", values = [{}] }}", list(vs)),
        SequenceRule::Prefix { values, tail } => {
            format!("{{ kind = \"prefix\", values = [{}], tail = {} }}", list(values), rule_inline(tail))
        }
        SequenceRule::Block(b) => format!(
            "{{ kind = \"block\", k_m = {}, t_m = {}, in_block = {}, off_block = {} }}",
            quote(&b.k_m),
            quote(&b.t_m),
            quote(&b.in_block),
            quote(&b.off_block)
        ),
    }
}

/// Writes a spec document that [`parse_spec`] reads back to the same recipe.
pub fn spec_to_toml(name: &str, spec: &MoranSpec, placement: &Placement) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "name = \"{name}\"");
    let _ = writeln!(s, "dimension = {}", spec.dimension);
    let diameter = match &spec.diameter {
        Scalar::Exact(q) => Expr::constant(q.clone()).source().to_string(),
        Scalar::Real(x) => format!("{x}"),
    };
    let _ = writeln!(s, "diameter = \"{diameter}\"");
    match placement {
        Placement::Offsets(rows) => {
            let rows: Vec<String> = rows
                .iter()
                .map(|r| format!("[{}]", r.iter().map(|q| quote(&Expr::constant(q.clone()))).collect::<Vec<_>>().join(", ")))
                .collect();
            let _ = writeln!(s, "placement = {{ kind = \"offsets\", per_level = [{}] }}", rows.join(", "));
        }
        p => {
            let _ = writeln!(s, "placement = \"{}\"", p.name());
        }
    }
    let _ = writeln!(s, "branching = {}", rule_inline(&spec.branching));
    let _ = writeln!(s, "ratios = {}", rule_inline(&spec.ratios));
    s
}

// ------------------------------------------------------------------ reports

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub path: Option<String>,
    pub sha256: String,
}

impl From<&LoadedSpec> for InputDigest {
    fn from(s: &LoadedSpec) -> Self {
        InputDigest { name: s.name.clone(), path: s.path.as_ref().map(|p| p.display().to_string()), sha256: s.digest.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Fails,
    Inconclusive,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Error => 1,
            Status::Fails => 3,
            Status::Inconclusive => 4,
        }
    }

    /// The worse of two statuses.
    pub fn combine(self, other: Status) -> Status {
        let rank = |s: Status| match s {
            Status::Ok => 0,
            Status::Inconclusive => 1,
            Status::Fails => 2,
            Status::Error => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// A self-contained run record: the configuration echo, input digests, results and artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub status: Status,
    pub results: serde_json::Value,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportError {
    pub kind: String,
    pub message: String,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Writes a CSV table with the given header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip text for a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn corpus_round_trips() {
        for n in corpus::all() {
            let text = spec_to_toml(n.name, &n.spec, &n.placement);
            let back = parse_spec(&text, "x").unwrap();
            assert_eq!(back.name, n.name);
            assert_eq!(back.spec.branching.describe(), n.spec.branching.describe(), "{}", n.name);
            assert_eq!(back.spec.ratios.describe(), n.spec.ratios.describe(), "{}", n.name);
            for k in 1..=40 {
                assert_eq!(back.spec.n(k).unwrap(), n.spec.n(k).unwrap());
                assert_eq!(back.spec.c(k).unwrap().to_f64(), n.spec.c(k).unwrap().to_f64());
            }
            assert_eq!(back.placement, n.placement);
        }
    }

    #[test]
    fn decimals_are_exact() {
        let s = parse_spec("[branching]\nkind = \"constant\"\nvalue = 2\n[ratios]\nkind = \"constant\"\nvalue = 0.2\n", "d").unwrap();
        assert_eq!(s.spec.c(1).unwrap(), Scalar::ratio(1, 5));
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_spec("[branching]\nkind = \"constant\"\n[ratios]\nkind = \"constant\"\nvalue = 0.2\n", "d").unwrap_err();
        assert!(e.to_string().contains("branching.value"), "{e}");
        let e = parse_spec("branching = 3\n", "d").unwrap_err();
        assert!(e.to_string().contains("branching"), "{e}");
        let e = parse_spec("[branching\n", "d").unwrap_err();
        assert!(matches!(e, Error::Parse(_)));
        assert!(e.to_string().contains("line"), "{e}");
    }
}
