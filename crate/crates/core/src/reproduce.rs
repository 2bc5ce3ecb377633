//! Reproduction runs for the named constructions: each runs its pipeline and
//! checks the expected outcomes, returning the numbers and the checks together.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use serde::Serialize;
use serde_json::json;

use crate::corpus;
use crate::criteria::{self, DEFAULT_SLACK};
use crate::embedding::{build_embedding, ql_bijection, strictly_decreasing_tail, Source};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, Status};
use crate::profiles::{chi, dims};
use crate::realization::{realize, to_f64};

/// Registry of reproducible examples.
pub const EXAMPLES: [&str; 5] = ["Example1", "Example2", "EX", "PAB", "ExUD"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A table destined for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reproduction {
    pub id: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Reproduction {
    fn new(id: &'static str, checks: Vec<Check>, results: serde_json::Value, tables: Vec<Table>) -> Self {
        let status = if checks.iter().all(|c| c.passed) { Status::Ok } else { Status::Fails };
        Reproduction { id, status, checks, results, tables }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Table {
    Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows }
}

/// Resolves an id case-insensitively against [`EXAMPLES`].
pub fn resolve(id: &str) -> Result<&'static str> {
    EXAMPLES
        .iter()
        .copied()
        .find(|e| e.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::UnknownExample(format!("{id} (known: {})", EXAMPLES.join(", "))))
}

pub fn reproduce(id: &str) -> Result<Reproduction> {
    match resolve(id)? {
        "Example1" => example1(),
        "Example2" => example2(),
        "EX" => ex(),
        "PAB" => pab(),
        _ => ex_ud(),
    }
}

/// Cantor set against the three-piece set of the same dimension: `χ = 0`, so QL-equivalent.
fn example1() -> Result<Reproduction> {
    let a = corpus::cantor();
    let b = corpus::falconer_marsh();
    let depth = 2000;
    let est = chi(&a.spec, &b.spec, depth, 0.5)?;
    let ql = criteria::ql_equivalent(&a.spec, &b.spec, depth, DEFAULT_SLACK)?;
    let alpha_a = a.spec.alpha(depth)?;
    let alpha_b = b.spec.alpha(depth)?;
    let checks = vec![
        check("chi_zero", est.estimate <= 1e-12, format!("chi = {:e}", est.estimate)),
        check("ql_equivalent_holds", ql.holds(), format!("{:?}, last-decade sup |T - 1| = {:e}", ql.verdict, ql.value)),
    ];
    let results = json!({
        "depth": depth,
        "chi": est,
        "alpha": { a.name: alpha_a, b.name: alpha_b },
        "ql_equivalent": ql,
    });
    Ok(Reproduction::new("Example1", checks, results, vec![]))
}

/// Binary and ternary sets with ratio 1/5 (and the perfect-square mixture).
fn example2() -> Result<Reproduction> {
    let bin = corpus::example2_binary();
    let ter = corpus::example2_ternary();
    let sq = corpus::example2_squares();
    let alt = corpus::example2_alternating();
    let mut checks = Vec::new();

    let mut ud = Vec::new();
    for n in [&bin, &ter, &sq, &alt] {
        let v = criteria::ud_sufficient(&n.spec, 1, 400, DEFAULT_SLACK)?;
        checks.push(check(&format!("ud_sufficient_{}", n.name), v.holds(), format!("sup = {}", v.value)));
        ud.push(json!({ "spec": n.name, "verdict": v }));
    }

    let grid = criteria::default_r0_grid(&bin.spec, &ter.spec);
    let embed = criteria::embed_condition(&bin.spec, &ter.spec, &grid, 200, DEFAULT_SLACK)?;
    let expected = 2f64.ln() / 3f64.ln();
    checks.push(check(
        "embed_condition_binary_into_ternary",
        embed.holds() && (embed.value - expected).abs() <= 1e-9,
        format!("sup = {} (log2/log3 = {expected})", embed.value),
    ));
    let reverse = criteria::embed_condition(&ter.spec, &bin.spec, &grid, 200, DEFAULT_SLACK)?;
    checks.push(check("embed_condition_ternary_into_binary_fails", reverse.fails(), format!("sup = {}", reverse.value)));

    let eta = BigRational::new(BigInt::one(), BigInt::from(5));
    let levels = 6;
    let src = realize(&bin.spec, bin.placement.clone(), levels)?;
    let tgt = realize(&ter.spec, ter.placement.clone(), levels + 6)?;
    let map = build_embedding(Source::Moran(&src), &tgt, &eta, levels)?;
    checks.push(check(
        "embedding_sandwich",
        map.stats.sandwich_violations == 0,
        format!("L = {}, {} pairs, {} sandwich violations", map.stats.bilipschitz, map.stats.pairs, map.stats.sandwich_violations),
    ));

    let ql_yes = criteria::ql_equivalent(&sq.spec, &bin.spec, 10_000, DEFAULT_SLACK)?;
    let ql_no = criteria::ql_equivalent(&bin.spec, &ter.spec, 10_000, DEFAULT_SLACK)?;
    checks.push(check("ql_squares_binary_holds", ql_yes.holds(), format!("last decade {}", ql_yes.value)));
    checks.push(check("ql_binary_ternary_fails", ql_no.fails(), format!("last decade {}", ql_no.value)));

    let q_eta = BigRational::new(BigInt::one(), BigInt::from(6));
    let bij = ql_bijection((&sq.spec, &sq.placement), (&bin.spec, &bin.placement), &q_eta, 12, 200, 0)?;
    let bins: Vec<f64> = bij.map.stats.deviation_bins().iter().map(|b| b.1).collect();
    checks.push(check(
        "ql_bijection_deviation_decreasing",
        strictly_decreasing_tail(&bins, 3),
        format!("deviation bins {bins:?}"),
    ));

    let rows = bij
        .map
        .stats
        .levels
        .iter()
        .map(|l| vec![l.level.to_string(), l.pairs.to_string(), fmt_f64(l.deviation)])
        .collect();
    let results = json!({
        "ud_sufficient": ud,
        "embed_condition": embed,
        "embed_condition_reverse": reverse,
        "embedding": { "eta": "1/5", "levels": levels, "counts": map.counts, "stats": map.stats },
        "ql_equivalent": { "squares_vs_binary": ql_yes, "binary_vs_ternary": ql_no },
        "ql_bijection": { "eta": "1/6", "levels": 12, "seed": 0, "stats": bij.map.stats },
    });
    Ok(Reproduction::new("Example2", checks, results, vec![table("ql_deviation", &["level", "pairs", "deviation"], rows)]))
}

/// `n ≡ 2`, `c_k = (k+1)/(2(k+2))`: dimension 1 while the total length `2/(K+2)` vanishes.
fn ex() -> Result<Reproduction> {
    let e = corpus::ex();
    let d = dims(&e.spec, 1000, 0.5)?;
    let mut rows = Vec::new();
    let mut length_ok = true;
    let mut at_98 = None;
    for k in [1usize, 2, 5, 10, 25, 50, 98] {
        let r = e.spec.r_exact(k)?.ok_or_else(|| Error::InexactGeometry("EX ratios are rational".into()))?;
        let length = r * BigRational::from_integer(BigInt::from(2u8).pow(k as u32));
        let formula = BigRational::new(BigInt::from(2), BigInt::from(k + 2));
        length_ok &= length == formula;
        if k == 98 {
            at_98 = Some(length.clone());
        }
        rows.push(vec![k.to_string(), length.to_string(), fmt_f64(to_f64(&length))]);
    }
    let at_98 = at_98.expect("row present");
    let small = at_98 <= BigRational::new(BigInt::one(), BigInt::from(50));
    let checks = vec![
        check("exact_limit_one", d.exact_limit == Some(1.0), format!("{:?}", d.exact_limit)),
        check("window_alpha", d.dim_h_window >= 0.98, format!("min alpha over levels {:?} = {}", d.window, d.dim_h_window)),
        check("length_formula", length_ok, "total length equals 2/(k+2) exactly".into()),
        check("length_at_98", small, format!("length = {at_98}")),
    ];
    let results = json!({ "dims": d, "length_at_98": at_98.to_string() });
    Ok(Reproduction::new("EX", checks, results, vec![table("length", &["k", "length_exact", "length"], rows)]))
}

/// Block branching 3 / 5 with ratio 1/6: measure-ratio table and the certificate.
fn pab() -> Result<Reproduction> {
    let p = corpus::pab();
    let d = dims(&p.spec, 1000, 0.5)?;
    let limit = 5f64.ln() / 6f64.ln();
    let real = realize(&p.spec, p.placement.clone(), 42)?;
    let cert = criteria::non_embeddability_certificate(4f64.ln() / 6f64.ln(), &real, 3)?;
    let table_ok = cert.rows.len() == 3
        && cert.rows.iter().all(|r| r.nu_ratio_exact && r.nu_ratio == 3f64.powi(r.m as i32));
    let checks = vec![
        check("exact_limit", d.exact_limit.is_some_and(|v| (v - limit).abs() <= 1e-12), format!("{:?}", d.exact_limit)),
        check(
            "window_estimate",
            (d.dim_h_window - limit).abs() <= 0.02 && (d.dim_p_window - limit).abs() <= 0.02,
            format!("[{}, {}] over levels {:?}", d.dim_h_window, d.dim_p_window, d.window),
        ),
        check("nu_ratio_table", table_ok, format!("{:?}", cert.rows.iter().map(|r| r.nu_ratio).collect::<Vec<_>>())),
        check("certificate_holds", cert.verdict.holds(), format!("slope = {}", cert.verdict.value)),
    ];
    let rows = cert
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.k_m.to_string(),
                r.t_m.to_string(),
                fmt_f64(r.nu_ratio),
                r.nu_ratio_exact.to_string(),
                fmt_f64(r.regular_ratio),
                fmt_f64(r.log_gap),
            ]
        })
        .collect();
    let results = json!({ "dims": d, "certificate": cert });
    Ok(Reproduction::new(
        "PAB",
        checks,
        results,
        vec![table("measure_ratio", &["m", "k_m", "t_m", "nu_ratio", "exact", "regular_ratio", "log_gap"], rows)],
    ))
}

/// `n ≡ 3` with blocks of near-touching ratios: both UD diagnostics fail.
fn ex_ud() -> Result<Reproduction> {
    let e = corpus::ex_ud();
    let depth = 125_050;
    let k0 = 50;
    let d = dims(&e.spec, 1000, 0.5)?;
    let suff = criteria::ud_sufficient(&e.spec, k0, depth, DEFAULT_SLACK)?;
    let real = realize(&e.spec, e.placement.clone(), 8)?;
    let direct = criteria::ud_direct(&real, depth)?;
    let mut rows = Vec::new();
    let mut trace_ok = true;
    for m in [5u64, 10, 50] {
        let level = (m * m * m + 1) as f64;
        let measured = direct.trace.iter().find(|t| t.0 == level).map(|t| t.1);
        let formula = 1.0 / (4.0 * m as f64);
        let ok = measured.is_some_and(|v| (v - formula).abs() <= 1e-12);
        trace_ok &= ok;
        rows.push(vec![m.to_string(), level.to_string(), measured.map_or("missing".into(), fmt_f64), fmt_f64(formula)]);
    }
    let limit = 3f64.ln() / 6f64.ln();
    let checks = vec![
        check(
            "dimension",
            (d.dim_h_window - limit).abs() <= 0.02 && (d.dim_p_window - limit).abs() <= 0.02,
            format!("[{}, {}]", d.dim_h_window, d.dim_p_window),
        ),
        check("ud_sufficient_fails", suff.fails() && suff.value >= 0.99, format!("sup = {}", suff.value)),
        check("ud_direct_fails", direct.fails(), format!("inf = {}", direct.value)),
        check("gap_trace", trace_ok, "record lows at the block starts equal 1/(4m)".into()),
    ];
    let results = json!({ "dims": d, "ud_sufficient": suff, "ud_direct": direct });
    Ok(Reproduction::new("ExUD", checks, results, vec![table("gap_trace", &["m", "level", "gap", "formula"], rows)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_ids_are_rejected() {
        assert!(matches!(reproduce("nope"), Err(Error::UnknownExample(_))));
        assert_eq!(resolve("pab").unwrap(), "PAB");
    }
}
