//! Command-line front end: argument parsing, dispatch, and report/CSV/SVG emission.
//!
//! Every run writes `<prefix>_report.json` plus its artifacts into the output
//! directory and prints the report to stdout. Exit codes: 0 success or holds,
//! 1 error, 2 usage, 3 fails at depth, 4 inconclusive.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::json;

use crate::corpus;
use crate::criteria::{self, CriterionVerdict, Outcome, ProbeMode, DEFAULT_SLACK};
use crate::embedding::{build_embedding, distortion, ql_bijection, strictly_decreasing_tail, PairRecord, Source, EXHAUSTIVE_PAIR_LIMIT, PAIRS_PER_LEVEL};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_spec, parse_spec, spec_to_toml, write_csv, InputDigest, LoadedSpec, Report, ReportError, Status};
use crate::profiles::{alpha_profile, chi, covering_dimension, covering_profile, dims, Profile};
use crate::realization::{realize, to_f64};
use crate::reproduce;
use crate::spec::SequenceRule;
use crate::svg::{render_plot, render_realization, Series};

/// Prefix selecting a built-in construction instead of a file, e.g. `--spec corpus:cantor`.
pub const CORPUS_PREFIX: &str = "corpus:";

/// Counts at the level-`k` scale are taken on a realization this many levels deeper.
const COUNT_MARGIN: usize = 2;

#[derive(Parser, Clone, Debug, Serialize)]
#[command(name = "moranlab", version, about = "Dimensions, scale profiles, embedding and quasi-Lipschitz criteria for Moran sets")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Common {
    /// Spec file (TOML) or `corpus:<name>`; repeat for two-spec commands.
    #[arg(long = "spec", value_name = "FILE", global = true)]
    pub specs: Vec<String>,
    /// Depth K (levels); each command has its own default.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Output directory.
    #[arg(long, env = "MORANLAB_OUT", default_value = "moranlab-out", global = true)]
    pub out: PathBuf,
    /// Seed for every sampled computation.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Command {
    /// Parse and validate spec files.
    Validate,
    /// Dimension window estimates and closed-form limits.
    Dims {
        /// Window `[ceil(f K), K]` for the window estimates.
        #[arg(long, default_value_t = 0.5)]
        window_fraction: f64,
        /// Also fit the covering dimension on a realization of this depth.
        #[arg(long)]
        covering_depth: Option<usize>,
    },
    /// Alpha profile with covering and packing counts at the level scales.
    Profile,
    /// The chi pseudo-distance between two specs.
    Chi {
        #[arg(long, default_value_t = 0.5)]
        tail_fraction: f64,
    },
    /// Uniform disconnectedness, embedding, QL-equivalence, homogeneity and certificate checks.
    Criteria {
        /// Uniform disconnectedness: the sufficient condition and the direct gap trace.
        #[arg(long)]
        ud: bool,
        /// Embeddability of the first spec into the second.
        #[arg(long)]
        embed: bool,
        /// Quasi-Lipschitz equivalence of two specs.
        #[arg(long)]
        ql: bool,
        /// Sampled ball-measure homogeneity.
        #[arg(long)]
        homogeneity: bool,
        /// Run the non-embeddability certificate for this regular exponent.
        #[arg(long, value_name = "S")]
        certificate: Option<f64>,
        /// Blocks used by the certificate.
        #[arg(long, default_value_t = 4)]
        blocks: i64,
        /// First level of the uniform-disconnectedness window.
        #[arg(long, default_value_t = 1)]
        k0: usize,
        /// Margin below the threshold required for a holding verdict.
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        /// Random balls sampled by the homogeneity check.
        #[arg(long, default_value_t = 500)]
        probes: usize,
    },
    /// Greedy ball-selection embedding of the first spec into the second.
    Embed {
        #[arg(long, default_value = "1/5")]
        eta: String,
        /// Extra target levels beyond the embedding depth.
        #[arg(long, default_value_t = 6)]
        extra: usize,
        /// Pair budget before the distortion is sampled instead of exhaustive.
        #[arg(long, default_value_t = EXHAUSTIVE_PAIR_LIMIT)]
        pairs: usize,
    },
    /// Quasi-Lipschitz bijection between two specs on the quadratic schedule.
    Ql {
        #[arg(long, default_value = "1/6")]
        eta: String,
        /// Sampled pairs per splitting level.
        #[arg(long, default_value_t = PAIRS_PER_LEVEL)]
        pairs: usize,
    },
    /// SVG drawing of the first spec's realization and its alpha profile.
    Render,
    /// Run a named reproduction.
    Reproduce {
        /// One of Example1, Example2, EX, PAB, ExUD.
        example: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Dims { .. } => "dims",
            Command::Profile => "profile",
            Command::Chi { .. } => "chi",
            Command::Criteria { .. } => "criteria",
            Command::Embed { .. } => "embed",
            Command::Ql { .. } => "ql",
            Command::Render => "render",
            Command::Reproduce { .. } => "reproduce",
        }
    }

    fn default_depth(&self) -> usize {
        match self {
            Command::Validate => 10,
            Command::Dims { .. } | Command::Chi { .. } | Command::Criteria { .. } => 1000,
            Command::Profile => 16,
            Command::Embed { .. } | Command::Render => 6,
            Command::Ql { .. } => 12,
            Command::Reproduce { .. } => 0,
        }
    }
}

/// Loads a spec from a file or the built-in corpus.
pub fn load(arg: &str) -> Result<LoadedSpec> {
    match arg.strip_prefix(CORPUS_PREFIX) {
        Some(name) => {
            let n = corpus::by_name(name).ok_or_else(|| Error::UnknownExample(format!("no corpus entry {name}")))?;
            parse_spec(&spec_to_toml(n.name, &n.spec, &n.placement), n.name)
        }
        None => load_spec(Path::new(arg)),
    }
}

/// Output of one run before it is written.
struct Outcomes {
    status: Status,
    results: serde_json::Value,
    inputs: Vec<InputDigest>,
}

struct Writer<'a> {
    dir: &'a Path,
    prefix: String,
    artifacts: Vec<String>,
}

impl Writer<'_> {
    fn name(&self, stem: &str, ext: &str) -> String {
        format!("{}_{}.{}", self.prefix, sanitize(stem), ext)
    }

    fn csv(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let name = self.name(stem, "csv");
        write_csv(&self.dir.join(&name), header, rows)?;
        self.artifacts.push(name);
        Ok(())
    }

    fn text(&mut self, stem: &str, ext: &str, body: &str) -> Result<()> {
        let name = self.name(stem, ext);
        std::fs::write(self.dir.join(&name), body)?;
        self.artifacts.push(name);
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn parse_eta(s: &str) -> Result<BigRational> {
    s.trim().parse::<BigRational>().map_err(|e| Error::Parse(format!("eta: {s:?} is not a rational ({e})")))
}

fn need_specs(specs: &[LoadedSpec], n: usize, command: &str) -> Result<()> {
    if specs.len() < n {
        return Err(Error::PreconditionViolated(format!("{command} needs {n} --spec argument(s), got {}", specs.len())));
    }
    Ok(())
}

fn status_of(v: &CriterionVerdict) -> Status {
    match v.verdict {
        Outcome::HoldsAtDepth => Status::Ok,
        Outcome::FailsAtDepth => Status::Fails,
        Outcome::Inconclusive => Status::Inconclusive,
    }
}

fn trace_rows(v: &CriterionVerdict) -> Vec<Vec<String>> {
    v.trace.iter().map(|&(a, b)| vec![fmt_f64(a), fmt_f64(b)]).collect()
}

fn series(p: &Profile) -> Vec<(f64, f64)> {
    p.upper.iter().zip(&p.values).map(|(&u, &v)| (-u, v)).collect()
}

/// Runs one command; the report is also written to `<out>/<prefix>_report.json`.
pub fn run(config: &RunConfig) -> Report {
    let command = config.command.name();
    let prefix = match &config.command {
        Command::Reproduce { example } => format!("reproduce_{}", reproduce::resolve(example).unwrap_or("unknown")),
        _ => command.to_string(),
    };
    let config_json = serde_json::to_value(config).expect("configs serialize");
    let mut writer = Writer { dir: &config.common.out, prefix, artifacts: Vec::new() };
    let outcome = std::fs::create_dir_all(&config.common.out).map_err(Error::from).and_then(|_| dispatch(config, &mut writer));
    let mut report = match outcome {
        Ok(o) => Report {
            command: command.into(),
            config: config_json,
            inputs: o.inputs,
            status: o.status,
            results: o.results,
            artifacts: Vec::new(),
            error: None,
        },
        Err(e) => Report {
            command: command.into(),
            config: config_json,
            inputs: Vec::new(),
            status: Status::Error,
            results: serde_json::Value::Null,
            artifacts: Vec::new(),
            error: Some(ReportError { kind: e.name().into(), message: e.to_string() }),
        },
    };
    let report_name = writer.name("report", "json");
    writer.artifacts.push(report_name.clone());
    report.artifacts = writer.artifacts;
    // a missing output directory is already reported as the error
    let _ = std::fs::write(config.common.out.join(report_name), report.to_json());
    report
}

fn dispatch(config: &RunConfig, w: &mut Writer<'_>) -> Result<Outcomes> {
    let c = &config.common;
    let specs: Vec<LoadedSpec> = c.specs.iter().map(|s| load(s)).collect::<Result<_>>()?;
    let inputs: Vec<InputDigest> = specs.iter().map(InputDigest::from).collect();
    let depth = c.depth.unwrap_or_else(|| config.command.default_depth());
    let (status, results) = match &config.command {
        Command::Validate => validate(&specs, depth)?,
        Command::Dims { window_fraction, covering_depth } => dims_cmd(&specs, depth, *window_fraction, *covering_depth)?,
        Command::Profile => profile_cmd(&specs, depth, w)?,
        Command::Chi { tail_fraction } => chi_cmd(&specs, depth, *tail_fraction, w)?,
        Command::Criteria { ud, embed, ql, homogeneity, certificate, blocks, k0, slack, probes } => {
            let sel = Selection { ud: *ud, embed: *embed, ql: *ql, homogeneity: *homogeneity, certificate: *certificate };
            criteria_cmd(&specs, depth, sel, *blocks, *k0, *slack, *probes, c.seed, w)?
        }
        Command::Embed { eta, extra, pairs } => embed_cmd(&specs, depth, &parse_eta(eta)?, *extra, *pairs, c.seed, w)?,
        Command::Ql { eta, pairs } => ql_cmd(&specs, depth, &parse_eta(eta)?, *pairs, c.seed, w)?,
        Command::Render => render_cmd(&specs, depth, w)?,
        Command::Reproduce { example } => {
            let r = reproduce::reproduce(example)?;
            for t in &r.tables {
                let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
                w.csv(&t.name, &header, &t.rows)?;
            }
            (r.status, serde_json::to_value(&r).expect("serializes"))
        }
    };
    Ok(Outcomes { status, results, inputs })
}

fn validate(specs: &[LoadedSpec], depth: usize) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 1, "validate")?;
    let out = specs
        .iter()
        .map(|s| {
            let sp = &s.spec;
            Ok(json!({
                "name": s.name,
                "dimension": sp.dimension,
                "diameter": sp.diameter.to_string(),
                "branching": sp.branching.describe(),
                "ratios": sp.ratios.describe(),
                "placement": s.placement.name(),
                "c_star": sp.c_star.to_string(),
                "n": sp.branching_table(depth)?,
                "c": sp.ratio_table(depth)?.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Status::Ok, json!({ "specs": out })))
}

fn dims_cmd(specs: &[LoadedSpec], depth: usize, fraction: f64, covering_depth: Option<usize>) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 1, "dims")?;
    let mut out = Vec::new();
    for s in specs {
        let d = dims(&s.spec, depth, fraction)?;
        let covering = match covering_depth {
            Some(cd) if cd >= 2 => {
                let real = realize(&s.spec, s.placement.clone(), cd + COUNT_MARGIN)?;
                Some(covering_dimension(&real, cd / 2..=cd)?)
            }
            _ => None,
        };
        out.push(json!({ "name": s.name, "depth": depth, "estimate": d, "covering_dimension": covering }));
    }
    Ok((Status::Ok, json!({ "specs": out })))
}

fn profile_cmd(specs: &[LoadedSpec], depth: usize, w: &mut Writer<'_>) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 1, "profile")?;
    let mut out = Vec::new();
    for s in specs {
        let alpha = alpha_profile(&s.spec, depth + 1)?;
        let real = realize(&s.spec, s.placement.clone(), depth + COUNT_MARGIN)?;
        let scales: Vec<BigRational> = (1..=depth)
            .map(|k| s.spec.scale_exact(k)?.ok_or_else(|| Error::InexactGeometry("counts need exact level scales".into())))
            .collect::<Result<_>>()?;
        let (f, counts) = covering_profile(&real, &scales, false)?;
        let mut rows = Vec::new();
        for (k, (r, c)) in (1..=depth).zip(scales.iter().zip(&counts)) {
            let lr = f.upper[k - 1];
            let a = alpha.value_at(lr).unwrap_or(f64::NAN);
            rows.push(vec![k.to_string(), r.to_string(), fmt_f64(a), fmt_f64(f.values[k - 1]), c.covering.to_string(), c.packing.to_string()]);
        }
        w.csv(&s.name, &["k", "r_k", "alpha", "f", "N", "P"], &rows)?;
        let svg = render_plot(
            &format!("{}: alpha and f", s.name),
            "exponent",
            &[Series { label: "alpha", points: series(&alpha) }, Series { label: "f = ln N / -ln r", points: series(&f) }],
        );
        w.text(&s.name, "svg", &svg)?;
        out.push(json!({ "name": s.name, "depth": depth, "levels": rows.len() }));
    }
    Ok((Status::Ok, json!({ "specs": out })))
}

fn chi_cmd(specs: &[LoadedSpec], depth: usize, tail: f64, w: &mut Writer<'_>) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 2, "chi")?;
    let (a, b) = (&specs[0], &specs[1]);
    let est = chi(&a.spec, &b.spec, depth, tail)?;
    let rows: Vec<Vec<String>> = est.tail_trace.iter().map(|t| vec![fmt_f64(t.abs_log_lo), fmt_f64(t.abs_log_hi), fmt_f64(t.sup)]).collect();
    w.csv("trace", &["abs_log_lo", "abs_log_hi", "sup"], &rows)?;
    let pa = alpha_profile(&a.spec, depth)?;
    let pb = alpha_profile(&b.spec, depth)?;
    let svg = render_plot(
        &format!("alpha: {} vs {}", a.name, b.name),
        "alpha",
        &[Series { label: &a.name, points: series(&pa) }, Series { label: &b.name, points: series(&pb) }],
    );
    w.text("alpha", "svg", &svg)?;
    Ok((Status::Ok, json!({ "a": a.name, "b": b.name, "depth": depth, "tail_fraction": tail, "chi": est })))
}

struct Selection {
    ud: bool,
    embed: bool,
    ql: bool,
    homogeneity: bool,
    certificate: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn criteria_cmd(
    specs: &[LoadedSpec],
    depth: usize,
    mut sel: Selection,
    blocks: i64,
    k0: usize,
    slack: f64,
    probes: usize,
    seed: u64,
    w: &mut Writer<'_>,
) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 1, "criteria")?;
    if !(sel.ud || sel.embed || sel.ql || sel.homogeneity || sel.certificate.is_some()) {
        sel.ud = true;
        sel.embed = specs.len() >= 2;
        sel.ql = specs.len() >= 2;
    }
    if (sel.embed || sel.ql) && specs.len() < 2 {
        return Err(Error::PreconditionViolated("--embed and --ql need two --spec arguments".into()));
    }
    let mut status = Status::Ok;
    let mut out = serde_json::Map::new();
    let mut emit = |label: String, v: &CriterionVerdict, w: &mut Writer<'_>| -> Result<serde_json::Value> {
        w.csv(&label, &v.trace_columns, &trace_rows(v))?;
        status = status.combine(status_of(v));
        Ok(serde_json::to_value(v).expect("serializes"))
    };
    if sel.ud {
        let mut ud = Vec::new();
        for s in specs {
            let suff = criteria::ud_sufficient(&s.spec, k0, depth, slack)?;
            let real = realize(&s.spec, s.placement.clone(), 1)?;
            let direct = criteria::ud_direct(&real, depth)?;
            let constants = criteria::ud_constants(&direct, &s.spec);
            ud.push(json!({
                "spec": s.name,
                "ud_sufficient": emit(format!("ud_sufficient_{}", s.name), &suff, w)?,
                "ud_direct": emit(format!("ud_direct_{}", s.name), &direct, w)?,
                "constants": constants.map(|(c, r)| json!({ "C": c, "r_star": r })),
            }));
        }
        out.insert("ud".into(), ud.into());
    }
    if sel.embed {
        let (a, b) = (&specs[0].spec, &specs[1].spec);
        let v = criteria::embed_condition(a, b, &criteria::default_r0_grid(a, b), depth, slack)?;
        out.insert("embed".into(), emit("embed".into(), &v, w)?);
    }
    if sel.ql {
        let v = criteria::ql_equivalent(&specs[0].spec, &specs[1].spec, depth, slack)?;
        out.insert("ql".into(), emit("ql".into(), &v, w)?);
    }
    if sel.homogeneity {
        let mut hs = Vec::new();
        for s in specs {
            let real = realize(&s.spec, s.placement.clone(), depth.min(14))?;
            let h = criteria::check_homogeneity(&real, probes, None, ProbeMode::Random, seed)?;
            if !h.consistent {
                status = status.combine(Status::Inconclusive);
            }
            hs.push(json!({ "spec": s.name, "report": h }));
        }
        out.insert("homogeneity".into(), hs.into());
    }
    if let Some(s) = sel.certificate {
        let t = &specs[0];
        let SequenceRule::Block(rule) = &t.spec.branching else {
            return Err(Error::PreconditionViolated("the certificate needs a block branching rule".into()));
        };
        let k = rule.k_at(blocks)?;
        let real = realize(&t.spec, t.placement.clone(), (rule.t_at(blocks, k)? + 12) as usize)?;
        let cert = criteria::non_embeddability_certificate(s, &real, blocks)?;
        status = status.combine(status_of(&cert.verdict));
        let rows: Vec<Vec<String>> = cert
            .rows
            .iter()
            .map(|r| vec![r.m.to_string(), fmt_f64(r.nu_ratio), r.nu_ratio_exact.to_string(), fmt_f64(r.regular_ratio), fmt_f64(r.log_gap)])
            .collect();
        w.csv("certificate", &["m", "nu_ratio", "exact", "regular_ratio", "log_gap"], &rows)?;
        out.insert("certificate".into(), serde_json::to_value(&cert).expect("serializes"));
    }
    out.insert("depth".into(), depth.into());
    Ok((status, serde_json::Value::Object(out)))
}

fn pair_rows(records: &[PairRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|p| vec![p.level.to_string(), fmt_f64(p.d_source), fmt_f64(p.d_target), fmt_f64(p.log_ratio), p.sandwich_ok.to_string()])
        .collect()
}

const PAIR_HEADER: [&str; 5] = ["level", "d_source", "d_target", "log_ratio", "sandwich_ok"];

fn embed_cmd(
    specs: &[LoadedSpec],
    levels: usize,
    eta: &BigRational,
    extra: usize,
    pairs: usize,
    seed: u64,
    w: &mut Writer<'_>,
) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 2, "embed")?;
    let (a, b) = (&specs[0], &specs[1]);
    let src = realize(&a.spec, a.placement.clone(), levels)?;
    let tgt = realize(&b.spec, b.placement.clone(), levels + extra)?;
    let map = build_embedding(Source::Moran(&src), &tgt, eta, levels)?;
    let (records, stats) = distortion(&map, pairs, seed)?;
    w.csv("distortion", &PAIR_HEADER, &pair_rows(&records))?;
    let leaves: Vec<Vec<String>> = map
        .leaves
        .iter()
        .map(|l| vec![l.source_word.to_string(), l.target_word.to_string(), l.source_point.to_string(), l.target_point.to_string()])
        .collect();
    w.csv("map", &["source_word", "target_word", "source_point", "target_point"], &leaves)?;
    let status = if stats.sandwich_violations == 0 { Status::Ok } else { Status::Fails };
    Ok((
        status,
        json!({ "source": a.name, "target": b.name, "eta": eta.to_string(), "levels": levels, "counts": map.counts, "stats": stats }),
    ))
}

fn ql_cmd(specs: &[LoadedSpec], levels: usize, eta: &BigRational, pairs: usize, seed: u64, w: &mut Writer<'_>) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 2, "ql")?;
    let (a, b) = (&specs[0], &specs[1]);
    let bij = ql_bijection((&a.spec, &a.placement), (&b.spec, &b.placement), eta, levels, pairs, seed)?;
    w.csv("distortion", &PAIR_HEADER, &pair_rows(&bij.map.records))?;
    let bins = bij.map.stats.deviation_bins();
    let rows: Vec<Vec<String>> = bins.iter().map(|(l, d)| vec![l.to_string(), fmt_f64(*d)]).collect();
    w.csv("deviation", &["level", "deviation"], &rows)?;
    let values: Vec<f64> = bins.iter().map(|b| b.1).collect();
    let decreasing = strictly_decreasing_tail(&values, 3);
    let status = if decreasing { Status::Ok } else { Status::Inconclusive };
    let side = |s: &crate::embedding::QlSide| json!({ "C": to_f64(&s.constant), "r_star": to_f64(&s.r_star), "levels": s.levels });
    Ok((
        status,
        json!({
            "a": a.name, "b": b.name, "eta": eta.to_string(), "levels": levels, "pairs_per_level": pairs, "seed": seed,
            "decomposition_a": side(&bij.a), "decomposition_b": side(&bij.b),
            "stats": bij.map.stats, "deviation_tail_strictly_decreasing": decreasing,
        }),
    ))
}

fn render_cmd(specs: &[LoadedSpec], depth: usize, w: &mut Writer<'_>) -> Result<(Status, serde_json::Value)> {
    need_specs(specs, 1, "render")?;
    let mut out = Vec::new();
    for s in specs {
        let real = realize(&s.spec, s.placement.clone(), depth)?;
        w.text(&s.name, "svg", &render_realization(&real, depth)?)?;
        let alpha = alpha_profile(&s.spec, depth.max(64))?;
        let plot = render_plot(&format!("{}: alpha", s.name), "alpha", &[Series { label: "alpha", points: series(&alpha) }]);
        w.text(&format!("{}_alpha", s.name), "svg", &plot)?;
        out.push(json!({ "name": s.name, "depth": depth, "elements": real.count_at(depth)? }));
    }
    Ok((Status::Ok, json!({ "specs": out })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str], out: &Path) -> RunConfig {
        let mut v = vec!["moranlab"];
        v.extend_from_slice(args);
        let mut c = RunConfig::try_parse_from(v).unwrap();
        c.common.out = out.to_path_buf();
        c
    }

    #[test]
    fn corpus_specs_load() {
        assert_eq!(load("corpus:cantor").unwrap().name, "cantor");
        assert!(matches!(load("corpus:nope"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn exit_codes_follow_verdicts() {
        let dir = std::env::temp_dir().join(format!("moranlab-cli-{}", std::process::id()));
        let ok = run(&cfg(&["dims", "--spec", "corpus:cantor"], &dir));
        assert_eq!(ok.status.exit_code(), 0);
        let fails = run(&cfg(&["criteria", "--ud", "--spec", "corpus:ex_ud", "--depth", "125050"], &dir));
        assert_eq!(fails.status, Status::Fails);
        let err = run(&cfg(&["chi", "--spec", "corpus:cantor"], &dir));
        assert_eq!(err.status.exit_code(), 1);
        assert_eq!(err.error.unwrap().kind, "PreconditionViolated");
        let _ = std::fs::remove_dir_all(&dir);
    }
}
