//! Decision criteria at finite depth: homogeneity, uniform disconnectedness,
//! embeddability, quasi-Lipschitz equivalence and the non-embeddability certificate.
//!
//! Every verdict is three-valued and carries the window it was computed on.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measure::ball_measure_at;
use crate::measure::random_point;
use crate::profiles::merged_buckets;
use crate::realization::{relative_min_gap, Placement, Realization, Tail};
use crate::scalar::{rational_from_f64, Scalar};
use crate::spec::{MoranSpec, SequenceRule, Word};

/// Margin below 1 required by `< 1` thresholds.
pub const DEFAULT_SLACK: f64 = 0.02;
/// Margin around 1 for traces that must converge to 1.
pub const DEFAULT_TRACE_SLACK: f64 = 0.01;
/// Relative gap below which a level counts as nearly touching.
pub const GAP_EPSILON: f64 = 1e-2;
/// Number of successive decreasing record lows that witness vanishing gaps.
pub const GAP_TREND_RECORDS: usize = 3;
/// Lower bound on the scale-step ratio for a "consistent" homogeneity verdict.
pub const HOMOGENEITY_MARGIN: f64 = 1.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    UdSufficient,
    UdDirect,
    Embeddable,
    QlEquivalent,
    NotEmbeddableCertificate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    HoldsAtDepth,
    FailsAtDepth,
    Inconclusive,
}

/// The range a verdict was computed on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    pub unit: &'static str,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub kind: CriterionKind,
    /// The tested sup, inf, limit estimate or slope.
    pub value: f64,
    pub threshold: f64,
    pub window: Window,
    pub verdict: Outcome,
    /// Column names of `trace`.
    pub trace_columns: [&'static str; 2],
    pub trace: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

impl CriterionVerdict {
    pub fn holds(&self) -> bool {
        self.verdict == Outcome::HoldsAtDepth
    }

    pub fn fails(&self) -> bool {
        self.verdict == Outcome::FailsAtDepth
    }
}

// ---------------------------------------------------------------- homogeneity

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMode {
    /// Random points and random scales inside the resolvable range.
    Random,
    /// Random points at the level scales `r_k |J|`.
    Aligned,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneityReport {
    /// `sup μ(B(x1, r)) / μ(B(x2, r))` over probe pairs.
    pub lambda_est: f64,
    pub kappa: f64,
    /// `inf μ(B(x, r)) / μ(B(x, κ r))`.
    pub delta_est: f64,
    /// `sup μ(B(x, r)) / μ(B(x, κ r))`.
    #[serde(rename = "Delta_est")]
    pub big_delta_est: f64,
    pub probes: usize,
    pub depth: usize,
    pub consistent: bool,
}

fn ratio_f64(a: &BigRational, b: &BigRational) -> f64 {
    if b.is_zero() {
        return f64::INFINITY;
    }
    Scalar::Exact(a / b).to_f64()
}

/// Estimates the homogeneity constants from certified ball-measure brackets.
///
/// Sups use `hi / lo`, infs use `lo / hi`, so the estimates are outer bounds
/// for the sampled probes. `kappa` defaults to `c_*^5`.
pub fn check_homogeneity(
    real: &Realization,
    probes: usize,
    kappa: Option<BigRational>,
    mode: ProbeMode,
    seed: u64,
) -> Result<HomogeneityReport> {
    real.require_1d()?;
    let kappa = match kappa {
        Some(k) => k,
        None => {
            let c = match &real.spec.c_star {
                Scalar::Exact(q) => q.clone(),
                Scalar::Real(x) => rational_from_f64(*x).ok_or_else(|| Error::InexactGeometry(x.to_string()))?,
            };
            (0..5).fold(BigRational::one(), |acc, _| acc * &c)
        }
    };
    if kappa <= BigRational::zero() || kappa >= BigRational::one() {
        return Err(Error::PreconditionViolated(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    // keep κ r a few levels above the resolution so brackets stay narrow
    let margin = 4;
    let mut k_max = 1;
    while k_max + 1 < real.depth {
        let r = real.spec.scale_exact(k_max)?.expect("exact realization");
        let level = real.spec.scale_index(&Scalar::Exact(&r * &kappa))?;
        if level + margin > real.depth {
            break;
        }
        k_max += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambda: f64 = 1.0;
    let mut delta = f64::INFINITY;
    let mut big_delta: f64 = 0.0;
    for _ in 0..probes {
        let k = rng.gen_range(1..=k_max);
        let r = match mode {
            ProbeMode::Aligned => real.spec.scale_exact(k)?.expect("exact realization"),
            ProbeMode::Random => {
                let top = real.spec.scale_exact(k - 1)?.expect("exact realization");
                let c = real.spec.c(k)?.as_exact().cloned().expect("exact realization");
                let u = BigRational::new(BigInt::from(rng.gen_range(0..1000)), BigInt::from(1000));
                &top * (BigRational::one() - u * (BigRational::one() - c))
            }
        };
        let x1 = random_point(real, &mut rng)?;
        let x2 = random_point(real, &mut rng)?;
        let b1 = ball_measure_at(real, &x1.coords[0], &r, None)?;
        let b2 = ball_measure_at(real, &x2.coords[0], &r, None)?;
        lambda = lambda.max(ratio_f64(&b1.hi, &b2.lo)).max(ratio_f64(&b2.hi, &b1.lo));
        let small = ball_measure_at(real, &x1.coords[0], &(&r * &kappa), None)?;
        delta = delta.min(ratio_f64(&b1.lo, &small.hi));
        big_delta = big_delta.max(ratio_f64(&b1.hi, &small.lo));
    }
    Ok(HomogeneityReport {
        lambda_est: lambda,
        kappa: Scalar::Exact(kappa).to_f64(),
        delta_est: delta,
        big_delta_est: big_delta,
        probes,
        depth: real.depth,
        consistent: delta > HOMOGENEITY_MARGIN,
    })
}

// ------------------------------------------------------ uniform disconnectedness

/// `ln(n_{k+1}⋯n_{k+k0}) / -ln(c_{k+1}⋯c_{k+k0})` for `k` in the tail window `[⌈K/2⌉, K - k0]`.
pub fn ud_sufficient(spec: &MoranSpec, k0: usize, depth: usize, slack: f64) -> Result<CriterionVerdict> {
    if k0 == 0 || depth <= k0 + 1 {
        return Err(Error::PreconditionViolated(format!("need k0 >= 1 and K > k0 + 1, got k0 = {k0}, K = {depth}")));
    }
    let (log_phi, log_r) = spec.log_tables(depth)?;
    let from = depth.div_ceil(2).min(depth - k0);
    let mut sup = f64::NEG_INFINITY;
    let mut at = from;
    let mut trace = Vec::new();
    for k in from..=depth - k0 {
        let v = (log_phi[k + k0] - log_phi[k]) / -(log_r[k + k0] - log_r[k]);
        if v > sup {
            sup = v;
            at = k;
            trace.push((k as f64, v));
        }
    }
    let verdict = if sup < 1.0 - slack {
        Outcome::HoldsAtDepth
    } else if sup >= 1.0 - slack / 2.0 {
        Outcome::FailsAtDepth
    } else {
        Outcome::Inconclusive
    };
    Ok(CriterionVerdict {
        kind: CriterionKind::UdSufficient,
        value: sup,
        threshold: 1.0 - slack,
        window: Window { unit: "level", from: from as f64, to: (depth - k0) as f64 },
        verdict,
        trace_columns: ["level", "running_sup"],
        trace,
        notes: vec![format!("k0 = {k0}; sup attained at k = {at}")],
    })
}

/// Per-level relative gap `s_k` (smallest gap between children over the parent extent), `k = 1..=depth`.
pub fn relative_gaps(spec: &MoranSpec, placement: &Placement, depth: usize) -> Result<Vec<f64>> {
    (1..=depth).map(|k| relative_min_gap(spec, placement, k).map(|s| s.to_f64())).collect()
}

/// Direct gap diagnostic: inf of the relative gaps, with the trend test for vanishing gaps.
///
/// `depth` may exceed the realization depth: gaps depend only on the rule and the placement.
pub fn ud_direct(real: &Realization, depth: usize) -> Result<CriterionVerdict> {
    real.require_1d()?;
    let gaps = relative_gaps(&real.spec, &real.placement, depth)?;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut inf = f64::INFINITY;
    let mut zero_at = None;
    for (i, &s) in gaps.iter().enumerate() {
        if s < inf {
            inf = s;
            trace.push(((i + 1) as f64, s));
        }
        if s <= 0.0 && zero_at.is_none() {
            zero_at = Some(i + 1);
        }
    }
    // record lows strictly below the first tiny gap form the decreasing trend
    let small_records = trace.iter().filter(|(_, s)| *s < GAP_EPSILON).count();
    let mut notes = Vec::new();
    let verdict = if let Some(k) = zero_at {
        notes.push(format!("children touch at level {k}"));
        Outcome::FailsAtDepth
    } else if inf < GAP_EPSILON && small_records >= GAP_TREND_RECORDS {
        notes.push(format!("{small_records} decreasing record lows below {GAP_EPSILON}"));
        Outcome::FailsAtDepth
    } else if inf >= GAP_EPSILON {
        let c = 1.0 / inf;
        notes.push(format!("candidate constant C = {c}, r* = {} |J|", inf));
        Outcome::HoldsAtDepth
    } else {
        Outcome::Inconclusive
    };
    Ok(CriterionVerdict {
        kind: CriterionKind::UdDirect,
        value: inf,
        threshold: GAP_EPSILON,
        window: Window { unit: "level", from: 1.0, to: depth as f64 },
        verdict,
        trace_columns: ["level", "relative_gap_record_low"],
        trace,
        notes,
    })
}

/// `(C, r*)` implied by a holding [`ud_direct`] verdict: `C = 1/s`, `r* = s |J|`.
pub fn ud_constants(verdict: &CriterionVerdict, spec: &MoranSpec) -> Option<(f64, f64)> {
    (verdict.kind == CriterionKind::UdDirect && verdict.holds())
        .then(|| (1.0 / verdict.value, verdict.value * spec.diameter.to_f64()))
}

// ------------------------------------------------------------------ embedding

/// Default grid of `r0` values: `c_*^j`, `j = 1..=4`, with `c_*` the smaller of the two infima.
pub fn default_r0_grid(a: &MoranSpec, b: &MoranSpec) -> Vec<f64> {
    let c = a.c_star.to_f64().min(b.c_star.to_f64());
    (1..=4).map(|j| c.powi(j)).collect()
}

/// `sup ln Φ_A(r, r') / ln Φ_B(r, r')` over merged-grid pairs with `r' < r0 r < r < r0`,
/// minimized over the `r0` grid.
pub fn embed_condition(a: &MoranSpec, b: &MoranSpec, r0_grid: &[f64], depth: usize, slack: f64) -> Result<CriterionVerdict> {
    if r0_grid.is_empty() || r0_grid.iter().any(|&r| !(0.0 < r && r < 1.0)) {
        return Err(Error::PreconditionViolated("r0 values must lie in (0, 1)".into()));
    }
    let top = a.ln_diameter().min(b.ln_diameter());
    let floor = a.log_scale(depth)?.max(b.log_scale(depth)?);
    let buckets = merged_buckets(a, b, top, floor)?;
    let max_a = buckets.iter().map(|m| m.level_a).max().unwrap_or(1);
    let max_b = buckets.iter().map(|m| m.level_b).max().unwrap_or(1);
    let (phi_a, _) = a.log_tables(max_a)?;
    let (phi_b, _) = b.log_tables(max_b)?;
    let mut best: Option<(f64, f64)> = None;
    let mut trace = Vec::new();
    for &r0 in r0_grid {
        let l0 = r0.ln();
        let mut sup = f64::NEG_INFINITY;
        for (i, p) in buckets.iter().enumerate() {
            if p.lower >= l0 {
                continue;
            }
            for q in &buckets[i + 1..] {
                if q.lower >= l0 + p.upper {
                    continue;
                }
                let num = phi_a[q.level_a] - phi_a[p.level_a];
                let den = phi_b[q.level_b] - phi_b[p.level_b];
                let v = if den > 0.0 {
                    num / den
                } else if num > 0.0 {
                    f64::INFINITY
                } else {
                    continue;
                };
                sup = sup.max(v);
            }
        }
        trace.push((r0, sup));
        if sup.is_finite() && best.map_or(true, |(_, s)| sup < s) || best.is_none() {
            best = Some((r0, sup));
        }
    }
    let (r0, value) = best.expect("nonempty grid");
    let verdict = if value < 1.0 - slack {
        Outcome::HoldsAtDepth
    } else if value >= 1.0 {
        Outcome::FailsAtDepth
    } else {
        Outcome::Inconclusive
    };
    Ok(CriterionVerdict {
        kind: CriterionKind::Embeddable,
        value,
        threshold: 1.0 - slack,
        window: Window { unit: "ln r", from: floor, to: top },
        verdict,
        trace_columns: ["r0", "sup_ratio"],
        trace,
        notes: vec![format!("best r0 = {r0}")],
    })
}

/// `ln Φ_A(r) / ln Φ_B(r)` on the merged grid, judged by its per-decade distance from 1.
pub fn ql_equivalent(a: &MoranSpec, b: &MoranSpec, depth: usize, slack: f64) -> Result<CriterionVerdict> {
    let top = a.ln_diameter().min(b.ln_diameter());
    let floor = a.log_scale(depth)?.max(b.log_scale(depth)?);
    let buckets = merged_buckets(a, b, top, floor)?;
    let max_a = buckets.iter().map(|m| m.level_a).max().unwrap_or(1);
    let max_b = buckets.iter().map(|m| m.level_b).max().unwrap_or(1);
    let (phi_a, _) = a.log_tables(max_a)?;
    let (phi_b, _) = b.log_tables(max_b)?;
    // sup of |T - 1| per decade [10^j, 10^(j+1)) of |ln r|
    let mut decades: Vec<(i32, f64)> = Vec::new();
    for m in &buckets {
        let t = phi_a[m.level_a] / phi_b[m.level_b];
        let d = (t - 1.0).abs();
        let abs = m.lower.abs();
        let j = if abs < 10.0 { 0 } else { abs.log10().floor() as i32 };
        match decades.last_mut() {
            Some(last) if last.0 == j => last.1 = last.1.max(d),
            _ => decades.push((j, d)),
        }
    }
    let last = decades.last().map_or(0.0, |d| d.1);
    let tail: Vec<f64> = decades.iter().rev().take(3).map(|d| d.1).collect();
    let decreasing = tail.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9) + 1e-15);
    let ud_a = ud_sufficient(a, 1, depth.max(4), DEFAULT_SLACK)?;
    let ud_b = ud_sufficient(b, 1, depth.max(4), DEFAULT_SLACK)?;
    let verdict = if last < slack && decreasing {
        Outcome::HoldsAtDepth
    } else if last >= slack && !decreasing {
        Outcome::FailsAtDepth
    } else if last >= slack && tail.len() >= 2 && tail[0] >= 0.9 * tail[tail.len() - 1] {
        // not shrinking appreciably either
        Outcome::FailsAtDepth
    } else {
        Outcome::Inconclusive
    };
    Ok(CriterionVerdict {
        kind: CriterionKind::QlEquivalent,
        value: last,
        threshold: slack,
        window: Window { unit: "ln r", from: floor, to: top },
        verdict,
        trace_columns: ["decade", "sup_abs_ratio_minus_one"],
        trace: decades.iter().map(|&(j, d)| (j as f64, d)).collect(),
        notes: vec![
            format!("UD sufficient condition for A: {:?} ({:.6})", ud_a.verdict, ud_a.value),
            format!("UD sufficient condition for B: {:?} ({:.6})", ud_b.verdict, ud_b.value),
        ],
    })
}

// ------------------------------------------------------------- certificate

/// One row of the certificate table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateRow {
    pub m: i64,
    pub k_m: i64,
    pub t_m: i64,
    /// Exact `μ(B(x, |J_k_m|/2)) / μ(B(x, |J_t_m|/2))` at the midpoint of a level-`k_m` element.
    pub nu_ratio: f64,
    pub nu_ratio_exact: bool,
    /// `(|J_k_m| / |J_t_m|)^s`: the same ratio for an `s`-regular measure.
    pub regular_ratio: f64,
    /// `ln(regular_ratio / nu_ratio)`.
    pub log_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: CriterionVerdict,
    pub rows: Vec<CertificateRow>,
    /// `(block exponent, off-block exponent)`: the admissible range of `s`.
    pub exponent_range: (f64, f64),
}

fn constant_ratio(spec: &MoranSpec) -> Result<BigRational> {
    match &spec.ratios {
        SequenceRule::Constant(e) => e
            .eval(&[])?
            .as_exact()
            .cloned()
            .ok_or_else(|| Error::PreconditionViolated("the ratio must be rational".into())),
        _ => Err(Error::PreconditionViolated("the certificate needs a constant ratio rule".into())),
    }
}

fn eval_block_value(e: &Expr, m: i64) -> Result<i64> {
    e.eval(&[("m", m)])?
        .as_integer()
        .and_then(|v| v.to_i64())
        .ok_or_else(|| Error::PreconditionViolated("block branching values must be integers".into()))
}

/// Non-embeddability of an `s`-regular set into `real` (a block-branching construction):
/// compares the measured measure ratio across each block with the `s`-regular ratio.
///
/// `s` must lie in the closed interval between the in-block and off-block exponents;
/// a positive fitted slope of `ln(regular / measured)` in `m` is the certificate.
pub fn non_embeddability_certificate(s: f64, real: &Realization, blocks: i64) -> Result<Certificate> {
    real.require_1d()?;
    let spec = &real.spec;
    let SequenceRule::Block(rule) = &spec.branching else {
        return Err(Error::PreconditionViolated("the target needs a block branching rule".into()));
    };
    let c = constant_ratio(spec)?;
    let lc = -Scalar::Exact(c.clone()).ln();
    let n_in = eval_block_value(&rule.in_block, 1)?;
    let n_off = eval_block_value(&rule.off_block, 1)?;
    let lo = (n_in as f64).ln() / lc;
    let hi = (n_off as f64).ln() / lc;
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    let tol = 1e-12;
    if !(s >= lo - tol && s <= hi + tol) {
        return Err(Error::PreconditionViolated(format!("s = {s} lies outside [{lo}, {hi}]")));
    }
    if n_in % 2 == 0 || n_off % 2 == 0 {
        return Err(Error::PreconditionViolated("midpoints need odd branching numbers".into()));
    }
    let two = BigRational::from_integer(2.into());
    let mut rows = Vec::new();
    for m in 1..=blocks {
        let k_m = rule.k_at(m)?;
        let t_m = rule.t_at(m, k_m)?;
        if t_m as usize > real.depth {
            return Err(Error::DepthExhausted(format!("block {m} ends at level {t_m} beyond depth {}", real.depth)));
        }
        let word = Word(vec![1; k_m as usize]);
        let x = real.point_at(&word, Tail::Middle)?;
        let r_big = spec.scale_exact(k_m as usize)?.expect("exact") / &two;
        let r_small = spec.scale_exact(t_m as usize)?.expect("exact") / &two;
        let big = ball_measure_at(real, &x.coords[0], &r_big, Some(real.depth.min(k_m as usize + 12)))?;
        let small = ball_measure_at(real, &x.coords[0], &r_small, Some(real.depth))?;
        let exact = big.is_exact() && small.is_exact();
        let nu_ratio = ratio_f64(&big.lo, &small.lo);
        let radius_ratio = Scalar::Exact(&r_big / &r_small).ln();
        let regular_ratio = (s * radius_ratio).exp();
        rows.push(CertificateRow {
            m,
            k_m,
            t_m,
            nu_ratio,
            nu_ratio_exact: exact,
            regular_ratio,
            log_gap: s * radius_ratio - nu_ratio.ln(),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.m as f64, r.log_gap)).collect();
    let slope = if pts.len() >= 2 { crate::profiles::log_log_slope(&pts) } else { f64::NAN };
    let verdict = if slope > 1e-6 { Outcome::HoldsAtDepth } else { Outcome::Inconclusive };
    Ok(Certificate {
        verdict: CriterionVerdict {
            kind: CriterionKind::NotEmbeddableCertificate,
            value: slope,
            threshold: 0.0,
            window: Window { unit: "m", from: 1.0, to: blocks as f64 },
            verdict,
            trace_columns: ["m", "log_regular_over_measured"],
            trace: pts,
            notes: vec![format!("predicted slope s ln(1/c) - ln n_in = {}", s * lc - (n_in as f64).ln())],
        },
        rows,
        exponent_range: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn cantor_gap_criteria_hold() {
        let c = corpus::cantor();
        let v = ud_sufficient(&c.spec, 1, 200, DEFAULT_SLACK).unwrap();
        assert!(v.holds());
        assert!((v.value - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        let real = crate::realization::realize(&c.spec, c.placement.clone(), 4).unwrap();
        let d = ud_direct(&real, 50).unwrap();
        assert!(d.holds());
        assert!((d.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_specs_do_not_embed_strictly() {
        let a = corpus::example2_binary().spec;
        let v = embed_condition(&a, &a, &default_r0_grid(&a, &a), 40, DEFAULT_SLACK).unwrap();
        assert!(v.fails());
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_ql_equivalence() {
        let a = corpus::cantor().spec;
        let v = ql_equivalent(&a, &a, 500, DEFAULT_TRACE_SLACK).unwrap();
        assert!(v.holds());
        assert_eq!(v.value, 0.0);
    }
}
