//! Scale profiles: `α`, covering-count profiles, dimension windows, the `χ`
//! pseudo-distance and the `O(1/|log r|)` comparator.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::counting::{self, CountResult};
use crate::error::{Error, Result};
use crate::realization::Realization;
use crate::scalar::{ln_biguint, ln_rational, serialize_display, Scalar};
use crate::spec::MoranSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Alpha,
    CoveringF,
    LogCount,
}

/// A function of scale, stored against `ln r`.
///
/// Step profiles (`lower` present) take `values[i]` on the right-closed bucket
/// `(lower[i], upper[i]]`; sampled profiles are known only at `upper[i]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    pub kind: ProfileKind,
    /// `ln r` at the top of each bucket (or the sample point), decreasing.
    pub upper: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Profile {
    /// Value at scale `e^{log_r}`.
    pub fn value_at(&self, log_r: f64) -> Option<f64> {
        match &self.lower {
            Some(lower) => {
                // buckets are ordered by decreasing scale
                let i = self.upper.partition_point(|&u| u > log_r);
                let i = if i < self.upper.len() && self.upper[i] >= log_r { i } else { i.checked_sub(1)? };
                (log_r > lower[i] && log_r <= self.upper[i]).then(|| self.values[i])
            }
            None => self
                .upper
                .iter()
                .position(|&u| (u - log_r).abs() <= 1e-12 * u.abs().max(1.0))
                .map(|i| self.values[i]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// Minimum of `α_k` over the window (lower-dimension estimate).
    pub dim_h_window: f64,
    /// Maximum of `α_k` over the window (upper-dimension estimate).
    pub dim_p_window: f64,
    /// Levels `[k_lo, K]`.
    pub window: (usize, usize),
    /// Closed-form limit when the rules admit one (identical for both dimensions).
    pub exact_limit: Option<f64>,
}

/// `α_k = ln(n_1⋯n_k) / -ln(c_1⋯c_k)` on the buckets `(r_k|J|, r_(k-1)|J|]`, `k = 1..=K`.
pub fn alpha_profile(spec: &MoranSpec, depth: usize) -> Result<Profile> {
    let (log_phi, log_r) = spec.log_tables(depth)?;
    let ld = spec.ln_diameter();
    let upper = (1..=depth).map(|k| log_r[k - 1] + ld).collect();
    let lower = (1..=depth).map(|k| log_r[k] + ld).collect();
    let values = (1..=depth).map(|k| log_phi[k] / -log_r[k]).collect();
    Ok(Profile { kind: ProfileKind::Alpha, upper, lower: Some(lower), values })
}

/// Window min/max of the `α` profile over `k ∈ [⌈fraction·K⌉, K]`.
pub fn dims(spec: &MoranSpec, depth: usize, window_fraction: f64) -> Result<DimensionEstimate> {
    if depth == 0 || !(0.0..=1.0).contains(&window_fraction) {
        return Err(Error::InvalidSpec(format!("need K >= 1 and a window fraction in [0, 1], got {depth}, {window_fraction}")));
    }
    let p = alpha_profile(spec, depth)?;
    let k_lo = ((window_fraction * depth as f64).ceil() as usize).clamp(1, depth);
    let window = &p.values[k_lo - 1..];
    let dim_h_window = window.iter().copied().fold(f64::INFINITY, f64::min);
    let dim_p_window = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DimensionEstimate { dim_h_window, dim_p_window, window: (k_lo, depth), exact_limit: spec.exact_limit() })
}

/// `f(r) = ln N(r) / -ln r` at the given scales, with the counts used.
pub fn covering_profile(real: &Realization, scales: &[BigRational], oracle: bool) -> Result<(Profile, Vec<CountResult>)> {
    let mut upper = Vec::with_capacity(scales.len());
    let mut values = Vec::with_capacity(scales.len());
    let mut results = Vec::with_capacity(scales.len());
    for r in scales {
        let c = counting::counts(real, r, oracle)?;
        let lr = ln_rational(r);
        upper.push(lr);
        values.push(ln_biguint(&c.covering) / -lr);
        results.push(c);
    }
    Ok((Profile { kind: ProfileKind::CoveringF, upper, lower: None, values }, results))
}

/// Least-squares slope of `ln N(r)` against `-ln r`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Box-counting dimension from exact covering numbers at `r = r_k |J| / 2`, `k ∈ levels`.
pub fn covering_dimension(real: &Realization, levels: std::ops::RangeInclusive<usize>) -> Result<f64> {
    let mut pts = Vec::new();
    for k in levels {
        let r = real
            .spec
            .scale_exact(k)?
            .ok_or_else(|| Error::InexactGeometry("covering counts need exact ratios".into()))?
            / BigRational::from_integer(BigInt::from(2));
        let n = counting::covering_number(real, &r)?;
        pts.push((-ln_rational(&r), ln_biguint(&n)));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidSpec("a slope needs at least two scales".into()));
    }
    Ok(log_log_slope(&pts))
}

/// Level breakpoints `ln(r_k |J|)`, `k = 0..`, down to `floor` (inclusive of the first one below).
fn breakpoints(spec: &MoranSpec, floor: f64) -> Result<Vec<f64>> {
    let ld = spec.ln_diameter();
    let mut out = vec![ld];
    let mut k = 1;
    loop {
        let v = spec.log_r(k)? + ld;
        out.push(v);
        if v <= floor {
            return Ok(out);
        }
        k += 1;
    }
}

/// One merged bucket `(lower, upper]` on which both profiles are constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MergedBucket {
    pub upper: f64,
    pub lower: f64,
    pub level_a: usize,
    pub level_b: usize,
}

/// Buckets of the merged breakpoint grid of two specs over `(floor, top]`.
pub fn merged_buckets(a: &MoranSpec, b: &MoranSpec, top: f64, floor: f64) -> Result<Vec<MergedBucket>> {
    let pa = breakpoints(a, floor)?;
    let pb = breakpoints(b, floor)?;
    let mut pts: Vec<f64> = pa.iter().chain(&pb).copied().filter(|&v| v < top && v > floor).collect();
    pts.push(top);
    pts.push(floor);
    pts.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
    let level_of = |bp: &[f64], x: f64| bp.partition_point(|&v| v >= x).max(1);
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let (upper, lower) = (w[0], w[1]);
        if upper > a.ln_diameter() || upper > b.ln_diameter() {
            continue;
        }
        // the midpoint identifies both levels without rounding trouble at shared breakpoints
        let mid = 0.5 * (upper + lower);
        out.push(MergedBucket { upper, lower, level_a: level_of(&pa, mid), level_b: level_of(&pb, mid) });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceBin {
    /// `|ln r|` range of the bin.
    pub abs_log_lo: f64,
    pub abs_log_hi: f64,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiEstimate {
    /// Sup of `|ln(α_A/α_B)|` over the tail window.
    pub estimate: f64,
    /// `ln r` range of the tail window `[lo, hi]`.
    pub window: (f64, f64),
    /// Per-decade sups of `|ln r|` over the whole evaluated range.
    pub tail_trace: Vec<TraceBin>,
}

/// Decade bins of `|ln r|`: `[10^j, 10^(j+1))`, with everything below 10 in the first bin.
fn decade_of(abs_log: f64) -> i32 {
    if abs_log < 10.0 {
        0
    } else {
        abs_log.log10().floor() as i32
    }
}

/// `χ` between two specs: sup of `|ln(α_A(r)/α_B(r))|` on the merged grid down
/// to the shallower of the two depth-`K` scales, over the last `tail_fraction` of the log-scale range.
pub fn chi(a: &MoranSpec, b: &MoranSpec, depth: usize, tail_fraction: f64) -> Result<ChiEstimate> {
    let top = a.ln_diameter().min(b.ln_diameter());
    let floor = a.log_scale(depth)?.max(b.log_scale(depth)?);
    chi_range(a, b, top, floor, tail_fraction)
}

/// [`chi`] on the explicit `ln r` range `(floor, top]`.
pub fn chi_range(a: &MoranSpec, b: &MoranSpec, top: f64, floor: f64, tail_fraction: f64) -> Result<ChiEstimate> {
    if !(floor < top) || !(0.0 < tail_fraction && tail_fraction <= 1.0) {
        return Err(Error::InvalidSpec(format!("bad chi range ({floor}, {top}] or tail fraction {tail_fraction}")));
    }
    let buckets = merged_buckets(a, b, top, floor)?;
    let max_a = buckets.iter().map(|m| m.level_a).max().unwrap_or(1);
    let max_b = buckets.iter().map(|m| m.level_b).max().unwrap_or(1);
    let (phi_a, r_a) = a.log_tables(max_a)?;
    let (phi_b, r_b) = b.log_tables(max_b)?;
    let alpha = |phi: &[f64], r: &[f64], k: usize| phi[k] / -r[k];
    let cut = top + (1.0 - tail_fraction) * (floor - top);
    let mut estimate: f64 = 0.0;
    let mut trace: Vec<TraceBin> = Vec::new();
    for m in &buckets {
        let va = alpha(&phi_a, &r_a, m.level_a);
        let vb = alpha(&phi_b, &r_b, m.level_b);
        let d = (va / vb).ln().abs();
        if m.upper <= cut {
            estimate = estimate.max(d);
        }
        let j = decade_of(m.lower.abs());
        let (lo, hi) = if j == 0 { (0.0, 10.0) } else { (10f64.powi(j), 10f64.powi(j + 1)) };
        match trace.last_mut() {
            Some(t) if t.abs_log_lo == lo => t.sup = t.sup.max(d),
            _ => trace.push(TraceBin { abs_log_lo: lo, abs_log_hi: hi, sup: d }),
        }
    }
    Ok(ChiEstimate { estimate, window: (floor, cut), tail_trace: trace })
}

/// Dyadic bin `[2^j, 2^(j+1))` of `|ln r|`, for `|ln r| >= 1`.
pub fn dyadic_bin(abs_log: f64) -> Option<i32> {
    (abs_log >= 1.0).then(|| abs_log.log2().floor() as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equivalence {
    /// `(j, sup of |p - q|·|ln r|)` per dyadic bin `[2^j, 2^(j+1))` of `|ln r|`.
    pub bins: Vec<(i32, f64)>,
    /// Slope of `log2(sup)` against `j` over the last bins.
    pub slope: f64,
    pub bounded: bool,
    /// Largest bin sup.
    pub bound: f64,
}

/// Growth exponent above which `|p - q|·|ln r|` is judged unbounded.
pub const EQUIVALENCE_SLOPE: f64 = 0.25;
/// Number of trailing bins used for the growth test.
pub const EQUIVALENCE_BINS: usize = 3;

/// Pointwise `|p - q|·|ln r|` at the points where both are defined.
fn weighted_gaps(p: &Profile, q: &Profile) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    match (&p.lower, &q.lower) {
        (Some(pl), Some(ql)) => {
            let mut edges: Vec<f64> = p.upper.iter().chain(&q.upper).chain(pl).chain(ql).copied().collect();
            edges.sort_by(|x, y| y.partial_cmp(x).expect("finite"));
            edges.dedup();
            for w in edges.windows(2) {
                let (hi, lo) = (w[0], w[1]);
                if let (Some(a), Some(b)) = (p.value_at(hi), q.value_at(hi)) {
                    // the weight |ln r| is largest at the open lower end
                    out.push((lo, (a - b).abs() * lo.abs()));
                }
            }
        }
        _ => {
            let points = if p.lower.is_none() { &p.upper } else { &q.upper };
            for &x in points {
                if let (Some(a), Some(b)) = (p.value_at(x), q.value_at(x)) {
                    out.push((x, (a - b).abs() * x.abs()));
                }
            }
        }
    }
    out
}

/// The computable form of `p ∼ q`: is `|p - q|·|ln r|` bounded as `r → 0`?
pub fn compare_profiles(p: &Profile, q: &Profile) -> Equivalence {
    let mut bins: Vec<(i32, f64)> = Vec::new();
    for (x, g) in weighted_gaps(p, q) {
        let Some(j) = dyadic_bin(x.abs()) else { continue };
        match bins.iter_mut().find(|b| b.0 == j) {
            Some(b) => b.1 = b.1.max(g),
            None => bins.push((j, g)),
        }
    }
    bins.sort_by_key(|b| b.0);
    let bound = bins.iter().map(|b| b.1).fold(0.0, f64::max);
    if bound == 0.0 {
        return Equivalence { bins, slope: 0.0, bounded: true, bound };
    }
    let tail: Vec<(f64, f64)> = bins
        .iter()
        .rev()
        .take(EQUIVALENCE_BINS.max(2))
        .map(|&(j, s)| (j as f64, s.max(f64::MIN_POSITIVE).log2()))
        .collect();
    let slope = if tail.len() >= 2 { log_log_slope(&tail) } else { 0.0 };
    Equivalence { bins, slope, bounded: slope <= EQUIVALENCE_SLOPE, bound }
}

/// One probe of the `f ∼ α` comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FAlphaProbe {
    pub level: usize,
    pub log_r: f64,
    #[serde(serialize_with = "serialize_display")]
    pub covering: BigUint,
    pub f: f64,
    pub alpha: f64,
    /// `|f - α|·|ln r|`.
    pub weighted_gap: f64,
}

/// Fractions `θ` with probes at `r = r_(k-1)|J| (1 - θ (1 - c_k))`, inside bucket `k`.
pub const PROBE_FRACTIONS: [(i64, i64); 4] = [(0, 1), (1, 4), (1, 2), (3, 4)];

/// `|f - α|·|ln r|` at probe scales of every level `k ∈ levels`.
pub fn f_alpha_probes(real: &Realization, levels: std::ops::RangeInclusive<usize>) -> Result<Vec<FAlphaProbe>> {
    let spec = &real.spec;
    let mut out = Vec::new();
    for k in levels {
        let top = spec
            .scale_exact(k - 1)?
            .ok_or_else(|| Error::InexactGeometry("probe scales need exact ratios".into()))?;
        let c = spec.c(k)?.as_exact().cloned().expect("exact ratios");
        let alpha = spec.alpha(k)?;
        for (n, d) in PROBE_FRACTIONS {
            let theta = BigRational::new(n.into(), d.into());
            let r = &top * (BigRational::one() - theta * (BigRational::one() - &c));
            debug_assert_eq!(spec.scale_index(&Scalar::Exact(r.clone()))?, k);
            let log_r = ln_rational(&r);
            if log_r == 0.0 {
                continue;
            }
            let covering = counting::covering_number(real, &r)?;
            let f = ln_biguint(&covering) / -log_r;
            out.push(FAlphaProbe { level: k, log_r, covering, f, alpha, weighted_gap: (f - alpha).abs() * log_r.abs() });
        }
    }
    Ok(out)
}

/// Per dyadic bin of `|ln r|`, the sup of the weighted gap.
pub fn f_alpha_bins(probes: &[FAlphaProbe]) -> Vec<(i32, f64)> {
    let mut bins: Vec<(i32, f64)> = Vec::new();
    for p in probes {
        let Some(j) = dyadic_bin(p.log_r.abs()) else { continue };
        match bins.iter_mut().find(|b| b.0 == j) {
            Some(b) => b.1 = b.1.max(p.weighted_gap),
            None => bins.push((j, p.weighted_gap)),
        }
    }
    bins.sort_by_key(|b| b.0);
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{validate, RawSpec, SequenceRule};

    fn constant(n: i64, c: (i64, i64)) -> MoranSpec {
        validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(n),
            ratios: SequenceRule::constant_ratio(c.0, c.1),
        })
        .unwrap()
    }

    #[test]
    fn cantor_alpha_is_constant() {
        let p = alpha_profile(&constant(2, (1, 3)), 50).unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!(p.values.iter().all(|v| (v - target).abs() < 1e-12));
        assert_eq!(p.value_at(-(3f64.ln())), Some(p.values[1]));
        assert_eq!(p.value_at(-0.5), Some(p.values[0]));
        let d = dims(&constant(2, (1, 3)), 100, 0.5).unwrap();
        assert!((d.dim_h_window - d.dim_p_window).abs() < 1e-12);
        assert!((d.exact_limit.unwrap() - target).abs() < 1e-12);
    }

    #[test]
    fn chi_of_aligned_constant_specs() {
        let a = constant(2, (1, 3));
        let b = constant(4, (1, 9));
        assert_eq!(chi(&a, &a, 200, 0.5).unwrap().estimate, 0.0);
        assert!(chi(&a, &b, 200, 0.5).unwrap().estimate < 1e-12);
        let c = constant(3, (1, 3));
        let e = chi(&a, &c, 100, 0.5).unwrap().estimate;
        assert!((e - (3f64.ln() / 2f64.ln()).ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_is_not_equivalent() {
        let p = alpha_profile(&constant(2, (1, 3)), 400).unwrap();
        let mut q = p.clone();
        q.values.iter_mut().for_each(|v| *v += 0.01);
        assert!(!compare_profiles(&p, &q).bounded);
        let same = compare_profiles(&p, &p);
        assert!(same.bounded && same.bound == 0.0);
    }
}
