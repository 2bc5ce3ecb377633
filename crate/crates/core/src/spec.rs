//! Symbolic Moran recipes: branching and ratio sequences, validation, scale
//! levels and the counting function `Φ`.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::expr::{Expr, Limit};
use crate::scalar::{rational_to_f64, Scalar};

/// Dense validation horizon: every level up to here is checked.
pub const DENSE_PROBE_LEVELS: usize = 10_000;
/// Sparse validation horizon.
pub const SPARSE_PROBE_LIMIT: usize = 1_000_000;

/// Block schedule: levels `k_m < k <= t_m` take `in_block`, all others `off_block`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRule {
    pub k_m: Expr,
    pub t_m: Expr,
    pub in_block: Expr,
    pub off_block: Expr,
}

/// A sequence indexed by level `k >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceRule {
    Constant(Expr),
    Periodic(Vec<Expr>),
    /// Explicit values for the first levels, then `tail` evaluated at the absolute level.
    Prefix { values: Vec<Expr>, tail: Box<SequenceRule> },
    Block(BlockRule),
    /// Closed form in `k`.
    Formula(Expr),
}

/// Position of a level relative to a block schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPosition {
    /// Index of the last block starting before `k` (0 if none).
    pub m: i64,
    pub k_m: i64,
    pub t_m: i64,
    pub inside: bool,
}

fn eval_int(e: &Expr, env: &[(&str, i64)]) -> Result<i64> {
    let v = e.eval(env)?;
    v.as_integer()
        .and_then(|i| i.to_i64())
        .ok_or_else(|| Error::InvalidRule(format!("`{e}` must evaluate to an integer, got {v}")))
}

impl BlockRule {
    pub fn k_at(&self, m: i64) -> Result<i64> {
        eval_int(&self.k_m, &[("m", m)])
    }

    pub fn t_at(&self, m: i64, k_m: i64) -> Result<i64> {
        eval_int(&self.t_m, &[("m", m), ("k_m", k_m)])
    }

    /// Locates level `k` in the schedule in `O(log k)` evaluations.
    pub fn position(&self, k: usize) -> Result<BlockPosition> {
        let k = k as i64;
        if self.k_at(1)? >= k {
            return Ok(BlockPosition { m: 0, k_m: 0, t_m: 0, inside: false });
        }
        let mut lo = 1i64;
        let mut hi = 2i64;
        while self.k_at(hi)? < k {
            lo = hi;
            hi *= 2;
            if hi > 1 << 40 {
                return Err(Error::InvalidRule(format!("block schedule `{}` grows too slowly", self.k_m)));
            }
        }
        // invariant: k_lo < k <= k_hi
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.k_at(mid)? < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k_m = self.k_at(lo)?;
        let t_m = self.t_at(lo, k_m)?;
        Ok(BlockPosition { m: lo, k_m, t_m, inside: k <= t_m })
    }

    fn value(&self, k: usize, pos: &BlockPosition) -> Result<Scalar> {
        let k = k as i64;
        if pos.inside {
            Ok(self.in_block.eval(&[("k", k), ("m", pos.m), ("k_m", pos.k_m), ("t_m", pos.t_m)])?)
        } else {
            Ok(self.off_block.eval(&[("k", k), ("m", pos.m)])?)
        }
    }

    /// Checks `k_m < t_m < k_{m+1}` for every block starting at or before `horizon`.
    pub fn check_schedule(&self, horizon: usize) -> Result<()> {
        let mut m = 1i64;
        let mut prev_t = i64::MIN;
        loop {
            let k = self.k_at(m)?;
            if k < 0 {
                return Err(Error::InvalidRule(format!("k_m = {k} < 0 at m = {m}")));
            }
            if k <= prev_t {
                return Err(Error::InvalidRule(format!("block schedule requires t_m < k_(m+1); fails at m = {}", m - 1)));
            }
            let t = self.t_at(m, k)?;
            if t <= k {
                return Err(Error::InvalidRule(format!("block schedule requires k_m < t_m; fails at m = {m}")));
            }
            if k as usize > horizon {
                return Ok(());
            }
            prev_t = t;
            m += 1;
        }
    }

    /// Levels adjacent to block boundaries up to `horizon`.
    fn boundary_levels(&self, horizon: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let mut m = 1i64;
        loop {
            let k = self.k_at(m)?;
            if k as usize > horizon {
                break;
            }
            let t = self.t_at(m, k)?;
            for v in [k, k + 1, t, t + 1] {
                if v >= 1 && (v as usize) <= horizon {
                    out.push(v as usize);
                }
            }
            m += 1;
        }
        Ok(out)
    }

    /// Whether the fraction of levels lying in blocks tends to zero, decided
    /// from the closed forms of `k_m` and `t_m` when both are rational in `m`.
    pub fn density_vanishes(&self) -> Option<bool> {
        let k = self.k_m.rational_function("m", &[])?;
        let t = self.t_m.rational_function("m", &[("k_m", &k)])?;
        let len = t.sub(&k);
        // (block length * number of blocks) / position of the block
        let ratio = len.mul(&crate::expr::RatFunc::var()).div(&k)?;
        Some(matches!(ratio.limit(), Limit::Finite(ref q) if q == &BigRational::from_integer(0.into())))
    }
}

impl SequenceRule {
    pub fn constant_expr(src: &str) -> Result<Self> {
        Ok(SequenceRule::Constant(Expr::parse(src)?))
    }

    pub fn constant_int(v: i64) -> Self {
        SequenceRule::Constant(Expr::from_int(v))
    }

    pub fn constant_ratio(num: i64, den: i64) -> Self {
        SequenceRule::Constant(Expr::constant(BigRational::new(num.into(), den.into())))
    }

    pub fn eval(&self, k: usize) -> Result<Scalar> {
        if k == 0 {
            return Err(Error::InvalidRule("levels start at k = 1".into()));
        }
        match self {
            SequenceRule::Constant(e) => Ok(e.eval(&[("k", k as i64)])?),
            SequenceRule::Periodic(vs) => {
                if vs.is_empty() {
                    return Err(Error::InvalidRule("periodic rule needs at least one value".into()));
                }
                Ok(vs[(k - 1) % vs.len()].eval(&[("k", k as i64)])?)
            }
            SequenceRule::Prefix { values, tail } => {
                if k <= values.len() {
                    Ok(values[k - 1].eval(&[("k", k as i64)])?)
                } else {
                    tail.eval(k)
                }
            }
            SequenceRule::Block(b) => {
                let pos = b.position(k)?;
                b.value(k, &pos)
            }
            SequenceRule::Formula(e) => Ok(e.eval(&[("k", k as i64)])?),
        }
    }

    /// Values at levels `from..=to`, walking block schedules sequentially.
    pub fn eval_range(&self, from: usize, to: usize) -> Result<Vec<Scalar>> {
        if from == 0 {
            return Err(Error::InvalidRule("levels start at k = 1".into()));
        }
        if to < from {
            return Ok(Vec::new());
        }
        match self {
            SequenceRule::Constant(e) if e.is_constant() => {
                let v = e.eval(&[])?;
                Ok(vec![v; to - from + 1])
            }
            SequenceRule::Block(b) => {
                let mut out = Vec::with_capacity(to - from + 1);
                let mut pos = b.position(from)?;
                // next block boundary
                let mut next_m = pos.m + 1;
                let mut next_k = b.k_at(next_m)?;
                for k in from..=to {
                    let ki = k as i64;
                    while ki > next_k {
                        let t = b.t_at(next_m, next_k)?;
                        pos = BlockPosition { m: next_m, k_m: next_k, t_m: t, inside: true };
                        next_m += 1;
                        next_k = b.k_at(next_m)?;
                    }
                    pos.inside = pos.m >= 1 && ki > pos.k_m && ki <= pos.t_m;
                    out.push(b.value(k, &pos)?);
                }
                Ok(out)
            }
            SequenceRule::Prefix { values, tail } if to > values.len() && from <= values.len() => {
                let mut out = Vec::with_capacity(to - from + 1);
                for k in from..=values.len() {
                    out.push(values[k - 1].eval(&[("k", k as i64)])?);
                }
                out.extend(tail.eval_range(values.len() + 1, to)?);
                Ok(out)
            }
            SequenceRule::Prefix { values, tail } if from > values.len() => tail.eval_range(from, to),
            _ => (from..=to).map(|k| self.eval(k)).collect(),
        }
    }

    fn block_rules(&self) -> Vec<&BlockRule> {
        match self {
            SequenceRule::Block(b) => vec![b],
            SequenceRule::Prefix { tail, .. } => tail.block_rules(),
            _ => Vec::new(),
        }
    }

    /// Limits at infinity of the rule's closed-form pieces (those depending on `m` or `k`).
    fn tail_limits(&self) -> Vec<Option<Limit>> {
        fn lim(e: &Expr) -> Option<Option<Limit>> {
            let vars = e.variables();
            if vars.is_empty() {
                return None;
            }
            let var = if vars.iter().any(|v| v == "m") { "m" } else { "k" };
            if vars.iter().any(|v| v != var) {
                return Some(None);
            }
            Some(e.limit_at_infinity(var))
        }
        match self {
            SequenceRule::Constant(e) | SequenceRule::Formula(e) => lim(e).into_iter().collect(),
            SequenceRule::Periodic(vs) => vs.iter().filter_map(lim).collect(),
            SequenceRule::Prefix { tail, .. } => tail.tail_limits(),
            SequenceRule::Block(b) => [lim(&b.in_block), lim(&b.off_block)].into_iter().flatten().collect(),
        }
    }

    /// Short textual form used in reports.
    pub fn describe(&self) -> String {
        match self {
            SequenceRule::Constant(e) => format!("constant {e}"),
            SequenceRule::Periodic(vs) => {
                format!("periodic [{}]", vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
            }
            SequenceRule::Prefix { values, tail } => format!(
                "prefix [{}] then {}",
                values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
                tail.describe()
            ),
            SequenceRule::Block(b) => format!(
                "block k_m = {}, t_m = {}, in-block {}, off-block {}",
                b.k_m, b.t_m, b.in_block, b.off_block
            ),
            SequenceRule::Formula(e) => format!("formula {e}"),
        }
    }
}

/// A word `i_1 ⋯ i_k` with 1-based letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u32) -> Word {
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    pub fn prefix(&self, k: usize) -> Word {
        Word(self.0[..k.min(self.0.len())].to_vec())
    }

    /// Length of the longest common prefix.
    pub fn common_prefix(&self, other: &Word) -> usize {
        self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count()
    }

    /// Parses `"12"` (single-digit letters) or `"1.10.2"`.
    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        let parts: Vec<&str> = if s.contains('.') { s.split('.').collect() } else { s.split("").filter(|p| !p.is_empty()).collect() };
        parts
            .iter()
            .map(|p| p.parse::<u32>().map_err(|_| Error::WordOutOfRange(format!("malformed word `{s}`"))))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&l| l < 10) {
            for l in &self.0 {
                write!(f, "{l}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
            f.write_str(&parts.join("."))
        }
    }
}

/// An unvalidated recipe.
#[derive(Clone, Debug)]
pub struct RawSpec {
    pub dimension: u8,
    pub diameter: Scalar,
    pub branching: SequenceRule,
    pub ratios: SequenceRule,
}

/// Result of locating a scale on the level grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleLevel {
    pub level: usize,
    /// The scale sits within floating tolerance of a breakpoint that could not be decided exactly.
    pub ambiguous: bool,
}

#[derive(Debug, Default)]
struct LevelCache {
    n: Vec<u64>,
    c: Vec<Scalar>,
    /// `ln Φ(k)` for k = 0..; index 0 holds 0.
    log_phi: Vec<f64>,
    /// `ln r_k` for k = 0..; index 0 holds 0.
    log_r: Vec<f64>,
    sum_phi: f64,
    comp_phi: f64,
    sum_r: f64,
    comp_r: f64,
    /// Exact `r_k` for k = 0.. (only when all ratios so far are exact).
    r_exact: Vec<BigRational>,
}

/// A validated Moran recipe.
#[derive(Clone, Debug)]
pub struct MoranSpec {
    pub dimension: u8,
    pub diameter: Scalar,
    pub branching: SequenceRule,
    pub ratios: SequenceRule,
    /// `inf_k c_k`.
    pub c_star: Scalar,
    /// `sup_k c_k`.
    pub c_upper: Scalar,
    cache: Arc<RwLock<LevelCache>>,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

fn branching_value(v: &Scalar, k: usize) -> Result<u64> {
    let n = v
        .as_integer()
        .and_then(|i| i.to_u64())
        .ok_or_else(|| Error::InvalidRule(format!("n_{k} = {v} is not a non-negative integer")))?;
    if n < 2 {
        return Err(Error::BranchingTooSmall { level: k, value: v.to_string() });
    }
    Ok(n)
}

/// Checks one level; returns `(n_k, c_k)`.
fn check_level(dim: u8, k: usize, n: &Scalar, c: &Scalar) -> Result<(u64, Scalar)> {
    let nk = branching_value(n, k)?;
    if !c.is_positive() {
        return Err(Error::RatioInfimumZero(format!("c_{k} = {c} is not positive")));
    }
    let load = Scalar::int(nk as i64).mul(&c.powi(dim as i64).expect("positive base"));
    let over = match &load {
        Scalar::Exact(q) => q > &BigRational::one(),
        Scalar::Real(x) => *x > 1.0 + 1e-12,
    };
    if over {
        return Err(Error::Overpacked { level: k, value: load.to_string() });
    }
    Ok((nk, c.clone()))
}

fn min_scalar(a: Scalar, b: &Scalar) -> Scalar {
    if b.partial_cmp_scalar(&a) == Some(Ordering::Less) {
        b.clone()
    } else {
        a
    }
}

fn max_scalar(a: Scalar, b: &Scalar) -> Scalar {
    if b.partial_cmp_scalar(&a) == Some(Ordering::Greater) {
        b.clone()
    } else {
        a
    }
}

/// Validates a raw recipe, probing every level up to [`DENSE_PROBE_LEVELS`],
/// a geometric sample up to [`SPARSE_PROBE_LIMIT`], every block boundary, and
/// the closed-form limits of the rules.
pub fn validate(raw: RawSpec) -> Result<MoranSpec> {
    if raw.dimension != 1 && raw.dimension != 2 {
        return Err(Error::InvalidSpec(format!("dimension must be 1 or 2, got {}", raw.dimension)));
    }
    if !raw.diameter.is_positive() {
        return Err(Error::InvalidSpec(format!("diameter must be positive, got {}", raw.diameter)));
    }
    for b in raw.branching.block_rules().into_iter().chain(raw.ratios.block_rules()) {
        b.check_schedule(SPARSE_PROBE_LIMIT)?;
    }
    let ns = raw.branching.eval_range(1, DENSE_PROBE_LEVELS)?;
    let cs = raw.ratios.eval_range(1, DENSE_PROBE_LEVELS)?;
    let mut c_star = cs[0].clone();
    let mut c_upper = cs[0].clone();
    for (i, (n, c)) in ns.iter().zip(&cs).enumerate() {
        check_level(raw.dimension, i + 1, n, c)?;
        c_star = min_scalar(c_star, c);
        c_upper = max_scalar(c_upper, c);
    }
    let mut sparse = Vec::new();
    let mut k = DENSE_PROBE_LEVELS as f64;
    while (k as usize) <= SPARSE_PROBE_LIMIT {
        sparse.push(k as usize);
        k *= 1.05;
    }
    sparse.push(SPARSE_PROBE_LIMIT);
    for b in raw.branching.block_rules().into_iter().chain(raw.ratios.block_rules()) {
        sparse.extend(b.boundary_levels(SPARSE_PROBE_LIMIT)?);
    }
    sparse.sort_unstable();
    sparse.dedup();
    for &k in sparse.iter().filter(|&&k| k > DENSE_PROBE_LEVELS) {
        let (_, c) = check_level(raw.dimension, k, &raw.branching.eval(k)?, &raw.ratios.eval(k)?)?;
        c_star = min_scalar(c_star, &c);
        c_upper = max_scalar(c_upper, &c);
    }
    for lim in raw.ratios.tail_limits().into_iter().flatten() {
        match lim {
            Limit::Finite(q) => {
                let q = Scalar::Exact(q);
                if !q.is_positive() {
                    return Err(Error::RatioInfimumZero(format!("ratio rule {} tends to {q}", raw.ratios.describe())));
                }
                c_star = min_scalar(c_star, &q);
                c_upper = max_scalar(c_upper, &q);
            }
            Limit::PosInfinite | Limit::NegInfinite => {
                return Err(Error::InvalidRule(format!("ratio rule {} is unbounded", raw.ratios.describe())));
            }
        }
    }
    for lim in raw.branching.tail_limits().into_iter().flatten() {
        if let Limit::Finite(q) = lim {
            if rational_to_f64(&q) < 2.0 {
                return Err(Error::BranchingTooSmall { level: 0, value: format!("limit {q}") });
            }
        }
    }
    Ok(MoranSpec {
        dimension: raw.dimension,
        diameter: raw.diameter,
        branching: raw.branching,
        ratios: raw.ratios,
        c_star,
        c_upper,
        cache: Arc::new(RwLock::new(LevelCache::default())),
    })
}

impl PartialEq for MoranSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.diameter == other.diameter
            && self.branching == other.branching
            && self.ratios == other.ratios
    }
}

impl MoranSpec {
    fn ensure(&self, k: usize) -> Result<()> {
        if self.cache.read().expect("level cache poisoned").n.len() >= k {
            return Ok(());
        }
        let mut cache = self.cache.write().expect("level cache poisoned");
        let have = cache.n.len();
        if have >= k {
            return Ok(());
        }
        let target = k.max(2 * have).max(64);
        let ns = self.branching.eval_range(have + 1, target)?;
        let cs = self.ratios.eval_range(have + 1, target)?;
        if cache.log_phi.is_empty() {
            cache.log_phi.push(0.0);
            cache.log_r.push(0.0);
        }
        for (i, (n, c)) in ns.into_iter().zip(cs).enumerate() {
            let (nk, c) = check_level(self.dimension, have + i + 1, &n, &c)?;
            let (mut sum, mut comp) = (cache.sum_phi, cache.comp_phi);
            neumaier(&mut sum, &mut comp, (nk as f64).ln());
            cache.sum_phi = sum;
            cache.comp_phi = comp;
            cache.log_phi.push(sum + comp);
            let (mut sum, mut comp) = (cache.sum_r, cache.comp_r);
            neumaier(&mut sum, &mut comp, c.ln());
            cache.sum_r = sum;
            cache.comp_r = comp;
            cache.log_r.push(sum + comp);
            cache.n.push(nk);
            cache.c.push(c);
        }
        Ok(())
    }

    /// Branching number `n_k`, `k >= 1`.
    pub fn n(&self, k: usize) -> Result<u64> {
        self.ensure(k)?;
        Ok(self.cache.read().expect("level cache poisoned").n[k - 1])
    }

    /// Ratio `c_k`, `k >= 1`.
    pub fn c(&self, k: usize) -> Result<Scalar> {
        self.ensure(k)?;
        Ok(self.cache.read().expect("level cache poisoned").c[k - 1].clone())
    }

    /// `ln(n_1 ⋯ n_k)`.
    pub fn log_phi(&self, k: usize) -> Result<f64> {
        self.ensure(k)?;
        Ok(if k == 0 { 0.0 } else { self.cache.read().expect("level cache poisoned").log_phi[k] })
    }

    /// `ln(c_1 ⋯ c_k)` (without the seed diameter).
    pub fn log_r(&self, k: usize) -> Result<f64> {
        self.ensure(k)?;
        Ok(if k == 0 { 0.0 } else { self.cache.read().expect("level cache poisoned").log_r[k] })
    }

    /// `(ln Φ(k), ln r_k)` for `k = 0..=depth`.
    pub fn log_tables(&self, depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.ensure(depth.max(1))?;
        let cache = self.cache.read().expect("level cache poisoned");
        Ok((cache.log_phi[..=depth].to_vec(), cache.log_r[..=depth].to_vec()))
    }

    /// Branching numbers `n_1..=n_depth`.
    pub fn branching_table(&self, depth: usize) -> Result<Vec<u64>> {
        self.ensure(depth.max(1))?;
        Ok(self.cache.read().expect("level cache poisoned").n[..depth].to_vec())
    }

    /// Ratios `c_1..=c_depth`.
    pub fn ratio_table(&self, depth: usize) -> Result<Vec<Scalar>> {
        self.ensure(depth.max(1))?;
        Ok(self.cache.read().expect("level cache poisoned").c[..depth].to_vec())
    }

    pub fn ln_diameter(&self) -> f64 {
        self.diameter.ln()
    }

    /// Whether every ratio up to `depth` and the diameter are exact rationals.
    pub fn is_exact(&self, depth: usize) -> Result<bool> {
        Ok(self.diameter.is_exact() && self.ratio_table(depth)?.iter().all(Scalar::is_exact))
    }

    /// Exact `r_k = c_1 ⋯ c_k`, or `None` when some ratio is irrational.
    pub fn r_exact(&self, k: usize) -> Result<Option<BigRational>> {
        self.ensure(k.max(1))?;
        let mut cache = self.cache.write().expect("level cache poisoned");
        if cache.r_exact.is_empty() {
            cache.r_exact.push(BigRational::one());
        }
        while cache.r_exact.len() <= k {
            let j = cache.r_exact.len();
            let Some(c) = cache.c[j - 1].as_exact().cloned() else { return Ok(None) };
            let next = cache.r_exact[j - 1].clone() * c;
            cache.r_exact.push(next);
        }
        Ok(Some(cache.r_exact[k].clone()))
    }

    /// Exact `r_k |J|` when available.
    pub fn scale_exact(&self, k: usize) -> Result<Option<BigRational>> {
        match (self.r_exact(k)?, self.diameter.as_exact()) {
            (Some(r), Some(d)) => Ok(Some(r * d)),
            _ => Ok(None),
        }
    }

    /// `ln(r_k |J|)`.
    pub fn log_scale(&self, k: usize) -> Result<f64> {
        Ok(self.log_r(k)? + self.ln_diameter())
    }

    /// `α` at level `k`: `ln Φ(k) / (-ln r_k)`.
    pub fn alpha(&self, k: usize) -> Result<f64> {
        Ok(self.log_phi(k)? / -self.log_r(k)?)
    }

    /// Exact `n_1 ⋯ n_k`.
    pub fn phi_level(&self, k: usize) -> Result<BigUint> {
        self.phi_levels(0, k)
    }

    /// Exact `n_{j+1} ⋯ n_k`.
    pub fn phi_levels(&self, j: usize, k: usize) -> Result<BigUint> {
        if k <= j {
            return Ok(BigUint::one());
        }
        let ns = self.branching_table(k)?;
        Ok(ns[j..k].iter().fold(BigUint::one(), |acc, &n| acc * BigUint::from(n)))
    }

    /// The level `k >= 1` with `r_k |J| < r <= r_(k-1) |J|`.
    pub fn scale_index(&self, r: &Scalar) -> Result<usize> {
        Ok(self.scale_level(r)?.level)
    }

    /// Like [`MoranSpec::scale_index`], also reporting unresolved boundary ties.
    pub fn scale_level(&self, r: &Scalar) -> Result<ScaleLevel> {
        if !r.is_positive() {
            return Err(Error::NonPositiveScale(r.to_string()));
        }
        match r.partial_cmp_scalar(&self.diameter) {
            Some(Ordering::Greater) => {
                return Err(Error::ScaleTooLarge { r: r.to_string(), diameter: self.diameter.to_string() })
            }
            Some(Ordering::Equal) => return Ok(ScaleLevel { level: 1, ambiguous: false }),
            _ => {}
        }
        let x = r.ln() - self.ln_diameter();
        // grow the table until it reaches below x
        let mut len = 64usize;
        while self.log_r(len)? >= x {
            len *= 2;
            if len > 1 << 26 {
                return Err(Error::TooLarge(format!("scale {r} is below every tabulated level")));
            }
        }
        let (_, log_r) = self.log_tables(len)?;
        // first k with log_r[k] < x
        let mut k = log_r.partition_point(|&v| v >= x).max(1);
        let tol = 1e-9 * x.abs().max(1.0);
        let near = (log_r[k] - x).abs() < tol || (log_r[k - 1] - x).abs() < tol;
        if !near {
            return Ok(ScaleLevel { level: k, ambiguous: false });
        }
        let r_exact = r.as_exact();
        let (Some(rq), Some(d)) = (r_exact, self.diameter.as_exact()) else {
            return Ok(ScaleLevel { level: k, ambiguous: true });
        };
        if self.r_exact(k + 1)?.is_none() {
            return Ok(ScaleLevel { level: k, ambiguous: true });
        }
        let scale = |j: usize| -> Result<BigRational> { Ok(self.r_exact(j)?.expect("checked exact") * d) };
        while rq <= &scale(k)? {
            k += 1;
        }
        while k > 1 && rq > &scale(k - 1)? {
            k -= 1;
        }
        Ok(ScaleLevel { level: k, ambiguous: false })
    }

    /// `Φ(r) = n_1 ⋯ n_k` for `k = scale_index(r)`.
    pub fn phi(&self, r: &Scalar) -> Result<BigUint> {
        self.phi_level(self.scale_index(r)?)
    }

    /// `Φ(r, r') = n_{k+1} ⋯ n_{k'}` for `r' < r`.
    pub fn phi_between(&self, r: &Scalar, r_prime: &Scalar) -> Result<BigUint> {
        if r_prime.partial_cmp_scalar(r) != Some(Ordering::Less) {
            return Err(Error::ScaleOrder { r: r.to_string(), r_prime: r_prime.to_string() });
        }
        let k = self.scale_index(r)?;
        let kp = self.scale_index(r_prime)?;
        self.phi_levels(k, kp)
    }

    /// Checks that every letter is within its level's branching bound.
    pub fn check_word(&self, w: &Word) -> Result<()> {
        for (i, &l) in w.0.iter().enumerate() {
            let n = self.n(i + 1)?;
            if l < 1 || u64::from(l) > n {
                return Err(Error::WordOutOfRange(format!("letter {l} at level {} exceeds n = {n}", i + 1)));
            }
        }
        Ok(())
    }

    /// Closed-form `lim ln Φ(k) / -ln r_k` when the rules admit one.
    pub fn exact_limit(&self) -> Option<f64> {
        let n = asymptotic_mean_log(&self.branching)?;
        let c = asymptotic_mean_log(&self.ratios)?;
        Some(n / -c)
    }
}

/// Asymptotic Cesàro mean of `ln v_k` for rules with a closed form.
fn asymptotic_mean_log(rule: &SequenceRule) -> Option<f64> {
    fn limit_value(e: &Expr) -> Option<f64> {
        let vars = e.variables();
        if vars.is_empty() {
            return Some(e.eval(&[]).ok()?.to_f64());
        }
        if vars.len() != 1 {
            return None;
        }
        match e.limit_at_infinity(&vars[0])? {
            Limit::Finite(q) => Some(rational_to_f64(&q)),
            _ => None,
        }
    }
    match rule {
        SequenceRule::Constant(e) | SequenceRule::Formula(e) => {
            let v = limit_value(e)?;
            (v > 0.0).then(|| v.ln())
        }
        SequenceRule::Periodic(vs) => {
            let logs: Option<Vec<f64>> = vs.iter().map(|e| limit_value(e).filter(|v| *v > 0.0).map(f64::ln)).collect();
            let logs = logs?;
            Some(logs.iter().sum::<f64>() / logs.len() as f64)
        }
        SequenceRule::Prefix { tail, .. } => asymptotic_mean_log(tail),
        SequenceRule::Block(b) => {
            if b.density_vanishes()? {
                let v = limit_value(&b.off_block)?;
                (v > 0.0).then(|| v.ln())
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> MoranSpec {
        validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(2),
            ratios: SequenceRule::constant_ratio(1, 3),
        })
        .unwrap()
    }

    fn pab_branching() -> SequenceRule {
        SequenceRule::Block(BlockRule {
            k_m: Expr::parse("m^3").unwrap(),
            t_m: Expr::parse("k_m + m").unwrap(),
            in_block: Expr::from_int(3),
            off_block: Expr::from_int(5),
        })
    }

    #[test]
    fn block_lookup_matches_naive_loop() {
        let rule = pab_branching();
        let SequenceRule::Block(b) = &rule else { unreachable!() };
        let mut naive = vec![5i64; 10_001];
        let mut m = 1;
        while m * m * m <= 10_000 {
            for k in (m * m * m + 1)..=(m * m * m + m) {
                if k <= 10_000 {
                    naive[k as usize] = 3;
                }
            }
            m += 1;
        }
        let seq = rule.eval_range(1, 10_000).unwrap();
        for k in 1..=10_000usize {
            let v = seq[k - 1].as_integer().unwrap().to_i64().unwrap();
            assert_eq!(v, naive[k], "level {k}");
            if k % 97 == 0 || k < 40 {
                assert_eq!(b.position(k).unwrap().inside, naive[k] == 3);
            }
        }
    }

    #[test]
    fn overpacked_and_branching_errors() {
        let bad = validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(3),
            ratios: SequenceRule::constant_ratio(1, 2),
        });
        assert!(matches!(bad, Err(Error::Overpacked { level: 1, .. })));
        let bad = validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(1),
            ratios: SequenceRule::constant_ratio(1, 2),
        });
        assert!(matches!(bad, Err(Error::BranchingTooSmall { .. })));
        let bad = validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(2),
            ratios: SequenceRule::Formula(Expr::parse("1/(k+2)").unwrap()),
        });
        assert!(matches!(bad, Err(Error::RatioInfimumZero(_))));
    }

    #[test]
    fn scale_index_right_closed() {
        let s = cantor();
        assert_eq!(s.scale_index(&Scalar::ratio(1, 5)).unwrap(), 2);
        assert_eq!(s.scale_index(&Scalar::one()).unwrap(), 1);
        // r = r_k |J| lies in (r_(k+1)|J|, r_k|J|]
        assert_eq!(s.scale_index(&Scalar::ratio(1, 3)).unwrap(), 2);
        assert_eq!(s.scale_index(&Scalar::ratio(1, 9)).unwrap(), 3);
        assert_eq!(s.scale_index(&Scalar::ratio(1, 3).add(&Scalar::ratio(1, 1_000_000_000))).unwrap(), 1);
        assert!(matches!(s.scale_index(&Scalar::ratio(3, 2)), Err(Error::ScaleTooLarge { .. })));
    }

    #[test]
    fn phi_between_is_multiplicative() {
        let s = cantor();
        let r = Scalar::ratio(1, 3);
        let rp = Scalar::ratio(1, 27);
        assert_eq!(s.phi_between(&r, &rp).unwrap(), BigUint::from(4u32));
        assert_eq!(s.phi(&rp).unwrap(), s.phi(&r).unwrap() * s.phi_between(&r, &rp).unwrap());
        assert!(matches!(s.phi_between(&rp, &r), Err(Error::ScaleOrder { .. })));
    }

    #[test]
    fn block_density_and_limits() {
        let SequenceRule::Block(b) = pab_branching() else { unreachable!() };
        assert_eq!(b.density_vanishes(), Some(true));
        let dense = BlockRule {
            k_m: Expr::parse("2*m").unwrap(),
            t_m: Expr::parse("k_m + 1").unwrap(),
            in_block: Expr::from_int(3),
            off_block: Expr::from_int(2),
        };
        assert_eq!(dense.density_vanishes(), Some(false));
    }

    #[test]
    fn word_parse_and_display() {
        let w = Word::parse("121").unwrap();
        assert_eq!(w, Word(vec![1, 2, 1]));
        assert_eq!(w.to_string(), "121");
        let w = Word(vec![1, 12]);
        assert_eq!(Word::parse(&w.to_string()).unwrap(), w);
    }
}
