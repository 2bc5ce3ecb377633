//! Constructed maps: uniformly disconnected decompositions, binary cylinder
//! codes, the packing subset `A(η)`, ball-selection embeddings between Moran
//! sets and the quasi-Lipschitz bijection, with measured distortion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measure::{ball_constant_1d, ball_measure_at, sandwich_bounds};
use crate::realization::{hausdorff_intervals, layout, realize, relative_min_gap, Placement, Realization, Tail};
use crate::scalar::{ln_rational, rational_to_f64, serialize_display, Scalar};
use crate::spec::{validate, MoranSpec, RawSpec, SequenceRule, Word};

/// Levels below the scale level at which candidate centres are taken.
pub const CANDIDATE_REFINEMENT: usize = 4;
/// Largest number of source leaves handled explicitly.
pub const LEAF_LIMIT: u128 = 1 << 20;
/// Minimum number of sampled pairs per splitting level.
pub const PAIRS_PER_LEVEL: usize = 200;
/// Largest pair count measured exhaustively.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 1_000_000;

/// Radii `η^k` (bilipschitz constructions) or `η^(k²)` (quasi-Lipschitz constructions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Linear,
    Quadratic,
}

impl Schedule {
    pub fn exponent(self, k: usize) -> usize {
        match self {
            Schedule::Linear => k,
            Schedule::Quadratic => k * k,
        }
    }

    pub fn radius(self, eta: &BigRational, k: usize) -> BigRational {
        pow(eta, self.exponent(k))
    }

    pub fn name(self) -> &'static str {
        match self {
            Schedule::Linear => "linear",
            Schedule::Quadratic => "quadratic",
        }
    }
}

fn pow(q: &BigRational, e: usize) -> BigRational {
    num_traits::pow(q.clone(), e)
}

fn check_eta(eta: &BigRational) -> Result<()> {
    if !eta.is_positive() || eta >= &BigRational::one() {
        return Err(Error::PreconditionViolated(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

fn exact_diameter(spec: &MoranSpec) -> Result<BigRational> {
    spec.diameter
        .as_exact()
        .cloned()
        .ok_or_else(|| Error::InexactGeometry("the seed diameter is irrational".into()))
}

fn exact_scale(spec: &MoranSpec, k: usize) -> Result<BigRational> {
    spec.scale_exact(k)?
        .ok_or_else(|| Error::InexactGeometry(format!("r_{k} is irrational; decompositions need exact ratios")))
}

// ------------------------------------------------------------- UD decomposition

/// Smallest and largest hull gap between consecutive children at level `k`, as fractions of the parent.
fn level_gap_range(spec: &MoranSpec, placement: &Placement, k: usize) -> Result<(BigRational, BigRational)> {
    let lay = layout(spec, placement, k)?;
    let mut lo: Option<BigRational> = None;
    let mut hi: Option<BigRational> = None;
    for w in lay.offsets.windows(2) {
        let g = &w[1][0] - &w[0][0] - &lay.ratio;
        if lo.as_ref().map_or(true, |l| &g < l) {
            lo = Some(g.clone());
        }
        if hi.as_ref().map_or(true, |h| &g > h) {
            hi = Some(g);
        }
    }
    // a single child has no gap; treat it as "never splits"
    Ok((lo.unwrap_or_else(BigRational::zero), hi.unwrap_or_else(BigRational::zero)))
}

/// `(C, r*)` implied by the relative gaps on levels `1..=depth`: `C = 1/s`, `r* = s |J|`.
pub fn candidate_constant(spec: &MoranSpec, placement: &Placement, depth: usize) -> Result<(BigRational, BigRational)> {
    let mut s: Option<BigRational> = None;
    for k in 1..=depth {
        let g = relative_min_gap(spec, placement, k)?
            .as_exact()
            .cloned()
            .ok_or_else(|| Error::InexactGeometry("gaps need exact ratios".into()))?;
        if g.is_zero() {
            return Err(Error::NotUniformlyDisconnectedAtScale { level: k, detail: "children touch".into() });
        }
        if s.as_ref().map_or(true, |v| &g < v) {
            s = Some(g);
        }
    }
    let s = s.ok_or_else(|| Error::PreconditionViolated("need at least one level".into()))?;
    Ok((s.recip(), s * exact_diameter(spec)?))
}

/// One level of a decomposition: the parts are exactly the cylinders of `cylinder_level`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UdLevel {
    pub k: usize,
    #[serde(serialize_with = "serialize_display")]
    pub radius: BigRational,
    pub cylinder_level: usize,
    /// Number of parts inside each part of the previous level.
    pub count: u64,
    /// Smallest distance between distinct parts (`> radius`).
    #[serde(serialize_with = "serialize_display")]
    pub min_separation: BigRational,
    /// Part diameter (`<= C radius`).
    #[serde(serialize_with = "serialize_display")]
    pub part_diameter: BigRational,
}

/// Computes the levels of the single-linkage decomposition at radii `schedule(η, k)`, `k = 1..=levels`,
/// and verifies the separation and the outer bound `C r_k`.
pub fn ud_levels(
    spec: &MoranSpec,
    placement: &Placement,
    schedule: Schedule,
    eta: &BigRational,
    levels: usize,
    constant: &BigRational,
) -> Result<Vec<UdLevel>> {
    if spec.dimension != 1 {
        return Err(Error::NotOneDimensional("decompositions are built on the line".into()));
    }
    check_eta(eta)?;
    let mut gaps: Vec<(BigRational, BigRational)> = vec![(BigRational::zero(), BigRational::zero())];
    let mut extent: Vec<BigRational> = vec![exact_diameter(spec)?];
    let mut out: Vec<UdLevel> = Vec::with_capacity(levels);
    let mut prev_level = 0usize;
    for k in 1..=levels {
        let t = schedule.radius(eta, k);
        // classify every level whose parent is larger than t; deeper gaps are automatically <= t
        let mut split_levels = 0usize;
        let mut joined_seen = false;
        let mut j = 1;
        loop {
            while extent.len() <= j {
                let next = exact_scale(spec, extent.len())?;
                extent.push(next);
            }
            if extent[j - 1] <= t {
                break;
            }
            while gaps.len() <= j {
                let (lo, hi) = level_gap_range(spec, placement, gaps.len())?;
                let parent = &extent[gaps.len() - 1];
                gaps.push((lo * parent, hi * parent));
            }
            let (lo, hi) = &gaps[j];
            let splits = spec.n(j)? >= 2 && lo > &t;
            let joins = spec.n(j)? < 2 || hi <= &t;
            if !splits && !joins {
                return Err(Error::PreconditionViolated(format!(
                    "at radius level {k} the level-{j} gaps straddle the radius; parts are not cylinders"
                )));
            }
            if splits {
                if joined_seen {
                    return Err(Error::PreconditionViolated(format!(
                        "at radius level {k} a level-{j} gap exceeds the radius below a joined level; parts are not cylinders"
                    )));
                }
                split_levels = j;
            } else {
                joined_seen = true;
            }
            j += 1;
        }
        let cyl = split_levels.max(prev_level);
        let mut count: u64 = 1;
        for l in prev_level + 1..=cyl {
            count = count
                .checked_mul(spec.n(l)?)
                .ok_or_else(|| Error::TooLarge(format!("part count at radius level {k} exceeds 64 bits")))?;
        }
        let separation = (1..=cyl).filter(|&l| spec.n(l).map_or(false, |n| n >= 2)).map(|l| gaps[l].0.clone()).min();
        let separation = separation.unwrap_or_else(|| extent[0].clone());
        if cyl > 0 && separation <= t {
            return Err(Error::NotUniformlyDisconnectedAtScale {
                level: k,
                detail: format!("parts are only {separation} apart at radius {t}"),
            });
        }
        let diameter = extent[cyl].clone();
        if diameter > constant * &t {
            return Err(Error::NotUniformlyDisconnectedAtScale {
                level: k,
                detail: format!(
                    "a part of diameter {} exceeds C r_k = {} (cylinder level {cyl})",
                    rational_to_f64(&diameter),
                    rational_to_f64(&(constant * &t))
                ),
            });
        }
        out.push(UdLevel { k, radius: t, cylinder_level: cyl, count, min_separation: separation, part_diameter: diameter });
        prev_level = cyl;
    }
    Ok(out)
}

/// Nested single-linkage decomposition of a Moran set: at radius `r_k` the parts are
/// the cylinders of level `levels[k-1].cylinder_level`.
#[derive(Clone, Debug)]
pub struct UDDecomposition {
    pub real: Realization,
    pub schedule: Schedule,
    pub eta: BigRational,
    pub constant: BigRational,
    pub levels: Vec<UdLevel>,
}

/// Decomposes `real` at radii `schedule(η, k)`, `k = 1..=levels`, with outer constant `C`
/// (default: [`candidate_constant`] over the realized levels).
pub fn decompose_ud(
    real: &Realization,
    schedule: Schedule,
    eta: &BigRational,
    levels: usize,
    constant: Option<BigRational>,
) -> Result<UDDecomposition> {
    real.require_1d()?;
    let constant = match constant {
        Some(c) => c,
        None => candidate_constant(&real.spec, &real.placement, real.depth)?.0,
    };
    let lv = ud_levels(&real.spec, &real.placement, schedule, eta, levels, &constant)?;
    let need = lv.last().map_or(0, |l| l.cylinder_level);
    if need > real.depth {
        return Err(Error::DepthExhausted(format!("the decomposition reaches cylinder level {need} beyond depth {}", real.depth)));
    }
    Ok(UDDecomposition { real: real.clone(), schedule, eta: eta.clone(), constant, levels: lv })
}

impl UDDecomposition {
    pub fn counts(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.count).collect()
    }

    /// Cylinder word of the part reached by child indices `path` (0-based, one per level).
    pub fn part_word(&self, path: &[u64]) -> Result<Word> {
        path_word(&self.real.spec, &self.levels, path)
    }

    /// Leftmost canonical point of a part.
    pub fn center(&self, path: &[u64]) -> Result<BigRational> {
        let w = self.part_word(path)?;
        Ok(self.real.point_at(&w, Tail::Leftmost)?.coords[0].clone())
    }

    /// Every part word at level `k`, left to right.
    pub fn parts(&self, k: usize) -> Result<Vec<Word>> {
        let level = if k == 0 { 0 } else { self.levels[k - 1].cylinder_level };
        self.real.words(level)
    }

    /// The child-count tree down to `depth` levels.
    pub fn count_tree(&self, depth: usize) -> Result<CountTree> {
        let counts = self.counts();
        let leaves: u128 = counts.iter().take(depth).map(|&m| m as u128).product();
        if leaves > LEAF_LIMIT {
            return Err(Error::TooLarge(format!("{leaves} parts at level {depth}")));
        }
        fn build(counts: &[u64]) -> CountTree {
            match counts.split_first() {
                None => CountTree::leaf(),
                Some((&m, rest)) => CountTree { count: m, children: (0..m).map(|_| build(rest)).collect() },
            }
        }
        Ok(build(&counts[..depth.min(counts.len())]))
    }

    /// Checks the three decomposition properties against the realized geometry at level `k`.
    pub fn verify_level(&self, k: usize) -> Result<()> {
        let lv = &self.levels[k - 1];
        let iv = self.real.intervals(lv.cylinder_level)?;
        for w in iv.windows(2) {
            if &w[1].0 - &w[0].1 <= lv.radius {
                return Err(Error::NotUniformlyDisconnectedAtScale { level: k, detail: "adjacent parts too close".into() });
            }
        }
        for (a, b) in &iv {
            if b - a > &self.constant * &lv.radius {
                return Err(Error::NotUniformlyDisconnectedAtScale { level: k, detail: "part too large".into() });
            }
        }
        Ok(())
    }
}

fn path_word(spec: &MoranSpec, levels: &[UdLevel], path: &[u64]) -> Result<Word> {
    if path.len() > levels.len() {
        return Err(Error::WordOutOfRange(format!("path of length {} exceeds {} levels", path.len(), levels.len())));
    }
    let mut letters = Vec::new();
    let mut prev = 0;
    for (lv, &c) in levels.iter().zip(path) {
        if c >= lv.count {
            return Err(Error::WordOutOfRange(format!("child {c} of {} at radius level {}", lv.count, lv.k)));
        }
        let mut digits = Vec::with_capacity(lv.cylinder_level - prev);
        let mut rest = c;
        for l in (prev + 1..=lv.cylinder_level).rev() {
            let n = spec.n(l)?;
            digits.push((rest % n) as u32 + 1);
            rest /= n;
        }
        digits.reverse();
        letters.extend(digits);
        prev = lv.cylinder_level;
    }
    Ok(Word(letters))
}

// -------------------------------------------------------------- binary cylinders

/// A tree of child counts; `children` is empty at the leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTree {
    pub count: u64,
    pub children: Vec<CountTree>,
}

impl CountTree {
    pub fn leaf() -> Self {
        CountTree { count: 1, children: Vec::new() }
    }
}

/// Binary codes for `m` children: the `2^p` words of length `p` in lexicographic
/// order, the first `m - 2^p` of them extended by one more symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SigmaChildren {
    pub p: u32,
    pub codes: Vec<Vec<u8>>,
}

/// `p` with `2^p < m <= 2^(p+1)`; 0 for `m = 1`.
pub fn split_exponent(m: u64) -> Result<u32> {
    if m == 0 {
        return Err(Error::InvalidCount("a node needs at least one child".into()));
    }
    if m == 1 {
        return Ok(0);
    }
    Ok(63 - (m - 1).leading_zeros())
}

pub fn sigma_children(m: u64) -> Result<SigmaChildren> {
    let p = split_exponent(m)?;
    if m > 1 << 24 {
        return Err(Error::TooLarge(format!("{m} binary codes")));
    }
    let codes = (0..m).map(|c| encode_child(m, p, c)).collect();
    Ok(SigmaChildren { p, codes })
}

fn bits(v: u64, len: u32) -> impl Iterator<Item = u8> {
    (0..len).rev().map(move |i| ((v >> i) & 1) as u8)
}

fn encode_child(m: u64, p: u32, c: u64) -> Vec<u8> {
    let split = m - (1u64 << p).min(m);
    if c < 2 * split {
        bits(c / 2, p).chain(std::iter::once((c % 2) as u8)).collect()
    } else {
        bits(c - split, p).collect()
    }
}

/// Reads one child index from `bits`, padding with zeros once they run out.
fn decode_child(m: u64, bits: &mut impl Iterator<Item = u8>) -> Result<u64> {
    let p = split_exponent(m)?;
    let mut next = || bits.next().unwrap_or(0) as u64;
    let mut j = 0u64;
    for _ in 0..p {
        j = (j << 1) | next();
    }
    let split = m - (1u64 << p).min(m);
    Ok(if j < split { 2 * j + next() } else { split + j })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SigmaNode {
    pub word: Vec<u8>,
    /// Splitting exponent of this node's children (0 at leaves).
    pub p: u32,
    pub children: Vec<SigmaNode>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SigmaDecomposition {
    pub root: SigmaNode,
}

pub fn sigma_decompose(counts: &CountTree) -> Result<SigmaDecomposition> {
    fn build(t: &CountTree, word: Vec<u8>) -> Result<SigmaNode> {
        if t.children.is_empty() {
            return Ok(SigmaNode { word, p: 0, children: Vec::new() });
        }
        if t.children.len() as u64 != t.count {
            return Err(Error::InvalidCount(format!("count {} with {} children", t.count, t.children.len())));
        }
        let sc = sigma_children(t.count)?;
        let mut children = Vec::with_capacity(t.children.len());
        for (child, code) in t.children.iter().zip(sc.codes) {
            let mut w = word.clone();
            w.extend(code);
            children.push(build(child, w)?);
        }
        Ok(SigmaNode { word, p: sc.p, children })
    }
    if t_invalid(counts) {
        return Err(Error::InvalidCount("a node needs at least one child".into()));
    }
    Ok(SigmaDecomposition { root: build(counts, Vec::new())? })
}

fn t_invalid(t: &CountTree) -> bool {
    t.count == 0 || t.children.iter().any(t_invalid)
}

/// `D(x, y) = 2^(-n)` with `n` the 1-based position of the first difference (0 for prefixes).
pub fn sigma_distance(x: &[u8], y: &[u8]) -> f64 {
    match x.iter().zip(y).position(|(a, b)| a != b) {
        Some(i) => 0.5f64.powi(i as i32 + 1),
        None => 0.0,
    }
}

impl SigmaDecomposition {
    /// Checks partition, counts, the exponent bracket, code lengths and sibling separation at every node.
    pub fn check(&self) -> Result<()> {
        fn walk(n: &SigmaNode) -> Result<()> {
            if n.children.is_empty() {
                return Ok(());
            }
            let m = n.children.len() as u64;
            let p = n.p;
            if m >= 2 && !((1u64 << p) < m && m <= (1u64 << (p + 1))) {
                return Err(Error::InvalidCount(format!("2^{p} < {m} <= 2^{} fails", p + 1)));
            }
            let l = n.word.len();
            // the children's cylinders cover the parent exactly: measures sum to 1 and codes are prefix-free
            let mut mass = BigRational::zero();
            for (i, c) in n.children.iter().enumerate() {
                if !c.word.starts_with(&n.word) {
                    return Err(Error::InvalidCount("child does not extend its parent".into()));
                }
                let extra = c.word.len() - l;
                if m >= 2 && extra != p as usize && extra != p as usize + 1 {
                    return Err(Error::InvalidCount(format!("child code of length {extra} with p = {p}")));
                }
                mass += BigRational::new(BigInt::one(), BigInt::one() << extra);
                for d in &n.children[i + 1..] {
                    if c.word.starts_with(&d.word) || d.word.starts_with(&c.word) {
                        return Err(Error::InvalidCount("sibling codes overlap".into()));
                    }
                    if sigma_distance(&c.word, &d.word) < 0.5f64.powi((l + p as usize + 1) as i32) {
                        return Err(Error::InvalidCount("siblings too close".into()));
                    }
                }
                walk(c)?;
            }
            if mass != BigRational::one() {
                return Err(Error::InvalidCount("children do not cover the parent".into()));
            }
            Ok(())
        }
        walk(&self.root)
    }

    pub fn leaves(&self) -> Vec<&SigmaNode> {
        fn walk<'a>(n: &'a SigmaNode, out: &mut Vec<&'a SigmaNode>) {
            if n.children.is_empty() {
                out.push(n);
            }
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

// ------------------------------------------------------------ candidate centres

/// Candidate centres of `real` in `[lo, hi]`: leftmost points of the level-`depth` elements, left to right.
fn candidates(real: &Realization, lo: &BigRational, hi: &BigRational, depth: usize) -> Vec<(BigRational, Word)> {
    let frame = real.frame();
    let denom = BigRational::from_integer(frame.denom.clone());
    let lo_u = lo * &denom;
    let hi_u = hi * &denom;
    let mut lead = BigInt::zero();
    for k in depth + 1..=real.depth {
        lead += &frame.offsets[k][0][0];
    }
    let mut out = Vec::new();
    let mut word = Vec::new();
    fn visit(
        real: &Realization,
        level: usize,
        depth: usize,
        origin: &BigInt,
        lead: &BigInt,
        lo: &BigRational,
        hi: &BigRational,
        word: &mut Vec<u32>,
        out: &mut Vec<(BigRational, Word)>,
    ) {
        let frame = real.frame();
        let a = BigRational::from_integer(origin.clone());
        let b = BigRational::from_integer(origin + &frame.extent[level]);
        if &b < lo || &a > hi {
            return;
        }
        if level == depth {
            let p = BigRational::from_integer(origin + lead);
            if &p >= lo && &p <= hi {
                out.push((p / BigRational::from_integer(frame.denom.clone()), Word(word.clone())));
            }
            return;
        }
        for (i, o) in frame.offsets[level + 1].iter().enumerate() {
            word.push(i as u32 + 1);
            visit(real, level + 1, depth, &(origin + &o[0]), lead, lo, hi, word, out);
            word.pop();
        }
    }
    visit(real, 0, depth, &BigInt::zero(), &lead, &lo_u, &hi_u, &mut word, &mut out);
    out
}

/// Leftmost greedy selection of points pairwise more than `spacing` apart, stopping at `limit`.
fn greedy(cands: &[(BigRational, Word)], spacing: &BigRational, limit: Option<usize>) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    for (i, (p, _)) in cands.iter().enumerate() {
        if limit.is_some_and(|l| picked.len() >= l) {
            break;
        }
        if picked.last().map_or(true, |&j| p - &cands[j].0 > *spacing) {
            picked.push(i);
        }
    }
    picked
}

fn candidate_depth(real: &Realization, r: &BigRational) -> Result<usize> {
    let level = real.spec.scale_index(&Scalar::Exact(r.clone()))?;
    if level > real.depth {
        return Err(Error::DepthExhausted(format!(
            "radius {} needs level {level} beyond depth {}",
            rational_to_f64(r),
            real.depth
        )));
    }
    Ok((level + CANDIDATE_REFINEMENT).min(real.depth))
}

// ---------------------------------------------------------------- packing subset

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackedNode {
    /// Index of the parent in the previous level.
    pub parent: usize,
    /// Address in the packed Moran model.
    pub word: Word,
    /// Address of the candidate element in the source.
    pub source_word: Word,
    #[serde(serialize_with = "serialize_display")]
    pub point: BigRational,
}

#[derive(Clone, Debug)]
pub struct PackedSubset {
    pub eta: BigRational,
    /// The Moran model `E(η)`: `n_k` packed balls per node, ratio `η`.
    pub spec: MoranSpec,
    pub counts: Vec<u64>,
    /// `⌊μ̲(η^(k-1)/2) / μ̄(2η^k)⌋` from certified bounds (level 1: the packing number itself).
    pub formula_counts: Vec<u64>,
    pub nodes: Vec<Vec<PackedNode>>,
    /// Hausdorff distance between the deepest centres and the realized set.
    pub hausdorff: BigRational,
    pub hausdorff_bound: BigRational,
}

impl PackedSubset {
    pub fn within_bound(&self) -> bool {
        self.hausdorff <= self.hausdorff_bound
    }
}

/// Greedy packing subset: a maximal packing of `η`-balls centred in the set, then inside
/// each ball's half-radius trace `n_k` disjoint `η^k`-balls, `k = 2..=levels`.
pub fn pack_subset(real: &Realization, eta: &BigRational, levels: usize) -> Result<PackedSubset> {
    real.require_1d()?;
    check_eta(eta)?;
    if levels == 0 {
        return Err(Error::PreconditionViolated("need at least one level".into()));
    }
    let diameter = exact_diameter(&real.spec)?;
    let two = BigRational::from_integer(2.into());
    let mut nodes: Vec<Vec<PackedNode>> = Vec::new();
    let mut counts = Vec::new();
    let mut formula_counts = Vec::new();
    for k in 1..=levels {
        let r = pow(eta, k);
        let depth = candidate_depth(real, &r)?;
        let spacing = &r * &two;
        if k == 1 {
            let cands = candidates(real, &BigRational::zero(), &diameter, depth);
            let picked = greedy(&cands, &spacing, None);
            if picked.len() < 2 {
                return Err(Error::EtaTooLarge { level: 1, detail: format!("only {} disjoint balls fit", picked.len()) });
            }
            counts.push(picked.len() as u64);
            formula_counts.push(picked.len() as u64);
            nodes.push(
                picked
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| PackedNode {
                        parent: 0,
                        word: Word(vec![i as u32 + 1]),
                        source_word: cands[j].1.clone(),
                        point: cands[j].0.clone(),
                    })
                    .collect(),
            );
            continue;
        }
        let rho = pow(eta, k - 1) / &two;
        let parents = nodes.last().expect("level 1 done");
        let mut per_parent = Vec::with_capacity(parents.len());
        let mut min_count = usize::MAX;
        let mut min_trace: Option<BigRational> = None;
        for p in parents {
            let cands = candidates(real, &(&p.point - &rho), &(&p.point + &rho), depth);
            let picked = greedy(&cands, &spacing, None);
            min_count = min_count.min(picked.len());
            let trace = ball_measure_at(real, &p.point, &rho, None)?.lo;
            if min_trace.as_ref().map_or(true, |m| &trace < m) {
                min_trace = Some(trace);
            }
            per_parent.push((cands, picked));
        }
        if min_count < 2 {
            return Err(Error::EtaTooLarge { level: k, detail: format!("a trace holds only {min_count} disjoint balls") });
        }
        let upper_level = real.spec.scale_index(&Scalar::Exact(&r * &two))?;
        let (_, upper) = sandwich_bounds(&real.spec, upper_level, &ball_constant_1d())?;
        let formula = (min_trace.expect("parents exist") / upper).floor().to_integer().to_u64().unwrap_or(0);
        counts.push(min_count as u64);
        formula_counts.push(formula);
        let mut next = Vec::with_capacity(parents.len() * min_count);
        for (pi, (p, (cands, picked))) in parents.iter().zip(per_parent).enumerate() {
            for (i, &j) in picked.iter().take(min_count).enumerate() {
                next.push(PackedNode {
                    parent: pi,
                    word: p.word.child(i as u32 + 1),
                    source_word: cands[j].1.clone(),
                    point: cands[j].0.clone(),
                });
            }
        }
        nodes.push(next);
    }
    let last = *counts.last().expect("nonempty") as i64;
    let spec = validate(RawSpec {
        dimension: 1,
        diameter: Scalar::Exact(diameter),
        branching: SequenceRule::Prefix {
            values: counts.iter().map(|&n| Expr::from_int(n as i64)).collect(),
            tail: Box::new(SequenceRule::constant_int(last)),
        },
        ratios: SequenceRule::Constant(Expr::constant(eta.clone())),
    })?;
    let deepest: Vec<(BigRational, BigRational)> =
        nodes.last().expect("nonempty").iter().map(|n| (n.point.clone(), n.point.clone())).collect();
    let level = real.spec.scale_index(&Scalar::Exact(pow(eta, levels)))?.min(real.depth);
    let set = real.intervals(level)?;
    let hausdorff = hausdorff_intervals(deepest, set);
    let hausdorff_bound = eta * BigRational::from_integer(3.into());
    Ok(PackedSubset { eta: eta.clone(), spec, counts, formula_counts, nodes, hausdorff, hausdorff_bound })
}

// ------------------------------------------------------------ embedding maps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    BallEmbedding,
    QuasiLipschitz,
}

/// One depth-`K` source address and its image.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappedLeaf {
    pub path: Vec<u64>,
    pub source_word: Word,
    pub target_word: Word,
    #[serde(serialize_with = "serialize_display")]
    pub source_point: BigRational,
    #[serde(serialize_with = "serialize_display")]
    pub target_point: BigRational,
}

/// One measured pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    /// First level at which the two addresses differ.
    pub level: usize,
    pub d_source: f64,
    pub d_target: f64,
    pub ln_d_source: f64,
    pub ln_d_target: f64,
    /// `ln(d_target / d_source)`.
    pub log_ratio: f64,
    pub sandwich_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `sup |ln d_target / ln d_source - 1|`.
    pub deviation: f64,
    pub sandwich_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionStats {
    pub pairs: usize,
    pub exhaustive: bool,
    pub max_ratio_up: f64,
    pub max_ratio_down: f64,
    /// `max(max_ratio_up, max_ratio_down)`.
    pub bilipschitz: f64,
    pub sandwich_violations: usize,
    pub levels: Vec<LevelStats>,
}

impl DistortionStats {
    /// Per-level deviations, shallow to deep.
    pub fn deviation_bins(&self) -> Vec<(usize, f64)> {
        self.levels.iter().map(|l| (l.level, l.deviation)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    pub kind: MapKind,
    pub eta: BigRational,
    pub schedule: Schedule,
    pub depth: usize,
    /// Children per node at each level (the same for every node).
    pub counts: Vec<u64>,
    pub leaves: Vec<MappedLeaf>,
    /// Pairs measured while building (the quasi-Lipschitz map samples its own).
    pub records: Vec<PairRecord>,
    pub stats: DistortionStats,
}

/// Where a ball embedding takes its source tree from.
pub enum Source<'a> {
    Moran(&'a Realization),
    Decomposition(&'a UDDecomposition),
}

impl Source<'_> {
    fn counts(&self, levels: usize) -> Result<Vec<u64>> {
        match self {
            Source::Moran(r) => {
                if levels > r.depth {
                    return Err(Error::DepthExhausted(format!("{levels} levels beyond depth {}", r.depth)));
                }
                (1..=levels).map(|k| r.spec.n(k)).collect()
            }
            Source::Decomposition(d) => {
                if levels > d.levels.len() {
                    return Err(Error::DepthExhausted(format!("{levels} levels beyond {} decomposition levels", d.levels.len())));
                }
                Ok(d.counts()[..levels].to_vec())
            }
        }
    }

    fn leaf(&self, path: &[u64]) -> Result<(Word, BigRational)> {
        match self {
            Source::Moran(r) => {
                let w = Word(path.iter().map(|&c| c as u32 + 1).collect());
                let p = r.point_at(&w, Tail::Leftmost)?.coords[0].clone();
                Ok((w, p))
            }
            Source::Decomposition(d) => {
                let w = d.part_word(path)?;
                let p = d.real.point_at(&w, Tail::Leftmost)?.coords[0].clone();
                Ok((w, p))
            }
        }
    }
}

/// Greedy ball-selection embedding: each node's children go to disjoint `η^k`-balls
/// centred in the target inside the parent's trace `B(y, η^(k-1)/2)`.
pub fn build_embedding(source: Source<'_>, target: &Realization, eta: &BigRational, levels: usize) -> Result<EmbeddingMap> {
    target.require_1d()?;
    check_eta(eta)?;
    if let Source::Moran(r) = &source {
        r.require_1d()?;
    }
    let counts = source.counts(levels)?;
    let diameter = exact_diameter(&target.spec)?;
    let two = BigRational::from_integer(2.into());
    // (path, centre, target word) of the current level's nodes
    let mut current: Vec<(Vec<u64>, BigRational, Word)> = vec![(Vec::new(), BigRational::zero(), Word::empty())];
    for (idx, &m) in counts.iter().enumerate() {
        let k = idx + 1;
        let r = pow(eta, k);
        let depth = candidate_depth(target, &r)?;
        let spacing = &r * &two;
        let rho = pow(eta, k - 1) / &two;
        let mut next = Vec::with_capacity(current.len() * m as usize);
        for (path, y, _) in &current {
            let (lo, hi) = if k == 1 { (BigRational::zero(), diameter.clone()) } else { (y - &rho, y + &rho) };
            let cands = candidates(target, &lo, &hi, depth);
            let picked = greedy(&cands, &spacing, Some(m as usize));
            if (picked.len() as u64) < m {
                return Err(Error::CapacityExhausted {
                    level: k,
                    node: format!("{path:?}"),
                    detail: format!(
                        "{} of {m} disjoint balls of radius {} fit in the trace of radius {}",
                        picked.len(),
                        rational_to_f64(&r),
                        rational_to_f64(&rho)
                    ),
                });
            }
            for (c, &j) in picked.iter().enumerate() {
                let mut p = path.clone();
                p.push(c as u64);
                next.push((p, cands[j].0.clone(), cands[j].1.clone()));
            }
        }
        current = next;
    }
    let mut leaves = Vec::with_capacity(current.len());
    for (path, y, tw) in current {
        let (sw, x) = source.leaf(&path)?;
        leaves.push(MappedLeaf { path, source_word: sw, target_word: tw, source_point: x, target_point: y });
    }
    let mut seen: Vec<&BigRational> = leaves.iter().map(|l| &l.target_point).collect();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidCount("two source addresses share an image".into()));
    }
    let mut map = EmbeddingMap {
        kind: MapKind::BallEmbedding,
        eta: eta.clone(),
        schedule: Schedule::Linear,
        depth: levels,
        counts,
        leaves,
        records: Vec::new(),
        stats: summarize(&[], true),
    };
    let (records, stats) = distortion(&map, EXHAUSTIVE_PAIR_LIMIT, 0)?;
    map.records = records;
    map.stats = stats;
    Ok(map)
}

fn record(map_eta: Option<&BigRational>, level: usize, a: &MappedLeaf, b: &MappedLeaf) -> PairRecord {
    let ds = (&a.source_point - &b.source_point).abs();
    let dt = (&a.target_point - &b.target_point).abs();
    let sandwich_ok = match map_eta {
        Some(eta) => {
            let four = BigRational::from_integer(4.into());
            let lower = pow(eta, level) / four;
            let upper = pow(eta, level - 1) * BigRational::new(3.into(), 2.into());
            dt >= lower && dt <= upper
        }
        None => true,
    };
    let ln_s = ln_rational(&ds);
    let ln_t = ln_rational(&dt);
    PairRecord {
        level,
        d_source: rational_to_f64(&ds),
        d_target: rational_to_f64(&dt),
        ln_d_source: ln_s,
        ln_d_target: ln_t,
        log_ratio: ln_t - ln_s,
        sandwich_ok,
    }
}

fn summarize(records: &[PairRecord], exhaustive: bool) -> DistortionStats {
    let mut levels: Vec<LevelStats> = Vec::new();
    let mut up: f64 = 0.0;
    let mut down: f64 = 0.0;
    let mut violations = 0;
    let mut sorted: Vec<&PairRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.level);
    for r in sorted {
        let ratio = r.log_ratio.exp();
        up = up.max(ratio);
        down = down.max(1.0 / ratio);
        let dev = if r.ln_d_source < 0.0 { (r.ln_d_target / r.ln_d_source - 1.0).abs() } else { 0.0 };
        if !r.sandwich_ok {
            violations += 1;
        }
        match levels.last_mut() {
            Some(l) if l.level == r.level => {
                l.pairs += 1;
                l.min_ratio = l.min_ratio.min(ratio);
                l.max_ratio = l.max_ratio.max(ratio);
                l.deviation = l.deviation.max(dev);
                l.sandwich_violations += usize::from(!r.sandwich_ok);
            }
            _ => levels.push(LevelStats {
                level: r.level,
                pairs: 1,
                min_ratio: ratio,
                max_ratio: ratio,
                deviation: dev,
                sandwich_violations: usize::from(!r.sandwich_ok),
            }),
        }
    }
    DistortionStats {
        pairs: records.len(),
        exhaustive,
        max_ratio_up: up,
        max_ratio_down: down,
        bilipschitz: up.max(down),
        sandwich_violations: violations,
        levels,
    }
}

fn split_level(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).position(|(x, y)| x != y).map_or(a.len(), |i| i + 1)
}

/// Distances over all leaf pairs when there are at most `pair_budget` of them, otherwise
/// [`PAIRS_PER_LEVEL`] sampled pairs per splitting level. Level sandwich checked for ball embeddings.
pub fn distortion(map: &EmbeddingMap, pair_budget: usize, seed: u64) -> Result<(Vec<PairRecord>, DistortionStats)> {
    let eta = (map.kind == MapKind::BallEmbedding).then_some(&map.eta);
    let n = map.leaves.len();
    let total = n * n.saturating_sub(1) / 2;
    let mut records = Vec::new();
    let exhaustive = total <= pair_budget.min(EXHAUSTIVE_PAIR_LIMIT);
    if exhaustive {
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&map.leaves[i], &map.leaves[j]);
                records.push(record(eta, split_level(&a.path, &b.path), a, b));
            }
        }
    } else {
        // leaves are in path order, so the leaves below a prefix form a contiguous block
        let mut block = vec![1usize; map.counts.len() + 1];
        for k in (0..map.counts.len()).rev() {
            block[k] = block[k + 1] * map.counts[k] as usize;
        }
        if block[0] != n {
            return Err(Error::InvalidCount("leaves do not form a full tree".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 1..=map.counts.len() {
            let m = map.counts[k - 1] as usize;
            if m < 2 {
                continue;
            }
            for _ in 0..PAIRS_PER_LEVEL {
                let a = rng.gen_range(0..n);
                let start = a - a % block[k - 1];
                let digit = (a % block[k - 1]) / block[k];
                let mut other: Vec<usize> = (0..m).filter(|&d| d != digit).collect();
                other.shuffle(&mut rng);
                let b = start + other[0] * block[k] + rng.gen_range(0..block[k]);
                records.push(record(eta, k, &map.leaves[a], &map.leaves[b]));
            }
        }
    }
    let stats = summarize(&records, exhaustive);
    Ok((records, stats))
}

// ---------------------------------------------------------- quasi-Lipschitz map

/// One side of a quasi-Lipschitz bijection.
#[derive(Clone, Debug)]
pub struct QlSide {
    pub real: Realization,
    pub constant: BigRational,
    pub r_star: BigRational,
    pub levels: Vec<UdLevel>,
}

#[derive(Clone, Debug)]
pub struct QlBijection {
    pub a: QlSide,
    pub b: QlSide,
    pub map: EmbeddingMap,
}

fn ql_side(spec: &MoranSpec, placement: &Placement, eta: &BigRational, levels: usize) -> Result<QlSide> {
    let finest = Schedule::Quadratic.radius(eta, levels);
    let horizon = spec.scale_index(&Scalar::Exact(finest))?;
    let (constant, r_star) = candidate_constant(spec, placement, horizon)?;
    let limit = constant.recip().min(r_star.clone());
    if eta >= &limit {
        return Err(Error::PreconditionViolated(format!(
            "eta = {eta} must be below min(1/C, r*) = {}",
            rational_to_f64(&limit)
        )));
    }
    let lv = ud_levels(spec, placement, Schedule::Quadratic, eta, levels, &constant)?;
    let depth = lv.last().map_or(1, |l| l.cylinder_level.max(1));
    let real = realize(spec, placement.clone(), depth)?;
    Ok(QlSide { real, constant, r_star, levels: lv })
}

/// The bijection `g ∘ f⁻¹` routed through binary cylinder codes of both decompositions
/// on the `η^(k²)` schedule, measured on `pairs_per_level` sampled pairs per splitting level.
pub fn ql_bijection(
    a: (&MoranSpec, &Placement),
    b: (&MoranSpec, &Placement),
    eta: &BigRational,
    levels: usize,
    pairs_per_level: usize,
    seed: u64,
) -> Result<QlBijection> {
    check_eta(eta)?;
    let side_a = ql_side(a.0, a.1, eta, levels)?;
    let side_b = ql_side(b.0, b.1, eta, levels)?;
    let counts_a: Vec<u64> = side_a.levels.iter().map(|l| l.count).collect();
    let counts_b: Vec<u64> = side_b.levels.iter().map(|l| l.count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leaves = Vec::new();
    let mut records = Vec::new();
    let leaf = |path: Vec<u64>| -> Result<MappedLeaf> {
        let sw = path_word(&side_a.real.spec, &side_a.levels, &path)?;
        let x = side_a.real.point_at(&sw, Tail::Leftmost)?.coords[0].clone();
        let mut code = Vec::new();
        for (&m, &c) in counts_a.iter().zip(&path) {
            code.extend(encode_child(m, split_exponent(m)?, c));
        }
        let mut it = code.into_iter();
        let mut target_path = Vec::with_capacity(counts_b.len());
        for &m in &counts_b {
            target_path.push(decode_child(m, &mut it)?);
        }
        let tw = path_word(&side_b.real.spec, &side_b.levels, &target_path)?;
        let y = side_b.real.point_at(&tw, Tail::Leftmost)?.coords[0].clone();
        Ok(MappedLeaf { path, source_word: sw, target_word: tw, source_point: x, target_point: y })
    };
    for k in 1..=levels {
        let m = counts_a[k - 1];
        if m < 2 {
            continue;
        }
        for _ in 0..pairs_per_level {
            let prefix: Vec<u64> = counts_a[..k - 1].iter().map(|&c| rng.gen_range(0..c)).collect();
            let i = rng.gen_range(0..m);
            let j = (i + rng.gen_range(1..m)) % m;
            let mut pa = prefix.clone();
            pa.push(i);
            let mut pb = prefix;
            pb.push(j);
            for &c in &counts_a[k..] {
                pa.push(rng.gen_range(0..c));
                pb.push(rng.gen_range(0..c));
            }
            let la = leaf(pa)?;
            let lb = leaf(pb)?;
            records.push(record(None, k, &la, &lb));
            leaves.push(la);
            leaves.push(lb);
        }
    }
    let stats = summarize(&records, false);
    let map = EmbeddingMap {
        kind: MapKind::QuasiLipschitz,
        eta: eta.clone(),
        schedule: Schedule::Quadratic,
        depth: levels,
        counts: counts_a,
        leaves,
        records,
        stats,
    };
    Ok(QlBijection { a: side_a, b: side_b, map })
}

/// Whether the last `bins` values strictly decrease.
pub fn strictly_decreasing_tail(values: &[f64], bins: usize) -> bool {
    values.len() >= bins && values[values.len() - bins..].windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn sigma_codes_follow_the_split_rule() {
        let codes = |m| sigma_children(m).unwrap().codes;
        assert_eq!(codes(3), vec![vec![0, 0], vec![0, 1], vec![1]]);
        assert_eq!(codes(4), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(codes(5), vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(codes(1), vec![Vec::<u8>::new()]);
        assert_eq!(codes(2), vec![vec![0], vec![1]]);
        assert!(sigma_children(0).is_err());
    }

    #[test]
    fn decode_inverts_encode() {
        for m in 1..40u64 {
            let p = split_exponent(m).unwrap();
            for c in 0..m {
                let mut it = encode_child(m, p, c).into_iter();
                assert_eq!(decode_child(m, &mut it).unwrap(), c);
            }
        }
    }

    #[test]
    fn cantor_parts_are_cylinders() {
        let c = corpus::cantor();
        let real = realize(&c.spec, c.placement, 8).unwrap();
        let d = decompose_ud(&real, Schedule::Linear, &q(1, 3), 6, None).unwrap();
        // gaps equal to the radius join, so radius 3^-k cuts at level k - 1
        assert_eq!(d.levels.iter().map(|l| l.cylinder_level).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(d.counts(), vec![1, 2, 2, 2, 2, 2]);
        for k in 1..=6 {
            d.verify_level(k).unwrap();
        }
    }
}
