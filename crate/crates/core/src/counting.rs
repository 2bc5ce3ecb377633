//! Exact covering and packing numbers of 1D realizations.
//!
//! Every element at a given level has the same internal layout, so a left-to-right
//! greedy sweep over the depth-`D` interval union can be memoized on
//! `(level, entry state)`. This keeps scales far below `r_20` tractable even
//! though the union has astronomically many pieces.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::realization::Realization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CountKind {
    /// Fewest closed `r`-balls covering the set.
    Covering,
    /// Most disjoint closed `r`-balls centred in the set (centres more than `2r` apart).
    Packing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    GreedyExact,
    OracleBruteforce,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountResult {
    pub r: BigRational,
    pub covering: BigUint,
    pub packing: BigUint,
    pub method: CountMethod,
}

/// A position `v + e·ε` with `ε` infinitesimal; ordered lexicographically.
///
/// Packing centres must be *strictly* more than `2r` apart, so the leftmost
/// admissible centre after a blocked point is "just to the right" of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Pos {
    v: BigInt,
    e: u64,
}

impl Pos {
    fn at(v: BigInt) -> Self {
        Pos { v, e: 0 }
    }

    fn shift(&self, d: &BigInt) -> Self {
        Pos { v: &self.v + d, e: self.e }
    }

    fn unshift(&self, d: &BigInt) -> Self {
        Pos { v: &self.v - d, e: self.e }
    }
}

struct Sweep {
    kind: CountKind,
    depth: usize,
    two_r: BigInt,
    ext: Vec<BigInt>,
    off: Vec<Vec<BigInt>>,
    leftmost: Vec<BigInt>,
    rightmost: Vec<BigInt>,
    memo: HashMap<(usize, Option<Pos>), (BigUint, Option<Pos>)>,
}

impl Sweep {
    fn new(real: &Realization, r: &BigRational, depth: usize, kind: CountKind) -> Self {
        let frame = real.frame();
        let two_r = r * BigRational::from_integer(BigInt::from(2) * &frame.denom);
        let scale = two_r.denom().clone();
        let ext: Vec<BigInt> = frame.extent[..=depth].iter().map(|e| e * &scale).collect();
        let off: Vec<Vec<BigInt>> =
            frame.offsets[..=depth].iter().map(|row| row.iter().map(|o| &o[0] * &scale).collect()).collect();
        let mut leftmost = vec![BigInt::zero(); depth + 1];
        let mut rightmost = vec![BigInt::zero(); depth + 1];
        rightmost[depth] = ext[depth].clone();
        for j in (0..depth).rev() {
            leftmost[j] = &off[j + 1][0] + &leftmost[j + 1];
            rightmost[j] = off[j + 1].last().expect("n >= 2") + &rightmost[j + 1];
        }
        Sweep { kind, depth, two_r: two_r.numer().clone(), ext, off, leftmost, rightmost, memo: HashMap::new() }
    }

    /// The first admissible point of the level-`j` piece after `st` (relative coordinates).
    fn next_after(&self, j: usize, st: Option<&Pos>) -> Option<Pos> {
        let Some(st) = st else { return Some(Pos::at(self.leftmost[j].clone())) };
        if *st >= Pos::at(self.rightmost[j].clone()) {
            return None;
        }
        if *st < Pos::at(self.leftmost[j].clone()) {
            return Some(Pos::at(self.leftmost[j].clone()));
        }
        if j == self.depth {
            return Some(match self.kind {
                CountKind::Covering => Pos::at(st.v.clone()),
                CountKind::Packing => Pos { v: st.v.clone(), e: st.e + 1 },
            });
        }
        for o in &self.off[j + 1] {
            let rel = st.unshift(o);
            if rel >= Pos::at(self.rightmost[j + 1].clone()) {
                continue;
            }
            return self.next_after(j + 1, Some(&rel)).map(|p| p.shift(o));
        }
        None
    }

    /// Count and exit state of the greedy sweep through one level-`j` piece.
    fn run(&mut self, j: usize, st: Option<Pos>) -> Result<(BigUint, Option<Pos>)> {
        let st = match st {
            Some(s) if s < Pos::at(self.leftmost[j].clone()) => None,
            other => other,
        };
        if let Some(s) = &st {
            if *s >= Pos::at(self.rightmost[j].clone()) {
                return Ok((BigUint::zero(), st));
            }
        }
        let key = (j, st.clone());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let result = if self.ext[j] <= self.two_r || j == self.depth {
            let u = self.next_after(j, st.as_ref()).expect("a point remains after the entry state");
            let len = &self.rightmost[j] - &u.v;
            let count = if self.ext[j] <= self.two_r || len.is_zero() {
                BigInt::from(1)
            } else {
                len.div_ceil(&self.two_r)
            };
            let steps = count
                .to_u64()
                .ok_or_else(|| Error::TooLarge(format!("{count} balls inside one element")))?;
            let exit = match self.kind {
                CountKind::Covering => Pos::at(&u.v + &count * &self.two_r),
                CountKind::Packing => Pos { v: &u.v + &count * &self.two_r, e: u.e + steps - 1 },
            };
            (count.to_biguint().expect("positive"), Some(exit))
        } else {
            let mut total = BigUint::zero();
            let mut cur = st;
            for i in 0..self.off[j + 1].len() {
                let o = self.off[j + 1][i].clone();
                let rel = cur.as_ref().map(|p| p.unshift(&o));
                let (c, out) = self.run(j + 1, rel)?;
                total += c;
                cur = out.map(|p| p.shift(&o));
            }
            (total, cur)
        };
        self.memo.insert(key, result.clone());
        Ok(result)
    }
}

fn check_scale(real: &Realization, r: &BigRational, depth: usize) -> Result<()> {
    real.require_1d()?;
    if !r.is_positive() {
        return Err(Error::NonPositiveScale(r.to_string()));
    }
    if depth > real.depth {
        return Err(Error::DepthExhausted(format!("count depth {depth} exceeds the realization depth {}", real.depth)));
    }
    let floor = BigRational::new(real.frame().extent[depth].clone(), real.frame().denom.clone());
    if r <= &floor {
        return Err(Error::ScaleBelowResolution(format!("r = {r} does not exceed the depth-{depth} element size {floor}")));
    }
    Ok(())
}

/// Greedy count for the depth-`depth` interval union (default: the realization depth).
pub fn count(real: &Realization, r: &BigRational, kind: CountKind, depth: Option<usize>) -> Result<BigUint> {
    let depth = depth.unwrap_or(real.depth);
    check_scale(real, r, depth)?;
    Sweep::new(real, r, depth, kind).run(0, None).map(|(c, _)| c)
}

pub fn covering_number(real: &Realization, r: &BigRational) -> Result<BigUint> {
    count(real, r, CountKind::Covering, None)
}

pub fn packing_number(real: &Realization, r: &BigRational) -> Result<BigUint> {
    count(real, r, CountKind::Packing, None)
}

/// Both counts at one scale; with `oracle` the brute-force search is run too and must agree.
pub fn counts(real: &Realization, r: &BigRational, oracle: bool) -> Result<CountResult> {
    let covering = covering_number(real, r)?;
    let packing = packing_number(real, r)?;
    if oracle {
        let iv = real.intervals(real.depth)?;
        let (oc, op) = (BigUint::from(brute::covering(&iv, r)), BigUint::from(brute::packing(&iv, r)));
        if (&oc, &op) != (&covering, &packing) {
            return Err(Error::InvalidCount(format!(
                "greedy (N, P) = ({covering}, {packing}) disagrees with brute force ({oc}, {op}) at r = {r}"
            )));
        }
        return Ok(CountResult { r: r.clone(), covering, packing, method: CountMethod::OracleBruteforce });
    }
    Ok(CountResult { r: r.clone(), covering, packing, method: CountMethod::GreedyExact })
}

/// Exhaustive counts on an explicit interval union, independent of the sweep above.
pub mod brute {
    use std::collections::{BTreeSet, HashSet};

    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    fn merged(iv: &[(BigRational, BigRational)]) -> Vec<(BigRational, BigRational)> {
        let mut v = iv.to_vec();
        v.sort();
        let mut out: Vec<(BigRational, BigRational)> = Vec::new();
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.clone().max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    /// Candidate left edges: chains of adjacent balls from every left endpoint, and
    /// right-aligned multiples ending at every right endpoint. Some optimal cover uses
    /// only these: each of its balls can start at the first uncovered point, which is a
    /// left endpoint or the previous ball's end, so a chain only needs following while
    /// its ends stay inside the set.
    fn candidates(u: &[(BigRational, BigRational)], step: &BigRational) -> Vec<BigRational> {
        let inside = |t: &BigRational| {
            let i = u.partition_point(|(a, _)| a <= t);
            i > 0 && t < &u[i - 1].1
        };
        let mut set = BTreeSet::new();
        for (a, b) in u {
            let mut t = a.clone();
            loop {
                set.insert(t.clone());
                t += step;
                if !inside(&t) {
                    break;
                }
            }
            let lo = a - step;
            let mut t = b - step;
            while t >= lo {
                set.insert(t.clone());
                t -= step;
            }
        }
        set.into_iter().collect()
    }

    fn first_uncovered(u: &[(BigRational, BigRational)], f: Option<&BigRational>) -> Option<BigRational> {
        let Some(f) = f else { return Some(u[0].0.clone()) };
        for (a, b) in u {
            if b <= f {
                continue;
            }
            return Some(if a > f { a.clone() } else { f.clone() });
        }
        None
    }

    /// Minimum number of closed balls of radius `r`, by breadth-first search over candidate balls.
    pub fn covering(iv: &[(BigRational, BigRational)], r: &BigRational) -> u128 {
        let u = merged(iv);
        if u.is_empty() {
            return 0;
        }
        let two_r = r * BigRational::from_integer(2.into());
        let cand = candidates(&u, &two_r);
        let mut layer: Vec<Option<BigRational>> = vec![None];
        let mut seen: HashSet<Option<BigRational>> = HashSet::new();
        let mut steps = 0u128;
        loop {
            let mut next = Vec::new();
            for f in &layer {
                let Some(x) = first_uncovered(&u, f.as_ref()) else { return steps };
                // the new ball must contain x, or points just right of x when x is already covered
                let covered_x = f.as_ref().map_or(false, |f| &x == f);
                // candidates are sorted: only left edges in [x - 2r, x] can contain x
                let from = cand.partition_point(|t| t < &(&x - &two_r));
                let to = cand.partition_point(|t| t <= &x);
                for t in &cand[from..to] {
                    let end = t + &two_r;
                    let ok = if covered_x { end > x } else { end >= x };
                    if ok && seen.insert(Some(end.clone())) {
                        next.push(Some(end));
                    }
                }
            }
            steps += 1;
            if next.is_empty() {
                return steps;
            }
            layer = next;
        }
    }

    /// Maximum number of points of the union with pairwise distances `> 2r`.
    ///
    /// The strict inequality is replaced by `>= 2r + δ`, with `δ` below the
    /// resolution of every quantity the answer depends on.
    pub fn packing(iv: &[(BigRational, BigRational)], r: &BigRational) -> u128 {
        let u = merged(iv);
        if u.is_empty() {
            return 0;
        }
        let two_r = r * BigRational::from_integer(2.into());
        let mut g = two_r.denom().clone();
        for (a, b) in &u {
            g = g.lcm(a.denom()).lcm(b.denom());
        }
        let span = &u.last().expect("nonempty").1 - &u[0].0;
        let bound = (span / &two_r).to_integer() + BigInt::from(u.len() as u64 + 2);
        let delta = BigRational::new(BigInt::one(), g * bound * BigInt::from(4));
        let sep = &two_r + &delta;
        let mut pts: Vec<BigRational> = Vec::new();
        for (a, b) in &u {
            for s in u.iter().take_while(|s| s.0 <= *b) {
                // chains started at any left endpoint, from their first step inside [a, b]
                let steps = if s.0 >= *a { BigInt::zero() } else { ((a - &s.0) / &sep).ceil().to_integer() };
                let mut t = &s.0 + &sep * BigRational::from_integer(steps);
                while t <= *b {
                    pts.push(t.clone());
                    t += &sep;
                }
            }
            pts.push(a.clone());
        }
        pts.sort();
        pts.dedup();
        // longest chain with gaps >= sep; chain length is monotone in the right end
        let mut prefix_best: Vec<u128> = Vec::with_capacity(pts.len());
        for p in &pts {
            let limit = p - &sep;
            let idx = pts.partition_point(|q| q <= &limit);
            let here = 1 + if idx == 0 { 0 } else { prefix_best[idx - 1] };
            let prev = prefix_best.last().copied().unwrap_or(0);
            prefix_best.push(prev.max(here));
        }
        prefix_best.last().copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::{realize, Placement};
    use crate::scalar::Scalar;
    use crate::spec::{validate, RawSpec, SequenceRule};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn cantor(depth: usize) -> Realization {
        let s = validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(2),
            ratios: SequenceRule::constant_ratio(1, 3),
        })
        .unwrap();
        realize(&s, Placement::Endpoints, depth).unwrap()
    }

    #[test]
    fn cantor_counts() {
        let r = cantor(5);
        assert_eq!(covering_number(&r, &q(1, 2)).unwrap(), BigUint::from(1u32));
        assert_eq!(covering_number(&r, &q(1, 6)).unwrap(), BigUint::from(2u32));
        assert_eq!(packing_number(&r, &q(1, 18)).unwrap(), BigUint::from(4u32));
        assert_eq!(counts(&r, &q(1, 18), true).unwrap().packing, BigUint::from(4u32));
    }

    #[test]
    fn deep_cantor_is_exact_on_aligned_scales() {
        let r = cantor(20);
        for j in 1..19u32 {
            let s = BigRational::new(BigInt::from(1), BigInt::from(3u64.pow(j)) * BigInt::from(2));
            assert_eq!(covering_number(&r, &s).unwrap(), BigUint::from(1u64 << j), "j = {j}");
        }
    }

    #[test]
    fn strict_packing_on_a_segment() {
        let iv = vec![(q(0, 1), q(1, 1))];
        assert_eq!(brute::packing(&iv, &q(1, 4)), 2);
        assert_eq!(brute::packing(&iv, &q(1, 5)), 3);
        assert_eq!(brute::covering(&iv, &q(1, 4)), 2);
        assert_eq!(brute::covering(&iv, &q(1, 5)), 3);
    }

    #[test]
    fn below_resolution_is_rejected() {
        let r = cantor(3);
        assert!(matches!(covering_number(&r, &q(1, 27)), Err(Error::ScaleBelowResolution(_))));
    }
}
