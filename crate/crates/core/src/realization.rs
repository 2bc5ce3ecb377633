//! Concrete geometry of a Moran recipe: nested intervals (1D) or squares (2D).
//!
//! Only per-level layouts and a per-level coordinate table are stored; every
//! element is computed from its word in `O(len)` integer additions.

use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spec::{MoranSpec, Word};

/// How the children of a basic element are placed inside it.
#[derive(Clone, Debug, PartialEq)]
pub enum Placement {
    /// Evenly spaced from left to right (1D) or on a `g x g` grid, `g = ceil(sqrt n)` (2D).
    Uniform,
    /// Two children at the two ends of the parent (opposite corners in 2D).
    Endpoints,
    /// Explicit normalized left offsets per level, cycled when shorter than the depth (1D only).
    Offsets(Vec<Vec<BigRational>>),
}

impl Placement {
    pub fn name(&self) -> &'static str {
        match self {
            Placement::Uniform => "uniform",
            Placement::Endpoints => "endpoints",
            Placement::Offsets(_) => "offsets",
        }
    }
}

/// Normalized child positions of one level: offsets are fractions of the parent extent.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub ratio: BigRational,
    /// Lower-left corner of each child; the second coordinate is zero in 1D.
    pub offsets: Vec<[BigRational; 2]>,
}

/// A basic element `J_σ`: origin (lower-left corner) and side length.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub origin: Vec<BigRational>,
    pub extent: BigRational,
}

impl Element {
    /// `[lo, hi]` of a 1D element.
    pub fn interval(&self) -> (BigRational, BigRational) {
        (self.origin[0].clone(), &self.origin[0] + &self.extent)
    }

    pub fn contains(&self, other: &Element) -> bool {
        self.origin
            .iter()
            .zip(&other.origin)
            .all(|(a, b)| a <= b && b + &other.extent <= a + &self.extent)
    }
}

/// Which child to follow below the given word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    /// Always child 1: the leftmost (lower-left) point of the element.
    Leftmost,
    /// Child `ceil(n_k / 2)`: the midpoint of the element when `n_k` is odd.
    Middle,
}

/// A point of the set, known to within `resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointAddress {
    /// The given word extended by the tail to the realization depth.
    pub word: Word,
    pub coords: Vec<BigRational>,
    pub resolution: BigRational,
}

/// Hausdorff distance between two truncated sets plus the truncation error.
#[derive(Clone, Debug, PartialEq)]
pub struct HausdorffReport {
    pub distance: BigRational,
    /// `r_KA |J_A| + r_KB |J_B|`: the limit sets' distance differs by at most this.
    pub truncation_bound: BigRational,
}

/// Integer coordinates of the realization: every coordinate equals `units / denom`.
#[derive(Debug)]
pub struct Frame {
    pub denom: BigInt,
    /// Element side length at level `k = 0..=depth`.
    pub extent: Vec<BigInt>,
    /// `offsets[k][i]`: corner of child `i + 1` relative to its level-`(k-1)` parent (index 0 unused).
    pub offsets: Vec<Vec<[BigInt; 2]>>,
}

/// A recipe realized to a fixed depth.
#[derive(Clone, Debug)]
pub struct Realization {
    pub spec: MoranSpec,
    pub placement: Placement,
    pub depth: usize,
    frame: Arc<Frame>,
}

/// Largest number of elements enumerated by exhaustive queries.
pub const ENUMERATION_LIMIT: u128 = 1 << 22;

fn int_sqrt_ceil(n: u64) -> u64 {
    let mut g = (n as f64).sqrt() as u64;
    while g * g < n {
        g += 1;
    }
    while g > 1 && (g - 1) * (g - 1) >= n {
        g -= 1;
    }
    g
}

fn exact_ratio(spec: &MoranSpec, k: usize) -> Result<BigRational> {
    spec.c(k)?
        .as_exact()
        .cloned()
        .ok_or_else(|| Error::InexactGeometry(format!("c_{k} is irrational; geometry needs exact ratios")))
}

/// Layout of the children at level `k` (placed inside a level-`(k-1)` parent).
pub fn layout(spec: &MoranSpec, placement: &Placement, k: usize) -> Result<Layout> {
    let n = spec.n(k)?;
    let c = exact_ratio(spec, k)?;
    let one = BigRational::one();
    let zero = BigRational::zero();
    let offsets = match (placement, spec.dimension) {
        (Placement::Uniform, 1) => {
            let step = &c + (&one - BigRational::from_integer(n.into()) * &c) / BigRational::from_integer((n - 1).into());
            (0..n).map(|i| [BigRational::from_integer(i.into()) * &step, zero.clone()]).collect()
        }
        (Placement::Uniform, _) => {
            let g = int_sqrt_ceil(n);
            let gq = BigRational::from_integer(g.into());
            if &gq * &c > one {
                return Err(Error::PlacementInfeasible(format!(
                    "level {k}: a {g}x{g} grid of squares of ratio {c} does not fit"
                )));
            }
            let step = &c + (&one - &gq * &c) / BigRational::from_integer((g - 1).max(1).into());
            (0..n)
                .map(|i| {
                    let (row, col) = (i / g, i % g);
                    [BigRational::from_integer(col.into()) * &step, BigRational::from_integer(row.into()) * &step]
                })
                .collect()
        }
        (Placement::Endpoints, d) => {
            if n != 2 {
                return Err(Error::PlacementInfeasible(format!("endpoints placement needs n_k = 2, got n_{k} = {n}")));
            }
            if c.clone() * BigRational::from_integer(2.into()) > one {
                return Err(Error::PlacementInfeasible(format!("level {k}: endpoint children of ratio {c} overlap")));
            }
            let far = &one - &c;
            let second = if d == 1 { zero.clone() } else { far.clone() };
            vec![[zero.clone(), zero.clone()], [far, second]]
        }
        (Placement::Offsets(levels), 1) => {
            if levels.is_empty() {
                return Err(Error::PlacementInfeasible("offsets placement with no levels".into()));
            }
            let row = &levels[(k - 1) % levels.len()];
            if row.len() as u64 != n {
                return Err(Error::PlacementInfeasible(format!(
                    "level {k}: {} offsets given for n_k = {n}",
                    row.len()
                )));
            }
            let last = &one - &c;
            for (i, o) in row.iter().enumerate() {
                if o < &zero || o > &last {
                    return Err(Error::PlacementInfeasible(format!("level {k}: offset {o} outside [0, {last}]")));
                }
                if i > 0 && o < &(&row[i - 1] + &c) {
                    return Err(Error::PlacementInfeasible(format!(
                        "level {k}: offsets must be increasing with non-overlapping children"
                    )));
                }
            }
            row.iter().map(|o| [o.clone(), zero.clone()]).collect()
        }
        (Placement::Offsets(_), _) => {
            return Err(Error::PlacementInfeasible("explicit offsets are supported in 1D only".into()))
        }
    };
    Ok(Layout { ratio: c, offsets })
}

fn square_gap(a: &[BigRational; 2], b: &[BigRational; 2], side: &BigRational, dim: u8) -> (BigRational, BigRational) {
    let axis = |i: usize| {
        let d = (&a[i] - &b[i]).abs() - side;
        if d.is_negative() {
            BigRational::zero()
        } else {
            d
        }
    };
    if dim == 1 {
        (axis(0), BigRational::zero())
    } else {
        (axis(0), axis(1))
    }
}

/// Euclidean length of `(dx, dy)`, exact when one side is zero.
fn euclid(dx: &BigRational, dy: &BigRational) -> Scalar {
    if dy.is_zero() {
        Scalar::Exact(dx.clone())
    } else if dx.is_zero() {
        Scalar::Exact(dy.clone())
    } else {
        Scalar::Real(Scalar::Exact(dx * dx + dy * dy).to_f64().sqrt())
    }
}

/// Smallest distance between distinct children at level `k`, relative to the parent extent.
///
/// Works at any level, also beyond a realization's depth; irrational ratios are
/// handled by the closed forms of the uniform and endpoint placements.
pub fn relative_min_gap(spec: &MoranSpec, placement: &Placement, k: usize) -> Result<Scalar> {
    let c = spec.c(k)?;
    if !c.is_exact() {
        let n = spec.n(k)? as f64;
        let cf = c.to_f64();
        return match (placement, spec.dimension) {
            (Placement::Uniform, 1) => Ok(Scalar::Real(((1.0 - n * cf) / (n - 1.0)).max(0.0))),
            (Placement::Uniform, _) => {
                let g = int_sqrt_ceil(n as u64) as f64;
                Ok(Scalar::Real(((1.0 - g * cf) / (g - 1.0).max(1.0)).max(0.0)))
            }
            (Placement::Endpoints, 1) => Ok(Scalar::Real(1.0 - 2.0 * cf)),
            (Placement::Endpoints, _) => Ok(Scalar::Real((1.0 - 2.0 * cf) * 2f64.sqrt())),
            (Placement::Offsets(_), _) => Err(Error::InexactGeometry(format!("c_{k} is irrational"))),
        };
    }
    let lay = layout(spec, placement, k)?;
    let mut best: Option<Scalar> = None;
    for i in 0..lay.offsets.len() {
        let js: Vec<usize> = if spec.dimension == 1 { vec![i + 1] } else { (i + 1..lay.offsets.len()).collect() };
        for j in js.into_iter().filter(|&j| j < lay.offsets.len()) {
            let (dx, dy) = square_gap(&lay.offsets[i], &lay.offsets[j], &lay.ratio, spec.dimension);
            let d = euclid(&dx, &dy);
            if best.as_ref().map_or(true, |b| d.partial_cmp_scalar(b) == Some(Ordering::Less)) {
                best = Some(d);
            }
        }
    }
    Ok(best.unwrap_or_else(Scalar::zero))
}

/// Realizes `spec` to depth `depth` with the given placement.
pub fn realize(spec: &MoranSpec, placement: Placement, depth: usize) -> Result<Realization> {
    if depth == 0 {
        return Err(Error::InvalidSpec("realization depth must be at least 1".into()));
    }
    let diameter = spec
        .diameter
        .as_exact()
        .cloned()
        .ok_or_else(|| Error::InexactGeometry("the seed diameter is irrational".into()))?;
    let mut layouts = Vec::with_capacity(depth);
    for k in 1..=depth {
        layouts.push(layout(spec, &placement, k)?);
    }
    let mut extent = vec![diameter];
    for lay in &layouts {
        let next = extent.last().expect("nonempty") * &lay.ratio;
        extent.push(next);
    }
    let mut offsets: Vec<Vec<[BigRational; 2]>> = vec![Vec::new()];
    for (k, lay) in layouts.iter().enumerate() {
        let parent = &extent[k];
        offsets.push(lay.offsets.iter().map(|[x, y]| [x * parent, y * parent]).collect());
    }
    let mut denom = BigInt::one();
    for v in extent.iter().chain(offsets.iter().flatten().flatten()) {
        denom = denom.lcm(v.denom());
    }
    let to_units = |v: &BigRational| -> BigInt { v.numer() * (&denom / v.denom()) };
    let frame = Frame {
        extent: extent.iter().map(to_units).collect(),
        offsets: offsets.iter().map(|row| row.iter().map(|[x, y]| [to_units(x), to_units(y)]).collect()).collect(),
        denom: denom.clone(),
    };
    Ok(Realization { spec: spec.clone(), placement, depth, frame: Arc::new(frame) })
}

impl Realization {
    pub fn dimension(&self) -> u8 {
        self.spec.dimension
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    fn from_units(&self, v: &BigInt) -> BigRational {
        BigRational::new(v.clone(), self.frame.denom.clone())
    }

    pub fn require_1d(&self) -> Result<()> {
        if self.dimension() != 1 {
            return Err(Error::NotOneDimensional(format!("operation needs d = 1, realization has d = {}", self.dimension())));
        }
        Ok(())
    }

    fn check_word(&self, word: &Word, max_len: usize) -> Result<()> {
        if word.len() > max_len {
            return Err(Error::WordOutOfRange(format!("word {word} is longer than {max_len}")));
        }
        self.spec.check_word(word)
    }

    /// Corner of `J_word` in frame units.
    pub fn origin_units(&self, word: &Word) -> [BigInt; 2] {
        let mut x = BigInt::zero();
        let mut y = BigInt::zero();
        for (k, &l) in word.0.iter().enumerate() {
            let o = &self.frame.offsets[k + 1][l as usize - 1];
            x += &o[0];
            y += &o[1];
        }
        [x, y]
    }

    /// `J_word` as origin and extent.
    pub fn locate(&self, word: &Word) -> Result<Element> {
        self.check_word(word, self.depth)?;
        let [x, y] = self.origin_units(word);
        let mut origin = vec![self.from_units(&x)];
        if self.dimension() == 2 {
            origin.push(self.from_units(&y));
        }
        Ok(Element { origin, extent: self.from_units(&self.frame.extent[word.len()]) })
    }

    /// Minimal distance between distinct children of `J_word`.
    pub fn min_gap(&self, word: &Word) -> Result<Scalar> {
        if word.len() >= self.depth {
            return Err(Error::WordOutOfRange(format!("word {word} has no children within depth {}", self.depth)));
        }
        self.check_word(word, self.depth)?;
        let rel = relative_min_gap(&self.spec, &self.placement, word.len() + 1)?;
        Ok(rel.mul(&Scalar::Exact(self.from_units(&self.frame.extent[word.len()]))))
    }

    /// A point of the set inside `J_word`, reached by following `tail` down to the depth.
    pub fn point_at(&self, word: &Word, tail: Tail) -> Result<PointAddress> {
        self.check_word(word, self.depth)?;
        let mut full = word.clone();
        for k in word.len() + 1..=self.depth {
            let letter = match tail {
                Tail::Leftmost => 1,
                Tail::Middle => self.spec.n(k)?.div_ceil(2) as u32,
            };
            full.0.push(letter);
        }
        let [x, y] = self.origin_units(&full);
        let ext = &self.frame.extent[self.depth];
        let (x, y) = match tail {
            Tail::Leftmost => (x, y),
            Tail::Middle => {
                // centre of the deepest element, kept in frame units by doubling the denominator
                let two = BigInt::from(2);
                let half = |v: BigInt| BigRational::new(v * &two + ext, &self.frame.denom * &two);
                let coords = if self.dimension() == 1 { vec![half(x)] } else { vec![half(x), half(y)] };
                return Ok(PointAddress { word: full, coords, resolution: self.resolution() });
            }
        };
        let mut coords = vec![self.from_units(&x)];
        if self.dimension() == 2 {
            coords.push(self.from_units(&y));
        }
        Ok(PointAddress { word: full, coords, resolution: self.resolution() })
    }

    /// `r_K |J|`.
    pub fn resolution(&self) -> BigRational {
        self.from_units(&self.frame.extent[self.depth])
    }

    /// Number of elements at `level`.
    pub fn count_at(&self, level: usize) -> Result<u128> {
        let mut total: u128 = 1;
        for k in 1..=level {
            total = total.saturating_mul(self.spec.n(k)? as u128);
        }
        Ok(total)
    }

    /// Every element at `level` in lexicographic word order, as frame-unit corners.
    pub fn corners_units(&self, level: usize) -> Result<Vec<[BigInt; 2]>> {
        if level > self.depth {
            return Err(Error::WordOutOfRange(format!("level {level} exceeds depth {}", self.depth)));
        }
        let total = self.count_at(level)?;
        if total > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!("{total} elements at level {level}")));
        }
        let mut cur = vec![[BigInt::zero(), BigInt::zero()]];
        for k in 1..=level {
            let offs = &self.frame.offsets[k];
            let mut next = Vec::with_capacity(cur.len() * offs.len());
            for p in &cur {
                for o in offs {
                    next.push([&p[0] + &o[0], &p[1] + &o[1]]);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// The 1D elements at `level`, left to right, as closed intervals.
    pub fn intervals(&self, level: usize) -> Result<Vec<(BigRational, BigRational)>> {
        self.require_1d()?;
        let ext = &self.frame.extent[level.min(self.depth)];
        Ok(self
            .corners_units(level)?
            .into_iter()
            .map(|[x, _]| (self.from_units(&x), self.from_units(&(x + ext))))
            .collect())
    }

    /// All words of length `level` in lexicographic order.
    pub fn words(&self, level: usize) -> Result<Vec<Word>> {
        let total = self.count_at(level)?;
        if total > ENUMERATION_LIMIT {
            return Err(Error::TooLarge(format!("{total} words at level {level}")));
        }
        let mut cur = vec![Word::empty()];
        for k in 1..=level {
            let n = self.spec.n(k)? as u32;
            cur = cur.iter().flat_map(|w| (1..=n).map(move |i| w.child(i))).collect();
        }
        Ok(cur)
    }
}

fn merge(mut iv: Vec<(BigRational, BigRational)>) -> Vec<(BigRational, BigRational)> {
    iv.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(BigRational, BigRational)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => {
                if b > last.1 {
                    last.1 = b;
                }
            }
            _ => out.push((a, b)),
        }
    }
    out
}

/// Distance from `x` to a merged, sorted interval union.
fn dist_to_union(x: &BigRational, u: &[(BigRational, BigRational)]) -> BigRational {
    let i = u.partition_point(|(a, _)| a <= x);
    let mut best: Option<BigRational> = None;
    let mut consider = |d: BigRational| {
        if best.as_ref().map_or(true, |b| &d < b) {
            best = Some(d);
        }
    };
    if i > 0 {
        let (_, b) = &u[i - 1];
        consider(if x <= b { BigRational::zero() } else { x - b });
    }
    if i < u.len() {
        consider(&u[i].0 - x);
    }
    best.unwrap_or_else(BigRational::zero)
}

/// `sup_{x in a} d(x, b)` for merged, sorted interval unions.
fn directed_hausdorff(a: &[(BigRational, BigRational)], b: &[(BigRational, BigRational)]) -> BigRational {
    let two = BigRational::from_integer(2.into());
    let mut best = BigRational::zero();
    let mut bump = |d: BigRational| {
        if d > best {
            best = d;
        }
    };
    for (lo, hi) in a {
        bump(dist_to_union(lo, b));
        bump(dist_to_union(hi, b));
        // the distance peaks at gap midpoints of b
        let start = b.partition_point(|(_, e)| e < lo);
        for w in b[start.saturating_sub(1)..].windows(2) {
            let mid = (&w[0].1 + &w[1].0) / &two;
            if &mid > hi {
                break;
            }
            if &mid >= lo {
                bump(dist_to_union(&mid, b));
            }
        }
    }
    best
}

/// Exact Hausdorff distance between unions of closed intervals.
pub fn hausdorff_intervals(a: Vec<(BigRational, BigRational)>, b: Vec<(BigRational, BigRational)>) -> BigRational {
    let a = merge(a);
    let b = merge(b);
    let ab = directed_hausdorff(&a, &b);
    let ba = directed_hausdorff(&b, &a);
    ab.max(ba)
}

/// Hausdorff distance between the depth-`K` element unions of two 1D realizations.
pub fn hausdorff_distance(a: &Realization, b: &Realization) -> Result<HausdorffReport> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch(a.dimension(), b.dimension()));
    }
    a.require_1d()?;
    let distance = hausdorff_intervals(a.intervals(a.depth)?, b.intervals(b.depth)?);
    Ok(HausdorffReport { distance, truncation_bound: a.resolution() + b.resolution() })
}

/// `f64` view of an exact coordinate.
pub fn to_f64(v: &BigRational) -> f64 {
    Scalar::Exact(v.clone()).to_f64()
}

/// `f64` value of a frame-unit quantity.
pub fn units_to_f64(v: &BigInt, denom: &BigInt) -> f64 {
    match (v.to_f64(), denom.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => to_f64(&BigRational::new(v.clone(), denom.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{validate, RawSpec, SequenceRule};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

    fn spec(n: i64, c: (i64, i64)) -> MoranSpec {
        validate(RawSpec {
            dimension: 1,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(n),
            ratios: SequenceRule::constant_ratio(c.0, c.1),
        })
        .unwrap()
    }

    #[test]
    fn cantor_endpoint_elements() {
        let r = realize(&spec(2, (1, 3)), Placement::Endpoints, 2).unwrap();
        assert_eq!(r.locate(&Word::parse("12").unwrap()).unwrap().interval(), (q(2, 9), q(1, 3)));
        assert_eq!(r.locate(&Word::parse("2").unwrap()).unwrap().interval(), (q(2, 3), q(1, 1)));
        assert_eq!(r.locate(&Word::empty()).unwrap().interval(), (q(0, 1), q(1, 1)));
        assert_eq!(r.min_gap(&Word::empty()).unwrap(), Scalar::ratio(1, 3));
        assert!(matches!(r.locate(&Word::parse("121").unwrap()), Err(Error::WordOutOfRange(_))));
        assert!(matches!(r.locate(&Word::parse("3").unwrap()), Err(Error::WordOutOfRange(_))));
    }

    #[test]
    fn uniform_five_sixths() {
        let r = realize(&spec(5, (1, 6)), Placement::Uniform, 1).unwrap();
        assert_eq!(r.locate(&Word::parse("3").unwrap()).unwrap().interval(), (q(5, 12), q(7, 12)));
        assert_eq!(r.min_gap(&Word::empty()).unwrap(), Scalar::ratio(1, 24));
    }

    #[test]
    fn endpoints_rejects_three_children() {
        assert!(matches!(realize(&spec(3, (1, 4)), Placement::Endpoints, 1), Err(Error::PlacementInfeasible(_))));
    }

    #[test]
    fn touching_children_have_zero_gap() {
        let r = realize(&spec(2, (1, 2)), Placement::Uniform, 2).unwrap();
        assert_eq!(r.min_gap(&Word::empty()).unwrap(), Scalar::zero());
    }

    #[test]
    fn points_and_resolution() {
        let r = realize(&spec(2, (1, 3)), Placement::Endpoints, 4).unwrap();
        let p = r.point_at(&Word::parse("2").unwrap(), Tail::Leftmost).unwrap();
        assert_eq!(p.coords, vec![q(2, 3)]);
        assert_eq!(p.resolution, q(1, 81));
        assert_eq!(p.word.len(), 4);
        let r = realize(&spec(3, (1, 5)), Placement::Uniform, 6).unwrap();
        let p = r.point_at(&Word::parse("2").unwrap(), Tail::Middle).unwrap();
        assert_eq!(p.coords, vec![q(1, 2)]);
    }

    #[test]
    fn cantor_vs_seed_hausdorff() {
        let c = realize(&spec(2, (1, 3)), Placement::Endpoints, 1).unwrap();
        let seed = vec![(q(0, 1), q(1, 1))];
        assert_eq!(hausdorff_intervals(c.intervals(1).unwrap(), seed), q(1, 6));
        assert_eq!(hausdorff_distance(&c, &c).unwrap().distance, q(0, 1));
    }

    #[test]
    fn grid_placement_in_the_plane() {
        let s = validate(RawSpec {
            dimension: 2,
            diameter: Scalar::one(),
            branching: SequenceRule::constant_int(4),
            ratios: SequenceRule::constant_ratio(1, 3),
        })
        .unwrap();
        let r = realize(&s, Placement::Uniform, 2).unwrap();
        let e = r.locate(&Word::parse("4").unwrap()).unwrap();
        assert_eq!(e.origin, vec![q(2, 3), q(2, 3)]);
        assert_eq!(r.min_gap(&Word::empty()).unwrap(), Scalar::ratio(1, 3));
        assert!(matches!(r.intervals(1), Err(Error::NotOneDimensional(_))));
    }
}
