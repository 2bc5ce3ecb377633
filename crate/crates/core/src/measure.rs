//! The equal-weight Moran measure: exact cylinder masses and certified
//! brackets for closed balls.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::realization::{PointAddress, Realization, Tail};
use crate::scalar::Scalar;
use crate::spec::{MoranSpec, Word};

/// Refinement below the scale level used when no depth is requested.
pub const DEFAULT_REFINEMENT: usize = 12;

/// `ν(C_σ) = (n_1 ⋯ n_k)^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMeasure {
    pub word: Word,
    pub mass: BigRational,
}

/// Certified bracket `lo <= μ(B(x, r)) <= hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallMeasure {
    pub center: BigRational,
    pub radius: BigRational,
    pub lo: BigRational,
    pub hi: BigRational,
    /// Level `k` of the radius: `r_k |J| < r <= r_(k-1) |J|`.
    pub level: usize,
    pub depth_used: usize,
}

impl BallMeasure {
    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremesMethod {
    Exhaustive,
    Sampled,
}

/// Estimates of `inf_x μ(B(x, r))` and `sup_x μ(B(x, r))` at `r = r_k |J|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleExtremes {
    pub level: usize,
    pub mu_lower: BigRational,
    pub mu_upper: BigRational,
    pub method: ExtremesMethod,
    /// `false` for sampled estimates.
    pub certified: bool,
}

/// Mass of the cylinder of `word`.
pub fn cylinder_measure(spec: &MoranSpec, word: &Word) -> Result<CylinderMeasure> {
    spec.check_word(word)?;
    let phi = spec.phi_level(word.len())?;
    Ok(CylinderMeasure { word: word.clone(), mass: BigRational::new(BigInt::one(), BigInt::from(phi)) })
}

struct BallWalk<'a> {
    real: &'a Realization,
    /// Ball bounds and element coordinates share the scale `frame units * scale`.
    lo_edge: BigInt,
    hi_edge: BigInt,
    scale: BigInt,
    depth: usize,
    /// `Φ(depth) / Φ(k)` for `k = 0..=depth`.
    weight: Vec<BigUint>,
    inside: BigUint,
    boundary: BigUint,
}

impl BallWalk<'_> {
    fn visit(&mut self, level: usize, origin: &BigInt) {
        let frame = self.real.frame();
        let a = origin * &self.scale;
        let b = (origin + &frame.extent[level]) * &self.scale;
        if b < self.lo_edge || a > self.hi_edge {
            return;
        }
        if a >= self.lo_edge && b <= self.hi_edge {
            self.inside += &self.weight[level];
            return;
        }
        // touching in a single point carries no mass
        if b == self.lo_edge || a == self.hi_edge {
            return;
        }
        if level == self.depth {
            self.boundary += &self.weight[level];
            return;
        }
        for o in &frame.offsets[level + 1] {
            let child = origin + &o[0];
            self.visit(level + 1, &child);
        }
    }
}

/// Certified bracket for `μ(B(x, r))`, refining boundary cylinders down to `depth`
/// (default: the radius level plus [`DEFAULT_REFINEMENT`], capped at the realization depth).
pub fn ball_measure_at(real: &Realization, x: &BigRational, r: &BigRational, depth: Option<usize>) -> Result<BallMeasure> {
    real.require_1d()?;
    let level = real.spec.scale_index(&Scalar::Exact(r.clone()))?;
    let depth = match depth {
        Some(d) if d > real.depth => {
            return Err(Error::DepthExhausted(format!("refinement depth {d} exceeds the realization depth {}", real.depth)))
        }
        Some(d) => d,
        None => (level + DEFAULT_REFINEMENT).min(real.depth),
    };
    let frame = real.frame();
    let denom = BigRational::from_integer(frame.denom.clone());
    let lo = (x - r) * &denom;
    let hi = (x + r) * &denom;
    let scale = num_integer::Integer::lcm(lo.denom(), hi.denom());
    let to_int = |v: &BigRational| v.numer() * (&scale / v.denom());
    let phi = real.spec.branching_table(depth.max(1))?;
    let mut weight = vec![BigUint::one(); depth + 1];
    for k in (0..depth).rev() {
        weight[k] = &weight[k + 1] * BigUint::from(phi[k]);
    }
    let total = weight[0].clone();
    let mut walk = BallWalk {
        real,
        lo_edge: to_int(&lo),
        hi_edge: to_int(&hi),
        scale: scale.clone(),
        depth,
        weight,
        inside: BigUint::zero(),
        boundary: BigUint::zero(),
    };
    walk.visit(0, &BigInt::zero());
    let den = BigInt::from(total);
    let lo_mass = BigRational::new(BigInt::from(walk.inside.clone()), den.clone());
    let hi_mass = BigRational::new(BigInt::from(walk.inside + walk.boundary), den);
    Ok(BallMeasure { center: x.clone(), radius: r.clone(), lo: lo_mass, hi: hi_mass, level, depth_used: depth })
}

/// [`ball_measure_at`] centred at a point of the set.
pub fn ball_measure(real: &Realization, x: &PointAddress, r: &BigRational, depth: Option<usize>) -> Result<BallMeasure> {
    ball_measure_at(real, &x.coords[0], r, depth)
}

/// `Φ(k)^{-1}` and `C_E Φ(k-1)^{-1}`: the two sides of the ball-mass sandwich at level `k`.
pub fn sandwich_bounds(spec: &MoranSpec, level: usize, c_e: &BigRational) -> Result<(BigRational, BigRational)> {
    let lower = BigRational::new(BigInt::one(), BigInt::from(spec.phi_level(level)?));
    let upper = c_e * BigRational::new(BigInt::one(), BigInt::from(spec.phi_level(level - 1)?));
    Ok((lower, upper))
}

/// `C_E = 2^d vol(B(0,1)) / vol(J)` for a seed interval normalized to unit length: 4.
pub fn ball_constant_1d() -> BigRational {
    BigRational::from_integer(4.into())
}

/// `inf` / `sup` of `μ(B(x, r_k |J|))` over canonical points (exhaustive) or random points (sampled).
pub fn scale_extremes(real: &Realization, level: usize, mode: ExtremesMode) -> Result<ScaleExtremes> {
    real.require_1d()?;
    if level > real.depth {
        return Err(Error::DepthExhausted(format!("level {level} exceeds the realization depth {}", real.depth)));
    }
    let r = real
        .spec
        .scale_exact(level)?
        .ok_or_else(|| Error::InexactGeometry("scale extremes need exact ratios".into()))?;
    let r = if level == 0 { real.spec.diameter.as_exact().cloned().expect("exact realization") } else { r };
    let points: Vec<PointAddress> = match mode {
        ExtremesMode::Exhaustive => {
            let mut pts = Vec::new();
            for w in real.words(level)? {
                pts.push(real.point_at(&w, Tail::Leftmost)?);
                pts.push(real.point_at(&w, Tail::Middle)?);
            }
            pts
        }
        ExtremesMode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| random_point(real, &mut rng)).collect::<Result<_>>()?
        }
    };
    let mut lower: Option<BigRational> = None;
    let mut upper: Option<BigRational> = None;
    for p in &points {
        let b = ball_measure(real, p, &r, None)?;
        if lower.as_ref().map_or(true, |l| &b.lo < l) {
            lower = Some(b.lo.clone());
        }
        if upper.as_ref().map_or(true, |u| &b.hi > u) {
            upper = Some(b.hi);
        }
    }
    let (method, certified) = match mode {
        ExtremesMode::Exhaustive => (ExtremesMethod::Exhaustive, true),
        ExtremesMode::Sampled { .. } => (ExtremesMethod::Sampled, false),
    };
    Ok(ScaleExtremes {
        level,
        mu_lower: lower.unwrap_or_else(BigRational::one),
        mu_upper: upper.unwrap_or_else(BigRational::one),
        method,
        certified,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremesMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// A uniformly random depth-`K` address (each letter uniform), as its leftmost point.
pub fn random_point<R: Rng>(real: &Realization, rng: &mut R) -> Result<PointAddress> {
    let mut w = Word::empty();
    for k in 1..=real.depth {
        let n = real.spec.n(k)? as u32;
        w.0.push(rng.gen_range(1..=n));
    }
    real.point_at(&w, Tail::Leftmost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::{realize, Placement};
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
    fn cylinder_masses() {
        let r = cantor(3);
        assert_eq!(cylinder_measure(&r.spec, &Word::empty()).unwrap().mass, q(1, 1));
        assert_eq!(cylinder_measure(&r.spec, &Word::parse("121").unwrap()).unwrap().mass, q(1, 8));
    }

    #[test]
    fn cantor_balls() {
        let r = cantor(8);
        let b = ball_measure_at(&r, &q(0, 1), &q(1, 3), None).unwrap();
        assert_eq!((b.lo.clone(), b.hi.clone()), (q(1, 2), q(1, 2)));
        let b = ball_measure_at(&r, &q(0, 1), &q(1, 1), None).unwrap();
        assert_eq!((b.lo, b.hi), (q(1, 1), q(1, 1)));
        // a ball cutting through cylinders gets a strict bracket that narrows with depth
        let coarse = ball_measure_at(&r, &q(0, 1), &q(1, 4), Some(4)).unwrap();
        let fine = ball_measure_at(&r, &q(0, 1), &q(1, 4), Some(8)).unwrap();
        assert!(coarse.lo <= fine.lo && fine.hi <= coarse.hi);
    }

    #[test]
    fn cantor_level_one_extremes() {
        let r = cantor(10);
        let e = scale_extremes(&r, 1, ExtremesMode::Exhaustive).unwrap();
        assert!(e.mu_lower >= q(1, 4) && e.mu_upper <= q(1, 2));
        assert!(e.mu_lower <= e.mu_upper);
    }
}
