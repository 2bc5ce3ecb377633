//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Expected values are computed here from closed forms or by independent
//! routines, never read back from the code under test.

use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moranlab::corpus::{self, Named};
use moranlab::counting::{self, brute};
use moranlab::criteria;
use moranlab::embedding::{build_embedding, pack_subset, ql_bijection, sigma_decompose, CountTree, SigmaNode, Source};
use moranlab::measure::{ball_measure, random_point};
use moranlab::profiles::{chi, chi_range, covering_profile, dims, f_alpha_bins, f_alpha_probes};
use moranlab::realization::{realize, Realization, Tail};
use moranlab::reproduce::reproduce;
use moranlab::{Error, Word};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn ln2() -> f64 {
    2f64.ln()
}

fn ln3() -> f64 {
    3f64.ln()
}

/// Least-squares slope of `y` on `x`.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().expect("finite").ln();
    }
    let shift = bits - 900;
    (n >> shift).to_f64().expect("finite").ln() + shift as f64 * ln2()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------- criteria

fn c1_dimensions() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;

    let cantor = corpus::cantor();
    let target = ln2() / ln3();
    let d = dims(&cantor.spec, 1000, 0.5).unwrap();
    let exact_ok = d.exact_limit.is_some_and(|v| (v - target).abs() <= 1e-9);
    // covering counts at r = 3^-k on a depth-22 realization; slope of ln N against -ln r
    let real = realize(&cantor.spec, cantor.placement.clone(), 22).unwrap();
    let scales: Vec<BigRational> = (10..=20).map(|k| q(1, 3i64.pow(k))).collect();
    let (_, counts) = covering_profile(&real, &scales, false).unwrap();
    let pts: Vec<(f64, f64)> = scales.iter().zip(&counts).map(|(r, c)| (-r.to_f64().unwrap().ln(), ln_big(&c.covering))).collect();
    let fitted = slope(&pts);
    let cover_ok = (fitted - target).abs() <= 1e-3;
    ok &= exact_ok && cover_ok;
    notes.push(format!("cantor exact {:?} covering slope {fitted:.6}", d.exact_limit));

    let pab = corpus::pab();
    let limit = 5f64.ln() / 6f64.ln();
    let d = dims(&pab.spec, 1000, 0.5).unwrap();
    let pab_ok = d.exact_limit.is_some_and(|v| (v - limit).abs() <= 1e-9)
        && (d.dim_h_window - limit).abs() <= 0.02
        && (d.dim_p_window - limit).abs() <= 0.02;
    ok &= pab_ok;
    notes.push(format!("pab window [{:.4}, {:.4}] vs {limit:.6}", d.dim_h_window, d.dim_p_window));

    let exud = corpus::ex_ud();
    let limit = ln3() / 6f64.ln();
    let d = dims(&exud.spec, 1000, 0.5).unwrap();
    let exud_ok = (d.dim_h_window - limit).abs() <= 0.02 && (d.dim_p_window - limit).abs() <= 0.02;
    ok &= exud_ok;
    notes.push(format!("ex_ud window [{:.4}, {:.4}] vs {limit:.6}", d.dim_h_window, d.dim_p_window));

    let ex = corpus::ex();
    let d = dims(&ex.spec, 1000, 0.5).unwrap();
    let ex_ok = d.exact_limit == Some(1.0) && d.dim_h_window >= 0.98;
    ok &= ex_ok;
    notes.push(format!("ex exact {:?} window min {:.4}", d.exact_limit, d.dim_h_window));

    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(5);
    outcome(ok, format!("{}; {:.2?}", notes.join("; "), elapsed))
}

fn c2_measure_ratio() -> Outcome {
    let start = Instant::now();
    let pab = corpus::pab();
    let real = realize(&pab.spec, pab.placement.clone(), 42).unwrap();
    let mut ratios = Vec::new();
    let mut ok = true;
    for m in 1..=3i64 {
        // block m occupies levels (m^3, m^3 + m]
        let k = (m * m * m) as usize;
        let t = k + m as usize;
        let word = Word(vec![1; k]);
        let x = real.point_at(&word, Tail::Middle).unwrap();
        let half = |level: usize| pab.spec.scale_exact(level).unwrap().unwrap() / q(2, 1);
        let outer = ball_measure(&real, &x, &half(k), None).unwrap();
        let inner = ball_measure(&real, &x, &half(t), None).unwrap();
        ok &= outer.is_exact() && inner.is_exact();
        let ratio = &outer.lo / &inner.lo;
        ok &= ratio == BigRational::from_integer(BigInt::from(3).pow(m as u32));
        // the outer ball is exactly the level-k element through the all-ones word
        let phi: BigUint = (1..=k).map(|j| BigUint::from(pab.spec.n(j).unwrap())).product();
        ok &= outer.lo == BigRational::new(BigInt::one(), BigInt::from(phi));
        ratios.push(ratio.to_string());
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(10);
    outcome(ok, format!("ratios {} (expected 3, 9, 27); {:.2?}", ratios.join(", "), elapsed))
}

fn exact_specs() -> Vec<Named> {
    vec![corpus::cantor(), corpus::pab(), corpus::example2_alternating(), corpus::ex()]
}

/// A random exact scale inside level `j`'s bucket `(r_j |J|, r_(j-1) |J|]`.
fn random_scale(spec: &moranlab::MoranSpec, j: usize, rng: &mut ChaCha8Rng) -> BigRational {
    let top = spec.scale_exact(j - 1).unwrap().unwrap();
    let bottom = spec.scale_exact(j).unwrap().unwrap();
    let theta = q(rng.gen_range(0..1000), 1000);
    &top - theta * (&top - &bottom)
}

fn c3_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut probes = 0;
    let mut violations = 0;
    let c_e = q(4, 1);
    for n in exact_specs() {
        let real = realize(&n.spec, n.placement.clone(), 16).unwrap();
        for _ in 0..500 {
            let x = random_point(&real, &mut rng).unwrap();
            let j = rng.gen_range(1..=12);
            let r = random_scale(&n.spec, j, &mut rng);
            let b = ball_measure(&real, &x, &r, None).unwrap();
            // theta in [0, 1) keeps r in the right-closed bucket of level j
            let k = j;
            let phi = |level: usize| -> BigInt { (1..=level).map(|i| BigInt::from(n.spec.n(i).unwrap())).product() };
            let lower = BigRational::new(BigInt::one(), phi(k));
            let upper = &c_e * BigRational::new(BigInt::one(), phi(k - 1));
            probes += 1;
            if b.level != k || !(lower <= b.lo && b.lo <= b.hi && b.hi <= upper) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{probes} probes on 4 specs, {violations} violations"))
}

fn c4_counting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let specs = exact_specs();
    let reals: Vec<Realization> = specs.iter().map(|n| realize(&n.spec, n.placement.clone(), 10).unwrap()).collect();
    let mut chain_fail = 0;
    for _ in 0..200 {
        let i = rng.gen_range(0..reals.len());
        let real = &reals[i];
        let j = rng.gen_range(1..=6);
        let r = random_scale(&real.spec, j, &mut rng);
        let n2 = counting::covering_number(real, &(&r * q(2, 1))).unwrap();
        let p = counting::packing_number(real, &r).unwrap();
        let nh = counting::covering_number(real, &(&r / q(2, 1))).unwrap();
        if !(n2 <= p && p <= nh) {
            chain_fail += 1;
        }
    }
    // greedy against exhaustive search on every depth <= 6 instance of small specs
    let mut instances = 0;
    let mut mismatches = 0;
    for n in [corpus::cantor(), corpus::ex(), corpus::example2_binary(), corpus::example2_alternating(), corpus::touching()] {
        for depth in 1..=6 {
            let real = realize(&n.spec, n.placement.clone(), depth).unwrap();
            let iv = real.intervals(depth).unwrap();
            for j in 1..=depth {
                for theta in [q(0, 1), q(1, 3), q(1, 2), q(7, 8)] {
                    let top = n.spec.scale_exact(j - 1).unwrap().unwrap();
                    let bottom = n.spec.scale_exact(j).unwrap().unwrap();
                    let r = &top - theta * (&top - &bottom);
                    if r <= n.spec.scale_exact(depth).unwrap().unwrap() {
                        continue;
                    }
                    instances += 1;
                    let g = counting::counts(&real, &r, false).unwrap();
                    if g.covering != BigUint::from(brute::covering(&iv, &r)) || g.packing != BigUint::from(brute::packing(&iv, &r)) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    outcome(
        chain_fail == 0 && mismatches == 0,
        format!("200 chain cases, {chain_fail} failures; {instances} depth<=6 instances, {mismatches} greedy/brute-force mismatches"),
    )
}

/// Non-increasing up to a relative tolerance for floating-point drift.
fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
}

fn c5_f_alpha() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [corpus::cantor(), corpus::pab(), corpus::example2_binary(), corpus::example2_ternary(), corpus::example2_alternating()] {
        let real = realize(&n.spec, n.placement.clone(), 302).unwrap();
        let bins = f_alpha_bins(&f_alpha_probes(&real, 1..=300).unwrap());
        // the last bin may be incomplete
        let complete = &bins[..bins.len() - 1];
        let tail: Vec<f64> = complete[complete.len() - 3..].iter().map(|b| b.1).collect();
        let this = non_increasing(&tail);
        ok &= this;
        notes.push(format!("{} {:.4?}{}", n.name, tail, if this { "" } else { " (increasing)" }));
    }
    // the perfect-square mixture: bounded, with decelerating growth
    let sq = corpus::example2_squares();
    let real = realize(&sq.spec, sq.placement.clone(), 302).unwrap();
    let bins = f_alpha_bins(&f_alpha_probes(&real, 1..=300).unwrap());
    let complete = &bins[..bins.len() - 1];
    let tail: Vec<(f64, f64)> = complete[complete.len() - 3..].iter().map(|b| (b.0 as f64, b.1.log2())).collect();
    let s = slope(&tail);
    notes.push(format!(
        "{} tail {:.4?}: not monotone, log2-slope {s:.4} <= 0.25 (bounded)",
        sq.name,
        tail.iter().map(|t| 2f64.powf(t.1)).collect::<Vec<_>>()
    ));
    outcome(ok && s <= 0.25, notes.join("; "))
}

fn c6_ud() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let cantor = corpus::cantor();
    let v = criteria::ud_sufficient(&cantor.spec, 1, 400, criteria::DEFAULT_SLACK).unwrap();
    ok &= v.holds() && (v.value - ln2() / ln3()).abs() <= 1e-12 && 1.0 - v.value > 0.3;
    notes.push(format!("cantor {:.6}", v.value));
    let bound = ln3() / 5f64.ln();
    for n in [corpus::example2_binary(), corpus::example2_ternary(), corpus::example2_squares(), corpus::example2_alternating()] {
        let v = criteria::ud_sufficient(&n.spec, 1, 400, criteria::DEFAULT_SLACK).unwrap();
        ok &= v.holds() && v.value <= bound + 1e-12 && 1.0 - v.value > 0.3;
        notes.push(format!("{} {:.6}", n.name, v.value));
    }
    let e = corpus::ex_ud();
    let suff = criteria::ud_sufficient(&e.spec, 1, 125_050, criteria::DEFAULT_SLACK).unwrap();
    ok &= suff.fails() && suff.value >= 0.99;
    let real = realize(&e.spec, e.placement.clone(), 4).unwrap();
    let direct = criteria::ud_direct(&real, 125_050).unwrap();
    ok &= direct.fails();
    let mut gaps = Vec::new();
    for m in [5u64, 10, 50] {
        let level = (m.pow(3) + 1) as f64;
        let got = direct.trace.iter().find(|t| t.0 == level).map(|t| t.1);
        let want = 1.0 / (4.0 * m as f64);
        ok &= got.is_some_and(|g| (g - want).abs() <= 1e-12);
        gaps.push(format!("m={m}: {got:?}"));
    }
    notes.push(format!("ex_ud sufficient {:.5} ({:?}), direct {:?} gaps {}", suff.value, suff.verdict, direct.verdict, gaps.join(" ")));
    outcome(ok, notes.join("; "))
}

fn c7_embedding() -> Outcome {
    let start = Instant::now();
    let a = corpus::example2_binary();
    let b = corpus::example2_ternary();
    let grid = criteria::default_r0_grid(&a.spec, &b.spec);
    let cond = criteria::embed_condition(&a.spec, &b.spec, &grid, 200, criteria::DEFAULT_SLACK).unwrap();
    let mut ok = cond.holds() && (cond.value - ln2() / ln3()).abs() <= 1e-9;
    let eta = q(1, 5);
    let mut ls = Vec::new();
    let mut exact_violations = 0usize;
    for k in [6usize, 7, 8] {
        let src = realize(&a.spec, a.placement.clone(), k).unwrap();
        let tgt = realize(&b.spec, b.placement.clone(), k + 6).unwrap();
        let map = build_embedding(Source::Moran(&src), &tgt, &eta, k).unwrap();
        ls.push(map.stats.bilipschitz);
        ok &= map.stats.exhaustive && map.stats.sandwich_violations == 0;
        // independent exact check of the level sandwich on every pair
        let leaves = &map.leaves;
        for i in 0..leaves.len() {
            for j in i + 1..leaves.len() {
                let level = leaves[i].path.iter().zip(&leaves[j].path).take_while(|(x, y)| x == y).count() + 1;
                let d = (&leaves[i].target_point - &leaves[j].target_point).abs();
                let lo = eta.clone().pow(level as i32) / q(4, 1);
                let hi = eta.clone().pow(level as i32 - 1) * q(3, 2);
                if d < lo || d > hi {
                    exact_violations += 1;
                }
            }
        }
    }
    ok &= exact_violations == 0;
    let (lmin, lmax) = ls.iter().fold((f64::INFINITY, 0f64), |(a, b), &l| (a.min(l), b.max(l)));
    ok &= (lmax - lmin) / lmin < 0.25;
    let src = realize(&b.spec, b.placement.clone(), 6).unwrap();
    let tgt = realize(&a.spec, a.placement.clone(), 12).unwrap();
    let neg = build_embedding(Source::Moran(&src), &tgt, &eta, 6);
    let neg_ok = matches!(neg, Err(Error::CapacityExhausted { .. }));
    ok &= neg_ok;
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    outcome(
        ok,
        format!(
            "sup {:.12}; L at K=6,7,8 {:.5?}; {exact_violations} exact sandwich violations; 3->2 CapacityExhausted: {neg_ok}; {:.2?}",
            cond.value, ls, elapsed
        ),
    )
}

/// Hausdorff distance between a finite point set and a union of disjoint closed intervals.
fn hausdorff_points_intervals(points: &[BigRational], iv: &[(BigRational, BigRational)]) -> BigRational {
    let mut iv = iv.to_vec();
    iv.sort();
    let mut pts = points.to_vec();
    pts.sort();
    let dist_to_iv = |x: &BigRational| {
        let i = iv.partition_point(|(a, _)| a <= x);
        let mut d: Option<BigRational> = None;
        for (a, b) in &iv[i.saturating_sub(1)..(i + 1).min(iv.len())] {
            let v = if x < a { a - x } else if x > b { x - b } else { BigRational::zero() };
            d = Some(d.map_or(v.clone(), |d| d.min(v)));
        }
        d.expect("nonempty")
    };
    let dist_to_pts = |x: &BigRational| {
        let i = pts.partition_point(|p| p < x);
        pts[i.saturating_sub(1)..(i + 1).min(pts.len())].iter().map(|p| (p - x).abs()).min().expect("nonempty")
    };
    let a = pts.iter().map(dist_to_iv).max().expect("nonempty");
    // the farthest point of an interval from a finite set is an endpoint or a midpoint between consecutive points
    let mut b = BigRational::zero();
    for (lo, hi) in &iv {
        let mut cands = vec![lo.clone(), hi.clone()];
        let from = pts.partition_point(|p| p < lo).saturating_sub(1);
        let to = (pts.partition_point(|p| p <= hi) + 1).min(pts.len());
        for w in pts[from..to].windows(2) {
            let mid = (&w[0] + &w[1]) / q(2, 1);
            if &mid >= lo && &mid <= hi {
                cands.push(mid);
            }
        }
        for c in cands {
            b = b.max(dist_to_pts(&c));
        }
    }
    a.max(b)
}

fn c8_packing_subset() -> Outcome {
    let c = corpus::cantor();
    let real = realize(&c.spec, c.placement.clone(), 17).unwrap();
    let iv = real.intervals(17).unwrap();
    let mut ok = true;
    let mut chis = Vec::new();
    let mut notes = Vec::new();
    for (den, levels) in [(9i64, 6usize), (27, 4), (81, 3)] {
        let eta = q(1, den);
        let p = pack_subset(&real, &eta, levels).unwrap();
        let centres: Vec<BigRational> = p.nodes.last().unwrap().iter().map(|n| n.point.clone()).collect();
        let d = hausdorff_points_intervals(&centres, &iv);
        let bound = &eta * q(3, 1);
        ok &= d <= bound && p.within_bound();
        let floor = -(levels as f64) * (den as f64).ln();
        let est = chi_range(&p.spec, &c.spec, 0.0, floor, 0.5).unwrap().estimate;
        chis.push(est);
        notes.push(format!("1/{den}: counts {:?} d_H {:.4} <= {:.4}", p.counts, d.to_f64().unwrap(), bound.to_f64().unwrap()));
    }
    ok &= chis.windows(2).all(|w| w[1] < w[0]);
    outcome(ok, format!("{}; chi {:.4?}", notes.join("; "), chis))
}

fn c9_quasi_lipschitz() -> Outcome {
    let sq = corpus::example2_squares();
    let bin = corpus::example2_binary();
    let ter = corpus::example2_ternary();
    let eta = q(1, 6);
    let pos = ql_bijection((&sq.spec, &sq.placement), (&bin.spec, &bin.placement), &eta, 12, 200, 9).unwrap();
    let neg = ql_bijection((&bin.spec, &bin.placement), (&ter.spec, &ter.placement), &eta, 12, 200, 9).unwrap();
    // recompute the per-level deviation from the raw pairs
    let recompute = |records: &[moranlab::embedding::PairRecord]| {
        let mut by_level: std::collections::BTreeMap<usize, f64> = Default::default();
        for p in records {
            let dev = (p.ln_d_target / p.ln_d_source - 1.0).abs();
            let e = by_level.entry(p.level).or_insert(0.0);
            *e = e.max(dev);
        }
        by_level.into_values().collect::<Vec<f64>>()
    };
    let pos_bins = recompute(&pos.map.records);
    let neg_bins = recompute(&neg.map.records);
    let reported: Vec<f64> = pos.map.stats.deviation_bins().iter().map(|b| b.1).collect();
    let agree = reported.len() == pos_bins.len() && reported.iter().zip(&pos_bins).all(|(a, b)| (a - b).abs() <= 1e-12);
    let tail = &pos_bins[pos_bins.len() - 3..];
    let decreasing = tail[0] > tail[1] && tail[1] > tail[2];
    let neg_tail = &neg_bins[neg_bins.len() - 3..];
    let stable = neg_tail.iter().all(|&v| v > 0.3);
    outcome(
        agree && decreasing && stable,
        format!("squares/binary last bins {tail:.4?}; binary/ternary (c = 1/5) last bins {neg_tail:.4?}"),
    )
}

fn c10_certificate() -> Outcome {
    let p = corpus::pab();
    // block 4 ends at t_4 = 64 + 4
    let real = realize(&p.spec, p.placement.clone(), 80).unwrap();
    let s_pos = 4f64.ln() / 6f64.ln();
    let cert = criteria::non_embeddability_certificate(s_pos, &real, 4).unwrap();
    let pts: Vec<(f64, f64)> = cert.rows.iter().map(|r| (r.m as f64, (r.regular_ratio / 3f64.powi(r.m as i32)).ln())).collect();
    let fitted = slope(&pts);
    let want = s_pos * 6f64.ln() - ln3();
    let pos_ok = cert.rows.len() == 4 && ((fitted - want) / want).abs() <= 0.05 && ((cert.verdict.value - want) / want).abs() <= 0.05;
    let s_zero = ln3() / 6f64.ln();
    let zero = criteria::non_embeddability_certificate(s_zero, &real, 4).unwrap();
    let zero_ok = zero.verdict.value.abs() <= 1e-6;
    outcome(
        pos_ok && zero_ok,
        format!("slope {:.6} (independent fit {fitted:.6}, target ln(4/3) = {want:.6}); s = log3/log6 slope {:.2e}", cert.verdict.value, zero.verdict.value),
    )
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> CountTree {
    if depth == 0 {
        return CountTree::leaf();
    }
    let m = rng.gen_range(1..=9u64);
    CountTree { count: m, children: (0..m).map(|_| random_tree(rng, depth - 1)).collect() }
}

/// Independent node checks: partition of all (p+1)-bit extensions, counts, exponent bracket, separation.
fn check_node(t: &CountTree, n: &SigmaNode) -> Result<(), String> {
    if t.children.is_empty() {
        return if n.children.is_empty() { Ok(()) } else { Err("leaf with children".into()) };
    }
    let m = t.count;
    if n.children.len() as u64 != m {
        return Err(format!("{} children for count {m}", n.children.len()));
    }
    let p = (0..64u32).find(|&p| m <= 1u64 << (p + 1)).unwrap();
    if m >= 2 && !(1u64 << p < m) {
        return Err(format!("bracket fails for m = {m}"));
    }
    let l = n.word.len();
    let codes: Vec<&[u8]> = n.children.iter().map(|c| &c.word[l..]).collect();
    if n.children.iter().any(|c| c.word[..l] != n.word[..]) {
        return Err("child does not extend the parent".into());
    }
    if m >= 2 {
        // every (p+1)-bit string has exactly one child code as a prefix
        for s in 0..(1u64 << (p + 1)) {
            let bits: Vec<u8> = (0..=p).rev().map(|i| ((s >> i) & 1) as u8).collect();
            let hits = codes.iter().filter(|c| bits.starts_with(c)).count();
            if hits != 1 {
                return Err(format!("{hits} codes cover {bits:?} at m = {m}"));
            }
        }
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                let first = n.children[i].word.iter().zip(&n.children[j].word).position(|(a, b)| a != b);
                match first {
                    Some(pos) if pos + 1 <= l + p as usize + 1 => {}
                    _ => return Err("siblings closer than 2^-(l+p+1)".into()),
                }
            }
        }
    }
    t.children.iter().zip(&n.children).try_for_each(|(tc, nc)| check_node(tc, nc))
}

fn c11_sigma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for i in 0..10_000 {
        let depth = rng.gen_range(1..=3);
        let tree = random_tree(&mut rng, depth);
        let dec = sigma_decompose(&tree).unwrap();
        if let Err(e) = dec.check() {
            failures.push(format!("tree {i}: library check: {e}"));
        }
        if let Err(e) = check_node(&tree, &dec.root) {
            failures.push(format!("tree {i}: {e}"));
        }
    }
    outcome(failures.is_empty(), format!("10000 random trees, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()))
}

fn c12_chi() -> Outcome {
    let mut ok = true;
    let mut self_zero = 0;
    let all = corpus::all();
    for n in &all {
        let est = chi(&n.spec, &n.spec, 500, 0.5).unwrap();
        if est.estimate == 0.0 {
            self_zero += 1;
        }
    }
    ok &= self_zero == all.len();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pool: Vec<moranlab::MoranSpec> = all.iter().map(|n| n.spec.clone()).collect();
    for _ in 0..10 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(n + 1..=4 * n);
        pool.push(corpus::constant(n, 1, d).unwrap());
    }
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (i, j, k) = (rng.gen_range(0..pool.len()), rng.gen_range(0..pool.len()), rng.gen_range(0..pool.len()));
        // one common window so that all three sups range over the same scales
        let floor = (-200.0f64).max(pool[i].log_scale(120).unwrap()).max(pool[j].log_scale(120).unwrap()).max(pool[k].log_scale(120).unwrap());
        let x = |a: &moranlab::MoranSpec, b: &moranlab::MoranSpec| chi_range(a, b, 0.0, floor, 1.0).unwrap().estimate;
        let gap = x(&pool[i], &pool[k]) - x(&pool[i], &pool[j]) - x(&pool[j], &pool[k]);
        worst = worst.max(gap);
    }
    ok &= worst <= 1e-12;
    let r = reproduce("Example1").unwrap();
    let example1 = r.check("chi_zero").unwrap();
    ok &= example1.passed;
    outcome(
        ok,
        format!(
            "chi(A, A) = 0 on {self_zero}/{} corpus specs; worst triangle excess {worst:.2e} over 50 triples; Example1 {}",
            all.len(),
            example1.detail
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("dimension formulas", c1_dimensions),
        ("measure ratio identity", c2_measure_ratio),
        ("measure sandwich", c3_sandwich),
        ("counting chain", c4_counting),
        ("f ~ alpha", c5_f_alpha),
        ("uniform disconnectedness", c6_ud),
        ("embedding construction", c7_embedding),
        ("packing subset", c8_packing_subset),
        ("quasi-Lipschitz bijection", c9_quasi_lipschitz),
        ("non-embeddability certificate", c10_certificate),
        ("binary cylinder decomposition", c11_sigma),
        ("chi properties", c12_chi),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {} ({:.2?})", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
