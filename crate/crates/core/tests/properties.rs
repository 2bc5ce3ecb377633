use moranlab::corpus;
use moranlab::counting::{self, brute};
use moranlab::embedding::{sigma_decompose, split_exponent, CountTree};
use moranlab::io::{parse_spec, spec_to_toml};
use moranlab::measure::ball_measure;
use moranlab::measure::random_point;
use moranlab::realization::{realize, Placement};
use moranlab::Scalar;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// `(n, c)` pairs that fit side by side: `n c <= 1`.
fn constant_params() -> impl Strategy<Value = (i64, i64)> {
    (2i64..=4).prop_flat_map(|n| (Just(n), n..=3 * n))
}

fn count_tree(depth: u32) -> BoxedStrategy<CountTree> {
    if depth == 0 {
        return Just(CountTree::leaf()).boxed();
    }
    (1u64..=9)
        .prop_flat_map(move |m| proptest::collection::vec(count_tree(depth - 1), m as usize))
        .prop_map(|children| CountTree { count: children.len() as u64, children })
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_counts_match_exhaustive_search((n, den) in constant_params(), depth in 1usize..=4, theta in 0i64..64) {
        let spec = corpus::constant(n, 1, den).unwrap();
        let real = realize(&spec, Placement::Uniform, depth).unwrap();
        let floor = spec.scale_exact(depth).unwrap().unwrap();
        // r ranges over (floor, 1]
        let r = &floor + (BigRational::one() - &floor) * q(theta + 1, 64);
        let g = counting::counts(&real, &r, false).unwrap();
        let iv = real.intervals(depth).unwrap();
        prop_assert_eq!(g.covering.to_string(), brute::covering(&iv, &r).to_string());
        prop_assert_eq!(g.packing.to_string(), brute::packing(&iv, &r).to_string());
    }

    #[test]
    fn ball_mass_sits_in_the_sandwich((n, den) in constant_params(), seed in any::<u64>(), j in 1usize..=6, theta in 0i64..16) {
        let spec = corpus::constant(n, 1, den).unwrap();
        let real = realize(&spec, Placement::Uniform, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_point(&real, &mut rng).unwrap();
        let top = spec.scale_exact(j - 1).unwrap().unwrap();
        let bottom = spec.scale_exact(j).unwrap().unwrap();
        let r = &top - (&top - &bottom) * q(theta, 16);
        let b = ball_measure(&real, &x, &r, None).unwrap();
        let phi = |k: usize| BigRational::from_integer(BigInt::from(n).pow(k as u32));
        prop_assert_eq!(b.level, j);
        prop_assert!(phi(j).recip() <= b.lo);
        prop_assert!(b.lo <= b.hi);
        prop_assert!(b.hi <= q(4, 1) / phi(j - 1));
    }

    #[test]
    fn scale_index_is_right_closed((n, den) in constant_params(), k in 0usize..40) {
        let spec = corpus::constant(n, 1, den).unwrap();
        let at = spec.scale_exact(k).unwrap().unwrap();
        prop_assert_eq!(spec.scale_index(&Scalar::Exact(at.clone())).unwrap(), k + 1);
        if k >= 1 {
            let above = &at * q(1_000_001, 1_000_000);
            prop_assert_eq!(spec.scale_index(&Scalar::Exact(above)).unwrap(), k);
        } else {
            prop_assert!(spec.scale_index(&Scalar::Exact(&at * q(2, 1))).is_err());
        }
    }

    #[test]
    fn binary_codes_form_a_valid_decomposition(tree in count_tree(3)) {
        let d = sigma_decompose(&tree).unwrap();
        d.check().unwrap();
        fn leaves(t: &CountTree) -> usize {
            if t.children.is_empty() { 1 } else { t.children.iter().map(leaves).sum() }
        }
        prop_assert_eq!(d.leaves().len(), leaves(&tree));
    }

    #[test]
    fn split_exponent_brackets_the_count(m in 2u64..1 << 40) {
        let p = split_exponent(m).unwrap();
        prop_assert!(1u64 << p < m && m <= 1u64 << (p + 1));
    }
}

#[test]
fn corpus_round_trips_through_toml() {
    for named in corpus::all() {
        let text = spec_to_toml(named.name, &named.spec, &named.placement);
        let back = parse_spec(&text, "fallback").unwrap();
        assert_eq!(back.name, named.name);
        assert_eq!(back.placement, named.placement, "{}", named.name);
        assert_eq!(back.spec.branching_table(200).unwrap(), named.spec.branching_table(200).unwrap(), "{}", named.name);
        let (a, b) = (back.spec.ratio_table(200).unwrap(), named.spec.ratio_table(200).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!(x == y || (x.to_f64() - y.to_f64()).abs() <= 1e-15 * y.to_f64().abs(), "{}: {x:?} vs {y:?}", named.name);
        }
        // the file text is deterministic, so its digest is too
        assert_eq!(parse_spec(&text, "fallback").unwrap().digest, back.digest);
    }
}
