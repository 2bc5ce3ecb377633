//! Named constructions used throughout the tests, the CLI and the reproduction runs.

use crate::error::Result;
use crate::expr::Expr;
use crate::realization::Placement;
use crate::scalar::Scalar;
use crate::spec::{validate, BlockRule, MoranSpec, RawSpec, SequenceRule};

/// A recipe together with the placement it is usually realized with.
#[derive(Clone, Debug)]
pub struct Named {
    pub name: &'static str,
    pub spec: MoranSpec,
    pub placement: Placement,
}

fn expr(src: &str) -> Expr {
    Expr::parse(src).expect("corpus expressions parse")
}

fn build(name: &'static str, branching: SequenceRule, ratios: SequenceRule, placement: Placement) -> Result<Named> {
    let spec = validate(RawSpec { dimension: 1, diameter: Scalar::one(), branching, ratios })?;
    Ok(Named { name, spec, placement })
}

fn block(k_m: &str, t_m: &str, in_block: &str, off_block: &str) -> SequenceRule {
    SequenceRule::Block(BlockRule { k_m: expr(k_m), t_m: expr(t_m), in_block: expr(in_block), off_block: expr(off_block) })
}

/// `n ≡ n`, `c ≡ num/den` on `[0, 1]` with uniform placement.
pub fn constant(n: i64, num: i64, den: i64) -> Result<MoranSpec> {
    validate(RawSpec {
        dimension: 1,
        diameter: Scalar::one(),
        branching: SequenceRule::constant_int(n),
        ratios: SequenceRule::constant_ratio(num, den),
    })
}

/// The middle-thirds Cantor set.
pub fn cantor() -> Named {
    build("cantor", SequenceRule::constant_int(2), SequenceRule::constant_ratio(1, 3), Placement::Endpoints)
        .expect("valid")
}

/// Three pieces of ratio `3^(-log 3 / log 2)` at `0`, `1/2 - r/2`, `1 - r`: same dimension as the Cantor set.
pub fn falconer_marsh() -> Named {
    build(
        "falconer_marsh",
        SequenceRule::constant_int(3),
        SequenceRule::Constant(expr("exp(-ln(3)*ln(3)/ln(2))")),
        Placement::Uniform,
    )
    .expect("valid")
}

/// `c ≡ 1/6`; `n_k = 3` on the blocks `m^3 < k <= m^3 + m`, else 5.
pub fn pab() -> Named {
    build("pab", block("m^3", "k_m + m", "3", "5"), SequenceRule::constant_ratio(1, 6), Placement::Uniform)
        .expect("valid")
}

/// `n ≡ 3`; `c_k = 1/3 - 1/(6m)` on the blocks `m^3 < k <= m^3 + m`, else 1/6.
pub fn ex_ud() -> Named {
    build("ex_ud", SequenceRule::constant_int(3), block("m^3", "k_m + m", "1/3 - 1/(6*m)", "1/6"), Placement::Uniform)
        .expect("valid")
}

/// `n ≡ 2`, `c_k = (k+1)/(2(k+2))` with endpoint placement: dimension 1, length `2/(k+2) → 0`.
pub fn ex() -> Named {
    build("ex", SequenceRule::constant_int(2), SequenceRule::Formula(expr("(k+1)/(2*(k+2))")), Placement::Endpoints)
        .expect("valid")
}

/// `c ≡ 1/5`, `n ≡ 2`.
pub fn example2_binary() -> Named {
    build("example2_binary", SequenceRule::constant_int(2), SequenceRule::constant_ratio(1, 5), Placement::Uniform)
        .expect("valid")
}

/// `c ≡ 1/5`, `n ≡ 3`.
pub fn example2_ternary() -> Named {
    build("example2_ternary", SequenceRule::constant_int(3), SequenceRule::constant_ratio(1, 5), Placement::Uniform)
        .expect("valid")
}

/// `c ≡ 1/5`; `n_k = 3` exactly when `k` is a perfect square, else 2 (so `a_k = ⌊√k⌋`).
pub fn example2_squares() -> Named {
    build("example2_squares", block("m^2 - 1", "m^2", "3", "2"), SequenceRule::constant_ratio(1, 5), Placement::Uniform)
        .expect("valid")
}

/// `c ≡ 1/5`; `n_k` alternates 2, 3.
pub fn example2_alternating() -> Named {
    build(
        "example2_alternating",
        SequenceRule::Periodic(vec![Expr::from_int(2), Expr::from_int(3)]),
        SequenceRule::constant_ratio(1, 5),
        Placement::Uniform,
    )
    .expect("valid")
}

/// `n ≡ 3`, `c ≡ 1/3`: touching children, not uniformly disconnected.
pub fn touching() -> Named {
    build("touching", SequenceRule::constant_int(3), SequenceRule::constant_ratio(1, 3), Placement::Uniform)
        .expect("valid")
}

/// Every named construction.
pub fn all() -> Vec<Named> {
    vec![
        cantor(),
        falconer_marsh(),
        pab(),
        ex_ud(),
        ex(),
        example2_binary(),
        example2_ternary(),
        example2_squares(),
        example2_alternating(),
        touching(),
    ]
}

/// Looks a construction up by name.
pub fn by_name(name: &str) -> Option<Named> {
    all().into_iter().find(|n| n.name == name)
}
