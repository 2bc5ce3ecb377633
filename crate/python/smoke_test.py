"""Smoke test for the Python bindings.

Build and install first:  pip install ./crates/python --no-build-isolation
"""

import math

import moranlab


def main():
    assert "cantor" in moranlab.corpus_names()

    cantor = moranlab.Spec.corpus("cantor")
    assert cantor.n(1) == 2 and abs(cantor.c(1) - 1 / 3) < 1e-15
    assert cantor.scale(2) == "1/9"
    # right-closed buckets: r = r_k |J| belongs to level k + 1
    assert cantor.scale_index("1/9") == 3
    assert cantor.phi(10) == 1024
    assert abs(cantor.exact_limit() - math.log(2) / math.log(3)) < 1e-12
    dims = cantor.dims(200)
    assert abs(dims["dim_h_window"] - math.log(2) / math.log(3)) < 1e-9

    real = cantor.realize(8)
    assert real.count_at(8) == 256
    assert real.intervals(1) == [("0", "1/3"), ("2/3", "1")]
    assert real.cylinder_mass("121") == "1/8"
    lo, hi, level = real.ball_measure("0", "1/3")
    assert (lo, hi, level) == ("1/2", "1/2", 2)
    n, p = real.covering_number("1/20"), real.packing_number("1/20")
    assert 1 <= n and 1 <= p
    assert real.svg(3).startswith("<svg")

    same = cantor.to_toml()
    assert moranlab.Spec.from_toml(same).n(5) == 2

    binary = moranlab.Spec.corpus("example2_binary")
    ternary = moranlab.Spec.corpus("example2_ternary")
    assert moranlab.chi(cantor, cantor, 300)["estimate"] == 0.0
    assert moranlab.ud_sufficient(binary, depth=400)["verdict"] == "holds_at_depth"
    assert moranlab.embed_condition(binary, ternary)["verdict"] == "holds_at_depth"
    assert moranlab.embed_condition(ternary, binary)["verdict"] == "fails_at_depth"

    stats = moranlab.build_embedding(binary.realize(6), ternary.realize(8), "1/5", 6)
    assert stats["sandwich_violations"] == 0

    assert moranlab.sigma_codes(3) == ["00", "01", "1"]

    try:
        moranlab.Spec.corpus("no_such_spec")
    except moranlab.MoranError as e:
        assert str(e).startswith("UnknownExample")
    else:
        raise AssertionError("expected MoranError")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
