"""Smoke test for the abelian_degen extension module.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import json
import math

import abelian_degen as ad


def main():
    q = ad.QForm([[2, 1], [1, 2]])
    assert q.rank == 2 and q.det() == "3/1"
    assert q.phi_bar(["1", "0"]) == "1/1"

    sub = ad.Subdivision(q, 2)
    doc = json.loads(sub.to_json())
    assert doc["k"] == 2
    assert ad.Subdivision.from_json(sub.to_json()).to_json() == sub.to_json()
    assert sub.euler_characteristic() == 0

    measure = json.loads(sub.ma_measure())
    assert len(measure["atoms"]) == 4
    assert ad.measure_total(sub.ma_measure()) == "12/1"

    assert ad.rescaled_sup_gap(ad.QForm([[2]]), 3) == "1/36"
    lhs, rhs = ad.weak_pairing(ad.QForm([[2]]), 8, "sin2", samples=4096)
    assert abs(lhs - rhs) < 1e-9

    line = ad.QForm([[2]])
    t = 0.3 + 0.0j
    ctx = ad.ThetaContext(line, 3, t, im_w_bound=4.0)
    expected = 1 + 2 * 0.3**9 + 2 * 0.3**36
    assert abs(ctx.eval([0], [0j]) - expected) < 1e-12
    assert len(ctx.vector([0.1 + 0.05j])) == 3
    assert ctx.quasi_periodicity_defect([1], [0.2 + 0.1j], [1], [1]) < 1e-12

    g = ad.gram_matrix(line, 3, 0.3 + 0j, grid=64)
    assert g.balanced_defect < 1e-8
    assert abs(g.volume - 3) < 1e-8
    assert g.hermitian_defect() < 1e-12
    assert ad.commutant_dimension(3, 1) == 1
    assert ad.residues(2, 2) == [[0, 0], [0, 1], [1, 0], [1, 1]]

    try:
        ad.QForm([[3]])
    except ValueError:
        pass
    else:
        raise AssertionError("odd form accepted")

    print("smoke test ok, gram volume", round(g.volume, 12), "defect", f"{g.balanced_defect:.1e}")


if __name__ == "__main__":
    main()
