"""Smoke test for the polyext_py extension module.

Build and install first, for example:

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math

import polyext_py as pe


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * (1.0 + abs(b))


def check_tensors():
    e1 = pe.Tensor(2, 2, [([0, 0], 1.0)])
    assert e1.order == 2 and e1.dim == 2
    value, functional = pe.injective_norm(e1, "l2")
    assert close(value, 1.0), value
    assert len(functional) == 2

    x1x2 = pe.Tensor.from_json('{"n":2,"d":2,"entries":[{"idx":[0,1],"val":0.5}]}')
    assert close(x1x2.evaluate([1.0, -1.0]), -1.0)
    value, point = pe.sup_norm(x1x2, "linf")
    assert close(value, 1.0), value
    assert close(abs(x1x2.evaluate(point)), 1.0)

    # polarization recovers the polynomial on the diagonal
    x = [0.3, -0.7]
    assert close(x1x2.multilinear([x, x]), x1x2.evaluate(x), 1e-12)

    w = pe.Tensor.sym_power([0.6, 0.8], 3)
    pi, terms = pe.projective_norm(w, "l2")
    assert close(pi, 1.0, 1e-6), pi
    assert terms
    sup, integral, nuclear = pe.norm_sandwich(x1x2, "l2")
    assert sup <= integral <= nuclear, (sup, integral, nuclear)
    assert pe.Tensor.from_json(w.to_json()).entries() == w.entries()


def check_extensions():
    family = pe.Family.from_json('{"diag":{"c":1.0,"rho":0.5,"offset":1},"n":2}')
    assert close(family.extend([], 1.0), 1.0, 1e-15)
    trace, value, _ = family.uniterated([], 1.0, [5, 10, 20, 40])
    assert trace[0] == (5, 0.96875)
    assert close(value, 1.0, 1e-11)
    head = [0.5, -1.0, 0.25]
    assert family.extend(head, 0.0) == family.evaluate(head)

    report = json.loads(family.dg_verify([([], 1.0)], 1e-2, seed=7))
    assert report["pass"], report
    assert len(report["stages"]) == report["m"]


def check_suite_and_errors():
    report = json.loads(pe.verify("dg", seed=7, epsilon=1e-2))
    assert report["pass"]
    try:
        pe.verify("bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown suite accepted")
    try:
        pe.Tensor(2, 2, [([1, 0], 1.0)])
    except ValueError:
        pass
    else:
        raise AssertionError("unsorted index accepted")
    assert math.isfinite(pe.nuclear(pe.Tensor(2, 1, [([0, 0], 1.0)]), "l1"))


if __name__ == "__main__":
    check_tensors()
    check_extensions()
    check_suite_and_errors()
    print("smoke test passed")
