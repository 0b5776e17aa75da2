"""Quick end-to-end check of the compiled extension."""

import math
import sys
import tempfile
from pathlib import Path

import pylexnet as lx


def main() -> int:
    ring = [(i, (i + 1) % 5) for i in range(5)]
    s = lx.graph_structure(5, ring)
    assert s["n_edges"] == 5 and abs(s["density"] - 0.5) < 1e-12

    cent = lx.centralities([(f"c{i}", f"c{(i + 1) % 5}", 1) for i in range(5)])
    assert all(abs(v["pagerank"] - 0.2) < 1e-9 for v in cent.values())

    assert abs(lx.mae([0, 2, 4], [2, 2, 2]) - 4 / 3) < 1e-12
    assert abs(lx.mean_poisson_deviance([2.0], [1.0]) - 0.772589) < 1e-6
    assert abs(lx.lh_loss([0.5, 0.5, 0.5], 0, True) - math.log(2)) < 1e-12
    assert lx.survival_curve([0.5, 0.5, 0.5]) == [0.5, 0.25, 0.125]
    alpha, _, n = lx.fit_powerlaw_alpha([math.e] * 3, 1.0)
    assert abs(alpha - 2.0) < 1e-12 and n == 3

    y = [1.0, 2.0, 3.0, 6.0]
    m = lx.PoissonModel.fit([[]] * 4, y)
    assert abs(m.intercept - math.log(3.0)) < 1e-8

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        first = lx.run_pipeline(out_dir=str(out), seed=7)
        assert [s for s, _ in first][-1] == "report"
        again = lx.run_pipeline(out_dir=str(out), seed=7)
        assert all(what == "up to date" for _, what in again)
        table = (out / "report" / "table3.tsv").read_text()
        assert table.startswith("model\tconcordance\tIBS")
        try:
            lx.run_pipeline(out_dir=str(Path(tmp) / "empty"), stage="survive")
        except ValueError as e:
            assert "ingest" in str(e)
        else:
            raise AssertionError("missing prerequisite was not reported")

    print("pylexnet smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
