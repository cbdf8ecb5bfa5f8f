import numpy as np
import pytest

from dhtwin import kernels
from dhtwin.kernels import _ref


def random_tree(rng, n_seg=5):
    seg_n = rng.integers(1, 12, size=n_seg).astype(np.int64)
    seg_off = np.zeros(n_seg, dtype=np.int64)
    np.cumsum(seg_n[:-1], out=seg_off[1:])
    n_cells = int(seg_n.sum())
    args = {
        "tf": rng.uniform(40, 85, size=n_cells),
        "tw": rng.uniform(35, 80, size=n_cells),
        "seg_off": seg_off,
        "seg_n": seg_n,
        "cf_cell": rng.uniform(5e4, 2e5, size=n_seg),
        "cw_cell": rng.uniform(3e3, 2e4, size=n_seg),
        "ug_wk": rng.uniform(0.5, 3.0, size=n_seg),
        "kfw_wk": rng.uniform(100, 600, size=n_seg),
        "mdot": rng.uniform(0.0, 1.5, size=n_seg),
        # chain feeding: segment i fed by segment i-1, root from boundary 0
        "feed_ptr": np.arange(n_seg + 1, dtype=np.int64),
        "feed_kind": np.array([0] + [1] * (n_seg - 1), dtype=np.int64),
        "feed_ref": np.array([0] + list(range(n_seg - 1)), dtype=np.int64),
        "bnd_temp": np.array([80.0]),
        "bnd_mdot": np.array([1.0]),
        "t_ground": 10.0,
        "cp": 4186.0,
        "dt": 60.0,
        "n_sub": 3,
    }
    return args


class TestBackendParity:
    @pytest.mark.skipif(kernels.BACKEND != "cython",
                        reason="compiled backend not built")
    def test_advance_tree_matches_reference(self):
        from dhtwin.kernels import _fast

        rng = np.random.default_rng(99)
        for _ in range(20):
            args = random_tree(rng)
            a = {k: (v.copy() if isinstance(v, np.ndarray) else v)
                 for k, v in args.items()}
            b = {k: (v.copy() if isinstance(v, np.ndarray) else v)
                 for k, v in args.items()}
            out_a = np.zeros(len(args["seg_n"]))
            out_b = np.zeros(len(args["seg_n"]))
            loss_a = _fast.advance_tree(
                a["tf"], a["tw"], a["seg_off"], a["seg_n"], a["cf_cell"],
                a["cw_cell"], a["ug_wk"], a["kfw_wk"], a["mdot"], a["feed_ptr"],
                a["feed_kind"], a["feed_ref"], a["bnd_temp"], a["bnd_mdot"],
                a["t_ground"], a["cp"], a["dt"], a["n_sub"], out_a)
            loss_b = _ref.advance_tree(
                b["tf"], b["tw"], b["seg_off"], b["seg_n"], b["cf_cell"],
                b["cw_cell"], b["ug_wk"], b["kfw_wk"], b["mdot"], b["feed_ptr"],
                b["feed_kind"], b["feed_ref"], b["bnd_temp"], b["bnd_mdot"],
                b["t_ground"], b["cp"], b["dt"], b["n_sub"], out_b)
            np.testing.assert_allclose(a["tf"], b["tf"], rtol=0, atol=1e-12)
            np.testing.assert_allclose(a["tw"], b["tw"], rtol=0, atol=1e-12)
            np.testing.assert_allclose(out_a, out_b, rtol=0, atol=1e-12)
            assert loss_a == pytest.approx(loss_b, rel=1e-12, abs=1e-9)

    @pytest.mark.skipif(kernels.BACKEND != "cython",
                        reason="compiled backend not built")
    def test_tank_step_matches_reference(self):
        from dhtwin.kernels import _fast

        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            temps = np.sort(rng.uniform(30, 85, size=n))[::-1].copy()
            caps = rng.uniform(2e5, 2e7, size=n)
            args = (rng.uniform(0, 2.0), rng.uniform(60, 85), rng.uniform(0, 2.0),
                    rng.uniform(20, 55), rng.uniform(0.5, 8.0, size=n),
                    15.0, 2.0, 4186.0, 60.0, int(rng.integers(1, 4)))
            ta, tb = temps.copy(), temps.copy()
            ra = _fast.tank_step(ta, caps, *args)
            rb = _ref.tank_step(tb, caps, *args)
            np.testing.assert_allclose(ta, tb, rtol=0, atol=1e-12)
            for x, y in zip(ra, rb):
                assert x == pytest.approx(y, rel=1e-12, abs=1e-9)


class TestTankKernel:
    def test_first_law_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = 4
            temps = np.sort(rng.uniform(30, 85, size=n))[::-1].copy()
            caps = np.full(n, 3.6e6)
            ua = np.full(n, 3.0)
            mdot_c, t_c = rng.uniform(0, 2), rng.uniform(60, 85)
            mdot_d, t_r = rng.uniform(0, 2), rng.uniform(20, 55)
            e0 = float(caps @ temps)
            e_c, e_d, e_l = kernels.tank_step(temps, caps, mdot_c, t_c, mdot_d,
                                              t_r, ua, 15.0, 2.0, 4186.0, 60.0, 2)
            e1 = float(caps @ temps)
            assert e1 - e0 == pytest.approx(e_c - e_d - e_l, abs=1e-6 * max(abs(e0), 1))

    def test_stratification_monotone_after_step(self):
        rng = np.random.default_rng(5)
        temps = np.array([70.0, 60.0, 50.0])
        caps = np.full(3, 1.2e6)
        ua = np.full(3, 1.0)
        for _ in range(500):
            kernels.tank_step(temps, caps, rng.uniform(0, 1), rng.uniform(55, 90),
                              rng.uniform(0, 1), rng.uniform(10, 55), ua, 15.0,
                              1.0, 4186.0, 60.0, 1)
            assert np.all(np.diff(temps) <= 1e-9)

    def test_idle_tank_decays_to_ambient(self):
        temps = np.array([80.0, 75.0, 70.0])
        caps = np.full(3, 1.0e6)
        ua = np.full(3, 5.0)
        for _ in range(2000):
            kernels.tank_step(temps, caps, 0.0, 0.0, 0.0, 0.0, ua, 15.0,
                              1.0, 4186.0, 600.0, 2)
        assert np.all(np.abs(temps - 15.0) < 1.0)


def test_backend_reports_name():
    assert kernels.BACKEND in ("cython", "python")
