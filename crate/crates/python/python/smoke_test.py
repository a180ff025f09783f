"""Smoke test for the `gensm` extension module.

Build the module first, e.g. `maturin develop -m crates/python/Cargo.toml`,
or `cargo build --release -p gensm-python` and copy
`target/release/libgensm.so` to `gensm.so` somewhere on `PYTHONPATH`.
"""

import math

import gensm


def main():
    assert gensm.enumerate_agcs(4, 2) == [[1, 2], [1, 3], [1, 4], [2, 3]]
    assert abs(gensm.constant_gap(8) - 8 * (1 - math.log2(math.e))) < 1e-12

    cfg = gensm.SystemConfig.reference(snr_db=0.0)
    assert (cfg.n_t, cfg.n_r, cfg.agc_count) == (8, 8, 4)

    h = gensm.Channel.sample(cfg, seed=3)
    assert h.shape == (8, 8)
    again = gensm.Channel.from_text(h.to_text())
    assert again.rows() == h.rows()

    p = gensm.Precoder.uniform(cfg)
    assert p.is_feasible(cfg) and p.is_phase_only(cfg, 1e-12)
    r_lb = gensm.se_lower_bound(h, p, cfg)
    r_mc, stderr = gensm.se_monte_carlo(h, p, cfg, n_samples=4000, seed=1)
    c_wf = gensm.waterfilling_capacity(h, cfg)
    shifted = gensm.se_shifted_bound(h, p, cfg)
    assert r_lb < r_mc < c_wf + 3 * stderr
    assert abs(shifted - r_mc) < 1.0

    silent = gensm.Precoder([0.0] * 8, p.analog)
    assert abs(gensm.se_lower_bound(h, silent, cfg) - gensm.constant_gap(8)) < 1e-9

    assert len(gensm.grad_lambda(h, p, cfg)) == 8
    assert all(isinstance(g, complex) for g in gensm.grad_a(h, p, cfg))

    settings = gensm.OptimizerSettings()
    settings.max_outer = 5
    out = gensm.two_step(h, cfg, settings)
    trace = out["r_lb_trace"]
    assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
    assert out["final_r_lb"] >= r_lb
    assert out["precoder"].is_phase_only(cfg, 1e-9)
    assert abs(out["precoder"].total_power() - 8.0) < 1e-9

    try:
        gensm.SystemConfig(8, 2, 4, 5)
    except ValueError:
        pass
    else:
        raise AssertionError("n_rf > n_m must be rejected")

    body, summary = gensm.run_experiment(
        "mode = gradcheck\nn_channels = 2\nsnr_grid_db = 0\nmaster_seed = 5\n"
    )
    assert body.splitlines()[0].startswith("snr_db,channel_index")
    assert len(body.splitlines()) == 3

    print(f"r_lb={r_lb:.4f} r_mc={r_mc:.4f}+-{stderr:.4f} c_wf={c_wf:.4f} optimized={out['final_r_lb']:.4f}")
    print("gensm smoke test passed")


if __name__ == "__main__":
    main()
