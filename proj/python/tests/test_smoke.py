import math
from pathlib import Path

import pytest

import qms

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def small(n=8, **kw):
    p = qms.ModelParams()
    p.n_sites = n
    for k, v in kw.items():
        setattr(p, k, v)
    return p


def test_version_and_defaults():
    assert qms.__version__
    p = qms.ModelParams.reference()
    assert p.n_sites == 400 and p.beta == 0.25
    assert p.validate() == []


def test_validation_errors():
    p = small(2)
    assert p.validate() == ["n_sites must be ≥ 3"]
    with pytest.raises(qms.ValidationError):
        qms.init_vacuum(p)


def test_vacuum_is_fixed_point():
    p = small(6)
    st = qms.init_vacuum(p)
    nxt = qms.rk4_step(st, p)
    assert nxt.a == st.a
    assert nxt.tau == pytest.approx(p.dt)
    assert qms.energy_breakdown(st, p).e_total == 0.0


def test_frozen_oscillation_period():
    p = small(8, frozen_v=1.0, gamma=0.0, noise_amp=0.0)
    st = qms.init_vacuum(p)
    st.a = [0.01] * 8
    half = qms.evolve(st, p, math.pi)
    assert half.a[0] == pytest.approx(-0.01, rel=1e-3)


def test_kink_census_and_flux():
    p = small(200, frozen_v=1.0)
    st = qms.init_kink(p, 99.5, p.beta)
    assert qms.net_winding(st) == 1
    assert qms.soliton_number(st, p) == 1
    census = qms.soliton_census(st, p)
    assert len(census) == 1
    assert census.solitons[0].position == pytest.approx(99.5, abs=1.0)


def test_callable_schedule_and_blowup():
    p = small(10)
    st = qms.evolve(qms.init_vacuum(p), p, 1.0, lambda tau: 0.1 * tau)
    assert st.h_ext == pytest.approx(0.1 * (1.0 - p.dt))
    stiff = small(10, dt=0.1, frozen_v=1e3)
    with pytest.raises(qms.IntegrationBlowup, match="site"):
        qms.evolve(qms.init_vacuum(stiff), stiff, 1.0)


def test_relax_weak_coupling():
    p = small(60, s=0.1)
    opt = qms.RelaxOptions()
    opt.max_tau = 100.0
    rep = qms.relax_at_field(p, opt)
    assert rep.winding == 0
    assert rep.elapsed_tau == pytest.approx(100.0)


def test_sweep_and_loop():
    p = small(40, s=0.02, noise_amp=0.0)
    proto = qms.SweepProtocol()
    proto.h_max, proto.h_min = 0.2, -0.2
    proto.rate = 0.02
    proto.n_cycles = 2
    res = qms.virgin_then_cycle(p, proto)
    assert len(res.summary.cycles) == 2
    rec = qms.SweepRecord.from_csv(res.record.to_csv(), res.record.events_csv())
    assert rec == res.record
    assert qms.steady_loop_extract(rec, 0.1).h_max == pytest.approx(0.2, abs=1e-3)


def test_config_validation():
    assert qms.validate_config((CONFIGS / "fig2.cfg").read_text()) == "relax"
    with pytest.raises(qms.ConfigError, match="gamm"):
        qms.validate_config("[model]\ngamm = 0.25\n[relax]\n")


def test_run_config(tmp_path):
    cfg = tmp_path / "weak.cfg"
    cfg.write_text("[model]\nn_sites = 40\ns = 0.1\n[relax]\nmax_tau = 50\n")
    code, out, _ = qms.run_config(str(cfg), out_dir=str(tmp_path / "out"))
    assert code == 0
    assert out.startswith("relax winding=0")
    assert (tmp_path / "out" / "relax.csv").exists()
