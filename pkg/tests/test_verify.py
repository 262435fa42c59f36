import math

import pytest

from hermitian_energy import verify as v


@pytest.mark.parametrize(
    "name,family",
    [
        ("path_independence", "gauduchon_torus"),
        ("closed_vs_path", "generic"),
        ("translation", "generic"),
        ("err_gauduchon_zero", "gauduchon_torus"),
        ("err_extremes", "generic"),
        ("identity_418", "generic"),
        ("identity_421", "gauduchon_torus"),
        ("kahler_reduction", "kahler_potential"),
        ("bullet_identities", "generic"),
        ("gauduchon_solver", "generic"),
        ("stokes_parity", "flat"),
        ("condition_table", "generic"),
        ("condition_table", "generic_gauduchon"),
    ],
)
def test_checks_pass_on_default_scenarios(name, family):
    r = v.run_check(name, v.Scenario(metric_family=family, samples=2))
    assert r.passed, r.detail
    assert r.residual <= r.tol
    assert r.check == name and family in r.scenario


def test_cocycle_checks_pass():
    s = v.Scenario(metric_family="generic", samples=2)
    for name in ("cocycle_antisym", "cocycle_triple"):
        assert v.run_check(name, s).passed


def test_inequality_chain_check():
    r = v.run_check("inequality_chain", v.Scenario(metric_family="generic", samples=3))
    assert r.passed and r.detail["min_separation"] > 1e-8


def test_degenerate_triple_has_zero_residual():
    s = v.Scenario(metric_family="generic", phi_amplitude=0.0, samples=2)
    r = v.run_check("cocycle_triple", s)
    assert r.passed and r.residual == 0.0


def test_inequality_chain_on_constant_potentials():
    s = v.Scenario(metric_family="flat", phi_amplitude=0.0, samples=1)
    r = v.run_check("inequality_chain", s)
    assert r.passed and r.detail["min_separation"] is None


def test_inadmissible_scenario_is_a_failed_result():
    r = v.run_check("closed_vs_path", v.Scenario(phi_amplitude=0.9, samples=1))
    assert not r.passed
    assert "InadmissiblePotentialError" in r.detail["error"]
    assert math.isnan(r.residual)


def test_inapplicable_family_is_a_failed_result():
    r = v.run_check("kahler_reduction", v.Scenario(metric_family="generic"))
    assert not r.passed and "needs a metric family" in r.detail["error"]
    assert not v.applicable("err_gauduchon_zero", "generic")
    assert v.applicable("err_gauduchon_zero", "generic_gauduchon")


def test_err_zero_check_refuses_non_gauduchon_family():
    s = v.Scenario(metric_family="generic", samples=2)
    assert not v.run_check("err_gauduchon_zero", s).passed


def test_unknown_check_raises():
    with pytest.raises(v.ScenarioError):
        v.run_check("nope", v.Scenario())
    with pytest.raises(v.ScenarioError):
        v.suite_scenarios(v.Scenario(), ["nope"])


def test_scenario_validation():
    with pytest.raises(v.ScenarioError):
        v.Scenario(metric_family="hopf")
    with pytest.raises(v.ScenarioError):
        v.Scenario(phi_family="spline")
    with pytest.raises(v.ScenarioError):
        v.Scenario(samples=0)
    with pytest.raises(v.ScenarioError):
        v.Scenario(path_kind="spiral")


def test_fingerprint_is_deterministic_and_distinguishing():
    a, b = v.Scenario(), v.Scenario()
    assert a.fingerprint == b.fingerprint
    assert v.Scenario(phi_seed=12).fingerprint != a.fingerprint
    assert "amp=0.1" in a.fingerprint


def test_potentials_are_seeded_and_normalized():
    s = v.Scenario(metric_family="flat")
    p0, p0b, p1 = s.potential(0), s.potential(0), s.potential(1)
    assert (p0.values == p0b.values).all() and not (p0.values == p1.values).all()
    assert p0.max() == 0.0
    c = v.Scenario(metric_family="flat", phi_family="cosine").potential(0)
    assert c.max() == 0.0 and c.min() == pytest.approx(-0.1, abs=1e-3)


def test_suite_matrix():
    jobs = v.suite_scenarios(v.Scenario(), ["err_gauduchon_zero", "kahler_reduction"])
    fams = [(name, s.metric_family) for name, s in jobs]
    assert fams == [
        ("err_gauduchon_zero", "gauduchon_torus"),
        ("err_gauduchon_zero", "generic_gauduchon"),
        ("kahler_reduction", "flat"),
    ]
    # a single family filters out checks that do not apply to it
    jobs = v.suite_scenarios(v.Scenario(), ["err_gauduchon_zero", "translation"], family="generic")
    assert [name for name, _ in jobs] == ["translation"]


def test_suite_single_check_report_and_determinism():
    s = v.Scenario(samples=2)
    r1 = v.run_suite(s, ["translation"], family="generic", workers=1)
    r2 = v.run_suite(s, ["translation"], family="generic", workers=2)
    assert len(r1.results) == 1 and r1.ok and r1.failures == 0
    assert [r.row() for r in r1.results] == [r.row() for r in r2.results]
    assert r1.constants == pytest.approx([2.0] * 4)
    assert "total" in r1.timing


def test_report_is_sorted():
    rep = v.run_suite(v.Scenario(samples=1), ["condition_table", "stokes_parity"], workers=1)
    keys = [(r.check, r.scenario) for r in rep.results]
    assert keys == sorted(keys)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("HERMITIAN_ENERGY_THREADS", "3")
    assert v.worker_count() == 3
    monkeypatch.setenv("HERMITIAN_ENERGY_THREADS", "0")
    assert v.worker_count() >= 1
    monkeypatch.setenv("HERMITIAN_ENERGY_THREADS", "x")
    with pytest.raises(v.ScenarioError):
        v.worker_count()


def test_convergence_study_band_limited_floor():
    s = v.Scenario(metric_family="gauduchon_torus", samples=1)
    rows = v.convergence_study("err_gauduchon_zero", [8, 16], s)
    assert [r["n"] for r in rows] == [8, 16]
    assert all(r["residual"] < 1e-14 for r in rows)
    assert len(v.convergence_study("err_gauduchon_zero", [8], s)) == 1


def test_convergence_study_validation():
    s = v.Scenario(metric_family="gauduchon_torus", samples=1)
    with pytest.raises(v.ScenarioError):
        v.convergence_study("err_gauduchon_zero", [16, 8], s)
    with pytest.raises(v.ScenarioError):
        v.convergence_study("err_gauduchon_zero", [], s)


def test_forms_oracle_residuals_small():
    res = v.forms_oracle_residuals(16, 3)
    assert set(res) >= {"graded_commutativity", "leibniz_d", "leibniz_dbar", "d_squared",
                        "dbar_squared", "ibp_d_first", "ibp_d_second", "ibp_dbar_first",
                        "ibp_dbar_second", "stokes"}
    assert max(res.values()) <= 1e-12


def test_coverage_table_is_complete():
    referenced = set()
    for target in v.COVERAGE.values():
        if target.startswith("out of scope") or target.startswith("run_suite"):
            continue
        for part in target.split(","):
            name = part.strip().split(" ")[0]
            assert name in v.CHECK_NAMES, name
            referenced.add(name)
    assert referenced == set(v.CHECK_NAMES)
    assert set(v.SUITE_FAMILIES) == set(v.CHECK_NAMES)
