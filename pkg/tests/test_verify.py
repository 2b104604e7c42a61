import numpy as np

from evolvefem.fespace import build_space
from evolvefem.mapping import IdentityMapping, LinearPeriodic, NonlinearPeriodic
from evolvefem.mesh import mesh_for_level
from evolvefem.model import ManufacturedProblem, schnakenberg
from evolvefem.verify import (
    CheckResult,
    check_equivalence,
    check_invertible,
    check_source_oracle,
    fd_derivative,
    format_report,
    mass_drift,
    picard_discrepancy,
)


def test_fd_derivative_sixth_order():
    errs = [abs(fd_derivative(np.sin, 0.7, h) - np.cos(0.7)) for h in (0.1, 0.05)]
    assert 50 < errs[0] / errs[1] < 80  # 2^6 = 64


def test_invertibility_check():
    assert check_invertible(LinearPeriodic(1.0, 1.0), 1.0).passed
    assert not check_invertible(NonlinearPeriodic(-2.0, 1.0), 1.0).passed


def test_equivalence_skipped_for_nonlinear_law():
    sp = build_space(mesh_for_level(1), 1)
    r = check_equivalence(sp, NonlinearPeriodic(1.0, 1.0), [0.5])
    assert r.status == "info" and r.passed


def test_source_oracle_detects_wrong_source():
    kin = schnakenberg(0.1, 0.9, 1.0, 0.01, 1.0)
    p = ManufacturedProblem(NonlinearPeriodic(1.0, 1.0), kin)
    assert check_source_oracle(p, 1.0, n=10).passed

    class Broken(ManufacturedProblem):
        def source_all(self, xi, t):
            return super().source_all(xi, t) + 1e-4

    assert not check_source_oracle(Broken(p.mapping, kin), 1.0, n=10).passed


def test_mass_drift_small():
    assert mass_drift(build_space(mesh_for_level(2), 1), NonlinearPeriodic(1.0, 1.0), 10, 0.01) < 1e-10


def test_picard_forms_coincide_only_on_special_states():
    sp = build_space(mesh_for_level(1), 1)
    kin = schnakenberg(0.1, 0.9, 1.0, 0.01, 1.0)
    W = np.random.default_rng(0).uniform(0.5, 1.5, (2, sp.dof_count))
    assert picard_discrepancy(sp, IdentityMapping(), W, kin, 0.0) > 0.1
    # -(u1 u2 - 1) = u2^2 holds for u1 = (1 - u2^2)/u2
    u2 = 0.5
    W = np.stack([np.full(sp.dof_count, (1 - u2**2) / u2), np.full(sp.dof_count, u2)])
    assert picard_discrepancy(sp, IdentityMapping(), W, kin, 0.0) < 1e-12


def test_report_format():
    text = format_report([CheckResult("a", "pass", "ok"), CheckResult("bb", "fail", "bad")])
    assert "FAIL  bb" in text
    assert text.splitlines()[-1] == "1/2 checks passed"
