from scripts import run_acceptance
from src.cop import VARIANTS
from src.errors import ErrorCode, OracleError


def test_capped_instances_are_counted(monkeypatch):
    real = run_acceptance.probe_strategyproofness

    def capped(instance, mechanism=None, **kw):
        if mechanism is None:
            raise OracleError(ErrorCode.ENUMERATION_CAP_EXCEEDED, "too many misreports")
        return real(instance, mechanism=mechanism, **kw)

    monkeypatch.setattr(run_acceptance, "probe_strategyproofness", capped)
    out = run_acceptance.criterion_6(lambda count: 2, seed=0)
    assert out["skipped"] == 2 * len(VARIANTS)
    assert out["checked"] == 0
    assert out["mutant_detections"] > 0
