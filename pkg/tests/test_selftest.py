"""Tests for the oracle checks and the gradient suite."""

from softdropconnect.harness.selftest import gradient_suite, run_selftest


class TestSelftest:
    """Every built-in check must pass on a correct build."""

    def test_oracles_pass(self):
        results = run_selftest()
        assert len(results) == 11
        assert [r.name for r in results if not r.passed] == []

    def test_gradient_suite_passes(self):
        reports = gradient_suite(seed=1, max_coords=8)
        assert "bbb_dense" in reports and "masked_conv2d" in reports
        for name, report in reports.items():
            assert report.passed, (name, report.max_relative_error)
            assert sum(p.checked for p in report.parameters) > 0
