"""Tests for spec path resolution."""

from pathlib import Path

import pytest

from coop_analyzer.spec_paths import bundled_specs, resolve_spec_path


def test_bundled_examples_are_listed() -> None:
    """Both example specs ship with the package."""
    assert bundled_specs() == ["naive_qp.csa", "simplex_hc.csa"]


@pytest.mark.parametrize("raw", ["naive_qp", "naive_qp.csa"])
def test_bundled_names_resolve_with_or_without_suffix(raw: str) -> None:
    """Example names work without a path."""
    path = resolve_spec_path(raw)
    assert path.name == "naive_qp.csa"
    assert path.is_file()


def test_existing_files_win(tmp_path: Path, monkeypatch) -> None:
    """A real file shadows a bundled example of the same name."""
    monkeypatch.chdir(tmp_path)
    (tmp_path / "naive_qp.csa").write_text("# local copy\n", encoding="utf-8")
    assert resolve_spec_path("naive_qp.csa") == Path("naive_qp.csa")


@pytest.mark.parametrize("raw", ["missing.csa", "../naive_qp", "Naive_QP"])
def test_unknown_specs_raise(raw: str) -> None:
    """Unknown names and path tricks are reported with the bundled list."""
    with pytest.raises(FileNotFoundError, match="bundled examples: naive_qp.csa, simplex_hc.csa"):
        resolve_spec_path(raw)
