"""Shared fixtures: the study-scale verdict fixture, the on-disk mini
benchmark, and the transform-chain planting generator used by the analyst
property suites.  Also the acceptance-criterion reporting hook: every test
marked with @pytest.mark.criterion("...") gets a PASS/FAIL line in the
terminal summary."""
from __future__ import annotations

import random

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion reported in the summary"
    )


_CRITERIA: dict[str, tuple[str, str]] = {}  # nodeid -> (name, outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            _CRITERIA[item.nodeid] = (marker.args[0], "not run")


def pytest_runtest_logreport(report):
    if report.nodeid in _CRITERIA and report.when == "call":
        name, _ = _CRITERIA[report.nodeid]
        _CRITERIA[report.nodeid] = (name, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _CRITERIA.values():
        markup = {"green": True} if outcome == "PASS" else {"red": True}
        terminalreporter.write_line(f"  {outcome}: {name}", **markup)

from veribench import synthetic
from veribench.analyst import (
    ATOMS,
    KIND_BOOL_REMAP,
    KIND_CASEFOLD,
    KIND_IDENTITY,
    KIND_NULL_TO_ZERO,
    KIND_REORDER,
    KIND_ROUND,
    KIND_SCALE,
    KIND_TRIM,
    KIND_ZERO_TO_NULL,
    Transform,
    apply_chain,
    is_legal_chain,
)
from veribench.equivalence import PRESETS
from veribench.tabular import CellKind, CellValue, parse_cell


@pytest.fixture(scope="session")
def study():
    return synthetic.build_recorded_study()


@pytest.fixture(scope="session")
def study_logs(study):
    return {
        "original": synthetic.study_verdicts(study, "original"),
        "script_only": synthetic.study_verdicts(study, "patched"),
        "removal_only": synthetic.study_verdicts(study, "original", remove_gt_columns=True),
        "both": synthetic.study_verdicts(study, "patched", remove_gt_columns=True),
    }


@pytest.fixture(scope="session")
def mini_benchmark(tmp_path_factory):
    dest = tmp_path_factory.mktemp("mini") / "bundle"
    return synthetic.build_mini_benchmark(dest)


# ---------------------------------------------------------------------------
# Chain planting: construct (gt, pred) pairs for which a given chain applied
# to pred provably reproduces gt.  The forward check below is a plain
# comparison loop, independent of the analyst's scoring internals.
# ---------------------------------------------------------------------------

_VERIFIED = PRESETS["verified-v1"]
_PLANTABLE = [a for a in ATOMS if a.kind != KIND_IDENTITY]


def _forward_reproduces(chain, pred_cells, gt_cells) -> bool:
    out, reorder = apply_chain(chain, pred_cells, _VERIFIED)
    if len(out) != len(gt_cells):
        return False

    def key(cell):
        return (cell.kind.value, float(cell.value) if cell.is_numeric() else 0.0, cell.raw)

    a = sorted(gt_cells, key=key) if reorder else list(gt_cells)
    b = sorted(out, key=key) if reorder else list(out)
    for g, p in zip(a, b):
        if g.kind is CellKind.NULL or p.kind is CellKind.NULL:
            if g.kind is not p.kind:
                return False
            continue
        if g.is_numeric() and p.is_numeric():
            diff = abs(float(g.value) - float(p.value))
            if diff > 1e-6 and diff > 1e-9 * max(abs(g.value), abs(p.value)):
                return False
            continue
        if g.kind is not p.kind or g.value != p.value:
            return False
    return True


def draw_chain(rng: random.Random):
    length = rng.choices([1, 2, 3], weights=[5, 3, 2])[0]
    while True:
        chain = tuple(rng.sample(_PLANTABLE, length))
        if is_legal_chain(chain):
            return chain


def _gen_gt_column(rng: random.Random, chain, rows: int) -> list[CellValue]:
    kinds = {t.kind for t in chain}
    round_digits = next((t.param for t in chain if t.kind == KIND_ROUND), None)
    allow_null = KIND_NULL_TO_ZERO not in kinds
    allow_zero = KIND_ZERO_TO_NULL not in kinds
    cells = []
    for _ in range(rows):
        pick = rng.random()
        if pick < 0.15 and allow_null:
            cells.append(parse_cell(""))
        elif pick < 0.25 and allow_zero:
            cells.append(parse_cell("0"))
        elif pick < 0.45:
            cells.append(parse_cell(rng.choice(["true", "false"])))
        elif pick < 0.65:
            cells.append(parse_cell(str(rng.randint(1, 500))))
        elif pick < 0.85:
            value = rng.uniform(0.5, 90.0)
            if round_digits is not None:
                value = round(value, round_digits)
            cells.append(parse_cell(repr(value)))
        else:
            text = rng.choice(["amber", "basalt", "cobalt", "delta_9"])
            # trim and casefold fixes require the target be already normal
            cells.append(parse_cell(text))
    return cells


def _invert_one(t: Transform, cells, rng: random.Random):
    out = []
    for cell in cells:
        if t.kind == KIND_SCALE:
            if cell.is_numeric():
                out.append(parse_cell(repr(float(cell.value) / t.param)))
                continue
        elif t.kind == KIND_BOOL_REMAP:
            if cell.kind is CellKind.BOOL:
                out.append(parse_cell("1" if cell.value else "0"))
                continue
            if cell.is_numeric() and cell.value in (0, 1):
                out.append(parse_cell("true" if cell.value else "false"))
                continue
        elif t.kind == KIND_NULL_TO_ZERO:
            # fix maps pred nulls to gt zeros
            if cell.is_numeric() and cell.value == 0:
                out.append(parse_cell(""))
                continue
        elif t.kind == KIND_ZERO_TO_NULL:
            if cell.kind is CellKind.NULL:
                out.append(parse_cell("0"))
                continue
        elif t.kind == KIND_TRIM:
            if cell.kind is CellKind.TEXT:
                out.append(parse_cell(" " * rng.randint(0, 2) + cell.value + " " * rng.randint(0, 2)))
                continue
        elif t.kind == KIND_CASEFOLD:
            if cell.kind is CellKind.TEXT:
                flipped = "".join(
                    ch.upper() if rng.random() < 0.5 else ch for ch in cell.value
                )
                out.append(parse_cell(flipped) if flipped.casefold() == cell.value else cell)
                continue
        out.append(cell)
    return out


def plant_chain(rng: random.Random, rows: int = 8):
    """Draw a legal chain and a (gt, pred) pair such that applying the chain
    to pred reproduces gt; rejection-sampled on an independent forward check."""
    while True:
        chain = draw_chain(rng)
        gt_cells = tuple(_gen_gt_column(rng, chain, rows))
        pred = list(gt_cells)
        for t in reversed(chain):
            if t.kind == KIND_REORDER:
                rng.shuffle(pred)
            else:
                pred = _invert_one(t, pred, rng)
        pred_cells = tuple(pred)
        if _forward_reproduces(chain, pred_cells, gt_cells):
            return chain, gt_cells, pred_cells
