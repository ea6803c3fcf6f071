import random

import pytest

from veribench.errors import (
    ColumnLookupError,
    ConfigError,
    TableParseError,
    TableSchemaError,
)
from veribench.tabular import (
    CellKind,
    ColumnSpec,
    DataModelSpec,
    NullDirective,
    TokenConfig,
    dump_data_model_specs,
    load_data_model_specs,
    load_table,
    parse_cell,
    project_column,
    write_table_csv,
)

GNP_CSV = "GT,Pred\n4.41,0.0441\n-16.73,-0.1673\n28.20,0.2820\n3.04,0.0304\n5.24,0.0524\n"


class TestParseCell:
    def test_bool_token(self):
        cell = parse_cell("true")
        assert cell.kind is CellKind.BOOL and cell.value is True and cell.raw == "true"

    def test_empty_is_null(self):
        assert parse_cell("").kind is CellKind.NULL

    def test_growth_rate_value(self):
        cell = parse_cell("4.41")
        assert cell.kind is CellKind.FLOAT and cell.value == 4.41

    def test_int_over_float(self):
        assert parse_cell("7").kind is CellKind.INT
        assert parse_cell("+7").kind is CellKind.INT
        assert parse_cell("-7").kind is CellKind.INT
        assert parse_cell("7.0").kind is CellKind.FLOAT
        assert parse_cell("7e2").kind is CellKind.FLOAT
        assert parse_cell(".5").kind is CellKind.FLOAT

    def test_token_matching_is_case_insensitive(self):
        assert parse_cell("NULL").kind is CellKind.NULL
        assert parse_cell("NaN").kind is CellKind.NULL
        assert parse_cell("TRUE").value is True
        assert parse_cell("False").value is False

    def test_numeric_lookalikes_stay_text(self):
        # underscores, inf literals, padded numbers: none may be coerced
        for raw in ("1_0", "inf", "Infinity", " 4", "4 ", "1,000", "4.1.2", "+"):
            assert parse_cell(raw).kind is CellKind.TEXT, raw

    def test_raw_always_preserved(self):
        for raw in ("true", "", "4.41", "7", "x y"):
            assert parse_cell(raw).raw == raw

    def test_overlapping_token_sets_rejected(self):
        with pytest.raises(ConfigError):
            TokenConfig(null_tokens=frozenset({"", "true"}))
        with pytest.raises(ConfigError):
            TokenConfig(
                bool_true_tokens=frozenset({"yes"}),
                bool_false_tokens=frozenset({"YES"}),
            )

    def test_deterministic(self):
        tokens = TokenConfig()
        for raw in ("true", "0", "3.14", "abc", ""):
            assert parse_cell(raw, tokens) == parse_cell(raw, tokens)


class TestLoadTable:
    def test_basic(self):
        table = load_table("a,b\n1,true\n")
        assert table.column_names == ["a", "b"]
        assert table.row_count == 1
        assert table.columns[0].cells[0].kind is CellKind.INT
        assert table.columns[1].cells[0].kind is CellKind.BOOL

    def test_growth_fixture(self):
        table = load_table(GNP_CSV)
        assert table.row_count == 5
        for name in ("GT", "Pred"):
            series = project_column(table, name)
            assert all(c.kind is CellKind.FLOAT for c in series.cells)

    def test_header_only(self):
        table = load_table("a,b\n")
        assert table.row_count == 0

    def test_ragged_row_reports_index(self):
        with pytest.raises(TableParseError, match="row 1"):
            load_table("a,b\n1,2\n3\n")

    def test_duplicate_header(self):
        with pytest.raises(TableSchemaError, match="duplicate"):
            load_table("a,a\n1,2\n")

    def test_missing_spec_column_named(self):
        spec = DataModelSpec("m", (ColumnSpec("a"), ColumnSpec("missing_col")))
        with pytest.raises(TableSchemaError, match="missing_col"):
            load_table("a\n1\n", spec=spec)

    def test_no_header(self):
        with pytest.raises(TableParseError):
            load_table("")

    def test_bytes_accepted(self):
        assert load_table(b"a\n1\n").row_count == 1


class TestProjectColumn:
    def test_growth_column(self):
        series = project_column(load_table(GNP_CSV), "GT")
        assert len(series) == 5

    def test_empty_table(self):
        series = project_column(load_table("a,b\n"), "a")
        assert len(series) == 0

    def test_unknown_lists_available(self):
        with pytest.raises(ColumnLookupError, match="GT"):
            project_column(load_table(GNP_CSV), "missing")


class TestRoundTrip:
    def test_quoting_preserved(self):
        content = 'a,b\n"x,y",plain\n"he said ""hi""",2\n"line\nbreak",3\n'
        table = load_table(content)
        assert load_table(write_table_csv(table)).rows_raw() == table.rows_raw()

    def test_random_tables_round_trip(self):
        rng = random.Random(20260808)
        alphabet = ["", "null", "true", "0", "1.5", "x,y", 'q"q', "plain", " pad "]
        for _ in range(25):
            cols = rng.randint(1, 5)
            rows = rng.randint(0, 8)
            header = ",".join(f"c{i}" for i in range(cols))
            lines = [header]
            for _ in range(rows):
                import csv as _csv
                import io as _io

                buffer = _io.StringIO()
                _csv.writer(buffer, lineterminator="").writerow(
                    [rng.choice(alphabet) for _ in range(cols)]
                )
                lines.append(buffer.getvalue())
            content = "\n".join(lines) + "\n"
            table = load_table(content)
            again = load_table(write_table_csv(table))
            assert again.rows_raw() == table.rows_raw()

    def test_cell_count_identity(self):
        table = load_table(GNP_CSV)
        total = sum(len(col) for col in table.columns)
        assert total == table.row_count * len(table.columns)


class TestDataModelSpec:
    def test_yaml_round_trip(self):
        spec = DataModelSpec(
            model_name="orders",
            columns=(
                ColumnSpec("id", "primary key"),
                ColumnSpec("credit", "credit owed", NullDirective.REPLACE_WITH_ZERO),
            ),
            order_sensitive=True,
            key_columns=("id",),
        )
        loaded = load_data_model_specs(dump_data_model_specs([spec]))
        assert loaded == [spec]

    def test_duplicate_columns_rejected(self):
        with pytest.raises(TableSchemaError):
            DataModelSpec("m", (ColumnSpec("a"), ColumnSpec("a")))

    def test_key_columns_must_exist(self):
        with pytest.raises(TableSchemaError):
            DataModelSpec("m", (ColumnSpec("a"),), key_columns=("nope",))

    def test_accepts_single_mapping_and_wrapper(self):
        doc = "model_name: m\ncolumns:\n  - name: a\n"
        assert load_data_model_specs(doc)[0].model_name == "m"
        wrapped = "data_models:\n  - model_name: m\n    columns: [{name: a}]\n"
        assert load_data_model_specs(wrapped)[0].model_name == "m"


def test_spec_file_both_names_accepted(tmp_path):
    from veribench.tabular import find_spec_file

    task = tmp_path / "task"
    task.mkdir()
    (task / "data_model_schema.yaml").write_text("model_name: m\ncolumns: [{name: a}]\n")
    assert find_spec_file(task).name == "data_model_schema.yaml"
    (task / "data_model.yaml").write_text("model_name: m\ncolumns: [{name: a}]\n")
    assert find_spec_file(task).name == "data_model.yaml"
