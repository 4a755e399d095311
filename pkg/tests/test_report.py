from tagforge.bench.runner import EvalRecord
from tagforge.report import build_table, emit_report, format_cl, to_csv, to_markdown


def records_at(rate: float, n: int, mode: str, cl: int | None = None,
               complexity: str | None = None) -> list[EvalRecord]:
    correct = round(rate * n / 100)
    return [EvalRecord(instance_id=f"{mode}:{cl}:{complexity}:{i}", prompt_mode=mode,
                       context_length=cl, complexity=complexity,
                       score=1 if i < correct else 0) for i in range(n)]


def published_rows():
    recs = []
    for cl, rate in ((250, 81.19), (500, 86.19), (16000, 45.96), (32000, 32.67)):
        recs += records_at(rate, 10000, "baseline", cl=cl)
    for cl, rate in ((250, 91.34), (500, 90.58), (16000, 50.25), (32000, 36.45)):
        recs += records_at(rate, 10000, "td", cl=cl)
    return recs


class TestFormatCl:
    def test_labels(self):
        assert format_cl(250) == "250"
        assert format_cl(500) == "500"
        assert format_cl(16000) == "16K"
        assert format_cl(32000) == "32K"
        assert format_cl(1500) == "1.5K"


class TestTableShape:
    def test_niah_table_shape(self):
        header, rows = build_table(published_rows(), tagger="-")
        assert header[:4] == ["Mode", "Tagged Context", "Tagger",
                              "Tag definitions in prompt"]
        assert "250" in header and "500" in header
        assert "16K" in header and "32K" in header
        assert header[-1] == "Extremum drop rate"
        assert [r[0] for r in rows] == ["baseline", "td"]
        assert rows[0][1:4] == ["No", "-", "No"]
        assert rows[1][1:4] == ["No", "-", "Yes"]

    def test_delta_at_cl250_matches_published_gain(self):
        header, rows = build_table(published_rows())
        col = header.index("d250 vs baseline")
        assert rows[1][col] == "+10.15"
        assert rows[0][col] == ""

    def test_drop_rate_column_values(self):
        header, rows = build_table(published_rows())
        assert rows[0][-1] == "59.76"  # exact half-up arithmetic from the columns
        assert rows[1][-1] == "60.09"

    def test_single_mode_no_delta_columns(self):
        recs = records_at(80.0, 10, "baseline", cl=250) + \
            records_at(40.0, 10, "baseline", cl=32000)
        header, _ = build_table(recs)
        assert not any("baseline" in h and h.startswith("d") for h in header)

    def test_complexity_table_shape(self):
        recs = []
        for cpx, rate in (("single_hop", 86.88), ("multi_hop", 48.71), ("detail", 73.36)):
            recs += records_at(rate, 10000, "baseline", complexity=cpx)
        for cpx, rate in (("single_hop", 87.87), ("multi_hop", 49.88), ("detail", 78.97)):
            recs += records_at(rate, 10000, "td_tc", complexity=cpx)
        header, rows = build_table(recs, tagger="spaCy")
        assert ["Single-hop", "Multi-hop", "Detail"] == \
            [h for h in header if h in ("Single-hop", "Multi-hop", "Detail")]
        assert "Extremum drop rate" not in header
        assert rows[1][2] == "spaCy"  # tagger named only on the tagged-context row


class TestEmission:
    def test_markdown_and_csv_deterministic(self, tmp_path):
        recs = published_rows()
        first = emit_report(recs, tmp_path / "report")
        md_1 = first["md"].read_text()
        csv_1 = first["csv"].read_text()
        second = emit_report(recs, tmp_path / "report")
        assert second["md"].read_text() == md_1
        assert second["csv"].read_text() == csv_1
        assert str(tmp_path) not in md_1  # no absolute paths embedded

    def test_markdown_is_a_table(self):
        header, rows = build_table(published_rows())
        md = to_markdown(header, rows)
        lines = md.strip().splitlines()
        assert lines[0].startswith("| Mode |")
        assert set(lines[1].replace("|", "")) <= {"-"}
        assert len(lines) == 2 + len(rows)

    def test_csv_round_trips(self):
        import csv as csv_mod
        import io

        header, rows = build_table(published_rows())
        parsed = list(csv_mod.reader(io.StringIO(to_csv(header, rows))))
        assert parsed[0] == header
        assert parsed[1:] == rows
