import pytest

from tagforge.bench import (
    Complexity,
    MCQInstance,
    PromptMode,
    accuracy_table,
    format_mcq_question,
    nolima_tasks,
    novelqa_tasks,
    read_records,
    run_eval,
    truncate_and_filter,
)
from tagforge.bench.synth import synthetic_corpus, synthetic_needles
from tagforge.core import Document
from tagforge.gateway import CompletionRequest, Gateway, MockGateway, Throttled
from tagforge.tokens import TokenEstimator

CORPUS = synthetic_corpus(n_docs=6, sentences_per_doc=30, seed=5)
NEEDLES = synthetic_needles(n=4, seed=11)


def oracle(req: CompletionRequest) -> str:
    for n in NEEDLES:
        if n.question in req.user:
            return f"The character is {n.gold_answers[0]}."
    return ""


def small_tasks(modes=(PromptMode.BASELINE,), cls=(250, 500)):
    return nolima_tasks(NEEDLES, CORPUS, (), context_lengths=cls, modes=modes, seed=3)


class TestTruncateAndFilter:
    def book(self) -> Document:
        sentences = [f"Sentence number {i} fills the book with steady text." for i in range(40)]
        return Document(id="book", text=" ".join(sentences))

    def test_fits_budget_unchanged(self):
        book = self.book()
        instances = [MCQInstance(book_id="book", question="q?", gold="A",
                                 options={l: l for l in "ABCD"},
                                 complexity=Complexity.DETAIL, evidence_offset=10)]
        out_book, kept = truncate_and_filter(book, instances, budget=10_000)
        assert out_book.text == book.text
        assert kept == instances

    def test_cut_point_and_filtering(self):
        book = self.book()
        est = TokenEstimator()
        budget = est.estimate(book.text) // 2
        early = MCQInstance(book_id="book", question="early?", gold="A",
                            options={l: l for l in "ABCD"},
                            complexity=Complexity.SINGLE_HOP, evidence_offset=0)
        late = MCQInstance(book_id="book", question="late?", gold="B",
                           options={l: l for l in "ABCD"},
                           complexity=Complexity.MULTI_HOP,
                           evidence_offset=len(book.text.encode()) - 5)
        out_book, kept = truncate_and_filter(book, [early, late], budget=budget)
        assert est.estimate(out_book.text) <= budget
        assert kept == [early]
        assert book.text.startswith(out_book.text)

    def test_three_question_fixture_mid_cut(self):
        # Hand-placed offsets around a known midpoint cut.
        book = self.book()
        est = TokenEstimator()
        budget = est.estimate(book.text) // 2
        out_book, _ = truncate_and_filter(book, [], budget=budget)
        cut = len(out_book.text.encode())
        mk = lambda off, q: MCQInstance(  # noqa: E731
            book_id="book", question=q, gold="A", options={l: l for l in "ABCD"},
            complexity=Complexity.DETAIL, evidence_offset=off)
        instances = [mk(0, "a?"), mk(cut - 1, "b?"), mk(cut + 1, "c?")]
        _, kept = truncate_and_filter(book, instances, budget=budget)
        assert [i.question for i in kept] == ["a?", "b?"]


class TestRunEval:
    def test_oracle_closed_loop_100(self, tmp_path):
        tasks = small_tasks()
        records = run_eval(tasks, MockGateway(fn=oracle), tmp_path / "r.jsonl")
        table = accuracy_table(records, "prompt_mode")
        assert table == {"baseline": 100.00}

    def test_empty_mock_all_zero_and_flagged(self, tmp_path):
        tasks = small_tasks()
        records = run_eval(tasks, MockGateway(default=""), tmp_path / "r.jsonl")
        assert accuracy_table(records, "prompt_mode") == {"baseline": 0.00}
        assert all("empty_response" in r.flags for r in records)

    def test_incremental_persistence_and_resume(self, tmp_path):
        tasks = small_tasks()
        out = tmp_path / "records.jsonl"

        class InterruptingGateway(Gateway):
            def __init__(self, after: int):
                self.inner = MockGateway(fn=oracle)
                self.after = after
                self.n = 0

            def complete(self, req):
                self.n += 1
                if self.n > self.after:
                    raise KeyboardInterrupt
                return self.inner.complete(req)

        with pytest.raises(KeyboardInterrupt):
            run_eval(tasks, InterruptingGateway(after=3), out)
        assert len(read_records(out)) == 3

        resumed = run_eval(tasks, MockGateway(fn=oracle), out)
        uninterrupted = run_eval(tasks, MockGateway(fn=oracle),
                                 tmp_path / "fresh.jsonl")
        key = lambda r: r.instance_id  # noqa: E731
        assert sorted((r.to_dict() for r in resumed), key=lambda d: d["instance_id"]) == \
            sorted((r.to_dict() for r in uninterrupted), key=lambda d: d["instance_id"])

    def test_resume_skips_scored_instances(self, tmp_path):
        tasks = small_tasks()
        out = tmp_path / "r.jsonl"
        gw = MockGateway(fn=oracle)
        run_eval(tasks, gw, out)
        first_calls = gw.calls
        run_eval(tasks, gw, out)
        assert gw.calls == first_calls  # nothing re-executed

    def test_gateway_error_recorded_run_continues(self, tmp_path):
        tasks = small_tasks(cls=(250,))

        class FlakyGateway(Gateway):
            def __init__(self):
                self.n = 0

            def complete(self, req):
                self.n += 1
                if self.n == 1:
                    raise Throttled("simulated")
                return MockGateway(fn=oracle).complete(req)

        records = run_eval(tasks, FlakyGateway(), tmp_path / "r.jsonl")
        errored = [r for r in records if r.error]
        assert len(errored) == 1
        assert "Throttled" in errored[0].error
        assert len(records) == len(tasks)


class TestMcqTasks:
    def book_and_instances(self):
        text = " ".join(f"Chapter sentence {i} about the plot." for i in range(30))
        book = Document(id="novel-1", text=text)
        instances = [
            MCQInstance(book_id="novel-1", question="Who is the hero?",
                        options={"A": "Ann", "B": "Ben", "C": "Cat", "D": "Dan"},
                        gold="B", complexity=Complexity.SINGLE_HOP, evidence_offset=0),
            MCQInstance(book_id="novel-1", question="What changed at the end?",
                        options={"A": "a", "B": "b", "C": "c", "D": "d"},
                        gold="D", complexity=Complexity.MULTI_HOP, evidence_offset=0),
        ]
        return book, instances

    def test_mcq_prompt_shape(self):
        _, instances = self.book_and_instances()
        block = format_mcq_question(instances[0])
        assert "A. Ann" in block and "D. Dan" in block
        assert "single letter" in block

    def test_mcq_closed_loop(self, tmp_path):
        book, instances = self.book_and_instances()

        def mcq_oracle(req: CompletionRequest) -> str:
            for inst in instances:
                if inst.question in req.user:
                    return inst.gold
            return ""

        tasks = novelqa_tasks(book, instances, (),
                              modes=(PromptMode.BASELINE,))
        records = run_eval(tasks, MockGateway(fn=mcq_oracle), tmp_path / "r.jsonl")
        table = accuracy_table(records, "complexity")
        assert table == {"single_hop": 100.00, "multi_hop": 100.00}

    def test_mcq_unparseable_flagged(self, tmp_path):
        book, instances = self.book_and_instances()
        tasks = novelqa_tasks(book, instances, (), modes=(PromptMode.BASELINE,))
        records = run_eval(tasks, MockGateway(default="no letter here"),
                           tmp_path / "r.jsonl")
        assert all("unparseable" in r.flags for r in records)
        assert accuracy_table(records, "prompt_mode") == {"baseline": 0.00}

    def test_options_validation(self):
        with pytest.raises(ValueError):
            MCQInstance(book_id="b", question="q", options={"A": "x"},
                        gold="A", complexity=Complexity.DETAIL)
