import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowxai.errors import UnparseableScore
from flowxai.explain import ExplanationRequest, parse_explanation
from flowxai.validate import (DirectionLexicon, FaithfulnessResult,
                              GeneratorSummary, TermFrequencyEmbedder,
                              actionability, attribution_faithfulness,
                              check_structure, evaluate_explanation,
                              parse_actionability, semantic_similarity,
                              summaries_to_csv, summarize)

from test_explain import PHI4_TEXT, sample_request


def explanation_of(text, req=None, generator="gen"):
    return parse_explanation(text, req or sample_request(), generator=generator)


class TestLexicon:
    def test_defaults_are_disjoint_and_complete(self):
        lex = DirectionLexicon.default()
        assert {"high", "large", "elevated", "key indicator", "crucial",
                "significant"} <= lex.positive_terms
        assert {"low", "small", "absent", "not a concern", "less influential",
                "minimal"} <= lex.negative_terms
        assert not (lex.positive_terms & lex.negative_terms)

    def test_overlapping_sets_rejected(self):
        with pytest.raises(ValueError):
            DirectionLexicon(positive_terms=frozenset({"high"}),
                             negative_terms=frozenset({"high"}))

    def test_first_term_by_position(self):
        lex = DirectionLexicon.default()
        assert lex.first_term("a low value, though high later") == ("low", -1)
        assert lex.first_term("quite high, then low") == ("high", +1)

    def test_whole_word_matching(self):
        lex = DirectionLexicon.default()
        assert lex.first_term("the highway was busy") is None
        assert lex.first_term("significantly better") is None  # not 'significant'
        assert lex.first_term("a significant factor") == ("significant", +1)

    def test_case_insensitive_and_phrases(self):
        lex = DirectionLexicon.default()
        assert lex.first_term("A KEY INDICATOR for this") == ("key indicator", +1)
        assert lex.first_term("it was Not A Concern") == ("not a concern", -1)

    def test_json_roundtrip(self, tmp_path):
        path = tmp_path / "lex.json"
        path.write_text('{"positive_terms": ["up"], "negative_terms": ["down"]}')
        lex = DirectionLexicon.from_json(path)
        assert lex.first_term("going up") == ("up", +1)


class TestStructure:
    def test_reference_phi4_text_is_valid(self):
        result = check_structure(explanation_of(PHI4_TEXT))
        assert result.valid
        assert result.reasons == []

    def test_two_bullets_invalid(self):
        text = "- a `frame.time_relative` note\n- b `tcp.stream` note"
        result = check_structure(explanation_of(text))
        assert not result.valid
        assert any("bullet count 2" in r for r in result.reasons)

    def test_bullet_naming_non_top5_feature_invalid(self):
        req = sample_request()
        top5 = tuple((n, v, a) for n, v, a in req.top5 if n != "ip.len")
        req2 = ExplanationRequest(req.record_id, req.cls_name, req.clause,
                                  top5[:4] + (("udp.port", 1.0, 0.1),))
        text = ("- `frame.time_relative` fine\n- `tcp.stream` fine\n"
                "- mentions `ip.len` which is not top-5")
        result = check_structure(explanation_of(text, req2))
        assert not result.valid
        assert any("bullet 3" in r for r in result.reasons)

    def test_prose_between_bullets_invalid(self):
        text = ("- `frame.time_relative` ok\nHere is more prose\n"
                "- `tcp.stream` ok\n- `ip.len` ok")
        result = check_structure(explanation_of(text))
        assert not result.valid
        assert any("non-bullet content" in r for r in result.reasons)

    def test_four_bullets_valid(self):
        text = "\n".join(f"- `{n}` looks fine" for n, _, _ in
                         sample_request().top5[:4])
        assert check_structure(explanation_of(text)).valid

    def test_pure_predicate_same_verdict(self):
        expl = explanation_of(PHI4_TEXT)
        assert check_structure(expl).valid == check_structure(expl).valid


class TestFaithfulness:
    def test_reference_phi4_text_scores_one(self):
        result = attribution_faithfulness(explanation_of(PHI4_TEXT),
                                          sample_request())
        assert result.score == 1.0
        assert result.n_checked == 3

    def test_positive_term_positive_attribution_passes(self):
        text = "- A high `frame.time_relative` of 812.4183 is a key indicator"
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert (result.score, result.n_checked) == (1.0, 1)

    def test_sign_mismatch_fails(self):
        text = "- low `tcp.stream` here"  # attribution +0.9012
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert (result.score, result.n_checked) == (0.0, 1)

    def test_worked_example_pass_fail_noterm(self):
        text = ("- A high `frame.time_relative` was seen\n"
                "- low `tcp.stream` in this flow\n"
                "- The `ip.len` played a part")
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert result.score == pytest.approx(0.5)
        assert result.n_checked == 2
        assert any("no directional term" in f for f in result.flags)

    def test_zero_attribution_auto_passes(self):
        req = sample_request()
        top5 = req.top5[:4] + (("udp.port", 3.0, 0.0),)
        req2 = ExplanationRequest(req.record_id, req.cls_name, req.clause, top5)
        for wording in ("high", "low"):
            text = f"- a {wording} `udp.port` reading"
            result = attribution_faithfulness(explanation_of(text, req2), req2)
            assert (result.score, result.n_checked) == (1.0, 1)

    def test_no_directional_language_flagged_score_one(self):
        text = ("- `frame.time_relative` was observed\n"
                "- `tcp.stream` participated\n- `ip.len` existed")
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert (result.score, result.n_checked) == (1.0, 0)
        assert "no-directional-language" in result.flags

    def test_first_feature_mentioned_is_scored(self):
        # Bullet mentions tcp.stream (+) first, ip.len (-) second; term "high".
        text = "- high `tcp.stream` alongside `ip.len`"
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert (result.score, result.n_checked) == (1.0, 1)

    def test_negative_term_negative_attribution_passes(self):
        text = "- The `tcp.time_relative` is small here"
        result = attribution_faithfulness(explanation_of(text), sample_request())
        assert (result.score, result.n_checked) == (1.0, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.sampled_from(["pass", "fail", "none"]), min_size=0, max_size=6))
    def test_score_matches_counting_rule(self, kinds):
        req = sample_request()
        bullets = []
        for kind in kinds:
            if kind == "pass":
                bullets.append("- high `frame.time_relative` value")
            elif kind == "fail":
                bullets.append("- low `frame.time_relative` value")
            else:
                bullets.append("- `frame.time_relative` value")
        expl = explanation_of("\n".join(bullets), req)
        result = attribution_faithfulness(expl, req)
        n_pass = kinds.count("pass")
        n_checked = n_pass + kinds.count("fail")
        assert result.n_checked == n_checked
        if n_checked == 0:
            assert result.score == 1.0
        else:
            assert result.score == pytest.approx(n_pass / n_checked)
            assert 0.0 <= result.score <= 1.0


class TestSemanticSimilarity:
    def test_identical_texts_unity(self):
        text = "class(DoS_MQTT) :- tcp.stream > 500000"
        assert semantic_similarity(text, text) == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_tokens_zero(self):
        assert semantic_similarity("alpha beta", "gamma delta") == 0.0

    def test_symmetric_and_bounded(self):
        a = "high tcp.stream traffic with many packets"
        b = "the tcp.stream value was high"
        ab = semantic_similarity(a, b)
        ba = semantic_similarity(b, a)
        assert ab == pytest.approx(ba)
        assert 0.0 <= ab <= 1.0

    def test_dotted_tokens_survive(self):
        embedder = TermFrequencyEmbedder()
        vec = embedder.embed(["the tcp.stream rose"])[0]
        assert "tcp.stream" in vec

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            semantic_similarity("", "words")

    def test_rule_vs_explanation_in_open_interval(self):
        req = sample_request()
        value = semantic_similarity(req.clause, PHI4_TEXT)
        assert 0.0 < value < 1.0


class FixedJudge:
    def __init__(self, reply):
        self.reply = reply
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self.reply


class TestActionability:
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_accepts_all_valid_scores(self, k):
        assert parse_actionability(f"Actionability Score: {k}") == k

    def test_first_match_wins_with_chatter(self):
        assert parse_actionability("Sure. Actionability Score: 5") == 5
        assert parse_actionability(
            "Actionability Score: 2\nActionability Score: 4") == 2

    def test_bracketed_score_tolerated(self):
        assert parse_actionability("Actionability Score: [4]") == 4

    def test_malformed_rejected(self):
        for reply in ("Score: excellent", "", "Actionability Score: ten",
                      "Actionability Score: 9", "Actionability Score: 0"):
            with pytest.raises(UnparseableScore):
                parse_actionability(reply)

    def test_judge_receives_rendered_template(self):
        judge = FixedJudge("Actionability Score: 3")
        expl = explanation_of(PHI4_TEXT)
        assert actionability(expl, judge) == 3
        assert "You are an expert cybersecurity analyst" in judge.prompts[0]
        assert PHI4_TEXT.splitlines()[0] in judge.prompts[0]


class TestBatchEvaluation:
    def _records(self, judge_reply="Actionability Score: 3"):
        req = sample_request()
        expls = [explanation_of(PHI4_TEXT, req, generator=g)
                 for g in ("gen-a", "gen-a", "gen-b")]
        judge = FixedJudge(judge_reply)
        return [evaluate_explanation(e, judge) for e in expls]

    def test_constant_judge_means_exactly_three(self):
        summaries = summarize(self._records())
        assert all(s.actionability == 3.0 for s in summaries)
        assert [s.generator for s in summaries] == ["gen-a", "gen-b"]
        assert summaries[0].n_instances == 2

    def test_unparseable_judge_excluded_with_count(self):
        records = self._records(judge_reply="nonsense")
        summaries = summarize(records)
        assert summaries[0].actionability is None
        assert summaries[0].n_unparseable_scores == 2
        assert all(r.actionability is None for r in records)
        assert all(any("unparseable" in f for f in r.flags) for r in records)

    def test_summary_means_match_hand_computation(self):
        records = self._records()
        by_hand = np.mean([r.semantic_similarity for r in records
                           if r.generator == "gen-a"])
        summary = [s for s in summarize(records) if s.generator == "gen-a"][0]
        assert summary.semantic_similarity == pytest.approx(by_hand)
        assert summary.struct_valid_pct == 100.0
        assert summary.attribution_faithfulness == 1.0

    def test_csv_column_order(self, tmp_path):
        path = tmp_path / "summary.csv"
        summaries_to_csv([GeneratorSummary("g", 2, 100.0, 0.5, 0.9, 4.2, 0)], path)
        header = path.read_text().splitlines()[0]
        assert header == ("generator,struct_valid_pct,semantic_similarity,"
                          "attribution_faithfulness,actionability")
