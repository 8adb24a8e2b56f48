import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from contentdense.corpus import AnnotatedLead, Sentence, parse_ptb_tree
from contentdense.errors import (
    EmptyLeadError,
    MissingParseError,
    SingleClassError,
    ValidationError,
)
from contentdense.features import (
    FeatureSpace,
    ProductionRule,
    SparseFeatureVector,
    concat_features,
    concat_spaces,
    extract_production_rules,
    lead_rules,
    mi_features,
    mrc_features,
    mrc_space,
    pr_features,
    pr_space,
    select_mi_vocabulary,
    space_from_lines,
    space_to_lines,
)
from contentdense.labeling import CONTENT_DENSE, NON_CONTENT_DENSE


def make_doc(id, words, label=None, parse=None, domain="general"):
    tokens = tuple(words)
    pos = tuple("NN" for _ in words)
    tree = parse_ptb_tree(parse) if parse else None
    if tree is not None:
        sent = Sentence(tokens=tuple(tree.leaves()),
                        pos=tuple("XX" for _ in tree.leaves()), parse=tree)
    else:
        sent = Sentence(tokens=tokens, pos=pos)
    return AnnotatedLead(id=id, domain=domain, lead_text=" ".join(sent.tokens),
                         sentences=(sent,), article_word_count=1000)


class TestMrcFeatures:
    def test_rate_with_repeats(self):
        lead = make_doc("a", ["cat", "dog", "cat", "sun", "sky",
                              "run", "hop", "sit", "lie", "fly"])
        vec = mrc_features(lead, {"cat", "tree"})
        space = mrc_space({"cat", "tree"})
        assert vec.entries == {space.index_of["cat"]: pytest.approx(0.2)}

    def test_disjoint_lexicon_empty_vector(self):
        lead = make_doc("a", ["cat", "dog"])
        assert mrc_features(lead, {"moon"}).entries == {}

    def test_single_token_identity(self):
        lead = make_doc("a", ["a"])
        vec = mrc_features(lead, {"a"})
        assert vec.entries == {0: 1.0}

    def test_empty_lead(self):
        lead = AnnotatedLead(id="e", domain="general", lead_text="",
                             sentences=(), article_word_count=0)
        with pytest.raises(EmptyLeadError):
            mrc_features(lead, {"a"})

    def test_values_in_unit_interval_and_sum_bounded(self):
        rng = np.random.default_rng(3)
        vocab = [f"w{k}" for k in range(20)]
        lexicon = set(vocab[:8])
        for _ in range(50):
            words = [vocab[rng.integers(20)] for _ in range(rng.integers(1, 40))]
            vec = mrc_features(make_doc("x", words), lexicon)
            for v in vec.entries.values():
                assert 0.0 < v <= 1.0
            assert sum(vec.entries.values()) <= 1.0 + 1e-12

    def test_lexicon_case_folded(self):
        lead = make_doc("a", ["Cat", "cat"])
        vec = mrc_features(lead, {"CAT"})
        assert vec.entries == {0: 1.0}


def mi_oracle(docs, min_count, top_k):
    """Exact-fraction reference: probability tables with Fraction arithmetic."""
    n = len(docs)
    df = Counter()
    nwc = Counter()
    nc = Counter()
    for words, label in docs:
        nc[label] += 1
        for w in set(words):
            df[w] += 1
            nwc[(w, label)] += 1
    out = {}
    for label in (CONTENT_DENSE, NON_CONTENT_DENSE):
        ranked = []
        for w, n_w in df.items():
            if n_w < min_count or nwc[(w, label)] == 0:
                continue
            p_wc = Fraction(nwc[(w, label)], n)
            p_w = Fraction(n_w, n)
            p_c = Fraction(nc[label], n)
            ratio = p_wc / (p_w * p_c)
            ranked.append((ratio, w))
        ranked.sort(key=lambda t: (-t[0], t[1]))
        out[label] = [(w, float(ratio), math.log(ratio))
                      for ratio, w in ranked[:top_k]]
    return out


class TestSelectMiVocabulary:
    def docs_to_leads(self, docs):
        leads = [make_doc(f"d{k}", words) for k, (words, _) in enumerate(docs)]
        labels = {f"d{k}": label for k, (_, label) in enumerate(docs)}
        return leads, labels

    def test_everywhere_word_has_zero_mi(self):
        docs = [(["ubiq", f"u{k}"], CONTENT_DENSE) for k in range(5)]
        docs += [(["ubiq", f"v{k}"], NON_CONTENT_DENSE) for k in range(5)]
        leads, labels = self.docs_to_leads(docs)
        _, entries = select_mi_vocabulary(leads, labels, min_count=5, top_k=500)
        for e in entries:
            if e.word == "ubiq":
                assert e.mi == 0.0

    def test_perfect_class_word(self):
        # 10 docs, 5 per class; "signal" in all 5 content_dense docs.
        docs = [(["signal", f"u{k}"], CONTENT_DENSE) for k in range(5)]
        docs += [([f"v{k}", "other"], NON_CONTENT_DENSE) for k in range(5)]
        leads, labels = self.docs_to_leads(docs)
        _, entries = select_mi_vocabulary(leads, labels, min_count=5, top_k=500)
        got = {(e.word, e.label): e.mi for e in entries}
        assert got[("signal", CONTENT_DENSE)] == pytest.approx(math.log(2), abs=1e-15)
        assert ("signal", NON_CONTENT_DENSE) not in got

    def test_uneven_class_sizes(self):
        # 10 docs, 4 in content_dense; word in 5 docs, 3 of them content_dense.
        docs = []
        for k in range(4):
            words = ["w"] if k < 3 else ["z"]
            docs.append((words + [f"u{k}"], CONTENT_DENSE))
        for k in range(6):
            words = ["w"] if k < 2 else ["z"]
            docs.append((words + [f"v{k}"], NON_CONTENT_DENSE))
        leads, labels = self.docs_to_leads(docs)
        _, entries = select_mi_vocabulary(leads, labels, min_count=5, top_k=500)
        got = {(e.word, e.label): e.mi for e in entries}
        assert got[("w", CONTENT_DENSE)] == pytest.approx(math.log(1.5), abs=1e-15)

    def test_min_count_filters(self):
        docs = [(["rare", f"u{k}"], CONTENT_DENSE) for k in range(4)]
        docs += [([f"v{k}"], NON_CONTENT_DENSE) for k in range(4)]
        leads, labels = self.docs_to_leads(docs)
        space, entries = select_mi_vocabulary(leads, labels, min_count=5, top_k=500)
        assert "rare" not in space.index_of
        assert all(e.word != "rare" for e in entries)

    def test_lexicographic_tie_at_boundary(self):
        # "beta" and "alpha" have identical counts; with top_k=1 the
        # lexicographically smaller word must win the last slot.
        docs = [(["alpha", "beta", f"u{k}"], CONTENT_DENSE) for k in range(5)]
        docs += [([f"v{k}"], NON_CONTENT_DENSE) for k in range(5)]
        leads, labels = self.docs_to_leads(docs)
        _, entries = select_mi_vocabulary(leads, labels, min_count=5, top_k=1)
        dense = [e for e in entries if e.label == CONTENT_DENSE]
        assert [e.word for e in dense] == ["alpha"]

    def test_single_class_error(self):
        docs = [(["a", f"u{k}"], CONTENT_DENSE) for k in range(6)]
        leads, labels = self.docs_to_leads(docs)
        with pytest.raises(SingleClassError):
            select_mi_vocabulary(leads, labels)

    def test_unlabeled_lead_error(self):
        docs = [(["a"], CONTENT_DENSE), (["b"], NON_CONTENT_DENSE)]
        leads, labels = self.docs_to_leads(docs)
        del labels["d0"]
        with pytest.raises(ValidationError):
            select_mi_vocabulary(leads, labels, min_count=1, top_k=5)

    def test_matches_fraction_oracle_on_random_corpora(self):
        rng = np.random.default_rng(17)
        vocab = [f"w{k:02d}" for k in range(18)]
        for trial in range(25):
            n = int(rng.integers(10, 51))
            docs = []
            for d in range(n):
                words = list({vocab[rng.integers(18)]
                              for _ in range(rng.integers(2, 9))})
                label = CONTENT_DENSE if rng.random() < 0.5 else NON_CONTENT_DENSE
                docs.append((words, label))
            if len({label for _, label in docs}) < 2:
                continue
            min_count = int(rng.integers(1, 5))
            top_k = int(rng.integers(1, 12))
            leads, labels = self.docs_to_leads(docs)
            _, entries = select_mi_vocabulary(leads, labels, min_count, top_k)
            expected = mi_oracle(docs, min_count, top_k)
            for label in (CONTENT_DENSE, NON_CONTENT_DENSE):
                got = [(e.word, e.mi) for e in entries if e.label == label]
                assert [w for w, _ in got] == [w for w, _, _ in expected[label]]
                for (w, mi), (_, _, mi_exp) in zip(got, expected[label]):
                    assert abs(mi - mi_exp) <= 1e-12, (w, mi, mi_exp)


class TestMiFeatures:
    def make_space(self, words):
        return FeatureSpace("MI", {w: k for k, w in enumerate(sorted(words))})

    def test_binary_presence(self):
        space = self.make_space(["cat", "dog", "sun", "sky"])
        lead = make_doc("a", ["cat", "cat", "sun", "mat"])
        vec = mi_features(lead, space)
        assert vec.entries == {space.index_of["cat"]: 1.0,
                               space.index_of["sun"]: 1.0}

    def test_repeats_still_one(self):
        space = self.make_space(["cat"])
        lead = make_doc("a", ["cat"] * 5)
        assert mi_features(lead, space).entries == {0: 1.0}

    def test_no_selected_words(self):
        space = self.make_space(["moon"])
        lead = make_doc("a", ["cat"])
        assert mi_features(lead, space).entries == {}

    def test_space_name_checked(self):
        space = FeatureSpace("MRC", {"cat": 0})
        with pytest.raises(ValidationError):
            mi_features(make_doc("a", ["cat"]), space)


def rules_oracle(struct):
    """Reference traversal over the nested-tuple ground truth structure."""
    label, rest = struct
    if isinstance(rest, str):
        return Counter()
    rules = Counter({(label, tuple(c[0] for c in rest)): 1})
    for child in rest:
        rules.update(rules_oracle(child))
    return rules


def random_tree_struct(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        return ("T%d" % rng.integers(6), "w%d" % rng.integers(9))
    n = int(rng.integers(1, 4))
    return ("N%d" % rng.integers(5),
            [random_tree_struct(rng, depth - 1) for _ in range(n)])


def struct_to_bracketed(struct):
    label, rest = struct
    if isinstance(rest, str):
        return f"({label} {rest})"
    return f"({label} {' '.join(struct_to_bracketed(c) for c in rest)})"


class TestProductionRules:
    def test_three_rule_tree(self):
        tree = parse_ptb_tree("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        rules = extract_production_rules(tree)
        assert rules == Counter({
            ProductionRule("S", ("NP", "VP")): 1,
            ProductionRule("NP", ("DT", "NN")): 1,
            ProductionRule("VP", ("VBD",)): 1,
        })

    def test_single_preterminal_empty(self):
        assert extract_production_rules(parse_ptb_tree("(NN cat)")) == Counter()

    def test_flat_verb_phrase_clause(self):
        clause = ("(VP (VB push) (NP (DT the) (NNP Czech) (NN currency)) "
                  "(PRT (RP up)) (ADVP (RB sharply)))")
        rules = extract_production_rules(parse_ptb_tree(clause))
        assert rules[ProductionRule("VP", ("VB", "NP", "PRT", "ADVP"))] == 1
        assert rules[ProductionRule("NP", ("DT", "NNP", "NN"))] == 1
        assert rules[ProductionRule("PRT", ("RP",))] == 1
        assert rules[ProductionRule("ADVP", ("RB",))] == 1

    def test_matches_reference_traversal(self):
        rng = np.random.default_rng(23)
        surface_words = {f"w{k}" for k in range(9)}
        for _ in range(150):
            struct = random_tree_struct(rng, depth=5)
            tree = parse_ptb_tree(struct_to_bracketed(struct))
            got = extract_production_rules(tree)
            expected = rules_oracle(struct)
            assert Counter({(r.lhs, r.rhs): c for r, c in got.items()}) == expected
            for rule in got:
                assert not set(rule.rhs) & surface_words
                assert rule.lhs not in surface_words


class TestPrFeatures:
    two_sentence_lead = None

    def make_lead_with_parses(self, parses, id="p1"):
        sentences = []
        for p in parses:
            tree = parse_ptb_tree(p)
            sentences.append(Sentence(tokens=tuple(tree.leaves()),
                                      pos=tuple("XX" for _ in tree.leaves()),
                                      parse=tree))
        return AnnotatedLead(id=id, domain="general", lead_text="x",
                             sentences=tuple(sentences), article_word_count=999)

    def test_count_across_sentences(self):
        lead = self.make_lead_with_parses([
            "(S (NP (NN cats)) (VP (VBD sat)))",
            "(S (NP (NN dogs)) (VP (VBD ran)))",
        ])
        space = pr_space([lead])
        vec = pr_features(lead, space)
        idx = space.index_of[ProductionRule("S", ("NP", "VP"))]
        assert vec.entries[idx] == 2.0

    def test_binary_mode(self):
        lead = self.make_lead_with_parses([
            "(S (NP (NN cats)) (VP (VBD sat)))",
            "(S (NP (NN dogs)) (VP (VBD ran)))",
        ])
        space = pr_space([lead])
        vec = pr_features(lead, space, value="binary")
        assert set(vec.entries.values()) == {1.0}

    def test_unseen_rules_ignored(self):
        train = self.make_lead_with_parses(["(S (NP (NN cats)) (VP (VBD sat)))"], "t")
        other = self.make_lead_with_parses(["(FRAG (ADVP (RB no)))"], "o")
        space = pr_space([train])
        assert pr_features(other, space).entries == {}

    def test_missing_parse_errors(self):
        no_parse = AnnotatedLead(
            id="m", domain="general", lead_text="x",
            sentences=(Sentence(tokens=("x",), pos=("NN",)),),
            article_word_count=10)
        space = pr_space([self.make_lead_with_parses(["(S (NP (NN x)) (VP (VBD y)))"])])
        with pytest.raises(MissingParseError):
            pr_features(no_parse, space)
        empty = AnnotatedLead(id="m2", domain="general", lead_text="",
                              sentences=(), article_word_count=0)
        with pytest.raises(MissingParseError):
            pr_features(empty, space)

    def test_lead_rules_cached(self):
        lead = self.make_lead_with_parses(["(S (NP (NN cats)) (VP (VBD sat)))"])
        assert lead_rules(lead) is lead_rules(lead)


def space_of(name, n):
    keys = [f"{name.lower()}{k}" for k in range(n)]
    if name == "PR":
        return FeatureSpace(name, {ProductionRule("X", (k,)): i
                                   for i, k in enumerate(keys)})
    return FeatureSpace(name, {k: i for i, k in enumerate(keys)})


class TestConcat:
    def test_offset_arithmetic(self):
        spaces = [space_of("MRC", 5), space_of("MI", 7), space_of("PR", 9)]
        pr_key = spaces[2].key_at[2]
        vectors = [SparseFeatureVector("MRC", {}),
                   SparseFeatureVector("MI", {}),
                   SparseFeatureVector("PR", {2: 3.0})]
        combined = concat_features(vectors, spaces)
        assert combined.entries == {14: 3.0}
        assert concat_spaces(spaces).index_of[("PR", pr_key)] == 14

    def test_empty_vectors(self):
        spaces = [space_of("MRC", 5), space_of("MI", 7), space_of("PR", 9)]
        vectors = [SparseFeatureVector(s.name, {}) for s in spaces]
        combined = concat_features(vectors, spaces)
        assert combined.entries == {}
        assert concat_spaces(spaces).dim == 21

    def test_single_vector_identity(self):
        space = space_of("MI", 4)
        vec = SparseFeatureVector("MI", {1: 2.0, 3: 4.0})
        combined = concat_features([vec], [space])
        assert combined.entries == vec.entries

    def test_duplicate_space_rejected(self):
        spaces = [space_of("MI", 4), space_of("MI", 4)]
        vecs = [SparseFeatureVector("MI", {}), SparseFeatureVector("MI", {})]
        with pytest.raises(ValidationError):
            concat_features(vecs, spaces)

    def test_canonical_reorder(self):
        spaces = [space_of("PR", 2), space_of("MRC", 3)]
        vectors = [SparseFeatureVector("PR", {0: 1.0}),
                   SparseFeatureVector("MRC", {1: 5.0})]
        combined = concat_features(vectors, spaces)
        assert combined.space_name == "MRC+PR"
        assert combined.entries == {1: 5.0, 3: 1.0}

    def test_combined_index_injective(self):
        spaces = [space_of("MRC", 11), space_of("MI", 13), space_of("PR", 7)]
        combined = concat_spaces(spaces)
        assert sorted(combined.index_of.values()) == list(range(31))


class TestSpaceSerialization:
    def test_word_space_round_trip(self):
        space = space_of("MI", 6)
        again = space_from_lines(space_to_lines(space))
        assert again == space

    def test_rule_space_round_trip(self):
        space = FeatureSpace("PR", {
            ProductionRule("S", ("NP", "VP")): 0,
            ProductionRule("VP", ("VB", "NP", "PRT", "ADVP")): 1,
        })
        again = space_from_lines(space_to_lines(space))
        assert again == space

    def test_composite_rejected(self):
        spaces = [space_of("MRC", 2), space_of("MI", 2)]
        with pytest.raises(ValidationError):
            space_to_lines(concat_spaces(spaces))
