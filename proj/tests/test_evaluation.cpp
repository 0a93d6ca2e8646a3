#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "clmx/errors.hpp"
#include "clmx/evaluation.hpp"
#include "clmx/training.hpp"

using namespace clmx;

namespace {

struct Fixture {
    Vocabulary vocab;
    EncodedCorpus corpus;
    ModelCheckpoint uniform;
    std::set<std::string> vowels = default_vowels("english");

    Fixture() {
        std::istringstream vin("abc de a\nba dd\n");
        std::vector<std::istream*> streams{&vin};
        vocab = build_vocabulary(streams, {"toy"});
        std::istringstream cin_("abc de\na ba\n");
        corpus = encode_corpus(cin_, vocab);
        // Zero weights put all mass through a constant highway path into a
        // zero output layer: every prediction is the uniform distribution.
        uniform = ModelCheckpoint{"uniform", ModelParams(Arch{vocab.size(), 2, 3}), "vh", {}, 1};
    }
};

NllStream tiny_stream(const std::vector<double>& probs, const std::string& id = "m") {
    NllStream s;
    s.model_id = id;
    s.vocab_hash = "vh";
    s.word_count = 2;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        TokenRecord r;
        r.token_id = static_cast<int>(i + 3);
        r.probability = probs[i];
        r.nll = -std::log(probs[i]);
        r.unit_class = UnitClass::from_code(i % 2 == 0 ? "BC" : "EV");
        r.sentence_index = 0;
        r.word_index = static_cast<int>(i / 2);
        s.records.push_back(r);
    }
    return s;
}

}  // namespace

TEST_CASE("uniform model scores every token at 1/V") {
    Fixture f;
    NllStream s = score_corpus(f.uniform, f.corpus, f.vocab, f.vowels, "vh");
    int v = f.vocab.size();
    CHECK(s.records.size() == static_cast<std::size_t>(f.corpus.token_count - 2));
    CHECK(s.word_count == f.corpus.word_count);
    for (const TokenRecord& r : s.records) {
        CHECK(r.probability == doctest::Approx(1.0 / v).epsilon(1e-12));
        CHECK(r.nll == doctest::Approx(std::log(static_cast<double>(v))).epsilon(1e-12));
    }
    CHECK(char_perplexity(s) == doctest::Approx(static_cast<double>(v)).epsilon(1e-9));
    double expected_word =
        std::exp(std::log(static_cast<double>(v)) * s.records.size() / s.word_count);
    CHECK(word_perplexity(s) == doctest::Approx(expected_word).epsilon(1e-9));
}

TEST_CASE("score_corpus emits records in corpus order with class codes") {
    Fixture f;
    NllStream s = score_corpus(f.uniform, f.corpus, f.vocab, f.vowels, "vh");
    // First sentence "abc de": predictions a+ +b+ +c d+ +e </s>
    REQUIRE(s.records.size() >= 6);
    CHECK(s.records[0].unit_class.code() == "BV");   // a+
    CHECK(s.records[1].unit_class.code() == "MC");   // +b+
    CHECK(s.records[2].unit_class.code() == "EC");   // +c
    CHECK(s.records[3].unit_class.code() == "BC");   // d+
    CHECK(s.records[4].unit_class.code() == "EV");   // +e
    CHECK(s.records[5].unit_class.code() == "SP");   // </s>
    CHECK(s.records[0].sentence_index == 0);
    CHECK(s.records[0].word_index == 0);
    CHECK(s.records[3].word_index == 1);
    CHECK(s.records[5].word_index == 2);
    // Second sentence starts a new index; "a" is a singleton vowel.
    CHECK(s.records[6].sentence_index == 1);
    CHECK(s.records[6].unit_class.code() == "SV");
    CHECK(s.records[6].word_index == 0);
}

TEST_CASE("perplexities match hand computation") {
    NllStream s = tiny_stream({0.5, 0.25, 0.125, 0.5});
    double nll_sum = std::log(2.0) + std::log(4.0) + std::log(8.0) + std::log(2.0);
    CHECK(char_perplexity(s) == doctest::Approx(std::exp(nll_sum / 4.0)).epsilon(1e-12));
    CHECK(word_perplexity(s) == doctest::Approx(std::exp(nll_sum / 2.0)).epsilon(1e-12));

    auto per_class = class_perplexity(s);
    REQUIRE(per_class.count("BC") == 1);
    REQUIRE(per_class.count("EV") == 1);
    CHECK(per_class["BC"].count == 2);
    double bc_nll = std::log(2.0) + std::log(8.0);
    CHECK(per_class["BC"].ppl == doctest::Approx(std::exp(bc_nll / 2.0)).epsilon(1e-12));
    double ev_nll = std::log(4.0) + std::log(2.0);
    CHECK(per_class["EV"].ppl == doctest::Approx(std::exp(ev_nll / 2.0)).epsilon(1e-12));

    PplReport rep = make_ppl_report(s);
    CHECK(rep.word_ppl == word_perplexity(s));
    CHECK(rep.char_ppl == char_perplexity(s));
    CHECK(rep.per_class.size() == 2);
}

TEST_CASE("empty streams are rejected") {
    NllStream empty;
    CHECK_THROWS_AS(char_perplexity(empty), EmptyStream);
    CHECK_THROWS_AS(word_perplexity(empty), EmptyStream);
}

TEST_CASE("relative perplexity difference") {
    PplReport base, cand;
    base.per_class["BC"] = {10.0, 5};
    base.per_class["EV"] = {8.0, 5};
    cand.per_class["BC"] = {8.0, 5};
    cand.per_class["EV"] = {10.0, 5};
    auto diff = relative_ppl_difference(base, cand);
    CHECK(diff["BC"] == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(diff["EV"] == doctest::Approx(-25.0).epsilon(1e-12));

    PplReport missing = base;
    missing.per_class.erase("EV");
    CHECK_THROWS_AS(relative_ppl_difference(base, missing), MissingClass);
    CHECK_THROWS_AS(relative_ppl_difference(missing, base), MissingClass);
}

TEST_CASE("interpolation endpoints reproduce the operands bit-exactly") {
    NllStream a = tiny_stream({0.5, 0.25, 0.125, 0.5}, "a");
    NllStream b = tiny_stream({0.3, 0.6, 0.2, 0.1}, "b");

    NllStream all_a = interpolate(a, b, 1.0);
    NllStream all_b = interpolate(a, b, 0.0);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(all_a.records[i].probability == a.records[i].probability);
        CHECK(all_b.records[i].probability == b.records[i].probability);
    }

    NllStream mid = interpolate(a, b, 0.25);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        double p = 0.25 * a.records[i].probability + 0.75 * b.records[i].probability;
        CHECK(mid.records[i].probability == p);
        CHECK(mid.records[i].nll == -std::log(p));
    }

    CHECK_THROWS_AS(interpolate(a, b, -0.1), Error);
    CHECK_THROWS_AS(interpolate(a, b, 1.5), Error);
}

TEST_CASE("misaligned streams are rejected") {
    NllStream a = tiny_stream({0.5, 0.25}, "a");
    NllStream b = tiny_stream({0.5, 0.25, 0.1}, "b");
    CHECK_THROWS_AS(interpolate(a, b, 0.5), StreamMismatch);

    NllStream c = tiny_stream({0.5, 0.25}, "c");
    c.records[1].token_id = 99;
    CHECK_THROWS_AS(interpolate(a, c, 0.5), StreamMismatch);
}

TEST_CASE("lambda search finds symmetric and endpoint optima") {
    // Symmetric construction: swapping the operands mirrors the objective
    // around 0.5, so the optimum is exactly 0.5.
    NllStream a = tiny_stream({0.9, 0.1, 0.8, 0.2}, "a");
    NllStream b = tiny_stream({0.1, 0.9, 0.2, 0.8}, "b");
    LambdaSearchResult sym = optimize_lambda(a, b);
    CHECK(std::fabs(sym.lambda - 0.5) <= 0.02);

    // One stream dominates everywhere: the optimum is the endpoint, and the
    // explicit endpoint evaluation guarantees we never do worse than it.
    NllStream good = tiny_stream({0.9, 0.9, 0.9, 0.9}, "good");
    NllStream bad = tiny_stream({0.1, 0.1, 0.1, 0.1}, "bad");
    LambdaSearchResult r = optimize_lambda(good, bad);
    CHECK(r.lambda == 1.0);
    CHECK(r.dev_ppl == word_perplexity(good));

    LambdaSearchResult r2 = optimize_lambda(bad, good);
    CHECK(r2.lambda == 0.0);
    CHECK(r2.dev_ppl == word_perplexity(good));
}

TEST_CASE("nll stream file round trip") {
    NllStream s = tiny_stream({0.1234567890123456, 0.25, 1.0 / 3.0, 0.5}, "model-1");
    auto path = std::filesystem::temp_directory_path() / "clmx_stream_rt.txt";
    s.save(path);
    NllStream back = NllStream::load(path);
    CHECK(back.model_id == s.model_id);
    CHECK(back.vocab_hash == s.vocab_hash);
    CHECK(back.word_count == s.word_count);
    REQUIRE(back.records.size() == s.records.size());
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        CHECK(back.records[i].probability == s.records[i].probability);
        CHECK(back.records[i].token_id == s.records[i].token_id);
        CHECK(back.records[i].unit_class.code() == s.records[i].unit_class.code());
        CHECK(back.records[i].sentence_index == s.records[i].sentence_index);
        CHECK(back.records[i].word_index == s.records[i].word_index);
        CHECK(back.records[i].nll == -std::log(back.records[i].probability));
    }
    std::filesystem::remove(path);
}
