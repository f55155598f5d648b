#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "typeflow/vocab.hpp"

using namespace typeflow;

TEST_CASE("identifier subtoken splitting") {
    CHECK(split_subtokens("parseDoc") == std::vector<std::string>{"parse", "doc"});
    CHECK(split_subtokens("parseHTMLDoc") == std::vector<std::string>{"parse", "html", "doc"});
    CHECK(split_subtokens("base64Enc") == std::vector<std::string>{"base64", "enc"});
    CHECK(split_subtokens("snake_case_name") ==
          std::vector<std::string>{"snake", "case", "name"});
    CHECK(split_subtokens("x") == std::vector<std::string>{"x"});
    CHECK(split_subtokens("HTML") == std::vector<std::string>{"html"});
    CHECK(split_subtokens("__") == std::vector<std::string>{"_"});
    CHECK(split_subtokens("user2name") == std::vector<std::string>{"user2name"});
}

TEST_CASE("byte pair encoding follows the merge rules exactly") {
    // Worked by hand. Corpus: {"aaab": 10}. Seeds: a a a b</w>.
    // Pairs: (a,a) count 20, (a,b</w>) count 10 -> merge (a,a) first.
    // After: aa a b</w> twice... precisely: "aaab" -> [aa, a, b</w>];
    // pairs now (aa,a)=10, (a,b</w>)=10, tie breaks toward the smaller pair
    // (a,b</w>) < (aa,a) lexicographically.
    const std::map<std::string, long long> counts{{"aaab", 10}};

    CHECK(bpe_seed_symbols("aaab") ==
          std::vector<std::string>{"a", "a", "a", "b</w>"});

    const BpeModel model = bpe_train(counts, 2);
    REQUIRE(model.merges.size() == 2);
    CHECK(model.merges[0] == std::pair<std::string, std::string>("a", "a"));
    CHECK(model.merges[1] == std::pair<std::string, std::string>("a", "b</w>"));

    CHECK(bpe_encode(model, "aaab") == std::vector<std::string>{"aa", "ab</w>"});
    CHECK(bpe_encode(model, "ab") == std::vector<std::string>{"ab</w>"});
    CHECK(bpe_encode(model, "ba") == std::vector<std::string>{"b", "a</w>"});
    // Unseen characters stay as seed symbols.
    CHECK(bpe_encode(model, "zq") == std::vector<std::string>{"z", "q</w>"});

    // Inventory: sorted seed characters of the corpus, then merge outputs.
    CHECK(bpe_inventory(model, counts) ==
          std::vector<std::string>{"a", "b</w>", "aa", "ab</w>"});
}

TEST_CASE("byte pair encoding merge count caps out at distinct pairs") {
    const std::map<std::string, long long> counts{{"ab", 3}};
    const BpeModel model = bpe_train(counts, 100);
    // Only (a,b</w>) can ever merge; training stops when nothing is left.
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0] == std::pair<std::string, std::string>("a", "b</w>"));
}

TEST_CASE("byte pair encoding model JSON round-trips") {
    const std::map<std::string, long long> counts{{"aaab", 10}, {"cab", 4}};
    const BpeModel model = bpe_train(counts, 3);
    const BpeModel back = bpe_from_json(bpe_to_json(model));
    CHECK(back.merges == model.merges);
    CHECK_THROWS_AS(bpe_from_json("[1, 2]"), SchemaError);
}

TEST_CASE("vocabulary ids are dense with the unknown entry last") {
    // The constructor takes the finished entry list; an unknown-entry table
    // must already end with the marker.
    const Vocabulary v({"beta", "alpha", kUnknownToken}, true);
    CHECK(v.size() == 3);
    CHECK(v.id_of("beta") == 0);
    CHECK(v.id_of("alpha") == 1);
    CHECK(v.has_unknown());
    CHECK(v.unknown_id() == 2);
    CHECK(v.at(2) == kUnknownToken);
    CHECK(v.id_or_unknown("gamma") == 2);
    CHECK(v.contains("alpha"));
    CHECK_FALSE(v.contains("gamma"));
    CHECK_THROWS_AS(v.id_of("gamma"), MissingVocabEntry);

    const Vocabulary closed({"only"}, false);
    CHECK_FALSE(closed.has_unknown());
    CHECK_THROWS_AS(closed.unknown_id(), MissingVocabEntry);
    CHECK_THROWS_AS(closed.id_or_unknown("other"), MissingVocabEntry);

    CHECK_THROWS_AS(Vocabulary({"dup", "dup"}, false), SchemaError);
    CHECK_THROWS_AS(Vocabulary({"no", "marker"}, true), SchemaError);
}

TEST_CASE("vocabulary building orders by count then name and respects the cap") {
    const std::map<std::string, long long> counts{
        {"mid", 5}, {"top", 9}, {"apple", 5}, {"rare", 1}};

    const Vocabulary v = build_vocab(counts, 0, false);
    CHECK(v.entries() ==
          std::vector<std::string>{"top", "apple", "mid", "rare"});

    const Vocabulary capped = build_vocab(counts, 2, true);
    CHECK(capped.entries() ==
          std::vector<std::string>{"top", "apple", kUnknownToken});
    CHECK(capped.id_or_unknown("rare") == 2);

    CHECK_THROWS_AS(build_vocab({}, 0, false), EmptyCorpus);
}

TEST_CASE("vocabulary JSON round-trips") {
    const Vocabulary v = build_vocab({{"a", 2}, {"b", 1}}, 0, true);
    const Vocabulary back = vocab_from_json(vocab_to_json(v));
    CHECK(back.entries() == v.entries());
    CHECK(back.has_unknown() == v.has_unknown());
    CHECK(back.id_of("a") == v.id_of("a"));
    CHECK_THROWS_AS(vocab_from_json("{\"nope\": 1}"), SchemaError);
}
