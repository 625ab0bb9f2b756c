#include "doctest.h"

#include "fbe/bank.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace fbe;
using testutil::TempDir;

TEST_CASE("csv loading parses rows and dimensions") {
    TempDir tmp;
    const auto path = tmp.file("plain.csv");
    testutil::write_text(path, "1,2\n3,4\n5,6\n");
    const FeatureBank bank = load_bank(path, BankFormat::csv);
    CHECK(bank.rows == 3);
    CHECK(bank.dim == 2);
    CHECK(bank.at(0, 0) == 1.0f);
    CHECK(bank.at(0, 1) == 2.0f);
    CHECK(bank.at(2, 1) == 6.0f);
    CHECK_FALSE(bank.labels.has_value());
}

TEST_CASE("csv loading rejects bad input") {
    TempDir tmp;

    SUBCASE("nan cell is named") {
        const auto path = tmp.file("nan.csv");
        testutil::write_text(path, "1,2\n3,nan\n");
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::csv),
                             doctest::Contains("row 2, column 2"), std::runtime_error);
    }
    SUBCASE("ragged rows are rejected") {
        const auto path = tmp.file("ragged.csv");
        testutil::write_text(path, "1,2\n3\n");
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::csv), doctest::Contains("ragged"),
                             std::runtime_error);
    }
    SUBCASE("empty file is rejected") {
        const auto path = tmp.file("empty.csv");
        testutil::write_text(path, "");
        CHECK_THROWS_AS(load_bank(path, BankFormat::csv), std::runtime_error);
    }
    SUBCASE("negative label is out of range") {
        const auto path = tmp.file("label.csv");
        testutil::write_text(path, "1,2,0\n3,4,-1\n");
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::csv, true),
                             doctest::Contains("out of range"), std::runtime_error);
    }
}

TEST_CASE("csv labels column only read when requested") {
    TempDir tmp;
    const auto path = tmp.file("labeled.csv");
    testutil::write_text(path, "1,2,0\n3,4,1\n");

    const FeatureBank plain = load_bank(path, BankFormat::csv);
    CHECK(plain.dim == 3);
    CHECK_FALSE(plain.labels.has_value());

    const FeatureBank labeled = load_bank(path, BankFormat::csv, true);
    CHECK(labeled.dim == 2);
    REQUIRE(labeled.labels.has_value());
    CHECK((*labeled.labels)[0] == 0);
    CHECK((*labeled.labels)[1] == 1);
    CHECK(labeled.class_count() == 2);
}

TEST_CASE("binary bank round-trips bit-exactly") {
    TempDir tmp;
    const auto path = tmp.file("bank.fbnk");

    SUBCASE("single-entry bank") {
        const FeatureBank bank = make_bank(1, 1, {0.0f});
        save_bank(bank, path);
        const FeatureBank again = load_bank(path, BankFormat::binary);
        CHECK(again.rows == 1);
        CHECK(again.dim == 1);
        CHECK(again.data == bank.data);
    }
    SUBCASE("random banks with and without labels") {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            FeatureBank bank = testutil::random_bank(17 + seed, 5, seed);
            if (seed % 2 == 0) {
                std::vector<std::int32_t> labels(bank.rows);
                for (std::size_t i = 0; i < bank.rows; ++i)
                    labels[i] = static_cast<std::int32_t>(i % 3);
                bank.labels = labels;
            }
            save_bank(bank, path);
            const FeatureBank again = load_bank(path, BankFormat::binary);
            CHECK(again.rows == bank.rows);
            CHECK(again.dim == bank.dim);
            CHECK(again.data == bank.data);
            CHECK(again.labels == bank.labels);
            // Bytes are deterministic too.
            const std::string first = testutil::read_bytes(path);
            save_bank(again, path);
            CHECK(testutil::read_bytes(path) == first);
        }
    }
}

TEST_CASE("binary loader rejects malformed files") {
    TempDir tmp;
    const auto path = tmp.file("bad.fbnk");

    SUBCASE("bad magic") {
        testutil::write_text(path, "NOPE");
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::binary), doctest::Contains("magic"),
                             std::runtime_error);
    }
    SUBCASE("truncated payload") {
        const FeatureBank bank = make_bank(4, 3, std::vector<float>(12, 1.0f));
        save_bank(bank, path);
        std::string bytes = testutil::read_bytes(path);
        bytes.resize(bytes.size() - 5);
        testutil::write_text(path, bytes);
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::binary), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("non-finite payload names the cell") {
        FeatureBank bank = make_bank(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
        save_bank(bank, path);
        std::string bytes = testutil::read_bytes(path);
        // Overwrite the row-1, column-0 float with a quiet NaN.
        const std::size_t offset = 24 + 2 * 4;
        bytes[offset + 0] = '\x00';
        bytes[offset + 1] = '\x00';
        bytes[offset + 2] = '\xc0';
        bytes[offset + 3] = '\x7f';
        testutil::write_text(path, bytes);
        CHECK_THROWS_WITH_AS(load_bank(path, BankFormat::binary),
                             doctest::Contains("row 1, column 0"), std::runtime_error);
    }
    SUBCASE("empty save path fails") {
        CHECK_THROWS_AS(save_bank(make_bank(1, 1, {1.0f}), ""), std::runtime_error);
    }
}

TEST_CASE("linear head round-trips") {
    TempDir tmp;
    const auto path = tmp.file("head.fhed");
    LinearHead head;
    head.classes = 3;
    head.dim = 2;
    head.weights = {1.0f, -1.0f, 0.5f, 2.0f, 0.0f, -0.25f};
    head.bias = {0.1f, -0.2f, 0.3f};
    save_head(head, path);
    const LinearHead again = load_head(path);
    CHECK(again.classes == head.classes);
    CHECK(again.dim == head.dim);
    CHECK(again.weights == head.weights);
    CHECK(again.bias == head.bias);
}

TEST_CASE("mean_vector examples") {
    CHECK(mean_vector(make_bank(3, 1, {0.0f, 2.0f, 4.0f}))[0] == 2.0f);

    const FeatureVector single = mean_vector(make_bank(1, 2, {1.0f, -1.0f}));
    CHECK(single[0] == 1.0f);
    CHECK(single[1] == -1.0f);

    const FeatureVector hand = mean_vector(make_bank(3, 2, {1, 2, 3, 4, 5, 0}));
    CHECK(hand[0] == 3.0f);
    CHECK(hand[1] == 2.0f);
}

TEST_CASE("mean_vector is translation-equivariant") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FeatureBank bank = testutil::random_bank(40, 6, seed);
        FeatureBank shifted = bank;
        const float c = 2.5f;
        for (auto& v : shifted.data) v += c;
        const FeatureVector base = mean_vector(bank);
        const FeatureVector moved = mean_vector(shifted);
        for (std::size_t j = 0; j < bank.dim; ++j)
            CHECK(moved[j] == doctest::Approx(base[j] + c).epsilon(1e-6));
    }
}

TEST_CASE("l2 normalization") {
    const FeatureBank bank = make_bank(3, 2, {3, 4, 0, 0, 1, 1});
    const FeatureBank normed = l2_normalize_rows(bank);
    CHECK(normed.at(0, 0) == doctest::Approx(0.6));
    CHECK(normed.at(0, 1) == doctest::Approx(0.8));
    CHECK(normed.at(1, 0) == 0.0f);  // zero rows pass through
    CHECK(normed.at(1, 1) == 0.0f);
    CHECK(normed.at(2, 0) == doctest::Approx(std::sqrt(2.0) / 2.0));

    // Idempotence on nonzero rows.
    const FeatureBank twice = l2_normalize_rows(normed);
    for (std::size_t i = 0; i < bank.rows; ++i)
        for (std::size_t j = 0; j < bank.dim; ++j)
            CHECK(twice.at(i, j) == doctest::Approx(normed.at(i, j)).epsilon(1e-6));
}
