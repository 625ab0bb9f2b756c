// Byte-level pins for the three on-disk formats against committed fixtures.

#include "doctest.h"

#include "fbe/bank.hpp"
#include "fbe/enhance.hpp"
#include "test_util.hpp"

#include <string>

using namespace fbe;
using testutil::TempDir;

namespace {

std::string from_hex(const std::string& hex) {
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    return out;
}

std::string golden_path(const char* name) {
    return std::string(FBE_GOLDEN_DIR) + "/" + name;
}

// Layout: magic, version u32, rows u64, dim u32, labels flag u8, 3 reserved
// zero bytes, row-major float32 payload, int32 labels.
const char* kBankHex =
    "46424e4b01000000030000000000000002000000010000000000c03f000010c000000000"
    "00006040000080400000003e000000000100000000000000";

// Layout: magic, version u32, classes u32, dim u32, float32 weights, biases.
const char* kHeadHex =
    "464845440100000002000000020000000000803f000080bf0000003f000000400000803e000000bf";

// Layout: magic, version u32, dim u32, float64 lambda, float32 center, radius.
const char* kBoundsHex =
    "4642445901000000020000000000000000e055400000003f0000c0bf000000400000403f";

}  // namespace

TEST_CASE("bank fixture bytes are pinned and round-trip") {
    const std::string expected = from_hex(kBankHex);
    CHECK(testutil::read_bytes(golden_path("golden_bank.fbnk")) == expected);

    const FeatureBank bank = load_bank(golden_path("golden_bank.fbnk"), BankFormat::binary);
    CHECK(bank.rows == 3);
    CHECK(bank.dim == 2);
    CHECK(bank.data == std::vector<float>{1.5f, -2.25f, 0.0f, 3.5f, 4.0f, 0.125f});
    REQUIRE(bank.labels.has_value());
    CHECK(*bank.labels == std::vector<std::int32_t>{0, 1, 0});

    TempDir tmp;
    save_bank(bank, tmp.file("again.fbnk"));
    CHECK(testutil::read_bytes(tmp.file("again.fbnk")) == expected);
}

TEST_CASE("head fixture bytes are pinned and round-trip") {
    const std::string expected = from_hex(kHeadHex);
    CHECK(testutil::read_bytes(golden_path("golden_head.fhed")) == expected);

    const LinearHead head = load_head(golden_path("golden_head.fhed"));
    CHECK(head.classes == 2);
    CHECK(head.dim == 2);
    CHECK(head.weights == std::vector<float>{1.0f, -1.0f, 0.5f, 2.0f});
    CHECK(head.bias == std::vector<float>{0.25f, -0.5f});

    TempDir tmp;
    save_head(head, tmp.file("again.fhed"));
    CHECK(testutil::read_bytes(tmp.file("again.fhed")) == expected);
}

TEST_CASE("boundaries fixture bytes are pinned and round-trip") {
    const std::string expected = from_hex(kBoundsHex);
    CHECK(testutil::read_bytes(golden_path("golden_bounds.fbdy")) == expected);

    const DeviationBoundaries b = load_boundaries(golden_path("golden_bounds.fbdy"));
    CHECK(b.lambda == 87.5);
    CHECK(b.center == std::vector<float>{0.5f, -1.5f});
    CHECK(b.radius == std::vector<float>{2.0f, 0.75f});

    TempDir tmp;
    save_boundaries(b, tmp.file("again.fbdy"));
    CHECK(testutil::read_bytes(tmp.file("again.fbdy")) == expected);
}
