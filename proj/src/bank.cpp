#include "fbe/bank.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fbe {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// --- little-endian primitives ----------------------------------------------

void put_bytes(std::string& out, const unsigned char* p, std::size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
}

void put_u32(std::string& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    put_bytes(out, b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(out, b, 8);
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
    explicit ByteReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) fail(path + ": cannot open for reading");
    }

    void read(unsigned char* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            fail(path_ + ": truncated file while reading " + what);
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        read(b, 4, what);
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    }

    std::uint64_t u64(const char* what) {
        unsigned char b[8];
        read(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }

    void expect_magic(const char (&magic)[5]) {
        unsigned char b[4];
        read(b, 4, "magic");
        if (std::memcmp(b, magic, 4) != 0)
            fail(path_ + ": bad magic, expected \"" + magic + "\"");
    }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (in_.gcount() != 0) fail(path_ + ": trailing bytes after payload");
    }

    const std::string path_;
    std::ifstream in_;
};

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(path + ": write failed");
}

FeatureBank load_bank_binary(const std::string& path) {
    ByteReader r(path);
    r.expect_magic("FBNK");
    const std::uint32_t version = r.u32("version");
    if (version != 1) fail(path + ": unsupported bank version " + std::to_string(version));
    const std::uint64_t rows = r.u64("row count");
    const std::uint32_t dim = r.u32("dimension");
    unsigned char flag_and_reserved[4];
    r.read(flag_and_reserved, 4, "labels flag");
    const unsigned char flag = flag_and_reserved[0];
    if (flag > 1) fail(path + ": labels flag must be 0 or 1");
    if (flag_and_reserved[1] || flag_and_reserved[2] || flag_and_reserved[3])
        fail(path + ": reserved header bytes must be zero");
    if (rows == 0 || dim == 0) fail(path + ": empty bank (rows and dim must be >= 1)");

    FeatureBank bank;
    bank.rows = rows;
    bank.dim = dim;
    bank.data.resize(rows * dim);
    // Bulk-read then decode; float32 payloads are stored little-endian.
    std::vector<unsigned char> buf(bank.data.size() * 4);
    r.read(buf.data(), buf.size(), "feature payload");
    for (std::size_t i = 0; i < bank.data.size(); ++i) {
        const unsigned char* b = &buf[4 * i];
        const std::uint32_t u = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                                std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
        bank.data[i] = std::bit_cast<float>(u);
    }
    if (flag) {
        std::vector<std::int32_t> labels(rows);
        for (auto& l : labels) l = r.i32("label");
        bank.labels = std::move(labels);
    }
    r.expect_eof();
    validate(bank);
    return bank;
}

FeatureBank load_bank_csv(const std::string& path, bool labels_column) {
    std::ifstream in(path);
    if (!in) fail(path + ": cannot open for reading");

    FeatureBank bank;
    std::vector<std::int32_t> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        const std::size_t feature_cells = cells.size() - (labels_column ? 1 : 0);
        if (feature_cells == 0) fail(path + ": row " + std::to_string(line_no) + " has no feature columns");
        if (bank.dim == 0) {
            bank.dim = feature_cells;
        } else if (feature_cells != bank.dim) {
            fail(path + ": ragged row " + std::to_string(line_no) + " has " +
                 std::to_string(feature_cells) + " feature columns, expected " +
                 std::to_string(bank.dim));
        }
        for (std::size_t j = 0; j < feature_cells; ++j) {
            const std::string& cell = cells[j];
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            while (first < last && (*first == ' ' || *first == '\t')) ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            while (ptr < last && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
            if (ec != std::errc() || ptr != last)
                fail(path + ": row " + std::to_string(line_no) + ", column " +
                     std::to_string(j + 1) + ": cannot parse \"" + cell + "\" as a number");
            if (!std::isfinite(v))
                fail(path + ": row " + std::to_string(line_no) + ", column " +
                     std::to_string(j + 1) + ": non-finite value \"" + cell + "\"");
            bank.data.push_back(static_cast<float>(v));
        }
        if (labels_column) {
            const std::string& cell = cells.back();
            long lv = 0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            while (first < last && (*first == ' ' || *first == '\t')) ++first;
            auto [ptr, ec] = std::from_chars(first, last, lv);
            while (ptr < last && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
            if (ec != std::errc() || ptr != last)
                fail(path + ": row " + std::to_string(line_no) +
                     ": label column \"" + cell + "\" is not an integer");
            if (lv < 0)
                fail(path + ": row " + std::to_string(line_no) + ": label " +
                     std::to_string(lv) + " out of range (must be >= 0)");
            labels.push_back(static_cast<std::int32_t>(lv));
        }
        ++bank.rows;
    }
    if (bank.rows == 0) fail(path + ": empty bank (no rows)");
    if (labels_column) bank.labels = std::move(labels);
    validate(bank);
    return bank;
}

}  // namespace

std::size_t FeatureBank::class_count() const {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void validate(const FeatureBank& bank) {
    if (bank.rows == 0 || bank.dim == 0) fail("bank must have at least one row and one dimension");
    if (bank.data.size() != bank.rows * bank.dim)
        fail("bank data size " + std::to_string(bank.data.size()) + " does not match " +
             std::to_string(bank.rows) + "x" + std::to_string(bank.dim));
    for (std::size_t i = 0; i < bank.rows; ++i) {
        const float* r = bank.row(i);
        for (std::size_t j = 0; j < bank.dim; ++j) {
            if (!std::isfinite(r[j]))
                fail("non-finite feature at row " + std::to_string(i) + ", column " +
                     std::to_string(j));
        }
    }
    if (bank.labels) {
        if (bank.labels->size() != bank.rows)
            fail("labels length " + std::to_string(bank.labels->size()) +
                 " does not match row count " + std::to_string(bank.rows));
        for (std::size_t i = 0; i < bank.labels->size(); ++i) {
            if ((*bank.labels)[i] < 0)
                fail("label out of range at row " + std::to_string(i));
        }
    }
}

void validate(const LinearHead& head) {
    if (head.classes == 0 || head.dim == 0) fail("head must have at least one class and one dimension");
    if (head.weights.size() != head.classes * head.dim) fail("head weight size mismatch");
    if (head.bias.size() != head.classes) fail("head bias size mismatch");
    for (float w : head.weights)
        if (!std::isfinite(w)) fail("non-finite head weight");
    for (float b : head.bias)
        if (!std::isfinite(b)) fail("non-finite head bias");
}

FeatureBank make_bank(std::size_t rows, std::size_t dim, std::vector<float> data,
                      std::optional<std::vector<std::int32_t>> labels) {
    FeatureBank bank{rows, dim, std::move(data), std::move(labels)};
    validate(bank);
    return bank;
}

FeatureBank load_bank(const std::string& path, BankFormat format, bool csv_labels_column) {
    return format == BankFormat::binary ? load_bank_binary(path)
                                        : load_bank_csv(path, csv_labels_column);
}

void save_bank(const FeatureBank& bank, const std::string& path) {
    validate(bank);
    std::string out;
    out.reserve(24 + bank.data.size() * 4 + (bank.labels ? bank.rows * 4 : 0));
    out.append("FBNK");
    put_u32(out, 1);
    put_u64(out, bank.rows);
    put_u32(out, static_cast<std::uint32_t>(bank.dim));
    out.push_back(bank.labels ? '\x01' : '\x00');
    out.append(3, '\x00');
    for (float v : bank.data) put_f32(out, v);
    if (bank.labels)
        for (std::int32_t l : *bank.labels) put_i32(out, l);
    write_file(path, out);
}

LinearHead load_head(const std::string& path) {
    ByteReader r(path);
    r.expect_magic("FHED");
    const std::uint32_t version = r.u32("version");
    if (version != 1) fail(path + ": unsupported head version " + std::to_string(version));
    LinearHead head;
    head.classes = r.u32("class count");
    head.dim = r.u32("dimension");
    if (head.classes == 0 || head.dim == 0) fail(path + ": empty head");
    head.weights.resize(head.classes * head.dim);
    for (auto& w : head.weights) w = r.f32("weight");
    head.bias.resize(head.classes);
    for (auto& b : head.bias) b = r.f32("bias");
    r.expect_eof();
    validate(head);
    return head;
}

void save_head(const LinearHead& head, const std::string& path) {
    validate(head);
    std::string out;
    out.append("FHED");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(head.classes));
    put_u32(out, static_cast<std::uint32_t>(head.dim));
    for (float w : head.weights) put_f32(out, w);
    for (float b : head.bias) put_f32(out, b);
    write_file(path, out);
}

FeatureVector mean_vector(const FeatureBank& bank) {
    std::vector<double> acc(bank.dim, 0.0);
    for (std::size_t i = 0; i < bank.rows; ++i) {
        const float* r = bank.row(i);
        for (std::size_t j = 0; j < bank.dim; ++j) acc[j] += r[j];
    }
    FeatureVector mean(bank.dim);
    for (std::size_t j = 0; j < bank.dim; ++j)
        mean[j] = static_cast<float>(acc[j] / static_cast<double>(bank.rows));
    return mean;
}

FeatureBank l2_normalize_rows(const FeatureBank& bank) {
    FeatureBank out = bank;
    for (std::size_t i = 0; i < out.rows; ++i) {
        float* r = out.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < out.dim; ++j) sq += double(r[j]) * double(r[j]);
        if (sq == 0.0) continue;  // zero rows pass through
        const double norm = std::sqrt(sq);
        for (std::size_t j = 0; j < out.dim; ++j)
            r[j] = static_cast<float>(double(r[j]) / norm);
    }
    return out;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path + ": cannot open for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

// Boundaries IO lives here with the other formats.

}  // namespace fbe

#include "fbe/enhance.hpp"

namespace fbe {

DeviationBoundaries load_boundaries(const std::string& path) {
    ByteReader r(path);
    r.expect_magic("FBDY");
    const std::uint32_t version = r.u32("version");
    if (version != 1) fail(path + ": unsupported boundaries version " + std::to_string(version));
    const std::uint32_t dim = r.u32("dimension");
    if (dim == 0) fail(path + ": empty boundaries");
    DeviationBoundaries b;
    b.lambda = r.f64("lambda");
    if (!(b.lambda >= 0.0 && b.lambda <= 100.0))
        fail(path + ": lambda " + std::to_string(b.lambda) + " outside [0, 100]");
    b.center.resize(dim);
    for (auto& c : b.center) c = r.f32("center");
    b.radius.resize(dim);
    for (auto& d : b.radius) {
        d = r.f32("radius");
        if (!(d >= 0.0f)) fail(path + ": negative or non-finite radius");
    }
    r.expect_eof();
    return b;
}

void save_boundaries(const DeviationBoundaries& b, const std::string& path) {
    if (b.center.size() != b.radius.size()) fail("boundaries center/radius size mismatch");
    if (b.center.empty()) fail("boundaries must cover at least one dimension");
    std::string out;
    out.append("FBDY");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(b.center.size()));
    put_f64(out, b.lambda);
    for (float c : b.center) put_f32(out, c);
    for (float d : b.radius) put_f32(out, d);
    write_file(path, out);
}

}  // namespace fbe
