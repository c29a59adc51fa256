#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/datastore.hpp"

using namespace fedflow;
using namespace fedflow::data;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (auto& x : m.data) x = 10.0 * rng.next_symmetric();
    return m;
}

ks::Trajectory fake_trajectory(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    ks::Trajectory t;
    t.snapshots = random_matrix(rows, cols, seed);
    t.times.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) t.times[i] = 0.25 * static_cast<double>(i + 1);
    return t;
}

std::vector<std::vector<double>> sorted_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < m.rows; ++i)
        rows.emplace_back(m.row(i), m.row(i) + m.cols);
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() /
           (std::string("fedflow_test_") + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST_CASE("split keeps temporal order and conserves rows") {
    const auto traj = fake_trajectory(10000, 8, 1);
    auto [train, val] = split(traj, 0.8);
    CHECK(train.rows == 8000);
    CHECK(val.rows == 2000);
    CHECK(train.rows + val.rows == traj.snapshots.rows);
    // boundary rows land on the right side
    CHECK(train(7999, 3) == traj.snapshots(7999, 3));
    CHECK(val(0, 3) == traj.snapshots(8000, 3));

    auto [all, none] = split(traj, 1.0);
    CHECK(all.rows == 10000);
    CHECK(none.rows == 0);

    CHECK_THROWS_AS(split(ks::Trajectory{}, 0.8), std::invalid_argument);
    CHECK_THROWS_AS(split(traj, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(split(traj, 1.5), std::invalid_argument);
}

TEST_CASE("partition produces disjoint balanced shards covering the input") {
    const auto train = random_matrix(8000, 4, 2);
    for (const auto scheme : {PartitionScheme::contiguous, PartitionScheme::strided}) {
        const auto shards = partition(train, 10, scheme);
        REQUIRE(shards.size() == 10);
        Matrix stacked(0, train.cols);
        for (const auto& s : shards) {
            CHECK(s.n_k == 800);
            CHECK(s.n_k == s.data.rows);
            stacked.data.insert(stacked.data.end(), s.data.data.begin(), s.data.data.end());
            stacked.rows += s.data.rows;
        }
        CHECK(sorted_rows(stacked) == sorted_rows(train));
    }
}

TEST_CASE("partition balance differs by at most one row") {
    const auto train = random_matrix(103, 3, 3);
    for (const auto scheme : {PartitionScheme::contiguous, PartitionScheme::strided}) {
        const auto shards = partition(train, 7, scheme);
        std::size_t lo = train.rows, hi = 0, total = 0;
        for (const auto& s : shards) {
            lo = std::min(lo, s.n_k);
            hi = std::max(hi, s.n_k);
            total += s.n_k;
        }
        CHECK(hi - lo <= 1);
        CHECK(total == train.rows);
    }
}

TEST_CASE("partition edge cases") {
    const auto train = random_matrix(12, 2, 4);
    const auto one = partition(train, 1, PartitionScheme::contiguous);
    REQUIRE(one.size() == 1);
    CHECK(one[0].data.data == train.data);

    CHECK_THROWS_AS(partition(train, 0, PartitionScheme::contiguous), std::invalid_argument);
    CHECK_THROWS_AS(partition(train, 13, PartitionScheme::contiguous), std::invalid_argument);
}

TEST_CASE("strided partition is round-robin") {
    Matrix train(6, 1);
    for (std::size_t i = 0; i < 6; ++i) train(i, 0) = static_cast<double>(i);
    const auto shards = partition(train, 2, PartitionScheme::strided);
    CHECK(shards[0].data.data == std::vector<double>{0, 2, 4});
    CHECK(shards[1].data.data == std::vector<double>{1, 3, 5});
}

TEST_CASE("scaler standardizes and inverts") {
    const auto train = random_matrix(400, 16, 5);
    const Scaler s = fit_scaler(train);
    const Matrix scaled = apply(s, train);

    double mean = 0.0;
    for (double x : scaled.data) mean += x;
    mean /= static_cast<double>(scaled.data.size());
    double var = 0.0;
    for (double x : scaled.data) var += (x - mean) * (x - mean);
    var /= static_cast<double>(scaled.data.size());
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);

    const Matrix back = invert(s, scaled);
    for (std::size_t i = 0; i < train.data.size(); ++i)
        CHECK(back.data[i] == Catch::Approx(train.data[i]).margin(1e-12));
}

TEST_CASE("constant data is rejected as degenerate") {
    const Matrix constant(5, 5, 3.3);
    CHECK_THROWS_AS(fit_scaler(constant), degenerate_data_error);
    CHECK_THROWS_AS(fit_scaler(Matrix{}), std::invalid_argument);
}

TEST_CASE("dataset round trip is bit exact") {
    DatasetSplits splits;
    splits.train = random_matrix(37, 8, 6);
    splits.validation = random_matrix(11, 8, 7);
    splits.test = random_matrix(23, 8, 8);
    splits.scaler = {0.125, 2.5};

    const auto path = temp_file("roundtrip.ksds");
    save_dataset(path.string(), splits);
    const DatasetSplits loaded = load_dataset(path.string());
    CHECK(loaded.train.data == splits.train.data);
    CHECK(loaded.validation.data == splits.validation.data);
    CHECK(loaded.test.data == splits.test.data);
    CHECK(loaded.scaler.mean == splits.scaler.mean);
    CHECK(loaded.scaler.std == splits.scaler.std);

    // header (4+2+2) + 3 blocks of (16 + 8*entries) + 16 bytes of scaler
    const auto expected_size = 8 + 3 * 16 + 8 * (37 + 11 + 23) * 8 + 16;
    CHECK(std::filesystem::file_size(path) == static_cast<std::uintmax_t>(expected_size));
    std::filesystem::remove(path);
}

TEST_CASE("corrupt magic is reported at offset zero") {
    DatasetSplits splits;
    splits.train = random_matrix(3, 2, 9);
    splits.validation = random_matrix(2, 2, 10);
    splits.test = random_matrix(2, 2, 11);
    splits.scaler = {0.0, 1.0};
    auto bytes = serialize_dataset(splits);
    bytes[0] ^= 0xff;
    try {
        deserialize_dataset(bytes.data(), bytes.size());
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.byte_offset() == 0);
    }
}

TEST_CASE("truncated payloads carry the failing offset") {
    DatasetSplits splits;
    splits.train = random_matrix(3, 2, 12);
    splits.validation = random_matrix(2, 2, 13);
    splits.test = random_matrix(2, 2, 14);
    auto bytes = serialize_dataset(splits);
    const auto truncated_size = bytes.size() - 10;
    try {
        deserialize_dataset(bytes.data(), truncated_size);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.byte_offset() <= truncated_size);
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }

    // bad version
    auto versioned = serialize_dataset(splits);
    versioned[4] = 9;
    try {
        deserialize_dataset(versioned.data(), versioned.size());
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.byte_offset() == 4);
    }
}

TEST_CASE("single-block matrix files round trip") {
    const auto m = random_matrix(9, 5, 15);
    const auto path = temp_file("block.ksds");
    save_matrix(path.string(), m);
    const Matrix back = load_matrix(path.string());
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.data == m.data);
    std::filesystem::remove(path);
}
