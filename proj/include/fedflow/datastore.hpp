#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/kssolver.hpp"
#include "fedflow/matrix.hpp"

namespace fedflow::data {

// Global scalar standardization, fitted on the training split only.
struct Scaler {
    double mean = 0.0;
    double std = 1.0;
};

struct DatasetSplits {
    Matrix train;
    Matrix validation;
    Matrix test;
    Scaler scaler;
};

// One client's local dataset P_k; n_k is its cardinality.
struct ClientShard {
    int client_id = 0;
    Matrix data;
    std::size_t n_k = 0;
};

enum class PartitionScheme { contiguous, strided };

inline PartitionScheme parse_partition_scheme(const std::string& s) {
    if (s == "contiguous") return PartitionScheme::contiguous;
    if (s == "strided") return PartitionScheme::strided;
    throw std::invalid_argument("unknown partition scheme: " + s);
}

// Temporal-prefix split: the first floor(fraction * M) samples become the
// training set, the remainder validation. Keeping temporal order avoids
// leakage between the splits.
inline std::pair<Matrix, Matrix> split(const ks::Trajectory& traj, double train_fraction) {
    if (traj.snapshots.rows == 0) throw std::invalid_argument("split: empty trajectory");
    if (!(train_fraction > 0.0) || train_fraction > 1.0)
        throw std::invalid_argument("split: train_fraction must be in (0, 1]");
    const auto m = traj.snapshots.rows;
    const auto cut = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(m)));
    return {traj.snapshots.slice_rows(0, cut), traj.snapshots.slice_rows(cut, m)};
}

// Partition the training rows into K shards whose sizes differ by at most
// one. `contiguous` hands out consecutive temporal blocks (distinct sensors
// seeing different time windows); `strided` deals rows round-robin, giving
// near-IID shards. The seed is reserved for randomized schemes.
inline std::vector<ClientShard> partition(const Matrix& train, int k, PartitionScheme scheme,
                                          std::uint64_t /*seed*/ = 0) {
    if (k < 1) throw std::invalid_argument("partition: K must be at least 1");
    if (static_cast<std::size_t>(k) > train.rows)
        throw std::invalid_argument("partition: K exceeds the number of rows");
    std::vector<ClientShard> shards(static_cast<std::size_t>(k));
    const std::size_t kk = static_cast<std::size_t>(k);
    if (scheme == PartitionScheme::contiguous) {
        const std::size_t base = train.rows / kk;
        const std::size_t rem = train.rows % kk;
        std::size_t begin = 0;
        for (std::size_t c = 0; c < kk; ++c) {
            const std::size_t len = base + (c < rem ? 1 : 0);
            shards[c].client_id = static_cast<int>(c);
            shards[c].data = train.slice_rows(begin, begin + len);
            shards[c].n_k = len;
            begin += len;
        }
    } else {
        std::vector<std::vector<std::size_t>> idx(kk);
        for (std::size_t i = 0; i < train.rows; ++i) idx[i % kk].push_back(i);
        for (std::size_t c = 0; c < kk; ++c) {
            shards[c].client_id = static_cast<int>(c);
            shards[c].data = train.gather_rows(idx[c]);
            shards[c].n_k = idx[c].size();
        }
    }
    return shards;
}

inline Scaler fit_scaler(const Matrix& train) {
    if (train.empty()) throw std::invalid_argument("fit_scaler: empty training data");
    const double n = static_cast<double>(train.data.size());
    double mean = 0.0;
    for (double x : train.data) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : train.data) {
        const double d = x - mean;
        var += d * d;
    }
    const double sd = std::sqrt(var / n);
    if (sd < 1e-12) throw degenerate_data_error("fit_scaler: constant data, std below 1e-12");
    return Scaler{mean, sd};
}

inline Matrix apply(const Scaler& s, const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = (v - s.mean) / s.std;
    return out;
}

inline Matrix invert(const Scaler& s, const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = v * s.std + s.mean;
    return out;
}

//------------------------------------------------------------------------------
// KSDS dataset file, little-endian:
//   magic "KSDS" | version u16 = 1 | reserved u16 = 0
//   three blocks (train, validation, test), each: rows u64, cols u64,
//   row-major f64 payload
//   scaler mean f64, scaler std f64
//------------------------------------------------------------------------------

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t offset() const { return pos_; }

    void expect_magic(const char (&magic)[5]) {
        if (size_ - pos_ < 4 || std::memcmp(data_ + pos_, magic, 4) != 0)
            throw format_error(std::string("bad magic, expected ") + magic, pos_);
        pos_ += 4;
    }

    std::uint16_t get_u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                          static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }

    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    double get_f64() { return std::bit_cast<double>(get_u64()); }

    void done() const {
        if (pos_ != size_) throw format_error("trailing bytes after payload", pos_);
    }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) throw format_error("truncated payload", pos_);
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline void put_matrix(std::vector<std::uint8_t>& out, const Matrix& m) {
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    for (double v : m.data) put_f64(out, v);
}

inline Matrix get_matrix(Reader& r) {
    const std::uint64_t rows = r.get_u64();
    const std::uint64_t cols = r.get_u64();
    if (rows != 0 && cols != 0 && rows > (std::uint64_t{1} << 40) / cols)
        throw format_error("implausible block dimensions", r.offset() - 16);
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (double& v : m.data) v = r.get_f64();
    return m;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"),
                                                      &std::fclose);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
        throw std::runtime_error("short write: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"),
                                                      &std::fclose);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::fseek(f.get(), 0, SEEK_END);
    const long size = std::ftell(f.get());
    std::fseek(f.get(), 0, SEEK_SET);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
        throw std::runtime_error("short read: " + path);
    return bytes;
}

}  // namespace detail

inline constexpr char ksds_magic[5] = "KSDS";
inline constexpr std::uint16_t ksds_version = 1;

inline std::vector<std::uint8_t> serialize_dataset(const DatasetSplits& splits) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), ksds_magic, ksds_magic + 4);
    detail::put_u16(out, ksds_version);
    detail::put_u16(out, 0);  // reserved
    detail::put_matrix(out, splits.train);
    detail::put_matrix(out, splits.validation);
    detail::put_matrix(out, splits.test);
    detail::put_f64(out, splits.scaler.mean);
    detail::put_f64(out, splits.scaler.std);
    return out;
}

inline DatasetSplits deserialize_dataset(const std::uint8_t* data, std::size_t size) {
    detail::Reader r(data, size);
    r.expect_magic(ksds_magic);
    const std::uint16_t version = r.get_u16();
    if (version != ksds_version)
        throw format_error("unsupported KSDS version " + std::to_string(version), 4);
    r.get_u16();  // reserved
    DatasetSplits splits;
    splits.train = detail::get_matrix(r);
    splits.validation = detail::get_matrix(r);
    splits.test = detail::get_matrix(r);
    splits.scaler.mean = r.get_f64();
    splits.scaler.std = r.get_f64();
    r.done();
    return splits;
}

inline void save_dataset(const std::string& path, const DatasetSplits& splits) {
    detail::write_file(path, serialize_dataset(splits));
}

inline DatasetSplits load_dataset(const std::string& path) {
    const auto bytes = detail::read_file(path);
    return deserialize_dataset(bytes.data(), bytes.size());
}

// Single-block variant of the same layout, used for error-field exports.
inline void save_matrix(const std::string& path, const Matrix& m) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), ksds_magic, ksds_magic + 4);
    detail::put_u16(out, ksds_version);
    detail::put_u16(out, 0);
    detail::put_matrix(out, m);
    detail::write_file(path, out);
}

inline Matrix load_matrix(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::Reader r(bytes.data(), bytes.size());
    r.expect_magic(ksds_magic);
    if (r.get_u16() != ksds_version) throw format_error("unsupported KSDS version", 4);
    r.get_u16();
    Matrix m = detail::get_matrix(r);
    r.done();
    return m;
}

}  // namespace fedflow::data
