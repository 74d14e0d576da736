#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "aet/common.hpp"

namespace aet {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian; big-endian hosts unsupported");

// Little-endian binary writer for the snapshot / pool file formats.
class BinWriter {
  public:
    void u8(uint8_t v) { put(&v, 1); }
    void u32(uint32_t v) { put(&v, 4); }
    void u64(uint64_t v) { put(&v, 8); }
    void i64(int64_t v) { put(&v, 8); }
    void f32(float v) { put(&v, 4); }
    void f64(double v) { put(&v, 8); }

    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        put(s.data(), s.size());
    }

    void f32s(const std::vector<float>& v) { put(v.data(), v.size() * 4); }

    void raw(const void* p, size_t n) { put(p, n); }

    const std::vector<uint8_t>& bytes() const { return buf_; }

    void to_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for write: " + path);
        f.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!f) throw IoError("write failed: " + path);
    }

  private:
    void put(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<uint8_t> buf_;
};

class BinReader {
  public:
    explicit BinReader(std::vector<uint8_t> bytes) : buf_(std::move(bytes)) {}

    static BinReader from_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open for read: " + path);
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return BinReader(std::move(bytes));
    }

    uint8_t u8() { return get<uint8_t>(); }
    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    int64_t i64() { return get<int64_t>(); }
    float f32() { return get<float>(); }
    double f64() { return get<double>(); }

    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::vector<float> f32s(size_t count) {
        need(count * 4);
        std::vector<float> v(count);
        std::memcpy(v.data(), buf_.data() + pos_, count * 4);
        pos_ += count * 4;
        return v;
    }

    bool at_end() const { return pos_ == buf_.size(); }

  private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void need(size_t n) const {
        if (pos_ + n > buf_.size()) throw IoError("truncated stream");
    }

    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

}  // namespace aet
