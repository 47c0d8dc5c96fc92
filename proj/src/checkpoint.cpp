#include "rolllab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace rolllab::grad {

namespace {

constexpr char kMagic[4] = {'R', 'L', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                          (unsigned char)(v >> 16 & 0xff), (unsigned char)(v >> 24 & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        fail(Error::Kind::format, std::string("checkpoint: truncated reading ") + what);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, std::uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& is, const char* what) {
    std::uint32_t n = get_u32(is, what);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), std::streamsize(n)))
        fail(Error::Kind::format, std::string("checkpoint: truncated reading ") + what);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(Error::Kind::io, "checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_string(os, ckpt.config);
    put_u32(os, std::uint32_t(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_string(os, name);
        put_u32(os, std::uint32_t(t.shape.size()));
        for (int e : t.shape) put_u32(os, std::uint32_t(e));
        os.write(reinterpret_cast<const char*>(t.ptr()),
                 std::streamsize(sizeof(double) * size_t(t.size())));
    }
    if (!os) fail(Error::Kind::io, "checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(Error::Kind::io, "checkpoint: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        fail(Error::Kind::format, "checkpoint: bad magic, expected RLLW");
    std::uint32_t version = get_u32(is, "version");
    if (version != kVersion)
        fail(Error::Kind::format, "checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config = get_string(is, "config");
    std::uint32_t count = get_u32(is, "tensor count");
    for (std::uint32_t i = 0; i < count; i++) {
        std::string name = get_string(is, "tensor name");
        std::uint32_t rank = get_u32(is, "rank");
        Shape shape;
        for (std::uint32_t r = 0; r < rank; r++)
            shape.push_back(int(get_u32(is, "extent")));
        int n = shape_size(shape);
        std::vector<double> data(static_cast<size_t>(n));
        std::streamsize want = std::streamsize(sizeof(double) * size_t(n));
        if (!is.read(reinterpret_cast<char*>(data.data()), want))
            fail(Error::Kind::format,
                 "checkpoint: truncated payload for '" + name + "', expected " +
                     std::to_string(want) + " bytes, got " +
                     std::to_string(is.gcount()));
        ckpt.tensors.emplace_back(name, Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

}  // namespace rolllab::grad
