#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "gatedflow/model.hpp"

namespace gatedflow {

namespace {

constexpr char kMagic[] = "GRBM1";

void put_f64(std::vector<unsigned char>& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
        out.push_back(static_cast<unsigned char>(bits & 0xffu));
        bits >>= 8;
    }
}

double get_f64(std::span<const unsigned char> in, std::size_t off) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | in[off + static_cast<std::size_t>(b)];
    return std::bit_cast<double>(bits);
}

template <typename M>
void put_block(std::vector<unsigned char>& out, const M& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c) put_f64(out, block(r, c));
}

template <typename M>
void get_block(std::span<const unsigned char> in, std::size_t& off, M& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            block(r, c) = get_f64(in, off);
            off += 8;
        }
}

// Reads one '\n'-terminated line starting at `off`.
std::string get_line(std::span<const unsigned char> in, std::size_t& off, const char* field) {
    std::string line;
    while (off < in.size() && in[off] != '\n') line.push_back(static_cast<char>(in[off++]));
    if (off >= in.size()) {
        throw ParseError(field, std::string("GRBM1 header truncated at ") + field);
    }
    ++off;
    return line;
}

}  // namespace

std::vector<unsigned char> encode_model(const FactoredGRBM& m) {
    m.validate();
    std::ostringstream hdr;
    hdr << kMagic << '\n'
        << m.inputs() << ' ' << m.outputs() << ' ' << m.hidden() << ' ' << m.factors() << '\n';
    const std::string h = hdr.str();
    std::vector<unsigned char> out(h.begin(), h.end());
    const auto f = static_cast<std::size_t>(m.factors());
    out.reserve(out.size() + 8 * (static_cast<std::size_t>(m.inputs() + m.outputs() + m.hidden()) * (f + 1)));
    put_block(out, m.wxf);
    put_block(out, m.wyf);
    put_block(out, m.whf);
    put_block(out, m.ybias);
    put_block(out, m.hbias);
    return out;
}

FactoredGRBM decode_model(std::span<const unsigned char> bytes) {
    std::size_t off = 0;
    if (get_line(bytes, off, "magic") != kMagic) {
        throw ParseError("magic", "not a GRBM1 model file");
    }
    std::istringstream dims(get_line(bytes, off, "dims"));
    long long ni = 0, nj = 0, nk = 0, nf = 0;
    std::string extra;
    if (!(dims >> ni >> nj >> nk >> nf) || (dims >> extra) || ni <= 0 || nj <= 0 || nk <= 0 ||
        nf <= 0) {
        throw ParseError("dims", "invalid GRBM1 dimension line");
    }
    const auto need = 8ull * static_cast<unsigned long long>((ni + nj + nk) * nf + nj + nk);
    if (bytes.size() - off != need) {
        throw ParseError("payload", "GRBM1 payload size does not match header");
    }
    FactoredGRBM m = FactoredGRBM::zeros(ni, nj, nk, nf);
    get_block(bytes, off, m.wxf);
    get_block(bytes, off, m.wyf);
    get_block(bytes, off, m.whf);
    get_block(bytes, off, m.ybias);
    get_block(bytes, off, m.hbias);
    return m;
}

void save_model(const FactoredGRBM& m, const std::filesystem::path& path) {
    const auto bytes = encode_model(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError(path, "write failed");
    }
}

FactoredGRBM load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace gatedflow
