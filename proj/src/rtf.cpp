#include "litefbcn/rtf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace lfb {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    void raw(char* dst, std::size_t n, const char* field) {
        need(n, field);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n, const char* field) {
        if (size_ - pos_ < n) {
            throw TruncatedPayload("RTF file truncated while reading field '" +
                                   std::string(field) + "'");
        }
    }

    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

template <typename T>
struct WireTraits;

template <>
struct WireTraits<float> {
    using Bits = std::uint32_t;
    static void put(std::string& out, float v) { put_u32_le(out, std::bit_cast<Bits>(v)); }
    static float get(Reader& r) { return std::bit_cast<float>(r.u32("payload")); }
};

template <>
struct WireTraits<double> {
    using Bits = std::uint64_t;
    static void put(std::string& out, double v) { put_u64_le(out, std::bit_cast<Bits>(v)); }
    static double get(Reader& r) { return std::bit_cast<double>(r.u64("payload")); }
};

template <typename T>
Tensor<T> read_payload(Reader& r, std::vector<std::size_t> dims) {
    std::size_t count = 1;
    for (std::size_t d : dims) count *= d;
    const std::size_t need_bytes = count * sizeof(T);
    if (r.remaining() < need_bytes) {
        throw TruncatedPayload("RTF payload shorter than declared: expected " +
                               std::to_string(need_bytes) + " bytes, found " +
                               std::to_string(r.remaining()));
    }
    std::vector<T> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = WireTraits<T>::get(r);
    return Tensor<T>(std::move(dims), std::move(data));
}

}  // namespace

template <typename T>
void write_rtf(const std::filesystem::path& path, const Tensor<T>& t) {
    if (t.rank() > kRtfMaxRank) {
        throw UnsupportedRank("RTF rank " + std::to_string(t.rank()) + " exceeds " +
                              std::to_string(kRtfMaxRank));
    }
    std::string buf;
    buf.reserve(16 + 4 * t.rank() + t.size() * sizeof(T));
    buf.append("LFBT", 4);
    put_u32_le(buf, kRtfVersion);
    put_u32_le(buf, static_cast<std::uint32_t>(dtype_of<T>()));
    put_u32_le(buf, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32_le(buf, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) WireTraits<T>::put(buf, t[i]);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw Error("write failed for '" + path.string() + "'");
}

TensorVariant read_rtf(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, "LFBT", 4) != 0) {
        throw BadMagic("RTF magic mismatch in '" + path.string() + "': expected 'LFBT'");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kRtfVersion) {
        throw UnsupportedVersion("RTF version " + std::to_string(version) +
                                 " unsupported (expected 1)");
    }
    const std::uint32_t dtype_code = r.u32("dtype");
    if (dtype_code > 1) {
        throw UnsupportedDtype("RTF dtype code " + std::to_string(dtype_code) +
                               " unsupported (expected 0 or 1)");
    }
    const std::uint32_t rank = r.u32("rank");
    if (rank > kRtfMaxRank) {
        throw UnsupportedRank("RTF rank " + std::to_string(rank) + " exceeds " +
                              std::to_string(kRtfMaxRank));
    }
    std::vector<std::size_t> dims(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32("dims");
        if (d == 0) throw BadDimension("RTF dims[" + std::to_string(i) + "] is zero");
        dims[i] = d;
    }
    if (rank == 0) dims = {1};  // scalar stored as a single-element vector

    if (dtype_code == 0) return read_payload<float>(r, std::move(dims));
    return read_payload<double>(r, std::move(dims));
}

template <typename T>
Tensor<T> read_rtf_as(const std::filesystem::path& path) {
    TensorVariant v = read_rtf(path);
    if (auto* p = std::get_if<Tensor<T>>(&v)) return std::move(*p);
    return std::visit([](const auto& t) { return t.template cast<T>(); }, v);
}

Dtype rtf_dtype(const TensorVariant& v) {
    return std::holds_alternative<Tensor<float>>(v) ? Dtype::F32 : Dtype::F64;
}

template void write_rtf<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_rtf<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_rtf_as<float>(const std::filesystem::path&);
template Tensor<double> read_rtf_as<double>(const std::filesystem::path&);

}  // namespace lfb
