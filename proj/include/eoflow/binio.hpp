#ifndef EOFLOW_BINIO_HPP
#define EOFLOW_BINIO_HPP

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "eoflow/errors.hpp"
#include "eoflow/tensor.hpp"

// Little-endian primitives for the versioned binary file formats
// (model checkpoints and dataset caches).
namespace eoflow::binio {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw data_error(std::string(what) + ": truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

inline uint64_t get_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw data_error(std::string(what) + ": truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in, const char* what) {
    uint64_t bits = get_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void put_tensor_payload(std::ostream& out, const Tensor& t) {
    for (int64_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
}

inline Tensor get_tensor_payload(std::istream& in, std::vector<int64_t> shape, const char* what) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = get_f64(in, what);
    return t;
}

}  // namespace eoflow::binio

#endif
