#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "srfm/tensor.hpp"

namespace srfm {

// File-backed token embedding table standing in for a frozen language model.
// Format: header line `srfm-emb v1 <vocab> <D>`, then one line per token id
// with D space-separated decimals.
inline Tensor load_frozen_table(const std::string& path, int expect_vocab, int expect_d) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open frozen embedding table: " + path);
    std::string magic, version;
    int vocab = 0, d = 0;
    in >> magic >> version >> vocab >> d;
    if (magic != "srfm-emb" || version != "v1")
        throw std::runtime_error("bad frozen table header in " + path);
    if (vocab != expect_vocab || d != expect_d)
        throw std::runtime_error("frozen table " + path + " is " + std::to_string(vocab) + "x" +
                                 std::to_string(d) + ", model expects " +
                                 std::to_string(expect_vocab) + "x" + std::to_string(expect_d));
    Tensor t = Tensor::zeros({vocab, d});
    for (int r = 0; r < vocab; ++r)
        for (int c = 0; c < d; ++c)
            if (!(in >> t.at(r, c)))
                throw std::runtime_error("truncated frozen table: " + path);
    return t;
}

inline void save_frozen_table(const std::string& path, const Tensor& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write frozen embedding table: " + path);
    out << "srfm-emb v1 " << table.shape[0] << " " << table.shape[1] << "\n";
    out.precision(17);
    for (int r = 0; r < table.shape[0]; ++r) {
        for (int c = 0; c < table.shape[1]; ++c) out << (c ? " " : "") << table.at(r, c);
        out << "\n";
    }
}

}  // namespace srfm
