#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "srfm/tensor.hpp"

namespace srfm {

// Freeze levels follow the model's layering: L0 embedding tables,
// L1 feature encoding layers, L2plus everything above (adapt, trunk, heads).
enum class Level : std::uint8_t { L0 = 0, L1 = 1, L2plus = 2 };

inline const char* level_name(Level l) {
    switch (l) {
        case Level::L0: return "L0";
        case Level::L1: return "L1";
        default: return "L2plus";
    }
}

struct ParamTensor {
    Tensor value;
    Level level = Level::L2plus;
    bool frozen = false;
};

// Named, layered parameter tensors; the checkpoint unit.
class ParameterStore {
public:
    ParamTensor& add(const std::string& name, Tensor t, Level level, bool frozen = false) {
        if (params_.count(name))
            throw std::invalid_argument("duplicate parameter: " + name);
        ParamTensor p;
        p.value = std::move(t);
        p.level = level;
        p.frozen = frozen;
        return params_[name] = std::move(p);
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    ParamTensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }
    const ParamTensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }

    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    void set_frozen(Level level, bool frozen) {
        for (auto& [name, p] : params_)
            if (p.level == level) p.frozen = frozen;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    std::size_t size() const { return params_.size(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [name, p] : params_) out.push_back(name);
        return out;
    }

private:
    std::map<std::string, ParamTensor> params_;  // ordered: deterministic iteration
};

}  // namespace srfm
