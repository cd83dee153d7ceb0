#ifndef RVA_PARAMETERS_HPP_
#define RVA_PARAMETERS_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rva/errors.hpp"
#include "rva/rng.hpp"
#include "rva/tensor.hpp"

namespace rva {

template <typename T>
struct Parameter {
  std::string name;
  std::string group;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad.fill(T{0}); }
};

// Named parameters in registration order. Addresses are stable for the
// lifetime of the set, so modules keep plain pointers into it.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter<T>& add(const std::string& name, const std::string& group,
                    Tensor<T> value) {
    if (index_.count(name)) {
      throw ValidationError("duplicate parameter name: " + name);
    }
    auto param = std::make_unique<Parameter<T>>();
    param->name = name;
    param->group = group;
    param->grad = Tensor<T>(value.shape());
    param->value = std::move(value);
    index_[name] = params_.size();
    params_.push_back(std::move(param));
    return *params_.back();
  }

  // Uniform in [-bound, bound].
  Parameter<T>& add_uniform(const std::string& name, const std::string& group,
                            Shape shape, double bound, Rng& rng) {
    Tensor<T> value(std::move(shape));
    for (auto& v : value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    return add(name, group, std::move(value));
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw ValidationError("unknown parameter: " + name);
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  std::vector<std::string> groups() const {
    std::vector<std::string> out;
    for (const auto& p : params_) {
      if (std::find(out.begin(), out.end(), p->group) == out.end()) {
        out.push_back(p->group);
      }
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  // FNV-1a over names and raw value bytes; used to prove evaluation leaves
  // parameters untouched.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& p : params_) {
      mix(p->name.data(), p->name.size());
      mix(p->value.data(), p->value.size() * sizeof(T));
    }
    return h;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace rva

#endif  // RVA_PARAMETERS_HPP_
