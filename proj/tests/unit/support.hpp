/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <unistd.h>

#include "numerics/autograd.hpp"
#include "numerics/gradcheck.hpp"
#include "numerics/param_set.hpp"
#include "numerics/tensor.hpp"
#include "util/rng.hpp"

namespace rolefed::testing {

using LossBuilder = std::function<Var(ParamBinder&)>;

inline double eval_loss(const LossBuilder& build, const ParamSet& ps) {
  GradTape tape;
  ParamBinder binder(tape, ps, false);
  return build(binder).value()[0];
}

inline GradMap analytic_grads(const LossBuilder& build, const ParamSet& ps) {
  GradTape tape;
  ParamBinder binder(tape, ps);
  tape.backward(build(binder));
  return tape.parameter_grads();
}

/// Analytic gradient of `build` at `ps` compared against central differences.
inline GradCheckResult check_gradients(const LossBuilder& build, const ParamSet& ps, std::size_t max_coords = 0,
                                       std::uint64_t seed = 0) {
  const GradMap grads = analytic_grads(build, ps);
  return finite_difference_check([&](const ParamSet& q) { return eval_loss(build, q); }, ps, grads, 1e-5,
                                 max_coords, seed);
}

/// Scalar probe sum(x * w) with a fixed random weight tensor, so every output
/// coordinate contributes a distinct amount to the gradient.
inline Var probe(Var x, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Tensor w = normal_tensor(x.value().shape(), 1.0, rng);
  return ag::sum(ag::mul(x, x.tape->constant(std::move(w))));
}

inline Tensor random_tensor(Tensor::Shape shape, Rng& rng, double sd = 0.1) {
  return normal_tensor(std::move(shape), sd, rng);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rolefed_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace rolefed::testing
