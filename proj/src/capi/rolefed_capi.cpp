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


#include "rolefed/rolefed.h"

#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "config/experiment_config.hpp"
#include "data/dataset.hpp"
#include "federation/checkpoint.hpp"
#include "federation/experiment.hpp"
#include "heads/head_gradcheck.hpp"
#include "heads/heads.hpp"
#include "metrics/metrics.hpp"
#include "util/errors.hpp"

namespace fs = std::filesystem;
using namespace rolefed;

struct rolefed_experiment {
  ExperimentConfig cfg;
  std::string output_dir;
  std::string output_root;
  std::size_t workers = 1;
  std::size_t rounds_completed = 0;
  rolefed_log_fn log = nullptr;
  void* log_user = nullptr;

  std::string resolved_output() const {
    if (!output_dir.empty()) return output_dir;
    fs::path out(cfg.output);
    if (!output_root.empty() && out.is_relative()) out = fs::path(output_root) / out;
    return out.string();
  }
  void emit(const std::string& line) const {
    if (log) log(log_user, line.c_str());
  }
};

namespace {

thread_local std::string g_last_error;

rolefed_status fail(rolefed_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
rolefed_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const ConfigError& e) {
    return fail(ROLEFED_ERR_CONFIG, e.what());
  } catch (const InputError& e) {
    return fail(ROLEFED_ERR_INPUT, e.what());
  } catch (const IoError& e) {
    return fail(ROLEFED_ERR_IO, e.what());
  } catch (const NumericError& e) {
    return fail(ROLEFED_ERR_NUMERIC, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(ROLEFED_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(ROLEFED_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ROLEFED_ERR_INTERNAL, "unknown exception");
  }
}

#define REQUIRE_ARG(cond, what) \
  if (!(cond)) return fail(ROLEFED_ERR_CONFIG, what)

html::PreprocConfig to_preproc(const rolefed_preproc_options* o) {
  html::PreprocConfig p;
  p.char_len = o->char_len;
  p.word_len = o->word_len;
  p.dom_len = o->dom_len;
  p.word_buckets = o->word_buckets;
  p.dom_buckets = o->dom_buckets;
  p.validate();
  return p;
}

void copy_str(char* dst, std::size_t cap, const std::string& src) {
  std::snprintf(dst, cap, "%s", src.c_str());
}

std::string summarize(const RoundLog& log, std::size_t total) {
  std::string line = "round " + std::to_string(log.round) + "/" + std::to_string(total);
  for (const auto& e : log.evals) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " %s/%s=%.4f", e.client_id.c_str(), e.head.c_str(), e.metrics.accuracy);
    line += buf;
  }
  return line;
}

}  // namespace

extern "C" {

const char* rolefed_version(void) { return "0.1.0"; }

const char* rolefed_status_name(rolefed_status status) {
  switch (status) {
    case ROLEFED_OK: return "ok";
    case ROLEFED_ERR_CONFIG: return "config error";
    case ROLEFED_ERR_INPUT: return "input error";
    case ROLEFED_ERR_IO: return "io error";
    case ROLEFED_ERR_NUMERIC: return "numeric error";
    case ROLEFED_ERR_INTERNAL: return "internal error";
    case ROLEFED_ERR_CHECK_FAILED: return "check failed";
  }
  return "unknown status";
}

const char* rolefed_last_error(void) { return g_last_error.c_str(); }

rolefed_status rolefed_experiment_open(const char* config_path, rolefed_experiment** out) {
  REQUIRE_ARG(config_path && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto exp = std::make_unique<rolefed_experiment>();
    exp->cfg = parse_config(config_path);
    *out = exp.release();
    return ROLEFED_OK;
  });
}

void rolefed_experiment_close(rolefed_experiment* exp) { delete exp; }

rolefed_status rolefed_experiment_set_seed(rolefed_experiment* exp, uint64_t seed) {
  REQUIRE_ARG(exp, "null experiment");
  exp->cfg.train.seed = seed;
  return ROLEFED_OK;
}

rolefed_status rolefed_experiment_set_workers(rolefed_experiment* exp, uint32_t workers) {
  REQUIRE_ARG(exp, "null experiment");
  REQUIRE_ARG(workers > 0, "workers must be positive");
  exp->workers = workers;
  return ROLEFED_OK;
}

rolefed_status rolefed_experiment_set_rounds(rolefed_experiment* exp, uint32_t rounds) {
  REQUIRE_ARG(exp, "null experiment");
  REQUIRE_ARG(rounds > 0, "rounds must be positive");
  exp->cfg.train.rounds = rounds;
  return ROLEFED_OK;
}

rolefed_status rolefed_experiment_set_output_dir(rolefed_experiment* exp, const char* dir) {
  REQUIRE_ARG(exp, "null experiment");
  exp->output_dir = dir ? dir : "";
  return ROLEFED_OK;
}

rolefed_status rolefed_experiment_set_output_root(rolefed_experiment* exp, const char* root) {
  REQUIRE_ARG(exp, "null experiment");
  exp->output_root = root ? root : "";
  return ROLEFED_OK;
}

const char* rolefed_experiment_output_dir(const rolefed_experiment* exp) {
  if (!exp) return "";
  thread_local std::string resolved;
  resolved = exp->resolved_output();
  return resolved.c_str();
}

rolefed_status rolefed_experiment_set_log(rolefed_experiment* exp, rolefed_log_fn fn, void* user) {
  REQUIRE_ARG(exp, "null experiment");
  exp->log = fn;
  exp->log_user = user;
  return ROLEFED_OK;
}

rolefed_status rolefed_experiment_run(rolefed_experiment* exp) {
  REQUIRE_ARG(exp, "null experiment");
  return guarded([&] {
    exp->rounds_completed = 0;
    const fs::path out = exp->resolved_output();
    fs::create_directories(out);
    const auto clients = build_clients(exp->cfg);
    ExperimentOptions opts;
    opts.workers = exp->workers;
    const std::size_t total = exp->cfg.train.rounds;
    opts.on_round = [&](const RoundLog& log, const ParamSet&) {
      exp->rounds_completed = log.round;
      for (const auto& w : log.warnings) exp->emit("warning: round " + std::to_string(log.round) + ": " + w);
      exp->emit(summarize(log, total));
    };
    const auto result =
        run_experiment(exp->cfg.model, exp->cfg.train, clients, init_model(exp->cfg.model, exp->cfg.train.seed), opts);

    write_round_csv(flatten(result.logs), (out / "rounds.csv").string());
    CheckpointMeta meta{exp->cfg.name, result.logs.size(), config_hash(exp->cfg)};
    write_checkpoint((out / "final.ckpt").string(), result.params, meta);
    std::ofstream cfg_out(out / "config.json");
    cfg_out << canonical_json(exp->cfg) << "\n";
    if (!cfg_out) throw IoError("cannot write " + (out / "config.json").string());
    return ROLEFED_OK;
  });
}

rolefed_status rolefed_experiment_rounds_completed(const rolefed_experiment* exp, uint32_t* out) {
  REQUIRE_ARG(exp && out, "null argument");
  *out = static_cast<uint32_t>(exp->rounds_completed);
  return ROLEFED_OK;
}

rolefed_status rolefed_preproc_defaults(const char* profile, rolefed_preproc_options* out) {
  REQUIRE_ARG(profile && out, "null argument");
  return guarded([&] {
    const ModelConfig model = ModelConfig::profile(profile);
    const bool desk = std::strcmp(profile, "desk") == 0;
    out->char_len = desk ? 256 : 4096;
    out->word_len = desk ? 48 : 1024;
    out->dom_len = desk ? 48 : 1024;
    out->word_buckets = model.word_buckets;
    out->dom_buckets = model.dom_buckets;
    return ROLEFED_OK;
  });
}

rolefed_status rolefed_preprocess_jsonl(const char* input_path, const char* output_path,
                                        const rolefed_preproc_options* options, size_t* records) {
  REQUIRE_ARG(input_path && output_path && options, "null argument");
  return guarded([&] {
    const auto preproc = to_preproc(options);
    const auto samples = data::load_jsonl(input_path, data::Modality::html, 0, preproc);
    data::write_stream_records(output_path, samples, preproc);
    if (records) *records = samples.size();
    return ROLEFED_OK;
  });
}

rolefed_status rolefed_synth_embeddings(const char* output_path, size_t n, size_t dim, size_t tokens,
                                        double separation, uint64_t seed) {
  REQUIRE_ARG(output_path, "null argument");
  REQUIRE_ARG(n > 0 && dim > 0, "n and dim must be positive");
  return guarded([&] {
    const auto samples = data::synth_embeddings(n, dim, separation, seed, tokens);
    std::ofstream out(output_path);
    if (!out) throw IoError(std::string("cannot open ") + output_path);
    char buf[32];
    for (const auto& s : samples) {
      out << "{\"label\":" << s.label << (tokens ? ",\"tokens\":[" : ",\"embedding\":");
      const std::size_t rows = tokens ? tokens : 1;
      for (std::size_t r = 0; r < rows; ++r) {
        if (r) out << ',';
        out << '[';
        for (std::size_t c = 0; c < dim; ++c) {
          std::snprintf(buf, sizeof buf, "%.17g", s.features[r * dim + c]);
          out << (c ? "," : "") << buf;
        }
        out << ']';
      }
      out << (tokens ? "]}\n" : "}\n");
    }
    if (!out) throw IoError(std::string("cannot write ") + output_path);
    return ROLEFED_OK;
  });
}

rolefed_status rolefed_synth_html(const char* output_path, size_t n, uint64_t seed, double signal,
                                  const rolefed_preproc_options* options, size_t* records) {
  REQUIRE_ARG(output_path && options, "null argument");
  REQUIRE_ARG(n > 0, "n must be positive");
  REQUIRE_ARG(signal >= 0.0 && signal <= 1.0, "signal must lie in [0, 1]");
  return guarded([&] {
    const auto preproc = to_preproc(options);
    const auto samples = data::synth_html(n, seed, preproc, signal);
    data::write_stream_records(output_path, samples, preproc);
    if (records) *records = samples.size();
    return ROLEFED_OK;
  });
}

rolefed_status rolefed_gradcheck(const char* profile, uint64_t seed, uint32_t seeds, size_t coords_per_tensor,
                                 double threshold, int corrupt, rolefed_gradcheck_report reports[4]) {
  REQUIRE_ARG(profile && reports, "null argument");
  REQUIRE_ARG(seeds > 0, "seeds must be positive");
  return guarded([&] {
    const ModelConfig model = ModelConfig::profile(profile);
    HeadCheckOptions opts;
    opts.max_coords_per_tensor = coords_per_tensor;
    opts.corrupt = corrupt != 0;
    bool ok = true;
    const HeadKind kinds[4] = {HeadKind::image, HeadKind::html, HeadKind::url, HeadKind::fusion};
    for (int k = 0; k < 4; ++k) {
      rolefed_gradcheck_report& rep = reports[k];
      std::memset(&rep, 0, sizeof rep);
      copy_str(rep.head, sizeof rep.head, std::string(head_name(kinds[k])));
      for (uint32_t i = 0; i < seeds; ++i) {
        const auto r = check_head_gradient(kinds[k], model, LossConfig{}, seed + i, opts);
        if (i == 0 || r.max_rel_error > rep.max_rel_error) {
          rep.max_rel_error = r.max_rel_error;
          rep.worst_seed = seed + i;
          copy_str(rep.worst_param, sizeof rep.worst_param, r.worst_param);
        }
        rep.coordinates = r.coordinates;
      }
      if (!(rep.max_rel_error <= threshold)) ok = false;
    }
    if (!ok) return fail(ROLEFED_ERR_CHECK_FAILED, "gradient check exceeded threshold");
    return ROLEFED_OK;
  });
}

}  // extern "C"
