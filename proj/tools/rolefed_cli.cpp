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


// rolefed command-line tool. Links only the public C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "rolefed/rolefed.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code(rolefed_status s) {
  switch (s) {
    case ROLEFED_OK: return kExitOk;
    case ROLEFED_ERR_CONFIG:
    case ROLEFED_ERR_INPUT: return kExitValidation;
    default: return kExitRuntime;
  }
}

int report(rolefed_status s, const std::string& context) {
  if (s != ROLEFED_OK) {
    std::fprintf(stderr, "rolefed %s: %s: %s\n", context.c_str(), rolefed_status_name(s), rolefed_last_error());
  }
  return exit_code(s);
}

void print_line(void* user, const char* message) {
  if (*static_cast<bool*>(user)) std::fprintf(stderr, "%s\n", message);
}

struct RunArgs {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  uint32_t workers = 1;
  uint32_t rounds = 0;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  rolefed_experiment* exp = nullptr;
  rolefed_status s = rolefed_experiment_open(a.config.c_str(), &exp);
  if (s != ROLEFED_OK) return report(s, "run");
  if (const char* root = std::getenv("ROLEFED_OUTPUT_ROOT"); root && *root) rolefed_experiment_set_output_root(exp, root);
  if (!a.out.empty()) rolefed_experiment_set_output_dir(exp, a.out.c_str());
  if (a.seed_set) rolefed_experiment_set_seed(exp, a.seed);
  if (a.rounds > 0) rolefed_experiment_set_rounds(exp, a.rounds);
  bool verbose = !a.quiet;
  rolefed_experiment_set_log(exp, print_line, &verbose);
  s = rolefed_experiment_set_workers(exp, a.workers);
  if (s == ROLEFED_OK) s = rolefed_experiment_run(exp);
  if (s == ROLEFED_OK) std::printf("%s\n", rolefed_experiment_output_dir(exp));
  rolefed_experiment_close(exp);
  return report(s, "run");
}

int load_profile(const std::string& profile, rolefed_preproc_options* opts, const char* context) {
  return report(rolefed_preproc_defaults(profile.c_str(), opts), context);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role-aware federated phishing detection simulator"};
  app.set_version_flag("--version", rolefed_version());
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config; writes rounds.csv, final.ckpt and config.json");
  run_cmd->add_option("config", run.config, "Experiment JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory (overrides the config and ROLEFED_OUTPUT_ROOT)");
  run_cmd->add_option("--seed", run.seed, "Training seed override")->each([&](const std::string&) { run.seed_set = true; });
  run_cmd->add_option("--workers", run.workers, "Client worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--rounds", run.rounds, "Round count override")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--quiet", run.quiet, "No per-round progress on stderr");

  std::string pre_in, pre_out, pre_profile = "full";
  auto* pre_cmd = app.add_subcommand("preprocess", "JSON Lines pages to binary stream records");
  pre_cmd->add_option("--input", pre_in, "JSONL with label and html fields")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--output", pre_out, "Binary record file")->required();
  pre_cmd->add_option("--profile", pre_profile, "Stream lengths: full or desk")->check(CLI::IsMember({"full", "desk"}));

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic datasets");
  synth_cmd->require_subcommand(1);
  std::string emb_out;
  std::size_t emb_n = 1000, emb_dim = 768, emb_tokens = 0;
  double emb_sep = 8.0;
  uint64_t emb_seed = 0;
  auto* emb_cmd = synth_cmd->add_subcommand("embeddings", "Gaussian-cluster embeddings as JSON Lines");
  emb_cmd->add_option("--output", emb_out)->required();
  emb_cmd->add_option("--n", emb_n)->check(CLI::PositiveNumber);
  emb_cmd->add_option("--dim", emb_dim)->check(CLI::PositiveNumber);
  emb_cmd->add_option("--tokens", emb_tokens, "Rows per sample; 0 writes flat embeddings");
  emb_cmd->add_option("--separation", emb_sep)->check(CLI::NonNegativeNumber);
  emb_cmd->add_option("--seed", emb_seed);

  std::string html_out, html_profile = "full";
  std::size_t html_n = 1000;
  double html_signal = 0.3;
  uint64_t html_seed = 0;
  auto* html_cmd = synth_cmd->add_subcommand("html", "Template pages as binary stream records");
  html_cmd->add_option("--output", html_out)->required();
  html_cmd->add_option("--n", html_n)->check(CLI::PositiveNumber);
  html_cmd->add_option("--seed", html_seed);
  html_cmd->add_option("--signal", html_signal, "Tag-burst strength in [0, 1]")->check(CLI::Range(0.0, 1.0));
  html_cmd->add_option("--profile", html_profile)->check(CLI::IsMember({"full", "desk"}));

  std::string gc_profile = "desk";
  uint64_t gc_seed = 0;
  uint32_t gc_seeds = 1;
  std::size_t gc_coords = 16;
  double gc_threshold = 1e-4;
  bool gc_corrupt = false;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every head's training loss");
  gc_cmd->add_option("--profile", gc_profile)->check(CLI::IsMember({"full", "desk"}));
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--seeds", gc_seeds, "Consecutive seeds to check")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--coords", gc_coords, "Coordinates per tensor (0 = all)");
  gc_cmd->add_option("--threshold", gc_threshold);
  gc_cmd->add_flag("--corrupt", gc_corrupt, "Perturb one analytic gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run_cmd) return cmd_run(run);

  if (*pre_cmd) {
    rolefed_preproc_options opts;
    if (int rc = load_profile(pre_profile, &opts, "preprocess")) return rc;
    size_t n = 0;
    const rolefed_status s = rolefed_preprocess_jsonl(pre_in.c_str(), pre_out.c_str(), &opts, &n);
    if (s == ROLEFED_OK) std::printf("%zu records -> %s\n", n, pre_out.c_str());
    return report(s, "preprocess");
  }

  if (*emb_cmd) {
    const rolefed_status s =
        rolefed_synth_embeddings(emb_out.c_str(), emb_n, emb_dim, emb_tokens, emb_sep, emb_seed);
    if (s == ROLEFED_OK) std::printf("%zu samples -> %s\n", emb_n, emb_out.c_str());
    return report(s, "synth embeddings");
  }

  if (*html_cmd) {
    rolefed_preproc_options opts;
    if (int rc = load_profile(html_profile, &opts, "synth html")) return rc;
    size_t n = 0;
    const rolefed_status s = rolefed_synth_html(html_out.c_str(), html_n, html_seed, html_signal, &opts, &n);
    if (s == ROLEFED_OK) std::printf("%zu records -> %s\n", n, html_out.c_str());
    return report(s, "synth html");
  }

  if (*gc_cmd) {
    rolefed_gradcheck_report reports[4];
    const rolefed_status s = rolefed_gradcheck(gc_profile.c_str(), gc_seed, gc_seeds, gc_coords, gc_threshold,
                                               gc_corrupt ? 1 : 0, reports);
    if (s == ROLEFED_OK || s == ROLEFED_ERR_CHECK_FAILED) {
      for (const auto& r : reports) {
        std::printf("%-7s max_rel_error=%.3e coords=%zu worst_seed=%llu worst=%s %s\n", r.head, r.max_rel_error,
                    r.coordinates, static_cast<unsigned long long>(r.worst_seed), r.worst_param,
                    r.max_rel_error <= gc_threshold ? "ok" : "FAIL");
      }
    }
    return report(s, "gradcheck");
  }
  return kExitValidation;
}
