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

#include "config/experiment_config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "util/errors.hpp"

namespace rolefed {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void read_size(const json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  out = v.get<std::size_t>();
}

void read_u64(const json& j, const char* key, std::uint64_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  out = v.get<std::uint64_t>();
}

void parse_model(const json& j, ExperimentConfig& cfg) {
  check_keys(j, {"profile", "dropout", "summary_mean"}, "model");
  read(j, "profile", cfg.model_profile, "model");
  cfg.model = ModelConfig::profile(cfg.model_profile);
  read(j, "dropout", cfg.model.dropout, "model");
  read(j, "summary_mean", cfg.model.summary_mean, "model");
  cfg.model.validate();
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j,
             {"rounds", "epochs", "lr", "batch", "mu", "clip", "optimizer", "gamma", "lambda_aux", "lambda_js",
              "modal_dropout", "html_weight", "detach_branches"},
             "train");
  read_size(j, "rounds", t.rounds, "train");
  read_size(j, "epochs", t.epochs, "train");
  read_size(j, "batch", t.batch, "train");
  read(j, "lr", t.lr, "train");
  read(j, "mu", t.mu, "train");
  read(j, "clip", t.clip, "train");
  read(j, "gamma", t.loss.gamma, "train");
  read(j, "lambda_aux", t.loss.lambda_aux, "train");
  read(j, "lambda_js", t.loss.lambda_js, "train");
  read(j, "modal_dropout", t.loss.modal_dropout, "train");
  read(j, "detach_branches", t.detach_branches, "train");
  std::string optimizer = "adam";
  read(j, "optimizer", optimizer, "train");
  if (optimizer == "adam") {
    t.optimizer = OptimizerKind::adam;
  } else if (optimizer == "sgd") {
    t.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError("train.optimizer must be adam or sgd");
  }
  std::string weighting = "equal";
  read(j, "html_weight", weighting, "train");
  if (weighting != "equal" && weighting != "count") throw ConfigError("train.html_weight must be equal or count");
  t.html_weight_by_count = weighting == "count";
}

DatasetSpec parse_dataset(const std::string& name, const json& j, const std::string& base_dir) {
  const std::string where = "datasets." + name;
  check_keys(j,
             {"source", "modality", "n", "separation", "tokens", "signal", "mode", "seed", "path", "image", "html",
              "test_range", "split_seed", "preshuffled"},
             where);
  DatasetSpec d;
  d.name = name;
  read(j, "source", d.source, where);
  read_size(j, "n", d.n, where);
  read(j, "separation", d.separation, where);
  read_size(j, "tokens", d.tokens, where);
  read(j, "signal", d.signal, where);
  read(j, "mode", d.pair_mode, where);
  read_u64(j, "seed", d.seed, where);
  read(j, "path", d.path, where);
  read(j, "image", d.image, where);
  read(j, "html", d.html, where);
  read_u64(j, "split_seed", d.split_seed, where);
  read(j, "preshuffled", d.preshuffled, where);
  if (j.contains("modality")) {
    std::string m;
    read(j, "modality", m, where);
    d.modality = data::parse_modality(m);
  }
  if (j.contains("test_range")) {
    const json& r = j.at("test_range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_unsigned() || !r[1].is_number_unsigned()) {
      throw ConfigError(where + ".test_range must be [begin, end]");
    }
    d.test_begin = r[0].get<std::size_t>();
    d.test_end = r[1].get<std::size_t>();
    if (d.test_end < d.test_begin) throw ConfigError(where + ".test_range end precedes begin");
  }

  const std::string& s = d.source;
  if (s == "synth_embeddings" || s == "synth_html" || s == "synth_pairs") {
    if (d.n < 2) throw ConfigError(where + ".n must be >= 2");
    if (!(d.separation >= 0.0)) throw ConfigError(where + ".separation must be >= 0");
    if (!(d.signal >= 0.0 && d.signal <= 1.0)) throw ConfigError(where + ".signal must be in [0, 1]");
    if (s == "synth_html") d.modality = data::Modality::html;
    if (s == "synth_embeddings" && d.modality == data::Modality::html) {
      throw ConfigError(where + ".modality must be image or url for synth_embeddings");
    }
    if ((s == "synth_pairs" || (s == "synth_embeddings" && d.modality == data::Modality::image)) && d.tokens == 0) {
      throw ConfigError(where + ".tokens must be positive");
    }
    if (s == "synth_pairs" && d.pair_mode != "joint" && d.pair_mode != "complementary") {
      throw ConfigError(where + ".mode must be joint or complementary");
    }
  } else if (s == "jsonl" || s == "records") {
    if (d.path.empty()) throw ConfigError(where + ".path is required");
    fs::path p(d.path);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    d.path = p.lexically_normal().string();
    if (!fs::exists(p)) throw ConfigError(where + ".path does not exist: " + d.path);
    if (s == "records") d.modality = data::Modality::html;
    if (s == "jsonl" && !j.contains("modality")) throw ConfigError(where + ".modality is required for jsonl");
  } else if (s == "pair") {
    if (d.image.empty() || d.html.empty()) throw ConfigError(where + " needs image and html dataset names");
  } else {
    throw ConfigError(where + ".source must be one of synth_embeddings, synth_html, synth_pairs, jsonl, records, pair");
  }
  return d;
}

std::vector<ClientSlice> parse_slices(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array");
  std::vector<ClientSlice> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    check_keys(j[i], {"dataset", "count"}, w);
    if (!j[i].contains("dataset") || !j[i].contains("count")) throw ConfigError(w + " needs dataset and count");
    ClientSlice s;
    read(j[i], "dataset", s.dataset, w);
    read_size(j[i], "count", s.count, w);
    if (s.count == 0) throw ConfigError(w + ".count must be positive");
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.train.seed;
  j["model"] = {{"profile", c.model_profile}, {"dropout", c.model.dropout}, {"summary_mean", c.model.summary_mean}};
  j["preprocess"] = {{"char_len", c.preproc.char_len}, {"word_len", c.preproc.word_len}, {"dom_len", c.preproc.dom_len}};
  const TrainConfig& t = c.train;
  j["train"] = {{"rounds", t.rounds},
                {"epochs", t.epochs},
                {"lr", t.lr},
                {"batch", t.batch},
                {"mu", t.mu},
                {"clip", t.clip},
                {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
                {"gamma", t.loss.gamma},
                {"lambda_aux", t.loss.lambda_aux},
                {"lambda_js", t.loss.lambda_js},
                {"modal_dropout", t.loss.modal_dropout},
                {"html_weight", t.html_weight_by_count ? "count" : "equal"},
                {"detach_branches", t.detach_branches}};
  json ds = json::object();
  for (const DatasetSpec& d : c.datasets) {
    ds[d.name] = {{"source", d.source},
                  {"modality", std::string(data::modality_name(d.modality))},
                  {"n", d.n},
                  {"separation", d.separation},
                  {"tokens", d.tokens},
                  {"signal", d.signal},
                  {"mode", d.pair_mode},
                  {"seed", d.seed},
                  {"path", d.path},
                  {"image", d.image},
                  {"html", d.html},
                  {"test_range", {d.test_begin, d.test_end}},
                  {"split_seed", d.split_seed},
                  {"preshuffled", d.preshuffled}};
  }
  j["datasets"] = ds;
  json clients = json::array();
  for (const ClientSpec& cl : c.clients) {
    auto slices = [](const std::vector<ClientSlice>& v) {
      json a = json::array();
      for (const ClientSlice& s : v) a.push_back({{"dataset", s.dataset}, {"count", s.count}});
      return a;
    };
    clients.push_back({{"id", cl.id}, {"roles", cl.roles}, {"train", slices(cl.train)}, {"test", slices(cl.test)}});
  }
  j["clients"] = clients;
  j["output"] = c.output;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), fs::path(path).parent_path().string());
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"name", "seed", "model", "preprocess", "train", "datasets", "clients", "output"}, "config");
  ExperimentConfig cfg;
  read(j, "name", cfg.name, "config");
  if (cfg.name.empty()) throw ConfigError("config.name is required");
  read_u64(j, "seed", cfg.train.seed, "config");
  parse_model(j.value("model", json::object()), cfg);

  const bool desk = cfg.model_profile == "desk";
  cfg.preproc.char_len = desk ? 256 : 4096;
  cfg.preproc.word_len = desk ? 48 : 1024;
  cfg.preproc.dom_len = desk ? 48 : 1024;
  const json pre = j.value("preprocess", json::object());
  check_keys(pre, {"char_len", "word_len", "dom_len"}, "preprocess");
  read_size(pre, "char_len", cfg.preproc.char_len, "preprocess");
  read_size(pre, "word_len", cfg.preproc.word_len, "preprocess");
  read_size(pre, "dom_len", cfg.preproc.dom_len, "preprocess");
  cfg.preproc.word_buckets = cfg.model.word_buckets;
  cfg.preproc.dom_buckets = cfg.model.dom_buckets;
  cfg.preproc.validate();

  parse_train(j.value("train", json::object()), cfg.train);
  cfg.train.validate();

  if (!j.contains("datasets") || !j["datasets"].is_object() || j["datasets"].empty()) {
    throw ConfigError("config.datasets must be a non-empty object");
  }
  std::map<std::string, const DatasetSpec*> by_name;
  for (const auto& item : j["datasets"].items()) cfg.datasets.push_back(parse_dataset(item.key(), item.value(), base_dir));
  for (const DatasetSpec& d : cfg.datasets) by_name[d.name] = &d;
  for (const DatasetSpec& d : cfg.datasets) {
    if (d.source != "pair") continue;
    auto img = by_name.find(d.image), page = by_name.find(d.html);
    if (img == by_name.end() || page == by_name.end()) throw ConfigError("datasets." + d.name + " references an unknown dataset");
    if (img->second->paired() || img->second->modality != data::Modality::image || page->second->paired() ||
        page->second->modality != data::Modality::html) {
      throw ConfigError("datasets." + d.name + " must join an image dataset and an html dataset");
    }
  }

  if (!j.contains("clients") || !j["clients"].is_array() || j["clients"].empty()) {
    throw ConfigError("config.clients must be a non-empty array");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j["clients"].size(); ++i) {
    const json& cj = j["clients"][i];
    const std::string where = "clients[" + std::to_string(i) + "]";
    check_keys(cj, {"id", "roles", "train", "test"}, where);
    ClientSpec c;
    read(cj, "id", c.id, where);
    if (c.id.empty() || c.id.find_first_of(",\n\r\"") != std::string::npos) {
      throw ConfigError(where + ".id must be non-empty without commas, quotes or line breaks");
    }
    if (!ids.insert(c.id).second) throw ConfigError("duplicate client id '" + c.id + "'");
    read(cj, "roles", c.roles, where);
    c.train = parse_slices(cj.value("train", json::array()), where + ".train");
    c.test = parse_slices(cj.value("test", json::array()), where + ".test");
    if (c.train.empty()) throw ConfigError(where + " has no train slices");
    std::set<std::string> owned;
    for (const auto* slices : {&c.train, &c.test}) {
      for (const ClientSlice& s : *slices) {
        auto it = by_name.find(s.dataset);
        if (it == by_name.end()) throw ConfigError(where + " references unknown dataset '" + s.dataset + "'");
        if (slices == &c.train) {
          if (it->second->paired()) {
            owned.insert({"image", "html", "fusion"});
          } else {
            owned.insert(std::string(data::modality_name(it->second->modality)));
          }
        }
      }
    }
    for (const std::string& r : c.roles) {
      if (r != "image" && r != "html" && r != "url" && r != "fusion") throw ConfigError(where + ".roles has unknown role '" + r + "'");
      if (!owned.count(r)) throw ConfigError(where + ".roles declares '" + r + "' but no train slice provides it");
    }
    cfg.clients.push_back(std::move(c));
  }
  read(j, "output", cfg.output, "config");
  if (cfg.output.empty()) cfg.output = "runs/" + cfg.name;
  return cfg;
}

std::string canonical_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::uint64_t config_hash(const ExperimentConfig& cfg) { return html::fnv1a64(canonical_json(cfg)); }

std::vector<data::ClientData> build_clients(const ExperimentConfig& cfg) {
  const std::size_t image_dim = cfg.model.embed_dim;
  const std::size_t url_dim = cfg.model.url_dim;
  std::map<std::string, std::vector<data::Sample>> singles;
  std::map<std::string, std::vector<data::PairedSample>> pairs;

  auto dim_of = [&](data::Modality m) { return m == data::Modality::image ? image_dim : url_dim; };
  for (const DatasetSpec& d : cfg.datasets) {
    if (d.source == "synth_embeddings") {
      singles[d.name] = data::synth_embeddings(d.n, dim_of(d.modality), d.separation, d.seed,
                                               d.modality == data::Modality::image ? d.tokens : 0);
    } else if (d.source == "synth_html") {
      singles[d.name] = data::synth_html(d.n, d.seed, cfg.preproc, d.signal);
    } else if (d.source == "synth_pairs") {
      pairs[d.name] = d.pair_mode == "complementary"
                          ? data::synth_complementary_pairs(d.n, image_dim, d.tokens, d.separation, d.seed, cfg.preproc)
                          : data::synth_joint_pairs(d.n, image_dim, d.tokens, d.separation, d.signal, d.seed, cfg.preproc);
    } else if (d.source == "jsonl") {
      singles[d.name] = data::load_jsonl(d.path, d.modality, dim_of(d.modality), cfg.preproc);
    } else if (d.source == "records") {
      singles[d.name] = data::load_stream_records(d.path, cfg.preproc);
    }
  }
  for (const DatasetSpec& d : cfg.datasets) {
    if (d.source == "pair") pairs[d.name] = data::pair_samples(singles.at(d.image), singles.at(d.html));
  }

  std::vector<data::ClientData> clients(cfg.clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) clients[i].id = cfg.clients[i].id;

  for (const DatasetSpec& d : cfg.datasets) {
    data::PartitionSpec spec;
    spec.test_begin = d.test_begin;
    spec.test_end = d.test_end;
    spec.seed = d.split_seed;
    spec.preshuffled = d.preshuffled;
    struct Target {
      std::size_t client;
      bool test;
    };
    std::vector<Target> train_targets, test_targets;
    for (std::size_t c = 0; c < cfg.clients.size(); ++c) {
      for (const ClientSlice& s : cfg.clients[c].train)
        if (s.dataset == d.name) {
          spec.train_counts.push_back(s.count);
          train_targets.push_back({c, false});
        }
      for (const ClientSlice& s : cfg.clients[c].test)
        if (s.dataset == d.name) {
          spec.test_counts.push_back(s.count);
          test_targets.push_back({c, true});
        }
    }
    if (train_targets.empty() && test_targets.empty()) continue;
    const bool is_paired = d.paired();
    const std::size_t pool = is_paired ? pairs.at(d.name).size() : singles.at(d.name).size();
    data::PartitionResult part;
    try {
      part = data::partition(pool, spec);
    } catch (const InputError& e) {
      throw InputError("dataset " + d.name + ": " + e.what());
    }
    auto assign = [&](const std::vector<Target>& targets, const std::vector<std::vector<std::size_t>>& idx) {
      for (std::size_t k = 0; k < targets.size(); ++k) {
        data::ModalData& dst = targets[k].test ? clients[targets[k].client].test : clients[targets[k].client].train;
        if (is_paired) {
          auto taken = data::take<data::PairedSample>(pairs.at(d.name), idx[k]);
          dst.pairs.insert(dst.pairs.end(), taken.begin(), taken.end());
        } else {
          auto taken = data::take<data::Sample>(singles.at(d.name), idx[k]);
          auto& v = dst.of(d.modality);
          v.insert(v.end(), taken.begin(), taken.end());
        }
      }
    };
    assign(train_targets, part.train);
    assign(test_targets, part.test);
  }
  return clients;
}

}  // namespace rolefed
