// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// dwmark: command-line front end for the watermarked-rephrase membership
// toolkit. Subcommands cover the full workflow: key generation, rephrase-set
// synthesis, public/private splitting, membership detection, MIA baselines,
// the release audit, the simulation harness, the wire-protocol server, and
// toy-model training.
//
// Conventions:
//   * exit 0 = success, 2 = validation error (bad flags, bad files,
//     violated preconditions), 1 = runtime failure.
//   * all randomness funnels through --seed.
//   * artifacts are written under --output-dir; stdout carries a short
//     human-readable summary, or a single JSON document under --json.
//   * key secrets are written only to artifact files, never to stdout or to
//     the log stream.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwmark/audit.hpp"
#include "dwmark/backend.hpp"
#include "dwmark/client.hpp"
#include "dwmark/common.hpp"
#include "dwmark/core.hpp"
#include "dwmark/detect.hpp"
#include "dwmark/markov.hpp"
#include "dwmark/mia.hpp"
#include "dwmark/pipeline.hpp"
#include "dwmark/server.hpp"
#include "dwmark/toylm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel : int { quiet = 0, info = 1, debug = 2 };

struct Global {
  std::uint64_t seed = 0;
  std::string backend_url;
  std::string toy_model;
  std::string output_dir = ".";
  LogLevel log_level = LogLevel::info;
  int threads = 1;
  bool json_out = false;
};

void log_line(const Global& g, LogLevel level, const std::string& msg) {
  if (static_cast<int>(g.log_level) >= static_cast<int>(level))
    std::fprintf(stderr, "[dwmark] %s\n", msg.c_str());
}
void log_info(const Global& g, const std::string& msg) { log_line(g, LogLevel::info, msg); }
void log_debug(const Global& g, const std::string& msg) { log_line(g, LogLevel::debug, msg); }

// Emit the final stdout payload: one JSON document under --json, otherwise
// the plain-text lines.
void emit(const Global& g, const json& machine, const std::vector<std::string>& human) {
  if (g.json_out) {
    std::cout << machine.dump(2) << "\n";
  } else {
    for (const auto& line : human) std::cout << line << "\n";
  }
}

std::string write_artifact(const Global& g, const std::string& name, std::string_view content) {
  fs::create_directories(g.output_dir);
  const auto path = (fs::path(g.output_dir) / name).string();
  dwmark::spew_file(path, content);
  log_info(g, "wrote " + path);
  return path;
}

std::string read_text_file_or_die(const std::string& path, const std::string& what) {
  if (!fs::exists(path))
    throw dwmark::invalid_argument("cannot read " + what + " '" + path + "': no such file");
  return dwmark::slurp_file(path);
}

dwmark::DatasetManifest read_manifest(const std::string& path, const std::string& what) {
  return dwmark::manifest_from_string(read_text_file_or_die(path, what));
}

// Scoring/generation backend: exactly one of --backend-url / --toy-model.
std::unique_ptr<dwmark::ModelBackend> open_backend(const Global& g) {
  if (!g.backend_url.empty() && !g.toy_model.empty())
    throw dwmark::invalid_argument("choose exactly one of --backend-url and --toy-model");
  if (g.backend_url.empty() && g.toy_model.empty())
    throw dwmark::invalid_argument(
        "a model backend is required: pass --toy-model <checkpoint> or --backend-url <url>");
  if (!g.backend_url.empty()) {
    log_debug(g, "backend: remote at " + g.backend_url);
    return std::make_unique<dwmark::RemoteBackend>(g.backend_url);
  }
  if (!fs::exists(g.toy_model))
    throw dwmark::invalid_argument("cannot read model checkpoint '" + g.toy_model +
                                   "': no such file");
  log_debug(g, "backend: local checkpoint " + g.toy_model);
  return std::make_unique<dwmark::NGramModel>(dwmark::NGramModel::load_file(g.toy_model));
}

// Sorted regular files directly under `dir` (deterministic order).
std::vector<fs::path> files_in_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

// Base documents for `rephrase`: a directory (one document per file) or a
// single file (one document per non-empty line).
std::vector<std::string> read_base_documents(const std::string& path) {
  std::vector<std::string> docs;
  if (fs::is_directory(path)) {
    for (const auto& file : files_in_dir(path)) docs.push_back(dwmark::slurp_file(file.string()));
  } else {
    const auto text = read_text_file_or_die(path, "input");
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      const auto line = text.substr(start, end == std::string::npos ? end : end - start);
      if (!line.empty()) docs.push_back(line);
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  if (docs.empty()) throw dwmark::invalid_argument("no base documents found in '" + path + "'");
  return docs;
}

// Document sets for `mia` / `audit`: a manifest JSON (public versions are
// taken), a {"documents": [{"doc_id","text"}...]} JSON, or a JSON array of
// strings.
std::vector<dwmark::Document> read_document_set(const std::string& path) {
  const auto text = read_text_file_or_die(path, "document set");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw dwmark::invalid_argument("document set '" + path + "' is not valid JSON: " + e.what());
  }
  std::vector<dwmark::Document> docs;
  try {
    if (j.is_object() && j.contains("entries")) {
      for (const auto& e : dwmark::manifest_from_json(j).entries) docs.push_back(e.public_version);
    } else if (j.is_object() && j.contains("documents")) {
      for (const auto& d : j.at("documents"))
        docs.push_back({d.at("doc_id").get<std::string>(), d.at("text").get<std::string>(), ""});
    } else if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "s%05zu", i);
        docs.push_back({id, j.at(i).get<std::string>(), ""});
      }
    } else {
      throw dwmark::invalid_argument(
          "document set '" + path +
          "': expected a manifest, a {\"documents\": [...]} object, or an array of strings");
    }
  } catch (const json::exception& e) {
    throw dwmark::invalid_argument("document set '" + path + "': " + e.what());
  }
  if (docs.empty()) throw dwmark::invalid_argument("document set '" + path + "' is empty");
  return docs;
}

std::string format_verdict(const dwmark::DetectionReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "p=%.6g (log10 p=%.4f), n=%zu, m=%d", r.test.p_one_sided,
                r.test.ln_p / std::log(10.0), r.test.n, r.m_private);
  return line;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct KeygenArgs {
  std::size_t count = 0;
};

int cmd_keygen(const Global& g, const KeygenArgs& a) {
  const auto keys = dwmark::keygen(a.count, g.seed);
  json file{{"format_version", dwmark::kManifestFormatVersion}, {"keys", json::array()}};
  json ids = json::array();
  for (const auto& k : keys) {
    file["keys"].push_back({{"id", k.id}, {"secret_hex", dwmark::key128_to_hex(k.secret)}});
    ids.push_back(k.id);
  }
  const auto path = write_artifact(g, "keys.json", file.dump(2) + "\n");
  emit(g, json{{"written", path}, {"count", keys.size()}, {"key_ids", ids}},
       {"wrote " + std::to_string(keys.size()) + " keys to " + path});
  return 0;
}

struct RephraseArgs {
  std::string input;          // file or directory of base documents
  std::size_t synthetic = 0;  // or: generate this many synthetic base docs
  int m = 3;
  std::size_t doc_length = 200;
  std::size_t prompt_bytes = 16;
  double gamma = 0.5, delta = 2.0, temperature = 1.0;
  int context_width = 1;
  std::string name = "rephrase-set";
};

int cmd_rephrase(const Global& g, const RephraseArgs& a) {
  if (a.input.empty() == (a.synthetic == 0))
    throw dwmark::invalid_argument("pass exactly one of --input and --synthetic");
  std::vector<std::string> base_docs;
  if (!a.input.empty()) {
    base_docs = read_base_documents(a.input);
  } else {
    const dwmark::MarkovSource source(g.seed);
    for (std::size_t i = 0; i < a.synthetic; ++i)
      base_docs.push_back(source.generate(a.prompt_bytes, i));
  }
  log_info(g, "rephrasing " + std::to_string(base_docs.size()) + " base documents, m=" +
                  std::to_string(a.m));

  const auto backend = open_backend(g);
  const dwmark::WatermarkParams params{a.gamma, a.delta, a.context_width};
  const dwmark::SamplerConfig sampler{dwmark::SamplerKind::temperature, a.temperature, 0};
  const auto result =
      dwmark::synthesize_rephrase_manifest(*backend, base_docs, a.m + 1, params, sampler,
                                           a.doc_length, g.seed, a.name, g.threads);
  for (const auto& w : result.warnings) log_info(g, "skipped " + w);

  const auto split = dwmark::split_manifest(result.manifest);
  const auto vault_path = write_artifact(g, "private_vault.json", split.private_vault);
  const auto release_path = write_artifact(g, "public_release.json", split.public_release);
  emit(g,
       json{{"private_vault", vault_path},
            {"public_release", release_path},
            {"documents", result.manifest.entries.size()},
            {"m", a.m},
            {"warnings", result.warnings}},
       {"synthesized " + std::to_string(result.manifest.entries.size()) + " documents (m=" +
            std::to_string(a.m) + ")",
        "private vault:  " + vault_path, "public release: " + release_path});
  return 0;
}

struct SplitArgs {
  std::string vault;
};

int cmd_split(const Global& g, const SplitArgs& a) {
  const auto manifest = read_manifest(a.vault, "private vault");
  const auto violations = dwmark::validate_manifest(manifest);
  if (!violations.empty()) {
    std::string msg = "manifest '" + a.vault + "' is invalid:";
    for (const auto& v : violations) msg += "\n  " + v.code + ": " + v.detail;
    throw dwmark::invalid_argument(msg);
  }
  const auto split = dwmark::split_manifest(manifest);
  if (split.public_release.find("secret_hex") != std::string::npos)
    throw dwmark::error("internal: public release would contain key material; aborting");
  const auto path = write_artifact(g, "public_release.json", split.public_release);
  emit(g,
       json{{"public_release", path},
            {"documents", manifest.entries.size()},
            {"m", manifest.m_private()}},
       {"public release for " + std::to_string(manifest.entries.size()) + " documents: " + path});
  return 0;
}

struct DetectArgs {
  std::string vault;
  int m = 0;  // 0 = use every private version in the vault
  double clip_fraction = 0.05;
  std::string clip_rule = "abs_winsorize";
  std::string variant = "paired";
};

int cmd_detect(const Global& g, const DetectArgs& a) {
  if (!fs::exists(a.vault))
    throw dwmark::invalid_argument("cannot read private vault '" + a.vault +
                                   "': no such file (detection needs the vault, not the "
                                   "public release)");
  const auto manifest = read_manifest(a.vault, "private vault");
  if (manifest.m_private() == 0)
    throw dwmark::invalid_argument(
        "private versions required: '" + a.vault +
        "' holds only public versions (a public release file); detection needs the private vault");

  dwmark::DetectorConfig cfg;
  cfg.m_private = a.m > 0 ? a.m : static_cast<int>(manifest.m_private());
  cfg.clip_fraction = a.clip_fraction;
  cfg.clip_rule = dwmark::clip_rule_from_string(a.clip_rule);
  if (a.variant == "paired") {
    cfg.variant = dwmark::DetectorConfig::Variant::paired;
  } else if (a.variant == "unpaired") {
    cfg.variant = dwmark::DetectorConfig::Variant::unpaired;
  } else {
    throw dwmark::invalid_argument("unknown --variant '" + a.variant +
                                   "' (expected paired or unpaired)");
  }

  const auto backend = open_backend(g);
  const auto report = dwmark::stamp_test(*backend, manifest, cfg, g.threads);
  for (const auto& s : report.skipped) log_info(g, "skipped " + s);

  auto j = dwmark::detection_report_to_json(report);
  const auto path = write_artifact(g, "detection_report.json", j.dump(2) + "\n");
  j["report_path"] = path;
  j["verdict"] = format_verdict(report);

  // The one-line verdict always appears: on stdout in plain mode, on the log
  // stream under --json (stdout must stay a single JSON document).
  if (g.json_out) log_info(g, format_verdict(report));
  emit(g, j, {format_verdict(report)});
  return 0;
}

struct MiaArgs {
  std::string members, nonmembers;
  std::string methods = "ppl,zlib,mink,minkpp,dcpdd-simplified";
  double k_pct = 20.0;
};

int cmd_mia(const Global& g, const MiaArgs& a) {
  const auto members = read_document_set(a.members);
  const auto nonmembers = read_document_set(a.nonmembers);
  std::vector<dwmark::MiaMethod> methods;
  std::size_t start = 0;
  while (start <= a.methods.size()) {
    const auto end = a.methods.find(',', start);
    const auto name = a.methods.substr(start, end == std::string::npos ? end : end - start);
    if (!name.empty()) methods.push_back(dwmark::mia_method_from_string(name));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (methods.empty()) throw dwmark::invalid_argument("--methods named no methods");

  dwmark::MiaParams params;
  params.k_pct = a.k_pct;
  std::vector<std::string> texts;
  for (const auto& d : members) texts.push_back(d.text);
  for (const auto& d : nonmembers) texts.push_back(d.text);
  params.freqs = dwmark::FrequencyTable::from_corpus(texts);

  const auto backend = open_backend(g);
  const auto table = dwmark::evaluate_mias(*backend, members, nonmembers, methods, params,
                                           g.threads);
  json j{{"auroc", table}, {"members", members.size()}, {"nonmembers", nonmembers.size()},
         {"k_pct", a.k_pct}};
  const auto path = write_artifact(g, "mia_table.json", j.dump(2) + "\n");
  j["report_path"] = path;
  std::vector<std::string> lines;
  for (const auto& [method, auroc] : table) {
    char line[96];
    std::snprintf(line, sizeof line, "%-18s auroc=%.4f", method.c_str(), auroc);
    lines.push_back(line);
  }
  emit(g, j, lines);
  return 0;
}

struct AuditArgs {
  std::string set_a, set_b;
  int folds = 5;
  int iterations = 400;
  double l2 = 1e-2;
};

int cmd_audit(const Global& g, const AuditArgs& a) {
  std::vector<std::string> texts_a, texts_b;
  for (const auto& d : read_document_set(a.set_a)) texts_a.push_back(d.text);
  for (const auto& d : read_document_set(a.set_b)) texts_b.push_back(d.text);

  dwmark::AuditConfig cfg;
  cfg.folds = a.folds;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.logreg.iterations = a.iterations;
  cfg.logreg.l2 = a.l2;
  const auto result = dwmark::distinguishability_auroc(texts_a, texts_b, cfg);

  auto j = dwmark::audit_result_to_json(result);
  j["set_a_documents"] = texts_a.size();
  j["set_b_documents"] = texts_b.size();
  const auto path = write_artifact(g, "audit.json", j.dump(2) + "\n");
  j["report_path"] = path;
  char line[96];
  std::snprintf(line, sizeof line, "distinguishability auroc=%.4f over %d folds",
                result.auroc_mean, a.folds);
  emit(g, j, {line});
  return 0;
}

struct SimulateArgs {
  std::string config_path;
  std::string background_dir;
  bool dump_config = false;
  bool sweep = false;
  bool seed_given = false;
  bool threads_given = false;
};

int cmd_simulate(const Global& g, const SimulateArgs& a) {
  if (a.dump_config) {
    std::cout << dwmark::experiment_config_to_json(dwmark::ExperimentConfig{}).dump(2) << "\n";
    return 0;
  }
  dwmark::ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_text_file_or_die(a.config_path, "config"));
    } catch (const json::exception& e) {
      throw dwmark::invalid_argument("config '" + a.config_path + "' is not valid JSON: " +
                                     e.what() + " (see `dwmark simulate --dump-config`)");
    }
    cfg = dwmark::experiment_config_from_json(j);
  }
  if (a.seed_given) cfg.seed = g.seed;
  if (a.threads_given) cfg.threads = g.threads;
  dwmark::validate_experiment_config(cfg);

  std::optional<std::vector<std::string>> background;
  if (!a.background_dir.empty()) {
    if (!fs::is_directory(a.background_dir))
      throw dwmark::invalid_argument("--background-dir '" + a.background_dir +
                                     "' is not a directory");
    background.emplace();
    for (const auto& file : files_in_dir(a.background_dir))
      background->push_back(dwmark::slurp_file(file.string()));
    if (background->empty())
      throw dwmark::invalid_argument("--background-dir '" + a.background_dir +
                                     "' holds no files");
    log_info(g, "background: " + std::to_string(background->size()) + " user documents");
  }

  if (a.sweep) {
    if (background)
      throw dwmark::invalid_argument(
          "--background-dir cannot be combined with --sweep (the corpus-size axis would be "
          "meaningless with a fixed corpus)");
    if (cfg.ablation.empty())
      throw dwmark::invalid_argument(
          "config declares no ablation axes; add an \"ablation\" section (see --dump-config)");
    log_info(g, "running ablation sweep");
    const auto rows = dwmark::run_ablation(cfg);
    const auto summary = dwmark::summarize_sweep(rows);
    const auto rows_path = write_artifact(g, "sweep_rows.csv", dwmark::sweep_to_csv(rows));
    const auto summary_path =
        write_artifact(g, "sweep_summary.csv", dwmark::sweep_summary_to_csv(summary));
    json jsum = json::array();
    for (const auto& s : summary)
      jsum.push_back({{"axis", s.axis},
                      {"value", s.value},
                      {"runs", s.runs},
                      {"median_log10_p", s.median_log10_p},
                      {"mean_log10_p", s.mean_log10_p},
                      {"mean_p", s.mean_p}});
    json j{{"config", dwmark::experiment_config_to_json(cfg)},
           {"rows_csv", rows_path},
           {"summary_csv", summary_path},
           {"summary", jsum}};
    const auto report_path = write_artifact(g, "sweep_report.json", j.dump(2) + "\n");
    j["report_path"] = report_path;
    std::vector<std::string> lines;
    for (const auto& s : summary) {
      char line[128];
      std::snprintf(line, sizeof line, "%s=%-10g median log10 p = %.3f  (runs=%zu)",
                    s.axis.c_str(), s.value, s.median_log10_p, s.runs);
      lines.push_back(line);
    }
    lines.push_back("rows:    " + rows_path);
    lines.push_back("summary: " + summary_path);
    emit(g, j, lines);
    return 0;
  }

  log_info(g, "running experiment (seed=" + std::to_string(cfg.seed) + ")");
  const auto report = dwmark::run_experiment(cfg, background ? &*background : nullptr);
  // report.json is byte-identical across runs of the same config+seed, so
  // wall-clock timing lives in its own artifact.
  auto j = dwmark::experiment_report_to_json(report, /*include_timing=*/false);
  const auto path = write_artifact(g, "report.json", j.dump(2) + "\n");
  write_artifact(g, "timing.json", json(report.timing_ms).dump(2) + "\n");
  j["report_path"] = path;

  std::vector<std::string> lines;
  lines.push_back("detection (contaminated model): " + format_verdict(report.detection));
  if (report.clean_control)
    lines.push_back("clean control:                  " + format_verdict(*report.clean_control));
  for (std::size_t i = 0; i < report.fpr_pvalues.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "held-out same-key set %zu:        p=%.6g", i,
                  report.fpr_pvalues[i]);
    lines.push_back(line);
  }
  for (const auto& [method, auroc] : report.mia_table) {
    char line[96];
    std::snprintf(line, sizeof line, "mia %-18s auroc=%.4f", method.c_str(), auroc);
    lines.push_back(line);
  }
  if (report.audit) {
    char line[96];
    std::snprintf(line, sizeof line, "audit distinguishability auroc=%.4f",
                  report.audit->auroc_mean);
    lines.push_back(line);
  }
  {
    char line[128];
    std::snprintf(line, sizeof line,
                  "corpus: %zu bytes, %zu inserted documents (%.4f%% contaminated)",
                  report.corpus_bytes, report.inserted_documents,
                  100.0 * report.contamination_fraction);
    lines.push_back(line);
  }
  lines.push_back("report: " + path);
  emit(g, j, lines);
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const Global& g, const ServeArgs& a) {
  if (!g.backend_url.empty())
    throw dwmark::invalid_argument("serve hosts a local model; pass --toy-model, not "
                                   "--backend-url");
  const auto backend = open_backend(g);
  if (g.json_out)
    std::cout << json{{"serving", g.toy_model}, {"host", a.host}, {"port", a.port}}.dump(2)
              << "\n";
  log_info(g, "serving " + g.toy_model + " on http://" + a.host + ":" +
                  std::to_string(a.port) + " (ctrl-c to stop)");
  dwmark::BackendServer server(*backend);
  if (!server.serve_blocking(a.host, a.port))
    throw dwmark::error("could not listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

struct TrainArgs {
  std::string input;
  std::size_t synthetic_bytes = 0;
  std::size_t synthetic_doc_bytes = 2048;
  int order = 5;
  double alpha = 0.1;
  std::string model_name = "model.dwn";
};

int cmd_train(const Global& g, const TrainArgs& a) {
  if (a.input.empty() == (a.synthetic_bytes == 0))
    throw dwmark::invalid_argument("pass exactly one of --input and --synthetic-bytes");
  std::vector<std::string> docs;
  if (!a.input.empty()) {
    if (fs::is_directory(a.input)) {
      for (const auto& file : files_in_dir(a.input)) docs.push_back(dwmark::slurp_file(file.string()));
    } else {
      docs.push_back(read_text_file_or_die(a.input, "training text"));
    }
  } else {
    const dwmark::MarkovSource source(g.seed);
    const auto count = std::max<std::size_t>(1, a.synthetic_bytes / a.synthetic_doc_bytes);
    for (const auto& d : source.documents(count, a.synthetic_doc_bytes, "bg", 0))
      docs.push_back(d.text);
  }
  if (docs.empty()) throw dwmark::invalid_argument("no training documents found");

  dwmark::NGramModel model(a.order, a.alpha);
  std::size_t bytes = 0;
  for (const auto& d : docs) {
    model.train_document(d);
    bytes += d.size();
  }
  fs::create_directories(g.output_dir);
  const auto path = (fs::path(g.output_dir) / a.model_name).string();
  model.save_file(path);
  log_info(g, "wrote " + path);
  emit(g,
       json{{"model", path}, {"documents", docs.size()}, {"bytes", bytes},
            {"order", a.order}, {"alpha", a.alpha}},
       {"trained order-" + std::to_string(a.order) + " model on " + std::to_string(docs.size()) +
        " documents (" + std::to_string(bytes) + " bytes): " + path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Global g;
  CLI::App app{"watermarked-rephrase dataset membership toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  app.add_option("--seed", g.seed, "master seed; all randomness derives from it");
  app.add_option("--backend-url", g.backend_url, "remote model backend base URL");
  app.add_option("--toy-model", g.toy_model, "local model checkpoint path");
  app.add_option("--output-dir", g.output_dir, "directory for artifacts (default .)");
  app.add_option("--threads", g.threads, "worker threads for scoring and sweeps")
      ->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json_out, "stdout becomes a single JSON document");
  app.add_option("--log-level", [&g](const std::vector<std::string>& v) {
       if (v.back() == "quiet") g.log_level = LogLevel::quiet;
       else if (v.back() == "info") g.log_level = LogLevel::info;
       else if (v.back() == "debug") g.log_level = LogLevel::debug;
       else return false;
       return true;
     }, "quiet | info | debug (default info)");

  KeygenArgs keygen_args;
  auto* keygen = app.add_subcommand("keygen", "generate fresh watermark keys -> keys.json");
  keygen->add_option("--count", keygen_args.count, "number of keys")
      ->required()
      ->check(CLI::PositiveNumber);

  RephraseArgs rephrase_args;
  auto* rephrase = app.add_subcommand(
      "rephrase", "synthesize a watermarked rephrase set -> private_vault.json + "
                  "public_release.json");
  rephrase->add_option("--input", rephrase_args.input,
                       "base documents: a directory (one per file) or a file (one per line)");
  rephrase->add_option("--synthetic", rephrase_args.synthetic,
                       "generate this many synthetic base documents instead of --input");
  rephrase->add_option("--m", rephrase_args.m, "private versions per document (default 3)")
      ->check(CLI::PositiveNumber);
  rephrase->add_option("--doc-length", rephrase_args.doc_length,
                       "bytes per generated version (default 200)");
  rephrase->add_option("--prompt-bytes", rephrase_args.prompt_bytes,
                       "prompt length for --synthetic (default 16)");
  rephrase->add_option("--gamma", rephrase_args.gamma, "green-list fraction (default 0.5)");
  rephrase->add_option("--delta", rephrase_args.delta, "green-logit boost (default 2)");
  rephrase->add_option("--context-width", rephrase_args.context_width,
                       "hash context width (default 1)");
  rephrase->add_option("--temperature", rephrase_args.temperature,
                       "sampling temperature (default 1)");
  rephrase->add_option("--name", rephrase_args.name, "dataset name in the manifest");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split",
                                   "derive the keyless public release from a private vault");
  split->add_option("--vault", split_args.vault, "private vault JSON")->required();

  DetectArgs detect_args;
  auto* detect = app.add_subcommand(
      "detect", "paired membership test of a released set against a model");
  detect->add_option("--vault", detect_args.vault, "private vault JSON (public + private text)")
      ->required();
  detect->add_option("--m", detect_args.m,
                     "private versions to average (default: all in the vault)");
  detect->add_option("--clip-fraction", detect_args.clip_fraction,
                     "winsorized tail fraction (default 0.05)");
  detect->add_option("--clip-rule", detect_args.clip_rule,
                     "abs_winsorize | signed_upper_winsorize");
  detect->add_option("--variant", detect_args.variant, "paired | unpaired");

  MiaArgs mia_args;
  auto* mia = app.add_subcommand("mia", "membership-inference baseline AUROC table");
  mia->add_option("--members", mia_args.members, "member document set (JSON)")->required();
  mia->add_option("--nonmembers", mia_args.nonmembers, "non-member document set (JSON)")
      ->required();
  mia->add_option("--methods", mia_args.methods, "comma list (default: all five)");
  mia->add_option("--k-pct", mia_args.k_pct, "bottom-k percentage for min-k methods");

  AuditArgs audit_args;
  auto* audit = app.add_subcommand(
      "audit", "bag-of-words distinguishability of two document sets (cross-validated AUROC)");
  audit->add_option("--set-a", audit_args.set_a, "first document set (JSON)")->required();
  audit->add_option("--set-b", audit_args.set_b, "second document set (JSON)")->required();
  audit->add_option("--folds", audit_args.folds, "cross-validation folds (default 5)");
  audit->add_option("--iterations", audit_args.iterations,
                    "logistic-regression iterations (default 400)");
  audit->add_option("--l2", audit_args.l2, "L2 regularization strength (default 0.01)");

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand(
      "simulate", "end-to-end contamination experiment (or --sweep for ablations)");
  simulate->add_option("--config", simulate_args.config_path,
                       "experiment config JSON (default: built-in defaults)");
  simulate->add_flag("--dump-config", simulate_args.dump_config,
                     "print the default config JSON and exit");
  simulate->add_flag("--sweep", simulate_args.sweep, "run the config's ablation axes");
  simulate->add_option("--background-dir", simulate_args.background_dir,
                       "plain-text directory replacing the built-in background corpus");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "host --toy-model over the HTTP wire protocol");
  serve->add_option("--host", serve_args.host, "bind address (default 127.0.0.1)");
  serve->add_option("--port", serve_args.port, "port (default 8080)")->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a byte n-gram model -> model.dwn");
  train->add_option("--input", train_args.input,
                    "training text: a directory (one document per file) or a single file");
  train->add_option("--synthetic-bytes", train_args.synthetic_bytes,
                    "train on this many bytes of the built-in synthetic source instead");
  train->add_option("--synthetic-doc-bytes", train_args.synthetic_doc_bytes,
                    "synthetic document size (default 2048)");
  train->add_option("--order", train_args.order, "n-gram order (default 5)");
  train->add_option("--alpha", train_args.alpha, "additive smoothing (default 0.1)");
  train->add_option("--model-name", train_args.model_name, "output file name (default model.dwn)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  simulate_args.seed_given = app.count("--seed") > 0;
  simulate_args.threads_given = app.count("--threads") > 0;

  try {
    if (*keygen) return cmd_keygen(g, keygen_args);
    if (*rephrase) return cmd_rephrase(g, rephrase_args);
    if (*split) return cmd_split(g, split_args);
    if (*detect) return cmd_detect(g, detect_args);
    if (*mia) return cmd_mia(g, mia_args);
    if (*audit) return cmd_audit(g, audit_args);
    if (*simulate) return cmd_simulate(g, simulate_args);
    if (*serve) return cmd_serve(g, serve_args);
    if (*train) return cmd_train(g, train_args);
    std::fprintf(stderr, "dwmark: no subcommand selected\n");
    return 2;
  } catch (const dwmark::invalid_argument& e) {
    std::fprintf(stderr, "dwmark: %s\n", e.what());
    return 2;
  } catch (const dwmark::manifest_error& e) {
    std::fprintf(stderr, "dwmark: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dwmark: %s\n", e.what());
    return 1;
  }
}
