// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ckplug/backend.hpp"
#include "ckplug/engine.hpp"
#include "ckplug/errors.hpp"
#include "ckplug/evalkit.hpp"
#include "ckplug/io.hpp"
#include "ckplug/server.hpp"

namespace ckplug {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kBackendEnv = "CKPLUG_BACKEND_URL";

struct RunFlags {
  std::string backend;
  double alpha = 0.5;
  bool adaptive = false;
  bool baseline = false;
  std::size_t head_k = kDefaultHeadK;
  double epsilon = 0.0;
  std::string template_id{kDefaultTemplate};
  std::size_t max_new_tokens = 64;
  std::string mode = "greedy";
  std::size_t sample_k = 100;
  std::uint64_t seed = 0;
  std::string dataset;
  std::string out;
  std::string trace;
  bool capture = false;
  std::size_t parallel = 1;

  CLI::Option* epsilon_opt = nullptr;
};

void add_model_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--backend", f.backend, "toy:<spec.json> or remote:<base-url> (fallback: $CKPLUG_BACKEND_URL)");
  auto* alpha = cmd.add_option("--alpha", f.alpha, "reliance knob: 1 = parametric, 0 = context")
                    ->check(CLI::Range(0.0, 1.0))
                    ->capture_default_str();
  auto* adaptive = cmd.add_flag("--adaptive", f.adaptive, "derive alpha from the two entropies at each step");
  auto* baseline = cmd.add_flag("--baseline", f.baseline, "disable modulation (plain RAG decoding)");
  adaptive->excludes(alpha);
  baseline->excludes(alpha)->excludes(adaptive);
  cmd.add_option("--head-k", f.head_k, "top-k per stream for the head set")->check(CLI::PositiveNumber)->capture_default_str();
  f.epsilon_opt = cmd.add_option("--epsilon", f.epsilon, "conflict threshold: fire when CG < epsilon*|H_cont|")
                      ->capture_default_str();
  cmd.add_option("--template", f.template_id, "prompt template")
      ->check(CLI::IsMember(template_ids()))
      ->capture_default_str();
  cmd.add_option("--max-new-tokens", f.max_new_tokens)->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--mode", f.mode, "token selection")->check(CLI::IsMember({"greedy", "sample"}))->capture_default_str();
  cmd.add_option("--sample-k", f.sample_k, "top-k for sampling mode")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--seed", f.seed)->capture_default_str();
}

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  add_model_flags(cmd, f);
  cmd.add_option("--dataset", f.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  cmd.add_option("--out", f.out, "output directory")->required();
  cmd.add_option("--parallel", f.parallel, "records evaluated concurrently")->check(CLI::PositiveNumber)->capture_default_str();
}

std::string backend_selector(const RunFlags& f) {
  if (!f.backend.empty()) return f.backend;
  if (const char* url = std::getenv(kBackendEnv); url != nullptr && *url != '\0') return std::string("remote:") + url;
  throw InvalidArgument("no backend: pass --backend or set " + std::string(kBackendEnv));
}

ModulationConfig modulation_of(const RunFlags& f) {
  ModulationConfig c = f.baseline   ? ModulationConfig::baseline()
                       : f.adaptive ? ModulationConfig::adaptive(f.head_k)
                                    : ModulationConfig::fixed(f.alpha, f.head_k);
  c.head_k = f.head_k;
  c.policy.epsilon = f.epsilon;
  c.validate();
  return c;
}

EvalOptions options_of(const RunFlags& f) {
  EvalOptions o;
  o.template_id = f.template_id;
  o.config = modulation_of(f);
  o.max_new_tokens = f.max_new_tokens;
  o.decode.mode = f.mode == "sample" ? DecodeMode::kTopKSample : DecodeMode::kGreedy;
  o.decode.sample_k = f.sample_k;
  o.decode.seed = f.seed;
  o.capture = f.capture;
  o.parallel = f.parallel;
  return o;
}

json snapshot(const std::string& command, const RunFlags& f, const std::string& selector) {
  return json{{"command", command},
              {"backend", selector},
              {"alpha_mode", f.baseline ? "baseline" : f.adaptive ? "adaptive" : "fixed"},
              {"alpha", f.alpha},
              {"head_k", f.head_k},
              {"epsilon", f.epsilon},
              {"template", f.template_id},
              {"max_new_tokens", f.max_new_tokens},
              {"mode", f.mode},
              {"sample_k", f.sample_k},
              {"seed", f.seed},
              {"dataset", f.dataset},
              {"capture", f.capture},
              {"parallel", f.parallel}};
}

void note_epsilon_preset(const Backend& backend, const RunFlags& f, std::ostream& err) {
  if (f.epsilon_opt->count() > 0) return;
  const std::string name = backend.meta().model_name;
  if (auto preset = epsilon_preset_for(name)) {
    err << "note: an epsilon preset of " << *preset << " exists for " << name << "; pass --epsilon to use it\n";
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const json& j : rows) s += j.dump() + '\n';
  return s;
}

void write_failures(const fs::path& dir, const std::vector<RecordFailure>& failures, std::ostream& err) {
  if (failures.empty()) return;
  std::vector<json> rows;
  for (const RecordFailure& f : failures) rows.push_back({{"id", f.id}, {"error", f.message}});
  write_file_atomic(dir / "errors.jsonl", jsonl(rows));
  err << failures.size() << " record(s) failed; see " << (dir / "errors.jsonl").string() << '\n';
}

int cmd_generate(const RunFlags& f, const std::string& query, const std::string& context, std::ostream& out,
                 std::ostream& err) {
  const auto backend = make_backend(backend_selector(f));
  note_epsilon_preset(*backend, f, err);
  const EvalOptions o = options_of(f);
  SessionSpec spec;
  spec.context = context;
  spec.query = query;
  spec.template_id = o.template_id;
  spec.config = o.config;
  spec.max_new_tokens = o.max_new_tokens;
  spec.decode = o.decode;
  Session session(*backend, spec);
  const GenerationTrace trace = session.generate();
  out << trace.final_text << '\n';
  if (!f.trace.empty()) write_file_atomic(f.trace, trace_to_json(trace).dump() + '\n');
  return kExitOk;
}

int cmd_eval(const RunFlags& f, std::ostream& out, std::ostream& err) {
  const std::string selector = backend_selector(f);
  const std::vector<EvalRecord> records = load_dataset(f.dataset);
  if (records.empty()) throw InvalidInput("dataset " + f.dataset + " has no records");
  const auto backend = make_backend(selector);
  note_epsilon_preset(*backend, f, err);
  const EvalOptions o = options_of(f);
  const EvalRun run = evaluate(records, *backend, o);
  const fs::path dir = prepare_out_dir(f.out);
  write_failures(dir, run.failures, err);
  if (run.outcomes.empty()) throw Error("every record failed");

  const MetricsTable m = aggregate_metrics(run.outcomes);
  std::vector<json> rows;
  for (const EvalOutcome& oc : run.outcomes) rows.push_back(outcome_to_json(oc));
  write_file_atomic(dir / "outcomes.jsonl", jsonl(rows));
  const std::string csv = metrics_csv_header() + metrics_csv_row(dataset_name(f.dataset), o.config, m);
  write_file_atomic(dir / "metrics.csv", csv);
  write_file_atomic(dir / "config.json", snapshot("eval", f, selector).dump(2) + '\n');
  out << csv;
  return kExitOk;
}

int cmd_sweep(const RunFlags& f, const std::string& grid_text, std::ostream& out, std::ostream& err) {
  const std::vector<double> grid = parse_alpha_grid(grid_text);
  for (double a : grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha grid value " + std::to_string(a) + " outside [0,1]");
  }
  const std::string selector = backend_selector(f);
  const std::vector<EvalRecord> records = load_dataset(f.dataset);
  if (records.empty()) throw InvalidInput("dataset " + f.dataset + " has no records");
  const auto backend = make_backend(selector);
  note_epsilon_preset(*backend, f, err);
  const fs::path dir = prepare_out_dir(f.out);

  std::string csv = metrics_csv_header();
  if (f.capture) csv.insert(csv.size() - 1, ",mean_p_cont,mean_p_para");
  std::vector<SweepRow> probabilities;
  std::vector<RecordFailure> failures;
  for (double alpha : grid) {
    EvalOptions o = options_of(f);
    o.config.mode = AlphaMode::kFixed;
    o.config.enabled = true;
    o.config.alpha = alpha;
    const EvalRun run = evaluate(records, *backend, o);
    for (const RecordFailure& rf : run.failures) failures.push_back({rf.id + "@alpha=" + std::to_string(alpha), rf.message});
    if (run.outcomes.empty()) throw Error("every record failed at alpha=" + std::to_string(alpha));
    std::string row = metrics_csv_row(dataset_name(f.dataset), o.config, aggregate_metrics(run.outcomes));
    if (f.capture) {
      double sum_c = 0.0, sum_p = 0.0;
      std::size_t n_c = 0, n_p = 0;
      for (const EvalOutcome& oc : run.outcomes) {
        probabilities.push_back({oc.id, alpha, oc.captured_p_cont, oc.captured_p_para});
        if (oc.captured_p_cont) sum_c += *oc.captured_p_cont, ++n_c;
        if (oc.captured_p_para) sum_p += *oc.captured_p_para, ++n_p;
      }
      auto mean = [](double s, std::size_t n) {
        if (n == 0) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", s / static_cast<double>(n));
        return std::string(buf);
      };
      row.insert(row.size() - 1, "," + mean(sum_c, n_c) + "," + mean(sum_p, n_p));
    }
    csv += row;
  }
  write_failures(dir, failures, err);
  write_file_atomic(dir / "sweep.csv", csv);
  if (f.capture) write_file_atomic(dir / "probabilities.csv", sweep_csv(probabilities));
  json snap = snapshot("sweep", f, selector);
  snap["alphas"] = grid;
  write_file_atomic(dir / "config.json", snap.dump(2) + '\n');
  out << csv;
  return kExitOk;
}

int cmd_entropy_shift(const RunFlags& f, std::ostream& out) {
  const std::string selector = backend_selector(f);
  const std::vector<EvalRecord> records = load_dataset(f.dataset);
  if (records.empty()) throw InvalidInput("dataset " + f.dataset + " has no records");
  const auto backend = make_backend(selector);
  const EvalOptions o = options_of(f);
  const fs::path dir = prepare_out_dir(f.out);

  std::vector<EntropyShiftRow> all;
  std::string summary = "variant,mean_shift_pct,N,flagged\n";
  for (ContextVariant v : {ContextVariant::kSupport, ContextVariant::kConflict}) {
    const std::vector<EntropyShiftRow> rows = entropy_shift_report(records, *backend, o, v);
    const std::optional<double> mean = mean_shift(rows);
    const auto ok = static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.ok; }));
    char buf[32] = "";
    if (mean) std::snprintf(buf, sizeof buf, "%.4f", *mean);
    summary += std::string(to_string(v)) + "," + buf + "," + std::to_string(ok) + "," + std::to_string(rows.size() - ok) + "\n";
    all.insert(all.end(), rows.begin(), rows.end());
  }
  write_file_atomic(dir / "entropy_shift.csv", entropy_shift_csv(all));
  write_file_atomic(dir / "entropy_shift_summary.csv", summary);
  write_file_atomic(dir / "config.json", snapshot("entropy-shift", f, selector).dump(2) + '\n');
  out << summary;
  return kExitOk;
}

int cmd_serve_toy(const std::string& spec_path, const std::string& host, int port, std::ostream& out) {
  const ToyBackend backend(load_toy_spec(spec_path));
  LogitsServer server(backend);
  if (port == 0) {
    port = server.bind_any_port(host);
    if (port < 0) throw Error("cannot bind " + host);
  } else if (!server.bind(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  out << "serving " << backend.meta().model_name << " on http://" << host << ":" << port << std::endl;
  return server.run() ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decoding-time control of parametric vs. contextual knowledge reliance", "ckplug"};
  app.set_config("--config", "", "TOML/INI file with default option values (flags take precedence)");
  app.require_subcommand(1);

  RunFlags f;
  std::string query, context, grid = "0.0:0.1:1.0";
  std::string spec_path, host = "127.0.0.1";
  int port = 8080;

  CLI::App* generate = app.add_subcommand("generate", "generate one answer");
  add_model_flags(*generate, f);
  generate->add_option("--query", query, "question text")->required();
  generate->add_option("--context", context, "retrieved passage (may be empty)");
  generate->add_option("--trace", f.trace, "write the generation trace (JSON line) here");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a dataset at one setting");
  add_run_flags(*eval, f);
  eval->add_flag("--capture", f.capture, "record knowledge-token probabilities");

  CLI::App* sweep = app.add_subcommand("sweep", "evaluate a dataset across an alpha grid");
  add_run_flags(*sweep, f);
  sweep->add_option("--alphas", grid, "start:step:stop or comma list")->capture_default_str();
  sweep->add_flag("--capture", f.capture, "also emit per-record captured probabilities");

  CLI::App* shift = app.add_subcommand("entropy-shift", "entropy change at the answer token, support vs. conflict");
  add_run_flags(*shift, f);

  CLI::App* serve = app.add_subcommand("serve-toy", "serve a toy model over the logits protocol");
  serve->add_option("--spec", spec_path, "toy model spec")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(f, query, context, out, err);
    if (eval->parsed()) return cmd_eval(f, out, err);
    if (sweep->parsed()) return cmd_sweep(f, grid, out, err);
    if (shift->parsed()) return cmd_entropy_shift(f, out);
    if (serve->parsed()) return cmd_serve_toy(spec_path, host, port, out);
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ckplug
