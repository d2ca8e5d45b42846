// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

using nlohmann::json;

std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Shortest of up to six decimals, keeping at least one: 0 -> "0.0", 0.25 -> "0.25".
std::string format_alpha(double v) {
  std::string s = format_fixed(v, 6);
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

std::string format_optional(const std::optional<double>& v, int precision) {
  return v ? format_fixed(*v, precision) : std::string();
}

// Quotes a CSV field when it contains separators.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return {};
  if (!obj[key].is_array()) throw InvalidInput(where + ": field '" + key + "' must be a list of strings");
  std::vector<std::string> out;
  for (const json& v : obj[key]) {
    if (!v.is_string()) throw InvalidInput(where + ": field '" + key + "' must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string required_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InvalidInput(where + ": missing field '" + key + "'");
  if (obj[key].is_number_integer() && std::string_view(key) == "id") return std::to_string(obj[key].get<long long>());
  if (!obj[key].is_string()) throw InvalidInput(where + ": field '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t parallel, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallel, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

std::vector<std::string> answers_of(const EvalRecord& r) {
  std::vector<std::string> out{r.parametric_answer, r.contextual_answer};
  out.insert(out.end(), r.parametric_aliases.begin(), r.parametric_aliases.end());
  out.insert(out.end(), r.contextual_aliases.begin(), r.contextual_aliases.end());
  return out;
}

CaptureResult capture_with_lexicon(const GenerationTrace& trace, const EvalRecord& record, const TokenLexicon& lexicon) {
  std::vector<std::vector<Candidate>> steps;
  for (const DecodeStep& s : trace.steps) steps.push_back(s.stored_distribution);
  return capture_knowledge_tokens(steps, record.contextual_answer, record.parametric_answer,
                                  [&lexicon](TokenId id) { return lexicon.normalized(id); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

std::vector<EvalRecord> parse_dataset(std::istream& in, const std::string& source_name) {
  std::vector<EvalRecord> records;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(lineno);
    const json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) throw InvalidInput(where + ": malformed JSON");
    if (!obj.is_object()) throw InvalidInput(where + ": record must be a JSON object");

    EvalRecord r;
    r.id = required_string(obj, "id", where);
    r.query = required_string(obj, "query", where);
    r.context = required_string(obj, "context", where);
    r.parametric_answer = required_string(obj, "parametric_answer", where);
    r.contextual_answer = required_string(obj, "contextual_answer", where);
    r.parametric_aliases = string_list(obj, "parametric_aliases", where);
    r.contextual_aliases = string_list(obj, "contextual_aliases", where);
    if (obj.contains("support_context")) r.support_context = required_string(obj, "support_context", where);

    if (!seen.insert(r.id).second) throw InvalidInput(where + ": duplicate id '" + r.id + "'");
    if (normalize(r.parametric_answer).empty()) throw InvalidInput(where + ": parametric_answer is empty");
    if (normalize(r.contextual_answer).empty()) throw InvalidInput(where + ": contextual_answer is empty");
    if (!r.context.empty() && !answer_match(r.context, r.contextual_answer, r.contextual_aliases)) {
      throw InvalidInput(where + ": contextual_answer does not occur in context");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EvalRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset " + path.string());
  return parse_dataset(in, path.string());
}

json record_to_json(const EvalRecord& r) {
  json j{{"id", r.id},
         {"query", r.query},
         {"context", r.context},
         {"parametric_answer", r.parametric_answer},
         {"contextual_answer", r.contextual_answer}};
  if (!r.parametric_aliases.empty()) j["parametric_aliases"] = r.parametric_aliases;
  if (!r.contextual_aliases.empty()) j["contextual_aliases"] = r.contextual_aliases;
  if (!r.support_context.empty()) j["support_context"] = r.support_context;
  return j;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

std::optional<double> memorization_ratio(double par_r, double con_r) {
  if (par_r < 0.0 || con_r < 0.0) throw InvalidArgument("memorization_ratio: negative recall");
  if (par_r + con_r == 0.0) return std::nullopt;
  return 100.0 * par_r / (par_r + con_r);
}

MetricsTable aggregate_metrics(std::span<const EvalOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidArgument("aggregate_metrics: no outcomes");
  std::size_t con = 0, par = 0, hits = 0;
  double per_example = 0.0;
  for (const EvalOutcome& o : outcomes) {
    con += o.con_match;
    par += o.par_match;
    if (o.con_match || o.par_match) {
      ++hits;
      per_example += (o.par_match ? 1.0 : 0.0) / ((o.par_match ? 1.0 : 0.0) + (o.con_match ? 1.0 : 0.0));
    }
  }
  const double n = static_cast<double>(outcomes.size());
  MetricsTable m;
  m.n = outcomes.size();
  m.con_r = 100.0 * static_cast<double>(con) / n;
  m.par_r = 100.0 * static_cast<double>(par) / n;
  m.mr = memorization_ratio(m.par_r, m.con_r);
  m.hit_rate = 100.0 * static_cast<double>(hits) / n;
  if (hits > 0) m.mr_per_example = 100.0 * per_example / static_cast<double>(hits);
  return m;
}

double hit_rate(std::span<const EvalOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidArgument("hit_rate: no outcomes");
  const auto hits = std::count_if(outcomes.begin(), outcomes.end(), [](const EvalOutcome& o) { return o.hit; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

EvalOutcome score_outcome(const EvalRecord& record, const GenerationTrace& trace) {
  EvalOutcome o;
  o.id = record.id;
  o.output_text = trace.final_text;
  o.con_match = answer_match(trace.final_text, record.contextual_answer, record.contextual_aliases);
  o.par_match = answer_match(trace.final_text, record.parametric_answer, record.parametric_aliases);
  o.hit = o.con_match || o.par_match;
  o.cg.steps = trace.steps.size();
  if (!trace.steps.empty()) {
    double sum = 0.0;
    o.cg.min_cg = trace.steps.front().cg.cg;
    for (const DecodeStep& s : trace.steps) {
      sum += s.cg.cg;
      o.cg.min_cg = std::min(o.cg.min_cg, s.cg.cg);
      o.cg.fired += s.fired;
    }
    o.cg.mean_cg = sum / static_cast<double>(trace.steps.size());
  }
  return o;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

std::uint64_t record_seed(std::uint64_t seed, std::string_view record_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : record_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SessionSpec session_for(const EvalRecord& record, const std::string& context, const EvalOptions& options,
                        const TokenLexicon* lexicon) {
  SessionSpec spec;
  spec.context = context;
  spec.query = record.query;
  spec.template_id = options.template_id;
  spec.config = options.config;
  spec.max_new_tokens = options.max_new_tokens;
  spec.decode = options.decode;
  spec.decode.seed = record_seed(options.decode.seed, record.id);
  spec.capture = options.capture;
  if (options.capture && lexicon != nullptr) spec.capture_keep_ids = lexicon->ids_within(answers_of(record));
  return spec;
}

EvalRun evaluate(std::span<const EvalRecord> records, const Backend& backend, const EvalOptions& options) {
  options.config.validate();
  std::optional<TokenLexicon> lexicon;
  if (options.capture) lexicon.emplace(backend);

  std::vector<std::optional<EvalOutcome>> outcomes(records.size());
  std::vector<std::optional<std::string>> errors(records.size());
  parallel_for(records.size(), options.parallel, [&](std::size_t i) {
    const EvalRecord& r = records[i];
    try {
      Session session(backend, session_for(r, r.context, options, lexicon ? &*lexicon : nullptr));
      const GenerationTrace trace = session.generate();
      EvalOutcome o = score_outcome(r, trace);
      if (lexicon) {
        const CaptureResult cap = capture_with_lexicon(trace, r, *lexicon);
        o.captured_p_cont = cap.p_cont;
        o.captured_p_para = cap.p_para;
      }
      outcomes[i] = std::move(o);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  EvalRun run;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcomes[i]) run.outcomes.push_back(std::move(*outcomes[i]));
    if (errors[i]) run.failures.push_back({records[i].id, *errors[i]});
  }
  return run;
}

std::string_view to_string(ContextVariant variant) {
  switch (variant) {
    case ContextVariant::kSupport:
      return "support";
    case ContextVariant::kConflict:
      return "conflict";
    case ContextVariant::kNone:
      return "none";
  }
  return "none";
}

std::vector<EntropyShiftRow> entropy_shift_report(std::span<const EvalRecord> records, const Backend& backend,
                                                  const EvalOptions& options, ContextVariant variant) {
  EvalOptions run_options = options;
  run_options.config = ModulationConfig::baseline();
  run_options.capture = true;
  const TokenLexicon lexicon(backend);

  std::vector<EntropyShiftRow> rows(records.size());
  parallel_for(records.size(), options.parallel, [&](std::size_t i) {
    const EvalRecord& r = records[i];
    EntropyShiftRow& row = rows[i];
    row.id = r.id;
    row.variant = variant;
    const std::string& context = variant == ContextVariant::kSupport    ? r.support_context
                                 : variant == ContextVariant::kConflict ? r.context
                                                                        : std::string();
    if (variant != ContextVariant::kNone && context.empty()) {
      row.note = "record has no " + std::string(to_string(variant)) + " context";
      return;
    }
    try {
      Session session(backend, session_for(r, context, run_options, &lexicon));
      const GenerationTrace trace = session.generate();
      const CaptureResult cap = capture_with_lexicon(trace, r, lexicon);
      if (!cap.position) {
        row.note = "no capturable answer step";
        return;
      }
      const DecodeStep& step = trace.steps[*cap.position];
      row.position = cap.position;
      row.h_before = step.cg.h_para;
      row.h_after = step.cg.h_cont;
      if (row.h_before == 0.0) {
        if (row.h_after != 0.0) {
          row.note = "zero entropy without context";
          return;
        }
        row.shift_pct = 0.0;
      } else {
        row.shift_pct = 100.0 * (row.h_after - row.h_before) / row.h_before;
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.note = e.what();
    }
  });
  return rows;
}

std::optional<double> mean_shift(std::span<const EntropyShiftRow> rows) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const EntropyShiftRow& r : rows) {
    if (!r.ok) continue;
    sum += r.shift_pct;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<SweepRow> probability_sweep(std::span<const EvalRecord> records, const Backend& backend,
                                        std::span<const double> alphas, const EvalOptions& options) {
  if (alphas.empty()) throw InvalidArgument("probability_sweep: empty alpha grid");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("probability_sweep: alpha " + format_alpha(a) + " outside [0,1]");
  }
  const TokenLexicon lexicon(backend);
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    EvalOptions run_options = options;
    run_options.config.mode = AlphaMode::kFixed;
    run_options.config.alpha = alpha;
    run_options.config.enabled = true;
    run_options.capture = true;
    std::vector<SweepRow> part(records.size());
    std::vector<std::exception_ptr> errors(records.size());
    parallel_for(records.size(), options.parallel, [&](std::size_t i) {
      const EvalRecord& r = records[i];
      part[i].id = r.id;
      part[i].alpha = alpha;
      try {
        Session session(backend, session_for(r, r.context, run_options, &lexicon));
        const CaptureResult cap = capture_with_lexicon(session.generate(), r, lexicon);
        part[i].p_cont = cap.p_cont;
        part[i].p_para = cap.p_para;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<double> parse_alpha_grid(std::string_view text) {
  auto to_double = [&text](std::string_view s) {
    const std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != str.size() || !std::isfinite(v)) {
      throw InvalidArgument("alpha grid '" + std::string(text) + "': bad number '" + str + "'");
    }
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
      throw InvalidArgument("alpha grid must be start:step:stop, got '" + std::string(text) + "'");
    }
    const double start = to_double(text.substr(0, c1));
    const double step = to_double(text.substr(c1 + 1, c2 - c1 - 1));
    const double stop = to_double(text.substr(c2 + 1));
    if (!(step > 0.0) || stop < start) throw InvalidArgument("alpha grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  } else {
    std::size_t i = 0;
    while (i <= text.size()) {
      const std::size_t j = std::min(text.find(',', i), text.size());
      out.push_back(to_double(text.substr(i, j - i)));
      i = j + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

std::string metrics_csv_header() { return "dataset,alpha,ConR,ParR,MR,HitRate,N,MR_example\n"; }

std::string metrics_csv_row(std::string_view dataset, const ModulationConfig& config, const MetricsTable& m) {
  const std::string alpha = !config.enabled                         ? "baseline"
                            : config.mode == AlphaMode::kAdaptive ? "adaptive"
                                                                  : format_alpha(config.alpha);
  std::ostringstream out;
  out << csv_field(dataset) << ',' << alpha << ',' << format_fixed(m.con_r, 2) << ',' << format_fixed(m.par_r, 2) << ','
      << format_optional(m.mr, 2) << ',' << format_fixed(m.hit_rate, 2) << ',' << m.n << ','
      << format_optional(m.mr_per_example, 2) << '\n';
  return out.str();
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "record_id,alpha,p_cont,p_para\n";
  for (const SweepRow& r : rows) {
    out += csv_field(r.id) + ',' + format_alpha(r.alpha) + ',' + format_optional(r.p_cont, 6) + ',' +
           format_optional(r.p_para, 6) + '\n';
  }
  return out;
}

std::string entropy_shift_csv(std::span<const EntropyShiftRow> rows) {
  std::string out = "record_id,variant,status,position,h_before,h_after,shift_pct\n";
  for (const EntropyShiftRow& r : rows) {
    out += csv_field(r.id) + ',' + std::string(to_string(r.variant)) + ',' + (r.ok ? std::string("ok") : csv_field(r.note)) +
           ',' + (r.position ? std::to_string(*r.position) : std::string()) + ',' +
           (r.ok ? format_fixed(r.h_before, 6) : std::string()) + ',' + (r.ok ? format_fixed(r.h_after, 6) : std::string()) +
           ',' + (r.ok ? format_fixed(r.shift_pct, 4) : std::string()) + '\n';
  }
  return out;
}

json outcome_to_json(const EvalOutcome& o) {
  json j{{"id", o.id},
         {"output_text", o.output_text},
         {"con_match", o.con_match},
         {"par_match", o.par_match},
         {"hit", o.hit},
         {"captured_p_cont", o.captured_p_cont ? json(*o.captured_p_cont) : json()},
         {"captured_p_para", o.captured_p_para ? json(*o.captured_p_para) : json()},
         {"cg", {{"steps", o.cg.steps}, {"fired", o.cg.fired}, {"mean", o.cg.mean_cg}, {"min", o.cg.min_cg}}}};
  return j;
}

}  // namespace ckplug
