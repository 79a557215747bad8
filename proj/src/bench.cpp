// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include "spql/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "spql/error.hpp"

#ifndef SPQL_VERSION
#define SPQL_VERSION "0.0.0"
#endif

namespace spql {

using nlohmann::json;

std::vector<Prompt> parse_prompts(std::istream& in) {
  std::vector<Prompt> prompts;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "prompts line " + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw FormatError(where + "expected a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw FormatError(where + "missing string field 'id'");
    if (!j.contains("prompt") || !j["prompt"].is_string()) throw FormatError(where + "missing string field 'prompt'");
    Prompt p;
    p.id = j["id"].get<std::string>();
    p.text = j["prompt"].get<std::string>();
    if (j.contains("category")) {
      if (!j["category"].is_string()) throw FormatError(where + "'category' must be a string");
      p.category = j["category"].get<std::string>();
    }
    if (!seen.insert(p.id).second) throw FormatError(where + "duplicate prompt id '" + p.id + "'");
    prompts.push_back(std::move(p));
  }
  return prompts;
}

std::vector<Prompt> ingest_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prompts file '" + path.string() + "'");
  return parse_prompts(in);
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
std::vector<T> as_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

ModelSource parse_model_source(const json& j, const std::filesystem::path& base) {
  ModelSource src;
  if (j.contains("toy")) {
    const json& toy = j["toy"];
    const json cfg = toy.value("config", json::object());
    src.config = cfg.is_string() ? load_model_config(resolve(base, cfg.get<std::string>())) : model_config_from_json(cfg);
    src.seed = toy.value("seed", std::uint64_t{0});
  } else if (j.contains("checkpoint")) {
    src.toy = false;
    src.checkpoint = resolve(base, j["checkpoint"].get<std::string>());
  } else {
    throw ConfigError("model source needs a 'toy' or 'checkpoint' entry");
  }
  if (j.contains("precision")) src.precision = Precision::parse(j["precision"].get<std::string>());
  return src;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Combo {
  Strategy strategy;
  int d = 0, n = 0, k = 0, d1 = 0, n1 = 0;
};

std::vector<Combo> expand_grid(const BenchConfig& c) {
  std::vector<Combo> out;
  for (Strategy s : c.strategies) {
    switch (s) {
      case Strategy::AR:
        out.push_back({s});
        break;
      case Strategy::SP:
        for (int d : c.d) out.push_back({s, d});
        break;
      case Strategy::Eagle2:
        for (int d : c.d) {
          for (int n : c.n) {
            for (int k : c.k) {
              if (n >= d) out.push_back({s, d, n, k});
            }
          }
        }
        break;
      case Strategy::HierSpec:
        for (int d : c.d) {
          for (int d1 : c.d1) {
            for (int n1 : c.n1) {
              for (int k : c.k) {
                if (d >= d1 && n1 >= d1) out.push_back({s, d, 0, k, d1, n1});
              }
            }
          }
        }
        break;
    }
  }
  return out;
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.max_positions = j.value("max_positions", c.max_positions);
    if (j.contains("precision")) c.precision = Precision::parse(j["precision"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig load_model_config(const std::filesystem::path& path) { return model_config_from_json(read_json_file(path)); }

ModelWeights ModelSource::load(std::uint64_t run_seed) const {
  if (!toy) return load_checkpoint(checkpoint, precision);
  ModelConfig c = config;
  if (precision) c.precision = *precision;
  return build_toy_model(c, seed + run_seed);
}

namespace {

json model_config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"n_layers", c.n_layers}, {"d_model", c.d_model}, {"n_heads", c.n_heads},
          {"d_ff", c.d_ff}, {"max_positions", c.max_positions}, {"precision", c.precision.to_string()}};
}

json source_to_json(const ModelSource& s) {
  json j;
  if (s.toy) {
    j["toy"] = {{"config", model_config_to_json(s.config)}, {"seed", s.seed}};
  } else {
    j["checkpoint"] = std::filesystem::absolute(s.checkpoint).string();
  }
  if (s.precision) j["precision"] = s.precision->to_string();
  return j;
}

}  // namespace

json bench_config_to_json(const BenchConfig& c) {
  json j;
  j["target"] = source_to_json(c.target);
  if (c.intermediate) j["intermediate"] = source_to_json(*c.intermediate);
  if (c.drafter) {
    j["drafter"] = c.drafter->model ? source_to_json(*c.drafter->model)
                                    : json{{"ngram", std::filesystem::absolute(c.drafter->ngram).string()}};
  }
  j["strategies"] = json::array();
  for (Strategy s : c.strategies) j["strategies"].push_back(to_string(s));
  j["params"] = {{"d", c.d}, {"n", c.n}, {"k", c.k}, {"d1", c.d1}, {"n1", c.n1}};
  j["prompts"] = std::filesystem::absolute(c.prompts).string();
  j["max_tokens"] = c.max_tokens;
  j["seeds"] = c.seeds;
  if (c.cost) {
    json cj = {{"profiles", std::filesystem::absolute(c.cost->profiles).string()}, {"hardware", c.cost->hardware}};
    const std::pair<const char*, ModelRole> names[] = {
        {"target", ModelRole::Target}, {"intermediate", ModelRole::Intermediate}, {"drafter", ModelRole::Drafter}};
    for (const auto& [key, role] : names) {
      auto it = c.cost->models.find(role);
      if (it != c.cost->models.end()) cj[key] = {{"model", it->second.first}, {"scheme", it->second.second}};
    }
    j["cost"] = cj;
  }
  j["wall_clock"] = c.wall_clock;
  return j;
}

void BenchConfig::validate() const {
  if (strategies.empty()) throw ConfigError("bench config lists no strategies");
  for (Strategy s : strategies) {
    if (s != Strategy::AR && !drafter) throw ConfigError("strategy " + to_string(s) + " needs a drafter");
    if (s == Strategy::HierSpec && !intermediate) throw ConfigError("strategy hierspec needs an intermediate model");
  }
  if (d.empty() || n.empty() || k.empty() || d1.empty() || n1.empty()) throw ConfigError("parameter lists must not be empty");
  if (seeds.empty()) throw ConfigError("bench config lists no seeds");
  const std::vector<Combo> grid = expand_grid(*this);
  for (Strategy s : strategies) {
    if (std::none_of(grid.begin(), grid.end(), [&](const Combo& c) { return c.strategy == s; })) {
      throw ConfigError("strategy " + to_string(s) + " has no valid parameter combination (need n >= d for eagle2, " +
                        "d >= d1 and n1 >= d1 for hierspec)");
    }
  }
  if (prompts.empty()) throw ConfigError("bench config needs a prompts file");
}

BenchConfig parse_bench_config(const json& doc, const std::filesystem::path& base) {
  BenchConfig c;
  try {
    c.target = parse_model_source(doc.at("target"), base);
    if (doc.contains("intermediate")) c.intermediate = parse_model_source(doc["intermediate"], base);
    if (doc.contains("drafter")) {
      const json& dj = doc["drafter"];
      DrafterSource ds;
      if (dj.contains("ngram")) {
        ds.ngram = resolve(base, dj["ngram"].get<std::string>());
      } else {
        ds.model = parse_model_source(dj, base);
      }
      c.drafter = ds;
    }
    if (doc.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : as_list<std::string>(doc["strategies"])) c.strategies.push_back(parse_strategy(s));
    }
    const json params = doc.value("params", json::object());
    if (params.contains("d")) c.d = as_list<int>(params["d"]);
    if (params.contains("n")) c.n = as_list<int>(params["n"]);
    if (params.contains("k")) c.k = as_list<int>(params["k"]);
    if (params.contains("d1")) c.d1 = as_list<int>(params["d1"]);
    if (params.contains("n1")) c.n1 = as_list<int>(params["n1"]);
    c.prompts = resolve(base, doc.at("prompts").get<std::string>());
    c.max_tokens = doc.value("max_tokens", c.max_tokens);
    if (doc.contains("seeds")) c.seeds = as_list<std::uint64_t>(doc["seeds"]);
    if (doc.contains("cost")) {
      const json& cj = doc["cost"];
      CostRoles roles;
      roles.profiles = resolve(base, cj.at("profiles").get<std::string>());
      roles.hardware = cj.at("hardware").get<std::string>();
      const std::pair<const char*, ModelRole> names[] = {
          {"target", ModelRole::Target}, {"intermediate", ModelRole::Intermediate}, {"drafter", ModelRole::Drafter}};
      for (const auto& [key, role] : names) {
        if (cj.contains(key)) {
          roles.models[role] = {cj[key].at("model").get<std::string>(), cj[key].at("scheme").get<std::string>()};
        }
      }
      c.cost = roles;
    }
    if (doc.contains("output")) c.output = resolve(base, doc["output"].get<std::string>());
    c.wall_clock = doc.value("wall_clock", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  c.validate();
  return c;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  return parse_bench_config(read_json_file(path), path.parent_path());
}

std::uint64_t hash_tokens(std::span<const int> tokens) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int t : tokens) {
    auto v = static_cast<std::uint32_t>(t);
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

BenchReport run_bench(const BenchConfig& config, std::size_t threads) {
  config.validate();
  const std::vector<Prompt> prompts = ingest_prompts(config.prompts);
  const std::vector<Combo> grid = expand_grid(config);

  std::optional<CostModel> cost;
  if (config.cost) {
    const ProfileSet profiles = load_profiles(config.cost->profiles);
    CostModel cm;
    cm.hw = profiles.hw(config.cost->hardware);
    for (const auto& [role, names] : config.cost->models) cm.models[role] = profiles.costed(names.first, names.second);
    cost = cm;
  }
  std::optional<NgramDrafter> ngram;
  if (config.drafter && !config.drafter->model) ngram = load_ngram_drafter(config.drafter->ngram);

  BenchReport report;
  report.config = bench_config_to_json(config);
  report.config["artifact"] = {{"name", "spql"}, {"version", SPQL_VERSION}};

  for (std::uint64_t seed : config.seeds) {
    const ModelWeights target = config.target.load(seed);
    std::optional<ModelWeights> intermediate;
    if (config.intermediate) intermediate = config.intermediate->load(seed);
    std::optional<ModelWeights> draft_model;
    if (config.drafter && config.drafter->model) draft_model = config.drafter->model->load(seed);

    const std::size_t total = grid.size() * prompts.size();
    std::vector<BenchRow> rows(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&]() {
      while (true) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= total) return;
        const Combo& combo = grid[idx / prompts.size()];
        const Prompt& prompt = prompts[idx % prompts.size()];
        try {
          EventLog log;
          DecodeOptions opt{config.max_tokens, 0, &log};
          const std::vector<int> tokens = encode_bytes(prompt.text, target.config);
          std::unique_ptr<Drafter> drafter;
          if (draft_model) {
            drafter = std::make_unique<ModelDrafter>(*draft_model);
          } else if (ngram) {
            drafter = std::make_unique<NgramDrafter>(*ngram);
          }
          DecodeOutput out;
          switch (combo.strategy) {
            case Strategy::AR:
              out = ar_decode(target, tokens, opt);
              break;
            case Strategy::SP:
              out = vanilla_sp_decode(target, *drafter, combo.d, tokens, opt);
              break;
            case Strategy::Eagle2:
              out = eagle2_decode(target, *drafter, {combo.d, combo.n, combo.k}, tokens, opt);
              break;
            case Strategy::HierSpec:
              out = hierspec_decode(target, *intermediate, *drafter, {combo.d, combo.d1, combo.n1, combo.k}, tokens, opt);
              break;
          }
          BenchRow& row = rows[idx];
          row.prompt_id = prompt.id;
          row.category = prompt.category;
          row.strategy = combo.strategy;
          row.d = combo.d;
          row.n = combo.n;
          row.k = combo.k;
          row.d1 = combo.d1;
          row.n1 = combo.n1;
          row.seed = seed;
          if (cost) {
            row.sim = simulated_clock(log, *cost);
            out.stats.simulated_time = row.sim->decode();
          }
          row.stats = out.stats;
          row.output_hash = hash_tokens(out.tokens);
          row.output = std::move(out.tokens);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) {
            failure = std::make_exception_ptr(RunError("prompt '" + prompt.id + "' (" + to_string(combo.strategy) +
                                                       "): " + e.what()));
          }
          next.store(total);
          return;
        }
      }
    };

    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, total));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    report.rows.insert(report.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  report.summary = summarize(report.rows);
  return report;
}

std::vector<SummaryRow> summarize(const std::vector<BenchRow>& rows) {
  std::vector<SummaryRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    const BenchRow& first = rows[i];
    auto same_group = [&](const BenchRow& r) {
      return r.seed == first.seed && r.strategy == first.strategy && r.d == first.d && r.n == first.n &&
             r.k == first.k && r.d1 == first.d1 && r.n1 == first.n1;
    };
    std::size_t end = i;
    while (end < rows.size() && same_group(rows[end])) ++end;

    std::vector<std::string> categories;
    for (std::size_t r = i; r < end; ++r) {
      if (std::find(categories.begin(), categories.end(), rows[r].category) == categories.end()) {
        categories.push_back(rows[r].category);
      }
    }
    categories.push_back("overall");
    for (const std::string& cat : categories) {
      SummaryRow s;
      s.strategy = to_string(first.strategy);
      s.d = first.d;
      s.n = first.n;
      s.k = first.k;
      s.d1 = first.d1;
      s.n1 = first.n1;
      s.seed = first.seed;
      s.category = cat;
      bool have_sim = true;
      double sim = 0.0, latency = 0.0, drafting = 0.0, verification = 0.0;
      for (std::size_t r = i; r < end; ++r) {
        const BenchRow& row = rows[r];
        if (cat != "overall" && row.category != cat) continue;
        ++s.prompts;
        s.tokens += row.stats.tokens_generated;
        s.target_forwards += row.stats.target_forwards;
        if (!row.sim) {
          have_sim = false;
          continue;
        }
        sim += row.sim->decode();
        latency += row.sim->draft_latency;
        drafting += row.sim->drafting;
        verification += row.sim->verification;
      }
      s.tau = s.target_forwards == 0 ? 1.0 : static_cast<double>(s.tokens) / static_cast<double>(s.target_forwards);
      if (have_sim && s.prompts > 0) {
        s.sim_s = sim;
        s.sim_tokens_per_s = sim > 0.0 ? static_cast<double>(s.tokens) / sim : 0.0;
        s.draft_latency_ms = 1000.0 * latency / static_cast<double>(s.prompts);
        s.drafting_s = drafting;
        s.verification_s = verification;
      }
      out.push_back(std::move(s));
    }
    i = end;
  }
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool wall_clock) {
  out << "prompt_id,category,strategy,d,n,k,tau,tokens,target_forwards,wall_s,sim_s,draft_latency_s,d1,n1,seed,"
         "drafting_s,verification_s,output_hash\n";
  for (const auto& r : rows) {
    out << csv_field(r.prompt_id) << ',' << csv_field(r.category) << ',' << to_string(r.strategy) << ',' << r.d << ','
        << r.n << ',' << r.k << ',' << format_fixed(r.stats.tau, 6) << ',' << r.stats.tokens_generated << ','
        << r.stats.target_forwards << ',' << (wall_clock ? format_fixed(r.stats.wall_time, 6) : "") << ','
        << (r.sim ? format_fixed(r.sim->decode(), 9) : "") << ','
        << (r.sim ? format_fixed(r.sim->draft_latency, 9) : "") << ',' << r.d1 << ',' << r.n1 << ',' << r.seed << ','
        << (r.sim ? format_fixed(r.sim->drafting, 9) : "") << ','
        << (r.sim ? format_fixed(r.sim->verification, 9) : "") << ',' << hex64(r.output_hash) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "strategy,d,n,k,d1,n1,seed,category,prompts,tokens,target_forwards,tau,sim_s,sim_tokens_per_s,"
         "draft_latency_ms,drafting_s,verification_s\n";
  auto opt = [](const std::optional<double>& v, int digits) { return v ? format_fixed(*v, digits) : std::string(); };
  for (const auto& s : rows) {
    out << s.strategy << ',' << s.d << ',' << s.n << ',' << s.k << ',' << s.d1 << ',' << s.n1 << ',' << s.seed << ','
        << csv_field(s.category) << ',' << s.prompts << ',' << s.tokens << ',' << s.target_forwards << ','
        << format_fixed(s.tau, 6) << ',' << opt(s.sim_s, 9) << ',' << opt(s.sim_tokens_per_s, 6) << ','
        << opt(s.draft_latency_ms, 6) << ',' << opt(s.drafting_s, 9) << ',' << opt(s.verification_s, 9) << '\n';
  }
}

void write_report(const BenchReport& report, const std::filesystem::path& output, bool wall_clock) {
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  const auto stem = output.parent_path() / output.stem();
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(output);
    write_rows_csv(f, report.rows, wall_clock);
  }
  {
    auto f = open(stem.string() + "_summary.csv");
    write_summary_csv(f, report.summary);
  }
  {
    auto f = open(stem.string() + "_config.json");
    f << report.config.dump(2) << '\n';
  }
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

CompareResult compare_reports(std::istream& a, std::istream& b) {
  using Table = std::vector<std::vector<std::string>>;
  const Table ta = read_csv(a);
  const Table tb = read_csv(b);
  auto index_of = [](const Table& t, const std::string& name) -> std::size_t {
    if (t.empty()) throw FormatError("report has no header row");
    for (std::size_t i = 0; i < t[0].size(); ++i) {
      if (t[0][i] == name) return i;
    }
    throw FormatError("report lacks column '" + name + "'");
  };
  // Key every row by (prompt_id, occurrence index of that id).
  auto keyed = [&](const Table& t) {
    const std::size_t id_col = index_of(t, "prompt_id");
    std::map<std::string, std::size_t> seen;
    std::vector<std::pair<std::string, std::size_t>> keys;
    for (std::size_t r = 1; r < t.size(); ++r) {
      if (t[r].size() != t[0].size()) throw FormatError("report row " + std::to_string(r + 1) + " has wrong field count");
      const std::string& id = t[r][id_col];
      keys.emplace_back(id + "#" + std::to_string(seen[id]++), r);
    }
    return keys;
  };
  const auto ka = keyed(ta);
  const auto kb = keyed(tb);
  std::map<std::string, std::size_t> rows_b(kb.begin(), kb.end());
  std::set<std::string> keys_a;
  for (const auto& [k, r] : ka) keys_a.insert(k);
  for (const auto& [k, r] : kb) {
    if (keys_a.count(k) == 0) throw InputError("prompt id mismatch: '" + k + "' only in the second report");
  }
  for (const auto& [k, r] : ka) {
    if (rows_b.count(k) == 0) throw InputError("prompt id mismatch: '" + k + "' only in the first report");
  }

  CompareResult result;
  const char* metrics[] = {"tau", "tokens", "target_forwards", "sim_s"};
  for (const auto& [key, ra] : ka) {
    const std::size_t rb = rows_b[key];
    for (const char* m : metrics) {
      const std::string& va = ta[ra][index_of(ta, m)];
      const std::string& vb = tb[rb][index_of(tb, m)];
      if (va != vb) result.diffs.push_back(key + ": " + m + " " + va + " -> " + vb);
    }
    const std::string& ha = ta[ra][index_of(ta, "output_hash")];
    const std::string& hb = tb[rb][index_of(tb, "output_hash")];
    if (ha != hb) {
      result.diffs.push_back(key + ": output tokens differ (losslessness failure)");
      result.lossless_mismatch = true;
    }
  }
  return result;
}

CompareResult compare_report(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary);
  if (!fa) throw FormatError("cannot open '" + a.string() + "'");
  std::ifstream fb(b, std::ios::binary);
  if (!fb) throw FormatError("cannot open '" + b.string() + "'");
  return compare_reports(fa, fb);
}

std::size_t threads_from_env() {
  const char* v = std::getenv("SPQL_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) throw ConfigError(std::string("SPQL_THREADS must be a positive integer, got '") + v + "'");
  return n;
}

}  // namespace spql
