#include "ralp/scenario.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ralp/catalog.hpp"
#include "ralp/error.hpp"
#include "text_util.hpp"

namespace ralp {

namespace {

namespace fs = std::filesystem;
using detail::Token;

struct Line {
  const std::string& source;
  int number;

  [[noreturn]] void fail(int column, const std::string& what) const { throw ParseError(source, number, column, what); }
};

struct KeyValues {
  std::map<std::string, Token> values;  // value token keeps the key's column

  const Token* find(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  }
};

KeyValues collect(const Line& line, const std::vector<Token>& tokens, std::size_t first,
                  const std::set<std::string>& allowed) {
  KeyValues kv;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const auto eq = t.text.find('=');
    if (eq == std::string::npos || eq == 0) line.fail(t.column, fmt::format("expected key=value, got '{}'", t.text));
    const auto key = detail::to_lower(std::string_view(t.text).substr(0, eq));
    if (!allowed.contains(key)) line.fail(t.column, fmt::format("unknown key '{}'", key));
    if (!kv.values.emplace(key, Token{t.text.substr(eq + 1), t.column}).second)
      line.fail(t.column, fmt::format("duplicate key '{}'", key));
  }
  return kv;
}

int count_value(const Line& line, const Token& t, const char* key, std::int64_t min) {
  const auto v = detail::parse_int(t.text);
  if (!v || *v < min || *v > 1'000'000)
    line.fail(t.column, fmt::format("{} must be an integer >= {}, got '{}'", key, min, t.text));
  return static_cast<int>(*v);
}

double rate_value(const Line& line, const Token& t, const char* key) {
  const auto v = detail::parse_real(t.text);
  if (!v || !(*v > 0)) line.fail(t.column, fmt::format("{} must be a positive rate, got '{}'", key, t.text));
  return *v;
}

std::vector<Slot> slots_value(const Line& line, const Token& t) {
  std::vector<Slot> out;
  std::string_view rest = t.text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    const auto colon = item.find(':');
    std::optional<std::int64_t> m, g;
    if (colon != std::string_view::npos) {
      m = detail::parse_int(item.substr(0, colon));
      g = detail::parse_int(item.substr(colon + 1));
    }
    if (!m || !g || *m < 0 || *g < 0 || *m > 1'000'000 || *g > 1'000'000)
      line.fail(t.column, fmt::format("bad slot '{}', expected machine:gpu", item));
    out.push_back({static_cast<int>(*m), static_cast<int>(*g)});
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) line.fail(t.column, "empty slot list");
  return out;
}

ModelGraph resolve_model(const Token& t, const fs::path& base_dir) {
  const bool is_path = t.text.find('/') != std::string::npos || fs::path(t.text).extension() == ".model";
  if (!is_path) return catalog_lookup(t.text);
  fs::path p(t.text);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_model_file(p);
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::string& source, const fs::path& base_dir) {
  std::optional<std::string> name;
  int header_line = 1;
  int steps = 1;
  int warmup = 0;
  auto cluster = ClusterSpec::testbed();
  bool seen_cluster = false;
  std::vector<JobRequest> requests;
  std::set<std::string> job_names;

  int line_no = 0;
  for (auto raw : detail::split_lines(text)) {
    ++line_no;
    const auto tokens = detail::tokenize(raw);
    if (tokens.empty()) continue;
    const Line line{source, line_no};
    const auto directive = detail::to_lower(tokens[0].text);

    if (directive == "scenario") {
      if (name) line.fail(tokens[0].column, "duplicate 'scenario' header");
      if (tokens.size() < 2 || tokens[1].text.find('=') != std::string::npos)
        line.fail(tokens[0].column, "'scenario' needs a name");
      name = tokens[1].text;
      header_line = line_no;
      const auto kv = collect(line, tokens, 2, {"steps", "warmup"});
      if (auto t = kv.find("steps")) steps = count_value(line, *t, "steps", 1);
      if (auto t = kv.find("warmup")) warmup = count_value(line, *t, "warmup", 0);
      continue;
    }
    if (!name) line.fail(tokens[0].column, "expected 'scenario' header first");

    if (directive == "cluster") {
      if (seen_cluster) line.fail(tokens[0].column, "duplicate 'cluster' line");
      if (!requests.empty()) line.fail(tokens[0].column, "'cluster' must precede jobs");
      seen_cluster = true;
      const auto kv = collect(line, tokens, 1,
                              {"machines", "gpus_per_machine", "gpu_flops", "memcopy_bw", "link_bw", "intra_bw"});
      if (auto t = kv.find("machines")) cluster.machines = count_value(line, *t, "machines", 1);
      if (auto t = kv.find("gpus_per_machine")) cluster.gpus_per_machine = count_value(line, *t, "gpus_per_machine", 1);
      if (auto t = kv.find("gpu_flops")) cluster.gpu_flops_per_sec = rate_value(line, *t, "gpu_flops");
      if (auto t = kv.find("memcopy_bw")) cluster.memcopy_bytes_per_sec = rate_value(line, *t, "memcopy_bw");
      if (auto t = kv.find("link_bw")) cluster.link_bytes_per_sec = rate_value(line, *t, "link_bw");
      if (auto t = kv.find("intra_bw")) cluster.intra_machine_bytes_per_sec = rate_value(line, *t, "intra_bw");
      continue;
    }

    if (directive != "job") line.fail(tokens[0].column, fmt::format("unknown directive '{}'", tokens[0].text));
    if (tokens.size() < 2 || tokens[1].text.find('=') != std::string::npos)
      line.fail(tokens[0].column, "'job' needs a name");
    const auto& job_name = tokens[1].text;
    if (!job_names.insert(job_name).second)
      line.fail(tokens[1].column, fmt::format("duplicate job name '{}'", job_name));
    const auto kv = collect(line, tokens, 2,
                            {"model", "strategy", "workers", "ps", "split", "batch", "placement", "ps_slots",
                             "worker_slots"});
    const auto* model_tok = kv.find("model");
    if (!model_tok) line.fail(tokens[0].column, "job needs model=");
    const auto* strat_tok = kv.find("strategy");
    if (!strat_tok) line.fail(tokens[0].column, "job needs strategy=");

    auto model = resolve_model(*model_tok, base_dir);
    if (auto t = kv.find("batch")) model = model.with_batch_size(count_value(line, *t, "batch", 1));

    const auto strategy = detail::to_lower(strat_tok->text);
    Strategy strat;
    int ps = 0;
    if (strategy == "baseline") {
      strat = Strategy::baseline();
    } else if (strategy == "ralp") {
      strat = Strategy::ralp(0);
      ps = 1;
    } else if (strategy == "ring") {
      strat = Strategy::ring();
    } else {
      line.fail(strat_tok->column, fmt::format("unknown strategy '{}' (baseline, ralp, ring)", strat_tok->text));
    }
    const int workers = kv.find("workers") ? count_value(line, *kv.find("workers"), "workers", 1) : 1;
    if (strat.kind == StrategyKind::BaselinePS) ps = workers;
    if (auto t = kv.find("ps")) ps = count_value(line, *t, "ps", 0);

    if (auto t = kv.find("split")) {
      if (strat.kind != StrategyKind::Ralp) line.fail(t->column, "split= applies to ralp jobs only");
      if (detail::to_lower(t->text) != "auto") strat.split_index = count_value(line, *t, "split", 1);
    }
    if (strat.kind == StrategyKind::Ralp && strat.split_index == 0) {
      const auto split = planned_split(model);
      if (!split) line.fail(strat_tok->column, fmt::format("model '{}' has no usable split point", model.name()));
      strat.split_index = *split;
    }

    JobRequest req{job_name, JobSpec{std::move(model), strat, workers, ps}, std::nullopt, PlacementPolicy::Spread};
    try {
      req.spec.validate();
    } catch (const InvalidArgument& e) {
      line.fail(tokens[1].column, e.what());
    }
    if (auto t = kv.find("placement")) {
      const auto p = detail::to_lower(t->text);
      if (p == "spread") req.policy = PlacementPolicy::Spread;
      else if (p == "pack") req.policy = PlacementPolicy::Pack;
      else line.fail(t->column, fmt::format("unknown placement '{}' (spread, pack)", t->text));
    }
    const auto* ps_slots = kv.find("ps_slots");
    const auto* worker_slots = kv.find("worker_slots");
    if ((ps_slots != nullptr) != (worker_slots != nullptr) && !(worker_slots && ps == 0))
      line.fail(tokens[0].column, "give both ps_slots= and worker_slots=, or neither");
    if (worker_slots) {
      if (kv.find("placement")) line.fail(kv.find("placement")->column, "placement= conflicts with explicit slots");
      Placement pl;
      if (ps_slots) pl.ps = slots_value(line, *ps_slots);
      pl.workers = slots_value(line, *worker_slots);
      if (static_cast<int>(pl.workers.size()) != workers)
        line.fail(worker_slots->column, fmt::format("{} worker slots for {} workers", pl.workers.size(), workers));
      if (static_cast<int>(pl.ps.size()) != ps)
        line.fail(ps_slots ? ps_slots->column : worker_slots->column,
                  fmt::format("{} PS slots for {} PS", pl.ps.size(), ps));
      req.placement = std::move(pl);
    }
    requests.push_back(std::move(req));
  }
  if (!name) throw ParseError(source, line_no == 0 ? 1 : line_no, 1, "missing 'scenario' header");
  if (requests.empty()) throw ParseError(source, header_line, 1, "scenario declares no jobs");
  try {
    cluster.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, 0, e.what());
  }
  return make_scenario(*name, cluster, std::move(requests), steps, warmup);
}

Scenario load_scenario_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.string(), path.parent_path());
}

}  // namespace ralp
