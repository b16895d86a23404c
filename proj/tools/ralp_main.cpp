#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "ralp/catalog.hpp"
#include "ralp/costmodel.hpp"
#include "ralp/error.hpp"
#include "ralp/parallel.hpp"
#include "ralp/profiler.hpp"
#include "ralp/scenario.hpp"
#include "ralp/simulator.hpp"

namespace fs = std::filesystem;
using namespace ralp;

namespace {

enum Exit { kOk = 0, kParse = 2, kUnknownModel = 3, kBadFlag = 4, kCapacity = 5 };

// Raised for flag values CLI11 cannot check itself (strategy lists, formats).
struct BadFlag : Error {
  using Error::Error;
};

ModelGraph load_model(const std::string& ref) {
  const fs::path p(ref);
  if (fs::exists(p) || ref.find('/') != std::string::npos || p.extension() == ".model") return load_model_file(p);
  return catalog_lookup(ref);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << text;
}

// ---- profile / split

struct ProfileArgs {
  std::string model;
  double threshold = -0.5;
  std::string mode = "index_weighted";
};

int run_profile(const ProfileArgs& a) {
  ProfilerConfig cfg;
  cfg.threshold_k = a.threshold;
  const auto mode = parse_skewness_mode(a.mode);
  if (!mode) throw BadFlag(fmt::format("unknown skewness mode '{}' (index_weighted, literal_values)", a.mode));
  cfg.skewness_mode = *mode;
  for (const auto& w : cfg.warnings()) fmt::print(stderr, "warning: {}\n", w);
  const auto report = profile(load_model(a.model), cfg);
  fmt::print("{}\n", to_json(report).dump(2));
  return kOk;
}

int run_split(const std::string& model_ref) {
  const auto model = load_model(model_ref);
  const auto split = find_split(model.param_bytes_series(), model.output_bytes_series(), model.kinds());
  nlohmann::ordered_json j;
  j["model"] = model.name();
  j["batch_size"] = model.batch_size();
  j["split_index"] = *split.split_index;
  j["cost_bytes"] = *split.cost_bytes;
  const auto i = *split.split_index;
  j["split_after"] = model.layer(i).name;
  j["split_before"] =
      static_cast<std::size_t>(i) < model.size() ? nlohmann::ordered_json(model.layer(i + 1).name) : nlohmann::ordered_json(nullptr);
  if (static_cast<std::size_t>(i) < model.size()) {
    j["front_param_bytes"] = model.cumulative_param_bytes(i);
    j["back_param_bytes"] = model.total_param_bytes() - model.cumulative_param_bytes(i);
    j["activation_bytes"] = model.output_bytes(i);
  }
  fmt::print("{}\n", j.dump(2));
  return kOk;
}

// ---- volumes

struct VolumeArgs {
  std::vector<std::string> models;
  std::vector<int> workers{8};
  std::string strategies = "all";
  std::string format = "table";
  bool table3 = false;
};

std::vector<StrategyKind> parse_strategies(const std::string& list) {
  std::vector<StrategyKind> out;
  std::string_view rest = list;
  while (true) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    if (item == "all") {
      out.insert(out.end(), {StrategyKind::BaselinePS, StrategyKind::RingAllreduce, StrategyKind::Ralp});
    } else if (item == "baseline") {
      out.push_back(StrategyKind::BaselinePS);
    } else if (item == "ring") {
      out.push_back(StrategyKind::RingAllreduce);
    } else if (item == "ralp") {
      out.push_back(StrategyKind::Ralp);
    } else {
      throw BadFlag(fmt::format("unknown strategy '{}' (baseline, ring, ralp, all)", item));
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string volume_table(std::span<const StrategyRow> rows) {
  std::string out = fmt::format("{:<14} {:<9} {:>4} {:>6} {:>16} {:>10}\n", "model", "strategy", "W", "split",
                                "total_bytes", "total_GB");
  for (const auto& r : rows) {
    std::string split = "-";
    if (r.strategy == StrategyKind::Ralp) split = r.split_index ? std::to_string(*r.split_index) : "none";
    out += fmt::format("{:<14} {:<9} {:>4} {:>6} {:>16} {:>10.2f}\n", r.model, to_string(r.strategy), r.workers,
                       split, r.volumes.total_bytes, to_gib(r.volumes.total_bytes));
  }
  return out;
}

int run_table3(const std::string& format) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  std::string table = fmt::format("{:<14} {:>10} {:>10} {:>10}\n", "model", "size_GB", "ring_GB", "ralp_GB");
  std::string csv = "model,size_bytes,ring_bytes,ralp_bytes\n";
  for (const char* name : {"alexnet", "inception-v3", "vgg11"}) {
    const auto m = catalog_lookup(name);
    const auto ring = volume_ring(m, 8).total_bytes;
    const auto split = planned_split(m);
    const auto ralp = split ? volume_ralp(m, *split, 8).total_bytes : volume_baseline(m, 8).total_bytes;
    table += fmt::format("{:<14} {:>10.2f} {:>10.2f} {:>10.2f}\n", m.name(), to_gib(m.total_param_bytes()),
                         to_gib(ring), to_gib(ralp));
    csv += fmt::format("{},{},{},{}\n", m.name(), m.total_param_bytes(), ring, ralp);
    arr.push_back({{"model", m.name()},
                   {"W", 8},
                   {"size_bytes", m.total_param_bytes()},
                   {"ring_bytes", ring},
                   {"ralp_bytes", ralp},
                   {"ralp_split", split ? nlohmann::ordered_json(*split) : nlohmann::ordered_json(nullptr)},
                   {"size_gb", to_gib(m.total_param_bytes())},
                   {"ring_gb", to_gib(ring)},
                   {"ralp_gb", to_gib(ralp)}});
  }
  if (format == "json") fmt::print("{}\n", arr.dump(2));
  else if (format == "csv") fmt::print("{}", csv);
  else fmt::print("{}", table);
  return kOk;
}

int run_volumes(const VolumeArgs& a) {
  if (a.format != "csv" && a.format != "json" && a.format != "table")
    throw BadFlag(fmt::format("unknown format '{}' (csv, json, table)", a.format));
  if (a.table3) return run_table3(a.format);
  if (a.models.empty()) throw BadFlag("volumes needs at least one model (or --reproduce-table3)");
  for (int w : a.workers)
    if (w < 1) throw BadFlag(fmt::format("worker counts must be >= 1, got {}", w));
  const auto kinds = parse_strategies(a.strategies);
  std::vector<StrategyRow> rows;
  for (const auto& ref : a.models) {
    auto part = compare_strategies(load_model(ref), a.workers, kinds);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (a.format == "csv") fmt::print("{}", to_csv(rows));
  else if (a.format == "json") fmt::print("{}\n", to_json(rows).dump(2));
  else fmt::print("{}", volume_table(rows));
  return kOk;
}

// ---- simulate

struct SimulateArgs {
  std::vector<std::string> scenarios;
  std::optional<int> steps;
  std::optional<int> warmup;
  std::string out;
  std::string timeline;
  int consolidate = 0;
};

std::string with_index(const std::string& path, std::size_t i, std::size_t n) {
  if (n == 1) return path;
  fs::path p(path);
  return (p.parent_path() / fmt::format("{}.{}{}", p.stem().string(), i, p.extension().string())).string();
}

void print_summary(const SimReport& r) {
  for (const auto& j : r.jobs)
    fmt::print("{} {}: {} step={:.6f}s images/sec={:.1f} comm_fraction={:.3f} wire={}B\n", r.scenario, j.name,
               to_string(j.strategy.kind), j.avg_step_seconds, j.images_per_sec, j.comm_fraction(),
               j.bytes_on_wire_per_step);
}

int run_simulate(const SimulateArgs& a) {
  if (a.steps && *a.steps < 1) throw InvalidArgument(fmt::format("--steps must be >= 1, got {}", *a.steps));
  if (a.warmup && *a.warmup < 0) throw InvalidArgument("--warmup must be >= 0");
  if (a.consolidate < 0) throw InvalidArgument("--consolidate must be >= 1");
  std::vector<Scenario> scenarios;
  for (const auto& path : a.scenarios) {
    auto sc = load_scenario_file(path);
    if (a.steps) sc.steps = *a.steps;
    if (a.warmup) sc.warmup = *a.warmup;
    scenarios.push_back(std::move(sc));
  }
  const auto n = scenarios.size();

  if (a.consolidate > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto rep = simulate_consolidation(scenarios[i], a.consolidate);
      for (std::size_t k = 0; k < rep.slowdown.size(); ++k)
        fmt::print("{} {}: slowdown={:.3f} (isolated {:.6f}s, consolidated {:.6f}s)\n", rep.consolidated.scenario,
                   rep.consolidated.jobs[k].name, rep.slowdown[k],
                   rep.isolated.jobs[k % rep.isolated.jobs.size()].avg_step_seconds,
                   rep.consolidated.jobs[k].avg_step_seconds);
      if (!a.out.empty()) write_file(with_index(a.out, i, n), to_json(rep).dump(2) + "\n");
      if (!a.timeline.empty()) write_file(with_index(a.timeline, i, n), timeline_csv(rep.consolidated));
    }
    return kOk;
  }

  const auto reports = simulate_many(scenarios);
  for (std::size_t i = 0; i < n; ++i) {
    print_summary(reports[i]);
    if (!a.out.empty()) write_file(with_index(a.out, i, n), to_json(reports[i]).dump(2) + "\n");
    if (!a.timeline.empty()) write_file(with_index(a.timeline, i, n), timeline_csv(reports[i]));
  }
  return kOk;
}

// ---- catalog

int run_catalog(const std::string& show) {
  if (!show.empty()) {
    fmt::print("{}", catalog_descriptor(show));
    return kOk;
  }
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    fmt::print("{:<14} layers={:<3} batch={:<4} params={}\n", name, m.size(), m.batch_size(), m.total_param_count());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ralp: partition planner and training-step simulator"};
  app.require_subcommand(1, 1);

  ProfileArgs prof;
  auto* profile_cmd = app.add_subcommand("profile", "Skewness, eligibility and split for a model (JSON)");
  profile_cmd->add_option("model", prof.model, "Catalog name or descriptor path")->required();
  profile_cmd->add_option("-k,--threshold", prof.threshold, "Eligibility threshold K")->capture_default_str();
  profile_cmd->add_option("--mode", prof.mode, "index_weighted | literal_values")->capture_default_str();

  std::string split_model;
  auto* split_cmd = app.add_subcommand("split", "Cheapest split point, ignoring the eligibility gate (JSON)");
  split_cmd->add_option("model", split_model, "Catalog name or descriptor path")->required();

  VolumeArgs vol;
  auto* volumes_cmd = app.add_subcommand("volumes", "Per-step transfer volumes per strategy");
  volumes_cmd->add_option("models", vol.models, "Catalog names or descriptor paths");
  volumes_cmd->add_option("-w,--workers", vol.workers, "Worker counts")->delimiter(',')->capture_default_str();
  volumes_cmd->add_option("-s,--strategies", vol.strategies, "baseline,ring,ralp or all")->capture_default_str();
  volumes_cmd->add_option("--format", vol.format, "csv | json | table")->capture_default_str();
  volumes_cmd->add_flag("--reproduce-table3", vol.table3, "AlexNet, Inception-v3 and VGG11 at W=8");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run scenario files");
  simulate_cmd->add_option("scenarios", sim.scenarios, "Scenario files")->required();
  simulate_cmd->add_option("--steps", sim.steps, "Override measured steps");
  simulate_cmd->add_option("--warmup", sim.warmup, "Override warmup steps");
  simulate_cmd->add_option("-o,--out", sim.out, "Write the JSON report here");
  simulate_cmd->add_option("--timeline", sim.timeline, "Write the per-step CSV timeline here");
  simulate_cmd->add_option("--consolidate", sim.consolidate, "Compare k consolidated copies against isolation");

  std::string show;
  auto* catalog_cmd = app.add_subcommand("catalog", "List bundled models");
  catalog_cmd->add_option("--show", show, "Print one descriptor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadFlag;
  }

  try {
    if (profile_cmd->parsed()) return run_profile(prof);
    if (split_cmd->parsed()) return run_split(split_model);
    if (volumes_cmd->parsed()) return run_volumes(vol);
    if (simulate_cmd->parsed()) return run_simulate(sim);
    if (catalog_cmd->parsed()) return run_catalog(show);
  } catch (const BadFlag& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kBadFlag;
  } catch (const UnknownModelError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUnknownModel;
  } catch (const CapacityError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kCapacity;
  } catch (const Error& e) {
    // parse, shape and validation problems
    fmt::print(stderr, "error: {}\n", e.what());
    return kParse;
  }
  return kOk;
}
