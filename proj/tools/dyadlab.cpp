// dyadlab command-line front end. Every command is non-interactive; failures
// print "error: <category>: <message>" on stderr and exit with the category's
// code (see exit_code below), usage errors exit with 2.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "dyadlab/dyadlab.hpp"

namespace {

using namespace dyadlab;
using nlohmann::json;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Specification: return 3;
    case ErrorCategory::Incomplete: return 4;
    case ErrorCategory::Ingestion: return 5;
    case ErrorCategory::Transport: return 6;
    case ErrorCategory::Protocol: return 7;
    case ErrorCategory::State: return 8;
    case ErrorCategory::Aborted: return 9;
    case ErrorCategory::Io: return 10;
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCategory::Io, "cannot write " + path);
  os << text;
  if (!os.flush()) throw Error(ErrorCategory::Io, "write failed for " + path);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json comparison_json(const ComparisonResult& r) {
  json j{{"msd", r.msd}, {"n_cells", r.n_cells}};
  j["pearson_r"] = r.pearson_r ? json(*r.pearson_r) : json(nullptr);
  return j;
}

void print_run(const RunResult& r, bool as_json) {
  const RunPaths paths{r.dir};
  if (as_json) {
    std::cout << detail::read_json_file(paths.summary(), ErrorCategory::State).dump(2) << "\n";
    return;
  }
  std::size_t relaxed = 0;
  for (const auto& g : r.games) relaxed += g.relaxed;
  std::cout << "status " << to_string(r.status) << ", rounds " << r.rounds << ", relaxed games " << relaxed << "\n";
  if (r.status == RunStatus::Completed)
    std::cout << "matrix " << paths.matrix().string() << "\nlog " << paths.plays().string() << "\n";
  else
    std::cout << "resume with --resume " << r.dir.string() << "\n";
}

struct Options {
  // shared
  std::string grid = "original";
  std::string out;
  bool json_out = false;
  std::string region = "original";
  // nash
  std::string method = "analytic";
  ReplicatorParams replicator;
  std::string integrator = "substep";
  // phenotype
  std::string weights = "paper";
  // simulate / mock-run
  std::string config, resume, out_dir = "mock-run", policy = "cooperate", stage = "verified";
  std::uint32_t plays = 20, concurrency = 1, max_attempts = kDefaultMaxAttemptsPerSlot;
  std::uint64_t seed = 0;
  std::optional<std::uint32_t> max_rounds;
  bool identity_labels = false;
  // compare / region-average / render
  std::string a, b, title;
  bool outline_original = false;
  // validate-extractor
  std::string annotations, endpoint, model, api_key_env;
  int timeout_s = 120;
  bool fake = false;
  // ingest
  std::string in, schema = "aggregate", s_col = "S", t_col = "T", value_col, sd_col = "sd", sd_out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadlab: cooperation matrices for 2x2 dyadic games"};
  app.require_subcommand(1);
  Options o;

  const std::string grid_help = "grid: original, extended, NxM (S 0..N-1, T 5..5+M-1) or s0-s1:t0-t1";

  auto* nash = app.add_subcommand("nash", "Nash cooperation matrix (closed form or replicator dynamics)");
  nash->add_option("--grid", o.grid, grid_help)->capture_default_str();
  nash->add_option("--method", o.method, "analytic or replicator")->check(CLI::IsMember({"analytic", "replicator"}))->capture_default_str();
  nash->add_option("--x0", o.replicator.x0, "initial cooperator share")->capture_default_str();
  nash->add_option("--tol", o.replicator.tol, "replicator stop tolerance")->capture_default_str();
  nash->add_option("--t-max", o.replicator.t_max, "replicator step limit")->capture_default_str();
  nash->add_option("--dt", o.replicator.dt, "replicator time step")->capture_default_str();
  nash->add_option("--integrator", o.integrator, "substep or euler")->check(CLI::IsMember({"substep", "euler"}))->capture_default_str();
  nash->add_option("--out", o.out, "output CSV (stdout when omitted)");

  auto* pheno = app.add_subcommand("phenotype", "phenotype mixture matrix");
  pheno->add_option("--weights", o.weights, "paper, a phenotype name, or name=w,... list")->capture_default_str();
  pheno->add_option("--grid", o.grid, grid_help)->capture_default_str();
  pheno->add_option("--out", o.out, "output CSV (stdout when omitted)");

  auto* sim = app.add_subcommand("simulate", "run or resume an experiment described by a JSON config");
  auto* cfg_opt = sim->add_option("--config", o.config, "run configuration (JSON)");
  auto* resume_opt = sim->add_option("--resume", o.resume, "run directory to continue");
  cfg_opt->excludes(resume_opt);
  sim->add_option("--max-rounds", o.max_rounds, "stop after this many rounds (the run stays resumable)");
  sim->add_flag("--json", o.json_out, "print the run summary as JSON");

  auto* mock = app.add_subcommand("mock-run", "offline run against the built-in fake model");
  mock->add_option("--grid", o.grid, grid_help)->capture_default_str();
  mock->add_option("--plays", o.plays, "plays per game")->capture_default_str();
  mock->add_option("--policy", o.policy, "cooperate, defect, nash, mixture, fail-verification, flaky")->capture_default_str();
  mock->add_option("--stage", o.stage, "simple, double, multi-step, verified")->capture_default_str();
  mock->add_option("--seed", o.seed, "run seed")->capture_default_str();
  mock->add_option("--concurrency", o.concurrency, "plays in flight")->capture_default_str();
  mock->add_option("--max-attempts", o.max_attempts, "attempt cap per play slot")->capture_default_str();
  mock->add_option("--out-dir", o.out_dir, "run directory (must not hold a run)")->capture_default_str();
  mock->add_option("--max-rounds", o.max_rounds, "stop after this many rounds (the run stays resumable)");
  mock->add_flag("--identity-labels", o.identity_labels, "always present cooperate as A");
  mock->add_flag("--json", o.json_out, "print the run summary as JSON");

  auto* cmp = app.add_subcommand("compare", "MSD and Pearson r between two matrices");
  cmp->add_option("a", o.a, "first matrix CSV")->required();
  cmp->add_option("b", o.b, "second matrix CSV")->required();
  cmp->add_option("--region", o.region, "original, harmony-score or all")->capture_default_str();
  cmp->add_flag("--json", o.json_out, "machine-readable output");

  auto* avg = app.add_subcommand("region-average", "mean cooperation over a region");
  avg->add_option("matrix", o.a, "matrix CSV")->required();
  avg->add_option("--region", o.region, "original, harmony-score or all")->capture_default_str();
  avg->add_flag("--json", o.json_out, "machine-readable output");

  auto* render = app.add_subcommand("render", "SVG heatmap of a matrix");
  render->add_option("matrix", o.a, "matrix CSV")->required();
  render->add_option("--out", o.out, "output SVG (stdout when omitted)");
  render->add_flag("--outline-original", o.outline_original, "outline the S 0..10, T 5..15 window");
  render->add_option("--title", o.title, "caption above the plot");

  auto* vx = app.add_subcommand("validate-extractor", "extractor accuracy on an annotated JSONL set");
  vx->add_option("--annotations", o.annotations, "JSONL with long_answer and gold (A, B, neither)")->required();
  auto* ep = vx->add_option("--endpoint", o.endpoint, "chat-completions base URL");
  auto* fake_flag = vx->add_flag("--fake", o.fake, "use the built-in fake extractor");
  ep->excludes(fake_flag);
  vx->add_option("--model", o.model, "extractor model name");
  vx->add_option("--api-key-env", o.api_key_env, "environment variable holding the API key");
  vx->add_option("--timeout", o.timeout_s, "request timeout in seconds")->capture_default_str();
  vx->add_flag("--json", o.json_out, "machine-readable output");

  auto* ing = app.add_subcommand("ingest", "human data to cooperation matrix");
  ing->add_option("--in", o.in, "input CSV")->required();
  ing->add_option("--schema", o.schema, "aggregate or rows")->capture_default_str();
  ing->add_option("--grid", o.grid, grid_help)->capture_default_str();
  ing->add_option("--s-col", o.s_col, "S column name")->capture_default_str();
  ing->add_option("--t-col", o.t_col, "T column name")->capture_default_str();
  ing->add_option("--value-col", o.value_col, "rate or choice column (default coop_rate / choice)");
  ing->add_option("--sd-col", o.sd_col, "per-game SD column (aggregate schema)")->capture_default_str();
  ing->add_option("--out", o.out, "output matrix CSV (stdout when omitted)");
  ing->add_option("--sd-out", o.sd_out, "output CSV for per-game SD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*nash) {
      o.replicator.integrator = o.integrator == "euler" ? Integrator::ForwardEuler : Integrator::StableSubstep;
      const auto method = o.method == "replicator" ? NashMethod::Replicator : NashMethod::Analytic;
      const auto r = nash_matrix(parse_grid(o.grid), method, o.replicator);
      for (const auto& cell : r.flagged)
        std::cerr << "warning: " << describe_cell(cell.game.S, cell.game.T) << " stopped with "
                  << to_string(cell.result.outcome) << "\n";
      write_text(o.out, to_csv(r.matrix));
    } else if (*pheno) {
      write_text(o.out, to_csv(mixture_matrix(parse_weights(o.weights), parse_grid(o.grid))));
    } else if (*sim) {
      if (o.config.empty() && o.resume.empty()) throw specification_error("simulate needs --config or --resume");
      RunOptions opt;
      opt.max_rounds = o.max_rounds;
      const RunResult r = o.resume.empty() ? run_experiment(load_config(o.config), opt) : resume_experiment(o.resume, opt);
      print_run(r, o.json_out);
    } else if (*mock) {
      RunConfig c;
      c.grid = parse_grid(o.grid);
      c.agent.kind = AgentKind::Mock;
      const auto policy = llm::parse_fake_policy(o.policy);
      if (!policy) throw specification_error("unknown policy '" + o.policy + "'");
      const auto stage = llm::parse_stage(o.stage);
      if (!stage) throw specification_error("unknown stage '" + o.stage + "'");
      c.agent.policy = *policy;
      c.agent.stage = *stage;
      c.agent.force_identity_labels = o.identity_labels;
      c.plays_per_game = o.plays;
      c.seed = o.seed;
      c.concurrency = o.concurrency;
      c.max_attempts_per_slot = o.max_attempts;
      c.output_dir = o.out_dir;
      RunOptions opt;
      opt.max_rounds = o.max_rounds;
      print_run(run_experiment(c, opt), o.json_out);
    } else if (*cmp) {
      const auto a = load_csv(o.a), b = load_csv(o.b);
      const auto r = compare_in_region(a, b, parse_region(o.region));
      if (o.json_out) {
        auto j = comparison_json(r);
        j["region"] = o.region;
        std::cout << j.dump() << "\n";
      } else {
        std::cout << "msd " << fixed(r.msd, 6) << "\nr " << (r.pearson_r ? fixed(*r.pearson_r, 6) : "undefined")
                  << "\ncells " << r.n_cells << "\n";
      }
    } else if (*avg) {
      const double v = region_average(load_csv(o.a), parse_region(o.region));
      if (o.json_out) std::cout << json{{"region", o.region}, {"average", v}}.dump() << "\n";
      else std::cout << fixed(v, 3) << "\n";
    } else if (*render) {
      HeatmapStyle style;
      style.outline_original = o.outline_original;
      style.title = o.title;
      write_text(o.out, render_heatmap(load_csv(o.a), style));
    } else if (*vx) {
      const auto set = load_annotations(o.annotations);
      std::shared_ptr<llm::ChatClient> client;
      if (o.fake) {
        client = std::make_shared<llm::FakeChatModel>();
      } else {
        if (o.endpoint.empty() || o.model.empty()) throw specification_error("need --endpoint and --model, or --fake");
        client = make_http_client(EndpointSpec{o.endpoint, o.model, o.api_key_env, o.timeout_s});
      }
      const auto r = extractor_accuracy(set, {client.get(), o.fake ? "fake" : o.model});
      if (o.json_out)
        std::cout << json{{"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total}}.dump() << "\n";
      else
        std::cout << "accuracy " << fixed(r.accuracy, 3) << " (" << r.correct << "/" << r.total << ")\n";
    } else if (*ing) {
      SchemaDescriptor d;
      d.kind = parse_schema_kind(o.schema);
      d.grid = parse_grid(o.grid);
      d.s_column = o.s_col;
      d.t_column = o.t_col;
      d.value_column = o.value_col;
      d.sd_column = o.sd_col;
      const auto h = ingest_human_data(o.in, d);
      write_text(o.out, to_csv(h.matrix));
      if (!o.sd_out.empty()) {
        if (!h.sd) throw Error(ErrorCategory::Ingestion, "input has no SD column '" + o.sd_col + "'");
        write_text(o.sd_out, to_csv(*h.sd));
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.category()) << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return exit_code(ErrorCategory::Io);
  }
  return 0;
}
