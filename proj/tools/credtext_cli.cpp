#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "credtext/error.hpp"
#include "credtext/pipeline.hpp"

namespace {

const std::set<std::string> kSubcommands = {"synth",   "refine",  "featurize", "train",
                                            "evaluate", "explain", "profit",    "compare"};

constexpr const char* kUsage =
    "usage: credtext <subcommand> [--config PATH] [--out DIR] [--seed N] [--variant V]\n"
    "                [--text-source NAME] [--k N] [--workers N]\n"
    "subcommands: synth refine featurize train evaluate explain profit compare\n";

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || !kSubcommands.count(argv[1])) {
    const std::string arg = argc >= 2 ? argv[1] : "";
    if (arg == "-h" || arg == "--help") {
      std::cout << kUsage;
      return 0;
    }
    std::cerr << kUsage;
    return 2;
  }
  const std::string sub = argv[1];

  CLI::App app{"credtext " + sub, "credtext " + sub};
  std::string config_path;
  std::string out, variant, text_source;
  std::uint64_t seed = 0;
  int k = 0, workers = 0;
  auto* config_opt = app.add_option("--config", config_path, "pipeline config (JSON)");
  if (sub != "synth") config_opt->required();
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  auto* variant_opt = app.add_option("--variant", variant, "structured | text | combined")
                          ->check(CLI::IsMember({"structured", "text", "combined"}));
  auto* source_opt = app.add_option("--text-source", text_source, "human | full | positive | negative | pos_neg | neg_pos");
  auto* k_opt = app.add_option("--k", k, "top-k rejections")->check(CLI::PositiveNumber);
  auto* workers_opt = app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: cli: ConfigInvalid: " << e.what() << '\n';
    return 2;
  }

  try {
    credtext::PipelineConfig cfg = config_path.empty() ? credtext::parse_config("{}") : credtext::load_config(config_path);
    credtext::Overrides o;
    if (*out_opt) o.out = out;
    if (*seed_opt) o.seed = seed;
    if (*variant_opt) o.variant = credtext::parse_variant(variant);
    if (*source_opt) o.text_source = text_source;
    if (*k_opt) o.k = k;
    if (*workers_opt) o.workers = workers;
    return credtext::run_subcommand(sub, std::move(cfg), o, &std::cerr);
  } catch (const credtext::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
}
