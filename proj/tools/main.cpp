// ideolens — unsupervised political-leaning inference from tweet timelines.
//
// Every subcommand is one pipeline stage; `pipeline` chains them all. Stages
// communicate only through artifacts under the configured output directory,
// so any stage can be re-run in isolation.

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitData = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infers party- and pole-level political leaning of social-media "
               "users from what they write, without labeled training data."};
  app.require_subcommand(1);

  const std::map<std::string, void (*)(const ideolens::RunConfig&)> stage_of = {
      {"synth", &ideolens::stages::synth},
      {"ingest", &ideolens::stages::ingest},
      {"groundtruth", &ideolens::stages::groundtruth},
      {"train", &ideolens::stages::train},
      {"enrich", &ideolens::stages::enrich},
      {"vectorize", &ideolens::stages::vectorize},
      {"project", &ideolens::stages::project},
      {"predict", &ideolens::stages::predict},
      {"evaluate", &ideolens::stages::evaluate},
      {"compare", &ideolens::stages::compare},
      {"pipeline", &ideolens::stages::pipeline},
  };
  const std::map<std::string, std::string> blurb = {
      {"synth", "Generate a synthetic corpus with planted leanings"},
      {"ingest", "Load, clean and normalize the tweet corpus"},
      {"groundtruth", "Build like-graph ground truth and the train/validation/test split"},
      {"train", "Train the tweet-level party classifier on pivot timelines"},
      {"enrich", "Select confident users and retrain on their tweets"},
      {"vectorize", "Turn timelines into fixed-size ideology vectors"},
      {"project", "Write the 2-D ideology map"},
      {"predict", "Cluster users and assign party and pole labels"},
      {"evaluate", "Score predictions against the ground truth"},
      {"compare", "Run the whole method roster and rank it"},
      {"pipeline", "Run every stage in order"},
  };

  std::string config_path;
  std::vector<std::string> overrides;
  std::string chosen;
  for (const auto& [name, fn] : stage_of) {
    CLI::App* sub = app.add_subcommand(name, blurb.at(name));
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")
        ->required()
        ->expected(1);
    sub->add_option("-s,--set", overrides,
                    "Override one config value (dotted.path=value, repeatable)");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const ideolens::RunConfig cfg = ideolens::RunConfig::load(config_path, overrides);
    stage_of.at(chosen)(cfg);
    return kExitOk;
  } catch (const ideolens::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ideolens::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const ideolens::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
