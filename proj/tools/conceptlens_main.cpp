/* Copyright 2026 The ConceptLens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line entry point: synthetic experiments, training, concept
// elicitation and the inspection service.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "conceptlens/concept_client.h"
#include "conceptlens/concept_space.h"
#include "conceptlens/error.h"
#include "conceptlens/interpret.h"
#include "conceptlens/linear_head.h"
#include "conceptlens/serve.h"
#include "conceptlens/synth.h"
#include "conceptlens/tensor_io.h"

namespace fs = std::filesystem;
namespace cl = conceptlens;

namespace {

cl::TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return cl::TrainConfig{};
  return cl::train_config_from_json(cl::read_text_file(path));
}

cl::SynthConfig load_synth_config(const std::string& path) {
  if (path.empty()) return cl::SynthConfig{};
  return cl::synth_config_from_json(cl::read_text_file(path));
}

struct SynthArgs {
  std::string config;
  std::string out;
};

struct RobustnessArgs {
  std::string config;
  std::string train;
  std::string report;
};

struct AblationArgs {
  std::string config;
  std::string train;
  std::string report;
  std::vector<std::size_t> ks;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string dataset;
  std::string concepts;
  std::string train;
  std::string pooling = "avg";
  std::string normalizer = "per_concept_minmax";
  std::string out;
  std::string report;
};

struct GenerateArgs {
  std::vector<std::string> classes;
  std::string template_kind = "per_class";
  std::string out;
  std::string fixtures;
  std::string endpoint;
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 60;
  std::size_t select_n = 0;
};

struct AssembleArgs {
  std::string candidates;
  std::string embeddings;
  std::string out;
};

struct ServeArgs {
  std::string model;
  std::string dataset;
  std::string concepts;
  std::string bind = "127.0.0.1:8080";
  std::string cors_origin;
};

struct WeightsArgs {
  std::string model;
  std::optional<double> threshold;
};

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    cl::write_text_file(path, text);
  }
}

int run_synth(const SynthArgs& args) {
  const cl::SynthDataset dataset = cl::generate(load_synth_config(args.config));
  cl::write_synth_dataset(dataset, args.out);
  spdlog::info("wrote {} items and {} concepts to {}",
               dataset.manifest.items.size(), dataset.concepts.size(), args.out);
  return 0;
}

int run_robustness(const RobustnessArgs& args) {
  const cl::RobustnessReport report = cl::run_robustness_experiment(
      load_synth_config(args.config), load_train_config(args.train));
  write_or_print(args.report, cl::to_json(report));
  spdlog::info("concept path test acc {:.4f}, raw probe test acc {:.4f}",
               report.concept_test_acc, report.raw_probe_test_acc);
  return 0;
}

int run_ablation(AblationArgs args) {
  const cl::SynthConfig config = load_synth_config(args.config);
  if (args.ks.empty()) args.ks = {1, config.num_concepts()};
  const auto rows = cl::concept_count_ablation(
      config, load_train_config(args.train), args.ks, args.repeats, args.seed);
  write_or_print(args.report, cl::to_json(rows));
  return 0;
}

int run_train(const TrainArgs& args) {
  const cl::Dataset dataset = cl::load_dataset(args.dataset);
  const cl::ConceptSet concepts = cl::load_concept_set(args.concepts);
  cl::check_pairing(dataset.manifest(), concepts);
  const cl::PoolingMode pooling = cl::parse_pooling_mode(args.pooling);

  std::vector<cl::ConceptVector> raw;
  raw.reserve(dataset.size());
  std::vector<cl::ConceptVector> train_raw;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    raw.push_back(cl::concept_vector(dataset.load_tensor(i), concepts, pooling));
    if (dataset.manifest().items[i].split == cl::Split::kTrain) {
      train_raw.push_back(raw.back());
    }
  }
  if (train_raw.empty()) throw cl::Error(cl::ErrorKind::kInvalidArgument,
                                         "dataset has no train items");

  cl::LinearHead head;
  head.class_names = dataset.manifest().class_names;
  head.concept_texts = concepts.texts();
  head.pooling = pooling;
  head.normalizer =
      cl::fit_normalizer(train_raw, cl::parse_normalizer_mode(args.normalizer));
  head.weights = cl::Matrix(head.class_names.size(), concepts.size());

  std::vector<cl::LabeledFeatures> train, val, test;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const cl::ItemRecord& item = dataset.manifest().items[i];
    cl::LabeledFeatures row{cl::apply_normalizer(head.normalizer, raw[i]).scores,
                            item.label};
    switch (item.split) {
      case cl::Split::kTrain: train.push_back(std::move(row)); break;
      case cl::Split::kVal: val.push_back(std::move(row)); break;
      case cl::Split::kTest: test.push_back(std::move(row)); break;
    }
  }
  // Without a val split, early stopping watches the train split instead.
  const std::span<const cl::LabeledFeatures> val_view =
      val.empty() ? std::span<const cl::LabeledFeatures>(train) : val;

  const cl::TrainedHead trained =
      cl::train(std::move(head), train, val_view, test, load_train_config(args.train));
  cl::save_model(trained.head, args.out);
  if (!args.report.empty()) {
    cl::write_text_file(args.report, cl::train_report_to_json(trained.report));
  }
  const auto& best = trained.report.epochs[trained.report.best_epoch];
  spdlog::info("best epoch {} val acc {:.4f}", trained.report.best_epoch,
               best.val_accuracy);
  return 0;
}

cl::LlmConfig llm_config(const GenerateArgs& args) {
  cl::LlmConfig config;
  config.endpoint = args.endpoint;
  config.model = args.model;
  config.api_key_env = args.api_key_env;
  config.timeout = std::chrono::seconds(args.timeout_s);
  if (!args.fixtures.empty()) config.fixture_dir = fs::path(args.fixtures);
  if (!config.fixture_dir && config.endpoint.empty()) {
    throw cl::Error(cl::ErrorKind::kInvalidArgument,
                    "either --fixtures or --endpoint is required");
  }
  return config;
}

cl::PromptTemplate template_for(std::string_view kind) {
  switch (cl::parse_template_kind(kind)) {
    case cl::TemplateKind::kPerClass: return cl::per_class_template();
    case cl::TemplateKind::kDiscriminative: return cl::discriminative_template();
    default: break;
  }
  throw cl::Error(cl::ErrorKind::kInvalidArgument,
                  "template must be per_class or discriminative");
}

int run_generate(const GenerateArgs& args) {
  const cl::LlmConfig config = llm_config(args);
  cl::ConceptCandidates candidates =
      cl::generate_candidates(args.classes, template_for(args.template_kind), config);
  if (args.select_n > 0) {
    candidates = cl::select_candidates(candidates, args.select_n, config);
  }
  write_or_print(args.out, cl::candidates_to_json(candidates));
  spdlog::info("{} descriptors across {} groups", candidates.descriptor_count(),
               candidates.groups.size());
  return 0;
}

int run_assemble(const AssembleArgs& args) {
  const cl::ConceptCandidates candidates =
      cl::candidates_from_json(cl::read_text_file(args.candidates));
  cl::AssembledConcepts assembled =
      cl::assemble_concept_set(candidates, cl::read_tensor(fs::path(args.embeddings)));
  cl::save_concept_set(assembled.concepts, args.out);
  spdlog::info("assembled {} concepts ({} warnings)", assembled.concepts.size(),
               assembled.warnings.size());
  return 0;
}

int run_serve(const ServeArgs& args) {
  const cl::ConceptService service =
      cl::ConceptService::load(args.model, args.dataset, args.concepts);
  cl::ServeOptions options;
  if (!args.cors_origin.empty()) options.cors_origin = args.cors_origin;
  cl::run_service(service, cl::parse_bind_address(args.bind), options);
  return 0;
}

int run_weights(const WeightsArgs& args) {
  cl::SankeyOptions options;
  options.magnitude_threshold = args.threshold;
  std::cout << cl::to_json(cl::export_sankey(cl::load_model(args.model), options))
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conceptlens: concept-bottleneck classification toolkit"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic confounded dataset");
  synth->add_option("--config", synth_args.config, "SynthConfig JSON")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  RobustnessArgs robust_args;
  auto* robust = app.add_subcommand(
      "robustness", "Concept path vs raw-feature probe under confound shift");
  robust->add_option("--config", robust_args.config, "SynthConfig JSON")
      ->check(CLI::ExistingFile);
  robust->add_option("--train", robust_args.train, "TrainConfig JSON")
      ->check(CLI::ExistingFile);
  robust->add_option("--report", robust_args.report, "Report path (default stdout)");

  AblationArgs ablation_args;
  auto* ablation = app.add_subcommand("ablation", "Concept-count ablation");
  ablation->add_option("--config", ablation_args.config, "SynthConfig JSON")
      ->check(CLI::ExistingFile);
  ablation->add_option("--train", ablation_args.train, "TrainConfig JSON")
      ->check(CLI::ExistingFile);
  ablation->add_option("--report", ablation_args.report, "Report path (default stdout)");
  ablation->add_option("--k", ablation_args.ks, "Subset sizes (default 1 and N)")
      ->delimiter(',');
  ablation->add_option("--repeats", ablation_args.repeats, "Subsets per K")
      ->check(CLI::PositiveNumber);
  ablation->add_option("--seed", ablation_args.seed, "Subset sampling seed");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a linear head on a dataset");
  train->add_option("--dataset", train_args.dataset, "manifest.json")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--concepts", train_args.concepts, "concepts.json")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--train", train_args.train, "TrainConfig JSON")
      ->check(CLI::ExistingFile);
  train->add_option("--pooling", train_args.pooling, "avg | max | avg_plus_max");
  train->add_option("--normalizer", train_args.normalizer,
                    "per_concept_minmax | global_affine");
  train->add_option("--out", train_args.out, "model.json")->required();
  train->add_option("--report", train_args.report, "Training curve JSON");

  auto* concepts = app.add_subcommand("concepts", "Concept elicitation");
  concepts->require_subcommand(1);

  GenerateArgs gen_args;
  auto* generate = concepts->add_subcommand("generate", "Query the LLM for descriptors");
  generate->add_option("--classes", gen_args.classes, "Class names")
      ->required()->delimiter(',');
  generate->add_option("--template", gen_args.template_kind,
                       "per_class | discriminative");
  generate->add_option("--out", gen_args.out, "candidates.json (default stdout)");
  generate->add_option("--fixtures", gen_args.fixtures, "Offline fixture directory")
      ->check(CLI::ExistingDirectory);
  generate->add_option("--endpoint", gen_args.endpoint, "Chat-completion URL");
  generate->add_option("--model", gen_args.model, "Model identifier");
  generate->add_option("--api-key-env", gen_args.api_key_env,
                       "Environment variable holding the API key");
  generate->add_option("--timeout", gen_args.timeout_s, "Seconds")
      ->check(CLI::PositiveNumber);
  generate->add_option("--select-n", gen_args.select_n,
                       "Run one select-N round over the descriptors");

  AssembleArgs asm_args;
  auto* assemble = concepts->add_subcommand(
      "assemble", "Pair candidates with text embeddings into a concept set");
  assemble->add_option("--candidates", asm_args.candidates, "candidates.json")
      ->required()->check(CLI::ExistingFile);
  assemble->add_option("--embeddings", asm_args.embeddings, "[N,D] tensor file")
      ->required()->check(CLI::ExistingFile);
  assemble->add_option("--out", asm_args.out, "concepts.json")->required();

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "HTTP service for the intervention UI");
  serve->add_option("--model", serve_args.model, "model.json")
      ->required()->check(CLI::ExistingFile);
  serve->add_option("--dataset", serve_args.dataset, "manifest.json")
      ->required()->check(CLI::ExistingFile);
  serve->add_option("--concepts", serve_args.concepts, "concepts.json")
      ->required()->check(CLI::ExistingFile);
  serve->add_option("--bind", serve_args.bind, "host:port");
  serve->add_option("--cors-origin", serve_args.cors_origin,
                    "Allowed cross-origin caller");

  WeightsArgs weights_args;
  auto* weights = app.add_subcommand("weights", "Print the Sankey weight export");
  weights->add_option("--model", weights_args.model, "model.json")
      ->required()->check(CLI::ExistingFile);
  weights->add_option("--threshold", weights_args.threshold, "Minimum |weight|");

  CLI11_PARSE(app, argc, argv);
  // Logs go to stderr so report output on stdout stays machine-readable.
  spdlog::set_default_logger(spdlog::stderr_color_mt("conceptlens"));
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*synth) return run_synth(synth_args);
    if (*robust) return run_robustness(robust_args);
    if (*ablation) return run_ablation(ablation_args);
    if (*train) return run_train(train_args);
    if (*generate) return run_generate(gen_args);
    if (*assemble) return run_assemble(asm_args);
    if (*serve) return run_serve(serve_args);
    if (*weights) return run_weights(weights_args);
  } catch (const cl::Error& e) {
    spdlog::error("{}: {}", cl::to_string(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
