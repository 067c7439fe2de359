#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kecmrn/binary_io.hpp"
#include "kecmrn/checkpoint.hpp"
#include "kecmrn/config.hpp"
#include "kecmrn/dataset.hpp"
#include "kecmrn/diagnostics.hpp"
#include "kecmrn/errors.hpp"
#include "kecmrn/features.hpp"
#include "kecmrn/metrics.hpp"
#include "kecmrn/synth.hpp"
#include "kecmrn/train.hpp"
#include "kecmrn/vocab.hpp"

namespace fs = std::filesystem;
using namespace kecmrn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

struct ModelFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::size_t> dims, heads, modules, cmr, k, epochs;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "key = value model configuration file");
    cmd.add_option("--set", sets, "override one config key (key=value); repeatable");
    cmd.add_option("--seed", seed, "random seed");
    cmd.add_option("--dims", dims, "latent width d; also sets d_q = d_t = d, d_z = 2d, ffn = 4d, d_h = d / heads");
    cmd.add_option("--heads", heads, "attention heads");
    cmd.add_option("--modules", modules, "KECMR modules");
    cmd.add_option("--cmr", cmr, "CMR layers per module");
    cmd.add_option("--k", k, "key entities per stream");
    cmd.add_option("--epochs", epochs, "training epochs");
  }

  // File, then --set, then the dedicated flags.
  ModelConfig resolve() const {
    ModelConfig c = config_path.empty() ? ModelConfig{} : ModelConfig::from_file(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError({"--set expects key=value, got '" + kv + "'"});
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (heads) {
      c.heads = *heads;
      c.head_dim = c.heads == 0 ? 0 : c.model_dim / c.heads;
    }
    if (dims) c.scale_widths(*dims);
    if (modules) c.modules = *modules;
    if (cmr) c.cmr_per_module = *cmr;
    if (k) c.key_entities = *k;
    if (epochs) c.epochs = *epochs;
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
  } else {
    write_file(out_path, content);
  }
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<Example> load_with_features(const std::string& data, const std::string& features, bool require_answers) {
  LoadOptions opts;
  opts.require_answers = require_answers;
  LoadResult loaded = load_dataset(data, opts);
  warn_all(loaded.warnings);
  attach_features(loaded.examples, FeatureContainer::read(features));
  return std::move(loaded.examples);
}

void print_problems(const char* kind, const std::vector<std::string>& problems) {
  nlohmann::ordered_json j;
  j["valid"] = false;
  j["kind"] = kind;
  j["errors"] = problems;
  std::cerr << j.dump(2) << '\n';
}

int cmd_validate(const std::string& path, const std::string& features, bool unlabeled) {
  LoadOptions opts;
  opts.require_answers = !unlabeled;
  LoadResult loaded = load_dataset(path, opts);
  if (!features.empty()) attach_features(loaded.examples, FeatureContainer::read(features));
  warn_all(loaded.warnings);
  nlohmann::ordered_json j;
  j["valid"] = true;
  j["examples"] = loaded.examples.size();
  j["warnings"] = loaded.warnings;
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_score(const std::string& pred, const std::string& gold, const std::string& dict_path, const std::string& out,
              bool as_json) {
  const YnDictionary dict = dict_path.empty() ? YnDictionary::seed() : YnDictionary::from_file(dict_path);
  const PredictionSet preds = read_predictions(pred);
  const LoadResult golds = load_dataset(gold);
  warn_all(golds.warnings);
  const ScoreReport report = score_predictions(preds, golds.examples, dict);
  warn_all(report.warnings);
  if (!out.empty()) write_file(out, to_json(report));
  std::cout << (as_json ? to_json(report) : format_table(report));
  return kExitOk;
}

template <typename T>
int run_train(const ModelConfig& config, const std::vector<Example>& data, const std::string& out, double target_em,
              const std::string& log_path) {
  Model<T> model(config, build_vocabularies(data, config.min_token_freq));
  std::mt19937_64 rng(config.seed ^ 0x5deece66dULL);
  TrainOptions options;
  options.target_em = target_em;
  if (!out.empty()) options.checkpoint_path = out;
  nlohmann::json log = nlohmann::json::array();
  options.on_epoch = [&](const EpochLog& e) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %zu lr %.6g loss %.6f train_em %.4f\n", e.epoch, e.learning_rate,
                  e.mean_loss, e.train_em);
    std::cout << line << std::flush;
    log.push_back({{"epoch", e.epoch}, {"lr", e.learning_rate}, {"loss", e.mean_loss}, {"train_em", e.train_em}});
  };
  std::cout << "answers " << model.vocab().answers.size() << " tokens " << model.vocab().tokens.size()
            << " parameters " << count_values(model.parameters()) << '\n';
  const TrainResult result = train(model, data, options, rng);
  char line[96];
  std::snprintf(line, sizeof(line), "first_batch_loss %.6f\n", result.first_batch_loss);
  std::cout << line;
  if (result.skipped_targets > 0) {
    std::cerr << "warning: " << result.skipped_targets << " examples have answers outside the vocabulary\n";
  }
  if (!log_path.empty()) {
    nlohmann::json doc{{"first_batch_loss", result.first_batch_loss}, {"epochs", log}};
    write_file(log_path, doc.dump(2) + "\n");
  }
  return kExitOk;
}

template <typename T>
int run_predict(const std::string& bytes, const std::vector<Example>& data, const std::string& out) {
  const Checkpoint<T> ckpt = deserialize_checkpoint<T>(bytes);
  emit(out, predictions_to_json(predict(ckpt.model, data)));
  return kExitOk;
}

int cmd_gradcheck(const GradCheckSettings& s, std::uint64_t seed, std::size_t seeds, std::vector<std::string> units,
                  const std::string& out) {
  if (units.empty()) units = gradcheck_units();
  if (seeds == 0) throw ValidationError({"--seeds must be positive"});
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  bool pass = true;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto reports = run_gradcheck(s, seed + i, units);
    for (const auto& r : reports) {
      pass = pass && r.report.pass;
      std::fprintf(stderr, "seed %llu %-10s %s max_rel_error %.3e kinked %zu\n",
                   static_cast<unsigned long long>(seed + i), r.unit.c_str(), r.report.pass ? "pass" : "FAIL",
                   r.report.max_rel_error, r.report.kinked);
    }
    doc.push_back({{"seed", seed + i}, {"reports", nlohmann::ordered_json::parse(to_json(reports))}});
  }
  nlohmann::ordered_json result;
  result["pass"] = pass;
  result["seeds"] = std::move(doc);
  emit(out, result.dump(2) + "\n");
  return pass ? kExitOk : kExitInvalid;
}

int cmd_gen_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_dir) {
  const SynthDataset data = gen_synthetic(spec, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_dataset(dir / "dataset.json", data.examples);
  data.features.write(dir / "features.vtf");
  std::cout << "wrote " << data.examples.size() << " examples to " << (dir / "dataset.json").string() << " and "
            << (dir / "features.vtf").string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kecmrn: key entity cross-media reasoning for visual text question answering"};
  app.require_subcommand(1);

  std::string data, features, out, dict, pred, gold, checkpoint, log_path;
  bool unlabeled = false, as_json = false, f64 = false;
  double target_em = 0.0;

  auto* validate = app.add_subcommand("validate", "check a dataset file against the schema");
  validate->add_option("dataset", data, "dataset JSON")->required();
  validate->add_option("--features", features, "feature container whose keys must cover the dataset");
  validate->add_flag("--unlabeled", unlabeled, "allow records without answer/answer_type");

  auto* score = app.add_subcommand("score", "score a prediction file against gold answers");
  score->add_option("--pred", pred, "prediction JSON (qid -> answer)")->required();
  score->add_option("--gold", gold, "gold dataset JSON")->required();
  score->add_option("--dict", dict, "extra yes/no phrases: phrase<TAB>yes|no per line");
  score->add_option("--out", out, "also write the JSON report here");
  score->add_flag("--json", as_json, "print the JSON report instead of the table");

  ModelFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--data", data, "training dataset JSON")->required();
  train_cmd->add_option("--features", features, "feature container")->required();
  train_cmd->add_option("--out", out, "checkpoint path, rewritten after every epoch")->required();
  train_cmd->add_option("--target-em", target_em, "stop once train EM reaches this value");
  train_cmd->add_option("--log", log_path, "write the epoch log as JSON");
  train_cmd->add_flag("--f64", f64, "train with 64-bit parameters");
  train_flags.attach(*train_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "predict answers with a checkpoint");
  predict_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  predict_cmd->add_option("--data", data, "dataset JSON (answers optional)")->required();
  predict_cmd->add_option("--features", features, "feature container")->required();
  predict_cmd->add_option("--out", out, "prediction JSON (default stdout)");
  bool predict_f64 = false;
  predict_cmd->add_flag("--f64", predict_f64, "accepted for symmetry; precision follows the checkpoint");
  std::uint64_t predict_seed = 0;
  predict_cmd->add_option("--seed", predict_seed, "accepted for symmetry; prediction is deterministic");

  GradCheckSettings gc;
  std::uint64_t gc_seed = 0;
  std::size_t gc_seeds = 1;
  std::vector<std::string> gc_units;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check at 64-bit");
  gradcheck->add_option("--dims", gc.width, "latent width")->capture_default_str();
  gradcheck->add_option("--heads", gc.heads, "attention heads")->capture_default_str();
  gradcheck->add_option("--modules", gc.modules, "KECMR modules in the model check")->capture_default_str();
  gradcheck->add_option("--cmr", gc.cmr_per_module, "CMR layers per module")->capture_default_str();
  gradcheck->add_option("--k", gc.key_entities, "key entities per stream")->capture_default_str();
  gradcheck->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--tol", gc.tolerance, "max relative error")->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "first seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc_seeds, "number of consecutive seeds")->capture_default_str();
  gradcheck->add_option("--unit", gc_units, "unit to check (repeatable; default all)");
  gradcheck->add_option("--out", out, "report path (default stdout)");
  bool gc_f64 = false;
  gradcheck->add_flag("--f64", gc_f64, "accepted for symmetry; checks always run at 64-bit");

  SynthSpec spec;
  std::uint64_t synth_seed = 0;
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset and feature container");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  gen->add_option("--yn", spec.yes_no, "yes/no questions")->capture_default_str();
  gen->add_option("--e", spec.extracted, "extracted-answer questions")->capture_default_str();
  gen->add_option("--g", spec.generated, "generated-answer questions")->capture_default_str();
  gen->add_option("--entities", spec.entities_per_scene, "people per scene")->capture_default_str();
  gen->add_option("--image-dim", spec.image_dim, "region feature width")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*validate) return cmd_validate(data, features, unlabeled);
    if (*score) return cmd_score(pred, gold, dict, out, as_json);
    if (*train_cmd) {
      const ModelConfig config = train_flags.resolve();
      const auto examples = load_with_features(data, features, true);
      return f64 ? run_train<double>(config, examples, out, target_em, log_path)
                 : run_train<float>(config, examples, out, target_em, log_path);
    }
    if (*predict_cmd) {
      const std::string bytes = read_file(checkpoint);
      const auto examples = load_with_features(data, features, false);
      return checkpoint_scalar_bytes(bytes) == 8 ? run_predict<double>(bytes, examples, out)
                                                 : run_predict<float>(bytes, examples, out);
    }
    if (*gradcheck) return cmd_gradcheck(gc, gc_seed, gc_seeds, gc_units, out);
    if (*gen) return cmd_gen_synth(spec, synth_seed, out);
  } catch (const ValidationError& e) {
    print_problems("validation", e.problems());
    return kExitInvalid;
  } catch (const FormatError& e) {
    print_problems("format", {e.what()});
    return kExitIo;
  } catch (const IoError& e) {
    print_problems("io", {e.what()});
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    print_problems("io", {e.what()});
    return kExitIo;
  } catch (const NotFoundError& e) {
    print_problems("not_found", {e.what()});
    return kExitInvalid;
  } catch (const DimensionError& e) {
    print_problems("dimension", {e.what()});
    return kExitInvalid;
  } catch (const ContractError& e) {
    print_problems("contract", {e.what()});
    return kExitInvalid;
  } catch (const std::exception& e) {
    print_problems("internal", {e.what()});
    return kExitInvalid;
  }
  return kExitInvalid;
}
