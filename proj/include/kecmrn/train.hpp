#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "kecmrn/metrics.hpp"
#include "kecmrn/model.hpp"

namespace kecmrn {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double mean_loss = 0.0;  // over examples with an in-vocabulary target
  double train_em = 0.0;
};

struct TrainOptions {
  // Stop once train EM reaches this value; 0 never stops early.
  double target_em = 0.0;
  // Written after every epoch when set.
  std::optional<std::filesystem::path> checkpoint_path;
  std::function<void(const EpochLog&)> on_epoch;
  YnDictionary dict = YnDictionary::seed();
};

struct TrainResult {
  std::vector<EpochLog> history;
  double first_batch_loss = 0.0;  // mean loss of the first batch before any update
  std::size_t skipped_targets = 0;  // examples whose answer is outside the vocabulary
};

// Adam with moment estimates kept across epochs and bias correction.
template <typename T>
class Adam {
 public:
  Adam(const ParamList<T>& params, double beta1, double beta2, double eps);
  // Applies one update with the gradients currently held by the parameters,
  // each divided by `grad_divisor`.
  void step(double learning_rate, double grad_divisor);
  std::uint64_t steps() const noexcept { return t_; }

 private:
  ParamList<T> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

double learning_rate_at(const ModelConfig& c, std::size_t epoch);

// Cross-entropy training over `data` for config().epochs epochs. Throws
// ContractError on an empty dataset.
template <typename T>
TrainResult train(Model<T>& model, std::span<const Example> data, const TrainOptions& options,
                  std::mt19937_64& rng);

// Argmax answer per qid; duplicate qids throw ContractError.
template <typename T>
PredictionSet predict(const Model<T>& model, std::span<const Example> data);

}  // namespace kecmrn
