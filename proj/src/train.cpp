#include "kecmrn/train.hpp"

#include <cmath>
#include <set>

#include "kecmrn/checkpoint.hpp"
#include "kecmrn/errors.hpp"

namespace kecmrn {

template <typename T>
Adam<T>::Adam(const ParamList<T>& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double learning_rate, double grad_divisor) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T> tensor = params_[i].tensor;
    if (!tensor.has_grad()) continue;
    const auto g = tensor.grad();
    auto w = tensor.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[j]) / grad_divisor;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      const double update = learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      w[j] = static_cast<T>(static_cast<double>(w[j]) - update);
    }
  }
}

double learning_rate_at(const ModelConfig& c, std::size_t epoch) {
  const bool decayed = c.lr_decay_epoch > 0 && epoch >= c.lr_decay_epoch;
  return decayed ? c.learning_rate * c.lr_decay_factor : c.learning_rate;
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(n)));
}

}  // namespace

template <typename T>
TrainResult train(Model<T>& model, std::span<const Example> data, const TrainOptions& options,
                  std::mt19937_64& rng) {
  if (data.empty()) throw ContractError("train: empty dataset");
  const ModelConfig& c = model.config();
  std::vector<EncodedInput<T>> inputs;
  std::vector<std::optional<std::size_t>> targets;
  TrainResult result;
  for (const Example& ex : data) {
    if (!ex.answer || !ex.answer_type) throw ContractError("train: qid " + ex.qid + " has no gold answer");
    inputs.push_back(model.encode(ex));
    targets.push_back(answer_class(ex, model.vocab().answers));
    if (!targets.back()) ++result.skipped_targets;
  }

  const ParamList<T> params = model.parameters();
  Adam<T> adam(params, c.adam_beta1, c.adam_beta2, c.adam_eps);
  const ForwardContext ctx{true, c.dropout, &rng};

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  bool first_batch = true;
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.learning_rate = learning_rate_at(c, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick(rng, i)]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t stop = std::min(order.size(), start + c.batch_size);
      zero_grads(params);
      double batch_loss = 0.0;
      std::size_t batch_count = 0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        if (!targets[i]) continue;
        Tape<T> tape;
        RecordingScope<T> scope(tape);
        const Tensor<T> loss = cross_entropy(model.logits(inputs[i], ctx), *targets[i]);
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) throw ContractError("train: non-finite loss at qid " + data[i].qid);
        tape.backward(loss);
        batch_loss += value;
        ++batch_count;
      }
      if (batch_count == 0) continue;
      if (first_batch) {
        result.first_batch_loss = batch_loss / static_cast<double>(batch_count);
        first_batch = false;
      }
      adam.step(log.learning_rate, static_cast<double>(batch_count));
      loss_sum += batch_loss;
      loss_count += batch_count;
    }
    log.mean_loss = loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count);
    log.train_em = score_predictions(predict(model, data), data, options.dict).em;
    result.history.push_back(log);
    if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, model, static_cast<std::uint32_t>(epoch), rng);
    if (options.on_epoch) options.on_epoch(log);
    if (options.target_em > 0.0 && log.train_em >= options.target_em) break;
  }
  return result;
}

template <typename T>
PredictionSet predict(const Model<T>& model, std::span<const Example> data) {
  PredictionSet out;
  for (const Example& ex : data) {
    if (out.contains(ex.qid)) throw ContractError("predict: duplicate qid " + ex.qid);
    out[ex.qid] = model.vocab().answers.display(model.predict_class(model.encode(ex)));
  }
  return out;
}

template class Adam<float>;
template class Adam<double>;
template TrainResult train(Model<float>&, std::span<const Example>, const TrainOptions&, std::mt19937_64&);
template TrainResult train(Model<double>&, std::span<const Example>, const TrainOptions&, std::mt19937_64&);
template PredictionSet predict(const Model<float>&, std::span<const Example>);
template PredictionSet predict(const Model<double>&, std::span<const Example>);

}  // namespace kecmrn
