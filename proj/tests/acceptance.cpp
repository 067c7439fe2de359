// One PASS/FAIL line per acceptance criterion. Usage: acceptance <path-to-kecmrn-cli>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "kecmrn/attention.hpp"
#include "kecmrn/binary_io.hpp"
#include "kecmrn/checkpoint.hpp"
#include "kecmrn/config.hpp"
#include "kecmrn/dataset.hpp"
#include "kecmrn/diagnostics.hpp"
#include "kecmrn/features.hpp"
#include "kecmrn/kecmr.hpp"
#include "kecmrn/metrics.hpp"
#include "kecmrn/model.hpp"
#include "kecmrn/ops.hpp"
#include "kecmrn/synth.hpp"
#include "kecmrn/train.hpp"
#include "kecmrn/vocab.hpp"

namespace {

using namespace kecmrn;
namespace fs = std::filesystem;
using D = double;
using Clock = std::chrono::steady_clock;

// Tolerances and sizes, pinned.
constexpr double kGradEps = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradSeeds = 20;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kAttentionInstances = 200;
constexpr double kRowSumTol = 1e-6;
constexpr double kShiftTol = 1e-6;
constexpr double kPermutationTol = 1e-9;
constexpr double kReductionTol = 1e-9;
constexpr std::size_t kTopKVectors = 1500;
constexpr std::size_t kMechanismInstances = 100;
constexpr double kMetricTol = 1e-12;
constexpr double kLearnTargetEm = 0.95;
constexpr std::size_t kLearnMaxEpochs = 200;
constexpr double kLearnSeconds = 300.0;
constexpr double kInitLossBand = 0.05;
constexpr std::size_t kMovingWindow = 5;
constexpr std::size_t kOracleSeeds = 10;
constexpr double kAblationFailRate = 0.9;

// Thrown by `check` with the first violated condition.
struct Violation {
  std::string what;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Violation{what};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Tensor<D> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<D> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * uniform_unit(rng);
  return Tensor<D>(std::move(shape), std::move(v));
}

std::size_t random_below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(n)) % n;
}

Tensor<D> identity(std::size_t n) {
  Tensor<D> t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
  return t;
}

// At least one position stays kept.
Mask random_mask(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> keep(n);
  for (auto& k : keep) k = uniform_unit(rng) < 0.7 ? 1 : 0;
  keep[random_below(rng, n)] = 1;
  return Mask(keep);
}

Tensor<D> permute_rows(const Tensor<D>& x, const std::vector<std::size_t>& perm) { return gather_rows(x, perm); }

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[random_below(rng, i)]);
  return p;
}

double max_abs_diff(const Tensor<D>& a, const Tensor<D>& b) {
  check(a.shape() == b.shape(), "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0;
}

bool row_bitwise_equal(const Tensor<D>& a, const Tensor<D>& b, std::size_t row) {
  const std::size_t d = a.dim(1);
  return std::memcmp(a.data().data() + row * d, b.data().data() + row * d, d * sizeof(D)) == 0;
}

std::vector<std::size_t> range(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// ---------------------------------------------------------------------------

std::string gradient_integrity() {
  const GradCheckSettings settings;  // d=8, h=2
  check(settings.width == 8 && settings.heads == 2, "settings are not d=8, h=2");
  GradCheckSettings s = settings;
  s.eps = kGradEps;
  s.tolerance = kGradTol;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_where;
  std::vector<std::string> failures;
  std::size_t reports = 0;
  for (std::uint64_t seed = 0; seed < kGradSeeds; ++seed) {
    for (const auto& r : run_gradcheck(s, seed, gradcheck_units())) {
      ++reports;
      if (r.report.max_rel_error > worst) {
        worst = r.report.max_rel_error;
        worst_where = r.unit + " seed " + std::to_string(seed);
      }
      if (!r.report.pass) failures.push_back(r.unit + "@seed" + std::to_string(seed) + "=" + fmt(r.report.max_rel_error));
    }
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  std::string detail = std::to_string(kGradSeeds) + " seeds x " + std::to_string(gradcheck_units().size()) +
                       " units, worst " + fmt(worst) + " (" + worst_where + "), " + fmt(seconds) + " s";
  check(reports == kGradSeeds * gradcheck_units().size(), "missing reports");
  if (!failures.empty()) {
    std::string list;
    for (const auto& f : failures) list += " " + f;
    throw Violation{detail + "; over tolerance " + fmt(kGradTol) + ":" + list};
  }
  check(seconds < kGradSeconds, detail + "; exceeds " + fmt(kGradSeconds) + " s");
  return detail;
}

std::string attention_invariants() {
  double worst_row = 0.0, worst_shift = 0.0, worst_perm = 0.0, worst_reduce = 0.0;
  for (std::uint64_t seed = 0; seed < kAttentionInstances; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t heads = 1 + random_below(rng, 4);
    const std::size_t d = heads * (1 + random_below(rng, 4));
    const std::size_t nq = 1 + random_below(rng, 5), nk = 1 + random_below(rng, 6);
    const auto p = AttentionParams<D>::init(d, heads, rng);
    const auto q = random_tensor(Shape{nq, d}, rng, -2, 2);
    const auto k = random_tensor(Shape{nk, d}, rng, -2, 2);
    const auto v = random_tensor(Shape{nk, d}, rng, -2, 2);
    const Mask mask = random_mask(nk, rng);

    std::vector<Tensor<D>> weights;
    const auto out = multi_head_attention(p, q, k, v, mask, &weights);
    check(weights.size() == heads, "head weight count");
    for (const auto& w : weights) {
      for (std::size_t i = 0; i < nq; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
          const D x = w.at(i * nk + j);
          check(x >= 0.0, "negative attention weight");
          check(mask.kept(j) || x == 0.0, "masked key received weight");
          total += x;
        }
        worst_row = std::max(worst_row, std::abs(total - 1.0));
      }
    }

    const auto logits = random_tensor(Shape{nq, nk}, rng, -5, 5);
    auto shifted = logits.detach();
    for (std::size_t i = 0; i < nq; ++i) {
      const double c = -50.0 + 100.0 * uniform_unit(rng);
      for (std::size_t j = 0; j < nk; ++j) shifted.mutable_data()[i * nk + j] += c;
    }
    worst_shift = std::max(worst_shift, max_abs_diff(softmax_lastdim(logits, mask), softmax_lastdim(shifted, mask)));

    const auto perm = random_permutation(nk, rng);
    std::vector<std::uint8_t> pkeep(nk);
    for (std::size_t j = 0; j < nk; ++j) pkeep[j] = mask.kept(perm[j]) ? 1 : 0;
    const auto permuted = multi_head_attention(p, q, permute_rows(k, perm), permute_rows(v, perm), Mask(pkeep));
    worst_perm = std::max(worst_perm, max_abs_diff(out, permuted));
    worst_perm = std::max(worst_perm, max_abs_diff(scaled_dot_product_attention(q, k, v, mask),
                                                   scaled_dot_product_attention(q, permute_rows(k, perm),
                                                                                permute_rows(v, perm), Mask(pkeep))));

    AttentionParams<D> single;
    single.heads = 1;
    single.head_dim = d;
    single.query = single.key = single.value = single.output = identity(d);
    worst_reduce = std::max(worst_reduce, max_abs_diff(multi_head_attention(single, q, k, v, mask),
                                                       scaled_dot_product_attention(q, k, v, mask)));
  }
  const std::string detail = std::to_string(kAttentionInstances) + " instances: row-sum " + fmt(worst_row) +
                             ", shift " + fmt(worst_shift) + ", co-permutation " + fmt(worst_perm) + ", h=1 " +
                             fmt(worst_reduce);
  check(worst_row <= kRowSumTol, detail + "; row sums off");
  check(worst_shift <= kShiftTol, detail + "; shift invariance off");
  check(worst_perm <= kPermutationTol, detail + "; co-permutation off");
  check(worst_reduce <= kReductionTol, detail + "; h=1 reduction off");
  return detail;
}

std::vector<std::size_t> sort_oracle(const std::vector<D>& scores, const Mask& mask, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (mask.kept(i)) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

StreamBundle<D> random_bundle(std::size_t lt, std::size_t li, std::size_t lq, std::size_t d, std::mt19937_64& rng) {
  StreamBundle<D> b;
  b.text = random_tensor(Shape{lt, d}, rng);
  b.image = random_tensor(Shape{li, d}, rng);
  b.question = random_tensor(Shape{lq, d}, rng);
  return b;
}

std::vector<std::size_t> random_subset(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < n; ++i)
    if (uniform_unit(rng) < 0.5) s.push_back(i);
  return s;
}

std::string kecmr_mechanism() {
  std::size_t with_ties = 0;
  for (std::uint64_t seed = 0; seed < kTopKVectors; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + random_below(rng, 12);
    std::vector<D> scores(n);
    // A coarse value grid forces ties.
    for (auto& s : scores) s = static_cast<D>(random_below(rng, seed % 2 == 0 ? 3 : 1000));
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    with_ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    const Mask mask = seed % 3 == 0 ? Mask{} : random_mask(n, rng);
    const std::size_t k = 1 + random_below(rng, n + 3);
    check(top_k_select<D>(scores, mask, k) == sort_oracle(scores, mask, k), "top-k differs from oracle at seed " +
                                                                               std::to_string(seed));
    const std::size_t kept_count = mask.empty() ? n : mask.count_kept();
    if (k >= kept_count) {
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < n; ++i)
        if (mask.kept(i)) kept.push_back(i);
      check(top_k_select<D>(scores, mask, k) == kept, "unsaturated selection at seed " + std::to_string(seed));
    }
  }
  check(with_ties >= kTopKVectors / 3, "too few tied vectors");

  std::size_t saturated = 0;
  for (std::uint64_t seed = 0; seed < kMechanismInstances; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t d = 8, lt = 1 + random_below(rng, 6), li = 1 + random_below(rng, 6), lq = 1 + random_below(rng, 4);
    const auto b = random_bundle(lt, li, lq, d, rng);

    const auto cmr = CmrParams<D>::init(d, 2, 16, rng);
    KeyEntityIndex idx{random_subset(lt, rng), random_subset(li, rng), range(lq)};
    const auto out = cmr_forward(cmr, b, idx, {});
    for (std::size_t r = 0; r < lt; ++r) {
      if (!std::binary_search(idx.text.begin(), idx.text.end(), r)) {
        check(row_bitwise_equal(out.text, b.text, r), "text row changed outside selection, seed " + std::to_string(seed));
      }
    }
    for (std::size_t r = 0; r < li; ++r) {
      if (!std::binary_search(idx.image.begin(), idx.image.end(), r)) {
        check(row_bitwise_equal(out.image, b.image, r), "image row changed outside selection, seed " +
                                                            std::to_string(seed));
      }
    }

    const auto module = KecmrParams<D>::init(d, 2, 16, 2, rng);
    const std::size_t k = 1 + random_below(rng, 7);
    const auto res = kecmr_module(module, b, k, {});
    check(res.index.question == range(lq), "question stream not fully selected, seed " + std::to_string(seed));
    const auto kee = kee_forward(module.kee, b, k, {});
    check(kee.index.question == range(lq), "KEE question stream not full, seed " + std::to_string(seed));
    check(kee.index.text.size() == std::min(k, lt) && kee.index.image.size() == std::min(k, li),
          "selection size is not min(k, length), seed " + std::to_string(seed));
    if (k >= lt && k >= li) {
      ++saturated;
      check(kee.index.text == range(lt) && kee.index.image == range(li), "saturation failed, seed " +
                                                                             std::to_string(seed));
    }
  }
  check(saturated > 0, "no saturated instance drawn");
  return std::to_string(kTopKVectors) + " top-k vectors (" + std::to_string(with_ties) + " with ties), " +
         std::to_string(kMechanismInstances) + " scatter/selection instances (" + std::to_string(saturated) +
         " saturated)";
}

std::string config_conformance() {
  const ModelConfig c;
  c.validate();
  check(c.image_dim == 2048 && c.question_dim == 512 && c.text_dim == 512 && c.fused_dim == 1024,
        "widths differ from (2048, 512, 512, 1024)");
  check(c.heads == 8 && c.head_dim == 64, "heads/head_dim differ from 8/64");
  check(c.modules == 2 && c.cmr_per_module == 2, "depth differs from 2 modules x 2 CMR layers");
  check(c.epochs == 13, "epochs differ from 13");

  // The constructed model follows the configuration.
  const std::vector<Example> tiny{testing::suit_example()};
  const Model<float> model(c, build_vocabularies(tiny, 1));
  const auto& p = model.params();
  check(p.image.projection.weight.shape() == Shape{2048, 512}, "image projection shape");
  check(p.fusion.text.weight.shape() == Shape{512, 1024}, "fusion width");
  check(p.modules.size() == 2, "module count");
  for (const auto& m : p.modules) {
    check(m.cmr.size() == 2, "CMR layer count");
    check(m.kee.text_self.attention.heads == 8 && m.kee.text_self.attention.head_dim == 64, "attention heads");
  }
  return "(2048, 512, 512, 1024), h=8, d_h=64, 2 modules x 2 CMR layers, 13 epochs";
}

std::string metric_oracle() {
  const auto f = testing::metric_fixture();
  check(f.gold.size() >= 20, "fixture has fewer than 20 pairs");
  bool english = false, chinese = false, suit = false, keyi = false, shide = false;
  std::size_t types[3] = {0, 0, 0};
  for (const auto& g : f.gold) {
    ++types[static_cast<int>(*g.answer_type)];
    const std::string pred = f.preds.count(g.qid) ? f.preds.at(g.qid) : "";
    for (const std::string& s : {*g.answer, pred}) {
      if (!s.empty() && static_cast<unsigned char>(s[0]) >= 0xE0) chinese = true;
      if (!s.empty() && std::isalpha(static_cast<unsigned char>(s[0]))) english = true;
    }
    suit |= *g.answer == "Suit";
    keyi |= pred == "可以";
    shide |= pred == "是的";
  }
  check(english && chinese, "fixture is not bilingual");
  check(types[0] > 0 && types[1] > 0 && types[2] > 0, "fixture lacks an answer type");
  check(suit && keyi && shide, "fixture lacks Suit / 可以 / 是的");

  const auto r = score_predictions(f.preds, f.gold, YnDictionary::seed());
  const std::string detail = "EM " + fmt(r.em) + " YN-Acc " + fmt(r.yn_acc) + " E-F1 " + fmt(r.e_f1) + " G-F1 " +
                             fmt(r.g_f1) + " on " + std::to_string(f.gold.size()) + " pairs";
  check(std::abs(r.em - f.em) <= kMetricTol, detail + "; EM differs");
  check(std::abs(r.yn_acc - f.yn_acc) <= kMetricTol, detail + "; YN-Acc differs");
  check(std::abs(r.e_f1 - f.e_f1) <= kMetricTol, detail + "; E-F1 differs");
  check(std::abs(r.g_f1 - f.g_f1) <= kMetricTol, detail + "; G-F1 differs");
  const std::string table = format_table(r);
  check(table.substr(0, table.find('\n')) == "EM\tYN-Acc\tE-F1\tG-F1", "table header differs");
  return detail + ", columns EM YN-Acc E-F1 G-F1";
}

std::string learnability() {
  const auto data = gen_synthetic(SynthSpec{}, 0);
  check(data.examples.size() == 32, "dataset is not 32 examples");
  ModelConfig c;
  c.heads = 4;
  c.scale_widths(32);
  c.key_entities = 2;
  c.image_dim = 16;
  c.embed_dim = 32;
  c.dropout = 0.0;
  c.learning_rate = 1e-3;
  c.lr_decay_epoch = 0;
  c.batch_size = 8;
  c.epochs = kLearnMaxEpochs;
  c.validate();
  Model<float> model(c, build_vocabularies(data.examples, 1));
  std::mt19937_64 rng(c.seed ^ 0x5deece66dULL);
  TrainOptions options;
  options.target_em = kLearnTargetEm;
  const auto t0 = Clock::now();
  const auto result = train(model, data.examples, options, rng);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  const auto& h = result.history;
  check(!h.empty(), "no epochs ran");
  const double ln_v = std::log(static_cast<double>(model.vocab().answers.size()));
  const double final_em = h.back().train_em;
  const std::string detail = "train EM " + fmt(final_em) + " at epoch " + std::to_string(h.back().epoch) + " in " +
                             fmt(seconds) + " s; init loss " + fmt(result.first_batch_loss) + " vs ln V " +
                             fmt(ln_v);
  check(final_em >= kLearnTargetEm, detail + "; EM below target");
  check(h.back().epoch <= kLearnMaxEpochs, detail + "; too many epochs");
  check(seconds < kLearnSeconds, detail + "; too slow");
  check(std::abs(result.first_batch_loss - ln_v) <= kInitLossBand * ln_v, detail + "; init loss outside band");
  for (const auto& e : h) check(std::isfinite(e.mean_loss), detail + "; non-finite loss");
  auto window_mean = [&](std::size_t end) {
    double s = 0.0;
    for (std::size_t i = end - kMovingWindow; i < end; ++i) s += h[i].mean_loss;
    return s / kMovingWindow;
  };
  for (std::size_t end = kMovingWindow + 1; end <= h.size(); ++end) {
    check(window_mean(end) <= window_mean(end - 1),
          detail + "; moving-average loss rose at epoch " + std::to_string(h[end - 1].epoch));
  }
  return detail;
}

std::string synthetic_answerability() {
  std::size_t total = 0, full = 0, text_fail = 0, image_fail = 0;
  for (std::uint64_t seed = 0; seed < kOracleSeeds; ++seed) {
    for (const auto& ex : gen_synthetic(SynthSpec{}, seed).examples) {
      ++total;
      full += symbolic_answer(ex, OracleView::kFull) == ex.answer;
      text_fail += symbolic_answer(ex, OracleView::kTextOnly) != ex.answer;
      image_fail += symbolic_answer(ex, OracleView::kImageOnly) != ex.answer;
    }
  }
  const double n = static_cast<double>(total);
  const std::string detail = std::to_string(total) + " questions: full " + fmt(full / n) + ", text-only fails " +
                             fmt(text_fail / n) + ", image-only fails " + fmt(image_fail / n);
  check(full == total, detail + "; full oracle missed");
  check(text_fail / n >= kAblationFailRate, detail + "; text-only ablation too strong");
  check(image_fail / n >= kAblationFailRate, detail + "; image-only ablation too strong");
  return detail;
}

template <typename T>
void checkpoint_forward_identity(const SynthDataset& data, const fs::path& dir) {
  ModelConfig c;
  c.heads = 2;
  c.scale_widths(8);
  c.embed_dim = 8;
  c.image_dim = 16;
  c.modules = 1;
  c.cmr_per_module = 1;
  c.key_entities = 2;
  c.epochs = 2;
  c.batch_size = 8;
  Model<T> model(c, build_vocabularies(data.examples, 1));
  std::mt19937_64 rng(1);
  train(model, data.examples, {}, rng);
  const fs::path path = dir / ("model" + std::to_string(sizeof(T) * 8) + ".ckpt");
  save_checkpoint(path, model, 2, rng);
  const auto back = load_checkpoint<T>(path);
  for (const auto& ex : data.examples) {
    check(bitwise_equal(model.logits(model.encode(ex)), back.model.logits(back.model.encode(ex))),
          "checkpoint forward differs for " + ex.qid);
  }
  check(serialize_checkpoint(back.model, back.epoch, back.rng) == read_file(path), "checkpoint re-serialization");
}

std::string round_trips(const fs::path& dir) {
  const auto data = gen_synthetic(SynthSpec{}, 4);
  std::vector<Example> examples = data.examples;
  const auto f = testing::metric_fixture();
  examples.insert(examples.end(), f.gold.begin(), f.gold.end());
  const std::string json = serialize_dataset(examples);
  const auto path = dir / "dataset.json";
  write_file(path, json);
  const auto back = load_dataset(path).examples;
  check(back.size() == examples.size(), "dataset size changed");
  for (std::size_t i = 0; i < back.size(); ++i) check(back[i].same_record(examples[i]), "record " + examples[i].qid);
  check(serialize_dataset(back) == json, "dataset re-serialization differs");

  const std::string bytes = data.features.serialize();
  data.features.write(dir / "features.vtf");
  const auto features = FeatureContainer::read(dir / "features.vtf");
  check(features.serialize() == bytes, "feature bytes differ");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& a = features.records()[i].features.values;
    const auto& b = data.features.records()[i].features.values;
    check(a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0,
          "feature values differ");
  }

  checkpoint_forward_identity<float>(data, dir);
  checkpoint_forward_identity<double>(data, dir);
  return std::to_string(examples.size()) + " records, " + std::to_string(features.size()) +
         " feature blocks, 32- and 64-bit checkpoints over " + std::to_string(data.examples.size()) + " forwards";
}

// Runs the CLI; stdout and stderr go to files under `dir`.
int run_cli(const std::string& cli, const std::string& args, const fs::path& out) {
  const std::string cmd = cli + " " + args + " >" + out.string() + " 2>" + out.string() + ".err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string determinism(const std::string& cli, const fs::path& dir) {
  check(!cli.empty() && fs::exists(cli), "CLI binary not found: " + cli);
  const std::string tiny =
      " --dims 8 --heads 2 --modules 1 --cmr 1 --k 2 --set image_dim=16 --set embed_dim=8 --set batch_size=8";
  // Each entry: name, arguments with {R} for the run directory, files compared besides stdout.
  struct Command {
    std::string name, args;
    std::vector<std::string> files;
  };
  const std::vector<Command> commands{
      {"gen-synth", "gen-synth --out {R}/synth --seed 6", {"synth/dataset.json", "synth/features.vtf"}},
      {"validate", "validate {R}/synth/dataset.json --features {R}/synth/features.vtf", {}},
      {"train",
       "train --data {R}/synth/dataset.json --features {R}/synth/features.vtf --out {R}/model.ckpt --epochs 3 "
       "--seed 11 --log {R}/log.json" + tiny,
       {"model.ckpt", "log.json"}},
      {"train-f64",
       "train --f64 --data {R}/synth/dataset.json --features {R}/synth/features.vtf --out {R}/model64.ckpt "
       "--epochs 2 --seed 11" + tiny,
       {"model64.ckpt"}},
      {"predict",
       "predict --checkpoint {R}/model.ckpt --data {R}/synth/dataset.json --features {R}/synth/features.vtf "
       "--out {R}/pred.json --seed 11",
       {"pred.json"}},
      {"score", "score --pred {R}/pred.json --gold {R}/synth/dataset.json --out {R}/score.json", {"score.json"}},
      {"gradcheck", "gradcheck --seed 3 --seeds 2 --out {R}/gc.json", {"gc.json"}},
  };
  std::vector<std::string> runs{"run_a", "run_b"};
  for (const auto& r : runs) fs::create_directories(dir / r);
  for (const auto& c : commands) {
    std::vector<std::string> outputs;
    for (const auto& r : runs) {
      std::string args = c.args;
      const std::string root = (dir / r).string();
      for (std::size_t pos; (pos = args.find("{R}")) != std::string::npos;) args.replace(pos, 3, root);
      const fs::path out = dir / r / (c.name + ".stdout");
      const int code = run_cli(cli, args, out);
      check(code == 0, c.name + " exited " + std::to_string(code) + ": " + read_file(out.string() + ".err"));
      std::string blob = read_file(out);
      // stdout may echo run-directory paths; compare with the directory name factored out.
      for (std::size_t pos; (pos = blob.find(root)) != std::string::npos;) blob.replace(pos, root.size(), "{R}");
      for (const auto& f : c.files) blob += "\n--" + f + "--\n" + read_file(dir / r / f);
      outputs.push_back(std::move(blob));
    }
    check(outputs[0] == outputs[1], c.name + " output differs between reruns");
  }
  return std::to_string(commands.size()) + " commands rerun with identical stdout and files";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path dir = fs::temp_directory_path() / "kecmrn_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"gradient-integrity", gradient_integrity},
      {"attention-invariants", attention_invariants},
      {"kecmr-mechanism", kecmr_mechanism},
      {"config-conformance", config_conformance},
      {"metric-oracle", metric_oracle},
      {"learnability", learnability},
      {"synthetic-answerability", synthetic_answerability},
      {"round-trips", [&] { return round_trips(dir); }},
      {"determinism", [&] { return determinism(cli, dir); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    std::string line;
    try {
      line = "PASS " + name + ": " + fn();
    } catch (const Violation& v) {
      line = "FAIL " + name + ": " + v.what;
      ++failed;
    } catch (const std::exception& e) {
      line = "FAIL " + name + ": exception: " + e.what();
      ++failed;
    }
    std::cout << line << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  std::error_code ec;
  fs::remove_all(dir, ec);
  return failed == 0 ? 0 : 1;
}
