#include "kecmrn/diagnostics.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>

#include <json.hpp>

#include "kecmrn/errors.hpp"
#include "kecmrn/model.hpp"
#include "kecmrn/synth.hpp"
#include "kecmrn/vocab.hpp"

namespace kecmrn {

namespace {

using D = double;

Tensor<D> random_leaf(Shape shape, std::mt19937_64& rng, bool trainable = true) {
  std::vector<D> v(shape_numel(shape));
  for (auto& x : v) x = 2.0 * uniform_unit(rng) - 1.0;
  Tensor<D> t(std::move(shape), std::move(v));
  if (trainable) t.set_requires_grad(true);
  return t;
}

// sum(out * R) for a fixed R drawn once per output.
class ProjectedLoss {
 public:
  explicit ProjectedLoss(std::uint64_t seed) : rng_(seed) {}
  Tensor<D> operator()(const std::vector<Tensor<D>>& outputs) {
    Tensor<D> total;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (weights_.size() <= i) weights_.push_back(random_leaf(outputs[i].shape(), rng_, false));
      const Tensor<D> term = sum(mul(outputs[i], weights_[i]));
      total = total.defined() ? add(total, term) : term;
    }
    return total;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<Tensor<D>> weights_;
};

Mask random_mask(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> keep(n, 1);
  // At most one masked position and never the first, so every row keeps a key.
  if (n > 2 && uniform_unit(rng) < 0.5) keep[1 + static_cast<std::size_t>(uniform_unit(rng) * (n - 1)) % (n - 1)] = 0;
  return Mask(std::move(keep));
}

struct Fixture {
  GradCheckSettings s;
  std::mt19937_64 rng;
  std::size_t l_t = 5, l_i = 4, l_q = 3;

  StreamBundle<D> streams(ParamList<D>& params) {
    StreamBundle<D> b;
    b.text = random_leaf(Shape{l_t, s.width}, rng);
    b.image = random_leaf(Shape{l_i, s.width}, rng);
    b.question = random_leaf(Shape{l_q, s.width}, rng);
    b.text_mask = random_mask(l_t, rng);
    b.image_mask = Mask::all(l_i);
    b.question_mask = Mask::all(l_q);
    params.push_back({"input.text", b.text});
    params.push_back({"input.image", b.image});
    params.push_back({"input.question", b.question});
    return b;
  }
};

GradCheckReport check(const std::function<Tensor<D>()>& loss, const ParamList<D>& params, const GradCheckSettings& s) {
  return finite_diff_check<D>(loss, params, s.eps, s.tolerance);
}

GradCheckReport check_unit(const std::string& unit, const GradCheckSettings& s, std::uint64_t seed) {
  Fixture f{s, std::mt19937_64(seed)};
  ProjectedLoss project(seed ^ 0x9e3779b97f4a7c15ULL);
  ParamList<D> params;
  const std::size_t d = s.width;
  const ForwardContext eval{};

  if (unit == "attention") {
    auto p = AttentionParams<D>::init(d, s.heads, f.rng);
    p.collect(params, "attn");
    Tensor<D> x = random_leaf(Shape{f.l_q, d}, f.rng);
    Tensor<D> y = random_leaf(Shape{f.l_t, d}, f.rng);
    Mask mask = random_mask(f.l_t, f.rng);
    params.push_back({"input.queries", x});
    params.push_back({"input.keys", y});
    return check([&] { return project({multi_head_attention(p, x, y, y, mask)}); }, params, s);
  }
  if (unit == "ffn") {
    auto p = FfnParams<D>::init(d, 2 * d, f.rng);
    p.collect(params, "ffn");
    Tensor<D> x = random_leaf(Shape{f.l_t, d}, f.rng);
    params.push_back({"input.x", x});
    return check([&] { return project({feed_forward(p, x)}); }, params, s);
  }
  if (unit == "sublayer") {
    auto a = AttentionSublayer<D>::init(d, s.heads, f.rng);
    auto b = FfnSublayer<D>::init(d, 2 * d, f.rng);
    a.collect(params, "attend");
    b.collect(params, "feed");
    Tensor<D> x = random_leaf(Shape{f.l_q, d}, f.rng);
    Tensor<D> y = random_leaf(Shape{f.l_t, d}, f.rng);
    Mask mask = random_mask(f.l_t, f.rng);
    params.push_back({"input.x", x});
    params.push_back({"input.context", y});
    return check([&] { return project({feed(b, attend(a, x, y, mask, eval), eval)}); }, params, s);
  }
  if (unit == "kee") {
    auto p = KeeParams<D>::init(d, s.heads, 2 * d, f.rng);
    p.collect(params, "kee");
    const auto streams = f.streams(params);
    return check(
        [&] {
          const auto out = kee_forward(p, streams, s.key_entities, eval);
          return project({out.streams.text, out.streams.image, out.streams.question, out.text_scores,
                          out.image_scores});
        },
        params, s);
  }
  if (unit == "cmr") {
    auto p = CmrParams<D>::init(d, s.heads, 2 * d, f.rng);
    p.collect(params, "cmr");
    const auto streams = f.streams(params);
    const KeyEntityIndex index{{0, 2}, {1, 3}, {0, 1, 2}};
    return check(
        [&] {
          const auto out = cmr_forward(p, streams, index, eval);
          return project({out.text, out.image, out.question});
        },
        params, s);
  }
  if (unit == "lstm") {
    const std::size_t vocab = 6, hidden = d, embed = d / 2 + 1;
    Tensor<D> embedding = random_leaf(Shape{vocab, embed}, f.rng);
    auto plain = SequenceEncoder<D>::init(embed, hidden, d, f.rng);
    auto projected = SequenceEncoder<D>::init(embed, hidden - 2, d, f.rng);
    params.push_back({"embedding", embedding});
    plain.collect(params, "plain");
    projected.collect(params, "projected");
    const std::vector<std::size_t> ids{2, 5, 2};
    return check(
        [&] {
          return project({encode_text<D>(ids, embedding, plain), encode_text<D>(ids, embedding, projected)});
        },
        params, s);
  }
  if (unit == "reduce") {
    auto p = ReduceParams<D>::init(d, f.rng);
    p.collect(params, "reduce");
    Tensor<D> x = random_leaf(Shape{f.l_t, d}, f.rng);
    Mask mask = random_mask(f.l_t, f.rng);
    params.push_back({"input.x", x});
    return check([&] { return project({attention_reduce(x, mask, p)}); }, params, s);
  }
  if (unit == "fusion") {
    auto p = FusionParams<D>::init(d, 2 * d, 5, f.rng);
    p.answer.weight = xavier_uniform<D>(2 * d, 5, f.rng);
    p.collect(params, "fusion");
    Tensor<D> t = random_leaf(Shape{d}, f.rng), i = random_leaf(Shape{d}, f.rng), q = random_leaf(Shape{d}, f.rng);
    params.push_back({"input.text", t});
    params.push_back({"input.image", i});
    params.push_back({"input.question", q});
    return check([&] { return project({fuse_and_classify(t, i, q, p)}); }, params, s);
  }
  if (unit == "model") {
    SynthSpec spec;
    spec.yes_no = 2;
    spec.extracted = 2;
    spec.generated = 2;
    spec.entities_per_scene = 2;
    const auto data = gen_synthetic(spec, seed);
    ModelConfig c = gradcheck_model_config(s, seed);
    Model<D> model(c, build_vocabularies(data.examples, 1));
    // Zero-initialized answer weights would silence every upstream gradient.
    model.params().fusion.answer.weight = xavier_uniform<D>(c.fused_dim, model.vocab().answers.size(), f.rng);
    const Example& ex = data.examples[seed % data.examples.size()];
    const auto in = model.encode(ex);
    const std::size_t target = answer_class(ex, model.vocab().answers).value();
    return check([&] { return cross_entropy(model.logits(in), target); }, model.parameters(), s);
  }
  throw ContractError("unknown gradcheck unit '" + unit + "'");
}

}  // namespace

std::vector<std::string> gradcheck_units() {
  return {"attention", "ffn", "sublayer", "kee", "cmr", "lstm", "reduce", "fusion", "model"};
}

ModelConfig gradcheck_model_config(const GradCheckSettings& s, std::uint64_t seed) {
  ModelConfig c;
  c.heads = s.heads;
  c.scale_widths(s.width);
  c.embed_dim = s.width;
  c.image_dim = SynthSpec{}.image_dim;
  c.modules = s.modules;
  c.cmr_per_module = s.cmr_per_module;
  c.key_entities = s.key_entities;
  c.dropout = 0.0;
  c.max_text_tokens = 12;
  c.max_question_tokens = 8;
  c.seed = seed;
  return c;
}

std::vector<NamedReport> run_gradcheck(const GradCheckSettings& settings, std::uint64_t seed,
                                       const std::vector<std::string>& units) {
  std::vector<NamedReport> out;
  for (const auto& unit : units) out.push_back({unit, check_unit(unit, settings, seed)});
  return out;
}

std::string to_json(const std::vector<NamedReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    auto entry = nlohmann::ordered_json::parse(to_json(r.report));
    entry["unit"] = r.unit;
    j.push_back(std::move(entry));
  }
  return j.dump(2);
}

}  // namespace kecmrn
