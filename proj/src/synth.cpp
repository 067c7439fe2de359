#include "kecmrn/synth.hpp"

#include <array>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string_view>

#include "kecmrn/errors.hpp"
#include "kecmrn/ops.hpp"
#include "kecmrn/text.hpp"

namespace kecmrn {

namespace {

constexpr std::array<std::string_view, 10> kNames = {"Elena", "Urtigera", "Setwin", "Kavelier", "Agum",
                                                     "Marco", "Lina",     "Tomas",  "Ines",     "Oskar"};
constexpr std::array<std::string_view, 8> kHair = {"blond", "brown", "black", "red", "gray", "white", "auburn", "silver"};
constexpr std::array<std::string_view, 8> kObjects = {"umbrella", "cup",    "book",   "phone",
                                                      "bag",      "camera", "flower", "guitar"};
constexpr std::array<std::string_view, 6> kShirts = {"blue", "green", "orange", "yellow", "purple", "pink"};

// Feature layout: one-hot hair color in [0, 8), one-hot held object in [8, 16).
constexpr std::size_t kHairOffset = 0;
constexpr std::size_t kObjectOffset = kHair.size();
constexpr std::size_t kMinImageDim = kHair.size() + kObjects.size();

struct Person {
  std::size_t name, hair, object, shirt;
};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(n)));
}

// First `count` entries of a uniformly shuffled 0..n-1.
std::vector<std::size_t> sample_distinct(std::mt19937_64& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + pick(rng, n - i)]);
  pool.resize(count);
  return pool;
}

template <typename Seq>
void shuffle(std::mt19937_64& rng, Seq& items) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[pick(rng, i)]);
}

std::string lower(std::string_view s) { return canonical_answer(s); }

template <std::size_t N>
std::optional<std::size_t> lookup(const std::array<std::string_view, N>& table, std::string_view token) {
  for (std::size_t i = 0; i < N; ++i) {
    if (lower(table[i]) == token) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> argmax_block(const RegionFeatures& f, std::size_t row, std::size_t offset, std::size_t n) {
  std::optional<std::size_t> best;
  float best_v = 0.5f;
  for (std::size_t j = 0; j < n; ++j) {
    const float v = f.values[row * f.cols + offset + j];
    if (v > best_v) {
      best_v = v;
      best = j;
    }
  }
  return best;
}

}  // namespace

SynthDataset gen_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  const std::size_t total = spec.yes_no + spec.extracted + spec.generated;
  if (total == 0) throw ContractError("gen_synthetic: spec requests no questions");
  if (spec.entities_per_scene < 2 || spec.entities_per_scene > kHair.size()) {
    throw ContractError("gen_synthetic: entities_per_scene must be in [2, " + std::to_string(kHair.size()) + "]");
  }
  if (spec.image_dim < kMinImageDim) {
    throw ContractError("gen_synthetic: image_dim must be >= " + std::to_string(kMinImageDim));
  }

  std::vector<AnswerType> types;
  std::array<std::size_t, 3> left = {spec.yes_no, spec.extracted, spec.generated};
  constexpr std::array<AnswerType, 3> kOrder = {AnswerType::kYesNo, AnswerType::kExtracted, AnswerType::kGenerated};
  while (types.size() < total) {
    for (std::size_t t = 0; t < 3; ++t) {
      if (left[t] > 0) {
        --left[t];
        types.push_back(kOrder[t]);
      }
    }
  }

  std::mt19937_64 rng(seed);
  SynthDataset out;
  std::size_t yn_seen = 0;
  for (std::size_t q = 0; q < total; ++q) {
    const std::size_t n = spec.entities_per_scene;
    const auto names = sample_distinct(rng, kNames.size(), n);
    const auto hairs = sample_distinct(rng, kHair.size(), n);
    const auto objects = sample_distinct(rng, kObjects.size(), n);
    std::vector<Person> people(n);
    for (std::size_t i = 0; i < n; ++i) people[i] = Person{names[i], hairs[i], objects[i], pick(rng, kShirts.size())};

    std::vector<std::size_t> text_order(n), region_order(n);
    for (std::size_t i = 0; i < n; ++i) text_order[i] = region_order[i] = i;
    shuffle(rng, text_order);
    shuffle(rng, region_order);

    std::string text;
    for (std::size_t i : text_order) {
      const Person& p = people[i];
      if (!text.empty()) text += ' ';
      text += std::string(kNames[p.name]) + " has " + std::string(kHair[p.hair]) + " hair and wears a " +
              std::string(kShirts[p.shirt]) + " shirt.";
    }

    RegionFeatures regions{n, spec.image_dim, std::vector<float>(n * spec.image_dim, 0.0f)};
    for (std::size_t r = 0; r < n; ++r) {
      const Person& p = people[region_order[r]];
      regions.values[r * spec.image_dim + kHairOffset + p.hair] = 1.0f;
      regions.values[r * spec.image_dim + kObjectOffset + p.object] = 1.0f;
    }

    const Person& target = people[pick(rng, n)];
    Example ex;
    char id[48];
    std::snprintf(id, sizeof(id), "synth-%05zu", q);
    ex.qid = id;
    std::snprintf(id, sizeof(id), "synthetic/scene_%05zu.jpg", q);
    ex.image_local_path = id;
    ex.text = text;
    ex.answer_type = types[q];
    switch (types[q]) {
      case AnswerType::kGenerated:
        ex.question = "What is " + std::string(kNames[target.name]) + " holding?";
        ex.answer = std::string(kObjects[target.object]);
        break;
      case AnswerType::kExtracted:
        ex.question = "Who is holding the " + std::string(kObjects[target.object]) + "?";
        ex.answer = std::string(kNames[target.name]);
        break;
      case AnswerType::kYesNo: {
        const bool yes = (yn_seen++ % 2) == 0;
        std::size_t object = target.object;
        if (!yes) {
          const Person* other = &target;
          while (other == &target) other = &people[pick(rng, n)];
          object = other->object;
        }
        ex.question = "Is " + std::string(kNames[target.name]) + " holding the " + std::string(kObjects[object]) + "?";
        ex.answer = yes ? "yes" : "no";
        ex.yes_or_no = yes ? YesNo::kYes : YesNo::kNo;
        break;
      }
    }
    ex.regions = regions;
    out.features.add(FeatureRecord{ex.image_local_path, std::move(regions)});
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::optional<std::string> symbolic_answer(const Example& ex, OracleView view) {
  const bool see_text = view != OracleView::kImageOnly;
  const bool see_image = view != OracleView::kTextOnly;

  // Text facts: "<name> has <hair> hair".
  std::map<std::size_t, std::size_t> hair_of_name;
  std::set<std::size_t> names_in_text;
  const auto words = normalize_answer(ex.text);
  for (std::size_t i = 0; i + 3 < words.size(); ++i) {
    if (words[i + 1] != "has" || words[i + 3] != "hair") continue;
    const auto name = lookup(kNames, words[i]);
    const auto hair = lookup(kHair, words[i + 2]);
    if (name && hair) {
      hair_of_name[*name] = *hair;
      names_in_text.insert(*name);
    }
  }

  // Image facts: (hair, object) per region.
  std::vector<std::pair<std::size_t, std::size_t>> regions;
  const RegionFeatures& f = ex.regions;
  if (f.cols >= kMinImageDim) {
    for (std::size_t r = 0; r < f.rows; ++r) {
      const auto hair = argmax_block(f, r, kHairOffset, kHair.size());
      const auto object = argmax_block(f, r, kObjectOffset, kObjects.size());
      if (hair && object) regions.emplace_back(*hair, *object);
    }
  }

  // Candidate answers consistent with what this view can see; answer only when unique.
  std::set<std::string> candidates;
  auto object_of_hair = [&](std::size_t hair) -> std::optional<std::size_t> {
    for (const auto& [h, o] : regions)
      if (h == hair) return o;
    return std::nullopt;
  };

  const auto q = normalize_answer(ex.question);
  if (q.size() == 4 && q[0] == "what" && q[1] == "is" && q[3] == "holding") {
    const auto name = lookup(kNames, q[2]);
    if (!name) return std::nullopt;
    if (see_text && see_image) {
      const auto it = hair_of_name.find(*name);
      if (it == hair_of_name.end()) return std::nullopt;
      if (const auto o = object_of_hair(it->second)) candidates.insert(std::string(kObjects[*o]));
    } else if (see_image) {
      for (const auto& [h, o] : regions) candidates.insert(std::string(kObjects[o]));
    } else {
      for (auto o : kObjects) candidates.insert(std::string(o));
    }
  } else if (q.size() == 5 && q[0] == "who" && q[1] == "is" && q[2] == "holding" && q[3] == "the") {
    const auto object = lookup(kObjects, q[4]);
    if (!object) return std::nullopt;
    if (see_text && see_image) {
      for (const auto& [h, o] : regions) {
        if (o != *object) continue;
        for (const auto& [name, hair] : hair_of_name)
          if (hair == h) candidates.insert(std::string(kNames[name]));
      }
    } else if (see_text) {
      for (std::size_t name : names_in_text) candidates.insert(std::string(kNames[name]));
    } else {
      for (auto name : kNames) candidates.insert(std::string(name));
    }
  } else if (q.size() == 5 && q[0] == "is" && q[2] == "holding" && q[3] == "the") {
    const auto name = lookup(kNames, q[1]);
    const auto object = lookup(kObjects, q[4]);
    if (!name || !object) return std::nullopt;
    if (see_text && see_image) {
      const auto it = hair_of_name.find(*name);
      if (it == hair_of_name.end()) return std::nullopt;
      if (const auto o = object_of_hair(it->second)) candidates.insert(*o == *object ? "yes" : "no");
    } else if (see_image) {
      for (const auto& [h, o] : regions) candidates.insert(o == *object ? "yes" : "no");
    } else {
      candidates = {"yes", "no"};
    }
  }
  if (candidates.size() != 1) return std::nullopt;
  return *candidates.begin();
}

}  // namespace kecmrn
