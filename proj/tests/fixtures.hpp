#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kecmrn/example.hpp"
#include "kecmrn/metrics.hpp"

namespace kecmrn::testing {

inline const char* const kSceneText =
    "The company held a table meeting, which, as the name implies, is to discuss matters while eating. Elena's blond "
    "hair is indeed the most conspicuous one in the crowd, and Urtigera, wearing an orange cardigan, is burying her "
    "head in cutting a steak; Setwin, wearing a dark blue shirt, with a meeting card hanging on his chest, and his "
    "left hand was lifting up to get a glass of wine. On the left of Setwin, Kavelier and Agum are seriously "
    "discussing the budget for next month. Kavelier has short brown shoulder-length hair, clean and clean.";

inline Example make_example(std::string qid, std::string answer, AnswerType type,
                            std::optional<YesNo> yn = std::nullopt, std::string question = "What is shown?") {
  Example ex;
  ex.qid = std::move(qid);
  ex.image_local_path = "images/" + ex.qid + ".jpg";
  ex.text = kSceneText;
  ex.question = std::move(question);
  ex.answer = std::move(answer);
  ex.answer_type = type;
  ex.yes_or_no = yn;
  return ex;
}

inline Example suit_example() {
  return make_example("scene-q1", "Suit", AnswerType::kGenerated, std::nullopt,
                      "What type of blouse does Elena wear?");
}

struct MetricFixture {
  std::vector<Example> gold;
  PredictionSet preds;
  // Hand-computed expectations.
  double em, yn_acc, e_f1, g_f1;
  std::size_t yes_no, extracted, generated, missing;
};

// 22 gold answers. Per row: gold, prediction, EM, F1 (F1 only for E and G).
//   YN  yes/yes 1 | yes/可以 1 | yes/是的 1 | no/不是 1 | no/"yes" 0 | yes/maybe 0 |
//       no/"No." 1 | yes/没有 0                                  -> 5 of 8
//   E   Kavelier/kavelier 1,1 | 卡维利耶/卡维利耶 1,1 |
//       dark blue shirt/blue shirt 0,0.8 | the budget for next month/budget 0,1/3 |
//       塞特温/塞特 0,0.8 | steak/a glass of wine 0,0 | orange cardigan/cardigan orange 0,1
//   G   Suit/suit 1,1 | 西装外套/西装 0,2/3 | Suit/suit jacket 0,2/3 | gold/"Gold " 1,1 |
//       西装外套/西装外套。 1,1 | two/three 0,0 | brown hair/(missing) 0,0
// EM = 10/22, YN-Acc = 5/8, E-F1 = (4.6 + 1/3)/7, G-F1 = (3 + 4/3)/7 = 13/21.
inline MetricFixture metric_fixture() {
  using AT = AnswerType;
  MetricFixture f;
  auto yn = [&](const char* id, YesNo label, const char* pred) {
    f.gold.push_back(make_example(id, label == YesNo::kYes ? "yes" : "no", AT::kYesNo, label));
    f.preds[id] = pred;
  };
  auto other = [&](const char* id, AT type, const char* gold, const char* pred) {
    f.gold.push_back(make_example(id, gold, type));
    if (pred != nullptr) f.preds[id] = pred;
  };
  yn("yn1", YesNo::kYes, "yes");
  yn("yn2", YesNo::kYes, "可以");
  yn("yn3", YesNo::kYes, "是的");
  yn("yn4", YesNo::kNo, "不是");
  yn("yn5", YesNo::kNo, "yes");
  yn("yn6", YesNo::kYes, "maybe");
  yn("yn7", YesNo::kNo, "No.");
  yn("yn8", YesNo::kYes, "没有");
  other("e1", AT::kExtracted, "Kavelier", "kavelier");
  other("e2", AT::kExtracted, "卡维利耶", "卡维利耶");
  other("e3", AT::kExtracted, "dark blue shirt", "blue shirt");
  other("e4", AT::kExtracted, "the budget for next month", "budget");
  other("e5", AT::kExtracted, "塞特温", "塞特");
  other("e6", AT::kExtracted, "steak", "a glass of wine");
  other("e7", AT::kExtracted, "orange cardigan", "cardigan orange");
  other("g1", AT::kGenerated, "Suit", "suit");
  other("g2", AT::kGenerated, "西装外套", "西装");
  other("g3", AT::kGenerated, "Suit", "suit jacket");
  other("g4", AT::kGenerated, "gold", "Gold ");
  other("g5", AT::kGenerated, "西装外套", "西装外套。");
  other("g6", AT::kGenerated, "two", "three");
  other("g7", AT::kGenerated, "brown hair", nullptr);
  f.preds["stray"] = "ignored";
  f.em = 10.0 / 22.0;
  f.yn_acc = 5.0 / 8.0;
  f.e_f1 = (4.6 + 1.0 / 3.0) / 7.0;
  f.g_f1 = 13.0 / 21.0;
  f.yes_no = 8;
  f.extracted = 7;
  f.generated = 7;
  f.missing = 1;
  return f;
}

}  // namespace kecmrn::testing
