#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include "fixtures.hpp"
#include "kecmrn/dataset.hpp"
#include "kecmrn/errors.hpp"
#include "kecmrn/features.hpp"
#include "kecmrn/synth.hpp"
#include "kecmrn/vocab.hpp"

namespace kecmrn {
namespace {

using testing::suit_example;
using testing::make_example;

std::string scene_record_json() {
  return std::string(R"([{"qid": "scene-q1", "image_local_path": "images/scene.jpg", "text": ")") + testing::kSceneText +
         R"(", "question": "What type of blouse does Elena wear?", "answer": "Suit", "answer_type": "G"}])";
}

std::vector<std::string> problems_of(std::string_view json, const LoadOptions& options = {}) {
  try {
    parse_dataset(json, options);
  } catch (const ValidationError& e) {
    return e.problems();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& problems, std::string_view a, std::string_view b) {
  return std::any_of(problems.begin(), problems.end(), [&](const std::string& p) {
    return p.find(a) != std::string::npos && p.find(b) != std::string::npos;
  });
}

TEST(Dataset, SceneRecordLoads) {
  const auto r = parse_dataset(scene_record_json());
  ASSERT_EQ(r.examples.size(), 1u);
  const auto& ex = r.examples[0];
  EXPECT_EQ(ex.qid, "scene-q1");
  EXPECT_EQ(ex.answer, "Suit");
  EXPECT_EQ(ex.answer_type, AnswerType::kGenerated);
  EXPECT_FALSE(ex.yes_or_no.has_value());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Dataset, YesOrNoOnExtractedAnswerRejected) {
  const auto problems = problems_of(
      R"([{"qid": "q7", "image_local_path": "a.jpg", "text": "t", "question": "q", "answer": "Elena",
           "answer_type": "E", "yes_or_no": "yes"}])");
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_TRUE(any_contains(problems, "q7", "yes_or_no"));
}

TEST(Dataset, YesNoWithoutLabelRejected) {
  const auto problems = problems_of(
      R"([{"qid": "q8", "image_local_path": "a.jpg", "text": "t", "question": "q", "answer": "yes",
           "answer_type": "YN"}])");
  EXPECT_TRUE(any_contains(problems, "q8", "yes_or_no"));
}

TEST(Dataset, EmptyTextRejected) {
  const auto problems = problems_of(
      R"([{"qid": "q9", "image_local_path": "a.jpg", "text": "", "question": "q", "answer": "x",
           "answer_type": "G"}])");
  EXPECT_TRUE(any_contains(problems, "q9", "text"));
}

TEST(Dataset, EmptyInputWarns) {
  for (const char* input : {"", "  \n", "[]"}) {
    const auto r = parse_dataset(input);
    EXPECT_TRUE(r.examples.empty()) << input;
    ASSERT_EQ(r.warnings.size(), 1u) << input;
  }
}

TEST(Dataset, DuplicateQidRejected) {
  const std::string rec = R"({"qid": "d", "image_local_path": "a.jpg", "text": "t", "question": "q", "answer": "x",
                             "answer_type": "G"})";
  EXPECT_TRUE(any_contains(problems_of("[" + rec + "," + rec + "]"), "d", "duplicate"));
}

TEST(Dataset, ObjectKeyedByQid) {
  const auto r = parse_dataset(
      R"({"k1": {"image_local_path": "a.jpg", "text": "t", "question": "q", "answer": "no", "answer_type": "YN",
                 "yes_or_no": "no"}})");
  ASSERT_EQ(r.examples.size(), 1u);
  EXPECT_EQ(r.examples[0].qid, "k1");
  EXPECT_EQ(r.examples[0].yes_or_no, YesNo::kNo);
}

TEST(Dataset, NumericQidPreservedOnRoundTrip) {
  const auto r = parse_dataset(
      R"([{"qid": 42, "image_local_path": "a.jpg", "text": "t", "question": "q", "answer": "x", "answer_type": "G"}])");
  ASSERT_EQ(r.examples.size(), 1u);
  EXPECT_EQ(r.examples[0].qid, "42");
  EXPECT_TRUE(r.examples[0].qid_numeric);
  EXPECT_NE(serialize_dataset(r.examples).find(R"("qid": 42)"), std::string::npos);
}

TEST(Dataset, AllViolationsReportedTogether) {
  const auto problems = problems_of(
      R"([{"qid": "a", "image_local_path": "x", "text": "", "question": "q", "answer": "x", "answer_type": "G"},
          {"qid": "b", "image_local_path": "x", "text": "t", "question": "q", "answer": "x", "answer_type": "Z"},
          {"qid": "c", "image_local_path": "x", "text": "t", "answer": "x", "answer_type": "G"},
          3])");
  EXPECT_EQ(problems.size(), 4u);
  EXPECT_TRUE(any_contains(problems, "qid a", "text"));
  EXPECT_TRUE(any_contains(problems, "qid b", "answer_type"));
  EXPECT_TRUE(any_contains(problems, "qid c", "question"));
  EXPECT_TRUE(any_contains(problems, "record #3", "object"));
}

TEST(Dataset, MalformedJsonIsFormatError) {
  EXPECT_THROW(parse_dataset("[{"), FormatError);
  EXPECT_THROW(parse_dataset("17"), ValidationError);
}

TEST(Dataset, SerializeParseIdentity) {
  std::vector<Example> examples{
      suit_example(),
      make_example("e1", "Kavelier", AnswerType::kExtracted),
      make_example("y1", "是的", AnswerType::kYesNo, YesNo::kYes, "维埃拉在吃牛排吗？"),
  };
  const std::string bytes = serialize_dataset(examples);
  const auto back = parse_dataset(bytes).examples;
  ASSERT_EQ(back.size(), examples.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_TRUE(back[i].same_record(examples[i])) << i;
  EXPECT_EQ(serialize_dataset(back), bytes);
}

TEST(Dataset, FileRoundTrip) {
  const std::vector<Example> examples{suit_example()};
  const auto path = std::filesystem::temp_directory_path() / "kecmrn_test_dataset.json";
  save_dataset(path, examples);
  const auto back = load_dataset(path).examples;
  ASSERT_EQ(back.size(), 1u);
  EXPECT_TRUE(back[0].same_record(examples[0]));
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), IoError);
}

TEST(Dataset, UnlabeledRecordsNeedOptIn) {
  const char* json = R"([{"qid": "u", "image_local_path": "a.jpg", "text": "t", "question": "q"}])";
  EXPECT_TRUE(any_contains(problems_of(json), "qid u", "answer"));
  const auto r = parse_dataset(json, LoadOptions{.require_answers = false});
  ASSERT_EQ(r.examples.size(), 1u);
  EXPECT_FALSE(r.examples[0].answer.has_value());
}

RegionFeatures random_regions(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<float> dist;
  RegionFeatures f{rows, cols, std::vector<float>(rows * cols)};
  for (auto& v : f.values) v = dist(rng);
  return f;
}

FeatureContainer random_container(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureContainer c;
  c.add({"images/a.jpg", random_regions(3, 16, rng)});
  c.add({"images/西装.jpg", random_regions(36, 16, rng)});
  c.add({"q-5", random_regions(1, 16, rng)});
  return c;
}

TEST(Features, BitwiseRoundTrip) {
  const auto c = random_container(3);
  const std::string bytes = c.serialize();
  const auto back = FeatureContainer::deserialize(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.records()[i].key, c.records()[i].key);
    EXPECT_EQ(back.records()[i].features, c.records()[i].features);
  }
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(Features, HeaderLayout) {
  const std::string bytes = random_container(0).serialize();
  EXPECT_EQ(bytes.substr(0, 4), "VTF1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 3u);
}

TEST(Features, CorruptBytesRejected) {
  const std::string bytes = random_container(1).serialize();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(FeatureContainer::deserialize(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(FeatureContainer::deserialize(bad_version), FormatError);
  EXPECT_THROW(FeatureContainer::deserialize(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(FeatureContainer::deserialize(bytes + '\0'), FormatError);
  EXPECT_THROW(FeatureContainer::deserialize(""), FormatError);
}

TEST(Features, LookupAndDuplicates) {
  auto c = random_container(2);
  EXPECT_NE(c.find("q-5"), nullptr);
  EXPECT_EQ(c.find("nope"), nullptr);
  EXPECT_THROW(c.at("nope"), NotFoundError);
  EXPECT_THROW(c.add({"q-5", RegionFeatures{1, 16, std::vector<float>(16)}}), ValidationError);
  EXPECT_THROW(c.add({"bad", RegionFeatures{2, 16, std::vector<float>(16)}}), ContractError);
}

TEST(Features, FileRoundTrip) {
  const auto c = random_container(4);
  const auto path = std::filesystem::temp_directory_path() / "kecmrn_test_features.vtf";
  c.write(path);
  EXPECT_EQ(FeatureContainer::read(path).serialize(), c.serialize());
  std::filesystem::remove(path);
  EXPECT_THROW(FeatureContainer::read(path), IoError);
}

TEST(Features, AttachByPathThenQid) {
  const auto c = random_container(5);
  std::vector<Example> examples{make_example("q-5", "x", AnswerType::kGenerated),
                                make_example("z", "x", AnswerType::kGenerated)};
  examples[0].image_local_path = "missing.jpg";
  examples[1].image_local_path = "images/a.jpg";
  attach_features(examples, c);
  EXPECT_EQ(examples[0].regions, c.at("q-5"));
  EXPECT_EQ(examples[1].regions, c.at("images/a.jpg"));
  std::vector<Example> orphan{make_example("orphan", "x", AnswerType::kGenerated)};
  try {
    attach_features(orphan, c);
    FAIL() << "expected NotFoundError";
  } catch (const NotFoundError& e) {
    EXPECT_NE(std::string(e.what()).find("orphan"), std::string::npos);
  }
}

TEST(Vocab, SuitAnswerAndYesNo) {
  const std::vector<Example> train{suit_example(),
                                   make_example("y", "yes", AnswerType::kYesNo, YesNo::kYes)};
  const auto v = build_vocabularies(train, 1);
  EXPECT_EQ(v.answers.key(0), "yes");
  EXPECT_EQ(v.answers.key(1), "no");
  ASSERT_TRUE(v.answers.find("Suit").has_value());
  EXPECT_EQ(v.answers.display(*v.answers.find("suit")), "Suit");
  EXPECT_EQ(answer_class(train[0], v.answers), v.answers.find("suit"));
  EXPECT_EQ(answer_class(train[1], v.answers), 0u);
  EXPECT_EQ(v.tokens.token(TokenVocab::kPad), TokenVocab::kPadToken);
  EXPECT_EQ(v.tokens.token(TokenVocab::kUnk), TokenVocab::kUnkToken);
  EXPECT_NE(v.tokens.id("elena"), TokenVocab::kUnk);
  EXPECT_EQ(v.tokens.id("zebra"), TokenVocab::kUnk);
}

TEST(Vocab, MinFrequencyAndOrder) {
  const std::vector<Example> train{make_example("a", "x", AnswerType::kGenerated, std::nullopt, "b b a"),
                                   make_example("b", "x", AnswerType::kGenerated, std::nullopt, "a c")};
  auto with_text = train;
  for (auto& ex : with_text) ex.text = "t";
  const auto v = build_vocabularies(with_text, 2);
  // a:2, b:2, t:2, c:1 -> ties broken by token.
  EXPECT_EQ(v.tokens.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "a", "b", "t"}));
  EXPECT_EQ(v.tokens.encode("a c zebra b", 3), (std::vector<std::size_t>{2, TokenVocab::kUnk, TokenVocab::kUnk}));
}

TEST(Vocab, DeterministicAndRebuildable) {
  const auto data = gen_synthetic(SynthSpec{}, 11);
  const auto a = build_vocabularies(data.examples, 1);
  const auto b = build_vocabularies(data.examples, 1);
  EXPECT_EQ(a, b);
  EXPECT_EQ(TokenVocab::from_tokens(a.tokens.tokens()), a.tokens);
}

TEST(Splits, ReleaseSizes) {
  EXPECT_EQ(SplitSizes::kTrain, 11312u);
  EXPECT_EQ(SplitSizes::kVal, 1245u);
  EXPECT_EQ(SplitSizes::kTestDev, 2189u);
  EXPECT_EQ(SplitSizes::kTest, 9035u);
}

TEST(Synth, DeterministicUnderSeed) {
  const auto a = gen_synthetic(SynthSpec{}, 7);
  const auto b = gen_synthetic(SynthSpec{}, 7);
  EXPECT_EQ(serialize_dataset(a.examples), serialize_dataset(b.examples));
  EXPECT_EQ(a.features.serialize(), b.features.serialize());
  const auto c = gen_synthetic(SynthSpec{}, 8);
  EXPECT_NE(serialize_dataset(a.examples), serialize_dataset(c.examples));
}

TEST(Synth, ValidatesAndCountsTypes) {
  const SynthSpec spec;
  const auto data = gen_synthetic(spec, 0);
  ASSERT_EQ(data.examples.size(), spec.yes_no + spec.extracted + spec.generated);
  const auto reloaded = parse_dataset(serialize_dataset(data.examples));
  EXPECT_EQ(reloaded.examples.size(), data.examples.size());
  std::size_t yn = 0, e = 0, g = 0;
  for (const auto& ex : data.examples) {
    yn += ex.answer_type == AnswerType::kYesNo;
    e += ex.answer_type == AnswerType::kExtracted;
    g += ex.answer_type == AnswerType::kGenerated;
    EXPECT_EQ(ex.regions.cols, spec.image_dim);
    EXPECT_EQ(ex.regions, data.features.at(ex.image_local_path));
  }
  EXPECT_EQ(yn, spec.yes_no);
  EXPECT_EQ(e, spec.extracted);
  EXPECT_EQ(g, spec.generated);
}

TEST(Synth, AnswerabilityOracles) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = gen_synthetic(SynthSpec{}, seed);
    std::size_t full = 0, text_fail = 0, image_fail = 0;
    for (const auto& ex : data.examples) {
      full += symbolic_answer(ex, OracleView::kFull) == ex.answer;
      text_fail += symbolic_answer(ex, OracleView::kTextOnly) != ex.answer;
      image_fail += symbolic_answer(ex, OracleView::kImageOnly) != ex.answer;
    }
    const double n = static_cast<double>(data.examples.size());
    EXPECT_EQ(full, data.examples.size()) << seed;
    EXPECT_GE(text_fail / n, 0.9) << seed;
    EXPECT_GE(image_fail / n, 0.9) << seed;
  }
}

TEST(Synth, InfeasibleSpecsThrow) {
  SynthSpec none;
  none.yes_no = none.extracted = none.generated = 0;
  EXPECT_THROW(gen_synthetic(none, 0), ContractError);
  SynthSpec lonely;
  lonely.entities_per_scene = 1;
  EXPECT_THROW(gen_synthetic(lonely, 0), ContractError);
  SynthSpec crowded;
  crowded.entities_per_scene = 9;
  EXPECT_THROW(gen_synthetic(crowded, 0), ContractError);
  SynthSpec narrow;
  narrow.image_dim = 8;
  EXPECT_THROW(gen_synthetic(narrow, 0), ContractError);
}

}  // namespace
}  // namespace kecmrn
