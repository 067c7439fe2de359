#include "kecmrn/checkpoint.hpp"

#include <map>
#include <sstream>

#include "kecmrn/binary_io.hpp"
#include "kecmrn/errors.hpp"

namespace kecmrn {

namespace {

constexpr std::string_view kMagic = "KCPT";

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 rng_from_state(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream in(state);
  in >> rng;
  if (in.fail()) throw FormatError("checkpoint: unreadable RNG state");
  return rng;
}

ByteReader open(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.get_bytes(kMagic.size()) != kMagic) throw FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  return r;
}

}  // namespace

std::size_t checkpoint_scalar_bytes(std::string_view bytes) {
  ByteReader r = open(bytes);
  const auto width = r.get<std::uint8_t>();
  if (width != 4 && width != 8) throw FormatError("checkpoint: scalar width " + std::to_string(width));
  return width;
}

template <typename T>
std::string serialize_checkpoint(const Model<T>& model, std::uint32_t epoch, const std::mt19937_64& rng) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint8_t>(sizeof(T));
  w.put_string32(model.config().to_text());

  const auto& tokens = model.vocab().tokens.tokens();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) w.put_string32(t);
  const auto& answers = model.vocab().answers;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(answers.size()));
  for (std::size_t i = 0; i < answers.size(); ++i) {
    w.put_string32(answers.key(i));
    w.put_string32(answers.display(i));
  }

  w.put<std::uint32_t>(epoch);
  w.put_string32(rng_state(rng));

  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string16(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (T v : p.tensor.data()) w.put<T>(v);
  }
  return w.bytes();
}

template <typename T>
Checkpoint<T> deserialize_checkpoint(std::string_view bytes) {
  ByteReader r = open(bytes);
  const auto width = r.get<std::uint8_t>();
  if (width != sizeof(T)) {
    throw FormatError("checkpoint holds " + std::to_string(width * 8) + "-bit parameters, expected " +
                      std::to_string(sizeof(T) * 8) + "-bit");
  }
  ModelConfig config;
  try {
    config = ModelConfig::parse(r.get_string32());
    config.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }

  Vocabularies vocab;
  std::vector<std::string> tokens(r.get<std::uint32_t>());
  for (auto& t : tokens) t = r.get_string32();
  try {
    vocab.tokens = TokenVocab::from_tokens(std::move(tokens));
    const auto n_answers = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_answers; ++i) {
      std::string key = r.get_string32();
      vocab.answers.add(key, r.get_string32());
    }
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint vocabulary: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint vocabulary: ") + e.what());
  }

  const auto epoch = r.get<std::uint32_t>();
  std::mt19937_64 rng = rng_from_state(r.get_string32());

  std::map<std::string, Tensor<T>> stored;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string16();
    Shape shape(r.get<std::uint8_t>());
    for (auto& d : shape) d = r.get<std::uint32_t>();
    if (shape_numel(shape) == 0) throw FormatError("checkpoint: parameter " + name + " has an empty shape");
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) v = r.get<T>();
    if (!stored.emplace(name, Tensor<T>(std::move(shape), std::move(values))).second) {
      throw FormatError("checkpoint: duplicate parameter " + name);
    }
  }
  r.expect_end();

  Model<T> model(config, std::move(vocab));
  const auto params = model.parameters();
  if (params.size() != stored.size()) {
    throw FormatError("checkpoint: " + std::to_string(stored.size()) + " parameters stored, model has " +
                      std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const auto it = stored.find(p.name);
    if (it == stored.end()) throw FormatError("checkpoint: missing parameter " + p.name);
    if (it->second.shape() != p.tensor.shape()) {
      throw FormatError("checkpoint: parameter " + p.name + " has shape " + shape_string(it->second.shape()) +
                        ", model expects " + shape_string(p.tensor.shape()));
    }
    Tensor<T> target = p.tensor;
    const auto src = it->second.data();
    std::copy(src.begin(), src.end(), target.mutable_data().begin());
  }
  return Checkpoint<T>{std::move(model), epoch, rng};
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, std::uint32_t epoch,
                     const std::mt19937_64& rng) {
  write_file(path, serialize_checkpoint(model, epoch, rng));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint<T>(read_file(path));
}

#define KECMRN_INSTANTIATE_CHECKPOINT(T)                                                                  \
  template std::string serialize_checkpoint(const Model<T>&, std::uint32_t, const std::mt19937_64&);     \
  template Checkpoint<T> deserialize_checkpoint<T>(std::string_view);                                    \
  template void save_checkpoint(const std::filesystem::path&, const Model<T>&, std::uint32_t,            \
                                const std::mt19937_64&);                                                 \
  template Checkpoint<T> load_checkpoint<T>(const std::filesystem::path&);

KECMRN_INSTANTIATE_CHECKPOINT(float)
KECMRN_INSTANTIATE_CHECKPOINT(double)

#undef KECMRN_INSTANTIATE_CHECKPOINT

}  // namespace kecmrn
