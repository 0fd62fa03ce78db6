#include "kpset/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kpset {

namespace {

constexpr char kMagic[8] = {'K', 'P', 'S', 'E', 'T', 'C', 'K', 'P'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["n_slots"] = c.n_slots;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["enc_layers"] = c.enc_layers;
  j["dec_layers"] = c.dec_layers;
  j["max_src_len"] = c.max_src_len;
  j["max_tgt_len"] = c.max_tgt_len;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.n_slots = j.at("n_slots").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.enc_layers = j.at("enc_layers").get<std::size_t>();
  c.dec_layers = j.at("dec_layers").get<std::size_t>();
  c.max_src_len = j.at("max_src_len").get<std::size_t>();
  c.max_tgt_len = j.at("max_tgt_len").get<std::size_t>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const nlohmann::json& meta) {
  if (vocab.size() != model.config().vocab_size) {
    throw std::invalid_argument("vocabulary mismatch: vocabulary has " + std::to_string(vocab.size()) +
                                " tokens, model expects " + std::to_string(model.config().vocab_size));
  }
  nlohmann::ordered_json header;
  header["model"] = model_config_to_json(model.config());
  header["vocab"] = vocab.tokens();
  header["meta"] = meta;
  const std::string h = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, h.size());
  out += h;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p.value.data()[i]));
    }
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (r.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto hlen = r.get<std::uint64_t>();
  const nlohmann::json header = nlohmann::json::parse(r.take(static_cast<std::size_t>(hlen)));
  const ModelConfig config = model_config_from_json(header.at("model"));
  Vocabulary vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != config.vocab_size) {
    throw std::runtime_error("vocabulary mismatch: checkpoint vocabulary has " +
                             std::to_string(vocab.size()) + " tokens, model expects " +
                             std::to_string(config.vocab_size));
  }

  const auto count = r.get<std::uint32_t>();
  std::vector<ad::Parameter> params;
  params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ad::Parameter p;
    p.name = r.take(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    p.value.resize(rows, cols);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      p.value.data()[k] = std::bit_cast<double>(r.get<std::uint64_t>());
    }
    params.push_back(std::move(p));
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in checkpoint");
  return LoadedCheckpoint{Model(config, std::move(params)), std::move(vocab),
                          header.value("meta", nlohmann::json::object())};
}

}  // namespace kpset
