#include "ctxtag/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'T', 'X', 'T', 'A', 'G', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_uint(const std::string& in, std::size_t& pos, int bytes, const std::string& where) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw DataError(where + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

Tensor copy_of(const Tensor& t) { return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end())); }

}  // namespace

Checkpoint make_checkpoint(const RunConfig& cfg, const Vocab& vocab, const std::vector<std::string>& classes,
                           const MultiTaskModel& model, double best_val_loss, std::size_t epoch) {
  Checkpoint c;
  c.config = cfg;
  c.vocab = vocab;
  c.classes = classes;
  for (const auto& [name, t] : model.parameters()) c.tensors.emplace(name, copy_of(t));
  c.tensors.emplace(kPretrainedTensor, copy_of(model.pretrained()));
  c.best_val_loss = best_val_loss;
  c.epoch = epoch;
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.tensors) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  json header = {{"format_version", kCheckpointVersion},
                 {"config", to_json(ckpt.config)},
                 {"vocab", ckpt.vocab.tokens()},
                 {"vocab_hash", ckpt.vocab.hash()},
                 {"classes", ckpt.classes},
                 {"best_val_loss", std::isnan(ckpt.best_val_loss) ? json(nullptr) : json(ckpt.best_val_loss)},
                 {"epoch", ckpt.epoch},
                 {"tensors", tensors}};
  const std::string text = header.dump();

  std::string bytes(kMagic, sizeof kMagic);
  put_u32(bytes, kCheckpointVersion);
  put_u64(bytes, text.size());
  bytes += text;
  for (const auto& [name, t] : ckpt.tensors) {
    for (double v : t.data()) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  const std::string where = path.string();

  if (bytes.size() < sizeof kMagic || bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
    throw DataError(where + ": not a checkpoint file");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = static_cast<std::uint32_t>(get_uint(bytes, pos, 4, where));
  if (version != kCheckpointVersion) {
    throw DataError(where + ": checkpoint version " + std::to_string(version) + ", this build reads version " +
                    std::to_string(kCheckpointVersion));
  }
  const std::uint64_t header_len = get_uint(bytes, pos, 8, where);
  if (pos + header_len > bytes.size()) throw DataError(where + ": truncated checkpoint");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::parse_error& e) {
    throw DataError(where + ": bad checkpoint header: " + e.what());
  }
  pos += header_len;

  Checkpoint c;
  try {
    c.config = run_config_from_json(header.at("config"));
    c.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (c.vocab.hash() != header.at("vocab_hash").get<std::string>()) {
      throw DataError(where + ": vocabulary does not match its stored hash");
    }
    c.classes = header.at("classes").get<std::vector<std::string>>();
    const json& loss = header.at("best_val_loss");
    c.best_val_loss = loss.is_null() ? std::numeric_limits<double>::quiet_NaN() : loss.get<double>();
    c.epoch = header.at("epoch").get<std::size_t>();
    for (const json& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<Shape>();
      std::vector<double> values(shape_numel(shape));
      for (double& v : values) v = std::bit_cast<double>(get_uint(bytes, pos, 8, where));
      c.tensors.emplace(name, Tensor(shape, std::move(values)));
    }
  } catch (const json::exception& e) {
    throw DataError(where + ": bad checkpoint header: " + e.what());
  } catch (const UsageError& e) {
    throw DataError(where + ": bad stored config: " + e.what());
  }
  if (pos != bytes.size()) throw DataError(where + ": trailing bytes after the tensor payload");
  return c;
}

MultiTaskModel model_from_checkpoint(const Checkpoint& ckpt) {
  auto it = ckpt.tensors.find(kPretrainedTensor);
  if (it == ckpt.tensors.end()) throw DataError("checkpoint has no pretrained embedding table");
  ModelConfig mc = ckpt.config.model;
  mc.num_classes = ckpt.classes.size();
  MultiTaskModel model = MultiTaskModel::create(mc, ckpt.config.variant, it->second, ckpt.config.seed);
  NamedTensors params = model.parameters();
  if (params.size() + 1 != ckpt.tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size() - 1) + " parameters, model has " +
                    std::to_string(params.size()));
  }
  ParameterSnapshot snap;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name == kPretrainedTensor) continue;
    auto p = params.find(name);
    if (p == params.end()) throw DataError("checkpoint parameter '" + name + "' is not in the model");
    if (p->second.shape() != t.shape()) throw DataError("checkpoint parameter '" + name + "' has the wrong shape");
    snap.emplace(name, std::vector<double>(t.data().begin(), t.data().end()));
  }
  restore(params, snap);
  return model;
}

}  // namespace ctxtag
