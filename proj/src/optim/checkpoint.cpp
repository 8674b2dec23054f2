#include "usmae/optim/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "usmae/errors.hpp"

namespace usmae::optim {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'U', 'S', 'M', 'K'};

template <class U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <class U>
  U get() {
    U value;
    std::memcpy(&value, take(sizeof(U)).data(), sizeof(U));
    return value;
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IoError(what_ + ": truncated checkpoint");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

const char* mode_name(vitmae::ModelMode mode) {
  return mode == vitmae::ModelMode::pretraining ? "pretraining" : "finetuning";
}

}  // namespace

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) ||
      !EVP_DigestUpdate(ctx.get(), header.data(), header.size()) ||
      !EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) ||
      !EVP_DigestFinal_ex(ctx.get(), digest, &len)) {
    throw Error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    const unsigned char c = digest[i];
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

std::string save_checkpoint(const std::filesystem::path& path, const vitmae::Model& model,
                            CheckpointMeta meta) {
  const auto params = model.parameters();
  std::string tensors;
  for (const auto& p : params) {
    if (p.name.size() > 0xffff) throw IoError("parameter name too long: " + p.name);
    put<std::uint16_t>(tensors, static_cast<std::uint16_t>(p.name.size()));
    tensors += p.name;
    put<std::uint8_t>(tensors, 0);  // f32
    put<std::uint8_t>(tensors, static_cast<std::uint8_t>(p.tensor.rank()));
    for (auto d : p.tensor.dims()) put<std::uint64_t>(tensors, d);
    const auto data = p.tensor.data();
    tensors.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  }
  meta.model = model.config();
  meta.mode = model.mode();
  meta.content_hash = git_blob_sha1(tensors);

  nlohmann::json doc = {
      {"model", vitmae::to_json(meta.model)},
      {"optim", to_json(meta.optim)},
      {"seed", meta.seed},
      {"mode", mode_name(meta.mode)},
      {"content_hash", meta.content_hash},
      {"extra", meta.extra},
  };
  const std::string text = doc.dump();

  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  out += tensors;
  out += text;
  put<std::uint64_t>(out, text.size());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
  return meta.content_hash;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  const std::string what = path.string();

  Reader r(bytes, what);
  if (r.take(4) != std::string_view(kMagic, 4)) throw IoError(what + ": not a checkpoint file");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw IoError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  if (bytes.size() < r.pos() + 8) throw IoError(what + ": truncated checkpoint");
  std::uint64_t meta_len;
  std::memcpy(&meta_len, bytes.data() + bytes.size() - 8, 8);
  if (meta_len > bytes.size() - 8 - r.pos()) throw IoError(what + ": corrupt metadata length");
  const std::size_t tensor_end = bytes.size() - 8 - meta_len;
  const std::size_t tensor_begin = r.pos();

  Checkpoint ck;
  Reader tr(std::string_view(bytes).substr(0, tensor_end), what);
  tr.take(tensor_begin);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = tr.get<std::uint16_t>();
    std::string name(tr.take(name_len));
    const auto dtype = tr.get<std::uint8_t>();
    if (dtype != 0) throw IoError(what + ": unsupported dtype code " + std::to_string(dtype));
    const auto rank = tr.get<std::uint8_t>();
    ndgrad::Shape dims(rank);
    for (auto& d : dims) d = tr.get<std::uint64_t>();
    const std::size_t n = ndgrad::numel(dims);
    std::vector<float> values(n);
    const auto raw = tr.take(n * sizeof(float));
    std::memcpy(values.data(), raw.data(), raw.size());
    ck.tensors.emplace(name, ndgrad::Tensor::from(std::move(dims), std::move(values)));
  }
  if (tr.pos() != tensor_end) throw IoError(what + ": unexpected bytes after tensor section");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.substr(tensor_end, meta_len));
    ck.meta.model = vitmae::model_config_from_json(doc.at("model"));
    ck.meta.optim = optim_config_from_json(doc.at("optim"));
    ck.meta.seed = doc.at("seed").get<std::uint64_t>();
    const auto mode = doc.at("mode").get<std::string>();
    if (mode != "pretraining" && mode != "finetuning") throw IoError(what + ": bad mode " + mode);
    ck.meta.mode = mode == "pretraining" ? vitmae::ModelMode::pretraining
                                         : vitmae::ModelMode::finetuning;
    ck.meta.content_hash = doc.at("content_hash").get<std::string>();
    ck.meta.extra = doc.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": bad metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(what + ": bad metadata: " + e.what());
  }
  const auto actual =
      git_blob_sha1(std::string_view(bytes).substr(tensor_begin, tensor_end - tensor_begin));
  if (actual != ck.meta.content_hash) throw IoError(what + ": content hash mismatch");
  return ck;
}

vitmae::Model Checkpoint::to_model() const {
  auto model = meta.mode == vitmae::ModelMode::pretraining
                   ? vitmae::Model::pretraining(meta.model, meta.seed)
                   : vitmae::Model::finetuning(meta.model, meta.seed);
  model.load_state_dict(tensors);
  return model;
}

}  // namespace usmae::optim
