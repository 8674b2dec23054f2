#include "usmae/vitmae/model.hpp"

#include <cmath>
#include <set>

#include "usmae/errors.hpp"
#include "usmae/rng.hpp"
#include "usmae/vitmae/patch.hpp"

namespace usmae::vitmae {

using ndgrad::Shape;

namespace {

constexpr double kInitStd = 0.02;

template <class T>
ndgrad::BasicTensor<T> trunc_normal(Rng& rng, Shape dims) {
  std::vector<T> v(ndgrad::numel(dims));
  for (auto& x : v) x = static_cast<T>(rng.truncated_normal(kInitStd));
  return ndgrad::BasicTensor<T>::from(std::move(dims), std::move(v), true);
}

template <class T>
Linear<T> make_linear(Rng& rng, std::size_t in, std::size_t out) {
  return {trunc_normal<T>(rng, {in, out}), ndgrad::BasicTensor<T>::zeros({out}, true)};
}

template <class T>
LayerNorm<T> make_norm(std::size_t dim) {
  return {ndgrad::BasicTensor<T>::full({dim}, T(1), true), ndgrad::BasicTensor<T>::zeros({dim}, true)};
}

template <class T>
Block<T> make_block(Rng& rng, std::size_t dim, std::size_t heads, std::size_t mlp_ratio) {
  Block<T> b;
  b.norm1 = make_norm<T>(dim);
  b.query = make_linear<T>(rng, dim, dim);
  b.key = make_linear<T>(rng, dim, dim);
  b.value = make_linear<T>(rng, dim, dim);
  b.proj = make_linear<T>(rng, dim, dim);
  b.norm2 = make_norm<T>(dim);
  b.fc1 = make_linear<T>(rng, dim, dim * mlp_ratio);
  b.fc2 = make_linear<T>(rng, dim * mlp_ratio, dim);
  b.heads = heads;
  return b;
}

template <class T>
void add_linear(std::vector<NamedParameter<T>>& out, const std::string& name, const Linear<T>& l) {
  out.push_back({name + ".weight", l.weight, true});
  out.push_back({name + ".bias", l.bias, false});
}

template <class T>
void add_norm(std::vector<NamedParameter<T>>& out, const std::string& name, const LayerNorm<T>& n) {
  out.push_back({name + ".gain", n.gain, false});
  out.push_back({name + ".bias", n.bias, false});
}

template <class T>
void add_block(std::vector<NamedParameter<T>>& out, const std::string& name, const Block<T>& b) {
  add_norm(out, name + ".norm1", b.norm1);
  add_linear(out, name + ".attn.query", b.query);
  add_linear(out, name + ".attn.key", b.key);
  add_linear(out, name + ".attn.value", b.value);
  add_linear(out, name + ".attn.proj", b.proj);
  add_norm(out, name + ".norm2", b.norm2);
  add_linear(out, name + ".mlp.fc1", b.fc1);
  add_linear(out, name + ".mlp.fc2", b.fc2);
}

template <class T>
std::vector<T> position_rows(std::size_t grid, std::size_t dim) {
  const auto table = sincos_position_table(grid, dim);
  std::vector<T> rows(dim, T(0));  // class-token row
  for (double v : table) rows.push_back(static_cast<T>(v));
  return rows;
}

// Constant [positions.size(), dim] tensor of rows from a position table.
template <class T>
ndgrad::BasicTensor<T> pick_rows(const std::vector<T>& table, std::size_t dim,
                                 std::span<const std::size_t> rows) {
  std::vector<T> out(rows.size() * dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(table.data() + rows[i] * dim, dim, out.data() + i * dim);
  }
  return ndgrad::BasicTensor<T>::from({rows.size(), dim}, std::move(out));
}

}  // namespace

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> sincos_position_table(std::size_t grid, std::size_t dim) {
  // first half of the width encodes the row, second half the column; each
  // half is [sin | cos] over dim/4 frequencies
  const std::size_t quarter = dim / 4;
  std::vector<double> table(grid * grid * dim);
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      double* row = table.data() + (r * grid + c) * dim;
      for (std::size_t i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        row[i] = std::sin(r * omega);
        row[quarter + i] = std::cos(r * omega);
        row[2 * quarter + i] = std::sin(c * omega);
        row[3 * quarter + i] = std::cos(c * omega);
      }
    }
  }
  return table;
}

template <class T>
ndgrad::BasicTensor<T> Block<T>::forward(const ndgrad::BasicTensor<T>& x, std::size_t batch,
                                         std::size_t seq, ndgrad::BasicTensor<T>* norm1_out) const {
  using namespace ndgrad;
  const auto h = norm1(x);
  if (norm1_out) *norm1_out = h.detach();
  const std::size_t head_dim = x.dim(1) / heads;
  const auto q = split_heads(query(h), batch, seq, heads);
  const auto k = split_heads(key(h), batch, seq, heads);
  const auto v = split_heads(value(h), batch, seq, heads);
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  const auto att = softmax(scale(bmm(q, k, true), inv_sqrt), 2);
  const auto attended = merge_heads(bmm(att, v), batch, seq, heads);
  const auto x1 = add(x, proj(attended));
  return add(x1, fc2(gelu(fc1(norm2(x1)))));
}

template <class T>
VitMae<T>::VitMae(const ModelConfig& cfg, ModelMode mode, std::uint64_t seed)
    : cfg_(cfg), mode_(mode) {
  cfg_.validate();
  Rng rng(derive_seed(seed, SeedLabel::init));
  const std::size_t dim = cfg_.embed_dim;
  patch_embed_ = make_linear<T>(rng, cfg_.patch_dim(), dim);
  cls_token_ = trunc_normal<T>(rng, {1, dim});
  for (std::size_t i = 0; i < cfg_.encoder_depth; ++i) {
    encoder_.push_back(make_block<T>(rng, dim, cfg_.encoder_heads, cfg_.mlp_ratio));
  }
  encoder_norm_ = make_norm<T>(dim);
  encoder_pos_ = position_rows<T>(cfg_.grid(), dim);
  decoder_pos_ = position_rows<T>(cfg_.grid(), cfg_.decoder_dim);
  if (mode_ == ModelMode::pretraining) {
    const std::size_t ddim = cfg_.decoder_dim;
    decoder_embed_ = make_linear<T>(rng, dim, ddim);
    mask_token_ = trunc_normal<T>(rng, {1, ddim});
    for (std::size_t i = 0; i < cfg_.decoder_depth; ++i) {
      decoder_.push_back(make_block<T>(rng, ddim, cfg_.decoder_heads, cfg_.mlp_ratio));
    }
    decoder_norm_ = make_norm<T>(ddim);
    decoder_pred_ = make_linear<T>(rng, ddim, cfg_.patch_dim());
  } else {
    Rng head_rng(derive_seed(seed, SeedLabel::head));
    head_ = make_linear<T>(head_rng, dim, cfg_.num_classes);
  }
}

template <class T>
VitMae<T> VitMae<T>::pretraining(const ModelConfig& cfg, std::uint64_t seed) {
  return VitMae(cfg, ModelMode::pretraining, seed);
}

template <class T>
VitMae<T> VitMae<T>::finetuning(const ModelConfig& cfg, std::uint64_t seed) {
  return VitMae(cfg, ModelMode::finetuning, seed);
}

template <class T>
void VitMae<T>::to_finetuning(std::uint64_t seed, std::size_t num_classes) {
  if (num_classes != 0) {
    if (num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
    cfg_.num_classes = num_classes;
  }
  decoder_embed_ = {};
  mask_token_ = {};
  decoder_.clear();
  decoder_norm_ = {};
  decoder_pred_ = {};
  Rng rng(derive_seed(seed, SeedLabel::head));
  head_ = make_linear<T>(rng, cfg_.embed_dim, cfg_.num_classes);
  mode_ = ModelMode::finetuning;
}

template <class T>
std::vector<NamedParameter<T>> VitMae<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  add_linear(out, "patch_embed", patch_embed_);
  out.push_back({"cls_token", cls_token_, false});
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    add_block(out, "encoder.blocks." + std::to_string(i), encoder_[i]);
  }
  add_norm(out, "encoder.norm", encoder_norm_);
  if (mode_ == ModelMode::pretraining) {
    add_linear(out, "decoder.embed", decoder_embed_);
    out.push_back({"mask_token", mask_token_, false});
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
      add_block(out, "decoder.blocks." + std::to_string(i), decoder_[i]);
    }
    add_norm(out, "decoder.norm", decoder_norm_);
    add_linear(out, "decoder.pred", decoder_pred_);
  } else {
    add_linear(out, "head", head_);
  }
  return out;
}

template <class T>
std::size_t VitMae<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <class T>
typename VitMae<T>::StateDict VitMae<T>::state_dict() const {
  StateDict out;
  for (const auto& p : parameters()) out.emplace(p.name, p.tensor.detach());
  return out;
}

template <class T>
std::vector<std::string> VitMae<T>::load_state_dict(const StateDict& state, bool strict) {
  auto params = parameters();
  if (strict) {
    std::set<std::string> names;
    for (const auto& p : params) names.insert(p.name);
    for (const auto& [name, _] : state) {
      if (!names.contains(name)) throw StateError("unexpected parameter '" + name + "' in state");
    }
    for (const auto& name : names) {
      if (!state.contains(name)) throw StateError("missing parameter '" + name + "' in state");
    }
  }
  std::vector<std::string> loaded;
  for (auto& p : params) {
    auto it = state.find(p.name);
    if (it == state.end()) continue;
    if (it->second.dims() != p.tensor.dims()) {
      throw ShapeError("parameter '" + p.name + "' has shape " +
                       ndgrad::shape_string(p.tensor.dims()) + " but state holds " +
                       ndgrad::shape_string(it->second.dims()));
    }
    std::copy(it->second.data().begin(), it->second.data().end(), p.tensor.mutable_data().begin());
    loaded.push_back(p.name);
  }
  return loaded;
}

template <class T>
void VitMae<T>::require_mode(ModelMode wanted, const char* op) const {
  if (mode_ != wanted) {
    throw StateError(std::string(op) + " requires a model in " +
                     (wanted == ModelMode::pretraining ? "pretraining" : "fine-tuning") +
                     " mode");
  }
}

template <class T>
std::vector<T> VitMae<T>::stack_patches(std::span<const Tensor> images) const {
  const std::size_t size = cfg_.image_size;
  const auto index = patch_index(size, cfg_.patch_size);
  std::vector<T> rows;
  rows.reserve(images.size() * index.size());
  for (const auto& img : images) {
    if (img.rank() != 3 || img.dim(0) != 1 || img.dim(1) != size || img.dim(2) != size) {
      throw ShapeError("model expects [1," + std::to_string(size) + "," + std::to_string(size) +
                       "] images, got " + ndgrad::shape_string(img.dims()));
    }
    const auto px = img.data();
    for (auto i : index) rows.push_back(px[i]);
  }
  return rows;
}

template <class T>
ndgrad::BasicTensor<T> VitMae<T>::encode(const Tensor& patch_rows,
                                         std::span<const std::size_t> positions,
                                         std::size_t batch, std::size_t tokens,
                                         TokenCapture<T>* capture) const {
  using namespace ndgrad;
  const std::size_t dim = cfg_.embed_dim;
  std::vector<std::size_t> pos_rows(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) pos_rows[i] = positions[i] + 1;
  auto emb = add(patch_embed_(patch_rows), pick_rows(encoder_pos_, dim, pos_rows));

  // [cls, tok_1..tok_n] per image; the class token is the last table row
  const std::size_t cls_row = batch * tokens;
  std::vector<std::size_t> order;
  order.reserve(batch * (tokens + 1));
  for (std::size_t b = 0; b < batch; ++b) {
    order.push_back(cls_row);
    for (std::size_t t = 0; t < tokens; ++t) order.push_back(b * tokens + t);
  }
  auto x = gather_rows(concat_rows(emb, cls_token_), order);
  const std::size_t seq = tokens + 1;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const bool last = i + 1 == encoder_.size();
    if (capture && last) {
      x = encoder_[i].forward(x, batch, seq, &capture->tokens);
      capture->batch = batch;
      capture->seq = seq;
    } else {
      x = encoder_[i].forward(x, batch, seq);
    }
  }
  return encoder_norm_(x);
}

template <class T>
MaeOutput<T> VitMae<T>::forward_mae_batch(std::span<const Tensor> images,
                                          std::span<const MaskPlan> plans) const {
  using namespace ndgrad;
  require_mode(ModelMode::pretraining, "forward_mae");
  if (images.empty()) throw ContractError("forward_mae: empty batch");
  if (plans.size() != images.size()) {
    throw ShapeError("forward_mae: " + std::to_string(plans.size()) + " mask plans for " +
                     std::to_string(images.size()) + " images");
  }
  const std::size_t np = cfg_.num_patches(), batch = images.size();
  const std::size_t visible = plans[0].num_visible();
  for (const auto& p : plans) {
    if (p.num_patches() != np) {
      throw ShapeError("forward_mae: mask plan covers " + std::to_string(p.num_patches()) +
                       " patches, model has " + std::to_string(np));
    }
    if (p.num_visible() != visible) {
      throw ShapeError("forward_mae: plans in one batch must hide the same number of patches");
    }
  }
  if (visible == 0) throw ContractError("forward_mae: mask hides every patch");

  const auto all_rows = stack_patches(images);
  const std::size_t pd = cfg_.patch_dim();
  const auto target = Tensor::from({batch * np, pd}, all_rows);

  std::vector<T> vis_rows;
  vis_rows.reserve(batch * visible * pd);
  std::vector<std::size_t> positions;
  positions.reserve(batch * visible);
  for (std::size_t b = 0; b < batch; ++b) {
    for (auto p : plans[b].visible_order()) {
      const T* src = all_rows.data() + (b * np + p) * pd;
      vis_rows.insert(vis_rows.end(), src, src + pd);
      positions.push_back(p);
    }
  }
  const auto encoded = encode(Tensor::from({batch * visible, pd}, std::move(vis_rows)), positions,
                              batch, visible, nullptr);

  // Restore full patch order: visible slots come from the encoder output,
  // hidden slots from the mask token (last table row).
  const std::size_t enc_seq = visible + 1;
  const std::size_t mask_row = batch * enc_seq;
  std::vector<std::size_t> order;
  order.reserve(batch * (np + 1));
  std::vector<std::size_t> slot(np);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto vis = plans[b].visible_order();
    for (std::size_t s = 0; s < vis.size(); ++s) slot[vis[s]] = s;
    order.push_back(b * enc_seq);
    for (std::size_t p = 0; p < np; ++p) {
      order.push_back(plans[b].masked[p] ? mask_row : b * enc_seq + 1 + slot[p]);
    }
  }
  auto x = gather_rows(concat_rows(decoder_embed_(encoded), mask_token_), order);
  std::vector<std::size_t> dec_pos;
  dec_pos.reserve(order.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p <= np; ++p) dec_pos.push_back(p);
  x = add(x, pick_rows(decoder_pos_, cfg_.decoder_dim, dec_pos));
  for (const auto& blk : decoder_) x = blk.forward(x, batch, np + 1);
  x = decoder_pred_(decoder_norm_(x));

  std::vector<std::size_t> patch_rows;
  patch_rows.reserve(batch * np);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < np; ++p) patch_rows.push_back(b * (np + 1) + 1 + p);
  MaeOutput<T> out;
  out.predicted_patches = gather_rows(x, patch_rows);
  out.target_patches = target;
  out.encoder_tokens = enc_seq;
  if (cfg_.loss_on_masked_only && plans[0].num_masked > 0) {
    std::vector<std::size_t> hidden;
    for (std::size_t b = 0; b < batch; ++b)
      for (auto p : plans[b].masked_order()) hidden.push_back(b * np + p);
    out.loss = mse_loss(gather_rows(out.predicted_patches, hidden), gather_rows(target, hidden));
  } else {
    out.loss = mse_loss(out.predicted_patches, target);
  }
  return out;
}

template <class T>
ndgrad::BasicTensor<T> VitMae<T>::forward_mae(const Tensor& image, const MaskPlan& plan) const {
  const Tensor images[] = {image};
  const MaskPlan plans[] = {plan};
  auto out = forward_mae_batch(images, plans);
  return unpatchify(out.predicted_patches, cfg_.image_size, cfg_.patch_size);
}

template <class T>
ndgrad::BasicTensor<T> VitMae<T>::classify_logits(std::span<const Tensor> images,
                                                  TokenCapture<T>* capture) const {
  using namespace ndgrad;
  require_mode(ModelMode::finetuning, "forward_classify");
  if (images.empty()) throw ContractError("forward_classify: empty batch");
  const std::size_t np = cfg_.num_patches(), batch = images.size();
  std::vector<std::size_t> positions;
  positions.reserve(batch * np);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < np; ++p) positions.push_back(p);
  const auto encoded = encode(Tensor::from({batch * np, cfg_.patch_dim()}, stack_patches(images)),
                              positions, batch, np, capture);
  std::vector<std::size_t> cls_rows(batch);
  for (std::size_t b = 0; b < batch; ++b) cls_rows[b] = b * (np + 1);
  return head_(gather_rows(encoded, cls_rows));
}

template <class T>
Classification<T> VitMae<T>::forward_classify(const Tensor& image) const {
  const Tensor images[] = {image};
  Classification<T> out;
  out.logits = ndgrad::reshape(classify_logits(images), {cfg_.num_classes});
  const auto probs = ndgrad::softmax(out.logits.detach(), 0);
  out.probs.assign(probs.data().begin(), probs.data().end());
  out.predicted = argmax(out.probs);
  return out;
}

template <class T>
ndgrad::BasicTensor<T> mae_loss(const ndgrad::BasicTensor<T>& reconstruction,
                                const ndgrad::BasicTensor<T>& image) {
  return ndgrad::mse_loss(reconstruction, image);
}

template class VitMae<float>;
template class VitMae<double>;
template struct Block<float>;
template struct Block<double>;
template ndgrad::BasicTensor<float> mae_loss(const ndgrad::BasicTensor<float>&,
                                             const ndgrad::BasicTensor<float>&);
template ndgrad::BasicTensor<double> mae_loss(const ndgrad::BasicTensor<double>&,
                                              const ndgrad::BasicTensor<double>&);

}  // namespace usmae::vitmae
