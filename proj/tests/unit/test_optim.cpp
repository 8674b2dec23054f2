#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/toy_data.hpp"
#include "usmae/errors.hpp"
#include "usmae/optim/adamw.hpp"
#include "usmae/optim/checkpoint.hpp"
#include "usmae/optim/train.hpp"
#include "usmae/rng.hpp"

using namespace usmae;
using namespace usmae::optim;
using ndgrad::Tensor;
using ndgrad::Tensor64;
namespace fs = std::filesystem;

namespace {

vitmae::ModelConfig tiny_config(std::size_t classes = 2) {
  vitmae::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 4;
  cfg.embed_dim = 16;
  cfg.encoder_depth = 1;
  cfg.encoder_heads = 2;
  cfg.mlp_ratio = 2;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 2;
  cfg.num_classes = classes;
  return cfg;
}

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "usmae_optim_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<vitmae::NamedParameter<double>> single(Tensor64 t, bool decay = true) {
  return {{"p", t, decay}};
}

}  // namespace

TEST_CASE("class weights") {
  const std::size_t binary[] = {404, 202};
  auto w = compute_class_weights(binary, 0);
  CHECK(w.weights[0] == doctest::Approx(2.0 / 3));
  CHECK(w.weights[1] == doctest::Approx(4.0 / 3));
  CHECK(w.fold == 0);

  const std::size_t balanced[] = {50, 50, 50};
  for (double x : compute_class_weights(balanced).weights) CHECK(x == doctest::Approx(1.0));

  const std::size_t three[] = {404, 40, 162};
  auto w3 = compute_class_weights(three);
  const double inv[] = {1.0 / 404, 1.0 / 40, 1.0 / 162};
  const double mean = (inv[0] + inv[1] + inv[2]) / 3;
  double total = 0;
  for (int k = 0; k < 3; ++k) {
    CHECK(w3.weights[k] == doctest::Approx(inv[k] / mean).epsilon(1e-12));
    total += w3.weights[k];
  }
  CHECK(total == doctest::Approx(3.0));

  const std::size_t missing[] = {10, 0, 5};
  try {
    compute_class_weights(missing, 4);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("class 1") != std::string::npos);
    CHECK(msg.find("fold 4") != std::string::npos);
  }
}

TEST_CASE("weighted cross-entropy examples") {
  const int target[] = {1};
  const double unit[] = {1.0, 1.0, 1.0};
  auto confident = Tensor64::from({1, 3}, {-50, 50, -50});
  CHECK(ndgrad::weighted_cross_entropy<double>(confident, target, unit).item() < 1e-12);
  auto uniform = Tensor64::from({1, 3}, {0.3, 0.3, 0.3});
  CHECK(ndgrad::weighted_cross_entropy<double>(uniform, target, unit).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // gradient w_t * (p - y) against central differences
  const double w[] = {0.5, 2.0, 1.0};
  auto logits = Tensor64::from({1, 3}, {0.2, -0.4, 1.1}, true);
  ndgrad::weighted_cross_entropy<double>(logits, target, w).backward();
  for (std::size_t j = 0; j < 3; ++j) {
    auto up = logits.detach(), down = logits.detach();
    up.mutable_data()[j] += 1e-6;
    down.mutable_data()[j] -= 1e-6;
    const double fd = (ndgrad::weighted_cross_entropy<double>(up, target, w).item() -
                       ndgrad::weighted_cross_entropy<double>(down, target, w).item()) /
                      2e-6;
    CHECK(std::abs(logits.grad()[j] - fd) < 1e-6);
  }
}

TEST_CASE("adamw single steps") {
  OptimConfig cfg;
  cfg.weight_decay = 0.01;
  auto p = Tensor64::from({3}, {1.0, -2.0, 0.5}, true);
  AdamW<double> opt(single(p), cfg);
  p.mutable_grad();  // zero gradient
  opt.step(0.1);
  CHECK(p[0] == doctest::Approx(1.0 * 0.999).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-2.0 * 0.999).epsilon(1e-15));

  cfg.weight_decay = 0.0;
  auto s = Tensor64::from({1}, {0.0}, true);
  AdamW<double> opt2(single(s), cfg);
  s.mutable_grad()[0] = 1.0;
  opt2.step(0.01);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
  CHECK(std::abs(s[0] - (-0.01 / (1 + 1e-8))) < 1e-12);
  CHECK(std::abs(s[0] + 0.01) < 1e-6);
}

TEST_CASE("adamw skips decay for excluded parameters") {
  OptimConfig cfg;
  auto p = Tensor64::from({1}, {1.0}, true);
  AdamW<double> opt(single(p, false), cfg);
  opt.step(0.1);
  CHECK(p[0] == 1.0);
}

TEST_CASE("adamw step size saturates at the learning rate") {
  OptimConfig cfg;
  cfg.weight_decay = 0.0;
  auto p = Tensor64::from({1}, {0.0}, true);
  AdamW<double> opt(single(p), cfg);
  const double lr = 1e-3;
  double before = 0;
  for (int i = 0; i < 10000; ++i) {
    p.mutable_grad()[0] = 0.37;
    before = p[0];
    opt.step(lr);
  }
  CHECK(std::abs(std::abs(p[0] - before) - lr) < 1e-4 * lr);
}

TEST_CASE("adamw runs are reproducible") {
  auto run = [] {
    vitmae::Model model = vitmae::Model::finetuning(tiny_config(), 1);
    auto data = testing::toy_images(8, 16, 2, 3);
    OptimConfig cfg;
    AdamW<float> opt(model.parameters(), cfg);
    for (int i = 0; i < 10; ++i) {
      ndgrad::weighted_cross_entropy<float>(model.classify_logits(data.images),
                                            std::span<const int>(data.labels),
                                            std::vector<float>{1.0f, 1.0f})
          .backward();
      opt.step(1e-3);
      opt.zero_grad();
    }
    return model.state_dict();
  };
  auto a = run(), b = run();
  for (const auto& [name, t] : a) {
    const auto& u = b.at(name);
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == u[i]);
  }
}

TEST_CASE("learning-rate schedule") {
  OptimConfig cfg;
  const std::size_t total = 1000;
  const std::size_t warm = warmup_steps(total, cfg);
  CHECK(warm == 100);
  CHECK(lr_at(0, total, cfg) == 0.0);
  CHECK(std::abs(lr_at(warm, total, cfg) - 3e-4) < 1e-9);
  CHECK(std::abs(lr_at(warm + (total - warm) / 2, total, cfg) - 1.5e-4) < 1e-9);
  CHECK(std::abs(lr_at(total, total, cfg)) < 1e-9);
  CHECK(lr_at(50, total, cfg) == doctest::Approx(1.5e-4));
  for (std::size_t s = warm + 1; s <= total; ++s) {
    REQUIRE(lr_at(s, total, cfg) <= lr_at(s - 1, total, cfg));
  }
  CHECK_THROWS_AS(lr_at(total + 1, total, cfg), ContractError);
}

TEST_CASE("global-norm clipping") {
  auto small = Tensor64::from({2}, {0.3, 0.4}, true);
  small.mutable_grad()[0] = 0.3;
  small.mutable_grad()[1] = 0.4;
  std::vector<Tensor64> a = {small};
  CHECK(clip_global_norm<double>(a, 1.0) == 1.0);
  CHECK(small.grad()[0] == 0.3);

  auto big = Tensor64::from({2}, {0, 0}, true);
  big.mutable_grad()[0] = 2.0;
  std::vector<Tensor64> b = {big};
  clip_global_norm<double>(b, 1.0);
  CHECK(big.grad()[0] == doctest::Approx(1.0));
  CHECK(big.grad()[1] == 0.0);

  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    std::vector<Tensor> ps;
    double sq = 0;
    for (int i = 0; i < 3; ++i) {
      auto x = Tensor::zeros({5}, true);
      for (auto& g : x.mutable_grad()) {
        g = static_cast<float>(rng.normal());
        sq += double(g) * g;
      }
      ps.push_back(x);
    }
    // rescale so the joint norm is 7.3
    const double s = 7.3 / std::sqrt(sq);
    for (auto& x : ps)
      for (auto& g : x.mutable_grad()) g = static_cast<float>(g * s);
    const double pre = global_grad_norm<float>(ps);
    clip_global_norm<float>(ps, 1.0);
    double post = 0;
    for (auto& x : ps)
      for (float g : x.grad()) post += double(g) * g;
    post = std::sqrt(post);
    CHECK(std::abs(post - 1.0) < 1e-6);
    CHECK(post <= pre);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto cfg = tiny_config(3);
  auto model = vitmae::Model::finetuning(cfg, 11);
  auto path = temp_path("ck.usmk");
  CheckpointMeta meta;
  meta.seed = 11;
  meta.extra = {{"note", "test"}};
  const auto hash = save_checkpoint(path, model, meta);
  CHECK(hash.size() == 40);

  auto ck = load_checkpoint(path);
  CHECK(ck.meta.model == cfg);
  CHECK(ck.meta.mode == vitmae::ModelMode::finetuning);
  CHECK(ck.meta.content_hash == hash);
  CHECK(ck.meta.extra["note"] == "test");
  auto restored = ck.to_model();
  auto data = testing::toy_images(4, 16, 3, 1);
  for (const auto& img : data.images) {
    auto a = model.forward_classify(img).logits;
    auto b = restored.forward_classify(img).logits;
    for (std::size_t i = 0; i < a.numel(); ++i) REQUIRE(a[i] == b[i]);
  }

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  CHECK(bytes.substr(0, 4) == "USMK");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);

  auto write = [&](const std::string& name, const std::string& content) {
    auto p = temp_path(name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
  };
  auto wrong_version = bytes;
  wrong_version[4] = 2;
  CHECK_THROWS_AS(load_checkpoint(write("v2.usmk", wrong_version)), IoError);
  auto corrupt = bytes;
  corrupt[100] ^= 0x55;
  CHECK_THROWS_AS(load_checkpoint(write("bad.usmk", corrupt)), IoError);
  CHECK_THROWS_AS(load_checkpoint(write("short.usmk", bytes.substr(0, 50))), IoError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("absent.usmk")), IoError);
}

TEST_CASE("git blob hash matches git's object id") {
  // git hash-object of an empty file and of "hello\n"
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("pretraining is deterministic and finite") {
  auto cfg = tiny_config();
  auto data = testing::toy_images(12, 16, 2, 5);
  OptimConfig ocfg;
  ocfg.epochs = 3;
  ocfg.batch_size = 4;
  auto run = [&] {
    auto model = vitmae::Model::pretraining(cfg, 2);
    return train_pretrain(model, data.images, ocfg, 2);
  };
  auto a = run(), b = run();
  CHECK(a.step_losses == b.step_losses);
  CHECK(a.epochs.size() == 3);
  CHECK(a.epochs.back().step == 9);
  for (double l : a.step_losses) CHECK(std::isfinite(l));
  auto model = vitmae::Model::pretraining(cfg, 2);
  CHECK_THROWS_AS(train_pretrain(model, std::span<const Tensor>(), ocfg, 1), ContractError);
}

TEST_CASE("fine-tuning keeps the best validation state") {
  auto cfg = tiny_config();
  auto train = testing::toy_images(24, 16, 2, 8);
  auto val = testing::toy_images(10, 16, 2, 9);
  OptimConfig ocfg;
  ocfg.epochs = 6;
  ocfg.batch_size = 8;
  ocfg.learning_rate = 1e-3;
  auto model = vitmae::Model::finetuning(cfg, 4);
  const std::size_t counts[] = {12, 12};
  std::vector<EpochLog> seen;
  auto res = train_finetune(model, train, val, compute_class_weights(counts), ocfg, 4,
                            [&](const EpochLog& l) { seen.push_back(l); });
  CHECK(seen.size() == 6);
  double best = 0;
  std::size_t best_epoch = 0;
  for (const auto& l : res.epochs) {
    if (*l.val_accuracy > best) {
      best = *l.val_accuracy;
      best_epoch = l.epoch;
    }
  }
  CHECK(res.best_epoch == best_epoch);
  CHECK(res.best_val_accuracy == best);
  const auto probs = predict_probs(model, val.images);
  CHECK(std::abs(accuracy(probs, val.labels, 2) - res.best_val_accuracy) < 1e-9);
  CHECK(probs == res.best_val_probs);
}

TEST_CASE("fine-tuning ties resolve to the earliest epoch") {
  auto cfg = tiny_config();
  auto data = testing::toy_images(8, 16, 2, 1);
  OptimConfig ocfg;
  ocfg.epochs = 3;
  ocfg.batch_size = 8;
  ocfg.learning_rate = 1e-30;
  ocfg.weight_decay = 1e-30;
  auto model = vitmae::Model::finetuning(cfg, 4);
  const std::size_t counts[] = {4, 4};
  auto res = train_finetune(model, data, data, compute_class_weights(counts), ocfg, 1);
  CHECK(res.best_epoch == 1);
}

TEST_CASE("fine-tuning rejects a fold without some class") {
  auto cfg = tiny_config(3);
  auto data = testing::toy_images(6, 16, 2, 1);  // labels 0 and 1 only
  auto model = vitmae::Model::finetuning(cfg, 1);
  const std::size_t counts[] = {3, 3, 3};
  CHECK_THROWS_AS(
      train_finetune(model, data, data, compute_class_weights(counts), OptimConfig{}, 1),
      ConfigError);
}

TEST_CASE("relabeling classes with permuted weights permutes the results") {
  auto cfg = tiny_config(3);
  auto train = testing::toy_images(18, 16, 3, 2);
  auto val = testing::toy_images(9, 16, 3, 3);
  // unbalanced training set so the weights matter
  train.images.resize(15);
  train.labels.resize(15);
  OptimConfig ocfg;
  ocfg.epochs = 3;
  ocfg.batch_size = 5;
  ocfg.learning_rate = 1e-3;

  const int perm[] = {2, 0, 1};  // old class -> new class
  auto relabel = [&](optim::LabeledImages s) {
    for (auto& l : s.labels) l = perm[l];
    return s;
  };
  auto model_a = vitmae::Model::finetuning(cfg, 6);
  auto model_b = vitmae::Model::finetuning(cfg, 6);
  // permute the head columns so both models start from the same function
  auto state = model_a.state_dict();
  auto hw = state.at("head.weight").detach();
  auto hb = state.at("head.bias").detach();
  const std::size_t d = cfg.embed_dim;
  auto new_w = hw.detach();
  auto new_b = hb.detach();
  for (int c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < d; ++r) new_w.mutable_data()[r * 3 + perm[c]] = hw[r * 3 + c];
    new_b.mutable_data()[perm[c]] = hb[c];
  }
  state["head.weight"] = new_w;
  state["head.bias"] = new_b;
  model_b.load_state_dict(state);

  std::size_t counts[3] = {0, 0, 0};
  for (int l : train.labels) ++counts[l];
  auto wa = compute_class_weights(counts);
  ClassWeights wb = wa;
  for (int c = 0; c < 3; ++c) wb.weights[perm[c]] = wa.weights[c];

  auto ra = train_finetune(model_a, train, val, wa, ocfg, 9);
  auto rb = train_finetune(model_b, relabel(train), relabel(val), wb, ocfg, 9);
  REQUIRE(ra.best_epoch == rb.best_epoch);
  for (std::size_t i = 0; i < val.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(ra.best_val_probs[i * 3 + c] ==
            doctest::Approx(rb.best_val_probs[i * 3 + perm[c]]).epsilon(1e-4));
    }
  }
}

TEST_CASE("grid search") {
  const double one[] = {0.1};
  const double wd[] = {0.5};
  auto r = grid_search(one, wd, [](double, double) { return 0.3; });
  CHECK(r.learning_rate == 0.1);
  CHECK(r.weight_decay == 0.5);

  const double lrs[] = {0.001, 0.0003, 0.0005, 0.00001};
  const double wds[] = {0.01, 0.05, 0.001, 0.0001};
  auto full = grid_search(lrs, wds, [](double lr, double w) { return -std::abs(lr - 0.0005) - w; });
  CHECK(full.cells.size() == 16);
  CHECK(full.learning_rate == 0.0005);
  CHECK(full.weight_decay == 0.0001);

  auto tied = grid_search(lrs, wds, [](double, double) { return 1.0; });
  CHECK(tied.learning_rate == 0.00001);
  CHECK(tied.weight_decay == 0.0001);
}
