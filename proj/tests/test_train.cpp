#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/parallel.hpp"
#include "wavecast/synthgen.hpp"
#include "wavecast/train.hpp"
#include "wavecast/vf1.hpp"

using namespace wavecast;
using namespace wavecast::train;
using model::EncoderParams;
using model::ParamId;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wavecast_test_train_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::vector<Sample> small_dataset(std::size_t n, int history) {
  const std::vector<std::int64_t> dims{16, 16};
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Hand-set dynamics: default ranges do not fit a 16x16 grid.
    synthgen::DynamicsParams p{2.0 + 0.2 * static_cast<double>(i), 0.6, 0.3, 0.1, {0.0, 0.0}, 1.0};
    const auto frames = synthgen::render_sequence(synthgen::Kind::D2, dims, p);
    out.push_back(sample_from_frames(frames, history));
  }
  return out;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.unroll = 4;
  cfg.channels = 3;
  cfg.history = 2;
  cfg.seed = 5;
  cfg.adam.lr = 1e-2;
  return cfg;
}

void set_all(EncoderParams& p, double v) {
  for (auto id : model::all_param_ids())
    for (auto& x : p.tensor(id)) x = v;
}

}  // namespace

TEST_CASE("adam") {
  const model::EncoderShape shape{2, 2, 2};
  SUBCASE("zero gradient leaves parameters alone") {
    auto p = EncoderParams::initialized(shape, 1);
    round_to_f32(p);
    const auto before = p;
    auto st = AdamState::fresh(shape, {});
    adam_step(p, EncoderParams(shape), st);
    CHECK(p == before);
    CHECK(st.t == 1);
  }
  SUBCASE("first step closed form") {
    EncoderParams p(shape), g(shape);
    g.tensor(ParamId::HeadABias)[0] = 1.0;
    auto st = AdamState::fresh(shape, {});
    adam_step(p, g, st);
    CHECK(std::abs(p.tensor(ParamId::HeadABias)[0] - (-1e-3 / (1.0 + 1e-8))) < 1e-10);
    CHECK(p.tensor(ParamId::HeadVBias)[0] == 0.0);
  }
  SUBCASE("matches a plain double-precision reference to f32 accuracy") {
    EncoderParams p(shape), g(shape);
    set_all(p, 0.25);
    auto st = AdamState::fresh(shape, {2e-2, 0.8, 0.95, 1e-6});
    double ref = 0.25, m = 0.0, v = 0.0;
    rng::CounterStream s(3, rng::Purpose::Check, 3);
    for (int t = 1; t <= 10; ++t) {
      const double gi = s.uniform(-1, 1);
      set_all(g, gi);
      adam_step(p, g, st);
      m = 0.8 * m + 0.2 * gi;
      v = 0.95 * v + 0.05 * gi * gi;
      ref -= 2e-2 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.95, t))) + 1e-6);
    }
    CHECK(p.tensor(ParamId::Conv1Weight)[3] == doctest::Approx(ref).epsilon(1e-5));
    for (double x : st.v.tensor(ParamId::Conv2Bias)) CHECK(x >= 0.0);
  }
  SUBCASE("deterministic over ten steps") {
    auto run = [&] {
      auto p = EncoderParams::initialized(shape, 4);
      auto st = AdamState::fresh(shape, {});
      rng::CounterStream s(8, rng::Purpose::Check, 8);
      for (int t = 0; t < 10; ++t) {
        EncoderParams g(shape);
        for (auto id : model::all_param_ids())
          for (auto& x : g.tensor(id)) x = s.normal();
        adam_step(p, g, st);
      }
      return p;
    };
    CHECK(run() == run());
  }
  SUBCASE("shape mismatch") {
    EncoderParams p(shape);
    auto st = AdamState::fresh(shape, {});
    CHECK_THROWS_AS(adam_step(p, EncoderParams(model::EncoderShape{2, 3, 2}), st), ArgumentError);
  }
}

TEST_CASE("epoch order") {
  const auto a = epoch_order(1, 1, 50);
  CHECK(a == epoch_order(1, 1, 50));
  CHECK(a != epoch_order(1, 2, 50));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("sample framing") {
  std::vector<RealField> frames;
  for (int t = 0; t < 6; ++t) frames.push_back(RealField(GridSpec{4, 4}, t));
  const auto s = sample_from_frames(frames, 5);
  REQUIRE(s.history.size() == 5);
  CHECK(s.history[0][0] == 0.0);
  CHECK(s.history[4][0] == 4.0);
  CHECK(s.target[0] == 5.0);
  CHECK(sample_from_frames(frames, 2).history[0][0] == 3.0);
  CHECK_THROWS_AS(sample_from_frames(frames, 6), ArgumentError);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const auto data = small_dataset(3, 2);
  const auto cfg = tiny_config();
  const auto st = initial_state(2, cfg);
  const std::vector<std::size_t> batch{2, 0, 1};
  const auto res = batch_gradient(data, batch, st.params, cfg);
  physics::EvolutionConfig evo;
  evo.unroll_steps = cfg.unroll;
  EncoderParams sum(st.params.shape());
  double loss = 0.0;
  for (auto i : batch) {
    const auto r = autodiff::backward(autodiff::record_forward(data[i].history, st.params, evo), st.params,
                                      data[i].target, cfg.lambda_tv);
    loss += r.loss.total / 3.0;
    for (auto id : model::all_param_ids()) {
      auto acc = sum.tensor(id);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += r.grads.tensor(id)[k] / 3.0;
    }
  }
  CHECK(res.loss.total == doctest::Approx(loss).epsilon(1e-12));
  for (auto id : model::all_param_ids())
    for (std::size_t k = 0; k < sum.tensor(id).size(); ++k)
      CHECK(res.grads.tensor(id)[k] == doctest::Approx(sum.tensor(id)[k]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("training loop") {
  const auto data = small_dataset(4, 2);
  SUBCASE("zero learning rate keeps the initialization") {
    auto cfg = tiny_config();
    cfg.epochs = 1;
    cfg.adam.lr = 0.0;
    const auto start = initial_state(2, cfg);
    const auto out = train::train(std::span(data).first(1), cfg, start);
    CHECK(out.params == start.params);
    CHECK(out.curve.size() == 1);
  }
  SUBCASE("independent of the thread count") {
    const auto cfg = tiny_config();
    set_thread_count(1);
    const auto a = train::train(data, cfg, initial_state(2, cfg));
    set_thread_count(3);
    const auto b = train::train(data, cfg, initial_state(2, cfg));
    set_thread_count(0);
    CHECK(a.params == b.params);
    for (std::size_t e = 0; e < a.curve.size(); ++e) CHECK(a.curve[e].mean_total == b.curve[e].mean_total);
  }
  SUBCASE("resume equals an uninterrupted run") {
    auto cfg = tiny_config();
    cfg.epochs = 4;
    const auto full = train::train(data, cfg, initial_state(2, cfg));
    const auto dir = scratch("resume");
    auto half_cfg = cfg;
    half_cfg.epochs = 2;
    save_checkpoint(train::train(data, half_cfg, initial_state(2, cfg)), dir / "half.ckpt");
    const auto resumed = train::train(data, cfg, load_checkpoint(dir / "half.ckpt"));
    CHECK(resumed.params == full.params);
    CHECK(resumed.adam == full.adam);
    REQUIRE(resumed.curve.size() == full.curve.size());
    for (std::size_t e = 0; e < full.curve.size(); ++e) CHECK(resumed.curve[e].mean_total == full.curve[e].mean_total);
  }
  SUBCASE("periodic checkpoints and loss curve") {
    auto cfg = tiny_config();
    cfg.epochs = 3;
    cfg.checkpoint_every = 2;
    const auto dir = scratch("cadence");
    const auto out = train::train(data, cfg, initial_state(2, cfg), {nullptr, dir});
    CHECK(std::filesystem::exists(dir / "epoch_0002.ckpt"));
    CHECK_FALSE(std::filesystem::exists(dir / "epoch_0003.ckpt"));
    write_loss_curve(dir / "loss.csv", out.curve);
    std::ifstream in(dir / "loss.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,mean_total,mean_mse,mean_tv,wall_seconds");
  }
  SUBCASE("non-finite loss keeps the last good state") {
    auto bad = data;
    bad[1].target[3] = std::numeric_limits<double>::quiet_NaN();
    auto cfg = tiny_config();
    cfg.batch_size = 4;
    const auto dir = scratch("nan");
    const auto start = initial_state(2, cfg);
    CHECK_THROWS_AS(train::train(bad, cfg, start, {nullptr, dir}), NumericError);
    CHECK(load_checkpoint(dir / "last_good.ckpt").params == start.params);
  }
  SUBCASE("invalid configuration") {
    auto cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train::train(data, cfg, initial_state(2, tiny_config())), ConfigError);
  }
}

TEST_CASE("checkpoint files") {
  const auto dir = scratch("ckpt");
  auto cfg = tiny_config();
  auto st = initial_state(2, cfg);
  st.adam.t = 7;
  st.epochs_done = 3;
  st.curve.push_back({1, 0.5, 0.4, 0.1, 2.0});
  for (auto id : model::all_param_ids()) {
    for (auto& x : st.adam.m.tensor(id)) x = 0.125;
    for (auto& x : st.adam.v.tensor(id)) x = 0.0625;
  }
  save_checkpoint(st, dir / "a.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.params == st.params);
  CHECK(back.adam == st.adam);
  CHECK(back.epochs_done == 3);
  CHECK(back.curve.size() == 1);

  auto bytes = vf1::read_file(dir / "a.ckpt");
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 9);
    vf1::write_file(dir / "t.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), FormatError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    vf1::write_file(dir / "m.ckpt", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(dir / "none.ckpt"), IoError); }
}
