#include <cstring>

#include "wavecast/errors.hpp"
#include "wavecast/train.hpp"
#include "wavecast/vf1.hpp"

namespace wavecast::train {

using model::EncoderParams;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'W', 'V', 'C', 'K'};
constexpr int kVersion = 1;

struct Group {
  const char* name;
  EncoderParams TrainState::*params = nullptr;
  EncoderParams AdamState::*moment = nullptr;
};

constexpr Group kGroups[] = {
    {"param", &TrainState::params, nullptr},
    {"adam_m", nullptr, &AdamState::m},
    {"adam_v", nullptr, &AdamState::v},
};

EncoderParams& group_of(TrainState& s, const Group& g) { return g.params ? s.*g.params : s.adam.*g.moment; }
const EncoderParams& group_of(const TrainState& s, const Group& g) {
  return g.params ? s.*g.params : s.adam.*g.moment;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const auto& shape = state.params.shape();
  json header;
  header["format"] = "wavecast-checkpoint";
  header["version"] = kVersion;
  header["shape"] = {{"rank", shape.rank}, {"history", shape.history}, {"channels", shape.channels}};
  const auto& h = state.adam.hyper;
  header["adam"] = {{"lr", h.lr}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"eps", h.eps}, {"t", state.adam.t}};
  header["epochs_done"] = state.epochs_done;
  header["curve"] = json::array();
  for (const auto& e : state.curve) {
    header["curve"].push_back({e.epoch, e.mean_total, e.mean_mse, e.mean_tv, e.wall_seconds});
  }

  std::vector<std::uint8_t> payload;
  header["tensors"] = json::array();
  for (const auto& g : kGroups) {
    const auto& p = group_of(state, g);
    for (auto id : model::all_param_ids()) {
      const auto t = p.tensor(id);
      header["tensors"].push_back({{"group", g.name},
                                   {"name", model::param_name(id)},
                                   {"shape", p.tensor_shape(id)},
                                   {"offset", payload.size()},
                                   {"count", t.size()}});
      for (double v : t) vf1::put_f32(payload, static_cast<float>(v));
    }
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
  vf1::put_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes.insert(bytes.end(), text.begin(), text.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  vf1::write_file(path, bytes);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = vf1::read_file(path);
  const std::span<const std::uint8_t> in(bytes);
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a wavecast checkpoint");
  }
  const std::size_t header_len = vf1::get_u32(in, 4);
  if (in.size() < 8 + header_len) throw FormatError(path.string() + ": truncated checkpoint header");
  json header;
  try {
    header = json::parse(in.begin() + 8, in.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  const auto payload = in.subspan(8 + header_len);

  try {
    if (header.at("format") != "wavecast-checkpoint" || header.at("version") != kVersion) {
      throw FormatError(path.string() + ": unsupported checkpoint version");
    }
    const auto& sh = header.at("shape");
    const model::EncoderShape shape{sh.at("rank").get<int>(), sh.at("history").get<int>(),
                                    sh.at("channels").get<int>()};
    if ((shape.rank != 2 && shape.rank != 3) || shape.history < 1 || shape.channels < 1) {
      throw FormatError(path.string() + ": invalid encoder shape");
    }
    const auto& a = header.at("adam");
    TrainState s;
    s.params = EncoderParams(shape);
    s.adam = AdamState::fresh(shape, {a.at("lr").get<double>(), a.at("beta1").get<double>(),
                                      a.at("beta2").get<double>(), a.at("eps").get<double>()});
    s.adam.t = a.at("t").get<std::int64_t>();
    s.epochs_done = header.at("epochs_done").get<int>();
    for (const auto& e : header.at("curve")) {
      s.curve.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>(), e.at(3).get<double>(),
                         e.at(4).get<double>()});
    }

    std::size_t seen = 0;
    for (const auto& t : header.at("tensors")) {
      const auto group = t.at("group").get<std::string>();
      const auto name = t.at("name").get<std::string>();
      const Group* g = nullptr;
      for (const auto& cand : kGroups) {
        if (group == cand.name) g = &cand;
      }
      const model::ParamId* id = nullptr;
      const auto ids = model::all_param_ids();
      for (const auto& cand : ids) {
        if (model::param_name(cand) == name) id = &cand;
      }
      if (!g || !id) throw FormatError(path.string() + ": unknown tensor " + group + "/" + name);
      auto dst = group_of(s, *g).tensor(*id);
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (count != dst.size() || t.at("shape").get<std::vector<std::int64_t>>() != s.params.tensor_shape(*id)) {
        throw FormatError(path.string() + ": tensor " + name + " has the wrong shape");
      }
      if (offset + 4 * count > payload.size()) throw FormatError(path.string() + ": truncated checkpoint payload");
      for (std::size_t i = 0; i < count; ++i) dst[i] = vf1::get_f32(payload, offset + 4 * i);
      ++seen;
    }
    if (seen != std::size(kGroups) * model::kParamTensorCount) {
      throw FormatError(path.string() + ": checkpoint is missing tensors");
    }
    if (!s.params.all_finite()) throw FormatError(path.string() + ": non-finite parameters");
    return s;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace wavecast::train
