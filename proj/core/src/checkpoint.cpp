#include "hrm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"

namespace hrm {
namespace {

constexpr char kMagic[8] = {'H', 'R', 'M', 'C', 'K', 'P', 'T', '\x01'};

struct Entry {
  std::string name;
  Mat<float>* mat;
};

template <typename P>
void collect(P& p, const std::string& prefix, std::vector<Entry>& out) {
  p.for_each([&](ParamGroup, const std::string& name, Mat<float>& m) { out.push_back({prefix + name, &m}); });
}

std::vector<Entry> entries(Model<float>& model, TrainerState<float>* t) {
  std::vector<Entry> out;
  collect(model.params, "params.", out);
  out.push_back({"initial.z_high", &model.initial.z_high});
  out.push_back({"initial.z_low", &model.initial.z_low});
  if (t) {
    collect(t->optimizer.first_moment, "adam.m.", out);
    collect(t->optimizer.second_moment, "adam.v.", out);
    out.push_back({"carry.z_high", &t->carry.z_high});
    out.push_back({"carry.z_low", &t->carry.z_low});
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const TrainerState<float>* trainer, const nlohmann::ordered_json& meta) {
  // entries() only hands out pointers; nothing below writes through them.
  auto& m = const_cast<Model<float>&>(model);
  auto* t = const_cast<TrainerState<float>*>(trainer);
  const auto list = entries(m, t);

  nlohmann::ordered_json h;
  h["format_version"] = kCheckpointFormat;
  h["config"] = to_json(model.config);
  h["meta"] = meta.is_null() ? nlohmann::ordered_json::object() : meta;
  if (trainer) {
    nlohmann::ordered_json tr;
    tr["step"] = trainer->optimizer.step;
    tr["rng"] = trainer->rng.state();
    tr["cursor"] = trainer->cursor;
    tr["order"] = trainer->order;
    tr["carry_severed"] = trainer->carry.severed;
    auto& slots = tr["slots"] = nlohmann::ordered_json::array();
    for (const auto& s : trainer->slots) slots.push_back({s.example, s.segment, s.min_segments});
    h["trainer"] = std::move(tr);
  }
  auto& tensors = h["tensors"] = nlohmann::ordered_json::array();
  for (const auto& e : list) tensors.push_back({e.name, e.mat->rows(), e.mat->cols()});

  std::ostringstream os(std::ios::binary);
  const std::string header = h.dump();
  const std::uint64_t len = header.size();
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& e : list) {
    os.write(reinterpret_cast<const char*>(e.mat->data()), static_cast<std::streamsize>(e.mat->size() * sizeof(float)));
  }
  write_file_atomic(path, os.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw InputError(path.string() + " is not an hrm checkpoint");
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 30)) {
    throw InputError("corrupt checkpoint header in " + path.string());
  }
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) throw InputError("truncated checkpoint " + path.string());
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (h.value("format_version", 0) != kCheckpointFormat) throw InputError("unsupported checkpoint format");

  Checkpoint ck{Model<float>::create(config_from_json(h.at("config"))), std::nullopt,
                nlohmann::ordered_json::parse(h.value("meta", nlohmann::json::object()).dump())};
  if (h.contains("trainer")) {
    const auto& tr = h["trainer"];
    TrainerState<float> s;
    s.optimizer = OptimizerState<float>::for_params(ck.model.params);
    s.optimizer.step = tr.at("step").get<long>();
    s.rng.set_state(tr.at("rng").get<std::string>());
    s.cursor = tr.at("cursor").get<std::size_t>();
    s.order = tr.at("order").get<std::vector<std::size_t>>();
    s.carry.severed = tr.at("carry_severed").get<bool>();
    for (const auto& j : tr.at("slots")) s.slots.push_back({j.at(0).get<std::size_t>(), j.at(1).get<int>(), j.at(2).get<int>()});
    const int rows = static_cast<int>(s.slots.size()) * ck.model.config.seq_len;
    s.carry.z_high.resize(rows, ck.model.config.hidden_dim);
    s.carry.z_low.resize(rows, ck.model.config.hidden_dim);
    ck.trainer = std::move(s);
  }
  const auto list = entries(ck.model, ck.trainer ? &*ck.trainer : nullptr);
  const auto& tensors = h.at("tensors");
  if (tensors.size() != list.size()) throw InputError("checkpoint tensor list does not match its config");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& t = tensors[i];
    const auto& e = list[i];
    if (t.at(0).get<std::string>() != e.name || t.at(1).get<Eigen::Index>() != e.mat->rows() ||
        t.at(2).get<Eigen::Index>() != e.mat->cols()) {
      throw InputError("checkpoint tensor " + t.at(0).get<std::string>() + " has unexpected name or shape");
    }
    if (!in.read(reinterpret_cast<char*>(e.mat->data()), static_cast<std::streamsize>(e.mat->size() * sizeof(float)))) {
      throw InputError("truncated checkpoint " + path.string());
    }
  }
  return ck;
}

}  // namespace hrm
