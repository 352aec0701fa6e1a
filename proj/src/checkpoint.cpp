#include "dad/checkpoint.hpp"

#include <algorithm>

#include "bytes.hpp"
#include "dad/config.hpp"

namespace dad {

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  bytes::Writer w;
  w.raw("DADC", 4);
  w.u16(kCheckpointVersion);
  const std::string meta = ckpt.metadata.dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.raw(meta.data(), meta.size());
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    if (e.name.size() > UINT16_MAX) throw ContractError("checkpoint: parameter name too long");
    if (shape_numel(e.shape) != e.data.size()) {
      throw DimensionError("checkpoint: entry '" + e.name + "' shape does not match its data");
    }
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u8(e.frozen ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.data) w.f32(v);
  }
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& data) {
  bytes::Reader r(data, "checkpoint");
  r.magic("DADC");
  const std::size_t version_at = r.offset();
  if (r.u16("version") != kCheckpointVersion) r.fail("unsupported version", version_at);
  Checkpoint ckpt;
  const std::uint32_t meta_len = r.u32("metadata length");
  const std::size_t meta_at = r.offset();
  const std::string meta = r.str(meta_len, "metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    r.fail(std::string("metadata is not valid JSON: ") + e.what(), meta_at + e.byte);
  }
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str(r.u16("name length"), "name");
    const std::size_t frozen_at = r.offset();
    const std::uint8_t frozen = r.u8("frozen flag");
    if (frozen > 1) r.fail("frozen flag of '" + e.name + "' is not 0/1", frozen_at);
    e.frozen = frozen == 1;
    const std::uint8_t rank = r.u8("rank");
    std::uint64_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.shape.push_back(r.u32("dimension"));
      numel *= e.shape.back();
      if (numel > r.remaining() / 4) r.fail("payload of '" + e.name + "' exceeds the file", r.offset());
    }
    e.data.resize(numel);
    for (auto& v : e.data) v = r.f32("payload");
    ckpt.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after the last entry", r.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  bytes::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(bytes::read_file(path));
}

Checkpoint capture_network(Network<float>& net) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "model";
  ckpt.metadata["network"] = network_to_json(net.config());
  for (auto* p : net.parameters()) {
    const auto d = p->value.data();
    ckpt.entries.push_back({p->name, p->frozen, p->value.shape(), {d.begin(), d.end()}});
  }
  return ckpt;
}

void restore_network(Network<float>& net, const Checkpoint& ckpt) {
  const auto params = net.parameters();
  if (params.size() != ckpt.entries.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.entries.size()) +
                      " parameters, network has " + std::to_string(params.size()));
  }
  for (auto* p : params) {
    const auto* e = ckpt.find(p->name);
    if (!e) throw ConfigError("checkpoint lacks parameter '" + p->name + "'");
    if (e->shape != p->value.shape()) {
      throw ConfigError("checkpoint parameter '" + p->name + "' has shape " + shape_str(e->shape) +
                        ", network expects " + shape_str(p->value.shape()));
    }
    std::copy(e->data.begin(), e->data.end(), p->value.mutable_data().begin());
    p->frozen = e->frozen;
  }
}

namespace {

void capture_adam(Adam& opt, const std::string& branch, Checkpoint& ckpt) {
  ckpt.metadata[branch + "_steps"] = opt.steps();
  for (auto& [name, mom] : opt.state()) {
    const Shape shape{mom.m.size()};
    ckpt.entries.push_back({branch + ".m." + name, false, shape, mom.m});
    ckpt.entries.push_back({branch + ".v." + name, false, shape, mom.v});
  }
}

void restore_adam(Adam& opt, const std::string& branch, const Checkpoint& ckpt) {
  opt.set_steps(ckpt.metadata.at(branch + "_steps").get<std::size_t>());
  for (auto& [name, mom] : opt.state()) {
    const auto* m = ckpt.find(branch + ".m." + name);
    const auto* v = ckpt.find(branch + ".v." + name);
    if (!m || !v || m->data.size() != mom.m.size() || v->data.size() != mom.v.size()) {
      throw ConfigError("optimizer state for '" + name + "' is missing or mis-shaped");
    }
    mom.m = m->data;
    mom.v = v->data;
  }
}

}  // namespace

Checkpoint capture_optimizers(Trainer& trainer) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "optimizer";
  ckpt.metadata["global_step"] = trainer.global_step();
  capture_adam(trainer.assistant_optimizer(), "assistant", ckpt);
  capture_adam(trainer.core_optimizer(), "core", ckpt);
  return ckpt;
}

void restore_optimizers(Trainer& trainer, const Checkpoint& ckpt) {
  if (ckpt.metadata.value("kind", "") != "optimizer") throw ConfigError("not an optimizer-state file");
  trainer.set_global_step(ckpt.metadata.at("global_step").get<std::size_t>());
  restore_adam(trainer.assistant_optimizer(), "assistant", ckpt);
  restore_adam(trainer.core_optimizer(), "core", ckpt);
}

}  // namespace dad
