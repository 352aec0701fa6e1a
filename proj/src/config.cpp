#include "dad/config.hpp"

#include <fstream>
#include <set>

namespace dad {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse(s);
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + name_ + "." + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

template <class Fn>
void with_section(const json& doc, const char* name, Fn fn) {
  if (!doc.contains(name)) return;
  Section s(doc.at(name), name);
  fn(s);
  s.finish();
}

void read_network_dims(Section& s, NetworkConfig& n) {
  s.get("tokens", n.tokens);
  s.get("input_dim", n.input_dim);
  s.get("num_classes", n.num_classes);
  s.get("label_dim", n.label_dim);
  s.get("feature_dim", n.feature_dim);
  s.get("blocks", n.blocks);
  s.get("heads", n.heads);
  s.get("alpha_fine", n.alpha_fine);
  s.get("alpha_coarse", n.alpha_coarse);
  s.get("r_clip", n.r_clip);
  s.get("dropout", n.dropout);
  s.get("share_offset_tables", n.share_offset_tables);
  s.get_enum("lr_activation", n.lr_activation, parse_activation);
}

void read_ablation(Section& s, RunConfig& c) {
  s.get("assistant", c.network.assistant_enabled);
  s.get_enum("positional", c.network.positional, parse_positional);
  s.get_enum("coarse_wiring", c.network.coarse_wiring, parse_coarse_wiring);
  s.get_enum("coarse_input", c.network.coarse_input, parse_coarse_input);
  s.get_enum("loss", c.loss.variant, parse_loss_variant);
  s.get("branches", c.network.branches);
  s.get("fine_det", c.network.fine_enabled);
  s.get("coarse_det", c.network.coarse_enabled);
}

}  // namespace

RunConfig profile_defaults(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.network = desk_network_config();
    c.train = desk_train_config();
    c.synthetic.co_occurrences = {{0, 4, 0.7}, {2, 6, 0.5}};
  } else if (profile == "paper") {
    c.network = paper_network_config();
    c.train = paper_train_config();
    c.synthetic.num_videos = 40;
    c.synthetic.num_test = 8;
    c.synthetic.min_length = 256;
    c.synthetic.max_length = 400;
    c.synthetic.num_classes = 157;
    c.synthetic.feature_dim = 1024;
    c.synthetic.max_concurrency = 8;
    c.synthetic.co_occurrences = {{0, 4, 0.7}, {2, 6, 0.5}};
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk|paper)");
  }
  c.train.profile = profile;
  return c;
}

void RunConfig::validate() const {
  network.validate();
  train.validate();
  loss.validate();
  if (!(eval.threshold > 0.0 && eval.threshold < 1.0)) throw ConfigError("eval.threshold must lie in (0, 1)");
}

RunConfig parse_run_config(const json& doc, const std::string& profile, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections = {"network", "ablation", "loss",     "train",
                                                 "data",    "eval",     "synthetic"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!sections.count(it.key())) throw ConfigError("unknown config section '" + it.key() + "'");
  }
  RunConfig c = profile_defaults(profile);
  with_section(doc, "network", [&](Section& s) { read_network_dims(s, c.network); });
  with_section(doc, "ablation", [&](Section& s) { read_ablation(s, c); });
  with_section(doc, "loss", [&](Section& s) {
    s.get("gamma_plus", c.loss.gamma_plus);
    s.get("gamma_minus", c.loss.gamma_minus);
    s.get("clamp_eps", c.loss.clamp_eps);
  });
  with_section(doc, "train", [&](Section& s) {
    s.get("epochs", c.train.epochs);
    s.get("batch_size", c.train.batch_size);
    s.get("lr", c.train.lr);
    s.get("lr_decay_factor", c.train.lr_decay_factor);
    s.get("lr_decay_every", c.train.lr_decay_every);
  });
  with_section(doc, "data", [&](Section& s) {
    std::string m;
    s.get("manifest", m);
    if (!m.empty()) c.manifest = fs::path(m).is_relative() ? base_dir / m : fs::path(m);
  });
  with_section(doc, "eval", [&](Section& s) {
    s.get("taus", c.eval.taus);
    s.get("threshold", c.eval.threshold);
  });
  with_section(doc, "synthetic", [&](Section& s) {
    auto& y = c.synthetic;
    s.get("num_videos", y.num_videos);
    s.get("num_test", y.num_test);
    s.get("min_length", y.min_length);
    s.get("max_length", y.max_length);
    s.get("num_classes", y.num_classes);
    s.get("feature_dim", y.feature_dim);
    s.get("max_concurrency", y.max_concurrency);
    s.get("durations", y.durations);
    s.get("min_instances", y.min_instances);
    s.get("max_instances", y.max_instances);
    s.get("noise_sigma", y.noise_sigma);
    if (const json* pairs = s.raw("co_occurrences")) {
      y.co_occurrences.clear();
      for (const auto& p : *pairs) {
        if (!p.is_array() || p.size() != 3) {
          throw ConfigError("synthetic.co_occurrences entries must be [first, second, probability]");
        }
        y.co_occurrences.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<double>()});
      }
    }
  });
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, const std::string& profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc, profile, path.parent_path());
}

void apply_ablation(RunConfig& cfg, const json& ablation) {
  Section s(ablation, "ablation");
  read_ablation(s, cfg);
  s.finish();
  cfg.validate();
}

json network_to_json(const NetworkConfig& n) {
  return {{"tokens", n.tokens},
          {"input_dim", n.input_dim},
          {"num_classes", n.num_classes},
          {"label_dim", n.label_dim},
          {"feature_dim", n.feature_dim},
          {"blocks", n.blocks},
          {"heads", n.heads},
          {"branches", n.branches},
          {"alpha_fine", n.alpha_fine},
          {"alpha_coarse", n.alpha_coarse},
          {"r_clip", n.r_clip},
          {"dropout", n.dropout},
          {"share_offset_tables", n.share_offset_tables},
          {"lr_activation", to_string(n.lr_activation)},
          {"positional", to_string(n.positional)},
          {"coarse_wiring", to_string(n.coarse_wiring)},
          {"coarse_input", to_string(n.coarse_input)},
          {"fine_det", n.fine_enabled},
          {"coarse_det", n.coarse_enabled},
          {"assistant", n.assistant_enabled}};
}

NetworkConfig network_from_json(const json& j) {
  NetworkConfig n;
  Section s(j, "network");
  read_network_dims(s, n);
  s.get("branches", n.branches);
  s.get_enum("positional", n.positional, parse_positional);
  s.get_enum("coarse_wiring", n.coarse_wiring, parse_coarse_wiring);
  s.get_enum("coarse_input", n.coarse_input, parse_coarse_input);
  s.get("fine_det", n.fine_enabled);
  s.get("coarse_det", n.coarse_enabled);
  s.get("assistant", n.assistant_enabled);
  s.finish();
  n.validate();
  return n;
}

json RunConfig::to_json() const {
  json synth_pairs = json::array();
  for (const auto& p : synthetic.co_occurrences) synth_pairs.push_back({p.first, p.second, p.probability});
  auto net = network_to_json(network);
  json ablation = {{"assistant", network.assistant_enabled},
                   {"positional", to_string(network.positional)},
                   {"coarse_wiring", to_string(network.coarse_wiring)},
                   {"coarse_input", to_string(network.coarse_input)},
                   {"loss", to_string(loss.variant)},
                   {"branches", network.branches},
                   {"fine_det", network.fine_enabled},
                   {"coarse_det", network.coarse_enabled}};
  for (const char* k : {"assistant", "positional", "coarse_wiring", "coarse_input", "branches",
                        "fine_det", "coarse_det"}) {
    net.erase(k);
  }
  return {{"network", net},
          {"ablation", ablation},
          {"loss", {{"gamma_plus", loss.gamma_plus}, {"gamma_minus", loss.gamma_minus},
                    {"clamp_eps", loss.clamp_eps}}},
          {"train", {{"epochs", train.epochs}, {"batch_size", train.batch_size}, {"lr", train.lr},
                     {"lr_decay_factor", train.lr_decay_factor},
                     {"lr_decay_every", train.lr_decay_every}}},
          {"data", {{"manifest", manifest.string()}}},
          {"eval", {{"taus", eval.taus}, {"threshold", eval.threshold}}},
          {"synthetic", {{"num_videos", synthetic.num_videos},
                         {"num_test", synthetic.num_test},
                         {"min_length", synthetic.min_length},
                         {"max_length", synthetic.max_length},
                         {"num_classes", synthetic.num_classes},
                         {"feature_dim", synthetic.feature_dim},
                         {"max_concurrency", synthetic.max_concurrency},
                         {"durations", synthetic.durations},
                         {"min_instances", synthetic.min_instances},
                         {"max_instances", synthetic.max_instances},
                         {"co_occurrences", synth_pairs},
                         {"noise_sigma", synthetic.noise_sigma}}}};
}

}  // namespace dad
