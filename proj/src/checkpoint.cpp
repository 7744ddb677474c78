#include <fstream>
#include <stdexcept>

#include "auvlearn/online_learner.hpp"
#include "json_util.hpp"

namespace auvlearn {

using detail::json;

void save_checkpoint(std::ostream& out, const SupportSet& model, const Hyperparams& hp) {
  json samples = json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Sample& s = model.samples[i];
    samples.push_back({{"x", s.x}, {"y", s.y}, {"t", s.t}, {"w", model.weights[i]}});
  }
  const auto scales = model.kernel.feature_scales();
  const json doc{
      {"format", kCheckpointFormat},
      {"hyperparams", detail::hyperparams_to_json(hp)},
      {"kernel", {{"gamma", model.kernel.gamma()},
                  {"feature_scales", std::vector<double>(scales.begin(), scales.end())}}},
      {"capacity", model.capacity},
      {"bias", model.bias},
      {"samples", samples},
  };
  // nlohmann writes doubles with max_digits10, so values round-trip exactly.
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const SupportSet& model, const Hyperparams& hp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  save_checkpoint(out, model, hp);
}

Checkpoint load_checkpoint(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("load_checkpoint: ") + e.what());
  }
  detail::reject_unknown_keys(doc, {"format", "hyperparams", "kernel", "capacity", "bias", "samples"},
                              "checkpoint");
  if (doc.value("format", std::string{}) != kCheckpointFormat)
    throw std::invalid_argument("load_checkpoint: unsupported format tag");
  const Hyperparams hp = detail::hyperparams_from_json(doc.at("hyperparams"), Hyperparams{},
                                                       "checkpoint.hyperparams");
  const json& kj = doc.at("kernel");
  KernelParams kernel(kj.at("feature_scales").get<std::vector<double>>(), kj.at("gamma").get<double>());
  SupportSet model(std::move(kernel), doc.at("capacity").get<std::size_t>());
  model.bias = doc.at("bias").get<double>();
  for (const json& sj : doc.at("samples")) {
    Sample s{sj.at("x").get<std::vector<double>>(), sj.at("y").get<double>(), sj.at("t").get<double>()};
    if (s.x.size() != model.kernel.dim())
      throw std::invalid_argument("load_checkpoint: sample dimension mismatch");
    model.samples.push_back(std::move(s));
    model.weights.push_back(sj.at("w").get<double>());
  }
  return {std::move(model), hp};
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace auvlearn
