#pragma once

// nlohmann/json glue shared by checkpoints and run configs.

#include <initializer_list>
#include <stdexcept>
#include <string>

#include "auvlearn/svr.hpp"
#include "json.hpp"

namespace auvlearn::detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                                const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

inline json hyperparams_to_json(const Hyperparams& hp) {
  return json{{"epsilon", hp.epsilon}, {"cost", hp.cost},   {"gamma", hp.gamma},
              {"buffer_size", hp.buffer_size}, {"k", hp.k}, {"a", hp.a},
              {"b", hp.b},             {"xi", hp.xi},       {"kde_scale", hp.kde_scale}};
}

// Missing keys keep `base` values; unknown keys are errors.
inline Hyperparams hyperparams_from_json(const json& j, Hyperparams base, const std::string& where) {
  reject_unknown_keys(j, {"epsilon", "cost", "gamma", "buffer_size", "k", "a", "b", "xi", "kde_scale"},
                      where);
  if (j.contains("epsilon")) base.epsilon = j.at("epsilon").get<double>();
  if (j.contains("cost")) base.cost = j.at("cost").get<double>();
  if (j.contains("gamma")) base.gamma = j.at("gamma").get<double>();
  if (j.contains("buffer_size")) base.buffer_size = j.at("buffer_size").get<std::size_t>();
  if (j.contains("k")) base.k = j.at("k").get<double>();
  if (j.contains("a")) base.a = j.at("a").get<double>();
  if (j.contains("b")) base.b = j.at("b").get<double>();
  if (j.contains("xi")) base.xi = j.at("xi").get<double>();
  if (j.contains("kde_scale")) base.kde_scale = j.at("kde_scale").get<double>();
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
  return base;
}

}  // namespace auvlearn::detail
