// SPDX-License-Identifier: Apache-2.0

#include "mivc/run_config.hpp"

#include <functional>
#include <map>

#include <json.hpp>

namespace mivc {

using nlohmann::json;

void RunConfig::sync_seed() {
  synthetic.seed = seed;
  train.seed = seed;
}

RunConfig default_run_config() {
  RunConfig c;
  c.seed = 1;

  c.synthetic.n_bags = 2000;
  c.synthetic.n_min = 2;
  c.synthetic.n_max = 21;
  c.synthetic.dim = 16;
  c.synthetic.witness_rate = 0.1;
  c.synthetic.classes = 4;
  c.synthetic.center_radius = 3.0;
  c.synthetic.noise_sigma = 0.5;
  c.synthetic.distractor_sigma = 1.0;
  c.synthetic.shape = Shape2D{4, 4};
  c.synthetic.train_fraction = 0.8;

  c.train.strategy = Strategy::kAttn;
  c.train.encoder = EncoderKind::kIdentity;
  c.train.hidden = 16;
  c.train.learning_rate = 0.01;
  c.train.epochs = 30;
  c.train.batch_size = 16;
  c.train.optimizer = OptimizerKind::kAdam;
  c.train.freeze_encoder = true;
  c.train.max_images = 6;
  c.train.concat_hidden = 32;

  c.strategies = all_strategies();
  c.sync_seed();
  return c;
}

namespace {

using Setter = std::function<void(const json&)>;

void apply_section(const json& j, const std::string& section,
                   const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw UsageError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw UsageError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw UsageError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

Setter set_shape(std::optional<Shape2D>& field) {
  return [&field](const json& v) {
    if (v.is_null()) {
      field.reset();
      return;
    }
    const auto s = v.get<std::vector<std::size_t>>();
    if (s.size() != 2) throw UsageError("config: shape must be [P, D]");
    field = Shape2D{s[0], s[1]};
  };
}

Setter set_optional(std::optional<std::size_t>& field) {
  return [&field](const json& v) {
    if (v.is_null()) field.reset();
    else field = v.get<std::size_t>();
  };
}

json shape_json(const std::optional<Shape2D>& s) {
  if (!s) return nullptr;
  return json::array({s->patches, s->dims});
}

json optional_json(const std::optional<std::size_t>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, RunConfig c) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: not valid JSON: ") + e.what());
  }

  auto& s = c.synthetic;
  auto& t = c.train;
  const std::map<std::string, Setter> synthetic_setters = {
      {"n_bags", set(s.n_bags)},
      {"n_min", set(s.n_min)},
      {"n_max", set(s.n_max)},
      {"dim", set(s.dim)},
      {"witness_rate", set(s.witness_rate)},
      {"class_centers", set(s.class_centers)},
      {"classes", set(s.classes)},
      {"center_radius", set(s.center_radius)},
      {"noise_sigma", set(s.noise_sigma)},
      {"distractor_sigma", set(s.distractor_sigma)},
      {"shape", set_shape(s.shape)},
      {"train_fraction", set(s.train_fraction)},
  };
  const std::map<std::string, Setter> train_setters = {
      {"strategy", [&t](const json& v) { t.strategy = parse_strategy(v.get<std::string>()); }},
      {"encoder", [&t](const json& v) { t.encoder = parse_encoder_kind(v.get<std::string>()); }},
      {"M_in", set_optional(c.in_dim)},
      {"M", set_optional(c.dim)},
      {"C", set_optional(c.classes)},
      {"K", set(t.hidden)},
      {"learning_rate", set(t.learning_rate)},
      {"epochs", set(t.epochs)},
      {"batch_size", set(t.batch_size)},
      {"freeze_encoder", set(t.freeze_encoder)},
      {"freeze_pooling", set(t.freeze_pooling)},
      {"freeze_head", set(t.freeze_head)},
      {"optimizer", [&t](const json& v) { t.optimizer = parse_optimizer_kind(v.get<std::string>()); }},
      {"adam_beta1", set(t.adam_beta1)},
      {"adam_beta2", set(t.adam_beta2)},
      {"adam_epsilon", set(t.adam_epsilon)},
      {"max_images", set(t.max_images)},
      {"concat_hidden", set(t.concat_hidden)},
      {"instance_shape", set_shape(t.instance_shape)},
  };
  const std::map<std::string, Setter> data_setters = {
      {"train_manifest", set(c.train_manifest)},
      {"eval_manifest", set(c.eval_manifest)},
  };
  const std::map<std::string, Setter> top = {
      {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"out", set(c.out)},
      {"data", [&](const json& v) { apply_section(v, "data", data_setters); }},
      {"synthetic", [&](const json& v) { apply_section(v, "synthetic", synthetic_setters); }},
      {"train", [&](const json& v) { apply_section(v, "train", train_setters); }},
      {"strategies",
       [&](const json& v) {
         c.strategies.clear();
         for (const auto& name : v.get<std::vector<std::string>>()) {
           c.strategies.push_back(parse_strategy(name));
         }
       }},
  };
  apply_section(doc, "", top);
  c.sync_seed();
  return c;
}

std::string run_config_json(const RunConfig& c) {
  const auto& s = c.synthetic;
  const auto& t = c.train;
  json strategies = json::array();
  for (Strategy st : c.strategies) strategies.push_back(std::string(to_string(st)));
  json doc = {
      {"seed", c.seed},
      {"out", c.out},
      {"data", {{"train_manifest", c.train_manifest}, {"eval_manifest", c.eval_manifest}}},
      {"synthetic",
       {{"n_bags", s.n_bags},
        {"n_min", s.n_min},
        {"n_max", s.n_max},
        {"dim", s.dim},
        {"witness_rate", s.witness_rate},
        {"class_centers", s.class_centers},
        {"classes", s.classes},
        {"center_radius", s.center_radius},
        {"noise_sigma", s.noise_sigma},
        {"distractor_sigma", s.distractor_sigma},
        {"shape", shape_json(s.shape)},
        {"train_fraction", s.train_fraction}}},
      {"train",
       {{"strategy", std::string(to_string(t.strategy))},
        {"encoder", std::string(to_string(t.encoder))},
        {"M_in", optional_json(c.in_dim)},
        {"M", optional_json(c.dim)},
        {"C", optional_json(c.classes)},
        {"K", t.hidden},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"freeze_encoder", t.freeze_encoder},
        {"freeze_pooling", t.freeze_pooling},
        {"freeze_head", t.freeze_head},
        {"optimizer", std::string(to_string(t.optimizer))},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"adam_epsilon", t.adam_epsilon},
        {"max_images", t.max_images},
        {"concat_hidden", t.concat_hidden},
        {"instance_shape", shape_json(t.instance_shape)}}},
      {"strategies", strategies},
  };
  return doc.dump(2) + "\n";
}

void resolve_dims(RunConfig& c, const std::vector<Bag>& bags, std::size_t classes) {
  if (bags.empty()) throw DataError("dataset is empty");
  const std::size_t data_dim = bags.front().dim();
  for (const Bag& b : bags) {
    b.validate();
    if (b.dim() != data_dim) {
      throw DataError("bag '" + b.id + "' has M=" + std::to_string(b.dim()) + ", expected " +
                      std::to_string(data_dim));
    }
  }
  if (c.in_dim && *c.in_dim != data_dim) {
    throw DataError("config M_in=" + std::to_string(*c.in_dim) + " but data has M=" +
                    std::to_string(data_dim));
  }
  if (c.classes && *c.classes < classes) {
    throw DataError("config C=" + std::to_string(*c.classes) + " but data has " +
                    std::to_string(classes) + " classes");
  }
  c.train.in_dim = data_dim;
  c.train.classes = c.classes.value_or(classes);
  c.train.dim = c.dim.value_or(data_dim);
  if (!c.train.instance_shape && bags.front().instances.front().shape) {
    c.train.instance_shape = bags.front().instances.front().shape;
  }
  c.in_dim = c.train.in_dim;
  c.dim = c.train.dim;
  c.classes = c.train.classes;
}

}  // namespace mivc
