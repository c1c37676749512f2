#include "gvmt/model/persist.h"

#include <algorithm>
#include <map>

#include "gvmt/errors.h"

namespace gvmt::model {

using num::Tensor;

data::Checkpoint make_checkpoint(const Model& model, const num::OptimizerState* optimizer) {
  data::Checkpoint ckpt;
  ckpt.config["run"] = model.config().to_json();
  ckpt.config["src_vocab"] = model.source_vocab().tokens();
  ckpt.config["tgt_vocab"] = model.target_vocab().tokens();
  ckpt.config["regions"] = model.regions();
  ckpt.config["visual_dim"] = model.visual_dim();
  const auto params = model.parameters();
  for (const auto& p : params) ckpt.tensors.push_back({p.name, p.tensor.detach(false)});
  if (optimizer) {
    ckpt.config["optimizer"] = {{"step", optimizer->step},
                                {"beta1", optimizer->beta1},
                                {"beta2", optimizer->beta2},
                                {"epsilon", optimizer->epsilon},
                                {"rectified", optimizer->rectified}};
    if (!optimizer->first_moment.empty()) {
      if (optimizer->first_moment.size() != params.size() || optimizer->second_moment.size() != params.size()) {
        throw ShapeError("optimizer state does not match the parameter list");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& shape = params[i].tensor.shape();
        ckpt.tensors.push_back({"opt.m." + params[i].name, Tensor::from_data(shape, optimizer->first_moment[i])});
        ckpt.tensors.push_back({"opt.v." + params[i].name, Tensor::from_data(shape, optimizer->second_moment[i])});
      }
    }
  }
  return ckpt;
}

namespace {

std::map<std::string, const Tensor*> by_name(const data::Checkpoint& ckpt) {
  std::map<std::string, const Tensor*> out;
  for (const auto& t : ckpt.tensors) out[t.name] = &t.tensor;
  return out;
}

const Tensor& require(const std::map<std::string, const Tensor*>& m, const std::string& name, const num::Shape& shape) {
  auto it = m.find(name);
  if (it == m.end()) throw ShapeError("checkpoint is missing tensor " + name);
  if (it->second->shape() != shape) {
    throw ShapeError("checkpoint tensor " + name + " has shape " + num::shape_str(it->second->shape()) +
                     ", model expects " + num::shape_str(shape));
  }
  return *it->second;
}

}  // namespace

void apply_checkpoint(Model& model, const data::Checkpoint& ckpt) {
  const auto m = by_name(ckpt);
  const auto params = model.parameters();
  // Validate everything before writing anything.
  for (const auto& p : params) require(m, p.name, p.tensor.shape());
  for (const auto& p : params) {
    const auto src = m.at(p.name)->data();
    auto dst = Tensor(p.tensor).mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

LoadedModel model_from_checkpoint(const data::Checkpoint& ckpt) {
  const auto& c = ckpt.config;
  try {
    RunConfig cfg = RunConfig::from_json(c.at("run"));
    auto src = data::Vocabulary::from_tokens(c.at("src_vocab").get<std::vector<std::string>>());
    auto tgt = data::Vocabulary::from_tokens(c.at("tgt_vocab").get<std::vector<std::string>>());
    LoadedModel out{Model(cfg, std::move(src), std::move(tgt), c.at("regions").get<std::size_t>(),
                          c.at("visual_dim").get<std::size_t>()),
                    {}};
    apply_checkpoint(out.model, ckpt);
    if (c.contains("optimizer")) {
      const auto& o = c.at("optimizer");
      out.optimizer.step = o.at("step").get<std::uint64_t>();
      out.optimizer.beta1 = o.at("beta1").get<double>();
      out.optimizer.beta2 = o.at("beta2").get<double>();
      out.optimizer.epsilon = o.at("epsilon").get<double>();
      out.optimizer.rectified = o.at("rectified").get<bool>();
      const auto m = by_name(ckpt);
      const auto params = out.model.parameters();
      if (m.count("opt.m." + params.front().name)) {
        for (const auto& p : params) {
          out.optimizer.first_moment.push_back(require(m, "opt.m." + p.name, p.tensor.shape()).to_vector());
          out.optimizer.second_moment.push_back(require(m, "opt.v." + p.name, p.tensor.shape()).to_vector());
        }
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint config: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path, const num::OptimizerState* optimizer) {
  data::save_checkpoint(make_checkpoint(model, optimizer), path);
}

LoadedModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(data::load_checkpoint(path)); }

}  // namespace gvmt::model
