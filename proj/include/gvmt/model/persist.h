#pragma once

#include <filesystem>

#include "gvmt/dataio/checkpoint.h"
#include "gvmt/model/pipeline.h"
#include "gvmt/numerics/optim.h"

namespace gvmt::model {

// Config, vocabularies, visual geometry, parameters and (optionally) the
// optimizer moments.
data::Checkpoint make_checkpoint(const Model& model, const num::OptimizerState* optimizer = nullptr);

// Copies tensors into an existing model; every parameter must be present
// with the same shape (ShapeError otherwise).
void apply_checkpoint(Model& model, const data::Checkpoint& ckpt);

struct LoadedModel {
  Model model;
  num::OptimizerState optimizer;
};

LoadedModel model_from_checkpoint(const data::Checkpoint& ckpt);

void save_model(const Model& model, const std::filesystem::path& path, const num::OptimizerState* optimizer = nullptr);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace gvmt::model
