#pragma once

// Adapter for the pretrained backbones, available when the project is built
// with -DSIGNFLOW_WITH_TORCH=ON. Expects a scripted module exported by
// tools/export_backbone.py whose forward returns (logits, feature_maps).

#include <memory>

#include "signflow/model_zoo.hpp"

namespace signflow::zoo {

std::unique_ptr<Model> build_torch_model(const BackboneSpec& spec, const ZooOptions& opts);

}  // namespace signflow::zoo
