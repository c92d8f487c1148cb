#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pointattn/model.hpp"

namespace pointattn::model {

// Checkpoints are a line-oriented text map, stable across versions:
//
//   pointattn-checkpoint v1
//   config <key> <value>     model architecture + ablation flags
//   meta <key> <value>       caller metadata (pipeline settings, names)
//   tensor <name> <rank> <extents...> : <values...>
//   end
//
// Values are printed with 17 significant digits, so a save/load round
// trip restores every float64 bit-exactly. Parameters and batch-norm
// running statistics are both stored as `tensor` lines.
void save_checkpoint(const std::string& path, Network& net,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});

Network load_checkpoint(const std::string& path,
                        std::vector<std::pair<std::string, std::string>>* meta_out = nullptr);

}  // namespace pointattn::model
