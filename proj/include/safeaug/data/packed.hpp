#pragma once

#include <string>

#include "safeaug/data/dataset.hpp"

namespace safeaug {

/// Write a dataset in the prepared raw-tensor ("pack") layout that
/// load_dataset consumes for tiny-imagenet / cityscapes style sources.
void write_pack(const DatasetHandle& ds, const std::string& root);

}  // namespace safeaug
