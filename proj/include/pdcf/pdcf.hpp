#pragma once

// Umbrella header for the whole toolkit.

#include "pdcf/autodiff.hpp"
#include "pdcf/checkpoint.hpp"
#include "pdcf/dataset.hpp"
#include "pdcf/errors.hpp"
#include "pdcf/image_io.hpp"
#include "pdcf/losses.hpp"
#include "pdcf/metrics.hpp"
#include "pdcf/network.hpp"
#include "pdcf/ops.hpp"
#include "pdcf/optimizer.hpp"
#include "pdcf/pdc.hpp"
#include "pdcf/pipeline.hpp"
#include "pdcf/tensor.hpp"
#include "pdcf/train.hpp"
