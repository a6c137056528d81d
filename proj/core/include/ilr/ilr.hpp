#pragma once

#include "ilr/data.hpp"
#include "ilr/dist.hpp"
#include "ilr/error.hpp"
#include "ilr/features.hpp"
#include "ilr/metrics.hpp"
#include "ilr/model.hpp"
#include "ilr/predict.hpp"
#include "ilr/vbem.hpp"
