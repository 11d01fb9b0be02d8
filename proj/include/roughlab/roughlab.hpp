#pragma once

#include "roughlab/blocks_cf.hpp"
#include "roughlab/experiments.hpp"
#include "roughlab/keyvalue.hpp"
#include "roughlab/limit_objects.hpp"
#include "roughlab/norms_metrics.hpp"
#include "roughlab/parallel.hpp"
#include "roughlab/path.hpp"
#include "roughlab/processes.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/signature.hpp"
#include "roughlab/suspension.hpp"
#include "roughlab/tensor_algebra.hpp"
