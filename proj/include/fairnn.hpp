#pragma once

#include "fairnn/random.hpp"
#include "fairnn/set_family.hpp"
#include "fairnn/sketches.hpp"
#include "fairnn/union_sampling.hpp"
#include "fairnn/spaces.hpp"
#include "fairnn/lsh_index.hpp"
#include "fairnn/fair_nn.hpp"
#include "fairnn/lsf_index.hpp"
#include "fairnn/bench/dataset.hpp"
#include "fairnn/bench/queries.hpp"
#include "fairnn/bench/algorithms.hpp"
#include "fairnn/bench/metrics.hpp"
#include "fairnn/bench/experiments.hpp"
#include "fairnn/bench/index_io.hpp"
#include "fairnn/bench/stats.hpp"
#include "fairnn/bench/selftest.hpp"
