#pragma once

#include "repro/candidate.hpp"
#include "repro/coef_inference.hpp"
#include "repro/core.hpp"
#include "repro/csv.hpp"
#include "repro/harness.hpp"
#include "repro/joint.hpp"
#include "repro/json_io.hpp"
#include "repro/lasso.hpp"
#include "repro/mle.hpp"
#include "repro/model_confidence.hpp"
#include "repro/nelder_mead.hpp"
#include "repro/parallel.hpp"
#include "repro/rng.hpp"
#include "repro/sampler.hpp"
#include "repro/stats.hpp"
