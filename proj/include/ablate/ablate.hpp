#pragma once

// Umbrella header.

#include "ablate/ablation.hpp"
#include "ablate/core.hpp"
#include "ablate/error.hpp"
#include "ablate/estimator.hpp"
#include "ablate/exec_model.hpp"
#include "ablate/io.hpp"
#include "ablate/model_spec.hpp"
#include "ablate/models.hpp"
#include "ablate/oracle.hpp"
#include "ablate/pipeline.hpp"
#include "ablate/rng.hpp"
#include "ablate/uncertainty.hpp"
#include "ablate/version.hpp"
