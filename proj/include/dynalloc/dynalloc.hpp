#pragma once

// Umbrella header for the whole library.

#include "dynalloc/allocators.hpp"
#include "dynalloc/alpha_models.hpp"
#include "dynalloc/backtester.hpp"
#include "dynalloc/csv.hpp"
#include "dynalloc/data_panel.hpp"
#include "dynalloc/date.hpp"
#include "dynalloc/dependence.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/lp.hpp"
#include "dynalloc/optimize.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/pipeline.hpp"
#include "dynalloc/regime_switch.hpp"
#include "dynalloc/rng.hpp"
#include "dynalloc/scenario_engine.hpp"
#include "dynalloc/synthetic.hpp"
#include "dynalloc/univariate_vol.hpp"
