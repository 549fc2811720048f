#pragma once

#include "ratelab/aggregation.hpp"
#include "ratelab/config.hpp"
#include "ratelab/dataset.hpp"
#include "ratelab/env_model.hpp"
#include "ratelab/error.hpp"
#include "ratelab/io.hpp"
#include "ratelab/random.hpp"
#include "ratelab/rating_analytics.hpp"
#include "ratelab/recommenders.hpp"
#include "ratelab/report.hpp"
#include "ratelab/sim_loop.hpp"
#include "ratelab/stats_engine.hpp"
#include "ratelab/table.hpp"
