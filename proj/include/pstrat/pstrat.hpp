#pragma once

#include "pstrat/version.hpp"
#include "pstrat/errors.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/core_types.hpp"
#include "pstrat/empirical.hpp"
#include "pstrat/model_fit.hpp"
#include "pstrat/estimand.hpp"
#include "pstrat/bootstrap.hpp"
#include "pstrat/sensitivity.hpp"
#include "pstrat/simulation.hpp"
#include "pstrat/csv_io.hpp"
