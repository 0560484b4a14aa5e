#pragma once

#include "pstrat/config.hpp"
#include "pstrat/csv.hpp"
#include "pstrat/data.hpp"
#include "pstrat/diagnostics.hpp"
#include "pstrat/estimands.hpp"
#include "pstrat/generator.hpp"
#include "pstrat/kaplan_meier.hpp"
#include "pstrat/model.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/run.hpp"
#include "pstrat/sampler.hpp"
#include "pstrat/version.hpp"
#include "pstrat/weibull.hpp"
