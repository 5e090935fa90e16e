#pragma once

// Everything: panel data, geometry, first stage, criterion, grid search and
// the simulation lab.
#include "pmc/criterion.hpp"
#include "pmc/error.hpp"
#include "pmc/first_stage/gamma.hpp"
#include "pmc/first_stage/serialize.hpp"
#include "pmc/optimizer.hpp"
#include "pmc/panel.hpp"
#include "pmc/panel_csv.hpp"
#include "pmc/pipeline.hpp"
#include "pmc/report.hpp"
#include "pmc/simlab/config.hpp"
#include "pmc/simlab/dgp.hpp"
#include "pmc/simlab/mc.hpp"
#include "pmc/simlab/ols.hpp"
#include "pmc/simlab/oracle.hpp"
#include "pmc/sphere.hpp"
#include "pmc/version.hpp"
