// ahe.hpp - umbrella header
#pragma once

#include "ahe/types.hpp"
#include "ahe/field.hpp"
#include "ahe/spectral_grid.hpp"
#include "ahe/field_io.hpp"
#include "ahe/bundle.hpp"
#include "ahe/topology.hpp"
#include "ahe/moment_map.hpp"
#include "ahe/flow.hpp"
#include "ahe/functional.hpp"
#include "ahe/diagnostics.hpp"
#include "ahe/initial_data.hpp"
