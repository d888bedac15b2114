#pragma once

#include "gdf/core.hpp"
#include "gdf/scalar_penalty.hpp"
#include "gdf/rs_solver.hpp"
#include "gdf/model_selection.hpp"
#include "gdf/datagen.hpp"
#include "gdf/amp.hpp"
#include "gdf/oracle.hpp"
