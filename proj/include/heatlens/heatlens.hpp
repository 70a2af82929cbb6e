#pragma once

#include "heatlens/basis_io.hpp"
#include "heatlens/diagnostics.hpp"
#include "heatlens/discrete_backend.hpp"
#include "heatlens/discrete_space.hpp"
#include "heatlens/eigensolver.hpp"
#include "heatlens/error.hpp"
#include "heatlens/fields.hpp"
#include "heatlens/mesh.hpp"
#include "heatlens/metric.hpp"
#include "heatlens/model_backend.hpp"
#include "heatlens/operators.hpp"
#include "heatlens/report.hpp"
#include "heatlens/space_json.hpp"
#include "heatlens/spaces.hpp"
#include "heatlens/spectral.hpp"
#include "heatlens/version.hpp"
