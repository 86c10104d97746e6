#pragma once

#include "perpetua/builtin_models.hpp"
#include "perpetua/classify.hpp"
#include "perpetua/degeneracy.hpp"
#include "perpetua/discrete_law.hpp"
#include "perpetua/error.hpp"
#include "perpetua/homology.hpp"
#include "perpetua/limits.hpp"
#include "perpetua/model.hpp"
#include "perpetua/model_io.hpp"
#include "perpetua/oracle.hpp"
#include "perpetua/report.hpp"
#include "perpetua/rng.hpp"
#include "perpetua/simulate.hpp"
