#pragma once

#include "ltnc/autodiff.hpp"
#include "ltnc/curriculum.hpp"
#include "ltnc/experiment.hpp"
#include "ltnc/formula.hpp"
#include "ltnc/fuzzy.hpp"
#include "ltnc/kb.hpp"
#include "ltnc/rng.hpp"
#include "ltnc/sat.hpp"
#include "ltnc/tasks.hpp"
