#pragma once

#include "mcle/data.hpp"
#include "mcle/engine.hpp"
#include "mcle/eval.hpp"
#include "mcle/matrix.hpp"
#include "mcle/prior.hpp"
#include "mcle/sampler.hpp"
#include "mcle/service.hpp"
#include "mcle/svm.hpp"
