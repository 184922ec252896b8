#pragma once

#include "pidon/errors.hpp"
#include "pidon/autodiff/jet.hpp"
#include "pidon/autodiff/tape.hpp"
#include "pidon/autodiff/array_tape.hpp"
#include "pidon/mlp.hpp"
#include "pidon/operator_net.hpp"
#include "pidon/problem_spec.hpp"
#include "pidon/sampling.hpp"
#include "pidon/problems.hpp"
#include "pidon/training.hpp"
#include "pidon/solvers.hpp"
#include "pidon/metrics.hpp"
#include "pidon/rollout.hpp"
#include "pidon/pinn.hpp"
#include "pidon/io.hpp"
#include "pidon/pipeline.hpp"
