#pragma once

#include "tasdl/channel.hpp"
#include "tasdl/dataset.hpp"
#include "tasdl/error.hpp"
#include "tasdl/eval.hpp"
#include "tasdl/knn.hpp"
#include "tasdl/matrix.hpp"
#include "tasdl/mlp.hpp"
#include "tasdl/parallel.hpp"
#include "tasdl/rng.hpp"
#include "tasdl/secrecy.hpp"
