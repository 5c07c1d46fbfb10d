#pragma once

#include "drought/ann.hpp"
#include "drought/config.hpp"
#include "drought/error.hpp"
#include "drought/evaluation.hpp"
#include "drought/features.hpp"
#include "drought/gam.hpp"
#include "drought/indices.hpp"
#include "drought/metrics.hpp"
#include "drought/model_space.hpp"
#include "drought/panel.hpp"
#include "drought/pipeline.hpp"
#include "drought/serialize.hpp"
