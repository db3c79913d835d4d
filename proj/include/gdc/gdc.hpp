#pragma once

#include "gdc/calibrate.hpp"
#include "gdc/classify.hpp"
#include "gdc/common.hpp"
#include "gdc/dataset.hpp"
#include "gdc/episodes.hpp"
#include "gdc/parallel.hpp"
#include "gdc/rng.hpp"
#include "gdc/sampling.hpp"
#include "gdc/search.hpp"
#include "gdc/serialize.hpp"
#include "gdc/stats.hpp"
#include "gdc/synth.hpp"
#include "gdc/transforms.hpp"
