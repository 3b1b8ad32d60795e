#pragma once

// Core library: everything except the HTTP service (nbclust/service.hpp),
// which additionally needs cpp-httplib and a threads library.

#include "nbclust/analysis.hpp"
#include "nbclust/benchmark.hpp"
#include "nbclust/dataset.hpp"
#include "nbclust/decomposition.hpp"
#include "nbclust/em.hpp"
#include "nbclust/error.hpp"
#include "nbclust/mixture.hpp"
#include "nbclust/moments.hpp"
#include "nbclust/pipeline.hpp"
#include "nbclust/random.hpp"
#include "nbclust/serialization.hpp"
