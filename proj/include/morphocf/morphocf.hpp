#pragma once

#include "morphocf/association.hpp"
#include "morphocf/baselines.hpp"
#include "morphocf/coverage.hpp"
#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"
#include "morphocf/explain.hpp"
#include "morphocf/metrics.hpp"
#include "morphocf/predictor.hpp"
#include "morphocf/report.hpp"
#include "morphocf/schema.hpp"
#include "morphocf/subprocess.hpp"
