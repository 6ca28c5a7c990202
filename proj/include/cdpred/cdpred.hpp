#pragma once

#include "common.hpp"
#include "data.hpp"
#include "cohort_io.hpp"
#include "preprocess.hpp"
#include "pca.hpp"
#include "trees.hpp"
#include "forest.hpp"
#include "neural.hpp"
#include "mews.hpp"
#include "eval.hpp"
#include "pipeline.hpp"
