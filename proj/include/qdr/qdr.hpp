#pragma once

#include "qdr/baselines.hpp"
#include "qdr/bench.hpp"
#include "qdr/clustering.hpp"
#include "qdr/core.hpp"
#include "qdr/data_io.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_bitmap.hpp"
#include "qdr/keyword_metric.hpp"
#include "qdr/persistence.hpp"
#include "qdr/qc_tree.hpp"
#include "qdr/query_engine.hpp"
#include "qdr/skyline.hpp"
