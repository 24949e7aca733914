#pragma once

#include "octseg/config.hpp"
#include "octseg/error.hpp"
#include "octseg/graph_search.hpp"
#include "octseg/image.hpp"
#include "octseg/image_io.hpp"
#include "octseg/layers.hpp"
#include "octseg/metrics.hpp"
#include "octseg/phantom.hpp"
#include "octseg/preprocess.hpp"
