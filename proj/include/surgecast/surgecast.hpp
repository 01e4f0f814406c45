#pragma once

#include "surgecast/checkpoint.hpp"
#include "surgecast/clips.hpp"
#include "surgecast/config.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/forecast.hpp"
#include "surgecast/ingest.hpp"
#include "surgecast/metrics.hpp"
#include "surgecast/nn/conv.hpp"
#include "surgecast/nn/convlstm.hpp"
#include "surgecast/nn/network.hpp"
#include "surgecast/pipeline.hpp"
#include "surgecast/png.hpp"
#include "surgecast/random.hpp"
#include "surgecast/raster.hpp"
#include "surgecast/synthetic.hpp"
#include "surgecast/tensor.hpp"
#include "surgecast/train.hpp"
