#pragma once

#include "hsharp/error.hpp"
#include "hsharp/fft.hpp"
#include "hsharp/gsa.hpp"
#include "hsharp/hysure.hpp"
#include "hsharp/metrics.hpp"
#include "hsharp/mtfglp.hpp"
#include "hsharp/pca.hpp"
#include "hsharp/pipeline.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/protocols.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/raster_io.hpp"
#include "hsharp/scene.hpp"
#include "hsharp/sensor_estimation.hpp"
#include "hsharp/stats.hpp"
#include "hsharp/vca.hpp"
