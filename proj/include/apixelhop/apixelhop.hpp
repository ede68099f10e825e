#pragma once

#include "blocks.hpp"
#include "channelsel.hpp"
#include "corpus.hpp"
#include "detector.hpp"
#include "ensemble.hpp"
#include "error.hpp"
#include "gbdt.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "jacobi.hpp"
#include "metrics.hpp"
#include "model_store.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "saab.hpp"
#include "synthgen.hpp"
