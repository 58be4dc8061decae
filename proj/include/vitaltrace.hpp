#pragma once

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/config.hpp"
#include "vitaltrace/error.hpp"
#include "vitaltrace/eval.hpp"
#include "vitaltrace/flow.hpp"
#include "vitaltrace/image.hpp"
#include "vitaltrace/io.hpp"
#include "vitaltrace/media_io.hpp"
#include "vitaltrace/pipeline.hpp"
#include "vitaltrace/refine.hpp"
#include "vitaltrace/roi.hpp"
#include "vitaltrace/spectral.hpp"
#include "vitaltrace/synth.hpp"
