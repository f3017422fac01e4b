#pragma once

#include "wmsr/checkpoint.hpp"
#include "wmsr/config.hpp"
#include "wmsr/data.hpp"
#include "wmsr/evaluate.hpp"
#include "wmsr/gradcheck.hpp"
#include "wmsr/image.hpp"
#include "wmsr/kv.hpp"
#include "wmsr/losses.hpp"
#include "wmsr/metrics.hpp"
#include "wmsr/model.hpp"
#include "wmsr/ops.hpp"
#include "wmsr/optim.hpp"
#include "wmsr/parallel.hpp"
#include "wmsr/png_io.hpp"
#include "wmsr/tensor.hpp"
#include "wmsr/train.hpp"
#include "wmsr/wavelet.hpp"
