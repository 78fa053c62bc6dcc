#pragma once

#include "surjnd/error.hpp"
#include "surjnd/media_io.hpp"
#include "surjnd/segmenter.hpp"
#include "surjnd/quality_index.hpp"
#include "surjnd/features.hpp"
#include "surjnd/sur_model.hpp"
#include "surjnd/svr.hpp"
#include "surjnd/synthetic.hpp"
#include "surjnd/evaluator.hpp"
#include "surjnd/dataset.hpp"
