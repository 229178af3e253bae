#pragma once

#include "jnet/adapt.hpp"
#include "jnet/config.hpp"
#include "jnet/data.hpp"
#include "jnet/errors.hpp"
#include "jnet/eval.hpp"
#include "jnet/gradcheck.hpp"
#include "jnet/gradcheck_suite.hpp"
#include "jnet/layers.hpp"
#include "jnet/model.hpp"
#include "jnet/question.hpp"
#include "jnet/tensor.hpp"
#include "jnet/train.hpp"
