#pragma once

#include "boxdraw/bounds.hpp"
#include "boxdraw/core.hpp"
#include "boxdraw/eval.hpp"
#include "boxdraw/exactboxes.hpp"
#include "boxdraw/fastboxes.hpp"
#include "boxdraw/random.hpp"
