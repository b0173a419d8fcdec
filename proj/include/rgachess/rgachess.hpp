#ifndef RGACHESS_RGACHESS_HPP
#define RGACHESS_RGACHESS_HPP

#include "calibration.hpp"
#include "chess.hpp"
#include "domain.hpp"
#include "evaluator.hpp"
#include "metrics.hpp"
#include "rga.hpp"
#include "study.hpp"
#include "uci.hpp"
#include "version.hpp"

#endif  // RGACHESS_RGACHESS_HPP
