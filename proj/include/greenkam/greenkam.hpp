#ifndef GREENKAM_GREENKAM_HPP
#define GREENKAM_GREENKAM_HPP

#include "greenkam/action.hpp"
#include "greenkam/common.hpp"
#include "greenkam/flow.hpp"
#include "greenkam/green.hpp"
#include "greenkam/grid.hpp"
#include "greenkam/lyapunov.hpp"
#include "greenkam/model.hpp"
#include "greenkam/regularity.hpp"
#include "greenkam/runner.hpp"
#include "greenkam/scenario.hpp"
#include "greenkam/weakkam.hpp"

#endif
