#pragma once

#include "imocp/calibrators.hpp"
#include "imocp/core.hpp"
#include "imocp/feedback.hpp"
#include "imocp/metrics.hpp"
#include "imocp/mirror.hpp"
#include "imocp/prior.hpp"
