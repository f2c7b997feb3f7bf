#pragma once

#include "fairhedge/tree.hpp"
#include "fairhedge/market.hpp"
#include "fairhedge/numeraire.hpp"
#include "fairhedge/hedging.hpp"
#include "fairhedge/oracle.hpp"
#include "fairhedge/perturbation.hpp"
#include "fairhedge/fixtures.hpp"
