#ifndef EHNET_EHNET_HPP
#define EHNET_EHNET_HPP

#include "ehnet/bs_model.hpp"
#include "ehnet/errors.hpp"
#include "ehnet/flat_pomdp.hpp"
#include "ehnet/harvest.hpp"
#include "ehnet/lp.hpp"
#include "ehnet/network_model.hpp"
#include "ehnet/policies.hpp"
#include "ehnet/policy_io.hpp"
#include "ehnet/scenario.hpp"
#include "ehnet/simulator.hpp"
#include "ehnet/solver.hpp"

#endif // EHNET_EHNET_HPP
