#pragma once

#include <nlohmann/json.hpp>

#include "kpzss/asymptotics.hpp"
#include "kpzss/blowup.hpp"
#include "kpzss/ode.hpp"
#include "kpzss/pde.hpp"
#include "kpzss/profile.hpp"

namespace kpzss {

using json = nlohmann::ordered_json;

json to_json(const ModelParams& p);
json to_json(const ode::Tolerances& tol);
json to_json(const CheckReport& r, std::size_t max_listed = 20);
json to_json(const OdeResidualReport& r);
json to_json(const ResidualReport& r);
json to_json(const AsymptoticEstimate& e);
json to_json(const BlowupReport& r);
json to_json(const PdeRun& r);
// {lambda, q, T0, L, N, t_end, max_rel_err, l2_rel_err, refinement_ratio, ...}
json pde_summary(const ModelParams& p, const PdeRefinement& r);
json profile_summary(const ProfileSolution& sol);

}  // namespace kpzss
