#pragma once

#include <map>
#include <string>

#include "cdpg/policy.hpp"

// Versioned binary containers (magic "CDPG1", little-endian 64-bit float
// payload) plus a text sidecar ("<path>.meta") carrying the vocab listing,
// max_len and featurizer mode needed to rebuild the policy.

namespace cdpg {

void save_policy_checkpoint(const Policy& p, const std::string& path);
Policy load_policy_checkpoint(const std::string& path);

// Lambda tables ride in the same container format (tag "lambda").
void save_lambda_table(const std::map<int, double>& table, const std::string& path);
std::map<int, double> load_lambda_table(const std::string& path);

}  // namespace cdpg
