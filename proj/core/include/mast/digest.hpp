#pragma once

#include <string>
#include <string_view>

#include "mast/seq2seq.hpp"

namespace mast {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Digest of the agent's serialized parameters and vocabularies.
std::string agent_digest(const AgentModel& agent);

}  // namespace mast
