#include "mast/digest.hpp"

#include <openssl/sha.h>

#include <cstdio>

namespace mast {

std::string sha256_hex(std::string_view data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  std::string out;
  char buf[3];
  for (unsigned char b : md) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

std::string agent_digest(const AgentModel& agent) { return sha256_hex(serialize_agent(agent)); }

}  // namespace mast
